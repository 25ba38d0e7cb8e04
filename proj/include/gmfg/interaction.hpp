#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>

#include "gmfg/common.hpp"

namespace gmfg {

/// n x n nonnegative interaction matrix with zero diagonal. Entry (i, j) is
/// the weight player i places on player j's state.
class InteractionMatrix {
public:
    InteractionMatrix() = default;

    explicit InteractionMatrix(Eigen::MatrixXd values, std::string provenance = "explicit")
        : values_(std::move(values)), provenance_(std::move(provenance)) {
        require(values_.rows() == values_.cols(), "interaction matrix must be square");
        for (Eigen::Index i = 0; i < values_.rows(); ++i) {
            require(values_(i, i) == 0.0,
                    "interaction matrix diagonal must be zero (row " + std::to_string(i) + ")");
            for (Eigen::Index j = 0; j < values_.cols(); ++j) {
                require(std::isfinite(values_(i, j)) && values_(i, j) >= 0.0,
                        "interaction matrix entries must be finite and nonnegative (" +
                            std::to_string(i) + ", " + std::to_string(j) + ")");
            }
        }
    }

    int size() const noexcept { return static_cast<int>(values_.rows()); }
    double operator()(int i, int j) const { return values_(i, j); }
    const Eigen::MatrixXd& values() const noexcept { return values_; }
    const std::string& provenance() const noexcept { return provenance_; }

private:
    Eigen::MatrixXd values_;
    std::string provenance_;
};

}  // namespace gmfg
