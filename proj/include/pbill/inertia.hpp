#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace pbill {

/// Sylvester inertia and determinant of a real symmetric matrix.
struct Inertia {
    std::size_t negative = 0;
    std::size_t zero = 0;
    std::size_t positive = 0;
    /// Product of the pivots; may be +-inf or 0 for badly scaled input.
    double determinant = 0.0;
};

/// Symmetric indefinite LDL^T with complete (Bunch-Parlett) pivoting. Pivots
/// whose magnitude falls below `zero_tol` times the largest entry count as zero.
Inertia symmetric_inertia(const Eigen::MatrixXd& a, double zero_tol = 0.0);

}  // namespace pbill
