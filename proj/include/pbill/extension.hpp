#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>

#include <Eigen/Dense>

#include "pbill/greens.hpp"

namespace pbill {

/// Self-adjoint extension angle, 0 <= theta < 2 pi. theta = 0 is the empty billiard.
struct ThetaParameter {
    double theta = std::numbers::pi;
    void validate() const;
};

/// Lambda sum_n phi_n(x_i)^2 / (e_n^2 + Lambda^2), plus its integral tail in integral mode.
Estimate lambda_weighted_norm(const SeriesTermSource& src, std::size_t i, const GreensAccuracy& acc);

/// 1/vbar_i = Lambda cot(theta/2) sum phi^2 / (e^2 + Lambda^2). Throws ContractError at theta = 0.
Estimate vbar_inv_from_theta(const SeriesTermSource& src, std::size_t i, ThetaParameter theta,
                             const GreensAccuracy& acc);

/// Inverse of vbar_inv_from_theta; the result lies in (0, 2 pi).
ThetaParameter theta_from_vbar_inv(const SeriesTermSource& src, std::size_t i, double vbar_inv,
                                   const GreensAccuracy& acc);

struct UnitarityReport {
    /// U = -transpose(lambda(-i Lambda) lambda^{-1}(i Lambda)).
    Eigen::MatrixXcd u;
    /// max |U^dagger U - 1|.
    double plain_defect = 0.0;
    /// The same defect for U expressed in an orthonormal basis of the deficiency
    /// space, G^{1/2} U^T G^{-1/2} with Gram G = (lambda^{-1}(-i Lambda) - lambda^{-1}(i Lambda)) / 2 i Lambda.
    /// For N = 1 both defects coincide.
    double metric_defect = 0.0;
    /// U itself for N = 1.
    std::optional<cplx> phase;
};

/// Builds U from samples at +i Lambda and -i Lambda. Throws NumericalError when
/// lambda^{-1}(i Lambda) is singular to working precision.
UnitarityReport unitarity_defect(const LambdaMatrixSample& plus, const LambdaMatrixSample& minus);

/// max |lambda^{-1}(omega)^dagger - lambda^{-1}(conj omega)|.
double hermitian_conjugation_check(const LambdaInverse& li, cplx omega);

}  // namespace pbill
