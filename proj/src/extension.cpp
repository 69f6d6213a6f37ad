#include "pbill/extension.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "pbill/error.hpp"

namespace pbill {

namespace {
constexpr double pi = std::numbers::pi;
}

void ThetaParameter::validate() const {
    if (!(theta >= 0.0 && theta < 2.0 * pi)) {
        throw ContractError("theta = " + std::to_string(theta) + " is outside [0, 2 pi)");
    }
}

Estimate lambda_weighted_norm(const SeriesTermSource& src, std::size_t i, const GreensAccuracy& acc) {
    acc.validate();
    const double lambda = src.lambda();
    const double e_cut = src.table().energy(acc.n_max - 1);
    double k = src.inverse_square_sum(i, acc.n_max);
    // Remainder terms are ~ phi^2 / E^2 with random amplitude ~1/S.
    double err = std::sqrt(src.rho() / (3.0 * e_cut * e_cut * e_cut)) / (src.spec().area() * e_cut);
    const double tail = src.tail_prefactor() * (pi / 2.0 - std::atan(e_cut / lambda)) / lambda;
    if (acc.tail == TailMode::integral) {
        k += tail;
    } else {
        err += tail;
    }
    return {lambda * k, lambda * err};
}

Estimate vbar_inv_from_theta(const SeriesTermSource& src, std::size_t i, ThetaParameter theta,
                             const GreensAccuracy& acc) {
    theta.validate();
    if (theta.theta == 0.0) {
        throw ContractError("theta = 0 is the empty-billiard limit (1/vbar infinite)");
    }
    const Estimate k = lambda_weighted_norm(src, i, acc);
    // cot(theta/2) via cos/sin keeps theta = pi exactly at zero.
    const double half = 0.5 * theta.theta;
    const double cot = theta.theta == pi ? 0.0 : std::cos(half) / std::sin(half);
    return {k.value * cot, k.abs_error * std::abs(cot)};
}

ThetaParameter theta_from_vbar_inv(const SeriesTermSource& src, std::size_t i, double vbar_inv,
                                   const GreensAccuracy& acc) {
    if (!std::isfinite(vbar_inv)) throw ContractError("1/vbar must be finite");
    const double k = lambda_weighted_norm(src, i, acc).value;
    return {2.0 * std::atan2(k, vbar_inv)};
}

UnitarityReport unitarity_defect(const LambdaMatrixSample& plus, const LambdaMatrixSample& minus) {
    const Eigen::Index n = plus.matrix.rows();
    if (n == 0 || minus.matrix.rows() != n) throw ContractError("unitarity check needs two samples of equal size");
    const double lambda = plus.omega.imag();
    if (!(lambda > 0.0) || plus.omega.real() != 0.0 || minus.omega != std::conj(plus.omega)) {
        throw ContractError("unitarity check needs samples at +i Lambda and -i Lambda");
    }
    const Eigen::PartialPivLU<Eigen::MatrixXcd> lu_plus(plus.matrix);
    const Eigen::PartialPivLU<Eigen::MatrixXcd> lu_minus(minus.matrix);
    if (lu_plus.rcond() < 1e-14 || lu_minus.rcond() < 1e-14) {
        throw NumericalError("lambda^{-1}(+-i Lambda) is singular; the extension is ill-conditioned");
    }
    UnitarityReport rep;
    // lambda(-i Lambda) lambda^{-1}(i Lambda) = minus^{-1} plus.
    rep.u = -(lu_minus.solve(plus.matrix)).transpose();
    const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);
    rep.plain_defect = (rep.u.adjoint() * rep.u - id).cwiseAbs().maxCoeff();

    const Eigen::MatrixXcd gram = (minus.matrix - plus.matrix) / cplx(0.0, 2.0 * lambda);
    const Eigen::MatrixXcd herm = 0.5 * (gram + gram.adjoint());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
        throw NumericalError("deficiency Gram matrix is not positive definite");
    }
    const Eigen::MatrixXcd root = es.operatorSqrt();
    const Eigen::MatrixXcd inv_root = es.operatorInverseSqrt();
    const Eigen::MatrixXcd u_tilde = root * rep.u.transpose() * inv_root;
    rep.metric_defect = (u_tilde.adjoint() * u_tilde - id).cwiseAbs().maxCoeff();
    if (n == 1) rep.phase = rep.u(0, 0);
    return rep;
}

double hermitian_conjugation_check(const LambdaInverse& li, cplx omega) {
    const LambdaMatrixSample a = li.at(omega);
    if (omega.imag() == 0.0) {
        return (a.matrix.adjoint() - a.matrix).cwiseAbs().maxCoeff();
    }
    const LambdaMatrixSample b = li.at(std::conj(omega));
    return (a.matrix.adjoint() - b.matrix).cwiseAbs().maxCoeff();
}

}  // namespace pbill
