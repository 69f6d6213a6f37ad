#include "pbill/inertia.hpp"

#include <cmath>
#include <utility>

#include "pbill/error.hpp"

namespace pbill {

Inertia symmetric_inertia(const Eigen::MatrixXd& input, double zero_tol) {
    if (input.rows() != input.cols()) throw ContractError("inertia needs a square matrix");
    const Eigen::Index n = input.rows();
    Eigen::MatrixXd a = input;
    Inertia out;
    out.determinant = 1.0;
    const double scale = a.cwiseAbs().maxCoeff();
    const double floor = zero_tol * scale;
    // Bunch-Parlett growth bound.
    const double alpha = (1.0 + std::sqrt(17.0)) / 8.0;

    auto swap_sym = [&](Eigen::Index i, Eigen::Index j) {
        if (i == j) return;
        a.row(i).swap(a.row(j));
        a.col(i).swap(a.col(j));
    };

    Eigen::Index k = 0;
    while (k < n) {
        const Eigen::Index m = n - k;
        auto rest = a.bottomRightCorner(m, m);
        Eigen::Index di = 0;
        const double mu1 = rest.diagonal().cwiseAbs().maxCoeff(&di);
        double mu0 = mu1;
        Eigen::Index oi = 0, oj = 0;
        for (Eigen::Index j = 0; j < m; ++j) {
            for (Eigen::Index i = j + 1; i < m; ++i) {
                if (std::abs(rest(i, j)) > mu0) {
                    mu0 = std::abs(rest(i, j));
                    oi = i;
                    oj = j;
                }
            }
        }
        if (mu0 <= floor) {
            out.zero += static_cast<std::size_t>(m);
            out.determinant = 0.0;
            break;
        }
        if (mu1 >= alpha * mu0) {
            swap_sym(k, k + di);
            const double d = a(k, k);
            if (d > 0.0) {
                ++out.positive;
            } else {
                ++out.negative;
            }
            out.determinant *= d;
            const Eigen::Index r = m - 1;
            if (r > 0) {
                const Eigen::VectorXd l = a.col(k).tail(r) / d;
                a.bottomRightCorner(r, r).noalias() -= l * a.row(k).tail(r);
            }
            k += 1;
        } else {
            // 2x2 pivot on the dominant off-diagonal pair; its determinant is negative.
            swap_sym(k, k + oj);
            swap_sym(k + 1, k + oi);
            const double p = a(k, k), q = a(k + 1, k + 1), c = a(k + 1, k);
            const double det = p * q - c * c;
            ++out.negative;
            ++out.positive;
            out.determinant *= det;
            const Eigen::Index r = m - 2;
            if (r > 0) {
                Eigen::Matrix2d e;
                e << p, c, c, q;
                const Eigen::Matrix2d e_inv = e.inverse();
                const Eigen::MatrixXd b = a.block(k + 2, k, r, 2);
                a.bottomRightCorner(r, r).noalias() -= b * e_inv * b.transpose();
            }
            k += 2;
        }
    }
    return out;
}

}  // namespace pbill
