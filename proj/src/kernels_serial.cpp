#include "kernels_impl.hpp"

namespace pbill::kernels::serial {

double resolvent_sum(std::span<const double> weight, std::span<const double> energy, double omega) {
    return detail::resolvent_range(weight.data(), energy.data(), 0, energy.size(), omega);
}

cplx resolvent_sum(std::span<const double> weight, std::span<const double> energy, cplx omega) {
    return detail::resolvent_range(weight.data(), energy.data(), 0, energy.size(), omega);
}

SumSlope resolvent_sum_slope(std::span<const double> weight, std::span<const double> energy, double omega) {
    return detail::resolvent_slope_range(weight.data(), energy.data(), 0, energy.size(), omega);
}

double counterterm_sum(std::span<const double> weight, std::span<const double> energy, double lambda) {
    return detail::counterterm_range(weight.data(), energy.data(), 0, energy.size(), lambda);
}

void pair_sums(Columns phi, std::span<const double> energy, double omega, std::span<double> out) {
    detail::pair_range(phi, energy.data(), 0, energy.size(), omega, out.data());
}

void pair_sums(Columns phi, std::span<const double> energy, cplx omega, std::span<cplx> out) {
    detail::pair_range(phi, energy.data(), 0, energy.size(), omega, out.data());
}

}  // namespace pbill::kernels::serial
