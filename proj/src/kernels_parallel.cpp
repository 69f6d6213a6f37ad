#include <algorithm>
#include <vector>

#include "kernels_impl.hpp"

#ifdef PBILL_HAVE_OPENMP
#include <omp.h>
#endif

namespace pbill::kernels::parallel {

namespace {

// Below this many terms the fork/join overhead dominates.
constexpr std::size_t min_parallel_terms = 1u << 14;

int team_size(std::size_t n) {
#ifdef PBILL_HAVE_OPENMP
    if (n < min_parallel_terms || omp_in_parallel()) return 1;
    return std::max(1, omp_get_max_threads());
#else
    (void)n;
    return 1;
#endif
}

// Static contiguous chunks, one per thread; partials combined in thread order.
template <class Acc, class Body>
Acc chunked_reduce(std::size_t n, Body body) {
    const int teams = team_size(n);
    if (teams == 1) return body(std::size_t{0}, n);
    std::vector<Acc> partial(static_cast<std::size_t>(teams));
#ifdef PBILL_HAVE_OPENMP
#pragma omp parallel num_threads(teams)
    {
        const auto t = static_cast<std::size_t>(omp_get_thread_num());
        const auto nt = static_cast<std::size_t>(omp_get_num_threads());
        const std::size_t begin = n * t / nt;
        const std::size_t end = n * (t + 1) / nt;
        partial[t] = body(begin, end);
    }
#endif
    Acc total{};
    for (const Acc& p : partial) total += p;
    return total;
}

template <class T>
void pair_sums_impl(Columns phi, std::span<const double> energy, T omega, std::span<T> out) {
    const std::size_t n = energy.size();
    const int teams = team_size(n);
    if (teams == 1) {
        detail::pair_range(phi, energy.data(), 0, n, omega, out.data());
        return;
    }
    const std::size_t width = out.size();
    std::vector<T> partial(width * static_cast<std::size_t>(teams));
#ifdef PBILL_HAVE_OPENMP
#pragma omp parallel num_threads(teams)
    {
        const auto t = static_cast<std::size_t>(omp_get_thread_num());
        const auto nt = static_cast<std::size_t>(omp_get_num_threads());
        detail::pair_range(phi, energy.data(), n * t / nt, n * (t + 1) / nt, omega, partial.data() + t * width);
    }
#endif
    for (std::size_t t = 0; t < static_cast<std::size_t>(teams); ++t)
        for (std::size_t p = 0; p < width; ++p) out[p] += partial[t * width + p];
}

}  // namespace

double resolvent_sum(std::span<const double> weight, std::span<const double> energy, double omega) {
    return chunked_reduce<double>(energy.size(), [&](std::size_t b, std::size_t e) {
        return detail::resolvent_range(weight.data(), energy.data(), b, e, omega);
    });
}

cplx resolvent_sum(std::span<const double> weight, std::span<const double> energy, cplx omega) {
    return chunked_reduce<cplx>(energy.size(), [&](std::size_t b, std::size_t e) {
        return detail::resolvent_range(weight.data(), energy.data(), b, e, omega);
    });
}

namespace {
struct SlopeAcc {
    SumSlope v;
    SlopeAcc& operator+=(const SlopeAcc& o) {
        v.sum += o.v.sum;
        v.slope += o.v.slope;
        return *this;
    }
};
}  // namespace

SumSlope resolvent_sum_slope(std::span<const double> weight, std::span<const double> energy, double omega) {
    return chunked_reduce<SlopeAcc>(energy.size(), [&](std::size_t b, std::size_t e) {
               return SlopeAcc{detail::resolvent_slope_range(weight.data(), energy.data(), b, e, omega)};
           }).v;
}

double counterterm_sum(std::span<const double> weight, std::span<const double> energy, double lambda) {
    return chunked_reduce<double>(energy.size(), [&](std::size_t b, std::size_t e) {
        return detail::counterterm_range(weight.data(), energy.data(), b, e, lambda);
    });
}

void pair_sums(Columns phi, std::span<const double> energy, double omega, std::span<double> out) {
    pair_sums_impl(phi, energy, omega, out);
}

void pair_sums(Columns phi, std::span<const double> energy, cplx omega, std::span<cplx> out) {
    pair_sums_impl(phi, energy, omega, out);
}

int max_threads() noexcept {
#ifdef PBILL_HAVE_OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_threads(int w) noexcept {
#ifdef PBILL_HAVE_OPENMP
    if (w > 0) omp_set_num_threads(w);
#else
    (void)w;
#endif
}

}  // namespace pbill::kernels::parallel
