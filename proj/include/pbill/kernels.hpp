#pragma once

// Hot loops over the mode series. Every kernel exists twice: a plain serial
// reference and an OpenMP version with a fixed-order reduction (thread
// partials are combined in thread order, so results are reproducible for a
// given thread count). The library calls the `parallel` flavour; tests and
// the benchmark compare the two.

#include <complex>
#include <cstddef>
#include <span>

namespace pbill::kernels {

using cplx = std::complex<double>;

/// Values phi_n(x_i) for i = 0..N-1, each column indexed by mode n.
using Columns = std::span<const std::span<const double>>;

/// Number of entries in the packed upper triangle of an N x N matrix.
constexpr std::size_t packed_size(std::size_t n) noexcept { return n * (n + 1) / 2; }
/// Packed row-major upper-triangle index of (i, j), i <= j.
constexpr std::size_t packed_index(std::size_t i, std::size_t j, std::size_t n) noexcept {
    return i * n - i * (i + 1) / 2 + j;
}

struct SumSlope {
    double sum = 0.0;    // sum w / (omega - e)
    double slope = 0.0;  // -sum w / (omega - e)^2
};

namespace serial {

double resolvent_sum(std::span<const double> weight, std::span<const double> energy, double omega);
cplx resolvent_sum(std::span<const double> weight, std::span<const double> energy, cplx omega);
SumSlope resolvent_sum_slope(std::span<const double> weight, std::span<const double> energy, double omega);
/// sum w (e / (e^2 + lambda^2)), the energy-independent counterterm.
double counterterm_sum(std::span<const double> weight, std::span<const double> energy, double lambda);
/// Packed sums out[p(i,j)] += sum_n phi_i phi_j / (omega - e_n) over the given columns.
void pair_sums(Columns phi, std::span<const double> energy, double omega, std::span<double> out);
void pair_sums(Columns phi, std::span<const double> energy, cplx omega, std::span<cplx> out);

}  // namespace serial

namespace parallel {

double resolvent_sum(std::span<const double> weight, std::span<const double> energy, double omega);
cplx resolvent_sum(std::span<const double> weight, std::span<const double> energy, cplx omega);
SumSlope resolvent_sum_slope(std::span<const double> weight, std::span<const double> energy, double omega);
double counterterm_sum(std::span<const double> weight, std::span<const double> energy, double lambda);
void pair_sums(Columns phi, std::span<const double> energy, double omega, std::span<double> out);
void pair_sums(Columns phi, std::span<const double> energy, cplx omega, std::span<cplx> out);

/// Threads the parallel kernels will use (1 without OpenMP).
int max_threads() noexcept;
/// Sets the worker count for subsequent parallel regions; w <= 0 keeps the default.
void set_threads(int w) noexcept;

}  // namespace parallel

}  // namespace pbill::kernels
