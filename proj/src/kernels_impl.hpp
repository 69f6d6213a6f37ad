#pragma once

// Loop bodies shared by the serial and OpenMP kernels. Each body reduces the
// half-open range [begin, end) so that the drivers only differ in how they
// split the index space.

#include <cstddef>
#include <span>
#include <vector>

#include "pbill/kernels.hpp"

namespace pbill::kernels::detail {

template <class T>
T resolvent_range(const double* w, const double* e, std::size_t begin, std::size_t end, T omega) {
    T acc{};
    for (std::size_t n = begin; n < end; ++n) acc += w[n] / (omega - e[n]);
    return acc;
}

inline SumSlope resolvent_slope_range(const double* w, const double* e, std::size_t begin, std::size_t end,
                                      double omega) {
    double s = 0.0, d = 0.0;
    for (std::size_t n = begin; n < end; ++n) {
        const double r = 1.0 / (omega - e[n]);
        const double t = w[n] * r;
        s += t;
        d -= t * r;
    }
    return {s, d};
}

inline double counterterm_range(const double* w, const double* e, std::size_t begin, std::size_t end,
                                double lambda) {
    const double l2 = lambda * lambda;
    double acc = 0.0;
    for (std::size_t n = begin; n < end; ++n) acc += w[n] * (e[n] / (e[n] * e[n] + l2));
    return acc;
}

template <class T>
void pair_range(Columns phi, const double* e, std::size_t begin, std::size_t end, T omega, T* out) {
    const std::size_t dim = phi.size();
    if (dim == 2) {
        const double* a = phi[0].data();
        const double* b = phi[1].data();
        T s00{}, s01{}, s11{};
        for (std::size_t n = begin; n < end; ++n) {
            const T r = T(1.0) / (omega - e[n]);
            const T ra = a[n] * r;
            s00 += a[n] * ra;
            s01 += b[n] * ra;
            s11 += b[n] * b[n] * r;
        }
        out[0] += s00;
        out[1] += s01;
        out[2] += s11;
        return;
    }
    std::vector<T> acc(packed_size(dim));
    std::vector<double> v(dim);
    for (std::size_t n = begin; n < end; ++n) {
        const T r = T(1.0) / (omega - e[n]);
        for (std::size_t i = 0; i < dim; ++i) v[i] = phi[i][n];
        std::size_t p = 0;
        for (std::size_t i = 0; i < dim; ++i) {
            const T vi = v[i] * r;
            for (std::size_t j = i; j < dim; ++j) acc[p++] += vi * v[j];
        }
    }
    for (std::size_t p = 0; p < acc.size(); ++p) out[p] += acc[p];
}

}  // namespace pbill::kernels::detail
