#include <memory>

#include <benchmark/benchmark.h>

#include "pbill/basis.hpp"
#include "pbill/greens.hpp"
#include "pbill/kernels.hpp"

namespace {

struct Fixture {
    std::shared_ptr<const pbill::ModeTable> table;
    std::shared_ptr<const pbill::SeriesTermSource> src;
};

const Fixture& fixture() {
    static const Fixture f = [] {
        Fixture x;
        x.table = std::make_shared<const pbill::ModeTable>(pbill::ModeTable::lowest(pbill::BilliardSpec{}, 400'000));
        x.src = std::make_shared<const pbill::SeriesTermSource>(
            x.table, std::vector<pbill::Point>{{0.3137, 0.7211}, {0.6421, 1.1093}, {0.1887, 0.4012}}, 1.0);
        return x;
    }();
    return f;
}

constexpr double omega = 1234.5678;

template <class Fn>
void resolvent(benchmark::State& state, Fn fn) {
    const auto& f = fixture();
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto w = f.src->phi_sq(0).first(n);
    const auto e = f.table->energies().first(n);
    for (auto _ : state) benchmark::DoNotOptimize(fn(w, e, omega));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}

template <class Fn>
void pairs(benchmark::State& state, Fn fn) {
    const auto& f = fixture();
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto e = f.table->energies().first(n);
    auto cols = f.src->columns();
    std::vector<double> out(pbill::kernels::packed_size(f.src->scatterers()));
    for (auto _ : state) {
        std::fill(out.begin(), out.end(), 0.0);
        fn(cols, e, omega, std::span<double>(out));
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}

void BM_resolvent_serial(benchmark::State& s) {
    resolvent(s, [](auto w, auto e, double x) { return pbill::kernels::serial::resolvent_sum(w, e, x); });
}
void BM_resolvent_parallel(benchmark::State& s) {
    resolvent(s, [](auto w, auto e, double x) { return pbill::kernels::parallel::resolvent_sum(w, e, x); });
}
void BM_pairs_serial(benchmark::State& s) {
    pairs(s, [](auto c, auto e, double x, std::span<double> o) { pbill::kernels::serial::pair_sums(c, e, x, o); });
}
void BM_pairs_parallel(benchmark::State& s) {
    pairs(s, [](auto c, auto e, double x, std::span<double> o) { pbill::kernels::parallel::pair_sums(c, e, x, o); });
}

}  // namespace

BENCHMARK(BM_resolvent_serial)->Arg(10'000)->Arg(100'000)->Arg(400'000);
BENCHMARK(BM_resolvent_parallel)->Arg(10'000)->Arg(100'000)->Arg(400'000);
BENCHMARK(BM_pairs_serial)->Arg(10'000)->Arg(100'000)->Arg(400'000);
BENCHMARK(BM_pairs_parallel)->Arg(10'000)->Arg(100'000)->Arg(400'000);

BENCHMARK_MAIN();
