#include <benchmark/benchmark.h>

#include "daa/kernels.hpp"

using namespace daa;

namespace {

struct Setup {
    PreferenceDataset data = gen_synthetic(1, 256, 64);
    PolicyParams params = PolicyParams::random(PolicyShape{}, 2, 0.1);
    std::vector<ReferenceScores> refs = reference_scores(params, data.pairs);
};

const Setup& setup() {
    static const Setup s;
    return s;
}

std::span<const PreferencePair> first(std::int64_t n) { return {setup().data.pairs.data(), static_cast<std::size_t>(n)}; }
std::span<const ReferenceScores> first_refs(std::int64_t n) { return {setup().refs.data(), static_cast<std::size_t>(n)}; }

void BM_objective_reference(benchmark::State& state) {
    const LossConfig cfg;
    for (auto _ : state)
        benchmark::DoNotOptimize(batch_objective_reference(setup().params, first(state.range(0)),
                                                           first_refs(state.range(0)), cfg));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_objective_serial(benchmark::State& state) {
    const LossConfig cfg;
    for (auto _ : state)
        benchmark::DoNotOptimize(batch_objective(setup().params, first(state.range(0)), first_refs(state.range(0)),
                                                 cfg, {}, Exec::kSerial));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_objective_parallel(benchmark::State& state) {
    const LossConfig cfg;
    for (auto _ : state)
        benchmark::DoNotOptimize(batch_objective(setup().params, first(state.range(0)), first_refs(state.range(0)),
                                                 cfg, {}, Exec::kParallel));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_validation_summary(benchmark::State& state) {
    const EntropyConfig ec;
    const auto exec = state.range(1) ? Exec::kParallel : Exec::kSerial;
    for (auto _ : state)
        benchmark::DoNotOptimize(validation_summary(setup().params, first(state.range(0)), ec, exec));
}

}  // namespace

BENCHMARK(BM_objective_reference)->Arg(1)->Arg(16)->Arg(256);
BENCHMARK(BM_objective_serial)->Arg(1)->Arg(16)->Arg(256);
BENCHMARK(BM_objective_parallel)->Arg(1)->Arg(16)->Arg(256)->UseRealTime();
BENCHMARK(BM_validation_summary)->Args({200, 0})->Args({200, 1})->UseRealTime();

BENCHMARK_MAIN();
