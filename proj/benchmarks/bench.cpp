#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "bprelab/branching.hpp"
#include "bprelab/environment.hpp"
#include "bprelab/markov_walk.hpp"
#include "bprelab/offspring.hpp"
#include "bprelab/positive_matrix.hpp"
#include "bprelab/rng.hpp"

using namespace bprelab;

namespace {

// Self-contained two-type ensemble so benchmarks run from any directory.
EnvironmentEnsemble bench_ensemble() {
    using Atom = FiniteTableRow::Atom;
    auto row = [](std::vector<Atom> atoms) {
        return OffspringRow(make_finite_table_row(std::move(atoms)));
    };
    std::vector<OffspringRow> up;
    up.push_back(row({{{0, 0}, 0.175}, {{2, 0}, 0.475}, {{0, 2}, 0.175}, {{2, 2}, 0.175}}));
    up.push_back(row({{{0, 0}, 0.125}, {{2, 0}, 0.125}, {{0, 2}, 0.625}, {{2, 2}, 0.125}}));
    std::vector<OffspringRow> down;
    down.push_back(row({{{0, 0}, 0.79375}, {{2, 0}, 0.11875}, {{0, 2}, 0.04375}, {{2, 2}, 0.04375}}));
    down.push_back(row({{{0, 0}, 0.78125}, {{2, 0}, 0.03125}, {{0, 2}, 0.15625}, {{2, 2}, 0.03125}}));
    std::vector<OffspringLaw> laws;
    laws.push_back(make_offspring_law(2, std::move(up)));
    laws.push_back(make_offspring_law(2, std::move(down)));
    return EnvironmentEnsemble({0.5, 0.5}, std::move(laws));
}

std::vector<PosMatrix> random_factors(std::size_t n, std::size_t p) {
    Rng rng(17);
    std::vector<PosMatrix> ms;
    ms.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::vector<double> e(p * p);
        for (auto& v : e) v = 0.05 + 2.95 * rng.uniform();
        ms.emplace_back(p, std::move(e));
    }
    return ms;
}

void BM_ProductChain(benchmark::State& state) {
    const auto ms = random_factors(static_cast<std::size_t>(state.range(0)), 3);
    for (auto _ : state) {
        NormalizedProduct prod = product_chain(ms);
        benchmark::DoNotOptimize(prod.log_norm);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ProductChain)->Arg(64)->Arg(1024)->Arg(16384);

void BM_WalkPath(benchmark::State& state) {
    EnvironmentEnsemble ens = bench_ensemble();
    SimplexPoint x0 = SimplexPoint::barycenter(2);
    Rng rng(5);
    for (auto _ : state) {
        WalkPath path = run_walk(ens, x0, 1.0, static_cast<std::size_t>(state.range(0)), rng);
        benchmark::DoNotOptimize(path.min_s);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_WalkPath)->Arg(256)->Arg(4096);

void BM_StepPopulation(benchmark::State& state) {
    EnvironmentEnsemble ens = bench_ensemble();
    const OffspringLaw& law = ens.atom(0).law;
    PopulationVector pop(2, static_cast<std::uint64_t>(state.range(0)));
    Rng rng(7);
    for (auto _ : state) {
        PopulationVector next = step_population(law, pop, rng);
        benchmark::DoNotOptimize(next.data());
    }
    state.SetItemsProcessed(state.iterations() * 2 * state.range(0));
}
BENCHMARK(BM_StepPopulation)->Arg(8)->Arg(512)->Arg(65536);

void BM_ExactQuenchedSurvival(benchmark::State& state) {
    EnvironmentEnsemble ens = bench_ensemble();
    Rng rng(11);
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    auto atoms = sample_env_sequence(ens, n, rng);
    const PopulationVector z{1, 0};
    for (auto _ : state) {
        double q = exact_quenched_survival(ens, atoms, z, n);
        benchmark::DoNotOptimize(q);
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_ExactQuenchedSurvival)->Arg(64)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
