#include <benchmark/benchmark.h>

#include <random>

#include "tsfit/fitting.hpp"
#include "tsfit/synthdata.hpp"

using namespace tsfit;

namespace {

TMesh refined_mesh(int rounds, const ParamRect& domain = ParamRect::make(-1, 1, -1, 1)) {
    std::mt19937_64 rng(3);
    TMesh m = TMesh::uniform(domain, 4, 4);
    std::bernoulli_distribution pick(0.2);
    for (int r = 0; r < rounds; ++r) {
        std::vector<CellId> marked;
        for (CellId c = 0; c < m.size(); ++c) {
            if (pick(rng)) marked.push_back(c);
        }
        m = m.refine(marked);
    }
    return m;
}

const SyntheticData& dataset();

ParamRect data_domain() { return parameter_bounds(dataset().obs); }

const SyntheticData& dataset() {
    static const SyntheticData d = [] {
        SyntheticSpec s;
        s.n = 100;
        return generate(s);
    }();
    return d;
}

}  // namespace

static void BM_BasisRow(benchmark::State& state) {
    const TSplineSpace space(refined_mesh(static_cast<int>(state.range(0))));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> t(-1, 1);
    std::vector<Param> pts(4096);
    for (auto& p : pts) p = {t(rng), t(rng)};
    std::vector<BasisValue> row;
    std::size_t i = 0;
    for (auto _ : state) {
        space.basis_row(pts[i++ & 4095], row);
        benchmark::DoNotOptimize(row.data());
    }
    state.counters["anchors"] = static_cast<double>(space.size());
}
BENCHMARK(BM_BasisRow)->Arg(2)->Arg(5)->Arg(8);

static void BM_Refine(benchmark::State& state) {
    const TMesh m = refined_mesh(static_cast<int>(state.range(0)));
    std::vector<CellId> marked;
    for (CellId c = 0; c < m.size(); c += 7) marked.push_back(c);
    for (auto _ : state) {
        TMesh r = m.refine(marked);
        benchmark::DoNotOptimize(r.size());
    }
    state.counters["cells"] = static_cast<double>(m.size());
}
BENCHMARK(BM_Refine)->Arg(2)->Arg(5)->Arg(8);

static void BM_SpaceBuild(benchmark::State& state) {
    const TMesh m = refined_mesh(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        TSplineSpace s(m);
        benchmark::DoNotOptimize(s.size());
    }
}
BENCHMARK(BM_SpaceBuild)->Arg(5)->Arg(8);

static void BM_LeastSquaresStep(benchmark::State& state) {
    const auto space = std::make_shared<const TSplineSpace>(refined_mesh(static_cast<int>(state.range(0)), data_domain()));
    const auto& obs = dataset().obs;
    for (auto _ : state) {
        TSplineSurface s = fit_ls(space, obs);
        benchmark::DoNotOptimize(s.heights().data());
    }
    state.counters["anchors"] = static_cast<double>(space->size());
}
BENCHMARK(BM_LeastSquaresStep)->Arg(3)->Arg(6)->Unit(benchmark::kMillisecond);

static void BM_MultilevelStep(benchmark::State& state) {
    const TSplineSpace space(refined_mesh(static_cast<int>(state.range(0)), data_domain()));
    const auto& obs = dataset().obs;
    std::vector<double> r(obs.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = obs[i].phys.z();
    for (auto _ : state) {
        ResidualField q = mta_update(space, obs, r, 0.01);
        benchmark::DoNotOptimize(q.q.data());
    }
}
BENCHMARK(BM_MultilevelStep)->Arg(3)->Arg(6)->Unit(benchmark::kMillisecond);

static void BM_Fit(benchmark::State& state) {
    const auto method = static_cast<Method>(state.range(0));
    const auto& obs = dataset().obs;
    for (auto _ : state) {
        FitResult r = fit(obs, FitConfig::defaults(method));
        benchmark::DoNotOptimize(r.reports.size());
    }
    state.SetLabel(std::string(to_string(method)));
}
BENCHMARK(BM_Fit)
    ->Arg(static_cast<int>(Method::LS_T))
    ->Arg(static_cast<int>(Method::MTA_COMBINED))
    ->Arg(static_cast<int>(Method::NURBS_LS))
    ->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
