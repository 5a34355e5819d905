#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "support/oracles.hpp"
#include "tsfit/errors.hpp"
#include "tsfit/fitting.hpp"

using namespace tsfit;

namespace {

std::vector<Observation> random_obs(std::mt19937_64& rng, const ParamRect& d, std::size_t n,
                                    const std::function<double(double, double)>& f) {
    std::uniform_real_distribution<double> U(d.u_min, d.u_max), V(d.v_min, d.v_max);
    std::vector<Observation> obs(n);
    for (auto& o : obs) {
        o.param = {U(rng), V(rng)};
        o.phys = Point3(o.param.u, o.param.v, f(o.param.u, o.param.v));
    }
    return obs;
}

std::vector<Observation> grid_obs(const ParamRect& d, int n, const std::function<double(double, double)>& f) {
    std::vector<Observation> obs;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const double u = grid_coordinate(d.u_min, d.u_max, i, n);
            const double v = grid_coordinate(d.v_min, d.v_max, j, n);
            obs.push_back({{u, v}, Point3(u, v, f(u, v))});
        }
    }
    return obs;
}

Eigen::MatrixXd dense_design(const TSplineSpace& s, std::span<const Observation> obs) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(obs.size()), static_cast<Eigen::Index>(s.size()));
    for (std::size_t i = 0; i < obs.size(); ++i) {
        for (const auto& b : s.basis_row(obs[i].param)) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b.anchor)) = b.value;
    }
    return a;
}

std::shared_ptr<const TSplineSpace> space_of(TMesh m) { return std::make_shared<const TSplineSpace>(std::move(m)); }

}  // namespace

TEST(MethodNames, RoundTrip) {
    for (Method m : {Method::LS_T, Method::MTA_COMBINED, Method::NURBS_LS}) EXPECT_EQ(parse_method(to_string(m)), m);
    EXPECT_EQ(parse_method("LS-T"), Method::LS_T);
    EXPECT_EQ(parse_method("Nurbs_LS"), Method::NURBS_LS);
    EXPECT_THROW(parse_method("spline"), InputError);
}

TEST(FitConfigTest, DefaultsAndValidation) {
    EXPECT_EQ(FitConfig::defaults(Method::MTA_COMBINED).max_iters, 10);
    EXPECT_EQ(FitConfig::defaults(Method::LS_T).max_iters, 8);
    FitConfig c;
    c.threshold = 0.0;
    EXPECT_THROW(c.validate(), InputError);
    c = FitConfig::defaults(Method::MTA_COMBINED);
    c.ls_iters = 11;
    EXPECT_THROW(c.validate(), InputError);
    c = FitConfig{};
    c.max_iters = 2;  // ls_iters only bounds the multilevel switch
    EXPECT_NO_THROW(c.validate());
    c = FitConfig{};
    c.mark_count = 0;
    EXPECT_THROW(c.validate(), InputError);
    c = FitConfig::defaults(Method::MTA_COMBINED);
    c.full_3d = true;
    EXPECT_THROW(c.validate(), InputError);
}

TEST(Assemble, SingleObservationSingleAnchor) {
    const auto s = space_of(TMesh::uniform(ParamRect{}, 2, 2));
    const std::vector<Observation> obs{{{0.3, 0.7}, Point3(0.3, 0.7, 2.0)}};
    const auto row = s->basis_row(obs[0].param);
    const NormalSystem sys = assemble(obs, *s, SurfaceMode::HeightField);
    for (const auto& bi : row) {
        EXPECT_NEAR(sys.rhs(static_cast<Eigen::Index>(bi.anchor), 0), bi.value * 2.0, 1e-15);
        for (const auto& bj : row) {
            EXPECT_NEAR(sys.lhs.coeff(static_cast<Eigen::Index>(bi.anchor), static_cast<Eigen::Index>(bj.anchor)),
                        bi.value * bj.value, 1e-15);
        }
    }
    const std::vector<Observation> corner{{{0.0, 0.0}, Point3(0, 0, 5.0)}};
    const NormalSystem c = assemble(corner, *s, SurfaceMode::HeightField);
    EXPECT_EQ(c.lhs.nonZeros(), 1);
    EXPECT_DOUBLE_EQ(c.rhs.sum(), 5.0);
}

TEST(Assemble, DuplicateObservationsDoubleTheSystem) {
    std::mt19937_64 rng(41);
    const auto s = space_of(oracle::random_mesh(rng, ParamRect{}, 3, 3, 3));
    const auto one = random_obs(rng, ParamRect{}, 1, [](double u, double v) { return u * v; });
    const std::vector<Observation> two{one[0], one[0]};
    const NormalSystem a = assemble(one, *s, SurfaceMode::HeightField);
    const NormalSystem b = assemble(two, *s, SurfaceMode::HeightField);
    EXPECT_NEAR((Eigen::MatrixXd(b.lhs) - 2.0 * Eigen::MatrixXd(a.lhs)).cwiseAbs().maxCoeff(), 0.0, 1e-15);
    EXPECT_NEAR((b.rhs - 2.0 * a.rhs).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(Assemble, MatchesDenseOracle) {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 5; ++trial) {
        const auto s = space_of(oracle::random_mesh(rng, ParamRect::make(-1, 2, 0, 1), 3, 3, 3, 0.2));
        const auto obs = random_obs(rng, s->domain(), 300, [](double u, double v) { return std::sin(u) + v; });
        const Eigen::MatrixXd a = dense_design(*s, obs);
        Eigen::VectorXd l(static_cast<Eigen::Index>(obs.size()));
        for (std::size_t i = 0; i < obs.size(); ++i) l(static_cast<Eigen::Index>(i)) = obs[i].phys.z();
        const NormalSystem sys = assemble(obs, *s, SurfaceMode::HeightField);
        EXPECT_LE((Eigen::MatrixXd(sys.lhs) - a.transpose() * a).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LE((sys.rhs.col(0) - a.transpose() * l).cwiseAbs().maxCoeff(), 1e-12);
        const NormalSystem full = assemble(obs, *s, SurfaceMode::ControlPoints);
        EXPECT_EQ(full.rhs.cols(), 3);
        EXPECT_LE((full.rhs.col(2) - sys.rhs.col(0)).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(SolveLs, ConstantDataGivesConstantCoefficients) {
    std::mt19937_64 rng(43);
    const auto s = space_of(oracle::random_mesh(rng, ParamRect{}, 4, 4, 3));
    const auto obs = grid_obs(ParamRect{}, 60, [](double, double) { return 1.25; });
    LsSolution info;
    const TSplineSurface f = fit_ls(s, obs, SurfaceMode::HeightField, &info);
    EXPECT_FALSE(info.rank_deficient);
    for (double h : f.heights()) EXPECT_NEAR(h, 1.25, 1e-10);
    for (double e : error_indicators(f, obs)) EXPECT_LE(e, 1e-10);
}

TEST(SolveLs, RecoversSurfaceInTheSpace) {
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 5; ++trial) {
        const auto s = space_of(oracle::random_mesh(rng, ParamRect::make(-1, 1, -1, 1), 4, 4, 3));
        std::uniform_real_distribution<double> coef(-1, 1);
        std::vector<double> h(s->size());
        for (double& x : h) x = coef(rng);
        const TSplineSurface truth(s, h);
        auto obs = grid_obs(s->domain(), 80, [&](double u, double v) { return truth.eval_z({u, v}); });
        LsSolution info;
        const TSplineSurface f = fit_ls(s, obs, SurfaceMode::HeightField, &info);
        double ss = 0.0;
        for (double e : error_indicators(f, obs)) ss += e * e;
        EXPECT_LE(std::sqrt(ss / static_cast<double>(obs.size())), 1e-8);
        for (std::size_t i = 0; i < h.size(); ++i) EXPECT_NEAR(f.heights()[i], h[i], 1e-7);
    }
}

TEST(SolveLs, NormalEquationOptimality) {
    std::mt19937_64 rng(45);
    const auto s = space_of(oracle::random_mesh(rng, ParamRect{}, 3, 3, 2));
    auto obs = random_obs(rng, ParamRect{}, 800, [](double u, double v) { return std::cos(4 * u) * v; });
    const TSplineSurface f = fit_ls(s, obs);
    auto sse = [&](const std::vector<double>& h) {
        const TSplineSurface g(s, h);
        double acc = 0.0;
        for (double e : error_indicators(g, obs)) acc += e * e;
        return acc;
    };
    const std::vector<double> best(f.heights().begin(), f.heights().end());
    const double base = sse(best);
    std::normal_distribution<double> n(0, 1e-3);
    for (int k = 0; k < 20; ++k) {
        auto h = best;
        for (double& x : h) x += n(rng);
        EXPECT_GE(sse(h), base - 1e-12);
    }
}

TEST(SolveLs, EmptyAnchorsMatchPseudoInverse) {
    // Data only in the lower-left quarter leaves many anchors without support.
    const auto s = space_of(TMesh::uniform(ParamRect{}, 4, 4));
    const auto obs = grid_obs(ParamRect::make(0, 0.5, 0, 0.5), 21, [](double u, double v) { return u - 2 * v; });
    LsSolution info;
    const TSplineSurface f = fit_ls(s, obs, SurfaceMode::HeightField, &info);
    EXPECT_TRUE(info.rank_deficient);
    EXPECT_GT(info.empty_anchors, 0u);

    const Eigen::MatrixXd a = dense_design(*s, obs);
    Eigen::VectorXd l(static_cast<Eigen::Index>(obs.size()));
    for (std::size_t i = 0; i < obs.size(); ++i) l(static_cast<Eigen::Index>(i)) = obs[i].phys.z();
    const Eigen::VectorXd pinv = a.completeOrthogonalDecomposition().solve(l);
    for (std::size_t i = 0; i < s->size(); ++i) {
        EXPECT_NEAR(f.heights()[i], pinv(static_cast<Eigen::Index>(i)), 1e-8) << "anchor " << i;
        if (a.col(static_cast<Eigen::Index>(i)).isZero(0.0)) {
            EXPECT_EQ(f.heights()[i], 0.0);
        }
    }
}

TEST(SolveLs, RefusesOversizedSystems) {
    const auto s = space_of(TMesh::uniform(ParamRect{}, 4, 4));
    const auto obs = grid_obs(ParamRect{}, 20, [](double, double) { return 0.0; });
    EXPECT_THROW(solve_ls(assemble(obs, *s, SurfaceMode::HeightField), 10), SolverError);
    EXPECT_NO_THROW(solve_ls(assemble(obs, *s, SurfaceMode::HeightField), 49));
}

TEST(ErrorIndicators, HeightEqualsEuclideanOnHeightFields) {
    std::mt19937_64 rng(46);
    const auto s = space_of(oracle::random_mesh(rng, ParamRect{}, 3, 3, 2));
    const auto obs = random_obs(rng, ParamRect{}, 200, [](double u, double v) { return u * u - v; });
    const TSplineSurface hf = fit_ls(s, obs);
    const TSplineSurface full = fit_ls(s, obs, SurfaceMode::ControlPoints);
    const auto eh = error_indicators(hf, obs);
    const auto e3 = error_indicators(full, obs);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const Point3 p = full.eval(obs[i].param);
        // x and y are reproduced exactly by the spline space (linear precision).
        EXPECT_NEAR(p.x(), obs[i].phys.x(), 1e-9);
        EXPECT_NEAR(p.y(), obs[i].phys.y(), 1e-9);
        EXPECT_NEAR(e3[i], eh[i], 1e-9);
        EXPECT_NEAR(eh[i], std::abs(hf.eval_z(obs[i].param) - obs[i].phys.z()), 1e-15);
    }
}

TEST(MtaUpdate, MatchesDenseLiteralRule) {
    std::mt19937_64 rng(47);
    const auto s = space_of(TMesh::uniform(ParamRect{}, 2, 1));  // 5 x 4 = 20 anchors
    ASSERT_EQ(s->size(), 20u);
    std::normal_distribution<double> z(0.0, 0.02);
    for (int trial = 0; trial < 50; ++trial) {
        const auto obs = random_obs(rng, ParamRect{}, 50, [](double, double) { return 0.0; });
        std::vector<double> r(obs.size());
        for (double& x : r) x = z(rng);
        const ResidualField q = mta_update(*s, obs, r, 0.01);
        const auto expected = oracle::mta_dense(dense_design(*s, obs), r, 0.01);
        ASSERT_EQ(q.q.size(), expected.size());
        for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(q.q[i], expected[i], 1e-12);
    }
}

TEST(MtaUpdate, SingleObservationIsInterpolated) {
    const auto s = space_of(TMesh::uniform(ParamRect{}, 4, 4));
    const std::vector<Observation> obs{{{0.37, 0.61}, Point3(0.37, 0.61, 0.0)}};
    const std::vector<double> r{0.2};
    const ResidualField q = mta_update(*s, obs, r, 0.01);
    const TSplineSurface res(s, q.q);
    EXPECT_NEAR(res.eval_z(obs[0].param), 0.2, 1e-12);
    // phi = z b / sum b^2 for every anchor in the support.
    const auto row = s->basis_row(obs[0].param);
    double sb2 = 0.0;
    for (const auto& b : row) sb2 += b.value * b.value;
    for (const auto& b : row) EXPECT_NEAR(q.q[b.anchor], 0.2 * b.value / sb2, 1e-15);
    EXPECT_EQ(q.active, row.size());
}

TEST(MtaUpdate, AllInsideToleranceGivesZero) {
    std::mt19937_64 rng(48);
    const auto s = space_of(TMesh::uniform(ParamRect{}, 4, 4));
    const auto obs = random_obs(rng, ParamRect{}, 300, [](double, double) { return 0.0; });
    std::uniform_real_distribution<double> small(-0.0099, 0.0099);
    std::vector<double> r(obs.size());
    for (double& x : r) x = small(rng);
    const ResidualField q = mta_update(*s, obs, r, 0.01);
    EXPECT_EQ(q.active, 0u);
    for (double x : q.q) EXPECT_EQ(x, 0.0);
}

TEST(MtaUpdate, LayeredOverloadUsesObservationMinusSurface) {
    const auto s = space_of(TMesh::uniform(ParamRect{}, 4, 4));
    const LayeredSurface base(TSplineSurface::constant(s, 1.0));
    const std::vector<Observation> obs{{{0.5, 0.5}, Point3(0.5, 0.5, 1.5)}};
    const ResidualField q = mta_update(base, *s, obs, 0.01);
    EXPECT_NEAR(TSplineSurface(s, q.q).eval_z({0.5, 0.5}), 0.5, 1e-12);
}

TEST(Mark, CountsOutOfTolerancePointsPerCell) {
    const TMesh m = TMesh::uniform(ParamRect{}, 2, 2);
    const std::vector<Observation> obs{{{0.1, 0.1}, Point3::Zero()},
                                       {{0.2, 0.2}, Point3::Zero()},
                                       {{0.7, 0.2}, Point3::Zero()},
                                       {{0.7, 0.7}, Point3::Zero()}};
    const std::vector<double> e{0.5, 0.02, 0.5, 0.01};
    EXPECT_EQ(mark(m, obs, e, 0.01, 2), (std::vector<CellId>{m.cell_at({0.1, 0.1})}));
    auto one = mark(m, obs, e, 0.01, 1);
    EXPECT_EQ(one.size(), 2u);  // e = TH itself is inside tolerance
    EXPECT_TRUE(mark(m, obs, e, 1.0, 1).empty());
}

TEST(Project, NestedRefinementPreservesTheSurface) {
    std::mt19937_64 rng(49);
    const auto coarse = space_of(TMesh::uniform(ParamRect{}, 4, 4));
    std::vector<double> h(coarse->size());
    std::uniform_real_distribution<double> coef(-1, 1), t(0, 1);
    for (double& x : h) x = coef(rng);
    const LayeredSurface src{TSplineSurface(coarse, h)};
    const auto fine = space_of(coarse->mesh().refine_all().refine_all());
    const TSplineSurface p = project(src, fine);
    for (int i = 0; i < 1000; ++i) {
        const Param q{t(rng), t(rng)};
        EXPECT_NEAR(p.eval_z(q), src.eval_z(q), 1e-10);
    }
}

TEST(Project, FlattenKeepsLayeredValues) {
    std::mt19937_64 rng(50);
    const auto coarse = space_of(TMesh::uniform(ParamRect{}, 4, 4));
    const auto fine = space_of(coarse->mesh().refine_all());
    LayeredSurface l(TSplineSurface::constant(coarse, 0.5));
    std::vector<double> q(fine->size(), 0.0);
    q[12] = 0.3;
    l.add_level(TSplineSurface(fine, q));
    const TSplineSurface flat = flatten(l);
    std::uniform_real_distribution<double> t(0, 1);
    for (int i = 0; i < 1000; ++i) {
        const Param p{t(rng), t(rng)};
        EXPECT_NEAR(flat.eval_z(p), l.eval_z(p), 1e-10);
    }
}

TEST(FitDriver, BicubicDataConvergesAtFirstIteration) {
    const auto s = space_of(TMesh::uniform(ParamRect::make(-1, 1, -1, 1), 4, 4));
    std::mt19937_64 rng(51);
    std::vector<double> h(s->size());
    std::uniform_real_distribution<double> coef(-0.5, 0.5);
    for (double& x : h) x = coef(rng);
    const TSplineSurface truth(s, h);
    const auto obs = grid_obs(s->domain(), 40, [&](double u, double v) { return truth.eval_z({u, v}); });
    for (Method m : {Method::LS_T, Method::MTA_COMBINED, Method::NURBS_LS}) {
        FitConfig c = FitConfig::defaults(m);
        const FitResult r = fit(obs, c);
        ASSERT_EQ(r.reports.size(), 1u);
        EXPECT_TRUE(r.converged);
        EXPECT_EQ(r.reports[0].n_out, 0u);
        EXPECT_LE(r.reports[0].maxerr, 1e-8);
    }
}

TEST(FitDriver, NurbsRefinesGlobally) {
    std::mt19937_64 rng(52);
    const auto obs = random_obs(rng, ParamRect{}, 3000, [](double u, double v) { return std::tanh(20 * (u - v)); });
    FitConfig c = FitConfig::defaults(Method::NURBS_LS);
    c.max_iters = 4;
    c.domain = ParamRect{};
    const FitResult r = fit(obs, c);
    ASSERT_EQ(r.reports.size(), 4u);
    TMesh m = TMesh::uniform(ParamRect{}, 4, 4);
    for (int k = 0; k < 4; ++k) {
        EXPECT_EQ(r.reports[static_cast<std::size_t>(k)].n_cp, TSplineSpace(m).size());
        m = m.refine_all();
    }
}

TEST(FitDriver, DeterministicAndMonotoneInLsPhase) {
    std::mt19937_64 rng(53);
    const auto obs = random_obs(rng, ParamRect{}, 4000, [](double u, double v) { return 0.3 * std::tanh(9 * (v - u)); });
    FitConfig c = FitConfig::defaults(Method::LS_T);
    c.max_iters = 5;
    const FitResult a = fit(obs, c);
    const FitResult b = fit(obs, c);
    ASSERT_EQ(a.reports.size(), b.reports.size());
    for (std::size_t i = 0; i < a.reports.size(); ++i) {
        EXPECT_EQ(a.reports[i].rmse_noise, b.reports[i].rmse_noise);
        EXPECT_EQ(a.reports[i].n_cp, b.reports[i].n_cp);
        if (i > 0) {
            // Refined spaces contain the coarser ones, so the LS optimum cannot get worse.
            EXPECT_LE(a.reports[i].rmse_noise, a.reports[i - 1].rmse_noise * (1 + 1e-9));
        }
    }
    const auto e = error_indicators(a.surface, obs);
    const FitReport final_eval = evaluate(a.surface, obs, nullptr, c.threshold);
    EXPECT_EQ(final_eval.n_out, a.reports.back().n_out);
    EXPECT_NEAR(final_eval.rmse_noise, a.reports.back().rmse_noise, 1e-12);
    EXPECT_EQ(e.size(), obs.size());
}

TEST(FitDriver, SolverLimitSwitchesMtaAndFailsLs) {
    std::mt19937_64 rng(54);
    const auto obs = random_obs(rng, ParamRect{}, 4000, [](double u, double v) { return 0.3 * std::tanh(20 * (v - u)); });
    FitConfig c = FitConfig::defaults(Method::MTA_COMBINED);
    c.ls_max_unknowns = 60;
    const FitResult r = fit(obs, c);
    EXPECT_GE(r.switched_to_mta_at, 2);
    EXPECT_FALSE(r.events.empty());
    EXPECT_GT(r.surface.levels().size(), 1u);

    FitConfig l = FitConfig::defaults(Method::LS_T);
    l.ls_max_unknowns = 60;
    try {
        fit(obs, l);
        FAIL() << "expected a solver error";
    } catch (const SolverError& err) {
        EXPECT_GE(err.iteration(), 2);
    }
}

TEST(FitDriver, StopsWhenNothingToMark) {
    // No cell holds 100 points, so nothing can ever be marked.
    auto obs = grid_obs(ParamRect{}, 30, [](double u, double) { return std::abs(u - 0.4); });
    FitConfig c = FitConfig::defaults(Method::LS_T);
    c.mark_count = 100;
    const FitResult r = fit(obs, c);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.reports.size(), 1u);
    ASSERT_FALSE(r.events.empty());
    EXPECT_NE(r.events.back().find("stopping"), std::string::npos);
}

TEST(FitDriver, RejectsObservationsOutsideDomain) {
    auto obs = grid_obs(ParamRect{}, 5, [](double, double) { return 0.0; });
    FitConfig c;
    c.domain = ParamRect::make(0, 0.5, 0, 1);
    EXPECT_THROW(fit(obs, c), InputError);
    EXPECT_THROW(fit(std::vector<Observation>{}, FitConfig{}), InputError);
}

TEST(ParameterBoundsTest, BoundingBox) {
    const std::vector<Observation> obs{{{-1, 2}, Point3::Zero()}, {{3, 0.5}, Point3::Zero()}};
    EXPECT_EQ(parameter_bounds(obs), ParamRect::make(-1, 3, 0.5, 2));
}
