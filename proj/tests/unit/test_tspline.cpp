#include <gtest/gtest.h>

#include <map>
#include <random>

#include "support/oracles.hpp"
#include "tsfit/errors.hpp"
#include "tsfit/tspline.hpp"

using namespace tsfit;

namespace {

std::vector<double> grid_lines(double lo, double hi, int n) {
    std::vector<double> g(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) g[static_cast<std::size_t>(i)] = grid_coordinate(lo, hi, i, n + 1);
    return g;
}

// Index of the tensor function whose knot window equals the anchor's knots.
int window_index(const std::vector<double>& k, const LocalKnots& local) {
    for (std::size_t i = 0; i + 5 <= k.size(); ++i) {
        bool same = true;
        for (std::size_t j = 0; j < 5; ++j) same = same && k[i + j] == local[j];
        if (same) return static_cast<int>(i);
    }
    return -1;
}

std::shared_ptr<const TSplineSpace> random_space(std::mt19937_64& rng, const ParamRect& d) {
    return std::make_shared<const TSplineSpace>(oracle::random_mesh(rng, d, 4, 4, 5, 0.15));
}

}  // namespace

TEST(TSplineSpaceTest, TensorMeshReproducesNurbsBasis) {
    const ParamRect d = ParamRect::make(-1, 1, 0, 3);
    for (int half_steps : {0, 1, 2, 3}) {
        TMesh m = TMesh::uniform(d, 3, 5);
        for (int k = 0; k < half_steps; ++k) m = m.refine_all();
        const int nu = 3 << ((half_steps + 1) / 2);
        const int nv = 5 << (half_steps / 2);
        const auto ku = oracle::clamped(grid_lines(d.u_min, d.u_max, nu));
        const auto kv = oracle::clamped(grid_lines(d.v_min, d.v_max, nv));
        const TSplineSpace space(m);
        ASSERT_EQ(space.size(), static_cast<std::size_t>((nu + 3) * (nv + 3)));

        std::vector<std::pair<int, int>> tensor_id(space.size());
        for (std::size_t a = 0; a < space.size(); ++a) {
            tensor_id[a] = {window_index(ku, space.anchors()[a].ku), window_index(kv, space.anchors()[a].kv)};
            ASSERT_GE(tensor_id[a].first, 0);
            ASSERT_GE(tensor_id[a].second, 0);
        }
        std::mt19937_64 rng(31 + static_cast<unsigned>(half_steps));
        std::uniform_real_distribution<double> U(d.u_min, d.u_max), V(d.v_min, d.v_max);
        std::vector<Param> pts{{d.u_min, d.v_min}, {d.u_max, d.v_max}, {d.u_max, d.v_min}, {0.0, 1.0}};
        for (int i = 0; i < 500; ++i) pts.push_back({U(rng), V(rng)});
        for (const Param& p : pts) {
            const auto expected = oracle::tensor_basis(ku, kv, p.u, p.v);
            const auto row = space.basis_row(p);
            ASSERT_EQ(row.size(), expected.size());
            for (const auto& b : row) {
                const auto it = expected.find(tensor_id[b.anchor]);
                ASSERT_NE(it, expected.end());
                EXPECT_NEAR(b.value, it->second, 1e-12);
            }
        }
    }
}

TEST(TSplineSpaceTest, PartitionOfUnityOnRefinedMeshes) {
    std::mt19937_64 rng(32);
    const ParamRect d = ParamRect::make(-1, 1, -1, 1);
    std::uniform_real_distribution<double> t(-1, 1);
    for (int trial = 0; trial < 10; ++trial) {
        const auto space = random_space(rng, d);
        std::vector<BasisValue> row;
        for (int i = 0; i < 300; ++i) {
            const Param p{t(rng), t(rng)};
            space->basis_row(p, row);
            double s = 0.0;
            for (const auto& b : row) {
                EXPECT_GE(b.value, 0.0);
                s += b.value;
            }
            EXPECT_NEAR(s, 1.0, 1e-12);
            // The unnormalised products already sum to one on these meshes.
            space->raw_row(p, row);
            double r = 0.0;
            for (const auto& b : row) r += b.value;
            EXPECT_NEAR(r, 1.0, 1e-12);
            EXPECT_LE(space->basis_row(p).size(), 32u);
        }
    }
}

TEST(TSplineSpaceTest, CornerHasSingleAnchor) {
    const TSplineSpace s(TMesh::uniform(ParamRect{}, 4, 4));
    for (const Param p : {Param{0, 0}, Param{1, 1}, Param{0, 1}, Param{1, 0}}) {
        const auto row = s.basis_row(p);
        ASSERT_EQ(row.size(), 1u);
        EXPECT_DOUBLE_EQ(row[0].value, 1.0);
    }
}

TEST(TSplineSpaceTest, OutsideDomainAndBadWeights) {
    const TSplineSpace s(TMesh::uniform(ParamRect{}, 2, 2));
    EXPECT_THROW(s.basis_row({1.5, 0.5}), InputError);
    EXPECT_THROW(TSplineSpace(TMesh::uniform(ParamRect{}, 2, 2), {1.0, 2.0}), InputError);
    std::vector<double> w(s.size(), 1.0);
    w[3] = -1.0;
    EXPECT_THROW(TSplineSpace(TMesh::uniform(ParamRect{}, 2, 2), w), InputError);
}

TEST(TSplineSpaceTest, WeightsEnterRationally) {
    const TMesh m = TMesh::uniform(ParamRect{}, 2, 2);
    const TSplineSpace plain(m);
    std::vector<double> w(plain.size(), 1.0);
    w[5] = 3.0;
    const TSplineSpace weighted(m, w);
    const Param p{0.3, 0.6};
    std::vector<BasisValue> raw;
    plain.raw_row(p, raw);
    double denom = 0.0;
    for (const auto& b : raw) denom += w[b.anchor] * b.value;
    for (const auto& b : weighted.basis_row(p)) {
        double r = 0.0;
        for (const auto& x : raw) {
            if (x.anchor == b.anchor) r = x.value;
        }
        EXPECT_NEAR(b.value, w[b.anchor] * r / denom, 1e-15);
    }
}

TEST(TSplineSurfaceTest, ConstantAndZeroSurfaces) {
    std::mt19937_64 rng(33);
    const auto space = random_space(rng, ParamRect{});
    const auto c = TSplineSurface::constant(space, 2.5);
    const auto zero = TSplineSurface::constant(space, 0.0);
    const TSplineSurface pts(space, std::vector<Point3>(space->size(), Point3(1, -2, 3)));
    std::uniform_real_distribution<double> t(0, 1);
    for (int i = 0; i < 200; ++i) {
        const Param p{t(rng), t(rng)};
        EXPECT_NEAR(c.eval_z(p), 2.5, 1e-13);
        EXPECT_EQ(zero.eval_z(p), 0.0);
        EXPECT_EQ(c.eval(p).x(), p.u);
        EXPECT_EQ(c.eval(p).y(), p.v);
        EXPECT_TRUE(pts.eval(p).isApprox(Point3(1, -2, 3), 1e-13));
    }
    EXPECT_THROW(TSplineSurface(space, std::vector<double>(3, 0.0)), InputError);
}

TEST(TSplineSurfaceTest, ConvexHullAndLocality) {
    std::mt19937_64 rng(34);
    const auto space = random_space(rng, ParamRect{});
    std::uniform_real_distribution<double> coef(-1, 1), t(0, 1);
    std::vector<double> h(space->size());
    for (double& x : h) x = coef(rng);
    const TSplineSurface s(space, h);
    const std::size_t poke = space->size() / 2;
    std::vector<double> h2 = h;
    h2[poke] += 0.75;
    const TSplineSurface s2(space, h2);
    const ParamRect supp = space->support(poke);
    for (int i = 0; i < 1000; ++i) {
        const Param p{t(rng), t(rng)};
        double lo = 1e9, hi = -1e9;
        for (const auto& b : space->basis_row(p)) {
            lo = std::min(lo, h[b.anchor]);
            hi = std::max(hi, h[b.anchor]);
        }
        const double z = s.eval_z(p);
        EXPECT_GE(z, lo - 1e-12);
        EXPECT_LE(z, hi + 1e-12);
        if (!supp.contains(p)) {
            EXPECT_EQ(s2.eval_z(p), z);
        }
    }
}

TEST(TSplineSurfaceTest, GridMatchesPointwiseEvaluation) {
    std::mt19937_64 rng(35);
    const auto space = random_space(rng, ParamRect::make(-1, 1, 2, 3));
    std::vector<double> h(space->size());
    std::uniform_real_distribution<double> coef(-1, 1);
    for (double& x : h) x = coef(rng);
    const TSplineSurface s(space, h);
    const SurfaceGrid g = eval_grid(s, 7, 5);
    ASSERT_EQ(g.points.size(), 35u);
    EXPECT_EQ(g.params.front(), (Param{-1, 2}));
    EXPECT_EQ(g.params.back(), (Param{1, 3}));
    for (std::size_t i = 0; i < g.points.size(); ++i) EXPECT_EQ(g.points[i], s.eval(g.params[i]));
    const SurfaceGrid corners = eval_grid(s, 2, 2);
    EXPECT_EQ(corners.params[1], (Param{1, 2}));
    EXPECT_THROW(eval_grid(s, 1, 4), InputError);
}

TEST(LayeredSurfaceTest, LevelsAddUp) {
    std::mt19937_64 rng(36);
    const auto coarse = std::make_shared<const TSplineSpace>(TMesh::uniform(ParamRect{}, 4, 4));
    const auto fine = random_space(rng, ParamRect{});
    LayeredSurface l(TSplineSurface::constant(coarse, 1.0));
    std::vector<double> q(fine->size(), 0.0);
    q[10] = 0.5;
    const TSplineSurface r(fine, q);
    l.add_level(r);
    EXPECT_EQ(l.levels().size(), 2u);
    EXPECT_EQ(l.control_point_count(), fine->size());
    std::uniform_real_distribution<double> t(0, 1);
    for (int i = 0; i < 100; ++i) {
        const Param p{t(rng), t(rng)};
        EXPECT_NEAR(l.eval_z(p), 1.0 + r.eval_z(p), 1e-14);
    }
    const auto other = std::make_shared<const TSplineSpace>(TMesh::uniform(ParamRect::make(0, 2, 0, 1), 2, 2));
    EXPECT_THROW(l.add_level(TSplineSurface::constant(other, 0.0)), InputError);
}
