#include "tsfit/tspline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tsfit/errors.hpp"

namespace tsfit {

TSplineSpace::TSplineSpace(TMesh mesh, std::vector<double> weights)
    : mesh_(std::move(mesh)), anchors_(mesh_.anchors()) {
    if (!weights.empty()) {
        if (weights.size() != anchors_.size()) {
            throw InputError("expected " + std::to_string(anchors_.size()) + " weights, got " +
                             std::to_string(weights.size()));
        }
        for (std::size_t i = 0; i < anchors_.size(); ++i) {
            if (!(weights[i] > 0.0)) throw InputError("anchor weights must be positive");
            anchors_[i].weight = weights[i];
        }
    }
    build_index();
}

void TSplineSpace::build_index() {
    // Aim for a couple of buckets per cell.
    const std::size_t roots = static_cast<std::size_t>(mesh_.nu()) * static_cast<std::size_t>(mesh_.nv());
    int bits = 0;
    while (bits < kLatticeBits && (roots << (2 * bits)) < 2 * mesh_.size() && (roots << (2 * bits)) < (1u << 20)) {
        ++bits;
    }
    bucket_shift_ = kLatticeBits - bits;
    buckets_x_ = Coord{mesh_.nu()} << bits;
    buckets_y_ = Coord{mesh_.nv()} << bits;

    auto range = [this](Coord lo, Coord hi, Coord count) {
        const Coord a = std::clamp<Coord>(lo >> bucket_shift_, 0, count - 1);
        const Coord b = std::clamp<Coord>(hi >> bucket_shift_, 0, count - 1);
        return std::pair{a, b};
    };

    const auto total = static_cast<std::size_t>(buckets_x_ * buckets_y_);
    std::vector<std::uint32_t> counts(total + 1, 0);
    for (const Anchor& a : anchors_) {
        const auto [x0, x1] = range(a.lattice_ku[0], a.lattice_ku[4], buckets_x_);
        const auto [y0, y1] = range(a.lattice_kv[0], a.lattice_kv[4], buckets_y_);
        for (Coord y = y0; y <= y1; ++y)
            for (Coord x = x0; x <= x1; ++x) ++counts[static_cast<std::size_t>(y * buckets_x_ + x) + 1];
    }
    for (std::size_t i = 1; i <= total; ++i) counts[i] += counts[i - 1];
    bucket_offsets_ = counts;
    bucket_items_.assign(counts.back(), 0);
    std::vector<std::uint32_t> fill(counts.begin(), counts.end() - 1);
    for (std::size_t i = 0; i < anchors_.size(); ++i) {
        const Anchor& a = anchors_[i];
        const auto [x0, x1] = range(a.lattice_ku[0], a.lattice_ku[4], buckets_x_);
        const auto [y0, y1] = range(a.lattice_kv[0], a.lattice_kv[4], buckets_y_);
        for (Coord y = y0; y <= y1; ++y)
            for (Coord x = x0; x <= x1; ++x)
                bucket_items_[fill[static_cast<std::size_t>(y * buckets_x_ + x)]++] =
                    static_cast<std::uint32_t>(i);
    }
}

ParamRect TSplineSpace::support(std::size_t i) const {
    const Anchor& a = anchors_.at(i);
    return {a.ku.front(), a.ku.back(), a.kv.front(), a.kv.back()};
}

void TSplineSpace::raw_row(Param p, std::vector<BasisValue>& out) const {
    out.clear();
    const ParamRect& d = mesh_.domain();
    if (!d.contains(p)) {
        throw InputError("parameter (" + std::to_string(p.u) + ", " + std::to_string(p.v) +
                         ") outside the spline domain");
    }
    const double xr = (p.u - d.u_min) / d.width() * static_cast<double>(mesh_.x_max());
    const double yr = (p.v - d.v_min) / d.height() * static_cast<double>(mesh_.y_max());
    const double span = std::ldexp(1.0, bucket_shift_);
    const Coord bx = std::clamp<Coord>(static_cast<Coord>(std::floor(xr / span)), 0, buckets_x_ - 1);
    const Coord by = std::clamp<Coord>(static_cast<Coord>(std::floor(yr / span)), 0, buckets_y_ - 1);
    const auto bucket = static_cast<std::size_t>(by * buckets_x_ + bx);

    const bool right_edge = p.u == d.u_max;
    const bool top_edge = p.v == d.v_max;
    for (std::uint32_t k = bucket_offsets_[bucket]; k < bucket_offsets_[bucket + 1]; ++k) {
        const Anchor& a = anchors_[bucket_items_[k]];
        const double bu = cubic_bspline(a.ku, p.u, right_edge);
        if (bu == 0.0) continue;
        const double bv = cubic_bspline(a.kv, p.v, top_edge);
        if (bv == 0.0) continue;
        out.push_back({bucket_items_[k], a.weight * bu * bv});
    }
    std::sort(out.begin(), out.end(),
              [](const BasisValue& x, const BasisValue& y) { return x.anchor < y.anchor; });
}

void TSplineSpace::basis_row(Param p, std::vector<BasisValue>& out) const {
    raw_row(p, out);
    double sum = 0.0;
    for (const auto& b : out) sum += b.value;
    if (!(sum > 0.0)) {
        throw StructuralError("no T-spline basis function covers (" + std::to_string(p.u) + ", " +
                              std::to_string(p.v) + ")");
    }
    for (auto& b : out) b.value /= sum;
}

std::vector<BasisValue> TSplineSpace::basis_row(Param p) const {
    std::vector<BasisValue> out;
    basis_row(p, out);
    return out;
}

TSplineSurface::TSplineSurface(std::shared_ptr<const TSplineSpace> space, std::vector<double> heights)
    : space_(std::move(space)), mode_(SurfaceMode::HeightField), heights_(std::move(heights)) {
    if (!space_) throw InputError("surface needs a spline space");
    if (heights_.size() != space_->size()) {
        throw InputError("expected one height coefficient per anchor (" + std::to_string(space_->size()) +
                         "), got " + std::to_string(heights_.size()));
    }
}

TSplineSurface::TSplineSurface(std::shared_ptr<const TSplineSpace> space, std::vector<Point3> control_points)
    : space_(std::move(space)), mode_(SurfaceMode::ControlPoints), points_(std::move(control_points)) {
    if (!space_) throw InputError("surface needs a spline space");
    if (points_.size() != space_->size()) {
        throw InputError("expected one control point per anchor (" + std::to_string(space_->size()) +
                         "), got " + std::to_string(points_.size()));
    }
}

TSplineSurface TSplineSurface::constant(std::shared_ptr<const TSplineSpace> space, double z) {
    const std::size_t n = space->size();
    return TSplineSurface(std::move(space), std::vector<double>(n, z));
}

Point3 TSplineSurface::eval(Param p) const {
    thread_local std::vector<BasisValue> row;
    space_->basis_row(p, row);
    if (mode_ == SurfaceMode::HeightField) {
        double z = 0.0;
        for (const auto& b : row) z += b.value * heights_[b.anchor];
        return {p.u, p.v, z};
    }
    Point3 s = Point3::Zero();
    for (const auto& b : row) s += b.value * points_[b.anchor];
    return s;
}

double TSplineSurface::eval_z(Param p) const {
    if (mode_ == SurfaceMode::ControlPoints) return eval(p).z();
    thread_local std::vector<BasisValue> row;
    space_->basis_row(p, row);
    double z = 0.0;
    for (const auto& b : row) z += b.value * heights_[b.anchor];
    return z;
}

LayeredSurface::LayeredSurface(TSplineSurface base) { levels_.push_back(std::move(base)); }

void LayeredSurface::add_level(TSplineSurface residual) {
    if (mode() != SurfaceMode::HeightField || residual.mode() != SurfaceMode::HeightField) {
        throw InputError("only height-field surfaces can be layered");
    }
    if (!(residual.domain() == domain())) {
        throw InputError("residual level has a different parametric domain");
    }
    levels_.push_back(std::move(residual));
}

Point3 LayeredSurface::eval(Param p) const {
    if (mode() == SurfaceMode::ControlPoints) return levels_.front().eval(p);
    return {p.u, p.v, eval_z(p)};
}

double LayeredSurface::eval_z(Param p) const {
    double z = 0.0;
    for (const auto& level : levels_) z += level.eval_z(p);
    return z;
}

double grid_coordinate(double lo, double hi, int i, int n) {
    if (i == 0) return lo;
    if (i == n - 1) return hi;
    return lo + (hi - lo) * (static_cast<double>(i) / static_cast<double>(n - 1));
}

namespace {

template <typename Surface>
SurfaceGrid sample_grid(const Surface& s, int nu, int nv) {
    if (nu < 2 || nv < 2) throw InputError("evaluation grid needs at least 2 x 2 nodes");
    const ParamRect& d = s.domain();
    SurfaceGrid g;
    g.nu = nu;
    g.nv = nv;
    g.params.reserve(static_cast<std::size_t>(nu) * static_cast<std::size_t>(nv));
    g.points.reserve(g.params.capacity());
    for (int j = 0; j < nv; ++j) {
        const double v = grid_coordinate(d.v_min, d.v_max, j, nv);
        for (int i = 0; i < nu; ++i) {
            const Param p{grid_coordinate(d.u_min, d.u_max, i, nu), v};
            g.params.push_back(p);
            g.points.push_back(s.eval(p));
        }
    }
    return g;
}

}  // namespace

SurfaceGrid eval_grid(const TSplineSurface& surface, int nu, int nv) { return sample_grid(surface, nu, nv); }
SurfaceGrid eval_grid(const LayeredSurface& surface, int nu, int nv) { return sample_grid(surface, nu, nv); }

}  // namespace tsfit
