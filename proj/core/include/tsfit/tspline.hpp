#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "tsfit/tmesh.hpp"

namespace tsfit {

using Point3 = Eigen::Vector3d;

/// One entry of a sparse basis row: normalised B_z at some parameter.
struct BasisValue {
    std::size_t anchor = 0;
    double value = 0.0;
};

/// Bicubic T-spline space of a T-mesh: its anchors and the rationally
/// normalised basis B_z = w_z B_z^u B_z^v / sum_r w_r B_r^u B_r^v.
class TSplineSpace {
public:
    /// Weights default to 1; otherwise one positive weight per anchor.
    explicit TSplineSpace(TMesh mesh, std::vector<double> weights = {});

    const TMesh& mesh() const { return mesh_; }
    const ParamRect& domain() const { return mesh_.domain(); }
    std::span<const Anchor> anchors() const { return anchors_; }
    std::size_t size() const { return anchors_.size(); }

    /// Normalised basis functions that are non-zero at p, ordered by anchor
    /// index. Throws InputError outside the domain and StructuralError if no
    /// basis function covers p.
    void basis_row(Param p, std::vector<BasisValue>& out) const;
    std::vector<BasisValue> basis_row(Param p) const;

    /// Unnormalised products w_z B_z^u(u) B_z^v(v) (same ordering).
    void raw_row(Param p, std::vector<BasisValue>& out) const;

    /// Closed knot-support rectangle of anchor i.
    ParamRect support(std::size_t i) const;

private:
    void build_index();

    TMesh mesh_;
    std::vector<Anchor> anchors_;

    // Uniform bucket grid over the lattice; each bucket lists the anchors
    // whose support meets it.
    int bucket_shift_ = 0;
    Coord buckets_x_ = 1;
    Coord buckets_y_ = 1;
    std::vector<std::uint32_t> bucket_offsets_;
    std::vector<std::uint32_t> bucket_items_;
};

enum class SurfaceMode {
    HeightField,    ///< S(u,v) = (u, v, z(u,v)) with scalar coefficients
    ControlPoints,  ///< S(u,v) = sum B_z P_z with 3D control points
};

/// Spline surface over a shared, immutable T-spline space.
class TSplineSurface {
public:
    TSplineSurface(std::shared_ptr<const TSplineSpace> space, std::vector<double> heights);
    TSplineSurface(std::shared_ptr<const TSplineSpace> space, std::vector<Point3> control_points);

    static TSplineSurface constant(std::shared_ptr<const TSplineSpace> space, double z);

    SurfaceMode mode() const { return mode_; }
    const TSplineSpace& space() const { return *space_; }
    const std::shared_ptr<const TSplineSpace>& space_ptr() const { return space_; }
    const ParamRect& domain() const { return space_->domain(); }
    std::span<const double> heights() const { return heights_; }
    std::span<const Point3> control_points() const { return points_; }

    /// Surface point; (u, v, z) in height-field mode.
    Point3 eval(Param p) const;
    /// z component only.
    double eval_z(Param p) const;

private:
    std::shared_ptr<const TSplineSpace> space_;
    SurfaceMode mode_;
    std::vector<double> heights_;
    std::vector<Point3> points_;
};

/// Sum of per-level surfaces as produced by the multilevel update: the base
/// surface plus one residual surface per refinement step. Evaluation adds
/// the levels; a control-point surface can only stand alone.
class LayeredSurface {
public:
    explicit LayeredSurface(TSplineSurface base);

    void add_level(TSplineSurface residual);

    std::span<const TSplineSurface> levels() const { return levels_; }
    const TSplineSurface& finest() const { return levels_.back(); }
    const ParamRect& domain() const { return levels_.front().domain(); }
    SurfaceMode mode() const { return levels_.front().mode(); }
    /// Anchors of the finest level's space.
    std::size_t control_point_count() const { return finest().space().size(); }

    Point3 eval(Param p) const;
    double eval_z(Param p) const;

private:
    std::vector<TSplineSurface> levels_;
};

/// Equally spaced nu x nv tensor grid of evaluations over the closed domain,
/// row-major with u varying fastest.
struct SurfaceGrid {
    int nu = 0;
    int nv = 0;
    std::vector<Param> params;
    std::vector<Point3> points;
};

/// Grid parameter i of n over [lo, hi]; the end points are exact.
double grid_coordinate(double lo, double hi, int i, int n);

SurfaceGrid eval_grid(const TSplineSurface& surface, int nu, int nv);
SurfaceGrid eval_grid(const LayeredSurface& surface, int nu, int nv);

}  // namespace tsfit
