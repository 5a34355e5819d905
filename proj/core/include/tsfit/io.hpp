#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsfit/metrics.hpp"

namespace tsfit {

struct PointCloud {
    std::vector<Point3> points;
    std::string source;  ///< path or stream label
    std::string units;   ///< opaque, carried through to outputs
};

/// Rows of at least three numeric columns separated by whitespace and/or
/// commas; the first three are x y z, further columns are ignored. Blank
/// lines and lines starting with '#' are skipped. Throws LoadError with the
/// line number on malformed, short or non-finite rows, and when no row is
/// left.
PointCloud read_xyz(const std::filesystem::path& path);
PointCloud read_xyz(std::istream& in, const std::string& source);

/// One "x y z" row per point in shortest round-trip notation.
void write_xyz(std::ostream& out, std::span<const Point3> points);
void write_xyz(const std::filesystem::path& path, std::span<const Point3> points);

/// Affine map from the (x, y) bounding box onto a parametric rectangle.
struct Parametrization {
    ParamRect frame;                                    ///< physical (x, y) box
    ParamRect target = ParamRect::make(0.0, 1.0, 0.0, 1.0);

    /// Bounding box of the cloud. Throws ParametrizationError when it has
    /// zero width or height.
    static Parametrization from_cloud(const PointCloud& cloud);

    Param to_param(double x, double y) const;
    Param to_xy(Param p) const;
};

/// Observations with parameters from `map` (or the cloud's own bounding box).
std::vector<Observation> parametrize(const PointCloud& cloud, Parametrization* used = nullptr);
std::vector<Observation> parametrize(const PointCloud& cloud, const Parametrization& map);

/// z_A - z_B on a common nu x nv parameter grid.
struct DiffGrid {
    int nu = 0;
    int nv = 0;
    std::vector<Param> params;
    std::vector<double> z_a;
    std::vector<double> z_b;

    double dz(std::size_t i) const { return z_a[i] - z_b[i]; }
};

/// Throws InputError if the domains differ or the grid is smaller than 2 x 2.
DiffGrid diff_surfaces(const LayeredSurface& a, const LayeredSurface& b, int nu, int nv);
/// Rows "x y z_a z_b dz"; x, y are mapped back through `map` when given.
void write_diff_xyz(std::ostream& out, const DiffGrid& grid, const Parametrization* map = nullptr);
/// Rows "x y z" of a sampled surface grid.
void write_grid_xyz(std::ostream& out, const SurfaceGrid& grid, const Parametrization* map = nullptr);

/// A fitted surface together with the physical frame it was parametrised in.
struct StoredSurface {
    LayeredSurface surface;
    std::optional<Parametrization> map;
    std::string units;
};

/// JSON document with the domain, initial grid, leaf cells and coefficients
/// of every level. Loading rebuilds the meshes and checks the anchor count.
void save_surface(std::ostream& out, const StoredSurface& stored);
void save_surface(const std::filesystem::path& path, const StoredSurface& stored);
StoredSurface load_surface(std::istream& in, const std::string& source = "<stream>");
StoredSurface load_surface(const std::filesystem::path& path);

/// Cells (parameter rectangles and levels), vertices and anchors of a mesh.
std::string mesh_json(const TMesh& mesh);
/// Cell outlines of the mesh, scaled to `width` pixels.
void write_mesh_svg(std::ostream& out, const TMesh& mesh, int width = 800);

}  // namespace tsfit
