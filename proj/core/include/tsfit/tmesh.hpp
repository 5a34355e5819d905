#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tsfit/splines.hpp"

namespace tsfit {

/// A point of the parametric plane.
struct Param {
    double u = 0.0;
    double v = 0.0;
    friend bool operator==(const Param&, const Param&) = default;
};

/// Axis-parallel parametric rectangle; throws InputError unless min < max.
struct ParamRect {
    double u_min = 0.0;
    double u_max = 1.0;
    double v_min = 0.0;
    double v_max = 1.0;

    static ParamRect make(double u_min, double u_max, double v_min, double v_max);

    double width() const { return u_max - u_min; }
    double height() const { return v_max - v_min; }
    double area() const { return width() * height(); }
    /// Closed containment.
    bool contains(Param p) const {
        return p.u >= u_min && p.u <= u_max && p.v >= v_min && p.v <= v_max;
    }
    friend bool operator==(const ParamRect&, const ParamRect&) = default;
};

/// Integer coordinate on the dyadic lattice that underlies every mesh. One
/// initial cell spans 2^kLatticeBits units in each direction, so bisection
/// never leaves the lattice and vertex identity is exact.
using Coord = std::int64_t;
inline constexpr int kLatticeBits = 26;
inline constexpr Coord kInitialCellSpan = Coord{1} << kLatticeBits;
/// Deepest level reachable before the lattice runs out of resolution.
inline constexpr int kMaxLevel = 2 * kLatticeBits;

struct LatticePoint {
    Coord x = 0;
    Coord y = 0;
    friend auto operator<=>(const LatticePoint&, const LatticePoint&) = default;
};

struct LatticeBox {
    Coord x0 = 0, x1 = 0, y0 = 0, y1 = 0;
    Coord width() const { return x1 - x0; }
    Coord height() const { return y1 - y0; }
    friend bool operator==(const LatticeBox&, const LatticeBox&) = default;
};

using CellId = std::size_t;

struct Cell {
    LatticeBox box;
    int level = 0;
};

/// Size of the closure neighbourhood used by `TMesh::refine`. The
/// neighbourhood of a cell is the open box centred at the cell midpoint with
/// the given half-extents, measured in multiples of the cell's width. Cells of
/// even level are bisected by a vertical line, cells of odd level by a
/// horizontal one.
struct NeighborhoodRule {
    double even_x = 1.5;
    double even_y = 2.5;
    double odd_x = 2.5;
    double odd_y = 1.5;
};

struct RefineStats {
    std::size_t requested = 0;  ///< cells marked by the caller
    std::size_t closure = 0;    ///< additional cells marked by the neighbourhood rule
    int passes = 0;             ///< closure sweeps, including the final one that adds nothing
};

/// A mesh vertex or a clamped boundary ghost carrying one bicubic basis function.
///
/// Ghost anchors (`ghost_u`/`ghost_v` = -1 or +1) live in the zero-width frame
/// outside the domain edge; together with the triple boundary knots of the
/// vertex anchors they reproduce open (clamped) knot vectors at the boundary.
struct Anchor {
    Param vertex;
    LocalKnots ku;
    LocalKnots kv;
    double weight = 1.0;

    LatticePoint site;
    std::array<Coord, 5> lattice_ku{};
    std::array<Coord, 5> lattice_kv{};
    int ghost_u = 0;
    int ghost_v = 0;

    bool is_ghost() const { return ghost_u != 0 || ghost_v != 0; }
};

enum class TJunctionKind { MissingLeft, MissingRight, MissingDown, MissingUp };

struct TJunction {
    LatticePoint site;
    TJunctionKind kind;
    /// Closed extension segment in lattice units; x0 == x1 for vertical ones.
    LatticeBox extension;

    bool vertical() const {
        return kind == TJunctionKind::MissingDown || kind == TJunctionKind::MissingUp;
    }
};

/// T-mesh over a rectangular parametric domain built by repeated bisection
/// of an initial nu x nv tensor grid. Immutable: `refine` returns a new mesh.
class TMesh {
public:
    /// nu x nv congruent level-0 cells. Throws InputError if nu or nv is zero.
    static TMesh uniform(const ParamRect& domain, int nu, int nv, NeighborhoodRule rule = {});

    /// Rebuilds a mesh from its leaf cells (e.g. after deserialisation).
    /// Throws InputError if the cells are not reachable by bisection.
    static TMesh from_cells(const ParamRect& domain, int nu, int nv,
                            std::span<const Cell> cells, NeighborhoodRule rule = {});

    const ParamRect& domain() const { return domain_; }
    int nu() const { return nu_; }
    int nv() const { return nv_; }
    const NeighborhoodRule& rule() const { return rule_; }

    std::size_t size() const { return cells_.size(); }
    std::span<const Cell> cells() const { return cells_; }
    const Cell& cell(CellId id) const;
    ParamRect cell_rect(CellId id) const;
    int max_level() const;

    /// Cell containing p under the half-open convention; points on the
    /// right/top domain edge belong to the last cell. Throws InputError if p
    /// lies outside the domain.
    CellId cell_at(Param p) const;

    /// Bisects every marked cell together with its neighbourhood closure.
    TMesh refine(std::span<const CellId> marked, RefineStats* stats = nullptr) const;
    /// Bisects every cell once (one global dyadic half-step).
    TMesh refine_all() const;

    /// Closure of `marked` under the neighbourhood rule, as sorted cell ids.
    std::vector<CellId> closure(std::span<const CellId> marked, RefineStats* stats = nullptr) const;

    /// Cells whose interior meets the closure neighbourhood of a box of the given level.
    std::vector<CellId> neighborhood(const LatticeBox& box, int level) const;

    /// All cell corners, sorted by (y, x).
    std::vector<LatticePoint> vertices() const;
    bool is_vertex(LatticePoint p) const;

    /// Knot vectors of the anchor at a mesh vertex. Throws InputError if the
    /// point is not a vertex.
    Anchor anchor_knots(Param vertex) const;
    Anchor anchor_knots(LatticePoint vertex) const;

    /// Every anchor: one per vertex plus the clamped boundary ghosts. Ordered
    /// row by row from the bottom ghost row to the top ghost row.
    std::vector<Anchor> anchors() const;

    /// True if no cell has a strictly coarser cell inside the closure
    /// neighbourhood its parent had when it was bisected.
    bool admissible() const;

    // Lattice <-> parameter conversion.
    double u_of(Coord x) const;
    double v_of(Coord y) const;
    Param param_of(LatticePoint p) const { return {u_of(p.x), v_of(p.y)}; }
    ParamRect rect_of(const LatticeBox& b) const;
    /// Exact inverse of u_of/v_of; throws InputError if off-lattice.
    Coord x_of(double u) const;
    Coord y_of(double v) const;
    Coord x_max() const { return Coord{nu_} * kInitialCellSpan; }
    Coord y_max() const { return Coord{nv_} * kInitialCellSpan; }

    /// Two nearest perpendicular edge crossings along a ray from `p`
    /// (direction: 0 = +u, 1 = -u, 2 = +v, 3 = -v), padded with the
    /// domain boundary coordinate when the ray leaves the domain.
    std::array<Coord, 2> ray_crossings(LatticePoint p, int direction) const;

    /// Whether a mesh edge leaves vertex p in the given direction (same encoding).
    bool has_edge(LatticePoint p, int direction) const;

private:
    struct Node {
        LatticeBox box;
        int level = 0;
        std::int32_t parent = -1;
        std::array<std::int32_t, 2> child{-1, -1};
        bool leaf() const { return child[0] < 0; }
    };

    TMesh(const ParamRect& domain, int nu, int nv, NeighborhoodRule rule);

    void split(std::size_t node);
    void rebuild_leaves();
    std::size_t locate(Coord x, Coord y, bool left, bool down) const;
    void collect_in_box(std::size_t node, double x_lo, double x_hi, double y_lo, double y_hi,
                        std::vector<CellId>& out) const;
    std::array<double, 4> neighborhood_box(const LatticeBox& box, int level) const;

    ParamRect domain_;
    int nu_ = 1;
    int nv_ = 1;
    NeighborhoodRule rule_;
    std::vector<Node> nodes_;  // first nu*nv entries are the row-major roots
    std::vector<Cell> cells_;
    std::vector<std::int32_t> cell_node_;
    std::vector<std::int32_t> node_cell_;
};

/// T-junctions of the mesh with their bicubic extensions (two faces towards
/// the missing edge, one face away from it). Boundary vertices are never
/// T-junctions: the clamped frame continues every boundary edge.
std::vector<TJunction> t_junctions(const TMesh& mesh);

/// No horizontal T-junction extension meets a vertical one.
bool is_analysis_suitable(const TMesh& mesh);

}  // namespace tsfit
