#include "tsfit/tmesh.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <tuple>

#include "tsfit/errors.hpp"

namespace tsfit {

namespace {

constexpr int kRight = 0;
constexpr int kLeft = 1;
constexpr int kUp = 2;
constexpr int kDown = 3;

bool vertical_split(int level) { return level % 2 == 0; }

}  // namespace

ParamRect ParamRect::make(double u_min, double u_max, double v_min, double v_max) {
    if (!(u_min < u_max) || !(v_min < v_max)) {
        throw InputError("parametric rectangle must satisfy min < max in both directions");
    }
    return {u_min, u_max, v_min, v_max};
}

TMesh::TMesh(const ParamRect& domain, int nu, int nv, NeighborhoodRule rule)
    : domain_(domain), nu_(nu), nv_(nv), rule_(rule) {}

TMesh TMesh::uniform(const ParamRect& domain, int nu, int nv, NeighborhoodRule rule) {
    if (nu < 1 || nv < 1) {
        throw InputError("initial mesh needs at least one cell in each direction");
    }
    const ParamRect checked = ParamRect::make(domain.u_min, domain.u_max, domain.v_min, domain.v_max);
    TMesh mesh(checked, nu, nv, rule);
    mesh.nodes_.reserve(static_cast<std::size_t>(nu) * static_cast<std::size_t>(nv));
    for (int j = 0; j < nv; ++j) {
        for (int i = 0; i < nu; ++i) {
            Node n;
            n.box = {i * kInitialCellSpan, (i + 1) * kInitialCellSpan, j * kInitialCellSpan,
                     (j + 1) * kInitialCellSpan};
            mesh.nodes_.push_back(n);
        }
    }
    mesh.rebuild_leaves();
    return mesh;
}

TMesh TMesh::from_cells(const ParamRect& domain, int nu, int nv, std::span<const Cell> cells,
                        NeighborhoodRule rule) {
    TMesh mesh = uniform(domain, nu, nv, rule);
    std::set<std::tuple<Coord, Coord, Coord, Coord, int>> wanted;
    for (const Cell& c : cells) {
        wanted.emplace(c.box.x0, c.box.x1, c.box.y0, c.box.y1, c.level);
    }
    // Breadth-first: split every node that is not itself a requested cell.
    std::size_t matched = 0;
    for (std::size_t i = 0; i < mesh.nodes_.size(); ++i) {
        const Node n = mesh.nodes_[i];
        if (wanted.contains({n.box.x0, n.box.x1, n.box.y0, n.box.y1, n.level})) {
            ++matched;
            continue;
        }
        if (n.level >= kMaxLevel || n.box.width() < 2 || n.box.height() < 2) {
            throw InputError("cell list does not describe a bisection mesh");
        }
        mesh.split(i);
    }
    if (matched != cells.size()) {
        throw InputError("cell list contains duplicate or unreachable cells");
    }
    mesh.rebuild_leaves();
    return mesh;
}

void TMesh::split(std::size_t index) {
    Node& n = nodes_[index];
    if (n.level >= kMaxLevel) {
        throw InputError("maximum refinement level " + std::to_string(kMaxLevel) + " exceeded");
    }
    Node a;
    Node b;
    a.level = b.level = n.level + 1;
    a.parent = b.parent = static_cast<std::int32_t>(index);
    a.box = b.box = n.box;
    if (vertical_split(n.level)) {
        const Coord mid = (n.box.x0 + n.box.x1) / 2;
        a.box.x1 = mid;
        b.box.x0 = mid;
    } else {
        const Coord mid = (n.box.y0 + n.box.y1) / 2;
        a.box.y1 = mid;
        b.box.y0 = mid;
    }
    const auto first = static_cast<std::int32_t>(nodes_.size());
    n.child = {first, first + 1};
    nodes_.push_back(a);
    nodes_.push_back(b);
}

void TMesh::rebuild_leaves() {
    cells_.clear();
    cell_node_.clear();
    node_cell_.assign(nodes_.size(), -1);
    std::vector<std::int32_t> stack;
    const auto roots = static_cast<std::int32_t>(nu_ * nv_);
    for (std::int32_t r = 0; r < roots; ++r) {
        stack.push_back(r);
        while (!stack.empty()) {
            const std::int32_t i = stack.back();
            stack.pop_back();
            const Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.leaf()) {
                node_cell_[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(cells_.size());
                cells_.push_back({n.box, n.level});
                cell_node_.push_back(i);
            } else {
                stack.push_back(n.child[1]);
                stack.push_back(n.child[0]);
            }
        }
    }
}

const Cell& TMesh::cell(CellId id) const {
    if (id >= cells_.size()) {
        throw InputError("unknown cell id " + std::to_string(id));
    }
    return cells_[id];
}

ParamRect TMesh::cell_rect(CellId id) const { return rect_of(cell(id).box); }

int TMesh::max_level() const {
    int m = 0;
    for (const Cell& c : cells_) m = std::max(m, c.level);
    return m;
}

double TMesh::u_of(Coord x) const {
    if (x == 0) return domain_.u_min;
    if (x == x_max()) return domain_.u_max;
    return domain_.u_min + domain_.width() * (static_cast<double>(x) / static_cast<double>(x_max()));
}

double TMesh::v_of(Coord y) const {
    if (y == 0) return domain_.v_min;
    if (y == y_max()) return domain_.v_max;
    return domain_.v_min + domain_.height() * (static_cast<double>(y) / static_cast<double>(y_max()));
}

ParamRect TMesh::rect_of(const LatticeBox& b) const {
    return {u_of(b.x0), u_of(b.x1), v_of(b.y0), v_of(b.y1)};
}

Coord TMesh::x_of(double u) const {
    const double t = (u - domain_.u_min) / domain_.width() * static_cast<double>(x_max());
    const auto x = static_cast<Coord>(std::llround(t));
    if (x < 0 || x > x_max() || u_of(x) != u) {
        throw InputError("u = " + std::to_string(u) + " is not a mesh lattice coordinate");
    }
    return x;
}

Coord TMesh::y_of(double v) const {
    const double t = (v - domain_.v_min) / domain_.height() * static_cast<double>(y_max());
    const auto y = static_cast<Coord>(std::llround(t));
    if (y < 0 || y > y_max() || v_of(y) != v) {
        throw InputError("v = " + std::to_string(v) + " is not a mesh lattice coordinate");
    }
    return y;
}

// Leaf containing the point displaced infinitesimally to the left/right and
// down/up of the lattice point (x, y). The caller guarantees that displaced
// point lies inside the domain.
std::size_t TMesh::locate(Coord x, Coord y, bool left, bool down) const {
    auto root_index = [](Coord c, bool lower, int count) {
        Coord i = c / kInitialCellSpan;
        if (lower && c % kInitialCellSpan == 0) --i;
        return static_cast<int>(std::clamp<Coord>(i, 0, count - 1));
    };
    std::size_t i = static_cast<std::size_t>(root_index(y, down, nv_) * nu_ + root_index(x, left, nu_));
    while (!nodes_[i].leaf()) {
        const Node& n = nodes_[i];
        bool second;
        if (vertical_split(n.level)) {
            const Coord mid = (n.box.x0 + n.box.x1) / 2;
            second = x > mid || (x == mid && !left);
        } else {
            const Coord mid = (n.box.y0 + n.box.y1) / 2;
            second = y > mid || (y == mid && !down);
        }
        i = static_cast<std::size_t>(n.child[second ? 1 : 0]);
    }
    return i;
}

CellId TMesh::cell_at(Param p) const {
    if (!domain_.contains(p)) {
        throw InputError("point (" + std::to_string(p.u) + ", " + std::to_string(p.v) +
                         ") lies outside the parametric domain");
    }
    const double xr = (p.u - domain_.u_min) / domain_.width() * static_cast<double>(x_max());
    const double yr = (p.v - domain_.v_min) / domain_.height() * static_cast<double>(y_max());
    const auto span = static_cast<double>(kInitialCellSpan);
    const int ri = std::clamp(static_cast<int>(std::floor(xr / span)), 0, nu_ - 1);
    const int rj = std::clamp(static_cast<int>(std::floor(yr / span)), 0, nv_ - 1);
    std::size_t i = static_cast<std::size_t>(rj * nu_ + ri);
    while (!nodes_[i].leaf()) {
        const Node& n = nodes_[i];
        bool second;
        if (vertical_split(n.level)) {
            second = xr >= static_cast<double>((n.box.x0 + n.box.x1) / 2);
        } else {
            second = yr >= static_cast<double>((n.box.y0 + n.box.y1) / 2);
        }
        i = static_cast<std::size_t>(n.child[second ? 1 : 0]);
    }
    return static_cast<CellId>(node_cell_[i]);
}

std::array<double, 4> TMesh::neighborhood_box(const LatticeBox& box, int level) const {
    const double w = static_cast<double>(box.width());
    const bool even = level % 2 == 0;
    const double hx = (even ? rule_.even_x : rule_.odd_x) * w;
    const double hy = (even ? rule_.even_y : rule_.odd_y) * w;
    const double cx = 0.5 * static_cast<double>(box.x0 + box.x1);
    const double cy = 0.5 * static_cast<double>(box.y0 + box.y1);
    return {cx - hx, cx + hx, cy - hy, cy + hy};
}

void TMesh::collect_in_box(std::size_t index, double x_lo, double x_hi, double y_lo, double y_hi,
                           std::vector<CellId>& out) const {
    const Node& n = nodes_[index];
    const auto& b = n.box;
    if (!(static_cast<double>(b.x0) < x_hi && static_cast<double>(b.x1) > x_lo &&
          static_cast<double>(b.y0) < y_hi && static_cast<double>(b.y1) > y_lo)) {
        return;
    }
    if (n.leaf()) {
        out.push_back(static_cast<CellId>(node_cell_[index]));
        return;
    }
    collect_in_box(static_cast<std::size_t>(n.child[0]), x_lo, x_hi, y_lo, y_hi, out);
    collect_in_box(static_cast<std::size_t>(n.child[1]), x_lo, x_hi, y_lo, y_hi, out);
}

std::vector<CellId> TMesh::neighborhood(const LatticeBox& box, int level) const {
    const auto [x_lo, x_hi, y_lo, y_hi] = neighborhood_box(box, level);
    const auto span = static_cast<double>(kInitialCellSpan);
    const int i0 = std::clamp(static_cast<int>(std::floor(x_lo / span)), 0, nu_ - 1);
    const int i1 = std::clamp(static_cast<int>(std::floor(x_hi / span)), 0, nu_ - 1);
    const int j0 = std::clamp(static_cast<int>(std::floor(y_lo / span)), 0, nv_ - 1);
    const int j1 = std::clamp(static_cast<int>(std::floor(y_hi / span)), 0, nv_ - 1);
    std::vector<CellId> out;
    for (int j = j0; j <= j1; ++j) {
        for (int i = i0; i <= i1; ++i) {
            collect_in_box(static_cast<std::size_t>(j * nu_ + i), x_lo, x_hi, y_lo, y_hi, out);
        }
    }
    return out;
}

std::vector<CellId> TMesh::closure(std::span<const CellId> marked, RefineStats* stats) const {
    std::vector<char> in(cells_.size(), 0);
    std::vector<CellId> frontier;
    for (CellId id : marked) {
        if (id >= cells_.size()) {
            throw InputError("unknown cell id " + std::to_string(id));
        }
        if (!in[id]) {
            in[id] = 1;
            frontier.push_back(id);
        }
    }
    const std::size_t requested = frontier.size();
    std::size_t added = 0;
    int passes = 0;
    while (!frontier.empty()) {
        ++passes;
        std::vector<CellId> next;
        for (CellId k : frontier) {
            const Cell& c = cells_[k];
            for (CellId n : neighborhood(c.box, c.level)) {
                if (cells_[n].level < c.level && !in[n]) {
                    in[n] = 1;
                    next.push_back(n);
                }
            }
        }
        added += next.size();
        frontier = std::move(next);
    }
    if (stats) {
        *stats = {requested, added, passes};
    }
    std::vector<CellId> out;
    out.reserve(requested + added);
    for (CellId i = 0; i < in.size(); ++i) {
        if (in[i]) out.push_back(i);
    }
    return out;
}

TMesh TMesh::refine(std::span<const CellId> marked, RefineStats* stats) const {
    const std::vector<CellId> all = closure(marked, stats);
    TMesh out = *this;
    for (CellId id : all) {
        out.split(static_cast<std::size_t>(cell_node_[id]));
    }
    out.rebuild_leaves();
    return out;
}

TMesh TMesh::refine_all() const {
    std::vector<CellId> all(cells_.size());
    for (CellId i = 0; i < all.size(); ++i) all[i] = i;
    return refine(all);
}

std::vector<LatticePoint> TMesh::vertices() const {
    std::vector<LatticePoint> v;
    v.reserve(cells_.size() * 4);
    for (const Cell& c : cells_) {
        v.push_back({c.box.x0, c.box.y0});
        v.push_back({c.box.x1, c.box.y0});
        v.push_back({c.box.x0, c.box.y1});
        v.push_back({c.box.x1, c.box.y1});
    }
    std::sort(v.begin(), v.end(), [](const LatticePoint& a, const LatticePoint& b) {
        return std::tie(a.y, a.x) < std::tie(b.y, b.x);
    });
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

bool TMesh::is_vertex(LatticePoint p) const {
    if (p.x < 0 || p.x > x_max() || p.y < 0 || p.y > y_max()) return false;
    for (int q = 0; q < 4; ++q) {
        const bool left = (q & 1) != 0;
        const bool down = (q & 2) != 0;
        if ((left && p.x == 0) || (!left && p.x == x_max()) || (down && p.y == 0) ||
            (!down && p.y == y_max())) {
            continue;
        }
        const auto& b = nodes_[locate(p.x, p.y, left, down)].box;
        if ((p.x == b.x0 || p.x == b.x1) && (p.y == b.y0 || p.y == b.y1)) return true;
    }
    return false;
}

std::array<Coord, 2> TMesh::ray_crossings(LatticePoint p, int direction) const {
    const bool along_u = direction == kRight || direction == kLeft;
    const bool forward = direction == kRight || direction == kUp;
    const Coord start = along_u ? p.x : p.y;
    const Coord across = along_u ? p.y : p.x;
    const Coord end = forward ? (along_u ? x_max() : y_max()) : 0;
    const Coord across_max = along_u ? y_max() : x_max();

    std::array<Coord, 4> found{};
    std::size_t count = 0;
    // Walk the strip of cells on either side of the ray.
    for (int side = 0; side < 2; ++side) {
        const bool lower = side == 1;
        if ((lower && across == 0) || (!lower && across == across_max)) continue;
        Coord pos = start;
        for (int hits = 0; hits < 2 && pos != end; ++hits) {
            std::size_t n;
            if (along_u) {
                n = locate(pos, across, !forward, lower);
            } else {
                n = locate(across, pos, lower, !forward);
            }
            const auto& b = nodes_[n].box;
            pos = along_u ? (forward ? b.x1 : b.x0) : (forward ? b.y1 : b.y0);
            found[count++] = pos;
        }
    }
    std::sort(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(count));
    if (!forward) {
        std::reverse(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(count));
    }
    count = static_cast<std::size_t>(
        std::unique(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(count)) - found.begin());
    std::array<Coord, 2> out{end, end};
    for (std::size_t i = 0; i < std::min<std::size_t>(count, 2); ++i) out[i] = found[i];
    return out;
}

bool TMesh::has_edge(LatticePoint p, int direction) const {
    switch (direction) {
        case kRight:
            if (p.x >= x_max()) return false;
            if (p.y == 0 || p.y == y_max()) return true;
            return nodes_[locate(p.x, p.y, false, false)].box.y0 == p.y;
        case kLeft:
            if (p.x <= 0) return false;
            if (p.y == 0 || p.y == y_max()) return true;
            return nodes_[locate(p.x, p.y, true, false)].box.y0 == p.y;
        case kUp:
            if (p.y >= y_max()) return false;
            if (p.x == 0 || p.x == x_max()) return true;
            return nodes_[locate(p.x, p.y, false, false)].box.x0 == p.x;
        case kDown:
            if (p.y <= 0) return false;
            if (p.x == 0 || p.x == x_max()) return true;
            return nodes_[locate(p.x, p.y, false, true)].box.x0 == p.x;
        default:
            throw InputError("invalid ray direction");
    }
}

namespace {

std::array<double, 5> to_params(const std::array<Coord, 5>& k, const TMesh& mesh, bool along_u) {
    std::array<double, 5> out{};
    for (std::size_t i = 0; i < 5; ++i) out[i] = along_u ? mesh.u_of(k[i]) : mesh.v_of(k[i]);
    return out;
}

Anchor make_anchor(const TMesh& mesh, LatticePoint site, const std::array<Coord, 5>& ku,
                   const std::array<Coord, 5>& kv, int ghost_u, int ghost_v) {
    Anchor a{mesh.param_of(site), LocalKnots(to_params(ku, mesh, true)),
             LocalKnots(to_params(kv, mesh, false)), 1.0, site, ku, kv, ghost_u, ghost_v};
    return a;
}

}  // namespace

Anchor TMesh::anchor_knots(LatticePoint v) const {
    if (!is_vertex(v)) {
        throw InputError("point is not a vertex of the T-mesh");
    }
    const auto r = ray_crossings(v, kRight);
    const auto l = ray_crossings(v, kLeft);
    const auto u = ray_crossings(v, kUp);
    const auto d = ray_crossings(v, kDown);
    return make_anchor(*this, v, {l[1], l[0], v.x, r[0], r[1]}, {d[1], d[0], v.y, u[0], u[1]}, 0, 0);
}

Anchor TMesh::anchor_knots(Param vertex) const {
    Coord x = 0;
    Coord y = 0;
    try {
        x = x_of(vertex.u);
        y = y_of(vertex.v);
    } catch (const InputError&) {
        throw InputError("point is not a vertex of the T-mesh");
    }
    return anchor_knots(LatticePoint{x, y});
}

std::vector<Anchor> TMesh::anchors() const {
    std::vector<Anchor> out;
    const Coord xm = x_max();
    const Coord ym = y_max();
    for (const LatticePoint& v : vertices()) {
        const Anchor a = anchor_knots(v);
        const auto& ku = a.lattice_ku;
        const auto& kv = a.lattice_kv;
        std::vector<std::pair<int, std::array<Coord, 5>>> us{{0, ku}};
        std::vector<std::pair<int, std::array<Coord, 5>>> vs{{0, kv}};
        if (v.x == 0) us.push_back({-1, {0, 0, 0, 0, ku[3]}});
        if (v.x == xm) us.push_back({+1, {ku[1], xm, xm, xm, xm}});
        if (v.y == 0) vs.push_back({-1, {0, 0, 0, 0, kv[3]}});
        if (v.y == ym) vs.push_back({+1, {kv[1], ym, ym, ym, ym}});
        for (const auto& [gv, kvv] : vs) {
            for (const auto& [gu, kuu] : us) {
                if (gu == 0 && gv == 0) {
                    out.push_back(a);
                } else {
                    out.push_back(make_anchor(*this, v, kuu, kvv, gu, gv));
                }
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const Anchor& a, const Anchor& b) {
        return std::tie(a.ghost_v, a.site.y, a.ghost_u, a.site.x) <
               std::tie(b.ghost_v, b.site.y, b.ghost_u, b.site.x);
    });
    return out;
}

bool TMesh::admissible() const {
    for (std::size_t i = 0; i < cells_.size(); ++i) {
        const Node& n = nodes_[static_cast<std::size_t>(cell_node_[i])];
        if (n.parent < 0) continue;
        const Node& p = nodes_[static_cast<std::size_t>(n.parent)];
        for (CellId k : neighborhood(p.box, p.level)) {
            if (cells_[k].level < p.level) return false;
        }
    }
    return true;
}

std::vector<TJunction> t_junctions(const TMesh& mesh) {
    std::vector<TJunction> out;
    for (const LatticePoint& v : mesh.vertices()) {
        if (v.x == 0 || v.y == 0 || v.x == mesh.x_max() || v.y == mesh.y_max()) continue;
        int missing = -1;
        int edges = 0;
        for (int d = 0; d < 4; ++d) {
            if (mesh.has_edge(v, d)) {
                ++edges;
            } else {
                missing = d;
            }
        }
        if (edges != 3) continue;
        const Anchor a = mesh.anchor_knots(v);
        const auto& ku = a.lattice_ku;
        const auto& kv = a.lattice_kv;
        TJunction t{v, TJunctionKind::MissingRight, {}};
        switch (missing) {
            case kRight:
                t.kind = TJunctionKind::MissingRight;
                t.extension = {ku[1], ku[4], v.y, v.y};
                break;
            case kLeft:
                t.kind = TJunctionKind::MissingLeft;
                t.extension = {ku[0], ku[3], v.y, v.y};
                break;
            case kUp:
                t.kind = TJunctionKind::MissingUp;
                t.extension = {v.x, v.x, kv[1], kv[4]};
                break;
            default:
                t.kind = TJunctionKind::MissingDown;
                t.extension = {v.x, v.x, kv[0], kv[3]};
                break;
        }
        out.push_back(t);
    }
    return out;
}

bool is_analysis_suitable(const TMesh& mesh) {
    const auto junctions = t_junctions(mesh);
    std::vector<LatticeBox> vertical;
    std::vector<LatticeBox> horizontal;
    for (const auto& t : junctions) {
        (t.vertical() ? vertical : horizontal).push_back(t.extension);
    }
    for (const auto& h : horizontal) {
        for (const auto& v : vertical) {
            if (h.x0 <= v.x0 && v.x0 <= h.x1 && v.y0 <= h.y0 && h.y0 <= v.y1) return false;
        }
    }
    return true;
}

}  // namespace tsfit
