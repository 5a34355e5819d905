#include "tsfit/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "tsfit/errors.hpp"
#include "tsfit/format.hpp"

namespace tsfit {

using nlohmann::json;

namespace {

constexpr int kSurfaceFormatVersion = 1;

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open '" + path.string() + "' for reading");
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
    return out;
}

double map_axis(double x, double lo, double hi, double tlo, double thi) {
    if (x == lo) return tlo;
    if (x == hi) return thi;
    return tlo + (x - lo) / (hi - lo) * (thi - tlo);
}

}  // namespace

PointCloud read_xyz(std::istream& in, const std::string& source) {
    PointCloud cloud;
    cloud.source = source;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos || line[pos] == '#') continue;

        double v[3];
        int got = 0;
        const char* p = line.data() + pos;
        const char* end = line.data() + line.size();
        while (got < 3) {
            while (p < end && (*p == ' ' || *p == '\t' || *p == ',' || *p == '\r')) ++p;
            if (p == end) break;
            if (*p == '+') ++p;  // from_chars rejects a leading '+'
            const auto res = std::from_chars(p, end, v[got]);
            if (res.ec != std::errc() ||
                (res.ptr != end && *res.ptr != ' ' && *res.ptr != '\t' && *res.ptr != ',' && *res.ptr != '\r')) {
                throw LoadError(source + ":" + std::to_string(line_no) + ": malformed number in column " +
                                std::to_string(got + 1));
            }
            if (!std::isfinite(v[got])) {
                throw LoadError(source + ":" + std::to_string(line_no) + ": non-finite value in column " +
                                std::to_string(got + 1));
            }
            p = res.ptr;
            ++got;
        }
        if (got < 3) {
            throw LoadError(source + ":" + std::to_string(line_no) + ": expected at least 3 columns, found " +
                            std::to_string(got));
        }
        cloud.points.emplace_back(v[0], v[1], v[2]);
    }
    if (in.bad()) throw LoadError(source + ": read error");
    if (cloud.points.empty()) throw LoadError(source + ": no data rows");
    return cloud;
}

PointCloud read_xyz(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    return read_xyz(in, path.string());
}

void write_xyz(std::ostream& out, std::span<const Point3> points) {
    for (const Point3& p : points) {
        out << format_real(p.x()) << ' ' << format_real(p.y()) << ' ' << format_real(p.z()) << '\n';
    }
}

void write_xyz(const std::filesystem::path& path, std::span<const Point3> points) {
    std::ofstream out = open_out(path);
    write_xyz(out, points);
}

Parametrization Parametrization::from_cloud(const PointCloud& cloud) {
    if (cloud.points.empty()) throw ParametrizationError("cannot parametrise an empty point cloud");
    double x0 = cloud.points[0].x(), x1 = x0, y0 = cloud.points[0].y(), y1 = y0;
    for (const Point3& p : cloud.points) {
        x0 = std::min(x0, p.x());
        x1 = std::max(x1, p.x());
        y0 = std::min(y0, p.y());
        y1 = std::max(y1, p.y());
    }
    if (!(x1 > x0) || !(y1 > y0)) {
        throw ParametrizationError("point cloud footprint has zero area (all points collinear in x or y)");
    }
    Parametrization m;
    m.frame = ParamRect::make(x0, x1, y0, y1);
    return m;
}

Param Parametrization::to_param(double x, double y) const {
    return {map_axis(x, frame.u_min, frame.u_max, target.u_min, target.u_max),
            map_axis(y, frame.v_min, frame.v_max, target.v_min, target.v_max)};
}

Param Parametrization::to_xy(Param p) const {
    return {map_axis(p.u, target.u_min, target.u_max, frame.u_min, frame.u_max),
            map_axis(p.v, target.v_min, target.v_max, frame.v_min, frame.v_max)};
}

std::vector<Observation> parametrize(const PointCloud& cloud, const Parametrization& map) {
    std::vector<Observation> obs;
    obs.reserve(cloud.points.size());
    for (const Point3& p : cloud.points) obs.push_back({map.to_param(p.x(), p.y()), p});
    return obs;
}

std::vector<Observation> parametrize(const PointCloud& cloud, Parametrization* used) {
    const Parametrization map = Parametrization::from_cloud(cloud);
    if (used) *used = map;
    return parametrize(cloud, map);
}

DiffGrid diff_surfaces(const LayeredSurface& a, const LayeredSurface& b, int nu, int nv) {
    if (!(a.domain() == b.domain())) throw InputError("surfaces to compare have different parametric domains");
    if (nu < 2 || nv < 2) throw InputError("difference grid needs at least 2 x 2 nodes");
    const ParamRect& d = a.domain();
    DiffGrid g;
    g.nu = nu;
    g.nv = nv;
    for (int j = 0; j < nv; ++j) {
        const double v = grid_coordinate(d.v_min, d.v_max, j, nv);
        for (int i = 0; i < nu; ++i) {
            const Param p{grid_coordinate(d.u_min, d.u_max, i, nu), v};
            g.params.push_back(p);
            g.z_a.push_back(a.eval_z(p));
            g.z_b.push_back(b.eval_z(p));
        }
    }
    return g;
}

void write_diff_xyz(std::ostream& out, const DiffGrid& grid, const Parametrization* map) {
    out << "# x y z_a z_b dz\n";
    for (std::size_t i = 0; i < grid.params.size(); ++i) {
        const Param xy = map ? map->to_xy(grid.params[i]) : grid.params[i];
        out << format_real(xy.u) << ' ' << format_real(xy.v) << ' ' << format_real(grid.z_a[i]) << ' '
            << format_real(grid.z_b[i]) << ' ' << format_real(grid.dz(i)) << '\n';
    }
}

void write_grid_xyz(std::ostream& out, const SurfaceGrid& grid, const Parametrization* map) {
    for (const Point3& p : grid.points) {
        if (map) {
            const Param xy = map->to_xy({p.x(), p.y()});
            out << format_real(xy.u) << ' ' << format_real(xy.v) << ' ' << format_real(p.z()) << '\n';
        } else {
            out << format_real(p.x()) << ' ' << format_real(p.y()) << ' ' << format_real(p.z()) << '\n';
        }
    }
}

namespace {

json rect_json(const ParamRect& r) { return json::array({r.u_min, r.u_max, r.v_min, r.v_max}); }

ParamRect rect_from(const json& j) {
    if (!j.is_array() || j.size() != 4) throw LoadError("rectangle must be [u_min, u_max, v_min, v_max]");
    return ParamRect::make(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

json level_json(const TSplineSurface& s) {
    const TMesh& mesh = s.space().mesh();
    json cells = json::array();
    for (const Cell& c : mesh.cells()) cells.push_back({c.box.x0, c.box.x1, c.box.y0, c.box.y1, c.level});
    json coef = json::array();
    if (s.mode() == SurfaceMode::HeightField) {
        for (double h : s.heights()) coef.push_back(h);
    } else {
        for (const Point3& p : s.control_points()) coef.push_back({p.x(), p.y(), p.z()});
    }
    json weights = json::array();
    bool all_unit = true;
    for (const Anchor& a : s.space().anchors()) {
        weights.push_back(a.weight);
        all_unit = all_unit && a.weight == 1.0;
    }
    const NeighborhoodRule& r = mesh.rule();
    json j = {{"grid", {mesh.nu(), mesh.nv()}},
              {"rule", {r.even_x, r.even_y, r.odd_x, r.odd_y}},
              {"cells", std::move(cells)},
              {"coefficients", std::move(coef)}};
    if (!all_unit) j["weights"] = std::move(weights);
    return j;
}

TSplineSurface level_from(const json& j, const ParamRect& domain, SurfaceMode mode) {
    const auto& g = j.at("grid");
    const auto& rj = j.at("rule");
    NeighborhoodRule rule{rj.at(0).get<double>(), rj.at(1).get<double>(), rj.at(2).get<double>(),
                          rj.at(3).get<double>()};
    std::vector<Cell> cells;
    for (const auto& c : j.at("cells")) {
        if (!c.is_array() || c.size() != 5) throw LoadError("cell must be [x0, x1, y0, y1, level]");
        cells.push_back({{c[0].get<Coord>(), c[1].get<Coord>(), c[2].get<Coord>(), c[3].get<Coord>()},
                         c[4].get<int>()});
    }
    TMesh mesh = TMesh::from_cells(domain, g.at(0).get<int>(), g.at(1).get<int>(), cells, rule);
    std::vector<double> weights;
    if (j.contains("weights")) weights = j["weights"].get<std::vector<double>>();
    auto space = std::make_shared<const TSplineSpace>(std::move(mesh), std::move(weights));
    const auto& coef = j.at("coefficients");
    if (coef.size() != space->size()) {
        throw LoadError("level has " + std::to_string(coef.size()) + " coefficients but its mesh has " +
                        std::to_string(space->size()) + " anchors");
    }
    if (mode == SurfaceMode::HeightField) return TSplineSurface(space, coef.get<std::vector<double>>());
    std::vector<Point3> pts;
    for (const auto& p : coef) pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
    return TSplineSurface(space, std::move(pts));
}

}  // namespace

void save_surface(std::ostream& out, const StoredSurface& stored) {
    const LayeredSurface& s = stored.surface;
    json levels = json::array();
    for (const TSplineSurface& l : s.levels()) levels.push_back(level_json(l));
    json doc = {{"format", "tsfit-surface"},
                {"version", kSurfaceFormatVersion},
                {"mode", s.mode() == SurfaceMode::HeightField ? "height" : "points"},
                {"domain", rect_json(s.domain())},
                {"levels", std::move(levels)}};
    if (stored.map) doc["frame"] = {{"xy", rect_json(stored.map->frame)}, {"uv", rect_json(stored.map->target)}};
    if (!stored.units.empty()) doc["units"] = stored.units;
    out << doc.dump(1) << '\n';
}

void save_surface(const std::filesystem::path& path, const StoredSurface& stored) {
    std::ofstream out = open_out(path);
    save_surface(out, stored);
}

StoredSurface load_surface(std::istream& in, const std::string& source) {
    try {
        const json doc = json::parse(in);
        if (doc.value("format", "") != "tsfit-surface") throw LoadError("not a tsfit surface document");
        if (doc.value("version", 0) != kSurfaceFormatVersion) throw LoadError("unsupported surface format version");
        const std::string mode_name = doc.at("mode").get<std::string>();
        if (mode_name != "height" && mode_name != "points") throw LoadError("unknown surface mode '" + mode_name + "'");
        const SurfaceMode mode = mode_name == "height" ? SurfaceMode::HeightField : SurfaceMode::ControlPoints;
        const ParamRect domain = rect_from(doc.at("domain"));
        const auto& levels = doc.at("levels");
        if (!levels.is_array() || levels.empty()) throw LoadError("surface has no levels");
        std::optional<LayeredSurface> s;
        for (const auto& l : levels) {
            TSplineSurface level = level_from(l, domain, mode);
            if (!s) {
                s.emplace(std::move(level));
            } else {
                s->add_level(std::move(level));
            }
        }
        StoredSurface out{std::move(*s), std::nullopt, doc.value("units", "")};
        if (doc.contains("frame")) {
            Parametrization m;
            m.frame = rect_from(doc["frame"].at("xy"));
            m.target = rect_from(doc["frame"].at("uv"));
            out.map = m;
        }
        return out;
    } catch (const LoadError& e) {
        throw LoadError(source + ": " + e.what());
    } catch (const json::exception& e) {
        throw LoadError(source + ": invalid surface document: " + e.what());
    } catch (const InputError& e) {
        throw LoadError(source + ": inconsistent surface document: " + e.what());
    }
}

StoredSurface load_surface(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    return load_surface(in, path.string());
}

std::string mesh_json(const TMesh& mesh) {
    json cells = json::array();
    for (CellId c = 0; c < mesh.size(); ++c) {
        cells.push_back({{"rect", rect_json(mesh.cell_rect(c))}, {"level", mesh.cell(c).level}});
    }
    json anchors = json::array();
    for (const Anchor& a : mesh.anchors()) {
        anchors.push_back({{"vertex", {a.vertex.u, a.vertex.v}},
                           {"ku", a.ku.values()},
                           {"kv", a.kv.values()},
                           {"ghost", a.is_ghost()}});
    }
    json vertices = json::array();
    for (const LatticePoint& p : mesh.vertices()) {
        const Param q = mesh.param_of(p);
        vertices.push_back({q.u, q.v});
    }
    json doc = {{"domain", rect_json(mesh.domain())},
                {"grid", {mesh.nu(), mesh.nv()}},
                {"max_level", mesh.max_level()},
                {"cells", std::move(cells)},
                {"vertices", std::move(vertices)},
                {"anchors", std::move(anchors)}};
    return doc.dump(1);
}

void write_mesh_svg(std::ostream& out, const TMesh& mesh, int width) {
    if (width < 16) throw InputError("SVG width must be at least 16 pixels");
    const ParamRect& d = mesh.domain();
    const double margin = 8.0;
    const double scale = (width - 2.0 * margin) / d.width();
    const double height = d.height() * scale + 2.0 * margin;
    auto px = [&](double u) { return format_real(margin + (u - d.u_min) * scale); };
    auto py = [&](double v) { return format_real(margin + (d.v_max - v) * scale); };  // v up
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << static_cast<int>(std::ceil(height)) << "\">\n"
        << "<g fill=\"none\" stroke=\"black\" stroke-width=\"0.5\">\n";
    for (CellId c = 0; c < mesh.size(); ++c) {
        const ParamRect r = mesh.cell_rect(c);
        out << "<rect x=\"" << px(r.u_min) << "\" y=\"" << py(r.v_max) << "\" width=\""
            << format_real(r.width() * scale) << "\" height=\"" << format_real(r.height() * scale) << "\"/>\n";
    }
    out << "</g>\n</svg>\n";
}

}  // namespace tsfit
