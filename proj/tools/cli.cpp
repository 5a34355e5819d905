#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "tsfit/errors.hpp"
#include "tsfit/experiment.hpp"
#include "tsfit/fitting.hpp"
#include "tsfit/format.hpp"
#include "tsfit/io.hpp"
#include "tsfit/synthdata.hpp"

namespace tsfit::cli {

namespace fs = std::filesystem;

std::vector<std::string> config_arguments(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read config file '" + path + "'");
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_config(in);
    } catch (const CLI::ParseError& e) {
        throw InputError("config file '" + path + "': " + e.what());
    }
    std::vector<std::string> args;
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;
        if (!item.parents.empty()) throw InputError("config file '" + path + "': sections are not supported");
        if (item.inputs.size() == 1) {
            args.push_back("--" + item.name + "=" + item.inputs.front());
        } else {
            args.push_back("--" + item.name);
            args.insert(args.end(), item.inputs.begin(), item.inputs.end());
        }
    }
    return args;
}

namespace {

SurfaceKind parse_kind(const std::string& s) {
    if (s == "smooth") return SurfaceKind::Smooth;
    if (s == "sharp") return SurfaceKind::Sharp;
    throw InputError("unknown surface kind '" + s + "' (expected smooth or sharp)");
}

ParamRect parse_rect(const std::vector<double>& v, const char* what) {
    if (v.size() != 4) throw InputError(std::string(what) + " needs four values u_min u_max v_min v_max");
    return ParamRect::make(v[0], v[1], v[2], v[3]);
}

void require_writable(const std::string& path) {
    if (path.empty()) return;
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty() && !fs::is_directory(parent)) {
        throw InputError("output directory '" + parent.string() + "' does not exist");
    }
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open '" + path + "' for writing");
    return out;
}

void print_reports(std::ostream& out, const std::vector<FitReport>& reports) {
    write_reports_csv(out, reports);
}

struct GenerateArgs {
    std::string kind = "smooth";
    SyntheticSpec spec;
    bool gap = false;
    std::vector<double> gap_rect;
    std::string output;
    std::string truth;
};

struct FitArgs {
    std::string input;
    std::string method = "lst";
    std::optional<double> th;
    std::optional<int> max_iters;
    std::optional<int> ls_iters;
    std::optional<int> mark_count;
    int nu = 4;
    int nv = 4;
    bool full_3d = false;
    std::size_t ls_max_unknowns = 0;
    std::string param = "unit";
    std::vector<double> domain;
    std::string frame_from;
    std::string exact;
    std::string units;
    std::string output;
    std::string report;
    std::string mesh_json;
    std::string mesh_svg;
    std::string grid_out;
    int grid_n = 101;
};

struct EvaluateArgs {
    std::string surface;
    std::string input;
    double th = 0.01;
    std::string exact;
    std::string output;
    std::string grid_out;
    int grid_n = 101;
};

struct DiffArgs {
    std::string a;
    std::string b;
    int nu = 101;
    int nv = 101;
    std::string output;
};

struct ExperimentArgs {
    std::string kind = "smooth";
    int n = 100;
    int runs = 3;
    std::uint64_t seed = 1;
    bool gap = false;
    double outliers = 0.0;
    double sigma_xy = 0.001;
    double sigma_z = 0.003;
    std::string methods = "lst,mta";
    std::optional<double> th;
    int threads = 1;
    bool full_scale = false;
    std::string out_dir = "experiment";
    std::string label;
};

std::vector<Observation> load_observations(const std::string& path, const std::string& param_mode,
                                           const std::optional<Parametrization>& frame,
                                           std::optional<Parametrization>& used, std::string* units) {
    const PointCloud cloud = read_xyz(path);
    if (units && units->empty()) *units = cloud.units;
    if (frame) {
        used = frame;
        return parametrize(cloud, *frame);
    }
    if (param_mode == "native") {
        used.reset();
        std::vector<Observation> obs;
        obs.reserve(cloud.points.size());
        for (const Point3& p : cloud.points) obs.push_back({{p.x(), p.y()}, p});
        return obs;
    }
    if (param_mode != "unit") throw InputError("unknown parametrization '" + param_mode + "' (expected unit or native)");
    Parametrization m;
    auto obs = parametrize(cloud, &m);
    used = m;
    return obs;
}

// Exact heights come from the synthetic formulas at the physical (x, y).
std::optional<ExactSurface> exact_from(const std::string& kind) {
    if (kind.empty()) return std::nullopt;
    const SurfaceKind k = parse_kind(kind);
    return ExactSurface([k](const Observation& o) { return exact_surface(k, o.phys.x(), o.phys.y()); });
}

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
    SyntheticSpec spec = a.spec;
    spec.kind = parse_kind(a.kind);
    if (!a.gap_rect.empty()) {
        spec.gap = parse_rect(a.gap_rect, "--gap-rect");
    } else if (a.gap) {
        spec.gap = SyntheticSpec::default_gap();
    }
    spec.validate();
    const std::string truth = a.truth.empty() ? a.output + ".truth" : a.truth;
    require_writable(a.output);
    require_writable(truth);

    const SyntheticData data = generate(spec);
    std::vector<Point3> pts;
    pts.reserve(data.size());
    for (const auto& o : data.obs) pts.push_back(o.phys);
    write_xyz(fs::path(a.output), pts);
    std::ofstream t = open_out(truth);
    t << "# z_exact outlier\n";
    std::size_t flagged = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        t << format_real(data.z_exact[i]) << ' ' << int{data.outlier[i]} << '\n';
        flagged += data.outlier[i] ? 1 : 0;
    }
    out << "wrote " << data.size() << " points to " << a.output << " (" << flagged << " outliers)\n";
    return kOk;
}

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
    FitConfig cfg = FitConfig::defaults(parse_method(a.method));
    if (a.th) cfg.threshold = *a.th;
    if (a.max_iters) cfg.max_iters = *a.max_iters;
    if (a.ls_iters) {
        cfg.ls_iters = *a.ls_iters;
    } else {
        cfg.ls_iters = std::min(cfg.ls_iters, cfg.max_iters);
    }
    if (a.mark_count) cfg.mark_count = *a.mark_count;
    cfg.initial_nu = a.nu;
    cfg.initial_nv = a.nv;
    cfg.full_3d = a.full_3d;
    cfg.ls_max_unknowns = a.ls_max_unknowns;
    if (!a.domain.empty()) cfg.domain = parse_rect(a.domain, "--domain");
    cfg.validate();
    const auto exact = exact_from(a.exact);
    for (const auto* p : {&a.output, &a.report, &a.mesh_json, &a.mesh_svg, &a.grid_out}) require_writable(*p);
    if (!a.grid_out.empty() && a.grid_n < 2) throw InputError("--grid-n must be at least 2");

    std::optional<Parametrization> frame;
    if (!a.frame_from.empty()) {
        StoredSurface ref = load_surface(fs::path(a.frame_from));
        frame = ref.map;
        if (!cfg.domain) cfg.domain = ref.surface.domain();
    }
    std::optional<Parametrization> used;
    std::string units = a.units;
    const auto obs = load_observations(a.input, a.param, frame, used, &units);
    if (!a.frame_from.empty() && !frame) {
        // Reference was fitted on native parameters.
        used.reset();
    }

    FitResult res = fit(obs, cfg, exact ? &*exact : nullptr);
    for (const auto& e : res.events) err << e << '\n';
    print_reports(out, res.reports);

    const LayeredSurface& s = res.surface;
    if (!a.output.empty()) save_surface(fs::path(a.output), StoredSurface{s, used, units});
    if (!a.report.empty()) {
        std::ofstream r = open_out(a.report);
        write_reports_csv(r, res.reports);
    }
    const TMesh& mesh = s.finest().space().mesh();
    if (!a.mesh_json.empty()) open_out(a.mesh_json) << mesh_json(mesh) << '\n';
    if (!a.mesh_svg.empty()) {
        std::ofstream svg = open_out(a.mesh_svg);
        write_mesh_svg(svg, mesh);
    }
    if (!a.grid_out.empty()) {
        std::ofstream g = open_out(a.grid_out);
        write_grid_xyz(g, eval_grid(s, a.grid_n, a.grid_n), used ? &*used : nullptr);
    }
    if (!res.converged) {
        err << "not converged: " << res.reports.back().n_out << " points outside tolerance after iteration "
            << res.reports.back().iter << '\n';
        return kNotConverged;
    }
    return kOk;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    if (!(a.th > 0.0)) throw InputError("threshold must be positive");
    const auto exact = exact_from(a.exact);
    require_writable(a.output);
    require_writable(a.grid_out);
    StoredSurface st = load_surface(fs::path(a.surface));
    std::optional<Parametrization> used;
    const auto obs = load_observations(a.input, st.map ? "unit" : "native", st.map, used, nullptr);
    const FitReport r = evaluate(st.surface, obs, exact ? &*exact : nullptr, a.th);
    std::ostringstream row;
    row << report_csv_header() << '\n' << report_csv_row(r) << '\n';
    if (a.output.empty()) {
        out << row.str();
    } else {
        open_out(a.output) << row.str();
    }
    if (!a.grid_out.empty()) {
        if (a.grid_n < 2) throw InputError("--grid-n must be at least 2");
        std::ofstream g = open_out(a.grid_out);
        write_grid_xyz(g, eval_grid(st.surface, a.grid_n, a.grid_n), st.map ? &*st.map : nullptr);
    }
    return kOk;
}

int cmd_diff(const DiffArgs& a, std::ostream& out) {
    require_writable(a.output);
    const StoredSurface sa = load_surface(fs::path(a.a));
    const StoredSurface sb = load_surface(fs::path(a.b));
    if (sa.map.has_value() != sb.map.has_value() ||
        (sa.map && !(sa.map->frame == sb.map->frame && sa.map->target == sb.map->target))) {
        throw InputError("surfaces were parametrised in different physical frames");
    }
    const DiffGrid g = diff_surfaces(sa.surface, sb.surface, a.nu, a.nv);
    double lo = g.dz(0), hi = g.dz(0), sum = 0.0;
    for (std::size_t i = 0; i < g.params.size(); ++i) {
        lo = std::min(lo, g.dz(i));
        hi = std::max(hi, g.dz(i));
        sum += g.dz(i);
    }
    if (a.output.empty()) {
        write_diff_xyz(out, g, sa.map ? &*sa.map : nullptr);
    } else {
        std::ofstream f = open_out(a.output);
        write_diff_xyz(f, g, sa.map ? &*sa.map : nullptr);
        out << "dz min " << format_real(lo) << " max " << format_real(hi) << " mean "
            << format_real(sum / static_cast<double>(g.params.size())) << '\n';
    }
    return kOk;
}

int cmd_experiment(const ExperimentArgs& a, std::ostream& out) {
    Experiment exp;
    exp.spec.kind = parse_kind(a.kind);
    exp.spec.n = a.full_scale ? 200 : a.n;
    exp.spec.sigma_xy = a.sigma_xy;
    exp.spec.sigma_z = a.sigma_z;
    if (a.gap) exp.spec.gap = SyntheticSpec::default_gap();
    exp.spec.outlier_fraction = a.outliers;
    exp.n_runs = a.full_scale ? 100 : a.runs;
    exp.base_seed = a.seed;
    exp.threads = a.threads;
    std::stringstream ms(a.methods);
    for (std::string m; std::getline(ms, m, ',');) {
        FitConfig c = FitConfig::defaults(parse_method(m));
        if (a.th) c.threshold = *a.th;
        exp.configs.push_back(c);
    }
    exp.validate();
    std::string label = a.label;
    if (label.empty()) label = a.kind + (a.gap ? "_gap" : "") + (a.outliers > 0.0 ? "_outliers" : "");

    const ExperimentResult res = run(exp);
    write_experiment(fs::path(a.out_dir), label, exp, res);
    for (std::size_t c = 0; c < exp.configs.size(); ++c) {
        const auto& f = res.methods[c].final;
        out << to_string(exp.configs[c].method) << ": rmse_noise " << format_real(f.rmse_noise.mean) << " maxerr "
            << format_real(f.maxerr.mean) << " n_out " << format_real(f.n_out.mean) << " n_cp "
            << format_real(f.n_cp.mean) << " failures " << res.methods[c].failures << '\n';
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Adaptive T-spline fitting of scattered height data"};
    app.name(args.empty() ? "tsfit" : fs::path(args.front()).filename().string());
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    GenerateArgs ga;
    auto* gen = app.add_subcommand("generate", "Write a synthetic benchmark point cloud");
    gen->add_option("--kind", ga.kind, "smooth or sharp")->capture_default_str();
    gen->add_option("--n", ga.spec.n, "Grid size n (n x n points)")->capture_default_str();
    gen->add_option("--sigma-xy", ga.spec.sigma_xy, "Horizontal noise std")->capture_default_str();
    gen->add_option("--sigma-z", ga.spec.sigma_z, "Vertical noise std")->capture_default_str();
    gen->add_flag("--gap", ga.gap, "Remove the points in [-1/4, 0]^2");
    gen->add_option("--gap-rect", ga.gap_rect, "Custom gap u_min u_max v_min v_max")->expected(4);
    gen->add_option("--outliers", ga.spec.outlier_fraction, "Outlier fraction")->capture_default_str();
    gen->add_option("--cap", ga.spec.cap_factor, "Outlier cap relative to max|z|")->capture_default_str();
    gen->add_option("--outlier-scale", ga.spec.outlier_scale, "Student-t scale relative to max|z|")
        ->capture_default_str();
    gen->add_option("--dof", ga.spec.student_dof, "Student-t degrees of freedom")->capture_default_str();
    gen->add_option("--seed", ga.spec.seed, "Random seed")->capture_default_str();
    gen->add_option("-o,--output", ga.output, "XYZ output")->required();
    gen->add_option("--truth", ga.truth, "Ground-truth sidecar (default <output>.truth)");

    FitArgs fa;
    auto* fitc = app.add_subcommand("fit", "Fit a T-spline surface to a point cloud");
    fitc->add_option("input", fa.input, "XYZ point cloud")->required();
    fitc->add_option("--method", fa.method, "lst, mta or nurbs")->capture_default_str();
    fitc->add_option("--th", fa.th, "Tolerance TH (default 0.01)");
    fitc->add_option("--max-iters", fa.max_iters, "Iteration limit (default 8, mta 10)");
    fitc->add_option("--ls-iters", fa.ls_iters, "Least-squares iterations before mta updates (default 3)");
    fitc->add_option("--mark-count", fa.mark_count, "Points above TH needed to mark a cell (default 2)");
    fitc->add_option("--nu", fa.nu, "Initial cells along u")->capture_default_str();
    fitc->add_option("--nv", fa.nv, "Initial cells along v")->capture_default_str();
    fitc->add_flag("--full-3d", fa.full_3d, "Fit 3D control points (lst / nurbs only)");
    fitc->add_option("--ls-max-unknowns", fa.ls_max_unknowns, "Refuse larger least-squares systems (0 = no limit)");
    fitc->add_option("--param", fa.param, "unit (bounding box to [0,1]^2) or native (u,v = x,y)")
        ->capture_default_str();
    fitc->add_option("--domain", fa.domain, "Parametric domain u_min u_max v_min v_max")->expected(4);
    fitc->add_option("--frame-from", fa.frame_from, "Reuse the frame and domain of a fitted surface");
    fitc->add_option("--exact", fa.exact, "Report rmse_math against the smooth or sharp reference");
    fitc->add_option("--units", fa.units, "Unit label stored with the surface");
    fitc->add_option("-o,--output", fa.output, "Surface JSON output");
    fitc->add_option("--report", fa.report, "Per-iteration CSV report");
    fitc->add_option("--mesh-json", fa.mesh_json, "Final T-mesh as JSON");
    fitc->add_option("--dump-mesh-svg", fa.mesh_svg, "Final T-mesh as SVG");
    fitc->add_option("--grid-out", fa.grid_out, "Sampled surface grid (XYZ)");
    fitc->add_option("--grid-n", fa.grid_n, "Grid nodes per direction")->capture_default_str();

    EvaluateArgs ea;
    auto* ev = app.add_subcommand("evaluate", "Indicators of a fitted surface against a point cloud");
    ev->add_option("surface", ea.surface, "Surface JSON")->required();
    ev->add_option("input", ea.input, "XYZ point cloud")->required();
    ev->add_option("--th", ea.th, "Tolerance TH")->capture_default_str();
    ev->add_option("--exact", ea.exact, "smooth or sharp reference for rmse_math");
    ev->add_option("-o,--output", ea.output, "CSV output (default stdout)");
    ev->add_option("--grid-out", ea.grid_out, "Sampled surface grid (XYZ)");
    ev->add_option("--grid-n", ea.grid_n, "Grid nodes per direction")->capture_default_str();

    DiffArgs da;
    auto* df = app.add_subcommand("diff", "z difference of two fitted surfaces on a common grid");
    df->add_option("a", da.a, "First surface JSON")->required();
    df->add_option("b", da.b, "Second surface JSON")->required();
    df->add_option("--nu", da.nu, "Grid nodes along u")->capture_default_str();
    df->add_option("--nv", da.nv, "Grid nodes along v")->capture_default_str();
    df->add_option("-o,--output", da.output, "Rows x y z_a z_b dz (default stdout)");

    ExperimentArgs xa;
    auto* ex = app.add_subcommand("experiment", "Monte-Carlo comparison on synthetic data");
    ex->add_option("--kind", xa.kind, "smooth or sharp")->capture_default_str();
    ex->add_option("--n", xa.n, "Grid size n")->capture_default_str();
    ex->add_option("--runs", xa.runs, "Monte-Carlo runs")->capture_default_str();
    ex->add_option("--seed", xa.seed, "Base seed")->capture_default_str();
    ex->add_flag("--gap", xa.gap, "Remove the points in [-1/4, 0]^2");
    ex->add_option("--outliers", xa.outliers, "Outlier fraction")->capture_default_str();
    ex->add_option("--sigma-xy", xa.sigma_xy, "Horizontal noise std")->capture_default_str();
    ex->add_option("--sigma-z", xa.sigma_z, "Vertical noise std")->capture_default_str();
    ex->add_option("--methods", xa.methods, "Comma-separated methods")->capture_default_str();
    ex->add_option("--th", xa.th, "Tolerance TH (default 0.01)");
    ex->add_option("--threads", xa.threads, "Worker threads")->capture_default_str();
    ex->add_flag("--full-scale", xa.full_scale, "200 x 200 points and 100 runs");
    ex->add_option("--out", xa.out_dir, "Output directory")->capture_default_str();
    ex->add_option("--label", xa.label, "File name prefix");

    std::string config_path;
    for (auto* sub : {gen, fitc, ev, df, ex}) {
        sub->add_option("--config", config_path, "File of key = value lines; flags take precedence");
    }

    try {
        // Config entries go in front of the user's arguments so that explicit
        // flags win under the take-last policy.
        std::vector<std::string> argv(args.begin() + (args.empty() ? 0 : 1), args.end());
        std::optional<std::string> cfg;
        for (std::size_t i = 0; i < argv.size(); ++i) {
            if (argv[i] == "--config" && i + 1 < argv.size()) cfg = argv[i + 1];
            if (argv[i].rfind("--config=", 0) == 0) cfg = argv[i].substr(9);
        }
        if (cfg) {
            auto sub = std::find_if(argv.begin(), argv.end(), [](const std::string& s) { return s.rfind('-', 0) != 0; });
            if (sub != argv.end()) {
                const auto extra = config_arguments(*cfg);
                argv.insert(sub + 1, extra.begin(), extra.end());
            }
        }
        std::reverse(argv.begin(), argv.end());
        try {
            app.parse(argv);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e, out, err);
            return code == 0 ? kOk : kInputError;
        }

        if (gen->parsed()) return cmd_generate(ga, out);
        if (fitc->parsed()) return cmd_fit(fa, out, err);
        if (ev->parsed()) return cmd_evaluate(ea, out);
        if (df->parsed()) return cmd_diff(da, out);
        if (ex->parsed()) return cmd_experiment(xa, out);
        return kInputError;
    } catch (const SolverError& e) {
        err << "solver failure: " << e.what() << '\n';
        return kSolverFailure;
    } catch (const StructuralError& e) {
        err << "solver failure: " << e.what() << '\n';
        return kSolverFailure;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << '\n';
        return kInputError;
    } catch (const LoadError& e) {
        err << "input error: " << e.what() << '\n';
        return kInputError;
    } catch (const ParametrizationError& e) {
        err << "input error: " << e.what() << '\n';
        return kInputError;
    } catch (const fs::filesystem_error& e) {
        err << "input error: " << e.what() << '\n';
        return kInputError;
    }
}

}  // namespace tsfit::cli
