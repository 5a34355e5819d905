#include "tsfit/fitting.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/QR>
#include <Eigen/SparseCholesky>

#include "tsfit/errors.hpp"

namespace tsfit {

std::string_view to_string(Method m) {
    switch (m) {
        case Method::LS_T:
            return "lst";
        case Method::MTA_COMBINED:
            return "mta";
        case Method::NURBS_LS:
            return "nurbs";
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "lst" || s == "ls-t" || s == "ls_t") return Method::LS_T;
    if (s == "mta" || s == "mta_combined" || s == "mta-combined") return Method::MTA_COMBINED;
    if (s == "nurbs" || s == "nurbs_ls" || s == "nurbs-ls") return Method::NURBS_LS;
    throw InputError("unknown fitting method '" + std::string(name) + "' (expected lst, mta or nurbs)");
}

FitConfig FitConfig::defaults(Method method) {
    FitConfig c;
    c.method = method;
    c.max_iters = method == Method::MTA_COMBINED ? 10 : 8;
    return c;
}

void FitConfig::validate() const {
    if (!(threshold > 0.0)) throw InputError("threshold TH must be positive");
    if (max_iters < 1) throw InputError("max_iters must be at least 1");
    if (ls_iters < 0) throw InputError("ls_iters must be >= 0");
    if (method == Method::MTA_COMBINED && ls_iters > max_iters) {
        throw InputError("ls_iters must lie in [0, max_iters]");
    }
    if (mark_count < 1) throw InputError("mark_count must be at least 1");
    if (initial_nu < 1 || initial_nv < 1) throw InputError("initial mesh needs at least 1 x 1 cells");
    if (full_3d && method == Method::MTA_COMBINED) {
        throw InputError("multilevel updates require height-field mode");
    }
    if (domain) ParamRect::make(domain->u_min, domain->u_max, domain->v_min, domain->v_max);
}

DesignMatrix design_matrix(const TSplineSpace& space, std::span<const Observation> obs) {
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(obs.size() * 16);
    std::vector<BasisValue> row;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        space.basis_row(obs[i].param, row);
        for (const auto& b : row) {
            entries.emplace_back(static_cast<int>(i), static_cast<int>(b.anchor), b.value);
        }
    }
    DesignMatrix a(static_cast<Eigen::Index>(obs.size()), static_cast<Eigen::Index>(space.size()));
    a.setFromTriplets(entries.begin(), entries.end());
    return a;
}

namespace {

Eigen::MatrixXd observation_matrix(std::span<const Observation> obs, SurfaceMode mode) {
    const Eigen::Index cols = mode == SurfaceMode::HeightField ? 1 : 3;
    Eigen::MatrixXd l(static_cast<Eigen::Index>(obs.size()), cols);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        if (mode == SurfaceMode::HeightField) {
            l(r, 0) = obs[i].phys.z();
        } else {
            l.row(r) = obs[i].phys.transpose();
        }
    }
    return l;
}

TSplineSurface surface_from(std::shared_ptr<const TSplineSpace> space, const Eigen::MatrixXd& coef) {
    const auto n = static_cast<std::size_t>(coef.rows());
    if (coef.cols() == 1) {
        std::vector<double> h(n);
        for (std::size_t i = 0; i < n; ++i) h[i] = coef(static_cast<Eigen::Index>(i), 0);
        return TSplineSurface(std::move(space), std::move(h));
    }
    std::vector<Point3> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = coef.row(static_cast<Eigen::Index>(i)).transpose();
    return TSplineSurface(std::move(space), std::move(p));
}

std::vector<double> row_errors(const Eigen::MatrixXd& fitted, const Eigen::MatrixXd& observed) {
    std::vector<double> e(static_cast<std::size_t>(fitted.rows()));
    for (Eigen::Index i = 0; i < fitted.rows(); ++i) {
        e[static_cast<std::size_t>(i)] = (fitted.row(i) - observed.row(i)).norm();
    }
    return e;
}

constexpr Eigen::Index kDenseMinNormLimit = 1500;

}  // namespace

std::vector<double> error_indicators(const TSplineSurface& surface, std::span<const Observation> obs) {
    std::vector<double> e(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (surface.mode() == SurfaceMode::HeightField) {
            e[i] = std::abs(surface.eval_z(obs[i].param) - obs[i].phys.z());
        } else {
            e[i] = (surface.eval(obs[i].param) - obs[i].phys).norm();
        }
    }
    return e;
}

std::vector<double> error_indicators(const LayeredSurface& surface, std::span<const Observation> obs) {
    if (surface.mode() == SurfaceMode::ControlPoints) return error_indicators(surface.finest(), obs);
    std::vector<double> e(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        e[i] = std::abs(surface.eval_z(obs[i].param) - obs[i].phys.z());
    }
    return e;
}

NormalSystem assemble(const DesignMatrix& a, const Eigen::MatrixXd& observations) {
    if (a.rows() == 0) throw InputError("least-squares assembly needs at least one observation");
    if (a.rows() != observations.rows()) throw InputError("design matrix and observations disagree in size");
    const Eigen::SparseMatrix<double> at = a.transpose();
    NormalSystem s;
    s.lhs = at * a;
    s.rhs = at * observations;
    return s;
}

NormalSystem assemble(std::span<const Observation> obs, const TSplineSpace& space, SurfaceMode mode) {
    if (obs.empty()) throw InputError("least-squares assembly needs at least one observation");
    return assemble(design_matrix(space, obs), observation_matrix(obs, mode));
}

NormalSystem assemble(std::span<const Observation> obs, const TSplineSurface& surface) {
    return assemble(obs, surface.space(), surface.mode());
}

LsSolution solve_ls(const NormalSystem& system, std::size_t max_unknowns) {
    const Eigen::Index n = system.lhs.rows();
    if (system.lhs.cols() != n || system.rhs.rows() != n) {
        throw InputError("normal system dimensions do not match");
    }
    if (max_unknowns != 0 && static_cast<std::size_t>(n) > max_unknowns) {
        throw SolverError("least-squares system with " + std::to_string(n) + " unknowns exceeds the limit of " +
                          std::to_string(max_unknowns));
    }

    LsSolution out;
    out.coefficients = Eigen::MatrixXd::Zero(n, system.rhs.cols());

    // Anchors without data have an all-zero column in A; their minimum-norm
    // coefficient is 0 and they are dropped from the solve.
    const Eigen::VectorXd diag = system.lhs.diagonal();
    std::vector<Eigen::Index> active;
    std::vector<Eigen::Index> position(static_cast<std::size_t>(n), -1);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (diag(i) > 0.0) {
            position[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(active.size());
            active.push_back(i);
        }
    }
    out.empty_anchors = static_cast<std::size_t>(n) - active.size();
    out.rank_deficient = out.empty_anchors > 0;
    const auto m = static_cast<Eigen::Index>(active.size());
    if (m == 0) return out;

    Eigen::SparseMatrix<double> reduced(m, m);
    {
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(static_cast<std::size_t>(system.lhs.nonZeros()));
        for (Eigen::Index k = 0; k < system.lhs.outerSize(); ++k) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(system.lhs, k); it; ++it) {
                const auto r = position[static_cast<std::size_t>(it.row())];
                const auto c = position[static_cast<std::size_t>(it.col())];
                if (r >= 0 && c >= 0) t.emplace_back(r, c, it.value());
            }
        }
        reduced.setFromTriplets(t.begin(), t.end());
    }
    Eigen::MatrixXd rhs(m, system.rhs.cols());
    for (Eigen::Index i = 0; i < m; ++i) rhs.row(i) = system.rhs.row(active[static_cast<std::size_t>(i)]);

    Eigen::MatrixXd x;
    bool singular = false;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(reduced);
    if (ldlt.info() != Eigen::Success) {
        singular = true;
    } else {
        const Eigen::VectorXd d = ldlt.vectorD();
        const double tol = static_cast<double>(m) * std::numeric_limits<double>::epsilon() * d.cwiseAbs().maxCoeff();
        singular = (d.array() <= tol).any();
        if (!singular) {
            x = ldlt.solve(rhs);
            singular = ldlt.info() != Eigen::Success || !x.allFinite();
        }
    }

    if (singular) {
        out.rank_deficient = true;
        if (m <= kDenseMinNormLimit) {
            Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
            cod.setThreshold(1e-12);
            cod.compute(Eigen::MatrixXd(reduced));
            x = cod.solve(rhs);
        } else {
            // CG started at zero stays in range(A^T A) and so converges to the
            // minimum-norm solution of the consistent normal equations.
            Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                                     Eigen::IdentityPreconditioner>
                cg;
            cg.setTolerance(1e-12);
            cg.setMaxIterations(static_cast<Eigen::Index>(std::max<Eigen::Index>(1000, 20 * m)));
            cg.compute(reduced);
            x.resize(m, rhs.cols());
            for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
                x.col(c) = cg.solve(rhs.col(c));
                const double rel = (reduced * x.col(c) - rhs.col(c)).norm() / std::max(rhs.col(c).norm(), 1e-300);
                if (!x.col(c).allFinite() || rel > 1e-8) {
                    throw SolverError("minimum-norm least-squares solve did not converge (relative residual " +
                                      std::to_string(rel) + ")");
                }
            }
        }
        if (!x.allFinite()) throw SolverError("least-squares solve produced non-finite coefficients");
    }

    for (Eigen::Index i = 0; i < m; ++i) out.coefficients.row(active[static_cast<std::size_t>(i)]) = x.row(i);
    return out;
}

TSplineSurface fit_ls(std::shared_ptr<const TSplineSpace> space, std::span<const Observation> obs, SurfaceMode mode,
                      LsSolution* info) {
    LsSolution sol = solve_ls(assemble(obs, *space, mode));
    TSplineSurface s = surface_from(std::move(space), sol.coefficients);
    if (info) *info = std::move(sol);
    return s;
}

ResidualField mta_update(const DesignMatrix& a, std::span<const double> residuals, double threshold) {
    if (static_cast<std::size_t>(a.rows()) != residuals.size()) {
        throw InputError("one residual per observation expected");
    }
    const auto n = static_cast<std::size_t>(a.cols());
    std::vector<double> num(n, 0.0);
    std::vector<double> den(n, 0.0);
    std::vector<char> active(n, 0);
    for (Eigen::Index c = 0; c < a.rows(); ++c) {
        const double z = residuals[static_cast<std::size_t>(c)];
        const bool outside = !(std::abs(z) < threshold);
        double norm2 = 0.0;
        for (DesignMatrix::InnerIterator it(a, c); it; ++it) norm2 += it.value() * it.value();
        if (norm2 == 0.0) continue;
        for (DesignMatrix::InnerIterator it(a, c); it; ++it) {
            const auto i = static_cast<std::size_t>(it.col());
            const double b = it.value();
            if (b == 0.0) continue;
            const double phi = b * z / norm2;
            num[i] += b * b * phi;
            den[i] += b * b;
            if (outside) active[i] = 1;
        }
    }
    ResidualField f;
    f.q.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (active[i] && den[i] > 0.0) {
            f.q[i] = num[i] / den[i];
            ++f.active;
        }
    }
    return f;
}

ResidualField mta_update(const TSplineSpace& space, std::span<const Observation> obs,
                         std::span<const double> residuals, double threshold) {
    return mta_update(design_matrix(space, obs), residuals, threshold);
}

ResidualField mta_update(const LayeredSurface& surface, const TSplineSpace& space, std::span<const Observation> obs,
                         double threshold) {
    std::vector<double> r(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) r[i] = obs[i].phys.z() - surface.eval_z(obs[i].param);
    return mta_update(space, obs, r, threshold);
}

std::vector<CellId> mark(const TMesh& mesh, std::span<const Observation> obs, std::span<const double> errors,
                         double threshold, int mark_count) {
    if (errors.size() != obs.size()) throw InputError("one error indicator per observation expected");
    if (mark_count < 1) throw InputError("mark_count must be at least 1");
    std::vector<int> count(mesh.size(), 0);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (errors[i] > threshold) ++count[mesh.cell_at(obs[i].param)];
    }
    std::vector<CellId> out;
    for (CellId c = 0; c < count.size(); ++c) {
        if (count[c] >= mark_count) out.push_back(c);
    }
    return out;
}

ParamRect parameter_bounds(std::span<const Observation> obs) {
    if (obs.empty()) throw InputError("no observations");
    double u0 = obs[0].param.u, u1 = u0, v0 = obs[0].param.v, v1 = v0;
    for (const auto& o : obs) {
        u0 = std::min(u0, o.param.u);
        u1 = std::max(u1, o.param.u);
        v0 = std::min(v0, o.param.v);
        v1 = std::max(v1, o.param.v);
    }
    return ParamRect::make(u0, u1, v0, v1);
}

FitResult fit(std::span<const Observation> obs, const FitConfig& config, const ExactSurface* exact) {
    config.validate();
    if (obs.empty()) throw InputError("cannot fit without observations");
    const ParamRect domain = config.domain ? *config.domain : parameter_bounds(obs);
    for (const auto& o : obs) {
        if (!domain.contains(o.param)) throw InputError("observation parameter outside the fitting domain");
    }
    const SurfaceMode mode = config.full_3d ? SurfaceMode::ControlPoints : SurfaceMode::HeightField;
    const auto start = std::chrono::steady_clock::now();

    const Eigen::MatrixXd observed = observation_matrix(obs, mode);
    std::vector<double> exact_z;
    if (exact) {
        exact_z.resize(obs.size());
        for (std::size_t i = 0; i < obs.size(); ++i) exact_z[i] = (*exact)(obs[i]);
    }

    TMesh mesh = TMesh::uniform(domain, config.initial_nu, config.initial_nv, config.rule);
    std::optional<LayeredSurface> surface;
    Eigen::MatrixXd fitted = Eigen::MatrixXd::Zero(observed.rows(), observed.cols());
    std::vector<double> errors;
    std::vector<FitReport> reports;
    std::vector<std::string> events;
    bool multilevel = false;
    bool rank_deficient = false;
    bool converged = false;
    int switched_at = -1;

    for (int iter = 1; iter <= config.max_iters; ++iter) {
        if (iter > 1) {
            if (config.method == Method::NURBS_LS) {
                mesh = mesh.refine_all();
            } else {
                const auto marked = mark(mesh, obs, errors, config.threshold, config.mark_count);
                if (marked.empty()) {
                    events.push_back("iteration " + std::to_string(iter) +
                                     ": no cell holds mark_count points outside tolerance, stopping");
                    break;
                }
                mesh = mesh.refine(marked);
            }
        }
        auto space = std::make_shared<const TSplineSpace>(mesh);
        const DesignMatrix a = design_matrix(*space, obs);

        bool did_ls = false;
        if (!multilevel && (config.method != Method::MTA_COMBINED || iter <= config.ls_iters)) {
            try {
                LsSolution sol = solve_ls(assemble(a, observed), config.ls_max_unknowns);
                rank_deficient = rank_deficient || sol.rank_deficient;
                if (sol.rank_deficient) {
                    events.push_back("iteration " + std::to_string(iter) + ": rank-deficient system, " +
                                     std::to_string(sol.empty_anchors) + " anchors without data");
                }
                fitted = a * sol.coefficients;
                surface.emplace(surface_from(space, sol.coefficients));
                did_ls = true;
            } catch (const SolverError& err) {
                if (config.method != Method::MTA_COMBINED) {
                    throw SolverError(std::string("iteration ") + std::to_string(iter) + ": " + err.what(), iter);
                }
                switched_at = iter;
                events.push_back("iteration " + std::to_string(iter) + ": least-squares solve failed (" +
                                 err.what() + "), switching to multilevel updates");
            }
        }
        if (!did_ls) {
            multilevel = true;
            if (!surface) {
                surface.emplace(TSplineSurface::constant(space, 0.0));
            }
            std::vector<double> residuals(obs.size());
            for (std::size_t i = 0; i < obs.size(); ++i) {
                const auto r = static_cast<Eigen::Index>(i);
                residuals[i] = observed(r, 0) - fitted(r, 0);
            }
            ResidualField field = mta_update(a, residuals, config.threshold);
            const Eigen::Map<const Eigen::VectorXd> q(field.q.data(), static_cast<Eigen::Index>(field.q.size()));
            fitted.col(0) += a * q;
            surface->add_level(TSplineSurface(space, std::move(field.q)));
        }

        errors = row_errors(fitted, observed);
        std::vector<double> deviation;
        if (exact) {
            deviation.resize(obs.size());
            const Eigen::Index zc = observed.cols() - 1;
            for (std::size_t i = 0; i < obs.size(); ++i) {
                deviation[i] = fitted(static_cast<Eigen::Index>(i), zc) - exact_z[i];
            }
        }
        FitReport report = report_from_errors(errors, deviation, config.threshold, space->size());
        report.iter = iter;
        report.ct_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        reports.push_back(report);
        if (report.n_out == 0) {
            converged = true;
            break;
        }
    }

    FitResult result{std::move(*surface), std::move(reports), std::move(events)};
    result.converged = converged;
    result.rank_deficient = rank_deficient;
    result.switched_to_mta_at = switched_at;
    return result;
}

TSplineSurface project(const LayeredSurface& source, std::shared_ptr<const TSplineSpace> target, int samples) {
    if (samples < 1) throw InputError("projection needs at least one sample per cell and direction");
    const TMesh& mesh = target->mesh();
    std::vector<Observation> pts;
    pts.reserve(mesh.size() * static_cast<std::size_t>(samples * samples));
    for (CellId c = 0; c < mesh.size(); ++c) {
        const ParamRect r = mesh.cell_rect(c);
        for (int j = 0; j < samples; ++j) {
            for (int i = 0; i < samples; ++i) {
                const Param p{r.u_min + r.width() * (i + 0.5) / samples, r.v_min + r.height() * (j + 0.5) / samples};
                pts.push_back({p, source.eval(p)});
            }
        }
    }
    return fit_ls(std::move(target), pts, source.mode());
}

TSplineSurface flatten(const LayeredSurface& surface, int samples) {
    if (surface.levels().size() == 1) return surface.finest();
    return project(surface, surface.finest().space_ptr(), samples);
}

}  // namespace tsfit
