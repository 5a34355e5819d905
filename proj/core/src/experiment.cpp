#include "tsfit/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <ostream>
#include <thread>

#include "tsfit/errors.hpp"
#include "tsfit/format.hpp"
#include "tsfit/metrics.hpp"

namespace tsfit {

void Experiment::validate() const {
    spec.validate();
    if (n_runs < 1) throw InputError("experiment needs at least one run");
    if (configs.empty()) throw InputError("experiment needs at least one fitting configuration");
    if (threads < 1) throw InputError("experiment needs at least one thread");
    for (const auto& c : configs) c.validate();
}

std::uint64_t run_seed(std::uint64_t base_seed, int run) {
    return splitmix64(base_seed + static_cast<std::uint64_t>(run));
}

namespace {

Stat stat_of(const std::vector<double>& xs) {
    Stat s;
    if (xs.empty()) return s;
    // Shifted by the first sample: identical samples give their value and a
    // spread of exactly zero.
    const double x0 = xs.front();
    const auto n = static_cast<double>(xs.size());
    double sum = 0.0;
    for (double x : xs) sum += x - x0;
    const double shift = sum / n;
    s.mean = x0 + shift;
    if (xs.size() > 1) {
        double sq = 0.0;
        for (double x : xs) sq += (x - x0 - shift) * (x - x0 - shift);
        s.std = std::sqrt(sq / (n - 1.0));
    }
    return s;
}

}  // namespace

AggregateRow aggregate_reports(const std::vector<FitReport>& reports, int iter) {
    AggregateRow row;
    row.iter = iter;
    row.samples = static_cast<int>(reports.size());
    std::vector<double> rn, rm, me, no, nc, ct;
    bool have_math = !reports.empty();
    for (const FitReport& r : reports) {
        rn.push_back(r.rmse_noise);
        me.push_back(r.maxerr);
        no.push_back(static_cast<double>(r.n_out));
        nc.push_back(static_cast<double>(r.n_cp));
        ct.push_back(r.ct_seconds);
        if (r.rmse_math) {
            rm.push_back(*r.rmse_math);
        } else {
            have_math = false;
        }
    }
    row.rmse_noise = stat_of(rn);
    if (have_math) row.rmse_math = stat_of(rm);
    row.maxerr = stat_of(me);
    row.n_out = stat_of(no);
    row.n_cp = stat_of(nc);
    row.ct_seconds = stat_of(ct);
    return row;
}

std::vector<AggregateRow> aggregate_iterations(const std::vector<const std::vector<FitReport>*>& runs) {
    std::size_t longest = 0;
    for (const auto* r : runs) longest = std::max(longest, r->size());
    std::vector<AggregateRow> rows;
    for (std::size_t k = 0; k < longest; ++k) {
        std::vector<FitReport> at;
        for (const auto* r : runs) {
            if (k < r->size()) at.push_back((*r)[k]);
        }
        rows.push_back(aggregate_reports(at, static_cast<int>(k) + 1));
    }
    return rows;
}

ExperimentResult run(const Experiment& exp) {
    exp.validate();
    const std::size_t nc = exp.configs.size();
    const std::size_t total = static_cast<std::size_t>(exp.n_runs) * nc;
    ExperimentResult result;
    result.runs.resize(total);

    // One task per run: the dataset is generated once and fitted by every
    // configuration, so methods are compared on identical data.
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int r = next++; r < exp.n_runs; r = next++) {
            SyntheticSpec spec = exp.spec;
            spec.seed = run_seed(exp.base_seed, r);
            const SyntheticData data = generate(spec);
            const ExactSurface exact = data.exact();
            for (std::size_t c = 0; c < nc; ++c) {
                RunRecord& rec = result.runs[static_cast<std::size_t>(r) * nc + c];
                rec.run = r;
                rec.seed = spec.seed;
                rec.config = c;
                try {
                    FitResult fr = fit(data.obs, exp.configs[c], &exact);
                    rec.reports = std::move(fr.reports);
                    rec.converged = fr.converged;
                } catch (const std::exception& e) {
                    rec.failed = true;
                    rec.error = e.what();
                }
            }
        }
    };
    const int nthreads = std::min(exp.threads, exp.n_runs);
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    for (std::size_t c = 0; c < nc; ++c) {
        MethodSummary s;
        s.config = exp.configs[c];
        std::vector<const std::vector<FitReport>*> seqs;
        std::vector<FitReport> finals;
        for (int r = 0; r < exp.n_runs; ++r) {
            const RunRecord& rec = result.runs[static_cast<std::size_t>(r) * nc + c];
            if (rec.failed) {
                ++s.failures;
                continue;
            }
            seqs.push_back(&rec.reports);
            finals.push_back(rec.reports.back());
        }
        s.iterations = aggregate_iterations(seqs);
        s.final = aggregate_reports(finals, 0);
        result.methods.push_back(std::move(s));
    }
    return result;
}

std::string aggregate_csv_header() {
    return "iter,samples,rmse_noise_mean,rmse_noise_std,rmse_math_mean,rmse_math_std,maxerr_mean,maxerr_std,"
           "n_out_mean,n_out_std,n_cp_mean,n_cp_std,ct_seconds_mean,ct_seconds_std";
}

namespace {

void write_row(std::ostream& out, const AggregateRow& r) {
    auto pair = [&](const Stat& s) { out << ',' << format_real(s.mean) << ',' << format_real(s.std); };
    if (r.iter == 0) {
        out << "final";
    } else {
        out << r.iter;
    }
    out << ',' << r.samples;
    pair(r.rmse_noise);
    if (r.rmse_math) {
        pair(*r.rmse_math);
    } else {
        out << ",,";
    }
    pair(r.maxerr);
    pair(r.n_out);
    pair(r.n_cp);
    pair(r.ct_seconds);
    out << '\n';
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw InputError("cannot open '" + p.string() + "' for writing");
    return out;
}

}  // namespace

void write_aggregate_csv(std::ostream& out, const MethodSummary& summary) {
    out << aggregate_csv_header() << '\n';
    for (const auto& r : summary.iterations) write_row(out, r);
    write_row(out, summary.final);
}

void write_experiment(const std::filesystem::path& dir, const std::string& label, const Experiment& exp,
                      const ExperimentResult& result) {
    std::filesystem::create_directories(dir);
    const std::size_t nc = exp.configs.size();
    for (std::size_t c = 0; c < nc; ++c) {
        const std::string stem = label + "_" + std::string(to_string(exp.configs[c].method));
        {
            std::ofstream out = open_out(dir / (stem + "_aggregate.csv"));
            write_aggregate_csv(out, result.methods[c]);
        }
        for (int r = 0; r < exp.n_runs; ++r) {
            const RunRecord& rec = result.runs[static_cast<std::size_t>(r) * nc + c];
            if (rec.failed) continue;
            std::ofstream out = open_out(dir / (stem + "_run" + std::to_string(r) + ".csv"));
            write_reports_csv(out, rec.reports);
        }
    }
    std::ofstream m = open_out(dir / (label + "_manifest.txt"));
    m << "# tsfit experiment " << label << '\n';
    m << "surface = " << (exp.spec.kind == SurfaceKind::Smooth ? "smooth" : "sharp") << '\n';
    m << "n = " << exp.spec.n << '\n';
    m << "sigma_xy = " << format_real(exp.spec.sigma_xy) << '\n';
    m << "sigma_z = " << format_real(exp.spec.sigma_z) << '\n';
    m << "gap = " << (exp.spec.gap ? "yes" : "no") << '\n';
    m << "outliers = " << format_real(exp.spec.outlier_fraction) << '\n';
    m << "runs = " << exp.n_runs << '\n';
    m << "base_seed = " << exp.base_seed << '\n';
    for (std::size_t c = 0; c < nc; ++c) {
        const FitConfig& f = exp.configs[c];
        m << "method " << to_string(f.method) << ": th = " << format_real(f.threshold)
          << ", max_iters = " << f.max_iters << ", ls_iters = " << f.ls_iters << ", mark_count = " << f.mark_count
          << ", failures = " << result.methods[c].failures << '\n';
    }
    for (const RunRecord& rec : result.runs) {
        m << "run " << rec.run << " seed " << rec.seed << ' ' << to_string(exp.configs[rec.config].method) << ' '
          << (rec.failed ? "failed: " + rec.error : (rec.converged ? "converged" : "max_iters")) << '\n';
    }
}

}  // namespace tsfit
