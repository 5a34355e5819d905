#include "tsfit/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

#include "tsfit/errors.hpp"
#include "tsfit/format.hpp"

namespace tsfit {

std::string format_real(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

FitReport report_from_errors(std::span<const double> errors, std::span<const double> exact_deviation,
                             double threshold, std::size_t n_cp) {
    if (errors.empty()) throw InputError("cannot evaluate a fit without observations");
    if (!exact_deviation.empty() && exact_deviation.size() != errors.size()) {
        throw InputError("one exact deviation per observation expected");
    }
    FitReport r;
    double sq = 0.0;
    for (double e : errors) {
        sq += e * e;
        r.maxerr = std::max(r.maxerr, e);
        if (e > threshold) ++r.n_out;
    }
    const auto n = static_cast<double>(errors.size());
    r.rmse_noise = std::sqrt(sq / n);
    if (!exact_deviation.empty()) {
        double sm = 0.0;
        for (double d : exact_deviation) sm += d * d;
        r.rmse_math = std::sqrt(sm / static_cast<double>(exact_deviation.size()));
    }
    r.n_cp = n_cp;
    return r;
}

namespace {

template <typename Surface>
FitReport evaluate_impl(const Surface& surface, std::span<const Observation> obs, const ExactSurface* exact,
                        double threshold, std::size_t n_cp) {
    std::vector<double> e(obs.size());
    std::vector<double> m;
    if (exact) m.resize(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double z = surface.eval_z(obs[i].param);
        e[i] = std::abs(z - obs[i].phys.z());
        if (exact) m[i] = z - (*exact)(obs[i]);
    }
    return report_from_errors(e, m, threshold, n_cp);
}

}  // namespace

FitReport evaluate(const LayeredSurface& surface, std::span<const Observation> obs, const ExactSurface* exact,
                   double threshold) {
    return evaluate_impl(surface, obs, exact, threshold, surface.control_point_count());
}

FitReport evaluate(const TSplineSurface& surface, std::span<const Observation> obs, const ExactSurface* exact,
                   double threshold) {
    return evaluate_impl(surface, obs, exact, threshold, surface.space().size());
}

std::string report_csv_header() { return "iter,rmse_noise,rmse_math,maxerr,n_out,n_cp,ct_seconds"; }

std::string report_csv_row(const FitReport& r) {
    std::string s = std::to_string(r.iter);
    s += ',' + format_real(r.rmse_noise);
    s += ',';
    if (r.rmse_math) s += format_real(*r.rmse_math);
    s += ',' + format_real(r.maxerr);
    s += ',' + std::to_string(r.n_out);
    s += ',' + std::to_string(r.n_cp);
    s += ',' + format_real(r.ct_seconds);
    return s;
}

void write_reports_csv(std::ostream& os, std::span<const FitReport> reports) {
    os << report_csv_header() << '\n';
    for (const auto& r : reports) os << report_csv_row(r) << '\n';
}

}  // namespace tsfit
