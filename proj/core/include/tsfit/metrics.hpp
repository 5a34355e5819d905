#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>

#include "tsfit/tspline.hpp"

namespace tsfit {

/// A parametrised observation: parameter (u, v) and physical point (x, y, z).
struct Observation {
    Param param;
    Point3 phys = Point3::Zero();
};

/// Noise-free reference height for an observation, when one is known.
using ExactSurface = std::function<double(const Observation&)>;

/// Performance indicators after one driver iteration.
struct FitReport {
    int iter = 0;
    double rmse_noise = 0.0;
    std::optional<double> rmse_math;
    double maxerr = 0.0;
    std::size_t n_out = 0;
    std::size_t n_cp = 0;
    double ct_seconds = 0.0;
};

/// Indicators from per-observation errors e_i (and optional deviations from
/// the exact surface). RMS values are normalised by 1/sqrt(n_obs); n_out
/// counts e_i > threshold.
FitReport report_from_errors(std::span<const double> errors, std::span<const double> exact_deviation,
                             double threshold, std::size_t n_cp);

/// Height-field indicators of a surface against (noisy) observations.
FitReport evaluate(const LayeredSurface& surface, std::span<const Observation> obs,
                   const ExactSurface* exact, double threshold);
FitReport evaluate(const TSplineSurface& surface, std::span<const Observation> obs,
                   const ExactSurface* exact, double threshold);

/// CSV columns: iter,rmse_noise,rmse_math,maxerr,n_out,n_cp,ct_seconds.
std::string report_csv_header();
std::string report_csv_row(const FitReport& r);
void write_reports_csv(std::ostream& os, std::span<const FitReport> reports);

}  // namespace tsfit
