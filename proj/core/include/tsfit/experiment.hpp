#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tsfit/fitting.hpp"
#include "tsfit/synthdata.hpp"

namespace tsfit {

/// Monte-Carlo comparison: every run draws one synthetic dataset and fits it
/// with each configuration.
struct Experiment {
    SyntheticSpec spec;
    std::vector<FitConfig> configs;
    int n_runs = 3;
    std::uint64_t base_seed = 1;
    int threads = 1;  ///< worker threads; results do not depend on it

    void validate() const;
};

/// Seed of run `run` (0-based).
std::uint64_t run_seed(std::uint64_t base_seed, int run);

struct RunRecord {
    int run = 0;
    std::uint64_t seed = 0;
    std::size_t config = 0;  ///< index into Experiment::configs
    std::vector<FitReport> reports;
    bool converged = false;
    bool failed = false;
    std::string error;
};

struct Stat {
    double mean = 0.0;
    double std = 0.0;  ///< sample standard deviation, 0 for a single value
};

struct AggregateRow {
    int iter = 0;     ///< 0 marks the row of final reports
    int samples = 0;  ///< runs contributing to this row
    Stat rmse_noise;
    std::optional<Stat> rmse_math;
    Stat maxerr;
    Stat n_out;
    Stat n_cp;
    Stat ct_seconds;
};

struct MethodSummary {
    FitConfig config;
    std::vector<AggregateRow> iterations;  ///< iteration k uses the runs that reached it
    AggregateRow final;
    int failures = 0;
};

struct ExperimentResult {
    std::vector<RunRecord> runs;  ///< ordered by (run, config)
    std::vector<MethodSummary> methods;
};

/// Runs all (run, config) pairs. A failing fit is recorded with its seed and
/// error and left out of the means.
ExperimentResult run(const Experiment& exp);

/// Means and standard deviations of the given report sequences.
std::vector<AggregateRow> aggregate_iterations(const std::vector<const std::vector<FitReport>*>& runs);
AggregateRow aggregate_reports(const std::vector<FitReport>& reports, int iter);

std::string aggregate_csv_header();
void write_aggregate_csv(std::ostream& out, const MethodSummary& summary);
/// Writes `<label>_<method>_aggregate.csv`, `<label>_<method>_run<k>.csv` and
/// `<label>_manifest.txt` (seeds, failures, settings) into `dir`.
void write_experiment(const std::filesystem::path& dir, const std::string& label, const Experiment& exp,
                      const ExperimentResult& result);

}  // namespace tsfit
