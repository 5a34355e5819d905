#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "tsfit/metrics.hpp"
#include "tsfit/tspline.hpp"

namespace tsfit {

enum class Method {
    LS_T,          ///< least squares on the locally refined T-mesh every iteration
    MTA_COMBINED,  ///< least squares for the first ls_iters iterations, then multilevel updates
    NURBS_LS,      ///< least squares with global dyadic refinement (tensor-product baseline)
};

std::string_view to_string(Method m);
/// Accepts lst / ls-t / ls_t, mta / mta_combined, nurbs / nurbs_ls (case-insensitive).
Method parse_method(std::string_view name);

struct FitConfig {
    Method method = Method::LS_T;
    double threshold = 0.01;  ///< TH, in scene units
    int max_iters = 8;
    int ls_iters = 3;    ///< least-squares iterations before switching to multilevel updates
    int mark_count = 2;  ///< out-of-tolerance points needed to mark a cell
    int initial_nu = 4;
    int initial_nv = 4;
    std::uint64_t seed = 1;
    /// Parametric domain; the bounding box of the observation parameters if unset.
    std::optional<ParamRect> domain;
    /// Fit 3D control points instead of heights (least-squares methods only).
    bool full_3d = false;
    /// Refuse least-squares systems with more unknowns than this (0 = no limit);
    /// a refused solve is reported as a SolverError.
    std::size_t ls_max_unknowns = 0;
    NeighborhoodRule rule{};

    /// Defaults per method: max_iters 8 for LS_T / NURBS_LS and 10 for MTA_COMBINED.
    static FitConfig defaults(Method method);
    /// Throws InputError on TH <= 0, mark_count < 1, ls_iters > max_iters for MTA_COMBINED, ...
    void validate() const;
};

/// Normal equations A^T A P = A^T L with a_ij = B_j(u_i, v_i).
struct NormalSystem {
    Eigen::SparseMatrix<double> lhs;
    Eigen::MatrixXd rhs;  ///< n x 1 (heights) or n x 3 (control points)
};

struct LsSolution {
    Eigen::MatrixXd coefficients;
    bool rank_deficient = false;
    std::size_t empty_anchors = 0;  ///< anchors without any observation in their support
};

/// Coefficients q_i of one multilevel residual surface.
struct ResidualField {
    std::vector<double> q;
    std::size_t active = 0;  ///< anchors with an out-of-tolerance observation in their support
};

using DesignMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// A with one row of normalised basis values per observation.
DesignMatrix design_matrix(const TSplineSpace& space, std::span<const Observation> obs);

/// e_i = |z_S - z_l| for height fields, ||S - l||_2 for control-point surfaces.
std::vector<double> error_indicators(const TSplineSurface& surface, std::span<const Observation> obs);
std::vector<double> error_indicators(const LayeredSurface& surface, std::span<const Observation> obs);

NormalSystem assemble(std::span<const Observation> obs, const TSplineSpace& space, SurfaceMode mode);
NormalSystem assemble(std::span<const Observation> obs, const TSplineSurface& surface);
NormalSystem assemble(const DesignMatrix& a, const Eigen::MatrixXd& observations);

/// Least-squares coefficients. Anchors without data and numerically singular
/// systems get the minimum-norm solution and set `rank_deficient`. Throws
/// SolverError if the system cannot be solved.
LsSolution solve_ls(const NormalSystem& system, std::size_t max_unknowns = 0);

/// Least-squares surface over `space`.
TSplineSurface fit_ls(std::shared_ptr<const TSplineSpace> space, std::span<const Observation> obs,
                      SurfaceMode mode = SurfaceMode::HeightField, LsSolution* info = nullptr);

/// Multilevel coefficients for residuals z_c = z_l - z_S (observation minus
/// surface): q_i = 0 when every observation in supp B_i has |z_c| < TH,
/// otherwise the B_i^2-weighted mean of phi_ic = B_i z_c / sum_j B_j^2.
ResidualField mta_update(const TSplineSpace& space, std::span<const Observation> obs,
                         std::span<const double> residuals, double threshold);
ResidualField mta_update(const DesignMatrix& a, std::span<const double> residuals, double threshold);
/// Residuals taken against `surface`, coefficients over `space`.
ResidualField mta_update(const LayeredSurface& surface, const TSplineSpace& space,
                         std::span<const Observation> obs, double threshold);

/// Cells holding at least `mark_count` observations with e_i > TH.
std::vector<CellId> mark(const TMesh& mesh, std::span<const Observation> obs, std::span<const double> errors,
                         double threshold, int mark_count);

struct FitResult {
    LayeredSurface surface;
    std::vector<FitReport> reports;
    std::vector<std::string> events;
    bool converged = false;       ///< no e_i > TH after the last iteration
    bool rank_deficient = false;  ///< some least-squares solve fell back to minimum norm
    int switched_to_mta_at = -1;  ///< iteration where a failed solve forced the switch
};

/// Iterative adaptive fit: build the initial mesh, then per iteration fit
/// (least squares or multilevel update), report, stop once no e_i > TH or
/// max_iters is reached, otherwise mark and refine.
FitResult fit(std::span<const Observation> obs, const FitConfig& config, const ExactSurface* exact = nullptr);

/// Least-squares projection of a surface onto another space, sampling
/// `samples` x `samples` points per target cell.
TSplineSurface project(const LayeredSurface& source, std::shared_ptr<const TSplineSpace> target, int samples = 4);
/// Resamples a layered surface onto its finest level's space.
TSplineSurface flatten(const LayeredSurface& surface, int samples = 4);

/// Bounding box of the observation parameters.
ParamRect parameter_bounds(std::span<const Observation> obs);

}  // namespace tsfit
