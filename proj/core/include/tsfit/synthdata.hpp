#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "tsfit/metrics.hpp"

namespace tsfit {

enum class SurfaceKind { Smooth, Sharp };

/// Dam: (tanh(k (v - u)) + 1) / 6.
double s1(double k, double u, double v);
/// Gaussian hill centred at (0.415, -0.415).
double s2(double u, double v);
/// Seven small Gaussian ripples in the upper-left quadrant.
double s3(double u, double v);
/// s1 with k = 9 (smooth) or k = 30 (sharp), plus s2 and s3.
double exact_surface(SurfaceKind kind, double u, double v);

/// Seedable generator with a fixed uniform and Gaussian transform so that
/// datasets are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Standard normal by Box-Muller (one draw per call).
    double normal();
    /// Student t with `dof` degrees of freedom: Z / sqrt(chi2_dof / dof).
    double student_t(int dof);
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
};

/// Stateless 64-bit mix, used to derive independent seeds.
std::uint64_t splitmix64(std::uint64_t x);

struct SyntheticSpec {
    SurfaceKind kind = SurfaceKind::Smooth;
    int n = 200;  ///< n x n grid over [-1, 1]^2
    double sigma_xy = 0.001;
    double sigma_z = 0.003;
    std::optional<ParamRect> gap;  ///< observations inside are removed
    double outlier_fraction = 0.0;
    double cap_factor = 10.0;      ///< |outlier z| <= cap_factor * max|z_exact|
    double outlier_scale = 0.1;    ///< Student-t scale relative to max|z_exact|
    int student_dof = 3;
    std::uint64_t seed = 1;

    /// [-1/4, 0]^2.
    static ParamRect default_gap();
    /// Throws InputError on n < 2, negative sigmas, fraction outside [0, 1], ...
    void validate() const;
};

/// Observations with their noise-free heights. Parameters equal the noisy
/// (x, y) coordinates, so the parametric domain is roughly [-1, 1]^2.
struct SyntheticData {
    SurfaceKind kind = SurfaceKind::Smooth;
    std::vector<Observation> obs;
    std::vector<double> z_exact;  ///< exact height at the grid node the point was drawn from
    std::vector<char> outlier;    ///< 1 for contaminated points
    double max_abs_exact = 0.0;   ///< over the full, uncorrupted grid

    std::size_t size() const { return obs.size(); }
    /// Exact surface evaluated at an observation's parameter.
    ExactSurface exact() const;
};

/// Noisy n x n grid samples of the exact surface (no gap, no outliers).
SyntheticData sample(const SyntheticSpec& spec);
/// Removes the observations whose parameter lies in the closed rectangle.
void apply_gap(SyntheticData& data, const ParamRect& rect);
/// Adds clipped Student-t noise to floor(fraction * n) distinct points.
void add_outliers(SyntheticData& data, double fraction, double cap_factor, std::uint64_t seed,
                  double scale = 0.1, int dof = 3);
/// sample, then apply_gap and add_outliers as configured.
SyntheticData generate(const SyntheticSpec& spec);

}  // namespace tsfit
