#include "tsfit/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tsfit/errors.hpp"

namespace tsfit {

double s1(double k, double u, double v) { return (std::tanh(k * (v - u)) + 1.0) / 6.0; }

double s2(double u, double v) {
    return 0.1 * std::exp(-30.0 * ((u - 0.415) * (u - 0.415) + (v + 0.415) * (v + 0.415)));
}

namespace {

double bump(double a, double c, double u0, double v0, double u, double v) {
    return a * std::exp(-c * ((u - u0) * (u - u0) + (v - v0) * (v - v0)));
}

}  // namespace

double s3(double u, double v) {
    return bump(-0.03, 20.0, -0.5, 0.5, u, v) + bump(0.03, 10.0, -0.6, 0.6, u, v) +
           bump(-0.03, 10.0, -0.4, 0.6, u, v) + bump(0.02, 10.0, -0.6, 0.4, u, v) +
           bump(0.01, 10.0, -0.7, 0.3, u, v) + bump(0.02, 10.0, -0.1, 0.7, u, v) +
           bump(-0.01, 20.0, -0.6, 0.0, u, v);
}

double exact_surface(SurfaceKind kind, double u, double v) {
    const double k = kind == SurfaceKind::Smooth ? 9.0 : 30.0;
    return s1(k, u, v) + s2(u, v) + s3(u, v);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    const double a = 1.0 - uniform();  // (0, 1]
    const double b = uniform();
    return std::sqrt(-2.0 * std::log(a)) * std::cos(2.0 * std::numbers::pi * b);
}

double Rng::student_t(int dof) {
    const double z = normal();
    double chi2 = 0.0;
    for (int i = 0; i < dof; ++i) {
        const double g = normal();
        chi2 += g * g;
    }
    return z / std::sqrt(chi2 / dof);
}

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection keeps the draw unbiased.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

ParamRect SyntheticSpec::default_gap() { return ParamRect::make(-0.25, 0.0, -0.25, 0.0); }

void SyntheticSpec::validate() const {
    if (n < 2) throw InputError("synthetic grid needs n >= 2");
    if (!(sigma_xy >= 0.0) || !(sigma_z >= 0.0)) throw InputError("noise standard deviations must be >= 0");
    if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0)) {
        throw InputError("outlier fraction must lie in [0, 1]");
    }
    if (!(cap_factor > 0.0)) throw InputError("outlier cap factor must be positive");
    if (!(outlier_scale >= 0.0)) throw InputError("outlier scale must be >= 0");
    if (student_dof < 1) throw InputError("Student-t degrees of freedom must be >= 1");
}

ExactSurface SyntheticData::exact() const {
    const SurfaceKind k = kind;
    return [k](const Observation& o) { return exact_surface(k, o.param.u, o.param.v); };
}

SyntheticData sample(const SyntheticSpec& spec) {
    spec.validate();
    SyntheticData d;
    d.kind = spec.kind;
    const auto count = static_cast<std::size_t>(spec.n) * static_cast<std::size_t>(spec.n);
    d.obs.reserve(count);
    d.z_exact.reserve(count);
    d.outlier.assign(count, 0);
    Rng rng(spec.seed);
    for (int j = 0; j < spec.n; ++j) {
        const double y = grid_coordinate(-1.0, 1.0, j, spec.n);
        for (int i = 0; i < spec.n; ++i) {
            const double x = grid_coordinate(-1.0, 1.0, i, spec.n);
            const double z = exact_surface(spec.kind, x, y);
            const double px = x + spec.sigma_xy * rng.normal();
            const double py = y + spec.sigma_xy * rng.normal();
            const double pz = z + spec.sigma_z * rng.normal();
            d.obs.push_back({{px, py}, Point3(px, py, pz)});
            d.z_exact.push_back(z);
            d.max_abs_exact = std::max(d.max_abs_exact, std::abs(z));
        }
    }
    return d;
}

void apply_gap(SyntheticData& data, const ParamRect& rect) {
    std::size_t w = 0;
    for (std::size_t i = 0; i < data.obs.size(); ++i) {
        if (rect.contains(data.obs[i].param)) continue;
        data.obs[w] = data.obs[i];
        data.z_exact[w] = data.z_exact[i];
        data.outlier[w] = data.outlier[i];
        ++w;
    }
    data.obs.resize(w);
    data.z_exact.resize(w);
    data.outlier.resize(w);
}

void add_outliers(SyntheticData& data, double fraction, double cap_factor, std::uint64_t seed, double scale,
                  int dof) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw InputError("outlier fraction must lie in [0, 1]");
    if (!(cap_factor > 0.0)) throw InputError("outlier cap factor must be positive");
    if (dof < 1) throw InputError("Student-t degrees of freedom must be >= 1");
    const std::size_t n = data.obs.size();
    const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    if (k == 0) return;

    // Partial Fisher-Yates: the first k entries become a uniform random subset.
    Rng rng(seed);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    const double m = data.max_abs_exact;
    const double cap = cap_factor * m;
    for (std::size_t i = 0; i < k; ++i) {
        Observation& o = data.obs[idx[i]];
        const double added = std::clamp(scale * m * rng.student_t(dof), -cap, cap);
        o.phys.z() = std::clamp(o.phys.z() + added, -cap, cap);
        data.outlier[idx[i]] = 1;
    }
}

SyntheticData generate(const SyntheticSpec& spec) {
    SyntheticData d = sample(spec);
    if (spec.gap) apply_gap(d, *spec.gap);
    if (spec.outlier_fraction > 0.0) {
        add_outliers(d, spec.outlier_fraction, spec.cap_factor, splitmix64(spec.seed ^ 0x6f75746c69657273ULL),
                     spec.outlier_scale, spec.student_dof);
    }
    return d;
}

}  // namespace tsfit
