#include "tsfit/splines.hpp"

#include <algorithm>
#include <string>

#include "tsfit/errors.hpp"

namespace tsfit {

LocalKnots::LocalKnots(const std::array<double, 5>& knots) : knots_(knots) {
    if (!std::is_sorted(knots_.begin(), knots_.end())) {
        throw InputError("local knot vector must be non-decreasing");
    }
    if (knots_.front() == knots_.back()) {
        throw InputError("local knot vector has an empty support");
    }
}

double cubic_bspline(const LocalKnots& knots, double u, bool close_right) {
    const auto& k = knots.values();
    const bool at_right_end = close_right && u == k[4];
    if (u < k[0] || (u >= k[4] && !at_right_end)) {
        return 0.0;
    }

    // Degree-0 indicators, then the triangular Cox-de-Boor sweep (in place).
    std::array<double, 4> n{};
    if (at_right_end) {
        for (int j = 3; j >= 0; --j) {
            if (k[j] < k[j + 1]) {
                n[j] = 1.0;
                break;
            }
        }
    } else {
        for (int j = 0; j < 4; ++j) {
            n[j] = (k[j] <= u && u < k[j + 1]) ? 1.0 : 0.0;
        }
    }

    for (int q = 1; q <= kDegree; ++q) {
        double saved = (n[0] == 0.0) ? 0.0 : (u - k[0]) * n[0] / (k[q] - k[0]);
        for (int j = 0; j < 4 - q; ++j) {
            const double left = k[j + 1];
            const double right = k[j + q + 1];
            if (n[j + 1] == 0.0) {
                n[j] = saved;
                saved = 0.0;
            } else {
                const double t = n[j + 1] / (right - left);
                n[j] = saved + (right - u) * t;
                saved = (u - left) * t;
            }
        }
    }
    return n[0];
}

double cubic_bspline_general(std::span<const double> global_knots, std::size_t index, double u) {
    if (index < 1 || index + 4 > global_knots.size()) {
        throw InputError("B-spline index " + std::to_string(index) + " out of range for " +
                         std::to_string(global_knots.size()) + " knots");
    }
    if (!std::is_sorted(global_knots.begin(), global_knots.end())) {
        throw InputError("global knot vector must be non-decreasing");
    }
    std::array<double, 5> window{};
    std::copy_n(global_knots.begin() + static_cast<std::ptrdiff_t>(index - 1), 5, window.begin());
    if (window.front() == window.back()) {
        return 0.0;
    }
    const bool close_right = u == global_knots.back();
    return cubic_bspline(LocalKnots(window), u, close_right);
}

}  // namespace tsfit
