#pragma once

#include <array>
#include <cstddef>
#include <span>

namespace tsfit {

/// Polynomial degree of every univariate factor.
inline constexpr int kDegree = 3;

/// Five-entry local knot vector (u_-2, ..., u_2) of one cubic B-spline.
class LocalKnots {
public:
    /// Throws InputError if the entries decrease or all five coincide.
    explicit LocalKnots(const std::array<double, 5>& knots);

    double operator[](std::size_t i) const { return knots_[i]; }
    const std::array<double, 5>& values() const { return knots_; }
    double front() const { return knots_.front(); }
    double back() const { return knots_.back(); }
    double middle() const { return knots_[2]; }

    friend bool operator==(const LocalKnots&, const LocalKnots&) = default;

private:
    std::array<double, 5> knots_;
};

/// Cubic B-spline N_{1,3}(u) over a five-entry knot vector (Cox-de-Boor).
///
/// The support is half-open, [k0, k4). With `close_right` set and u == k4,
/// the last non-empty knot span is treated as closed, which is how the
/// right/top edge of the parametric domain stays covered.
double cubic_bspline(const LocalKnots& knots, double u, bool close_right = false);

/// N_{index,3}(u) for a global non-decreasing knot vector, `index` counted
/// from 1 as in the usual textbook notation (window knots[index-1 .. index+3]).
/// The last knot is treated as the closed right end of the domain.
/// Throws InputError for an out-of-range index or a decreasing vector.
double cubic_bspline_general(std::span<const double> global_knots, std::size_t index, double u);

}  // namespace tsfit
