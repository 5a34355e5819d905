#pragma once

#include <string>

namespace tsfit {

/// Shortest decimal that round-trips to the same double; locale independent.
std::string format_real(double value);

}  // namespace tsfit
