#pragma once

#include <span>
#include <string>

namespace mfcp::plot {

/// Sectional plot in the usual C_p style: shaded band, prediction line and
/// truth markers against `x`. The vertical axis is inverted.
std::string band_svg(std::span<const double> x, std::span<const double> prediction,
                     std::span<const double> lower, std::span<const double> upper,
                     std::span<const double> truth, const std::string& title);

}  // namespace mfcp::plot
