#include "mfcp/svg_plot.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <vector>

#include "mfcp/errors.hpp"

namespace mfcp::plot {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kMargin = 48.0;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string band_svg(std::span<const double> x, std::span<const double> prediction,
                     std::span<const double> lower, std::span<const double> upper,
                     std::span<const double> truth, const std::string& title) {
  const std::size_t n = x.size();
  if (n == 0 || prediction.size() != n || lower.size() != n || upper.size() != n ||
      truth.size() != n)
    throw ValidationError("band_svg: series lengths differ or are empty");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });

  const auto [x_lo, x_hi] = std::minmax_element(x.begin(), x.end());
  double y_lo = std::min(*std::min_element(lower.begin(), lower.end()),
                         *std::min_element(truth.begin(), truth.end()));
  double y_hi = std::max(*std::max_element(upper.begin(), upper.end()),
                         *std::max_element(truth.begin(), truth.end()));
  const double x_span = *x_hi > *x_lo ? *x_hi - *x_lo : 1.0;
  if (y_hi <= y_lo) {
    y_lo -= 0.5;
    y_hi += 0.5;
  }
  auto px = [&](double v) { return kMargin + (v - *x_lo) / x_span * (kWidth - 2 * kMargin); };
  // Inverted axis: larger values are drawn lower.
  auto py = [&](double v) { return kMargin + (v - y_lo) / (y_hi - y_lo) * (kHeight - 2 * kMargin); };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) +
                    "\" height=\"" + fmt(kHeight) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + fmt(kMargin) + "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" +
         escape(title) + "</text>\n";

  svg += "<polygon fill=\"#9ecae1\" fill-opacity=\"0.6\" stroke=\"none\" points=\"";
  for (std::size_t i : order) svg += fmt(px(x[i])) + "," + fmt(py(upper[i])) + " ";
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    svg += fmt(px(x[*it])) + "," + fmt(py(lower[*it])) + " ";
  svg += "\"/>\n";

  svg += "<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i : order) svg += fmt(px(x[i])) + "," + fmt(py(prediction[i])) + " ";
  svg += "\"/>\n";

  for (std::size_t i : order)
    svg += "<circle cx=\"" + fmt(px(x[i])) + "\" cy=\"" + fmt(py(truth[i])) +
           "\" r=\"1.8\" fill=\"#d62728\"/>\n";

  svg += "<rect x=\"" + fmt(kMargin) + "\" y=\"" + fmt(kMargin) + "\" width=\"" +
         fmt(kWidth - 2 * kMargin) + "\" height=\"" + fmt(kHeight - 2 * kMargin) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace mfcp::plot
