#include "icn/ic_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "icn/errors.hpp"

namespace icn {

namespace {

double relu(double v) { return v > 0.0 ? v : 0.0; }

void require_inputs(std::span<const double> x, const ICParams& p) {
  if (p.w.empty()) throw DimensionError("IC unit needs at least one input");
  if (x.size() != p.w.size()) {
    throw DimensionError("IC unit expects " + std::to_string(p.w.size()) + " inputs, got " +
                         std::to_string(x.size()));
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sum(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v;
  return s;
}

}  // namespace

ICParams ICParams::basic(std::vector<double> w, double b1, double b2) {
  return ICParams{std::move(w), 1.0, b1, b2, false};
}

ICParams ICParams::standard(std::vector<double> w, double w_prime, double b1, double b2) {
  return ICParams{std::move(w), w_prime, b1, b2, true};
}

double collision_unit(double x, double w) { return w * x + relu((w - 1.0) * x); }

double hyperplane_value(std::span<const double> x, const ICParams& p) {
  require_inputs(x, p);
  return dot(p.w, x) - p.w_prime * sum(x) + p.b1;
}

double ic_preactivation(std::span<const double> x, const ICParams& p) {
  require_inputs(x, p);
  const double linear = dot(p.w, x);
  return linear + relu(linear - p.w_prime * sum(x) + p.b1) + p.b2;
}

BranchValue piecewise_branches(std::span<const double> x, const ICParams& p) {
  require_inputs(x, p);
  if (p.w_prime != 1.0 || p.b1 != 0.0 || p.b2 != 0.0) {
    throw ContractError("piecewise_branches requires basic parameters with zero biases");
  }
  // Evaluated independently of ic_preactivation: the hyperplane is formed
  // from the per-coordinate differences (w_i - 1).
  double h = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) h += (p.w[i] - 1.0) * x[i];
  const double linear = dot(p.w, x);
  if (h >= 0.0) return {Branch::upper, 2.0 * linear - sum(x)};
  return {Branch::lower, linear};
}

HyperplaneReport hyperplane_cos_angle(std::span<const double> w, double w_prime) {
  const std::size_t n = w.size();
  if (n < 2) {
    throw DimensionError("hyperplane analysis needs at least 2 weights, got " +
                         std::to_string(n));
  }
  HyperplaneReport report;
  report.normal.resize(n);
  double norm_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    report.normal[i] = w[i] - w_prime;
    norm_sq += report.normal[i] * report.normal[i];
  }
  const double mean = sum(w) / static_cast<double>(n);

  double scale = 1.0, spread = 0.0;
  for (double v : w) {
    scale = std::max(scale, std::abs(v));
    spread = std::max(spread, std::abs(v - mean));
  }
  report.degenerate = spread <= 1e-12 * scale;

  // H·I = n (mean - w'), |I| = sqrt(n).
  const double numerator = mean - w_prime;
  if (report.degenerate || norm_sq == 0.0) {
    report.cos_theta = numerator > 0.0 ? 1.0 : (numerator < 0.0 ? -1.0 : 0.0);
    return report;
  }
  const double c = std::sqrt(static_cast<double>(n)) * numerator / std::sqrt(norm_sq);
  report.cos_theta = std::clamp(c, -1.0, 1.0);
  return report;
}

ICParams xor_closed_form() { return ICParams::basic({0.2805, 0.2805}, 0.6463, -0.3506); }

}  // namespace icn
