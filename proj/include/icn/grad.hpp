#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "icn/network.hpp"

namespace icn {

/// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b);

/// Central differences (f(θ + s e_i) - f(θ - s e_i)) / 2s for every coordinate.
/// Throws NumericError if the loss is non-finite at any probe.
std::vector<double> finite_diff(const std::function<double(std::span<const double>)>& loss,
                                std::span<const double> theta, double step);

/// Same, perturbing the given tensors in place; `loss` reads them directly.
/// Every tensor is restored bit-exactly before returning.
std::vector<Tensor> finite_diff(const std::function<double()>& loss,
                                std::span<Tensor* const> params, double step);

struct GradFailure {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct ParamGradStats {
  std::string name;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  double max_rel_error = 0.0;
};

struct GradReport {
  double tolerance = 0.0;
  std::vector<ParamGradStats> params;
  std::vector<GradFailure> failures;
  std::size_t checked = 0;
  std::size_t kink_excluded = 0;

  bool passed() const { return failures.empty(); }
  double max_rel_error() const;
  /// key: value lines, one block per parameter.
  std::string to_text() const;
};

struct GradcheckOptions {
  double step = 1e-6;
  /// A coordinate is skipped when a relu argument within this distance of its
  /// kink moves under the probe, or when any argument changes sign.
  double kink_threshold = 1e-3;
  /// Evenly spaced coordinates checked per tensor; 0 checks all of them.
  std::size_t max_coords = 0;
  /// Test hook applied to the analytic gradient before comparison.
  std::function<void(std::vector<Param>&)> corrupt;
};

/// Compares Network::backward on the mean cross-entropy of `batch` against
/// central finite differences over every parameter (learnable or not).
GradReport gradcheck(Network& net, const Tensor& batch, std::span<const int> labels,
                     double tolerance, const GradcheckOptions& options = {});

}  // namespace icn
