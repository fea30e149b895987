#pragma once

#include <span>
#include <vector>

namespace icn {

/// Weights of a single IC unit:
///   y = f( w·x + relu(w·x - w_prime * sum(x) + b1) + b2 )
/// b1 sits inside the collision branch, b2 outside it.
struct ICParams {
  std::vector<double> w;
  double w_prime = 1.0;
  double b1 = 0.0;
  double b2 = 0.0;
  bool w_prime_learnable = true;

  /// Basic neuron: w' pinned to the collision value 1 and never trained.
  static ICParams basic(std::vector<double> w, double b1 = 0.0, double b2 = 0.0);
  static ICParams standard(std::vector<double> w, double w_prime, double b1 = 0.0,
                           double b2 = 0.0);

  std::size_t inputs() const { return w.size(); }
};

/// Single-input collision transfer w*x + relu((w-1)*x).
double collision_unit(double x, double w);

/// Argument of the collision branch: w·x - w'·sum(x) + b1.
double hyperplane_value(std::span<const double> x, const ICParams& p);

/// Pre-activation of an IC unit (everything inside the outer f).
double ic_preactivation(std::span<const double> x, const ICParams& p);

enum class Branch { upper, lower };

struct BranchValue {
  Branch branch;
  double value;
};

/// Piecewise form of a basic, bias-free IC unit: with H = sum((w_i - 1) x_i),
/// H >= 0 gives 2 w·x - sum(x), otherwise w·x. Throws ContractError for
/// standard-variant parameters or non-zero biases.
BranchValue piecewise_branches(std::span<const double> x, const ICParams& p);

struct HyperplaneReport {
  std::vector<double> normal;  // w_i - w'
  double cos_theta = 0.0;      // angle between normal and the all-ones vector
  bool degenerate = false;     // w is a multiple of the all-ones vector
};

/// Orientation of the partition hyperplane sum((w_i - w') x_i) = 0 relative
/// to the all-ones direction. Requires at least two inputs.
HyperplaneReport hyperplane_cos_angle(std::span<const double> w, double w_prime);

/// Hand-set single neuron (with f = relu) that separates XOR:
/// w = (0.2805, 0.2805), w' = 1, b1 = 0.6463, b2 = -0.3506.
ICParams xor_closed_form();

}  // namespace icn
