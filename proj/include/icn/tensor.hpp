#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace icn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  /// Row-major matrix from nested initializer lists, mainly for tests.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor vector(std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }

  /// Same values, new shape with the same element count.
  Tensor reshaped(Shape shape) const;
  void fill(double value);

  /// Leading-axis slice [begin, end) as a new tensor.
  Tensor rows(std::size_t begin, std::size_t end) const;

  bool all_finite() const;
  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

/// Copies the listed leading-axis entries of `t` into a new tensor.
Tensor gather(const Tensor& t, std::span<const std::size_t> indices);

// Matrix products. All three accumulate every output element in ascending
// order of the contracted index, so results are reproducible bit-for-bit.

/// a[m×k] · b[k×n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// aᵀ · b for a[k×m], b[k×n]
Tensor matmul_tn(const Tensor& a, const Tensor& b);
/// a · bᵀ for a[m×k], b[n×k]
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);
Tensor identity(std::size_t n);

/// Elementwise a + b / a += b; shapes must match.
Tensor add(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& a, const Tensor& b);

/// Sum over the last axis of a 2-D tensor, ascending column order.
std::vector<double> row_sums(const Tensor& a);

enum class ActivationKind { relu, tanh, elu, sigmoid, identity };

struct Activation {
  ActivationKind kind = ActivationKind::relu;
  double alpha = 1.0;  // ELU negative-side scale

  static Activation relu() { return {ActivationKind::relu}; }
  static Activation tanh() { return {ActivationKind::tanh}; }
  static Activation elu(double alpha = 1.0) { return {ActivationKind::elu, alpha}; }
  static Activation sigmoid() { return {ActivationKind::sigmoid}; }
  static Activation identity() { return {ActivationKind::identity}; }

  friend bool operator==(const Activation&, const Activation&) = default;
};

std::string to_string(ActivationKind kind);
/// Throws std::invalid_argument for an unknown name.
ActivationKind activation_from_string(const std::string& name);

double activate(double x, Activation act);
/// Derivative with respect to the pre-activation; relu'(0) = 0.
double activate_grad(double x, Activation act);

Tensor activate(const Tensor& a, Activation act);
Tensor activate_grad(const Tensor& a, Activation act);

struct LossAndGrad {
  double loss = 0.0;
  Tensor grad_logits;
};

/// Mean softmax cross-entropy over the batch and its gradient
/// (softmax - onehot) / batch. Rows are shifted by their max before exp.
LossAndGrad softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Row-wise softmax probabilities.
Tensor softmax(const Tensor& logits);

}  // namespace icn
