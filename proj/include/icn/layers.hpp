#pragma once

#include <any>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "icn/rng.hpp"
#include "icn/tensor.hpp"

namespace icn {

/// Neuron model used by a learnable layer.
///  - mp:          f(W x + b2)
///  - ic_basic:    f(W x + relu(W x - sum(x) + b1) + b2), w' fixed at 1
///  - ic_standard: f(W x + relu(W x - w' sum(x) + b1) + b2)
enum class UnitKind { mp, ic_basic, ic_standard };

std::string to_string(UnitKind kind);
UnitKind unit_kind_from_string(const std::string& name);
inline bool is_ic(UnitKind kind) { return kind != UnitKind::mp; }

/// A named view of one parameter tensor and its gradient accumulator.
/// Non-learnable entries (basic-variant w') are reported with gradients but
/// optimizers must skip them.
struct Param {
  std::string name;
  Tensor* value = nullptr;
  Tensor* grad = nullptr;
  bool learnable = true;
};

struct LayerCost {
  std::string name;
  std::size_t params = 0;
  std::size_t macs = 0;
  std::size_t weights = 0;  // multiplicative weights only (no biases, w' or b1)
};

/// Identifies which layer state produced a cache. Backward rejects caches
/// from another layer or from before the last parameter update.
struct CacheTag {
  const void* owner = nullptr;
  std::uint64_t version = 0;
};

/// Polymorphic surface used by Network. Shapes passed to output_shape/cost
/// are per-example (no batch axis); tensors passed to forward/backward carry
/// the batch on axis 0.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string type() const = 0;
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual Tensor forward(const Tensor& x, std::any& cache) const = 0;
  /// Accumulates parameter gradients and returns the gradient w.r.t. input.
  virtual Tensor backward(const std::any& cache, const Tensor& grad_y) = 0;
  virtual std::vector<Param> params() { return {}; }
  virtual void zero_grad() {}
  virtual LayerCost cost(const Shape& input) const = 0;
  virtual std::optional<UnitKind> unit() const { return std::nullopt; }
  /// Arguments of every relu kink evaluated in the cached forward pass.
  virtual void collect_kinks(const std::any&, std::vector<double>&) const {}
  void mark_updated() { ++version_; }

 protected:
  CacheTag tag() const { return {this, version_}; }
  void check_tag(const CacheTag& t) const;

 private:
  std::uint64_t version_ = 0;
};

/// Fully-connected layer of MP or IC units.
class FullyConnected : public Layer {
 public:
  FullyConnected(std::size_t inputs, std::size_t units, UnitKind kind, Activation act);

  struct Cache {
    CacheTag tag;
    Tensor input;       // [B×n]
    Tensor branch_arg;  // [B×m] W x - w' sum(x) + b1 (IC only)
    Tensor preact;      // [B×m] argument of f
    std::vector<double> input_sum;
  };
  struct Grads {
    Tensor input, weight, adjust, inner_bias, outer_bias;
  };

  std::pair<Tensor, Cache> forward(const Tensor& x) const;
  Grads gradients(const Cache& cache, const Tensor& grad_y) const;

  /// Uniform(-1/sqrt(n), 1/sqrt(n)) weights, w' = 1, zero biases.
  void init(Rng& rng);

  std::size_t inputs() const { return weight.dim(0); }
  std::size_t units() const { return weight.dim(1); }
  UnitKind kind() const { return kind_; }
  Activation activation() const { return act_; }

  /// Test hook: drops the collision branch, leaving f(W x + b2).
  void disable_branch_for_testing() { branch_enabled_ = false; }

  std::string type() const override { return "fc"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, std::any& cache) const override;
  Tensor backward(const std::any& cache, const Tensor& grad_y) override;
  std::vector<Param> params() override;
  void zero_grad() override;
  LayerCost cost(const Shape& input) const override;
  std::optional<UnitKind> unit() const override { return kind_; }
  void collect_kinks(const std::any& cache, std::vector<double>& out) const override;

  Tensor weight;      // [n×m]
  Tensor adjust;      // [m] w'
  Tensor inner_bias;  // [m] b1
  Tensor outer_bias;  // [m] b2
  Grads grad;

 private:
  bool branch_active() const { return is_ic(kind_) && branch_enabled_; }

  UnitKind kind_;
  Activation act_;
  bool branch_enabled_ = true;
};

/// Recurrent cell whose input transform is an IC (or MP) unit:
///   h_t = f(W_xh x_t + relu(W_xh x_t - w' sum(x_t) + b1) + W_hh h_{t-1} + b2)
///   y_t = W_hy h_t
class RecurrentCell : public Layer {
 public:
  RecurrentCell(std::size_t inputs, std::size_t hidden, std::size_t outputs, UnitKind kind,
                Activation act);

  struct StepCache {
    CacheTag tag;
    Tensor input;       // [B×n]
    Tensor h_prev;      // [B×h]
    Tensor branch_arg;  // [B×h]
    Tensor preact;      // [B×h]
    std::vector<double> input_sum;
  };
  struct StepGrads {
    Tensor input, h_prev, w_xh, w_hh, adjust, inner_bias, outer_bias;
  };
  struct SequenceCache {
    CacheTag tag;
    std::vector<StepCache> steps;
    Tensor h_last;  // [B×h]
  };
  struct SequenceGrads {
    Tensor input;  // [B×T×n]
    Tensor h0;     // [B×h]
    Tensor w_xh, w_hh, adjust, inner_bias, outer_bias, w_hy;
  };

  std::pair<Tensor, StepCache> step(const Tensor& x_t, const Tensor& h_prev) const;
  StepGrads step_backward(const StepCache& cache, const Tensor& grad_h) const;

  /// Runs t = 1..T from h0 (zeros when absent) and returns y_T = W_hy h_T.
  std::pair<Tensor, SequenceCache> forward_sequence(const Tensor& x_seq,
                                                    const std::optional<Tensor>& h0 = {}) const;
  /// Full backpropagation through time over every cached step.
  SequenceGrads backward_sequence(const SequenceCache& cache, const Tensor& grad_y) const;

  void init(Rng& rng);

  std::size_t inputs() const { return w_xh.dim(0); }
  std::size_t hidden() const { return w_xh.dim(1); }
  std::size_t outputs() const { return w_hy.dim(1); }
  UnitKind kind() const { return kind_; }

  std::string type() const override { return "recurrent"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, std::any& cache) const override;
  Tensor backward(const std::any& cache, const Tensor& grad_y) override;
  std::vector<Param> params() override;
  void zero_grad() override;
  LayerCost cost(const Shape& input) const override;
  std::optional<UnitKind> unit() const override { return kind_; }
  void collect_kinks(const std::any& cache, std::vector<double>& out) const override;

  Tensor w_xh;        // [n×h]
  Tensor w_hh;        // [h×h]
  Tensor adjust;      // [h]
  Tensor inner_bias;  // [h]
  Tensor outer_bias;  // [h]
  Tensor w_hy;        // [h×m]
  SequenceGrads grad;

 private:
  UnitKind kind_;
  Activation act_;
};

/// 2-D convolution of MP or IC kernels over [B×C'×H×W] inputs.
/// For IC kernels, U_i = f(W_i*X + relu(W_i*X - w'_i (I*X) + b1_i) + b2_i),
/// where the window sum I*X is computed once per position.
class Conv2D : public Layer {
 public:
  Conv2D(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
         std::size_t stride, std::size_t padding, UnitKind kind, Activation act);

  struct Cache {
    CacheTag tag;
    Shape input_shape;  // [B×C'×H×W]
    std::size_t out_h = 0, out_w = 0;
    Tensor cols;        // [B·P × C'k²] unrolled windows
    std::vector<double> window_sum;  // [B·P]
    Tensor branch_arg;  // [B·P × C]
    Tensor preact;      // [B·P × C]
  };
  struct Grads {
    Tensor input, kernels, adjust, inner_bias, outer_bias;
  };

  std::pair<Tensor, Cache> forward(const Tensor& x) const;
  Grads gradients(const Cache& cache, const Tensor& grad_u) const;

  void init(Rng& rng);

  std::size_t in_channels() const { return kernels.dim(1); }
  std::size_t out_channels() const { return kernels.dim(0); }
  std::size_t kernel() const { return kernels.dim(2); }
  std::size_t stride() const { return stride_; }
  std::size_t padding() const { return padding_; }
  UnitKind kind() const { return kind_; }

  std::string type() const override { return "conv"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, std::any& cache) const override;
  Tensor backward(const std::any& cache, const Tensor& grad_y) override;
  std::vector<Param> params() override;
  void zero_grad() override;
  LayerCost cost(const Shape& input) const override;
  std::optional<UnitKind> unit() const override { return kind_; }
  void collect_kinks(const std::any& cache, std::vector<double>& out) const override;

  Tensor kernels;     // [C×C'×k×k]
  Tensor adjust;      // [C]
  Tensor inner_bias;  // [C]
  Tensor outer_bias;  // [C]
  Grads grad;

 private:
  std::size_t stride_;
  std::size_t padding_;
  UnitKind kind_;
  Activation act_;
};

/// Max pooling over [B×C×H×W]; identical for IC and MP networks.
class MaxPool2D : public Layer {
 public:
  MaxPool2D(std::size_t size, std::size_t stride);

  std::string type() const override { return "maxpool"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, std::any& cache) const override;
  Tensor backward(const std::any& cache, const Tensor& grad_y) override;
  LayerCost cost(const Shape& input) const override;

 private:
  struct Cache {
    CacheTag tag;
    Shape input_shape;
    std::vector<std::size_t> argmax;
  };
  std::size_t size_, stride_;
};

/// Elementwise activation with no parameters.
class ActivationLayer : public Layer {
 public:
  explicit ActivationLayer(Activation act) : act_(act) {}

  std::string type() const override { return "activation"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor forward(const Tensor& x, std::any& cache) const override;
  Tensor backward(const std::any& cache, const Tensor& grad_y) override;
  LayerCost cost(const Shape& input) const override;
  void collect_kinks(const std::any& cache, std::vector<double>& out) const override;

 private:
  Activation act_;
};

/// Collapses every non-batch axis into one.
class Flatten : public Layer {
 public:
  std::string type() const override { return "flatten"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, std::any& cache) const override;
  Tensor backward(const std::any& cache, const Tensor& grad_y) override;
  LayerCost cost(const Shape& input) const override;
};

/// Plain affine map x W + b, used as the classifier head.
class Linear : public Layer {
 public:
  Linear(std::size_t inputs, std::size_t outputs);

  void init(Rng& rng);

  std::string type() const override { return "linear"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, std::any& cache) const override;
  Tensor backward(const std::any& cache, const Tensor& grad_y) override;
  std::vector<Param> params() override;
  void zero_grad() override;
  LayerCost cost(const Shape& input) const override;

  Tensor weight;  // [n×C]
  Tensor bias;    // [C]
  Tensor grad_weight, grad_bias;

 private:
  struct Cache {
    CacheTag tag;
    Tensor input;
  };
};

}  // namespace icn
