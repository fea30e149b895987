#pragma once

#include <any>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "icn/layers.hpp"

namespace icn {

/// Declarative description of one layer. `unit` and `activation` fall back to
/// the model-level defaults when unset.
struct LayerSpec {
  enum class Type { fc, recurrent, conv, maxpool, activation, flatten };

  Type type = Type::fc;
  std::size_t units = 0;    // fc width, recurrent hidden size, conv output channels
  std::size_t outputs = 0;  // recurrent readout width (0 = same as hidden)
  std::size_t kernel = 3;   // conv kernel / pool window
  std::size_t stride = 1;
  std::optional<std::size_t> padding;  // conv default: kernel / 2
  std::optional<UnitKind> unit;
  std::optional<Activation> activation;

  static LayerSpec fc(std::size_t units);
  static LayerSpec recurrent(std::size_t hidden, std::size_t outputs = 0);
  static LayerSpec conv(std::size_t channels, std::size_t kernel, std::size_t stride,
                        std::optional<std::size_t> padding = {});
  static LayerSpec maxpool(std::size_t size, std::size_t stride = 0);
  static LayerSpec act(Activation a);
  static LayerSpec flatten();

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

std::string to_string(LayerSpec::Type type);
LayerSpec::Type layer_type_from_string(const std::string& name);

/// Starting value of the collision-branch bias b1 in IC layers.
///  - zero:     b1 = 0
///  - uniform:  b1 ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), like the weights
///  - constant: b1 = value
/// Draws come from their own seed stream, so weights match the MP twin's.
struct BiasInit {
  enum class Kind { zero, uniform, constant };
  Kind kind = Kind::zero;
  double value = 0.0;

  static BiasInit zero() { return {}; }
  static BiasInit uniform() { return {Kind::uniform, 0.0}; }
  static BiasInit constant(double v) { return {Kind::constant, v}; }

  friend bool operator==(const BiasInit&, const BiasInit&) = default;
};

/// Starting value of w' in standard IC layers (basic layers always hold 1).
///  - one:     w' = 1, the collision value
///  - uniform: w' ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), like the weights
enum class AdjustInit { one, uniform };

std::string to_string(AdjustInit init);
AdjustInit adjust_init_from_string(const std::string& name);

struct ModelSpec {
  UnitKind unit = UnitKind::ic_standard;
  Activation activation = Activation::relu();
  std::vector<LayerSpec> layers;
  BiasInit inner_bias_init;
  AdjustInit adjust_init = AdjustInit::one;

  /// Same topology with every learnable layer switched to MP units.
  ModelSpec mp_twin() const;
  /// Same topology with every IC layer switched to the given IC variant.
  ModelSpec with_unit(UnitKind kind) const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Cached intermediates of one forward pass, one entry per layer.
struct NetworkCache {
  std::vector<std::any> layers;
};

class Network {
 public:
  /// `input` is the per-example shape. Validates every layer boundary and
  /// throws DimensionError naming the first incompatible layer index.
  Network(Shape input, std::vector<std::unique_ptr<Layer>> layers);

  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const Shape& input_shape() const { return input_; }
  std::size_t classes() const { return shapes_.back()[0]; }
  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }
  /// Per-example shape entering layer i (i == size() gives the logits shape).
  const Shape& shape_at(std::size_t i) const { return shapes_.at(i); }

  Tensor forward(const Tensor& batch) const;
  Tensor forward(const Tensor& batch, NetworkCache& cache) const;
  /// Accumulates gradients into every layer; returns dL/d(input batch).
  Tensor backward(const NetworkCache& cache, const Tensor& grad_logits);

  /// Flat list of parameters named "<index>.<type>.<tensor>".
  std::vector<Param> params();
  std::size_t param_count(bool learnable_only = true);
  void zero_grad();
  /// Invalidates outstanding caches after an optimizer step.
  void mark_updated();
  std::vector<double> kink_args(const NetworkCache& cache) const;

 private:
  Shape input_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<Shape> shapes_;
};

/// Builds the layers of `spec` followed by a linear head with `classes`
/// outputs. A flatten adapter is inserted wherever a vector layer follows a
/// higher-rank output. Parameters are initialized from `seed`.
Network build_network(const ModelSpec& spec, const Shape& input, std::size_t classes,
                      std::uint64_t seed);

/// Parameter container: "ICN1", version, entry count, then per entry the name,
/// shape and row-major float64 payload, all little-endian.
void save_params(Network& net, const std::filesystem::path& path);
void load_params(Network& net, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_params(Network& net);
void decode_params(Network& net, const std::vector<std::uint8_t>& bytes);

}  // namespace icn
