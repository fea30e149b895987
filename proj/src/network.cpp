#include "icn/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "icn/errors.hpp"

namespace icn {

LayerSpec LayerSpec::fc(std::size_t units) {
  LayerSpec s;
  s.type = Type::fc;
  s.units = units;
  return s;
}

LayerSpec LayerSpec::recurrent(std::size_t hidden, std::size_t outputs) {
  LayerSpec s;
  s.type = Type::recurrent;
  s.units = hidden;
  s.outputs = outputs;
  return s;
}

LayerSpec LayerSpec::conv(std::size_t channels, std::size_t kernel, std::size_t stride,
                          std::optional<std::size_t> padding) {
  LayerSpec s;
  s.type = Type::conv;
  s.units = channels;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::maxpool(std::size_t size, std::size_t stride) {
  LayerSpec s;
  s.type = Type::maxpool;
  s.kernel = size;
  s.stride = stride ? stride : size;
  return s;
}

LayerSpec LayerSpec::act(Activation a) {
  LayerSpec s;
  s.type = Type::activation;
  s.activation = a;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.type = Type::flatten;
  return s;
}

std::string to_string(LayerSpec::Type type) {
  switch (type) {
    case LayerSpec::Type::fc: return "fc";
    case LayerSpec::Type::recurrent: return "recurrent";
    case LayerSpec::Type::conv: return "conv";
    case LayerSpec::Type::maxpool: return "maxpool";
    case LayerSpec::Type::activation: return "activation";
    case LayerSpec::Type::flatten: return "flatten";
  }
  return "?";
}

LayerSpec::Type layer_type_from_string(const std::string& name) {
  for (auto t : {LayerSpec::Type::fc, LayerSpec::Type::recurrent, LayerSpec::Type::conv,
                 LayerSpec::Type::maxpool, LayerSpec::Type::activation, LayerSpec::Type::flatten}) {
    if (to_string(t) == name) return t;
  }
  throw std::invalid_argument("unknown layer type '" + name + "'");
}

std::string to_string(AdjustInit init) { return init == AdjustInit::one ? "one" : "uniform"; }

AdjustInit adjust_init_from_string(const std::string& name) {
  if (name == "one") return AdjustInit::one;
  if (name == "uniform") return AdjustInit::uniform;
  throw std::invalid_argument("unknown w' init '" + name + "'");
}

ModelSpec ModelSpec::mp_twin() const { return with_unit(UnitKind::mp); }

ModelSpec ModelSpec::with_unit(UnitKind kind) const {
  ModelSpec twin = *this;
  if (kind == UnitKind::mp || is_ic(twin.unit)) twin.unit = kind;
  for (LayerSpec& l : twin.layers) {
    if (l.unit && (kind == UnitKind::mp || is_ic(*l.unit))) l.unit = kind;
  }
  return twin;
}

// ---------------------------------------------------------------------------

Network::Network(Shape input, std::vector<std::unique_ptr<Layer>> layers)
    : input_(std::move(input)), layers_(std::move(layers)) {
  if (layers_.empty()) throw ContractError("network needs at least one layer");
  shapes_.push_back(input_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      shapes_.push_back(layers_[i]->output_shape(shapes_.back()));
    } catch (const DimensionError& e) {
      throw DimensionError("layer " + std::to_string(i) + " (" + layers_[i]->type() +
                           "): " + e.what());
    }
  }
  if (shapes_.back().size() != 1) {
    throw DimensionError("network output must be a logit vector, got " +
                         shape_str(shapes_.back()));
  }
}

Tensor Network::forward(const Tensor& batch) const {
  NetworkCache scratch;
  return forward(batch, scratch);
}

Tensor Network::forward(const Tensor& batch, NetworkCache& cache) const {
  Shape expected = input_;
  expected.insert(expected.begin(), batch.rank() ? batch.dim(0) : 0);
  if (batch.shape() != expected) {
    throw DimensionError("layer 0 (" + layers_[0]->type() + "): batch " +
                         shape_str(batch.shape()) + " does not match input " + shape_str(input_));
  }
  cache.layers.assign(layers_.size(), {});
  Tensor x = batch;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      x = layers_[i]->forward(x, cache.layers[i]);
    } catch (const DimensionError& e) {
      throw DimensionError("layer " + std::to_string(i) + " (" + layers_[i]->type() +
                           "): " + e.what());
    }
  }
  return x;
}

Tensor Network::backward(const NetworkCache& cache, const Tensor& grad_logits) {
  if (cache.layers.size() != layers_.size()) throw ContractError("network cache does not match");
  Tensor g = grad_logits;
  for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(cache.layers[i], g);
  return g;
}

std::vector<Param> Network::params() {
  std::vector<Param> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (Param p : layers_[i]->params()) {
      p.name = std::to_string(i) + "." + layers_[i]->type() + "." + p.name;
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::size_t Network::param_count(bool learnable_only) {
  std::size_t n = 0;
  for (const Param& p : params())
    if (p.learnable || !learnable_only) n += p.value->size();
  return n;
}

void Network::zero_grad() {
  for (auto& l : layers_) l->zero_grad();
}

void Network::mark_updated() {
  for (auto& l : layers_) l->mark_updated();
}

std::vector<double> Network::kink_args(const NetworkCache& cache) const {
  std::vector<double> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->collect_kinks(cache.layers[i], out);
  return out;
}

// ---------------------------------------------------------------------------

Network build_network(const ModelSpec& spec, const Shape& input, std::size_t classes,
                      std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::unique_ptr<Layer>> layers;
  Shape shape = input;
  auto push = [&](std::unique_ptr<Layer> layer) {
    try {
      shape = layer->output_shape(shape);
    } catch (const DimensionError& e) {
      throw DimensionError("layer " + std::to_string(layers.size()) + " (" + layer->type() +
                           "): " + e.what());
    }
    layers.push_back(std::move(layer));
  };
  auto flatten_if_needed = [&] {
    if (shape.size() > 1) push(std::make_unique<Flatten>());
  };

  for (const LayerSpec& ls : spec.layers) {
    const UnitKind unit = ls.unit.value_or(spec.unit);
    const Activation act = ls.activation.value_or(spec.activation);
    switch (ls.type) {
      case LayerSpec::Type::fc: {
        flatten_if_needed();
        auto l = std::make_unique<FullyConnected>(shape.at(0), ls.units, unit, act);
        l->init(rng);
        push(std::move(l));
        break;
      }
      case LayerSpec::Type::recurrent: {
        if (shape.size() != 2) {
          throw DimensionError("layer " + std::to_string(layers.size()) +
                               " (recurrent): needs [T×n] input, got " + shape_str(shape));
        }
        auto l = std::make_unique<RecurrentCell>(shape[1], ls.units,
                                                 ls.outputs ? ls.outputs : ls.units, unit, act);
        l->init(rng);
        push(std::move(l));
        break;
      }
      case LayerSpec::Type::conv: {
        if (shape.size() != 3) {
          throw DimensionError("layer " + std::to_string(layers.size()) +
                               " (conv): needs [C×H×W] input, got " + shape_str(shape));
        }
        auto l = std::make_unique<Conv2D>(shape[0], ls.units, ls.kernel, ls.stride,
                                          ls.padding.value_or(ls.kernel / 2), unit, act);
        l->init(rng);
        push(std::move(l));
        break;
      }
      case LayerSpec::Type::maxpool:
        push(std::make_unique<MaxPool2D>(ls.kernel, ls.stride ? ls.stride : ls.kernel));
        break;
      case LayerSpec::Type::activation:
        push(std::make_unique<ActivationLayer>(act));
        break;
      case LayerSpec::Type::flatten:
        push(std::make_unique<Flatten>());
        break;
    }
  }
  flatten_if_needed();
  auto head = std::make_unique<Linear>(shape.at(0), classes);
  head->init(rng);
  push(std::move(head));

  // Branch parameters draw from their own streams so the shared weights stay
  // identical to the MP twin's.
  Rng bias_rng(derive_seed(seed, "inner_bias"));
  Rng adjust_rng(derive_seed(seed, "adjust"));
  auto init_branch = [&](Tensor& b1, Tensor& adjust, UnitKind kind, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    switch (spec.inner_bias_init.kind) {
      case BiasInit::Kind::zero: break;
      case BiasInit::Kind::constant: b1.fill(spec.inner_bias_init.value); break;
      case BiasInit::Kind::uniform:
        for (double& v : b1.values()) v = bias_rng.uniform(-bound, bound);
        break;
    }
    if (kind == UnitKind::ic_standard && spec.adjust_init == AdjustInit::uniform) {
      for (double& v : adjust.values()) v = adjust_rng.uniform(-bound, bound);
    }
  };
  for (auto& layer : layers) {
    if (!layer->unit() || !is_ic(*layer->unit())) continue;
    const UnitKind kind = *layer->unit();
    if (auto* fc = dynamic_cast<FullyConnected*>(layer.get())) {
      init_branch(fc->inner_bias, fc->adjust, kind, fc->inputs());
    } else if (auto* rnn = dynamic_cast<RecurrentCell*>(layer.get())) {
      init_branch(rnn->inner_bias, rnn->adjust, kind, rnn->inputs());
    } else if (auto* conv = dynamic_cast<Conv2D*>(layer.get())) {
      init_branch(conv->inner_bias, conv->adjust, kind,
                  conv->in_channels() * conv->kernel() * conv->kernel());
    }
  }
  return Network(input, std::move(layers));
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'I', 'C', 'N', '1'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return std::bit_cast<double>(v);
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(bytes_.begin() + pos_, bytes_.begin() + pos_ + n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("parameter file truncated", pos_);
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_params(Network& net) {
  const std::vector<Param> params = net.params();
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const Param& p : params) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    put_u32(out, static_cast<std::uint32_t>(p.value->rank()));
    for (std::size_t d : p.value->shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : p.value->values()) put_f64(out, v);
  }
  return out;
}

void decode_params(Network& net, const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.str(4) != std::string(kMagic, 4)) throw FormatError("bad parameter file magic", 0);
  if (const auto version = r.u32(); version != kFormatVersion) {
    throw FormatError("unsupported parameter file version " + std::to_string(version), 4);
  }
  std::map<std::string, Tensor*> by_name;
  for (const Param& p : net.params()) by_name[p.name] = p.value;
  const std::uint32_t count = r.u32();
  if (count != by_name.size()) {
    throw FormatError("parameter file has " + std::to_string(count) + " entries, network has " +
                          std::to_string(by_name.size()),
                      8);
  }
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::size_t at = r.pos();
    const std::string name = r.str(r.u32());
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("unknown parameter '" + name + "'", at);
    Shape shape(r.u32());
    for (auto& d : shape) d = r.u32();
    if (shape != it->second->shape()) {
      throw FormatError("parameter '" + name + "' has shape " + shape_str(shape) + ", expected " +
                            shape_str(it->second->shape()),
                        at);
    }
    for (double& v : it->second->values()) v = r.f64();
  }
  if (!r.done()) throw FormatError("trailing bytes in parameter file", r.pos());
  net.mark_updated();
}

void save_params(Network& net, const std::filesystem::path& path) {
  const auto bytes = encode_params(net);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void load_params(Network& net, const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  decode_params(net, bytes);
}

}  // namespace icn
