#include "icn/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "icn/errors.hpp"

namespace icn {

namespace {

using json = nlohmann::json;

// Reads the keys of one JSON object and rejects any it was not asked about.
class Block {
 public:
  Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* v = find(key);
    if (!v) throw ConfigError(key_path(key), "missing required key");
    return *v;
  }

  std::optional<std::string> string(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) throw ConfigError(key_path(key), "expected a string");
    return v->get<std::string>();
  }

  std::optional<std::uint64_t> count(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
      throw ConfigError(key_path(key), "expected a non-negative integer");
    }
    return v->get<std::uint64_t>();
  }

  std::optional<double> number(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_number()) throw ConfigError(key_path(key), "expected a number");
    return v->get<double>();
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(key_path(key), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
auto parse_as(const std::string& key_path, const std::string& value, F&& parse) {
  try {
    return parse(value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key_path, e.what());
  }
}

Activation parse_activation(Block& b, const std::string& key) {
  const auto name = b.string(key);
  return Activation{parse_as(b.key_path(key), *name, activation_from_string)};
}

LayerSpec parse_layer(const json& j, const std::string& path) {
  Block b(j, path);
  const auto type_name = b.string("type");
  if (!type_name) throw ConfigError(b.key_path("type"), "missing required key");
  LayerSpec l;
  l.type = parse_as(b.key_path("type"), *type_name, layer_type_from_string);

  auto positive = [&](const std::string& key, std::size_t& out, bool required) {
    const auto v = b.count(key);
    if (!v) {
      if (required) throw ConfigError(b.key_path(key), "missing required key");
      return;
    }
    if (*v == 0) throw ConfigError(b.key_path(key), "must be at least 1");
    out = *v;
  };
  auto unit = [&] {
    if (const auto u = b.string("unit"))
      l.unit = parse_as(b.key_path("unit"), *u, unit_kind_from_string);
  };
  auto activation = [&] {
    if (b.find("activation")) {
      l.activation = parse_activation(b, "activation");
      if (const auto a = b.number("alpha")) l.activation->alpha = *a;
    }
  };

  switch (l.type) {
    case LayerSpec::Type::fc:
      positive("units", l.units, true);
      unit();
      activation();
      break;
    case LayerSpec::Type::recurrent:
      positive("units", l.units, true);
      positive("outputs", l.outputs, false);
      unit();
      activation();
      break;
    case LayerSpec::Type::conv:
      positive("units", l.units, true);
      positive("kernel", l.kernel, false);
      positive("stride", l.stride, false);
      if (const auto p = b.count("padding")) l.padding = *p;
      unit();
      activation();
      break;
    case LayerSpec::Type::maxpool:
      positive("kernel", l.kernel, false);
      l.stride = 0;
      positive("stride", l.stride, false);
      if (l.stride == 0) l.stride = l.kernel;
      break;
    case LayerSpec::Type::activation:
      if (!b.find("activation")) throw ConfigError(b.key_path("activation"), "missing required key");
      l.activation = parse_activation(b, "activation");
      if (const auto a = b.number("alpha")) l.activation->alpha = *a;
      break;
    case LayerSpec::Type::flatten:
      break;
  }
  b.finish();
  return l;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", e.what());
  }
  Block top(root, "");
  ExperimentConfig cfg;

  {
    Block b(top.require("dataset"), "dataset");
    cfg.dataset.name = b.string("name").value_or("");
    if (cfg.dataset.name.empty()) throw ConfigError("dataset.name", "missing required key");
    static const std::set<std::string> known = {"xor", "mnist", "yeast", "letter", "adult"};
    if (!known.count(cfg.dataset.name)) {
      throw ConfigError("dataset.name", "unknown dataset '" + cfg.dataset.name + "'");
    }
    if (const auto p = b.string("path")) cfg.dataset.path = *p;
    if (const auto s = b.count("subset")) {
      if (*s == 0) throw ConfigError("dataset.subset", "must be at least 1");
      cfg.dataset.subset = *s;
    }
    b.finish();
  }

  {
    Block b(top.require("model"), "model");
    if (const auto u = b.string("unit"))
      cfg.model.unit = parse_as("model.unit", *u, unit_kind_from_string);
    if (b.find("activation")) cfg.model.activation = parse_activation(b, "activation");
    if (const auto a = b.number("alpha")) cfg.model.activation.alpha = *a;
    if (const json* v = b.find("inner_bias_init")) {
      if (v->is_number()) {
        cfg.model.inner_bias_init = BiasInit::constant(v->get<double>());
      } else if (v->is_string() && *v == "zero") {
        cfg.model.inner_bias_init = BiasInit::zero();
      } else if (v->is_string() && *v == "uniform") {
        cfg.model.inner_bias_init = BiasInit::uniform();
      } else {
        throw ConfigError("model.inner_bias_init", "expected \"zero\", \"uniform\" or a number");
      }
    }
    if (const auto v = b.string("adjust_init"))
      cfg.model.adjust_init = parse_as("model.adjust_init", *v, adjust_init_from_string);
    const json& layers = b.require("layers");
    if (!layers.is_array()) throw ConfigError("model.layers", "expected an array");
    if (layers.empty()) throw ConfigError("model.layers", "model needs at least one layer");
    for (std::size_t i = 0; i < layers.size(); ++i)
      cfg.model.layers.push_back(parse_layer(layers[i], "model.layers[" + std::to_string(i) + "]"));
    b.finish();
  }

  if (const json* t = top.find("train")) {
    Block b(*t, "train");
    TrainConfig& tc = cfg.train;
    if (const auto v = b.count("epochs")) tc.epochs = *v;
    if (const auto v = b.count("batch_size")) tc.batch_size = *v;
    if (const auto v = b.count("seed")) tc.seed = *v;
    if (const auto v = b.count("repeat_count")) tc.repeat_count = *v;
    if (const auto v = b.count("smoothing_window")) tc.smoothing_window = *v;
    if (const auto v = b.number("rho")) tc.rho = *v;
    if (const auto v = b.number("epsilon")) tc.epsilon = *v;
    b.finish();
    if (tc.batch_size == 0) throw ConfigError("train.batch_size", "must be at least 1");
    if (tc.repeat_count == 0) throw ConfigError("train.repeat_count", "must be at least 1");
    if (tc.smoothing_window == 0) throw ConfigError("train.smoothing_window", "must be at least 1");
    if (!(tc.rho >= 0.0 && tc.rho < 1.0)) throw ConfigError("train.rho", "must be in [0, 1)");
    if (!(tc.epsilon > 0.0)) throw ConfigError("train.epsilon", "must be positive");
  }

  if (const json* g = top.find("gradcheck")) {
    Block b(*g, "gradcheck");
    GradcheckConfig& gc = cfg.gradcheck;
    if (const auto v = b.count("batch")) gc.batch = *v;
    if (const auto v = b.number("tolerance")) gc.tolerance = *v;
    if (const auto v = b.number("step")) gc.step = *v;
    if (const auto v = b.count("max_coords")) gc.max_coords = *v;
    if (gc.batch == 0) throw ConfigError("gradcheck.batch", "must be at least 1");
    if (!(gc.step > 0.0)) throw ConfigError("gradcheck.step", "must be positive");
    if (!(gc.tolerance > 0.0)) throw ConfigError("gradcheck.tolerance", "must be positive");
    b.finish();
  }

  if (const json* o = top.find("output")) {
    Block b(*o, "output");
    if (const auto d = b.string("dir")) cfg.output_dir = *d;
    b.finish();
  }

  top.finish();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(path.string(), "cannot open config file");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg, int indent) {
  auto activation = [](json& j, Activation a) {
    j["activation"] = to_string(a.kind);
    if (a.kind == ActivationKind::elu) j["alpha"] = a.alpha;
  };

  json root;
  json& ds = root["dataset"];
  ds["name"] = cfg.dataset.name;
  if (cfg.dataset.path) ds["path"] = cfg.dataset.path->string();
  if (cfg.dataset.subset) ds["subset"] = *cfg.dataset.subset;

  json& model = root["model"];
  model["unit"] = to_string(cfg.model.unit);
  activation(model, cfg.model.activation);
  switch (cfg.model.inner_bias_init.kind) {
    case BiasInit::Kind::zero: model["inner_bias_init"] = "zero"; break;
    case BiasInit::Kind::uniform: model["inner_bias_init"] = "uniform"; break;
    case BiasInit::Kind::constant: model["inner_bias_init"] = cfg.model.inner_bias_init.value; break;
  }
  model["adjust_init"] = to_string(cfg.model.adjust_init);
  model["layers"] = json::array();
  for (const LayerSpec& l : cfg.model.layers) {
    json j;
    j["type"] = to_string(l.type);
    switch (l.type) {
      case LayerSpec::Type::conv:
        j["kernel"] = l.kernel;
        j["stride"] = l.stride;
        if (l.padding) j["padding"] = *l.padding;
        [[fallthrough]];
      case LayerSpec::Type::fc:
      case LayerSpec::Type::recurrent:
        j["units"] = l.units;
        if (l.type == LayerSpec::Type::recurrent && l.outputs) j["outputs"] = l.outputs;
        if (l.unit) j["unit"] = to_string(*l.unit);
        if (l.activation) activation(j, *l.activation);
        break;
      case LayerSpec::Type::maxpool:
        j["kernel"] = l.kernel;
        j["stride"] = l.stride;
        break;
      case LayerSpec::Type::activation:
        activation(j, *l.activation);
        break;
      case LayerSpec::Type::flatten:
        break;
    }
    model["layers"].push_back(j);
  }

  json& t = root["train"];
  t["epochs"] = cfg.train.epochs;
  t["batch_size"] = cfg.train.batch_size;
  t["seed"] = cfg.train.seed;
  t["repeat_count"] = cfg.train.repeat_count;
  t["smoothing_window"] = cfg.train.smoothing_window;
  t["rho"] = cfg.train.rho;
  t["epsilon"] = cfg.train.epsilon;

  json& g = root["gradcheck"];
  g["batch"] = cfg.gradcheck.batch;
  g["tolerance"] = cfg.gradcheck.tolerance;
  g["step"] = cfg.gradcheck.step;
  g["max_coords"] = cfg.gradcheck.max_coords;

  root["output"]["dir"] = cfg.output_dir.string();
  return root.dump(indent);
}

DatasetShape dataset_shape(const std::string& name) {
  if (name == "xor") return {{2}, 2};
  if (name == "mnist") return {{1, 28, 28}, 10};
  if (name == "yeast") return {{8}, 10};
  if (name == "letter") return {{16}, 26};
  if (name == "adult") return {{113}, 2};
  throw ConfigError("dataset.name", "unknown dataset '" + name + "'");
}

Dataset load_dataset(const DatasetConfig& config, const std::filesystem::path& data_dir) {
  const std::filesystem::path dir = config.path.value_or(data_dir / config.name);
  Dataset d;
  if (config.name == "xor") {
    d = make_xor();
  } else if (config.name == "mnist") {
    return load_mnist_idx(MnistPaths::in_directory(dir), config.subset);
  } else {
    const UciName name = uci_name_from_string(config.name);
    d = load_uci_csv(name, UciPaths::in_directory(name, dir));
  }
  if (config.subset && *config.subset < d.train.size()) {
    std::vector<std::size_t> first(*config.subset);
    for (std::size_t i = 0; i < first.size(); ++i) first[i] = i;
    d.train = take(d.train, first);
  }
  return d;
}

}  // namespace icn
