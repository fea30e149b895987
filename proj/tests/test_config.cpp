#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "icn/config.hpp"
#include "icn/errors.hpp"

using namespace icn;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({
  "dataset": {"name": "yeast"},
  "model": {"layers": [{"type": "fc", "units": 4}]}
})";

std::string key_path_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.key_path();
  }
  ADD_FAILURE() << "expected ConfigError for " << text;
  return "";
}

}  // namespace

TEST(Config, MinimalUsesDefaults) {
  const ExperimentConfig c = parse_config(kMinimal);
  EXPECT_EQ(c.dataset.name, "yeast");
  EXPECT_EQ(c.model.unit, UnitKind::ic_standard);
  EXPECT_EQ(c.model.adjust_init, AdjustInit::one);
  EXPECT_EQ(c.model.inner_bias_init, BiasInit::zero());
  EXPECT_EQ(c.train.batch_size, 32u);
  EXPECT_EQ(c.train.repeat_count, 3u);
  EXPECT_EQ(c.train.smoothing_window, 5u);
  EXPECT_DOUBLE_EQ(c.train.rho, 0.9);
  EXPECT_DOUBLE_EQ(c.train.epsilon, 1e-6);
  EXPECT_DOUBLE_EQ(c.gradcheck.tolerance, 1e-4);
}

TEST(Config, UnknownKeysNameTheirPath) {
  EXPECT_EQ(key_path_of(R"({"dataset": {"name": "yeast"}, "model": {"layers": [{"type": "fc", "units": 4}]}, "extra": 1})"),
            "extra");
  EXPECT_EQ(key_path_of(R"({"dataset": {"name": "yeast", "size": 3}, "model": {"layers": [{"type": "fc", "units": 4}]}})"),
            "dataset.size");
  EXPECT_EQ(key_path_of(R"({"dataset": {"name": "yeast"}, "model": {"layers": [{"type": "fc", "units": 4}, {"type": "fc", "units": 2, "kernel": 3}]}})"),
            "model.layers[1].kernel");
  EXPECT_EQ(key_path_of(R"({"dataset": {"name": "yeast"}, "model": {"layers": [{"type": "fc", "units": 4}]}, "train": {"epoch": 3}})"),
            "train.epoch");
}

TEST(Config, BadValuesNameTheirPath) {
  EXPECT_EQ(key_path_of(R"({"dataset": {"name": "yeast"}, "model": {"layers": []}})"),
            "model.layers");
  EXPECT_EQ(key_path_of(R"({"dataset": {"name": "yeast"}, "model": {"unit": "fancy", "layers": [{"type": "fc", "units": 4}]}})"),
            "model.unit");
  EXPECT_EQ(key_path_of(R"({"dataset": {"name": "yeast"}, "model": {"layers": [{"type": "fc", "units": 0}]}})"),
            "model.layers[0].units");
  EXPECT_EQ(key_path_of(R"({"dataset": {"name": "yeast"}, "model": {"layers": [{"type": "fc", "units": 4}]}, "train": {"batch_size": "8"}})"),
            "train.batch_size");
  EXPECT_EQ(key_path_of(R"({"dataset": {"name": "yeast"}, "model": {"layers": [{"type": "fc", "units": 4}]}, "train": {"rho": 1.5}})"),
            "train.rho");
  EXPECT_EQ(key_path_of(R"({"dataset": {}, "model": {"layers": [{"type": "fc", "units": 4}]}})"),
            "dataset.name");
  EXPECT_EQ(key_path_of("{not json"), "<document>");
}

TEST(Config, LayerKindsAndOverrides) {
  const ExperimentConfig c = parse_config(R"({
    "dataset": {"name": "mnist", "subset": 100},
    "model": {"unit": "basic", "activation": "elu", "alpha": 0.5,
              "inner_bias_init": 0.25, "adjust_init": "uniform",
              "layers": [{"type": "conv", "units": 8, "kernel": 5, "stride": 2, "padding": 0},
                         {"type": "maxpool", "kernel": 2},
                         {"type": "activation", "activation": "tanh"},
                         {"type": "flatten"},
                         {"type": "fc", "units": 10, "unit": "mp"}]}
  })");
  EXPECT_EQ(c.dataset.subset, 100u);
  EXPECT_EQ(c.model.unit, UnitKind::ic_basic);
  EXPECT_EQ(c.model.activation, Activation::elu(0.5));
  EXPECT_EQ(c.model.inner_bias_init, BiasInit::constant(0.25));
  ASSERT_EQ(c.model.layers.size(), 5u);
  EXPECT_EQ(c.model.layers[0], LayerSpec::conv(8, 5, 2, 0));
  EXPECT_EQ(c.model.layers[4].unit, UnitKind::mp);
  EXPECT_EQ(c.model.layers[2].activation, Activation::tanh());
}

TEST(Config, JsonRoundTrip) {
  for (const auto& entry : fs::directory_iterator(ICN_CONFIGS_DIR)) {
    const ExperimentConfig a = load_config(entry.path());
    const ExperimentConfig b = parse_config(config_to_json(a));
    EXPECT_EQ(config_to_json(a), config_to_json(b)) << entry.path();
    EXPECT_EQ(a.model, b.model) << entry.path();
  }
}

TEST(Config, ShippedConfigsBuildNetworks) {
  std::size_t n = 0;
  for (const auto& entry : fs::directory_iterator(ICN_CONFIGS_DIR)) {
    const ExperimentConfig c = load_config(entry.path());
    const DatasetShape shape = dataset_shape(c.dataset.name);
    EXPECT_NO_THROW(build_network(c.model, shape.input, shape.classes, c.train.seed)) << entry.path();
    ++n;
  }
  EXPECT_GE(n, 8u);
}

TEST(Config, DatasetShapesMatchLoadedData) {
  for (const std::string name : {"xor", "yeast", "letter"}) {
    DatasetConfig dc{name, {}, {}};
    const Dataset d = load_dataset(dc, ICN_DATA_DIR);
    const DatasetShape s = dataset_shape(name);
    EXPECT_EQ(d.example_shape(), s.input) << name;
    EXPECT_EQ(d.classes, s.classes) << name;
  }
  DatasetConfig adult{"adult", fs::path(ICN_FIXTURES_DIR) / "adult", {}};
  EXPECT_EQ(load_dataset(adult, ICN_DATA_DIR).example_shape(), dataset_shape("adult").input);
  EXPECT_THROW(dataset_shape("cifar"), ConfigError);
}

TEST(Config, SubsetTruncatesTrainingSplit) {
  DatasetConfig dc{"yeast", {}, 50};
  EXPECT_EQ(load_dataset(dc, ICN_DATA_DIR).train.size(), 50u);
}
