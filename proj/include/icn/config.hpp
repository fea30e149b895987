#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "icn/data.hpp"
#include "icn/network.hpp"
#include "icn/train.hpp"

namespace icn {

struct DatasetConfig {
  std::string name;                           // xor, mnist, yeast, letter, adult
  std::optional<std::filesystem::path> path;  // directory; defaults to <data dir>/<name>
  std::optional<std::size_t> subset;          // first N training examples
};

struct GradcheckConfig {
  std::size_t batch = 4;
  double tolerance = 1e-4;
  double step = 1e-6;
  std::size_t max_coords = 0;  // per parameter tensor; 0 = every coordinate
};

/// Parsed experiment file. Every block is strict: unknown keys, wrong types
/// and out-of-range values raise ConfigError naming the key path.
///
///   {
///     "dataset": {"name": "yeast", "path": "data/yeast", "subset": 1000},
///     "model": {"unit": "standard", "activation": "relu", "inner_bias_init": "zero",
///               "adjust_init": "one",
///               "layers": [{"type": "fc", "units": 32}, {"type": "fc", "units": 16}]},
///     "train": {"epochs": 60, "batch_size": 16, "seed": 7, "repeat_count": 3,
///               "smoothing_window": 5, "rho": 0.9, "epsilon": 1e-6},
///     "gradcheck": {"batch": 4, "tolerance": 1e-4, "step": 1e-6, "max_coords": 0},
///     "output": {"dir": "runs/yeast"}
///   }
struct ExperimentConfig {
  DatasetConfig dataset;
  ModelSpec model;
  TrainConfig train;
  GradcheckConfig gradcheck;
  std::filesystem::path output_dir = "runs";
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Round-trippable JSON rendering of a config (used for the summary echo).
std::string config_to_json(const ExperimentConfig& config, int indent = 2);

/// Per-example input shape and class count of a named dataset, known
/// without reading any files.
struct DatasetShape {
  Shape input;
  std::size_t classes = 0;
};
DatasetShape dataset_shape(const std::string& name);

/// Loads the configured dataset; relative paths resolve against the current
/// directory and a missing path falls back to `data_dir / name`.
Dataset load_dataset(const DatasetConfig& config, const std::filesystem::path& data_dir);

}  // namespace icn
