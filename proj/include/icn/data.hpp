#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "icn/tensor.hpp"

namespace icn {

enum class FeatureLayout { vector, image, sequence };

/// Per-feature affine preprocessing fitted on the training split.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;  // population std, or 1 for constant features
};

/// Labeled examples; features carry the example index on axis 0.
struct Split {
  Tensor features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

struct Dataset {
  std::string name;
  Split train;
  Split test;
  FeatureLayout layout = FeatureLayout::vector;
  std::size_t classes = 0;
  std::optional<Standardization> standardization;

  /// Per-example feature shape (features.shape() without the leading axis).
  Shape example_shape() const;
  /// Throws ContractError if labels or layouts are inconsistent.
  void validate() const;
};

/// The four XOR points; train and test are the same set.
Dataset make_xor();

struct MnistPaths {
  std::filesystem::path train_images, train_labels, test_images, test_labels;

  /// Standard file names inside `dir`, preferring gzip-compressed copies.
  static MnistPaths in_directory(const std::filesystem::path& dir);
};

/// Parses big-endian IDX files (raw or gzip-compressed). Pixels are scaled
/// to [0, 1]; `train_subset` keeps the first N training examples.
Dataset load_mnist_idx(const MnistPaths& paths, std::optional<std::size_t> train_subset = {});

/// Decodes one IDX image/label payload already in memory (big-endian header).
Tensor parse_idx_images(const std::vector<std::uint8_t>& bytes);
std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& bytes);

enum class UciName { yeast, letter, adult };

UciName uci_name_from_string(const std::string& name);
std::string to_string(UciName name);

struct UciPaths {
  std::filesystem::path data;  // yeast.data, letter-recognition.data, adult.data
  std::filesystem::path test;  // adult.test only

  static UciPaths in_directory(UciName name, const std::filesystem::path& dir);
};

/// Seed of the shipped stratified YEAST split.
inline constexpr std::uint64_t kYeastSplitSeed = 1038446;

/// Loads a UCI dataset from its published layout, splits it as the
/// benchmarks do (YEAST 70/30 stratified, LETTER first 16000 / last 4000,
/// ADULT official files), one-hot encodes ADULT's categorical fields and
/// standardizes every feature with training-split statistics.
Dataset load_uci_csv(UciName name, const UciPaths& paths, std::uint64_t split_seed = kYeastSplitSeed);

/// Pools train and test, then draws a seeded stratified split with
/// floor(fraction * N) training examples apportioned to classes by largest
/// remainder. Every class needs at least two examples.
Dataset split(const Dataset& dataset, double fraction, std::uint64_t seed);

/// Fits mean/std on the training split and applies them to both splits.
void standardize(Dataset& dataset);

/// Train examples whose indices are listed, as a batch-ready split.
Split take(const Split& split, std::span<const std::size_t> indices);

}  // namespace icn
