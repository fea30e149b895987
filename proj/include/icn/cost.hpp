#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "icn/network.hpp"

namespace icn {

/// MACs count multiply-accumulates only; additions, comparisons and
/// activations are free. Parameters count learnable scalars, so the fixed w'
/// of basic IC units is excluded.
struct CostEntry {
  std::size_t index = 0;
  std::string layer;
  std::string unit;  // "mp", "basic", "standard" or "-" for parameter-free layers
  std::size_t params = 0;
  std::size_t macs = 0;
  std::size_t weights = 0;  // multiplicative weights, the base of the overhead ratios
};

struct CostReport {
  std::vector<CostEntry> layers;
  std::size_t params = 0;
  std::size_t macs = 0;
  std::size_t weights = 0;

  double kilo_params() const { return static_cast<double>(params) / 1000.0; }
  double kilo_macs() const { return static_cast<double>(macs) / 1000.0; }
};

/// Per-layer and total parameter and MAC counts for one forward pass of a
/// single example shaped like net.input_shape().
CostReport count_params(const Network& net);
CostReport count_macs(const Network& net, const Shape& input_shape);

/// An IC network side by side with its MP twin. Parameter overhead is the
/// number of extra parameters per MP weight, so an FC layer adds exactly 2/n
/// (standard) or 1/n (basic). MAC overhead is extra MACs per MP MAC, which is
/// 1/n + 1/m for a standard FC layer.
struct CostComparison {
  CostReport ic;
  CostReport mp;

  double param_overhead() const;
  double mac_overhead() const;
  /// Same ratios for layer `index` alone.
  double layer_param_overhead(std::size_t index) const;
  double layer_mac_overhead(std::size_t index) const;
};

CostComparison compare_with_twin(const ModelSpec& spec, const Shape& input, std::size_t classes);

/// Aligned text table with totals.
std::string to_text(const CostReport& report);
/// index,layer,unit,params,macs,weights rows followed by a "total" row.
std::string to_csv(const CostReport& report);

}  // namespace icn
