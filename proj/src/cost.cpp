#include "icn/cost.hpp"

#include <cstdio>

#include "icn/errors.hpp"

namespace icn {

CostReport count_macs(const Network& net, const Shape& input_shape) {
  if (input_shape != net.input_shape()) {
    throw DimensionError("cost: input " + shape_str(input_shape) + " does not match network " +
                         shape_str(net.input_shape()));
  }
  CostReport report;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const Layer& layer = net.layer(i);
    const LayerCost c = layer.cost(net.shape_at(i));
    const auto unit = layer.unit();
    report.layers.push_back({i, c.name, unit ? to_string(*unit) : "-", c.params, c.macs, c.weights});
    report.params += c.params;
    report.macs += c.macs;
    report.weights += c.weights;
  }
  return report;
}

CostReport count_params(const Network& net) { return count_macs(net, net.input_shape()); }

namespace {

double ratio(std::size_t ic, std::size_t mp, std::size_t base, const char* what) {
  if (base == 0) throw ContractError(std::string("cost: MP twin has no ") + what);
  return (static_cast<double>(ic) - static_cast<double>(mp)) / static_cast<double>(base);
}

}  // namespace

double CostComparison::param_overhead() const {
  return ratio(ic.params, mp.params, mp.weights, "weights");
}

double CostComparison::mac_overhead() const { return ratio(ic.macs, mp.macs, mp.macs, "MACs"); }

double CostComparison::layer_param_overhead(std::size_t index) const {
  const CostEntry &a = ic.layers.at(index), &b = mp.layers.at(index);
  return ratio(a.params, b.params, b.weights, "weights");
}

double CostComparison::layer_mac_overhead(std::size_t index) const {
  const CostEntry &a = ic.layers.at(index), &b = mp.layers.at(index);
  return ratio(a.macs, b.macs, b.macs, "MACs");
}

CostComparison compare_with_twin(const ModelSpec& spec, const Shape& input, std::size_t classes) {
  const Network ic = build_network(spec, input, classes, 0);
  const Network mp = build_network(spec.mp_twin(), input, classes, 0);
  return {count_params(ic), count_params(mp)};
}

std::string to_text(const CostReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-5s %-11s %-9s %12s %12s\n", "index", "layer", "unit",
                "params", "macs");
  out += line;
  for (const CostEntry& e : report.layers) {
    std::snprintf(line, sizeof line, "%-5zu %-11s %-9s %12zu %12zu\n", e.index, e.layer.c_str(),
                  e.unit.c_str(), e.params, e.macs);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-5s %-11s %-9s %12zu %12zu\n", "total", "", "", report.params,
                report.macs);
  out += line;
  return out;
}

std::string to_csv(const CostReport& report) {
  std::string out = "index,layer,unit,params,macs,weights\n";
  for (const CostEntry& e : report.layers) {
    out += std::to_string(e.index) + "," + e.layer + "," + e.unit + "," +
           std::to_string(e.params) + "," + std::to_string(e.macs) + "," +
           std::to_string(e.weights) + "\n";
  }
  out += "total,,," + std::to_string(report.params) + "," + std::to_string(report.macs) + "," +
         std::to_string(report.weights) + "\n";
  return out;
}

}  // namespace icn
