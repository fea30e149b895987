#include <gtest/gtest.h>

#include <utility>

#include "icn/cost.hpp"
#include "icn/errors.hpp"

using namespace icn;

namespace {

ModelSpec fc_spec(std::vector<std::size_t> widths, UnitKind unit = UnitKind::ic_standard) {
  ModelSpec spec;
  spec.unit = unit;
  for (std::size_t w : widths) spec.layers.push_back(LayerSpec::fc(w));
  return spec;
}

}  // namespace

TEST(Cost, SingleLayerWorkedExample) {
  // 8 -> 32: MP 288 params, standard IC 352, overhead 64 / 256 = 2/8.
  const CostComparison c = compare_with_twin(fc_spec({32}), {8}, 10);
  EXPECT_EQ(c.mp.layers[0].params, 288u);
  EXPECT_EQ(c.ic.layers[0].params, 352u);
  EXPECT_DOUBLE_EQ(c.layer_param_overhead(0), 0.25);
}

TEST(Cost, ParamOverheadIsTwoOverFanIn) {
  for (std::size_t n : {2u, 8u, 13u, 100u, 784u}) {
    for (std::size_t m : {1u, 16u, 57u}) {
      const CostComparison c = compare_with_twin(fc_spec({m}), {n}, 3);
      EXPECT_DOUBLE_EQ(c.layer_param_overhead(0), 2.0 / static_cast<double>(n));
      const CostComparison b = compare_with_twin(fc_spec({m}, UnitKind::ic_basic), {n}, 3);
      EXPECT_DOUBLE_EQ(b.layer_param_overhead(0), 1.0 / static_cast<double>(n));
    }
  }
}

TEST(Cost, MacOverheadMatchesFanInPlusFanOut) {
  for (std::size_t n : {8u, 32u, 256u}) {
    for (std::size_t m : {16u, 64u}) {
      const CostComparison c = compare_with_twin(fc_spec({m}), {n}, 3);
      const double expect = 1.0 / static_cast<double>(n) + 1.0 / static_cast<double>(m);
      EXPECT_NEAR(c.layer_mac_overhead(0), expect, 0.1 * expect);
    }
  }
}

TEST(Cost, ConvMacOverheadIsExact) {
  // Extra MACs per position: one shared window sum (k^2 C') plus C scalings of it.
  for (std::size_t cin : {1u, 8u, 64u}) {
    for (std::size_t k : {1u, 3u}) {
      for (std::size_t cout : {4u, 32u, 64u}) {
        ModelSpec spec;
        spec.layers = {LayerSpec::conv(cout, k, 1)};
        const CostComparison c = compare_with_twin(spec, {cin, 6, 6}, 10);
        const double window = static_cast<double>(k * k * cin);
        EXPECT_DOUBLE_EQ(c.layer_mac_overhead(0), 1.0 / static_cast<double>(cout) + 1.0 / window);
      }
    }
  }
}

TEST(Cost, ConvMacOverheadApproachesOneOverChannels) {
  // Within 10% of 1/C once the window is at least ten times the channel count.
  for (auto [cin, cout] : {std::pair<std::size_t, std::size_t>{64, 32}, {128, 32}, {128, 64}}) {
    {
      ModelSpec spec;
      spec.layers = {LayerSpec::conv(cout, 3, 1)};
      const CostComparison c = compare_with_twin(spec, {cin, 8, 8}, 10);
      const double expect = 1.0 / static_cast<double>(cout);
      EXPECT_NEAR(c.layer_mac_overhead(0), expect, 0.1 * expect) << cin << " " << cout;
    }
  }
}

TEST(Cost, YeastTotals) {
  const CostComparison c = compare_with_twin(fc_spec({32, 16}), {8}, 10);
  EXPECT_EQ(c.mp.macs, 928u);
  EXPECT_EQ(c.mp.params, 986u);
  EXPECT_EQ(c.ic.macs, 1016u);
  EXPECT_EQ(c.ic.params, 1082u);
  const CostReport wide = count_macs(build_network(fc_spec({100, 50}, UnitKind::mp), {8}, 10, 1),
                                     {8});
  EXPECT_EQ(wide.macs, 6300u);
}

TEST(Cost, ParameterCountMatchesNetwork) {
  ModelSpec spec;
  spec.unit = UnitKind::ic_basic;
  spec.layers = {LayerSpec::conv(4, 3, 1), LayerSpec::maxpool(2), LayerSpec::fc(7)};
  Network net = build_network(spec, {2, 6, 6}, 3, 1);
  EXPECT_EQ(count_params(net).params, net.param_count(true));
}

TEST(Cost, TextAndCsv) {
  const CostComparison c = compare_with_twin(fc_spec({4}), {3}, 2);
  const std::string csv = to_csv(c.ic);
  EXPECT_EQ(csv.rfind("index,layer,unit,params,macs,weights\n", 0), 0u);
  EXPECT_NE(csv.find("total,,,"), std::string::npos);
  EXPECT_NE(to_text(c.ic).find("standard"), std::string::npos);
}

TEST(Cost, EmptyReportAndMismatch) {
  const CostReport empty;
  EXPECT_EQ(empty.kilo_params(), 0.0);
  EXPECT_EQ(to_csv(empty), "index,layer,unit,params,macs,weights\ntotal,,,0,0,0\n");
  Network net = build_network(fc_spec({4}), {3}, 2, 1);
  EXPECT_THROW(count_macs(net, {4}), DimensionError);
}
