#include <gtest/gtest.h>

#include <algorithm>
#include <any>
#include <cmath>
#include <filesystem>
#include <functional>
#include <vector>

#include "icn/errors.hpp"
#include "icn/ic_core.hpp"
#include "icn/layers.hpp"
#include "icn/network.hpp"
#include "icn/rng.hpp"

using namespace icn;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Loss sum(y * r) for a fixed random r; its gradient w.r.t. y is r.
double probe_loss(const Layer& layer, const Tensor& x, const Tensor& r) {
  std::any cache;
  const Tensor y = layer.forward(x, cache);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

// Central differences on every parameter coordinate and every input entry.
void expect_layer_grads(Layer& layer, Tensor x, double tol = 1e-6) {
  Rng rng(99);
  std::any cache;
  const Tensor y = layer.forward(x, cache);
  const Tensor r = random_tensor(y.shape(), rng);
  layer.zero_grad();
  const Tensor gx = layer.backward(cache, r);

  const double h = 1e-6;
  auto check = [&](Tensor& t, const Tensor& g, const std::string& name) {
    ASSERT_EQ(t.shape(), g.shape()) << name;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double keep = t[i];
      t[i] = keep + h;
      const double up = probe_loss(layer, x, r);
      t[i] = keep - h;
      const double down = probe_loss(layer, x, r);
      t[i] = keep;
      EXPECT_NEAR(g[i], (up - down) / (2 * h), tol) << name << "[" << i << "]";
    }
  };
  for (Param& p : layer.params()) check(*p.value, *p.grad, p.name);
  check(x, gx, "input");
}

FullyConnected make_fc(std::size_t n, std::size_t m, UnitKind kind, Activation act,
                       std::uint64_t seed) {
  Rng rng(seed);
  FullyConnected fc(n, m, kind, act);
  fc.init(rng);
  // Move the branch parameters off their init so the branch is exercised.
  for (double& v : fc.adjust.values()) v = rng.uniform(-0.5, 1.5);
  for (double& v : fc.inner_bias.values()) v = rng.uniform(-0.3, 0.3);
  for (double& v : fc.outer_bias.values()) v = rng.uniform(-0.3, 0.3);
  if (kind == UnitKind::ic_basic) fc.adjust.fill(1.0);
  return fc;
}

const UnitKind kKinds[] = {UnitKind::mp, UnitKind::ic_basic, UnitKind::ic_standard};
const Activation kSmooth[] = {Activation::tanh(), Activation::elu(), Activation::sigmoid()};

}  // namespace

TEST(FullyConnected, ForwardMatchesScalarUnit) {
  Rng rng(1);
  const FullyConnected fc = make_fc(5, 3, UnitKind::ic_standard, Activation::tanh(), 7);
  const Tensor x = random_tensor({4, 5}, rng);
  std::any cache;
  const Tensor y = fc.forward(x, cache);
  for (std::size_t b = 0; b < 4; ++b) {
    const std::vector<double> xb(x.data() + b * 5, x.data() + b * 5 + 5);
    for (std::size_t j = 0; j < 3; ++j) {
      std::vector<double> w(5);
      for (std::size_t i = 0; i < 5; ++i) w[i] = fc.weight(i, j);
      const ICParams p =
          ICParams::standard(w, fc.adjust[j], fc.inner_bias[j], fc.outer_bias[j]);
      EXPECT_NEAR(y(b, j), std::tanh(ic_preactivation(xb, p)), 1e-14);
    }
  }
}

TEST(FullyConnected, MpHasNoBranch) {
  Rng rng(2);
  FullyConnected fc(3, 2, UnitKind::mp, Activation::identity());
  fc.init(rng);
  const Tensor x = random_tensor({2, 3}, rng);
  std::any cache;
  const Tensor y = fc.forward(x, cache);
  const Tensor ref = matmul(x, fc.weight);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-15);
}

TEST(FullyConnected, GradientsMatchFiniteDifferences) {
  for (UnitKind kind : kKinds) {
    for (Activation act : kSmooth) {
      FullyConnected fc = make_fc(4, 3, kind, act, 3);
      Rng rng(4);
      expect_layer_grads(fc, random_tensor({5, 4}, rng));
    }
  }
}

TEST(FullyConnected, BasicAdjustWeightIsFrozen) {
  FullyConnected fc(3, 2, UnitKind::ic_basic, Activation::relu());
  bool seen = false;
  for (const Param& p : fc.params()) {
    if (p.name == "adjust") {
      seen = true;
      EXPECT_FALSE(p.learnable);
    }
  }
  EXPECT_TRUE(seen);
  FullyConnected mp(3, 2, UnitKind::mp, Activation::relu());
  for (const Param& p : mp.params()) EXPECT_NE(p.name, "adjust");
}

TEST(FullyConnected, StaleCacheIsRejected) {
  Rng rng(5);
  FullyConnected fc = make_fc(3, 2, UnitKind::ic_standard, Activation::tanh(), 5);
  FullyConnected other = make_fc(3, 2, UnitKind::ic_standard, Activation::tanh(), 5);
  std::any cache;
  const Tensor y = fc.forward(random_tensor({2, 3}, rng), cache);
  EXPECT_THROW(other.backward(cache, y), ContractError);
  fc.mark_updated();
  EXPECT_THROW(fc.backward(cache, y), ContractError);
  EXPECT_THROW(fc.forward(Tensor({2, 4}), cache), DimensionError);
}

TEST(Recurrent, ForwardMatchesUnrolledScalarUnits) {
  Rng rng(6);
  RecurrentCell cell(3, 4, 2, UnitKind::ic_standard, Activation::tanh());
  cell.init(rng);
  for (double& v : cell.adjust.values()) v = rng.uniform(-0.5, 1.5);
  for (double& v : cell.inner_bias.values()) v = rng.uniform(-0.3, 0.3);
  const Tensor x = random_tensor({2, 3, 3}, rng);  // [B×T×n]
  const auto [y, cache] = cell.forward_sequence(x);

  for (std::size_t b = 0; b < 2; ++b) {
    std::vector<double> h(4, 0.0);
    for (std::size_t t = 0; t < 3; ++t) {
      const std::vector<double> xt(x.data() + (b * 3 + t) * 3, x.data() + (b * 3 + t) * 3 + 3);
      std::vector<double> next(4);
      for (std::size_t j = 0; j < 4; ++j) {
        std::vector<double> w(3);
        for (std::size_t i = 0; i < 3; ++i) w[i] = cell.w_xh(i, j);
        double rec = 0.0;
        for (std::size_t i = 0; i < 4; ++i) rec += h[i] * cell.w_hh(i, j);
        const ICParams p = ICParams::standard(w, cell.adjust[j], cell.inner_bias[j],
                                              cell.outer_bias[j]);
        next[j] = std::tanh(ic_preactivation(xt, p) + rec);
      }
      h = next;
    }
    for (std::size_t k = 0; k < 2; ++k) {
      double out = 0.0;
      for (std::size_t j = 0; j < 4; ++j) out += h[j] * cell.w_hy(j, k);
      EXPECT_NEAR(y(b, k), out, 1e-13);
    }
  }
}

TEST(Recurrent, BpttMatchesFiniteDifferences) {
  for (UnitKind kind : kKinds) {
    for (Activation act : kSmooth) {
      Rng rng(7);
      RecurrentCell cell(3, 4, 2, kind, act);
      cell.init(rng);
      if (kind == UnitKind::ic_standard)
        for (double& v : cell.adjust.values()) v = rng.uniform(-0.5, 1.5);
      if (is_ic(kind))
        for (double& v : cell.inner_bias.values()) v = rng.uniform(-0.3, 0.3);
      expect_layer_grads(cell, random_tensor({2, 3, 3}, rng));
    }
  }
}

TEST(Recurrent, RejectsEmptySequence) {
  RecurrentCell cell(3, 2, 2, UnitKind::mp, Activation::tanh());
  EXPECT_THROW(cell.forward_sequence(Tensor({1, 0, 3})), ContractError);
}

TEST(Conv2D, ForwardMatchesDirectLoops) {
  for (UnitKind kind : kKinds) {
    Rng rng(8);
    const std::size_t cin = 2, cout = 3, k = 3, stride = 2, pad = 1, H = 5, W = 6;
    Conv2D conv(cin, cout, k, stride, pad, kind, Activation::elu());
    conv.init(rng);
    if (kind == UnitKind::ic_standard)
      for (double& v : conv.adjust.values()) v = rng.uniform(-0.5, 1.5);
    if (is_ic(kind))
      for (double& v : conv.inner_bias.values()) v = rng.uniform(-0.3, 0.3);
    const Tensor x = random_tensor({2, cin, H, W}, rng);
    std::any cache;
    const Tensor y = conv.forward(x, cache);
    const std::size_t oh = (H + 2 * pad - k) / stride + 1, ow = (W + 2 * pad - k) / stride + 1;
    ASSERT_EQ(y.shape(), (Shape{2, cout, oh, ow}));

    auto at = [&](std::size_t b, std::size_t c, long iy, long ix) {
      if (iy < 0 || ix < 0 || iy >= long(H) || ix >= long(W)) return 0.0;
      return x[((b * cin + c) * H + iy) * W + ix];
    };
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t co = 0; co < cout; ++co)
        for (std::size_t oy = 0; oy < oh; ++oy)
          for (std::size_t ox = 0; ox < ow; ++ox) {
            std::vector<double> w, xs;
            for (std::size_t ci = 0; ci < cin; ++ci)
              for (std::size_t ky = 0; ky < k; ++ky)
                for (std::size_t kx = 0; kx < k; ++kx) {
                  w.push_back(conv.kernels[((co * cin + ci) * k + ky) * k + kx]);
                  xs.push_back(at(b, ci, long(oy * stride + ky) - long(pad),
                                  long(ox * stride + kx) - long(pad)));
                }
            double pre;
            if (is_ic(kind)) {
              pre = ic_preactivation(
                  xs, ICParams::standard(w, conv.adjust[co], conv.inner_bias[co],
                                         conv.outer_bias[co]));
            } else {
              pre = conv.outer_bias[co];
              for (std::size_t i = 0; i < w.size(); ++i) pre += w[i] * xs[i];
            }
            const double expect = activate(pre, Activation::elu());
            EXPECT_NEAR(y[((b * cout + co) * oh + oy) * ow + ox], expect, 1e-13);
          }
  }
}

TEST(Conv2D, GradientsMatchFiniteDifferences) {
  for (UnitKind kind : kKinds) {
    for (Activation act : kSmooth) {
      Rng rng(9);
      Conv2D conv(2, 2, 3, 1, 1, kind, act);
      conv.init(rng);
      if (kind == UnitKind::ic_standard)
        for (double& v : conv.adjust.values()) v = rng.uniform(-0.5, 1.5);
      if (is_ic(kind))
        for (double& v : conv.inner_bias.values()) v = rng.uniform(-0.3, 0.3);
      expect_layer_grads(conv, random_tensor({2, 2, 4, 4}, rng));
    }
  }
}

TEST(Conv2D, RejectsOversizedKernel) {
  Conv2D conv(1, 1, 5, 1, 0, UnitKind::mp, Activation::relu());
  EXPECT_THROW(conv.output_shape({1, 3, 3}), DimensionError);
  EXPECT_THROW(conv.output_shape({2, 8, 8}), DimensionError);
}

TEST(MaxPool, ForwardAndRouting) {
  MaxPool2D pool(2, 2);
  const Tensor x({1, 1, 2, 4}, std::vector<double>{1, 5, 2, 0, 3, 4, 7, 6});
  std::any cache;
  const Tensor y = pool.forward(x, cache);
  EXPECT_EQ(y, Tensor({1, 1, 1, 2}, std::vector<double>{5, 7}));
  const Tensor g = pool.backward(cache, Tensor({1, 1, 1, 2}, std::vector<double>{10, 20}));
  EXPECT_EQ(g, Tensor({1, 1, 2, 4}, std::vector<double>{0, 10, 0, 0, 0, 0, 20, 0}));
}

TEST(Linear, GradientsMatchFiniteDifferences) {
  Rng rng(10);
  Linear head(4, 3);
  head.init(rng);
  expect_layer_grads(head, random_tensor({3, 4}, rng));
}

TEST(Network, TwinSharesWeightsUnderEveryInit) {
  ModelSpec spec;
  spec.unit = UnitKind::ic_standard;
  spec.layers = {LayerSpec::fc(6), LayerSpec::fc(4)};
  for (BiasInit b1 : {BiasInit::zero(), BiasInit::uniform(), BiasInit::constant(0.1)}) {
    for (AdjustInit a : {AdjustInit::one, AdjustInit::uniform}) {
      spec.inner_bias_init = b1;
      spec.adjust_init = a;
      Network ic = build_network(spec, {5}, 3, 17);
      Network mp = build_network(spec.mp_twin(), {5}, 3, 17);
      ASSERT_EQ(ic.size(), mp.size());
      for (std::size_t i = 0; i < ic.size(); ++i) {
        std::vector<Param> pi = ic.layer(i).params(), pm = mp.layer(i).params();
        for (const Param& q : pm) {
          const auto it = std::find_if(pi.begin(), pi.end(),
                                       [&](const Param& p) { return p.name == q.name; });
          ASSERT_NE(it, pi.end()) << q.name;
          EXPECT_EQ(*it->value, *q.value) << "layer " << i << " " << q.name;
        }
      }
    }
  }
}

TEST(Network, PinnedInitMakesIcMatchMpOnNonNegativeInputs) {
  ModelSpec spec;
  spec.layers = {LayerSpec::fc(5)};
  Network ic = build_network(spec, {4}, 2, 3);
  Network mp = build_network(spec.mp_twin(), {4}, 2, 3);
  Rng rng(1);
  const Tensor x = random_tensor({8, 4}, rng, 0.0, 1.0);
  EXPECT_EQ(ic.forward(x), mp.forward(x));
}

TEST(Network, BasicUnitsNeverGetUniformAdjust) {
  ModelSpec spec;
  spec.unit = UnitKind::ic_basic;
  spec.adjust_init = AdjustInit::uniform;
  spec.layers = {LayerSpec::fc(5)};
  Network net = build_network(spec, {4}, 2, 3);
  auto& fc = dynamic_cast<FullyConnected&>(net.layer(0));
  for (double v : fc.adjust.values()) EXPECT_EQ(v, 1.0);
}

TEST(Network, ShapeErrorsNameTheLayer) {
  ModelSpec spec;
  spec.layers = {LayerSpec::conv(4, 3, 1)};
  try {
    build_network(spec, {8}, 2, 1);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0 (conv)"), std::string::npos) << e.what();
  }
}

TEST(Serialization, RoundTripIsExact) {
  ModelSpec spec;
  spec.adjust_init = AdjustInit::uniform;
  spec.inner_bias_init = BiasInit::uniform();
  spec.layers = {LayerSpec::conv(2, 3, 1), LayerSpec::maxpool(2), LayerSpec::fc(4)};
  Network a = build_network(spec, {1, 6, 6}, 3, 4);
  Network b = build_network(spec, {1, 6, 6}, 3, 5);
  const auto path = std::filesystem::temp_directory_path() / "icn_roundtrip.icn";
  save_params(a, path);
  load_params(b, path);
  std::filesystem::remove(path);
  std::vector<Param> pa = a.params(), pb = b.params();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i].value, *pb[i].value);
}

TEST(Serialization, FormatErrorsCarryOffsets) {
  ModelSpec spec;
  spec.layers = {LayerSpec::fc(3)};
  Network net = build_network(spec, {2}, 2, 1);
  std::vector<std::uint8_t> bytes = encode_params(net);

  std::vector<std::uint8_t> bad_magic = bytes;
  bad_magic[0] ^= 0xff;
  try {
    decode_params(net, bad_magic);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.location(), 0u);
  }
  std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 3);
  try {
    decode_params(net, truncated);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_GT(e.location(), 8u);
    EXPECT_LE(e.location(), truncated.size());
  }
  std::vector<std::uint8_t> trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_params(net, trailing), FormatError);

  ModelSpec other = spec;
  other.layers = {LayerSpec::fc(4)};
  Network wrong = build_network(other, {2}, 2, 1);
  EXPECT_THROW(decode_params(wrong, bytes), FormatError);
}

TEST(Cost, CountsByHand) {
  FullyConnected mp(8, 32, UnitKind::mp, Activation::relu());
  FullyConnected basic(8, 32, UnitKind::ic_basic, Activation::relu());
  FullyConnected standard(8, 32, UnitKind::ic_standard, Activation::relu());
  EXPECT_EQ(mp.cost({8}).params, 288u);
  EXPECT_EQ(basic.cost({8}).params, 320u);
  EXPECT_EQ(standard.cost({8}).params, 352u);
  EXPECT_EQ(mp.cost({8}).weights, 256u);
  EXPECT_EQ(mp.cost({8}).macs, 256u);
  EXPECT_EQ(standard.cost({8}).macs, 256u + 8u + 32u);
}
