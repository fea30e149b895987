#include "icn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "icn/errors.hpp"

namespace icn {

std::string to_string(UnitKind kind) {
  switch (kind) {
    case UnitKind::mp: return "mp";
    case UnitKind::ic_basic: return "basic";
    case UnitKind::ic_standard: return "standard";
  }
  return "?";
}

UnitKind unit_kind_from_string(const std::string& name) {
  if (name == "mp") return UnitKind::mp;
  if (name == "basic") return UnitKind::ic_basic;
  if (name == "standard") return UnitKind::ic_standard;
  throw std::invalid_argument("unknown unit kind '" + name + "' (expected mp|basic|standard)");
}

void Layer::check_tag(const CacheTag& t) const {
  if (t.owner != this) throw ContractError(type() + ": cache was produced by a different layer");
  if (t.version != version_) {
    throw ContractError(type() + ": stale cache (parameters changed since forward)");
  }
}

namespace {

double relu(double v) { return v > 0.0 ? v : 0.0; }

void fill_uniform(Tensor& t, Rng& rng, double bound) {
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
}

template <typename CacheT>
const CacheT& cache_as(const std::any& cache, const std::string& who) {
  const auto* c = std::any_cast<CacheT>(&cache);
  if (!c) throw ContractError(who + ": cache of the wrong type");
  return *c;
}

void require_rank(const Tensor& x, std::size_t rank, const std::string& who) {
  if (x.rank() != rank) {
    throw DimensionError(who + ": expected a rank-" + std::to_string(rank) + " input, got " +
                         shape_str(x.shape()));
  }
}

// Shared IC arithmetic on [B×m] linear responses. `adjust` may be empty for
// MP units. Fills branch_arg (IC only) and returns the pre-activation.
Tensor ic_combine(const Tensor& linear, const std::vector<double>& input_sum, const Tensor& adjust,
                  const Tensor& inner_bias, const Tensor& outer_bias, bool branch,
                  Tensor& branch_arg) {
  const std::size_t rows = linear.dim(0), m = linear.dim(1);
  Tensor z({rows, m});
  if (branch) branch_arg = Tensor({rows, m});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < m; ++j) {
      const double s = linear(r, j);
      double v = s;
      if (branch) {
        const double a = s - adjust[j] * input_sum[r] + inner_bias[j];
        branch_arg(r, j) = a;
        v += relu(a);
      }
      z(r, j) = v + outer_bias[j];
    }
  }
  return z;
}

struct IcBackward {
  Tensor g;         // dL/dz
  Tensor g_linear;  // dL/d(linear) = g (1 + mask)
  Tensor adjust, inner_bias, outer_bias;
  std::vector<double> input_sum_grad;  // dL/d(sum x) per row
};

IcBackward ic_combine_backward(const Tensor& grad_y, const Tensor& preact, const Tensor& branch_arg,
                               const std::vector<double>& input_sum, const Tensor& adjust,
                               bool branch, Activation act) {
  const std::size_t rows = preact.dim(0), m = preact.dim(1);
  IcBackward out{Tensor({rows, m}), Tensor({rows, m}), Tensor({m}), Tensor({m}), Tensor({m}),
                 std::vector<double>(rows, 0.0)};
  for (std::size_t r = 0; r < rows; ++r) {
    double sum_grad = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double g = grad_y(r, j) * activate_grad(preact(r, j), act);
      out.g(r, j) = g;
      out.outer_bias[j] += g;
      if (branch && branch_arg(r, j) > 0.0) {
        out.g_linear(r, j) = 2.0 * g;
        out.inner_bias[j] += g;
        out.adjust[j] -= g * input_sum[r];
        sum_grad -= g * adjust[j];
      } else {
        out.g_linear(r, j) = g;
      }
    }
    out.input_sum_grad[r] = sum_grad;
  }
  return out;
}

void push_kinks(const Tensor& branch_arg, const Tensor& preact, bool branch, Activation act,
                std::vector<double>& out) {
  if (branch) out.insert(out.end(), branch_arg.values().begin(), branch_arg.values().end());
  if (act.kind == ActivationKind::relu) {
    out.insert(out.end(), preact.values().begin(), preact.values().end());
  }
}

std::size_t ic_extra_params(UnitKind kind, std::size_t units) {
  switch (kind) {
    case UnitKind::mp: return 0;
    case UnitKind::ic_basic: return units;  // b1
    case UnitKind::ic_standard: return 2 * units;  // b1 and w'
  }
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// FullyConnected

FullyConnected::FullyConnected(std::size_t inputs, std::size_t units, UnitKind kind,
                               Activation act)
    : weight({inputs, units}),
      adjust({units}, 1.0),
      inner_bias({units}),
      outer_bias({units}),
      kind_(kind),
      act_(act) {
  if (inputs == 0 || units == 0) throw DimensionError("fc: inputs and units must be positive");
  zero_grad();
}

void FullyConnected::init(Rng& rng) {
  fill_uniform(weight, rng, 1.0 / std::sqrt(static_cast<double>(inputs())));
  adjust.fill(1.0);
  inner_bias.fill(0.0);
  outer_bias.fill(0.0);
}

std::pair<Tensor, FullyConnected::Cache> FullyConnected::forward(const Tensor& x) const {
  require_rank(x, 2, "fc");
  if (x.dim(1) != inputs()) {
    throw DimensionError("fc: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
  }
  Cache cache;
  cache.tag = tag();
  cache.input = x;
  cache.input_sum = row_sums(x);
  const Tensor linear = matmul(x, weight);
  cache.preact = ic_combine(linear, cache.input_sum, adjust, inner_bias, outer_bias,
                            branch_active(), cache.branch_arg);
  return {activate(cache.preact, act_), std::move(cache)};
}

FullyConnected::Grads FullyConnected::gradients(const Cache& cache, const Tensor& grad_y) const {
  check_tag(cache.tag);
  if (grad_y.shape() != cache.preact.shape()) {
    throw DimensionError("fc: upstream gradient " + shape_str(grad_y.shape()) + " vs output " +
                         shape_str(cache.preact.shape()));
  }
  IcBackward b = ic_combine_backward(grad_y, cache.preact, cache.branch_arg, cache.input_sum,
                                     adjust, branch_active(), act_);
  Grads g;
  g.weight = matmul_tn(cache.input, b.g_linear);
  g.input = matmul_nt(b.g_linear, weight);
  for (std::size_t r = 0; r < g.input.dim(0); ++r)
    for (std::size_t i = 0; i < g.input.dim(1); ++i) g.input(r, i) += b.input_sum_grad[r];
  g.adjust = std::move(b.adjust);
  g.inner_bias = std::move(b.inner_bias);
  g.outer_bias = std::move(b.outer_bias);
  return g;
}

Shape FullyConnected::output_shape(const Shape& input) const {
  if (input.size() != 1 || input[0] != inputs()) {
    throw DimensionError("fc expects [" + std::to_string(inputs()) + "], got " +
                         shape_str(input));
  }
  return {units()};
}

Tensor FullyConnected::forward(const Tensor& x, std::any& cache) const {
  auto [y, c] = forward(x);
  cache = std::move(c);
  return y;
}

Tensor FullyConnected::backward(const std::any& cache, const Tensor& grad_y) {
  Grads g = gradients(cache_as<Cache>(cache, "fc"), grad_y);
  add_inplace(grad.weight, g.weight);
  add_inplace(grad.adjust, g.adjust);
  add_inplace(grad.inner_bias, g.inner_bias);
  add_inplace(grad.outer_bias, g.outer_bias);
  return std::move(g.input);
}

std::vector<Param> FullyConnected::params() {
  std::vector<Param> p{{"weight", &weight, &grad.weight, true}};
  if (kind_ == UnitKind::ic_standard) p.push_back({"adjust", &adjust, &grad.adjust, true});
  if (kind_ == UnitKind::ic_basic) p.push_back({"adjust", &adjust, &grad.adjust, false});
  if (is_ic(kind_)) p.push_back({"inner_bias", &inner_bias, &grad.inner_bias, true});
  p.push_back({"outer_bias", &outer_bias, &grad.outer_bias, true});
  return p;
}

void FullyConnected::zero_grad() {
  grad.weight = Tensor(weight.shape());
  grad.adjust = Tensor(adjust.shape());
  grad.inner_bias = Tensor(inner_bias.shape());
  grad.outer_bias = Tensor(outer_bias.shape());
}

LayerCost FullyConnected::cost(const Shape& input) const {
  output_shape(input);
  const std::size_t n = inputs(), m = units();
  LayerCost c{"fc", (n + 1) * m + ic_extra_params(kind_, m), n * m, n * m};
  if (kind_ == UnitKind::ic_basic) c.macs += n;           // shared input sum
  if (kind_ == UnitKind::ic_standard) c.macs += n + m;    // input sum, w' scaling
  return c;
}

void FullyConnected::collect_kinks(const std::any& cache, std::vector<double>& out) const {
  const Cache& c = cache_as<Cache>(cache, "fc");
  push_kinks(c.branch_arg, c.preact, branch_active(), act_, out);
}

// ---------------------------------------------------------------------------
// RecurrentCell

RecurrentCell::RecurrentCell(std::size_t inputs, std::size_t hidden, std::size_t outputs,
                             UnitKind kind, Activation act)
    : w_xh({inputs, hidden}),
      w_hh({hidden, hidden}),
      adjust({hidden}, 1.0),
      inner_bias({hidden}),
      outer_bias({hidden}),
      w_hy({hidden, outputs}),
      kind_(kind),
      act_(act) {
  if (inputs == 0 || hidden == 0 || outputs == 0) {
    throw DimensionError("recurrent: extents must be positive");
  }
  zero_grad();
}

void RecurrentCell::init(Rng& rng) {
  fill_uniform(w_xh, rng, 1.0 / std::sqrt(static_cast<double>(inputs())));
  fill_uniform(w_hh, rng, 1.0 / std::sqrt(static_cast<double>(hidden())));
  fill_uniform(w_hy, rng, 1.0 / std::sqrt(static_cast<double>(hidden())));
  adjust.fill(1.0);
  inner_bias.fill(0.0);
  outer_bias.fill(0.0);
}

std::pair<Tensor, RecurrentCell::StepCache> RecurrentCell::step(const Tensor& x_t,
                                                                const Tensor& h_prev) const {
  require_rank(x_t, 2, "recurrent step input");
  require_rank(h_prev, 2, "recurrent step state");
  if (x_t.dim(1) != inputs() || h_prev.dim(1) != hidden() || x_t.dim(0) != h_prev.dim(0)) {
    throw DimensionError("recurrent step: input " + shape_str(x_t.shape()) + " and state " +
                         shape_str(h_prev.shape()) + " do not match cell [" +
                         std::to_string(inputs()) + "->" + std::to_string(hidden()) + "]");
  }
  StepCache c;
  c.tag = tag();
  c.input = x_t;
  c.h_prev = h_prev;
  c.input_sum = row_sums(x_t);
  const Tensor linear = matmul(x_t, w_xh);
  c.preact = ic_combine(linear, c.input_sum, adjust, inner_bias, outer_bias, is_ic(kind_),
                        c.branch_arg);
  add_inplace(c.preact, matmul(h_prev, w_hh));
  return {activate(c.preact, act_), std::move(c)};
}

RecurrentCell::StepGrads RecurrentCell::step_backward(const StepCache& cache,
                                                      const Tensor& grad_h) const {
  check_tag(cache.tag);
  if (grad_h.shape() != cache.preact.shape()) {
    throw DimensionError("recurrent step: upstream gradient " + shape_str(grad_h.shape()));
  }
  IcBackward b = ic_combine_backward(grad_h, cache.preact, cache.branch_arg, cache.input_sum,
                                     adjust, is_ic(kind_), act_);
  StepGrads g;
  g.w_xh = matmul_tn(cache.input, b.g_linear);
  g.w_hh = matmul_tn(cache.h_prev, b.g);
  g.h_prev = matmul_nt(b.g, w_hh);
  g.input = matmul_nt(b.g_linear, w_xh);
  for (std::size_t r = 0; r < g.input.dim(0); ++r)
    for (std::size_t i = 0; i < g.input.dim(1); ++i) g.input(r, i) += b.input_sum_grad[r];
  g.adjust = std::move(b.adjust);
  g.inner_bias = std::move(b.inner_bias);
  g.outer_bias = std::move(b.outer_bias);
  return g;
}

namespace {

// x_seq[:, t, :] as a [B×n] matrix.
Tensor time_slice(const Tensor& x_seq, std::size_t t) {
  const std::size_t batch = x_seq.dim(0), steps = x_seq.dim(1), n = x_seq.dim(2);
  Tensor out({batch, n});
  for (std::size_t b = 0; b < batch; ++b)
    std::copy_n(x_seq.data() + (b * steps + t) * n, n, out.data() + b * n);
  return out;
}

}  // namespace

std::pair<Tensor, RecurrentCell::SequenceCache> RecurrentCell::forward_sequence(
    const Tensor& x_seq, const std::optional<Tensor>& h0) const {
  require_rank(x_seq, 3, "recurrent sequence");
  if (x_seq.dim(1) == 0) throw ContractError("recurrent: empty sequence");
  if (x_seq.dim(2) != inputs()) {
    throw DimensionError("recurrent: sequence " + shape_str(x_seq.shape()) + " has feature size " +
                         std::to_string(x_seq.dim(2)) + ", cell expects " +
                         std::to_string(inputs()));
  }
  const std::size_t batch = x_seq.dim(0), steps = x_seq.dim(1);
  SequenceCache cache;
  cache.tag = tag();
  Tensor h = h0 ? *h0 : Tensor({batch, hidden()});
  cache.steps.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    auto [h_next, step_cache] = step(time_slice(x_seq, t), h);
    cache.steps.push_back(std::move(step_cache));
    h = std::move(h_next);
  }
  Tensor y = matmul(h, w_hy);
  cache.h_last = std::move(h);
  return {std::move(y), std::move(cache)};
}

RecurrentCell::SequenceGrads RecurrentCell::backward_sequence(const SequenceCache& cache,
                                                              const Tensor& grad_y) const {
  check_tag(cache.tag);
  const std::size_t batch = cache.h_last.dim(0), steps = cache.steps.size(), n = inputs();
  if (grad_y.shape() != Shape{batch, outputs()}) {
    throw DimensionError("recurrent: upstream gradient " + shape_str(grad_y.shape()));
  }
  SequenceGrads g{Tensor({batch, steps, n}),  Tensor({batch, hidden()}), Tensor(w_xh.shape()),
                  Tensor(w_hh.shape()),       Tensor(adjust.shape()),    Tensor(inner_bias.shape()),
                  Tensor(outer_bias.shape()), Tensor(w_hy.shape())};
  g.w_hy = matmul_tn(cache.h_last, grad_y);
  Tensor grad_h = matmul_nt(grad_y, w_hy);
  for (std::size_t t = steps; t-- > 0;) {
    StepGrads s = step_backward(cache.steps[t], grad_h);
    add_inplace(g.w_xh, s.w_xh);
    add_inplace(g.w_hh, s.w_hh);
    add_inplace(g.adjust, s.adjust);
    add_inplace(g.inner_bias, s.inner_bias);
    add_inplace(g.outer_bias, s.outer_bias);
    for (std::size_t b = 0; b < batch; ++b)
      std::copy_n(s.input.data() + b * n, n, g.input.data() + (b * steps + t) * n);
    grad_h = std::move(s.h_prev);
  }
  g.h0 = std::move(grad_h);
  return g;
}

Shape RecurrentCell::output_shape(const Shape& input) const {
  if (input.size() != 2 || input[0] == 0 || input[1] != inputs()) {
    throw DimensionError("recurrent expects [T×" + std::to_string(inputs()) + "], got " +
                         shape_str(input));
  }
  return {outputs()};
}

Tensor RecurrentCell::forward(const Tensor& x, std::any& cache) const {
  auto [y, c] = forward_sequence(x);
  cache = std::move(c);
  return y;
}

Tensor RecurrentCell::backward(const std::any& cache, const Tensor& grad_y) {
  SequenceGrads g = backward_sequence(cache_as<SequenceCache>(cache, "recurrent"), grad_y);
  add_inplace(grad.w_xh, g.w_xh);
  add_inplace(grad.w_hh, g.w_hh);
  add_inplace(grad.adjust, g.adjust);
  add_inplace(grad.inner_bias, g.inner_bias);
  add_inplace(grad.outer_bias, g.outer_bias);
  add_inplace(grad.w_hy, g.w_hy);
  return std::move(g.input);
}

std::vector<Param> RecurrentCell::params() {
  std::vector<Param> p{{"w_xh", &w_xh, &grad.w_xh, true}, {"w_hh", &w_hh, &grad.w_hh, true}};
  if (kind_ == UnitKind::ic_standard) p.push_back({"adjust", &adjust, &grad.adjust, true});
  if (kind_ == UnitKind::ic_basic) p.push_back({"adjust", &adjust, &grad.adjust, false});
  if (is_ic(kind_)) p.push_back({"inner_bias", &inner_bias, &grad.inner_bias, true});
  p.push_back({"outer_bias", &outer_bias, &grad.outer_bias, true});
  p.push_back({"w_hy", &w_hy, &grad.w_hy, true});
  return p;
}

void RecurrentCell::zero_grad() {
  grad = SequenceGrads{Tensor(),
                       Tensor(),
                       Tensor(w_xh.shape()),
                       Tensor(w_hh.shape()),
                       Tensor(adjust.shape()),
                       Tensor(inner_bias.shape()),
                       Tensor(outer_bias.shape()),
                       Tensor(w_hy.shape())};
}

LayerCost RecurrentCell::cost(const Shape& input) const {
  output_shape(input);
  const std::size_t steps = input[0], n = inputs(), h = hidden(), m = outputs();
  LayerCost c{"recurrent", n * h + h * h + h + h * m + ic_extra_params(kind_, h),
              steps * (n * h + h * h) + h * m, n * h + h * h + h * m};
  if (kind_ == UnitKind::ic_basic) c.macs += steps * n;
  if (kind_ == UnitKind::ic_standard) c.macs += steps * (n + h);
  return c;
}

void RecurrentCell::collect_kinks(const std::any& cache, std::vector<double>& out) const {
  const SequenceCache& c = cache_as<SequenceCache>(cache, "recurrent");
  for (const StepCache& s : c.steps) push_kinks(s.branch_arg, s.preact, is_ic(kind_), act_, out);
}

// ---------------------------------------------------------------------------
// Conv2D

Conv2D::Conv2D(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
               std::size_t stride, std::size_t padding, UnitKind kind, Activation act)
    : kernels({out_channels, in_channels, kernel, kernel}),
      adjust({out_channels}, 1.0),
      inner_bias({out_channels}),
      outer_bias({out_channels}),
      stride_(stride),
      padding_(padding),
      kind_(kind),
      act_(act) {
  if (in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0) {
    throw DimensionError("conv: channels, kernel and stride must be positive");
  }
  zero_grad();
}

void Conv2D::init(Rng& rng) {
  const double fan_in = static_cast<double>(in_channels() * kernel() * kernel());
  fill_uniform(kernels, rng, 1.0 / std::sqrt(fan_in));
  adjust.fill(1.0);
  inner_bias.fill(0.0);
  outer_bias.fill(0.0);
}

Shape Conv2D::output_shape(const Shape& input) const {
  if (input.size() != 3 || input[0] != in_channels()) {
    throw DimensionError("conv expects [" + std::to_string(in_channels()) + "xHxW], got " +
                         shape_str(input));
  }
  const std::size_t k = kernel();
  if (input[1] + 2 * padding_ < k || input[2] + 2 * padding_ < k) {
    throw DimensionError("conv: " + std::to_string(k) + "x" + std::to_string(k) +
                         " window larger than padded input " + shape_str(input));
  }
  return {out_channels(), (input[1] + 2 * padding_ - k) / stride_ + 1,
          (input[2] + 2 * padding_ - k) / stride_ + 1};
}

std::pair<Tensor, Conv2D::Cache> Conv2D::forward(const Tensor& x) const {
  require_rank(x, 4, "conv");
  const Shape out = output_shape({x.dim(1), x.dim(2), x.dim(3)});
  const std::size_t batch = x.dim(0), cin = in_channels(), in_h = x.dim(2), in_w = x.dim(3);
  const std::size_t k = kernel(), cout = out_channels(), oh = out[1], ow = out[2];
  const std::size_t positions = oh * ow, window = cin * k * k;

  Cache c;
  c.tag = tag();
  c.input_shape = x.shape();
  c.out_h = oh;
  c.out_w = ow;
  c.cols = Tensor({batch * positions, window});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double* row = c.cols.data() + ((b * positions) + oy * ow + ox) * window;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride_ + ky) -
                                      static_cast<std::ptrdiff_t>(padding_);
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride_ + kx) -
                                        static_cast<std::ptrdiff_t>(padding_);
              double v = 0.0;
              if (iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(in_h) &&
                  ix < static_cast<std::ptrdiff_t>(in_w)) {
                v = x[((b * cin + ci) * in_h + iy) * in_w + ix];
              }
              row[(ci * k + ky) * k + kx] = v;
            }
          }
        }
      }
    }
  }
  c.window_sum = row_sums(c.cols);
  const Tensor kmat = kernels.reshaped({cout, window});
  const Tensor linear = matmul_nt(c.cols, kmat);
  c.preact = ic_combine(linear, c.window_sum, adjust, inner_bias, outer_bias, is_ic(kind_),
                        c.branch_arg);

  Tensor u({batch, cout, oh, ow});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t p = 0; p < positions; ++p)
      for (std::size_t ch = 0; ch < cout; ++ch)
        u[(b * cout + ch) * positions + p] = activate(c.preact(b * positions + p, ch), act_);
  return {std::move(u), std::move(c)};
}

Conv2D::Grads Conv2D::gradients(const Cache& cache, const Tensor& grad_u) const {
  check_tag(cache.tag);
  const std::size_t batch = cache.input_shape[0], cin = in_channels();
  const std::size_t in_h = cache.input_shape[2], in_w = cache.input_shape[3];
  const std::size_t k = kernel(), cout = out_channels(), oh = cache.out_h, ow = cache.out_w;
  const std::size_t positions = oh * ow, window = cin * k * k;
  if (grad_u.shape() != Shape{batch, cout, oh, ow}) {
    throw DimensionError("conv: upstream gradient " + shape_str(grad_u.shape()));
  }
  Tensor grad_rows({batch * positions, cout});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t p = 0; p < positions; ++p)
      for (std::size_t ch = 0; ch < cout; ++ch)
        grad_rows(b * positions + p, ch) = grad_u[(b * cout + ch) * positions + p];

  IcBackward ib = ic_combine_backward(grad_rows, cache.preact, cache.branch_arg, cache.window_sum,
                                      adjust, is_ic(kind_), act_);
  Grads g;
  g.kernels = matmul_tn(ib.g_linear, cache.cols).reshaped(kernels.shape());
  g.adjust = std::move(ib.adjust);
  g.inner_bias = std::move(ib.inner_bias);
  g.outer_bias = std::move(ib.outer_bias);

  const Tensor kmat = kernels.reshaped({cout, window});
  Tensor grad_cols = matmul(ib.g_linear, kmat);
  g.input = Tensor(cache.input_shape);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t r = b * positions + oy * ow + ox;
        const double shared = ib.input_sum_grad[r];
        const double* row = grad_cols.data() + r * window;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride_ + ky) -
                                      static_cast<std::ptrdiff_t>(padding_);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in_h)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride_ + kx) -
                                        static_cast<std::ptrdiff_t>(padding_);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in_w)) continue;
              g.input[((b * cin + ci) * in_h + iy) * in_w + ix] +=
                  row[(ci * k + ky) * k + kx] + shared;
            }
          }
        }
      }
    }
  }
  return g;
}

Tensor Conv2D::forward(const Tensor& x, std::any& cache) const {
  auto [y, c] = forward(x);
  cache = std::move(c);
  return y;
}

Tensor Conv2D::backward(const std::any& cache, const Tensor& grad_y) {
  Grads g = gradients(cache_as<Cache>(cache, "conv"), grad_y);
  add_inplace(grad.kernels, g.kernels);
  add_inplace(grad.adjust, g.adjust);
  add_inplace(grad.inner_bias, g.inner_bias);
  add_inplace(grad.outer_bias, g.outer_bias);
  return std::move(g.input);
}

std::vector<Param> Conv2D::params() {
  std::vector<Param> p{{"kernels", &kernels, &grad.kernels, true}};
  if (kind_ == UnitKind::ic_standard) p.push_back({"adjust", &adjust, &grad.adjust, true});
  if (kind_ == UnitKind::ic_basic) p.push_back({"adjust", &adjust, &grad.adjust, false});
  if (is_ic(kind_)) p.push_back({"inner_bias", &inner_bias, &grad.inner_bias, true});
  p.push_back({"outer_bias", &outer_bias, &grad.outer_bias, true});
  return p;
}

void Conv2D::zero_grad() {
  grad.kernels = Tensor(kernels.shape());
  grad.adjust = Tensor(adjust.shape());
  grad.inner_bias = Tensor(inner_bias.shape());
  grad.outer_bias = Tensor(outer_bias.shape());
}

LayerCost Conv2D::cost(const Shape& input) const {
  const Shape out = output_shape(input);
  const std::size_t positions = out[1] * out[2];
  const std::size_t window = in_channels() * kernel() * kernel(), cout = out_channels();
  LayerCost c{"conv", (window + 1) * cout + ic_extra_params(kind_, cout),
              positions * cout * window, cout * window};
  if (kind_ == UnitKind::ic_basic) c.macs += positions * window;  // shared all-ones kernel
  if (kind_ == UnitKind::ic_standard) c.macs += positions * (window + cout);
  return c;
}

void Conv2D::collect_kinks(const std::any& cache, std::vector<double>& out) const {
  const Cache& c = cache_as<Cache>(cache, "conv");
  push_kinks(c.branch_arg, c.preact, is_ic(kind_), act_, out);
}

// ---------------------------------------------------------------------------
// MaxPool2D

MaxPool2D::MaxPool2D(std::size_t size, std::size_t stride) : size_(size), stride_(stride) {
  if (size == 0 || stride == 0) throw DimensionError("maxpool: size and stride must be positive");
}

Shape MaxPool2D::output_shape(const Shape& input) const {
  if (input.size() != 3 || input[1] < size_ || input[2] < size_) {
    throw DimensionError("maxpool " + std::to_string(size_) + "x" + std::to_string(size_) +
                         " cannot pool " + shape_str(input));
  }
  return {input[0], (input[1] - size_) / stride_ + 1, (input[2] - size_) / stride_ + 1};
}

Tensor MaxPool2D::forward(const Tensor& x, std::any& cache) const {
  require_rank(x, 4, "maxpool");
  const Shape out = output_shape({x.dim(1), x.dim(2), x.dim(3)});
  const std::size_t batch = x.dim(0), ch = x.dim(1), in_h = x.dim(2), in_w = x.dim(3);
  Tensor y({batch, ch, out[1], out[2]});
  Cache c{tag(), x.shape(), std::vector<std::size_t>(y.size())};
  std::size_t o = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t cc = 0; cc < ch; ++cc) {
      const std::size_t plane = (b * ch + cc) * in_h * in_w;
      for (std::size_t oy = 0; oy < out[1]; ++oy) {
        for (std::size_t ox = 0; ox < out[2]; ++ox, ++o) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t arg = 0;
          for (std::size_t ky = 0; ky < size_; ++ky) {
            for (std::size_t kx = 0; kx < size_; ++kx) {
              const std::size_t idx = plane + (oy * stride_ + ky) * in_w + ox * stride_ + kx;
              if (x[idx] > best) {
                best = x[idx];
                arg = idx;
              }
            }
          }
          y[o] = best;
          c.argmax[o] = arg;
        }
      }
    }
  }
  cache = std::move(c);
  return y;
}

Tensor MaxPool2D::backward(const std::any& cache, const Tensor& grad_y) {
  const Cache& c = cache_as<Cache>(cache, "maxpool");
  check_tag(c.tag);
  if (grad_y.size() != c.argmax.size()) throw DimensionError("maxpool: upstream gradient size");
  Tensor g(c.input_shape);
  for (std::size_t o = 0; o < c.argmax.size(); ++o) g[c.argmax[o]] += grad_y[o];
  return g;
}

LayerCost MaxPool2D::cost(const Shape& input) const {
  output_shape(input);
  return {"maxpool", 0, 0};
}

// ---------------------------------------------------------------------------
// ActivationLayer / Flatten

namespace {
struct PassCache {
  CacheTag tag;
  Tensor input;
};
}  // namespace

Tensor ActivationLayer::forward(const Tensor& x, std::any& cache) const {
  cache = PassCache{tag(), x};
  return activate(x, act_);
}

Tensor ActivationLayer::backward(const std::any& cache, const Tensor& grad_y) {
  const PassCache& c = cache_as<PassCache>(cache, "activation");
  check_tag(c.tag);
  if (grad_y.shape() != c.input.shape()) throw DimensionError("activation: upstream gradient");
  Tensor g = activate_grad(c.input, act_);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= grad_y[i];
  return g;
}

LayerCost ActivationLayer::cost(const Shape&) const { return {"activation", 0, 0}; }

void ActivationLayer::collect_kinks(const std::any& cache, std::vector<double>& out) const {
  if (act_.kind != ActivationKind::relu) return;
  const PassCache& c = cache_as<PassCache>(cache, "activation");
  out.insert(out.end(), c.input.values().begin(), c.input.values().end());
}

Shape Flatten::output_shape(const Shape& input) const {
  if (input.empty()) throw DimensionError("flatten: empty shape");
  return {shape_size(input)};
}

Tensor Flatten::forward(const Tensor& x, std::any& cache) const {
  if (x.rank() < 2) throw DimensionError("flatten: input needs a batch axis");
  cache = x.shape();
  return x.reshaped({x.dim(0), x.size() / x.dim(0)});
}

Tensor Flatten::backward(const std::any& cache, const Tensor& grad_y) {
  return grad_y.reshaped(cache_as<Shape>(cache, "flatten"));
}

LayerCost Flatten::cost(const Shape&) const { return {"flatten", 0, 0}; }

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(std::size_t inputs, std::size_t outputs)
    : weight({inputs, outputs}), bias({outputs}) {
  if (inputs == 0 || outputs == 0) throw DimensionError("linear: extents must be positive");
  zero_grad();
}

void Linear::init(Rng& rng) {
  fill_uniform(weight, rng, 1.0 / std::sqrt(static_cast<double>(weight.dim(0))));
  bias.fill(0.0);
}

Shape Linear::output_shape(const Shape& input) const {
  if (input.size() != 1 || input[0] != weight.dim(0)) {
    throw DimensionError("linear expects [" + std::to_string(weight.dim(0)) + "], got " +
                         shape_str(input));
  }
  return {weight.dim(1)};
}

Tensor Linear::forward(const Tensor& x, std::any& cache) const {
  require_rank(x, 2, "linear");
  Tensor y = matmul(x, weight);
  for (std::size_t r = 0; r < y.dim(0); ++r)
    for (std::size_t j = 0; j < y.dim(1); ++j) y(r, j) += bias[j];
  cache = Cache{tag(), x};
  return y;
}

Tensor Linear::backward(const std::any& cache, const Tensor& grad_y) {
  const Cache& c = cache_as<Cache>(cache, "linear");
  check_tag(c.tag);
  add_inplace(grad_weight, matmul_tn(c.input, grad_y));
  for (std::size_t r = 0; r < grad_y.dim(0); ++r)
    for (std::size_t j = 0; j < grad_y.dim(1); ++j) grad_bias[j] += grad_y(r, j);
  return matmul_nt(grad_y, weight);
}

std::vector<Param> Linear::params() {
  return {{"weight", &weight, &grad_weight, true}, {"bias", &bias, &grad_bias, true}};
}

void Linear::zero_grad() {
  grad_weight = Tensor(weight.shape());
  grad_bias = Tensor(bias.shape());
}

LayerCost Linear::cost(const Shape& input) const {
  output_shape(input);
  const std::size_t weights = weight.dim(0) * weight.dim(1);
  return {"linear", weights + weight.dim(1), weights, weights};
}

}  // namespace icn
