#include "icn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "icn/errors.hpp"
#include "icn/rng.hpp"

namespace icn {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ContractError("batch_size must be at least 1");
  if (repeat_count == 0) throw ContractError("repeat_count must be at least 1");
  if (smoothing_window == 0) throw ContractError("smoothing_window must be at least 1");
  if (!(rho >= 0.0 && rho < 1.0)) throw ContractError("rho must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ContractError("epsilon must be positive");
}

void Adadelta::step(Tensor& value, const Tensor& grad, AdadeltaSlot& slot) const {
  if (value.shape() != grad.shape()) {
    throw DimensionError("adadelta: value " + shape_str(value.shape()) + " vs grad " +
                         shape_str(grad.shape()));
  }
  if (slot.mean_sq_grad.shape() != value.shape()) {
    slot.mean_sq_grad = Tensor(value.shape());
    slot.mean_sq_step = Tensor(value.shape());
  }
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = grad[i];
    double& eg = slot.mean_sq_grad[i];
    double& ex = slot.mean_sq_step[i];
    eg = rho_ * eg + (1.0 - rho_) * g * g;
    const double delta = -std::sqrt(ex + epsilon_) / std::sqrt(eg + epsilon_) * g;
    ex = rho_ * ex + (1.0 - rho_) * delta * delta;
    value[i] += delta;
  }
}

void Adadelta::step(std::vector<Param>& params) {
  if (slots_.size() != params.size()) slots_.assign(params.size(), {});
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].learnable) continue;
    step(*params[i].value, *params[i].grad, slots_[i]);
  }
}

std::vector<double> smooth_curve(std::span<const double> values, std::size_t window) {
  if (window == 0) throw ContractError("smoothing window must be at least 1");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    // Summed from scratch so the value depends only on the window contents.
    const std::size_t lo = i + 1 >= window ? i + 1 - window : 0;
    double exact = 0.0;
    for (std::size_t j = lo; j <= i; ++j) exact += values[j];
    out[i] = exact / static_cast<double>(i - lo + 1);
  }
  return out;
}

namespace {

constexpr std::size_t kEvalChunk = 1000;

int argmax_row(const Tensor& logits, std::size_t r) {
  const std::size_t c = logits.dim(1);
  const double* row = logits.data() + r * c;
  std::size_t best = 0;
  for (std::size_t j = 1; j < c; ++j)
    if (row[j] > row[best]) best = j;
  return static_cast<int>(best);
}

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
};

Evaluation evaluate_with_loss(const Network& net, const Split& split) {
  if (split.size() == 0) throw ContractError("cannot evaluate an empty split");
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t b = 0; b < split.size(); b += kEvalChunk) {
    const std::size_t e = std::min(split.size(), b + kEvalChunk);
    const Tensor logits = net.forward(split.features.rows(b, e));
    const std::span<const int> labels(split.labels.data() + b, e - b);
    loss += softmax_cross_entropy(logits, labels).loss * static_cast<double>(e - b);
    for (std::size_t r = 0; r < e - b; ++r)
      if (argmax_row(logits, r) == labels[r]) ++correct;
  }
  const double n = static_cast<double>(split.size());
  return {static_cast<double>(correct) / n, loss / n};
}

}  // namespace

std::vector<int> predict(const Network& net, const Tensor& features) {
  std::vector<int> out;
  const std::size_t n = features.rank() ? features.dim(0) : 0;
  out.reserve(n);
  for (std::size_t b = 0; b < n; b += kEvalChunk) {
    const Tensor logits = net.forward(features.rows(b, std::min(n, b + kEvalChunk)));
    for (std::size_t r = 0; r < logits.dim(0); ++r) out.push_back(argmax_row(logits, r));
  }
  return out;
}

double evaluate(const Network& net, const Split& split) {
  if (split.size() == 0) throw ContractError("cannot evaluate an empty split");
  const std::vector<int> pred = predict(net, split.features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == split.labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

RunRecord train(Network& net, const Dataset& data, const TrainConfig& config, std::size_t repeat,
                const EpochHook& hook) {
  config.validate();
  data.validate();
  if (data.example_shape() != net.input_shape()) {
    throw DimensionError("dataset examples " + shape_str(data.example_shape()) +
                         " do not match network input " + shape_str(net.input_shape()));
  }
  if (net.classes() != data.classes) {
    throw DimensionError("network has " + std::to_string(net.classes()) + " outputs, dataset " +
                         std::to_string(data.classes) + " classes");
  }
  using clock = std::chrono::steady_clock;

  RunRecord record;
  std::vector<double> raw_test;
  auto push = [&](EpochRecord row) {
    raw_test.push_back(row.test_acc);
    row.test_acc_smoothed = smooth_curve(raw_test, config.smoothing_window).back();
    record.epochs.push_back(row);
    if (hook) hook(record.epochs.back());
  };

  {
    const auto t0 = clock::now();
    const Evaluation tr = evaluate_with_loss(net, data.train);
    EpochRecord row;
    row.train_acc = tr.accuracy;
    row.loss = tr.loss;
    row.test_acc = evaluate(net, data.test);
    row.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    push(row);
  }

  Adadelta opt(config.rho, config.epsilon);
  std::vector<std::size_t> order(data.train.size());
  std::vector<int> labels;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, "shuffle", repeat, epoch));
    rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::span<const std::size_t> idx(order.data() + b,
                                             std::min(order.size(), b + config.batch_size) - b);
      const Tensor x = gather(data.train.features, idx);
      labels.clear();
      for (std::size_t i : idx) labels.push_back(data.train.labels[i]);

      NetworkCache cache;
      net.zero_grad();
      const Tensor logits = net.forward(x, cache);
      const LossAndGrad lg = softmax_cross_entropy(logits, labels);
      if (!std::isfinite(lg.loss)) {
        throw DivergenceError(epoch, "non-finite loss in epoch " + std::to_string(epoch));
      }
      loss_sum += lg.loss * static_cast<double>(idx.size());
      for (std::size_t r = 0; r < idx.size(); ++r)
        if (argmax_row(logits, r) == labels[r]) ++correct;
      net.backward(cache, lg.grad_logits);
      std::vector<Param> params = net.params();
      opt.step(params);
      net.mark_updated();
    }

    EpochRecord row;
    row.epoch = epoch;
    // Running accuracy over the epoch's batches, as seen during training.
    row.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    row.loss = loss_sum / static_cast<double>(order.size());
    row.test_acc = evaluate(net, data.test);
    row.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    push(row);
  }
  return record;
}

RepeatResult run_repeats(const ModelSpec& spec, const Dataset& data, const TrainConfig& config,
                         Network* keep, const NetworkHook& hook) {
  config.validate();
  RepeatResult result;
  for (std::size_t r = 0; r < config.repeat_count; ++r) {
    Network net = build_network(spec, data.example_shape(), data.classes,
                                derive_seed(config.seed, "init", r));
    EpochHook per_epoch;
    if (hook) per_epoch = [&](const EpochRecord& e) { hook(r, e, net); };
    result.runs.push_back(train(net, data, config, r, per_epoch));
    if (r == 0 || result.runs[r].final_smoothed() > result.runs[result.best].final_smoothed()) {
      result.best = r;
      if (keep) *keep = std::move(net);
    }
  }
  return result;
}

std::string curves_csv(const RunRecord& run, bool with_timing) {
  std::string out = "epoch,train_acc,test_acc,test_acc_smoothed,loss,seconds\n";
  char line[256];
  for (const EpochRecord& e : run.epochs) {
    std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%.6f,%.9g,%.3f\n", e.epoch, e.train_acc,
                  e.test_acc, e.test_acc_smoothed, e.loss, with_timing ? e.seconds : 0.0);
    out += line;
  }
  return out;
}

XorTrial train_xor_neuron(UnitKind unit, std::uint64_t seed, std::size_t max_epochs,
                          double inner_bias_init) {
  const Dataset xor_data = make_xor();
  ModelSpec spec;
  spec.unit = unit;
  spec.layers = {LayerSpec::fc(1)};
  spec.inner_bias_init = BiasInit::constant(inner_bias_init);
  TrainConfig config;
  config.epochs = max_epochs;
  config.batch_size = 4;
  config.seed = seed;
  config.repeat_count = 1;

  Network net = build_network(spec, {2}, 2, derive_seed(seed, "init", 0));
  XorTrial trial;
  train(net, xor_data, config, 0, [&](const EpochRecord& e) {
    trial.best_accuracy = std::max(trial.best_accuracy, e.test_acc);
    if (e.test_acc == 1.0 && !trial.epochs_to_separation) trial.epochs_to_separation = e.epoch;
  });
  trial.final_accuracy = evaluate(net, xor_data.test);
  return trial;
}

}  // namespace icn
