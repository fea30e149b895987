#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "icn/data.hpp"
#include "icn/network.hpp"

namespace icn {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double rho = 0.9;
  double epsilon = 1e-6;
  std::uint64_t seed = 1;
  std::size_t repeat_count = 3;
  std::size_t smoothing_window = 5;

  /// Throws ContractError on a zero batch size, repeat count or window.
  void validate() const;
};

/// Running averages of one parameter tensor.
struct AdadeltaSlot {
  Tensor mean_sq_grad;
  Tensor mean_sq_step;
};

class Adadelta {
 public:
  Adadelta(double rho = 0.9, double epsilon = 1e-6) : rho_(rho), epsilon_(epsilon) {}

  /// One update of every learnable parameter from its accumulated gradient.
  /// Non-learnable parameters are left untouched.
  void step(std::vector<Param>& params);
  /// Same rule on a bare tensor; `slot` starts zero-filled.
  void step(Tensor& value, const Tensor& grad, AdadeltaSlot& slot) const;

 private:
  double rho_, epsilon_;
  std::vector<AdadeltaSlot> slots_;
};

/// Row 0 is the evaluation before any update.
struct EpochRecord {
  std::size_t epoch = 0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double test_acc_smoothed = 0.0;
  double loss = 0.0;  // mean training loss over the epoch (initial loss at row 0)
  double seconds = 0.0;
};

struct RunRecord {
  std::vector<EpochRecord> epochs;

  double final_test_acc() const { return epochs.back().test_acc; }
  double final_smoothed() const { return epochs.back().test_acc_smoothed; }
};

/// Called after every epoch with the record just appended.
using EpochHook = std::function<void(const EpochRecord&)>;

/// Trains `net` in place with mean cross-entropy and Adadelta. The shuffle for
/// epoch e of repeat r is seeded by derive_seed(seed, "shuffle", r, e).
/// Throws DivergenceError if the loss becomes non-finite.
RunRecord train(Network& net, const Dataset& data, const TrainConfig& config,
                std::size_t repeat = 0, const EpochHook& hook = {});

/// Trailing moving average; the first window - 1 entries average the prefix.
std::vector<double> smooth_curve(std::span<const double> values, std::size_t window);

/// Top-1 accuracy; argmax ties go to the lowest class index.
double evaluate(const Network& net, const Split& split);
/// Predicted class per example, evaluated in chunks.
std::vector<int> predict(const Network& net, const Tensor& features);

/// Outcome of repeat_count independent runs of one model.
struct RepeatResult {
  std::vector<RunRecord> runs;
  std::size_t best = 0;  // index of the run with the highest final smoothed accuracy

  double best_accuracy() const { return runs.at(best).final_smoothed(); }
};

/// Called after every epoch of every repeat with the live network.
using NetworkHook = std::function<void(std::size_t repeat, const EpochRecord&, const Network&)>;

/// Builds the network for repeat r from derive_seed(seed, "init", r) and
/// trains it. `keep` receives the best network if non-null.
RepeatResult run_repeats(const ModelSpec& spec, const Dataset& data, const TrainConfig& config,
                         Network* keep = nullptr, const NetworkHook& hook = {});

/// CSV with header epoch,train_acc,test_acc,test_acc_smoothed,loss,seconds.
/// `with_timing = false` writes seconds as 0 so reruns compare byte for byte.
std::string curves_csv(const RunRecord& run, bool with_timing = false);

/// One hidden unit (2 -> 1, relu) plus a two-class linear head trained on the
/// four XOR points with full-batch Adadelta.
///
/// With w' = 1, b1 = 0 and |w| < 1 the collision branch argument is <= 0 on
/// every XOR point, so the branch gets no gradient. IC units therefore start
/// from `inner_bias_init` instead (MP units have no such bias).
struct XorTrial {
  std::optional<std::size_t> epochs_to_separation;  // first epoch with 4/4
  double best_accuracy = 0.0;                        // over all epochs, incl. epoch 0
  double final_accuracy = 0.0;
};

inline constexpr double kXorInnerBiasInit = 0.1;

XorTrial train_xor_neuron(UnitKind unit, std::uint64_t seed, std::size_t max_epochs = 2000,
                          double inner_bias_init = kXorInnerBiasInit);

}  // namespace icn
