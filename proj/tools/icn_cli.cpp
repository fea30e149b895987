// Command-line front end: train, gradcheck, analyze, xor-demo, count.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "icn/config.hpp"
#include "icn/cost.hpp"
#include "icn/errors.hpp"
#include "icn/grad.hpp"
#include "icn/ic_core.hpp"
#include "icn/rng.hpp"

#ifndef ICN_DATA_DIR
#define ICN_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace icn;

namespace {

constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> subset;
  bool no_twin = false;
  std::string data_dir = ICN_DATA_DIR;
};

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  if (c.seed) cfg.train.seed = *c.seed;
  if (c.subset) cfg.dataset.subset = *c.subset;
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

// The configured model first, then its MP twin when one differs.
std::vector<std::pair<std::string, ModelSpec>> models(const ModelSpec& spec, bool no_twin) {
  std::vector<std::pair<std::string, ModelSpec>> out{{"ic", spec}};
  const ModelSpec twin = spec.mp_twin();
  if (twin == spec) {
    out[0].first = "mp";
  } else if (!no_twin) {
    out.emplace_back("mp", twin);
  }
  return out;
}

json cost_json(const CostReport& r) {
  return {{"params", r.params}, {"macs", r.macs}, {"kilo_params", r.kilo_params()},
          {"kilo_macs", r.kilo_macs()}};
}

int cmd_train(const Common& c, bool timing) {
  const ExperimentConfig cfg = resolve(c);
  const Dataset data = load_dataset(cfg.dataset, c.data_dir);
  const fs::path out = cfg.output_dir;

  json summary;
  summary["config"] = json::parse(config_to_json(cfg));
  summary["dataset"] = {{"name", data.name},
                        {"train", data.train.size()},
                        {"test", data.test.size()},
                        {"classes", data.classes}};
  std::optional<CostReport> ic_cost, mp_cost;

  for (const auto& [label, spec] : models(cfg.model, c.no_twin)) {
    std::printf("[%s] training %zu repeat(s) of %zu epoch(s)\n", label.c_str(),
                cfg.train.repeat_count, cfg.train.epochs);
    std::fflush(stdout);
    Network best = build_network(spec, data.example_shape(), data.classes, 0);
    const RepeatResult result = run_repeats(spec, data, cfg.train, &best);
    const CostReport cost = count_params(best);
    (label == "ic" ? ic_cost : mp_cost) = cost;

    json repeats = json::array();
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
      const RunRecord& run = result.runs[r];
      write_file(out / label / ("repeat-" + std::to_string(r) + ".csv"), curves_csv(run, timing));
      repeats.push_back({{"final_test_acc", run.final_test_acc()},
                         {"final_smoothed", run.final_smoothed()}});
    }
    write_file(out / label / "curves.csv", curves_csv(result.runs[result.best], timing));
    save_params(best, out / label / "params.icn");

    summary["models"][label] = {{"unit", to_string(spec.unit)},
                                {"best_repeat", result.best},
                                {"best_accuracy", result.best_accuracy()},
                                {"repeats", repeats},
                                {"cost", cost_json(cost)}};
    std::printf("[%s] best-of-%zu accuracy %.4f (repeat %zu)\n", label.c_str(),
                result.runs.size(), result.best_accuracy(), result.best);
  }
  if (ic_cost && mp_cost) {
    const CostComparison cmp{*ic_cost, *mp_cost};
    summary["overhead"] = {{"params", cmp.param_overhead()}, {"macs", cmp.mac_overhead()}};
  }
  write_file(out / "summary.json", summary.dump(2) + "\n");
  std::printf("wrote %s\n", out.string().c_str());
  return 0;
}

int cmd_gradcheck(const Common& c, bool corrupt) {
  const ExperimentConfig cfg = resolve(c);
  const Dataset data = load_dataset(cfg.dataset, c.data_dir);
  const std::size_t batch = std::min(cfg.gradcheck.batch, data.train.size());
  std::vector<std::size_t> first(batch);
  for (std::size_t i = 0; i < batch; ++i) first[i] = i;
  const Split sample = take(data.train, first);

  GradcheckOptions opts;
  opts.step = cfg.gradcheck.step;
  opts.max_coords = cfg.gradcheck.max_coords;
  if (corrupt) {
    opts.corrupt = [](std::vector<Param>& params) { (*params.front().grad)[0] += 1.0; };
  }

  bool ok = true;
  std::string text;
  for (const auto& [label, spec] : models(cfg.model, c.no_twin)) {
    Network net = build_network(spec, data.example_shape(), data.classes,
                                derive_seed(cfg.train.seed, "init", 0));
    const GradReport report =
        gradcheck(net, sample.features, sample.labels, cfg.gradcheck.tolerance, opts);
    text += "model: " + label + "\n" + report.to_text();
    ok = ok && report.passed();
  }
  std::fputs(text.c_str(), stdout);
  if (!c.out.empty()) write_file(fs::path(c.out) / "gradcheck.txt", text);
  return ok ? 0 : kFailure;
}

int cmd_analyze(const std::vector<double>& w, double from, double to, std::size_t steps,
                const std::string& out) {
  if (w.size() < 2) {
    std::fprintf(stderr, "analyze: --w needs at least two weights\n");
    return kUsage;
  }
  if (steps < 2 || !(to > from)) {
    std::fprintf(stderr, "analyze: need --steps >= 2 and --to > --from\n");
    return kUsage;
  }
  std::vector<double> sweep;
  for (std::size_t i = 0; i < steps; ++i)
    sweep.push_back(from + (to - from) * static_cast<double>(i) / static_cast<double>(steps - 1));
  // The orthogonal point sum(w)/n is always part of the sweep when in range.
  double sum = 0.0;
  for (double v : w) sum += v;
  const double ortho = sum / static_cast<double>(w.size());
  if (ortho >= from && ortho <= to) {
    const auto at = std::lower_bound(sweep.begin(), sweep.end(), ortho);
    if (at == sweep.end() || *at != ortho) sweep.insert(at, ortho);
  }

  std::string csv = "w_prime,cos_theta,degenerate\n";
  char line[128];
  for (double wp : sweep) {
    const HyperplaneReport r = hyperplane_cos_angle(w, wp);
    std::snprintf(line, sizeof line, "%.12g,%.12g,%d\n", wp, r.cos_theta, r.degenerate ? 1 : 0);
    csv += line;
  }
  if (out.empty()) {
    std::fputs(csv.c_str(), stdout);
  } else {
    write_file(fs::path(out) / "analyze.csv", csv);
    std::printf("wrote %s\n", (fs::path(out) / "analyze.csv").string().c_str());
  }
  return 0;
}

int cmd_xor_demo(std::uint64_t seed, std::uint64_t seeds, std::size_t epochs) {
  const ICParams p = xor_closed_form();
  const Dataset xor_data = make_xor();
  std::printf("closed-form neuron: w = (%.4f, %.4f), w' = %.4f, b1 = %.4f, b2 = %.4f, f = relu\n",
              p.w[0], p.w[1], p.w_prime, p.b1, p.b2);
  std::printf("%-8s %-6s %s\n", "x", "label", "y");
  double lo_pos = 1e300, hi_neg = -1e300;
  for (std::size_t i = 0; i < 4; ++i) {
    const double x[2] = {xor_data.train.features(i, 0), xor_data.train.features(i, 1)};
    const double y = activate(ic_preactivation(x, p), Activation::relu());
    const int label = xor_data.train.labels[i];
    // Label-0 points sit above the gap, label-1 points at zero.
    if (label == 0) lo_pos = std::min(lo_pos, y);
    else hi_neg = std::max(hi_neg, y);
    std::printf("(%g,%g)    %-6d %.4f\n", x[0], x[1], label, y);
  }
  std::printf("margin: %.4f\n", lo_pos - hi_neg);

  std::size_t separated = 0;
  for (std::uint64_t k = 0; k < seeds; ++k) {
    const XorTrial trial = train_xor_neuron(UnitKind::ic_standard, seed + k, epochs);
    if (trial.epochs_to_separation) {
      ++separated;
      std::printf("seed %llu: 4/4 after %zu epochs\n", static_cast<unsigned long long>(seed + k),
                  *trial.epochs_to_separation);
    } else {
      std::printf("seed %llu: %.0f/4 after %zu epochs (not separated)\n",
                  static_cast<unsigned long long>(seed + k), trial.final_accuracy * 4, epochs);
    }
  }
  std::printf("trained standard IC neuron separated XOR on %zu of %llu seeds\n", separated,
              static_cast<unsigned long long>(seeds));
  if (separated == 0) return kFailure;
  return 0;
}

int cmd_count(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const DatasetShape shape = dataset_shape(cfg.dataset.name);
  std::optional<CostReport> ic, mp;
  for (const auto& [label, spec] : models(cfg.model, c.no_twin)) {
    const Network net = build_network(spec, shape.input, shape.classes, 0);
    const CostReport r = count_params(net);
    std::printf("[%s]\n%s", label.c_str(), to_text(r).c_str());
    std::printf("kilo-params %.3f, kilo-MACs %.3f\n\n", r.kilo_params(), r.kilo_macs());
    if (!c.out.empty()) write_file(fs::path(c.out) / ("cost-" + label + ".csv"), to_csv(r));
    (label == "ic" ? ic : mp) = r;
  }
  if (ic && mp) {
    const CostComparison cmp{*ic, *mp};
    std::printf("overhead vs MP twin: params %+.4f, MACs %+.4f\n", cmp.param_overhead(),
                cmp.mac_overhead());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IC neuron toolkit"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub, bool training) {
    sub->add_option("--config", common.config, "Experiment file (JSON)")->required();
    sub->add_option("--out", common.out, "Output directory (overrides output.dir)");
    sub->add_option("--seed", common.seed, "Base seed (overrides train.seed)");
    sub->add_flag("--no-twin", common.no_twin, "Skip the automatically generated MP twin");
    sub->add_option("--data-dir", common.data_dir, "Dataset root")->capture_default_str();
    if (training) sub->add_option("--subset", common.subset, "Keep the first N training examples");
  };

  auto* train_cmd = app.add_subcommand("train", "Best-of-repeats training of a model and its MP twin");
  add_common(train_cmd, true);
  bool timing = false;
  train_cmd->add_flag("--timing", timing, "Record wall-clock seconds in the curves");

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of backprop");
  add_common(grad_cmd, true);
  bool corrupt = false;
  grad_cmd->add_flag("--corrupt-gradient", corrupt, "Perturb one analytic gradient (negative control)")
      ->group("");

  auto* analyze_cmd = app.add_subcommand("analyze", "Sweep w' and report the hyperplane angle");
  std::vector<double> w;
  double from = -1000.0, to = 1000.0;
  std::size_t steps = 201;
  std::string analyze_out;
  analyze_cmd->add_option("--w", w, "Weights, comma separated")->required()->delimiter(',');
  analyze_cmd->add_option("--from", from, "First w'")->capture_default_str();
  analyze_cmd->add_option("--to", to, "Last w'")->capture_default_str();
  analyze_cmd->add_option("--steps", steps, "Evenly spaced sweep points")->capture_default_str();
  analyze_cmd->add_option("--out", analyze_out, "Directory for analyze.csv (stdout if unset)");

  auto* xor_cmd = app.add_subcommand("xor-demo", "Closed-form and trained single-neuron XOR");
  std::uint64_t xor_seed = 1;
  std::uint64_t xor_seeds = 5;
  std::size_t xor_epochs = 2000;
  xor_cmd->add_option("--seed", xor_seed, "First training seed")->capture_default_str();
  xor_cmd->add_option("--seeds", xor_seeds, "Number of consecutive seeds to train")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  xor_cmd->add_option("--epochs", xor_epochs, "Epoch cap")->capture_default_str();

  auto* count_cmd = app.add_subcommand("count", "Parameter and MAC counts against the MP twin");
  add_common(count_cmd, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return cmd_train(common, timing);
    if (*grad_cmd) return cmd_gradcheck(common, corrupt);
    if (*analyze_cmd) return cmd_analyze(w, from, to, steps, analyze_out);
    if (*xor_cmd) return cmd_xor_demo(xor_seed, xor_seeds, xor_epochs);
    if (*count_cmd) return cmd_count(common);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsage;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "diverged at epoch %zu: %s\n", e.epoch(), e.what());
    return kFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kUsage;
}
