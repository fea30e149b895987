#include "icn/grad.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "icn/errors.hpp"

namespace icn {

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

namespace {

double checked(double v, const char* where) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite loss during ") + where);
  return v;
}

}  // namespace

std::vector<double> finite_diff(const std::function<double(std::span<const double>)>& loss,
                                std::span<const double> theta, double step) {
  if (!(step > 0.0)) throw ContractError("finite_diff step must be positive");
  std::vector<double> probe(theta.begin(), theta.end());
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double up = checked(loss(probe), "finite differences");
    probe[i] = orig - step;
    const double down = checked(loss(probe), "finite differences");
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

std::vector<Tensor> finite_diff(const std::function<double()>& loss,
                                std::span<Tensor* const> params, double step) {
  if (!(step > 0.0)) throw ContractError("finite_diff step must be positive");
  std::vector<Tensor> grads;
  for (Tensor* t : params) {
    Tensor g(t->shape());
    for (std::size_t i = 0; i < t->size(); ++i) {
      const double orig = (*t)[i];
      (*t)[i] = orig + step;
      const double up = checked(loss(), "finite differences");
      (*t)[i] = orig - step;
      const double down = checked(loss(), "finite differences");
      (*t)[i] = orig;
      g[i] = (up - down) / (2.0 * step);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

double GradReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& p : params) m = std::max(m, p.max_rel_error);
  return m;
}

std::string GradReport::to_text() const {
  std::ostringstream os;
  os.precision(6);
  os << "status: " << (passed() ? "pass" : "fail") << "\n";
  os << "tolerance: " << tolerance << "\n";
  os << "checked: " << checked << "\n";
  os << "kink_excluded: " << kink_excluded << "\n";
  os << "max_rel_error: " << max_rel_error() << "\n";
  os << "params:\n";
  for (const auto& p : params) {
    os << "  - name: " << p.name << "\n";
    os << "    checked: " << p.checked << "\n";
    os << "    excluded: " << p.excluded << "\n";
    os << "    max_rel_error: " << p.max_rel_error << "\n";
  }
  os << "failures:" << (failures.empty() ? " []" : "") << "\n";
  for (const auto& f : failures) {
    os << "  - {param: " << f.param << ", index: " << f.index << ", analytic: " << f.analytic
       << ", numeric: " << f.numeric << ", rel_error: " << f.rel_error << "}\n";
  }
  return os.str();
}

GradReport gradcheck(Network& net, const Tensor& batch, std::span<const int> labels,
                     double tolerance, const GradcheckOptions& options) {
  GradReport report;
  report.tolerance = tolerance;

  NetworkCache cache;
  net.zero_grad();
  const Tensor logits = net.forward(batch, cache);
  const LossAndGrad lg = softmax_cross_entropy(logits, labels);
  net.backward(cache, lg.grad_logits);
  const std::vector<double> base_kinks = net.kink_args(cache);

  std::vector<Param> params = net.params();
  if (options.corrupt) options.corrupt(params);

  // Loss and kink arguments at the current (perturbed) parameters.
  auto probe = [&](std::vector<double>& kinks) {
    NetworkCache c;
    const Tensor out = net.forward(batch, c);
    kinks = net.kink_args(c);
    return checked(softmax_cross_entropy(out, labels).loss, "gradcheck");
  };

  std::vector<double> kinks_up, kinks_down;
  for (Param& p : params) {
    ParamGradStats stats{p.name};
    const std::size_t size = p.value->size();
    const std::size_t count =
        options.max_coords ? std::min(size, options.max_coords) : size;
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t i = count == size ? k : k * size / count;
      const double orig = (*p.value)[i];
      (*p.value)[i] = orig + options.step;
      const double up = probe(kinks_up);
      (*p.value)[i] = orig - options.step;
      const double down = probe(kinks_down);
      (*p.value)[i] = orig;

      bool near_kink = false;
      for (std::size_t k = 0; k < base_kinks.size() && !near_kink; ++k) {
        const bool moved = kinks_up[k] != kinks_down[k];
        const bool crossed = (kinks_up[k] > 0.0) != (kinks_down[k] > 0.0) ||
                             (kinks_up[k] > 0.0) != (base_kinks[k] > 0.0);
        near_kink = crossed || (moved && std::abs(base_kinks[k]) < options.kink_threshold);
      }
      if (near_kink) {
        ++stats.excluded;
        continue;
      }
      const double numeric = (up - down) / (2.0 * options.step);
      const double analytic = (*p.grad)[i];
      const double err = relative_error(analytic, numeric);
      ++stats.checked;
      stats.max_rel_error = std::max(stats.max_rel_error, err);
      if (err > tolerance) report.failures.push_back({p.name, i, analytic, numeric, err});
    }
    report.checked += stats.checked;
    report.kink_excluded += stats.excluded;
    report.params.push_back(std::move(stats));
  }
  net.mark_updated();
  return report;
}

}  // namespace icn
