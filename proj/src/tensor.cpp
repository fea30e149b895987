#include "icn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "icn/errors.hpp"

namespace icn {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_size(shape_) != values_.size()) {
    throw DimensionError("tensor shape " + shape_str(shape_) + " does not hold " +
                         std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    v.insert(v.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(v));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != values_.size()) {
    throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  return Tensor(std::move(shape), values_);
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

Tensor Tensor::rows(std::size_t begin, std::size_t end) const {
  if (shape_.empty() || begin > end || end > shape_[0]) {
    throw DimensionError("row slice out of range for " + shape_str(shape_));
  }
  const std::size_t stride = shape_[0] ? values_.size() / shape_[0] : 0;
  Shape s = shape_;
  s[0] = end - begin;
  return Tensor(std::move(s), std::vector<double>(values_.begin() + begin * stride,
                                                  values_.begin() + end * stride));
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Tensor gather(const Tensor& t, std::span<const std::size_t> indices) {
  if (t.rank() == 0) throw DimensionError("gather on a scalar tensor");
  const std::size_t stride = t.dim(0) ? t.size() / t.dim(0) : 0;
  Shape s = t.shape();
  s[0] = indices.size();
  Tensor out(s);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= t.dim(0)) throw DimensionError("gather index out of range");
    std::copy_n(t.data() + indices[i] * stride, stride, out.data() + i * stride);
  }
  return out;
}

namespace {

void require_matrix(const Tensor& t, const char* name) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(name) + " must be 2-D, got " + shape_str(t.shape()));
  }
}

// out[m×n] += a[m×k] · b[k×n] with b row-major. Four output rows share each
// pass over b; the k loop stays outermost per element so accumulation order
// is ascending k.
void gemm_nn(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
             std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    double* o0 = out + i * n;
    double* o1 = o0 + n;
    double* o2 = o1 + n;
    double* o3 = o2 + n;
    const double* a0 = a + i * k;
    const double* a1 = a0 + k;
    const double* a2 = a1 + k;
    const double* a3 = a2 + k;
    for (std::size_t p = 0; p < k; ++p) {
      const double v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double bv = brow[j];
        o0[j] += v0 * bv;
        o1[j] += v1 * bv;
        o2[j] += v2 * bv;
        o3[j] += v3 * bv;
      }
    }
  }
  for (; i < m; ++i) {
    double* o = out + i * n;
    const double* ar = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double v = ar[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += v * brow[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul lhs");
  require_matrix(b, "matmul rhs");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul shape mismatch: " + shape_str(a.shape()) + " · " +
                         shape_str(b.shape()));
  }
  Tensor out({a.dim(0), b.dim(1)});
  gemm_nn(a.data(), b.data(), out.data(), a.dim(0), a.dim(1), b.dim(1));
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn lhs");
  require_matrix(b, "matmul_tn rhs");
  if (a.dim(0) != b.dim(0)) {
    throw DimensionError("matmul_tn shape mismatch: " + shape_str(a.shape()) + "ᵀ · " +
                         shape_str(b.shape()));
  }
  return matmul(transpose(a), b);
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt lhs");
  require_matrix(b, "matmul_nt rhs");
  if (a.dim(1) != b.dim(1)) {
    throw DimensionError("matmul_nt shape mismatch: " + shape_str(a.shape()) + " · " +
                         shape_str(b.shape()) + "ᵀ");
  }
  return matmul(a, transpose(b));
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose operand");
  const std::size_t r = a.dim(0), c = a.dim(1);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  return out;
}

Tensor identity(std::size_t n) {
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  add_inplace(out, b);
  return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add shape mismatch: " + shape_str(a.shape()) + " + " +
                         shape_str(b.shape()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

std::vector<double> row_sums(const Tensor& a) {
  require_matrix(a, "row_sums operand");
  std::vector<double> out(a.dim(0), 0.0);
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.dim(1); ++j) s += a(i, j);
    out[i] = s;
  }
  return out;
}

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::relu: return "relu";
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::elu: return "elu";
    case ActivationKind::sigmoid: return "sigmoid";
    case ActivationKind::identity: return "identity";
  }
  return "?";
}

ActivationKind activation_from_string(const std::string& name) {
  for (auto k : {ActivationKind::relu, ActivationKind::tanh, ActivationKind::elu,
                 ActivationKind::sigmoid, ActivationKind::identity}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown activation '" + name + "'");
}

double activate(double x, Activation act) {
  switch (act.kind) {
    case ActivationKind::relu: return x > 0.0 ? x : 0.0;
    case ActivationKind::tanh: return std::tanh(x);
    case ActivationKind::elu: return x >= 0.0 ? x : act.alpha * std::expm1(x);
    case ActivationKind::sigmoid:
      // Split on sign so exp never overflows.
      if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
      else {
        const double e = std::exp(x);
        return e / (1.0 + e);
      }
    case ActivationKind::identity: return x;
  }
  return x;
}

double activate_grad(double x, Activation act) {
  switch (act.kind) {
    case ActivationKind::relu: return x > 0.0 ? 1.0 : 0.0;
    case ActivationKind::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case ActivationKind::elu: return x >= 0.0 ? 1.0 : act.alpha * std::exp(x);
    case ActivationKind::sigmoid: {
      const double s = activate(x, act);
      return s * (1.0 - s);
    }
    case ActivationKind::identity: return 1.0;
  }
  return 1.0;
}

Tensor activate(const Tensor& a, Activation act) {
  Tensor out = a;
  for (double& v : out.values()) v = activate(v, act);
  return out;
}

Tensor activate_grad(const Tensor& a, Activation act) {
  Tensor out = a;
  for (double& v : out.values()) v = activate_grad(v, act);
  return out;
}

Tensor softmax(const Tensor& logits) {
  require_matrix(logits, "softmax logits");
  Tensor out = logits;
  const std::size_t c = logits.dim(1);
  for (std::size_t i = 0; i < logits.dim(0); ++i) {
    double* row = out.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      row[j] = std::exp(row[j] - mx);
      z += row[j];
    }
    for (std::size_t j = 0; j < c; ++j) row[j] /= z;
  }
  return out;
}

LossAndGrad softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_matrix(logits, "cross-entropy logits");
  const std::size_t batch = logits.dim(0), c = logits.dim(1);
  if (c < 2) throw DimensionError("cross-entropy needs at least 2 classes");
  if (labels.size() != batch) {
    throw DimensionError("cross-entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(batch) + " rows");
  }
  if (batch == 0) throw ContractError("cross-entropy on an empty batch");
  LossAndGrad out{0.0, Tensor({batch, c})};
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw LabelError("label " + std::to_string(y) + " outside [0, " + std::to_string(c) + ")");
    }
    const double* row = logits.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const double log_z = std::log(z);
    out.loss += (log_z - (row[y] - mx)) * inv_batch;
    double* g = out.grad_logits.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) {
      const double p = std::exp(row[j] - mx - log_z);
      g[j] = (p - (static_cast<std::size_t>(y) == j ? 1.0 : 0.0)) * inv_batch;
    }
  }
  return out;
}

}  // namespace icn
