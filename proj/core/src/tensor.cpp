#include "relic/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "relic/errors.hpp"

namespace relic {

namespace {

std::atomic<std::uint64_t> next_id{1};

thread_local Tape* active_tape = nullptr;

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

using MatRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using ConstMapRM = Eigen::Map<const MatRM>;

}  // namespace

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : Tensor(Tensor::scalar(0.0).data_) {}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from({v}, {}, requires_grad);
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v,
                    bool requires_grad) {
  std::vector<double> values(product(shape), v);
  return from(std::move(values), std::move(shape), requires_grad);
}

Tensor Tensor::from(std::vector<double> values, std::vector<std::size_t> shape,
                    bool requires_grad) {
  if (shape.size() > 2) {
    throw ShapeError("tensor rank > 2 unsupported: " + shape_string(shape));
  }
  for (auto e : shape) {
    if (e == 0) throw ShapeError("zero extent in shape " + shape_string(shape));
  }
  if (values.size() != product(shape)) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not fill shape " + shape_string(shape));
  }
  auto data = std::make_shared<detail::TensorData>();
  data->shape = std::move(shape);
  data->values = std::move(values);
  data->requires_grad = requires_grad;
  if (requires_grad) data->adjoint.assign(data->values.size(), 0.0);
  data->id = next_id.fetch_add(1, std::memory_order_relaxed);
  return Tensor(std::move(data));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows() on non-matrix " + shape_string(shape()));
  return data_->shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols() on non-matrix " + shape_string(shape()));
  return data_->shape[1];
}

double Tensor::item() const {
  if (rank() != 0) {
    throw ShapeError("item() on non-scalar " + shape_string(shape()));
  }
  return data_->values[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  return data_->values.at(i * cols() + j);
}

const std::vector<double>& Tensor::adjoint() const {
  if (!data_->requires_grad) {
    throw StateError("adjoint requested on tensor without requires_grad");
  }
  return data_->adjoint;
}

std::vector<double>& Tensor::mutable_adjoint() {
  if (!data_->requires_grad) {
    throw StateError("adjoint requested on tensor without requires_grad");
  }
  return data_->adjoint;
}

void Tensor::zero_adjoint() {
  if (data_->requires_grad) {
    std::fill(data_->adjoint.begin(), data_->adjoint.end(), 0.0);
  }
}

Tape::Scope::Scope(Tape& tape) : previous_(active_tape) {
  if (tape.consumed_) throw StateError("activating a consumed tape");
  active_tape = &tape;
}

Tape::Scope::~Scope() { active_tape = previous_; }

Tape* Tape::active() { return active_tape; }

void Tape::backward(const Tensor& root) {
  if (consumed_) throw StateError("backward on a consumed tape");
  if (root.rank() != 0) {
    throw ContractError("backward root must be scalar, got " +
                        shape_string(root.shape()));
  }
  if (root.producer() != this) {
    throw ContractError("backward root was not produced on this tape");
  }
  consumed_ = true;
  // Exact adjoints, not accumulation across tapes: zero everything this
  // tape touches before seeding.
  for (auto& node : nodes_) {
    for (auto& in : node.inputs) {
      if (in->requires_grad) std::fill(in->adjoint.begin(), in->adjoint.end(), 0.0);
    }
    std::fill(node.output->adjoint.begin(), node.output->adjoint.end(), 0.0);
  }
  root.handle()->adjoint[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->pull();
}

namespace {

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (active_tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

Tensor finish_op(const char* name, std::vector<std::size_t> shape,
                 std::vector<double> values,
                 std::initializer_list<const Tensor*> inputs,
                 std::function<void(detail::TensorData&)> pull) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(name) + " produced a non-finite value");
    }
  }
  const bool rec = should_record(inputs);
  Tensor out = Tensor::from(std::move(values), std::move(shape), rec);
  if (rec) {
    out.handle()->producer = active_tape;
    Tape::Node node;
    for (const Tensor* t : inputs) node.inputs.push_back(t->handle());
    node.output = out.handle();
    auto out_data = out.handle();
    node.pull = [out_data, pull = std::move(pull)]() { pull(*out_data); };
    active_tape->push(std::move(node));
  }
  return out;
}

// Limited broadcasting: identical shapes, scalar against anything, or a row
// vector ({n} or {1,n}) against a {m,n} matrix.
enum class BMode { kSame, kScalar, kRow };

struct BroadcastPlan {
  std::vector<std::size_t> out_shape;
  std::size_t rows = 1, cols = 1;
  BMode a = BMode::kSame, b = BMode::kSame;

  std::size_t a_index(std::size_t i, std::size_t j) const {
    return map(a, i, j);
  }
  std::size_t b_index(std::size_t i, std::size_t j) const {
    return map(b, i, j);
  }

 private:
  std::size_t map(BMode m, std::size_t i, std::size_t j) const {
    switch (m) {
      case BMode::kSame: return i * cols + j;
      case BMode::kScalar: return 0;
      case BMode::kRow: return j;
    }
    return 0;
  }
};

bool is_row_of(const std::vector<std::size_t>& v,
               const std::vector<std::size_t>& m) {
  if (m.size() != 2) return false;
  if (v.size() == 1) return v[0] == m[1];
  if (v.size() == 2) return v[0] == 1 && v[1] == m[1];
  return false;
}

BroadcastPlan make_plan(const char* name, const Tensor& a, const Tensor& b) {
  BroadcastPlan p;
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  auto fill_dims = [&p](const std::vector<std::size_t>& s) {
    p.out_shape = s;
    p.rows = s.size() == 2 ? s[0] : 1;
    p.cols = s.empty() ? 1 : s.back();
  };
  if (sa == sb) {
    fill_dims(sa);
    return p;
  }
  if (sa.empty()) {
    p.a = BMode::kScalar;
    fill_dims(sb);
    return p;
  }
  if (sb.empty()) {
    p.b = BMode::kScalar;
    fill_dims(sa);
    return p;
  }
  if (is_row_of(sb, sa)) {
    p.b = BMode::kRow;
    fill_dims(sa);
    return p;
  }
  if (is_row_of(sa, sb)) {
    p.a = BMode::kRow;
    fill_dims(sb);
    return p;
  }
  throw ShapeError(std::string(name) + ": incompatible shapes " +
                   shape_string(sa) + " and " + shape_string(sb));
}

template <class Fwd, class DfA, class DfB>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fwd fwd,
                 DfA dfa, DfB dfb) {
  BroadcastPlan plan = make_plan(name, a, b);
  std::vector<double> out(plan.rows * plan.cols);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < plan.rows; ++i) {
    for (std::size_t j = 0; j < plan.cols; ++j) {
      out[i * plan.cols + j] = fwd(av[plan.a_index(i, j)], bv[plan.b_index(i, j)]);
    }
  }
  auto ah = a.handle();
  auto bh = b.handle();
  return finish_op(
      name, plan.out_shape, std::move(out), {&a, &b},
      [ah, bh, plan, dfa, dfb](detail::TensorData& o) {
        for (std::size_t i = 0; i < plan.rows; ++i) {
          for (std::size_t j = 0; j < plan.cols; ++j) {
            const std::size_t k = i * plan.cols + j;
            const double g = o.adjoint[k];
            const double x = ah->values[plan.a_index(i, j)];
            const double y = bh->values[plan.b_index(i, j)];
            if (ah->requires_grad) ah->adjoint[plan.a_index(i, j)] += g * dfa(x, y);
            if (bh->requires_grad) bh->adjoint[plan.b_index(i, j)] += g * dfb(x, y);
          }
        }
      });
}

template <class Fwd, class Df>
Tensor unary_op(const char* name, const Tensor& x, Fwd fwd, Df df) {
  std::vector<double> out(x.numel());
  const auto& xv = x.values();
  for (std::size_t k = 0; k < xv.size(); ++k) out[k] = fwd(xv[k]);
  auto xh = x.handle();
  return finish_op(name, x.shape(), std::move(out), {&x},
                   [xh, df](detail::TensorData& o) {
                     if (!xh->requires_grad) return;
                     for (std::size_t k = 0; k < o.values.size(); ++k) {
                       xh->adjoint[k] += o.adjoint[k] * df(xh->values[k], o.values[k]);
                     }
                   });
}

}  // namespace

void Tape::push(Node node) { nodes_.push_back(std::move(node)); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul: incompatible shapes " + shape_string(a.shape()) +
                     " and " + shape_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n);
  {
    ConstMapRM A(a.values().data(), m, k);
    ConstMapRM B(b.values().data(), k, n);
    MapRM C(out.data(), m, n);
    C.noalias() = A * B;
  }
  auto ah = a.handle();
  auto bh = b.handle();
  return finish_op("matmul", {m, n}, std::move(out), {&a, &b},
                   [ah, bh, m, k, n](detail::TensorData& o) {
                     ConstMapRM G(o.adjoint.data(), m, n);
                     ConstMapRM A(ah->values.data(), m, k);
                     ConstMapRM B(bh->values.data(), k, n);
                     if (ah->requires_grad) {
                       MapRM dA(ah->adjoint.data(), m, k);
                       dA.noalias() += G * B.transpose();
                     }
                     if (bh->requires_grad) {
                       MapRM dB(bh->adjoint.data(), k, n);
                       dB.noalias() += A.transpose() * G;
                     }
                   });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double y : b.values()) {
    if (y == 0.0) throw DomainError("div: zero divisor");
  }
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor relu(const Tensor& x) {
  return unary_op(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& x) {
  return unary_op(
      "exp", x, [](double v) { return std::exp(v); },
      [](double, double o) { return o; });
}

Tensor log(const Tensor& x) {
  for (double v : x.values()) {
    if (v <= 0.0) throw DomainError("log: nonpositive operand");
  }
  return unary_op(
      "log", x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor neg(const Tensor& x) {
  return unary_op(
      "neg", x, [](double v) { return -v; },
      [](double, double) { return -1.0; });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  auto xh = x.handle();
  return finish_op("sum", {}, {acc}, {&x}, [xh](detail::TensorData& o) {
    if (!xh->requires_grad) return;
    const double g = o.adjoint[0];
    for (double& a : xh->adjoint) a += g;
  });
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.numel());
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  auto xh = x.handle();
  return finish_op("mean", {}, {acc / n}, {&x}, [xh, n](detail::TensorData& o) {
    if (!xh->requires_grad) return;
    const double g = o.adjoint[0] / n;
    for (double& a : xh->adjoint) a += g;
  });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) {
    throw ShapeError("transpose: expected matrix, got " + shape_string(x.shape()));
  }
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x.values()[i * n + j];
  }
  auto xh = x.handle();
  return finish_op("transpose", {n, m}, std::move(out), {&x},
                   [xh, m, n](detail::TensorData& o) {
                     if (!xh->requires_grad) return;
                     for (std::size_t i = 0; i < m; ++i) {
                       for (std::size_t j = 0; j < n; ++j) {
                         xh->adjoint[i * n + j] += o.adjoint[j * m + i];
                       }
                     }
                   });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: empty part list");
  if (parts[0].rank() != 2) {
    throw ShapeError("concat_rows: expected matrices, got " +
                     shape_string(parts[0].shape()));
  }
  const std::size_t n = parts[0].cols();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.cols() != n) {
      throw ShapeError("concat_rows: column mismatch, " +
                       shape_string(parts[0].shape()) + " vs " +
                       shape_string(p.shape()));
    }
    total += p.rows();
  }
  std::vector<double> out;
  out.reserve(total * n);
  for (const Tensor& p : parts) {
    out.insert(out.end(), p.values().begin(), p.values().end());
  }

  bool rec = false;
  std::vector<std::shared_ptr<detail::TensorData>> handles;
  handles.reserve(parts.size());
  for (const Tensor& p : parts) {
    handles.push_back(p.handle());
    rec = rec || p.requires_grad();
  }
  rec = rec && Tape::active() != nullptr;
  Tensor result = Tensor::from(std::move(out), {total, n}, rec);
  if (rec) {
    result.handle()->producer = Tape::active();
    Tape::Node node;
    node.inputs = handles;
    node.output = result.handle();
    auto oh = result.handle();
    node.pull = [handles, oh]() {
      std::size_t offset = 0;
      for (auto& h : handles) {
        const std::size_t len = h->values.size();
        if (h->requires_grad) {
          for (std::size_t k = 0; k < len; ++k) h->adjoint[k] += oh->adjoint[offset + k];
        }
        offset += len;
      }
    };
    Tape::active()->push(std::move(node));
  }
  return result;
}

namespace {

// Stable softmax of one row; returns the log-sum-exp alongside.
void softmax_row(const double* x, std::size_t n, double* y, double* lse) {
  double m = x[0];
  for (std::size_t j = 1; j < n; ++j) m = std::max(m, x[j]);
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    y[j] = std::exp(x[j] - m);
    s += y[j];
  }
  for (std::size_t j = 0; j < n; ++j) y[j] /= s;
  *lse = m + std::log(s);
}

}  // namespace

Tensor row_softmax(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw ShapeError("row_softmax: expected matrix, got " +
                     shape_string(logits.shape()));
  }
  const std::size_t m = logits.rows(), n = logits.cols();
  std::vector<double> out(m * n);
  double lse;
  for (std::size_t i = 0; i < m; ++i) {
    softmax_row(logits.values().data() + i * n, n, out.data() + i * n, &lse);
  }
  auto xh = logits.handle();
  return finish_op("row_softmax", {m, n}, std::move(out), {&logits},
                   [xh, m, n](detail::TensorData& o) {
                     if (!xh->requires_grad) return;
                     for (std::size_t i = 0; i < m; ++i) {
                       const double* y = o.values.data() + i * n;
                       const double* g = o.adjoint.data() + i * n;
                       double dot = 0.0;
                       for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
                       for (std::size_t j = 0; j < n; ++j) {
                         xh->adjoint[i * n + j] += y[j] * (g[j] - dot);
                       }
                     }
                   });
}

Tensor row_log_softmax(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw ShapeError("row_log_softmax: expected matrix, got " +
                     shape_string(logits.shape()));
  }
  const std::size_t m = logits.rows(), n = logits.cols();
  std::vector<double> out(m * n);
  std::vector<double> soft(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    double lse;
    softmax_row(logits.values().data() + i * n, n, soft.data() + i * n, &lse);
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = logits.values()[i * n + j] - lse;
    }
  }
  auto xh = logits.handle();
  return finish_op("row_log_softmax", {m, n}, std::move(out), {&logits},
                   [xh, soft = std::move(soft), m, n](detail::TensorData& o) {
                     if (!xh->requires_grad) return;
                     for (std::size_t i = 0; i < m; ++i) {
                       const double* g = o.adjoint.data() + i * n;
                       double gsum = 0.0;
                       for (std::size_t j = 0; j < n; ++j) gsum += g[j];
                       for (std::size_t j = 0; j < n; ++j) {
                         xh->adjoint[i * n + j] += g[j] - soft[i * n + j] * gsum;
                       }
                     }
                   });
}

Tensor l2_normalize(const Tensor& x, std::size_t axis, double eps) {
  if (axis >= std::max<std::size_t>(x.rank(), 1)) {
    throw ContractError("l2_normalize: axis " + std::to_string(axis) +
                        " out of range for " + shape_string(x.shape()));
  }
  // axis is the dimension the norm reduces over: axis=1 on a matrix gives
  // unit-norm rows, axis=0 unit-norm columns; rank-1 uses axis=0.
  std::size_t slices, len, slice_stride, elem_stride;
  if (x.rank() <= 1) {
    slices = 1;
    len = x.numel();
    slice_stride = 0;
    elem_stride = 1;
  } else if (axis == 1) {
    slices = x.rows();
    len = x.cols();
    slice_stride = x.cols();
    elem_stride = 1;
  } else {
    slices = x.cols();
    len = x.rows();
    slice_stride = 1;
    elem_stride = x.cols();
  }
  std::vector<double> out(x.numel());
  std::vector<double> norms(slices);
  std::vector<char> passthrough(slices);
  for (std::size_t s = 0; s < slices; ++s) {
    const std::size_t base = s * slice_stride;
    double sq = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
      const double v = x.values()[base + j * elem_stride];
      sq += v * v;
    }
    const double norm = std::sqrt(sq);
    norms[s] = norm;
    passthrough[s] = norm < eps ? 1 : 0;
    for (std::size_t j = 0; j < len; ++j) {
      const std::size_t k = base + j * elem_stride;
      out[k] = passthrough[s] ? x.values()[k] : x.values()[k] / norm;
    }
  }
  auto xh = x.handle();
  return finish_op(
      "l2_normalize", x.shape(), std::move(out), {&x},
      [xh, norms = std::move(norms), passthrough = std::move(passthrough),
       slices, len, slice_stride, elem_stride](detail::TensorData& o) {
        if (!xh->requires_grad) return;
        for (std::size_t s = 0; s < slices; ++s) {
          const std::size_t base = s * slice_stride;
          if (passthrough[s]) {
            for (std::size_t j = 0; j < len; ++j) {
              const std::size_t k = base + j * elem_stride;
              xh->adjoint[k] += o.adjoint[k];
            }
            continue;
          }
          double dot = 0.0;
          for (std::size_t j = 0; j < len; ++j) {
            const std::size_t k = base + j * elem_stride;
            dot += o.adjoint[k] * o.values[k];
          }
          for (std::size_t j = 0; j < len; ++j) {
            const std::size_t k = base + j * elem_stride;
            xh->adjoint[k] += (o.adjoint[k] - dot * o.values[k]) / norms[s];
          }
        }
      });
}

Tensor pick_rows(const Tensor& x, const std::vector<std::size_t>& indices) {
  if (x.rank() != 2) {
    throw ShapeError("pick_rows: expected matrix, got " + shape_string(x.shape()));
  }
  if (indices.size() != x.rows()) {
    throw ContractError("pick_rows: need one index per row, got " +
                        std::to_string(indices.size()) + " for " +
                        std::to_string(x.rows()) + " rows");
  }
  const std::size_t n = x.cols();
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= n) {
      throw ContractError("pick_rows: index " + std::to_string(indices[i]) +
                          " out of range for " + std::to_string(n) + " columns");
    }
    out[i] = x.values()[i * n + indices[i]];
  }
  auto xh = x.handle();
  return finish_op("pick_rows", {x.rows()}, std::move(out), {&x},
                   [xh, indices, n](detail::TensorData& o) {
                     if (!xh->requires_grad) return;
                     for (std::size_t i = 0; i < indices.size(); ++i) {
                       xh->adjoint[i * n + indices[i]] += o.adjoint[i];
                     }
                   });
}

Tensor clamp_min(const Tensor& x, double floor) {
  return unary_op(
      "clamp_min", x, [floor](double v) { return v < floor ? floor : v; },
      [floor](double v, double) { return v < floor ? 0.0 : 1.0; });
}

}  // namespace relic
