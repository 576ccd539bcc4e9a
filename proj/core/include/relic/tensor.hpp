#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace relic {

class Tape;

namespace detail {

struct TensorData {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> adjoint;  // allocated iff requires_grad
  bool requires_grad = false;
  const Tape* producer = nullptr;  // tape that recorded the producing op
  std::uint64_t id = 0;
};

}  // namespace detail

// Shared handle to a dense row-major float64 array of rank 0, 1 or 2.
// Values are immutable once an op has consumed the tensor; the adjoint
// buffer is the only mutable part and is touched only by backward passes.
class Tensor {
 public:
  Tensor();  // empty scalar 0

  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double v,
                     bool requires_grad = false);
  static Tensor from(std::vector<double> values, std::vector<std::size_t> shape,
                     bool requires_grad = false);

  const std::vector<std::size_t>& shape() const { return data_->shape; }
  std::size_t rank() const { return data_->shape.size(); }
  std::size_t numel() const { return data_->values.size(); }
  std::size_t rows() const;  // rank-2 only
  std::size_t cols() const;  // rank-2 only

  const std::vector<double>& values() const { return data_->values; }
  double item() const;  // rank-0 only
  double at(std::size_t i) const { return data_->values.at(i); }
  double at(std::size_t i, std::size_t j) const;

  bool requires_grad() const { return data_->requires_grad; }
  const std::vector<double>& adjoint() const;
  std::vector<double>& mutable_adjoint();
  void zero_adjoint();

  // In-place value mutation for optimizer updates. Illegal on tensors that
  // have been recorded on a live tape; callers own that discipline.
  std::vector<double>& mutable_values() { return data_->values; }

  std::uint64_t id() const { return data_->id; }
  const Tape* producer() const { return data_->producer; }

  std::shared_ptr<detail::TensorData> handle() const { return data_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorData> data)
      : data_(std::move(data)) {}
  std::shared_ptr<detail::TensorData> data_;
};

// Reverse-mode tape. Ops record nodes on the thread's active tape when any
// input requires grad. Single-threaded per tape; independent tapes may live
// on different threads.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // RAII activation: ops executed while a Scope is alive record onto the
  // scoped tape. Scopes on one thread nest; the innermost wins.
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  // Seeds root's adjoint with 1 and accumulates adjoints into every
  // requires_grad tensor reachable backward from it. Adjoints of all tensors
  // touched by this tape are zeroed first, so leaves carry exactly
  // d(root)/d(leaf) afterwards. Consumes the tape.
  void backward(const Tensor& root);

  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }

  static Tape* active();

  // Internal: op implementations append nodes through this.
  struct Node {
    std::vector<std::shared_ptr<detail::TensorData>> inputs;
    std::shared_ptr<detail::TensorData> output;
    std::function<void()> pull;  // accumulates input adjoints from output's
  };
  void push(Node node);

 private:
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

std::string shape_string(const std::vector<std::size_t>& shape);

// Primitive ops. Each validates shapes, checks outputs are finite, and
// records a tape node when needed. Broadcasting on binary ops is limited to
// scalar-with-tensor and row-vector-with-matrix ({n} or {1,n} against {m,n}).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor neg(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor transpose(const Tensor& x);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor row_softmax(const Tensor& logits);
Tensor row_log_softmax(const Tensor& logits);
Tensor l2_normalize(const Tensor& x, std::size_t axis, double eps = 1e-12);
// out[i] = x[i, indices[i]]; shape {rows}.
Tensor pick_rows(const Tensor& x, const std::vector<std::size_t>& indices);
Tensor clamp_min(const Tensor& x, double floor);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator*(const Tensor& a, double c) { return mul(a, Tensor::scalar(c)); }
inline Tensor operator*(double c, const Tensor& a) { return mul(Tensor::scalar(c), a); }
inline Tensor operator+(const Tensor& a, double c) { return add(a, Tensor::scalar(c)); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

}  // namespace relic
