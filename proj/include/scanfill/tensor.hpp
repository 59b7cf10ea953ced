#ifndef SCANFILL_TENSOR_HPP
#define SCANFILL_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace scanfill {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

[[noreturn]] inline void shape_error(const std::string& what) {
  throw std::invalid_argument(what);
}

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backprop;

  std::int64_t numel() const { return shape_numel(shape); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

// Value-semantic handle on a node of the computation graph. Leaves created
// with requires_grad accumulate gradients during backward(); interior nodes
// carry a closure implementing their backward rule.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : node_(std::make_shared<TensorNode<T>>()) {}
  explicit Tensor(std::shared_ptr<TensorNode<T>> n) : node_(std::move(n)) {}

  static Tensor zeros(Shape s) {
    Tensor t;
    t.node_->value.assign(static_cast<std::size_t>(shape_numel(s)), T(0));
    t.node_->shape = std::move(s);
    return t;
  }
  static Tensor full(Shape s, T v) {
    Tensor t;
    t.node_->value.assign(static_cast<std::size_t>(shape_numel(s)), v);
    t.node_->shape = std::move(s);
    return t;
  }
  static Tensor scalar(T v) { return full({}, v); }
  static Tensor from_data(Shape s, std::vector<T> data) {
    if (static_cast<std::int64_t>(data.size()) != shape_numel(s))
      shape_error("tensor data size " + std::to_string(data.size()) +
                  " does not match shape " + shape_str(s));
    Tensor t;
    t.node_->shape = std::move(s);
    t.node_->value = std::move(data);
    return t;
  }

  const Shape& shape() const { return node_->shape; }
  std::int64_t numel() const { return node_->numel(); }
  std::int64_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }

  std::vector<T>& data() { return node_->value; }
  const std::vector<T>& data() const { return node_->value; }
  std::vector<T>& grad() { return node_->grad; }
  const std::vector<T>& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }

  T item() const {
    if (numel() != 1) shape_error("item() on non-scalar " + shape_str(shape()));
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool b = true) {
    node_->requires_grad = b;
    return *this;
  }

  void zero_grad() {
    node_->grad.assign(node_->value.size(), T(0));
  }

  // Leaf copy sharing no graph history (value is copied).
  Tensor detach() const {
    Tensor t;
    t.node_->shape = node_->shape;
    t.node_->value = node_->value;
    return t;
  }

  std::shared_ptr<TensorNode<T>> node() const { return node_; }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

namespace detail {

template <typename T>
inline Tensor<T> make_op(Shape shape, std::vector<T> value,
                         std::vector<Tensor<T>> parents,
                         std::function<void(TensorNode<T>&)> backprop) {
  Tensor<T> out = Tensor<T>::from_data(std::move(shape), std::move(value));
  bool needs = false;
  for (const auto& p : parents) needs |= p.requires_grad();
  if (needs) {
    out.node()->requires_grad = true;
    for (auto& p : parents) out.node()->parents.push_back(p.node());
    out.node()->backprop = std::move(backprop);
  }
  return out;
}

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const std::int64_t da = i < a.size() ? a[a.size() - 1 - i] : 1;
    const std::int64_t db = i < b.size() ? b[b.size() - 1 - i] : 1;
    if (da != db && da != 1 && db != 1)
      shape_error("shapes not broadcastable: " + shape_str(a) + " vs " +
                  shape_str(b));
    out[r - 1 - i] = std::max(da, db);
  }
  return out;
}

// Row-major strides, with 0 for broadcast dimensions relative to out_shape.
inline std::vector<std::int64_t> broadcast_strides(const Shape& s,
                                                   const Shape& out) {
  std::vector<std::int64_t> native(s.size());
  std::int64_t acc = 1;
  for (std::size_t i = s.size(); i-- > 0;) {
    native[i] = acc;
    acc *= s[i];
  }
  std::vector<std::int64_t> strides(out.size(), 0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::size_t oi = out.size() - s.size() + i;
    strides[oi] = (s[i] == 1 && out[oi] != 1) ? 0 : native[i];
  }
  return strides;
}

// Sum `src` (shaped `from`) into a buffer shaped `to`, undoing broadcasting.
template <typename T>
inline void reduce_into(const std::vector<T>& src, const Shape& from,
                        std::vector<T>& dst, const Shape& to) {
  if (from == to) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
    return;
  }
  const auto strides = broadcast_strides(to, from);
  const std::size_t r = from.size();
  std::vector<std::int64_t> idx(r, 0);
  for (std::size_t lin = 0; lin < src.size(); ++lin) {
    std::int64_t off = 0;
    for (std::size_t d = 0; d < r; ++d) off += idx[d] * strides[d];
    dst[static_cast<std::size_t>(off)] += src[lin];
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < from[d]) break;
      idx[d] = 0;
    }
  }
}

template <typename T, typename F>
inline std::vector<T> broadcast_map(const Tensor<T>& a, const Tensor<T>& b,
                                    const Shape& out, F&& f) {
  const auto& av = a.data();
  const auto& bv = b.data();
  const std::size_t n = static_cast<std::size_t>(shape_numel(out));
  std::vector<T> res(n);
  if (a.shape() == b.shape()) {
    for (std::size_t i = 0; i < n; ++i) res[i] = f(av[i], bv[i]);
    return res;
  }
  if (b.numel() == 1) {
    const T bs = bv[0];
    for (std::size_t i = 0; i < n; ++i) res[i] = f(av[i], bs);
    return res;
  }
  if (a.numel() == 1) {
    const T as = av[0];
    for (std::size_t i = 0; i < n; ++i) res[i] = f(as, bv[i]);
    return res;
  }
  const auto sa = broadcast_strides(a.shape(), out);
  const auto sb = broadcast_strides(b.shape(), out);
  const std::size_t r = out.size();
  std::vector<std::int64_t> idx(r, 0);
  for (std::size_t lin = 0; lin < n; ++lin) {
    std::int64_t oa = 0, ob = 0;
    for (std::size_t d = 0; d < r; ++d) {
      oa += idx[d] * sa[d];
      ob += idx[d] * sb[d];
    }
    res[lin] = f(av[static_cast<std::size_t>(oa)],
                 bv[static_cast<std::size_t>(ob)]);
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < out[d]) break;
      idx[d] = 0;
    }
  }
  return res;
}

// Evaluates grad_a = f_a(a_i, b_i, g_i) accumulated with broadcast reduction.
template <typename T, typename FA, typename FB>
inline void broadcast_backward(TensorNode<T>& out, FA&& fa, FB&& fb) {
  auto& a = *out.parents[0];
  auto& b = *out.parents[1];
  const Shape& os = out.shape;
  const std::size_t n = out.value.size();
  const auto sa = broadcast_strides(a.shape, os);
  const auto sb = broadcast_strides(b.shape, os);
  const std::size_t r = os.size();
  const bool same = a.shape == b.shape && a.shape == os;
  if (a.requires_grad) a.ensure_grad();
  if (b.requires_grad) b.ensure_grad();
  if (same) {
    for (std::size_t i = 0; i < n; ++i) {
      const T g = out.grad[i];
      if (a.requires_grad) a.grad[i] += fa(a.value[i], b.value[i], g);
      if (b.requires_grad) b.grad[i] += fb(a.value[i], b.value[i], g);
    }
    return;
  }
  std::vector<std::int64_t> idx(r, 0);
  for (std::size_t lin = 0; lin < n; ++lin) {
    std::int64_t oa = 0, ob = 0;
    for (std::size_t d = 0; d < r; ++d) {
      oa += idx[d] * sa[d];
      ob += idx[d] * sb[d];
    }
    const T av = a.value[static_cast<std::size_t>(oa)];
    const T bv = b.value[static_cast<std::size_t>(ob)];
    const T g = out.grad[lin];
    if (a.requires_grad) a.grad[static_cast<std::size_t>(oa)] += fa(av, bv, g);
    if (b.requires_grad) b.grad[static_cast<std::size_t>(ob)] += fb(av, bv, g);
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < os[d]) break;
      idx[d] = 0;
    }
  }
}

}  // namespace detail

// ---- binary elementwise (trailing-dimension broadcasting) ----

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  Shape os = detail::broadcast_shape(a.shape(), b.shape());
  auto v = detail::broadcast_map(a, b, os, [](T x, T y) { return x + y; });
  return detail::make_op<T>(std::move(os), std::move(v), {a, b},
                            [](TensorNode<T>& n) {
                              detail::broadcast_backward<T>(
                                  n, [](T, T, T g) { return g; },
                                  [](T, T, T g) { return g; });
                            });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  Shape os = detail::broadcast_shape(a.shape(), b.shape());
  auto v = detail::broadcast_map(a, b, os, [](T x, T y) { return x - y; });
  return detail::make_op<T>(std::move(os), std::move(v), {a, b},
                            [](TensorNode<T>& n) {
                              detail::broadcast_backward<T>(
                                  n, [](T, T, T g) { return g; },
                                  [](T, T, T g) { return -g; });
                            });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  Shape os = detail::broadcast_shape(a.shape(), b.shape());
  auto v = detail::broadcast_map(a, b, os, [](T x, T y) { return x * y; });
  return detail::make_op<T>(std::move(os), std::move(v), {a, b},
                            [](TensorNode<T>& n) {
                              detail::broadcast_backward<T>(
                                  n, [](T, T y, T g) { return g * y; },
                                  [](T x, T, T g) { return g * x; });
                            });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  Shape os = detail::broadcast_shape(a.shape(), b.shape());
  // division by exact zero yields inf/nan which training guards detect
  auto v = detail::broadcast_map(a, b, os, [](T x, T y) { return x / y; });
  return detail::make_op<T>(
      std::move(os), std::move(v), {a, b}, [](TensorNode<T>& n) {
        detail::broadcast_backward<T>(
            n, [](T, T y, T g) { return g / y; },
            [](T x, T y, T g) { return -g * x / (y * y); });
      });
}

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <typename T>
Tensor<T> operator/(const Tensor<T>& a, const Tensor<T>& b) { return div(a, b); }

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, T s) { return add(a, Tensor<T>::scalar(s)); }
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, T s) { return sub(a, Tensor<T>::scalar(s)); }
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, T s) { return mul(a, Tensor<T>::scalar(s)); }
template <typename T>
Tensor<T> operator/(const Tensor<T>& a, T s) { return div(a, Tensor<T>::scalar(s)); }
template <typename T>
Tensor<T> operator-(T s, const Tensor<T>& a) { return sub(Tensor<T>::scalar(s), a); }
template <typename T>
Tensor<T> operator*(T s, const Tensor<T>& a) { return mul(Tensor<T>::scalar(s), a); }

// ---- unary elementwise ----

namespace detail {
template <typename T, typename F, typename DF>
Tensor<T> unary_op(const Tensor<T>& x, F&& f, DF&& df) {
  const auto& xv = x.data();
  std::vector<T> v(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) v[i] = f(xv[i]);
  return make_op<T>(
      x.shape(), std::move(v), {x}, [df](TensorNode<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (std::size_t i = 0; i < n.value.size(); ++i)
          p.grad[i] += n.grad[i] * df(p.value[i], n.value[i]);
      });
}
}  // namespace detail

template <typename T>
Tensor<T> neg(const Tensor<T>& x) {
  return detail::unary_op(x, [](T v) { return -v; }, [](T, T) { return T(-1); });
}
template <typename T>
Tensor<T> operator-(const Tensor<T>& x) { return neg(x); }

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return detail::unary_op(x, [](T v) { return std::exp(v); },
                          [](T, T y) { return y; });
}
template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  return detail::unary_op(x, [](T v) { return std::log(v); },
                          [](T v, T) { return T(1) / v; });
}
template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return detail::unary_op(x, [](T v) { return std::abs(v); },
                          [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}
template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return detail::unary_op(x, [](T v) { return v > T(0) ? v : T(0); },
                          [](T v, T) { return v > T(0) ? T(1) : T(0); });
}
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return detail::unary_op(
      x,
      [](T v) {
        return v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                         : std::exp(v) / (T(1) + std::exp(v));
      },
      [](T, T y) { return y * (T(1) - y); });
}
template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return detail::unary_op(x, [](T v) { return std::tanh(v); },
                          [](T, T y) { return T(1) - y * y; });
}
template <typename T>
Tensor<T> sqrt(const Tensor<T>& x) {
  return detail::unary_op(x, [](T v) { return std::sqrt(v); },
                          [](T, T y) { return T(1) / (T(2) * y); });
}
template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return detail::unary_op(x, [](T v) { return v * v; },
                          [](T v, T) { return T(2) * v; });
}

// gradient passes through strictly inside (lo, hi), zero outside
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  return detail::unary_op(
      x, [lo, hi](T v) { return std::min(hi, std::max(lo, v)); },
      [lo, hi](T v, T) { return (v > lo && v < hi) ? T(1) : T(0); });
}

// sign-preserving power: sign(x) * |x|^p, differentiable away from 0
template <typename T>
Tensor<T> signed_pow(const Tensor<T>& x, T p) {
  return detail::unary_op(
      x,
      [p](T v) {
        const T a = std::abs(v);
        return (v < T(0) ? T(-1) : T(1)) * std::pow(a, p);
      },
      [p](T v, T) {
        const T a = std::abs(v);
        return a > T(0) ? p * std::pow(a, p - T(1)) : T(0);
      });
}

// ---- reductions ----

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;  // fixed row-major order
  return detail::make_op<T>({}, {acc}, {x}, [](TensorNode<T>& n) {
    auto& p = *n.parents[0];
    p.ensure_grad();
    const T g = n.grad[0];
    for (auto& gv : p.grad) gv += g;
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  const T inv = T(1) / static_cast<T>(x.numel());
  T acc = 0;
  for (T v : x.data()) acc += v;
  return detail::make_op<T>({}, {acc * inv}, {x}, [inv](TensorNode<T>& n) {
    auto& p = *n.parents[0];
    p.ensure_grad();
    const T g = n.grad[0] * inv;
    for (auto& gv : p.grad) gv += g;
  });
}

namespace detail {
// (outer, axis, inner) factorization of shape around `axis`
inline void axis_split(const Shape& s, std::size_t axis, std::int64_t& outer,
                       std::int64_t& len, std::int64_t& inner) {
  if (axis >= s.size())
    shape_error("axis " + std::to_string(axis) + " out of range for " +
                shape_str(s));
  outer = 1;
  inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
}

inline Shape drop_axis(const Shape& s, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out.push_back(s[i]);
  return out;
}
}  // namespace detail

template <typename T>
Tensor<T> sum(const Tensor<T>& x, std::size_t axis) {
  std::int64_t outer, len, inner;
  detail::axis_split(x.shape(), axis, outer, len, inner);
  std::vector<T> v(static_cast<std::size_t>(outer * inner), T(0));
  const auto& xv = x.data();
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t a = 0; a < len; ++a)
      for (std::int64_t i = 0; i < inner; ++i)
        v[o * inner + i] += xv[(o * len + a) * inner + i];
  return detail::make_op<T>(
      detail::drop_axis(x.shape(), axis), std::move(v), {x},
      [outer, len, inner](TensorNode<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (std::int64_t o = 0; o < outer; ++o)
          for (std::int64_t a = 0; a < len; ++a)
            for (std::int64_t i = 0; i < inner; ++i)
              p.grad[(o * len + a) * inner + i] += n.grad[o * inner + i];
      });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x, std::size_t axis) {
  return sum(x, axis) * (T(1) / static_cast<T>(x.dim(axis)));
}

// max over one axis; gradient routed to the argmax, ties to lowest index
template <typename T>
Tensor<T> max(const Tensor<T>& x, std::size_t axis) {
  std::int64_t outer, len, inner;
  detail::axis_split(x.shape(), axis, outer, len, inner);
  const auto& xv = x.data();
  std::vector<T> v(static_cast<std::size_t>(outer * inner));
  auto arg = std::make_shared<std::vector<std::int64_t>>(v.size());
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t i = 0; i < inner; ++i) {
      T best = xv[(o * len) * inner + i];
      std::int64_t bi = 0;
      for (std::int64_t a = 1; a < len; ++a) {
        const T cand = xv[(o * len + a) * inner + i];
        if (cand > best) {
          best = cand;
          bi = a;
        }
      }
      v[o * inner + i] = best;
      (*arg)[o * inner + i] = bi;
    }
  return detail::make_op<T>(
      detail::drop_axis(x.shape(), axis), std::move(v), {x},
      [outer, len, inner, arg](TensorNode<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (std::int64_t o = 0; o < outer; ++o)
          for (std::int64_t i = 0; i < inner; ++i)
            p.grad[(o * len + (*arg)[o * inner + i]) * inner + i] +=
                n.grad[o * inner + i];
      });
}

// ---- shape ops ----

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape s) {
  if (shape_numel(s) != x.numel())
    shape_error("reshape " + shape_str(x.shape()) + " -> " + shape_str(s) +
                ": element count mismatch");
  return detail::make_op<T>(std::move(s), x.data(), {x}, [](TensorNode<T>& n) {
    auto& p = *n.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
  });
}

// slice along one axis
template <typename T>
Tensor<T> narrow(const Tensor<T>& x, std::size_t axis, std::int64_t start,
                 std::int64_t length) {
  std::int64_t outer, len, inner;
  detail::axis_split(x.shape(), axis, outer, len, inner);
  if (start < 0 || start + length > len)
    shape_error("narrow out of range on axis " + std::to_string(axis));
  Shape os = x.shape();
  os[axis] = length;
  std::vector<T> v(static_cast<std::size_t>(outer * length * inner));
  const auto& xv = x.data();
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t a = 0; a < length; ++a)
      std::copy_n(&xv[((o * len) + start + a) * inner], inner,
                  &v[(o * length + a) * inner]);
  return detail::make_op<T>(
      std::move(os), std::move(v), {x},
      [outer, len, inner, start, length](TensorNode<T>& n) {
        auto& p = *n.parents[0];
        p.ensure_grad();
        for (std::int64_t o = 0; o < outer; ++o)
          for (std::int64_t a = 0; a < length; ++a)
            for (std::int64_t i = 0; i < inner; ++i)
              p.grad[((o * len) + start + a) * inner + i] +=
                  n.grad[(o * length + a) * inner + i];
      });
}

// concatenate along one axis
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis) {
  if (xs.empty()) shape_error("concat of empty list");
  Shape os = xs[0].shape();
  std::int64_t total = 0;
  for (const auto& x : xs) {
    if (x.rank() != os.size()) shape_error("concat rank mismatch");
    for (std::size_t d = 0; d < os.size(); ++d)
      if (d != axis && x.shape()[d] != os[d])
        shape_error("concat dim mismatch at axis " + std::to_string(d));
    total += x.shape()[axis];
  }
  os[axis] = total;
  std::int64_t outer, len, inner;
  detail::axis_split(os, axis, outer, len, inner);
  std::vector<T> v(static_cast<std::size_t>(outer * len * inner));
  std::int64_t at = 0;
  for (const auto& x : xs) {
    const std::int64_t xl = x.shape()[axis];
    const auto& xv = x.data();
    for (std::int64_t o = 0; o < outer; ++o)
      std::copy_n(&xv[o * xl * inner], xl * inner,
                  &v[(o * len + at) * inner]);
    at += xl;
  }
  auto lens = std::make_shared<std::vector<std::int64_t>>();
  for (const auto& x : xs) lens->push_back(x.shape()[axis]);
  return detail::make_op<T>(
      std::move(os), std::move(v), xs,
      [outer, len, inner, lens](TensorNode<T>& n) {
        std::int64_t at = 0;
        for (std::size_t pi = 0; pi < n.parents.size(); ++pi) {
          auto& p = *n.parents[pi];
          const std::int64_t xl = (*lens)[pi];
          if (p.requires_grad) {
            p.ensure_grad();
            for (std::int64_t o = 0; o < outer; ++o)
              for (std::int64_t k = 0; k < xl * inner; ++k)
                p.grad[o * xl * inner + k] += n.grad[(o * len + at) * inner + k];
          }
          at += xl;
        }
      });
}

// ---- backward driver ----

// Populates gradients of every grad-enabled ancestor of `loss`.
// By default pre-existing gradients are reset; pass accumulate=true to add.
template <typename T>
void backward(const Tensor<T>& loss, bool accumulate = false) {
  if (loss.numel() != 1)
    shape_error("backward() requires a scalar loss, got " +
                shape_str(loss.shape()));
  // iterative topo sort
  std::vector<TensorNode<T>*> order;
  std::vector<std::pair<TensorNode<T>*, std::size_t>> stack;
  std::unordered_set<TensorNode<T>*> visited;
  stack.push_back({loss.node().get(), 0});
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode<T>* p = node->parents[next++].get();
      if (visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  if (!accumulate)
    for (auto* n : visited)
      if (n->requires_grad) n->grad.assign(n->value.size(), T(0));
  loss.node()->ensure_grad();
  loss.node()->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* n = *it;
    if (n->backprop && n->grad.size() == n->value.size()) n->backprop(*n);
  }
}

template <typename T>
bool all_finite(const Tensor<T>& x) {
  for (T v : x.data())
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace scanfill

#endif  // SCANFILL_TENSOR_HPP
