#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "graformer/errors.hpp"
#include "graformer/rng.hpp"

namespace graformer {

// Dense rank-1/rank-2 tensor participating in reverse-mode automatic
// differentiation. A Tensor is a value-semantic handle to a node in the
// op DAG; backward() walks the DAG in reverse topological order.
// Instantiated with float for training and double for gradient tests.

namespace detail {

template <typename S>
struct Node {
  std::vector<int> shape;
  std::vector<S> values;
  std::vector<S> grad;  // allocated lazily, accumulates across backward calls
  std::vector<S> aux;   // op scratch saved by forward for backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  size_t numel() const {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    return n;
  }
  void ensure_grad() {
    if (grad.size() != numel()) grad.assign(numel(), S(0));
  }
};

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream out;
  out << "[";
  for (size_t i = 0; i < s.size(); ++i) out << (i ? "x" : "") << s[i];
  out << "]";
  return out.str();
}

}  // namespace detail

template <typename S>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape) {
    return filled(std::move(shape), S(0));
  }

  static Tensor filled(std::vector<int> shape, S v) {
    auto node = std::make_shared<detail::Node<S>>();
    node->shape = std::move(shape);
    node->values.assign(node->numel(), v);
    return Tensor(std::move(node));
  }

  static Tensor from(std::vector<int> shape, std::vector<S> values) {
    auto node = std::make_shared<detail::Node<S>>();
    node->shape = std::move(shape);
    require(values.size() == node->numel(), "value count does not match shape");
    node->values = std::move(values);
    return Tensor(std::move(node));
  }

  // Leaf with gradient tracking (a learnable parameter).
  static Tensor param(std::vector<int> shape, std::vector<S> values) {
    Tensor t = from(std::move(shape), std::move(values));
    t.node_->requires_grad = true;
    return t;
  }

  static Tensor param_gaussian(std::vector<int> shape, Rng& rng, double stddev) {
    auto node = std::make_shared<detail::Node<S>>();
    node->shape = std::move(shape);
    node->values.resize(node->numel());
    for (auto& v : node->values) v = static_cast<S>(rng.gaussian() * stddev);
    node->requires_grad = true;
    return Tensor(std::move(node));
  }

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int rows() const { return node_->shape[0]; }
  int cols() const { return rank() == 2 ? node_->shape[1] : 1; }
  size_t size() const { return node_->numel(); }
  bool requires_grad() const { return node_->requires_grad; }

  const std::vector<S>& values() const { return node_->values; }
  std::vector<S>& mutable_values() { return node_->values; }
  S value(size_t i) const { return node_->values[i]; }
  S value(size_t r, size_t c) const { return node_->values[r * cols() + c]; }

  const std::vector<S>& grad() const {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() { node_->grad.assign(node_->numel(), S(0)); }

  std::shared_ptr<detail::Node<S>> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node<S>> node) : node_(std::move(node)) {}

  template <typename T>
  friend Tensor<T> make_op(std::vector<int>, std::vector<T>, std::vector<Tensor<T>>,
                           std::function<void(detail::Node<T>&)>);

  std::shared_ptr<detail::Node<S>> node_;
};

template <typename S>
Tensor<S> make_op(std::vector<int> shape, std::vector<S> values, std::vector<Tensor<S>> parents,
                  std::function<void(detail::Node<S>&)> backward_fn) {
  auto node = std::make_shared<detail::Node<S>>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  for (const auto& p : parents) {
    node->parents.push_back(p.node());
    node->requires_grad = node->requires_grad || p.requires_grad();
  }
  if (node->requires_grad) node->backward_fn = std::move(backward_fn);
  return Tensor<S>(std::move(node));
}

// ---- backward ----

template <typename S>
void backward(const Tensor<S>& root) {
  require(root.size() == 1, "backward requires a scalar, got shape " +
                                detail::shape_str(root.shape()));
  using NodeT = detail::Node<S>;

  // iterative post-order DFS
  std::vector<NodeT*> order;
  std::unordered_set<NodeT*> visited;
  std::vector<std::pair<NodeT*, size_t>> stack{{root.node().get(), 0}};
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodeT* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second)
        stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->ensure_grad();
  root.node()->grad[0] += S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

// ---- shape helpers ----

namespace detail {

template <typename S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                      shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <typename S>
void check_rank2(const Tensor<S>& a, const char* op) {
  require(a.rank() == 2, std::string(op) + ": expected a matrix, got " + shape_str(a.shape()));
}

}  // namespace detail

// ---- elementwise and linear ops ----

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<S> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value(i) + b.value(i);
  return make_op<S>(a.shape(), std::move(out), {a, b}, [](detail::Node<S>& self) {
    for (int k = 0; k < 2; ++k) {
      auto& p = *self.parents[k];
      if (!p.requires_grad) continue;
      p.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    }
  });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape(a, b, "mul");
  std::vector<S> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value(i) * b.value(i);
  return make_op<S>(a.shape(), std::move(out), {a, b}, [](detail::Node<S>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.values[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.values[i];
    }
  });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S c) {
  std::vector<S> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value(i) * c;
  return make_op<S>(a.shape(), std::move(out), {a}, [c](detail::Node<S>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * c;
  });
}

// Adds a constant buffer (no gradient); used for attention masks.
template <typename S>
Tensor<S> add_const(const Tensor<S>& a, const std::vector<S>& c) {
  require(c.size() == a.size(), "add_const: buffer size mismatch");
  std::vector<S> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value(i) + c[i];
  return make_op<S>(a.shape(), std::move(out), {a}, [](detail::Node<S>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

// Matrix + row vector broadcast over rows.
template <typename S>
Tensor<S> add_rows(const Tensor<S>& x, const Tensor<S>& row) {
  detail::check_rank2(x, "add_rows");
  require(row.rank() == 1 && row.rows() == x.cols(),
          "add_rows: shape mismatch " + detail::shape_str(x.shape()) + " vs " +
              detail::shape_str(row.shape()));
  int n = x.rows(), m = x.cols();
  std::vector<S> out(x.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out[i * m + j] = x.value(i, j) + row.value(j);
  return make_op<S>(x.shape(), std::move(out), {x, row}, [n, m](detail::Node<S>& self) {
    auto& px = *self.parents[0];
    auto& pr = *self.parents[1];
    if (px.requires_grad) {
      px.ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
    }
    if (pr.requires_grad) {
      pr.ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) pr.grad[j] += self.grad[i * m + j];
    }
  });
}

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_rank2(a, "matmul");
  detail::check_rank2(b, "matmul");
  require(a.cols() == b.rows(), "matmul: inner dimensions differ, " +
                                    detail::shape_str(a.shape()) + " vs " +
                                    detail::shape_str(b.shape()));
  int n = a.rows(), k = a.cols(), m = b.cols();
  std::vector<S> out(static_cast<size_t>(n) * m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += static_cast<double>(a.value(i, t)) * b.value(t, j);
      out[static_cast<size_t>(i) * m + j] = static_cast<S>(acc);
    }
  }
  return make_op<S>({n, m}, std::move(out), {a, b}, [n, k, m](detail::Node<S>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int t = 0; t < k; ++t) {
          double acc = 0.0;
          for (int j = 0; j < m; ++j)
            acc += static_cast<double>(self.grad[static_cast<size_t>(i) * m + j]) *
                   pb.values[static_cast<size_t>(t) * m + j];
          pa.grad[static_cast<size_t>(i) * k + t] += static_cast<S>(acc);
        }
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (int t = 0; t < k; ++t)
        for (int j = 0; j < m; ++j) {
          double acc = 0.0;
          for (int i = 0; i < n; ++i)
            acc += static_cast<double>(pa.values[static_cast<size_t>(i) * k + t]) *
                   self.grad[static_cast<size_t>(i) * m + j];
          pb.grad[static_cast<size_t>(t) * m + j] += static_cast<S>(acc);
        }
    }
  });
}

// a @ b^T without materializing the transpose; used for attention logits
// and the tied output projection.
template <typename S>
Tensor<S> matmul_nt(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_rank2(a, "matmul_nt");
  detail::check_rank2(b, "matmul_nt");
  require(a.cols() == b.cols(), "matmul_nt: inner dimensions differ, " +
                                    detail::shape_str(a.shape()) + " vs " +
                                    detail::shape_str(b.shape()));
  int n = a.rows(), k = a.cols(), m = b.rows();
  std::vector<S> out(static_cast<size_t>(n) * m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += static_cast<double>(a.value(i, t)) * b.value(j, t);
      out[static_cast<size_t>(i) * m + j] = static_cast<S>(acc);
    }
  return make_op<S>({n, m}, std::move(out), {a, b}, [n, k, m](detail::Node<S>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int t = 0; t < k; ++t) {
          double acc = 0.0;
          for (int j = 0; j < m; ++j)
            acc += static_cast<double>(self.grad[static_cast<size_t>(i) * m + j]) *
                   pb.values[static_cast<size_t>(j) * k + t];
          pa.grad[static_cast<size_t>(i) * k + t] += static_cast<S>(acc);
        }
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (int j = 0; j < m; ++j)
        for (int t = 0; t < k; ++t) {
          double acc = 0.0;
          for (int i = 0; i < n; ++i)
            acc += static_cast<double>(self.grad[static_cast<size_t>(i) * m + j]) *
                   pa.values[static_cast<size_t>(i) * k + t];
          pb.grad[static_cast<size_t>(j) * k + t] += static_cast<S>(acc);
        }
    }
  });
}

template <typename S>
Tensor<S> transpose(const Tensor<S>& a) {
  detail::check_rank2(a, "transpose");
  int n = a.rows(), m = a.cols();
  std::vector<S> out(a.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out[static_cast<size_t>(j) * n + i] = a.value(i, j);
  return make_op<S>({m, n}, std::move(out), {a}, [n, m](detail::Node<S>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        p.grad[static_cast<size_t>(i) * m + j] += self.grad[static_cast<size_t>(j) * n + i];
  });
}

template <typename S>
Tensor<S> slice_cols(const Tensor<S>& a, int begin, int end) {
  detail::check_rank2(a, "slice_cols");
  require(0 <= begin && begin < end && end <= a.cols(), "slice_cols: range out of bounds");
  int n = a.rows(), m = a.cols(), w = end - begin;
  std::vector<S> out(static_cast<size_t>(n) * w);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < w; ++j) out[static_cast<size_t>(i) * w + j] = a.value(i, begin + j);
  return make_op<S>({n, w}, std::move(out), {a}, [n, m, w, begin](detail::Node<S>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < w; ++j)
        p.grad[static_cast<size_t>(i) * m + begin + j] += self.grad[static_cast<size_t>(i) * w + j];
  });
}

template <typename S>
Tensor<S> concat_cols(const std::vector<Tensor<S>>& parts) {
  require(!parts.empty(), "concat_cols: nothing to concatenate");
  int n = parts[0].rows();
  int total = 0;
  std::vector<int> widths;
  for (const auto& p : parts) {
    detail::check_rank2(p, "concat_cols");
    require(p.rows() == n, "concat_cols: row counts differ");
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<S> out(static_cast<size_t>(n) * total);
  int offset = 0;
  for (const auto& p : parts) {
    int w = p.cols();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < w; ++j) out[static_cast<size_t>(i) * total + offset + j] = p.value(i, j);
    offset += w;
  }
  return make_op<S>({n, total}, std::move(out), parts, [n, total, widths](detail::Node<S>& self) {
    int offset = 0;
    for (size_t k = 0; k < self.parents.size(); ++k) {
      auto& p = *self.parents[k];
      int w = widths[k];
      if (p.requires_grad) {
        p.ensure_grad();
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < w; ++j)
            p.grad[static_cast<size_t>(i) * w + j] +=
                self.grad[static_cast<size_t>(i) * total + offset + j];
      }
      offset += w;
    }
  });
}

// ---- nonlinear ops ----

// Row-wise softmax with the usual max subtraction; denominators accumulate
// in double so rows sum to 1 well within 1e-6 at 32-bit.
template <typename S>
Tensor<S> softmax_rows(const Tensor<S>& x) {
  detail::check_rank2(x, "softmax_rows");
  int n = x.rows(), m = x.cols();
  std::vector<S> out(x.size());
  for (int i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j) mx = std::max(mx, static_cast<double>(x.value(i, j)));
    double denom = 0.0;
    for (int j = 0; j < m; ++j) denom += std::exp(static_cast<double>(x.value(i, j)) - mx);
    for (int j = 0; j < m; ++j)
      out[static_cast<size_t>(i) * m + j] =
          static_cast<S>(std::exp(static_cast<double>(x.value(i, j)) - mx) / denom);
  }
  return make_op<S>(x.shape(), std::move(out), {x}, [n, m](detail::Node<S>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (int i = 0; i < n; ++i) {
      double dot = 0.0;
      for (int j = 0; j < m; ++j) {
        size_t k = static_cast<size_t>(i) * m + j;
        dot += static_cast<double>(self.grad[k]) * self.values[k];
      }
      for (int j = 0; j < m; ++j) {
        size_t k = static_cast<size_t>(i) * m + j;
        p.grad[k] += static_cast<S>(self.values[k] * (self.grad[k] - dot));
      }
    }
  });
}

// Row-wise layer normalization: y = gain * (x - mean) / sqrt(var + eps) + bias.
template <typename S>
Tensor<S> layer_norm_rows(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& bias,
                          S eps = S(1e-5)) {
  detail::check_rank2(x, "layer_norm_rows");
  require(gain.rank() == 1 && bias.rank() == 1 && gain.rows() == x.cols() &&
              bias.rows() == x.cols(),
          "layer_norm_rows: parameter shape mismatch with " + detail::shape_str(x.shape()));
  int n = x.rows(), m = x.cols();
  std::vector<S> out(x.size());
  std::vector<S> aux(x.size() + n);  // normalized values, then 1/stddev per row
  for (int i = 0; i < n; ++i) {
    double mean = 0.0;
    for (int j = 0; j < m; ++j) mean += x.value(i, j);
    mean /= m;
    double var = 0.0;
    for (int j = 0; j < m; ++j) {
      double d = x.value(i, j) - mean;
      var += d * d;
    }
    var /= m;
    double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
    aux[x.size() + i] = static_cast<S>(inv);
    for (int j = 0; j < m; ++j) {
      size_t k = static_cast<size_t>(i) * m + j;
      aux[k] = static_cast<S>((x.value(i, j) - mean) * inv);
      out[k] = gain.value(j) * aux[k] + bias.value(j);
    }
  }
  Tensor<S> result =
      make_op<S>(x.shape(), std::move(out), {x, gain, bias}, [n, m](detail::Node<S>& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        const S* xhat = self.aux.data();
        const S* inv_std = self.aux.data() + static_cast<size_t>(n) * m;
        if (pg.requires_grad) pg.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        if (px.requires_grad) px.ensure_grad();
        for (int i = 0; i < n; ++i) {
          double mean_t = 0.0, mean_tx = 0.0;
          for (int j = 0; j < m; ++j) {
            size_t k = static_cast<size_t>(i) * m + j;
            double t = static_cast<double>(self.grad[k]) * pg.values[j];
            mean_t += t;
            mean_tx += t * xhat[k];
          }
          mean_t /= m;
          mean_tx /= m;
          for (int j = 0; j < m; ++j) {
            size_t k = static_cast<size_t>(i) * m + j;
            if (pg.requires_grad) pg.grad[j] += static_cast<S>(self.grad[k] * xhat[k]);
            if (pb.requires_grad) pb.grad[j] += self.grad[k];
            if (px.requires_grad) {
              double t = static_cast<double>(self.grad[k]) * pg.values[j];
              px.grad[k] += static_cast<S>(inv_std[i] * (t - mean_t - xhat[k] * mean_tx));
            }
          }
        }
      });
  result.node()->aux = std::move(aux);
  return result;
}

namespace detail {
inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace detail

// Exact Gaussian-CDF GeLU: x * Phi(x).
template <typename S>
Tensor<S> gelu(const Tensor<S>& x) {
  using detail::kInvSqrt2;
  std::vector<S> out(x.size());
  for (size_t i = 0; i < out.size(); ++i) {
    double v = x.value(i);
    out[i] = static_cast<S>(v * 0.5 * (1.0 + std::erf(v * kInvSqrt2)));
  }
  return make_op<S>(x.shape(), std::move(out), {x}, [](detail::Node<S>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      double v = p.values[i];
      double cdf = 0.5 * (1.0 + std::erf(v * detail::kInvSqrt2));
      double pdf = std::exp(-0.5 * v * v) * detail::kInvSqrt2Pi;
      p.grad[i] += static_cast<S>(self.grad[i] * (cdf + v * pdf));
    }
  });
}

// Inverted dropout: train-time activations are scaled by 1/(1-rate) so
// inference is a plain identity. rate 0 (or eval mode) is an exact
// identity and draws nothing from the RNG.
template <typename S>
Tensor<S> dropout(const Tensor<S>& x, double rate, bool train, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout rate must be in [0, 1)");
  if (!train || rate == 0.0) return x;
  S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
  std::vector<S> mask(x.size());
  for (auto& m : mask) m = rng.uniform() >= rate ? keep_scale : S(0);
  std::vector<S> out(x.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = x.value(i) * mask[i];
  Tensor<S> result = make_op<S>(x.shape(), std::move(out), {x}, [](detail::Node<S>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * self.aux[i];
  });
  result.node()->aux = std::move(mask);
  return result;
}

// Embedding lookup: selects rows of `table` by id. Gradients scatter-add
// back into the table rows.
template <typename S>
Tensor<S> rows_lookup(const Tensor<S>& table, const std::vector<int>& ids) {
  detail::check_rank2(table, "rows_lookup");
  require(!ids.empty(), "rows_lookup: empty id list");
  int v = table.rows(), d = table.cols();
  for (int id : ids)
    require(0 <= id && id < v, "rows_lookup: id " + std::to_string(id) + " out of range [0," +
                                   std::to_string(v) + ")");
  int n = static_cast<int>(ids.size());
  std::vector<S> out(static_cast<size_t>(n) * d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      out[static_cast<size_t>(i) * d + j] = table.value(ids[i], j);
  return make_op<S>({n, d}, std::move(out), {table}, [ids, d](detail::Node<S>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < ids.size(); ++i)
      for (int j = 0; j < d; ++j)
        p.grad[static_cast<size_t>(ids[i]) * d + j] += self.grad[i * d + j];
  });
}

// Scalar position bias: out[i][j] = table[row, idx[i][j]]. Gradients
// scatter-add into the chosen table row.
template <typename S>
Tensor<S> position_bias(const Tensor<S>& table, int row,
                        const std::vector<std::vector<int>>& idx) {
  detail::check_rank2(table, "position_bias");
  require(0 <= row && row < table.rows(), "position_bias: row out of range");
  int n = static_cast<int>(idx.size());
  require(n > 0, "position_bias: empty index matrix");
  int m = static_cast<int>(idx[0].size());
  int k = table.cols();
  std::vector<S> out(static_cast<size_t>(n) * m);
  for (int i = 0; i < n; ++i) {
    require(static_cast<int>(idx[i].size()) == m, "position_bias: ragged index matrix");
    for (int j = 0; j < m; ++j) {
      require(0 <= idx[i][j] && idx[i][j] < k, "position_bias: index out of table range");
      out[static_cast<size_t>(i) * m + j] = table.value(row, idx[i][j]);
    }
  }
  return make_op<S>({n, m}, std::move(out), {table}, [idx, row, m, k](detail::Node<S>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < m; ++j)
        p.grad[static_cast<size_t>(row) * k + idx[i][j]] +=
            self.grad[i * m + j];
  });
}

template <typename S>
Tensor<S> sum_all(const Tensor<S>& x) {
  double acc = 0.0;
  for (size_t i = 0; i < x.size(); ++i) acc += x.value(i);
  return make_op<S>({1}, {static_cast<S>(acc)}, {x}, [](detail::Node<S>& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (auto& g : p.grad) g += self.grad[0];
  });
}

enum class Reduction { Sum, Mean };

// Label-smoothed cross entropy over rows of `logits`, excluding positions
// whose target equals pad_id. The smoothed target distribution is
// (1-smoothing) on the gold label plus smoothing/V uniform mass.
// Mean divides by the number of non-pad positions.
template <typename S>
Tensor<S> smoothed_cross_entropy(const Tensor<S>& logits, const std::vector<int>& targets,
                                 double smoothing, int pad_id,
                                 Reduction reduction = Reduction::Mean) {
  detail::check_rank2(logits, "smoothed_cross_entropy");
  require(targets.size() == static_cast<size_t>(logits.rows()),
          "smoothed_cross_entropy: target count " + std::to_string(targets.size()) +
              " does not match logit rows " + std::to_string(logits.rows()));
  require(smoothing >= 0.0 && smoothing < 1.0, "smoothing must be in [0, 1)");
  int n = logits.rows(), v = logits.cols();
  size_t active = 0;
  for (int t : targets) {
    if (t == pad_id) continue;
    require(0 <= t && t < v, "smoothed_cross_entropy: target id out of range");
    ++active;
  }
  require(active > 0, "smoothed_cross_entropy: every position is padding");

  double weight = reduction == Reduction::Mean ? 1.0 / static_cast<double>(active) : 1.0;
  double total = 0.0;
  std::vector<S> aux(static_cast<size_t>(n));  // log-sum-exp per row
  for (int i = 0; i < n; ++i) {
    if (targets[i] == pad_id) continue;
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < v; ++j) mx = std::max(mx, static_cast<double>(logits.value(i, j)));
    double denom = 0.0;
    for (int j = 0; j < v; ++j) denom += std::exp(static_cast<double>(logits.value(i, j)) - mx);
    double lse = mx + std::log(denom);
    aux[i] = static_cast<S>(lse);
    double sum_logp = 0.0;
    for (int j = 0; j < v; ++j) sum_logp += static_cast<double>(logits.value(i, j)) - lse;
    double gold_logp = static_cast<double>(logits.value(i, targets[i])) - lse;
    total -= (1.0 - smoothing) * gold_logp + smoothing / v * sum_logp;
  }
  total *= weight;

  Tensor<S> result = make_op<S>(
      {1}, {static_cast<S>(total)}, {logits},
      [targets, smoothing, pad_id, weight, n, v](detail::Node<S>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        double g = static_cast<double>(self.grad[0]) * weight;
        for (int i = 0; i < n; ++i) {
          if (targets[i] == pad_id) continue;
          double lse = self.aux[i];
          for (int j = 0; j < v; ++j) {
            size_t k = static_cast<size_t>(i) * v + j;
            double softmax = std::exp(static_cast<double>(p.values[k]) - lse);
            double q = smoothing / v + (j == targets[i] ? 1.0 - smoothing : 0.0);
            p.grad[k] += static_cast<S>(g * (softmax - q));
          }
        }
      });
  result.node()->aux = std::move(aux);
  return result;
}

}  // namespace graformer
