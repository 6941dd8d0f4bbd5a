#pragma once
// Define-by-run autodiff on dense 1-D/2-D tensors. Scalar type is a template
// parameter: float for training storage, double for gradient-check mode.

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace simtlab {

// Additive pre-softmax mask value. exp(x - max) underflows to exactly 0 for
// masked entries in both float and double, so masked attention weights are
// exactly zero.
inline constexpr double kMaskFill = -1e9;

inline bool& autograd_enabled() {
  thread_local bool on = true;
  return on;
}

struct NoGrad {
  bool prev;
  NoGrad() : prev(autograd_enabled()) { autograd_enabled() = false; }
  ~NoGrad() { autograd_enabled() = prev; }
};

[[noreturn]] inline void shape_error(const std::string& op, const std::vector<int>& a,
                                     const std::vector<int>& b) {
  std::ostringstream os;
  os << op << ": incompatible shapes [";
  for (std::size_t i = 0; i < a.size(); ++i) os << (i ? "x" : "") << a[i];
  os << "] vs [";
  for (std::size_t i = 0; i < b.size(); ++i) os << (i ? "x" : "") << b[i];
  os << "]";
  throw std::invalid_argument(os.str());
}

template <class Real>
struct TensorNode {
  std::vector<int> shape;
  std::vector<Real> val;
  std::vector<Real> grad;  // lazily allocated
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backfn;

  int rows() const { return shape.size() == 2 ? shape[0] : 1; }
  int cols() const { return shape.empty() ? 0 : shape.back(); }
  std::size_t size() const { return val.size(); }

  Real* g() {
    if (grad.empty()) grad.assign(val.size(), Real(0));
    return grad.data();
  }
};

template <class Real>
class Tensor {
 public:
  using Node = TensorNode<Real>;

  Tensor() = default;

  explicit Tensor(std::vector<int> shape, Real fill = Real(0), bool requires_grad = false)
      : n_(std::make_shared<Node>()) {
    n_->shape = std::move(shape);
    std::size_t total = 1;
    for (int d : n_->shape) {
      if (d < 1) throw std::invalid_argument("Tensor: dimension must be >= 1");
      total *= static_cast<std::size_t>(d);
    }
    n_->val.assign(total, fill);
    n_->requires_grad = requires_grad;
  }

  static Tensor from(std::vector<int> shape, std::vector<Real> vals, bool requires_grad = false) {
    Tensor t(std::move(shape), Real(0), requires_grad);
    if (vals.size() != t.size()) throw std::invalid_argument("Tensor::from: value count != shape product");
    t.n_->val = std::move(vals);
    return t;
  }

  bool defined() const { return n_ != nullptr; }
  const std::vector<int>& shape() const { return n_->shape; }
  int rows() const { return n_->rows(); }
  int cols() const { return n_->cols(); }
  std::size_t size() const { return n_->size(); }

  std::vector<Real>& values() { return n_->val; }
  const std::vector<Real>& values() const { return n_->val; }
  std::vector<Real>& grad() { return n_->grad; }
  const std::vector<Real>& grad_ref() const { return n_->grad; }
  bool requires_grad() const { return n_->requires_grad; }
  void set_requires_grad(bool b) { n_->requires_grad = b; }

  Real item() const {
    if (size() != 1) throw std::invalid_argument("Tensor::item: not a scalar");
    return n_->val[0];
  }

  Real at(int r, int c) const { return n_->val[static_cast<std::size_t>(r) * cols() + c]; }
  Real& at(int r, int c) { return n_->val[static_cast<std::size_t>(r) * cols() + c]; }

  std::shared_ptr<Node> node() const { return n_; }

  void zero_grad() { n_->grad.clear(); }

  // Reverse-mode sweep from a scalar. Seeds d(loss)/d(loss) = 1.
  void backward() const {
    if (size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{n_.get(), 0}};
    seen.insert(n_.get());
    while (!stack.empty()) {
      auto& [node, idx] = stack.back();
      if (idx < node->parents.size()) {
        Node* p = node->parents[idx++].get();
        if (seen.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    n_->g()[0] = Real(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* node = *it;
      if (node->backfn) node->backfn(*node);
    }
  }

 private:
  std::shared_ptr<Node> n_;
};

namespace detail {

template <class Real>
Tensor<Real> make_result(std::vector<int> shape, std::vector<std::shared_ptr<TensorNode<Real>>> parents,
                         std::function<void(TensorNode<Real>&)> backfn) {
  Tensor<Real> out(std::move(shape));
  bool needs = false;
  for (auto& p : parents)
    if (p->requires_grad) needs = true;
  if (needs && autograd_enabled()) {
    out.node()->requires_grad = true;
    out.node()->parents = std::move(parents);
    out.node()->backfn = std::move(backfn);
  }
  return out;
}

// C[m x n] += A[m x k] * B[k x n]; ik-j loop order for locality.
template <class Real>
void gemm_acc(const Real* a, const Real* b, Real* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const Real* arow = a + static_cast<std::size_t>(i) * k;
    Real* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      Real av = arow[p];
      if (av == Real(0)) continue;
      const Real* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x n] += A[m x k] * B^T, B is [n x k].
template <class Real>
void gemm_nt_acc(const Real* a, const Real* b, Real* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const Real* arow = a + static_cast<std::size_t>(i) * k;
    Real* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const Real* brow = b + static_cast<std::size_t>(j) * k;
      Real acc = Real(0);
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C[k x n] += A^T * B, A is [m x k], B is [m x n].
template <class Real>
void gemm_tn_acc(const Real* a, const Real* b, Real* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const Real* arow = a + static_cast<std::size_t>(i) * k;
    const Real* brow = b + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      Real av = arow[p];
      if (av == Real(0)) continue;
      Real* crow = c + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace detail

// ---- elementary ops ----

template <class Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a.shape(), b.shape());
  int m = a.rows(), k = a.cols(), n = b.cols();
  auto an = a.node(), bn = b.node();
  auto out = detail::make_result<Real>({m, n}, {an, bn}, [an, bn, m, k, n](TensorNode<Real>& o) {
    if (an->requires_grad) detail::gemm_nt_acc(o.g(), bn->val.data(), an->g(), m, n, k);
    if (bn->requires_grad) detail::gemm_tn_acc(an->val.data(), o.g(), bn->g(), m, k, n);
  });
  detail::gemm_acc(an->val.data(), bn->val.data(), out.values().data(), m, k, n);
  return out;
}

// a * b^T
template <class Real>
Tensor<Real> matmul_nt(const Tensor<Real>& a, const Tensor<Real>& b) {
  if (a.cols() != b.cols()) shape_error("matmul_nt", a.shape(), b.shape());
  int m = a.rows(), k = a.cols(), n = b.rows();
  auto an = a.node(), bn = b.node();
  auto out = detail::make_result<Real>({m, n}, {an, bn}, [an, bn, m, k, n](TensorNode<Real>& o) {
    if (an->requires_grad) detail::gemm_acc(o.g(), bn->val.data(), an->g(), m, n, k);
    if (bn->requires_grad) detail::gemm_tn_acc(o.g(), an->val.data(), bn->g(), m, n, k);
  });
  detail::gemm_nt_acc(an->val.data(), bn->val.data(), out.values().data(), m, k, n);
  return out;
}

template <class Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
  if (a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
  auto an = a.node(), bn = b.node();
  auto out = detail::make_result<Real>(a.shape(), {an, bn}, [an, bn](TensorNode<Real>& o) {
    if (an->requires_grad) {
      Real* g = an->g();
      for (std::size_t i = 0; i < o.size(); ++i) g[i] += o.grad[i];
    }
    if (bn->requires_grad) {
      Real* g = bn->g();
      for (std::size_t i = 0; i < o.size(); ++i) g[i] += o.grad[i];
    }
  });
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = an->val[i] + bn->val[i];
  return out;
}

// Broadcast a row vector over every row of a matrix.
template <class Real>
Tensor<Real> add_rowvec(const Tensor<Real>& a, const Tensor<Real>& v) {
  if (a.cols() != v.cols() || v.rows() != 1) shape_error("add_rowvec", a.shape(), v.shape());
  int m = a.rows(), n = a.cols();
  auto an = a.node(), vn = v.node();
  auto out = detail::make_result<Real>(a.shape(), {an, vn}, [an, vn, m, n](TensorNode<Real>& o) {
    if (an->requires_grad) {
      Real* g = an->g();
      for (std::size_t i = 0; i < o.size(); ++i) g[i] += o.grad[i];
    }
    if (vn->requires_grad) {
      Real* g = vn->g();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) g[j] += o.grad[static_cast<std::size_t>(i) * n + j];
    }
  });
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out.values()[static_cast<std::size_t>(i) * n + j] = a.values()[static_cast<std::size_t>(i) * n + j] + v.values()[j];
  return out;
}

template <class Real>
Tensor<Real> scale(const Tensor<Real>& a, Real s) {
  auto an = a.node();
  auto out = detail::make_result<Real>(a.shape(), {an}, [an, s](TensorNode<Real>& o) {
    if (an->requires_grad) {
      Real* g = an->g();
      for (std::size_t i = 0; i < o.size(); ++i) g[i] += s * o.grad[i];
    }
  });
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = s * an->val[i];
  return out;
}

template <class Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
  if (a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
  auto an = a.node(), bn = b.node();
  auto out = detail::make_result<Real>(a.shape(), {an, bn}, [an, bn](TensorNode<Real>& o) {
    if (an->requires_grad) {
      Real* g = an->g();
      for (std::size_t i = 0; i < o.size(); ++i) g[i] += bn->val[i] * o.grad[i];
    }
    if (bn->requires_grad) {
      Real* g = bn->g();
      for (std::size_t i = 0; i < o.size(); ++i) g[i] += an->val[i] * o.grad[i];
    }
  });
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = an->val[i] * bn->val[i];
  return out;
}

template <class Real>
Tensor<Real> relu(const Tensor<Real>& a) {
  auto an = a.node();
  auto out = detail::make_result<Real>(a.shape(), {an}, [an](TensorNode<Real>& o) {
    if (!an->requires_grad) return;
    Real* g = an->g();
    for (std::size_t i = 0; i < o.size(); ++i)
      if (an->val[i] > Real(0)) g[i] += o.grad[i];
  });
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = an->val[i] > Real(0) ? an->val[i] : Real(0);
  return out;
}

// Add a constant matrix (e.g. positional encodings); no gradient into `c`.
template <class Real>
Tensor<Real> add_const(const Tensor<Real>& a, const std::vector<Real>& c) {
  if (a.size() != c.size()) throw std::invalid_argument("add_const: size mismatch");
  auto an = a.node();
  auto out = detail::make_result<Real>(a.shape(), {an}, [an](TensorNode<Real>& o) {
    if (!an->requires_grad) return;
    Real* g = an->g();
    for (std::size_t i = 0; i < o.size(); ++i) g[i] += o.grad[i];
  });
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = an->val[i] + c[i];
  return out;
}

// Row-wise layer normalization with affine gain/shift.
template <class Real>
Tensor<Real> layer_norm(const Tensor<Real>& x, const Tensor<Real>& gain, const Tensor<Real>& shift,
                        Real eps = Real(1e-5)) {
  int m = x.rows(), n = x.cols();
  if (gain.size() != static_cast<std::size_t>(n) || shift.size() != static_cast<std::size_t>(n))
    shape_error("layer_norm", x.shape(), gain.shape());
  auto xn = x.node(), gn = gain.node(), sn = shift.node();
  // cache normalized values and inverse std per row for backward
  auto xhat = std::make_shared<std::vector<Real>>(x.size());
  auto istd = std::make_shared<std::vector<Real>>(m);

  auto out = detail::make_result<Real>(x.shape(), {xn, gn, sn}, [=](TensorNode<Real>& o) {
    for (int i = 0; i < m; ++i) {
      const Real* go = o.grad.data() + static_cast<std::size_t>(i) * n;
      const Real* xh = xhat->data() + static_cast<std::size_t>(i) * n;
      if (gn->requires_grad) {
        Real* gg = gn->g();
        for (int j = 0; j < n; ++j) gg[j] += go[j] * xh[j];
      }
      if (sn->requires_grad) {
        Real* gs = sn->g();
        for (int j = 0; j < n; ++j) gs[j] += go[j];
      }
      if (xn->requires_grad) {
        Real* gx = xn->g() + static_cast<std::size_t>(i) * n;
        Real mean_d = Real(0), mean_dx = Real(0);
        for (int j = 0; j < n; ++j) {
          Real d = go[j] * gn->val[j];
          mean_d += d;
          mean_dx += d * xh[j];
        }
        mean_d /= Real(n);
        mean_dx /= Real(n);
        Real is = (*istd)[i];
        for (int j = 0; j < n; ++j) {
          Real d = go[j] * gn->val[j];
          gx[j] += is * (d - mean_d - xh[j] * mean_dx);
        }
      }
    }
  });

  for (int i = 0; i < m; ++i) {
    const Real* row = x.values().data() + static_cast<std::size_t>(i) * n;
    Real mean = Real(0);
    for (int j = 0; j < n; ++j) mean += row[j];
    mean /= Real(n);
    Real var = Real(0);
    for (int j = 0; j < n; ++j) {
      Real d = row[j] - mean;
      var += d * d;
    }
    var /= Real(n);
    Real is = Real(1) / std::sqrt(var + eps);
    (*istd)[i] = is;
    Real* oh = out.values().data() + static_cast<std::size_t>(i) * n;
    Real* xh = xhat->data() + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      xh[j] = (row[j] - mean) * is;
      oh[j] = xh[j] * gain.values()[j] + shift.values()[j];
    }
  }
  return out;
}

// Row-wise softmax with optional boolean mask (row-major, 1 = allowed).
// Masked entries get weight exactly 0. Throws if a row has no allowed entry.
template <class Real>
Tensor<Real> masked_softmax_rows(const Tensor<Real>& logits, const std::vector<std::uint8_t>* mask = nullptr) {
  int m = logits.rows(), n = logits.cols();
  if (mask && mask->size() != logits.size())
    throw std::invalid_argument("masked_softmax_rows: mask size mismatch");
  auto ln = logits.node();
  auto out = detail::make_result<Real>(logits.shape(), {ln}, [ln, m, n](TensorNode<Real>& o) {
    if (!ln->requires_grad) return;
    for (int i = 0; i < m; ++i) {
      const Real* p = o.val.data() + static_cast<std::size_t>(i) * n;
      const Real* go = o.grad.data() + static_cast<std::size_t>(i) * n;
      Real* gl = ln->g() + static_cast<std::size_t>(i) * n;
      Real dot = Real(0);
      for (int j = 0; j < n; ++j) dot += p[j] * go[j];
      for (int j = 0; j < n; ++j) gl[j] += p[j] * (go[j] - dot);
    }
  });
  for (int i = 0; i < m; ++i) {
    const Real* row = logits.values().data() + static_cast<std::size_t>(i) * n;
    const std::uint8_t* mrow = mask ? mask->data() + static_cast<std::size_t>(i) * n : nullptr;
    Real mx = Real(0);
    bool any = false;
    for (int j = 0; j < n; ++j) {
      if (mrow && !mrow[j]) continue;
      Real v = row[j];
      if (!any || v > mx) mx = v;
      any = true;
    }
    if (!any) throw std::invalid_argument("masked_softmax_rows: query row " + std::to_string(i) +
                                          " has no allowed key");
    Real* orow = out.values().data() + static_cast<std::size_t>(i) * n;
    Real sum = Real(0);
    for (int j = 0; j < n; ++j) {
      Real e = (mrow && !mrow[j]) ? Real(0) : std::exp(row[j] - mx);
      orow[j] = e;
      sum += e;
    }
    Real inv = Real(1) / sum;
    for (int j = 0; j < n; ++j) orow[j] *= inv;
  }
  return out;
}

template <class Real>
Tensor<Real> softmax_rows(const Tensor<Real>& logits) {
  return masked_softmax_rows(logits, nullptr);
}

template <class Real>
Tensor<Real> log_softmax_rows(const Tensor<Real>& logits) {
  int m = logits.rows(), n = logits.cols();
  auto ln = logits.node();
  auto out = detail::make_result<Real>(logits.shape(), {ln}, [ln, m, n](TensorNode<Real>& o) {
    if (!ln->requires_grad) return;
    for (int i = 0; i < m; ++i) {
      const Real* lo = o.val.data() + static_cast<std::size_t>(i) * n;
      const Real* go = o.grad.data() + static_cast<std::size_t>(i) * n;
      Real* gl = ln->g() + static_cast<std::size_t>(i) * n;
      Real gsum = Real(0);
      for (int j = 0; j < n; ++j) gsum += go[j];
      for (int j = 0; j < n; ++j) gl[j] += go[j] - std::exp(lo[j]) * gsum;
    }
  });
  for (int i = 0; i < m; ++i) {
    const Real* row = logits.values().data() + static_cast<std::size_t>(i) * n;
    Real mx = row[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    Real sum = Real(0);
    for (int j = 0; j < n; ++j) sum += std::exp(row[j] - mx);
    Real lse = mx + std::log(sum);
    Real* orow = out.values().data() + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) orow[j] = row[j] - lse;
  }
  return out;
}

// Row gather from an embedding table; backward scatter-adds.
template <class Real>
Tensor<Real> gather_rows(const Tensor<Real>& table, const std::vector<int>& ids) {
  int n = table.cols();
  int m = static_cast<int>(ids.size());
  for (int id : ids)
    if (id < 0 || id >= table.rows())
      throw std::invalid_argument("gather_rows: token id " + std::to_string(id) + " out of range");
  auto tn = table.node();
  auto idv = std::make_shared<std::vector<int>>(ids);
  auto out = detail::make_result<Real>({m, n}, {tn}, [tn, idv, n](TensorNode<Real>& o) {
    if (!tn->requires_grad) return;
    Real* g = tn->g();
    for (std::size_t i = 0; i < idv->size(); ++i) {
      const Real* go = o.grad.data() + i * n;
      Real* grow = g + static_cast<std::size_t>((*idv)[i]) * n;
      for (int j = 0; j < n; ++j) grow[j] += go[j];
    }
  });
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out.values()[static_cast<std::size_t>(i) * n + j] = table.values()[static_cast<std::size_t>(ids[i]) * n + j];
  return out;
}

template <class Real>
Tensor<Real> slice_cols(const Tensor<Real>& a, int c0, int c1) {
  int m = a.rows(), n = a.cols();
  if (c0 < 0 || c1 > n || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
  int w = c1 - c0;
  auto an = a.node();
  auto out = detail::make_result<Real>({m, w}, {an}, [an, c0, w, n, m](TensorNode<Real>& o) {
    if (!an->requires_grad) return;
    Real* g = an->g();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < w; ++j)
        g[static_cast<std::size_t>(i) * n + c0 + j] += o.grad[static_cast<std::size_t>(i) * w + j];
  });
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < w; ++j)
      out.values()[static_cast<std::size_t>(i) * w + j] = a.values()[static_cast<std::size_t>(i) * n + c0 + j];
  return out;
}

template <class Real>
Tensor<Real> concat_cols(const std::vector<Tensor<Real>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  int m = parts[0].rows(), n = 0;
  std::vector<std::shared_ptr<TensorNode<Real>>> parents;
  for (const auto& p : parts) {
    if (p.rows() != m) shape_error("concat_cols", parts[0].shape(), p.shape());
    n += p.cols();
    parents.push_back(p.node());
  }
  auto widths = std::make_shared<std::vector<int>>();
  for (const auto& p : parts) widths->push_back(p.cols());
  auto out = detail::make_result<Real>({m, n}, parents, [widths, m, n](TensorNode<Real>& o) {
    int off = 0;
    for (std::size_t k = 0; k < o.parents.size(); ++k) {
      int w = (*widths)[k];
      auto& p = o.parents[k];
      if (p->requires_grad) {
        Real* g = p->g();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < w; ++j)
            g[static_cast<std::size_t>(i) * w + j] += o.grad[static_cast<std::size_t>(i) * n + off + j];
      }
      off += w;
    }
  });
  int off = 0;
  for (const auto& p : parts) {
    int w = p.cols();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < w; ++j)
        out.values()[static_cast<std::size_t>(i) * n + off + j] = p.values()[static_cast<std::size_t>(i) * w + j];
    off += w;
  }
  return out;
}

// One element per row: out[i] = a[i][ids[i]].
template <class Real>
Tensor<Real> gather_elems(const Tensor<Real>& a, const std::vector<int>& ids) {
  int m = a.rows(), n = a.cols();
  if (static_cast<int>(ids.size()) != m) throw std::invalid_argument("gather_elems: id count != rows");
  for (int id : ids)
    if (id < 0 || id >= n) throw std::invalid_argument("gather_elems: index out of range");
  auto an = a.node();
  auto idv = std::make_shared<std::vector<int>>(ids);
  auto out = detail::make_result<Real>({m}, {an}, [an, idv, n](TensorNode<Real>& o) {
    if (!an->requires_grad) return;
    Real* g = an->g();
    for (std::size_t i = 0; i < idv->size(); ++i) g[i * n + (*idv)[i]] += o.grad[i];
  });
  for (int i = 0; i < m; ++i) out.values()[i] = a.values()[static_cast<std::size_t>(i) * n + ids[i]];
  return out;
}

// Elementwise max(a, floor); gradient passes only where a > floor.
// `clamped` (optional) counts how many entries were clamped.
template <class Real>
Tensor<Real> clamp_min(const Tensor<Real>& a, Real floor, long* clamped = nullptr) {
  auto an = a.node();
  auto out = detail::make_result<Real>(a.shape(), {an}, [an, floor](TensorNode<Real>& o) {
    if (!an->requires_grad) return;
    Real* g = an->g();
    for (std::size_t i = 0; i < o.size(); ++i)
      if (an->val[i] > floor) g[i] += o.grad[i];
  });
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (an->val[i] < floor) {
      out.values()[i] = floor;
      if (clamped) ++*clamped;
    } else {
      out.values()[i] = an->val[i];
    }
  }
  return out;
}

template <class Real>
Tensor<Real> sum_all(const Tensor<Real>& a) {
  auto an = a.node();
  auto out = detail::make_result<Real>({1}, {an}, [an](TensorNode<Real>& o) {
    if (!an->requires_grad) return;
    Real* g = an->g();
    for (std::size_t i = 0; i < an->size(); ++i) g[i] += o.grad[0];
  });
  Real s = Real(0);
  for (Real v : an->val) s += v;
  out.values()[0] = s;
  return out;
}

// Dot product with a constant weight vector -> scalar. Weights carry no grad.
template <class Real>
Tensor<Real> dot_const(const Tensor<Real>& a, const std::vector<Real>& w) {
  if (a.size() != w.size()) throw std::invalid_argument("dot_const: size mismatch");
  auto an = a.node();
  auto wv = std::make_shared<std::vector<Real>>(w);
  auto out = detail::make_result<Real>({1}, {an}, [an, wv](TensorNode<Real>& o) {
    if (!an->requires_grad) return;
    Real* g = an->g();
    for (std::size_t i = 0; i < an->size(); ++i) g[i] += (*wv)[i] * o.grad[0];
  });
  Real s = Real(0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * w[i];
  out.values()[0] = s;
  return out;
}

}  // namespace simtlab
