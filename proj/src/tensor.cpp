#include "xdet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "xdet/rng.hpp"

namespace xdet {

namespace {

thread_local Tape* g_tape = nullptr;

std::size_t shape_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("non-positive dim in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

[[noreturn]] void shape_error(const char* op, const std::vector<int>& a,
                              const std::vector<int>& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a) +
                              " and " + shape_str(b));
}

std::shared_ptr<ad::Node> make_node(std::vector<int> shape, bool requires_grad) {
  auto n = std::make_shared<ad::Node>();
  n->value.assign(shape_count(shape), real(0));
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return n;
}

bool want_grad(std::initializer_list<const Tensor*> inputs) {
  if (!g_tape) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

void record(std::shared_ptr<ad::Node> out, std::function<void()> back) {
  g_tape->entries_.push_back({std::move(out), std::move(back)});
}

// b broadcasts over a's leading dims when b.shape is a suffix of a.shape.
void check_suffix_broadcast(const char* op, const Tensor& a, const Tensor& b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (bs.size() > as.size()) shape_error(op, as, bs);
  for (std::size_t i = 0; i < bs.size(); ++i)
    if (bs[bs.size() - 1 - i] != as[as.size() - 1 - i]) shape_error(op, as, bs);
}

}  // namespace

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return Tensor(make_node(std::move(shape), requires_grad));
}

Tensor Tensor::full(std::vector<int> shape, real fill, bool requires_grad) {
  Tensor t(make_node(std::move(shape), requires_grad));
  std::fill(t.n_->value.begin(), t.n_->value.end(), fill);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<real> values, bool requires_grad) {
  if (shape_count(shape) != values.size())
    throw std::invalid_argument("Tensor::from: " + std::to_string(values.size()) +
                                " values for shape " + shape_str(shape));
  auto n = std::make_shared<ad::Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::scalar(real v, bool requires_grad) { return from({}, {v}, requires_grad); }

Tensor Tensor::randn(std::vector<int> shape, real scale, Rng& rng, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (real& v : t.n_->value) v = scale * static_cast<real>(rng.gaussian());
  return t;
}

const std::vector<real>& Tensor::grad() const {
  n_->ensure_grad();
  return n_->grad;
}

real Tensor::item() const {
  if (size() != 1)
    throw std::invalid_argument("item(): tensor of shape " + shape_str(shape()) +
                                " is not scalar");
  return n_->value[0];
}

Tensor Tensor::detached() const { return from(n_->shape, n_->value, false); }

TapeScope::TapeScope(Tape& tape) : prev_(g_tape) { g_tape = &tape; }
TapeScope::~TapeScope() { g_tape = prev_; }

Tape* current_tape() { return g_tape; }

void Tape::backward(const Tensor& scalar_loss) {
  if (scalar_loss.size() != 1 || !scalar_loss.shape().empty())
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                shape_str(scalar_loss.shape()));
  if (entries_.empty()) throw std::logic_error("backward: tape is empty");

  for (Entry& e : entries_) e.out->ensure_grad();
  ad::Node* loss = scalar_loss.node();
  loss->ensure_grad();
  loss->grad[0] += real(1);

  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->back();
  entries_.clear();
}

// ---- elementwise with suffix broadcast -----------------------------------

namespace {

template <typename Fwd>
Tensor broadcast_binary(const char* name, const Tensor& a, const Tensor& b, Fwd fwd,
                        void (*back)(ad::Node&, ad::Node&, ad::Node&)) {
  check_suffix_broadcast(name, a, b);
  auto out = make_node(a.shape(), want_grad({&a, &b}));
  const std::size_t bn = std::max<std::size_t>(b.size(), 1);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = fwd(av[i], bv[i % bn]);
  Tensor t = Tensor::adopt(out);
  if (out->requires_grad) {
    auto an = a.node_ptr(), bn_ = b.node_ptr(), on = out;
    record(out, [an, bn_, on, back]() { back(*on, *an, *bn_); });
  }
  return t;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return broadcast_binary(
      "add", a, b, [](real x, real y) { return x + y; },
      +[](ad::Node& o, ad::Node& a, ad::Node& b) {
        const std::size_t bn = std::max<std::size_t>(b.size(), 1);
        if (a.requires_grad) {
          a.ensure_grad();
          for (std::size_t i = 0; i < o.size(); ++i) a.grad[i] += o.grad[i];
        }
        if (b.requires_grad) {
          b.ensure_grad();
          for (std::size_t i = 0; i < o.size(); ++i) b.grad[i % bn] += o.grad[i];
        }
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return broadcast_binary(
      "sub", a, b, [](real x, real y) { return x - y; },
      +[](ad::Node& o, ad::Node& a, ad::Node& b) {
        const std::size_t bn = std::max<std::size_t>(b.size(), 1);
        if (a.requires_grad) {
          a.ensure_grad();
          for (std::size_t i = 0; i < o.size(); ++i) a.grad[i] += o.grad[i];
        }
        if (b.requires_grad) {
          b.ensure_grad();
          for (std::size_t i = 0; i < o.size(); ++i) b.grad[i % bn] -= o.grad[i];
        }
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_suffix_broadcast("mul", a, b);
  auto out = make_node(a.shape(), want_grad({&a, &b}));
  const std::size_t bn = std::max<std::size_t>(b.size(), 1);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] * bv[i % bn];
  Tensor t = Tensor::adopt(out);
  if (out->requires_grad) {
    auto an = a.node_ptr(), bnode = b.node_ptr(), on = out;
    record(out, [an, bnode, on]() {
      const std::size_t bn = std::max<std::size_t>(bnode->size(), 1);
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < on->size(); ++i)
          an->grad[i] += on->grad[i] * bnode->value[i % bn];
      }
      if (bnode->requires_grad) {
        bnode->ensure_grad();
        for (std::size_t i = 0; i < on->size(); ++i)
          bnode->grad[i % bn] += on->grad[i] * an->value[i];
      }
    });
  }
  return t;
}

Tensor scale(const Tensor& a, real c) {
  auto out = make_node(a.shape(), want_grad({&a}));
  const auto& av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] * c;
  Tensor t = Tensor::adopt(out);
  if (out->requires_grad) {
    auto an = a.node_ptr(), on = out;
    record(out, [an, on, c]() {
      an->ensure_grad();
      for (std::size_t i = 0; i < on->size(); ++i) an->grad[i] += on->grad[i] * c;
    });
  }
  return t;
}

// ---- matmul ---------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
    shape_error("matmul", a.shape(), b.shape());
  const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  auto out = make_node({m, n}, want_grad({&a, &b}));
  const real* av = a.values().data();
  const real* bv = b.values().data();
  real* ov = out->value.data();
  for (int i = 0; i < m; ++i)
    for (int kk = 0; kk < k; ++kk) {
      const real x = av[i * k + kk];
      const real* brow = bv + kk * n;
      real* orow = ov + i * n;
      for (int j = 0; j < n; ++j) orow[j] += x * brow[j];
    }
  Tensor t = Tensor::adopt(out);
  if (out->requires_grad) {
    auto an = a.node_ptr(), bnode = b.node_ptr(), on = out;
    record(out, [an, bnode, on, m, k, n]() {
      const real* g = on->grad.data();
      if (an->requires_grad) {
        an->ensure_grad();
        real* ga = an->grad.data();
        const real* bv = bnode->value.data();
        for (int i = 0; i < m; ++i)
          for (int kk = 0; kk < k; ++kk) {
            real acc = 0;
            const real* grow = g + i * n;
            const real* brow = bv + kk * n;
            for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
            ga[i * k + kk] += acc;
          }
      }
      if (bnode->requires_grad) {
        bnode->ensure_grad();
        real* gb = bnode->grad.data();
        const real* av = an->value.data();
        for (int i = 0; i < m; ++i)
          for (int kk = 0; kk < k; ++kk) {
            const real x = av[i * k + kk];
            const real* grow = g + i * n;
            real* gbrow = gb + kk * n;
            for (int j = 0; j < n; ++j) gbrow[j] += x * grow[j];
          }
      }
    });
  }
  return t;
}

// ---- conv2d ---------------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 3 || ws.size() != 4 || ws[0] != 3 || ws[1] != 3 || ws[2] != xs[2])
    shape_error("conv2d", xs, ws);
  if (stride != 1 && stride != 2)
    throw std::invalid_argument("conv2d: stride must be 1 or 2, got " + std::to_string(stride));
  const int H = xs[0], W = xs[1], Ci = xs[2], Co = ws[3];
  if (bias.shape() != std::vector<int>{Co}) shape_error("conv2d bias", ws, bias.shape());
  constexpr int pad = 1, K = 3;
  const int Ho = (H + 2 * pad - K) / stride + 1;
  const int Wo = (W + 2 * pad - K) / stride + 1;

  auto out = make_node({Ho, Wo, Co}, want_grad({&x, &w, &bias}));
  const real* xv = x.values().data();
  const real* wv = w.values().data();
  const real* bv = bias.values().data();
  real* ov = out->value.data();

  for (int yo = 0; yo < Ho; ++yo) {
    for (int xo = 0; xo < Wo; ++xo) {
      real* o = ov + (yo * Wo + xo) * Co;
      for (int c = 0; c < Co; ++c) o[c] = bv[c];
      const int yi0 = yo * stride - pad, xi0 = xo * stride - pad;
      for (int ky = 0; ky < K; ++ky) {
        const int yi = yi0 + ky;
        if (yi < 0 || yi >= H) continue;
        for (int kx = 0; kx < K; ++kx) {
          const int xi = xi0 + kx;
          if (xi < 0 || xi >= W) continue;
          const real* xrow = xv + (yi * W + xi) * Ci;
          const real* wrow = wv + ((ky * K + kx) * Ci) * Co;
          for (int ci = 0; ci < Ci; ++ci) {
            const real xvci = xrow[ci];
            const real* wc = wrow + ci * Co;
            for (int c = 0; c < Co; ++c) o[c] += xvci * wc[c];
          }
        }
      }
    }
  }

  Tensor t = Tensor::adopt(out);
  if (out->requires_grad) {
    auto xn = x.node_ptr(), wn = w.node_ptr(), bn = bias.node_ptr(), on = out;
    record(out, [xn, wn, bn, on, H, W, Ci, Co, Ho, Wo, stride]() {
      constexpr int pad = 1, K = 3;
      const real* g = on->grad.data();
      const bool gx = xn->requires_grad, gw = wn->requires_grad, gb = bn->requires_grad;
      if (gx) xn->ensure_grad();
      if (gw) wn->ensure_grad();
      if (gb) bn->ensure_grad();
      for (int yo = 0; yo < Ho; ++yo) {
        for (int xo = 0; xo < Wo; ++xo) {
          const real* go = g + (yo * Wo + xo) * Co;
          if (gb) {
            for (int c = 0; c < Co; ++c) bn->grad[c] += go[c];
          }
          const int yi0 = yo * stride - pad, xi0 = xo * stride - pad;
          for (int ky = 0; ky < K; ++ky) {
            const int yi = yi0 + ky;
            if (yi < 0 || yi >= H) continue;
            for (int kx = 0; kx < K; ++kx) {
              const int xi = xi0 + kx;
              if (xi < 0 || xi >= W) continue;
              const std::size_t xoff = (static_cast<std::size_t>(yi) * W + xi) * Ci;
              const std::size_t woff = (static_cast<std::size_t>(ky) * K + kx) * Ci * Co;
              for (int ci = 0; ci < Ci; ++ci) {
                const real* wc = wn->value.data() + woff + ci * Co;
                if (gx) {
                  real acc = 0;
                  for (int c = 0; c < Co; ++c) acc += go[c] * wc[c];
                  xn->grad[xoff + ci] += acc;
                }
                if (gw) {
                  const real xvci = xn->value[xoff + ci];
                  real* gwc = wn->grad.data() + woff + ci * Co;
                  for (int c = 0; c < Co; ++c) gwc[c] += xvci * go[c];
                }
              }
            }
          }
        }
      }
    });
  }
  return t;
}

// ---- unary ----------------------------------------------------------------

namespace {

template <typename Fwd>
Tensor unary_op(const Tensor& x, Fwd fwd, std::function<real(real xv, real ov)> dfn) {
  auto out = make_node(x.shape(), want_grad({&x}));
  const auto& xv = x.values();
  for (std::size_t i = 0; i < xv.size(); ++i) out->value[i] = fwd(xv[i]);
  Tensor t = Tensor::adopt(out);
  if (out->requires_grad) {
    auto xn = x.node_ptr(), on = out;
    record(out, [xn, on, dfn]() {
      xn->ensure_grad();
      for (std::size_t i = 0; i < on->size(); ++i)
        xn->grad[i] += on->grad[i] * dfn(xn->value[i], on->value[i]);
    });
  }
  return t;
}

}  // namespace

Tensor relu(const Tensor& x) {
  return unary_op(
      x, [](real v) { return v > 0 ? v : real(0); },
      [](real xv, real) { return xv > 0 ? real(1) : real(0); });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      x, [](real v) { return real(1) / (real(1) + std::exp(-v)); },
      [](real, real ov) { return ov * (real(1) - ov); });
}

Tensor softplus(const Tensor& x) {
  return unary_op(
      x,
      [](real v) {
        // max(v,0) + log1p(exp(-|v|)): stable at both ends.
        return std::max(v, real(0)) + std::log1p(std::exp(-std::abs(v)));
      },
      [](real xv, real) { return real(1) / (real(1) + std::exp(-xv)); });
}

Tensor log_t(const Tensor& x) {
  return unary_op(
      x, [](real v) { return std::log(v); }, [](real xv, real) { return real(1) / xv; });
}

// ---- softmax family (last axis) --------------------------------------------

namespace {

std::pair<std::size_t, int> rows_and_axis(const Tensor& x, const char* op) {
  if (x.shape().empty())
    throw std::invalid_argument(std::string(op) + ": needs at least one axis, got scalar");
  const int n = x.shape().back();
  return {x.size() / static_cast<std::size_t>(n), n};
}

}  // namespace

Tensor softmax(const Tensor& x) {
  auto [rows, n] = rows_and_axis(x, "softmax");
  auto out = make_node(x.shape(), want_grad({&x}));
  const real* xv = x.values().data();
  real* ov = out->value.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const real* xr = xv + r * n;
    real* orow = ov + r * n;
    real m = xr[0];
    for (int i = 1; i < n; ++i) m = std::max(m, xr[i]);
    real z = 0;
    for (int i = 0; i < n; ++i) {
      orow[i] = std::exp(xr[i] - m);
      z += orow[i];
    }
    for (int i = 0; i < n; ++i) orow[i] /= z;
  }
  Tensor t = Tensor::adopt(out);
  if (out->requires_grad) {
    auto xn = x.node_ptr(), on = out;
    const int nn = n;
    const std::size_t rr = rows;
    record(out, [xn, on, nn, rr]() {
      xn->ensure_grad();
      for (std::size_t r = 0; r < rr; ++r) {
        const real* p = on->value.data() + r * nn;
        const real* g = on->grad.data() + r * nn;
        real dot = 0;
        for (int i = 0; i < nn; ++i) dot += g[i] * p[i];
        real* gx = xn->grad.data() + r * nn;
        for (int i = 0; i < nn; ++i) gx[i] += p[i] * (g[i] - dot);
      }
    });
  }
  return t;
}

Tensor log_softmax(const Tensor& x) {
  auto [rows, n] = rows_and_axis(x, "log_softmax");
  auto out = make_node(x.shape(), want_grad({&x}));
  const real* xv = x.values().data();
  real* ov = out->value.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const real* xr = xv + r * n;
    real* orow = ov + r * n;
    real m = xr[0];
    for (int i = 1; i < n; ++i) m = std::max(m, xr[i]);
    real z = 0;
    for (int i = 0; i < n; ++i) z += std::exp(xr[i] - m);
    const real lse = m + std::log(z);
    for (int i = 0; i < n; ++i) orow[i] = xr[i] - lse;
  }
  Tensor t = Tensor::adopt(out);
  if (out->requires_grad) {
    auto xn = x.node_ptr(), on = out;
    const int nn = n;
    const std::size_t rr = rows;
    record(out, [xn, on, nn, rr]() {
      xn->ensure_grad();
      for (std::size_t r = 0; r < rr; ++r) {
        const real* lp = on->value.data() + r * nn;
        const real* g = on->grad.data() + r * nn;
        real gsum = 0;
        for (int i = 0; i < nn; ++i) gsum += g[i];
        real* gx = xn->grad.data() + r * nn;
        for (int i = 0; i < nn; ++i) gx[i] += g[i] - std::exp(lp[i]) * gsum;
      }
    });
  }
  return t;
}

// ---- reductions -------------------------------------------------------------

Tensor sum(const Tensor& x) {
  auto out = make_node({}, want_grad({&x}));
  out->value[0] = std::accumulate(x.values().begin(), x.values().end(), real(0));
  Tensor t = Tensor::adopt(out);
  if (out->requires_grad) {
    auto xn = x.node_ptr(), on = out;
    record(out, [xn, on]() {
      xn->ensure_grad();
      const real g = on->grad[0];
      for (real& v : xn->grad) v += g;
    });
  }
  return t;
}

Tensor mean_all(const Tensor& x) {
  const real inv = real(1) / static_cast<real>(x.size());
  auto out = make_node({}, want_grad({&x}));
  out->value[0] =
      std::accumulate(x.values().begin(), x.values().end(), real(0)) * inv;
  Tensor t = Tensor::adopt(out);
  if (out->requires_grad) {
    auto xn = x.node_ptr(), on = out;
    record(out, [xn, on, inv]() {
      xn->ensure_grad();
      const real g = on->grad[0] * inv;
      for (real& v : xn->grad) v += g;
    });
  }
  return t;
}

Tensor global_mean(const Tensor& x) {
  if (x.shape().empty()) throw std::invalid_argument("global_mean: scalar input");
  const int c = x.shape().back();
  const std::size_t outer = x.size() / static_cast<std::size_t>(c);
  const real inv = real(1) / static_cast<real>(outer);
  auto out = make_node({c}, want_grad({&x}));
  const real* xv = x.values().data();
  for (std::size_t o = 0; o < outer; ++o)
    for (int i = 0; i < c; ++i) out->value[i] += xv[o * c + i];
  for (int i = 0; i < c; ++i) out->value[i] *= inv;
  Tensor t = Tensor::adopt(out);
  if (out->requires_grad) {
    auto xn = x.node_ptr(), on = out;
    record(out, [xn, on, c, outer, inv]() {
      xn->ensure_grad();
      for (std::size_t o = 0; o < outer; ++o)
        for (int i = 0; i < c; ++i) xn->grad[o * c + i] += on->grad[i] * inv;
    });
  }
  return t;
}

Tensor roi_mean(const Tensor& x, const std::vector<std::vector<int>>& groups) {
  if (x.shape().size() != 3) throw std::invalid_argument("roi_mean: expected [H,W,C], got " +
                                                         shape_str(x.shape()));
  const int cells = x.shape()[0] * x.shape()[1];
  const int c = x.shape()[2];
  const int k = static_cast<int>(groups.size());
  for (const auto& g : groups) {
    if (g.empty()) throw std::invalid_argument("roi_mean: empty cell group");
    for (int idx : g)
      if (idx < 0 || idx >= cells)
        throw std::invalid_argument("roi_mean: cell index " + std::to_string(idx) +
                                    " out of range");
  }
  auto out = make_node({k, c}, want_grad({&x}));
  const real* xv = x.values().data();
  for (int gI = 0; gI < k; ++gI) {
    const real inv = real(1) / static_cast<real>(groups[gI].size());
    real* orow = out->value.data() + static_cast<std::size_t>(gI) * c;
    for (int idx : groups[gI]) {
      const real* cell = xv + static_cast<std::size_t>(idx) * c;
      for (int i = 0; i < c; ++i) orow[i] += cell[i];
    }
    for (int i = 0; i < c; ++i) orow[i] *= inv;
  }
  Tensor t = Tensor::adopt(out);
  if (out->requires_grad) {
    auto xn = x.node_ptr(), on = out;
    auto groups_copy = groups;
    record(out, [xn, on, groups_copy, c]() {
      xn->ensure_grad();
      for (std::size_t gI = 0; gI < groups_copy.size(); ++gI) {
        const real inv = real(1) / static_cast<real>(groups_copy[gI].size());
        const real* grow = on->grad.data() + gI * c;
        for (int idx : groups_copy[gI]) {
          real* gcell = xn->grad.data() + static_cast<std::size_t>(idx) * c;
          for (int i = 0; i < c; ++i) gcell[i] += grow[i] * inv;
        }
      }
    });
  }
  return t;
}

Tensor stack0(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("stack0: no parts");
  const auto& s0 = parts[0].shape();
  for (const Tensor& p : parts)
    if (p.shape() != s0) shape_error("stack0", s0, p.shape());
  std::vector<int> shape;
  shape.push_back(static_cast<int>(parts.size()));
  shape.insert(shape.end(), s0.begin(), s0.end());
  bool any = false;
  for (const Tensor& p : parts) any = any || p.requires_grad();
  auto out = make_node(shape, g_tape != nullptr && any);
  const std::size_t stride = parts[0].size();
  for (std::size_t i = 0; i < parts.size(); ++i)
    std::copy(parts[i].values().begin(), parts[i].values().end(),
              out->value.begin() + i * stride);
  Tensor t = Tensor::adopt(out);
  if (out->requires_grad) {
    std::vector<std::shared_ptr<ad::Node>> pn;
    pn.reserve(parts.size());
    for (const Tensor& p : parts) pn.push_back(p.node_ptr());
    auto on = out;
    record(out, [pn, on, stride]() {
      for (std::size_t i = 0; i < pn.size(); ++i) {
        if (!pn[i]->requires_grad) continue;
        pn[i]->ensure_grad();
        const real* g = on->grad.data() + i * stride;
        for (std::size_t j = 0; j < stride; ++j) pn[i]->grad[j] += g[j];
      }
    });
  }
  return t;
}

Tensor reshape(const Tensor& x, std::vector<int> new_shape) {
  if (shape_count(new_shape) != x.size()) shape_error("reshape", x.shape(), new_shape);
  auto out = make_node(std::move(new_shape), want_grad({&x}));
  out->value = x.values();
  Tensor t = Tensor::adopt(out);
  if (out->requires_grad) {
    auto xn = x.node_ptr(), on = out;
    record(out, [xn, on]() {
      xn->ensure_grad();
      for (std::size_t i = 0; i < on->size(); ++i) xn->grad[i] += on->grad[i];
    });
  }
  return t;
}

Tensor one_hot(int index, int n) {
  if (index < 0 || index >= n)
    throw std::invalid_argument("one_hot: index " + std::to_string(index) + " out of [0," +
                                std::to_string(n) + ")");
  Tensor t = Tensor::zeros({n});
  t.values()[index] = real(1);
  return t;
}

Tensor grad_reverse(const Tensor& x, real beta) {
  auto out = make_node(x.shape(), want_grad({&x}));
  out->value = x.values();
  Tensor t = Tensor::adopt(out);
  if (out->requires_grad) {
    auto xn = x.node_ptr(), on = out;
    record(out, [xn, on, beta]() {
      xn->ensure_grad();
      for (std::size_t i = 0; i < on->size(); ++i) xn->grad[i] -= beta * on->grad[i];
    });
  }
  return t;
}

// ---- value helpers ----------------------------------------------------------

std::vector<real> softmax_values(const std::vector<real>& logits) {
  std::vector<real> p(logits.size());
  real m = logits.empty() ? real(0) : logits[0];
  for (real v : logits) m = std::max(m, v);
  real z = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (real& v : p) v /= z;
  return p;
}

int argmax_index(const std::vector<real>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

}  // namespace xdet
