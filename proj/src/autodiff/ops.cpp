#include "tsc/autodiff/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace tsc::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

void accumulate(Node& self, std::size_t i, const Eigen::VectorXd& g) {
  Node& in = *self.inputs[i];
  if (in.requires_grad) in.grad_buffer() += g;
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                                to_string(b.shape()));
  }
}

void require_rank(const Tensor& t, int rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                                ", got " + to_string(t.shape()));
  }
}

template <class F>
Tensor unary(const Tensor& x, Eigen::VectorXd value, F dfdx) {
  return Tensor::make(x.shape(), std::move(value), {x}, [dfdx](Node& self) {
    Node& in = *self.inputs[0];
    in.grad_buffer().array() += self.grad.array() * dfdx(in.value, self.value).array();
  });
}

// Patch geometry of a convolution reading an image [C, H, W] and producing a
// grid of Ho x Wo patches.
struct Geometry {
  int c, h, w, kh, kw, stride, pad, ho, wo;
};

// col is [c * kh * kw, ho * wo], row-major.
void im2col(const double* img, const Geometry& g, double* col) {
  const int hw = g.ho * g.wo;
  for (int c = 0; c < g.c; ++c) {
    for (int ki = 0; ki < g.kh; ++ki) {
      for (int kj = 0; kj < g.kw; ++kj) {
        double* row = col + static_cast<std::ptrdiff_t>((c * g.kh + ki) * g.kw + kj) * hw;
        for (int oh = 0; oh < g.ho; ++oh) {
          const int ih = oh * g.stride - g.pad + ki;
          for (int ow = 0; ow < g.wo; ++ow) {
            const int iw = ow * g.stride - g.pad + kj;
            row[oh * g.wo + ow] =
                (ih >= 0 && ih < g.h && iw >= 0 && iw < g.w) ? img[(c * g.h + ih) * g.w + iw] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters and accumulates into img.
void col2im(const double* col, const Geometry& g, double* img) {
  const int hw = g.ho * g.wo;
  for (int c = 0; c < g.c; ++c) {
    for (int ki = 0; ki < g.kh; ++ki) {
      for (int kj = 0; kj < g.kw; ++kj) {
        const double* row = col + static_cast<std::ptrdiff_t>((c * g.kh + ki) * g.kw + kj) * hw;
        for (int oh = 0; oh < g.ho; ++oh) {
          const int ih = oh * g.stride - g.pad + ki;
          if (ih < 0 || ih >= g.h) continue;
          for (int ow = 0; ow < g.wo; ++ow) {
            const int iw = ow * g.stride - g.pad + kj;
            if (iw >= 0 && iw < g.w) img[(c * g.h + ih) * g.w + iw] += row[oh * g.wo + ow];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  return Tensor::make(a.shape(), a.value() + b.value(), {a, b}, [](Node& self) {
    accumulate(self, 0, self.grad);
    accumulate(self, 1, self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  return Tensor::make(a.shape(), a.value() - b.value(), {a, b}, [](Node& self) {
    accumulate(self, 0, self.grad);
    accumulate(self, 1, -self.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  return Tensor::make(a.shape(), a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
    accumulate(self, 0, self.grad.cwiseProduct(self.inputs[1]->value));
    accumulate(self, 1, self.grad.cwiseProduct(self.inputs[0]->value));
  });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  require_same(a, b, "minimum");
  return Tensor::make(a.shape(), a.value().cwiseMin(b.value()), {a, b}, [](Node& self) {
    const auto& va = self.inputs[0]->value;
    const auto& vb = self.inputs[1]->value;
    const Eigen::VectorXd first = (va.array() <= vb.array()).cast<double>().matrix();
    accumulate(self, 0, self.grad.cwiseProduct(first));
    accumulate(self, 1, self.grad.cwiseProduct((1.0 - first.array()).matrix()));
  });
}

Tensor scale(const Tensor& x, double c) {
  return Tensor::make(x.shape(), x.value() * c, {x}, [c](Node& self) { accumulate(self, 0, self.grad * c); });
}

Tensor add_scalar(const Tensor& x, double c) {
  return Tensor::make(x.shape(), x.value().array() + c, {x}, [](Node& self) { accumulate(self, 0, self.grad); });
}

Tensor square(const Tensor& x) {
  return unary(x, x.value().array().square().matrix(),
               [](const Eigen::VectorXd& in, const Eigen::VectorXd&) -> Eigen::VectorXd { return 2.0 * in; });
}

Tensor exp(const Tensor& x) {
  return unary(x, x.value().array().exp().matrix(),
               [](const Eigen::VectorXd&, const Eigen::VectorXd& out) -> Eigen::VectorXd { return out; });
}

Tensor log(const Tensor& x) {
  return unary(x, x.value().array().log().matrix(), [](const Eigen::VectorXd& in, const Eigen::VectorXd&) {
    return Eigen::VectorXd(in.array().inverse());
  });
}

Tensor relu(const Tensor& x) {
  return unary(x, x.value().cwiseMax(0.0), [](const Eigen::VectorXd& in, const Eigen::VectorXd&) {
    return Eigen::VectorXd((in.array() > 0.0).cast<double>());
  });
}

Tensor sigmoid(const Tensor& x) {
  Eigen::VectorXd y = x.value().unaryExpr([](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  return unary(x, std::move(y), [](const Eigen::VectorXd&, const Eigen::VectorXd& out) {
    return Eigen::VectorXd(out.array() * (1.0 - out.array()));
  });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("clamp: lo > hi");
  return unary(x, x.value().cwiseMax(lo).cwiseMin(hi), [lo, hi](const Eigen::VectorXd& in, const Eigen::VectorXd&) {
    return Eigen::VectorXd((in.array() >= lo && in.array() <= hi).cast<double>());
  });
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& target) {
  require_same(logits, target, "bce_with_logits");
  const auto& l = logits.value().array();
  const auto& t = target.value().array();
  Eigen::VectorXd loss = (l.max(0.0) - l * t + (-l.abs()).exp().log1p()).matrix();
  return Tensor::make(logits.shape(), std::move(loss), {logits}, [t = target.value()](Node& self) {
    const auto& in = self.inputs[0]->value;
    Eigen::VectorXd s = in.unaryExpr([](double v) {
      if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
      const double e = std::exp(v);
      return e / (1.0 + e);
    });
    accumulate(self, 0, self.grad.cwiseProduct(s - t));
  });
}

Tensor softmax(const Tensor& x) {
  require_rank(x, 2, "softmax", "input");
  const int n = x.dim(0), m = x.dim(1);
  Eigen::VectorXd y(x.numel());
  CMapMat in(x.value().data(), n, m);
  MapMat out(y.data(), n, m);
  out = (in.colwise() - in.rowwise().maxCoeff()).array().exp().matrix();
  out.array().colwise() /= out.rowwise().sum().array();
  return Tensor::make(x.shape(), std::move(y), {x}, [n, m](Node& self) {
    CMapMat yv(self.value.data(), n, m);
    CMapMat gy(self.grad.data(), n, m);
    const Eigen::VectorXd dot = yv.cwiseProduct(gy).rowwise().sum();
    RowMat gx = yv.array() * (gy.colwise() - dot).array();
    accumulate(self, 0, Eigen::Map<const Eigen::VectorXd>(gx.data(), gx.size()));
  });
}

Tensor log_softmax(const Tensor& x) {
  require_rank(x, 2, "log_softmax", "input");
  const int n = x.dim(0), m = x.dim(1);
  Eigen::VectorXd y(x.numel());
  CMapMat in(x.value().data(), n, m);
  MapMat out(y.data(), n, m);
  const Eigen::VectorXd mx = in.rowwise().maxCoeff();
  const Eigen::VectorXd lse = ((in.colwise() - mx).array().exp().rowwise().sum().log()).matrix() + mx;
  out = in.colwise() - lse;
  return Tensor::make(x.shape(), std::move(y), {x}, [n, m](Node& self) {
    CMapMat lp(self.value.data(), n, m);
    CMapMat gy(self.grad.data(), n, m);
    const Eigen::VectorXd total = gy.rowwise().sum();
    RowMat gx = gy - (lp.array().exp().colwise() * total.array()).matrix();
    accumulate(self, 0, Eigen::Map<const Eigen::VectorXd>(gx.data(), gx.size()));
  });
}

Tensor sum(const Tensor& x) {
  Eigen::VectorXd v(1);
  v[0] = x.value().sum();
  return Tensor::make({}, std::move(v), {x}, [](Node& self) {
    Node& in = *self.inputs[0];
    in.grad_buffer().array() += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw std::invalid_argument("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw std::invalid_argument("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  return Tensor::make(std::move(shape), x.value(), {x}, [](Node& self) { accumulate(self, 0, self.grad); });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "concat_cols", "lhs");
  require_rank(b, 2, "concat_cols", "rhs");
  if (a.dim(0) != b.dim(0)) {
    throw std::invalid_argument("concat_cols: row mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  const int n = a.dim(0), p = a.dim(1), q = b.dim(1);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n) * (p + q));
  MapMat out(y.data(), n, p + q);
  out.leftCols(p) = CMapMat(a.value().data(), n, p);
  out.rightCols(q) = CMapMat(b.value().data(), n, q);
  return Tensor::make({n, p + q}, std::move(y), {a, b}, [n, p, q](Node& self) {
    CMapMat g(self.grad.data(), n, p + q);
    RowMat ga = g.leftCols(p), gb = g.rightCols(q);
    accumulate(self, 0, Eigen::Map<const Eigen::VectorXd>(ga.data(), ga.size()));
    accumulate(self, 1, Eigen::Map<const Eigen::VectorXd>(gb.data(), gb.size()));
  });
}

Tensor gather_cols(const Tensor& x, const std::vector<int>& cols) {
  require_rank(x, 2, "gather_cols", "input");
  const int n = x.dim(0), m = x.dim(1);
  if (static_cast<int>(cols.size()) != n) throw std::invalid_argument("gather_cols: need one index per row");
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    if (cols[i] < 0 || cols[i] >= m) throw std::out_of_range("gather_cols: index out of range");
    y[i] = x.value()[static_cast<Eigen::Index>(i) * m + cols[i]];
  }
  return Tensor::make({n}, std::move(y), {x}, [cols, m](Node& self) {
    Node& in = *self.inputs[0];
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < cols.size(); ++i) g[static_cast<Eigen::Index>(i) * m + cols[i]] += self.grad[static_cast<Eigen::Index>(i)];
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank(x, 2, "linear", "input");
  require_rank(w, 2, "linear", "weight");
  require_rank(b, 1, "linear", "bias");
  if (x.dim(1) != w.dim(1) || b.dim(0) != w.dim(0)) {
    throw std::invalid_argument("linear: incompatible shapes x " + to_string(x.shape()) + ", W " +
                                to_string(w.shape()) + ", b " + to_string(b.shape()));
  }
  const int n = x.dim(0), in = x.dim(1), out = w.dim(0);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n) * out);
  MapMat ym(y.data(), n, out);
  ym.noalias() = CMapMat(x.value().data(), n, in) * CMapMat(w.value().data(), out, in).transpose();
  ym.rowwise() += b.value().transpose();
  return Tensor::make({n, out}, std::move(y), {x, w, b}, [n, in, out](Node& self) {
    CMapMat gy(self.grad.data(), n, out);
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    if (xn.requires_grad) {
      MapMat(xn.grad_buffer().data(), n, in).noalias() += gy * CMapMat(wn.value.data(), out, in);
    }
    if (wn.requires_grad) {
      MapMat(wn.grad_buffer().data(), out, in).noalias() += gy.transpose() * CMapMat(xn.value.data(), n, in);
    }
    if (bn.requires_grad) bn.grad_buffer() += gy.colwise().sum().transpose();
  });
}

Tensor conv2d(const Tensor& x, const Tensor& k, const Tensor& b, int stride, int padding) {
  require_rank(x, 4, "conv2d", "input");
  require_rank(k, 4, "conv2d", "kernel");
  require_rank(b, 1, "conv2d", "bias");
  if (stride < 1 || padding < 0) throw std::invalid_argument("conv2d: stride must be >= 1 and padding >= 0");
  if (x.dim(1) != k.dim(1) || b.dim(0) != k.dim(0)) {
    throw std::invalid_argument("conv2d: incompatible shapes x " + to_string(x.shape()) + ", K " +
                                to_string(k.shape()) + ", b " + to_string(b.shape()));
  }
  const int n = x.dim(0), o = k.dim(0);
  Geometry g{x.dim(1), x.dim(2), x.dim(3), k.dim(2), k.dim(3), stride, padding, 0, 0};
  g.ho = conv_out_size(g.h, g.kh, stride, padding);
  g.wo = conv_out_size(g.w, g.kw, stride, padding);
  if (g.ho < 1 || g.wo < 1) {
    throw std::invalid_argument("conv2d: kernel " + to_string(k.shape()) + " too large for input " + to_string(x.shape()));
  }
  const int ckk = g.c * g.kh * g.kw, hw = g.ho * g.wo, in_sz = g.c * g.h * g.w;

  Eigen::VectorXd y(static_cast<Eigen::Index>(n) * o * hw);
  RowMat cols(static_cast<Eigen::Index>(n) * ckk, hw);
  CMapMat km(k.value().data(), o, ckk);
  for (int s = 0; s < n; ++s) {
    im2col(x.value().data() + static_cast<std::ptrdiff_t>(s) * in_sz, g, cols.data() + static_cast<std::ptrdiff_t>(s) * ckk * hw);
    MapMat ys(y.data() + static_cast<std::ptrdiff_t>(s) * o * hw, o, hw);
    ys.noalias() = km * cols.middleRows(static_cast<Eigen::Index>(s) * ckk, ckk);
    ys.colwise() += b.value();
  }
  return Tensor::make({n, o, g.ho, g.wo}, std::move(y), {x, k, b},
                      [g, n, o, ckk, hw, in_sz, cols = std::move(cols)](Node& self) {
                        Node& xn = *self.inputs[0];
                        Node& kn = *self.inputs[1];
                        Node& bn = *self.inputs[2];
                        CMapMat km(kn.value.data(), o, ckk);
                        RowMat dcol(ckk, hw);
                        for (int s = 0; s < n; ++s) {
                          CMapMat gy(self.grad.data() + static_cast<std::ptrdiff_t>(s) * o * hw, o, hw);
                          const auto col = cols.middleRows(static_cast<Eigen::Index>(s) * ckk, ckk);
                          if (kn.requires_grad) MapMat(kn.grad_buffer().data(), o, ckk).noalias() += gy * col.transpose();
                          if (bn.requires_grad) bn.grad_buffer() += gy.rowwise().sum();
                          if (xn.requires_grad) {
                            dcol.noalias() = km.transpose() * gy;
                            col2im(dcol.data(), g, xn.grad_buffer().data() + static_cast<std::ptrdiff_t>(s) * in_sz);
                          }
                        }
                      });
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& k, const Tensor& b, int stride, int padding,
                        int output_padding_h, int output_padding_w) {
  require_rank(x, 4, "conv_transpose2d", "input");
  require_rank(k, 4, "conv_transpose2d", "kernel");
  require_rank(b, 1, "conv_transpose2d", "bias");
  if (stride < 1 || padding < 0) throw std::invalid_argument("conv_transpose2d: stride must be >= 1 and padding >= 0");
  if (output_padding_h < 0 || output_padding_h >= stride || output_padding_w < 0 || output_padding_w >= stride) {
    throw std::invalid_argument("conv_transpose2d: output padding must lie in [0, stride)");
  }
  if (x.dim(1) != k.dim(0) || b.dim(0) != k.dim(1)) {
    throw std::invalid_argument("conv_transpose2d: incompatible shapes x " + to_string(x.shape()) + ", K " +
                                to_string(k.shape()) + ", b " + to_string(b.shape()));
  }
  const int n = x.dim(0), ci = x.dim(1), co = k.dim(1), h = x.dim(2), w = x.dim(3);
  const int kh = k.dim(2), kw = k.dim(3);
  const int ho = conv_transpose_out_size(h, kh, stride, padding, output_padding_h);
  const int wo = conv_transpose_out_size(w, kw, stride, padding, output_padding_w);
  if (ho < 1 || wo < 1) throw std::invalid_argument("conv_transpose2d: empty output for input " + to_string(x.shape()));
  // the forward conv this is the adjoint of: reads [co, ho, wo], yields h x w patches
  const Geometry g{co, ho, wo, kh, kw, stride, padding, h, w};
  const int cokk = co * kh * kw, hw = h * w, out_sz = co * ho * wo;

  Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n) * out_sz);
  CMapMat km(k.value().data(), ci, cokk);
  RowMat col(cokk, hw);
  for (int s = 0; s < n; ++s) {
    col.noalias() = km.transpose() * CMapMat(x.value().data() + static_cast<std::ptrdiff_t>(s) * ci * hw, ci, hw);
    double* ys = y.data() + static_cast<std::ptrdiff_t>(s) * out_sz;
    col2im(col.data(), g, ys);
    MapMat(ys, co, ho * wo).colwise() += b.value();
  }
  return Tensor::make({n, co, ho, wo}, std::move(y), {x, k, b}, [g, n, ci, cokk, hw, out_sz](Node& self) {
    Node& xn = *self.inputs[0];
    Node& kn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    CMapMat km(kn.value.data(), ci, cokk);
    RowMat dcol(cokk, hw);
    for (int s = 0; s < n; ++s) {
      const double* gy = self.grad.data() + static_cast<std::ptrdiff_t>(s) * out_sz;
      im2col(gy, g, dcol.data());
      CMapMat xs(xn.value.data() + static_cast<std::ptrdiff_t>(s) * ci * hw, ci, hw);
      if (xn.requires_grad) {
        MapMat(xn.grad_buffer().data() + static_cast<std::ptrdiff_t>(s) * ci * hw, ci, hw).noalias() += km * dcol;
      }
      if (kn.requires_grad) MapMat(kn.grad_buffer().data(), ci, cokk).noalias() += xs * dcol.transpose();
      if (bn.requires_grad) bn.grad_buffer() += CMapMat(gy, g.c, g.h * g.w).rowwise().sum();
    }
  });
}

}  // namespace tsc::ad
