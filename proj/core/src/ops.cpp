#include "autocl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>

#include "autocl/error.hpp"

namespace autocl {
namespace {

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || a.tape() != b.tape()) throw DimensionError("operands live on different tapes");
  return *a.tape();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
  }
}

// Unary elementwise op whose derivative is a function of (input, output).
template <typename F, typename D>
Var unary(const char* name, Var x, F forward, D derivative) {
  Tape& tape = *x.tape();
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  const std::size_t xid = x.id();
  const std::size_t oid = tape.size();
  return tape.record(name, std::move(out), {xid}, [&tape, xid, oid, derivative](const Tensor& g, std::span<Tensor* const> gin) {
    const Tensor& in = tape.value(xid);
    const Tensor& out = tape.value(oid);
    Tensor& gx = *gin[0];
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * derivative(in[i], out[i]);
  });
}

std::vector<std::size_t> row_columns(const PairMask& mask, std::size_t r) {
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < mask.cols(); ++c)
    if (mask.get(r, c)) cols.push_back(c);
  return cols;
}

void require_masks(const Tensor& scores, const PairMask& pos, const PairMask& neg, const char* op) {
  require_rank(scores, 3, op);
  if (pos.rows() != scores.dim(1) || pos.cols() != scores.dim(2) || neg.rows() != pos.rows() ||
      neg.cols() != pos.cols()) {
    throw DimensionError(std::string(op) + ": mask shape does not match scores " + shape_string(scores.shape()));
  }
}

}  // namespace

std::size_t PairMask::row_count(std::size_t r) const {
  std::size_t n = 0;
  for (std::size_t c = 0; c < cols_; ++c) n += bits_[r * cols_ + c];
  return n;
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return tape.record("add", std::move(out), {a.id(), b.id()}, [](const Tensor& g, std::span<Tensor* const> gin) {
    for (Tensor* gx : gin)
      if (gx)
        for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
  });
}

Var sub(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return tape.record("sub", std::move(out), {a.id(), b.id()}, [](const Tensor& g, std::span<Tensor* const> gin) {
    if (gin[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
    if (gin[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*gin[1])[i] -= g[i];
  });
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t aid = a.id(), bid = b.id();
  return tape.record("mul", std::move(out), {aid, bid}, [&tape, aid, bid](const Tensor& g, std::span<Tensor* const> gin) {
    const Tensor& av = tape.value(aid);
    const Tensor& bv = tape.value(bid);
    if (gin[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * bv[i];
    if (gin[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*gin[1])[i] += g[i] * av[i];
  });
}

Var scale(Var a, double factor) {
  Tape& tape = *a.tape();
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return tape.record("scale", std::move(out), {a.id()}, [factor](const Tensor& g, std::span<Tensor* const> gin) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * factor;
  });
}

Var add_bias(Var x, Var bias) {
  Tape& tape = same_tape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (xv.rank() == 0 || bv.rank() != 1 || xv.shape().back() != bv.size()) {
    throw DimensionError("add_bias: cannot broadcast " + shape_string(bv.shape()) + " over " +
                         shape_string(xv.shape()));
  }
  const std::size_t d = bv.size();
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % d];
  return tape.record("add_bias", std::move(out), {x.id(), bias.id()}, [d](const Tensor& g, std::span<Tensor* const> gin) {
    if (gin[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
    if (gin[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*gin[1])[i % d] += g[i];
  });
}

Var add_const(Var x, const Tensor& c) {
  Tape& tape = *x.tape();
  require_same_shape(x.value(), c, "add_const");
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c[i];
  return tape.record("add_const", std::move(out), {x.id()}, [](const Tensor& g, std::span<Tensor* const> gin) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
  });
}

Var mul_const(Var x, const Tensor& c) {
  Tape& tape = *x.tape();
  require_same_shape(x.value(), c, "mul_const");
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c[i];
  return tape.record("mul_const", std::move(out), {x.id()}, [c](const Tensor& g, std::span<Tensor* const> gin) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * c[i];
  });
}

Var exp(Var x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(Var x) {
  return unary("log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var tanh(Var x) {
  return unary("tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var x) {
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var softmax(Var x) {
  Tape& tape = *x.tape();
  const Tensor& in = x.value();
  if (in.rank() == 0) throw DimensionError("softmax on a scalar");
  const std::size_t d = in.shape().back();
  const std::size_t rows = in.size() / d;
  Tensor out(in.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* v = in.ptr() + r * d;
    double* y = out.ptr() + r * d;
    const double mx = *std::max_element(v, v + d);
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) z += (y[j] = std::exp(v[j] - mx));
    for (std::size_t j = 0; j < d; ++j) y[j] /= z;
  }
  const std::size_t oid = tape.size();
  return tape.record("softmax", std::move(out), {x.id()}, [&tape, oid, d, rows](const Tensor& g, std::span<Tensor* const> gin) {
    const Tensor& y = tape.value(oid);
    Tensor& gx = *gin[0];
    for (std::size_t r = 0; r < rows; ++r) {
      const double* yr = y.ptr() + r * d;
      const double* gr = g.ptr() + r * d;
      double dotp = 0.0;
      for (std::size_t j = 0; j < d; ++j) dotp += gr[j] * yr[j];
      for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += yr[j] * (gr[j] - dotp);
    }
  });
}

Var sum(Var x) {
  Tape& tape = *x.tape();
  const Tensor& in = x.value();
  const double total = std::accumulate(in.data().begin(), in.data().end(), 0.0);
  return tape.record("sum", Tensor::scalar(total), {x.id()}, [](const Tensor& g, std::span<Tensor* const> gin) {
    const double gv = g[0];
    for (double& v : gin[0]->data()) v += gv;
  });
}

Var mean(Var x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var reshape(Var x, Shape shape) {
  Tape& tape = *x.tape();
  Tensor out = x.value().reshaped(std::move(shape));
  return tape.record("reshape", std::move(out), {x.id()}, [](const Tensor& g, std::span<Tensor* const> gin) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
  });
}

Var permute(Var x, const std::vector<std::size_t>& perm) {
  Tape& tape = *x.tape();
  const Tensor& in = x.value();
  const std::size_t rank = in.rank();
  if (perm.size() != rank) throw DimensionError("permute: permutation rank mismatch");
  std::vector<bool> seen(rank, false);
  for (std::size_t p : perm) {
    if (p >= rank || seen[p]) throw DimensionError("permute: invalid permutation");
    seen[p] = true;
  }
  Shape out_shape(rank);
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t a = rank; a-- > 1;) in_strides[a - 1] = in_strides[a] * in.dim(a);
  for (std::size_t a = 0; a < rank; ++a) out_shape[a] = in.dim(perm[a]);

  // map[out_linear] = in_linear
  auto map = std::make_shared<std::vector<std::size_t>>(in.size());
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t o = 0; o < in.size(); ++o) {
    std::size_t src = 0;
    for (std::size_t a = 0; a < rank; ++a) src += idx[a] * in_strides[perm[a]];
    (*map)[o] = src;
    for (std::size_t a = rank; a-- > 0;) {
      if (++idx[a] < out_shape[a]) break;
      idx[a] = 0;
    }
  }
  Tensor out(out_shape);
  for (std::size_t o = 0; o < out.size(); ++o) out[o] = in[(*map)[o]];
  return tape.record("permute", std::move(out), {x.id()}, [map](const Tensor& g, std::span<Tensor* const> gin) {
    for (std::size_t o = 0; o < g.size(); ++o) (*gin[0])[(*map)[o]] += g[o];
  });
}

Var transpose(Var x) {
  require_rank(x.value(), 2, "transpose");
  return permute(x, {1, 0});
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  Tape& tape = *parts[0].tape();
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw DimensionError("concat axis out of range");
  std::size_t outer = 1, inner = 1, total_axis = 0;
  for (std::size_t a = 0; a < axis; ++a) outer *= first[a];
  for (std::size_t a = axis + 1; a < first.size(); ++a) inner *= first[a];
  std::vector<std::size_t> ids, widths;
  for (const Var& p : parts) {
    if (p.tape() != &tape) throw DimensionError("concat operands live on different tapes");
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw DimensionError("concat rank mismatch");
    for (std::size_t a = 0; a < s.size(); ++a)
      if (a != axis && s[a] != first[a]) throw DimensionError("concat shape mismatch " + shape_string(s));
    ids.push_back(p.id());
    widths.push_back(s[axis] * inner);
    total_axis += s[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total_axis;
  Tensor out(out_shape);
  const std::size_t row = total_axis * inner;
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const double* src = parts[p].value().ptr() + o * widths[p];
      std::copy(src, src + widths[p], out.ptr() + o * row + offset);
      offset += widths[p];
    }
  }
  return tape.record("concat", std::move(out), ids, [widths, outer, row](const Tensor& g, std::span<Tensor* const> gin) {
    for (std::size_t o = 0; o < outer; ++o) {
      std::size_t offset = 0;
      for (std::size_t p = 0; p < widths.size(); ++p) {
        if (gin[p]) {
          double* dst = gin[p]->ptr() + o * widths[p];
          const double* src = g.ptr() + o * row + offset;
          for (std::size_t i = 0; i < widths[p]; ++i) dst[i] += src[i];
        }
        offset += widths[p];
      }
    }
  });
}

Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length) {
  Tape& tape = *x.tape();
  const Tensor& in = x.value();
  if (axis >= in.rank() || start + length > in.dim(axis) || length == 0) {
    throw DimensionError("slice [" + std::to_string(start) + ", +" + std::to_string(length) + ") on axis " +
                         std::to_string(axis) + " of " + shape_string(in.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= in.dim(a);
  for (std::size_t a = axis + 1; a < in.rank(); ++a) inner *= in.dim(a);
  const std::size_t in_row = in.dim(axis) * inner;
  const std::size_t out_row = length * inner;
  Shape out_shape = in.shape();
  out_shape[axis] = length;
  Tensor out(out_shape);
  for (std::size_t o = 0; o < outer; ++o) {
    const double* src = in.ptr() + o * in_row + start * inner;
    std::copy(src, src + out_row, out.ptr() + o * out_row);
  }
  return tape.record("slice", std::move(out), {x.id()}, [outer, in_row, out_row, start, inner](const Tensor& g, std::span<Tensor* const> gin) {
    for (std::size_t o = 0; o < outer; ++o) {
      double* dst = gin[0]->ptr() + o * in_row + start * inner;
      const double* src = g.ptr() + o * out_row;
      for (std::size_t i = 0; i < out_row; ++i) dst[i] += src[i];
    }
  });
}

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank(av, 2, "matmul");
  require_rank(bv, 2, "matmul");
  const std::size_t n = av.dim(0), k = av.dim(1), m = bv.dim(1);
  if (bv.dim(0) != k) {
    throw DimensionError("matmul: " + shape_string(av.shape()) + " @ " + shape_string(bv.shape()));
  }
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    double* o = out.ptr() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      const double* br = bv.ptr() + p * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += aip * br[j];
    }
  }
  const std::size_t aid = a.id(), bid = b.id();
  return tape.record("matmul", std::move(out), {aid, bid}, [&tape, aid, bid, n, k, m](const Tensor& g, std::span<Tensor* const> gin) {
    const Tensor& av = tape.value(aid);
    const Tensor& bv = tape.value(bid);
    if (gin[0]) {
      Tensor& ga = *gin[0];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double* gr = g.ptr() + i * m;
          const double* br = bv.ptr() + p * m;
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += gr[j] * br[j];
          ga[i * k + p] += acc;
        }
    }
    if (gin[1]) {
      Tensor& gb = *gin[1];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          const double* gr = g.ptr() + i * m;
          double* dst = gb.ptr() + p * m;
          for (std::size_t j = 0; j < m; ++j) dst[j] += aip * gr[j];
        }
    }
  });
}

Var linear(Var x, Var w, Var b) {
  const Shape& xs = x.shape();
  const Tensor& wv = w.value();
  require_rank(wv, 2, "linear");
  if (xs.empty() || xs.back() != wv.dim(0)) {
    throw DimensionError("linear: input " + shape_string(xs) + " vs weight " + shape_string(wv.shape()));
  }
  const std::size_t rows = x.value().size() / wv.dim(0);
  Shape out_shape = xs;
  out_shape.back() = wv.dim(1);
  Var flat = reshape(x, {rows, wv.dim(0)});
  return reshape(add_bias(matmul(flat, w), b), out_shape);
}

Var conv1d_dilated(Var input, Var weight, Var bias, std::size_t dilation) {
  Tape& tape = same_tape(input, weight);
  if (bias.tape() != &tape) throw DimensionError("conv1d_dilated: bias on a different tape");
  const Tensor& x = input.value();
  const Tensor& w = weight.value();
  const Tensor& bv = bias.value();
  require_rank(x, 3, "conv1d_dilated");
  require_rank(w, 3, "conv1d_dilated");
  if (dilation < 1) throw ConfigError("conv1d_dilated: dilation must be >= 1");
  const std::size_t B = x.dim(0), T = x.dim(1), Ci = x.dim(2);
  const std::size_t K = w.dim(0), Co = w.dim(2);
  if (w.dim(1) != Ci || bv.rank() != 1 || bv.size() != Co) {
    throw DimensionError("conv1d_dilated: input " + shape_string(x.shape()) + ", weight " +
                         shape_string(w.shape()) + ", bias " + shape_string(bv.shape()));
  }
  const auto half = static_cast<std::ptrdiff_t>(K / 2);
  const auto dil = static_cast<std::ptrdiff_t>(dilation);
  const auto Tl = static_cast<std::ptrdiff_t>(T);

  Tensor out({B, T, Co});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::ptrdiff_t t = 0; t < Tl; ++t) {
      double* o = out.ptr() + (b * T + static_cast<std::size_t>(t)) * Co;
      for (std::size_t c = 0; c < Co; ++c) o[c] = bv[c];
      for (std::size_t k = 0; k < K; ++k) {
        const std::ptrdiff_t s = t + (static_cast<std::ptrdiff_t>(k) - half) * dil;
        if (s < 0 || s >= Tl) continue;
        const double* xi = x.ptr() + (b * T + static_cast<std::size_t>(s)) * Ci;
        const double* wk = w.ptr() + k * Ci * Co;
        for (std::size_t i = 0; i < Ci; ++i) {
          const double xv = xi[i];
          const double* wr = wk + i * Co;
          for (std::size_t c = 0; c < Co; ++c) o[c] += xv * wr[c];
        }
      }
    }
  }
  const std::size_t xid = input.id(), wid = weight.id();
  return tape.record("conv1d_dilated", std::move(out), {xid, wid, bias.id()},
                     [&tape, xid, wid, B, T, Ci, K, Co, half, dil](const Tensor& g, std::span<Tensor* const> gin) {
    const Tensor& x = tape.value(xid);
    const Tensor& w = tape.value(wid);
    Tensor* gx = gin[0];
    Tensor* gw = gin[1];
    Tensor* gb = gin[2];
    const auto Tl = static_cast<std::ptrdiff_t>(T);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::ptrdiff_t t = 0; t < Tl; ++t) {
        const double* gr = g.ptr() + (b * T + static_cast<std::size_t>(t)) * Co;
        if (gb)
          for (std::size_t c = 0; c < Co; ++c) (*gb)[c] += gr[c];
        for (std::size_t k = 0; k < K; ++k) {
          const std::ptrdiff_t s = t + (static_cast<std::ptrdiff_t>(k) - half) * dil;
          if (s < 0 || s >= Tl) continue;
          const std::size_t row = (b * T + static_cast<std::size_t>(s)) * Ci;
          const double* wk = w.ptr() + k * Ci * Co;
          if (gx) {
            double* gxi = gx->ptr() + row;
            for (std::size_t i = 0; i < Ci; ++i) {
              const double* wr = wk + i * Co;
              double acc = 0.0;
              for (std::size_t c = 0; c < Co; ++c) acc += gr[c] * wr[c];
              gxi[i] += acc;
            }
          }
          if (gw) {
            const double* xi = x.ptr() + row;
            double* gwk = gw->ptr() + k * Ci * Co;
            for (std::size_t i = 0; i < Ci; ++i) {
              const double xv = xi[i];
              double* gwr = gwk + i * Co;
              for (std::size_t c = 0; c < Co; ++c) gwr[c] += xv * gr[c];
            }
          }
        }
      }
    }
  });
}

Var pool1d(Var input, std::size_t kernel, PoolOp op) {
  Tape& tape = *input.tape();
  const Tensor& x = input.value();
  require_rank(x, 3, "pool1d");
  if (kernel < 2) throw ConfigError("pool1d: kernel must be >= 2, got " + std::to_string(kernel));
  const std::size_t B = x.dim(0), T = x.dim(1), d = x.dim(2);
  if (T == 0) throw DimensionError("pool1d on an empty sequence");
  const std::size_t To = (T + kernel - 1) / kernel;
  Tensor out({B, To, d});
  auto argmax = std::make_shared<std::vector<std::size_t>>(op == PoolOp::max ? out.size() : 0);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < To; ++t) {
      const std::size_t lo = t * kernel, hi = std::min(T, lo + kernel);
      double* o = out.ptr() + (b * To + t) * d;
      for (std::size_t c = 0; c < d; ++c) {
        if (op == PoolOp::avg) {
          double acc = 0.0;
          for (std::size_t s = lo; s < hi; ++s) acc += x[(b * T + s) * d + c];
          o[c] = acc / static_cast<double>(hi - lo);
        } else {
          std::size_t best = lo;
          for (std::size_t s = lo + 1; s < hi; ++s)
            if (x[(b * T + s) * d + c] > x[(b * T + best) * d + c]) best = s;
          o[c] = x[(b * T + best) * d + c];
          (*argmax)[(b * To + t) * d + c] = best;
        }
      }
    }
  }
  return tape.record(op == PoolOp::avg ? "avg_pool1d" : "max_pool1d", std::move(out), {input.id()},
                     [argmax, op, B, T, To, d, kernel](const Tensor& g, std::span<Tensor* const> gin) {
    Tensor& gx = *gin[0];
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < To; ++t) {
        const std::size_t lo = t * kernel, hi = std::min(T, lo + kernel);
        for (std::size_t c = 0; c < d; ++c) {
          const double gv = g[(b * To + t) * d + c];
          if (op == PoolOp::avg) {
            const double share = gv / static_cast<double>(hi - lo);
            for (std::size_t s = lo; s < hi; ++s) gx[(b * T + s) * d + c] += share;
          } else {
            gx[(b * T + (*argmax)[(b * To + t) * d + c]) * d + c] += gv;
          }
        }
      }
  });
}

Var layer_norm(Var x, Var gain, Var offset, double eps) {
  Tape& tape = same_tape(x, gain);
  if (offset.tape() != &tape) throw DimensionError("layer_norm: offset on a different tape");
  const Tensor& in = x.value();
  const Tensor& gv = gain.value();
  const Tensor& bv = offset.value();
  if (in.rank() == 0 || gv.rank() != 1 || bv.rank() != 1 || gv.size() != in.shape().back() ||
      bv.size() != gv.size()) {
    throw DimensionError("layer_norm: input " + shape_string(in.shape()) + ", gain " + shape_string(gv.shape()));
  }
  const std::size_t d = gv.size();
  const std::size_t rows = in.size() / d;
  auto xhat = std::make_shared<Tensor>(in.shape());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  Tensor out(in.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* v = in.ptr() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += v[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (v[j] - mu) * (v[j] - mu);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (v[j] - mu) * inv;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  const std::size_t gid = gain.id();
  return tape.record("layer_norm", std::move(out), {x.id(), gid, offset.id()},
                     [&tape, gid, xhat, inv_std, rows, d](const Tensor& g, std::span<Tensor* const> gin) {
    const Tensor& gv = tape.value(gid);
    const double dn = static_cast<double>(d);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* gr = g.ptr() + r * d;
      const double* h = xhat->ptr() + r * d;
      if (gin[1])
        for (std::size_t j = 0; j < d; ++j) (*gin[1])[j] += gr[j] * h[j];
      if (gin[2])
        for (std::size_t j = 0; j < d; ++j) (*gin[2])[j] += gr[j];
      if (gin[0]) {
        double mean_g = 0.0, mean_gh = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double gh = gr[j] * gv[j];
          mean_g += gh;
          mean_gh += gh * h[j];
        }
        mean_g /= dn;
        mean_gh /= dn;
        const double inv = (*inv_std)[r];
        for (std::size_t j = 0; j < d; ++j)
          (*gin[0])[r * d + j] += inv * (gr[j] * gv[j] - mean_g - h[j] * mean_gh);
      }
    }
  });
}

Var l2_normalize(Var x, double eps) {
  Tape& tape = *x.tape();
  const Tensor& in = x.value();
  if (in.rank() == 0) throw DimensionError("l2_normalize on a scalar");
  const std::size_t d = in.shape().back();
  const std::size_t rows = in.size() / d;
  auto denom = std::make_shared<std::vector<double>>(rows);
  auto clamped = std::make_shared<std::vector<bool>>(rows);
  Tensor out(in.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* v = in.ptr() + r * d;
    double n2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) n2 += v[j] * v[j];
    const double n = std::sqrt(n2);
    (*clamped)[r] = n <= eps;
    (*denom)[r] = std::max(n, eps);
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = v[j] / (*denom)[r];
  }
  const std::size_t oid = tape.size();
  return tape.record("l2_normalize", std::move(out), {x.id()},
                     [&tape, oid, denom, clamped, rows, d](const Tensor& g, std::span<Tensor* const> gin) {
    const Tensor& y = tape.value(oid);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* gr = g.ptr() + r * d;
      const double* yr = y.ptr() + r * d;
      const double inv = 1.0 / (*denom)[r];
      double proj = 0.0;
      if (!(*clamped)[r])
        for (std::size_t j = 0; j < d; ++j) proj += gr[j] * yr[j];
      for (std::size_t j = 0; j < d; ++j) (*gin[0])[r * d + j] += (gr[j] - yr[j] * proj) * inv;
    }
  });
}

Var pairwise_similarity(Var a, Var c, SimilarityKind kind) {
  Tape& tape = same_tape(a, c);
  const Tensor& av = a.value();
  const Tensor& cv = c.value();
  require_rank(av, 3, "pairwise_similarity");
  require_rank(cv, 3, "pairwise_similarity");
  const std::size_t G = av.dim(0), n = av.dim(1), m = cv.dim(1), d = av.dim(2);
  if (cv.dim(0) != G || cv.dim(2) != d) {
    throw DimensionError("pairwise_similarity: " + shape_string(av.shape()) + " vs " + shape_string(cv.shape()));
  }
  constexpr double kCosEps = 1e-12;
  Tensor out({G, n, m});
  // Cached per-pair quantities for the backward pass: the raw dot product
  // (cos) or the distance (dist).
  auto aux = std::make_shared<Tensor>(kind == SimilarityKind::dot ? Shape{0} : Shape{G, n, m});
  auto na = std::make_shared<std::vector<double>>(G * n, 0.0);
  auto nc = std::make_shared<std::vector<double>>(G * m, 0.0);
  if (kind == SimilarityKind::cos) {
    for (std::size_t i = 0; i < G * n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += av[i * d + k] * av[i * d + k];
      (*na)[i] = std::sqrt(s);
    }
    for (std::size_t j = 0; j < G * m; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += cv[j * d + k] * cv[j * d + k];
      (*nc)[j] = std::sqrt(s);
    }
  }
  for (std::size_t g = 0; g < G; ++g)
    for (std::size_t i = 0; i < n; ++i) {
      const double* ai = av.ptr() + (g * n + i) * d;
      for (std::size_t j = 0; j < m; ++j) {
        const double* cj = cv.ptr() + (g * m + j) * d;
        const std::size_t o = (g * n + i) * m + j;
        if (kind == SimilarityKind::dist) {
          double s = 0.0;
          for (std::size_t k = 0; k < d; ++k) {
            const double diff = ai[k] - cj[k];
            s += diff * diff;
          }
          const double r = std::sqrt(s);
          (*aux)[o] = r;
          out[o] = -r;
        } else {
          double s = 0.0;
          for (std::size_t k = 0; k < d; ++k) s += ai[k] * cj[k];
          if (kind == SimilarityKind::dot) {
            out[o] = s;
          } else {
            (*aux)[o] = s;
            out[o] = s / ((*na)[g * n + i] * (*nc)[g * m + j] + kCosEps);
          }
        }
      }
    }
  const std::size_t aid = a.id(), cid = c.id();
  return tape.record("pairwise_similarity", std::move(out), {aid, cid},
                     [&tape, aid, cid, kind, aux, na, nc, G, n, m, d](const Tensor& gs, std::span<Tensor* const> gin) {
    const Tensor& av = tape.value(aid);
    const Tensor& cv = tape.value(cid);
    Tensor* ga = gin[0];
    Tensor* gc = gin[1];
    std::vector<double> diff(d);
    for (std::size_t g = 0; g < G; ++g)
      for (std::size_t i = 0; i < n; ++i) {
        const double* ai = av.ptr() + (g * n + i) * d;
        double* gai = ga ? ga->ptr() + (g * n + i) * d : nullptr;
        for (std::size_t j = 0; j < m; ++j) {
          const std::size_t o = (g * n + i) * m + j;
          const double gv = gs[o];
          if (gv == 0.0) continue;
          const double* cj = cv.ptr() + (g * m + j) * d;
          double* gcj = gc ? gc->ptr() + (g * m + j) * d : nullptr;
          switch (kind) {
            case SimilarityKind::dot:
              if (gai)
                for (std::size_t k = 0; k < d; ++k) gai[k] += gv * cj[k];
              if (gcj)
                for (std::size_t k = 0; k < d; ++k) gcj[k] += gv * ai[k];
              break;
            case SimilarityKind::cos: {
              const double nai = (*na)[g * n + i], ncj = (*nc)[g * m + j];
              const double D = nai * ncj + kCosEps;
              const double dotp = (*aux)[o];
              const double alpha = gv / D;
              const double beta_a = nai > 0.0 ? gv * dotp * ncj / (D * D * nai) : 0.0;
              const double beta_c = ncj > 0.0 ? gv * dotp * nai / (D * D * ncj) : 0.0;
              if (gai)
                for (std::size_t k = 0; k < d; ++k) gai[k] += alpha * cj[k] - beta_a * ai[k];
              if (gcj)
                for (std::size_t k = 0; k < d; ++k) gcj[k] += alpha * ai[k] - beta_c * cj[k];
              break;
            }
            case SimilarityKind::dist: {
              const double r = (*aux)[o];
              if (r <= 0.0) break;
              const double f = gv / r;
              for (std::size_t k = 0; k < d; ++k) diff[k] = (ai[k] - cj[k]) * f;
              if (gai)
                for (std::size_t k = 0; k < d; ++k) gai[k] -= diff[k];
              if (gcj)
                for (std::size_t k = 0; k < d; ++k) gcj[k] += diff[k];
              break;
            }
          }
        }
      }
  });
}

std::size_t contrastive_row_count(const PairMask& positives, const PairMask& negatives) {
  std::size_t rows = 0;
  for (std::size_t r = 0; r < positives.rows(); ++r)
    if (positives.row_count(r) > 0 && negatives.row_count(r) > 0) ++rows;
  return rows;
}

Var contrastive_nll(Var scores, const PairMask& positives, const PairMask& negatives) {
  Tape& tape = *scores.tape();
  const Tensor& s = scores.value();
  require_masks(s, positives, negatives, "contrastive_nll");
  const std::size_t G = s.dim(0), n = s.dim(1), m = s.dim(2);

  struct Row {
    std::vector<std::size_t> pos, all;
  };
  auto rows = std::make_shared<std::vector<Row>>(n);
  for (std::size_t r = 0; r < n; ++r) {
    Row& row = (*rows)[r];
    if (positives.row_count(r) == 0 || negatives.row_count(r) == 0) continue;
    for (std::size_t c = 0; c < m; ++c) {
      const bool p = positives.get(r, c);
      if (p) row.pos.push_back(c);
      if (p || negatives.get(r, c)) row.all.push_back(c);
    }
  }
  // log-sum-exp over all and over positives, per (group, row)
  auto lse = std::make_shared<std::vector<std::pair<double, double>>>(G * n, std::pair{0.0, 0.0});
  auto logsumexp = [](const double* v, const std::vector<std::size_t>& cols) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c : cols) mx = std::max(mx, v[c]);
    double z = 0.0;
    for (std::size_t c : cols) z += std::exp(v[c] - mx);
    return mx + std::log(z);
  };
  Tensor out({G, n});
  for (std::size_t g = 0; g < G; ++g)
    for (std::size_t r = 0; r < n; ++r) {
      const Row& row = (*rows)[r];
      if (row.pos.empty()) continue;
      const double* v = s.ptr() + (g * n + r) * m;
      const double all = logsumexp(v, row.all);
      const double pos = logsumexp(v, row.pos);
      (*lse)[g * n + r] = {all, pos};
      out[g * n + r] = all - pos;
    }
  const std::size_t sid = scores.id();
  return tape.record("contrastive_nll", std::move(out), {sid},
                     [&tape, sid, rows, lse, G, n, m](const Tensor& g, std::span<Tensor* const> gin) {
    const Tensor& s = tape.value(sid);
    Tensor& gsc = *gin[0];
    for (std::size_t grp = 0; grp < G; ++grp)
      for (std::size_t r = 0; r < n; ++r) {
        const Row& row = (*rows)[r];
        const double gv = g[grp * n + r];
        if (row.pos.empty() || gv == 0.0) continue;
        const auto [all, pos] = (*lse)[grp * n + r];
        const double* v = s.ptr() + (grp * n + r) * m;
        double* dst = gsc.ptr() + (grp * n + r) * m;
        for (std::size_t c : row.all) dst[c] += gv * std::exp(v[c] - all);
        for (std::size_t c : row.pos) dst[c] -= gv * std::exp(v[c] - pos);
      }
  });
}

std::size_t triplet_count(const PairMask& positives, const PairMask& negatives) {
  std::size_t total = 0;
  for (std::size_t r = 0; r < positives.rows(); ++r) total += positives.row_count(r) * negatives.row_count(r);
  return total;
}

Var triplet_hinge(Var scores, const PairMask& positives, const PairMask& negatives, double margin) {
  Tape& tape = *scores.tape();
  const Tensor& s = scores.value();
  require_masks(s, positives, negatives, "triplet_hinge");
  const std::size_t G = s.dim(0), n = s.dim(1), m = s.dim(2);
  auto pos = std::make_shared<std::vector<std::vector<std::size_t>>>(n);
  auto neg = std::make_shared<std::vector<std::vector<std::size_t>>>(n);
  for (std::size_t r = 0; r < n; ++r) {
    (*pos)[r] = row_columns(positives, r);
    (*neg)[r] = row_columns(negatives, r);
  }
  double total = 0.0;
  for (std::size_t g = 0; g < G; ++g)
    for (std::size_t r = 0; r < n; ++r) {
      const double* v = s.ptr() + (g * n + r) * m;
      for (std::size_t p : (*pos)[r])
        for (std::size_t q : (*neg)[r]) total += std::max(0.0, margin + v[q] - v[p]);
    }
  const std::size_t sid = scores.id();
  return tape.record("triplet_hinge", Tensor::scalar(total), {sid},
                     [&tape, sid, pos, neg, G, n, m, margin](const Tensor& g, std::span<Tensor* const> gin) {
    const Tensor& s = tape.value(sid);
    Tensor& gsc = *gin[0];
    const double gv = g[0];
    for (std::size_t grp = 0; grp < G; ++grp)
      for (std::size_t r = 0; r < n; ++r) {
        const double* v = s.ptr() + (grp * n + r) * m;
        double* dst = gsc.ptr() + (grp * n + r) * m;
        for (std::size_t p : (*pos)[r])
          for (std::size_t q : (*neg)[r])
            if (margin + v[q] - v[p] > 0.0) {
              dst[q] += gv;
              dst[p] -= gv;
            }
      }
  });
}

}  // namespace autocl
