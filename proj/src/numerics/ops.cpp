#include "drpn/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "drpn/errors.hpp"

namespace drpn::num {

namespace {

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                   b.shape_string());
}

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

Tensor checked(Tensor t, const char* op) {
  if (!t.all_finite()) throw NumericError(std::string(op) + ": non-finite output");
  return t;
}

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw ShapeError("op mixes Vars from different tapes");
  }
  return a.tape();
}

// C += A·B
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c.data() + i * m;
    const double* arow = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// C += A·Bᵀ
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data() + i * k;
    double* crow = c.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = b.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

// C += Aᵀ·B
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t n = a.rows(), ka = a.cols(), m = b.cols();
  for (std::size_t p = 0; p < n; ++p) {
    const double* arow = a.data() + p * ka;
    const double* brow = b.data() + p * m;
    for (std::size_t i = 0; i < ka; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}


bool mask_admits(const Mask& mask, std::size_t rows, std::size_t cols, std::size_t r,
                 std::size_t c) {
  if (mask.empty()) return true;
  if (mask.size() == cols) return mask[c] != 0;
  (void)rows;
  return mask[r * cols + c] != 0;
}

void check_mask(const char* op, const Mask& mask, std::size_t rows, std::size_t cols) {
  if (!mask.empty() && mask.size() != cols && mask.size() != rows * cols) {
    shape_fail(op, "mask of length " + std::to_string(mask.size()) + " for " +
                       std::to_string(rows) + "x" + std::to_string(cols) + " logits");
  }
}

void check_offsets(const char* op, std::span<const std::size_t> offsets, std::size_t n) {
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != n ||
      !std::is_sorted(offsets.begin(), offsets.end())) {
    shape_fail(op, "segment offsets must rise from 0 to " + std::to_string(n));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.cols() != y.rows()) shape_fail("matmul", x, y);
  Tensor out(x.rows(), y.cols());
  gemm_nn(x, y, out);
  const auto ia = a.id(), ib = b.id();
  return t.record(checked(std::move(out), "matmul"), {a, b}, [ia, ib](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(self);
    if (tp.needs_grad(ia)) gemm_nt(g, tp.value(ib), tp.grad(ia));
    if (tp.needs_grad(ib)) gemm_tn(tp.value(ia), g, tp.grad(ib));
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.cols() != y.cols()) shape_fail("matmul_nt", x, y);
  Tensor out(x.rows(), y.rows());
  gemm_nt(x, y, out);
  const auto ia = a.id(), ib = b.id();
  return t.record(checked(std::move(out), "matmul_nt"), {a, b},
                  [ia, ib](Tape& tp, std::uint32_t self) {
                    const Tensor& g = tp.grad(self);
                    if (tp.needs_grad(ia)) gemm_nn(g, tp.value(ib), tp.grad(ia));
                    if (tp.needs_grad(ib)) gemm_tn(g, tp.value(ia), tp.grad(ib));
                  });
}

Var transpose(Var a) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  Tensor out(x.cols(), x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(c, r) = x(r, c);
  const auto ia = a.id();
  return t.record(std::move(out), {a}, [ia](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t r = 0; r < ga.rows(); ++r)
      for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g(c, r);
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (!x.same_shape(y)) shape_fail("add", x, y);
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  const auto ia = a.id(), ib = b.id();
  return t.record(checked(std::move(out), "add"), {a, b}, [ia, ib](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(self);
    for (auto id : {ia, ib}) {
      if (!tp.needs_grad(id)) continue;
      Tensor& gi = tp.grad(id);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (!x.same_shape(y)) shape_fail("sub", x, y);
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  const auto ia = a.id(), ib = b.id();
  return t.record(checked(std::move(out), "sub"), {a, b}, [ia, ib](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(self);
    if (tp.needs_grad(ia)) {
      Tensor& ga = tp.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.needs_grad(ib)) {
      Tensor& gb = tp.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var add_row(Var a, Var row) {
  Tape& t = same_tape(a, row);
  const Tensor& x = a.value();
  const Tensor& r = row.value();
  if (r.rows() != 1 || r.cols() != x.cols()) shape_fail("add_row", x, r);
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t c = 0; c < x.cols(); ++c) out(i, c) = x(i, c) + r(0, c);
  const auto ia = a.id(), ib = row.id();
  return t.record(checked(std::move(out), "add_row"), {a, row},
                  [ia, ib](Tape& tp, std::uint32_t self) {
                    const Tensor& g = tp.grad(self);
                    if (tp.needs_grad(ia)) {
                      Tensor& ga = tp.grad(ia);
                      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                    }
                    if (tp.needs_grad(ib)) {
                      Tensor& gb = tp.grad(ib);
                      for (std::size_t i = 0; i < g.rows(); ++i)
                        for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(i, c);
                    }
                  });
}

Var mul_row(Var a, Var row) {
  Tape& t = same_tape(a, row);
  const Tensor& x = a.value();
  const Tensor& r = row.value();
  if (r.rows() != 1 || r.cols() != x.cols()) shape_fail("mul_row", x, r);
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t c = 0; c < x.cols(); ++c) out(i, c) = x(i, c) * r(0, c);
  const auto ia = a.id(), ib = row.id();
  return t.record(checked(std::move(out), "mul_row"), {a, row},
                  [ia, ib](Tape& tp, std::uint32_t self) {
                    const Tensor& g = tp.grad(self);
                    const Tensor& xv = tp.value(ia);
                    const Tensor& rv = tp.value(ib);
                    if (tp.needs_grad(ia)) {
                      Tensor& ga = tp.grad(ia);
                      for (std::size_t i = 0; i < g.rows(); ++i)
                        for (std::size_t c = 0; c < g.cols(); ++c) ga(i, c) += g(i, c) * rv(0, c);
                    }
                    if (tp.needs_grad(ib)) {
                      Tensor& gb = tp.grad(ib);
                      for (std::size_t i = 0; i < g.rows(); ++i)
                        for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(i, c) * xv(i, c);
                    }
                  });
}

Var scalar_mul(Var a, double s) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = s * x[i];
  const auto ia = a.id();
  return t.record(checked(std::move(out), "scalar_mul"), {a}, [ia, s](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

Var scale_by(Var a, Var s) {
  Tape& t = same_tape(a, s);
  const Tensor& x = a.value();
  const Tensor& sv = s.value();
  if (sv.rows() != 1 || sv.cols() != 1) shape_fail("scale_by", x, sv);
  const double k = sv[0];
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = k * x[i];
  const auto ia = a.id(), is = s.id();
  return t.record(checked(std::move(out), "scale_by"), {a, s}, [ia, is](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& xv = tp.value(ia);
    const double kv = tp.value(is)[0];
    if (tp.needs_grad(ia)) {
      Tensor& ga = tp.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += kv * g[i];
    }
    if (tp.needs_grad(is)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
      tp.grad(is)[0] += acc;
    }
  });
}

Var elementwise_mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (!x.same_shape(y)) shape_fail("elementwise_mul", x, y);
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  const auto ia = a.id(), ib = b.id();
  return t.record(checked(std::move(out), "elementwise_mul"), {a, b},
                  [ia, ib](Tape& tp, std::uint32_t self) {
                    const Tensor& g = tp.grad(self);
                    const Tensor& xv = tp.value(ia);
                    const Tensor& yv = tp.value(ib);
                    if (tp.needs_grad(ia)) {
                      Tensor& ga = tp.grad(ia);
                      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * yv[i];
                    }
                    if (tp.needs_grad(ib)) {
                      Tensor& gb = tp.grad(ib);
                      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * xv[i];
                    }
                  });
}

Var tanh(Var a) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
  const auto ia = a.id();
  return t.record(checked(std::move(out), "tanh"), {a}, [ia](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.value(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var sigmoid(Var a) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-x[i])) : std::exp(x[i]) / (1.0 + std::exp(x[i]));
  }
  const auto ia = a.id();
  return t.record(checked(std::move(out), "sigmoid"), {a}, [ia](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.value(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var relu(Var a) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  const auto ia = a.id();
  return t.record(std::move(out), {a}, [ia](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& xv = tp.value(ia);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > 0.0) ga[i] += g[i];
  });
}

Var exp(Var a) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::exp(x[i]);
  const auto ia = a.id();
  return t.record(checked(std::move(out), "exp"), {a}, [ia](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.value(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
  });
}

Var softmax_rows(Var a, const Mask& mask) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  const std::size_t n = x.rows(), m = x.cols();
  check_mask("softmax_rows", mask, n, m);
  Tensor out(n, m);
  for (std::size_t r = 0; r < n; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < m; ++c)
      if (mask_admits(mask, n, m, r, c)) mx = std::max(mx, x(r, c));
    if (mx == -std::numeric_limits<double>::infinity()) continue;
    double z = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      if (!mask_admits(mask, n, m, r, c)) continue;
      out(r, c) = std::exp(x(r, c) - mx);
      z += out(r, c);
    }
    for (std::size_t c = 0; c < m; ++c) out(r, c) /= z;
  }
  const auto ia = a.id();
  return t.record(checked(std::move(out), "softmax_rows"), {a}, [ia](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.value(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += y(r, c) * g(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

Var layer_norm(Var a, double eps) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  const std::size_t n = x.rows(), m = x.cols();
  Tensor out(n, m);
  auto inv_std = std::make_shared<std::vector<double>>(n);
  for (std::size_t r = 0; r < n; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < m; ++c) mean += x(r, c);
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t c = 0; c < m; ++c) var += (x(r, c) - mean) * (x(r, c) - mean);
    var /= static_cast<double>(m);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (std::size_t c = 0; c < m; ++c) out(r, c) = (x(r, c) - mean) * inv;
  }
  const auto ia = a.id();
  return t.record(checked(std::move(out), "layer_norm"), {a},
                  [ia, inv_std](Tape& tp, std::uint32_t self) {
                    const Tensor& g = tp.grad(self);
                    const Tensor& y = tp.value(self);
                    Tensor& ga = tp.grad(ia);
                    const auto m = static_cast<double>(y.cols());
                    for (std::size_t r = 0; r < y.rows(); ++r) {
                      double gm = 0.0, gy = 0.0;
                      for (std::size_t c = 0; c < y.cols(); ++c) {
                        gm += g(r, c);
                        gy += g(r, c) * y(r, c);
                      }
                      gm /= m;
                      gy /= m;
                      const double inv = (*inv_std)[r];
                      for (std::size_t c = 0; c < y.cols(); ++c)
                        ga(r, c) += inv * (g(r, c) - gm - y(r, c) * gy);
                    }
                  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) shape_fail("concat_cols", "no inputs");
  Tape& t = parts.front().tape();
  const std::size_t n = parts.front().rows();
  std::size_t total = 0;
  for (const Var& p : parts) {
    same_tape(parts.front(), p);
    if (p.rows() != n) shape_fail("concat_cols", parts.front().value(), p.value());
    total += p.cols();
  }
  Tensor out(n, total);
  std::size_t off = 0;
  std::vector<std::pair<std::uint32_t, std::size_t>> pieces;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < n; ++r)
      std::copy(v.row(r).begin(), v.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(off));
    pieces.emplace_back(p.id(), off);
    off += v.cols();
  }
  return t.record(std::move(out), parts, [pieces](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(self);
    for (const auto& [id, off] : pieces) {
      if (!tp.needs_grad(id)) continue;
      Tensor& gi = tp.grad(id);
      for (std::size_t r = 0; r < gi.rows(); ++r)
        for (std::size_t c = 0; c < gi.cols(); ++c) gi(r, c) += g(r, off + c);
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) shape_fail("concat_rows", "no inputs");
  Tape& t = parts.front().tape();
  const std::size_t m = parts.front().cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    same_tape(parts.front(), p);
    if (p.cols() != m) shape_fail("concat_rows", parts.front().value(), p.value());
    total += p.rows();
  }
  Tensor out(total, m);
  std::size_t off = 0;
  std::vector<std::pair<std::uint32_t, std::size_t>> pieces;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    std::copy(v.values().begin(), v.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(off * m));
    pieces.emplace_back(p.id(), off);
    off += v.rows();
  }
  return t.record(std::move(out), parts, [pieces](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(self);
    for (const auto& [id, off] : pieces) {
      if (!tp.needs_grad(id)) continue;
      Tensor& gi = tp.grad(id);
      const double* src = g.data() + off * g.cols();
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += src[i];
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  if (begin > end || end > x.cols()) {
    shape_fail("slice_cols", "columns [" + std::to_string(begin) + ", " + std::to_string(end) +
                                 ") of " + x.shape_string());
  }
  Tensor out(x.rows(), end - begin);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = x(r, c);
  const auto ia = a.id();
  return t.record(std::move(out), {a}, [ia, begin](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) ga(r, begin + c) += g(r, c);
  });
}

Var index_rows(Var a, std::span<const std::ptrdiff_t> idx) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  Tensor out(idx.size(), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0) continue;
    if (static_cast<std::size_t>(idx[i]) >= x.rows()) {
      shape_fail("index_rows", "row " + std::to_string(idx[i]) + " of " + x.shape_string());
    }
    auto src = x.row(static_cast<std::size_t>(idx[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  const auto ia = a.id();
  std::vector<std::ptrdiff_t> rows(idx.begin(), idx.end());
  return t.record(std::move(out), {a}, [ia, rows = std::move(rows)](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] < 0) continue;
      auto dst = ga.row(static_cast<std::size_t>(rows[i]));
      auto src = g.row(i);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  });
}

Var repeat_rows(Var row, std::size_t n) {
  Tape& t = row.tape();
  const Tensor& x = row.value();
  if (x.rows() != 1) shape_fail("repeat_rows", "input must be a single row, got " + x.shape_string());
  Tensor out(n, x.cols());
  for (std::size_t r = 0; r < n; ++r) std::copy(x.values().begin(), x.values().end(), out.row(r).begin());
  const auto ia = row.id();
  return t.record(std::move(out), {row}, [ia](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) ga(0, c) += g(r, c);
  });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  if (rows * cols != x.size()) {
    shape_fail("reshape", x.shape_string() + " into " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  Tensor out(rows, cols, std::vector<double>(x.values().begin(), x.values().end()));
  const auto ia = a.id();
  return t.record(std::move(out), {a}, [ia](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var sum_rows(Var a) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  Tensor out(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (double v : x.row(r)) s += v;
    out(r, 0) = s;
  }
  const auto ia = a.id();
  return t.record(checked(std::move(out), "sum_rows"), {a}, [ia](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t r = 0; r < ga.rows(); ++r)
      for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g(r, 0);
  });
}

Var sum_all(Var a) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  double s = 0.0;
  for (double v : x.values()) s += v;
  const auto ia = a.id();
  return t.record(checked(Tensor::scalar(s), "sum_all"), {a}, [ia](Tape& tp, std::uint32_t self) {
    const double g = tp.grad(self)[0];
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

AttentionLayout AttentionLayout::single(std::size_t q_rows, std::size_t k_rows, Mask key_mask) {
  AttentionLayout layout;
  layout.blocks.push_back({0, q_rows, 0, k_rows});
  layout.key_mask = std::move(key_mask);
  return layout;
}

Var attention(Var q, Var k, Var v, const AttentionLayout& layout, std::size_t heads) {
  Tape& t = same_tape(q, k);
  same_tape(q, v);
  const Tensor& Q = q.value();
  const Tensor& K = k.value();
  const Tensor& V = v.value();
  if (heads == 0) shape_fail("attention", "zero heads");
  if (Q.cols() != K.cols()) shape_fail("attention", Q, K);
  if (K.rows() != V.rows()) shape_fail("attention", K, V);
  if (Q.cols() % heads != 0 || V.cols() % heads != 0) {
    shape_fail("attention", "widths " + std::to_string(Q.cols()) + "/" + std::to_string(V.cols()) +
                                " not divisible by " + std::to_string(heads) + " heads");
  }
  if (!layout.key_mask.empty() && layout.key_mask.size() != K.rows()) {
    shape_fail("attention", "key mask length " + std::to_string(layout.key_mask.size()) + " for " +
                                std::to_string(K.rows()) + " keys");
  }
  if (!layout.pair_mask.empty() && layout.pair_mask.size() != Q.rows() * K.rows()) {
    shape_fail("attention", "pair mask does not match " + std::to_string(Q.rows()) + "x" +
                                std::to_string(K.rows()));
  }
  if (layout.exclude_self && Q.rows() != K.rows()) shape_fail("attention", "exclude_self needs aligned rows");

  std::vector<std::uint8_t> covered(Q.rows(), 0);
  std::vector<std::size_t> block_off;
  std::size_t per_head = 0;
  for (const auto& b : layout.blocks) {
    if (b.q_begin > b.q_end || b.q_end > Q.rows() || b.k_begin > b.k_end || b.k_end > K.rows()) {
      shape_fail("attention", "block out of range");
    }
    for (std::size_t i = b.q_begin; i < b.q_end; ++i) {
      if (covered[i]) shape_fail("attention", "query row " + std::to_string(i) + " in two blocks");
      covered[i] = 1;
    }
    block_off.push_back(per_head);
    per_head += (b.q_end - b.q_begin) * (b.k_end - b.k_begin);
  }

  const std::size_t dk = Q.cols() / heads;
  const std::size_t dv = V.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  auto weights = std::make_shared<std::vector<double>>(per_head * heads, 0.0);
  auto admits = [&layout, kr = K.rows()](std::size_t i, std::size_t j) {
    if (!layout.key_mask.empty() && !layout.key_mask[j]) return false;
    if (!layout.pair_mask.empty() && !layout.pair_mask[i * kr + j]) return false;
    if (layout.exclude_self && i == j) return false;
    return true;
  };

  Tensor out(Q.rows(), V.cols());
  std::vector<double> logits;
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t bi = 0; bi < layout.blocks.size(); ++bi) {
      const auto& b = layout.blocks[bi];
      const std::size_t width = b.k_end - b.k_begin;
      logits.assign(width, 0.0);
      for (std::size_t i = b.q_begin; i < b.q_end; ++i) {
        double* w = weights->data() + h * per_head + block_off[bi] + (i - b.q_begin) * width;
        const double* qi = Q.data() + i * Q.cols() + h * dk;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = b.k_begin; j < b.k_end; ++j) {
          if (!admits(i, j)) continue;
          const double* kj = K.data() + j * K.cols() + h * dk;
          double s = 0.0;
          for (std::size_t c = 0; c < dk; ++c) s += qi[c] * kj[c];
          logits[j - b.k_begin] = s * scale;
          mx = std::max(mx, logits[j - b.k_begin]);
        }
        if (mx == -std::numeric_limits<double>::infinity()) continue;
        double z = 0.0;
        for (std::size_t j = b.k_begin; j < b.k_end; ++j) {
          if (!admits(i, j)) continue;
          w[j - b.k_begin] = std::exp(logits[j - b.k_begin] - mx);
          z += w[j - b.k_begin];
        }
        double* oi = out.data() + i * out.cols() + h * dv;
        for (std::size_t j = b.k_begin; j < b.k_end; ++j) {
          double& wij = w[j - b.k_begin];
          if (wij == 0.0) continue;
          wij /= z;
          const double* vj = V.data() + j * V.cols() + h * dv;
          for (std::size_t c = 0; c < dv; ++c) oi[c] += wij * vj[c];
        }
      }
    }
  }

  const auto iq = q.id(), ik = k.id(), iv = v.id();
  auto blocks = std::make_shared<std::vector<AttentionBlock>>(layout.blocks);
  return t.record(
      checked(std::move(out), "attention"), {q, k, v},
      [iq, ik, iv, blocks, block_off, per_head, heads, dk, dv, scale, weights](Tape& tp,
                                                                             std::uint32_t self) {
        const Tensor& G = tp.grad(self);
        const Tensor& Q = tp.value(iq);
        const Tensor& K = tp.value(ik);
        const Tensor& V = tp.value(iv);
        Tensor* dQ = tp.needs_grad(iq) ? &tp.grad(iq) : nullptr;
        Tensor* dK = tp.needs_grad(ik) ? &tp.grad(ik) : nullptr;
        Tensor* dV = tp.needs_grad(iv) ? &tp.grad(iv) : nullptr;
        std::vector<double> dw;
        for (std::size_t h = 0; h < heads; ++h) {
          for (std::size_t bi = 0; bi < blocks->size(); ++bi) {
            const auto& b = (*blocks)[bi];
            const std::size_t width = b.k_end - b.k_begin;
            dw.assign(width, 0.0);
            for (std::size_t i = b.q_begin; i < b.q_end; ++i) {
              const double* w = weights->data() + h * per_head + block_off[bi] + (i - b.q_begin) * width;
              const double* gi = G.data() + i * G.cols() + h * dv;
              double acc = 0.0;
              for (std::size_t j = 0; j < width; ++j) {
                if (w[j] == 0.0) {
                  dw[j] = 0.0;
                  continue;
                }
                const double* vj = V.data() + (b.k_begin + j) * V.cols() + h * dv;
                double s = 0.0;
                for (std::size_t c = 0; c < dv; ++c) s += gi[c] * vj[c];
                dw[j] = s;
                acc += w[j] * s;
              }
              for (std::size_t j = 0; j < width; ++j) {
                if (w[j] == 0.0) continue;
                const std::size_t kj = b.k_begin + j;
                if (dV != nullptr) {
                  double* dvj = dV->data() + kj * V.cols() + h * dv;
                  for (std::size_t c = 0; c < dv; ++c) dvj[c] += w[j] * gi[c];
                }
                const double ds = w[j] * (dw[j] - acc) * scale;
                if (dQ != nullptr) {
                  double* dqi = dQ->data() + i * Q.cols() + h * dk;
                  const double* kr = K.data() + kj * K.cols() + h * dk;
                  for (std::size_t c = 0; c < dk; ++c) dqi[c] += ds * kr[c];
                }
                if (dK != nullptr) {
                  double* dkj = dK->data() + kj * K.cols() + h * dk;
                  const double* qr = Q.data() + i * Q.cols() + h * dk;
                  for (std::size_t c = 0; c < dk; ++c) dkj[c] += ds * qr[c];
                }
              }
            }
          }
        }
      });
}

Var segment_softmax(Var logits, std::span<const std::size_t> offsets, const Mask& mask) {
  Tape& t = logits.tape();
  const Tensor& x = logits.value();
  if (x.cols() != 1) shape_fail("segment_softmax", "logits must be a column, got " + x.shape_string());
  check_offsets("segment_softmax", offsets, x.rows());
  if (!mask.empty() && mask.size() != x.rows()) {
    shape_fail("segment_softmax", "mask length " + std::to_string(mask.size()) + " for " +
                                      std::to_string(x.rows()) + " entries");
  }
  Tensor out(x.rows(), 1);
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i)
      if (mask.empty() || mask[i]) mx = std::max(mx, x[i]);
    if (mx == -std::numeric_limits<double>::infinity()) continue;
    double z = 0.0;
    for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) {
      if (!mask.empty() && !mask[i]) continue;
      out[i] = std::exp(x[i] - mx);
      z += out[i];
    }
    for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) out[i] /= z;
  }
  const auto ia = logits.id();
  std::vector<std::size_t> offs(offsets.begin(), offsets.end());
  return t.record(checked(std::move(out), "segment_softmax"), {logits},
                  [ia, offs = std::move(offs)](Tape& tp, std::uint32_t self) {
                    const Tensor& g = tp.grad(self);
                    const Tensor& y = tp.value(self);
                    Tensor& ga = tp.grad(ia);
                    for (std::size_t s = 0; s + 1 < offs.size(); ++s) {
                      double dot = 0.0;
                      for (std::size_t i = offs[s]; i < offs[s + 1]; ++i) dot += y[i] * g[i];
                      for (std::size_t i = offs[s]; i < offs[s + 1]; ++i) ga[i] += y[i] * (g[i] - dot);
                    }
                  });
}

Var segment_weighted_sum(Var weights, Var x, std::span<const std::size_t> offsets) {
  Tape& t = same_tape(weights, x);
  const Tensor& w = weights.value();
  const Tensor& X = x.value();
  if (w.cols() != 1 || w.rows() != X.rows()) shape_fail("segment_weighted_sum", w, X);
  check_offsets("segment_weighted_sum", offsets, X.rows());
  const std::size_t segments = offsets.size() - 1;
  Tensor out(segments, X.cols());
  for (std::size_t s = 0; s < segments; ++s) {
    double* o = out.data() + s * X.cols();
    for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) {
      if (w[i] == 0.0) continue;
      const double* xi = X.data() + i * X.cols();
      for (std::size_t c = 0; c < X.cols(); ++c) o[c] += w[i] * xi[c];
    }
  }
  const auto iw = weights.id(), ix = x.id();
  std::vector<std::size_t> offs(offsets.begin(), offsets.end());
  return t.record(checked(std::move(out), "segment_weighted_sum"), {weights, x},
                  [iw, ix, offs = std::move(offs)](Tape& tp, std::uint32_t self) {
                    const Tensor& g = tp.grad(self);
                    const Tensor& wv = tp.value(iw);
                    const Tensor& xv = tp.value(ix);
                    Tensor* dw = tp.needs_grad(iw) ? &tp.grad(iw) : nullptr;
                    Tensor* dx = tp.needs_grad(ix) ? &tp.grad(ix) : nullptr;
                    for (std::size_t s = 0; s + 1 < offs.size(); ++s) {
                      const double* gs = g.data() + s * g.cols();
                      for (std::size_t i = offs[s]; i < offs[s + 1]; ++i) {
                        if (dw != nullptr) {
                          const double* xi = xv.data() + i * xv.cols();
                          double acc = 0.0;
                          for (std::size_t c = 0; c < xv.cols(); ++c) acc += gs[c] * xi[c];
                          (*dw)[i] += acc;
                        }
                        if (dx != nullptr && wv[i] != 0.0) {
                          double* dxi = dx->data() + i * xv.cols();
                          for (std::size_t c = 0; c < xv.cols(); ++c) dxi[c] += wv[i] * gs[c];
                        }
                      }
                    }
                  });
}

Var softmax_xent_first(Var logits) {
  Tape& t = logits.tape();
  const Tensor& x = logits.value();
  if (x.cols() == 0) shape_fail("softmax_xent_first", "empty rows");
  auto probs = std::make_shared<Tensor>(x.rows(), x.cols());
  double loss = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mx = x(r, 0);
    for (double v : x.row(r)) mx = std::max(mx, v);
    double z = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) z += std::exp(x(r, c) - mx);
    const double lse = mx + std::log(z);
    loss += lse - x(r, 0);
    for (std::size_t c = 0; c < x.cols(); ++c) (*probs)(r, c) = std::exp(x(r, c) - lse);
  }
  const auto ia = logits.id();
  return t.record(checked(Tensor::scalar(loss), "softmax_xent_first"), {logits},
                  [ia, probs](Tape& tp, std::uint32_t self) {
                    const double g = tp.grad(self)[0];
                    Tensor& ga = tp.grad(ia);
                    for (std::size_t r = 0; r < ga.rows(); ++r)
                      for (std::size_t c = 0; c < ga.cols(); ++c)
                        ga(r, c) += g * ((*probs)(r, c) - (c == 0 ? 1.0 : 0.0));
                  });
}

}  // namespace drpn::num
