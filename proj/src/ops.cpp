#include "higarment/ops.hpp"

#include <algorithm>
#include <cmath>

#include "higarment/errors.hpp"

namespace hg {
namespace {

void add_into(Tensor& dst, const Tensor& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
}

void require_same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw GraphError("operands live on different tapes");
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <class F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  auto in = a.data();
  auto o = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(in[i]);
  return out;
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  require_same_tape(a, b);
  Tape& t = a.tape();
  Tensor out = hg::matmul(a.value(), b.value());
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) add_into(t.grad_buffer(a), hg::matmul_nt(g, t.value(b)));
    if (t.requires_grad(b)) add_into(t.grad_buffer(b), hg::matmul_tn(t.value(a), g));
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require_same_tape(a, b);
  Tape& t = a.tape();
  Tensor out = hg::matmul_nt(a.value(), b.value());
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) add_into(t.grad_buffer(a), hg::matmul(g, t.value(b)));
    if (t.requires_grad(b)) add_into(t.grad_buffer(b), hg::matmul_tn(g, t.value(a)));
  });
}

Var add(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  add_into(out, b.value());
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) add_into(t.grad_buffer(a), g);
    if (t.requires_grad(b)) add_into(t.grad_buffer(b), g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) add_into(t.grad_buffer(a), g);
    if (t.requires_grad(b)) {
      auto d = t.grad_buffer(b).data();
      auto gs = g.data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= gs[i];
    }
  });
}

Var hadamard(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_same_shape(a.value(), b.value(), "hadamard");
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    auto gs = g.data();
    if (t.requires_grad(a)) {
      auto d = t.grad_buffer(a).data();
      auto bv = t.value(b).data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += gs[i] * bv[i];
    }
    if (t.requires_grad(b)) {
      auto d = t.grad_buffer(b).data();
      auto av = t.value(a).data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += gs[i] * av[i];
    }
  });
}

Var add_row(const Var& a, const Var& row) {
  require_same_tape(a, row);
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw DimensionError("add_row: row " + shape_to_string(rv.shape()) + " does not fit " +
                         shape_to_string(av.shape()));
  }
  Tensor out = av;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += rv[j];
  }
  return a.tape().record(std::move(out), {a, row}, [a, row](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) add_into(t.grad_buffer(a), g);
    if (t.requires_grad(row)) {
      auto d = t.grad_buffer(row).data();
      for (std::size_t i = 0; i < g.rows(); ++i) {
        auto gr = g.row(i);
        for (std::size_t j = 0; j < gr.size(); ++j) d[j] += gr[j];
      }
    }
  });
}

Var mul_row(const Var& a, const Var& row) {
  require_same_tape(a, row);
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw DimensionError("mul_row: row " + shape_to_string(rv.shape()) + " does not fit " +
                         shape_to_string(av.shape()));
  }
  Tensor out = av;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] *= rv[j];
  }
  return a.tape().record(std::move(out), {a, row}, [a, row](Tape& t, const Tensor& g) {
    const Tensor& rv = t.value(row);
    if (t.requires_grad(a)) {
      Tensor& d = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        auto gr = g.row(i);
        auto dr = d.row(i);
        for (std::size_t j = 0; j < gr.size(); ++j) dr[j] += gr[j] * rv[j];
      }
    }
    if (t.requires_grad(row)) {
      const Tensor& av = t.value(a);
      auto d = t.grad_buffer(row).data();
      for (std::size_t i = 0; i < g.rows(); ++i) {
        auto gr = g.row(i);
        auto ar = av.row(i);
        for (std::size_t j = 0; j < gr.size(); ++j) d[j] += gr[j] * ar[j];
      }
    }
  });
}

Var scale(const Var& a, double factor) {
  Tensor out = map(a.value(), [factor](double x) { return x * factor; });
  return a.tape().record(std::move(out), {a}, [a, factor](Tape& t, const Tensor& g) {
    auto d = t.grad_buffer(a).data();
    auto gs = g.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += gs[i] * factor;
  });
}

Var scale(const Var& a, const Var& s) {
  require_same_tape(a, s);
  if (s.value().size() != 1) throw DimensionError("scale: factor must be 1x1");
  const double f = s.value()[0];
  Tensor out = map(a.value(), [f](double x) { return x * f; });
  return a.tape().record(std::move(out), {a, s}, [a, s](Tape& t, const Tensor& g) {
    const double f = t.value(s)[0];
    auto gs = g.data();
    if (t.requires_grad(a)) {
      auto d = t.grad_buffer(a).data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += gs[i] * f;
    }
    if (t.requires_grad(s)) {
      auto av = t.value(a).data();
      double acc = 0.0;
      for (std::size_t i = 0; i < gs.size(); ++i) acc += gs[i] * av[i];
      t.grad_buffer(s)[0] += acc;
    }
  });
}

Var add_scalar(const Var& a, double c) {
  Tensor out = map(a.value(), [c](double x) { return x + c; });
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    add_into(t.grad_buffer(a), g);
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  Tape& t = parts.front().tape();
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    if (&p.tape() != &t) throw GraphError("concat_rows: parts live on different tapes");
    if (p.cols() != cols) {
      throw DimensionError("concat_rows: width " + std::to_string(p.cols()) + " vs " +
                           std::to_string(cols));
    }
    rows += p.rows();
  }
  Tensor out = Tensor::matrix(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    auto src = p.value().data();
    std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(offset));
    offset += src.size();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record(std::move(out), parts, [inputs](Tape& t, const Tensor& g) {
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t n = t.value(p).size();
      if (t.requires_grad(p)) {
        auto d = t.grad_buffer(p).data();
        for (std::size_t i = 0; i < n; ++i) d[i] += g[offset + i];
      }
      offset += n;
    }
  });
}

Var concat_rows(std::initializer_list<Var> parts) {
  return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t count) {
  const Tensor& av = a.value();
  if (begin + count > av.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of " + std::to_string(av.rows()));
  }
  const std::size_t cols = av.cols();
  Tensor out = Tensor::matrix(count, cols);
  std::copy_n(av.data().begin() + static_cast<std::ptrdiff_t>(begin * cols), count * cols,
              out.data().begin());
  return a.tape().record(std::move(out), {a}, [a, begin, count, cols](Tape& t, const Tensor& g) {
    auto d = t.grad_buffer(a).data();
    for (std::size_t i = 0; i < count * cols; ++i) d[begin * cols + i] += g[i];
  });
}

Var gather(const Var& a, std::size_t rows, std::size_t cols, GatherIndex index) {
  if (!index || index->size() != rows * cols) throw DimensionError("gather: index size mismatch");
  const auto src = a.value().data();
  Tensor out = Tensor::matrix(rows, cols);
  auto o = out.data();
  for (std::size_t k = 0; k < o.size(); ++k) {
    const std::int64_t j = (*index)[k];
    if (j >= 0) {
      if (static_cast<std::size_t>(j) >= src.size()) throw DimensionError("gather: index out of range");
      o[k] = src[static_cast<std::size_t>(j)];
    }
  }
  return a.tape().record(std::move(out), {a}, [a, index](Tape& t, const Tensor& g) {
    auto d = t.grad_buffer(a).data();
    auto gs = g.data();
    for (std::size_t k = 0; k < gs.size(); ++k) {
      const std::int64_t j = (*index)[k];
      if (j >= 0) d[static_cast<std::size_t>(j)] += gs[k];
    }
  });
}

Var gather_rows(const Var& table, std::span<const std::size_t> ids) {
  const std::size_t rows = table.rows();
  const std::size_t cols = table.cols();
  auto index = std::make_shared<std::vector<std::int64_t>>(ids.size() * cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= rows) {
      throw DimensionError("gather_rows: id " + std::to_string(ids[i]) + " >= table rows " +
                           std::to_string(rows));
    }
    for (std::size_t j = 0; j < cols; ++j)
      (*index)[i * cols + j] = static_cast<std::int64_t>(ids[i] * cols + j);
  }
  return gather(table, ids.size(), cols, std::move(index));
}

Var softmax_rows(const Var& a) {
  Tensor y = hg::softmax_rows(a.value());
  Tensor yc = y;
  return a.tape().record(std::move(y), {a}, [a, yc = std::move(yc)](Tape& t, const Tensor& g) {
    Tensor& d = t.grad_buffer(a);
    for (std::size_t i = 0; i < yc.rows(); ++i) {
      auto yr = yc.row(i);
      auto gr = g.row(i);
      auto dr = d.row(i);
      double dot = 0.0;
      for (std::size_t j = 0; j < yr.size(); ++j) dot += gr[j] * yr[j];
      for (std::size_t j = 0; j < yr.size(); ++j) dr[j] += yr[j] * (gr[j] - dot);
    }
  });
}

Var sigmoid(const Var& a) {
  Tensor y = map(a.value(), sigmoid_scalar);
  Tensor yc = y;
  return a.tape().record(std::move(y), {a}, [a, yc = std::move(yc)](Tape& t, const Tensor& g) {
    auto d = t.grad_buffer(a).data();
    auto ys = yc.data();
    auto gs = g.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += gs[i] * ys[i] * (1.0 - ys[i]);
  });
}

Var silu(const Var& a) {
  Tensor y = map(a.value(), [](double x) { return x * sigmoid_scalar(x); });
  return a.tape().record(std::move(y), {a}, [a](Tape& t, const Tensor& g) {
    auto d = t.grad_buffer(a).data();
    auto xs = t.value(a).data();
    auto gs = g.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double s = sigmoid_scalar(xs[i]);
      d[i] += gs[i] * s * (1.0 + xs[i] * (1.0 - s));
    }
  });
}

Var layer_norm_rows(const Var& a, double eps) {
  const Tensor& x = a.value();
  const std::size_t m = x.rows(), n = x.cols();
  Tensor y = Tensor::matrix(m, n);
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto xr = x.row(i);
    double mu = 0.0;
    for (double v : xr) mu += v;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double v : xr) var += (v - mu) * (v - mu);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    auto yr = y.row(i);
    for (std::size_t j = 0; j < n; ++j) yr[j] = (xr[j] - mu) * inv_std[i];
  }
  Tensor yc = y;
  return a.tape().record(
      std::move(y), {a},
      [a, yc = std::move(yc), inv_std = std::move(inv_std)](Tape& t, const Tensor& g) {
        Tensor& d = t.grad_buffer(a);
        const std::size_t n = yc.cols();
        for (std::size_t i = 0; i < yc.rows(); ++i) {
          auto yr = yc.row(i);
          auto gr = g.row(i);
          auto dr = d.row(i);
          double mg = 0.0, mgy = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            mg += gr[j];
            mgy += gr[j] * yr[j];
          }
          mg /= static_cast<double>(n);
          mgy /= static_cast<double>(n);
          for (std::size_t j = 0; j < n; ++j) dr[j] += inv_std[i] * (gr[j] - mg - yr[j] * mgy);
        }
      });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape().record(Tensor::scalar(s), {a}, [a](Tape& t, const Tensor& g) {
    const double gv = g[0];
    for (double& d : t.grad_buffer(a).data()) d += gv;
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var mean_rows(const Var& a) {
  const Tensor& x = a.value();
  const std::size_t m = x.rows(), n = x.cols();
  if (m == 0) throw DimensionError("mean_rows of a zero-row tensor");
  Tensor out = Tensor::matrix(1, n);
  for (std::size_t i = 0; i < m; ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < n; ++j) out[j] += r[j];
  }
  for (double& v : out.data()) v /= static_cast<double>(m);
  return a.tape().record(std::move(out), {a}, [a, m](Tape& t, const Tensor& g) {
    Tensor& d = t.grad_buffer(a);
    for (std::size_t i = 0; i < m; ++i) {
      auto dr = d.row(i);
      for (std::size_t j = 0; j < dr.size(); ++j) dr[j] += g[j] / static_cast<double>(m);
    }
  });
}

Var cosine_similarity(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_same_shape(a.value(), b.value(), "cosine_similarity");
  auto av = a.value().data();
  auto bv = b.value().data();
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    ab += av[i] * bv[i];
    aa += av[i] * av[i];
    bb += bv[i] * bv[i];
  }
  const double na = std::sqrt(aa), nb = std::sqrt(bb);
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw NumericError("cosine_similarity: zero-norm input vector");
  }
  const double c = std::clamp(ab / (na * nb), -1.0, 1.0);
  return a.tape().record(Tensor::scalar(c), {a, b}, [a, b, na, nb, c](Tape& t, const Tensor& g) {
    const double gv = g[0];
    auto av = t.value(a).data();
    auto bv = t.value(b).data();
    if (t.requires_grad(a)) {
      auto d = t.grad_buffer(a).data();
      for (std::size_t i = 0; i < d.size(); ++i)
        d[i] += gv * (bv[i] / (na * nb) - c * av[i] / (na * na));
    }
    if (t.requires_grad(b)) {
      auto d = t.grad_buffer(b).data();
      for (std::size_t i = 0; i < d.size(); ++i)
        d[i] += gv * (av[i] / (na * nb) - c * bv[i] / (nb * nb));
    }
  });
}

Var mse(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_same_shape(a.value(), b.value(), "mse");
  auto av = a.value().data();
  auto bv = b.value().data();
  const double n = static_cast<double>(av.size());
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += (av[i] - bv[i]) * (av[i] - bv[i]);
  return a.tape().record(Tensor::scalar(s / n), {a, b}, [a, b, n](Tape& t, const Tensor& g) {
    const double k = 2.0 * g[0] / n;
    auto av = t.value(a).data();
    auto bv = t.value(b).data();
    if (t.requires_grad(a)) {
      auto d = t.grad_buffer(a).data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += k * (av[i] - bv[i]);
    }
    if (t.requires_grad(b)) {
      auto d = t.grad_buffer(b).data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= k * (av[i] - bv[i]);
    }
  });
}

Var depthwise_conv3x3(const Var& x, const Var& kernel, std::size_t h, std::size_t w) {
  require_same_tape(x, kernel);
  const Tensor& xv = x.value();
  const Tensor& kv = kernel.value();
  const std::size_t c = xv.cols();
  if (xv.rows() != h * w) {
    throw DimensionError("depthwise_conv3x3: " + std::to_string(xv.rows()) + " rows for a " +
                         std::to_string(h) + "x" + std::to_string(w) + " grid");
  }
  if (kv.rows() != 9 || kv.cols() != c) {
    throw DimensionError("depthwise_conv3x3: kernel must be [9x" + std::to_string(c) + "], got " +
                         shape_to_string(kv.shape()));
  }
  // Visits (output cell, tap, neighbour cell) in a fixed order.
  auto for_each_tap = [h, w](auto&& body) {
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const auto ny = static_cast<std::ptrdiff_t>(y) + dy;
            const auto nx = static_cast<std::ptrdiff_t>(xx) + dx;
            if (ny < 0 || nx < 0 || ny >= static_cast<std::ptrdiff_t>(h) ||
                nx >= static_cast<std::ptrdiff_t>(w))
              continue;
            const std::size_t tap = static_cast<std::size_t>((dy + 1) * 3 + (dx + 1));
            body(y * w + xx, tap, static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx));
          }
  };
  Tensor out = Tensor::matrix(h * w, c);
  for_each_tap([&](std::size_t p, std::size_t tap, std::size_t q) {
    auto o = out.row(p);
    auto k = kv.row(tap);
    auto in = xv.row(q);
    for (std::size_t j = 0; j < c; ++j) o[j] += k[j] * in[j];
  });
  return x.tape().record(std::move(out), {x, kernel},
                         [x, kernel, for_each_tap](Tape& t, const Tensor& g) {
                           const Tensor& xv = t.value(x);
                           const Tensor& kv = t.value(kernel);
                           const std::size_t c = xv.cols();
                           Tensor* dx = t.requires_grad(x) ? &t.grad_buffer(x) : nullptr;
                           Tensor* dk = t.requires_grad(kernel) ? &t.grad_buffer(kernel) : nullptr;
                           for_each_tap([&](std::size_t p, std::size_t tap, std::size_t q) {
                             auto gr = g.row(p);
                             if (dx) {
                               auto d = dx->row(q);
                               auto k = kv.row(tap);
                               for (std::size_t j = 0; j < c; ++j) d[j] += gr[j] * k[j];
                             }
                             if (dk) {
                               auto d = dk->row(tap);
                               auto in = xv.row(q);
                               for (std::size_t j = 0; j < c; ++j) d[j] += gr[j] * in[j];
                             }
                           });
                         });
}

Var detach(const Var& a) { return a.tape().constant(a.value()); }

}  // namespace hg
