#include "tt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace tt {
namespace {

Graph& graph_of(Var v) {
  if (!v.valid()) throw ShapeError("op applied to an invalid var");
  return *v.graph;
}

void check_same_graph(Var a, Var b) {
  if (a.graph != b.graph) throw ShapeError("op inputs belong to different graphs");
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}

Index last_dim(const Tensor& t) {
  if (t.rank() == 0) throw ShapeError("op needs a tensor with at least one axis");
  return t.shape().back();
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

Var constant(Graph& g, Tensor t) { return g.leaf(std::move(t)); }

Var add(Var a, Var b) {
  Graph& g = graph_of(a);
  check_same_graph(a, b);
  check_same_shape(a.value(), b.value(), "add");
  Tensor out(a.shape());
  out.array() = a.value().array() + b.value().array();
  const int32_t ia = a.id, ib = b.id;
  return g.make(std::move(out), [ia, ib](Graph& g, int32_t self) {
    const Tensor& d = g.grad_of(self);
    g.grad_of(ia).array() += d.array();
    g.grad_of(ib).array() += d.array();
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a);
  check_same_graph(a, b);
  check_same_shape(a.value(), b.value(), "sub");
  Tensor out(a.shape());
  out.array() = a.value().array() - b.value().array();
  const int32_t ia = a.id, ib = b.id;
  return g.make(std::move(out), [ia, ib](Graph& g, int32_t self) {
    const Tensor& d = g.grad_of(self);
    g.grad_of(ia).array() += d.array();
    g.grad_of(ib).array() -= d.array();
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a);
  check_same_graph(a, b);
  check_same_shape(a.value(), b.value(), "mul");
  Tensor out(a.shape());
  out.array() = a.value().array() * b.value().array();
  const int32_t ia = a.id, ib = b.id;
  return g.make(std::move(out), [ia, ib](Graph& g, int32_t self) {
    const Tensor& d = g.grad_of(self);
    g.grad_of(ia).array() += d.array() * g.value_of(ib).array();
    g.grad_of(ib).array() += d.array() * g.value_of(ia).array();
  });
}

Var scale(Var a, double c) {
  Graph& g = graph_of(a);
  Tensor out(a.shape());
  out.array() = a.value().array() * c;
  const int32_t ia = a.id;
  return g.make(std::move(out), [ia, c](Graph& g, int32_t self) {
    g.grad_of(ia).array() += g.grad_of(self).array() * c;
  });
}

Var sigmoid(Var x) {
  Graph& g = graph_of(x);
  Tensor out(x.shape());
  const ArrayX& in = x.value().array();
  for (Index i = 0; i < in.size(); ++i) {
    const double v = in[i];
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  const int32_t ix = x.id;
  return g.make(std::move(out), [ix](Graph& g, int32_t self) {
    const ArrayX& y = g.value_of(self).array();
    g.grad_of(ix).array() += g.grad_of(self).array() * y * (1.0 - y);
  });
}

Var gelu(Var x) {
  Graph& g = graph_of(x);
  Tensor out(x.shape());
  const ArrayX& in = x.value().array();
  for (Index i = 0; i < in.size(); ++i) {
    const double v = in[i];
    out[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  const int32_t ix = x.id;
  return g.make(std::move(out), [ix](Graph& g, int32_t self) {
    const ArrayX& in = g.value_of(ix).array();
    ArrayX& dx = g.grad_of(ix).array();
    const ArrayX& d = g.grad_of(self).array();
    for (Index i = 0; i < in.size(); ++i) {
      const double v = in[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      dx[i] += d[i] * (cdf + v * pdf);
    }
  });
}

Var reshape(Var x, std::vector<Index> shape) {
  Graph& g = graph_of(x);
  if (numel(shape) != x.size())
    throw ShapeError("reshape: " + shape_string(x.shape()) + " -> " + shape_string(shape) +
                     " changes element count");
  Tensor out(shape);
  out.array() = x.value().array();
  const int32_t ix = x.id;
  return g.make(std::move(out), [ix](Graph& g, int32_t self) {
    g.grad_of(ix).array() += g.grad_of(self).array();
  });
}

Var concat_last(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_last: no inputs");
  Graph& g = graph_of(parts[0]);
  const Tensor& first = parts[0].value();
  std::vector<Index> lead(first.shape().begin(), first.shape().end() - 1);
  Index total = 0;
  std::vector<Index> widths;
  for (Var p : parts) {
    check_same_graph(parts[0], p);
    const Tensor& t = p.value();
    std::vector<Index> plead(t.shape().begin(), t.shape().end() - 1);
    if (plead != lead)
      throw ShapeError("concat_last: leading dims differ: " + shape_string(first.shape()) +
                       " vs " + shape_string(t.shape()));
    widths.push_back(last_dim(t));
    total += widths.back();
  }
  std::vector<Index> out_shape = lead;
  out_shape.push_back(total);
  Tensor out(out_shape);
  const Index rows = out.size() / total;
  auto out_m = out.rows_by_last();
  Index off = 0;
  for (size_t i = 0; i < parts.size(); ++i) {
    out_m.middleCols(off, widths[i]) = parts[i].value().as_matrix(rows, widths[i]);
    off += widths[i];
  }
  std::vector<int32_t> ids;
  for (Var p : parts) ids.push_back(p.id);
  return g.make(std::move(out), [ids, widths, rows, total](Graph& g, int32_t self) {
    auto d = g.grad_of(self).as_matrix(rows, total);
    Index off = 0;
    for (size_t i = 0; i < ids.size(); ++i) {
      g.grad_of(ids[i]).as_matrix(rows, widths[i]) += d.middleCols(off, widths[i]);
      off += widths[i];
    }
  });
}

Var slice_last(Var x, Index start, Index len) {
  Graph& g = graph_of(x);
  const Index cols = last_dim(x.value());
  if (start < 0 || len < 1 || start + len > cols)
    throw ShapeError("slice_last: [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") out of " + std::to_string(cols) + " channels");
  std::vector<Index> out_shape(x.shape().begin(), x.shape().end() - 1);
  out_shape.push_back(len);
  Tensor out(out_shape);
  const Index rows = x.size() / cols;
  out.rows_by_last() = x.value().as_matrix(rows, cols).middleCols(start, len);
  const int32_t ix = x.id;
  return g.make(std::move(out), [ix, start, len, rows, cols](Graph& g, int32_t self) {
    g.grad_of(ix).as_matrix(rows, cols).middleCols(start, len) += g.grad_of(self).rows_by_last();
  });
}

Var slice_rows(Var x, Index start, Index len) {
  Graph& g = graph_of(x);
  if (x.value().rank() < 1) throw ShapeError("slice_rows: rank-0 input");
  const Index d0 = x.dim(0);
  if (start < 0 || len < 1 || start + len > d0)
    throw ShapeError("slice_rows: [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") out of " + std::to_string(d0) + " rows");
  std::vector<Index> out_shape = x.shape();
  out_shape[0] = len;
  const Index inner = x.size() / d0;
  Tensor out(out_shape);
  out.as_matrix(len, inner) = x.value().as_matrix(d0, inner).middleRows(start, len);
  const int32_t ix = x.id;
  return g.make(std::move(out), [ix, start, len, d0, inner](Graph& g, int32_t self) {
    g.grad_of(ix).as_matrix(d0, inner).middleRows(start, len) += g.grad_of(self).as_matrix(len, inner);
  });
}

Var sum(Var x) {
  Graph& g = graph_of(x);
  Tensor out = Tensor::scalar(x.value().array().sum());
  const int32_t ix = x.id;
  return g.make(std::move(out), [ix](Graph& g, int32_t self) {
    g.grad_of(ix).array() += g.grad_of(self)[0];
  });
}

Var mean(Var x) {
  const Index n = x.size();
  if (n == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a);
  check_same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_string(av.shape()) + " x " +
                     shape_string(bv.shape()));
  const Index m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  out.as_matrix(m, n).noalias() = av.as_matrix(m, k) * bv.as_matrix(k, n);
  const int32_t ia = a.id, ib = b.id;
  return g.make(std::move(out), [ia, ib, m, k, n](Graph& g, int32_t self) {
    auto d = g.grad_of(self).as_matrix(m, n);
    g.grad_of(ia).as_matrix(m, k).noalias() += d * g.value_of(ib).as_matrix(k, n).transpose();
    g.grad_of(ib).as_matrix(k, n).noalias() += g.value_of(ia).as_matrix(m, k).transpose() * d;
  });
}

namespace {

Var linear_impl(Var x, Var w, Var b, bool with_bias) {
  Graph& g = graph_of(x);
  check_same_graph(x, w);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (wv.rank() != 2 || xv.rank() < 1 || last_dim(xv) != wv.dim(0))
    throw ShapeError("linear: input " + shape_string(xv.shape()) + " does not match weight " +
                     shape_string(wv.shape()));
  const Index in = wv.dim(0), out_w = wv.dim(1);
  const Index rows = xv.size() / in;
  if (with_bias) {
    check_same_graph(x, b);
    if (b.value().size() != out_w)
      throw ShapeError("linear: bias " + shape_string(b.value().shape()) + " does not match weight " +
                       shape_string(wv.shape()));
  }
  std::vector<Index> out_shape(xv.shape().begin(), xv.shape().end() - 1);
  out_shape.push_back(out_w);
  Tensor out(out_shape);
  auto y = out.as_matrix(rows, out_w);
  y.noalias() = xv.as_matrix(rows, in) * wv.as_matrix(in, out_w);
  if (with_bias) y.rowwise() += ConstVecMap(b.value().data(), out_w).transpose();
  const int32_t ix = x.id, iw = w.id, ib = with_bias ? b.id : -1;
  return g.make(std::move(out), [ix, iw, ib, rows, in, out_w](Graph& g, int32_t self) {
    auto d = g.grad_of(self).as_matrix(rows, out_w);
    g.grad_of(ix).as_matrix(rows, in).noalias() += d * g.value_of(iw).as_matrix(in, out_w).transpose();
    g.grad_of(iw).as_matrix(in, out_w).noalias() += g.value_of(ix).as_matrix(rows, in).transpose() * d;
    if (ib >= 0) VecMap(g.grad_of(ib).data(), out_w) += d.colwise().sum().transpose();
  });
}

}  // namespace

Var linear(Var x, Var w) { return linear_impl(x, w, Var{}, false); }
Var linear(Var x, Var w, Var b) { return linear_impl(x, w, b, true); }

Var embedding(Var table, const std::vector<int>& ids) {
  Graph& g = graph_of(table);
  const Tensor& tv = table.value();
  if (tv.rank() != 2) throw ShapeError("embedding: table must be 2-D");
  const Index vocab = tv.dim(0), d = tv.dim(1);
  for (size_t i = 0; i < ids.size(); ++i)
    if (ids[i] < 0 || ids[i] >= vocab)
      throw DataError("unknown token id " + std::to_string(ids[i]) + " at position " +
                      std::to_string(i) + " (vocab size " + std::to_string(vocab) + ")");
  const Index n = static_cast<Index>(ids.size());
  Tensor out({n, d});
  auto o = out.as_matrix(n, d);
  auto t = tv.as_matrix(vocab, d);
  for (Index i = 0; i < n; ++i) o.row(i) = t.row(ids[static_cast<size_t>(i)]);
  const int32_t it = table.id;
  return g.make(std::move(out), [it, ids, vocab, d, n](Graph& g, int32_t self) {
    auto dt = g.grad_of(it).as_matrix(vocab, d);
    auto dy = g.grad_of(self).as_matrix(n, d);
    for (Index i = 0; i < n; ++i) dt.row(ids[static_cast<size_t>(i)]) += dy.row(i);
  });
}

Var gather_rows(Var x, std::vector<Index> rows) {
  Graph& g = graph_of(x);
  const Index cols = last_dim(x.value());
  const Index src_rows = x.size() / cols;
  for (Index r : rows)
    if (r < 0 || r >= src_rows)
      throw ShapeError("gather_rows: row " + std::to_string(r) + " out of " +
                       std::to_string(src_rows));
  const Index m = static_cast<Index>(rows.size());
  Tensor out({m, cols});
  auto o = out.as_matrix(m, cols);
  auto src = x.value().as_matrix(src_rows, cols);
  for (Index i = 0; i < m; ++i) o.row(i) = src.row(rows[static_cast<size_t>(i)]);
  const int32_t ix = x.id;
  return g.make(std::move(out), [ix, rows = std::move(rows), src_rows, cols, m](Graph& g, int32_t self) {
    auto dx = g.grad_of(ix).as_matrix(src_rows, cols);
    auto dy = g.grad_of(self).as_matrix(m, cols);
    for (Index i = 0; i < m; ++i) dx.row(rows[static_cast<size_t>(i)]) += dy.row(i);
  });
}

Var outer_add(Var a, Var b) {
  Graph& g = graph_of(a);
  check_same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(1))
    throw ShapeError("outer_add: need [n,d] and [m,d], got " + shape_string(av.shape()) + " and " +
                     shape_string(bv.shape()));
  const Index n = av.dim(0), m = bv.dim(0), d = av.dim(1);
  Tensor out({n, m, d});
  auto o = out.as_matrix(n * m, d);
  auto am = av.as_matrix(n, d);
  auto bm = bv.as_matrix(m, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) o.row(i * m + j) = am.row(i) + bm.row(j);
  const int32_t ia = a.id, ib = b.id;
  return g.make(std::move(out), [ia, ib, n, m, d](Graph& g, int32_t self) {
    auto dy = g.grad_of(self).as_matrix(n * m, d);
    auto da = g.grad_of(ia).as_matrix(n, d);
    auto db = g.grad_of(ib).as_matrix(m, d);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < m; ++j) {
        da.row(i) += dy.row(i * m + j);
        db.row(j) += dy.row(i * m + j);
      }
  });
}

namespace {

using StridedMap = Eigen::Map<const MatrixRM, 0, Eigen::OuterStride<>>;
using StridedMapMut = Eigen::Map<MatrixRM, 0, Eigen::OuterStride<>>;

// w2 stored as [d, k, d]; slice k is the d×d matrix w2[:, k, :].
StridedMap w2_slice(const Tensor& w2, Index k, Index d, Index nk) {
  return StridedMap(w2.data() + k * d, d, d, Eigen::OuterStride<>(nk * d));
}
StridedMapMut w2_slice_mut(Tensor& w2, Index k, Index d, Index nk) {
  return StridedMapMut(w2.data() + k * d, d, d, Eigen::OuterStride<>(nk * d));
}

}  // namespace

Var bilinear_forms(Var ha, Var ho, Var w2) {
  Graph& g = graph_of(ha);
  check_same_graph(ha, ho);
  check_same_graph(ha, w2);
  const Tensor& hav = ha.value();
  const Tensor& hov = ho.value();
  const Tensor& wv = w2.value();
  if (hav.rank() != 2 || hov.rank() != 2 || wv.rank() != 3 || wv.dim(0) != hav.dim(1) ||
      wv.dim(2) != hov.dim(1) || hav.dim(1) != hov.dim(1))
    throw ShapeError("bilinear_forms: got " + shape_string(hav.shape()) + ", " +
                     shape_string(hov.shape()) + ", " + shape_string(wv.shape()));
  const Index n = hav.dim(0), m = hov.dim(0), d = hav.dim(1), nk = wv.dim(1);
  Tensor out({n, m, nk});
  auto am = hav.as_matrix(n, d);
  auto bm = hov.as_matrix(m, d);
  MatrixRM scores(n, m);
  for (Index k = 0; k < nk; ++k) {
    scores.noalias() = am * w2_slice(wv, k, d, nk) * bm.transpose();
    // scatter into channel k of the [n,m,nk] output
    StridedMapMut(out.data() + k, n * m, 1, Eigen::OuterStride<>(nk)) =
        Eigen::Map<const MatrixRM>(scores.data(), n * m, 1);
  }
  const int32_t ia = ha.id, ib = ho.id, iw = w2.id;
  return g.make(std::move(out), [ia, ib, iw, n, m, d, nk](Graph& g, int32_t self) {
    auto am = g.value_of(ia).as_matrix(n, d);
    auto bm = g.value_of(ib).as_matrix(m, d);
    const Tensor& wv = g.value_of(iw);
    auto da = g.grad_of(ia).as_matrix(n, d);
    auto db = g.grad_of(ib).as_matrix(m, d);
    Tensor& dw = g.grad_of(iw);
    const Tensor& dy = g.grad_of(self);
    MatrixRM ds(n, m);
    for (Index k = 0; k < nk; ++k) {
      Eigen::Map<MatrixRM>(ds.data(), n * m, 1) =
          StridedMap(dy.data() + k, n * m, 1, Eigen::OuterStride<>(nk));
      auto wk = w2_slice(wv, k, d, nk);
      da.noalias() += ds * bm * wk.transpose();
      db.noalias() += ds.transpose() * am * wk;
      w2_slice_mut(dw, k, d, nk).noalias() += am.transpose() * ds * bm;
    }
  });
}

Var span_max_pool(Var h) {
  Graph& g = graph_of(h);
  const Tensor& hv = h.value();
  if (hv.rank() != 2) throw ShapeError("span_max_pool: need [n,d], got " + shape_string(hv.shape()));
  const Index n = hv.dim(0), d = hv.dim(1);
  Tensor out({n, n, d});
  auto hm = hv.as_matrix(n, d);
  auto om = out.as_matrix(n * n, d);
  // argmax token index per (i,j,channel); first maximum wins.
  std::vector<int32_t> arg(static_cast<size_t>(n * n * d));
  std::vector<double> cur(static_cast<size_t>(d));
  std::vector<int32_t> cur_arg(static_cast<size_t>(d));
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < d; ++c) {
      cur[static_cast<size_t>(c)] = hm(i, c);
      cur_arg[static_cast<size_t>(c)] = static_cast<int32_t>(i);
    }
    for (Index j = i; j < n; ++j) {
      if (j > i) {
        for (Index c = 0; c < d; ++c) {
          if (hm(j, c) > cur[static_cast<size_t>(c)]) {
            cur[static_cast<size_t>(c)] = hm(j, c);
            cur_arg[static_cast<size_t>(c)] = static_cast<int32_t>(j);
          }
        }
      }
      for (Index c = 0; c < d; ++c) {
        om(i * n + j, c) = cur[static_cast<size_t>(c)];
        om(j * n + i, c) = cur[static_cast<size_t>(c)];
        arg[static_cast<size_t>((i * n + j) * d + c)] = cur_arg[static_cast<size_t>(c)];
        arg[static_cast<size_t>((j * n + i) * d + c)] = cur_arg[static_cast<size_t>(c)];
      }
    }
  }
  const int32_t ih = h.id;
  return g.make(std::move(out), [ih, arg = std::move(arg), n, d](Graph& g, int32_t self) {
    auto dh = g.grad_of(ih).as_matrix(n, d);
    const Tensor& dy = g.grad_of(self);
    for (Index cell = 0; cell < n * n; ++cell)
      for (Index c = 0; c < d; ++c)
        dh(arg[static_cast<size_t>(cell * d + c)], c) += dy[cell * d + c];
  });
}

Var rect_max_pool(Var table, const std::vector<CellRect>& rects) {
  Graph& g = graph_of(table);
  const Tensor& tv = table.value();
  if (tv.rank() != 3 || tv.dim(0) != tv.dim(1))
    throw ShapeError("rect_max_pool: need [n,n,C], got " + shape_string(tv.shape()));
  const Index n = tv.dim(0), ch = tv.dim(2);
  const Index m = static_cast<Index>(rects.size());
  for (const CellRect& r : rects) {
    if (r.r0 > r.r1 || r.c0 > r.c1)
      throw GeometryError("rect_max_pool: top-left (" + std::to_string(r.r0) + "," +
                          std::to_string(r.c0) + ") is not above-left of bottom-right (" +
                          std::to_string(r.r1) + "," + std::to_string(r.c1) + ")");
    if (r.r0 < 0 || r.c0 < 0 || r.r1 >= n || r.c1 >= n)
      throw GeometryError("rect_max_pool: rectangle out of table bounds");
  }
  Tensor out({m, ch});
  std::vector<int32_t> arg(static_cast<size_t>(m * ch));
  auto tm = tv.as_matrix(n * n, ch);
  auto om = out.as_matrix(m, ch);
  for (Index k = 0; k < m; ++k) {
    const CellRect& rc = rects[static_cast<size_t>(k)];
    bool first = true;
    for (Index r = rc.r0; r <= rc.r1; ++r)
      for (Index c = rc.c0; c <= rc.c1; ++c) {
        const Index cell = r * n + c;
        for (Index ci = 0; ci < ch; ++ci) {
          if (first || tm(cell, ci) > om(k, ci)) {
            om(k, ci) = tm(cell, ci);
            arg[static_cast<size_t>(k * ch + ci)] = static_cast<int32_t>(cell);
          }
        }
        first = false;
      }
  }
  const int32_t it = table.id;
  return g.make(std::move(out), [it, arg = std::move(arg), n, ch, m](Graph& g, int32_t self) {
    auto dt = g.grad_of(it).as_matrix(n * n, ch);
    auto dy = g.grad_of(self).as_matrix(m, ch);
    for (Index k = 0; k < m; ++k)
      for (Index ci = 0; ci < ch; ++ci) dt(arg[static_cast<size_t>(k * ch + ci)], ci) += dy(k, ci);
  });
}

Var conv3x3(Var x, Var w, Var b) {
  Graph& g = graph_of(x);
  check_same_graph(x, w);
  check_same_graph(x, b);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.rank() != 3 || xv.dim(0) != xv.dim(1))
    throw ShapeError("conv3x3: need [n,n,C] input, got " + shape_string(xv.shape()));
  const Index n = xv.dim(0), ch = xv.dim(2);
  if (wv.shape() != std::vector<Index>{3, 3, ch, ch})
    throw ShapeError("conv3x3: kernel must be (3,3," + std::to_string(ch) + "," +
                     std::to_string(ch) + "), got " + shape_string(wv.shape()));
  if (b.value().size() != ch) throw ShapeError("conv3x3: bias width mismatch");
  Tensor out({n, n, ch});
  auto om = out.as_matrix(n * n, ch);
  om.rowwise() = ConstVecMap(b.value().data(), ch).transpose();
  auto xm = xv.as_matrix(n * n, ch);
  for (Index di = 0; di < 3; ++di) {
    for (Index dj = 0; dj < 3; ++dj) {
      ConstMatMap wk(wv.data() + (di * 3 + dj) * ch * ch, ch, ch);
      const Index r_lo = std::max<Index>(0, 1 - di), r_hi = std::min<Index>(n, n + 1 - di);
      const Index c_lo = std::max<Index>(0, 1 - dj), c_hi = std::min<Index>(n, n + 1 - dj);
      const Index seg = c_hi - c_lo;
      if (seg <= 0) continue;
      for (Index r = r_lo; r < r_hi; ++r) {
        const Index rs = r + di - 1;
        om.middleRows(r * n + c_lo, seg).noalias() +=
            xm.middleRows(rs * n + c_lo + dj - 1, seg) * wk;
      }
    }
  }
  const int32_t ix = x.id, iw = w.id, ib = b.id;
  return g.make(std::move(out), [ix, iw, ib, n, ch](Graph& g, int32_t self) {
    auto dy = g.grad_of(self).as_matrix(n * n, ch);
    auto xm = g.value_of(ix).as_matrix(n * n, ch);
    const Tensor& wv = g.value_of(iw);
    auto dx = g.grad_of(ix).as_matrix(n * n, ch);
    Tensor& dw = g.grad_of(iw);
    VecMap(g.grad_of(ib).data(), ch) += dy.colwise().sum().transpose();
    for (Index di = 0; di < 3; ++di) {
      for (Index dj = 0; dj < 3; ++dj) {
        ConstMatMap wk(wv.data() + (di * 3 + dj) * ch * ch, ch, ch);
        MatMap dwk(dw.data() + (di * 3 + dj) * ch * ch, ch, ch);
        const Index r_lo = std::max<Index>(0, 1 - di), r_hi = std::min<Index>(n, n + 1 - di);
        const Index c_lo = std::max<Index>(0, 1 - dj), c_hi = std::min<Index>(n, n + 1 - dj);
        const Index seg = c_hi - c_lo;
        if (seg <= 0) continue;
        for (Index r = r_lo; r < r_hi; ++r) {
          const Index rs = r + di - 1;
          dx.middleRows(rs * n + c_lo + dj - 1, seg).noalias() +=
              dy.middleRows(r * n + c_lo, seg) * wk.transpose();
          dwk.noalias() += xm.middleRows(rs * n + c_lo + dj - 1, seg).transpose() *
                           dy.middleRows(r * n + c_lo, seg);
        }
      }
    }
  });
}

Var softmax(Var x, Index axis) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  if (axis < 0 || axis >= xv.rank())
    throw ShapeError("softmax: axis " + std::to_string(axis) + " out of rank " +
                     std::to_string(xv.rank()));
  const Index k = xv.dim(axis);
  if (k < 1) throw ShapeError("softmax over an empty axis");
  Index outer = 1, inner = 1;
  for (Index a = 0; a < axis; ++a) outer *= xv.dim(a);
  for (Index a = axis + 1; a < xv.rank(); ++a) inner *= xv.dim(a);
  Tensor out(xv.shape());
  for (Index o = 0; o < outer; ++o) {
    for (Index in = 0; in < inner; ++in) {
      const Index base = o * k * inner + in;
      double mx = xv[base];
      for (Index i = 1; i < k; ++i) mx = std::max(mx, xv[base + i * inner]);
      double s = 0.0;
      for (Index i = 0; i < k; ++i) {
        const double e = std::exp(xv[base + i * inner] - mx);
        out[base + i * inner] = e;
        s += e;
      }
      for (Index i = 0; i < k; ++i) out[base + i * inner] /= s;
    }
  }
  const int32_t ix = x.id;
  return g.make(std::move(out), [ix, outer, inner, k](Graph& g, int32_t self) {
    const Tensor& y = g.value_of(self);
    const Tensor& dy = g.grad_of(self);
    Tensor& dx = g.grad_of(ix);
    for (Index o = 0; o < outer; ++o) {
      for (Index in = 0; in < inner; ++in) {
        const Index base = o * k * inner + in;
        double dot = 0.0;
        for (Index i = 0; i < k; ++i) dot += dy[base + i * inner] * y[base + i * inner];
        for (Index i = 0; i < k; ++i)
          dx[base + i * inner] += y[base + i * inner] * (dy[base + i * inner] - dot);
      }
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Graph& g = graph_of(x);
  check_same_graph(x, gain);
  check_same_graph(x, bias);
  const Tensor& xv = x.value();
  const Index c = last_dim(xv);
  if (gain.value().size() != c || bias.value().size() != c)
    throw ShapeError("layer_norm: gain/bias must match last axis " + std::to_string(c));
  const Index rows = xv.size() / c;
  Tensor out(xv.shape());
  Tensor xhat(xv.shape());
  std::vector<double> inv_std(static_cast<size_t>(rows));
  auto xm = xv.as_matrix(rows, c);
  auto xh = xhat.as_matrix(rows, c);
  auto om = out.as_matrix(rows, c);
  ConstVecMap gv(gain.value().data(), c);
  ConstVecMap bv(bias.value().data(), c);
  for (Index r = 0; r < rows; ++r) {
    const double mu = xm.row(r).mean();
    const double var = (xm.row(r).array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(r)] = is;
    xh.row(r) = (xm.row(r).array() - mu) * is;
    om.row(r) = xh.row(r).cwiseProduct(gv.transpose()) + bv.transpose();
  }
  const int32_t ix = x.id, ig = gain.id, ib = bias.id;
  return g.make(std::move(out),
                [ix, ig, ib, rows, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                    Graph& g, int32_t self) {
                  auto dy = g.grad_of(self).as_matrix(rows, c);
                  auto xh = xhat.as_matrix(rows, c);
                  auto dx = g.grad_of(ix).as_matrix(rows, c);
                  VecMap dgain(g.grad_of(ig).data(), c);
                  VecMap dbias(g.grad_of(ib).data(), c);
                  ConstVecMap gv(g.value_of(ig).data(), c);
                  for (Index r = 0; r < rows; ++r) {
                    Eigen::RowVectorXd dxh = dy.row(r).cwiseProduct(gv.transpose());
                    dgain += dy.row(r).cwiseProduct(xh.row(r)).transpose();
                    dbias += dy.row(r).transpose();
                    const double m1 = dxh.mean();
                    const double m2 = dxh.cwiseProduct(xh.row(r)).mean();
                    dx.row(r) += inv_std[static_cast<size_t>(r)] *
                                 (dxh.array() - m1 - xh.row(r).array() * m2).matrix();
                  }
                });
}

namespace {

Var cross_entropy_impl(Var logits, const std::vector<int>& targets, const std::vector<double>* weights) {
  Graph& g = graph_of(logits);
  const Tensor& zv = logits.value();
  const Index k = last_dim(zv);
  const Index rows = zv.size() / k;
  if (rows < 1) throw ShapeError("cross_entropy: no rows");
  if (static_cast<Index>(targets.size()) != rows)
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(rows) + " rows");
  if (weights && static_cast<Index>(weights->size()) != rows)
    throw ShapeError("cross_entropy: weight count mismatch");
  for (Index r = 0; r < rows; ++r) {
    const int t = targets[static_cast<size_t>(r)];
    if (t < 0 || t >= k)
      throw std::out_of_range("cross_entropy: target class " + std::to_string(t) + " out of " +
                              std::to_string(k) + " at row " + std::to_string(r));
  }
  auto zm = zv.as_matrix(rows, k);
  Tensor probs({rows, k});
  auto pm = probs.as_matrix(rows, k);
  double total = 0.0, total_w = 0.0;
  for (Index r = 0; r < rows; ++r) {
    const double mx = zm.row(r).maxCoeff();
    pm.row(r) = (zm.row(r).array() - mx).exp();
    const double s = pm.row(r).sum();
    pm.row(r) /= s;
    const double w = weights ? (*weights)[static_cast<size_t>(r)] : 1.0;
    total += w * (std::log(s) + mx - zm(r, targets[static_cast<size_t>(r)]));
    total_w += w;
  }
  if (total_w <= 0.0) throw ShapeError("cross_entropy: total weight must be positive");
  Tensor out = Tensor::scalar(total / total_w);
  const int32_t iz = logits.id;
  std::vector<double> w_over_total(static_cast<size_t>(rows));
  for (Index r = 0; r < rows; ++r)
    w_over_total[static_cast<size_t>(r)] = (weights ? (*weights)[static_cast<size_t>(r)] : 1.0) / total_w;
  return g.make(std::move(out),
                [iz, targets, rows, k, probs = std::move(probs), w_over_total = std::move(w_over_total)](
                    Graph& g, int32_t self) {
                  const double d = g.grad_of(self)[0];
                  auto dz = g.grad_of(iz).as_matrix(rows, k);
                  auto pm = probs.as_matrix(rows, k);
                  for (Index r = 0; r < rows; ++r) {
                    const double c = d * w_over_total[static_cast<size_t>(r)];
                    dz.row(r) += c * pm.row(r);
                    dz(r, targets[static_cast<size_t>(r)]) -= c;
                  }
                });
}

}  // namespace

Var cross_entropy(Var logits, const std::vector<int>& targets) {
  return cross_entropy_impl(logits, targets, nullptr);
}

Var cross_entropy(Var logits, const std::vector<int>& targets, const std::vector<double>& weights) {
  return cross_entropy_impl(logits, targets, &weights);
}

Var pad_table(Var x, Index n_padded) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  if (xv.rank() != 3 || xv.dim(0) != xv.dim(1))
    throw ShapeError("pad_table: need [n,n,C], got " + shape_string(xv.shape()));
  const Index n = xv.dim(0), ch = xv.dim(2);
  if (n_padded < n) throw ShapeError("pad_table: target side smaller than input");
  if (n_padded == n) return x;
  Tensor out({n_padded, n_padded, ch});
  auto om = out.as_matrix(n_padded * n_padded, ch);
  auto xm = xv.as_matrix(n * n, ch);
  for (Index r = 0; r < n; ++r) om.middleRows(r * n_padded, n) = xm.middleRows(r * n, n);
  const int32_t ix = x.id;
  return g.make(std::move(out), [ix, n, n_padded, ch](Graph& g, int32_t self) {
    auto dy = g.grad_of(self).as_matrix(n_padded * n_padded, ch);
    auto dx = g.grad_of(ix).as_matrix(n * n, ch);
    for (Index r = 0; r < n; ++r) dx.middleRows(r * n, n) += dy.middleRows(r * n_padded, n);
  });
}

Var crop_table(Var x, Index n) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  if (xv.rank() != 3 || xv.dim(0) != xv.dim(1))
    throw ShapeError("crop_table: need [np,np,C], got " + shape_string(xv.shape()));
  const Index np = xv.dim(0), ch = xv.dim(2);
  if (n > np) throw ShapeError("crop_table: target side larger than input");
  if (n == np) return x;
  Tensor out({n, n, ch});
  auto om = out.as_matrix(n * n, ch);
  auto xm = xv.as_matrix(np * np, ch);
  for (Index r = 0; r < n; ++r) om.middleRows(r * n, n) = xm.middleRows(r * np, n);
  const int32_t ix = x.id;
  return g.make(std::move(out), [ix, n, np, ch](Graph& g, int32_t self) {
    auto dy = g.grad_of(self).as_matrix(n * n, ch);
    auto dx = g.grad_of(ix).as_matrix(np * np, ch);
    for (Index r = 0; r < n; ++r) dx.middleRows(r * np, n) += dy.middleRows(r * n, n);
  });
}

Var cyclic_shift(Var x, Index s) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  if (xv.rank() != 3 || xv.dim(0) != xv.dim(1))
    throw ShapeError("cyclic_shift: need [n,n,C], got " + shape_string(xv.shape()));
  const Index n = xv.dim(0), ch = xv.dim(2);
  const Index sm = ((s % n) + n) % n;
  if (sm == 0) return x;
  Tensor out({n, n, ch});
  auto om = out.as_matrix(n * n, ch);
  auto xm = xv.as_matrix(n * n, ch);
  for (Index r = 0; r < n; ++r) {
    const Index sr = (r + sm) % n;
    for (Index c = 0; c < n; ++c) om.row(r * n + c) = xm.row(sr * n + (c + sm) % n);
  }
  const int32_t ix = x.id;
  return g.make(std::move(out), [ix, n, ch, sm](Graph& g, int32_t self) {
    auto dy = g.grad_of(self).as_matrix(n * n, ch);
    auto dx = g.grad_of(ix).as_matrix(n * n, ch);
    for (Index r = 0; r < n; ++r) {
      const Index sr = (r + sm) % n;
      for (Index c = 0; c < n; ++c) dx.row(sr * n + (c + sm) % n) += dy.row(r * n + c);
    }
  });
}

Var convex_combine(Var a, Var b, Var gate_logit) {
  Graph& g = graph_of(a);
  check_same_graph(a, b);
  check_same_graph(a, gate_logit);
  check_same_shape(a.value(), b.value(), "convex_combine");
  const Index gsz = gate_logit.value().size();
  const Index c = last_dim(a.value());
  if (gsz != 1 && gsz != c)
    throw ShapeError("convex_combine: gate must be scalar or match last axis " + std::to_string(c));
  ArrayX gate(gsz);
  for (Index i = 0; i < gsz; ++i) {
    const double v = gate_logit.value()[i];
    gate[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  const Index rows = a.size() / c;
  Tensor out(a.shape());
  auto om = out.as_matrix(rows, c);
  auto am = a.value().as_matrix(rows, c);
  auto bm = b.value().as_matrix(rows, c);
  for (Index r = 0; r < rows; ++r)
    for (Index j = 0; j < c; ++j) {
      const double gj = gate[gsz == 1 ? 0 : j];
      om(r, j) = gj * am(r, j) + (1.0 - gj) * bm(r, j);
    }
  const int32_t ia = a.id, ib = b.id, ig = gate_logit.id;
  return g.make(std::move(out), [ia, ib, ig, gate = std::move(gate), rows, c, gsz](Graph& g, int32_t self) {
    auto dy = g.grad_of(self).as_matrix(rows, c);
    auto da = g.grad_of(ia).as_matrix(rows, c);
    auto db = g.grad_of(ib).as_matrix(rows, c);
    auto am = g.value_of(ia).as_matrix(rows, c);
    auto bm = g.value_of(ib).as_matrix(rows, c);
    Tensor& dg = g.grad_of(ig);
    for (Index r = 0; r < rows; ++r)
      for (Index j = 0; j < c; ++j) {
        const Index gi = gsz == 1 ? 0 : j;
        const double gj = gate[gi];
        da(r, j) += gj * dy(r, j);
        db(r, j) += (1.0 - gj) * dy(r, j);
        dg[gi] += dy(r, j) * (am(r, j) - bm(r, j)) * gj * (1.0 - gj);
      }
  });
}

}  // namespace tt
