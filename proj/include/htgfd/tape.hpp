#pragma once

#include "htgfd/common.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

namespace htgfd {

// Handle to a node on a Tape. Only meaningful together with the tape that
// created it.
struct Var {
  int32_t i = -1;
  bool valid() const { return i >= 0; }
};

// Row reference used to assemble a matrix out of rows scattered across other
// nodes; node < 0 denotes a zero row.
struct RowRef {
  int32_t node = -1;
  int32_t row = 0;
};

// Reverse-mode tape over dense row-major matrices. Values are immutable once
// recorded; a tape belongs to exactly one forward/backward cycle.
template <class S>
class Tape {
 public:
  using M = Mat<S>;

  bool check_finite = false;    // assert finiteness of every recorded value
  bool keep_attention = false;  // retain attention weights for inspection

  // attention weight matrices recorded when keep_attention is set
  std::vector<M> attention_probes;

  Index size() const { return static_cast<Index>(nodes_.size()); }
  const M& value(Var v) const { return nodes_[check(v)].value; }
  const M& grad(Var v) const { return nodes_[check(v)].grad; }
  bool needs_grad(Var v) const { return nodes_[check(v)].needs_grad; }

  // Signature of every data-dependent branch taken in the forward pass
  // (ReLU sign patterns, max-pool argmaxes, zero-norm guards). Two forward
  // passes with different signatures straddle a non-smooth point.
  uint64_t kink_signature() const { return kink_sig_; }

  Var constant(M v) { return push(std::move(v), false, {}); }
  Var leaf(M v) { return push(std::move(v), true, {}); }

  Var add(Var a, Var b) {
    const M& va = val(a);
    const M& vb = val(b);
    shape_eq(va, vb, "add");
    Var out = push(va + vb, needs(a, b), [this, a, b](const M& g) {
      accum(a, g);
      accum(b, g);
    });
    return out;
  }

  Var sub(Var a, Var b) {
    const M& va = val(a);
    const M& vb = val(b);
    shape_eq(va, vb, "sub");
    return push(va - vb, needs(a, b), [this, a, b](const M& g) {
      accum(a, g);
      if (nodes_[b.i].needs_grad) accum(b, (-g).eval());
    });
  }

  Var hadamard(Var a, Var b) {
    const M& va = val(a);
    const M& vb = val(b);
    shape_eq(va, vb, "hadamard");
    return push(va.cwiseProduct(vb), needs(a, b), [this, a, b](const M& g) {
      if (nodes_[a.i].needs_grad) accum(a, g.cwiseProduct(nodes_[b.i].value));
      if (nodes_[b.i].needs_grad) accum(b, g.cwiseProduct(nodes_[a.i].value));
    });
  }

  // elementwise multiply by a constant matrix (e.g. a padding mask)
  Var cmul(Var a, M c) {
    const M& va = val(a);
    shape_eq(va, c, "cmul");
    auto cp = std::make_shared<M>(std::move(c));
    return push(va.cwiseProduct(*cp), needs(a), [this, a, cp](const M& g) {
      accum(a, g.cwiseProduct(*cp));
    });
  }

  Var scale(Var a, S c) {
    return push(val(a) * c, needs(a),
                [this, a, c](const M& g) { accum(a, (g * c).eval()); });
  }

  // multiply by a 1x1 node
  Var scale_by(Var a, Var s) {
    const M& vs = val(s);
    require(vs.rows() == 1 && vs.cols() == 1, "scale_by: scalar node expected");
    S c = vs(0, 0);
    return push(val(a) * c, needs(a, s), [this, a, s, c](const M& g) {
      if (nodes_[a.i].needs_grad) accum(a, (g * c).eval());
      if (nodes_[s.i].needs_grad) {
        M ds(1, 1);
        ds(0, 0) = g.cwiseProduct(nodes_[a.i].value).sum();
        accum(s, ds);
      }
    });
  }

  Var matmul(Var a, Var b, bool ta = false, bool tb = false) {
    const M& va = val(a);
    const M& vb = val(b);
    const Index ka = ta ? va.rows() : va.cols();
    const Index kb = tb ? vb.cols() : vb.rows();
    require(ka == kb, "matmul: inner dimensions disagree");
    M out;
    if (!ta && !tb)
      out = va * vb;
    else if (!ta && tb)
      out = va * vb.transpose();
    else if (ta && !tb)
      out = va.transpose() * vb;
    else
      out = va.transpose() * vb.transpose();
    return push(std::move(out), needs(a, b), [this, a, b, ta, tb](const M& g) {
      const M& A = nodes_[a.i].value;
      const M& B = nodes_[b.i].value;
      if (nodes_[a.i].needs_grad) {
        if (!ta && !tb)
          accum(a, (g * B.transpose()).eval());
        else if (!ta && tb)
          accum(a, (g * B).eval());
        else if (ta && !tb)
          accum(a, (B * g.transpose()).eval());
        else
          accum(a, (B.transpose() * g.transpose()).eval());
      }
      if (nodes_[b.i].needs_grad) {
        if (!ta && !tb)
          accum(b, (A.transpose() * g).eval());
        else if (!ta && tb)
          accum(b, (g.transpose() * A).eval());
        else if (ta && !tb)
          accum(b, (A * g).eval());
        else
          accum(b, (g.transpose() * A.transpose()).eval());
      }
    });
  }

  // y = x * w^T + 1 b   with x: n x in, w: out x in, b: 1 x out
  Var linear(Var x, Var w, Var b) {
    const M& vx = val(x);
    const M& vw = val(w);
    const M& vb = val(b);
    require(vx.cols() == vw.cols(), "linear: input width mismatch");
    require(vb.rows() == 1 && vb.cols() == vw.rows(), "linear: bias shape");
    M out = vx * vw.transpose();
    out.rowwise() += vb.row(0);
    return push(std::move(out), needs(x, w, b), [this, x, w, b](const M& g) {
      if (nodes_[x.i].needs_grad) accum(x, (g * nodes_[w.i].value).eval());
      if (nodes_[w.i].needs_grad)
        accum(w, (g.transpose() * nodes_[x.i].value).eval());
      if (nodes_[b.i].needs_grad) accum(b, g.colwise().sum().eval());
    });
  }

  Var concat_cols(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_cols: empty");
    Index rows = val(parts[0]).rows();
    Index cols = 0;
    for (Var p : parts) {
      require(val(p).rows() == rows, "concat_cols: row mismatch");
      cols += val(p).cols();
    }
    M out(rows, cols);
    Index at = 0;
    bool ng = false;
    for (Var p : parts) {
      out.middleCols(at, val(p).cols()) = val(p);
      at += val(p).cols();
      ng = ng || nodes_[p.i].needs_grad;
    }
    auto ps = std::make_shared<std::vector<Var>>(parts);
    return push(std::move(out), ng, [this, ps](const M& g) {
      Index at2 = 0;
      for (Var p : *ps) {
        Index w = nodes_[p.i].value.cols();
        if (nodes_[p.i].needs_grad) accum(p, g.middleCols(at2, w).eval());
        at2 += w;
      }
    });
  }

  Var vstack(const std::vector<Var>& parts) {
    require(!parts.empty(), "vstack: empty");
    Index cols = val(parts[0]).cols();
    Index rows = 0;
    for (Var p : parts) {
      require(val(p).cols() == cols, "vstack: col mismatch");
      rows += val(p).rows();
    }
    M out(rows, cols);
    Index at = 0;
    bool ng = false;
    for (Var p : parts) {
      out.middleRows(at, val(p).rows()) = val(p);
      at += val(p).rows();
      ng = ng || nodes_[p.i].needs_grad;
    }
    auto ps = std::make_shared<std::vector<Var>>(parts);
    return push(std::move(out), ng, [this, ps](const M& g) {
      Index at2 = 0;
      for (Var p : *ps) {
        Index h = nodes_[p.i].value.rows();
        if (nodes_[p.i].needs_grad) accum(p, g.middleRows(at2, h).eval());
        at2 += h;
      }
    });
  }

  Var slice_rows(Var a, Index r0, Index n) {
    const M& va = val(a);
    require(r0 >= 0 && n >= 0 && r0 + n <= va.rows(), "slice_rows: range");
    Index cols = va.cols();
    return push(va.middleRows(r0, n).eval(), needs(a),
                [this, a, r0, n, cols](const M& g) {
                  M da = M::Zero(nodes_[a.i].value.rows(), cols);
                  da.middleRows(r0, n) = g;
                  accum(a, da);
                });
  }

  Var slice_cols(Var a, Index c0, Index n) {
    const M& va = val(a);
    require(c0 >= 0 && n >= 0 && c0 + n <= va.cols(), "slice_cols: range");
    return push(va.middleCols(c0, n).eval(), needs(a),
                [this, a, c0, n](const M& g) {
                  M da = M::Zero(nodes_[a.i].value.rows(),
                                 nodes_[a.i].value.cols());
                  da.middleCols(c0, n) = g;
                  accum(a, da);
                });
  }

  Var gather_rows(Var a, std::vector<int32_t> rows) {
    const M& va = val(a);
    M out(static_cast<Index>(rows.size()), va.cols());
    for (size_t i = 0; i < rows.size(); ++i) {
      require(rows[i] >= 0 && rows[i] < va.rows(), "gather_rows: index");
      out.row(static_cast<Index>(i)) = va.row(rows[i]);
    }
    auto rs = std::make_shared<std::vector<int32_t>>(std::move(rows));
    return push(std::move(out), needs(a), [this, a, rs](const M& g) {
      M& da = gradbuf(a);
      for (size_t i = 0; i < rs->size(); ++i)
        da.row((*rs)[i]) += g.row(static_cast<Index>(i));
    });
  }

  // Assemble a matrix whose row i is refs[i].row of node refs[i].node
  // (zero when node < 0). The workhorse for building padded sequences.
  Var rows_from(std::vector<RowRef> refs, Index cols) {
    M out = M::Zero(static_cast<Index>(refs.size()), cols);
    bool ng = false;
    for (size_t i = 0; i < refs.size(); ++i) {
      if (refs[i].node < 0) continue;
      const M& src = nodes_[refs[i].node].value;
      require(src.cols() == cols && refs[i].row >= 0 &&
                  refs[i].row < src.rows(),
              "rows_from: bad ref");
      out.row(static_cast<Index>(i)) = src.row(refs[i].row);
      ng = ng || nodes_[refs[i].node].needs_grad;
    }
    auto rs = std::make_shared<std::vector<RowRef>>(std::move(refs));
    return push(std::move(out), ng, [this, rs](const M& g) {
      for (size_t i = 0; i < rs->size(); ++i) {
        const RowRef& r = (*rs)[i];
        if (r.node < 0 || !nodes_[r.node].needs_grad) continue;
        gradbuf(Var{r.node}).row(r.row) += g.row(static_cast<Index>(i));
      }
    });
  }

  // Place rows of a at positions rows (distinct) in an n_rows-row zero matrix.
  Var scatter_rows(Var a, std::vector<int32_t> rows, Index n_rows) {
    const M& va = val(a);
    require(static_cast<Index>(rows.size()) == va.rows(),
            "scatter_rows: count mismatch");
    M out = M::Zero(n_rows, va.cols());
    for (size_t i = 0; i < rows.size(); ++i) {
      require(rows[i] >= 0 && rows[i] < n_rows, "scatter_rows: index");
      out.row(rows[i]) = va.row(static_cast<Index>(i));
    }
    auto rs = std::make_shared<std::vector<int32_t>>(std::move(rows));
    return push(std::move(out), needs(a), [this, a, rs](const M& g) {
      M da(static_cast<Index>(rs->size()), g.cols());
      for (size_t i = 0; i < rs->size(); ++i)
        da.row(static_cast<Index>(i)) = g.row((*rs)[i]);
      accum(a, da);
    });
  }

  Var segment_sum(Var a, std::vector<int32_t> seg, Index nseg) {
    const M& va = val(a);
    require(static_cast<Index>(seg.size()) == va.rows(), "segment_sum: seg");
    M out = M::Zero(nseg, va.cols());
    for (size_t i = 0; i < seg.size(); ++i)
      out.row(seg[i]) += va.row(static_cast<Index>(i));
    auto sg = std::make_shared<std::vector<int32_t>>(std::move(seg));
    return push(std::move(out), needs(a), [this, a, sg](const M& g) {
      M da(static_cast<Index>(sg->size()), g.cols());
      for (size_t i = 0; i < sg->size(); ++i)
        da.row(static_cast<Index>(i)) = g.row((*sg)[i]);
      accum(a, da);
    });
  }

  Var segment_mean(Var a, std::vector<int32_t> seg, Index nseg) {
    const M& va = val(a);
    require(static_cast<Index>(seg.size()) == va.rows(), "segment_mean: seg");
    std::vector<S> cnt(static_cast<size_t>(nseg), S(0));
    for (int32_t s : seg) cnt[static_cast<size_t>(s)] += S(1);
    M out = M::Zero(nseg, va.cols());
    for (size_t i = 0; i < seg.size(); ++i)
      out.row(seg[i]) += va.row(static_cast<Index>(i));
    for (Index r = 0; r < nseg; ++r)
      if (cnt[static_cast<size_t>(r)] > S(0))
        out.row(r) /= cnt[static_cast<size_t>(r)];
    auto sg = std::make_shared<std::vector<int32_t>>(std::move(seg));
    auto cs = std::make_shared<std::vector<S>>(std::move(cnt));
    return push(std::move(out), needs(a), [this, a, sg, cs](const M& g) {
      M da(static_cast<Index>(sg->size()), g.cols());
      for (size_t i = 0; i < sg->size(); ++i) {
        int32_t s = (*sg)[i];
        da.row(static_cast<Index>(i)) =
            g.row(s) / (*cs)[static_cast<size_t>(s)];
      }
      accum(a, da);
    });
  }

  Var segment_max(Var a, std::vector<int32_t> seg, Index nseg) {
    const M& va = val(a);
    require(static_cast<Index>(seg.size()) == va.rows(), "segment_max: seg");
    const Index C = va.cols();
    M out = M::Zero(nseg, C);
    Eigen::Matrix<int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
        arg(nseg, C);
    arg.setConstant(-1);
    for (size_t i = 0; i < seg.size(); ++i) {
      const Index r = seg[i];
      for (Index c = 0; c < C; ++c) {
        S x = va(static_cast<Index>(i), c);
        if (arg(r, c) < 0 || x > out(r, c)) {
          out(r, c) = x;
          arg(r, c) = static_cast<int32_t>(i);
        }
      }
    }
    for (Index r = 0; r < nseg; ++r)
      for (Index c = 0; c < C; ++c) {
        fold_kink(static_cast<uint64_t>(arg(r, c)) + 2);
        if (arg(r, c) < 0) out(r, c) = S(0);  // empty segment
      }
    auto am = std::make_shared<decltype(arg)>(std::move(arg));
    return push(std::move(out), needs(a), [this, a, am](const M& g) {
      M& da = gradbuf(a);
      for (Index r = 0; r < g.rows(); ++r)
        for (Index c = 0; c < g.cols(); ++c)
          if ((*am)(r, c) >= 0) da((*am)(r, c), c) += g(r, c);
    });
  }

  Var relu(Var a) {
    const M& va = val(a);
    M out = va.cwiseMax(S(0));
    fold_sign_pattern(va);
    return push(std::move(out), needs(a), [this, a](const M& g) {
      // subgradient at 0 is 0
      const M& x = nodes_[a.i].value;
      accum(a, (g.array() * (x.array() > S(0)).template cast<S>()).matrix());
    });
  }

  Var tanh_(Var a) {
    M out = val(a).array().tanh().matrix();
    Var r = push(std::move(out), needs(a), {});
    nodes_[r.i].backward = [this, a, r](const M& g) {
      const M& y = nodes_[r.i].value;
      accum(a, (g.array() * (S(1) - y.array().square())).matrix());
    };
    return r;
  }

  Var sigmoid(Var a) {
    M out = (S(1) / (S(1) + (-val(a).array()).exp())).matrix();
    Var r = push(std::move(out), needs(a), {});
    nodes_[r.i].backward = [this, a, r](const M& g) {
      const M& y = nodes_[r.i].value;
      accum(a, (g.array() * y.array() * (S(1) - y.array())).matrix());
    };
    return r;
  }

  // Rows with norm <= eps map to zero (guard is part of the contract).
  Var l2_normalize_rows(Var a, S eps = S(1e-12)) {
    const M& va = val(a);
    M out(va.rows(), va.cols());
    std::vector<S> norms(static_cast<size_t>(va.rows()));
    for (Index r = 0; r < va.rows(); ++r) {
      S n = va.row(r).norm();
      norms[static_cast<size_t>(r)] = n;
      fold_kink(n <= eps ? 1 : 0);
      if (n <= eps)
        out.row(r).setZero();
      else
        out.row(r) = va.row(r) / n;
    }
    auto ns = std::make_shared<std::vector<S>>(std::move(norms));
    Var ret = push(std::move(out), needs(a), {});
    nodes_[ret.i].backward = [this, a, ret, ns, eps](const M& g) {
      const M& y = nodes_[ret.i].value;
      M da(g.rows(), g.cols());
      for (Index r = 0; r < g.rows(); ++r) {
        S n = (*ns)[static_cast<size_t>(r)];
        if (n <= eps) {
          da.row(r).setZero();
        } else {
          S d = g.row(r).dot(y.row(r));
          da.row(r) = (g.row(r) - d * y.row(r)) / n;
        }
      }
      accum(a, da);
    };
    return ret;
  }

  Var softmax_rows(Var a) { return softmax_impl(a, nullptr); }

  // key_mask[j] == 0 excludes column j (weight exactly 0)
  Var masked_softmax_rows(Var a, const std::vector<uint8_t>& key_mask) {
    return softmax_impl(a, &key_mask);
  }

  // Multi-head scaled-dot self-attention core. q, k, v: L x f with f a
  // multiple of heads; mask[j] == 0 excludes position j as a key.
  Var attention(Var q, Var k, Var v, const std::vector<uint8_t>& mask,
                int heads) {
    const M& Q = val(q);
    const M& K = val(k);
    const M& V = val(v);
    const Index L = Q.rows();
    const Index f = Q.cols();
    require(K.rows() == L && V.rows() == L && K.cols() == f && V.cols() == f,
            "attention: shape mismatch");
    require(heads > 0 && f % heads == 0, "attention: heads must divide width");
    require(static_cast<Index>(mask.size()) == L, "attention: mask length");
    const Index dh = f / heads;
    const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(dh));
    M out(L, f);
    auto weights = std::make_shared<std::vector<M>>();
    weights->reserve(static_cast<size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      M scores = (Q.middleCols(h * dh, dh) *
                  K.middleCols(h * dh, dh).transpose()) *
                 inv_sqrt;
      M A(L, L);
      for (Index r = 0; r < L; ++r) {
        S mx = -std::numeric_limits<S>::infinity();
        for (Index c = 0; c < L; ++c)
          if (mask[static_cast<size_t>(c)] && scores(r, c) > mx)
            mx = scores(r, c);
        S sum = S(0);
        for (Index c = 0; c < L; ++c) {
          S e = mask[static_cast<size_t>(c)] ? std::exp(scores(r, c) - mx)
                                             : S(0);
          A(r, c) = e;
          sum += e;
        }
        A.row(r) /= sum;
      }
      out.middleCols(h * dh, dh) = A * V.middleCols(h * dh, dh);
      if (keep_attention) attention_probes.push_back(A);
      weights->push_back(std::move(A));
    }
    return push(std::move(out), needs(q, k, v),
                [this, q, k, v, weights, heads, dh, inv_sqrt](const M& g) {
                  const M& Q = nodes_[q.i].value;
                  const M& K = nodes_[k.i].value;
                  const M& V = nodes_[v.i].value;
                  M dQ = M::Zero(Q.rows(), Q.cols());
                  M dK = M::Zero(K.rows(), K.cols());
                  M dV = M::Zero(V.rows(), V.cols());
                  for (int h = 0; h < heads; ++h) {
                    const M& A = (*weights)[static_cast<size_t>(h)];
                    M dO = g.middleCols(h * dh, dh);
                    M dA = dO * V.middleCols(h * dh, dh).transpose();
                    dV.middleCols(h * dh, dh) += A.transpose() * dO;
                    M rs = (dA.cwiseProduct(A)).rowwise().sum();
                    M dSc = A.cwiseProduct(dA.colwise() - rs.col(0)) * inv_sqrt;
                    dQ.middleCols(h * dh, dh) +=
                        dSc * K.middleCols(h * dh, dh);
                    dK.middleCols(h * dh, dh) +=
                        dSc.transpose() * Q.middleCols(h * dh, dh);
                  }
                  if (nodes_[q.i].needs_grad) accum(q, dQ);
                  if (nodes_[k.i].needs_grad) accum(k, dK);
                  if (nodes_[v.i].needs_grad) accum(v, dV);
                });
  }

  Var layer_norm_rows(Var x, Var gain, Var bias, S eps = S(1e-5)) {
    const M& vx = val(x);
    const M& vg = val(gain);
    const M& vb = val(bias);
    require(vg.rows() == 1 && vg.cols() == vx.cols(), "layer_norm: gain");
    require(vb.rows() == 1 && vb.cols() == vx.cols(), "layer_norm: bias");
    const Index n = vx.cols();
    M yhat(vx.rows(), n);
    std::vector<S> istd(static_cast<size_t>(vx.rows()));
    for (Index r = 0; r < vx.rows(); ++r) {
      S mu = vx.row(r).mean();
      S var = (vx.row(r).array() - mu).square().sum() / static_cast<S>(n);
      S is = S(1) / std::sqrt(var + eps);
      istd[static_cast<size_t>(r)] = is;
      yhat.row(r) = (vx.row(r).array() - mu).matrix() * is;
    }
    M out = (yhat.array().rowwise() * vg.row(0).array()).matrix();
    out.rowwise() += vb.row(0);
    auto yh = std::make_shared<M>(std::move(yhat));
    auto is = std::make_shared<std::vector<S>>(std::move(istd));
    return push(std::move(out), needs(x, gain, bias),
                [this, x, gain, bias, yh, is](const M& g) {
                  const M& vg2 = nodes_[gain.i].value;
                  const Index n2 = g.cols();
                  if (nodes_[gain.i].needs_grad)
                    accum(gain, (g.cwiseProduct(*yh)).colwise().sum().eval());
                  if (nodes_[bias.i].needs_grad)
                    accum(bias, g.colwise().sum().eval());
                  if (nodes_[x.i].needs_grad) {
                    M dx(g.rows(), n2);
                    for (Index r = 0; r < g.rows(); ++r) {
                      auto dy = (g.row(r).array() * vg2.row(0).array());
                      S m1 = dy.mean();
                      S m2 = (dy * yh->row(r).array()).mean();
                      dx.row(r) =
                          ((dy - m1 - yh->row(r).array() * m2) *
                           (*is)[static_cast<size_t>(r)])
                              .matrix();
                    }
                    accum(x, dx);
                  }
                });
  }

  Var mean_rows(Var a) {
    const M& va = val(a);
    const S inv = S(1) / static_cast<S>(va.rows());
    return push(va.colwise().mean().eval(), needs(a),
                [this, a, inv](const M& g) {
                  const M& x = nodes_[a.i].value;
                  M da = (g * inv).replicate(x.rows(), 1);
                  accum(a, da);
                });
  }

  Var mean_all(Var a) {
    const M& va = val(a);
    M out(1, 1);
    out(0, 0) = va.mean();
    const S inv = S(1) / static_cast<S>(va.size());
    return push(std::move(out), needs(a), [this, a, inv](const M& g) {
      const M& x = nodes_[a.i].value;
      accum(a, M::Constant(x.rows(), x.cols(), g(0, 0) * inv));
    });
  }

  Var sum_all(Var a) {
    const M& va = val(a);
    M out(1, 1);
    out(0, 0) = va.sum();
    return push(std::move(out), needs(a), [this, a](const M& g) {
      const M& x = nodes_[a.i].value;
      accum(a, M::Constant(x.rows(), x.cols(), g(0, 0)));
    });
  }

  // Mean binary cross-entropy over rows of an n x 1 logit column.
  Var bce_with_logits(Var logits, std::vector<S> targets) {
    const M& z = val(logits);
    require(z.cols() == 1, "bce_with_logits: column vector expected");
    require(static_cast<Index>(targets.size()) == z.rows(),
            "bce_with_logits: target count");
    const Index n = z.rows();
    S total = S(0);
    for (Index i = 0; i < n; ++i) {
      S zi = z(i, 0);
      S yi = targets[static_cast<size_t>(i)];
      total += std::max(zi, S(0)) - zi * yi + std::log1p(std::exp(-std::abs(zi)));
    }
    M out(1, 1);
    out(0, 0) = total / static_cast<S>(n);
    auto ts = std::make_shared<std::vector<S>>(std::move(targets));
    return push(std::move(out), needs(logits), [this, logits, ts](const M& g) {
      const M& z2 = nodes_[logits.i].value;
      const Index n2 = z2.rows();
      M dz(n2, 1);
      for (Index i = 0; i < n2; ++i) {
        S s = S(1) / (S(1) + std::exp(-z2(i, 0)));
        dz(i, 0) = g(0, 0) * (s - (*ts)[static_cast<size_t>(i)]) /
                   static_cast<S>(n2);
      }
      accum(logits, dz);
    });
  }

  // Normalized-temperature cross entropy over a 2N x 2N similarity matrix;
  // row i's positive is i+N (mod 2N), its negatives are every other row but
  // itself. Returns the mean of the 2N anchor terms (minimization form).
  Var ntxent(Var cos, S tau) {
    require(tau > S(0), "ntxent: temperature must be positive");
    const M& C = val(cos);
    const Index n2 = C.rows();
    require(C.cols() == n2 && n2 % 2 == 0, "ntxent: square 2N matrix");
    const Index N = n2 / 2;
    S loss = S(0);
    auto probs = std::make_shared<M>(M::Zero(n2, n2));
    for (Index i = 0; i < n2; ++i) {
      const Index pos = (i + N) % n2;
      S mx = -std::numeric_limits<S>::infinity();
      for (Index k = 0; k < n2; ++k)
        if (k != i) mx = std::max(mx, C(i, k) / tau);
      S denom = S(0);
      for (Index k = 0; k < n2; ++k) {
        if (k == i) continue;
        S e = std::exp(C(i, k) / tau - mx);
        (*probs)(i, k) = e;
        denom += e;
      }
      probs->row(i) /= denom;
      loss += -(C(i, pos) / tau - mx - std::log(denom));
    }
    M out(1, 1);
    out(0, 0) = loss / static_cast<S>(n2);
    return push(std::move(out), needs(cos), [this, cos, probs, tau](const M& g) {
      const Index m = probs->rows();
      const Index N2 = m / 2;
      M dC = (*probs) * (g(0, 0) / (tau * static_cast<S>(m)));
      for (Index i = 0; i < m; ++i)
        dC(i, (i + N2) % m) -= g(0, 0) / (tau * static_cast<S>(m));
      accum(cos, dC);
    });
  }

  // Run reverse accumulation from a scalar node.
  void backward(Var loss) {
    const M& v = val(loss);
    require(v.rows() == 1 && v.cols() == 1, "backward: scalar loss expected");
    require(nodes_[loss.i].needs_grad,
            "backward: loss does not depend on any leaf");
    gradbuf(loss)(0, 0) = S(1);
    for (int32_t i = loss.i; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (!n.needs_grad || n.grad.size() == 0 || !n.backward) continue;
      n.backward(n.grad);
    }
  }

 private:
  struct Node {
    M value;
    M grad;
    std::function<void(const M&)> backward;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  uint64_t kink_sig_ = 1469598103934665603ull;

  int32_t check(Var v) const {
    require(v.i >= 0 && v.i < static_cast<int32_t>(nodes_.size()),
            "invalid Var");
    return v.i;
  }

  const M& val(Var v) const { return nodes_[check(v)].value; }

  bool needs(Var a) const { return nodes_[check(a)].needs_grad; }
  bool needs(Var a, Var b) const { return needs(a) || needs(b); }
  bool needs(Var a, Var b, Var c) const { return needs(a, b) || needs(c); }

  static void shape_eq(const M& a, const M& b, const char* op) {
    require(a.rows() == b.rows() && a.cols() == b.cols(),
            std::string(op) + ": shape mismatch");
  }

  void fold_kink(uint64_t bits) {
    kink_sig_ = (kink_sig_ ^ bits) * 1099511628211ull;
  }

  void fold_sign_pattern(const M& x) {
    uint64_t acc = 0;
    int nbits = 0;
    for (Index i = 0; i < x.size(); ++i) {
      acc = (acc << 1) | (x.data()[i] > S(0) ? 1u : 0u);
      if (++nbits == 64) {
        fold_kink(acc);
        acc = 0;
        nbits = 0;
      }
    }
    fold_kink(acc ^ static_cast<uint64_t>(x.size()));
  }

  M& gradbuf(Var v) {
    Node& n = nodes_[check(v)];
    if (n.grad.size() == 0)
      n.grad = M::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  void accum(Var v, const M& g) {
    if (!nodes_[check(v)].needs_grad) return;
    gradbuf(v) += g;
  }

  Var push(M value, bool needs_grad, std::function<void(const M&)> bw) {
    if (check_finite)
      require(value.allFinite(), "non-finite value recorded on tape");
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int32_t>(nodes_.size() - 1)};
  }

  Var softmax_impl(Var a, const std::vector<uint8_t>* key_mask) {
    const M& va = val(a);
    require(va.cols() >= 1, "softmax: empty input");
    if (key_mask)
      require(static_cast<Index>(key_mask->size()) == va.cols(),
              "masked_softmax: mask length");
    M out(va.rows(), va.cols());
    for (Index r = 0; r < va.rows(); ++r) {
      S mx = -std::numeric_limits<S>::infinity();
      for (Index c = 0; c < va.cols(); ++c)
        if (!key_mask || (*key_mask)[static_cast<size_t>(c)])
          mx = std::max(mx, va(r, c));
      S sum = S(0);
      for (Index c = 0; c < va.cols(); ++c) {
        S e = (!key_mask || (*key_mask)[static_cast<size_t>(c)])
                  ? std::exp(va(r, c) - mx)
                  : S(0);
        out(r, c) = e;
        sum += e;
      }
      require(sum > S(0), "softmax: no admissible entries");
      out.row(r) /= sum;
    }
    Var ret = push(std::move(out), needs(a), {});
    nodes_[ret.i].backward = [this, a, ret](const M& g) {
      const M& y = nodes_[ret.i].value;
      M da(g.rows(), g.cols());
      for (Index r = 0; r < g.rows(); ++r) {
        S dot = g.row(r).dot(y.row(r));
        da.row(r) = (y.row(r).array() * (g.row(r).array() - dot)).matrix();
      }
      accum(a, da);
    };
    return ret;
  }
};

}  // namespace htgfd
