#pragma once

#include <functional>
#include <vector>

#include "protoseq/tensor.hpp"

namespace protoseq {

// Reverse-mode autodiff tape. Values are computed eagerly; each recorded
// operation stores a closure that scatters the upstream gradient into its
// inputs. Node creation order is a topological order, so backward() is a
// single reverse sweep. A tape is single-threaded; independent tapes may run
// concurrently.
class Tape {
 public:
  struct Val {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  Val constant(Tensor v) { return push(std::move(v), false, {}); }

  // Leaf that participates in backward(); the caller reads grad(v) after.
  Val param(const Tensor& t) { return push(t, true, {}); }

  const Tensor& value(Val v) const { return nodes_[check(v)].value; }

  // Gradient of the last backward() target w.r.t. node v (zeros if unreached).
  Tensor grad(Val v) const {
    const Node& n = nodes_[check(v)];
    if (n.grad.numel() == 0) return Tensor(n.value.rows, n.value.cols);
    return n.grad;
  }

  bool needs_grad(Val v) const { return nodes_[check(v)].needs_grad; }

  size_t size() const { return nodes_.size(); }

  void backward(Val loss) {
    Node& top = nodes_[check(loss)];
    require(top.value.rows == 1 && top.value.cols == 1, "backward: loss must be scalar");
    grad_buf(loss.id) = Tensor::scalar(1);
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (!n.needs_grad || !n.back || n.grad.numel() == 0) continue;
      n.back(*this, n.grad);
    }
  }

  // ---- elementwise and broadcast arithmetic ----

  Val add(Val a, Val b) {
    const Tensor &x = value(a), &y = value(b);
    require(x.same_shape(y), "add: shape mismatch");
    Tensor out = x;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += y.data[i];
    return binary(std::move(out), a, b, [](Tape& t, const Tensor& up, int ia, int ib) {
      t.accumulate(ia, up);
      t.accumulate(ib, up);
    });
  }

  Val sub(Val a, Val b) {
    const Tensor &x = value(a), &y = value(b);
    require(x.same_shape(y), "sub: shape mismatch");
    Tensor out = x;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= y.data[i];
    return binary(std::move(out), a, b, [](Tape& t, const Tensor& up, int ia, int ib) {
      t.accumulate(ia, up);
      Tensor neg = up;
      for (auto& v : neg.data) v = -v;
      t.accumulate(ib, neg);
    });
  }

  Val mul(Val a, Val b) {
    const Tensor &x = value(a), &y = value(b);
    require(x.same_shape(y), "mul: shape mismatch");
    Tensor out = x;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= y.data[i];
    return binary(std::move(out), a, b, [](Tape& t, const Tensor& up, int ia, int ib) {
      const Tensor &xv = t.nodes_[ia].value, &yv = t.nodes_[ib].value;
      Tensor da = up, db = up;
      for (size_t i = 0; i < up.data.size(); ++i) {
        da.data[i] *= yv.data[i];
        db.data[i] *= xv.data[i];
      }
      t.accumulate(ia, da);
      t.accumulate(ib, db);
    });
  }

  Val div(Val a, Val b) {
    const Tensor &x = value(a), &y = value(b);
    require(x.same_shape(y), "div: shape mismatch");
    Tensor out = x;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] /= y.data[i];
    return binary(std::move(out), a, b, [](Tape& t, const Tensor& up, int ia, int ib) {
      const Tensor &xv = t.nodes_[ia].value, &yv = t.nodes_[ib].value;
      Tensor da = up, db = up;
      for (size_t i = 0; i < up.data.size(); ++i) {
        da.data[i] /= yv.data[i];
        db.data[i] *= -xv.data[i] / (yv.data[i] * yv.data[i]);
      }
      t.accumulate(ia, da);
      t.accumulate(ib, db);
    });
  }

  Val scale(Val a, real_t c) {
    Tensor out = value(a);
    for (auto& v : out.data) v *= c;
    return unary(std::move(out), a, [c](Tape& t, const Tensor& up, int ia) {
      Tensor da = up;
      for (auto& v : da.data) v *= c;
      t.accumulate(ia, da);
    });
  }

  Val add_const(Val a, real_t c) {
    Tensor out = value(a);
    for (auto& v : out.data) v += c;
    return unary(std::move(out), a, [](Tape& t, const Tensor& up, int ia) { t.accumulate(ia, up); });
  }

  // M (n,d) + row vector (1,d), broadcast over rows
  Val add_bias(Val m, Val bias) {
    const Tensor &x = value(m), &b = value(bias);
    require(b.rows == 1 && b.cols == x.cols, "add_bias: bias must be (1, cols)");
    Tensor out = x;
    for (int r = 0; r < x.rows; ++r)
      for (int c = 0; c < x.cols; ++c) out.at(r, c) += b.at(0, c);
    return binary(std::move(out), m, bias, [](Tape& t, const Tensor& up, int ia, int ib) {
      t.accumulate(ia, up);
      Tensor db(1, up.cols);
      for (int r = 0; r < up.rows; ++r)
        for (int c = 0; c < up.cols; ++c) db.at(0, c) += up.at(r, c);
      t.accumulate(ib, db);
    });
  }

  // a (n,m) scaled elementwise by scalar node s (1,1)
  Val scale_by(Val a, Val s) {
    const Tensor& x = value(a);
    real_t sv = value(s).data[0];
    Tensor out = x;
    for (auto& v : out.data) v *= sv;
    return binary(std::move(out), a, s, [](Tape& t, const Tensor& up, int ia, int ib) {
      const Tensor& xv = t.nodes_[ia].value;
      real_t svv = t.nodes_[ib].value.data[0];
      Tensor da = up;
      for (auto& v : da.data) v *= svv;
      t.accumulate(ia, da);
      double ds = 0.0;
      for (size_t i = 0; i < up.data.size(); ++i) ds += static_cast<double>(up.data[i]) * xv.data[i];
      t.accumulate(ib, Tensor::scalar(static_cast<real_t>(ds)));
    });
  }

  // ---- linear algebra ----

  Val matmul(Val a, Val b) {
    const Tensor &x = value(a), &y = value(b);
    require(x.cols == y.rows, "matmul: inner dimension mismatch");
    Tensor out(x.rows, y.cols);
    matmul_into(out, x, y, false, false);
    return binary(std::move(out), a, b, [](Tape& t, const Tensor& up, int ia, int ib) {
      const Tensor &xv = t.nodes_[ia].value, &yv = t.nodes_[ib].value;
      if (t.nodes_[ia].needs_grad) {
        Tensor da(xv.rows, xv.cols);
        matmul_into(da, up, yv, false, true);  // up * y^T
        t.accumulate(ia, da);
      }
      if (t.nodes_[ib].needs_grad) {
        Tensor db(yv.rows, yv.cols);
        matmul_into(db, xv, up, true, false);  // x^T * up
        t.accumulate(ib, db);
      }
    });
  }

  Val transpose(Val a) {
    return unary(transposed(value(a)), a, [](Tape& t, const Tensor& up, int ia) {
      t.accumulate(ia, transposed(up));
    });
  }

  // ---- nonlinearities ----

  Val relu(Val a) {
    Tensor out = value(a);
    for (auto& v : out.data) v = v > 0 ? v : real_t(0);
    return unary(std::move(out), a, [](Tape& t, const Tensor& up, int ia) {
      const Tensor& xv = t.nodes_[ia].value;
      Tensor da = up;
      for (size_t i = 0; i < da.data.size(); ++i)
        if (xv.data[i] <= 0) da.data[i] = 0;
      t.accumulate(ia, da);
    });
  }

  Val tanh_act(Val a) {
    Tensor out = value(a);
    for (auto& v : out.data) v = std::tanh(v);
    return unary_r(std::move(out), a, [](Tape& t, const Tensor& up, int ia, int rid) {
      const Tensor& yv = t.nodes_[static_cast<size_t>(rid)].value;
      Tensor da = up;
      for (size_t i = 0; i < da.data.size(); ++i) da.data[i] *= (1 - yv.data[i] * yv.data[i]);
      t.accumulate(ia, da);
    });
  }

  Val logistic(Val a) {
    Tensor out = value(a);
    for (auto& v : out.data) {
      if (v >= 0) {
        v = 1 / (1 + std::exp(-v));
      } else {
        real_t e = std::exp(v);
        v = e / (1 + e);
      }
    }
    return unary_r(std::move(out), a, [](Tape& t, const Tensor& up, int ia, int rid) {
      const Tensor& yv = t.nodes_[static_cast<size_t>(rid)].value;
      Tensor da = up;
      for (size_t i = 0; i < da.data.size(); ++i) da.data[i] *= yv.data[i] * (1 - yv.data[i]);
      t.accumulate(ia, da);
    });
  }

  Val log_op(Val a) {
    Tensor out = value(a);
    for (auto& v : out.data) v = std::log(v);
    return unary(std::move(out), a, [](Tape& t, const Tensor& up, int ia) {
      const Tensor& xv = t.nodes_[ia].value;
      Tensor da = up;
      for (size_t i = 0; i < da.data.size(); ++i) da.data[i] /= xv.data[i];
      t.accumulate(ia, da);
    });
  }

  Val exp_op(Val a) {
    Tensor out = value(a);
    for (auto& v : out.data) v = std::exp(v);
    return unary_r(std::move(out), a, [](Tape& t, const Tensor& up, int ia, int rid) {
      const Tensor& yv = t.nodes_[static_cast<size_t>(rid)].value;
      Tensor da = up;
      for (size_t i = 0; i < da.data.size(); ++i) da.data[i] *= yv.data[i];
      t.accumulate(ia, da);
    });
  }

  Val sqrt_op(Val a) {
    Tensor out = value(a);
    for (auto& v : out.data) v = std::sqrt(v);
    return unary_r(std::move(out), a, [](Tape& t, const Tensor& up, int ia, int rid) {
      const Tensor& yv = t.nodes_[static_cast<size_t>(rid)].value;
      Tensor da = up;
      for (size_t i = 0; i < da.data.size(); ++i) da.data[i] *= real_t(0.5) / yv.data[i];
      t.accumulate(ia, da);
    });
  }

  // ---- reductions ----

  Val sum(Val a) {
    double s = 0.0;
    for (real_t v : value(a).data) s += v;
    return unary(Tensor::scalar(static_cast<real_t>(s)), a, [](Tape& t, const Tensor& up, int ia) {
      const Tensor& xv = t.nodes_[ia].value;
      t.accumulate(ia, Tensor::full(xv.rows, xv.cols, up.data[0]));
    });
  }

  Val mean(Val a) {
    size_t n = value(a).numel();
    return scale(sum(a), real_t(1.0 / static_cast<double>(n)));
  }

  // column means of (n,d) -> (1,d)
  Val mean_rows(Val a) {
    const Tensor& x = value(a);
    Tensor out(1, x.cols);
    for (int r = 0; r < x.rows; ++r)
      for (int c = 0; c < x.cols; ++c) out.at(0, c) += x.at(r, c);
    for (auto& v : out.data) v /= static_cast<real_t>(x.rows);
    return unary(std::move(out), a, [](Tape& t, const Tensor& up, int ia) {
      const Tensor& xv = t.nodes_[ia].value;
      Tensor da(xv.rows, xv.cols);
      for (int r = 0; r < xv.rows; ++r)
        for (int c = 0; c < xv.cols; ++c) da.at(r, c) = up.at(0, c) / static_cast<real_t>(xv.rows);
      t.accumulate(ia, da);
    });
  }

  // ---- structural ops ----

  Val slice_rows(Val a, int r0, int r1) {
    const Tensor& x = value(a);
    require(0 <= r0 && r0 < r1 && r1 <= x.rows, "slice_rows: bad range");
    Tensor out(r1 - r0, x.cols);
    for (int r = r0; r < r1; ++r)
      for (int c = 0; c < x.cols; ++c) out.at(r - r0, c) = x.at(r, c);
    return unary(std::move(out), a, [r0](Tape& t, const Tensor& up, int ia) {
      const Tensor& xv = t.nodes_[ia].value;
      Tensor da(xv.rows, xv.cols);
      for (int r = 0; r < up.rows; ++r)
        for (int c = 0; c < up.cols; ++c) da.at(r + r0, c) = up.at(r, c);
      t.accumulate(ia, da);
    });
  }

  Val slice_cols(Val a, int c0, int c1) {
    const Tensor& x = value(a);
    require(0 <= c0 && c0 < c1 && c1 <= x.cols, "slice_cols: bad range");
    Tensor out(x.rows, c1 - c0);
    for (int r = 0; r < x.rows; ++r)
      for (int c = c0; c < c1; ++c) out.at(r, c - c0) = x.at(r, c);
    return unary(std::move(out), a, [c0](Tape& t, const Tensor& up, int ia) {
      const Tensor& xv = t.nodes_[ia].value;
      Tensor da(xv.rows, xv.cols);
      for (int r = 0; r < up.rows; ++r)
        for (int c = 0; c < up.cols; ++c) da.at(r, c + c0) = up.at(r, c);
      t.accumulate(ia, da);
    });
  }

  Val concat_cols(Val a, Val b) {
    const Tensor &x = value(a), &y = value(b);
    require(x.rows == y.rows, "concat_cols: row mismatch");
    Tensor out(x.rows, x.cols + y.cols);
    for (int r = 0; r < x.rows; ++r) {
      for (int c = 0; c < x.cols; ++c) out.at(r, c) = x.at(r, c);
      for (int c = 0; c < y.cols; ++c) out.at(r, x.cols + c) = y.at(r, c);
    }
    return binary(std::move(out), a, b, [](Tape& t, const Tensor& up, int ia, int ib) {
      const Tensor& xv = t.nodes_[ia].value;
      Tensor da(xv.rows, xv.cols);
      Tensor db(up.rows, up.cols - xv.cols);
      for (int r = 0; r < up.rows; ++r) {
        for (int c = 0; c < xv.cols; ++c) da.at(r, c) = up.at(r, c);
        for (int c = 0; c < db.cols; ++c) db.at(r, c) = up.at(r, xv.cols + c);
      }
      t.accumulate(ia, da);
      t.accumulate(ib, db);
    });
  }

  Val concat_rows(Val a, Val b) {
    const Tensor &x = value(a), &y = value(b);
    require(x.cols == y.cols, "concat_rows: col mismatch");
    Tensor out(x.rows + y.rows, x.cols);
    for (int r = 0; r < x.rows; ++r)
      for (int c = 0; c < x.cols; ++c) out.at(r, c) = x.at(r, c);
    for (int r = 0; r < y.rows; ++r)
      for (int c = 0; c < y.cols; ++c) out.at(x.rows + r, c) = y.at(r, c);
    return binary(std::move(out), a, b, [](Tape& t, const Tensor& up, int ia, int ib) {
      const Tensor& xv = t.nodes_[ia].value;
      Tensor da(xv.rows, xv.cols);
      Tensor db(up.rows - xv.rows, up.cols);
      for (int r = 0; r < xv.rows; ++r)
        for (int c = 0; c < up.cols; ++c) da.at(r, c) = up.at(r, c);
      for (int r = 0; r < db.rows; ++r)
        for (int c = 0; c < up.cols; ++c) db.at(r, c) = up.at(xv.rows + r, c);
      t.accumulate(ia, da);
      t.accumulate(ib, db);
    });
  }

  Val gather_rows(Val a, std::vector<int> idx) {
    const Tensor& x = value(a);
    Tensor out(static_cast<int>(idx.size()), x.cols);
    for (size_t r = 0; r < idx.size(); ++r) {
      require(idx[r] >= 0 && idx[r] < x.rows, "gather_rows: index out of range");
      for (int c = 0; c < x.cols; ++c) out.at(static_cast<int>(r), c) = x.at(idx[r], c);
    }
    return unary(std::move(out), a, [idx = std::move(idx)](Tape& t, const Tensor& up, int ia) {
      const Tensor& xv = t.nodes_[ia].value;
      Tensor da(xv.rows, xv.cols);
      for (size_t r = 0; r < idx.size(); ++r)
        for (int c = 0; c < up.cols; ++c) da.at(idx[r], c) += up.at(static_cast<int>(r), c);
      t.accumulate(ia, da);
    });
  }

  // Rows of an embedding table selected by token id; backward scatter-adds.
  Val embedding_rows(Val table, const std::vector<int>& ids) {
    return gather_rows(table, ids);
  }

  // ---- softmax family (max-subtracted for stability) ----

  Val row_softmax(Val a) {
    const Tensor& x = value(a);
    Tensor out = x;
    for (int r = 0; r < x.rows; ++r) {
      real_t m = x.at(r, 0);
      for (int c = 1; c < x.cols; ++c) m = std::max(m, x.at(r, c));
      real_t s = 0;
      for (int c = 0; c < x.cols; ++c) {
        out.at(r, c) = std::exp(x.at(r, c) - m);
        s += out.at(r, c);
      }
      for (int c = 0; c < x.cols; ++c) out.at(r, c) /= s;
    }
    return unary_r(std::move(out), a, [](Tape& t, const Tensor& up, int ia, int rid) {
      const Tensor& yv = t.nodes_[static_cast<size_t>(rid)].value;
      Tensor da = up;
      for (int row = 0; row < yv.rows; ++row) {
        double inner = 0.0;
        for (int c = 0; c < yv.cols; ++c) inner += static_cast<double>(up.at(row, c)) * yv.at(row, c);
        for (int c = 0; c < yv.cols; ++c)
          da.at(row, c) = yv.at(row, c) * (up.at(row, c) - static_cast<real_t>(inner));
      }
      t.accumulate(ia, da);
    });
  }

  // log(sum(exp(x))) over every element -> scalar
  Val logsumexp(Val a) {
    const Tensor& x = value(a);
    require(x.numel() > 0, "logsumexp: empty input");
    real_t m = x.data[0];
    for (real_t v : x.data) m = std::max(m, v);
    double s = 0.0;
    for (real_t v : x.data) s += std::exp(static_cast<double>(v - m));
    Tensor out = Tensor::scalar(m + static_cast<real_t>(std::log(s)));
    return unary_r(std::move(out), a, [](Tape& t, const Tensor& up, int ia, int rid) {
      const Tensor& xv = t.nodes_[static_cast<size_t>(ia)].value;
      const real_t lse = t.nodes_[static_cast<size_t>(rid)].value.data[0];
      Tensor da = xv;
      for (auto& v : da.data) v = std::exp(v - lse) * up.data[0];
      t.accumulate(ia, da);
    });
  }

  // Row-wise layer normalization with learned gain/bias (1,d).
  Val layer_norm(Val a, Val gain, Val bias, real_t eps = real_t(1e-5)) {
    const Tensor& x = value(a);
    const Tensor &g = value(gain), &b = value(bias);
    require(g.rows == 1 && g.cols == x.cols && b.rows == 1 && b.cols == x.cols,
            "layer_norm: gain/bias must be (1, cols)");
    Tensor out(x.rows, x.cols);
    std::vector<real_t> mu(static_cast<size_t>(x.rows)), inv_sd(static_cast<size_t>(x.rows));
    const int d = x.cols;
    for (int r = 0; r < x.rows; ++r) {
      double m = 0;
      for (int c = 0; c < d; ++c) m += x.at(r, c);
      m /= d;
      double var = 0;
      for (int c = 0; c < d; ++c) {
        double dv = x.at(r, c) - m;
        var += dv * dv;
      }
      var /= d;
      double isd = 1.0 / std::sqrt(var + eps);
      mu[static_cast<size_t>(r)] = static_cast<real_t>(m);
      inv_sd[static_cast<size_t>(r)] = static_cast<real_t>(isd);
      for (int c = 0; c < d; ++c)
        out.at(r, c) = static_cast<real_t>((x.at(r, c) - m) * isd) * g.at(0, c) + b.at(0, c);
    }
    int ia = check(a), ig = check(gain), ib = check(bias);
    bool ng = nodes_[ia].needs_grad || nodes_[ig].needs_grad || nodes_[ib].needs_grad;
    Val res = push(std::move(out), ng, {});
    if (ng) {
      nodes_[static_cast<size_t>(res.id)].back =
          [ia, ig, ib, mu = std::move(mu), inv_sd = std::move(inv_sd)](
              Tape& t, const Tensor& up) {
        const Tensor& xv = t.nodes_[ia].value;
        const Tensor& gv = t.nodes_[ig].value;
        const int d = xv.cols;
        Tensor dx(xv.rows, xv.cols), dg(1, d), db(1, d);
        for (int r = 0; r < xv.rows; ++r) {
          const real_t m = mu[static_cast<size_t>(r)], isd = inv_sd[static_cast<size_t>(r)];
          double sum_dxhat = 0, sum_dxhat_xhat = 0;
          for (int c = 0; c < d; ++c) {
            real_t xhat = (xv.at(r, c) - m) * isd;
            real_t dxhat = up.at(r, c) * gv.at(0, c);
            dg.at(0, c) += up.at(r, c) * xhat;
            db.at(0, c) += up.at(r, c);
            sum_dxhat += dxhat;
            sum_dxhat_xhat += static_cast<double>(dxhat) * xhat;
          }
          for (int c = 0; c < d; ++c) {
            real_t xhat = (xv.at(r, c) - m) * isd;
            real_t dxhat = up.at(r, c) * gv.at(0, c);
            dx.at(r, c) = static_cast<real_t>(
                isd * (dxhat - sum_dxhat / d - xhat * sum_dxhat_xhat / d));
          }
        }
        t.accumulate(ia, dx);
        t.accumulate(ig, dg);
        t.accumulate(ib, db);
      };
    }
    return res;
  }

  // Mean label-smoothed cross-entropy over rows of logits (n,V) against
  // target ids; the smoothed target distribution is
  // q = (1-eps) * onehot + eps/V. Gradient is (softmax - q)/n.
  Val softmax_cross_entropy(Val logits, std::vector<int> targets, real_t smoothing = 0) {
    const Tensor& x = value(logits);
    require(static_cast<int>(targets.size()) == x.rows, "cross_entropy: target count mismatch");
    const int V = x.cols;
    double total = 0.0;
    for (int r = 0; r < x.rows; ++r) {
      require(targets[static_cast<size_t>(r)] >= 0 && targets[static_cast<size_t>(r)] < V,
              "cross_entropy: target id out of range");
      real_t m = x.at(r, 0);
      for (int c = 1; c < V; ++c) m = std::max(m, x.at(r, c));
      double s = 0, sum_logits = 0;
      for (int c = 0; c < V; ++c) {
        s += std::exp(static_cast<double>(x.at(r, c) - m));
        sum_logits += x.at(r, c);
      }
      double lse = m + std::log(s);
      // -sum_v q_v (x_v - lse) = lse - eps/V * sum(x) - (1-eps) * x_target
      total += lse - (smoothing / V) * sum_logits -
               (1.0 - smoothing) * x.at(r, targets[static_cast<size_t>(r)]);
    }
    total /= x.rows;
    return unary(Tensor::scalar(static_cast<real_t>(total)), logits,
                 [targets = std::move(targets), smoothing](Tape& t, const Tensor& up, int ia) {
      const Tensor& xv = t.nodes_[ia].value;
      const int V = xv.cols;
      Tensor da(xv.rows, xv.cols);
      for (int row = 0; row < xv.rows; ++row) {
        real_t m = xv.at(row, 0);
        for (int c = 1; c < V; ++c) m = std::max(m, xv.at(row, c));
        double s = 0;
        for (int c = 0; c < V; ++c) s += std::exp(static_cast<double>(xv.at(row, c) - m));
        for (int c = 0; c < V; ++c) {
          double p = std::exp(static_cast<double>(xv.at(row, c) - m)) / s;
          double q = smoothing / V + (c == targets[static_cast<size_t>(row)] ? 1.0 - smoothing : 0.0);
          da.at(row, c) = static_cast<real_t>((p - q) / xv.rows * up.data[0]);
        }
      }
      t.accumulate(ia, da);
    });
  }

  // Mean binary cross-entropy on logits; numerically stable formulation
  // max(x,0) - x*y + log(1+exp(-|x|)), gradient (sigmoid(x)-y)/n.
  Val bce_with_logits(Val logits, std::vector<real_t> labels) {
    const Tensor& x = value(logits);
    require(labels.size() == x.numel(), "bce: label count mismatch");
    double total = 0.0;
    for (size_t i = 0; i < x.data.size(); ++i) {
      double v = x.data[i], y = labels[i];
      total += std::max(v, 0.0) - v * y + std::log1p(std::exp(-std::abs(v)));
    }
    total /= static_cast<double>(x.numel());
    return unary(Tensor::scalar(static_cast<real_t>(total)), logits,
                 [labels = std::move(labels)](Tape& t, const Tensor& up, int ia) {
      const Tensor& xv = t.nodes_[static_cast<size_t>(ia)].value;
      Tensor da(xv.rows, xv.cols);
      for (size_t i = 0; i < xv.data.size(); ++i) {
        double v = xv.data[i];
        double sig = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        da.data[i] = static_cast<real_t>((sig - labels[i]) / static_cast<double>(xv.numel()) * up.data[0]);
      }
      t.accumulate(ia, da);
    });
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    std::function<void(Tape&, const Tensor&)> back;
  };

  std::vector<Node> nodes_;

  int check(Val v) const {
    require(v.valid() && static_cast<size_t>(v.id) < nodes_.size(), "invalid tape value");
    return v.id;
  }

  Val push(Tensor value, bool needs_grad, std::function<void(Tape&, const Tensor&)> back) {
    nodes_.push_back(Node{std::move(value), Tensor(), needs_grad, std::move(back)});
    return Val{static_cast<int>(nodes_.size()) - 1};
  }

  Tensor& grad_buf(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.numel() == 0) n.grad = Tensor(n.value.rows, n.value.cols);
    return n.grad;
  }

  void accumulate(int id, const Tensor& g) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.needs_grad) return;
    Tensor& buf = grad_buf(id);
    require(buf.same_shape(g), "gradient shape mismatch");
    for (size_t i = 0; i < buf.data.size(); ++i) buf.data[i] += g.data[i];
  }

  Val unary(Tensor out, Val a, std::function<void(Tape&, const Tensor&, int)> back) {
    int ia = check(a);
    bool ng = nodes_[ia].needs_grad;
    Val r = push(std::move(out), ng, {});
    if (ng) {
      nodes_[static_cast<size_t>(r.id)].back =
          [ia, back = std::move(back)](Tape& t, const Tensor& up) { back(t, up, ia); };
    }
    return r;
  }

  // variant whose backward also needs the result node (tanh, softmax, ...)
  Val unary_r(Tensor out, Val a, std::function<void(Tape&, const Tensor&, int, int)> back) {
    int ia = check(a);
    bool ng = nodes_[ia].needs_grad;
    Val r = push(std::move(out), ng, {});
    if (ng) {
      int rid = r.id;
      nodes_[static_cast<size_t>(rid)].back =
          [ia, rid, back = std::move(back)](Tape& t, const Tensor& up) { back(t, up, ia, rid); };
    }
    return r;
  }

  Val binary(Tensor out, Val a, Val b, std::function<void(Tape&, const Tensor&, int, int)> back) {
    int ia = check(a), ib = check(b);
    bool ng = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
    Val r = push(std::move(out), ng, {});
    if (ng) {
      nodes_[static_cast<size_t>(r.id)].back =
          [ia, ib, back = std::move(back)](Tape& t, const Tensor& up) { back(t, up, ia, ib); };
    }
    return r;
  }

  static void matmul_into(Tensor& out, const Tensor& a, const Tensor& b, bool ta, bool tb) {
    const int n = out.rows, m = out.cols;
    const int k = ta ? a.rows : a.cols;
    std::fill(out.data.begin(), out.data.end(), real_t(0));
    for (int i = 0; i < n; ++i) {
      for (int kk = 0; kk < k; ++kk) {
        real_t av = ta ? a.at(kk, i) : a.at(i, kk);
        if (av == 0) continue;
        const real_t* brow;
        if (!tb) {
          brow = &b.data[static_cast<size_t>(kk) * b.cols];
          real_t* orow = &out.data[static_cast<size_t>(i) * m];
          for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
        } else {
          real_t* orow = &out.data[static_cast<size_t>(i) * m];
          for (int j = 0; j < m; ++j) orow[j] += av * b.at(j, kk);
        }
      }
    }
  }
};

using Val = Tape::Val;

// Central-difference gradient check: perturbs each selected coordinate of
// each parameter tensor, re-evaluates f, and compares with the analytic
// gradient. Relative error uses max(|analytic|, |numeric|, 1e-8) in the
// denominator. Parameters are restored before returning.
inline double finite_diff_check(const std::function<double()>& f,
                                const std::vector<Tensor*>& params,
                                const std::vector<const Tensor*>& analytic, double eps,
                                int sample_per_tensor = -1, uint64_t seed = 12345) {
  require(params.size() == analytic.size(), "finite_diff_check: size mismatch");
  RandomSource rng(seed);
  double max_rel = 0.0;
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p];
    require(t.same_shape(*analytic[p]), "finite_diff_check: grad shape mismatch");
    std::vector<size_t> coords;
    if (sample_per_tensor < 0 || static_cast<size_t>(sample_per_tensor) >= t.numel()) {
      coords.resize(t.numel());
      for (size_t i = 0; i < t.numel(); ++i) coords[i] = i;
    } else {
      for (int i = 0; i < sample_per_tensor; ++i) coords.push_back(rng.uniform_index(t.numel()));
    }
    for (size_t i : coords) {
      real_t orig = t.data[i];
      t.data[i] = orig + static_cast<real_t>(eps);
      double fp = f();
      t.data[i] = orig - static_cast<real_t>(eps);
      double fm = f();
      t.data[i] = orig;
      double numeric = (fp - fm) / (2 * eps);
      double a = analytic[p]->data[i];
      double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace protoseq
