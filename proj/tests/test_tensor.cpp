#include <catch2/catch_amalgamated.hpp>

#include "protoseq/tape.hpp"

using namespace protoseq;

namespace {

// Evaluates loss = build(tape, bound params), returns finite-difference max
// relative error against the analytic gradients.
double grad_check(std::vector<Tensor>& params,
                  const std::function<Val(Tape&, const std::vector<Val>&)>& build,
                  double eps = 1e-3) {
  auto eval = [&](std::vector<Tensor>* grads) {
    Tape tape;
    std::vector<Val> vals;
    vals.reserve(params.size());
    for (const Tensor& p : params) vals.push_back(tape.param(p));
    Val loss = build(tape, vals);
    double out = tape.value(loss).data[0];
    if (grads) {
      tape.backward(loss);
      for (Val v : vals) grads->push_back(tape.grad(v));
    }
    return out;
  };
  std::vector<Tensor> analytic;
  eval(&analytic);
  std::vector<Tensor*> ptrs;
  std::vector<const Tensor*> gptrs;
  for (size_t i = 0; i < params.size(); ++i) {
    ptrs.push_back(&params[i]);
    gptrs.push_back(&analytic[i]);
  }
  return finite_diff_check([&] { return eval(nullptr); }, ptrs, gptrs, eps);
}

}  // namespace

TEST_CASE("dot-product loss has exact bilinear gradient", "[tensor]") {
  RandomSource rng(1);
  Tensor x = Tensor::randn(4, 1, rng), y = Tensor::randn(4, 1, rng);
  Tape tape;
  Val vx = tape.param(x), vy = tape.param(y);
  Val loss = tape.sum(tape.mul(vx, vy));
  tape.backward(loss);
  Tensor gx = tape.grad(vx), gy = tape.grad(vy);
  for (int i = 0; i < 4; ++i) {
    REQUIRE(gx.data[i] == y.data[i]);
    REQUIRE(gy.data[i] == x.data[i]);
  }
}

TEST_CASE("parameter used twice accumulates both path gradients", "[tensor]") {
  RandomSource rng(2);
  Tensor x = Tensor::randn(5, 1, rng);
  Tape tape;
  Val vx = tape.param(x);
  Val loss = tape.sum(tape.mul(vx, vx));  // f = x.x, df/dx = 2x
  tape.backward(loss);
  Tensor g = tape.grad(vx);
  for (int i = 0; i < 5; ++i) REQUIRE(g.data[i] == Catch::Approx(2.0 * x.data[i]).epsilon(1e-14));
}

TEST_CASE("fused softmax cross-entropy gradient is probabilities minus one-hot", "[tensor]") {
  RandomSource rng(3);
  Tensor logits = Tensor::randn(2, 5, rng);
  Tape tape;
  Val vl = tape.param(logits);
  Val loss = tape.softmax_cross_entropy(vl, {1, 3}, 0.0);
  tape.backward(loss);
  Tensor g = tape.grad(vl);
  Tape t2;
  Tensor probs = t2.value(t2.row_softmax(t2.constant(logits)));
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 5; ++c) {
      double onehot = (r == 0 && c == 1) || (r == 1 && c == 3) ? 1.0 : 0.0;
      REQUIRE(g.at(r, c) == Catch::Approx((probs.at(r, c) - onehot) / 2.0).margin(1e-12));
    }
  }
}

TEST_CASE("finite differences on linear and quadratic closed forms", "[tensor]") {
  Tensor theta(3, 1, {0.5, -1.25, 2.0});
  // linear: f = 3*t0 - 2*t1 + 0.5*t2, grad constant
  {
    Tensor analytic(3, 1, {3.0, -2.0, 0.5});
    auto f = [&] { return 3.0 * theta.data[0] - 2.0 * theta.data[1] + 0.5 * theta.data[2]; };
    REQUIRE(finite_diff_check(f, {&theta}, {&analytic}, 1e-3) < 1e-9);
  }
  // quadratic: f = theta^T theta, grad 2*theta
  {
    Tensor analytic = theta;
    for (auto& v : analytic.data) v *= 2;
    auto f = [&] { return dot(theta, theta); };
    REQUIRE(finite_diff_check(f, {&theta}, {&analytic}, 1e-4) < 1e-7);
  }
}

TEST_CASE("two-layer perceptron passes the gradient check", "[tensor]") {
  RandomSource rng(4);
  std::vector<Tensor> params = {
      Tensor::xavier(3, 4, rng),  // W1
      Tensor(1, 4),               // b1
      Tensor::xavier(4, 1, rng),  // W2
      Tensor(1, 1),               // b2
  };
  Tensor input = Tensor::randn(2, 3, rng);
  double err = grad_check(params, [&](Tape& t, const std::vector<Val>& p) {
    Val h = t.tanh_act(t.add_bias(t.matmul(t.constant(input), p[0]), p[1]));
    Val out = t.add_bias(t.matmul(h, p[2]), p[3]);
    return t.mean(out);
  });
  REQUIRE(err < 1e-4);
}

TEST_CASE("every primitive passes the finite-difference check", "[tensor]") {
  RandomSource rng(5);
  Tensor mix = Tensor::randn(3, 4, rng);

  SECTION("matmul") {
    std::vector<Tensor> p = {Tensor::randn(3, 5, rng), Tensor::randn(5, 4, rng)};
    double err = grad_check(p, [&](Tape& t, const std::vector<Val>& v) {
      return t.sum(t.mul(t.matmul(v[0], v[1]), t.constant(mix)));
    });
    REQUIRE(err < 1e-4);
  }
  SECTION("row softmax with additive mask") {
    Tensor mask(3, 4);
    mask.at(0, 3) = real_t(-1e30);  // masked slot gets probability 0
    std::vector<Tensor> p = {Tensor::randn(3, 4, rng)};
    double err = grad_check(p, [&](Tape& t, const std::vector<Val>& v) {
      Val sm = t.row_softmax(t.add(v[0], t.constant(mask)));
      return t.sum(t.mul(sm, t.constant(mix)));
    });
    REQUIRE(err < 1e-4);
    Tape t;
    Tensor sm = t.value(t.row_softmax(t.add(t.constant(p[0]), t.constant(mask))));
    REQUIRE(sm.at(0, 3) == 0.0);
  }
  SECTION("layer norm") {
    std::vector<Tensor> p = {Tensor::randn(3, 4, rng), Tensor::full(1, 4, 1.0), Tensor(1, 4)};
    p[1].at(0, 2) = real_t(1.5);
    p[2].at(0, 1) = real_t(-0.25);
    double err = grad_check(p, [&](Tape& t, const std::vector<Val>& v) {
      return t.sum(t.mul(t.layer_norm(v[0], v[1], v[2]), t.constant(mix)));
    });
    REQUIRE(err < 1e-4);
  }
  SECTION("embedding lookup and scatter") {
    std::vector<Tensor> p = {Tensor::randn(6, 4, rng)};
    std::vector<int> ids = {1, 4, 1};  // repeated id exercises scatter-add
    double err = grad_check(p, [&](Tape& t, const std::vector<Val>& v) {
      return t.sum(t.mul(t.embedding_rows(v[0], ids), t.constant(mix)));
    });
    REQUIRE(err < 1e-4);
  }
  SECTION("concatenation and slicing") {
    Tensor mix2 = Tensor::randn(3, 4, rng);
    Tensor mix3 = Tensor::randn(6, 2, rng);
    std::vector<Tensor> p = {Tensor::randn(3, 2, rng), Tensor::randn(3, 2, rng)};
    double err = grad_check(p, [&](Tape& t, const std::vector<Val>& v) {
      Val cat = t.concat_cols(v[0], v[1]);                               // (3,4)
      Val stack = t.concat_rows(v[0], v[1]);                             // (6,2)
      Val sliced = t.concat_cols(t.slice_cols(cat, 1, 3), t.slice_cols(cat, 0, 1));  // (3,3)
      Val a = t.sum(t.mul(cat, t.constant(mix2)));
      Val b = t.sum(t.mul(stack, t.constant(mix3)));
      Val c = t.sum(t.slice_rows(sliced, 1, 3));
      return t.add(t.add(a, b), c);
    });
    REQUIRE(err < 1e-4);
  }
  SECTION("logistic log exp sqrt div") {
    std::vector<Tensor> p = {Tensor::full(2, 3, 0.7), Tensor::full(2, 3, 1.3)};
    RandomSource r2(9);
    for (auto& v : p[0].data) v += 0.3 * r2.uniform();
    for (auto& v : p[1].data) v += 0.3 * r2.uniform();
    double err = grad_check(p, [&](Tape& t, const std::vector<Val>& v) {
      Val a = t.logistic(v[0]);
      Val b = t.log_op(v[1]);
      Val c = t.exp_op(t.scale(v[0], real_t(0.5)));
      Val d = t.sqrt_op(v[1]);
      Val e = t.div(a, v[1]);
      return t.mean(t.add(t.add(t.mul(a, b), t.mul(c, d)), e));
    }, 1e-4);
    REQUIRE(err < 1e-4);
  }
  SECTION("logsumexp and gather") {
    std::vector<Tensor> p = {Tensor::randn(5, 1, rng)};
    double err = grad_check(p, [&](Tape& t, const std::vector<Val>& v) {
      Val g = t.gather_rows(v[0], {0, 2, 4});
      return t.add(t.logsumexp(v[0]), t.sum(g));
    });
    REQUIRE(err < 1e-4);
  }
  SECTION("bce with logits") {
    std::vector<Tensor> p = {Tensor::randn(4, 1, rng)};
    double err = grad_check(p, [&](Tape& t, const std::vector<Val>& v) {
      return t.bce_with_logits(v[0], {1, 0, 1, 0});
    });
    REQUIRE(err < 1e-4);
  }
  SECTION("label smoothed cross entropy") {
    std::vector<Tensor> p = {Tensor::randn(3, 6, rng)};
    double err = grad_check(p, [&](Tape& t, const std::vector<Val>& v) {
      return t.softmax_cross_entropy(v[0], {2, 0, 5}, real_t(0.1));
    });
    REQUIRE(err < 1e-4);
  }
  SECTION("scale_by mean_rows add_bias transpose") {
    std::vector<Tensor> p = {Tensor::randn(3, 4, rng), Tensor::scalar(0.8), Tensor::randn(1, 4, rng)};
    double err = grad_check(p, [&](Tape& t, const std::vector<Val>& v) {
      Val s = t.scale_by(v[0], v[1]);
      Val m = t.mean_rows(t.add_bias(s, v[2]));
      return t.sum(t.mul(t.transpose(m), t.constant(Tensor::full(4, 1, 0.5))));
    });
    REQUIRE(err < 1e-4);
  }
}

TEST_CASE("backward is deterministic for a fixed tape", "[tensor]") {
  RandomSource rng(6);
  Tensor a = Tensor::randn(3, 3, rng), b = Tensor::randn(3, 3, rng);
  auto run = [&] {
    Tape t;
    Val va = t.param(a), vb = t.param(b);
    Val loss = t.mean(t.mul(t.row_softmax(t.matmul(va, vb)), t.constant(b)));
    t.backward(loss);
    return std::pair{t.grad(va), t.grad(vb)};
  };
  auto [g1a, g1b] = run();
  auto [g2a, g2b] = run();
  REQUIRE(g1a.data == g2a.data);
  REQUIRE(g1b.data == g2b.data);
}

TEST_CASE("constants receive no gradient", "[tensor]") {
  Tape t;
  Val c = t.constant(Tensor::full(2, 2, 3.0));
  Val p = t.param(Tensor::full(2, 2, 1.0));
  Val loss = t.sum(t.mul(c, p));
  t.backward(loss);
  REQUIRE_FALSE(t.needs_grad(c));
  Tensor gc = t.grad(c);
  for (real_t v : gc.data) REQUIRE(v == 0.0);
}

TEST_CASE("backward rejects non-scalar loss", "[tensor]") {
  Tape t;
  Val p = t.param(Tensor::full(2, 2, 1.0));
  REQUIRE_THROWS(t.backward(p));
}

TEST_CASE("shape mismatches are rejected", "[tensor]") {
  Tape t;
  Val a = t.constant(Tensor(2, 3));
  Val b = t.constant(Tensor(3, 2));
  REQUIRE_THROWS(t.add(a, b));
  REQUIRE_THROWS(t.matmul(a, a));
}
