#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "favi/adam.hpp"
#include "favi/checkpoint.hpp"
#include "favi/finite_diff.hpp"
#include "favi/nets.hpp"
#include "favi/param_graph.hpp"
#include "favi/rng.hpp"
#include "favi/tape.hpp"

using namespace favi;

TEST_CASE("tensor shape and data invariants") {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.size() == 6);
  CHECK(t.at2(1, 2) == 6);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0}), std::invalid_argument);
  CHECK(Tensor::scalar(3.5).value() == 3.5);
  Tensor bad = Tensor::zeros({2});
  bad[0] = std::nan("");
  CHECK_FALSE(bad.all_finite());
}

TEST_CASE("identity linear layer reproduces its input") {
  ParamGraph pg;
  pg.add("w", Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  pg.add("b", Tensor::zeros({3}));
  ad::Tape t;
  ad::Value y = t.affine(t.param(pg, "w"), t.constant(Tensor::row({1, 2, 3})), t.param(pg, "b"));
  CHECK(y.tensor().data == std::vector<double>{1, 2, 3});
}

TEST_CASE("scalar square forward and gradient") {
  ParamGraph pg;
  pg.add("x", Tensor::scalar(3.0));
  ad::Tape t;
  ad::Value y = t.square(t.param(pg, "x"));
  CHECK(y.scalar() == 9.0);
  t.backward(y);
  t.grads_into(pg);
  CHECK(pg.grad("x")[0] == doctest::Approx(6.0));
}

TEST_CASE("two-layer relu net with zero weights returns last bias") {
  ParamGraph pg;
  Rng rng(1);
  pg.add("w0", Tensor::zeros({4, 3}));
  pg.add("b0", Tensor::zeros({4}));
  pg.add("w1", Tensor::zeros({2, 4}));
  pg.add("b1", Tensor({2}, {0.7, -0.2}));
  for (int trial = 0; trial < 3; ++trial) {
    Tensor x = Tensor::zeros({3});
    for (double& v : x.data) v = rng.uniform(-5, 5);
    ad::Tape t;
    ad::Value h = t.relu(t.affine(t.param(pg, "w0"), t.constant(x), t.param(pg, "b0")));
    ad::Value y = t.affine(t.param(pg, "w1"), h, t.param(pg, "b1"));
    CHECK(y.tensor()[0] == 0.7);
    CHECK(y.tensor()[1] == -0.2);
  }
}

TEST_CASE("linear layer weight gradient has outer-product structure") {
  ParamGraph pg;
  Rng rng(7);
  pg.add("w", glorot_uniform(2, 2, rng, {2, 2}));
  pg.add("b", Tensor::zeros({2}));
  ad::Tape t;
  ad::Value y = t.affine(t.param(pg, "w"), t.constant(Tensor::row({1, 0})), t.param(pg, "b"));
  Tensor og({2}, {0.3, -1.1});
  t.backward(y, og);
  t.grads_into(pg);
  const Tensor& gw = pg.grad("w");
  CHECK(gw.at2(0, 0) == doctest::Approx(0.3));
  CHECK(gw.at2(1, 0) == doctest::Approx(-1.1));
  CHECK(gw.at2(0, 1) == 0.0);
  CHECK(gw.at2(1, 1) == 0.0);
}

TEST_CASE("backward before forward is an error") {
  ad::Tape t;
  ad::Value v;
  CHECK_THROWS(t.backward(v));
  ParamGraph pg;
  CHECK_THROWS_AS(t.grads_into(pg), std::logic_error);
}

TEST_CASE("two-layer tanh net matches central finite differences") {
  ParamGraph pg;
  Rng rng(42);
  Mlp net(pg, "net", {3, 8, 1}, Act::kTanh, rng);
  Tensor x = Tensor::zeros({3});
  for (double& v : x.data) v = rng.normal();
  double err = finite_diff_check(
      pg, [&](ad::Tape& t, const ParamGraph& p) { return t.sum(net.apply(t, p, t.constant(x))); },
      1e-5);
  CHECK(err < 1e-5);
}

TEST_CASE("finite differences on x squared") {
  ParamGraph pg;
  pg.add("x", Tensor::scalar(3.0));
  double err = finite_diff_check(
      pg, [](ad::Tape& t, const ParamGraph& p) { return t.square(t.param(p, "x")); }, 1e-5);
  CHECK(err < 1e-8);
}

TEST_CASE("softmax logsumexp and mixture primitives differentiate correctly") {
  ParamGraph pg;
  Rng rng(3);
  pg.add("logits", glorot_uniform(6, 6, rng, {6}));
  Tensor shift = Tensor::zeros({6});
  for (double& v : shift.data) v = rng.normal();
  double err = finite_diff_check(
      pg,
      [&](ad::Tape& t, const ParamGraph& p) {
        ad::Value l = t.param(p, "logits");
        ad::Value a = t.logsumexp(t.add(l, t.constant(shift)));
        ad::Value b = t.logsumexp(l);
        ad::Value sm = t.sum(t.mul(t.softmax(l), t.constant(shift)));
        return t.add(t.sub(a, b), sm);
      },
      1e-6);
  CHECK(err < 1e-7);
}

TEST_CASE("logsumexp survives large logits") {
  ad::Tape t;
  Tensor big({3}, {1000.0, 999.0, -2000.0});
  double v = t.logsumexp(t.constant(big)).scalar();
  CHECK(v == doctest::Approx(1000.0 + std::log(1.0 + std::exp(-1.0))));
}

TEST_CASE("conv1d causal dilation matches direct computation and finite differences") {
  ParamGraph pg;
  Rng rng(11);
  pg.add("k", glorot_uniform(2, 4, rng, {2, 2, 2}));
  pg.add("kb", Tensor({2}, {0.1, -0.3}));
  Tensor x = Tensor::zeros({2, 7});
  for (double& v : x.data) v = rng.normal();

  ad::Tape t;
  ad::Value y = t.conv1d(t.param(pg, "k"), t.param(pg, "k"), t.param(pg, "kb"), 1);
  (void)y;  // same tensor as kernel and input is legal; just must not crash

  // direct check against the definition out[o,t] = b_o + sum_{ci,k} K[o,ci,k] x[ci,t-k*d]
  ad::Tape t2;
  ad::Value out = t2.conv1d(t2.constant(x), t2.param(pg, "k"), t2.param(pg, "kb"), 2);
  const Tensor& kt = pg.value("k");
  const Tensor& bt = pg.value("kb");
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t tt = 0; tt < 7; ++tt) {
      double expect = bt[o];
      for (std::size_t ci = 0; ci < 2; ++ci)
        for (std::size_t k = 0; k < 2; ++k) {
          long src = static_cast<long>(tt) - static_cast<long>(k * 2);
          if (src >= 0) expect += kt.data[(o * 2 + ci) * 2 + k] * x.at2(ci, static_cast<std::size_t>(src));
        }
      CHECK(out.tensor().at2(o, tt) == doctest::Approx(expect));
    }

  double err = finite_diff_check(
      pg,
      [&](ad::Tape& tp, const ParamGraph& p) {
        ad::Value c = tp.conv1d(tp.constant(x), tp.param(p, "k"), tp.param(p, "kb"), 2);
        return tp.sum(tp.tanh(c));
      },
      1e-6);
  CHECK(err < 1e-7);
}

TEST_CASE("gather concat slice row col row_mean gradients") {
  ParamGraph pg;
  Rng rng(5);
  pg.add("a", glorot_uniform(4, 4, rng, {6}));
  pg.add("m", glorot_uniform(3, 4, rng, {3, 4}));
  double err = finite_diff_check(
      pg,
      [&](ad::Tape& t, const ParamGraph& p) {
        ad::Value a = t.param(p, "a");
        ad::Value m = t.param(p, "m");
        ad::Value g = t.gather(a, {0, 0, 5, 2});
        ad::Value s = t.slice(a, 1, 3);
        ad::Value cat = t.concat(g, s);
        ad::Value r = t.row(m, 1);
        ad::Value c = t.col(m, 2);
        ad::Value rm = t.row_mean(m);
        return t.add(t.sum(t.square(cat)),
                     t.add(t.dot(r, t.constant(Tensor::row({1, -1, 2, 0.5}))),
                           t.add(t.sum(c), t.sum(t.tanh(rm)))));
      },
      1e-6);
  CHECK(err < 1e-7);
}

TEST_CASE("non-finite intermediate values are detected") {
  ad::Tape t;
  ad::Value x = t.constant(Tensor::scalar(1000.0));
  CHECK_THROWS_AS(t.exp(x), std::runtime_error);
}

TEST_CASE("forward is deterministic given parameters and input") {
  ParamGraph pg;
  Rng rng(9);
  Mlp net(pg, "n", {4, 16, 16, 2}, Act::kRelu, rng);
  Tensor x = Tensor::row({0.3, -0.5, 1.2, 0.0});
  ad::Tape t1, t2;
  Tensor y1 = net.apply(t1, pg, t1.constant(x)).tensor();
  Tensor y2 = net.apply(t2, pg, t2.constant(x)).tensor();
  CHECK(y1.data == y2.data);
}

TEST_CASE("adam zero gradient is a no-op on parameters") {
  ParamGraph pg;
  Rng rng(2);
  pg.add("p", glorot_uniform(4, 4, rng, {4}));
  Tensor before = pg.value("p");
  Adam adam;
  for (int i = 0; i < 5; ++i) {
    pg.zero_grad();
    adam.step(pg);
  }
  CHECK(pg.value("p").data == before.data);
  CHECK(adam.step_count() == 5);
}

TEST_CASE("adam first step from fresh state") {
  // at t=1 bias corrections cancel: update = -lr * g / (|g| + eps)
  ParamGraph pg;
  pg.add("p", Tensor({2}, {1.0, -2.0}));
  pg.grad("p")[0] = 0.5;
  pg.grad("p")[1] = -3.0;
  AdamConfig cfg;
  Adam adam(cfg);
  adam.step(pg);
  CHECK(pg.value("p")[0] == doctest::Approx(1.0 - cfg.lr * 0.5 / (0.5 + cfg.eps)).epsilon(1e-12));
  CHECK(pg.value("p")[1] == doctest::Approx(-2.0 + cfg.lr * 3.0 / (3.0 + cfg.eps)).epsilon(1e-12));
}

TEST_CASE("adam constant gradient update magnitude approaches the step size") {
  // oracle: iterate the recurrences directly
  AdamConfig cfg;
  double m = 0, v = 0, g = 0.37;
  double update = 0;
  for (int t = 1; t <= 5000; ++t) {
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
    double mh = m / (1 - std::pow(cfg.beta1, t));
    double vh = v / (1 - std::pow(cfg.beta2, t));
    update = cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
  }
  CHECK(std::abs(update) == doctest::Approx(cfg.lr).epsilon(1e-6));

  ParamGraph pg;
  pg.add("p", Tensor::scalar(0.0));
  Adam adam(cfg);
  double prev = 0.0, last_step = 0.0;
  for (int t = 1; t <= 5000; ++t) {
    pg.zero_grad();
    pg.grad("p")[0] = g;
    adam.step(pg);
    last_step = pg.value("p")[0] - prev;
    prev = pg.value("p")[0];
  }
  CHECK(std::abs(last_step) == doctest::Approx(cfg.lr).epsilon(1e-6));
}

TEST_CASE("adam rejects non-finite gradients") {
  ParamGraph pg;
  pg.add("p", Tensor::scalar(0.0));
  pg.grad("p")[0] = std::nan("");
  Adam adam;
  CHECK_THROWS_AS(adam.step(pg), std::runtime_error);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  ParamGraph pg;
  Rng rng(31);
  Mlp net(pg, "net", {3, 5, 2}, Act::kTanh, rng);
  pg.value("net.w0")[0] = 0.1 + 0.2;  // deliberately non-representable sum
  std::string path = (std::filesystem::temp_directory_path() / "favi_ckpt_test.bin").string();
  save_checkpoint(path, "mlp widths=3,5,2 act=tanh", pg);
  Checkpoint ck = load_checkpoint(path);
  CHECK(ck.descriptor == "mlp widths=3,5,2 act=tanh");
  REQUIRE(ck.params.names() == pg.names());
  for (const auto& name : pg.names()) {
    const Tensor& a = pg.value(name);
    const Tensor& b = ck.params.value(name);
    REQUIRE(a.shape == b.shape);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(std::memcmp(&a.data[i], &b.data[i], sizeof(double)) == 0);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("parameter reuse within one tape accumulates gradients") {
  ParamGraph pg;
  pg.add("x", Tensor::scalar(2.0));
  ad::Tape t;
  ad::Value x1 = t.param(pg, "x");
  ad::Value x2 = t.param(pg, "x");
  CHECK(x1.id == x2.id);
  ad::Value y = t.mul(x1, x2);  // x^2
  t.backward(y);
  pg.zero_grad();
  t.grads_into(pg);
  CHECK(pg.grad("x")[0] == doctest::Approx(4.0));
}
