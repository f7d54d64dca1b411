#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "groundcheck/signals.hpp"
#include "helpers.hpp"

using namespace groundcheck;
using doctest::Approx;

TEST_CASE("hidden angle at the canonical cosines") {
  CHECK(hidden_angle(1.0) == Approx(0.0));
  CHECK(hidden_angle(0.0) == Approx(0.5));
  CHECK(hidden_angle(-1.0) == Approx(1.0));
  CHECK(hidden_angle(1.0 + 1e-9) == Approx(0.0));
}

TEST_CASE("hidden angle from raw vectors is scale invariant") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> c(0.01, 100.0);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> a(16), b(16);
    for (auto& v : a) v = n(rng);
    for (auto& v : b) v = n(rng);
    const double base = hidden_angle(cosine_similarity(a, b));
    const double k = c(rng);
    for (auto& v : a) v *= k;
    CHECK(hidden_angle(cosine_similarity(a, b)) == Approx(base).epsilon(1e-12));
  }
  std::vector<double> zero(3, 0.0), one = {1, 2, 3};
  CHECK_THROWS(cosine_similarity(zero, one));
}

TEST_CASE("quantile scale examples") {
  std::vector<double> v;
  for (int i = 0; i <= 10; ++i) v.push_back(i / 10.0);
  auto s = quantile_scale(v);
  // q10 = 0.1, q90 = 0.9 by linear interpolation
  CHECK(s[5] == Approx((0.5 - 0.1) / 0.8));
  CHECK(s[0] == 0.0);
  CHECK(s[10] == 1.0);
  for (double x : quantile_scale(std::vector<double>{0.3, 0.3, 0.3})) CHECK(x == 0.5);
}

TEST_CASE("attention usage examples") {
  std::vector<double> a = {0.1, 0.5, 0.2}, same = a;
  for (double x : attention_usage(a, same)) CHECK(x == 0.0);
  std::vector<double> c1(4, 0.7), c2(4, 0.2);
  for (double x : attention_usage(c1, c2)) CHECK(x == 0.0);
  std::vector<double> up, down;
  for (int i = 0; i <= 10; ++i) {
    up.push_back(i / 10.0);
    down.push_back(1.0 - i / 10.0);
  }
  CHECK(attention_usage(up, down)[0] == Approx(-1.0));
  std::vector<double> shorter = {0.1};
  CHECK_THROWS(attention_usage(up, shorter));
}

TEST_CASE("attention usage is invariant to a common positive scale") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto mode : {AttentionMode::ScaleThenSubtract, AttentionMode::SubtractThenScale}) {
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> v(9), n(9);
      for (auto& x : v) x = u(rng);
      for (auto& x : n) x = u(rng);
      auto base = attention_usage(v, n, mode);
      const double k = 0.001 + 50 * u(rng);
      for (auto& x : v) x *= k;
      for (auto& x : n) x *= k;
      auto scaled = attention_usage(v, n, mode);
      for (std::size_t i = 0; i < base.size(); ++i) CHECK(scaled[i] == Approx(base[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("counterfactual examples") {
  auto n = counterfactual_signals(0.5, 0.5, 0.5);
  CHECK(n.s_log == 0.0);
  CHECK(n.s_logit == 0.0);
  CHECK(n.s_prob == 0.5);
  CHECK(n.delta_clean == 0.0);
  CHECK(n.delta_mis == 0.0);

  auto w = counterfactual_signals(0.8, 0.1, 0.2);
  CHECK(w.p_cf == 0.2);
  CHECK(w.s_log == Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(w.s_log == Approx(1.386294).epsilon(1e-6));
  CHECK(w.delta_clean == Approx(0.7));
  CHECK(w.delta_mis == Approx(0.6));
  CHECK(w.s_logit == Approx(2.0 * std::log(4.0)));

  auto neg = counterfactual_signals(0.1, 0.4, 0.2);
  CHECK(neg.p_cf == 0.4);
  CHECK(neg.s_log == Approx(std::log(0.25)));
  CHECK(neg.s_log < 0.0);
}

TEST_CASE("counterfactual properties on random probabilities") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.001, 0.999);
  for (int rep = 0; rep < 2000; ++rep) {
    const double pv = u(rng), pn = u(rng), pm = u(rng);
    auto c = counterfactual_signals(pv, pn, pm);
    // max rule
    const double a = std::log(pv) - std::log(pn), b = std::log(pv) - std::log(pm);
    CHECK(c.s_log <= std::min(a, b) + 1e-12);
    CHECK(c.s_log == Approx(pn >= pm ? a : b).epsilon(1e-12));
    CHECK(c.s_prob > 0.0);
    CHECK(c.s_prob < 1.0);
    CHECK(std::abs(c.s_prob - sigmoid(c.s_log)) <= 1e-12);
    if (c.s_log != 0.0) CHECK((c.s_log > 0) == (c.s_logit > 0));
    // monotone in p_vid
    const double pv2 = std::min(pv + 0.5 * (0.999 - pv) + 1e-6, 0.9995);
    auto d = counterfactual_signals(pv2, pn, pm);
    CHECK(d.s_log > c.s_log);
    CHECK(d.s_logit > c.s_logit);
    CHECK(d.s_prob > c.s_prob);
    CHECK(d.delta_clean > c.delta_clean);
    CHECK(d.delta_mis > c.delta_mis);
  }
  CHECK(counterfactual_signals(0.3, 0.3, 0.1).s_prob == 0.5);
}

TEST_CASE("baseline signals") {
  auto b = baseline_signals(gc_test::token(0.5, 0.5, 0.5, 1.0, 0.3, 0.3, 0.7));
  CHECK(b.conf == 0.5);
  CHECK(b.ppl == Approx(2.0));
  CHECK(b.ent == 0.7);
  CHECK(baseline_signals(gc_test::token(1.0 - 1e-12, 0.5, 0.5)).ppl == Approx(1.0));
  CHECK(baseline_signals(gc_test::token(0.25, 0.5, 0.5)).ppl == Approx(4.0));
  CHECK(baseline_signals(gc_test::token(1.0 - 1e-12, 0.5, 0.5)).ppl >= 1.0 / (1.0 - 1e-12) - 1e-15);
}

TEST_CASE("signal matrix of a neutral token") {
  auto t = gc_test::trace("n", {gc_test::token(0.5, 0.5, 0.5, 1.0, 0.3, 0.3)});
  auto m = signal_matrix(t);
  REQUIRE(m.size() == 1);
  auto g = m[0].grounding();
  std::vector<double> expect = {0, 0, 0, 0, 0.5, 0, 0};
  REQUIRE(g.size() == expect.size());
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == Approx(expect[i]));
}

TEST_CASE("signal matrix with raw probabilities appends exactly the raw pair") {
  auto t = gc_test::trace("w", {gc_test::token(0.8, 0.1, 0.2, 0.0, 0.3, 0.3), gc_test::token(0.4, 0.3, 0.2, 0.9, 0.5, 0.1)});
  auto off = signal_matrix(t, {false});
  auto on = signal_matrix(t, {true});
  for (std::size_t i = 0; i < off.size(); ++i) {
    auto a = off[i].grounding(), b = on[i].grounding();
    REQUIRE(b.size() == a.size() + 2);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
    CHECK(b[a.size()] == t.tokens[i].p_vid);
    CHECK(b[a.size() + 1] == t.tokens[i].p_null);
  }
  // worked token: cos 0, equal attention
  auto single = signal_matrix(gc_test::trace("s", {gc_test::token(0.8, 0.1, 0.2, 0.0, 0.3, 0.3)}));
  CHECK(single[0].s_hid == Approx(0.5));
  CHECK(single[0].s_attn == 0.0);
  CHECK(single[0].s_log == Approx(std::log(4.0)));
  CHECK(grounding_feature_names(true).size() == 9);
  CHECK(grounding_feature_names(false)[0] == "s_hid");
  CHECK(single[0].get("s_log").value() == single[0].s_log);
  CHECK(!single[0].get("p_vid_raw").has_value());
}
