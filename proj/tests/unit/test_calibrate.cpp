#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "groundcheck/calibrate.hpp"
#include "groundcheck/metrics.hpp"
#include "groundcheck/synthetic.hpp"
#include "helpers.hpp"

using namespace groundcheck;
using doctest::Approx;

namespace {

// Least-squares monotone fit by enumerating every split into contiguous
// blocks; block values are block means and must be nondecreasing.
std::vector<double> brute_isotonic(const std::vector<double>& y) {
  const std::size_t n = y.size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_fit;
  for (std::uint32_t cuts = 0; cuts < (1u << (n - 1)); ++cuts) {
    std::vector<double> fit(n);
    std::size_t start = 0;
    double prev = -std::numeric_limits<double>::infinity();
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      const bool end = i == n - 1 || (cuts >> i) & 1u;
      if (!end) continue;
      double m = 0;
      for (std::size_t k = start; k <= i; ++k) m += y[k];
      m /= double(i - start + 1);
      if (m < prev - 1e-12) ok = false;
      for (std::size_t k = start; k <= i; ++k) fit[k] = m;
      prev = m;
      start = i + 1;
    }
    if (!ok) continue;
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) sse += (fit[i] - y[i]) * (fit[i] - y[i]);
    if (sse < best - 1e-12) {
      best = sse;
      best_fit = fit;
    }
  }
  return best_fit;
}

double log_loss(const std::vector<double>& w, double b, const LogisticSample& s) {
  double total = 0;
  for (std::size_t i = 0; i < s.y.size(); ++i) {
    double z = b;
    for (std::size_t k = 0; k < w.size(); ++k) z += w[k] * s.x[i][k];
    const double p = 1.0 / (1.0 + std::exp(-z));
    total -= s.y[i] ? std::log(p) : std::log(1 - p);
  }
  return total / double(s.y.size());
}

}  // namespace

TEST_CASE("logistic: separable 1-D data") {
  FeatureRows x;
  std::vector<int> y;
  for (int i = 0; i < 50; ++i) {
    x.push_back({-1.0});
    y.push_back(0);
    x.push_back({1.0});
    y.push_back(1);
  }
  auto fit = fit_logistic(x, y, {1e-6, 100, 1e-8});
  CHECK(fit.weights[0] > 0.0);
  std::vector<double> p;
  for (auto& row : x) p.push_back(fit.predict_proba(row));
  CHECK(accuracy_at(p, y) == 1.0);
}

TEST_CASE("logistic: constant feature gets no weight") {
  std::mt19937_64 rng(12);
  FeatureRows x;
  std::vector<int> y;
  for (int i = 0; i < 400; ++i) {
    x.push_back({3.0});
    y.push_back(rng() % 2);
  }
  auto fit = fit_logistic(x, y);
  CHECK(std::abs(fit.weights[0]) <= 1e-3);
}

TEST_CASE("logistic: recovers a known ground truth") {
  const std::vector<double> w = {2.0, -1.0};
  auto train = sample_logistic_dataset(w, 0.5, 10000, 7);
  auto fit = fit_logistic(train.x, train.y);
  CHECK(std::abs(fit.weights[0] - 2.0) <= 0.15);
  CHECK(std::abs(fit.weights[1] + 1.0) <= 0.15);
  CHECK(std::abs(fit.bias - 0.5) <= 0.15);
  auto held = sample_logistic_dataset(w, 0.5, 10000, 8);
  CHECK(log_loss(fit.weights, fit.bias, held) <= log_loss(w, 0.5, held) + 0.01);
}

TEST_CASE("logistic: single class is a numeric error") {
  FeatureRows x = {{1.0}, {2.0}};
  std::vector<int> y = {1, 1};
  CHECK_THROWS_AS(fit_logistic(x, y), NumericError);
}

TEST_CASE("isotonic examples") {
  std::vector<double> x = {1, 2, 3}, y = {3, 1, 2};
  auto m = fit_isotonic(x, y);
  for (double v : x) CHECK(m.predict(v) == Approx(2.0));

  std::vector<double> mono = {0.1, 0.2, 0.2, 0.9};
  std::vector<double> x4 = {1, 2, 3, 4};
  auto m2 = fit_isotonic(x4, mono);
  for (std::size_t i = 0; i < 4; ++i) CHECK(m2.predict(x4[i]) == mono[i]);

  std::vector<double> flat(4, 0.3);
  auto m3 = fit_isotonic(x4, flat);
  CHECK(m3.predict(0.0) == 0.3);
  CHECK(m3.predict(10.0) == 0.3);

  std::vector<double> one_x = {1, 1, 1};
  CHECK_THROWS_AS(fit_isotonic(one_x, y), NumericError);
}

TEST_CASE("isotonic matches the exhaustive oracle for n <= 6") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 600; ++rep) {
    const std::size_t n = 2 + rep % 5;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = double(i) + 0.5 * u(rng);
      y[i] = std::round(u(rng) * 8) / 8;
    }
    std::vector<double> order = x;
    std::shuffle(order.begin(), order.end(), rng);  // fit order must not matter
    std::vector<double> yo(n);
    for (std::size_t i = 0; i < n; ++i) yo[i] = y[std::find(x.begin(), x.end(), order[i]) - x.begin()];
    auto m = fit_isotonic(order, yo);
    auto expect = brute_isotonic(y);
    for (std::size_t i = 0; i < n; ++i) CHECK(m.predict(x[i]) == Approx(expect[i]).epsilon(1e-12));
  }
}

TEST_CASE("isotonic predictions are monotone and direction-aware") {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> nd;
  std::vector<double> x(200), y(200);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = nd(rng);
    y[i] = -x[i] + nd(rng);
  }
  auto dec = fit_isotonic(x, y, IsoDirection::Nonincreasing);
  auto inc = fit_isotonic(x, y, IsoDirection::Nondecreasing);
  double prev_d = std::numeric_limits<double>::infinity(), prev_i = -prev_d;
  for (double v = -4; v <= 4; v += 0.01) {
    CHECK(dec.predict(v) <= prev_d + 1e-12);
    CHECK(inc.predict(v) >= prev_i - 1e-12);
    prev_d = dec.predict(v);
    prev_i = inc.predict(v);
  }
  for (std::size_t i = 1; i < inc.x.size(); ++i) {
    CHECK(inc.x[i] > inc.x[i - 1]);
    CHECK(inc.y[i] >= inc.y[i - 1]);
  }
}

TEST_CASE("chair calibration: identity, shuffle and noisy monotone") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.05);
  const std::size_t n = 2000;

  std::vector<double> chair(n), r(n);
  for (std::size_t i = 0; i < n; ++i) {
    chair[i] = u(rng);
    r[i] = 1.0 - chair[i];
  }
  auto cal = calibrate_chair(r, chair);
  for (std::size_t i = 0; i < n; ++i) CHECK(cal.isotonic.predict(1.0 - r[i]) == Approx(chair[i]).epsilon(1e-12));
  CHECK(cal.linear.alpha == Approx(1.0));
  CHECK(cal.linear.beta == Approx(0.0).epsilon(1e-9));

  auto draw = [&](bool related) {
    std::vector<double> rr(n), cc(n);
    for (std::size_t i = 0; i < n; ++i) {
      rr[i] = u(rng);
      cc[i] = related ? std::clamp(1.0 - rr[i] + noise(rng), 0.0, 1.0) : u(rng);
    }
    return std::pair{rr, cc};
  };
  auto [r_fit, c_fit] = draw(false);
  auto [r_out, c_out] = draw(false);
  CHECK(std::abs(iso_score(calibrate_chair(r_fit, c_fit).isotonic, r_out, c_out)) < 0.1);

  auto [r2, c2] = draw(true);
  auto [r3, c3] = draw(true);
  CHECK(iso_score(calibrate_chair(r2, c2).isotonic, r3, c3) > 0.9);
}

TEST_CASE("least squares recovers a linear map with unpenalized bias") {
  FeatureRows x;
  std::vector<double> y;
  for (int i = 0; i < 50; ++i) {
    x.push_back({double(i), double(i % 7)});
    y.push_back(3.0 + 0.5 * i - 2.0 * (i % 7));
  }
  auto fit = fit_least_squares(x, y, 1e-9);
  CHECK(fit.weights[0] == Approx(0.5));
  CHECK(fit.weights[1] == Approx(-2.0));
  CHECK(fit.bias == Approx(3.0));
}

TEST_CASE("feature sets have fixed widths") {
  FeatureSpec g;
  g.include_raw_probs = true;
  CHECK(g.names().size() == 9);
  g.include_raw_probs = false;
  CHECK(g.names().size() == 7);
  FeatureSpec b;
  b.set = FeatureSet::Baselines;
  CHECK(b.names() == std::vector<std::string>{"conf", "neg_ent", "neg_log_ppl"});
  FeatureSpec m;
  m.set = FeatureSet::Meta;
  CHECK(m.names().size() == 10);
}

TEST_CASE("neutral sequence pools to neutral grounding features") {
  std::vector<TokenRecord> toks(5, gc_test::token(0.5, 0.5, 0.5, 1.0, 0.3, 0.3));
  auto scored = score_sequence(gc_test::trace("n", toks), ScoreOptions{});
  for (auto pooling : {Pooling::Mean, Pooling::Tail, Pooling::Min, Pooling::Ema}) {
    FeatureSpec spec;
    spec.pooling = pooling;
    auto f = sentence_features(scored, spec);
    std::vector<double> expect = {0, 0, 0, 0, 0.5, 0, 0};
    REQUIRE(f.values.size() == expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) CHECK(f.values[i] == Approx(expect[i]));
  }
}

TEST_CASE("missing signal is named in the error") {
  auto scored = score_sequence(gc_test::trace("n", {gc_test::token(0.6, 0.5, 0.5)}), ScoreOptions{});
  FeatureSpec spec;
  spec.include_raw_probs = true;
  try {
    sentence_features(scored, spec);
    FAIL("expected error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("p_vid_raw") != std::string::npos);
  }
}

TEST_CASE("fitted model round trip is bit-identical") {
  auto sample = sample_logistic_dataset({1.0, -0.5, 0.25}, 0.1, 500, 21);
  auto fit = fit_logistic(sample.x, sample.y);
  FittedModel m;
  m.features.set = FeatureSet::Baselines;
  m.feature_names = m.features.names();
  m.weights = fit.weights;
  m.bias = fit.bias;
  std::vector<double> r, c;
  for (int i = 0; i < 40; ++i) {
    r.push_back(std::sin(i * 0.37) * 0.5 + 0.5);
    c.push_back(std::cos(i * 0.91) * 0.5 + 0.5);
  }
  auto cal = calibrate_chair(r, c);
  m.isotonic = cal.isotonic;
  m.linear = cal.linear;
  m.meta.dataset = "d";
  m.meta.seed = 99;
  const std::string text = m.to_json();
  auto back = FittedModel::from_json(text);
  CHECK(back.weights == m.weights);
  CHECK(back.bias == m.bias);
  CHECK(back.isotonic->x == m.isotonic->x);
  CHECK(back.isotonic->y == m.isotonic->y);
  CHECK(back.linear->alpha == m.linear->alpha);
  CHECK(back.to_json() == text);

  auto bad = nlohmann::json::parse(text);
  bad["weights"].push_back(1.0);
  CHECK_THROWS(FittedModel::from_json(bad.dump()));
}
