#include "groundcheck/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

namespace groundcheck {
namespace {

// Stable order by (value, index) for the tail set.
std::vector<std::size_t> ascending_order(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  return idx;
}

double tail_mean(std::span<const double> v, double q) {
  const auto k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()) - 1e-12)));
  const auto order = ascending_order(v);
  long double s = 0;
  for (std::size_t i = 0; i < k && i < order.size(); ++i) s += v[order[i]];
  return static_cast<double>(s / static_cast<long double>(std::min(k, v.size())));
}

double ema_final(std::span<const double> v, double alpha) {
  double e = v[0];
  for (std::size_t i = 1; i < v.size(); ++i) e = alpha * e + (1.0 - alpha) * v[i];
  return e;
}

double arithmetic_mean(std::span<const double> v) {
  long double s = 0;
  for (double x : v) s += x;
  return static_cast<double>(s / static_cast<long double>(v.size()));
}

double harmonic_mean(std::span<const double> v, double eps) {
  long double s = 0;
  for (double x : v) s += 1.0L / (static_cast<long double>(x) + eps);
  return static_cast<double>(static_cast<long double>(v.size()) / s);
}

void check_params(const PoolingParams& p) {
  if (!(p.q > 0.0 && p.q < 1.0)) throw ValidationError("q", "", "tail fraction q must lie in (0,1)");
  if (!(p.alpha >= 0.0 && p.alpha <= 1.0)) throw ValidationError("alpha", "", "EMA alpha must lie in [0,1]");
  if (!(p.epsilon >= 0.0)) throw ValidationError("epsilon", "", "epsilon must be >= 0");
}

}  // namespace

FusionWeights FusionWeights::defaults(bool include_raw_probs) {
  FusionWeights w;
  w.w_cf.assign(counterfactual_width(include_raw_probs), 0.0);
  w.w_cf[2] = 1.0;  // s_prob
  w.feature_names = grounding_feature_names(include_raw_probs);
  return w;
}

void FusionWeights::validate() const {
  if (w_cf.size() != counterfactual_width(false) && w_cf.size() != counterfactual_width(true)) {
    throw ValidationError("w_cf", "", "w_cf must have 5 or 7 entries");
  }
  if (feature_order_tag != kFeatureOrderTag) {
    throw ValidationError("feature_order", "", "unknown feature order tag '" + feature_order_tag + "'");
  }
  if (!feature_names.empty() && feature_names != grounding_feature_names(include_raw_probs())) {
    throw ValidationError("feature_order", "", "fusion weight names do not follow the frozen ordering");
  }
  for (double x : w_fb) {
    if (!std::isfinite(x)) throw ValidationError("w_fb", "", "fusion weights must be finite");
  }
  for (double x : w_cf) {
    if (!std::isfinite(x)) throw ValidationError("w_cf", "", "fusion weights must be finite");
  }
  if (!std::isfinite(bias)) throw ValidationError("b", "", "fusion bias must be finite");
}

double fuse_token(const TokenSignalVector& v, const FusionWeights& w) {
  const auto g = v.counterfactual();
  if (g.size() != w.w_cf.size()) {
    throw ValidationError("feature_order", "",
                          "token vector has " + std::to_string(g.size()) +
                              " counterfactual entries but weights expect " +
                              std::to_string(w.w_cf.size()));
  }
  double z = w.bias + w.w_fb[0] * v.s_hid + w.w_fb[1] * v.s_attn;
  for (std::size_t i = 0; i < g.size(); ++i) z += w.w_cf[i] * g[i];
  return sigmoid(z);
}

std::vector<double> fuse_sequence(std::span<const TokenSignalVector> signals,
                                  const FusionWeights& w) {
  w.validate();
  std::vector<double> r;
  r.reserve(signals.size());
  for (const auto& v : signals) r.push_back(fuse_token(v, w));
  return r;
}

std::string FusionWeights::to_json() const {
  nlohmann::ordered_json j;
  j["feature_order_tag"] = feature_order_tag;
  j["feature_names"] = grounding_feature_names(include_raw_probs());
  j["w_fb"] = w_fb;
  j["w_cf"] = w_cf;
  j["bias"] = bias;
  return j.dump(2) + "\n";
}

FusionWeights FusionWeights::from_json(std::string_view text) {
  FusionWeights w;
  try {
    const auto j = nlohmann::json::parse(text.begin(), text.end());
    w.feature_order_tag = j.at("feature_order_tag").get<std::string>();
    w.w_fb = j.at("w_fb").get<std::array<double, 2>>();
    w.w_cf = j.at("w_cf").get<std::vector<double>>();
    w.bias = j.value("bias", 0.0);
    if (j.contains("feature_names")) w.feature_names = j["feature_names"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("bad fusion weights: ") + e.what());
  }
  w.validate();
  return w;
}

Pooling parse_pooling(std::string_view name) {
  if (name == "mean") return Pooling::Mean;
  // "tailNN" names the fraction; q itself lives in PoolingParams.
  if (name.substr(0, 4) == "tail" &&
      name.find_first_not_of("0123456789", 4) == std::string_view::npos) {
    return Pooling::Tail;
  }
  if (name == "harm") return Pooling::Harm;
  if (name == "min") return Pooling::Min;
  if (name == "ema") return Pooling::Ema;
  throw ValidationError("pool", "", "unknown pooling '" + std::string(name) + "'");
}

std::string pooling_name(Pooling p, const PoolingParams& params) {
  switch (p) {
    case Pooling::Mean: return "mean";
    case Pooling::Tail: {
      const long pct = std::lround(params.q * 100.0);
      return "tail" + std::to_string(pct);
    }
    case Pooling::Harm: return "harm";
    case Pooling::Min: return "min";
    case Pooling::Ema: return "ema";
  }
  return "mean";
}

double SentenceReliability::get(Pooling p) const {
  switch (p) {
    case Pooling::Mean: return mean;
    case Pooling::Tail: return tail;
    case Pooling::Harm: return harm;
    case Pooling::Min: return min;
    case Pooling::Ema: return ema;
  }
  return mean;
}

SentenceReliability pool(std::span<const double> r_tokens, const PoolingParams& params) {
  if (r_tokens.empty()) throw ValidationError("r_tokens", "", "cannot pool an empty sequence");
  check_params(params);
  SentenceReliability s;
  s.r_tokens.assign(r_tokens.begin(), r_tokens.end());
  s.params = params;
  s.mean = arithmetic_mean(r_tokens);
  s.tail = tail_mean(r_tokens, params.q);
  s.harm = harmonic_mean(r_tokens, params.epsilon);
  s.min = *std::min_element(r_tokens.begin(), r_tokens.end());
  s.ema = ema_final(r_tokens, params.alpha);
  return s;
}

double pool_signal(std::span<const double> values, Pooling op, const PoolingParams& params) {
  if (values.empty()) throw ValidationError("signal", "", "cannot pool an empty sequence");
  check_params(params);
  switch (op) {
    case Pooling::Mean: return arithmetic_mean(values);
    case Pooling::Tail: return tail_mean(values, params.q);
    case Pooling::Min: return *std::min_element(values.begin(), values.end());
    case Pooling::Ema: return ema_final(values, params.alpha);
    case Pooling::Harm: {
      std::vector<double> squashed(values.size());
      std::transform(values.begin(), values.end(), squashed.begin(), sigmoid);
      return harmonic_mean(squashed, params.epsilon);
    }
  }
  return arithmetic_mean(values);
}

}  // namespace groundcheck
