#include "groundcheck/signals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace groundcheck {

std::vector<std::string> grounding_feature_names(bool include_raw_probs) {
  std::vector<std::string> names;
  for (auto n : kFeatureBasedNames) names.emplace_back(n);
  for (std::size_t i = 0; i < counterfactual_width(include_raw_probs); ++i) {
    names.emplace_back(kCounterfactualNames[i]);
  }
  return names;
}

double hidden_angle(double cos_hid) {
  return std::acos(std::clamp(cos_hid, -1.0, 1.0)) / std::numbers::pi;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw ValidationError("h_vid", "", "hidden vectors must be nonempty with equal dimension");
  }
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a[i]) * b[i];
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  if (na == 0 || nb == 0) throw NumericError("cosine of a zero vector");
  return std::clamp(static_cast<double>(dot / std::sqrt(na * nb)), -1.0, 1.0);
}

double percentile_sorted(std::span<const double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> quantile_scale(std::span<const double> values) {
  if (values.empty()) return {};
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double q10 = percentile_sorted(sorted, 0.10);
  const double q90 = percentile_sorted(sorted, 0.90);
  const double spread = q90 - q10;
  std::vector<double> out(values.size(), 0.5);
  if (spread < 1e-9) return out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::clamp((values[i] - q10) / spread, 0.0, 1.0);
  }
  return out;
}

std::vector<double> attention_usage(std::span<const double> attn_vid,
                                    std::span<const double> attn_null, AttentionMode mode) {
  if (attn_vid.size() != attn_null.size()) {
    throw ValidationError("attn_vid", "", "attention streams differ in length");
  }
  std::vector<double> out(attn_vid.size());
  if (mode == AttentionMode::ScaleThenSubtract) {
    const auto vid = quantile_scale(attn_vid);
    const auto null = quantile_scale(attn_null);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = vid[i] - null[i];
  } else {
    std::vector<double> diff(attn_vid.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = attn_vid[i] - attn_null[i];
    out = quantile_scale(diff);
  }
  return out;
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

CounterfactualSignals counterfactual_signals(double p_vid, double p_null, double p_mis) {
  CounterfactualSignals s;
  s.p_cf = std::max(p_null, p_mis);
  s.s_log = std::log(p_vid) - std::log(s.p_cf);
  s.s_logit = logit(p_vid) - logit(s.p_cf);
  s.s_prob = sigmoid(s.s_log);
  s.delta_clean = p_vid - p_null;
  s.delta_mis = p_vid - p_mis;
  return s;
}

BaselineSignals baseline_signals(const TokenRecord& record) {
  return {record.p_vid, record.entropy, 1.0 / record.p_vid};
}

std::vector<double> TokenSignalVector::counterfactual() const {
  std::vector<double> g = {s_log, s_logit, s_prob, delta_clean, delta_mis};
  if (has_raw_probs()) {
    g.push_back(*p_vid_raw);
    g.push_back(*p_null_raw);
  }
  return g;
}

std::vector<double> TokenSignalVector::grounding() const {
  std::vector<double> v = {s_hid, s_attn};
  const auto g = counterfactual();
  v.insert(v.end(), g.begin(), g.end());
  return v;
}

std::optional<double> TokenSignalVector::get(std::string_view name) const {
  if (name == "s_hid") return s_hid;
  if (name == "s_attn") return s_attn;
  if (name == "s_log") return s_log;
  if (name == "s_logit") return s_logit;
  if (name == "s_prob") return s_prob;
  if (name == "delta_clean") return delta_clean;
  if (name == "delta_mis") return delta_mis;
  if (name == "p_vid_raw") return p_vid_raw;
  if (name == "p_null_raw") return p_null_raw;
  if (name == "conf") return conf;
  if (name == "ent") return ent;
  if (name == "ppl") return ppl;
  return std::nullopt;
}

std::vector<TokenSignalVector> signal_matrix(const SequenceTrace& trace,
                                             const SignalOptions& options) {
  const std::size_t T = trace.tokens.size();
  std::vector<double> attn_vid(T), attn_null(T);
  for (std::size_t t = 0; t < T; ++t) {
    attn_vid[t] = trace.tokens[t].attn_vid;
    attn_null[t] = trace.tokens[t].attn_null;
  }
  const auto s_attn = attention_usage(attn_vid, attn_null, options.attention_mode);

  std::vector<TokenSignalVector> out(T);
  for (std::size_t t = 0; t < T; ++t) {
    const TokenRecord& rec = trace.tokens[t];
    TokenSignalVector& v = out[t];
    v.s_hid = hidden_angle(rec.cos_hid);
    v.s_attn = s_attn[t];
    const auto cf = counterfactual_signals(rec.p_vid, rec.p_null, rec.p_mis);
    v.s_log = cf.s_log;
    v.s_logit = cf.s_logit;
    v.s_prob = cf.s_prob;
    v.delta_clean = cf.delta_clean;
    v.delta_mis = cf.delta_mis;
    if (options.include_raw_probs) {
      v.p_vid_raw = rec.p_vid;
      v.p_null_raw = rec.p_null;
    }
    const auto base = baseline_signals(rec);
    v.conf = base.conf;
    v.ent = base.ent;
    v.ppl = base.ppl;
  }
  return out;
}

}  // namespace groundcheck
