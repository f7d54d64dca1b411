#pragma once

// Per-token reliability signals.
//
// Feature-based signals compare the decoder's internal state with and without
// the video input; counterfactual signals compare the probability of the
// clean-pass token against the strongest of the no-video and mismatched-video
// passes. Text-only baselines (confidence, entropy, self-perplexity) come from
// the clean pass alone.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "groundcheck/trace.hpp"

namespace groundcheck {

/// Frozen feature ordering; bump the tag if the ordering ever changes.
inline constexpr std::string_view kFeatureOrderTag = "gc-grounding-v1";

inline constexpr std::array<std::string_view, 2> kFeatureBasedNames = {"s_hid", "s_attn"};
inline constexpr std::array<std::string_view, 7> kCounterfactualNames = {
    "s_log", "s_logit", "s_prob", "delta_clean", "delta_mis", "p_vid_raw", "p_null_raw"};

/// Number of counterfactual entries: 5 core, 7 with the raw-probability pair.
constexpr std::size_t counterfactual_width(bool include_raw_probs) {
  return include_raw_probs ? 7 : 5;
}

/// Names of the grounding features (feature-based then counterfactual).
std::vector<std::string> grounding_feature_names(bool include_raw_probs);

/// Angle between hidden states scaled to [0,1]: arccos(cos)/pi.
double hidden_angle(double cos_hid);

/// Cosine of two equal-length vectors; throws if either has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Empirical percentile with linear interpolation between order statistics.
/// `sorted` must be ascending and nonempty; q in [0,1].
double percentile_sorted(std::span<const double> sorted, double q);

/// Maps each value to clamp((x - q10)/(q90 - q10), 0, 1) using the sequence's
/// own 10th/90th percentiles; degenerate spread (< 1e-9) maps everything to 0.5.
std::vector<double> quantile_scale(std::span<const double> values);

enum class AttentionMode {
  ScaleThenSubtract,  ///< scale each stream with its own quantiles, then subtract
  SubtractThenScale,  ///< subtract the raw masses, then quantile-scale the difference
};

std::vector<double> attention_usage(std::span<const double> attn_vid,
                                    std::span<const double> attn_null,
                                    AttentionMode mode = AttentionMode::ScaleThenSubtract);

struct CounterfactualSignals {
  double p_cf = 0.5;  ///< max(p_null, p_mis)
  double s_log = 0.0;
  double s_logit = 0.0;
  double s_prob = 0.5;
  double delta_clean = 0.0;
  double delta_mis = 0.0;
};

double logit(double p);
double sigmoid(double x);

CounterfactualSignals counterfactual_signals(double p_vid, double p_null, double p_mis);

struct BaselineSignals {
  double conf = 0.0;  ///< p_vid
  double ent = 0.0;   ///< stored entropy
  double ppl = 1.0;   ///< 1 / p_vid
};

BaselineSignals baseline_signals(const TokenRecord& record);

struct TokenSignalVector {
  double s_hid = 0.0;
  double s_attn = 0.0;
  double s_log = 0.0;
  double s_logit = 0.0;
  double s_prob = 0.5;
  double delta_clean = 0.0;
  double delta_mis = 0.0;
  std::optional<double> p_vid_raw;
  std::optional<double> p_null_raw;
  double conf = 0.5;
  double ent = 0.0;
  double ppl = 2.0;

  bool has_raw_probs() const { return p_vid_raw.has_value() && p_null_raw.has_value(); }
  std::array<double, 2> feature_based() const { return {s_hid, s_attn}; }
  /// 5 or 7 entries depending on whether the raw-probability pair is present.
  std::vector<double> counterfactual() const;
  /// feature_based() followed by counterfactual().
  std::vector<double> grounding() const;
  /// Looks a signal up by its feature name; nullopt if absent.
  std::optional<double> get(std::string_view name) const;

  bool operator==(const TokenSignalVector&) const = default;
};

struct SignalOptions {
  bool include_raw_probs = false;
  AttentionMode attention_mode = AttentionMode::ScaleThenSubtract;
};

std::vector<TokenSignalVector> signal_matrix(const SequenceTrace& trace,
                                             const SignalOptions& options = {});

}  // namespace groundcheck
