#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "groundcheck/signals.hpp"

namespace groundcheck {

/// Token-level fusion weights: r_t = sigmoid(w_fb . h_t + w_cf . g_t + bias).
struct FusionWeights {
  std::array<double, 2> w_fb = {0.0, 0.0};
  std::vector<double> w_cf;
  double bias = 0.0;
  std::string feature_order_tag = std::string(kFeatureOrderTag);
  std::vector<std::string> feature_names;  ///< w_fb names followed by w_cf names

  /// Untrained default: unit weight on s_prob, everything else zero, so
  /// r_t = sigmoid(s_prob), a monotone map of s_prob.
  static FusionWeights defaults(bool include_raw_probs = false);

  bool include_raw_probs() const { return w_cf.size() == counterfactual_width(true); }
  void validate() const;

  /// {"feature_order_tag", "w_fb": [2], "w_cf": [5 or 7], "bias"}.
  std::string to_json() const;
  static FusionWeights from_json(std::string_view text);
};

/// Throws ValidationError if the vector's layout differs from the weights'.
double fuse_token(const TokenSignalVector& v, const FusionWeights& w);
std::vector<double> fuse_sequence(std::span<const TokenSignalVector> signals,
                                  const FusionWeights& w);

struct PoolingParams {
  double q = 0.1;         ///< tail fraction
  double alpha = 0.9;     ///< EMA decay
  double epsilon = 1e-12; ///< harmonic-mean guard
};

enum class Pooling { Mean, Tail, Harm, Min, Ema };

/// "mean", "tail10" (or "tail"), "harm", "min", "ema".
Pooling parse_pooling(std::string_view name);
std::string pooling_name(Pooling p, const PoolingParams& params = {});

/// Sentence-level statistics of token reliabilities.
struct SentenceReliability {
  std::vector<double> r_tokens;
  double mean = 0.0;
  double tail = 0.0;  ///< mean of the ceil(qT) lowest values
  double harm = 0.0;
  double min = 0.0;
  double ema = 0.0;   ///< forward EMA over token order, final value
  PoolingParams params;

  double get(Pooling p) const;
};

SentenceReliability pool(std::span<const double> r_tokens, const PoolingParams& params = {});

/// Applies one pooling operator to an arbitrary real-valued signal. Harmonic
/// pooling is only defined for positive values, so for signals it is taken
/// over sigmoid-squashed values; the other operators use the raw values.
double pool_signal(std::span<const double> values, Pooling op, const PoolingParams& params = {});

}  // namespace groundcheck
