#pragma once

// Synthetic traces with known token-level grounding.
//
// Each token carries a latent flag z: grounded tokens get a large positive
// video margin, a large hidden-state angle and a positive attention gap, and
// copy their reference word; guessed tokens get a near-zero margin, an angle
// near zero and no attention gap, and hit the reference word only with
// probability p_vid^gamma. Content words are pseudo-words that the default
// CHAIR extractor leaves untouched, so CHAIR on the generated strings matches
// the sidecar counts exactly.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "groundcheck/trace.hpp"

namespace groundcheck {

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

struct BetaParams {
  double a = 2.0;
  double b = 2.0;
};

struct GeneratorConfig {
  std::string profile = "gf-like";
  std::string dataset = "synth";
  std::string model = "gf-like";
  std::size_t n_sequences = 2000;
  std::size_t t_min = 4;
  std::size_t t_max = 12;
  double grounded_rate = 0.5;
  /// Concentration of the per-sequence grounded rate, drawn from
  /// Beta(k * rate, k * (1 - rate)); 0 draws every token i.i.d. at `rate`.
  double grounding_dispersion = 1.0;

  double grounded_margin_mu = 0.8;  ///< lognormal location
  double grounded_margin_sigma = 0.5;
  double guessed_margin_mean = 0.0;
  double guessed_margin_sigma = 0.25;
  BetaParams grounded_base{2.0, 2.0};
  BetaParams guessed_base{1.5, 1.0};
  /// The weaker counterfactual pass is p_base * U(lo, hi).
  Range counterfactual_shrink{0.5, 1.0};

  Range grounded_cosine{0.3, 0.8};
  Range guessed_cosine{0.92, 1.0};
  Range attention_null{0.2, 0.4};
  double grounded_attention_gap = 0.3;
  double grounded_attention_sd = 0.1;
  double guessed_attention_sd = 0.05;
  /// Effective vocabulary for entropy: 1 + floor(lognormal(mu, sigma)).
  double entropy_support_mu = 2.0;
  double entropy_support_sigma = 1.0;

  std::size_t vocab_size = 2000;
  double stopword_rate = 0.3;
  /// Guessed tokens hit the reference word with probability p_vid^gamma;
  /// 0 disables hits.
  double guess_hit_exponent = 2.0;
  std::uint64_t seed = 11;

  void validate() const;

  static GeneratorConfig gf_like();
  static GeneratorConfig gb_like();
  /// Grounded and guessed margins swap regimes: grounded tokens get small
  /// margins, guessed tokens large ones.
  static GeneratorConfig inverted_margin();
  static GeneratorConfig named(std::string_view profile);

  std::string to_json() const;
  static GeneratorConfig from_json(std::string_view text);
};

/// Deterministic pseudo-word for vocabulary index i (six lowercase letters).
std::string content_word(std::size_t index);

struct SidecarRecord {
  std::string id;
  std::string profile;
  std::vector<int> z;
  std::size_t hallucinated = 0;
  std::size_t content_count = 0;

  double chair() const {
    return content_count == 0 ? 0.0 : static_cast<double>(hallucinated) / static_cast<double>(content_count);
  }
};

struct SyntheticDataset {
  std::vector<SequenceTrace> traces;
  std::vector<SidecarRecord> sidecar;
};

/// Sequence i uses its own stream derived from (seed, i), so output does not
/// depend on how generation is scheduled.
SyntheticDataset generate(const GeneratorConfig& config);

std::string serialize_sidecar(const SidecarRecord& record);
SidecarRecord parse_sidecar(std::string_view line);
void write_sidecar_file(const std::string& path, const std::vector<SidecarRecord>& records);
std::vector<SidecarRecord> read_sidecar_file(const std::string& path);

enum class DegradationMode { FeatureNoise, FrameDrop };

DegradationMode parse_degradation_mode(std::string_view name);
std::string_view degradation_mode_name(DegradationMode mode);

struct DegradationSpec {
  DegradationMode mode = DegradationMode::FeatureNoise;
  std::vector<double> levels{0.0, 0.1, 0.2, 0.3, 0.4};
  std::uint64_t seed = 11;
  /// Source of guessed-regime draws and replacement words.
  GeneratorConfig regime = GeneratorConfig::gf_like();

  void validate() const;
};

/// Feature noise mixes p_vid toward p_cf, pulls the cosine toward 1 and
/// shrinks the attention gap, all by `level`. Frame drop redraws a `level`
/// fraction of tokens from the guessed regime. In both modes tokens may turn
/// into wrong words, and the hypothesis string is rewritten to match.
/// Common random numbers per (seed, id, token) make the damage nested across
/// levels. Level 0 returns the input unchanged.
SequenceTrace degrade(const SequenceTrace& trace, const DegradationSpec& spec, double level);
std::vector<SequenceTrace> degrade_all(const std::vector<SequenceTrace>& traces,
                                       const DegradationSpec& spec, double level);

struct MediationParams {
  double h_given_w1 = 0.5;   ///< P(H=1 | W=1)
  double h_given_w0 = 0.1;   ///< P(H=1 | W=0)
  double w_given_gf1 = 0.7;  ///< P(W=1 | GF=1)
  double w_given_gf0 = 0.3;  ///< P(W=1 | GF=0)

  void validate() const;
  /// P(H|W=1) > P(H|W=0) and P(W|GF=1) > P(W|GF=0).
  bool assumptions_hold() const;
};

struct MediationGap {
  double product = 0.0;
  double total_probability = 0.0;
};

/// Gap P(H|GF=1) - P(H|GF=0), once as the product of the two differences and
/// once by expanding over W.
MediationGap mediation_gap_exact(const MediationParams& params);

/// Samples GF ~ Bernoulli(1/2), then W and H; a group with no samples
/// contributes a rate of 0.
double mediation_gap_mc(const MediationParams& params, std::uint64_t n_samples, std::uint64_t seed);

struct LogisticSample {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
};

/// x ~ N(0, I), y ~ Bernoulli(sigmoid(w.x + b)).
LogisticSample sample_logistic_dataset(const std::vector<double>& w, double b, std::size_t n,
                                       std::uint64_t seed);

}  // namespace groundcheck
