#pragma once

// Sentence-level heads and calibration maps.
//
// Pooled per-signal statistics feed a logistic detection head (hallucinated
// vs. not) or a least-squares regression head (target 1 - CHAIR). An
// isotonic map from the reliability deficit 1 - R to CHAIR gives the CHAIR
// readout.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "groundcheck/fusion.hpp"
#include "groundcheck/scoring.hpp"
#include "groundcheck/trace.hpp"

namespace groundcheck {

enum class FeatureSet { Grounding, Baselines, Meta };

FeatureSet parse_feature_set(std::string_view name);
std::string_view feature_set_name(FeatureSet set);

struct FeatureSpec {
  FeatureSet set = FeatureSet::Grounding;
  Pooling pooling = Pooling::Tail;
  PoolingParams params;
  bool include_raw_probs = false;
  /// Negate entropy and log-perplexity so that larger means more reliable
  /// before tail pooling; false pools them on the raw risk scale.
  bool orient_baselines = true;

  std::vector<std::string> names() const;
};

struct SentenceFeatures {
  std::string id;
  std::vector<double> values;
};

SentenceFeatures sentence_features(const ScoredSequence& scored, const FeatureSpec& spec);
std::vector<SentenceFeatures> build_features(std::span<const ScoredSequence> scored,
                                             const FeatureSpec& spec);

using FeatureRows = std::vector<std::vector<double>>;

struct LogisticFit {
  std::vector<double> weights;
  double bias = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;

  double decision(std::span<const double> x) const;
  double predict_proba(std::span<const double> x) const;
};

struct LogisticOptions {
  double l2 = 1e-6;
  int max_iterations = 100;
  double tolerance = 1e-8;
};

/// Damped Newton (IRLS) on mean log-loss + (l2/2)|w|^2; the bias is not
/// penalized. Throws NumericError for single-class data and
/// ConvergenceError if the gradient norm stays above tolerance.
LogisticFit fit_logistic(const FeatureRows& x, std::span<const int> labels,
                         const LogisticOptions& options = {});

struct LinearFit {
  std::vector<double> weights;
  double bias = 0.0;

  double predict(std::span<const double> x) const;
};

/// Ridge least squares with an unpenalized bias.
LinearFit fit_least_squares(const FeatureRows& x, std::span<const double> y, double l2 = 1e-6);

/// R_hat = alpha * R + beta.
struct LinearCalibration {
  double alpha = 1.0;
  double beta = 0.0;

  double apply(double r) const { return alpha * r + beta; }
};

LinearCalibration fit_linear_calibration(std::span<const double> r, std::span<const double> target);

enum class IsoDirection { Nondecreasing, Nonincreasing };

struct IsotonicModel {
  std::vector<double> x;  ///< strictly increasing (in the fit's coordinate)
  std::vector<double> y;  ///< nondecreasing
  IsoDirection direction = IsoDirection::Nondecreasing;

  /// Piecewise-linear between breakpoints, clamped at both ends.
  double predict(double v) const;
  std::vector<double> predict(std::span<const double> v) const;
};

/// Pool-adjacent-violators least-squares monotone fit; tied x values are
/// averaged first. Nonincreasing fits negate x. Needs >= 2 distinct x.
IsotonicModel fit_isotonic(std::span<const double> x, std::span<const double> y,
                           IsoDirection direction = IsoDirection::Nondecreasing);

struct ChairCalibration {
  LinearCalibration linear;  ///< 1 - CHAIR ~ alpha * R + beta
  IsotonicModel isotonic;    ///< CHAIR ~ ISO(1 - R), nondecreasing
};

ChairCalibration calibrate_chair(std::span<const double> reliability, std::span<const double> chair);

/// Pearson between ISO(1 - R) and CHAIR; the ISO score.
double iso_score(const IsotonicModel& iso, std::span<const double> reliability,
                 std::span<const double> chair);

enum class Task { Detect, Regress };
Task parse_task(std::string_view name);
std::string_view task_name(Task task);

struct TrainingMetadata {
  std::string dataset;
  std::string model;
  std::uint64_t seed = 0;
  double l2 = 1e-6;
  double theta = 0.0;
  SplitSpec split;
  std::string calibration_split = "val";
  std::size_t n_train = 0;
  std::size_t n_calibration = 0;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::string tool_version;
};

/// Serializable fitted head plus everything needed to re-apply it elsewhere.
struct FittedModel {
  Task task = Task::Detect;
  FeatureSpec features;
  std::vector<std::string> feature_names;
  std::string feature_order_tag = std::string(kFeatureOrderTag);
  std::vector<double> weights;
  double bias = 0.0;
  std::optional<LinearCalibration> linear;
  std::optional<IsotonicModel> isotonic;
  TrainingMetadata meta;

  /// Detect: hallucination probability. Regress: predicted reliability.
  double score(std::span<const double> features) const;
  double score(const ScoredSequence& scored) const;

  /// Token-level weights obtained by copying the grounding part of a detection
  /// head back (negated, so larger means more reliable). Only for detection
  /// heads over grounding or meta features.
  std::optional<FusionWeights> token_fusion_weights() const;

  std::string to_json() const;
  static FittedModel from_json(std::string_view text);
  void save(const std::string& path) const;
  static FittedModel load(const std::string& path);
};

}  // namespace groundcheck
