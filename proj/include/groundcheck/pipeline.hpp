#pragma once

// End-to-end glue: CHAIR targets for scored traces, head training with the
// hash split, held-out evaluation and the source x target transfer grid.

#include <optional>
#include <string>
#include <vector>

#include "groundcheck/calibrate.hpp"
#include "groundcheck/chair.hpp"
#include "groundcheck/metrics.hpp"
#include "groundcheck/scoring.hpp"

namespace groundcheck {

inline constexpr const char* kToolVersion = "0.3.0";

struct LabelOptions {
  ContentExtractorConfig extractor = ContentExtractorConfig::defaults();
  ChairSemantics semantics = ChairSemantics::Instance;
  double theta = 0.0;
};

/// Scored sequences with their CHAIR target and binary label.
struct LabeledSet {
  std::vector<ScoredSequence> scored;
  std::vector<double> chair;
  std::vector<int> labels;

  std::size_t size() const { return scored.size(); }
  LabeledSet subset(const std::vector<std::size_t>& rows) const;
};

LabeledSet label_sequences(std::vector<ScoredSequence> scored, const LabelOptions& options);

/// Row indices of each split part, in input order.
Partition<std::size_t> split_rows(const LabeledSet& data, const SplitSpec& split);

struct TrainOptions {
  Task task = Task::Detect;
  FeatureSpec features;
  double l2 = 1e-6;
  SplitSpec split;
  std::uint64_t seed = 0;  ///< recorded only; training is deterministic
};

/// Fits the head on the train part and the isotonic/linear CHAIR maps on the
/// val part (train part if val is empty).
FittedModel train_model(const LabeledSet& data, const TrainOptions& options, double theta);

/// Reliability R of each sequence: 1 - P(hallucinated) for detection heads,
/// the predicted 1 - CHAIR for regression heads.
std::vector<double> model_reliability(const FittedModel& model, const LabeledSet& data);

struct Evaluation {
  std::optional<DetectionReport> detection;  ///< absent if one class is missing
  std::optional<RegressionReport> regression;  ///< absent if CHAIR is constant
  std::size_t n = 0;
};

Evaluation evaluate_model(const FittedModel& model, const LabeledSet& data);

std::vector<MetricRow> evaluation_rows(const Evaluation& e, const std::string& split,
                                       const std::string& source, const std::string& target);

struct TransferCell {
  std::string source;
  std::string target;
  Evaluation eval;
  /// Metric minus the in-domain value on the same target.
  double delta_auc = 0.0;
  double delta_spearman = 0.0;
  double delta_iso = 0.0;
};

struct TransferDomain {
  std::string name;
  FittedModel model;   ///< trained in-domain
  LabeledSet held_out;  ///< evaluation part of this domain
};

/// Full grid; cell (i, j) applies domain i's model to domain j's held-out set.
std::vector<TransferCell> transfer_matrix(const std::vector<TransferDomain>& domains);

std::vector<MetricRow> transfer_rows(const std::vector<TransferCell>& cells, const std::string& split);

}  // namespace groundcheck
