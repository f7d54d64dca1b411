#pragma once

// Scored traces: the wire format augmented per token with its signal vector
// and fused reliability, plus a `pooled` record per sequence.

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "groundcheck/fusion.hpp"
#include "groundcheck/signals.hpp"
#include "groundcheck/trace.hpp"

namespace groundcheck {

struct ScoreOptions {
  SignalOptions signals;
  FusionWeights weights = FusionWeights::defaults(false);
  PoolingParams pooling;
};

struct ScoredSequence {
  SequenceTrace trace;
  std::vector<TokenSignalVector> signals;
  SentenceReliability reliability;
  bool include_raw_probs = false;
};

/// Signals, token fusion and early pooling for one sequence.
ScoredSequence score_sequence(const SequenceTrace& trace, const ScoreOptions& options);
std::vector<ScoredSequence> score_all(const std::vector<SequenceTrace>& traces,
                                      const ScoreOptions& options);

std::string serialize_scored(const ScoredSequence& scored);
ScoredSequence parse_scored(std::string_view line, std::size_t line_no = 0);

std::vector<ScoredSequence> read_scored(std::istream& in);
std::vector<ScoredSequence> read_scored_file(const std::string& path);
void write_scored_file(const std::string& path, const std::vector<ScoredSequence>& scored);

}  // namespace groundcheck
