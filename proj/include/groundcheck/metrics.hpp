#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "groundcheck/errors.hpp"

namespace groundcheck {

/// Probability that a random positive outscores a random negative; ties
/// count one half. Throws if either class is absent.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Step-wise average precision over descending-score prefixes; ties are
/// broken by index so the result is deterministic. Throws without positives.
double average_precision(std::span<const double> scores, std::span<const int> labels);

/// Fraction of predictions (probability >= threshold -> 1) matching labels.
double accuracy_at(std::span<const double> probabilities, std::span<const int> labels,
                   double threshold = 0.5);

double pearson(std::span<const double> x, std::span<const double> y);

/// Average (mid) ranks, 1-based.
std::vector<double> average_ranks(std::span<const double> x);

/// Pearson correlation of average ranks; throws on zero rank variance.
double spearman(std::span<const double> x, std::span<const double> y);

struct DetectionReport {
  double auc = 0.0;
  double ap = 0.0;
  double acc = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  double threshold = 0.5;
};

/// `scores` are hallucination probabilities (higher = more likely positive).
DetectionReport detection_report(std::span<const double> scores, std::span<const int> labels,
                                 double threshold = 0.5);

struct RegressionReport {
  double pearson = 0.0;    ///< reliability vs. CHAIR
  double spearman = 0.0;   ///< reliability vs. CHAIR
  double iso_score = 0.0;  ///< Pearson of isotonic-predicted vs. true CHAIR
  std::size_t n = 0;
};

/// One CSV row: metric,value,n,split,source,target.
struct MetricRow {
  std::string metric;
  double value = 0.0;
  std::size_t n = 0;
  std::string split;
  std::string source;
  std::string target;
};

inline constexpr const char* kMetricCsvHeader = "metric,value,n,split,source,target";

std::string format_metric_value(double v);
std::string to_csv(const std::vector<MetricRow>& rows);
void write_csv_file(const std::string& path, const std::vector<MetricRow>& rows);

std::vector<MetricRow> report_rows(const DetectionReport& r, const std::string& split,
                                   const std::string& source, const std::string& target);
std::vector<MetricRow> report_rows(const RegressionReport& r, const std::string& split,
                                   const std::string& source, const std::string& target);

}  // namespace groundcheck
