#include "groundcheck/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace groundcheck {
namespace {

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b) throw ValidationError("labels", "", "scores and labels differ in length");
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) {
  std::size_t pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw ValidationError("labels", "", "labels must be 0 or 1");
    pos += l == 1;
  }
  return {pos, labels.size() - pos};
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && x[order[j]] == x[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = mid;
    i = j;
  }
  return ranks;
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores.size(), labels.size());
  const auto [n_pos, n_neg] = class_counts(labels);
  if (n_pos == 0 || n_neg == 0) throw NumericError("AUROC needs both classes");
  const auto ranks = average_ranks(scores);
  long double rank_sum = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (labels[i] == 1) rank_sum += ranks[i];
  }
  const long double np = static_cast<long double>(n_pos);
  const long double u = rank_sum - np * (np + 1) / 2;
  return static_cast<double>(u / (np * static_cast<long double>(n_neg)));
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores.size(), labels.size());
  const auto [n_pos, n_neg] = class_counts(labels);
  if (n_pos == 0) throw NumericError("average precision needs at least one positive");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  long double ap = 0;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] != 1) continue;
    ++tp;
    // Recall rises by 1/n_pos at each positive; precision at that prefix.
    ap += static_cast<long double>(tp) / static_cast<long double>(k + 1);
  }
  return static_cast<double>(ap / static_cast<long double>(n_pos));
}

double accuracy_at(std::span<const double> probabilities, std::span<const int> labels,
                   double threshold) {
  check_sizes(probabilities.size(), labels.size());
  if (labels.empty()) throw NumericError("accuracy of an empty set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    correct += (probabilities[i] >= threshold ? 1 : 0) == labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("y", "", "correlation inputs differ in length");
  if (x.size() < 2) throw NumericError("correlation needs at least two points");
  const long double n = static_cast<long double>(x.size());
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw NumericError("correlation of a constant input");
  return static_cast<double>(std::clamp(sxy / std::sqrt(sxx * syy), -1.0L, 1.0L));
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("y", "", "correlation inputs differ in length");
  if (x.size() < 2) throw NumericError("Spearman needs at least two points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

DetectionReport detection_report(std::span<const double> scores, std::span<const int> labels,
                                 double threshold) {
  DetectionReport r;
  const auto [n_pos, n_neg] = class_counts(labels);
  r.n_pos = n_pos;
  r.n_neg = n_neg;
  r.threshold = threshold;
  r.auc = auroc(scores, labels);
  r.ap = average_precision(scores, labels);
  r.acc = accuracy_at(scores, labels, threshold);
  return r;
}

std::string format_metric_value(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  // Avoid "-0.000000".
  if (std::string(buf) == "-0.000000") return "0.000000";
  return buf;
}

std::string to_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  os << kMetricCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.metric << ',' << format_metric_value(r.value) << ',' << r.n << ',' << r.split << ','
       << r.source << ',' << r.target << '\n';
  }
  return os.str();
}

void write_csv_file(const std::string& path, const std::vector<MetricRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write CSV: " + path);
  out << to_csv(rows);
}

std::vector<MetricRow> report_rows(const DetectionReport& r, const std::string& split,
                                   const std::string& source, const std::string& target) {
  const std::size_t n = r.n_pos + r.n_neg;
  return {{"auc", r.auc, n, split, source, target},
          {"ap", r.ap, n, split, source, target},
          {"acc", r.acc, n, split, source, target},
          {"n_pos", static_cast<double>(r.n_pos), n, split, source, target},
          {"n_neg", static_cast<double>(r.n_neg), n, split, source, target}};
}

std::vector<MetricRow> report_rows(const RegressionReport& r, const std::string& split,
                                   const std::string& source, const std::string& target) {
  return {{"pearson", r.pearson, r.n, split, source, target},
          {"spearman", r.spearman, r.n, split, source, target},
          {"iso", r.iso_score, r.n, split, source, target}};
}

}  // namespace groundcheck
