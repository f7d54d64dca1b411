#include "groundcheck/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace groundcheck {
namespace {

bool has_spread(const std::vector<double>& v) {
  return !v.empty() && std::any_of(v.begin(), v.end(), [&](double x) { return x != v.front(); });
}

FeatureRows feature_rows(const LabeledSet& data, const FeatureSpec& spec) {
  FeatureRows rows;
  rows.reserve(data.size());
  for (const auto& s : data.scored) rows.push_back(sentence_features(s, spec).values);
  return rows;
}

}  // namespace

LabeledSet LabeledSet::subset(const std::vector<std::size_t>& rows) const {
  LabeledSet out;
  for (std::size_t i : rows) {
    out.scored.push_back(scored.at(i));
    out.chair.push_back(chair.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

LabeledSet label_sequences(std::vector<ScoredSequence> scored, const LabelOptions& options) {
  const ContentExtractor extractor(options.extractor);
  LabeledSet out;
  out.chair.reserve(scored.size());
  out.labels.reserve(scored.size());
  for (const auto& s : scored) {
    const double c = chair_instance(extractor.extract(s.trace.hypothesis),
                                    extractor.extract(s.trace.reference), options.semantics);
    out.chair.push_back(c);
    out.labels.push_back(hallucination_label(c, options.theta));
  }
  out.scored = std::move(scored);
  return out;
}

Partition<std::size_t> split_rows(const LabeledSet& data, const SplitSpec& split) {
  split.validate();
  Partition<std::size_t> p;
  for (std::size_t i = 0; i < data.size(); ++i) {
    p.part(assign_split(data.scored[i].trace.id, split)).push_back(i);
  }
  return p;
}

FittedModel train_model(const LabeledSet& data, const TrainOptions& options, double theta) {
  const auto parts = split_rows(data, options.split);
  if (parts.train.empty()) throw NumericError("train split is empty");
  const LabeledSet train = data.subset(parts.train);
  const bool calibrate_on_val = !parts.val.empty();
  const LabeledSet calib = calibrate_on_val ? data.subset(parts.val) : train;

  FittedModel m;
  m.task = options.task;
  m.features = options.features;
  m.feature_names = options.features.names();
  const FeatureRows x = feature_rows(train, options.features);

  if (options.task == Task::Detect) {
    LogisticOptions lo;
    lo.l2 = options.l2;
    const LogisticFit fit = fit_logistic(x, train.labels, lo);
    m.weights = fit.weights;
    m.bias = fit.bias;
    m.meta.iterations = fit.iterations;
    m.meta.gradient_norm = fit.gradient_norm;
  } else {
    std::vector<double> target(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) target[i] = 1.0 - train.chair[i];
    const LinearFit fit = fit_least_squares(x, target, options.l2);
    m.weights = fit.weights;
    m.bias = fit.bias;
  }

  const auto r = model_reliability(m, calib);
  if (has_spread(r)) {
    const ChairCalibration cal = calibrate_chair(r, calib.chair);
    m.isotonic = cal.isotonic;
    m.linear = cal.linear;
  }

  m.meta.dataset = data.scored.empty() ? "" : data.scored.front().trace.dataset;
  m.meta.model = data.scored.empty() ? "" : data.scored.front().trace.model;
  m.meta.seed = options.seed;
  m.meta.l2 = options.l2;
  m.meta.theta = theta;
  m.meta.split = options.split;
  m.meta.calibration_split = calibrate_on_val ? "val" : "train";
  m.meta.n_train = train.size();
  m.meta.n_calibration = calib.size();
  m.meta.tool_version = kToolVersion;
  return m;
}

std::vector<double> model_reliability(const FittedModel& model, const LabeledSet& data) {
  std::vector<double> r;
  r.reserve(data.size());
  for (const auto& s : data.scored) {
    const double v = model.score(s);
    r.push_back(model.task == Task::Detect ? 1.0 - v : v);
  }
  return r;
}

Evaluation evaluate_model(const FittedModel& model, const LabeledSet& data) {
  Evaluation e;
  e.n = data.size();
  const auto r = model_reliability(model, data);
  const bool both = std::count(data.labels.begin(), data.labels.end(), 1) > 0 &&
                    std::count(data.labels.begin(), data.labels.end(), 0) > 0;
  if (both) {
    std::vector<double> risk(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      risk[i] = model.task == Task::Detect ? 1.0 - r[i] : -r[i];
    }
    // Regression heads have no probability scale; ACC uses sigma(-R_hat).
    if (model.task == Task::Regress) {
      for (auto& v : risk) v = sigmoid(v);
    }
    e.detection = detection_report(risk, data.labels, 0.5);
  }
  if (has_spread(r) && has_spread(data.chair)) {
    RegressionReport rr;
    rr.n = data.size();
    rr.pearson = pearson(r, data.chair);
    rr.spearman = spearman(r, data.chair);
    rr.iso_score = std::nan("");
    if (model.isotonic) {
      std::vector<double> predicted(r.size());
      for (std::size_t i = 0; i < r.size(); ++i) predicted[i] = model.isotonic->predict(1.0 - r[i]);
      if (has_spread(predicted)) rr.iso_score = pearson(predicted, data.chair);
    }
    e.regression = rr;
  }
  return e;
}

std::vector<MetricRow> evaluation_rows(const Evaluation& e, const std::string& split,
                                       const std::string& source, const std::string& target) {
  std::vector<MetricRow> rows;
  if (e.detection) {
    auto d = report_rows(*e.detection, split, source, target);
    rows.insert(rows.end(), d.begin(), d.end());
  }
  if (e.regression) {
    auto r = report_rows(*e.regression, split, source, target);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return rows;
}

std::vector<TransferCell> transfer_matrix(const std::vector<TransferDomain>& domains) {
  std::vector<Evaluation> diagonal;
  diagonal.reserve(domains.size());
  for (const auto& d : domains) diagonal.push_back(evaluate_model(d.model, d.held_out));

  auto auc = [](const Evaluation& e) { return e.detection ? e.detection->auc : std::nan(""); };
  auto rho = [](const Evaluation& e) { return e.regression ? e.regression->spearman : std::nan(""); };
  auto iso = [](const Evaluation& e) { return e.regression ? e.regression->iso_score : std::nan(""); };

  std::vector<TransferCell> cells;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    for (std::size_t j = 0; j < domains.size(); ++j) {
      TransferCell c;
      c.source = domains[i].name;
      c.target = domains[j].name;
      c.eval = i == j ? diagonal[j] : evaluate_model(domains[i].model, domains[j].held_out);
      c.delta_auc = i == j ? 0.0 : auc(c.eval) - auc(diagonal[j]);
      c.delta_spearman = i == j ? 0.0 : rho(c.eval) - rho(diagonal[j]);
      c.delta_iso = i == j ? 0.0 : iso(c.eval) - iso(diagonal[j]);
      cells.push_back(std::move(c));
    }
  }
  return cells;
}

std::vector<MetricRow> transfer_rows(const std::vector<TransferCell>& cells, const std::string& split) {
  std::vector<MetricRow> rows;
  for (const auto& c : cells) {
    auto r = evaluation_rows(c.eval, split, c.source, c.target);
    rows.insert(rows.end(), r.begin(), r.end());
    rows.push_back({"delta_auc", c.delta_auc, c.eval.n, split, c.source, c.target});
    rows.push_back({"delta_spearman", c.delta_spearman, c.eval.n, split, c.source, c.target});
    rows.push_back({"delta_iso", c.delta_iso, c.eval.n, split, c.source, c.target});
  }
  return rows;
}

}  // namespace groundcheck
