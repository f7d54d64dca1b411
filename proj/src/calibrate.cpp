#include "groundcheck/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "groundcheck/metrics.hpp"

namespace groundcheck {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

Eigen::MatrixXd to_matrix(const FeatureRows& rows) {
  if (rows.empty()) throw NumericError("no training rows");
  const auto d = static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != d) {
      throw ValidationError("features", "", "feature rows differ in width");
    }
    for (Eigen::Index k = 0; k < d; ++k) {
      if (!std::isfinite(rows[i][k])) throw NumericError("non-finite feature value");
      m(static_cast<Eigen::Index>(i), k) = rows[i][k];
    }
  }
  return m;
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

struct LogisticState {
  double objective = 0.0;
  Eigen::VectorXd gradient;
};

// Parameters theta = [w; b]; X is augmented with a trailing column of ones.
LogisticState logistic_state(const Eigen::MatrixXd& xa, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& theta, double l2, bool want_gradient) {
  const Eigen::Index n = xa.rows(), d = xa.cols() - 1;
  const Eigen::VectorXd z = xa * theta;
  LogisticState s;
  long double loss = 0;
  for (Eigen::Index i = 0; i < n; ++i) loss += softplus(z(i)) - y(i) * z(i);
  const double w2 = theta.head(d).squaredNorm();
  s.objective = static_cast<double>(loss / n) + 0.5 * l2 * w2;
  if (want_gradient) {
    Eigen::VectorXd resid(n);
    for (Eigen::Index i = 0; i < n; ++i) resid(i) = sigmoid(z(i)) - y(i);
    s.gradient = xa.transpose() * resid / static_cast<double>(n);
    s.gradient.head(d) += l2 * theta.head(d);
  }
  return s;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Interpolation helper for isotonic prediction in fit coordinates.
double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double v) {
  if (v <= xs.front()) return ys.front();
  if (v >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), v);
  const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  const double t = (v - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + t * (ys[hi] - ys[lo]);
}

ordered_json split_to_json(const SplitSpec& s) {
  ordered_json j;
  j["train"] = s.train;
  j["val"] = s.val;
  j["test"] = s.test;
  j["salt"] = s.salt;
  return j;
}

}  // namespace

FeatureSet parse_feature_set(std::string_view name) {
  if (name == "grounding") return FeatureSet::Grounding;
  if (name == "baselines") return FeatureSet::Baselines;
  if (name == "meta") return FeatureSet::Meta;
  throw ValidationError("features", "", "unknown feature set '" + std::string(name) + "'");
}

std::string_view feature_set_name(FeatureSet set) {
  switch (set) {
    case FeatureSet::Grounding: return "grounding";
    case FeatureSet::Baselines: return "baselines";
    case FeatureSet::Meta: return "meta";
  }
  return "grounding";
}

std::vector<std::string> FeatureSpec::names() const {
  std::vector<std::string> out;
  if (set != FeatureSet::Baselines) out = grounding_feature_names(include_raw_probs);
  if (set != FeatureSet::Grounding) {
    if (orient_baselines) {
      out.insert(out.end(), {"conf", "neg_ent", "neg_log_ppl"});
    } else {
      out.insert(out.end(), {"conf", "ent", "log_ppl"});
    }
  }
  return out;
}

SentenceFeatures sentence_features(const ScoredSequence& scored, const FeatureSpec& spec) {
  const auto& sig = scored.signals;
  if (sig.empty()) throw ValidationError("tokens", scored.trace.id, "scored sequence has no tokens");
  SentenceFeatures f;
  f.id = scored.trace.id;
  std::vector<double> column(sig.size());

  auto pool_named = [&](const std::string& name, auto&& token_value) {
    for (std::size_t t = 0; t < sig.size(); ++t) column[t] = token_value(sig[t]);
    f.values.push_back(pool_signal(column, spec.pooling, spec.params));
    (void)name;
  };

  if (spec.set != FeatureSet::Baselines) {
    for (const auto& name : grounding_feature_names(spec.include_raw_probs)) {
      pool_named(name, [&](const TokenSignalVector& v) {
        auto value = v.get(name);
        if (!value) throw ValidationError(name, scored.trace.id, "missing signal '" + name + "'");
        return *value;
      });
    }
  }
  if (spec.set != FeatureSet::Grounding) {
    const double sign = spec.orient_baselines ? -1.0 : 1.0;
    pool_named("conf", [](const TokenSignalVector& v) { return v.conf; });
    pool_named("ent", [&](const TokenSignalVector& v) { return sign * v.ent; });
    pool_named("log_ppl", [&](const TokenSignalVector& v) { return sign * std::log(v.ppl); });
  }
  return f;
}

std::vector<SentenceFeatures> build_features(std::span<const ScoredSequence> scored,
                                             const FeatureSpec& spec) {
  std::vector<SentenceFeatures> out;
  out.reserve(scored.size());
  for (const auto& s : scored) out.push_back(sentence_features(s, spec));
  return out;
}

double LogisticFit::decision(std::span<const double> x) const {
  if (x.size() != weights.size()) throw ValidationError("features", "", "feature width mismatch");
  double z = bias;
  for (std::size_t i = 0; i < x.size(); ++i) z += weights[i] * x[i];
  return z;
}

double LogisticFit::predict_proba(std::span<const double> x) const { return sigmoid(decision(x)); }

LogisticFit fit_logistic(const FeatureRows& rows, std::span<const int> labels,
                         const LogisticOptions& options) {
  if (rows.size() != labels.size()) throw ValidationError("labels", "", "rows and labels differ in length");
  const Eigen::MatrixXd x = to_matrix(rows);
  const Eigen::Index n = x.rows(), d = x.cols();
  Eigen::VectorXd y(n);
  std::size_t positives = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ValidationError("labels", "", "labels must be 0 or 1");
    y(i) = labels[i];
    positives += labels[i] == 1;
  }
  if (positives == 0 || positives == static_cast<std::size_t>(n)) {
    throw NumericError("logistic fit needs both classes");
  }

  Eigen::MatrixXd xa(n, d + 1);
  xa.leftCols(d) = x;
  xa.col(d).setOnes();

  // Start from the intercept-only solution.
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  const double rate = static_cast<double>(positives) / static_cast<double>(n);
  theta(d) = std::log(rate) - std::log1p(-rate);

  LogisticState state = logistic_state(xa, y, theta, options.l2, true);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const double gnorm = state.gradient.norm();
    if (gnorm < options.tolerance) {
      LogisticFit fit;
      fit.weights = to_std(theta.head(d));
      fit.bias = theta(d);
      fit.iterations = iter;
      fit.gradient_norm = gnorm;
      return fit;
    }
    const Eigen::VectorXd z = xa * theta;
    Eigen::VectorXd s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = sigmoid(z(i));
      s(i) = p * (1.0 - p);
    }
    Eigen::MatrixXd hessian = xa.transpose() * s.asDiagonal() * xa / static_cast<double>(n);
    hessian.diagonal().head(d).array() += options.l2;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    Eigen::VectorXd step = ldlt.solve(state.gradient);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      hessian.diagonal().array() += 1e-10;
      step = hessian.ldlt().solve(state.gradient);
    }

    // Backtracking (Armijo) line search on the objective.
    double t = 1.0;
    const double slope = state.gradient.dot(step);
    LogisticState next;
    Eigen::VectorXd candidate;
    for (int k = 0; k < 60; ++k) {
      candidate = theta - t * step;
      next = logistic_state(xa, y, candidate, options.l2, false);
      if (next.objective <= state.objective - 1e-4 * t * slope) break;
      t *= 0.5;
    }
    if (next.objective > state.objective) {
      // No descent left at double precision; accept the current point if the
      // objective is flat there.
      break;
    }
    theta = candidate;
    state = logistic_state(xa, y, theta, options.l2, true);
  }
  const double gnorm = state.gradient.norm();
  if (gnorm < options.tolerance) {
    LogisticFit fit;
    fit.weights = to_std(theta.head(d));
    fit.bias = theta(d);
    fit.iterations = options.max_iterations;
    fit.gradient_norm = gnorm;
    return fit;
  }
  throw ConvergenceError("logistic regression did not converge", gnorm);
}

double LinearFit::predict(std::span<const double> x) const {
  if (x.size() != weights.size()) throw ValidationError("features", "", "feature width mismatch");
  double z = bias;
  for (std::size_t i = 0; i < x.size(); ++i) z += weights[i] * x[i];
  return z;
}

LinearFit fit_least_squares(const FeatureRows& rows, std::span<const double> target, double l2) {
  if (rows.size() != target.size()) throw ValidationError("target", "", "rows and targets differ in length");
  const Eigen::MatrixXd x = to_matrix(rows);
  const Eigen::Index n = x.rows(), d = x.cols();
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = target[i];

  // Center so the bias stays unpenalized.
  const Eigen::RowVectorXd mean_x = x.colwise().mean();
  const double mean_y = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - mean_x;
  Eigen::MatrixXd gram = xc.transpose() * xc / static_cast<double>(n);
  gram.diagonal().array() += l2;
  const Eigen::VectorXd rhs = xc.transpose() * (y.array() - mean_y).matrix() / static_cast<double>(n);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const Eigen::VectorXd w = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !w.allFinite()) throw NumericError("least-squares solve failed");

  LinearFit fit;
  fit.weights = to_std(w);
  fit.bias = mean_y - mean_x.dot(w);
  (void)d;
  return fit;
}

LinearCalibration fit_linear_calibration(std::span<const double> r, std::span<const double> target) {
  if (r.size() != target.size() || r.size() < 2) {
    throw NumericError("linear calibration needs >= 2 paired points");
  }
  FeatureRows rows(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) rows[i] = {r[i]};
  const LinearFit fit = fit_least_squares(rows, target, 0.0);
  return {fit.weights[0], fit.bias};
}

double IsotonicModel::predict(double v) const {
  const double u = direction == IsoDirection::Nonincreasing ? -v : v;
  return interpolate(x, y, u);
}

std::vector<double> IsotonicModel::predict(std::span<const double> v) const {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = predict(v[i]);
  return out;
}

IsotonicModel fit_isotonic(std::span<const double> x_in, std::span<const double> y_in,
                           IsoDirection direction) {
  if (x_in.size() != y_in.size()) throw ValidationError("y", "", "isotonic inputs differ in length");
  const double sign = direction == IsoDirection::Nonincreasing ? -1.0 : 1.0;
  std::vector<std::size_t> order(x_in.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sign * x_in[a] < sign * x_in[b]; });

  // Pre-average ties in x into weighted points.
  struct Block {
    double x_lo, x_hi;
    long double sum_wy;
    long double weight;
    double value() const { return static_cast<double>(sum_wy / weight); }
  };
  std::vector<Block> points;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double xv = sign * x_in[order[k]];
    const double yv = y_in[order[k]];
    if (!std::isfinite(xv) || !std::isfinite(yv)) throw NumericError("non-finite isotonic input");
    if (!points.empty() && points.back().x_hi == xv) {
      points.back().sum_wy += yv;
      points.back().weight += 1;
    } else {
      points.push_back({xv, xv, yv, 1});
    }
  }
  if (points.size() < 2) throw NumericError("isotonic fit needs at least two distinct x values");

  // Pool adjacent violators.
  std::vector<Block> stack;
  for (const auto& p : points) {
    stack.push_back(p);
    while (stack.size() > 1 && stack[stack.size() - 2].value() > stack.back().value()) {
      Block top = stack.back();
      stack.pop_back();
      Block& prev = stack.back();
      prev.x_hi = top.x_hi;
      prev.sum_wy += top.sum_wy;
      prev.weight += top.weight;
    }
  }

  IsotonicModel model;
  model.direction = direction;
  for (const auto& b : stack) {
    const double v = b.value();
    model.x.push_back(b.x_lo);
    model.y.push_back(v);
    if (b.x_hi != b.x_lo) {
      model.x.push_back(b.x_hi);
      model.y.push_back(v);
    }
  }
  return model;
}

ChairCalibration calibrate_chair(std::span<const double> reliability, std::span<const double> chair) {
  if (reliability.size() != chair.size()) throw ValidationError("chair", "", "reliability and CHAIR differ in length");
  std::vector<double> deficit(reliability.size()), complement(chair.size());
  for (std::size_t i = 0; i < reliability.size(); ++i) {
    deficit[i] = 1.0 - reliability[i];
    complement[i] = 1.0 - chair[i];
  }
  ChairCalibration c;
  c.isotonic = fit_isotonic(deficit, chair, IsoDirection::Nondecreasing);
  c.linear = fit_linear_calibration(reliability, complement);
  return c;
}

double iso_score(const IsotonicModel& iso, std::span<const double> reliability,
                 std::span<const double> chair) {
  std::vector<double> predicted(reliability.size());
  for (std::size_t i = 0; i < reliability.size(); ++i) predicted[i] = iso.predict(1.0 - reliability[i]);
  return pearson(predicted, chair);
}

Task parse_task(std::string_view name) {
  if (name == "detect") return Task::Detect;
  if (name == "regress") return Task::Regress;
  throw ValidationError("task", "", "unknown task '" + std::string(name) + "'");
}

std::string_view task_name(Task task) { return task == Task::Detect ? "detect" : "regress"; }

double FittedModel::score(std::span<const double> x) const {
  if (x.size() != weights.size()) {
    throw ValidationError("features", "", "model expects " + std::to_string(weights.size()) +
                                              " features, got " + std::to_string(x.size()));
  }
  long double z = bias;
  for (std::size_t i = 0; i < x.size(); ++i) z += static_cast<long double>(weights[i]) * x[i];
  return task == Task::Detect ? sigmoid(static_cast<double>(z)) : static_cast<double>(z);
}

double FittedModel::score(const ScoredSequence& scored) const {
  return score(sentence_features(scored, features).values);
}

std::optional<FusionWeights> FittedModel::token_fusion_weights() const {
  if (task != Task::Detect || features.set == FeatureSet::Baselines) return std::nullopt;
  FusionWeights w;
  w.w_fb = {-weights[0], -weights[1]};
  const std::size_t width = counterfactual_width(features.include_raw_probs);
  for (std::size_t i = 0; i < width; ++i) w.w_cf.push_back(-weights[2 + i]);
  w.bias = -bias;
  w.feature_names = grounding_feature_names(features.include_raw_probs);
  return w;
}

std::string FittedModel::to_json() const {
  ordered_json j;
  j["format"] = "groundcheck-model-v1";
  j["task"] = std::string(task_name(task));
  j["feature_set"] = std::string(feature_set_name(features.set));
  j["pooling"] = pooling_name(features.pooling, features.params);
  j["pooling_params"] = {{"q", features.params.q}, {"alpha", features.params.alpha},
                         {"epsilon", features.params.epsilon}, {"ema_direction", "forward-final"}};
  j["include_raw_probs"] = features.include_raw_probs;
  j["orient_baselines"] = features.orient_baselines;
  j["feature_order_tag"] = feature_order_tag;
  j["feature_names"] = feature_names;
  j["weights"] = weights;
  j["bias"] = bias;
  if (linear) j["linear_calibration"] = {{"alpha", linear->alpha}, {"beta", linear->beta}};
  if (isotonic) {
    j["isotonic"] = {{"direction", isotonic->direction == IsoDirection::Nondecreasing ? "nondecreasing" : "nonincreasing"},
                     {"input", "1-R"},
                     {"x", isotonic->x},
                     {"y", isotonic->y}};
  }
  if (task == Task::Detect) {
    j["weights_story"] = "sentence-level head on pooled per-signal features; token fusion weights are the negated grounding part";
  }
  ordered_json m;
  m["dataset"] = meta.dataset;
  m["model"] = meta.model;
  m["seed"] = meta.seed;
  m["l2"] = meta.l2;
  m["theta"] = meta.theta;
  m["split"] = split_to_json(meta.split);
  m["calibration_split"] = meta.calibration_split;
  m["n_train"] = meta.n_train;
  m["n_calibration"] = meta.n_calibration;
  m["iterations"] = meta.iterations;
  m["gradient_norm"] = meta.gradient_norm;
  m["iso_score_definition"] = "pearson(ISO(1-R), CHAIR) on held-out split";
  m["tool_version"] = meta.tool_version;
  j["training"] = std::move(m);
  return j.dump(2) + "\n";
}

FittedModel FittedModel::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("malformed model artifact: ") + e.what());
  }
  FittedModel m;
  try {
    if (j.value("format", std::string()) != "groundcheck-model-v1") {
      throw ValidationError("format", "", "not a groundcheck model artifact");
    }
    m.task = parse_task(j.at("task").get<std::string>());
    m.features.set = parse_feature_set(j.at("feature_set").get<std::string>());
    m.features.pooling = parse_pooling(j.at("pooling").get<std::string>());
    const auto& pp = j.at("pooling_params");
    m.features.params.q = pp.at("q").get<double>();
    m.features.params.alpha = pp.at("alpha").get<double>();
    m.features.params.epsilon = pp.at("epsilon").get<double>();
    m.features.include_raw_probs = j.at("include_raw_probs").get<bool>();
    m.features.orient_baselines = j.value("orient_baselines", true);
    m.feature_order_tag = j.at("feature_order_tag").get<std::string>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    if (j.contains("linear_calibration")) {
      m.linear = LinearCalibration{j["linear_calibration"].at("alpha").get<double>(),
                                   j["linear_calibration"].at("beta").get<double>()};
    }
    if (j.contains("isotonic")) {
      IsotonicModel iso;
      iso.direction = j["isotonic"].at("direction").get<std::string>() == "nonincreasing"
                          ? IsoDirection::Nonincreasing
                          : IsoDirection::Nondecreasing;
      iso.x = j["isotonic"].at("x").get<std::vector<double>>();
      iso.y = j["isotonic"].at("y").get<std::vector<double>>();
      m.isotonic = std::move(iso);
    }
    const auto& t = j.at("training");
    m.meta.dataset = t.value("dataset", "");
    m.meta.model = t.value("model", "");
    m.meta.seed = t.value("seed", std::uint64_t{0});
    m.meta.l2 = t.value("l2", 1e-6);
    m.meta.theta = t.value("theta", 0.0);
    if (t.contains("split")) {
      const auto& s = t["split"];
      m.meta.split = SplitSpec{s.at("train").get<double>(), s.at("val").get<double>(),
                               s.at("test").get<double>(), s.at("salt").get<std::string>()};
    }
    m.meta.calibration_split = t.value("calibration_split", "val");
    m.meta.n_train = t.value("n_train", std::size_t{0});
    m.meta.n_calibration = t.value("n_calibration", std::size_t{0});
    m.meta.iterations = t.value("iterations", 0);
    m.meta.gradient_norm = t.value("gradient_norm", 0.0);
    m.meta.tool_version = t.value("tool_version", "");
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("bad model artifact field: ") + e.what());
  }
  if (m.feature_order_tag != kFeatureOrderTag) {
    throw ValidationError("feature_order_tag", "", "unsupported feature order '" + m.feature_order_tag + "'");
  }
  if (m.feature_names != m.features.names()) {
    throw ValidationError("feature_names", "", "artifact feature names do not match its feature set");
  }
  if (m.weights.size() != m.feature_names.size()) {
    throw ValidationError("weights", "", "weight count does not match feature count");
  }
  return m;
}

void FittedModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write model: " + path);
  out << to_json();
}

FittedModel FittedModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace groundcheck
