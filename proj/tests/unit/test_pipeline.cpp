#include <doctest.h>

#include "groundcheck/pipeline.hpp"
#include "groundcheck/synthetic.hpp"

using namespace groundcheck;

namespace {

LabeledSet labeled(GeneratorConfig cfg, std::size_t n) {
  cfg.n_sequences = n;
  auto d = generate(cfg);
  return label_sequences(score_all(d.traces, ScoreOptions{}), LabelOptions{});
}

}  // namespace

TEST_CASE("labels follow chair and theta") {
  auto data = labeled(GeneratorConfig::gf_like(), 200);
  REQUIRE(data.chair.size() == 200);
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(data.labels[i] == (data.chair[i] > 0.0 ? 1 : 0));
  LabelOptions strict;
  strict.theta = 0.5;
  auto d2 = label_sequences(data.scored, strict);
  for (std::size_t i = 0; i < d2.size(); ++i) CHECK(d2.labels[i] == (d2.chair[i] > 0.5 ? 1 : 0));
}

TEST_CASE("split rows partition the data") {
  auto data = labeled(GeneratorConfig::gf_like(), 300);
  auto p = split_rows(data, SplitSpec{});
  CHECK(p.train.size() + p.val.size() + p.test.size() == 300);
  auto sub = data.subset(p.test);
  CHECK(sub.size() == p.test.size());
  CHECK(sub.chair[0] == data.chair[p.test[0]]);
}

TEST_CASE("detection and regression heads train and evaluate") {
  auto data = labeled(GeneratorConfig::gf_like(), 800);
  auto test = data.subset(split_rows(data, SplitSpec{}).test);

  TrainOptions det;
  auto m = train_model(data, det, 0.0);
  CHECK(m.task == Task::Detect);
  CHECK(m.isotonic.has_value());
  CHECK(m.meta.n_train > m.meta.n_calibration);
  auto e = evaluate_model(m, test);
  REQUIRE(e.detection.has_value());
  CHECK(e.detection->auc > 0.85);
  REQUIRE(e.regression.has_value());
  CHECK(e.regression->spearman < 0.0);
  auto fusion = m.token_fusion_weights();
  REQUIRE(fusion.has_value());
  CHECK(fusion->bias == -m.bias);

  TrainOptions reg;
  reg.task = Task::Regress;
  auto r = train_model(data, reg, 0.0);
  auto er = evaluate_model(r, test);
  REQUIRE(er.regression.has_value());
  CHECK(er.regression->spearman < -0.5);
  CHECK(er.regression->iso_score > 0.5);
  auto rel = model_reliability(r, test);
  CHECK(rel.size() == test.size());

  auto rows = evaluation_rows(er, "test", "a", "a");
  CHECK(!rows.empty());
}

TEST_CASE("baseline and meta heads") {
  auto data = labeled(GeneratorConfig::gf_like(), 600);
  for (auto set : {FeatureSet::Baselines, FeatureSet::Meta}) {
    TrainOptions o;
    o.features.set = set;
    auto m = train_model(data, o, 0.0);
    CHECK(m.feature_names == o.features.names());
    if (set == FeatureSet::Baselines) CHECK(!m.token_fusion_weights().has_value());
  }
}

TEST_CASE("transfer grid has zero deltas on the diagonal") {
  auto a = labeled(GeneratorConfig::gf_like(), 500);
  auto b = labeled(GeneratorConfig::gb_like(), 500);
  TrainOptions reg;
  reg.task = Task::Regress;
  std::vector<TransferDomain> doms = {{"a", train_model(a, reg, 0.0), a}, {"b", train_model(b, reg, 0.0), b}};
  auto cells = transfer_matrix(doms);
  REQUIRE(cells.size() == 4);
  for (const auto& c : cells) {
    if (c.source == c.target) {
      CHECK(c.delta_spearman == 0.0);
      CHECK(c.delta_iso == 0.0);
    }
  }
  CHECK(!transfer_rows(cells, "test").empty());
}

TEST_CASE("transfer with mismatched features names the missing signal") {
  auto a = labeled(GeneratorConfig::gf_like(), 300);
  TrainOptions o;
  o.features.include_raw_probs = true;
  auto raw_scored = generate([] {
    auto c = GeneratorConfig::gf_like();
    c.n_sequences = 300;
    return c;
  }());
  ScoreOptions so;
  so.signals.include_raw_probs = true;
  so.weights = FusionWeights::defaults(true);
  auto with_raw = label_sequences(score_all(raw_scored.traces, so), LabelOptions{});
  auto m = train_model(with_raw, o, 0.0);
  std::vector<TransferDomain> doms = {{"raw", m, with_raw}, {"plain", train_model(a, TrainOptions{}, 0.0), a}};
  try {
    transfer_matrix(doms);
    FAIL("expected error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("p_vid_raw") != std::string::npos);
  }
}
