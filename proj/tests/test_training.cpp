#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "planted_kg.hpp"
#include "rng.hpp"
#include "toy_graphs.hpp"
#include "training.hpp"

using namespace polo;
using namespace polo::testsupport;

namespace {

// Compound/gene/disease micro-graph with one 2-hop rule path to flu, one to
// cold, a non-rule relation (binds) and a direct treats edge for the NO_OP
// collapse case.
ToyKg reward_kg() {
  return make_toy({{"Compound::aspirin", "links", "Gene::g1"},
                   {"Gene::g1", "codes", "Disease::flu"},
                   {"Compound::aspirin", "links", "Gene::g2"},
                   {"Gene::g2", "codes", "Disease::cold"},
                   {"Compound::aspirin", "binds", "Gene::g1"},
                   {"Compound::aspirin", "binds", "Gene::g2"},
                   {"Compound::aspirin", "treats", "Disease::flu"}});
}

RuleSet reward_rules(const ToyKg& kg) {
  RuleSet rs;
  rs.rules.push_back(
      rule_from_names(kg, 0.446, "treats", {"Compound", "links", "Gene", "codes", "Disease"}));
  rs.rules.push_back(rule_from_names(kg, 0.184, "treats", {"Compound", "treats", "Disease"}));
  rs.head_relation = kg.relation("treats");
  rs.max_body_length = 2;
  return rs;
}

Rollout make_walk(const ToyKg& kg, const std::vector<std::string>& entities,
                  const std::vector<std::string>& relations) {
  Rollout walk;
  for (const auto& e : entities) walk.entities.push_back(kg.entity(e));
  for (const auto& r : relations) walk.relations.push_back(kg.relation(r));
  return walk;
}

bool params_equal(const PolicyParams& a, const PolicyParams& b) {
  PolicyParams ca = a, cb = b;
  auto ba = param_blocks(ca);
  auto bb = param_blocks(cb);
  if (ba.size() != bb.size()) return false;
  for (size_t i = 0; i < ba.size(); ++i) {
    if (ba[i].first != bb[i].first) return false;
    if (ba[i].second->rows() != bb[i].second->rows()) return false;
    if (ba[i].second->cols() != bb[i].second->cols()) return false;
    if (!(ba[i].second->array() == bb[i].second->array()).all()) return false;
  }
  return true;
}

// Small planted dataset that keeps the training loop fast but exercises all
// of its moving parts (batching, validation, rule matching).
struct TrainFixture {
  Dataset ds;
  RuleSet rules;
  PolicyConfig pcfg;
  TrainConfig tcfg;
  RewardConfig rcfg;
};

TrainFixture small_planted(uint64_t seed = 5) {
  PlantedSpec spec;
  spec.num_pairs = 10;
  spec.num_noise = 8;
  spec.misc_per_compound = 3;
  spec.ggi_per_gene = 2;
  spec.chatter_per_noise = 2;
  spec.train_pairs = 6;
  spec.valid_pairs = 2;
  spec.test_pairs = 2;
  spec.seed = seed;
  PlantedPaths paths = write_planted_kg(fresh_temp_dir("train_fixture"), spec);

  TrainFixture f;
  f.ds = Dataset::load(paths.data_dir, "treats");
  f.rules = parse_rules(paths.rules_file, f.ds);
  f.pcfg.embedding_dim = 8;
  f.pcfg.lstm_layers = 1;
  f.pcfg.hidden_dim = 8;
  f.pcfg.path_length = 2;
  f.pcfg.train_rollouts = 6;
  f.pcfg.test_rollouts = 8;
  f.pcfg.max_actions = 32;
  f.tcfg.learning_rate = 0.01;
  f.tcfg.entropy_beta = 0.02;
  f.tcfg.epochs = 2;
  f.tcfg.batch_size = 4;
  f.tcfg.seed = 11;
  return f;
}

}  // namespace

TEST_CASE("reward is indicator plus lambda-weighted rule score") {
  ToyKg kg = reward_kg();
  RuleSet rs = reward_rules(kg);
  EntityId flu = kg.entity("Disease::flu");

  Rollout correct_match = make_walk(kg, {"Compound::aspirin", "Gene::g1", "Disease::flu"},
                                    {"links", "codes"});
  Rollout wrong_match = make_walk(kg, {"Compound::aspirin", "Gene::g2", "Disease::cold"},
                                  {"links", "codes"});
  Rollout correct_plain = make_walk(kg, {"Compound::aspirin", "Gene::g1", "Disease::flu"},
                                    {"binds", "codes"});
  Rollout wrong_plain = make_walk(kg, {"Compound::aspirin", "Gene::g2", "Disease::cold"},
                                  {"binds", "codes"});

  RewardConfig cfg;
  cfg.b_mode = RewardConfig::BMode::Always;
  cfg.lambda = 1.0;
  CHECK(compute_reward(kg.graph, correct_match, flu, rs, cfg) == 1.0 + 0.446);
  CHECK(compute_reward(kg.graph, wrong_match, flu, rs, cfg) == 0.446);
  CHECK(compute_reward(kg.graph, correct_plain, flu, rs, cfg) == 1.0);
  CHECK(compute_reward(kg.graph, wrong_plain, flu, rs, cfg) == 0.0);

  cfg.lambda = 2.0;
  CHECK(compute_reward(kg.graph, correct_match, flu, rs, cfg) == 1.0 + 2.0 * 0.446);
  CHECK(compute_reward(kg.graph, wrong_match, flu, rs, cfg) == 2.0 * 0.446);
}

TEST_CASE("on-correct mode withholds the bonus from wrong answers") {
  ToyKg kg = reward_kg();
  RuleSet rs = reward_rules(kg);
  EntityId flu = kg.entity("Disease::flu");
  Rollout correct_match = make_walk(kg, {"Compound::aspirin", "Gene::g1", "Disease::flu"},
                                    {"links", "codes"});
  Rollout wrong_match = make_walk(kg, {"Compound::aspirin", "Gene::g2", "Disease::cold"},
                                  {"links", "codes"});

  RewardConfig cfg;
  cfg.b_mode = RewardConfig::BMode::OnCorrect;
  cfg.lambda = 1.0;
  CHECK(compute_reward(kg.graph, correct_match, flu, rs, cfg) == 1.0 + 0.446);
  CHECK(compute_reward(kg.graph, wrong_match, flu, rs, cfg) == 0.0);
}

TEST_CASE("lambda zero reduces the reward to the correctness indicator") {
  ToyKg kg = reward_kg();
  RuleSet rs = reward_rules(kg);
  EntityId flu = kg.entity("Disease::flu");
  RewardConfig cfg;
  cfg.lambda = 0.0;

  auto indicator = [&](const Rollout& w) { return w.entities.back() == flu ? 1.0 : 0.0; };
  for (const Rollout& w :
       {make_walk(kg, {"Compound::aspirin", "Gene::g1", "Disease::flu"}, {"links", "codes"}),
        make_walk(kg, {"Compound::aspirin", "Gene::g2", "Disease::cold"}, {"links", "codes"}),
        make_walk(kg, {"Compound::aspirin", "Gene::g1", "Disease::flu"}, {"binds", "codes"}),
        make_walk(kg, {"Compound::aspirin", "Gene::g2", "Disease::cold"}, {"binds", "codes"})}) {
    for (auto mode : {RewardConfig::BMode::Always, RewardConfig::BMode::OnCorrect}) {
      cfg.b_mode = mode;
      CHECK(compute_reward(kg.graph, w, flu, rs, cfg) == indicator(w));
    }
  }
}

TEST_CASE("stay-in-place steps collapse before rule matching") {
  ToyKg kg = reward_kg();
  RuleSet rs = reward_rules(kg);
  EntityId flu = kg.entity("Disease::flu");
  // treats then idle: collapses to the 1-hop body of the second rule.
  Rollout walk = make_walk(kg, {"Compound::aspirin", "Disease::flu", "Disease::flu"},
                           {"treats", "NO_OP"});
  RewardConfig cfg;
  cfg.lambda = 2.0;
  CHECK(compute_reward(kg.graph, walk, flu, rs, cfg) == 1.0 + 2.0 * 0.184);
}

TEST_CASE("empty rule set leaves only the indicator even with a bonus weight") {
  ToyKg kg = reward_kg();
  RuleSet empty;
  EntityId flu = kg.entity("Disease::flu");
  Rollout walk = make_walk(kg, {"Compound::aspirin", "Gene::g1", "Disease::flu"},
                           {"links", "codes"});
  RewardConfig cfg;
  cfg.lambda = 1.0;
  CHECK(compute_reward(kg.graph, walk, flu, empty, cfg) == 1.0);
}

TEST_CASE("sampled rollouts stay within the reward bound") {
  ToyKg kg = reward_kg();
  RuleSet rs = reward_rules(kg);
  EntityId flu = kg.entity("Disease::flu");
  PolicyConfig pcfg;
  pcfg.embedding_dim = 4;
  pcfg.lstm_layers = 1;
  pcfg.hidden_dim = 6;
  pcfg.path_length = 2;
  pcfg.max_actions = 16;
  Rng init = Rng::derive(3, "init");
  PolicyParams params = PolicyParams::init(pcfg, kg.entities.size(), kg.relations.size(), init);
  RewardConfig cfg;
  cfg.lambda = 1.7;
  double max_score = 0.446;
  Rng rng = Rng::derive(3, "walks");
  for (int i = 0; i < 30; ++i) {
    Rollout w = rollout(kg.graph, pcfg, params, kg.entity("Compound::aspirin"), rng);
    double r = compute_reward(kg.graph, w, flu, rs, cfg);
    CHECK(std::isfinite(r));
    CHECK(r >= 0.0);
    CHECK(r <= 1.0 + cfg.lambda * max_score);
  }
}

TEST_CASE("baseline is an exponential moving average") {
  CHECK(update_baseline(0.0, 1.0, 0.0) == 1.0);   // zero decay adopts the batch mean
  CHECK(update_baseline(1.0, 1.0, 0.37) == 1.0);  // fixed point
  CHECK(update_baseline(0.0, 2.0, 0.5) == 1.0);
  CHECK(update_baseline(4.0, 0.0, 0.75) == 3.0);
}

TEST_CASE("training and reward configs reject out-of-range values") {
  TrainConfig t;
  t.learning_rate = 0.0;
  CHECK_THROWS_AS(t.validate(), Error);
  t = TrainConfig{};
  t.entropy_beta = -0.1;
  CHECK_THROWS_AS(t.validate(), Error);
  t = TrainConfig{};
  t.epochs = -1;
  CHECK_THROWS_AS(t.validate(), Error);
  t = TrainConfig{};
  t.batch_size = 0;
  CHECK_THROWS_AS(t.validate(), Error);
  t = TrainConfig{};
  t.baseline_decay = 1.0;
  CHECK_THROWS_AS(t.validate(), Error);
  t = TrainConfig{};
  t.baseline_decay = -0.01;
  CHECK_THROWS_AS(t.validate(), Error);
  t = TrainConfig{};
  t.grad_clip_norm = -1.0;
  CHECK_THROWS_AS(t.validate(), Error);
  t = TrainConfig{};
  CHECK_NOTHROW(t.validate());

  RewardConfig r;
  r.lambda = -0.5;
  CHECK_THROWS_AS(r.validate(), Error);
}

TEST_CASE("zero epochs hand back the freshly initialized parameters") {
  TrainFixture f = small_planted();
  f.tcfg.epochs = 0;
  TrainResult res = train(f.ds, f.rules, f.pcfg, f.rcfg, f.tcfg);
  CHECK(res.history.empty());
  CHECK(res.best_epoch == 0);
  CHECK(res.best_val_hits1 == 0.0);

  Rng init = Rng::derive(f.tcfg.seed, "init");
  PolicyParams expected =
      PolicyParams::init(f.pcfg, f.ds.entities.size(), f.ds.relations.size(), init);
  CHECK(params_equal(res.params, expected));
}

TEST_CASE("single-threaded training is bit-deterministic") {
  TrainFixture f = small_planted();
  TrainResult a = train(f.ds, f.rules, f.pcfg, f.rcfg, f.tcfg, 1);
  TrainResult b = train(f.ds, f.rules, f.pcfg, f.rcfg, f.tcfg, 1);
  REQUIRE(a.history.size() == b.history.size());
  for (size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].mean_reward == b.history[i].mean_reward);
    CHECK(a.history[i].rule_match_rate == b.history[i].rule_match_rate);
    CHECK(a.history[i].val_hits1_pruned == b.history[i].val_hits1_pruned);
  }
  CHECK(a.best_epoch == b.best_epoch);
  CHECK(params_equal(a.params, b.params));
}

TEST_CASE("training reports per-epoch diagnostics in order") {
  TrainFixture f = small_planted();
  f.tcfg.epochs = 3;
  std::vector<EpochDiagnostics> seen;
  TrainResult res = train(f.ds, f.rules, f.pcfg, f.rcfg, f.tcfg, 1, nullptr,
                          [&](const EpochDiagnostics& d) { seen.push_back(d); });
  REQUIRE(res.history.size() == 3);
  REQUIRE(seen.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(res.history[i].epoch == i + 1);
    CHECK(seen[i].epoch == i + 1);
    CHECK(seen[i].mean_reward == res.history[i].mean_reward);
    CHECK(res.history[i].mean_reward >= 0.0);
    CHECK(res.history[i].rule_match_rate >= 0.0);
    CHECK(res.history[i].rule_match_rate <= 1.0);
    CHECK(res.history[i].val_hits1_pruned >= 0.0);
    CHECK(res.history[i].val_hits1_pruned <= 1.0);
    if (res.history[i].rule_accuracy) {
      CHECK(*res.history[i].rule_accuracy >= 0.0);
      CHECK(*res.history[i].rule_accuracy <= 1.0);
      CHECK(res.history[i].rule_match_rate > 0.0);
    }
  }
  CHECK(res.best_epoch >= 1);
  CHECK(res.best_epoch <= 3);
  CHECK(res.params.all_finite());
  // The kept checkpoint's validation score matches the recorded best.
  double best = -1.0;
  for (const auto& d : res.history) best = std::max(best, d.val_hits1_pruned);
  CHECK(res.best_val_hits1 == best);
}

TEST_CASE("an empty train split cannot be trained on") {
  ToyKg kg = reward_kg();
  auto dir = fresh_temp_dir("empty_train");
  write_dataset_dir(dir, /*train=*/{}, {}, {},
                    /*graph=*/{"Compound::aspirin\ttreats\tDisease::flu"});
  Dataset ds = Dataset::load(dir, "treats");
  RuleSet rules;
  PolicyConfig pcfg;
  pcfg.embedding_dim = 4;
  pcfg.lstm_layers = 1;
  pcfg.hidden_dim = 4;
  pcfg.path_length = 2;
  TrainConfig tcfg;
  tcfg.epochs = 1;
  CHECK_THROWS_AS(train(ds, rules, pcfg, RewardConfig{}, tcfg), Error);
}

TEST_CASE("mismatched warm-start parameters are rejected") {
  TrainFixture f = small_planted();
  PolicyConfig other = f.pcfg;
  Rng init = Rng::derive(1, "init");
  PolicyParams wrong = PolicyParams::init(other, 3, 3, init);  // wrong vocabulary sizes
  CHECK_THROWS_AS(train(f.ds, f.rules, f.pcfg, f.rcfg, f.tcfg, 1, &wrong), Error);
}

TEST_CASE("non-finite parameters abort training with a divergence error") {
  TrainFixture f = small_planted();
  Rng init = Rng::derive(f.tcfg.seed, "init");
  PolicyParams poisoned =
      PolicyParams::init(f.pcfg, f.ds.entities.size(), f.ds.relations.size(), init);
  poisoned.entity_embeddings(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    train(f.ds, f.rules, f.pcfg, f.rcfg, f.tcfg, 1, &poisoned);
    FAIL("expected a divergence error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("diverged") != std::string::npos);
  }
}
