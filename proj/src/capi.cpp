#include "polo/polo.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "checkpoint.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "kg.hpp"
#include "render.hpp"
#include "rules.hpp"
#include "training.hpp"

struct polo_settings {
  polo::RunSettings v;
};
struct polo_dataset {
  polo::Dataset v;
};
struct polo_ruleset {
  polo::RuleSet v;
};
struct polo_model {
  polo::Checkpoint v;
};

namespace {

thread_local std::string g_last_error;

void set_error(std::string msg) { g_last_error = std::move(msg); }

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) return nullptr;
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

polo_status status_of(polo::Error::Kind kind) {
  switch (kind) {
    case polo::Error::Kind::Usage:
      return POLO_USAGE_ERROR;
    case polo::Error::Kind::Data:
      return POLO_DATA_ERROR;
    case polo::Error::Kind::Runtime:
      return POLO_RUNTIME_ERROR;
  }
  return POLO_RUNTIME_ERROR;
}

template <typename Fn>
polo_status guarded(Fn&& fn) {
  try {
    fn();
    return POLO_OK;
  } catch (const polo::Error& e) {
    set_error(e.what());
    return status_of(e.kind());
  } catch (const std::exception& e) {
    set_error(e.what());
    return POLO_RUNTIME_ERROR;
  } catch (...) {
    set_error("unknown error");
    return POLO_RUNTIME_ERROR;
  }
}

void require(bool ok, const char* what) {
  if (!ok) polo::throw_usage(what);
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

// The policy shape the checkpoint was trained with must agree with the
// active settings and the dataset, or the tables cannot line up.
void check_model_compatible(const polo::Dataset& ds, const polo::Checkpoint& ck,
                            const polo::PolicyConfig& active) {
  if (ck.config.embedding_dim != active.embedding_dim ||
      ck.config.lstm_layers != active.lstm_layers || ck.config.hidden_dim != active.hidden_dim) {
    polo::throw_data("checkpoint shape mismatch: trained with embedding_dim=" +
                     std::to_string(ck.config.embedding_dim) +
                     " lstm_layers=" + std::to_string(ck.config.lstm_layers) +
                     " hidden_dim=" + std::to_string(ck.config.hidden_dim) +
                     ", settings request embedding_dim=" + std::to_string(active.embedding_dim) +
                     " lstm_layers=" + std::to_string(active.lstm_layers) +
                     " hidden_dim=" + std::to_string(active.hidden_dim));
  }
  if (ck.params.entity_embeddings.rows() != static_cast<Eigen::Index>(ds.entities.size()) ||
      ck.params.relation_embeddings.rows() != static_cast<Eigen::Index>(ds.relations.size())) {
    polo::throw_data(
        "checkpoint shape mismatch: model has " +
        std::to_string(ck.params.entity_embeddings.rows()) + " entity and " +
        std::to_string(ck.params.relation_embeddings.rows()) + " relation rows, dataset has " +
        std::to_string(ds.entities.size()) + " and " + std::to_string(ds.relations.size()));
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) polo::throw_runtime("cannot write " + path.string());
  out << text;
  if (!out) polo::throw_runtime("write failed for " + path.string());
}

}  // namespace

extern "C" {

const char* polo_version(void) { return "1.0.0"; }

const char* polo_last_error(void) { return g_last_error.c_str(); }

void polo_string_free(char* s) { std::free(s); }

polo_settings* polo_settings_create(void) { return new (std::nothrow) polo_settings(); }

void polo_settings_close(polo_settings* s) { delete s; }

polo_status polo_settings_load_file(polo_settings* s, const char* path) {
  return guarded([&] {
    require(s && path, "polo_settings_load_file: null argument");
    polo::load_settings_file(s->v, path);
  });
}

polo_status polo_settings_set(polo_settings* s, const char* key, const char* value) {
  return guarded([&] {
    require(s && key && value, "polo_settings_set: null argument");
    polo::apply_setting(s->v, key, value);
  });
}

polo_status polo_settings_dump(const polo_settings* s, char** out_text) {
  return guarded([&] {
    require(s && out_text, "polo_settings_dump: null argument");
    *out_text = dup_string(polo::resolved_text(s->v));
    if (!*out_text) polo::throw_runtime("out of memory");
  });
}

polo_status polo_dataset_open(const char* dir, const polo_settings* s, polo_dataset** out) {
  return guarded([&] {
    require(dir && s && out, "polo_dataset_open: null argument");
    auto handle = std::make_unique<polo_dataset>();
    handle->v = polo::Dataset::load(dir, s->v.target_relation);
    *out = handle.release();
  });
}

void polo_dataset_close(polo_dataset* d) { delete d; }

polo_status polo_dataset_counts(const polo_dataset* d, uint64_t* out_entities,
                                uint64_t* out_relations, uint64_t* out_triples) {
  return guarded([&] {
    require(d, "polo_dataset_counts: null dataset");
    if (out_entities) *out_entities = d->v.entities.size();
    if (out_relations) {
      uint64_t base = 0;
      for (size_t r = 1; r < d->v.relations.size(); ++r) {
        if (!d->v.relations.is_inverse(static_cast<polo::RelationId>(r))) ++base;
      }
      *out_relations = base;
    }
    if (out_triples) *out_triples = d->v.graph.num_base_triples();
  });
}

polo_status polo_type_stats(const polo_dataset* d, char** out_tsv) {
  return guarded([&] {
    require(d && out_tsv, "polo_type_stats: null argument");
    std::string text = "type\tentities\tavg_degree\n";
    for (const polo::TypeStat& st : polo::type_statistics(d->v.graph)) {
      text += d->v.types.name(st.type);
      text += '\t';
      text += std::to_string(st.entity_count);
      text += '\t';
      text += fmt_double(st.avg_degree);
      text += '\n';
    }
    *out_tsv = dup_string(text);
    if (!*out_tsv) polo::throw_runtime("out of memory");
  });
}

polo_status polo_ruleset_open(const polo_dataset* d, const char* path, polo_ruleset** out) {
  return guarded([&] {
    require(d && path && out, "polo_ruleset_open: null argument");
    auto handle = std::make_unique<polo_ruleset>();
    handle->v = polo::parse_rules(path, d->v);
    *out = handle.release();
  });
}

void polo_ruleset_close(polo_ruleset* r) { delete r; }

size_t polo_ruleset_size(const polo_ruleset* r) { return r ? r->v.size() : 0; }

polo_status polo_estimate_confidence(const polo_dataset* d, const polo_ruleset* r,
                                     const polo_settings* s, char** out_tsv) {
  return guarded([&] {
    require(d && r && s && out_tsv, "polo_estimate_confidence: null argument");
    s->v.validate();
    std::string text = "rule\tconfidence\tsamples_completed\n";
    for (const polo::Rule& rule : r->v.rules) {
      std::string label = polo::format_metapath(d->v.types, d->v.relations, rule.body);
      try {
        polo::ConfidenceEstimate est = polo::estimate_confidence(
            d->v.graph, rule, s->v.confidence_samples, s->v.train.seed, s->v.threads);
        text += label + '\t' + fmt_double(est.score) + '\t' + std::to_string(est.body_support) +
                '\n';
      } catch (const polo::Error& e) {
        throw polo::Error(e.kind(), "rule " + label + ": " + e.what());
      }
    }
    *out_tsv = dup_string(text);
    if (!*out_tsv) polo::throw_runtime("out of memory");
  });
}

polo_status polo_train(const polo_dataset* d, const polo_ruleset* r, const polo_settings* s,
                       const char* out_dir, polo_epoch_callback cb, void* user_data) {
  return guarded([&] {
    require(d && r && s && out_dir, "polo_train: null argument");
    s->v.validate();
    std::filesystem::path out(out_dir);
    std::filesystem::create_directories(out);
    write_text_file(out / "config.resolved", polo::resolved_text(s->v));

    std::string csv = "epoch,mean_reward,rule_match_rate,rule_accuracy,val_hits1_pruned\n";
    auto on_epoch = [&](const polo::EpochDiagnostics& ep) {
      csv += std::to_string(ep.epoch) + ',' + fmt_double(ep.mean_reward) + ',' +
             fmt_double(ep.rule_match_rate) + ',' +
             (ep.rule_accuracy ? fmt_double(*ep.rule_accuracy) : std::string()) + ',' +
             fmt_double(ep.val_hits1_pruned) + '\n';
      if (cb) cb(ep.epoch, ep.mean_reward, ep.rule_match_rate, ep.val_hits1_pruned, user_data);
    };
    polo::TrainResult result = polo::train(d->v, r->v, s->v.policy, s->v.reward, s->v.train,
                                           s->v.threads, nullptr, on_epoch);

    polo::save_checkpoint(out / "checkpoint.polo", s->v.policy, result.params);
    write_text_file(out / "diagnostics.csv", csv);
  });
}

polo_status polo_model_open(const char* checkpoint_path, polo_model** out) {
  return guarded([&] {
    require(checkpoint_path && out, "polo_model_open: null argument");
    auto handle = std::make_unique<polo_model>();
    handle->v = polo::load_checkpoint(checkpoint_path);
    *out = handle.release();
  });
}

void polo_model_close(polo_model* m) { delete m; }

polo_status polo_evaluate(const polo_dataset* d, const polo_ruleset* r, const polo_model* m,
                          const polo_settings* s, const char* out_dir) {
  return guarded([&] {
    require(d && r && m && s && out_dir, "polo_evaluate: null argument");
    s->v.validate();
    check_model_compatible(d->v, m->v, s->v.policy);
    std::filesystem::path out(out_dir);
    std::filesystem::create_directories(out);

    polo::SplitEvaluation ev =
        polo::evaluate_split(d->v, r->v, s->v.policy, m->v.params, d->v.test, s->v.threads,
                             /*keep_paths=*/true);
    polo::write_eval_csv(out / "eval_report.csv", ev);
    polo::write_rankings_jsonl(out / "rankings.jsonl", d->v, d->v.test, ev, r->v);
  });
}

polo_status polo_predict(const polo_dataset* d, const polo_ruleset* r, const polo_model* m,
                         const polo_settings* s, const char* source_entity, int top_k,
                         char** out_text) {
  return guarded([&] {
    require(d && r && m && s && source_entity && out_text, "polo_predict: null argument");
    if (top_k < 0) polo::throw_usage("top_k must be >= 0");
    s->v.validate();
    check_model_compatible(d->v, m->v, s->v.policy);
    std::optional<polo::EntityId> source = d->v.entities.find(source_entity);
    if (!source) {
      polo::throw_usage("unknown entity '" + std::string(source_entity) + "'");
    }

    std::string text;
    if (top_k > 0) {
      std::vector<polo::ScoredPath> paths =
          polo::beam_search(d->v.graph, s->v.policy, m->v.params, *source,
                            s->v.policy.test_rollouts, s->v.policy.path_length);
      polo::annotate_rule_matches(d->v.graph, r->v, paths);
      std::vector<polo::RankedTail> ranked = polo::rank_targets(paths, /*prune_to_rules=*/false);

      int emitted = 0;
      for (const polo::RankedTail& c : ranked) {
        if (emitted >= top_k) break;
        // Predictions are entities of the target relation's range type;
        // other beam terminals are walk byproducts, not answers.
        if (d->v.query_range && d->v.graph.type_of(c.entity) != *d->v.query_range) continue;
        const polo::ScoredPath* best = nullptr;
        for (const polo::ScoredPath& p : paths) {
          if (p.entities.back() != c.entity) continue;
          if (!best || p.log_prob > best->log_prob) best = &p;
        }
        ++emitted;
        text += std::to_string(emitted) + '\t' + d->v.entities.name(c.entity) + '\t' +
                fmt_double(c.score) + '\n';
        if (best) {
          text += "\tpath: " +
                  polo::format_instance_path(d->v.entities, d->v.relations, best->entities,
                                             best->relations) +
                  '\n';
          if (best->rule_index) {
            text += "\trule: " +
                    polo::format_metapath(d->v.types, d->v.relations,
                                          r->v.rules[*best->rule_index].body) +
                    '\n';
          }
        }
      }
    }
    *out_text = dup_string(text);
    if (!*out_text) polo::throw_runtime("out of memory");
  });
}

}  // extern "C"
