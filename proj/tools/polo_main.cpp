// Command line front end. Talks to the library exclusively through the C
// interface in polo/polo.h; all algorithm code stays behind that boundary.
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "polo/polo.h"

namespace {

struct Args {
  std::string data;
  std::string rules;
  std::string config;
  std::string out;
  std::optional<uint64_t> seed;
  std::optional<int> threads;
  std::vector<std::string> sets;
  std::string compound;
  int top_k = 10;
};

// RAII over the C handles so every exit path releases them.
using Settings = std::unique_ptr<polo_settings, decltype(&polo_settings_close)>;
using DatasetH = std::unique_ptr<polo_dataset, decltype(&polo_dataset_close)>;
using RulesH = std::unique_ptr<polo_ruleset, decltype(&polo_ruleset_close)>;
using ModelH = std::unique_ptr<polo_model, decltype(&polo_model_close)>;

struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { polo_string_free(ptr); }
};

int fail(polo_status st) {
  std::fprintf(stderr, "error: %s\n", polo_last_error());
  return static_cast<int>(st);
}

// Precedence, lowest to highest: built-in defaults, --config file, --set
// overrides, then the dedicated --seed/--threads flags.
int make_settings(const Args& args, Settings& out) {
  out = Settings(polo_settings_create(), &polo_settings_close);
  if (!out) {
    std::fprintf(stderr, "error: out of memory\n");
    return static_cast<int>(POLO_RUNTIME_ERROR);
  }
  if (!args.config.empty()) {
    if (polo_status st = polo_settings_load_file(out.get(), args.config.c_str()); st != POLO_OK) {
      return fail(st);
    }
  }
  for (const std::string& kv : args.sets) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      return static_cast<int>(POLO_USAGE_ERROR);
    }
    if (polo_status st = polo_settings_set(out.get(), kv.substr(0, eq).c_str(),
                                           kv.substr(eq + 1).c_str());
        st != POLO_OK) {
      return fail(st);
    }
  }
  if (args.seed) {
    std::string v = std::to_string(*args.seed);
    if (polo_status st = polo_settings_set(out.get(), "seed", v.c_str()); st != POLO_OK) {
      return fail(st);
    }
  }
  if (args.threads) {
    std::string v = std::to_string(*args.threads);
    if (polo_status st = polo_settings_set(out.get(), "threads", v.c_str()); st != POLO_OK) {
      return fail(st);
    }
  }
  return 0;
}

int open_dataset(const Args& args, const Settings& settings, DatasetH& out) {
  polo_dataset* raw = nullptr;
  if (polo_status st = polo_dataset_open(args.data.c_str(), settings.get(), &raw);
      st != POLO_OK) {
    return fail(st);
  }
  out = DatasetH(raw, &polo_dataset_close);
  return 0;
}

int open_rules(const Args& args, const DatasetH& ds, RulesH& out) {
  polo_ruleset* raw = nullptr;
  if (polo_status st = polo_ruleset_open(ds.get(), args.rules.c_str(), &raw); st != POLO_OK) {
    return fail(st);
  }
  out = RulesH(raw, &polo_ruleset_close);
  return 0;
}

int open_model(const Args& args, ModelH& out) {
  std::string path = args.out + "/checkpoint.polo";
  polo_model* raw = nullptr;
  if (polo_status st = polo_model_open(path.c_str(), &raw); st != POLO_OK) return fail(st);
  out = ModelH(raw, &polo_model_close);
  return 0;
}

void epoch_progress(int epoch, double mean_reward, double rule_match_rate,
                    double val_hits1_pruned, void*) {
  std::fprintf(stderr, "epoch %d  reward=%.4f  rule_match=%.4f  val_hits1_pruned=%.4f\n", epoch,
               mean_reward, rule_match_rate, val_hits1_pruned);
}

int write_or_print(const std::string& text, const std::string& out_dir,
                   const std::string& filename) {
  std::fputs(text.c_str(), stdout);
  if (!out_dir.empty()) {
    std::string path = out_dir + "/" + filename;
    std::ofstream f(path);
    if (!f || !(f << text)) {
      std::fprintf(stderr, "error: cannot write %s\n", path.c_str());
      return static_cast<int>(POLO_RUNTIME_ERROR);
    }
  }
  return 0;
}

int cmd_train(const Args& args) {
  Settings settings(nullptr, &polo_settings_close);
  if (int rc = make_settings(args, settings)) return rc;
  DatasetH ds(nullptr, &polo_dataset_close);
  if (int rc = open_dataset(args, settings, ds)) return rc;
  RulesH rules(nullptr, &polo_ruleset_close);
  if (int rc = open_rules(args, ds, rules)) return rc;
  if (polo_status st = polo_train(ds.get(), rules.get(), settings.get(), args.out.c_str(),
                                  &epoch_progress, nullptr);
      st != POLO_OK) {
    return fail(st);
  }
  std::fprintf(stderr, "wrote %s/checkpoint.polo\n", args.out.c_str());
  return 0;
}

int cmd_eval(const Args& args) {
  Settings settings(nullptr, &polo_settings_close);
  if (int rc = make_settings(args, settings)) return rc;
  DatasetH ds(nullptr, &polo_dataset_close);
  if (int rc = open_dataset(args, settings, ds)) return rc;
  RulesH rules(nullptr, &polo_ruleset_close);
  if (int rc = open_rules(args, ds, rules)) return rc;
  ModelH model(nullptr, &polo_model_close);
  if (int rc = open_model(args, model)) return rc;
  if (polo_status st =
          polo_evaluate(ds.get(), rules.get(), model.get(), settings.get(), args.out.c_str());
      st != POLO_OK) {
    return fail(st);
  }
  std::ifstream report(args.out + "/eval_report.csv");
  std::string line;
  bool first = true;
  while (std::getline(report, line)) {
    std::puts(line.c_str());
    // Flag an empty split: the first data row reports zero queries.
    if (!first && line.rfind("standard,0,", 0) == 0) {
      std::fprintf(stderr, "warning: test split is empty\n");
    }
    first = false;
  }
  return 0;
}

int cmd_predict(const Args& args) {
  Settings settings(nullptr, &polo_settings_close);
  if (int rc = make_settings(args, settings)) return rc;
  DatasetH ds(nullptr, &polo_dataset_close);
  if (int rc = open_dataset(args, settings, ds)) return rc;
  RulesH rules(nullptr, &polo_ruleset_close);
  if (int rc = open_rules(args, ds, rules)) return rc;
  ModelH model(nullptr, &polo_model_close);
  if (int rc = open_model(args, model)) return rc;
  OwnedString text;
  if (polo_status st = polo_predict(ds.get(), rules.get(), model.get(), settings.get(),
                                    args.compound.c_str(), args.top_k, &text.ptr);
      st != POLO_OK) {
    return fail(st);
  }
  std::fputs(text.ptr, stdout);
  return 0;
}

int cmd_confidence(const Args& args) {
  Settings settings(nullptr, &polo_settings_close);
  if (int rc = make_settings(args, settings)) return rc;
  DatasetH ds(nullptr, &polo_dataset_close);
  if (int rc = open_dataset(args, settings, ds)) return rc;
  RulesH rules(nullptr, &polo_ruleset_close);
  if (int rc = open_rules(args, ds, rules)) return rc;
  OwnedString tsv;
  if (polo_status st =
          polo_estimate_confidence(ds.get(), rules.get(), settings.get(), &tsv.ptr);
      st != POLO_OK) {
    return fail(st);
  }
  return write_or_print(tsv.ptr, args.out, "confidence.tsv");
}

int cmd_stats(const Args& args) {
  Settings settings(nullptr, &polo_settings_close);
  if (int rc = make_settings(args, settings)) return rc;
  DatasetH ds(nullptr, &polo_dataset_close);
  if (int rc = open_dataset(args, settings, ds)) return rc;
  uint64_t entities = 0, relations = 0, triples = 0;
  if (polo_status st = polo_dataset_counts(ds.get(), &entities, &relations, &triples);
      st != POLO_OK) {
    return fail(st);
  }
  std::fprintf(stderr, "entities=%llu relations=%llu triples=%llu\n",
               static_cast<unsigned long long>(entities),
               static_cast<unsigned long long>(relations),
               static_cast<unsigned long long>(triples));
  OwnedString tsv;
  if (polo_status st = polo_type_stats(ds.get(), &tsv.ptr); st != POLO_OK) return fail(st);
  return write_or_print(tsv.ptr, args.out, "type_stats.tsv");
}

void add_common(CLI::App* cmd, Args& args, bool needs_rules, bool needs_out) {
  cmd->add_option("--data", args.data, "dataset directory (train.txt plus optional splits)")
      ->required();
  auto* rules = cmd->add_option("--rules", args.rules, "rule file (tab separated)");
  if (needs_rules) rules->required();
  cmd->add_option("--config", args.config, "key=value settings file");
  auto* out = cmd->add_option("--out", args.out, "output directory");
  if (needs_out) out->required();
  cmd->add_option("--seed", args.seed, "root random seed");
  cmd->add_option("--threads", args.threads, "worker threads (1 = bit-deterministic)");
  cmd->add_option("--set", args.sets, "override one setting, e.g. --set lambda=0.5")
      ->take_all();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"policy-guided multi-hop reasoning over typed knowledge graphs"};
  app.set_version_flag("--version", polo_version());
  app.require_subcommand(1);
  Args args;

  CLI::App* train = app.add_subcommand("train", "train a walking policy");
  add_common(train, args, /*needs_rules=*/true, /*needs_out=*/true);

  CLI::App* eval = app.add_subcommand("eval", "rank the test queries with a trained model");
  add_common(eval, args, /*needs_rules=*/true, /*needs_out=*/true);

  CLI::App* predict = app.add_subcommand("predict", "top-k targets for one source entity");
  add_common(predict, args, /*needs_rules=*/true, /*needs_out=*/true);
  predict->add_option("--compound", args.compound, "source entity name")->required();
  predict->add_option("--top-k", args.top_k, "number of predictions (default 10)");

  CLI::App* confidence =
      app.add_subcommand("confidence", "re-estimate rule confidences by path sampling");
  add_common(confidence, args, /*needs_rules=*/true, /*needs_out=*/false);

  CLI::App* stats = app.add_subcommand("stats", "entity/relation/triple counts and type table");
  add_common(stats, args, /*needs_rules=*/false, /*needs_out=*/false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message
    return static_cast<int>(POLO_USAGE_ERROR);
  }

  if (train->parsed()) return cmd_train(args);
  if (eval->parsed()) return cmd_eval(args);
  if (predict->parsed()) return cmd_predict(args);
  if (confidence->parsed()) return cmd_confidence(args);
  if (stats->parsed()) return cmd_stats(args);
  return static_cast<int>(POLO_USAGE_ERROR);
}
