#include "config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>

#include "errors.hpp"

namespace polo {
namespace {

int parse_int(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      throw std::out_of_range(value);
    }
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw_usage("setting '" + key + "' expects an integer, got '" + value + "'");
  }
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    unsigned long long v = std::stoull(value, &used);
    if (used != value.size() || value.front() == '-') throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw_usage("setting '" + key + "' expects a non-negative integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw_usage("setting '" + key + "' expects a number, got '" + value + "'");
  }
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt(int x) { return std::to_string(x); }
std::string fmt(uint64_t x) { return std::to_string(x); }

const char* b_mode_name(RewardConfig::BMode m) {
  return m == RewardConfig::BMode::Always ? "always" : "on_correct";
}

// Single table driving both apply_setting and resolved_text, so the two can
// never drift apart.
struct Entry {
  std::function<void(RunSettings&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunSettings&)> get;
};

const std::map<std::string, Entry>& registry() {
  static const std::map<std::string, Entry> table = [] {
    std::map<std::string, Entry> t;
    auto add_int = [&](const std::string& key, int RunSettings::* field) {
      t[key] = {[field](RunSettings& s, const std::string& k, const std::string& v) {
                  s.*field = parse_int(k, v);
                },
                [field](const RunSettings& s) { return fmt(s.*field); }};
    };
    auto add_pint = [&](const std::string& key, int PolicyConfig::* field) {
      t[key] = {[field](RunSettings& s, const std::string& k, const std::string& v) {
                  s.policy.*field = parse_int(k, v);
                },
                [field](const RunSettings& s) { return fmt(s.policy.*field); }};
    };
    auto add_tint = [&](const std::string& key, int TrainConfig::* field) {
      t[key] = {[field](RunSettings& s, const std::string& k, const std::string& v) {
                  s.train.*field = parse_int(k, v);
                },
                [field](const RunSettings& s) { return fmt(s.train.*field); }};
    };
    auto add_tdouble = [&](const std::string& key, double TrainConfig::* field) {
      t[key] = {[field](RunSettings& s, const std::string& k, const std::string& v) {
                  s.train.*field = parse_double(k, v);
                },
                [field](const RunSettings& s) { return fmt(s.train.*field); }};
    };

    add_pint("embedding_dim", &PolicyConfig::embedding_dim);
    add_pint("lstm_layers", &PolicyConfig::lstm_layers);
    add_pint("hidden_dim", &PolicyConfig::hidden_dim);
    add_pint("path_length", &PolicyConfig::path_length);
    add_pint("train_rollouts", &PolicyConfig::train_rollouts);
    add_pint("test_rollouts", &PolicyConfig::test_rollouts);
    add_pint("max_actions", &PolicyConfig::max_actions);

    t["lambda"] = {[](RunSettings& s, const std::string& k, const std::string& v) {
                     s.reward.lambda = parse_double(k, v);
                   },
                   [](const RunSettings& s) { return fmt(s.reward.lambda); }};
    t["b_mode"] = {[](RunSettings& s, const std::string& k, const std::string& v) {
                     if (v == "always") {
                       s.reward.b_mode = RewardConfig::BMode::Always;
                     } else if (v == "on_correct") {
                       s.reward.b_mode = RewardConfig::BMode::OnCorrect;
                     } else {
                       throw_usage("setting '" + k + "' expects 'always' or 'on_correct', got '" +
                                   v + "'");
                     }
                   },
                   [](const RunSettings& s) { return std::string(b_mode_name(s.reward.b_mode)); }};

    add_tdouble("learning_rate", &TrainConfig::learning_rate);
    add_tdouble("entropy_beta", &TrainConfig::entropy_beta);
    add_tint("epochs", &TrainConfig::epochs);
    add_tint("batch_size", &TrainConfig::batch_size);
    add_tdouble("baseline_decay", &TrainConfig::baseline_decay);
    add_tdouble("grad_clip_norm", &TrainConfig::grad_clip_norm);
    t["seed"] = {[](RunSettings& s, const std::string& k, const std::string& v) {
                   s.train.seed = parse_u64(k, v);
                 },
                 [](const RunSettings& s) { return fmt(s.train.seed); }};

    t["target_relation"] = {[](RunSettings& s, const std::string&, const std::string& v) {
                              s.target_relation = v;
                            },
                            [](const RunSettings& s) { return s.target_relation; }};
    add_int("confidence_samples", &RunSettings::confidence_samples);
    add_int("threads", &RunSettings::threads);
    return t;
  }();
  return table;
}

}  // namespace

void RunSettings::validate() const {
  policy.validate();
  reward.validate();
  train.validate();
  if (target_relation.empty()) throw_usage("target_relation must not be empty");
  if (confidence_samples < 1) throw_usage("confidence_samples must be >= 1");
  if (threads < 1) throw_usage("threads must be >= 1");
}

void apply_setting(RunSettings& settings, const std::string& key, const std::string& value) {
  auto it = registry().find(key);
  if (it == registry().end()) throw_usage("unknown setting '" + key + "'");
  it->second.set(settings, key, value);
}

void load_settings_file(RunSettings& settings, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_usage("cannot open settings file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (size_t hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    size_t last = line.find_last_not_of(" \t");
    std::string trimmed = line.substr(first, last - first + 1);
    size_t eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw_usage(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto strip = [](std::string s) {
      size_t a = s.find_first_not_of(" \t");
      if (a == std::string::npos) return std::string();
      size_t b = s.find_last_not_of(" \t");
      return s.substr(a, b - a + 1);
    };
    apply_setting(settings, strip(trimmed.substr(0, eq)), strip(trimmed.substr(eq + 1)));
  }
}

void apply_overrides(RunSettings& settings, std::span<const std::string> overrides) {
  for (const std::string& ov : overrides) {
    size_t eq = ov.find('=');
    if (eq == std::string::npos) throw_usage("override '" + ov + "' is not key=value");
    apply_setting(settings, ov.substr(0, eq), ov.substr(eq + 1));
  }
}

std::string resolved_text(const RunSettings& settings) {
  std::string out;
  for (const auto& [key, entry] : registry()) {  // std::map iterates sorted
    out += key;
    out += '=';
    out += entry.get(settings);
    out += '\n';
  }
  return out;
}

}  // namespace polo
