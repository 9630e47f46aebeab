#pragma once
#include <filesystem>
#include <span>
#include <string>

#include "policy.hpp"
#include "training.hpp"

namespace polo {

// Everything a run needs beyond the data itself. Populated from defaults,
// then an optional key=value file, then command-line overrides, in that
// order; later sources win.
struct RunSettings {
  PolicyConfig policy;
  RewardConfig reward;
  TrainConfig train;
  std::string target_relation = "treats";
  int confidence_samples = 5000;  // walks drawn per rule when estimating scores
  int threads = 1;
  void validate() const;
};

// Sets one key. Unknown keys and unparseable values are usage errors; the
// accepted keys are exactly those emitted by resolved_text.
void apply_setting(RunSettings& settings, const std::string& key, const std::string& value);

// Reads a key=value file ('#' starts a comment, blank lines ignored) and
// applies every entry.
void load_settings_file(RunSettings& settings, const std::filesystem::path& path);

// Applies "key=value" strings, e.g. from repeated --set flags.
void apply_overrides(RunSettings& settings, std::span<const std::string> overrides);

// Canonical snapshot of every setting, one key=value per line, sorted by key.
// Doubles are printed with enough digits to round-trip, so a run can be
// reproduced from its recorded snapshot alone.
std::string resolved_text(const RunSettings& settings);

}  // namespace polo
