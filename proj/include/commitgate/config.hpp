#pragma once

#include "commitgate/ingest.hpp"
#include "commitgate/survival.hpp"
#include "commitgate/time.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace commitgate {

struct RepoConfig {
  RepoId id;
  enum class Role { kFocal, kSibling } role = Role::kFocal;
  std::filesystem::path git_log;  // output of `git log --format=<kGitLogFormat> --name-status`
  std::filesystem::path events;   // optional NDJSON event stream
};

struct Thresholds {
  double zscore = 3.0;
  double vif = 5.0;
  Ties ties = Ties::kEfron;
  std::optional<double> bandwidth;  // months
  std::vector<double> cuts;         // empty: deciles of event times
  double grid_step = 0.25;
};

struct RunConfig {
  std::vector<RepoConfig> repos;
  Timestamp collection_date{};
  std::optional<Timestamp> project_created;
  Thresholds thresholds;
  std::vector<std::string> newcomer_labels;  // empty: defaults
  std::vector<std::string> feature_labels;   // empty: defaults
  std::vector<std::string> public_providers;  // empty: defaults
  std::vector<std::string> academic_domains;  // empty: defaults
  std::vector<std::string> bot_accounts;      // added to the defaults
  bool offensive_binary = false;
  std::filesystem::path corrections;
  std::filesystem::path overrides;
  std::filesystem::path cache_dir;
  std::filesystem::path output_dir;
  std::string api_base = "https://api.github.com";

  const RepoConfig& focal() const;
  std::vector<const RepoConfig*> siblings() const;
  // Structural checks that need no I/O. Threshold ranges are checked by the
  // stage that uses them.
  void validate() const;
};

// Relative paths resolve against `base_dir`.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
// Canonical form with sorted keys; hashed into the manifest.
nlohmann::json config_to_json(const RunConfig& config);

}  // namespace commitgate
