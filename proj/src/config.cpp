#include "commitgate/config.hpp"

#include "commitgate/error.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

namespace commitgate {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

Timestamp timestamp_of(const json& j, std::string_view key) {
  const auto t = parse_iso8601(j.get<std::string>());
  if (!t) throw InputError(fmt::format("config: '{}' is not an ISO-8601 timestamp", key));
  return *t;
}

std::vector<std::string> strings_of(const json& j, std::string_view key) {
  if (!j.is_array()) throw InputError(fmt::format("config: '{}' must be an array", key));
  return j.get<std::vector<std::string>>();
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> known,
                    std::string_view where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InputError(fmt::format("config: unknown key '{}' in {}", key, where));
    }
  }
}

}  // namespace

const RepoConfig& RunConfig::focal() const {
  for (const auto& r : repos) {
    if (r.role == RepoConfig::Role::kFocal) return r;
  }
  throw InputError("config: no focal repo");
}

std::vector<const RepoConfig*> RunConfig::siblings() const {
  std::vector<const RepoConfig*> out;
  for (const auto& r : repos) {
    if (r.role == RepoConfig::Role::kSibling) out.push_back(&r);
  }
  return out;
}

void RunConfig::validate() const {
  int focal_count = 0;
  std::set<RepoId> seen;
  for (const auto& r : repos) {
    if (r.role == RepoConfig::Role::kFocal) ++focal_count;
    if (!seen.insert(r.id).second) throw InputError("config: repo listed twice: " + r.id.str());
  }
  if (focal_count != 1) {
    throw InputError(fmt::format("config: exactly one focal repo required, found {}", focal_count));
  }
  if (collection_date == Timestamp{}) throw InputError("config: collection_date is required");
  if (output_dir.empty()) throw InputError("config: output_dir is required");
  if (!(thresholds.grid_step > 0)) throw InputError("config: grid_step must be positive");
  if (thresholds.bandwidth && !(*thresholds.bandwidth > 0)) {
    throw InputError("config: bandwidth must be positive");
  }
}

RunConfig parse_config(const json& j, const fs::path& base) {
  try {
    if (!j.is_object()) throw InputError("config: top level must be an object");
    reject_unknown(j,
                   {"repos", "collection_date", "project_created", "thresholds", "labels",
                    "denylists", "bots", "offensive_binary", "corrections", "overrides",
                    "cache_dir", "output_dir", "api_base"},
                   "config");
    RunConfig c;
    for (const json& r : j.at("repos")) {
      reject_unknown(r, {"id", "role", "git_log", "events"}, "repos[]");
      RepoConfig rc;
      rc.id = RepoId::parse(r.at("id").get<std::string>());
      const std::string role = r.value("role", "focal");
      if (role == "focal") rc.role = RepoConfig::Role::kFocal;
      else if (role == "sibling") rc.role = RepoConfig::Role::kSibling;
      else throw InputError(fmt::format("config: repo role '{}' is not focal or sibling", role));
      rc.git_log = resolve(base, r.value("git_log", ""));
      rc.events = resolve(base, r.value("events", ""));
      c.repos.push_back(std::move(rc));
    }
    c.collection_date = timestamp_of(j.at("collection_date"), "collection_date");
    if (j.contains("project_created")) {
      c.project_created = timestamp_of(j.at("project_created"), "project_created");
    }
    if (j.contains("thresholds")) {
      const json& t = j.at("thresholds");
      reject_unknown(t, {"zscore", "vif", "ties", "bandwidth", "cuts", "grid_step"}, "thresholds");
      c.thresholds.zscore = t.value("zscore", c.thresholds.zscore);
      c.thresholds.vif = t.value("vif", c.thresholds.vif);
      const std::string ties = t.value("ties", "efron");
      if (ties == "efron") c.thresholds.ties = Ties::kEfron;
      else if (ties == "breslow") c.thresholds.ties = Ties::kBreslow;
      else throw InputError(fmt::format("config: ties '{}' is not efron or breslow", ties));
      if (t.contains("bandwidth") && !t.at("bandwidth").is_null()) {
        c.thresholds.bandwidth = t.at("bandwidth").get<double>();
      }
      if (t.contains("cuts")) c.thresholds.cuts = t.at("cuts").get<std::vector<double>>();
      c.thresholds.grid_step = t.value("grid_step", c.thresholds.grid_step);
    }
    if (j.contains("labels")) {
      const json& l = j.at("labels");
      reject_unknown(l, {"newcomer", "feature"}, "labels");
      if (l.contains("newcomer")) c.newcomer_labels = strings_of(l.at("newcomer"), "labels.newcomer");
      if (l.contains("feature")) c.feature_labels = strings_of(l.at("feature"), "labels.feature");
    }
    if (j.contains("denylists")) {
      const json& d = j.at("denylists");
      reject_unknown(d, {"public_providers", "academic"}, "denylists");
      if (d.contains("public_providers")) {
        c.public_providers = strings_of(d.at("public_providers"), "denylists.public_providers");
      }
      if (d.contains("academic")) c.academic_domains = strings_of(d.at("academic"), "denylists.academic");
    }
    if (j.contains("bots")) c.bot_accounts = strings_of(j.at("bots"), "bots");
    c.offensive_binary = j.value("offensive_binary", false);
    c.corrections = resolve(base, j.value("corrections", ""));
    c.overrides = resolve(base, j.value("overrides", ""));
    c.cache_dir = resolve(base, j.value("cache_dir", ""));
    c.output_dir = resolve(base, j.value("output_dir", ""));
    c.api_base = j.value("api_base", c.api_base);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw InputError(fmt::format("config {}: {}", path.string(), e.what()));
  }
  return parse_config(j, path.parent_path());
}

json config_to_json(const RunConfig& c) {
  json repos = json::array();
  for (const auto& r : c.repos) {
    repos.push_back({{"id", r.id.str()},
                     {"role", r.role == RepoConfig::Role::kFocal ? "focal" : "sibling"},
                     {"git_log", r.git_log.string()},
                     {"events", r.events.string()}});
  }
  json thresholds = {{"zscore", c.thresholds.zscore},
                     {"vif", c.thresholds.vif},
                     {"ties", c.thresholds.ties == Ties::kEfron ? "efron" : "breslow"},
                     {"bandwidth", c.thresholds.bandwidth ? json(*c.thresholds.bandwidth) : json()},
                     {"cuts", c.thresholds.cuts},
                     {"grid_step", c.thresholds.grid_step}};
  // output_dir does not influence any artifact and is left out.
  return {{"repos", repos},
          {"collection_date", format_iso8601(c.collection_date)},
          {"project_created", c.project_created ? json(format_iso8601(*c.project_created)) : json()},
          {"thresholds", thresholds},
          {"labels", {{"newcomer", c.newcomer_labels}, {"feature", c.feature_labels}}},
          {"denylists", {{"public_providers", c.public_providers}, {"academic", c.academic_domains}}},
          {"bots", c.bot_accounts},
          {"offensive_binary", c.offensive_binary},
          {"corrections", c.corrections.string()},
          {"overrides", c.overrides.string()},
          {"cache_dir", c.cache_dir.string()},
          {"api_base", c.api_base}};
}

}  // namespace commitgate
