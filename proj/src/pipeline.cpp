#include "commitgate/pipeline.hpp"

#include "commitgate/fetch.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace commitgate {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kInternal, "cannot write " + path.string());
}

bool has_cached_data(const RunConfig& config, const RepoId& repo) {
  if (config.cache_dir.empty()) return false;
  FetchOptions o;
  o.api_base = config.api_base;
  o.cache_dir = config.cache_dir;
  for (const auto& ep : repo_endpoints(repo, all_event_kinds(), o)) {
    if (fs::exists(endpoint_cache_dir(config.cache_dir, ep))) return true;
  }
  return false;
}

// Hash of every cached page for a repo, in path order.
std::string cache_digest(const RunConfig& config, const RepoId& repo) {
  const fs::path root = config.cache_dir / repo.org / repo.name;
  if (!fs::exists(root)) return sha256_hex("");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const auto& f : files) {
    acc += fs::relative(f, root).generic_string() + "\n" + sha256_hex(read_file(f)) + "\n";
  }
  return sha256_hex(acc);
}

struct RepoInput {
  std::vector<CommitRecord> commits;
  std::vector<Event> events;
  std::vector<RawIdentity> links;
};

RepoInput load_repo(const RunConfig& config, const RepoConfig& repo,
                    std::map<std::string, std::string>& hashes) {
  const bool cached = has_cached_data(config, repo.id);
  if (repo.git_log.empty() && repo.events.empty() && !cached) {
    throw InputError(fmt::format("unknown repo {}: no git log, event file or cached API data",
                                 repo.id.str()));
  }
  RepoInput in;
  if (!repo.git_log.empty()) {
    const std::string text = read_file(repo.git_log);
    hashes[repo.id.str() + ":git_log"] = sha256_hex(text);
    in.commits = parse_git_log(text, repo.id);
  }
  if (!repo.events.empty()) {
    const std::string text = read_file(repo.events);
    hashes[repo.id.str() + ":events"] = sha256_hex(text);
    in.events = read_events_ndjson(text);
  }
  if (cached) {
    hashes[repo.id.str() + ":cache"] = cache_digest(config, repo.id);
    FetchOptions o;
    o.api_base = config.api_base;
    o.cache_dir = config.cache_dir;
    const RepoPayloads payloads = load_cached_payloads(repo.id, all_event_kinds(), o);
    auto events = events_from_payloads(repo.id, payloads, all_event_kinds());
    in.events.insert(in.events.end(), events.begin(), events.end());
    in.links = identity_links_from_payloads(payloads);
  }
  return in;
}

bool is_binary(const Eigen::VectorXd& col) {
  return (col.array() == 0.0 || col.array() == 1.0).all();
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kInternal, "sha256 failed");
  }
  std::string out;
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

BotPolicy bot_policy(const RunConfig& config) {
  BotPolicy bots;
  bots.accounts.insert(config.bot_accounts.begin(), config.bot_accounts.end());
  return bots;
}

Denylists denylists(const RunConfig& config) {
  Denylists d = Denylists::defaults();
  if (!config.public_providers.empty()) d.public_providers = config.public_providers;
  if (!config.academic_domains.empty()) d.academic = config.academic_domains;
  return d;
}

MetricsOptions metrics_options(const RunConfig& config) {
  MetricsOptions o;
  if (!config.newcomer_labels.empty()) {
    o.newcomer_labels = {config.newcomer_labels.begin(), config.newcomer_labels.end()};
  }
  if (!config.feature_labels.empty()) {
    o.feature_labels = {config.feature_labels.begin(), config.feature_labels.end()};
  }
  o.offensive_binary = config.offensive_binary;
  o.denylists = denylists(config);
  o.project_created = config.project_created;
  return o;
}

IngestedData ingest_stage(const RunConfig& config) {
  IngestedData data;
  const BotPolicy bots = bot_policy(config);
  NormalizeReport report;

  const RepoInput focal = load_repo(config, config.focal(), data.input_sha256);
  data.focal = normalize(focal.commits, focal.events, bots, &report);
  data.links = focal.links;

  const auto siblings = config.siblings();
  if (!siblings.empty()) {
    std::vector<CommitRecord> commits;
    std::vector<Event> events;
    for (const RepoConfig* s : siblings) {
      RepoInput in = load_repo(config, *s, data.input_sha256);
      commits.insert(commits.end(), in.commits.begin(), in.commits.end());
      events.insert(events.end(), in.events.begin(), in.events.end());
      data.links.insert(data.links.end(), in.links.begin(), in.links.end());
    }
    data.org = normalize(commits, events, bots, &report);
  }
  data.warnings = report.warnings;
  if (!data.focal.empty() && data.focal.back().time > config.collection_date) {
    data.warnings.push_back(fmt::format("focal events extend past the collection date {} (last: {})",
                                        format_iso8601(config.collection_date),
                                        format_iso8601(data.focal.back().time)));
  }
  return data;
}

IdentityMap identity_stage(const RunConfig& config, const IngestedData& data) {
  EventStream all = data.focal;
  if (data.org) all.insert(all.end(), data.org->begin(), data.org->end());
  std::vector<IdentityOverride> overrides;
  if (!config.overrides.empty()) overrides = parse_overrides(read_file(config.overrides));
  return resolve_identities(all, data.links, denylists(config), overrides, bot_policy(config));
}

DetectionResult lifecycle_stage(const RunConfig& config, const IngestedData& data,
                                const IdentityMap& ids) {
  std::vector<Correction> corrections;
  if (!config.corrections.empty()) corrections = parse_corrections(read_file(config.corrections));
  return detect_immigrations(data.focal, ids, corrections, config.collection_date);
}

Panel metrics_stage(const RunConfig& config, const IngestedData& data, const IdentityMap& ids,
                    const DetectionResult& detection) {
  return build_panel(data.focal, data.org ? &*data.org : nullptr, ids, detection.pool,
                     detection.events, config.collection_date, metrics_options(config));
}

SurvivalOutputs survival_stage(const Thresholds& t, const std::vector<PanelRow>& rows) {
  if (!(t.vif > 1)) throw InputError(fmt::format("vif threshold must exceed 1 (got {})", t.vif));
  if (!(t.zscore > 0)) throw InputError(fmt::format("zscore threshold must be positive (got {})", t.zscore));
  if (rows.empty()) throw DataError("panel is empty");

  SurvivalOutputs out;
  const std::vector<int> columns = complete_columns(rows);
  for (int c = 0; c < kNumCovariates; ++c) {
    if (std::find(columns.begin(), columns.end(), c) == columns.end()) {
      out.screening.push_back({"incomplete", std::string(kCovariateNames[static_cast<std::size_t>(c)]), 0});
    }
  }
  SurvivalData data = design_from_panel(rows, columns);

  std::vector<bool> screened;
  for (Eigen::Index j = 0; j < data.cols(); ++j) screened.push_back(!is_binary(data.x.col(j)));
  ZScoreReport z;
  data = zscore_filter(data, t.zscore, &z, screened);
  out.screening.push_back({"zscore_rows_removed", "", static_cast<double>(z.removed)});
  for (const auto& [name, n] : z.flagged_by_covariate) {
    out.screening.push_back({"zscore_flagged", name, static_cast<double>(n)});
  }

  const std::vector<std::string> sparse = near_zero_variance(data);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    const auto& name = data.names[static_cast<std::size_t>(j)];
    if (std::find(sparse.begin(), sparse.end(), name) == sparse.end()) {
      keep.push_back(j);
    } else {
      out.screening.push_back({"near_zero_variance", name, 0});
    }
  }
  data = data.select_columns(keep);

  json vif_json = json::object();
  if (data.cols() >= 2) {
    const VifResult vif = vif_screen(data, t.vif);
    for (const auto& step : vif.dropped) out.screening.push_back({"vif_drop", step.dropped, step.vif});
    for (const auto& name : vif.kept) out.screening.push_back({"vif_keep", name, vif.vif.at(name)});
    std::vector<Eigen::Index> cols;
    for (const auto& name : vif.kept) {
      cols.push_back(std::find(data.names.begin(), data.names.end(), name) - data.names.begin());
    }
    data = data.select_columns(cols);
    for (const auto& [name, v] : vif.initial_vif) {
      vif_json["initial"][name] = std::isfinite(v) ? json(v) : json("inf");
    }
    for (const auto& [name, v] : vif.vif) vif_json["final"][name] = v;
  }
  if (data.cols() == 0) throw DataError("no covariates survive screening");
  if (data.events() == 0) throw DataError("no immigration events in the screened panel");

  CoxOptions cox;
  cox.ties = t.ties;
  cox.baseline_cuts = t.cuts;
  out.fit = fit_cox_tvc(data, cox);
  out.hazard = smoothed_hazard(data, t.bandwidth, t.grid_step);

  std::set<std::string> subjects;
  for (const auto& r : rows) subjects.insert(r.dev);
  json pwe_json;
  std::vector<std::string> warnings = out.fit.warnings;
  try {
    std::vector<double> cuts;
    for (const auto& b : out.fit.baseline) cuts.push_back(b.lower);
    if (!out.fit.baseline.empty()) cuts.push_back(out.fit.baseline.back().upper);
    const PweFit pwe = fit_piecewise_exponential(data, cuts);
    json beta = json::object();
    for (std::size_t j = 0; j < pwe.covariate_names.size(); ++j) {
      const auto i = static_cast<Eigen::Index>(j);
      beta[pwe.covariate_names[j]] = {{"coef", pwe.beta(i)}, {"se", pwe.se_beta(i)}};
    }
    json intervals = json::array();
    for (std::size_t k = 0; k + 1 < pwe.cuts.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      intervals.push_back({{"lower", pwe.cuts[k]},
                           {"upper", pwe.cuts[k + 1]},
                           {"events", pwe.events(i)},
                           {"exposure", pwe.exposure(i)},
                           {"log_hazard", std::isfinite(pwe.log_hazard(i)) ? json(pwe.log_hazard(i)) : json("-inf")}});
    }
    pwe_json = {{"converged", pwe.converged}, {"loglik", pwe.loglik}, {"beta", beta},
                {"intervals", intervals}, {"diagnostic", pwe.diagnostic}};
  } catch (const Error& e) {
    warnings.push_back(std::string("piecewise exponential fit failed: ") + e.what());
  }

  out.diagnostics = {{"cox", fit_to_json(out.fit)},
                     {"piecewise_exponential", pwe_json},
                     {"vif", vif_json},
                     {"zscore", {{"threshold", t.zscore}, {"rows_removed", z.removed}}},
                     {"counts",
                      {{"panel_rows", rows.size()},
                       {"fitted_rows", data.rows()},
                       {"subjects", subjects.size()},
                       {"events", data.events()}}},
                     {"warnings", warnings}};
  return out;
}

OutputLock::OutputLock(const fs::path& dir) : path_(dir / ".commitgate.lock") {
  fs::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw InputError(fmt::format("output directory {} is locked by another run ({})",
                                 dir.string(), path_.string()));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  (void)!::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

ReportBundle run_pipeline(const RunConfig& config) {
  config.validate();
  OutputLock lock(config.output_dir);
  const fs::path staging = config.output_dir / ".staging";
  const fs::path quarantine = config.output_dir / "quarantine";
  fs::remove_all(staging);
  fs::create_directories(staging);

  std::map<std::string, std::string> artifacts;
  const auto emit = [&](const std::string& name, std::string content) {
    write_file(staging / name, content);
    artifacts[name] = std::move(content);
  };

  ReportBundle bundle;
  bundle.output_dir = config.output_dir;
  std::vector<std::string> warnings;
  try {
    const IngestedData data = run_stage("ingest", [&] { return ingest_stage(config); });
    const IdentityMap ids = run_stage("identity", [&] { return identity_stage(config, data); });
    const DetectionResult detection =
        run_stage("lifecycle", [&] { return lifecycle_stage(config, data, ids); });
    emit("immigrations.csv", write_immigrations_csv(detection.events));
    const Panel panel =
        run_stage("metrics", [&] { return metrics_stage(config, data, ids, detection); });
    emit("panel.csv", write_panel_csv(panel.rows));
    SurvivalOutputs surv =
        run_stage("survival", [&] { return survival_stage(config.thresholds, panel.rows); });
    run_stage("report", [&] {
      emit("coefficients.csv", render_coefficient_table(surv.fit, TableFormat::kCsv));
      emit("coefficients.md", render_coefficient_table(surv.fit, TableFormat::kMarkdown));
      json diagnostics = surv.diagnostics;
      warnings = data.warnings;
      warnings.insert(warnings.end(), panel.warnings.begin(), panel.warnings.end());
      diagnostics["pipeline_warnings"] = warnings;
      diagnostics["ambiguous_identities"] = ids.ambiguous;
      json pool = {{"candidates", detection.pool.candidates.size()},
                   {"immigrants", detection.pool.immigrants.size()},
                   {"founding_committers", detection.pool.founding_committers},
                   {"exclusions", detection.pool.exclusions}};
      diagnostics["candidate_pool"] = pool;
      emit("diagnostics.json", diagnostics.dump(2) + "\n");
      emit("hazard.csv", write_hazard_csv(surv.hazard));
      emit("screening.csv", write_screening_csv(surv.screening));

      json manifest;
      manifest["tool"] = "commitgate";
      manifest["version"] = kVersion;
      manifest["config_sha256"] = sha256_hex(config_to_json(config).dump());
      manifest["inputs"] = data.input_sha256;
      for (const auto& [name, content] : artifacts) {
        manifest["artifacts"][name] = sha256_hex(content);
        bundle.artifact_sha256[name] = sha256_hex(content);
      }
      const std::string text = manifest.dump(2) + "\n";
      bundle.manifest_sha256 = sha256_hex(text);
      write_file(staging / "manifest.json", text);
      return 0;
    });
    bundle.fit = std::move(surv.fit);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(quarantine, ec);
    fs::rename(staging, quarantine, ec);
    throw;
  }

  for (const auto& entry : fs::directory_iterator(staging)) {
    fs::rename(entry.path(), config.output_dir / entry.path().filename());
  }
  fs::remove_all(staging);
  fs::remove_all(quarantine);
  bundle.exit_code = bundle.fit.converged ? 0 : static_cast<int>(ErrorCode::kNonConvergence);
  return bundle;
}

}  // namespace commitgate
