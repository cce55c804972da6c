#include "commitgate/config.hpp"
#include "commitgate/fetch.hpp"
#include "commitgate/pipeline.hpp"
#include "commitgate/report.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace commitgate;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kInternal, "cannot write " + path.string());
}

struct Overrides {
  std::string output_dir;
  std::string collection_date;
  std::optional<double> zscore;
  std::optional<double> vif;
  std::string ties;
  std::optional<double> bandwidth;
  std::vector<double> cuts;
};

void add_threshold_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--zscore", o.zscore, "Outlier z-score threshold");
  cmd->add_option("--vif", o.vif, "VIF screening threshold");
  cmd->add_option("--ties", o.ties, "Tie handling")->check(CLI::IsMember({"efron", "breslow"}));
  cmd->add_option("--bandwidth", o.bandwidth, "Hazard smoothing bandwidth in months");
  cmd->add_option("--cuts", o.cuts, "Baseline interval boundaries in months");
}

void apply_thresholds(const Overrides& o, Thresholds& t) {
  if (o.zscore) t.zscore = *o.zscore;
  if (o.vif) t.vif = *o.vif;
  if (!o.ties.empty()) t.ties = o.ties == "breslow" ? Ties::kBreslow : Ties::kEfron;
  if (o.bandwidth) t.bandwidth = o.bandwidth;
  if (!o.cuts.empty()) t.cuts = o.cuts;
}

RunConfig load(const std::string& path, const Overrides& o) {
  RunConfig c = load_config(path);
  if (!o.output_dir.empty()) c.output_dir = o.output_dir;
  if (!o.collection_date.empty()) {
    const auto t = parse_iso8601(o.collection_date);
    if (!t) throw InputError("--collection-date is not an ISO-8601 timestamp");
    c.collection_date = *t;
  }
  apply_thresholds(o, c.thresholds);
  c.validate();
  return c;
}

void write_fit_outputs(const fs::path& dir, const SurvivalOutputs& s) {
  fs::create_directories(dir);
  spit(dir / "coefficients.csv", render_coefficient_table(s.fit, TableFormat::kCsv));
  spit(dir / "coefficients.md", render_coefficient_table(s.fit, TableFormat::kMarkdown));
  spit(dir / "diagnostics.json", s.diagnostics.dump(2) + "\n");
  spit(dir / "hazard.csv", write_hazard_csv(s.hazard));
  spit(dir / "screening.csv", write_screening_csv(s.screening));
}

int fit_exit(const CoxFit& fit) {
  if (fit.converged) return 0;
  std::cerr << "commitgate: fit did not converge: " << fit.diagnostic << "\n";
  return static_cast<int>(ErrorCode::kNonConvergence);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Committer immigration survival pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  Overrides o;
  int status = 0;

  auto* fetch = app.add_subcommand("fetch", "Download API event data for every configured repo into the cache");
  fetch->add_option("--config", config_path, "Run configuration (JSON)")->required();
  fetch->callback([&] {
    const RunConfig c = load(config_path, o);
    if (c.cache_dir.empty()) throw InputError("config: cache_dir is required for fetch");
    FetchOptions fo;
    fo.api_base = c.api_base;
    fo.cache_dir = c.cache_dir;
    if (const char* token = std::getenv("COMMITGATE_TOKEN")) fo.token = token;
    std::vector<RepoId> repos;
    for (const auto& r : c.repos) repos.push_back(r.id);
    auto transport = make_http_transport();
    auto clock = make_system_clock();
    fetch_repos(repos, all_event_kinds(), *transport, *clock, fo);
  });

  std::string repo, input, output;
  auto* parse = app.add_subcommand("parse-log", "Convert a git log dump into an NDJSON event stream");
  parse->add_option("--repo", repo, "org/name")->required();
  parse->add_option("--input", input, "git log output")->required()->check(CLI::ExistingFile);
  parse->add_option("--output", output, "NDJSON destination (default: stdout)");
  parse->callback([&] {
    const auto commits = parse_git_log(slurp(input), RepoId::parse(repo));
    const std::string text = write_events_ndjson(normalize(commits, {}));
    if (output.empty()) std::cout << text;
    else spit(output, text);
  });

  auto* detect = app.add_subcommand("detect", "Detect committer immigrations");
  auto* panel = app.add_subcommand("panel", "Build the monthly covariate panel");
  auto* all = app.add_subcommand("all", "Run every stage and write all artifacts with a manifest");
  for (auto* cmd : {detect, panel, all}) {
    cmd->add_option("--config", config_path, "Run configuration (JSON)")->required();
    cmd->add_option("--output-dir", o.output_dir, "Override output_dir");
    cmd->add_option("--collection-date", o.collection_date, "Override collection_date");
  }
  add_threshold_flags(all, o);
  detect->callback([&] {
    const RunConfig c = load(config_path, o);
    const auto data = run_stage("ingest", [&] { return ingest_stage(c); });
    const auto ids = run_stage("identity", [&] { return identity_stage(c, data); });
    const auto det = run_stage("lifecycle", [&] { return lifecycle_stage(c, data, ids); });
    spit(c.output_dir / "immigrations.csv", write_immigrations_csv(det.events));
  });
  panel->callback([&] {
    const RunConfig c = load(config_path, o);
    const auto data = run_stage("ingest", [&] { return ingest_stage(c); });
    const auto ids = run_stage("identity", [&] { return identity_stage(c, data); });
    const auto det = run_stage("lifecycle", [&] { return lifecycle_stage(c, data, ids); });
    const auto p = run_stage("metrics", [&] { return metrics_stage(c, data, ids, det); });
    spit(c.output_dir / "immigrations.csv", write_immigrations_csv(det.events));
    spit(c.output_dir / "panel.csv", write_panel_csv(p.rows));
    for (const auto& w : p.warnings) std::cerr << "warning: " << w << "\n";
  });
  all->callback([&] {
    const RunConfig c = load(config_path, o);
    const ReportBundle bundle = run_pipeline(c);
    std::cout << fmt::format("manifest sha256 {}\n", bundle.manifest_sha256);
    status = fit_exit(bundle.fit);
  });

  std::string panel_path;
  auto* fit = app.add_subcommand("fit", "Screen a panel and fit the hazard models");
  fit->add_option("--panel", panel_path, "panel.csv")->required()->check(CLI::ExistingFile);
  fit->add_option("--output-dir", o.output_dir, "Destination directory")->required();
  add_threshold_flags(fit, o);
  fit->callback([&] {
    Thresholds t;
    apply_thresholds(o, t);
    const auto rows = run_stage("survival", [&] { return read_panel_csv(slurp(panel_path)); });
    const SurvivalOutputs s = run_stage("survival", [&] { return survival_stage(t, rows); });
    write_fit_outputs(o.output_dir, s);
    status = fit_exit(s.fit);
  });

  std::string diagnostics_path, format = "markdown";
  auto* report = app.add_subcommand("report", "Render the coefficient table from diagnostics.json");
  report->add_option("--diagnostics", diagnostics_path, "diagnostics.json")->required()->check(CLI::ExistingFile);
  report->add_option("--format", format, "Table format")->check(CLI::IsMember({"markdown", "csv"}));
  report->callback([&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(slurp(diagnostics_path));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("diagnostics: ") + e.what());
    }
    if (!j.contains("cox")) throw InputError("diagnostics: missing 'cox' block");
    const CoxFit f = fit_from_json(j.at("cox"));
    std::cout << render_coefficient_table(f, format == "csv" ? TableFormat::kCsv : TableFormat::kMarkdown);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorCode::kInput);
  } catch (const StageError& e) {
    std::cerr << fmt::format("commitgate: error [stage={} code={}]: {}\n", e.stage(),
                             static_cast<int>(e.code()), e.what());
    return static_cast<int>(e.code());
  } catch (const Error& e) {
    std::cerr << fmt::format("commitgate: error [code={}]: {}\n", static_cast<int>(e.code()), e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "commitgate: internal error: " << e.what() << "\n";
    return static_cast<int>(ErrorCode::kInternal);
  }
  return status;
}
