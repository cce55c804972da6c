#pragma once

#include "commitgate/config.hpp"
#include "commitgate/error.hpp"
#include "commitgate/identity.hpp"
#include "commitgate/lifecycle.hpp"
#include "commitgate/metrics.hpp"
#include "commitgate/report.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace commitgate {

// A stage failure; code() is the exit code.
class StageError : public Error {
 public:
  StageError(std::string stage, ErrorCode code, const std::string& what)
      : Error(code, "stage '" + stage + "': " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// Runs body(), rethrowing any failure as a StageError for `stage`.
template <typename F>
auto run_stage(const std::string& stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e.code(), e.what());
  } catch (const std::exception& e) {
    throw StageError(stage, ErrorCode::kInternal, e.what());
  }
}

std::string sha256_hex(std::string_view bytes);

struct IngestedData {
  EventStream focal;
  std::optional<EventStream> org;  // sibling repos; none when not configured
  std::vector<RawIdentity> links;  // extra aliases from the API
  std::map<std::string, std::string> input_sha256;
  std::vector<std::string> warnings;
};

BotPolicy bot_policy(const RunConfig& config);
Denylists denylists(const RunConfig& config);
MetricsOptions metrics_options(const RunConfig& config);

IngestedData ingest_stage(const RunConfig& config);
IdentityMap identity_stage(const RunConfig& config, const IngestedData& data);
DetectionResult lifecycle_stage(const RunConfig& config, const IngestedData& data,
                                const IdentityMap& ids);
Panel metrics_stage(const RunConfig& config, const IngestedData& data, const IdentityMap& ids,
                    const DetectionResult& detection);

struct SurvivalOutputs {
  CoxFit fit;
  std::vector<ScreeningEntry> screening;
  std::vector<HazardPoint> hazard;
  nlohmann::json diagnostics;
};

SurvivalOutputs survival_stage(const Thresholds& thresholds, const std::vector<PanelRow>& rows);

struct ReportBundle {
  std::filesystem::path output_dir;
  std::map<std::string, std::string> artifact_sha256;
  std::string manifest_sha256;
  CoxFit fit;
  int exit_code = 0;  // 0, or 3 for a nonconverged fit
};

inline constexpr const char* kArtifactNames[] = {
    "immigrations.csv", "panel.csv",  "coefficients.csv", "coefficients.md",
    "diagnostics.json", "hazard.csv", "screening.csv"};

// Runs every stage and writes the artifacts plus manifest.json into
// config.output_dir. On a stage failure the partial outputs are moved to
// <output_dir>/quarantine and a StageError is thrown.
ReportBundle run_pipeline(const RunConfig& config);

// Exclusive lock on an output directory, held for the object's lifetime.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace commitgate
