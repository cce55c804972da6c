#pragma once

#include "commitgate/identity.hpp"
#include "commitgate/ingest.hpp"
#include "commitgate/lifecycle.hpp"

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace commitgate {

// Fixed column order of the covariate vector.
enum Covariate : int {
  kPrOpen,             // M1
  kPrReview,           // M2
  kCommitCount,        // M3
  kDaysActive,         // M4
  kIssueOpen,          // M5
  kIssueTriage,        // M6
  kAllComment,         // M7
  kCommunicator,       // M8
  kFromCompany,        // M9
  kIssueOrg,           // M10
  kIssueCommentOrg,    // M11
  kCommitOrg,          // M12
  kCommitCommentOrg,   // M13
  kCommentNewcomer,    // M14
  kFileModified,       // M15
  kIssueNewFeature,    // M16
  kMergeRatio,         // M17
  kCommentOffensive,   // M18
  kDeveloperCount,     // control: distinct active developers that month
  kProjectAge,         // control: project age in years
};

inline constexpr int kNumCovariates = 20;

inline constexpr std::array<std::string_view, kNumCovariates> kCovariateNames = {
    "M1_pr_open",          "M2_pr_review",        "M3_commit",
    "M4_days_active",      "M5_issue_open",       "M6_issue_triage",
    "M7_all_comment",      "M8_communicator",     "M9_from_company",
    "M10_issue_org",       "M11_issue_comment_org", "M12_commit_org",
    "M13_commit_comment_org", "M14_comment_newcomer", "M15_file_modified",
    "M16_issue_new_feature", "M17_merge_ratio",   "M18_comment_offensive",
    "developer",           "age_years"};

// Counts accumulated over time; M9, M17 and the controls are not.
bool is_cumulative(Covariate c);

using Covariates = std::array<std::optional<double>, kNumCovariates>;

// Returns 1 for an offensive comment, 0 otherwise. May throw; a throwing
// scorer scores the comment 0 and the failure is logged.
using OffensiveScorer = std::function<int(std::string_view)>;

// Case-insensitive whole-word lexicon matcher.
class LexiconScorer {
 public:
  explicit LexiconScorer(std::vector<std::string> terms);
  static LexiconScorer defaults();
  int operator()(std::string_view text) const;

 private:
  std::set<std::string> terms_;
};

struct MetricsOptions {
  std::set<std::string> newcomer_labels = {"good first issue", "good-first-issue",
                                           "first-timers-only", "help wanted"};
  std::set<std::string> feature_labels = {"feature request", "enhancement", "feat"};
  OffensiveScorer scorer = LexiconScorer::defaults();
  bool offensive_binary = false;
  Denylists denylists = Denylists::defaults();
  // Defaults to the earliest focal event.
  std::optional<Timestamp> project_created;
};

// "newcomer_labels = a, b" / "feature_labels = ..." lines; '#' comments.
void apply_label_config(std::string_view text, MetricsOptions& options);

// Indexes a focal stream (and optionally the sibling-repo stream of the same
// organization) once, then answers covariate queries for any developer and
// cutoff. Counts at a cutoff only use events strictly before it.
class MetricEngine {
 public:
  MetricEngine(const EventStream& focal, const EventStream* org, const IdentityMap& ids,
               MetricsOptions options);
  ~MetricEngine();
  MetricEngine(const MetricEngine&) = delete;
  MetricEngine& operator=(const MetricEngine&) = delete;

  // Covariates for `dev` using events before `cutoff`; the controls are
  // evaluated for calendar month `month`.
  Covariates at(const DevId& dev, Timestamp cutoff, int month) const;

  // Rows for months first_month .. first_month + n - 1 (cutoff = month start).
  std::vector<Covariates> series(const DevId& dev, int first_month, int n) const;

  bool has_org_data() const { return org_ != nullptr; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  struct DevIndex;
  const DevIndex& index_of(const DevId& dev) const;
  bool thread_has_label(const std::string& thread, const std::set<std::string>& labels,
                        Timestamp at) const;

  const EventStream& focal_;
  const EventStream* org_;
  const IdentityMap& ids_;
  MetricsOptions options_;
  std::map<DevId, std::unique_ptr<DevIndex>> dev_index_;
  std::unique_ptr<DevIndex> empty_index_;
  // thread -> label (lower-cased) -> first time it was present
  std::map<std::string, std::map<std::string, Timestamp>> thread_label_times_;
  std::map<int, std::size_t> active_by_month_;
  Timestamp project_created_{};
  std::vector<int> offensive_;  // per focal event index
  std::vector<std::string> warnings_;
};

// Single-metric entry points; each indexes the stream afresh.
double count_communicators(const EventStream& stream, const IdentityMap& ids,
                           const DevId& dev, Timestamp before);
double count_newcomer_comments(const EventStream& stream, const IdentityMap& ids,
                               const DevId& dev, Timestamp before,
                               const MetricsOptions& options = {});
double count_new_feature_issues(const EventStream& stream, const IdentityMap& ids,
                                const DevId& dev, Timestamp before,
                                const MetricsOptions& options = {});
double compute_merge_ratio(const EventStream& stream, const IdentityMap& ids,
                           const DevId& dev, Timestamp before);
double count_issue_triage(const EventStream& stream, const IdentityMap& ids, const DevId& dev,
                          Timestamp before);

struct OrgCounts {
  double issues = 0;            // M10
  double issue_comments = 0;    // M11
  double commits = 0;           // M12
  double commit_comments = 0;   // M13
};
// nullopt when no sibling-repo data is configured.
std::optional<OrgCounts> count_org_scoped(const EventStream* org_stream,
                                          const IdentityMap& ids, const DevId& dev,
                                          Timestamp before);

// Number of comments scored 1. Failures score 0 and are appended to `log`.
int score_offensive(const std::vector<std::string>& comments, const OffensiveScorer& scorer,
                    std::vector<std::string>* log = nullptr);

// ---- panel -------------------------------------------------------------------

struct PanelRow {
  DevId dev;
  int month = 1;  // 1-based month index since first appearance
  double start = 0;
  double stop = 1;
  Covariates x{};
  int event = 0;
};

struct Panel {
  std::vector<PanelRow> rows;
  std::vector<std::string> warnings;
};

Panel build_panel(const EventStream& focal, const EventStream* org, const IdentityMap& ids,
                  const CandidatePool& pool, const std::vector<ImmigrationEvent>& immigrations,
                  Timestamp collection_date, const MetricsOptions& options = {});

// dev_id,month,M1..M18,developer,age_years,start,stop,Y
std::string write_panel_csv(const std::vector<PanelRow>& rows);
std::vector<PanelRow> read_panel_csv(std::string_view text);

}  // namespace commitgate
