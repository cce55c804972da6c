#include "commitgate/metrics.hpp"

#include "commitgate/csv.hpp"
#include "commitgate/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>

namespace commitgate {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::set<std::string> lower_all(const std::set<std::string>& in) {
  std::set<std::string> out;
  for (const auto& s : in) out.insert(lower(s));
  return out;
}

bool is_triage(EventKind k) {
  return k == EventKind::kIssueLabeled || k == EventKind::kIssueAssigned ||
         k == EventKind::kIssueMilestoned || k == EventKind::kIssueClosed;
}

bool same_dev(const IdentityMap& ids, const RawIdentity& raw, const DevId& dev) {
  if (raw.empty()) return false;
  const DevId* d = ids.find(raw);
  return d && *d == dev;
}

}  // namespace

bool is_cumulative(Covariate c) {
  return c != kFromCompany && c != kMergeRatio && c != kDeveloperCount && c != kProjectAge;
}

// ---- offensive scoring -------------------------------------------------------

LexiconScorer::LexiconScorer(std::vector<std::string> terms) {
  for (const auto& t : terms) terms_.insert(lower(t));
}

LexiconScorer LexiconScorer::defaults() {
  return LexiconScorer({"asshole", "bastard", "bullshit", "crap",     "crappy", "damn",
                        "dumb",    "dumbass", "fuck",     "fucked",   "fucking", "garbage",
                        "idiot",   "idiotic", "idiots",   "incompetent", "moron", "morons",
                        "pathetic", "retarded", "screw",  "shit",     "shitty", "stfu",
                        "stupid",  "sucks",   "trash",    "wtf"});
}

int LexiconScorer::operator()(std::string_view text) const {
  std::string word;
  const auto flush = [&] {
    const bool hit = !word.empty() && terms_.count(word) > 0;
    word.clear();
    return hit;
  };
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '\'') {
      word += static_cast<char>(std::tolower(c));
    } else if (flush()) {
      return 1;
    }
  }
  return flush() ? 1 : 0;
}

int score_offensive(const std::vector<std::string>& comments, const OffensiveScorer& scorer,
                    std::vector<std::string>* log) {
  int count = 0;
  for (std::size_t i = 0; i < comments.size(); ++i) {
    try {
      count += scorer(comments[i]) ? 1 : 0;
    } catch (const std::exception& e) {
      if (log) log->push_back(fmt::format("scorer failed on comment {}: {}", i, e.what()));
    }
  }
  return count;
}

void apply_label_config(std::string_view text, MetricsOptions& options) {
  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputError(fmt::format("label config line {}: expected key = values", line_no));
    }
    const std::string key = trim(line.substr(0, eq));
    std::set<std::string> values;
    std::string rest = line.substr(eq + 1);
    std::size_t start = 0;
    while (start <= rest.size()) {
      auto comma = rest.find(',', start);
      if (comma == std::string::npos) comma = rest.size();
      const std::string v = trim(rest.substr(start, comma - start));
      if (!v.empty()) values.insert(v);
      start = comma + 1;
    }
    if (key == "newcomer_labels") options.newcomer_labels = values;
    else if (key == "feature_labels") options.feature_labels = values;
    else throw InputError(fmt::format("label config line {}: unknown key '{}'", line_no, key));
  }
}

// ---- engine ------------------------------------------------------------------

struct MetricEngine::DevIndex {
  std::vector<std::size_t> own;             // focal events with dev as actor
  std::vector<std::size_t> merged_prs;      // pr_merged events on dev's PRs
  std::vector<std::size_t> org_own;         // sibling-repo events with dev as actor
  std::map<DevId, Timestamp> partner_since; // M8 pair formation times
};

MetricEngine::MetricEngine(const EventStream& focal, const EventStream* org,
                           const IdentityMap& ids, MetricsOptions options)
    : focal_(focal),
      org_(org),
      ids_(ids),
      options_(std::move(options)),
      empty_index_(std::make_unique<DevIndex>()) {
  options_.newcomer_labels = lower_all(options_.newcomer_labels);
  options_.feature_labels = lower_all(options_.feature_labels);

  const auto dev_of = [&](const RawIdentity& raw) -> const DevId* {
    return raw.empty() ? nullptr : ids_.find(raw);
  };
  const auto slot = [&](const DevId& d) -> DevIndex& {
    auto& p = dev_index_[d];
    if (!p) p = std::make_unique<DevIndex>();
    return *p;
  };

  // thread -> dev -> first comment time, for M8
  std::map<std::string, std::map<DevId, Timestamp>> commenters;
  offensive_.assign(focal_.size(), 0);
  std::map<std::string, std::map<std::string, Timestamp>> opening_labels;

  for (std::size_t i = 0; i < focal_.size(); ++i) {
    const Event& e = focal_[i];
    const DevId* dev = dev_of(e.actor);
    if (dev) slot(*dev).own.push_back(i);
    if (e.kind == EventKind::kPrMerged) {
      if (const DevId* opener = dev_of(e.opener)) slot(*opener).merged_prs.push_back(i);
    }
    if (is_comment(e.kind)) {
      try {
        offensive_[i] = options_.scorer(e.body) ? 1 : 0;
      } catch (const std::exception& ex) {
        warnings_.push_back(fmt::format("offensive scorer failed on {} comment at {}: {}",
                                        e.thread_id, format_iso8601(e.time), ex.what()));
      }
      if (dev && !ids_.devs.at(*dev).bot) commenters[e.thread_id].emplace(*dev, e.time);
    }
    if (e.kind == EventKind::kIssueLabeled) {
      for (const auto& l : e.labels) thread_label_times_[e.thread_id].emplace(lower(l), e.time);
    }
    if (e.kind == EventKind::kIssueOpened || e.kind == EventKind::kPrOpened) {
      for (const auto& l : e.labels) opening_labels[e.thread_id].emplace(lower(l), e.time);
    }
  }
  // Labels reported on the opening payload only count from the opening
  // time when no explicit labeling event exists for them.
  for (const auto& [thread, labels] : opening_labels) {
    for (const auto& [label, t] : labels) thread_label_times_[thread].emplace(label, t);
  }

  std::map<int, std::set<DevId>> active;
  for (const Event& e : focal_) {
    if (const DevId* dev = dev_of(e.actor); dev && !ids_.devs.at(*dev).bot) {
      active[month_number(e.time)].insert(*dev);
    }
  }
  for (const auto& [m, devs] : active) active_by_month_[m] = devs.size();

  for (const auto& [thread, devs] : commenters) {
    for (const auto& [a, ta] : devs) {
      for (const auto& [b, tb] : devs) {
        if (a == b) continue;
        const Timestamp since = std::max(ta, tb);
        auto [it, inserted] = slot(a).partner_since.emplace(b, since);
        if (!inserted && since < it->second) it->second = since;
      }
    }
  }

  if (org_) {
    for (std::size_t i = 0; i < org_->size(); ++i) {
      if (const DevId* dev = dev_of((*org_)[i].actor)) slot(*dev).org_own.push_back(i);
    }
  }

  if (options_.project_created) {
    project_created_ = *options_.project_created;
  } else if (!focal_.empty()) {
    project_created_ = focal_.front().time;
  }
}

MetricEngine::~MetricEngine() = default;

const MetricEngine::DevIndex& MetricEngine::index_of(const DevId& dev) const {
  const auto it = dev_index_.find(dev);
  return it == dev_index_.end() ? *empty_index_ : *it->second;
}

bool MetricEngine::thread_has_label(const std::string& thread,
                                    const std::set<std::string>& labels, Timestamp at) const {
  const auto it = thread_label_times_.find(thread);
  if (it == thread_label_times_.end()) return false;
  for (const auto& [label, t] : it->second) {
    if (t <= at && labels.count(label)) return true;
  }
  return false;
}

Covariates MetricEngine::at(const DevId& dev, Timestamp cutoff, int month) const {
  const DevIndex& idx = index_of(dev);
  double pr_open = 0, commits = 0, issue_open = 0, comments = 0, newcomer = 0, feature = 0,
         offensive = 0;
  std::set<std::string> reviewed, triaged, opened_prs, files;
  std::set<long> days;
  std::vector<std::string> emails;

  for (std::size_t i : idx.own) {
    const Event& e = focal_[i];
    if (e.time >= cutoff) continue;
    if (e.kind == EventKind::kCommit && e.commit) emails.push_back(e.commit->author_email);
    days.insert(day_number(e.time));
    switch (e.kind) {
      case EventKind::kCommit:
        ++commits;
        if (e.commit) files.insert(e.commit->files_touched.begin(), e.commit->files_touched.end());
        break;
      case EventKind::kIssueOpened:
        ++issue_open;
        // Labels at the cutoff, not at opening time.
        if (thread_has_label(e.thread_id, options_.feature_labels, cutoff - std::chrono::seconds{1})) {
          ++feature;
        }
        break;
      case EventKind::kPrOpened:
        ++pr_open;
        opened_prs.insert(e.thread_id);
        break;
      case EventKind::kPrReview:
        if (!same_dev(ids_, e.opener, dev)) reviewed.insert(e.thread_id);
        break;
      case EventKind::kIssueComment:
      case EventKind::kPrComment:
      case EventKind::kCommitComment:
        ++comments;
        offensive += offensive_[i];
        if (e.kind == EventKind::kIssueComment &&
            thread_has_label(e.thread_id, options_.newcomer_labels, e.time)) {
          ++newcomer;
        }
        break;
      default:
        if (is_triage(e.kind) && !same_dev(ids_, e.opener, dev)) triaged.insert(e.thread_id);
        break;
    }
  }

  std::set<std::string> merged;
  for (std::size_t i : idx.merged_prs) {
    const Event& e = focal_[i];
    if (e.time < cutoff && opened_prs.count(e.thread_id)) merged.insert(e.thread_id);
  }

  double partners = 0;
  for (const auto& [other, since] : idx.partner_since) {
    if (since < cutoff) ++partners;
  }

  Covariates x{};
  x[kPrOpen] = pr_open;
  x[kPrReview] = static_cast<double>(reviewed.size());
  x[kCommitCount] = commits;
  x[kDaysActive] = static_cast<double>(days.size());
  x[kIssueOpen] = issue_open;
  x[kIssueTriage] = static_cast<double>(triaged.size());
  x[kAllComment] = comments;
  x[kCommunicator] = partners;

  const DevIdentity* identity = nullptr;
  if (auto it = ids_.devs.find(dev); it != ids_.devs.end()) identity = &it->second;
  Affiliation aff = identity && identity->affiliation_overridden
                        ? identity->affiliation
                        : affiliation_from_emails(emails, options_.denylists);
  x[kFromCompany] = aff.kind == Affiliation::Kind::kCompany ? 1.0 : 0.0;

  if (org_) {
    double org_issues = 0, org_issue_comments = 0, org_commits = 0, org_commit_comments = 0;
    for (std::size_t i : idx.org_own) {
      const Event& e = (*org_)[i];
      if (e.time >= cutoff) continue;
      if (e.kind == EventKind::kIssueOpened) ++org_issues;
      else if (e.kind == EventKind::kIssueComment) ++org_issue_comments;
      else if (e.kind == EventKind::kCommit) ++org_commits;
      else if (e.kind == EventKind::kCommitComment) ++org_commit_comments;
    }
    x[kIssueOrg] = org_issues;
    x[kIssueCommentOrg] = org_issue_comments;
    x[kCommitOrg] = org_commits;
    x[kCommitCommentOrg] = org_commit_comments;
  }

  x[kCommentNewcomer] = newcomer;
  x[kFileModified] = static_cast<double>(files.size());
  x[kIssueNewFeature] = feature;
  x[kMergeRatio] = opened_prs.empty() ? 0.0
                                      : static_cast<double>(merged.size()) /
                                            static_cast<double>(opened_prs.size());
  x[kCommentOffensive] = options_.offensive_binary ? (offensive > 0 ? 1.0 : 0.0) : offensive;

  const auto active = active_by_month_.find(month);
  x[kDeveloperCount] = active == active_by_month_.end() ? 0.0 : static_cast<double>(active->second);
  x[kProjectAge] = std::max(0.0, static_cast<double>((month_start(month) - project_created_).count()) /
                                     kSecondsPerYear);
  return x;
}

std::vector<Covariates> MetricEngine::series(const DevId& dev, int first_month, int n) const {
  std::vector<Covariates> out;
  out.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int k = 0; k < n; ++k) {
    const int month = first_month + k;
    out.push_back(at(dev, month_start(month), month));
  }
  return out;
}

// ---- single-metric entry points ----------------------------------------------

namespace {

double engine_metric(const EventStream& stream, const IdentityMap& ids, const DevId& dev,
                     Timestamp before, Covariate c, const MetricsOptions& options = {}) {
  MetricEngine engine(stream, nullptr, ids, options);
  return engine.at(dev, before, month_number(before)).at(c).value_or(0.0);
}

}  // namespace

double count_communicators(const EventStream& stream, const IdentityMap& ids,
                           const DevId& dev, Timestamp before) {
  return engine_metric(stream, ids, dev, before, kCommunicator);
}

double count_newcomer_comments(const EventStream& stream, const IdentityMap& ids,
                               const DevId& dev, Timestamp before,
                               const MetricsOptions& options) {
  return engine_metric(stream, ids, dev, before, kCommentNewcomer, options);
}

double count_new_feature_issues(const EventStream& stream, const IdentityMap& ids,
                                const DevId& dev, Timestamp before,
                                const MetricsOptions& options) {
  return engine_metric(stream, ids, dev, before, kIssueNewFeature, options);
}

double compute_merge_ratio(const EventStream& stream, const IdentityMap& ids,
                           const DevId& dev, Timestamp before) {
  return engine_metric(stream, ids, dev, before, kMergeRatio);
}

double count_issue_triage(const EventStream& stream, const IdentityMap& ids, const DevId& dev,
                          Timestamp before) {
  return engine_metric(stream, ids, dev, before, kIssueTriage);
}

std::optional<OrgCounts> count_org_scoped(const EventStream* org_stream,
                                          const IdentityMap& ids, const DevId& dev,
                                          Timestamp before) {
  if (!org_stream) return std::nullopt;
  const EventStream empty;
  MetricEngine engine(empty, org_stream, ids, {});
  const Covariates x = engine.at(dev, before, month_number(before));
  return OrgCounts{*x[kIssueOrg], *x[kIssueCommentOrg], *x[kCommitOrg], *x[kCommitCommentOrg]};
}

// ---- panel -------------------------------------------------------------------

Panel build_panel(const EventStream& focal, const EventStream* org, const IdentityMap& ids,
                  const CandidatePool& pool, const std::vector<ImmigrationEvent>& immigrations,
                  Timestamp collection_date, const MetricsOptions& options) {
  MetricEngine engine(focal, org, ids, options);
  Panel panel;
  for (const ImmigrationEvent& imm : immigrations) {
    if (!pool.candidates.count(imm.dev)) {
      throw InputError(fmt::format("panel: '{}' has an immigration record but is not a candidate",
                                   imm.dev));
    }
    if (imm.censored() == (pool.immigrants.count(imm.dev) > 0)) {
      throw InputError(fmt::format("panel: immigration status of '{}' disagrees with the pool",
                                   imm.dev));
    }
    if (imm.first_appearance > collection_date) {
      throw InputError(fmt::format("panel: candidate '{}' first appears after the collection "
                                   "date and has zero months",
                                   imm.dev));
    }
    const int first = month_number(imm.first_appearance);
    const int last = month_number(imm.immigration_time.value_or(collection_date));
    const int n = last - first + 1;
    const auto series = engine.series(imm.dev, first, n);
    for (int i = 1; i <= n; ++i) {
      PanelRow row;
      row.dev = imm.dev;
      row.month = i;
      row.start = i - 1;
      row.stop = i;
      row.x = series[static_cast<std::size_t>(i - 1)];
      row.event = (i == n && !imm.censored()) ? 1 : 0;
      panel.rows.push_back(std::move(row));
    }
  }
  panel.warnings = engine.warnings();
  return panel;
}

std::string write_panel_csv(const std::vector<PanelRow>& rows) {
  csv::Row header = {"dev_id", "month"};
  for (auto name : kCovariateNames) header.emplace_back(name);
  for (const char* c : {"start", "stop", "Y"}) header.emplace_back(c);
  std::string out = csv::format_row(header);
  for (const PanelRow& r : rows) {
    csv::Row row = {r.dev, std::to_string(r.month)};
    for (const auto& v : r.x) row.push_back(v ? csv::format_double(*v) : std::string{});
    row.push_back(csv::format_double(r.start));
    row.push_back(csv::format_double(r.stop));
    row.push_back(std::to_string(r.event));
    out += csv::format_row(row);
  }
  return out;
}

std::vector<PanelRow> read_panel_csv(std::string_view text) {
  csv::Row header = {"dev_id", "month"};
  for (auto name : kCovariateNames) header.emplace_back(name);
  for (const char* c : {"start", "stop", "Y"}) header.emplace_back(c);
  const auto table = csv::parse_table(text, header);
  std::vector<PanelRow> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    try {
      PanelRow p;
      p.dev = row[0];
      p.month = std::stoi(row[1]);
      for (int c = 0; c < kNumCovariates; ++c) {
        const std::string& v = row[2 + c];
        if (!v.empty()) p.x[c] = std::stod(v);
      }
      p.start = std::stod(row[2 + kNumCovariates]);
      p.stop = std::stod(row[3 + kNumCovariates]);
      p.event = std::stoi(row[4 + kNumCovariates]);
      if (p.event != 0 && p.event != 1) throw InputError("Y must be 0 or 1");
      out.push_back(std::move(p));
    } catch (const std::logic_error&) {
      throw InputError(fmt::format("panel row {}: malformed number", r + 1));
    }
  }
  return out;
}

}  // namespace commitgate
