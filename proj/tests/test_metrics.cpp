#include "commitgate/error.hpp"
#include "commitgate/identity.hpp"
#include "commitgate/lifecycle.hpp"
#include "commitgate/metrics.hpp"

#include "fixtures.hpp"
#include "panel_checks.hpp"

#include <doctest.h>

using namespace commitgate;

namespace {

struct Project {
  EventStream stream;
  IdentityMap ids;
};

Project project(int shift = 0) {
  const auto a = fx::activity_fixture(shift);
  Project p;
  p.stream = normalize(a.commits, a.events);
  p.ids = resolve_identities(p.stream, a.links);
  return p;
}

Covariates at(const Project& p, const DevId& dev, std::string_view cutoff, MetricsOptions o = {}) {
  MetricEngine engine(p.stream, nullptr, p.ids, std::move(o));
  const Timestamp t = fx::ts(cutoff);
  return engine.at(dev, t, month_number(t));
}

const Timestamp kCollection = fx::ts("2021-08-28T23:59:59Z");

}  // namespace

TEST_CASE("identities of the activity fixture") {
  const auto p = project();
  CHECK(p.ids.devs.size() == 4);
  for (const char* d : {"ana", "ben", "cai", "maint"}) CHECK(p.ids.devs.count(d) == 1);
}

TEST_CASE("hand-computed covariates for ana before May 2021") {
  const auto p = project();
  const auto x = at(p, "ana", "2021-05-01T00:00:00Z");
  CHECK(x[kPrOpen] == 2);
  CHECK(x[kPrReview] == 0);
  CHECK(x[kCommitCount] == 2);
  CHECK(x[kDaysActive] == 10);
  CHECK(x[kIssueOpen] == 1);
  CHECK(x[kIssueTriage] == 2);
  CHECK(x[kAllComment] == 2);
  CHECK(x[kCommunicator] == 1);
  CHECK(x[kFromCompany] == 1);
  CHECK_FALSE(x[kIssueOrg].has_value());
  CHECK_FALSE(x[kCommitCommentOrg].has_value());
  CHECK(x[kCommentNewcomer] == 0);
  CHECK(x[kFileModified] == 3);
  CHECK(x[kIssueNewFeature] == 1);
  CHECK(x[kMergeRatio] == 0.5);
  CHECK(x[kCommentOffensive] == 0);
  CHECK(x[kDeveloperCount] == 1);
  const double age = static_cast<double>((fx::ts("2021-05-01T00:00:00Z") - fx::ts("2021-01-02T10:00:00Z")).count()) /
                     (365.2425 * 86400);
  CHECK(*x[kProjectAge] == doctest::Approx(age));
}

TEST_CASE("hand-computed covariates for ben and cai") {
  const auto p = project();
  const auto ben = at(p, "ben", "2021-07-01T00:00:00Z");
  CHECK(ben[kPrReview] == 1);
  CHECK(ben[kIssueTriage] == 1);
  CHECK(ben[kAllComment] == 3);
  CHECK(ben[kCommunicator] == 2);
  CHECK(ben[kCommentNewcomer] == 1);
  CHECK(ben[kIssueOpen] == 1);
  CHECK(ben[kCommitCount] == 1);
  CHECK(ben[kMergeRatio] == 0);

  const auto cai = at(p, "cai", "2021-04-01T00:00:00Z");
  CHECK(cai[kAllComment] == 2);
  CHECK(cai[kCommentOffensive] == 1);
  CHECK(cai[kCommentNewcomer] == 1);
  CHECK(cai[kCommunicator] == 0);
  CHECK(cai[kFromCompany] == 0);  // no commits: affiliation unknown
}

TEST_CASE("single-metric entry points agree with the engine") {
  const auto p = project();
  const auto cutoff = fx::ts("2021-07-01T00:00:00Z");
  CHECK(count_communicators(p.stream, p.ids, "ben", cutoff) == 2);
  CHECK(count_newcomer_comments(p.stream, p.ids, "ben", cutoff) == 1);
  CHECK(count_new_feature_issues(p.stream, p.ids, "cai", cutoff) == 1);
  CHECK(compute_merge_ratio(p.stream, p.ids, "ana", cutoff) == 0.5);
  CHECK(compute_merge_ratio(p.stream, p.ids, "cai", cutoff) == 0);
  CHECK(count_issue_triage(p.stream, p.ids, "ana", cutoff) == 2);
  CHECK_FALSE(count_org_scoped(nullptr, p.ids, "ana", cutoff).has_value());
}

TEST_CASE("newcomer labels count only when present at comment time") {
  const auto p = project();
  // cai commented on issue#2 one day after the label; ana never did.
  MetricsOptions o;
  o.newcomer_labels = {"Enhancement"};
  CHECK(count_newcomer_comments(p.stream, p.ids, "ben", fx::ts("2021-02-01T00:00:00Z"), o) == 1);
  CHECK(count_newcomer_comments(p.stream, p.ids, "ana", fx::ts("2021-02-01T00:00:00Z"), o) == 1);
}

TEST_CASE("org-scoped counts come from sibling repos") {
  const auto p = project();
  const RepoId sib{"acme", "gadget"};
  std::vector<Event> ev = {
      fx::api_event(EventKind::kIssueOpened, "ana", "2021-01-05T00:00:00Z", "issue#9", "ana"),
      fx::api_event(EventKind::kIssueComment, "ana", "2021-01-06T00:00:00Z", "issue#9", "ana"),
      fx::api_event(EventKind::kCommitComment, "ana", "2021-01-07T00:00:00Z", "commit:1", ""),
      fx::api_event(EventKind::kIssueComment, "ana", "2021-03-06T00:00:00Z", "issue#9", "ana")};
  for (auto& e : ev) e.repo = sib;
  const std::vector<CommitRecord> commits = {fx::make_commit(99, "ana", "ana@bigco.com", "2021-01-08T00:00:00Z",
                                                             "ana", "ana@bigco.com", "2021-01-08T00:00:00Z", {"x"}, sib)};
  const auto org = normalize(commits, ev);
  const auto counts = count_org_scoped(&org, p.ids, "ana", fx::ts("2021-02-01T00:00:00Z"));
  REQUIRE(counts.has_value());
  CHECK(counts->issues == 1);
  CHECK(counts->issue_comments == 1);
  CHECK(counts->commits == 1);
  CHECK(counts->commit_comments == 1);
}

TEST_CASE("events at the cutoff are not counted") {
  auto p = project();
  const auto before = at(p, "ana", "2021-05-01T00:00:00Z");
  p.stream.push_back(fx::api_event(EventKind::kIssueComment, "ana", "2021-05-01T00:00:00Z", "issue#1", "ana"));
  p.stream.push_back(fx::api_event(EventKind::kPrOpened, "ana", "2021-05-01T00:00:00Z", "pr#7", "ana"));
  std::sort(p.stream.begin(), p.stream.end(), event_less);
  const auto after = at(p, "ana", "2021-05-01T00:00:00Z");
  for (int c = 0; c < kNumCovariates; ++c) {
    if (c == kDeveloperCount) continue;
    CAPTURE(kCovariateNames[static_cast<std::size_t>(c)]);
    CHECK(before[static_cast<std::size_t>(c)] == after[static_cast<std::size_t>(c)]);
  }
}

TEST_CASE("offensive scoring") {
  const auto lex = LexiconScorer::defaults();
  CHECK(lex("This is STUPID!") == 1);
  CHECK(lex("stupidity is not a listed word") == 0);
  CHECK(lex("") == 0);
  std::vector<std::string> log;
  const std::vector<std::string> comments = {"ok", "what crap", "fine"};
  CHECK(score_offensive(comments, lex, &log) == 1);
  const OffensiveScorer broken = [](std::string_view) -> int { throw std::runtime_error("model offline"); };
  CHECK(score_offensive(comments, broken, &log) == 0);
  CHECK_FALSE(log.empty());

  const auto p = project();
  MetricsOptions binary;
  binary.offensive_binary = true;
  binary.scorer = [](std::string_view) { return 1; };
  CHECK(at(p, "cai", "2021-04-01T00:00:00Z", binary)[kCommentOffensive] == 1);
}

TEST_CASE("label configuration text") {
  MetricsOptions o;
  apply_label_config("# labels\nnewcomer_labels = beginner, easy\nfeature_labels = idea\n", o);
  CHECK(o.newcomer_labels == std::set<std::string>{"beginner", "easy"});
  CHECK(o.feature_labels == std::set<std::string>{"idea"});
  CHECK_THROWS_AS(apply_label_config("colour = red", o), InputError);
  CHECK_THROWS_AS(apply_label_config("no equals sign", o), InputError);
}

TEST_CASE("panel rows tile each candidate span and mark the event month") {
  const auto p = project();
  const auto det = detect_immigrations(p.stream, p.ids, {}, kCollection);
  CHECK(det.pool.founding_committers == std::set<DevId>{"maint"});
  CHECK(det.pool.immigrants == std::set<DevId>{"ana"});
  const auto panel = build_panel(p.stream, nullptr, p.ids, det.pool, det.events, kCollection);
  std::map<DevId, std::vector<PanelRow>> by_dev;
  for (const auto& r : panel.rows) by_dev[r.dev].push_back(r);
  CHECK(by_dev.at("ana").size() == 7);
  CHECK(by_dev.at("ben").size() == 8);
  CHECK(by_dev.at("cai").size() == 7);
  for (const auto& [dev, rows] : by_dev) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(rows[i].month == static_cast<int>(i) + 1);
      CHECK(rows[i].start == static_cast<double>(i));
      CHECK(rows[i].stop == static_cast<double>(i + 1));
      const bool last = i + 1 == rows.size();
      CHECK(rows[i].event == (last && dev == "ana" ? 1 : 0));
    }
  }
  // The first month has no history.
  CHECK(by_dev.at("ana")[0].x[kAllComment] == 0);
}

TEST_CASE("panel consistency checks") {
  const auto p = project();
  auto det = detect_immigrations(p.stream, p.ids, {}, kCollection);
  auto pool = det.pool;
  pool.immigrants.clear();
  CHECK_THROWS_AS(build_panel(p.stream, nullptr, p.ids, pool, det.events, kCollection), InputError);
  pool = det.pool;
  pool.candidates.erase("ben");
  CHECK_THROWS_AS(build_panel(p.stream, nullptr, p.ids, pool, det.events, kCollection), InputError);
}

TEST_CASE("panel csv round-trips including absent values") {
  const auto p = project();
  const auto det = detect_immigrations(p.stream, p.ids, {}, kCollection);
  const auto panel = build_panel(p.stream, nullptr, p.ids, det.pool, det.events, kCollection);
  const auto back = read_panel_csv(write_panel_csv(panel.rows));
  REQUIRE(back.size() == panel.rows.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].dev == panel.rows[i].dev);
    CHECK(back[i].month == panel.rows[i].month);
    CHECK(back[i].start == panel.rows[i].start);
    CHECK(back[i].stop == panel.rows[i].stop);
    CHECK(back[i].event == panel.rows[i].event);
    CHECK(back[i].x == panel.rows[i].x);
  }
  CHECK_THROWS_AS(read_panel_csv("dev_id,month\nx,1\n"), InputError);
}

TEST_CASE("panel integrity on the activity fixture") {
  const auto p = project();
  const auto det = detect_immigrations(p.stream, p.ids, {}, kCollection);
  const auto panel = build_panel(p.stream, nullptr, p.ids, det.pool, det.events, kCollection);
  CHECK(checks::cumulative_nondecreasing(panel.rows).empty());
  CHECK(checks::comment_sum(panel.rows, p.stream, p.ids, det.events).empty());
  CHECK(checks::rows_tile(panel.rows, det.events).empty());

  // Shifting every event by one month shifts each series by one index.
  const auto q = project(1);
  const auto shifted_collection = add_months(kCollection, 1);
  const auto det2 = detect_immigrations(q.stream, q.ids, {}, shifted_collection);
  const auto panel2 = build_panel(q.stream, nullptr, q.ids, det2.pool, det2.events, shifted_collection);
  const auto diff = checks::shift_invariant(panel.rows, panel2.rows);
  for (const auto& d : diff) MESSAGE(d);
  CHECK(diff.empty());
  CHECK(panel.rows.size() == panel2.rows.size());
}
