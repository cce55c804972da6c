// Synthetic data shared by the unit tests and the acceptance runner.
#pragma once

#include "commitgate/ingest.hpp"
#include "commitgate/lifecycle.hpp"
#include "commitgate/survival.hpp"
#include "commitgate/time.hpp"

#include <fmt/format.h>

#include <cmath>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace fx {

using namespace commitgate;

class TempDir {
 public:
  explicit TempDir(std::string_view tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / fmt::format("commitgate-{}-{:016x}", tag, rng());
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline Timestamp ts(std::string_view iso) {
  const auto t = parse_iso8601(iso);
  if (!t) throw std::runtime_error("bad fixture timestamp " + std::string(iso));
  return *t;
}

inline SurvivalData make_data(std::vector<std::string> names, const std::vector<std::vector<double>>& x,
                              const std::vector<double>& start, const std::vector<double>& stop,
                              const std::vector<int>& event) {
  SurvivalData d;
  d.names = std::move(names);
  const auto n = static_cast<Eigen::Index>(x.size());
  const auto p = static_cast<Eigen::Index>(d.names.size());
  d.x.resize(n, p);
  d.start.resize(n);
  d.stop.resize(n);
  d.event.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) d.x(i, j) = x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    d.start(i) = start[static_cast<std::size_t>(i)];
    d.stop(i) = stop[static_cast<std::size_t>(i)];
    d.event(i) = event[static_cast<std::size_t>(i)];
  }
  return d;
}

// Events at t=1 (x=1) and t=2 (x=0), censored at t=3 (x=1).
inline SurvivalData three_subject() {
  return make_data({"x"}, {{1}, {0}, {1}}, {0, 0, 0}, {1, 2, 3}, {1, 1, 0});
}

// Monthly counting-process panel: subjects with 1-6 rows, time-varying
// normal covariates, events on last rows. Heavy ties by construction.
inline SurvivalData random_panel(std::mt19937_64& rng, int max_rows, int p) {
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> duration(1, 6);
  std::bernoulli_distribution has_event(0.6);
  for (;;) {
    std::vector<std::vector<double>> x;
    std::vector<double> start, stop;
    std::vector<int> event;
    while (true) {
      const int d = duration(rng);
      if (static_cast<int>(x.size()) + d > max_rows) break;
      const bool e = has_event(rng);
      const double offset = normal(rng);
      for (int k = 1; k <= d; ++k) {
        std::vector<double> row;
        for (int j = 0; j < p; ++j) row.push_back(normal(rng) + (j == 0 ? offset : 0.0));
        x.push_back(row);
        start.push_back(k - 1);
        stop.push_back(k);
        event.push_back(e && k == d ? 1 : 0);
      }
    }
    int events = 0;
    for (int e : event) events += e;
    if (events >= 3 && static_cast<int>(x.size()) > 2 * p + 4) {
      std::vector<std::string> names;
      for (int j = 0; j < p; ++j) names.push_back(fmt::format("x{}", j + 1));
      return make_data(names, x, start, stop, event);
    }
  }
}

// One row per subject from a piecewise-exponential model with rates
// rates[k] * exp(beta * x) on (cuts[k], cuts[k+1]], x ~ N(0, 1), censored
// administratively at cuts.back().
inline SurvivalData simulate_pwe(std::mt19937_64& rng, int n, double beta,
                                 const std::vector<double>& cuts, const std::vector<double>& rates) {
  std::normal_distribution<double> normal;
  std::exponential_distribution<double> unit_exp(1.0);
  std::vector<std::vector<double>> x;
  std::vector<double> start, stop;
  std::vector<int> event;
  for (int i = 0; i < n; ++i) {
    const double xi = normal(rng);
    const double scale = std::exp(beta * xi);
    double remaining = unit_exp(rng);
    double t = cuts.back();
    int e = 0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double rate = rates[k] * scale;
      const double width = cuts[k + 1] - cuts[k];
      if (remaining <= rate * width) {
        t = cuts[k] + remaining / rate;
        e = 1;
        break;
      }
      remaining -= rate * width;
    }
    x.push_back({xi});
    start.push_back(cuts.front());
    stop.push_back(t);
    event.push_back(e);
  }
  return make_data({"x"}, x, start, stop, event);
}

// ---- git-log immigration fixture --------------------------------------------

struct PlannedDev {
  std::string name;
  std::string email;
};

struct ImmigrationFixture {
  RepoId repo{"acme", "widget"};
  std::string git_log;
  Timestamp collection_date{};
  std::vector<Correction> corrections;
  // Ground truth, keyed by email (the dev id when no login is known).
  std::set<std::string> founders;
  std::map<std::string, std::string> exclusions;
  std::map<std::string, Timestamp> first_appearance;  // every candidate
  std::map<std::string, Timestamp> immigration;       // immigrants only
  int developer_count = 0;
};

inline ImmigrationFixture immigration_fixture() {
  ImmigrationFixture f;
  f.collection_date = ts("2021-12-31T23:59:59Z");
  int serial = 0;
  const auto hash = [&] { return fmt::format("{:040x}", ++serial); };
  const auto commit = [&](const PlannedDev& author, std::string_view author_time,
                          const PlannedDev& committer, std::string_view committer_time,
                          std::vector<std::string> files) {
    f.git_log += fmt::format("{}\x1f{}\x1f{}\x1f{}\x1f{}\x1f{}\x1f{}\x1e\n", hash(), author.name,
                             author.email, author_time, committer.name, committer.email,
                             committer_time);
    if (!files.empty()) {
      f.git_log += "\n";
      for (const auto& file : files) f.git_log += "M\t" + file + "\n";
    }
    f.git_log += "\n";
  };

  const PlannedDev founder{"Fay Founder", "fay@acme.io"};
  f.founders.insert(founder.email);
  commit(founder, "2020-01-03T10:00:00Z", founder, "2020-01-03T10:00:00Z", {"README"});

  std::vector<PlannedDev> contributors;
  for (int i = 1; i <= 20; ++i) {
    contributors.push_back({fmt::format("Contributor {}", i), fmt::format("c{}@mail.example.org", i)});
  }
  for (int i = 0; i < 20; ++i) {
    const auto& c = contributors[static_cast<std::size_t>(i)];
    const std::string t = fmt::format("2020-{:02d}-{:02d}T09:00:00Z", 1 + i % 12, 5 + i);
    commit(c, t, founder, fmt::format("2020-{:02d}-{:02d}T12:00:00Z", 1 + i % 12, 5 + i),
           {fmt::format("src/c{}.c", i)});
    f.first_appearance[c.email] = ts(t);
  }

  // Six immigrants: first patch committed by the founder, later their own
  // commit-field appearance.
  struct Plan {
    std::string first_author_time;
    std::string first_commit_time;
    std::string committer_author_time;
    std::string committer_time;
    int merges_contributor;  // -1: self-authored
  };
  const std::vector<Plan> plans = {
      {"2020-02-10T08:00:00Z", "2020-02-11T08:00:00Z", "2020-06-01T08:00:00Z", "2020-06-01T09:30:00Z", -1},
      {"2020-03-15T08:00:00Z", "2020-03-15T18:00:00Z", "2020-03-20T08:00:00Z", "2020-04-02T11:00:00Z", 0},
      {"2020-05-05T08:00:00Z", "2020-05-06T08:00:00Z", "2021-01-10T08:00:00Z", "2021-01-12T08:00:00Z", -1},
      {"2020-07-07T08:00:00Z", "2020-07-07T10:00:00Z", "2020-08-01T08:00:00Z", "2020-09-15T14:00:00Z", 1},
      {"2020-11-11T08:00:00Z", "2020-11-12T08:00:00Z", "2021-06-30T08:00:00Z", "2021-06-30T23:00:00Z", -1},
      {"2021-02-02T08:00:00Z", "2021-02-03T08:00:00Z", "2021-12-31T08:00:00Z", "2021-12-31T20:00:00Z", -1},
  };
  for (std::size_t k = 0; k < plans.size(); ++k) {
    const PlannedDev dev{fmt::format("Immigrant {}", k + 1), fmt::format("imm{}@corp{}.com", k + 1, k + 1)};
    const Plan& p = plans[k];
    commit(dev, p.first_author_time, founder, p.first_commit_time, {fmt::format("lib/i{}.c", k)});
    const PlannedDev& author =
        p.merges_contributor < 0 ? dev : contributors[static_cast<std::size_t>(p.merges_contributor)];
    commit(author, p.committer_author_time, dev, p.committer_time, {fmt::format("lib/m{}.c", k)});
    f.first_appearance[dev.email] = ts(p.first_author_time);
    f.immigration[dev.email] = ts(p.committer_time);
  }

  // Excluded by a correction even though the log shows an immigration.
  const PlannedDev excluded{"Mirror Sync", "mirror@acme.io"};
  commit(excluded, "2020-04-04T08:00:00Z", founder, "2020-04-04T09:00:00Z", {"mirror.txt"});
  commit(excluded, "2020-10-10T08:00:00Z", excluded, "2020-10-10T08:00:00Z", {"mirror.txt"});
  f.corrections.push_back({excluded.email, Correction::Action::kExclude, std::nullopt, "mirror account"});
  f.exclusions[excluded.email] = "mirror account";

  // Near miss: first commit-field appearance just after the collection date.
  const PlannedDev late{"Late Lee", "lee@late.dev"};
  commit(late, "2021-03-03T08:00:00Z", founder, "2021-03-03T09:00:00Z", {"late.c"});
  commit(late, "2022-01-01T00:00:05Z", late, "2022-01-01T00:00:10Z", {"late.c"});
  f.first_appearance[late.email] = ts("2021-03-03T08:00:00Z");

  // A bot author is excluded from the pool.
  const PlannedDev bot{"dependabot[bot]", "49699333+dependabot[bot]@users.noreply.github.com"};
  commit(bot, "2021-05-05T08:00:00Z", founder, "2021-05-05T09:00:00Z", {"package.json"});
  f.exclusions[bot.email] = "bot account";

  f.developer_count = 1 + 20 + 6 + 1 + 1 + 1;
  return f;
}

// ---- event-stream helpers -----------------------------------------------------

inline RawIdentity login(std::string l) { return RawIdentity{{}, {}, std::move(l)}; }

inline Event api_event(EventKind kind, std::string actor, std::string_view time, std::string thread,
                       std::string opener = {}, std::set<std::string> labels = {},
                       std::string body = {}) {
  Event e;
  e.kind = kind;
  e.actor = login(std::move(actor));
  e.time = ts(time);
  e.repo = RepoId{"acme", "widget"};
  e.thread_id = std::move(thread);
  e.opener = login(std::move(opener));
  e.labels = std::move(labels);
  e.body = std::move(body);
  return e;
}

inline CommitRecord make_commit(int serial, std::string name, std::string email,
                                std::string_view author_time, std::string committer_name,
                                std::string committer_email, std::string_view committer_time,
                                std::set<std::string> files, RepoId repo = {"acme", "widget"}) {
  CommitRecord c;
  c.hash = fmt::format("{:040x}", serial);
  c.author_name = std::move(name);
  c.author_email = std::move(email);
  c.author_time = ts(author_time);
  c.committer_name = std::move(committer_name);
  c.committer_email = std::move(committer_email);
  c.committer_time = ts(committer_time);
  c.repo = std::move(repo);
  c.files_touched = std::move(files);
  return c;
}

// A small project with issues, PRs, reviews, comments and commits spread
// over 2021; all days are <= 28 so calendar-month shifts are exact.
struct ActivityFixture {
  std::vector<CommitRecord> commits;
  std::vector<Event> events;
  std::vector<RawIdentity> links;
};

inline ActivityFixture activity_fixture(int month_shift = 0) {
  ActivityFixture a;
  const auto shift = [&](std::string_view iso) { return format_iso8601(add_months(ts(iso), month_shift)); };
  const auto ev = [&](EventKind k, std::string actor, std::string_view t, std::string thread,
                      std::string opener = {}, std::set<std::string> labels = {}, std::string body = {}) {
    a.events.push_back(api_event(k, std::move(actor), shift(t), std::move(thread), std::move(opener),
                                 std::move(labels), std::move(body)));
  };
  const auto email = [](const std::string& who) {
    return who + "@" + (who == "ana" ? "bigco.com" : (who == "maint" ? "acme.io" : "mail.example.org"));
  };
  const auto commit = [&](int serial, const std::string& who, std::string_view t, std::set<std::string> files,
                          const std::string& committer = "maint") {
    a.commits.push_back(make_commit(serial, who, email(who), shift(t), committer, email(committer), shift(t),
                                    std::move(files)));
  };
  for (const char* who : {"ana", "ben", "cai", "maint"}) a.links.push_back({who, email(who), who});
  commit(1, "maint", "2021-01-02T10:00:00Z", {"README"});
  ev(EventKind::kIssueOpened, "ana", "2021-01-10T10:00:00Z", "issue#1", "ana", {"enhancement"});
  ev(EventKind::kIssueComment, "ben", "2021-01-11T10:00:00Z", "issue#1", "ana", {}, "looks good");
  ev(EventKind::kIssueComment, "ana", "2021-01-12T10:00:00Z", "issue#1", "ana", {}, "thanks");
  ev(EventKind::kIssueOpened, "ben", "2021-02-03T10:00:00Z", "issue#2", "ben");
  ev(EventKind::kIssueLabeled, "ana", "2021-02-04T10:00:00Z", "issue#2", "ben", {"good first issue"});
  ev(EventKind::kIssueComment, "cai", "2021-02-05T10:00:00Z", "issue#2", "ben", {}, "this is stupid");
  ev(EventKind::kIssueAssigned, "ana", "2021-02-06T10:00:00Z", "issue#2", "ben");
  ev(EventKind::kPrOpened, "ana", "2021-02-14T10:00:00Z", "pr#3", "ana");
  ev(EventKind::kPrReview, "ben", "2021-02-15T10:00:00Z", "pr#3", "ana");
  ev(EventKind::kPrComment, "ben", "2021-02-15T11:00:00Z", "pr#3", "ana", {}, "nit");
  ev(EventKind::kPrMerged, "maint", "2021-02-16T10:00:00Z", "pr#3", "ana");
  commit(2, "ana", "2021-02-16T09:00:00Z", {"src/a.c", "src/b.c"});
  commit(3, "ana", "2021-03-01T09:00:00Z", {"src/b.c", "src/c.c"});
  ev(EventKind::kCommitComment, "cai", "2021-03-02T10:00:00Z", fmt::format("commit:{:040x}", 3), "ana", {}, "why");
  ev(EventKind::kPrOpened, "ana", "2021-03-10T10:00:00Z", "pr#4", "ana");
  ev(EventKind::kPrClosed, "maint", "2021-03-20T10:00:00Z", "pr#4", "ana");
  ev(EventKind::kIssueOpened, "cai", "2021-04-01T10:00:00Z", "issue#5", "cai", {"feature request"});
  ev(EventKind::kIssueComment, "ana", "2021-04-02T10:00:00Z", "issue#5", "cai", {}, "agreed");
  ev(EventKind::kIssueClosed, "ana", "2021-04-03T10:00:00Z", "issue#5", "cai");
  ev(EventKind::kIssueMilestoned, "ben", "2021-05-08T10:00:00Z", "issue#1", "ana");
  commit(4, "ben", "2021-05-09T09:00:00Z", {"docs/x.md"});
  ev(EventKind::kIssueComment, "ben", "2021-06-09T09:00:00Z", "issue#2", "ben", {}, "ping");
  commit(5, "ana", "2021-07-01T09:00:00Z", {"src/a.c"}, "ana");
  ev(EventKind::kIssueComment, "cai", "2021-07-20T09:00:00Z", "issue#1", "ana", {}, "me too");
  return a;
}

// ---- synthetic project for end-to-end runs -------------------------------------

// A repo whose contributors have a latent engagement level driving both
// their monthly activity and their chance of becoming a committer.
struct SyntheticProject {
  RepoId repo{"acme", "widget"};
  std::string git_log;
  std::vector<Event> events;
  std::string collection_date = "2022-12-28T23:59:59Z";
};

inline SyntheticProject synthetic_project(std::uint64_t seed, int n_devs = 60) {
  SyntheticProject sp;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0, 1);
  std::uniform_int_distribution<int> day(1, 28), hour(0, 23), arrival(0, 17);
  int serial = 0, thread = 0;
  std::vector<std::string> issues;
  const Timestamp origin = ts("2021-01-01T00:00:00Z");
  const auto when = [&](int month) {
    return add_months(origin, month) + std::chrono::hours(24 * (day(rng) - 1) + hour(rng));
  };
  const RawIdentity maint{"Maint", "maint@acme.io", "maint"};
  const auto commit = [&](const RawIdentity& author, const RawIdentity& committer, Timestamp t,
                          const std::string& file) {
    const std::string iso = format_iso8601(t);
    sp.git_log += fmt::format("{:040x}\x1f{}\x1f{}\x1f{}\x1f{}\x1f{}\x1f{}\x1e\n\nM\t{}\n\n", ++serial, author.name,
                              author.email, iso, committer.name, committer.email, iso, file);
  };
  const auto event = [&](EventKind k, const RawIdentity& actor, Timestamp t, std::string thread_id,
                         const RawIdentity& opener, std::set<std::string> labels = {}) {
    Event e;
    e.kind = k;
    e.actor = actor;
    e.time = t;
    e.repo = sp.repo;
    e.thread_id = std::move(thread_id);
    e.opener = opener;
    e.labels = std::move(labels);
    sp.events.push_back(std::move(e));
  };
  commit(maint, maint, origin + std::chrono::hours(10), "README");
  const int months = 24;
  for (int i = 0; i < n_devs; ++i) {
    const std::string login = fmt::format("dev{}", i);
    const RawIdentity dev{fmt::format("Dev {}", i),
                          fmt::format("{}@{}", login, i % 3 == 0 ? "bigco.com" : "mail.example.org"), login};
    const double engagement = 0.3 + 2.7 * unif(rng);
    const auto pois = [&](double mean) { return std::poisson_distribution<int>(mean)(rng); };
    for (int m = arrival(rng); m < months; ++m) {
      const int opened = pois(engagement / 3);
      for (int k = 0; k < opened; ++k) {
        const std::string id = fmt::format("issue#{}", ++thread);
        const bool feature = unif(rng) < 0.3;
        event(EventKind::kIssueOpened, dev, when(m), id, dev,
              feature ? std::set<std::string>{"enhancement"} : std::set<std::string>{});
        issues.push_back(id);
      }
      const int comments = pois(engagement);
      for (int k = 0; k < comments && !issues.empty(); ++k) {
        const auto& id = issues[static_cast<std::size_t>(unif(rng) * static_cast<double>(issues.size()))];
        event(EventKind::kIssueComment, dev, when(m), id, maint);
      }
      const int prs = pois(engagement / 4);
      for (int k = 0; k < prs; ++k) {
        const std::string id = fmt::format("pr#{}", ++thread);
        const Timestamp t = when(m);
        event(EventKind::kPrOpened, dev, t, id, dev);
        if (unif(rng) < 0.6) event(EventKind::kPrMerged, maint, t + std::chrono::hours(30), id, dev);
        commit(dev, maint, t, fmt::format("src/f{}.c", static_cast<int>(unif(rng) * 40)));
      }
      if (unif(rng) < 1 - std::exp(-0.03 * engagement * engagement)) {
        commit(dev, dev, when(m), fmt::format("src/f{}.c", static_cast<int>(unif(rng) * 40)));
        break;
      }
    }
  }
  std::sort(sp.events.begin(), sp.events.end(), event_less);
  return sp;
}

// Writes the project and a matching config; returns the config path.
inline std::filesystem::path write_project(const SyntheticProject& sp, const std::filesystem::path& dir,
                                           const std::filesystem::path& output_dir) {
  const auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
  };
  write(dir / "git.log", sp.git_log);
  write(dir / "events.ndjson", write_events_ndjson(sp.events));
  const std::string config = fmt::format(
      R"({{"repos": [{{"id": "{}", "role": "focal", "git_log": "git.log", "events": "events.ndjson"}}],
 "collection_date": "{}", "output_dir": "{}"}})",
      sp.repo.str(), sp.collection_date, output_dir.string());
  write(dir / "config.json", config);
  return dir / "config.json";
}

}  // namespace fx
