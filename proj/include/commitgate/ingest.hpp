#pragma once

#include "commitgate/time.hpp"

#include <compare>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace commitgate {

// Repository identifier "org/name".
struct RepoId {
  std::string org;
  std::string name;

  static RepoId parse(std::string_view text);  // throws InputError
  std::string str() const { return org + "/" + name; }
  auto operator<=>(const RepoId&) const = default;
};

struct CommitRecord {
  std::string hash;
  std::string author_name;
  std::string author_email;
  Timestamp author_time{};
  std::string committer_name;
  std::string committer_email;
  Timestamp committer_time{};
  RepoId repo;
  std::set<std::string> files_touched;
  std::string message;

  bool operator==(const CommitRecord&) const = default;
};

// One observed identity as it appears in the data. Git supplies name/email,
// the hosting API supplies logins; either part may be empty.
struct RawIdentity {
  std::string name;
  std::string email;
  std::string login;

  bool empty() const { return name.empty() && email.empty() && login.empty(); }
  std::string display() const;
  auto operator<=>(const RawIdentity&) const = default;
};

// Declaration order is the tie-break order used by normalize().
enum class EventKind {
  kCommit,
  kIssueOpened,
  kIssueClosed,
  kIssueLabeled,
  kIssueAssigned,
  kIssueMilestoned,
  kPrOpened,
  kPrMerged,
  kPrClosed,
  kPrReview,
  kIssueComment,
  kPrComment,
  kCommitComment,
};

inline constexpr int kNumEventKinds = 13;

std::string_view to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view name);
std::set<EventKind> all_event_kinds();
bool is_comment(EventKind kind);

struct Event {
  EventKind kind = EventKind::kCommit;
  RawIdentity actor;
  Timestamp time{};
  RepoId repo;
  std::string thread_id;
  std::set<std::string> labels;
  std::string body;
  RawIdentity opener;
  bool bot = false;
  // Present iff kind == kCommit.
  std::optional<CommitRecord> commit;

  bool operator==(const Event&) const = default;
};

// Total order: (time, kind, thread_id) first, then the remaining fields so
// that the stream order never depends on input order.
bool event_less(const Event& a, const Event& b);

using EventStream = std::vector<Event>;

// ---- git log ---------------------------------------------------------------

// Pretty-format used to produce parse_git_log input:
//   git log --pretty=format:'%H%x1f%an%x1f%ae%x1f%aI%x1f%cn%x1f%ce%x1f%cI%x1e' --name-status
// An optional eighth field (e.g. %s) is read into CommitRecord::message.
inline constexpr std::string_view kGitLogFormat =
    "%H%x1f%an%x1f%ae%x1f%aI%x1f%cn%x1f%ce%x1f%cI%x1e";

std::vector<CommitRecord> parse_git_log(std::string_view stream, const RepoId& repo);

// Inverse of parse_git_log. Files are written as "M\t<path>" lines.
std::string serialize_git_log(const std::vector<CommitRecord>& records);

// ---- bots ------------------------------------------------------------------

struct BotPolicy {
  // Logins, emails or names matched case-insensitively.
  std::set<std::string> accounts = {"noreply@github.com", "web-flow", "github"};
  bool is_bot(const RawIdentity& id) const;
};

// ---- normalization -----------------------------------------------------------

struct NormalizeReport {
  std::vector<std::string> warnings;
};

Event commit_event(const CommitRecord& commit);

// Merges commits and API events into one sorted, de-duplicated stream.
// Duplicates by (kind, thread_id, actor, time) are dropped with a warning.
EventStream normalize(const std::vector<CommitRecord>& commits,
                      const std::vector<Event>& raw_events, const BotPolicy& bots = {},
                      NormalizeReport* report = nullptr);

// Events whose time falls outside [lo, hi]; normalize() never drops them.
std::vector<std::size_t> out_of_window(const EventStream& stream, Timestamp lo,
                                       Timestamp hi);

// ---- normalized event file (NDJSON) ------------------------------------------

std::string write_events_ndjson(const EventStream& stream);
EventStream read_events_ndjson(std::string_view text);

}  // namespace commitgate
