#include "commitgate/ingest.hpp"

#include "commitgate/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <tuple>

namespace commitgate {

using nlohmann::json;

namespace {

constexpr char kUnitSep = '\x1f';
constexpr char kRecordSep = '\x1e';

constexpr std::array<std::string_view, 8> kGitFields = {
    "hash",           "author_name",     "author_email",   "author_time",
    "committer_name", "committer_email", "committer_time", "message"};

constexpr std::array<std::string_view, kNumEventKinds> kKindNames = {
    "commit",        "issue_opened", "issue_closed", "issue_labeled", "issue_assigned",
    "issue_milestoned", "pr_opened", "pr_merged",    "pr_closed",     "pr_review",
    "issue_comment", "pr_comment",   "commit_comment"};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_hex40(std::string_view s) {
  return s.size() == 40 && std::all_of(s.begin(), s.end(), [](unsigned char c) {
           return std::isxdigit(c) != 0;
         });
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t begin = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, begin);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(begin));
      return out;
    }
    out.push_back(s.substr(begin, pos - begin));
    begin = pos + 1;
  }
}

json identity_to_json(const RawIdentity& id) {
  return json{{"name", id.name}, {"email", id.email}, {"login", id.login}};
}

RawIdentity identity_from_json(const json& j) {
  return RawIdentity{j.value("name", ""), j.value("email", ""), j.value("login", "")};
}

Timestamp time_from_json(const json& j, const char* field) {
  const auto t = parse_iso8601(j.at(field).get<std::string>());
  if (!t) throw InputError(fmt::format("events: invalid timestamp in field '{}'", field));
  return *t;
}

}  // namespace

RepoId RepoId::parse(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos || slash == 0 || slash + 1 == text.size() ||
      text.find('/', slash + 1) != std::string_view::npos) {
    throw InputError(fmt::format("invalid repo id '{}', expected org/name", text));
  }
  return RepoId{std::string(text.substr(0, slash)), std::string(text.substr(slash + 1))};
}

std::string RawIdentity::display() const {
  if (!login.empty()) return "@" + login;
  return fmt::format("{} <{}>", name, email);
}

std::string_view to_string(EventKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}

std::optional<EventKind> event_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<EventKind>(i);
  }
  return std::nullopt;
}

std::set<EventKind> all_event_kinds() {
  std::set<EventKind> out;
  for (int i = 0; i < kNumEventKinds; ++i) out.insert(static_cast<EventKind>(i));
  return out;
}

bool is_comment(EventKind kind) {
  return kind == EventKind::kIssueComment || kind == EventKind::kPrComment ||
         kind == EventKind::kCommitComment;
}

bool event_less(const Event& a, const Event& b) {
  const auto key = [](const Event& e) {
    return std::tie(e.time, e.kind, e.thread_id, e.actor, e.repo, e.opener, e.labels,
                    e.body, e.bot);
  };
  if (key(a) != key(b)) return key(a) < key(b);
  // Only commit payloads remain; thread ids embed the hash so this is rare.
  if (a.commit.has_value() != b.commit.has_value()) return !a.commit.has_value();
  if (!a.commit) return false;
  const auto ckey = [](const CommitRecord& c) {
    return std::tie(c.hash, c.author_name, c.author_email, c.author_time, c.committer_name,
                    c.committer_email, c.committer_time, c.files_touched, c.message);
  };
  return ckey(*a.commit) < ckey(*b.commit);
}

// ---- git log -----------------------------------------------------------------

std::vector<CommitRecord> parse_git_log(std::string_view stream, const RepoId& repo) {
  std::vector<CommitRecord> records;
  std::size_t offset = 0;
  while (offset < stream.size()) {
    std::size_t eol = stream.find('\n', offset);
    if (eol == std::string_view::npos) eol = stream.size();
    std::string_view line = stream.substr(offset, eol - offset);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::size_t line_offset = offset;
    offset = eol + 1;

    if (line.empty()) continue;

    if (line.find(kUnitSep) != std::string_view::npos ||
        line.find(kRecordSep) != std::string_view::npos) {
      const std::size_t index = records.size();
      if (line.back() != kRecordSep) {
        throw ParseError(fmt::format("record {} at byte {}: header not terminated by 0x1E",
                                     index, line_offset),
                         line_offset, index);
      }
      line.remove_suffix(1);
      const auto fields = split(line, kUnitSep);
      if (fields.size() < 7) {
        const auto missing = kGitFields[fields.size()];
        throw ParseError(fmt::format("record {} at byte {}: missing field '{}'", index,
                                     line_offset, missing),
                         line_offset, index, std::string(missing));
      }
      if (fields.size() > 8) {
        throw ParseError(fmt::format("record {} at byte {}: {} fields, expected 7 or 8",
                                     index, line_offset, fields.size()),
                         line_offset, index);
      }
      if (!is_hex40(fields[0])) {
        throw ParseError(fmt::format("record {} at byte {}: field 'hash' is not 40 hex "
                                     "digits",
                                     index, line_offset),
                         line_offset, index, "hash");
      }
      const auto read_time = [&](std::size_t field) {
        const auto t = parse_iso8601(fields[field]);
        if (!t) {
          throw ParseError(fmt::format("record {} at byte {}: invalid timestamp in field "
                                       "'{}': '{}'",
                                       index, line_offset, kGitFields[field],
                                       fields[field]),
                           line_offset, index, std::string(kGitFields[field]));
        }
        return *t;
      };
      CommitRecord rec;
      rec.hash = lower(fields[0]);
      rec.author_name = fields[1];
      rec.author_email = fields[2];
      rec.author_time = read_time(3);
      rec.committer_name = fields[4];
      rec.committer_email = fields[5];
      rec.committer_time = read_time(6);
      if (fields.size() == 8) rec.message = fields[7];
      rec.repo = repo;
      records.push_back(std::move(rec));
      continue;
    }

    // name-status line: "<status>\t<path>[\t<path>]"
    if (records.empty()) {
      throw ParseError(fmt::format("byte {}: file line before any commit header",
                                   line_offset),
                       line_offset, 0);
    }
    const auto parts = split(line, '\t');
    if (parts.size() < 2 || parts[0].empty() || parts.size() > 3) {
      throw ParseError(fmt::format("record {} at byte {}: malformed name-status line",
                                   records.size() - 1, line_offset),
                       line_offset, records.size() - 1, "files_touched");
    }
    // Renames and copies carry source and destination; the destination is
    // the file that now holds the change.
    records.back().files_touched.insert(std::string(parts.back()));
  }
  return records;
}

std::string serialize_git_log(const std::vector<CommitRecord>& records) {
  std::string out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const CommitRecord& r = records[i];
    out += r.hash;
    for (const std::string& f :
         {r.author_name, r.author_email, format_iso8601(r.author_time), r.committer_name,
          r.committer_email, format_iso8601(r.committer_time)}) {
      out += kUnitSep;
      out += f;
    }
    if (!r.message.empty()) {
      out += kUnitSep;
      out += r.message;
    }
    out += kRecordSep;
    out += '\n';
    for (const std::string& path : r.files_touched) {
      out += "M\t";
      out += path;
      out += '\n';
    }
    if (!r.files_touched.empty() && i + 1 < records.size()) out += '\n';
  }
  return out;
}

// ---- bots --------------------------------------------------------------------

bool BotPolicy::is_bot(const RawIdentity& id) const {
  const std::string login = lower(id.login);
  if (login.size() > 5 && login.ends_with("[bot]")) return true;
  if (id.name.size() > 5 && lower(id.name).ends_with("[bot]")) return true;
  for (const std::string& account : accounts) {
    const std::string a = lower(account);
    if ((!login.empty() && login == a) || (!id.email.empty() && lower(id.email) == a) ||
        (!id.name.empty() && lower(id.name) == a)) {
      return true;
    }
  }
  return false;
}

// ---- normalization -------------------------------------------------------------

Event commit_event(const CommitRecord& commit) {
  Event e;
  e.kind = EventKind::kCommit;
  e.actor = RawIdentity{commit.author_name, commit.author_email, {}};
  e.time = commit.author_time;
  e.repo = commit.repo;
  e.thread_id = "commit:" + commit.hash;
  e.body = commit.message;
  e.opener = e.actor;
  e.commit = commit;
  return e;
}

EventStream normalize(const std::vector<CommitRecord>& commits,
                      const std::vector<Event>& raw_events, const BotPolicy& bots,
                      NormalizeReport* report) {
  EventStream all;
  all.reserve(commits.size() + raw_events.size());
  for (const CommitRecord& c : commits) all.push_back(commit_event(c));
  for (const Event& e : raw_events) all.push_back(e);
  for (Event& e : all) {
    if (e.actor.empty()) throw InputError("event without actor in " + e.thread_id);
    e.bot = bots.is_bot(e.actor);
  }
  std::sort(all.begin(), all.end(), event_less);

  const auto dup_key = [](const Event& e) {
    return std::tie(e.kind, e.thread_id, e.actor, e.time);
  };
  EventStream out;
  out.reserve(all.size());
  std::set<std::tuple<EventKind, std::string, RawIdentity, Timestamp>> seen;
  for (Event& e : all) {
    auto [it, inserted] = seen.emplace(dup_key(e));
    if (!inserted) {
      if (report) {
        report->warnings.push_back(fmt::format("duplicate {} event on {} by {} at {} dropped",
                                               to_string(e.kind), e.thread_id,
                                               e.actor.display(), format_iso8601(e.time)));
      }
      continue;
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<std::size_t> out_of_window(const EventStream& stream, Timestamp lo,
                                       Timestamp hi) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (stream[i].time < lo || stream[i].time > hi) out.push_back(i);
  }
  return out;
}

// ---- NDJSON --------------------------------------------------------------------

std::string write_events_ndjson(const EventStream& stream) {
  std::string out;
  for (const Event& e : stream) {
    json j;
    j["kind"] = to_string(e.kind);
    j["actor"] = identity_to_json(e.actor);
    j["time"] = format_iso8601(e.time);
    j["repo"] = e.repo.str();
    j["thread_id"] = e.thread_id;
    j["labels"] = e.labels;
    j["body"] = e.body;
    j["opener"] = identity_to_json(e.opener);
    j["bot"] = e.bot;
    if (e.commit) {
      const CommitRecord& c = *e.commit;
      j["commit"] = json{{"hash", c.hash},
                         {"author_name", c.author_name},
                         {"author_email", c.author_email},
                         {"author_time", format_iso8601(c.author_time)},
                         {"committer_name", c.committer_name},
                         {"committer_email", c.committer_email},
                         {"committer_time", format_iso8601(c.committer_time)},
                         {"repo", c.repo.str()},
                         {"files_touched", c.files_touched},
                         {"message", c.message}};
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

EventStream read_events_ndjson(std::string_view text) {
  EventStream out;
  std::size_t line_no = 0;
  for (std::string_view line : split(text, '\n')) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Event e;
      const auto kind = event_kind_from_string(j.at("kind").get<std::string>());
      if (!kind) throw InputError("unknown event kind");
      e.kind = *kind;
      e.actor = identity_from_json(j.at("actor"));
      e.time = time_from_json(j, "time");
      e.repo = RepoId::parse(j.at("repo").get<std::string>());
      e.thread_id = j.at("thread_id").get<std::string>();
      e.labels = j.value("labels", std::set<std::string>{});
      e.body = j.value("body", "");
      if (j.contains("opener")) e.opener = identity_from_json(j.at("opener"));
      e.bot = j.value("bot", false);
      if (j.contains("commit")) {
        const json& c = j.at("commit");
        CommitRecord rec;
        rec.hash = c.at("hash").get<std::string>();
        rec.author_name = c.value("author_name", "");
        rec.author_email = c.value("author_email", "");
        rec.author_time = time_from_json(c, "author_time");
        rec.committer_name = c.value("committer_name", "");
        rec.committer_email = c.value("committer_email", "");
        rec.committer_time = time_from_json(c, "committer_time");
        rec.repo = RepoId::parse(c.at("repo").get<std::string>());
        rec.files_touched = c.value("files_touched", std::set<std::string>{});
        rec.message = c.value("message", "");
        e.commit = std::move(rec);
      }
      if (e.actor.empty()) throw InputError("empty actor");
      out.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw InputError(fmt::format("events line {}: {}", line_no, ex.what()));
    } catch (const InputError& ex) {
      throw InputError(fmt::format("events line {}: {}", line_no, ex.what()));
    }
  }
  return out;
}

}  // namespace commitgate
