#include "commitgate/lifecycle.hpp"

#include "commitgate/csv.hpp"
#include "commitgate/error.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace commitgate {

namespace {

struct DevTimeline {
  std::optional<Timestamp> first_activity;
  bool first_activity_self_committed = false;
  std::optional<Timestamp> first_committer;
};

const DevId* committer_of(const CommitRecord& c, const IdentityMap& ids) {
  return ids.find(RawIdentity{c.committer_name, c.committer_email, {}});
}

}  // namespace

std::vector<Correction> parse_corrections(std::string_view csv_text) {
  const auto table = csv::parse_table(csv_text, {"dev_id", "action", "timestamp", "reason"});
  std::vector<Correction> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    Correction c;
    c.dev = row[0];
    if (row[1] == "exclude") {
      c.action = Correction::Action::kExclude;
    } else if (row[1] == "redate") {
      c.action = Correction::Action::kRedate;
    } else {
      throw InputError(fmt::format("corrections row {}: unknown action '{}'", r + 1, row[1]));
    }
    if (!row[2].empty()) {
      c.timestamp = parse_iso8601(row[2]);
      if (!c.timestamp) {
        throw InputError(fmt::format("corrections row {}: invalid timestamp '{}'", r + 1, row[2]));
      }
    }
    if (c.action == Correction::Action::kRedate && !c.timestamp) {
      throw InputError(fmt::format("corrections row {}: redate needs a timestamp", r + 1));
    }
    c.reason = row[3];
    out.push_back(std::move(c));
  }
  return out;
}

DetectionResult detect_immigrations(const EventStream& stream, const IdentityMap& ids,
                                    std::span<const Correction> corrections,
                                    Timestamp collection_date,
                                    const LifecycleOptions& options) {
  std::map<DevId, DevTimeline> timelines;
  for (const Event& e : stream) {
    if (const DevId* dev = ids.find(e.actor); dev && options.appearance_kinds.count(e.kind)) {
      DevTimeline& tl = timelines[*dev];
      if (!tl.first_activity || e.time < *tl.first_activity) {
        tl.first_activity = e.time;
        const DevId* committer = e.commit ? committer_of(*e.commit, ids) : nullptr;
        tl.first_activity_self_committed = committer && *committer == *dev;
      }
    }
    if (e.commit) {
      if (const DevId* committer = committer_of(*e.commit, ids)) {
        DevTimeline& tl = timelines[*committer];
        const Timestamp t = e.commit->committer_time;
        if (!tl.first_committer || t < *tl.first_committer) tl.first_committer = t;
      }
    }
  }

  DetectionResult result;
  CandidatePool& pool = result.pool;
  std::map<DevId, ImmigrationEvent> events;
  for (const auto& [dev, tl] : timelines) {
    if (ids.devs.at(dev).bot) {
      pool.exclusions[dev] = "bot account";
      continue;
    }
    const bool founding =
        tl.first_committer &&
        (!tl.first_activity || *tl.first_committer <= *tl.first_activity ||
         tl.first_activity_self_committed);
    if (founding) {
      pool.founding_committers.insert(dev);
      continue;
    }
    if (!tl.first_activity) continue;
    if (*tl.first_activity > collection_date) {
      pool.exclusions[dev] = "first appearance after collection date";
      continue;
    }
    pool.candidates.insert(dev);
    ImmigrationEvent ev;
    ev.dev = dev;
    ev.first_appearance = *tl.first_activity;
    if (tl.first_committer && *tl.first_committer <= collection_date) {
      ev.immigration_time = tl.first_committer;
      pool.immigrants.insert(dev);
    }
    events[dev] = ev;
  }

  for (const Correction& c : corrections) {
    if (!ids.devs.count(c.dev)) {
      throw InputError(fmt::format("correction references unknown developer '{}'", c.dev));
    }
    if (c.action == Correction::Action::kExclude) {
      pool.candidates.erase(c.dev);
      pool.immigrants.erase(c.dev);
      events.erase(c.dev);
      pool.exclusions[c.dev] = c.reason.empty() ? "excluded by correction" : c.reason;
      continue;
    }
    auto it = events.find(c.dev);
    if (it == events.end()) {
      throw InputError(fmt::format("cannot redate '{}': not a candidate", c.dev));
    }
    if (*c.timestamp < it->second.first_appearance || *c.timestamp > collection_date) {
      throw InputError(fmt::format("redate of '{}' to {} falls outside [{}, {}]", c.dev,
                                   format_iso8601(*c.timestamp),
                                   format_iso8601(it->second.first_appearance),
                                   format_iso8601(collection_date)));
    }
    it->second.immigration_time = c.timestamp;
    pool.immigrants.insert(c.dev);
  }

  for (auto& [dev, ev] : events) {
    ev.transition_interval =
        months_between(ev.first_appearance, ev.immigration_time.value_or(collection_date));
    result.events.push_back(ev);
  }
  return result;
}

double committer_proportion(const EventStream& stream, const IdentityMap& ids) {
  std::set<DevId> contributors, committers;
  const auto is_bot = [&](const DevId& d) { return ids.devs.at(d).bot; };
  for (const Event& e : stream) {
    if (const DevId* dev = ids.find(e.actor); dev && !is_bot(*dev)) contributors.insert(*dev);
    if (e.commit) {
      if (const DevId* c = committer_of(*e.commit, ids); c && !is_bot(*c)) {
        committers.insert(*c);
        contributors.insert(*c);
      }
    }
  }
  if (contributors.empty()) throw InputError("committer_proportion: no developers");
  return static_cast<double>(committers.size()) / static_cast<double>(contributors.size());
}

double immigration_rate(const CandidatePool& pool) {
  if (pool.candidates.empty()) throw InputError("immigration_rate: empty candidate set");
  return static_cast<double>(pool.immigrants.size()) /
         static_cast<double>(pool.candidates.size());
}

std::string write_immigrations_csv(const std::vector<ImmigrationEvent>& events) {
  std::string out = csv::format_row(
      {"dev_id", "first_appearance", "immigration_time", "censored", "interval_months"});
  for (const ImmigrationEvent& e : events) {
    out += csv::format_row({e.dev, format_iso8601(e.first_appearance),
                            e.immigration_time ? format_iso8601(*e.immigration_time) : "",
                            e.censored() ? "1" : "0", csv::format_double(e.transition_interval)});
  }
  return out;
}

std::vector<ImmigrationEvent> read_immigrations_csv(std::string_view text) {
  const auto table = csv::parse_table(
      text, {"dev_id", "first_appearance", "immigration_time", "censored", "interval_months"});
  std::vector<ImmigrationEvent> out;
  for (const auto& row : table.rows) {
    ImmigrationEvent e;
    e.dev = row[0];
    const auto first = parse_iso8601(row[1]);
    if (!first) throw InputError("immigrations: bad first_appearance '" + row[1] + "'");
    e.first_appearance = *first;
    if (!row[2].empty()) {
      e.immigration_time = parse_iso8601(row[2]);
      if (!e.immigration_time) throw InputError("immigrations: bad immigration_time");
    }
    if ((row[3] == "1") != e.censored()) {
      throw InputError("immigrations: censored flag inconsistent for " + e.dev);
    }
    e.transition_interval = std::stod(row[4]);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace commitgate
