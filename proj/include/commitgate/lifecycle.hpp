#pragma once

#include "commitgate/identity.hpp"
#include "commitgate/ingest.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace commitgate {

struct ImmigrationEvent {
  DevId dev;
  Timestamp first_appearance{};
  std::optional<Timestamp> immigration_time;  // none = censored
  double transition_interval = 0;              // months

  bool censored() const { return !immigration_time.has_value(); }
  bool operator==(const ImmigrationEvent&) const = default;
};

struct CandidatePool {
  std::set<DevId> candidates;
  std::set<DevId> founding_committers;
  std::set<DevId> immigrants;  // subset of candidates
  std::map<DevId, std::string> exclusions;
};

struct Correction {
  enum class Action { kExclude, kRedate };
  DevId dev;
  Action action = Action::kExclude;
  std::optional<Timestamp> timestamp;  // required for kRedate
  std::string reason;
};

// CSV dev_id,action,timestamp,reason
std::vector<Correction> parse_corrections(std::string_view csv_text);

struct LifecycleOptions {
  // Event kinds that mark a developer's first appearance.
  std::set<EventKind> appearance_kinds = all_event_kinds();
};

struct DetectionResult {
  std::vector<ImmigrationEvent> events;  // one per candidate, sorted by dev
  CandidatePool pool;
};

DetectionResult detect_immigrations(const EventStream& stream, const IdentityMap& ids,
                                    std::span<const Correction> corrections,
                                    Timestamp collection_date,
                                    const LifecycleOptions& options = {});

// Developers ever appearing in a committer field over developers ever
// contributing. Bots are ignored.
double committer_proportion(const EventStream& stream, const IdentityMap& ids);

double immigration_rate(const CandidatePool& pool);

// dev_id,first_appearance,immigration_time,censored,interval_months
std::string write_immigrations_csv(const std::vector<ImmigrationEvent>& events);
std::vector<ImmigrationEvent> read_immigrations_csv(std::string_view text);

}  // namespace commitgate
