// Panel integrity checks shared by the unit tests and the acceptance runner.
// Each returns a list of human-readable violations; empty means pass.
#pragma once

#include "commitgate/identity.hpp"
#include "commitgate/lifecycle.hpp"
#include "commitgate/metrics.hpp"

#include <fmt/format.h>

#include <map>
#include <string>
#include <vector>

namespace checks {

using namespace commitgate;

inline std::map<DevId, std::vector<const PanelRow*>> by_dev(const std::vector<PanelRow>& rows) {
  std::map<DevId, std::vector<const PanelRow*>> out;
  for (const auto& r : rows) out[r.dev].push_back(&r);
  return out;
}

inline std::vector<std::string> cumulative_nondecreasing(const std::vector<PanelRow>& rows) {
  std::vector<std::string> bad;
  for (const auto& [dev, series] : by_dev(rows)) {
    for (std::size_t i = 1; i < series.size(); ++i) {
      for (int c = 0; c < kNumCovariates; ++c) {
        if (!is_cumulative(static_cast<Covariate>(c))) continue;
        const auto& prev = series[i - 1]->x[static_cast<std::size_t>(c)];
        const auto& cur = series[i]->x[static_cast<std::size_t>(c)];
        if (prev.has_value() != cur.has_value() || (prev && *cur < *prev)) {
          bad.push_back(fmt::format("{} month {}: {} decreased", dev, series[i]->month,
                                    kCovariateNames[static_cast<std::size_t>(c)]));
        }
      }
    }
  }
  return bad;
}

// M7 against a direct count of the three comment kinds before each cutoff.
inline std::vector<std::string> comment_sum(const std::vector<PanelRow>& rows, const EventStream& stream,
                                            const IdentityMap& ids,
                                            const std::vector<ImmigrationEvent>& immigrations) {
  std::map<DevId, int> first_month;
  for (const auto& ev : immigrations) first_month[ev.dev] = month_number(ev.first_appearance);
  std::vector<std::string> bad;
  for (const auto& r : rows) {
    const Timestamp cutoff = month_start(first_month.at(r.dev) + r.month - 1);
    int issue = 0, pr = 0, commit = 0;
    for (const auto& e : stream) {
      if (e.time >= cutoff) break;
      const DevId* who = ids.find(e.actor);
      if (!who || *who != r.dev) continue;
      issue += e.kind == EventKind::kIssueComment;
      pr += e.kind == EventKind::kPrComment;
      commit += e.kind == EventKind::kCommitComment;
    }
    if (r.x[kAllComment] != static_cast<double>(issue + pr + commit)) {
      bad.push_back(fmt::format("{} month {}: M7 {} != {} + {} + {}", r.dev, r.month,
                                r.x[kAllComment].value_or(-1), issue, pr, commit));
    }
  }
  return bad;
}

// Rows for each candidate are months 1..n, each (i-1, i], with the event
// flag only on the last row of an immigrant.
inline std::vector<std::string> rows_tile(const std::vector<PanelRow>& rows,
                                          const std::vector<ImmigrationEvent>& immigrations) {
  std::map<DevId, const ImmigrationEvent*> ev;
  for (const auto& e : immigrations) ev[e.dev] = &e;
  std::vector<std::string> bad;
  const auto series = by_dev(rows);
  for (const auto& [dev, e] : ev) {
    if (!series.count(dev)) bad.push_back(dev + ": candidate without rows");
  }
  for (const auto& [dev, s] : series) {
    if (!ev.count(dev)) {
      bad.push_back(dev + ": rows for a non-candidate");
      continue;
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto& r = *s[i];
      const bool last = i + 1 == s.size();
      if (r.month != static_cast<int>(i) + 1 || r.start != static_cast<double>(i) ||
          r.stop != static_cast<double>(i + 1)) {
        bad.push_back(fmt::format("{}: row {} is ({}, {}] month {}", dev, i, r.start, r.stop, r.month));
      }
      if (r.event != ((last && !ev.at(dev)->censored()) ? 1 : 0)) {
        bad.push_back(fmt::format("{}: misplaced event flag on row {}", dev, i));
      }
    }
  }
  return bad;
}

// Compares the panels built from the original and the +1-month-shifted
// stream. Project age is excluded: the shifted project is equally old.
inline std::vector<std::string> shift_invariant(const std::vector<PanelRow>& original,
                                                const std::vector<PanelRow>& shifted) {
  std::vector<std::string> bad;
  const auto a = by_dev(original), b = by_dev(shifted);
  for (const auto& [dev, s] : a) {
    const auto it = b.find(dev);
    if (it == b.end()) {
      bad.push_back(dev + ": missing after shift");
      continue;
    }
    const auto& t = it->second;
    // Shifted panels may end one month earlier at the collection date.
    const std::size_t n = std::min(s.size(), t.size());
    if (s.size() != t.size() && s.size() != t.size() + 1) {
      bad.push_back(fmt::format("{}: {} rows vs {} after shift", dev, s.size(), t.size()));
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (int c = 0; c < kNumCovariates; ++c) {
        if (c == kProjectAge) continue;
        if (s[i]->x[static_cast<std::size_t>(c)] != t[i]->x[static_cast<std::size_t>(c)]) {
          bad.push_back(fmt::format("{} month {}: {} changed under shift", dev, i + 1,
                                    kCovariateNames[static_cast<std::size_t>(c)]));
        }
      }
    }
  }
  return bad;
}

}  // namespace checks
