#pragma once

#include "commitgate/ingest.hpp"

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace commitgate {

using DevId = std::string;

struct Affiliation {
  enum class Kind { kCompany, kIndependent, kUnknown };
  Kind kind = Kind::kUnknown;
  std::string domain;  // non-empty iff kind == kCompany

  static Affiliation company(std::string domain) { return {Kind::kCompany, std::move(domain)}; }
  static Affiliation independent() { return {Kind::kIndependent, {}}; }
  static Affiliation unknown() { return {Kind::kUnknown, {}}; }

  std::string str() const;  // "company(<domain>)", "independent", "unknown"
  static Affiliation parse(std::string_view text);
  bool operator==(const Affiliation&) const = default;
};

struct DevIdentity {
  DevId id;
  std::set<RawIdentity> aliases;
  Affiliation affiliation;
  bool affiliation_overridden = false;
  bool bot = false;
};

struct Denylists {
  // Domain suffixes: "gmail.com" matches "gmail.com" and "x.gmail.com".
  std::vector<std::string> public_providers;
  std::vector<std::string> academic;

  static Denylists defaults();
  bool denied(std::string_view domain) const;
};

// Newline-delimited suffixes; '#' comments and blank lines ignored.
std::vector<std::string> parse_denylist(std::string_view text);

struct IdentityOverride {
  std::string raw_email;
  std::string raw_login;
  DevId dev_id;
  std::optional<Affiliation> affiliation;
};

// CSV raw_email,raw_login,dev_id,affiliation
std::vector<IdentityOverride> parse_overrides(std::string_view csv_text);

struct IdentityMap {
  std::map<RawIdentity, DevId> by_raw;
  std::map<DevId, DevIdentity> devs;
  // Names shared by identities that could not be merged.
  std::vector<std::string> ambiguous;

  // Throws InputError when the identity was never seen.
  const DevId& dev_of(const RawIdentity& raw) const;
  const DevId* find(const RawIdentity& raw) const;
};

std::string normalize_name(std::string_view name);
std::string normalize_email(std::string_view email);
std::string email_domain(std::string_view email);

// Every actor, opener, commit author and committer in the stream, plus any
// extra alias observations (e.g. commit payloads pairing an email with a
// login), merged by identical email, identical login, or identical
// normalized name when that name is corpus-unique.
IdentityMap resolve_identities(const EventStream& stream,
                               std::span<const RawIdentity> extra_aliases = {},
                               const Denylists& denylists = Denylists::defaults(),
                               std::span<const IdentityOverride> overrides = {},
                               const BotPolicy& bots = {});

// Modal qualifying domain wins; ties broken lexicographically.
Affiliation affiliation_from_emails(std::span<const std::string> emails,
                                    const Denylists& denylists);
Affiliation infer_affiliation(const DevIdentity& dev, const Denylists& denylists);

}  // namespace commitgate
