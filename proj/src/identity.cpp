#include "commitgate/identity.hpp"

#include "commitgate/csv.hpp"
#include "commitgate/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <numeric>

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

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Smaller index becomes the root so the result is order-independent.
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

// "12345+login@users.noreply.github.com" or "login@users.noreply.github.com"
std::string noreply_login(const std::string& email) {
  constexpr std::string_view kSuffix = "@users.noreply.github.com";
  if (!email.ends_with(kSuffix)) return {};
  std::string local = email.substr(0, email.size() - kSuffix.size());
  if (const auto plus = local.find('+'); plus != std::string::npos) local = local.substr(plus + 1);
  return local;
}

void add_identity(std::set<RawIdentity>& out, const RawIdentity& id) {
  if (!id.empty()) out.insert(id);
}

}  // namespace

std::string Affiliation::str() const {
  switch (kind) {
    case Kind::kCompany: return "company(" + domain + ")";
    case Kind::kIndependent: return "independent";
    case Kind::kUnknown: break;
  }
  return "unknown";
}

Affiliation Affiliation::parse(std::string_view text) {
  const std::string t = trim(text);
  if (t == "independent") return independent();
  if (t == "unknown" || t.empty()) return unknown();
  if (t.starts_with("company(") && t.ends_with(")") && t.size() > 9) {
    return company(t.substr(8, t.size() - 9));
  }
  throw InputError(fmt::format("invalid affiliation '{}'", text));
}

Denylists Denylists::defaults() {
  Denylists d;
  d.public_providers = {
      "gmail.com",      "googlemail.com", "outlook.com",   "hotmail.com",
      "hotmail.co.uk",  "live.com",       "msn.com",       "yahoo.com",
      "yahoo.co.jp",    "yahoo.fr",       "ymail.com",     "icloud.com",
      "me.com",         "mac.com",        "aol.com",       "protonmail.com",
      "protonmail.ch",  "proton.me",      "pm.me",         "gmx.de",
      "gmx.net",        "gmx.com",        "web.de",        "mail.ru",
      "yandex.ru",      "yandex.com",     "qq.com",        "foxmail.com",
      "163.com",        "126.com",        "sina.com",      "naver.com",
      "fastmail.com",   "fastmail.fm",    "hey.com",       "zoho.com",
      "tutanota.com",   "posteo.de",      "mailbox.org",   "users.noreply.github.com",
      "noreply.github.com", "localhost",  "localdomain",   "example.com",
      "(none)",
  };
  d.academic = {
      "edu",    "ac.uk",  "ac.jp",  "ac.kr",  "ac.cn",  "edu.cn", "edu.au", "edu.hk",
      "edu.sg", "edu.tw", "edu.br", "ac.in",  "ac.at",  "ac.be",  "ac.nz",  "ac.il",
      "ac.za",  "ethz.ch", "epfl.ch", "tum.de", "kit.edu", "uni-heidelberg.de",
  };
  return d;
}

bool Denylists::denied(std::string_view domain_in) const {
  const std::string domain = lower(domain_in);
  const auto matches = [&](const std::string& suffix) {
    const std::string s = lower(suffix);
    return domain == s || (domain.size() > s.size() && domain.ends_with(s) &&
                           domain[domain.size() - s.size() - 1] == '.');
  };
  return std::any_of(public_providers.begin(), public_providers.end(), matches) ||
         std::any_of(academic.begin(), academic.end(), matches) ||
         domain.find("university") != std::string::npos ||
         domain.find("univ.") != std::string::npos;
}

std::vector<std::string> parse_denylist(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string line = lower(trim(text.substr(pos, eol - pos)));
    if (!line.empty() && line[0] != '#') out.push_back(line);
    pos = eol + 1;
  }
  return out;
}

std::vector<IdentityOverride> parse_overrides(std::string_view csv_text) {
  const auto table =
      csv::parse_table(csv_text, {"raw_email", "raw_login", "dev_id", "affiliation"});
  std::vector<IdentityOverride> out;
  for (const auto& row : table.rows) {
    IdentityOverride o;
    o.raw_email = normalize_email(row[0]);
    o.raw_login = lower(trim(row[1]));
    o.dev_id = trim(row[2]);
    if (o.dev_id.empty()) throw InputError("override row without dev_id");
    if (!trim(row[3]).empty()) o.affiliation = Affiliation::parse(row[3]);
    out.push_back(std::move(o));
  }
  return out;
}

std::string normalize_name(std::string_view name) {
  std::string out;
  bool space = false;
  for (unsigned char c : name) {
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

std::string normalize_email(std::string_view email) {
  const std::string e = lower(trim(email));
  const auto at = e.find('@');
  if (at == std::string::npos || at == 0 || at + 1 == e.size()) return {};
  return e;
}

std::string email_domain(std::string_view email) {
  const std::string e = normalize_email(email);
  if (e.empty()) return {};
  return e.substr(e.find('@') + 1);
}

const DevId& IdentityMap::dev_of(const RawIdentity& raw) const {
  const auto it = by_raw.find(raw);
  if (it == by_raw.end()) throw InputError("unresolved identity " + raw.display());
  return it->second;
}

const DevId* IdentityMap::find(const RawIdentity& raw) const {
  const auto it = by_raw.find(raw);
  return it == by_raw.end() ? nullptr : &it->second;
}

IdentityMap resolve_identities(const EventStream& stream,
                               std::span<const RawIdentity> extra_aliases,
                               const Denylists& denylists,
                               std::span<const IdentityOverride> overrides,
                               const BotPolicy& bots) {
  std::set<RawIdentity> raw_set;
  for (const Event& e : stream) {
    add_identity(raw_set, e.actor);
    add_identity(raw_set, e.opener);
    if (e.commit) {
      add_identity(raw_set, {e.commit->author_name, e.commit->author_email, {}});
      add_identity(raw_set, {e.commit->committer_name, e.commit->committer_email, {}});
    }
  }
  for (const RawIdentity& id : extra_aliases) add_identity(raw_set, id);
  const std::vector<RawIdentity> raws(raw_set.begin(), raw_set.end());
  const std::size_t n = raws.size();

  DisjointSets sets(n);
  std::map<std::string, std::size_t> by_email, by_login;
  const auto link = [&](std::map<std::string, std::size_t>& index, const std::string& key,
                        std::size_t i) {
    if (key.empty()) return;
    auto [it, inserted] = index.emplace(key, i);
    if (!inserted) sets.unite(it->second, i);
  };
  for (std::size_t i = 0; i < n; ++i) {
    const std::string email = normalize_email(raws[i].email);
    link(by_email, email, i);
    link(by_login, lower(raws[i].login), i);
    link(by_login, noreply_login(email), i);
  }

  // Name rule: merge only when every email/login-bearing identity with the
  // name already sits in a single group.
  std::map<std::string, std::vector<std::size_t>> by_name;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = normalize_name(raws[i].name);
    if (!name.empty()) by_name[name].push_back(i);
  }
  IdentityMap out;
  std::vector<std::pair<std::size_t, std::size_t>> name_merges;
  for (const auto& [name, members] : by_name) {
    if (members.size() < 2) continue;
    std::set<std::size_t> groups;
    for (std::size_t i : members) {
      if (!raws[i].email.empty() || !raws[i].login.empty()) groups.insert(sets.find(i));
    }
    if (groups.size() > 1) {
      out.ambiguous.push_back(name);
      continue;
    }
    for (std::size_t k = 1; k < members.size(); ++k) name_merges.emplace_back(members[0], members[k]);
  }
  for (auto [a, b] : name_merges) sets.unite(a, b);

  // Assign stable ids.
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[sets.find(i)].push_back(i);
  std::vector<std::pair<DevId, std::vector<std::size_t>>> named;
  for (auto& [root, members] : groups) {
    std::string best_login, best_email, best_name;
    for (std::size_t i : members) {
      const std::string login = lower(raws[i].login);
      const std::string email = normalize_email(raws[i].email);
      const std::string name = normalize_name(raws[i].name);
      if (!login.empty() && (best_login.empty() || login < best_login)) best_login = login;
      if (!email.empty() && (best_email.empty() || email < best_email)) best_email = email;
      if (!name.empty() && (best_name.empty() || name < best_name)) best_name = name;
    }
    DevId id = !best_login.empty()   ? best_login
               : !best_email.empty() ? best_email
                                     : "name:" + best_name;
    named.emplace_back(std::move(id), members);
  }
  std::sort(named.begin(), named.end());
  for (auto& [id, members] : named) {
    DevId unique = id;
    for (int k = 2; out.devs.count(unique); ++k) unique = fmt::format("{}#{}", id, k);
    DevIdentity& dev = out.devs[unique];
    dev.id = unique;
    for (std::size_t i : members) {
      dev.aliases.insert(raws[i]);
      out.by_raw[raws[i]] = unique;
    }
  }

  // Manual overrides move matching aliases into the named developer.
  std::map<DevId, Affiliation> forced_affiliation;
  for (const IdentityOverride& o : overrides) {
    for (std::size_t i = 0; i < n; ++i) {
      const bool hit = (!o.raw_email.empty() && normalize_email(raws[i].email) == o.raw_email) ||
                       (!o.raw_login.empty() && lower(raws[i].login) == o.raw_login);
      if (!hit) continue;
      const DevId old = out.by_raw[raws[i]];
      if (old == o.dev_id) continue;
      out.devs[old].aliases.erase(raws[i]);
      if (out.devs[old].aliases.empty()) out.devs.erase(old);
      DevIdentity& dev = out.devs[o.dev_id];
      dev.id = o.dev_id;
      dev.aliases.insert(raws[i]);
      out.by_raw[raws[i]] = o.dev_id;
    }
    if (o.affiliation) forced_affiliation[o.dev_id] = *o.affiliation;
  }

  for (auto& [id, dev] : out.devs) {
    dev.affiliation = infer_affiliation(dev, denylists);
    if (auto it = forced_affiliation.find(id); it != forced_affiliation.end()) {
      dev.affiliation = it->second;
      dev.affiliation_overridden = true;
    }
    dev.bot = std::any_of(dev.aliases.begin(), dev.aliases.end(),
                          [&](const RawIdentity& r) { return bots.is_bot(r); });
  }
  return out;
}

Affiliation affiliation_from_emails(std::span<const std::string> emails,
                                    const Denylists& denylists) {
  std::map<std::string, int> company_counts;
  bool any_email = false;
  for (const std::string& e : emails) {
    const std::string domain = email_domain(e);
    if (domain.empty()) continue;
    any_email = true;
    if (!denylists.denied(domain)) ++company_counts[domain];
  }
  if (!any_email) return Affiliation::unknown();
  if (company_counts.empty()) return Affiliation::independent();
  auto best = company_counts.begin();
  for (auto it = company_counts.begin(); it != company_counts.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return Affiliation::company(best->first);
}

Affiliation infer_affiliation(const DevIdentity& dev, const Denylists& denylists) {
  std::vector<std::string> emails;
  for (const RawIdentity& r : dev.aliases) {
    if (!r.email.empty()) emails.push_back(r.email);
  }
  return affiliation_from_emails(emails, denylists);
}

}  // namespace commitgate
