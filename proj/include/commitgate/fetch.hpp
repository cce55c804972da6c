#pragma once

#include "commitgate/ingest.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace commitgate {

struct HttpResponse {
  int status = 0;
  std::map<std::string, std::string> headers;  // keys lower-cased
  std::string body;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  // Throws TransportError on connection-level failure.
  virtual HttpResponse get(const std::string& url,
                           const std::map<std::string, std::string>& headers) = 0;
};

// HTTPS transport backed by cpp-httplib.
std::unique_ptr<HttpTransport> make_http_transport();

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() = 0;
  virtual void sleep_until(Timestamp t) = 0;
};

std::unique_ptr<Clock> make_system_clock();

// Shared across concurrent per-repo fetches: once any request hits the rate
// limit, no thread issues a request before the advertised reset.
class RateBudget {
 public:
  void block_until(Timestamp t);
  std::optional<Timestamp> blocked_until() const;

 private:
  mutable std::mutex mu_;
  std::optional<Timestamp> until_;
};

struct FetchOptions {
  std::string api_base = "https://api.github.com";
  std::filesystem::path cache_dir;
  std::string token;
  std::optional<Timestamp> since;
  int per_page = 100;
  int max_attempts = 5;
  std::chrono::seconds initial_backoff{1};
  int max_rate_limit_waits = 50;
};

// Parses an RFC 8288 Link header and returns the rel="next" target.
std::optional<std::string> next_link(const std::string& link_header);

// Raw payloads of one repository, as stored in the cache.
struct RepoPayloads {
  std::vector<nlohmann::json> issues;
  std::vector<nlohmann::json> issue_events;
  std::vector<nlohmann::json> pulls;
  std::map<long, std::vector<nlohmann::json>> reviews;  // by PR number
  std::vector<nlohmann::json> issue_comments;
  std::vector<nlohmann::json> review_comments;
  std::vector<nlohmann::json> commit_comments;
  std::vector<nlohmann::json> commits;
};

class Fetcher {
 public:
  Fetcher(HttpTransport& transport, Clock& clock, FetchOptions options,
          RateBudget* budget = nullptr);

  // Retrieves every page of `endpoint` (path relative to api_base, query
  // included), reading cached pages instead of requesting them.
  std::vector<nlohmann::json> fetch_all(const std::string& endpoint);

  // Fetches all endpoints needed for `kinds` into the cache.
  void fetch_repo(const RepoId& repo, const std::set<EventKind>& kinds);

  int requests_issued() const { return requests_; }

 private:
  HttpResponse request(const std::string& url);

  HttpTransport& transport_;
  Clock& clock_;
  FetchOptions options_;
  RateBudget own_budget_;
  RateBudget* budget_;
  int requests_ = 0;
};

// Endpoints (relative, with query) used for a repository. PR reviews are
// per-PR and derived from the pulls payloads.
std::vector<std::string> repo_endpoints(const RepoId& repo, const std::set<EventKind>& kinds,
                                        const FetchOptions& options);
std::string review_endpoint(const RepoId& repo, long pr_number, const FetchOptions& options);

// Cache layout: <cache>/<org>/<name>/<endpoint-slug>/page-NNNN.ndjson plus
// a page-NNNN.meta.json holding the request URL and next link.
std::filesystem::path endpoint_cache_dir(const std::filesystem::path& cache_dir,
                                         const std::string& endpoint);

// Reads everything cached for a repository without touching the network.
RepoPayloads load_cached_payloads(const RepoId& repo, const std::set<EventKind>& kinds,
                                  const FetchOptions& options);

// Pure conversion of raw payloads into events (filtered to `kinds`).
std::vector<Event> events_from_payloads(const RepoId& repo, const RepoPayloads& payloads,
                                        const std::set<EventKind>& kinds);

// Identity triples (name, email, login) observed on commit payloads.
std::vector<RawIdentity> identity_links_from_payloads(const RepoPayloads& payloads);

// Network fetch into the cache followed by normalization of the cache.
std::vector<Event> fetch_events(const RepoId& repo, const std::set<EventKind>& kinds,
                                HttpTransport& transport, Clock& clock,
                                const FetchOptions& options, RateBudget* budget = nullptr);

// One thread per repository, sharing a rate budget.
void fetch_repos(const std::vector<RepoId>& repos, const std::set<EventKind>& kinds,
                 HttpTransport& transport, Clock& clock, const FetchOptions& options);

}  // namespace commitgate
