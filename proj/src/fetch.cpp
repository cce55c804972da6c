#include "commitgate/fetch.hpp"

#include "commitgate/error.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

namespace commitgate {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse get(const std::string& url,
                   const std::map<std::string, std::string>& headers) override {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw TransportError("bad url: " + url);
    const auto path_begin = url.find('/', scheme_end + 3);
    const std::string origin = url.substr(0, path_begin);
    const std::string path = path_begin == std::string::npos ? "/" : url.substr(path_begin);

    httplib::Client client(origin);
    client.set_connection_timeout(30);
    client.set_read_timeout(60);
    client.set_follow_location(true);
    httplib::Headers h(headers.begin(), headers.end());
    auto res = client.Get(path, h);
    if (!res) throw TransportError(httplib::to_string(res.error()));
    HttpResponse out;
    out.status = res->status;
    out.body = res->body;
    for (const auto& [k, v] : res->headers) {
      std::string key = k;
      std::transform(key.begin(), key.end(), key.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      out.headers[key] = v;
    }
    return out;
  }
};

class SystemClock final : public Clock {
 public:
  Timestamp now() override {
    return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  }
  void sleep_until(Timestamp t) override { std::this_thread::sleep_until(t); }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw Error(ErrorCode::kInternal, "cannot write " + tmp.string());
  }
  fs::rename(tmp, p);
}

std::string since_query(const FetchOptions& o) {
  return o.since ? "&since=" + format_iso8601(*o.since) : std::string{};
}

std::string login_of(const json& user) {
  if (!user.is_object()) return {};
  return user.value("login", "");
}

std::string str_or_empty(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  return j.at(key).get<std::string>();
}

std::optional<Timestamp> time_of(const json& j, const char* key) {
  const std::string s = str_or_empty(j, key);
  if (s.empty()) return std::nullopt;
  return parse_iso8601(s);
}

std::set<std::string> label_names(const json& item) {
  std::set<std::string> out;
  if (!item.contains("labels") || !item.at("labels").is_array()) return out;
  for (const json& l : item.at("labels")) {
    if (l.is_object()) out.insert(l.value("name", ""));
    else if (l.is_string()) out.insert(l.get<std::string>());
  }
  out.erase("");
  return out;
}

long number_from_url(const std::string& url) {
  const auto slash = url.rfind('/');
  if (slash == std::string::npos) return -1;
  try {
    return std::stol(url.substr(slash + 1));
  } catch (...) {
    return -1;
  }
}

std::vector<json> read_cached_endpoint(const fs::path& dir) {
  std::vector<json> items;
  for (int page = 1;; ++page) {
    const fs::path data = dir / fmt::format("page-{:04d}.ndjson", page);
    if (!fs::exists(data)) break;
    std::istringstream in(read_file(data));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) items.push_back(json::parse(line));
    }
    const json meta = json::parse(read_file(dir / fmt::format("page-{:04d}.meta.json", page)));
    if (meta.value("next", "").empty()) break;
  }
  return items;
}

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport() {
  return std::make_unique<HttplibTransport>();
}

std::unique_ptr<Clock> make_system_clock() { return std::make_unique<SystemClock>(); }

void RateBudget::block_until(Timestamp t) {
  std::lock_guard lock(mu_);
  if (!until_ || *until_ < t) until_ = t;
}

std::optional<Timestamp> RateBudget::blocked_until() const {
  std::lock_guard lock(mu_);
  return until_;
}

std::optional<std::string> next_link(const std::string& header) {
  std::size_t pos = 0;
  while (pos < header.size()) {
    const auto lt = header.find('<', pos);
    if (lt == std::string::npos) break;
    const auto gt = header.find('>', lt);
    if (gt == std::string::npos) break;
    auto end = header.find(',', gt);
    if (end == std::string::npos) end = header.size();
    const std::string params = header.substr(gt + 1, end - gt - 1);
    if (params.find("rel=\"next\"") != std::string::npos ||
        params.find("rel=next") != std::string::npos) {
      return header.substr(lt + 1, gt - lt - 1);
    }
    pos = end + 1;
  }
  return std::nullopt;
}

fs::path endpoint_cache_dir(const fs::path& cache_dir, const std::string& endpoint) {
  // endpoint looks like "repos/org/name/issues?state=all&per_page=100"
  std::string rel = endpoint;
  if (rel.starts_with("repos/")) rel = rel.substr(6);
  std::string slug;
  for (char c : rel) {
    const unsigned char u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '-' || c == '_' || c == '.' || c == '/') slug += c;
    else slug += '_';
  }
  return cache_dir / slug;
}

Fetcher::Fetcher(HttpTransport& transport, Clock& clock, FetchOptions options,
                 RateBudget* budget)
    : transport_(transport),
      clock_(clock),
      options_(std::move(options)),
      budget_(budget ? budget : &own_budget_) {}

HttpResponse Fetcher::request(const std::string& url) {
  std::map<std::string, std::string> headers = {
      {"Accept", "application/vnd.github+json"},
      {"User-Agent", "commitgate"},
  };
  if (!options_.token.empty()) headers["Authorization"] = "Bearer " + options_.token;

  int attempts = 0;
  int rate_waits = 0;
  auto backoff = options_.initial_backoff;
  for (;;) {
    if (const auto until = budget_->blocked_until(); until && clock_.now() < *until) {
      clock_.sleep_until(*until);
    }
    ++attempts;
    HttpResponse res;
    bool transient = false;
    std::string failure;
    try {
      ++requests_;
      res = transport_.get(url, headers);
    } catch (const TransportError& e) {
      transient = true;
      failure = e.what();
    }
    if (!transient) {
      const auto header = [&](const char* k) -> std::string {
        auto it = res.headers.find(k);
        return it == res.headers.end() ? std::string{} : it->second;
      };
      if (res.status == 200) return res;
      if (res.status == 401) {
        throw InputError(fmt::format("authentication failed for {} (check COMMITGATE_TOKEN)",
                                     url));
      }
      const bool limited = (res.status == 403 || res.status == 429) &&
                           (header("x-ratelimit-remaining") == "0" ||
                            !header("retry-after").empty());
      if (limited) {
        if (++rate_waits > options_.max_rate_limit_waits) {
          throw Error(ErrorCode::kInternal, "rate limit never lifted for " + url);
        }
        Timestamp until = clock_.now() + std::chrono::seconds{60};
        if (const std::string reset = header("x-ratelimit-reset"); !reset.empty()) {
          until = Timestamp{std::chrono::seconds{std::stoll(reset)}};
        } else if (const std::string after = header("retry-after"); !after.empty()) {
          until = clock_.now() + std::chrono::seconds{std::stoll(after)};
        }
        budget_->block_until(until);
        --attempts;
        continue;
      }
      if (res.status == 404) throw InputError("not found (unknown repository?): " + url);
      if (res.status >= 500) {
        transient = true;
        failure = fmt::format("HTTP {}", res.status);
      } else {
        throw InputError(fmt::format("HTTP {} for {}", res.status, url));
      }
    }
    if (attempts >= options_.max_attempts) {
      throw Error(ErrorCode::kInternal,
                  fmt::format("giving up on {} after {} attempts: {}", url, attempts, failure));
    }
    clock_.sleep_until(clock_.now() + backoff);
    backoff *= 2;
  }
}

std::vector<json> Fetcher::fetch_all(const std::string& endpoint) {
  const fs::path dir = endpoint_cache_dir(options_.cache_dir, endpoint);
  std::string url = options_.api_base + "/" + endpoint;
  for (int page = 1;; ++page) {
    const fs::path data = dir / fmt::format("page-{:04d}.ndjson", page);
    const fs::path meta_path = dir / fmt::format("page-{:04d}.meta.json", page);
    std::string next;
    if (fs::exists(data) && fs::exists(meta_path)) {
      next = json::parse(read_file(meta_path)).value("next", "");
    } else {
      const HttpResponse res = request(url);
      json body;
      try {
        body = json::parse(res.body);
      } catch (const json::exception& e) {
        throw InputError(fmt::format("invalid JSON from {}: {}", url, e.what()));
      }
      if (!body.is_array()) throw InputError("expected a JSON array from " + url);
      std::string lines;
      for (const json& item : body) {
        lines += item.dump();
        lines += '\n';
      }
      const auto it = res.headers.find("link");
      if (it != res.headers.end()) next = next_link(it->second).value_or("");
      write_file_atomic(data, lines);
      write_file_atomic(meta_path, json{{"url", url}, {"next", next}}.dump() + "\n");
    }
    if (next.empty()) break;
    url = next;
  }
  return read_cached_endpoint(dir);
}

std::vector<std::string> repo_endpoints(const RepoId& repo, const std::set<EventKind>& kinds,
                                        const FetchOptions& o) {
  const std::string base = "repos/" + repo.str();
  const std::string page = fmt::format("per_page={}", o.per_page);
  const auto want = [&](std::initializer_list<EventKind> ks) {
    return std::any_of(ks.begin(), ks.end(), [&](EventKind k) { return kinds.count(k) > 0; });
  };
  std::vector<std::string> out;
  if (want({EventKind::kIssueOpened, EventKind::kIssueComment, EventKind::kPrComment})) {
    out.push_back(base + "/issues?state=all&" + page + since_query(o));
  }
  if (want({EventKind::kIssueClosed, EventKind::kIssueLabeled, EventKind::kIssueAssigned,
            EventKind::kIssueMilestoned})) {
    out.push_back(base + "/issues/events?" + page);
  }
  if (want({EventKind::kPrOpened, EventKind::kPrMerged, EventKind::kPrClosed,
            EventKind::kPrReview, EventKind::kPrComment, EventKind::kIssueComment})) {
    out.push_back(base + "/pulls?state=all&" + page);
  }
  if (want({EventKind::kIssueComment, EventKind::kPrComment})) {
    out.push_back(base + "/issues/comments?" + page + since_query(o));
  }
  if (want({EventKind::kPrComment})) {
    out.push_back(base + "/pulls/comments?" + page + since_query(o));
  }
  if (want({EventKind::kCommitComment})) out.push_back(base + "/comments?" + page);
  if (want({EventKind::kCommit})) out.push_back(base + "/commits?" + page + since_query(o));
  return out;
}

std::string review_endpoint(const RepoId& repo, long pr_number, const FetchOptions& o) {
  return fmt::format("repos/{}/pulls/{}/reviews?per_page={}", repo.str(), pr_number,
                     o.per_page);
}

void Fetcher::fetch_repo(const RepoId& repo, const std::set<EventKind>& kinds) {
  std::vector<json> pulls;
  for (const std::string& ep : repo_endpoints(repo, kinds, options_)) {
    auto items = fetch_all(ep);
    if (ep.find("/pulls?") != std::string::npos) pulls = std::move(items);
  }
  if (kinds.count(EventKind::kPrReview)) {
    for (const json& pr : pulls) {
      fetch_all(review_endpoint(repo, pr.at("number").get<long>(), options_));
    }
  }
}

RepoPayloads load_cached_payloads(const RepoId& repo, const std::set<EventKind>& kinds,
                                  const FetchOptions& o) {
  RepoPayloads p;
  for (const std::string& ep : repo_endpoints(repo, kinds, o)) {
    auto items = read_cached_endpoint(endpoint_cache_dir(o.cache_dir, ep));
    const std::string tail = ep.substr(ep.find(repo.str()) + repo.str().size());
    if (tail.starts_with("/issues?")) p.issues = std::move(items);
    else if (tail.starts_with("/issues/events?")) p.issue_events = std::move(items);
    else if (tail.starts_with("/pulls?")) p.pulls = std::move(items);
    else if (tail.starts_with("/issues/comments?")) p.issue_comments = std::move(items);
    else if (tail.starts_with("/pulls/comments?")) p.review_comments = std::move(items);
    else if (tail.starts_with("/comments?")) p.commit_comments = std::move(items);
    else if (tail.starts_with("/commits?")) p.commits = std::move(items);
  }
  if (kinds.count(EventKind::kPrReview)) {
    for (const json& pr : p.pulls) {
      const long n = pr.at("number").get<long>();
      p.reviews[n] = read_cached_endpoint(endpoint_cache_dir(o.cache_dir, review_endpoint(repo, n, o)));
    }
  }
  return p;
}

std::vector<Event> events_from_payloads(const RepoId& repo, const RepoPayloads& p,
                                        const std::set<EventKind>& kinds) {
  std::vector<Event> out;
  const auto emit = [&](EventKind kind, const std::string& login, std::optional<Timestamp> t,
                        std::string thread, std::set<std::string> labels, std::string body,
                        const std::string& opener) {
    if (!kinds.count(kind) || login.empty() || !t) return;
    Event e;
    e.kind = kind;
    e.actor.login = login;
    e.time = *t;
    e.repo = repo;
    e.thread_id = std::move(thread);
    e.labels = std::move(labels);
    e.body = std::move(body);
    e.opener.login = opener;
    out.push_back(std::move(e));
  };

  std::map<long, std::string> pr_opener;
  for (const json& pr : p.pulls) {
    const long n = pr.at("number").get<long>();
    const std::string opener = login_of(pr.value("user", json{}));
    pr_opener[n] = opener;
    const std::string thread = fmt::format("pr#{}", n);
    emit(EventKind::kPrOpened, opener, time_of(pr, "created_at"), thread, label_names(pr),
         str_or_empty(pr, "body"), opener);
    if (const auto merged = time_of(pr, "merged_at")) {
      std::string merger = login_of(pr.value("merged_by", json{}));
      if (merger.empty()) merger = opener;
      emit(EventKind::kPrMerged, merger, merged, thread, {}, {}, opener);
    } else if (const auto closed = time_of(pr, "closed_at")) {
      emit(EventKind::kPrClosed, opener, closed, thread, {}, {}, opener);
    }
  }
  std::map<long, std::string> issue_opener;
  for (const json& issue : p.issues) {
    const long n = issue.at("number").get<long>();
    const std::string opener = login_of(issue.value("user", json{}));
    if (issue.contains("pull_request")) {
      pr_opener.emplace(n, opener);
      continue;
    }
    issue_opener[n] = opener;
    emit(EventKind::kIssueOpened, opener, time_of(issue, "created_at"),
         fmt::format("issue#{}", n), label_names(issue), str_or_empty(issue, "body"), opener);
  }
  for (const json& ev : p.issue_events) {
    if (!ev.contains("issue") || !ev.at("issue").is_object()) continue;
    const json& issue = ev.at("issue");
    if (issue.contains("pull_request")) continue;
    const long n = issue.at("number").get<long>();
    const std::string opener = login_of(issue.value("user", json{}));
    const std::string type = ev.value("event", "");
    const std::string actor = login_of(ev.value("actor", json{}));
    const std::string thread = fmt::format("issue#{}", n);
    const auto t = time_of(ev, "created_at");
    if (type == "labeled" && ev.contains("label")) {
      emit(EventKind::kIssueLabeled, actor, t, thread, {ev.at("label").value("name", "")}, {},
           opener);
    } else if (type == "assigned") {
      emit(EventKind::kIssueAssigned, actor, t, thread, {}, {}, opener);
    } else if (type == "milestoned") {
      emit(EventKind::kIssueMilestoned, actor, t, thread, {}, {}, opener);
    } else if (type == "closed") {
      emit(EventKind::kIssueClosed, actor, t, thread, {}, {}, opener);
    }
  }
  for (const auto& [n, reviews] : p.reviews) {
    const std::string opener = pr_opener.count(n) ? pr_opener.at(n) : std::string{};
    for (const json& r : reviews) {
      emit(EventKind::kPrReview, login_of(r.value("user", json{})), time_of(r, "submitted_at"),
           fmt::format("pr#{}", n), {}, str_or_empty(r, "body"), opener);
    }
  }
  for (const json& c : p.issue_comments) {
    const long n = number_from_url(str_or_empty(c, "issue_url"));
    if (n < 0) continue;
    const bool is_pr = pr_opener.count(n) > 0;
    const std::string opener =
        is_pr ? pr_opener.at(n) : (issue_opener.count(n) ? issue_opener.at(n) : std::string{});
    emit(is_pr ? EventKind::kPrComment : EventKind::kIssueComment,
         login_of(c.value("user", json{})), time_of(c, "created_at"),
         (is_pr ? "pr#" : "issue#") + std::to_string(n), {}, str_or_empty(c, "body"), opener);
  }
  for (const json& c : p.review_comments) {
    const long n = number_from_url(str_or_empty(c, "pull_request_url"));
    if (n < 0) continue;
    const std::string opener = pr_opener.count(n) ? pr_opener.at(n) : std::string{};
    emit(EventKind::kPrComment, login_of(c.value("user", json{})), time_of(c, "created_at"),
         fmt::format("pr#{}", n), {}, str_or_empty(c, "body"), opener);
  }
  for (const json& c : p.commit_comments) {
    const std::string sha = str_or_empty(c, "commit_id");
    if (sha.empty()) continue;
    emit(EventKind::kCommitComment, login_of(c.value("user", json{})),
         time_of(c, "created_at"), "commit:" + sha, {}, str_or_empty(c, "body"), {});
  }
  std::sort(out.begin(), out.end(), event_less);
  return out;
}

std::vector<RawIdentity> identity_links_from_payloads(const RepoPayloads& p) {
  std::set<RawIdentity> links;
  for (const json& c : p.commits) {
    if (!c.contains("commit")) continue;
    const json& commit = c.at("commit");
    for (const char* role : {"author", "committer"}) {
      if (!commit.contains(role) || !commit.at(role).is_object()) continue;
      RawIdentity id;
      id.name = str_or_empty(commit.at(role), "name");
      id.email = str_or_empty(commit.at(role), "email");
      id.login = login_of(c.value(role, json{}));
      if (!id.login.empty() && (!id.email.empty() || !id.name.empty())) links.insert(id);
    }
  }
  return {links.begin(), links.end()};
}

std::vector<Event> fetch_events(const RepoId& repo, const std::set<EventKind>& kinds,
                                HttpTransport& transport, Clock& clock,
                                const FetchOptions& options, RateBudget* budget) {
  Fetcher fetcher(transport, clock, options, budget);
  fetcher.fetch_repo(repo, kinds);
  return events_from_payloads(repo, load_cached_payloads(repo, kinds, options), kinds);
}

void fetch_repos(const std::vector<RepoId>& repos, const std::set<EventKind>& kinds,
                 HttpTransport& transport, Clock& clock, const FetchOptions& options) {
  RateBudget budget;
  std::vector<std::future<void>> jobs;
  for (const RepoId& repo : repos) {
    jobs.push_back(std::async(std::launch::async, [&, repo] {
      Fetcher fetcher(transport, clock, options, &budget);
      fetcher.fetch_repo(repo, kinds);
    }));
  }
  for (auto& job : jobs) job.get();
}

}  // namespace commitgate
