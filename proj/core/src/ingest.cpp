#include "ffoundry/ingest.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "ffoundry/error.hpp"
#include "ffoundry/http_backend.hpp"
#include "ffoundry/ids.hpp"
#include "ffoundry/jsonl.hpp"
#include "ffoundry/rng.hpp"

namespace ffoundry {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Removes every <tag>...</tag> region, case-insensitive.
void drop_regions(std::string& html, const std::string& tag) {
  const std::string open = "<" + tag;
  const std::string close = "</" + tag + ">";
  std::string hlow = lower(html);
  for (;;) {
    size_t a = hlow.find(open);
    if (a == std::string::npos) break;
    size_t b = hlow.find(close, a);
    if (b == std::string::npos) b = hlow.size() - close.size();
    html.erase(a, b + close.size() - a);
    hlow.erase(a, b + close.size() - a);
  }
}

std::string decode_entities(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size();) {
    if (s[i] == '&') {
      static const std::pair<const char*, const char*> table[] = {
          {"&amp;", "&"}, {"&lt;", "<"},    {"&gt;", ">"},
          {"&quot;", "\""}, {"&#39;", "'"}, {"&apos;", "'"},
          {"&nbsp;", " "},  {"&mdash;", "-"}, {"&ndash;", "-"},
      };
      bool matched = false;
      for (const auto& [ent, rep] : table) {
        size_t len = std::strlen(ent);
        if (s.compare(i, len, ent) == 0) {
          out += rep;
          i += len;
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    out += s[i++];
  }
  return out;
}

std::string strip_tags(const std::string& html) {
  std::string out;
  out.reserve(html.size());
  bool in_tag = false;
  for (char c : html) {
    if (c == '<') {
      in_tag = true;
      continue;
    }
    if (c == '>') {
      in_tag = false;
      out += ' ';
      continue;
    }
    if (!in_tag) out += c;
  }
  return out;
}

std::string normalize_ws(const std::string& text) {
  std::string out;
  int newlines = 0;
  bool pending_space = false;
  for (char c : text) {
    if (c == '\n') {
      ++newlines;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r') {
      pending_space = true;
      continue;
    }
    if (newlines >= 2 && !out.empty())
      out += "\n\n";
    else if ((newlines == 1 || pending_space) && !out.empty())
      out += ' ';
    newlines = 0;
    pending_space = false;
    out += c;
  }
  return out;
}

// Contents of the first <tag ...>...</tag> region, if any.
std::string region(const std::string& html, const std::string& tag) {
  std::string hlow = lower(html);
  size_t a = hlow.find("<" + tag);
  if (a == std::string::npos) return "";
  a = hlow.find('>', a);
  if (a == std::string::npos) return "";
  size_t b = hlow.find("</" + tag + ">", a);
  if (b == std::string::npos) return "";
  return html.substr(a + 1, b - a - 1);
}

std::string paragraphs(const std::string& html) {
  std::string hlow = lower(html);
  std::string out;
  size_t pos = 0;
  for (;;) {
    size_t a = hlow.find("<p", pos);
    if (a == std::string::npos) break;
    size_t open_end = hlow.find('>', a);
    if (open_end == std::string::npos) break;
    size_t b = hlow.find("</p>", open_end);
    if (b == std::string::npos) break;
    std::string p = strip_tags(html.substr(open_end + 1, b - open_end - 1));
    p = normalize_ws(p);
    if (!p.empty()) out += p + "\n\n";
    pos = b + 4;
  }
  return out;
}

}  // namespace

std::string extract_main_text(const std::string& html) {
  std::string work = html;
  drop_regions(work, "script");
  drop_regions(work, "style");
  drop_regions(work, "noscript");

  std::string body = region(work, "article");
  if (body.empty()) body = region(work, "main");
  std::string text = paragraphs(body.empty() ? work : body);
  if (text.size() < 80) {
    std::string base = body.empty() ? work : body;
    text = normalize_ws(strip_tags(base));
  }
  return decode_entities(normalize_ws(text));
}

std::string truncate_at_paragraph(const std::string& text, int max_chars) {
  if (static_cast<int>(text.size()) <= max_chars) return text;
  static const std::string kMarker = "\n\n[content truncated]";
  size_t cut = text.rfind("\n\n", static_cast<size_t>(max_chars));
  if (cut == std::string::npos || cut == 0)
    cut = text.rfind(' ', static_cast<size_t>(max_chars));
  if (cut == std::string::npos || cut == 0) cut = static_cast<size_t>(max_chars);
  return text.substr(0, cut) + kMarker;
}

std::vector<std::size_t> stratified_sample(const std::vector<std::string>& strata,
                                           std::size_t max_count,
                                           std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < strata.size(); ++i) groups[strata[i]].push_back(i);

  // Shuffle within each stratum so repeated harvests do not always favor the
  // same outlets; the seed makes the pick reproducible.
  std::vector<std::vector<std::size_t>> buckets;
  for (auto& [name, idx] : groups) {
    Rng rng(derive_seed(seed, name));
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.next_below(i)]);
    buckets.push_back(idx);
  }

  std::vector<std::size_t> picked;
  std::size_t round = 0;
  while (picked.size() < max_count) {
    bool any = false;
    for (auto& bucket : buckets) {
      if (round < bucket.size()) {
        picked.push_back(bucket[round]);
        any = true;
        if (picked.size() >= max_count) break;
      }
    }
    if (!any) break;
    ++round;
  }
  return picked;
}

ArticleFetcher::Response LiveArticleFetcher::get(const std::string& url) {
  auto r = http_get(url);
  return {r.status, r.body};
}

FixtureArticleFetcher::FixtureArticleFetcher(std::filesystem::path dir)
    : dir_(std::move(dir)) {
  std::ifstream in(dir_ / "index.json");
  if (!in)
    throw Error(ErrorCode::IoFailure,
                "fixture index missing: " + (dir_ / "index.json").string());
  nlohmann::json j = nlohmann::json::parse(in);
  for (auto it = j.begin(); it != j.end(); ++it)
    index_[it.key()] = it.value().get<std::string>();
}

ArticleFetcher::Response FixtureArticleFetcher::get(const std::string& url) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    requests_.push_back(url);
  }
  // Exact match first, then prefix match so query strings still hit the
  // recorded endpoint response.
  auto it = index_.find(url);
  if (it == index_.end()) {
    for (auto cand = index_.begin(); cand != index_.end(); ++cand) {
      if (url.rfind(cand->first, 0) == 0) {
        it = cand;
        break;
      }
    }
  }
  if (it == index_.end()) return {404, "not recorded"};
  std::ifstream f(dir_ / it->second);
  if (!f) return {404, "fixture file missing"};
  std::string body((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return {200, body};
}

std::vector<std::string> FixtureArticleFetcher::requests() const {
  std::lock_guard<std::mutex> lock(mu_);
  return requests_;
}

SeedIngestor::SeedIngestor(IngestConfig config,
                           std::shared_ptr<ArticleFetcher> fetcher, UtcTime now,
                           std::uint64_t sampler_seed)
    : config_(std::move(config)),
      fetcher_(std::move(fetcher)),
      now_(now),
      sampler_seed_(sampler_seed) {}

IngestResult SeedIngestor::harvest(const std::vector<Candidate>& candidates,
                                   const SeedQuerySpec& spec) {
  if (candidates.empty())
    throw Error(ErrorCode::EmptyHarvest, "upstream returned zero articles");

  std::vector<std::string> strata;
  strata.reserve(candidates.size());
  for (const auto& c : candidates) strata.push_back(c.stratum);
  const auto picked = stratified_sample(
      strata, static_cast<std::size_t>(spec.max_seeds), sampler_seed_);

  IngestResult result;
  std::mutex mu;
  std::vector<std::size_t> order(picked.begin(), picked.end());
  std::atomic<std::size_t> cursor{0};
  const int workers =
      std::max(1, std::min<int>(config_.concurrent_fetches,
                                static_cast<int>(order.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t slot = cursor.fetch_add(1);
        if (slot >= order.size()) return;
        const auto& cand = candidates[order[slot]];
        auto resp = fetcher_->get(cand.url);
        std::lock_guard<std::mutex> lock(mu);
        if (resp.status != 200) {
          result.warnings.push_back("fetch failed (" +
                                    std::to_string(resp.status) + "): " + cand.url);
          continue;
        }
        std::string text = truncate_at_paragraph(extract_main_text(resp.body),
                                                 config_.max_content_chars);
        if (text.empty()) {
          result.warnings.push_back("empty content: " + cand.url);
          continue;
        }
        result.seeds.push_back(Seed::make(spec.source, text, cand.url, now_));
      }
    });
  }
  for (auto& t : pool) t.join();

  if (result.seeds.empty())
    throw Error(ErrorCode::EmptyHarvest, "no article could be fetched");
  std::sort(result.seeds.begin(), result.seeds.end(),
            [](const Seed& a, const Seed& b) { return a.id < b.id; });
  result.seeds.erase(std::unique(result.seeds.begin(), result.seeds.end(),
                                 [](const Seed& a, const Seed& b) {
                                   return a.id == b.id;
                                 }),
                     result.seeds.end());
  return result;
}

IngestResult SeedIngestor::fetch_gdelt(const SeedQuerySpec& spec) {
  if (spec.source != SeedSource::gdelt)
    throw Error(ErrorCode::PreconditionViolation, "spec.source must be gdelt");
  if (spec.max_seeds < 1 || spec.lookback_days < 1)
    throw Error(ErrorCode::PreconditionViolation,
                "max_seeds and lookback must be >= 1");

  const std::string url = config_.gdelt_endpoint +
                          "?format=json&mode=artlist&maxrecords=250&timespan=" +
                          std::to_string(spec.lookback_days) + "d&sort=datedesc";
  auto resp = fetcher_->get(url);
  if (resp.status != 200)
    throw Error(ErrorCode::UpstreamUnavailable,
                "GDELT HTTP " + std::to_string(resp.status));
  nlohmann::json j = nlohmann::json::parse(resp.body, nullptr, false);
  if (j.is_discarded() || !j.contains("articles"))
    throw Error(ErrorCode::UpstreamUnavailable, "GDELT returned unexpected payload");

  std::vector<Candidate> candidates;
  for (const auto& a : j.at("articles")) {
    if (!a.contains("url")) continue;
    std::string stratum;
    for (const auto& key : spec.diversity_keys)
      stratum += a.value(key, std::string("?")) + "|";
    candidates.push_back({a.at("url").get<std::string>(), stratum});
  }
  return harvest(candidates, spec);
}

IngestResult SeedIngestor::fetch_mediacloud(const SeedQuerySpec& spec) {
  if (spec.source != SeedSource::mediacloud)
    throw Error(ErrorCode::PreconditionViolation, "spec.source must be mediacloud");
  if (spec.max_seeds < 1 || spec.lookback_days < 1)
    throw Error(ErrorCode::PreconditionViolation,
                "max_seeds and lookback must be >= 1");
  const char* key = std::getenv(config_.mediacloud_key_env.c_str());
  if (!key || !*key)
    throw Error(ErrorCode::UpstreamUnavailable,
                "Media Cloud API key missing; set the " +
                    config_.mediacloud_key_env + " environment variable");

  const std::string url = config_.mediacloud_endpoint +
                          "?last_days=" + std::to_string(spec.lookback_days) +
                          "&key=" + key;
  auto resp = fetcher_->get(url);
  if (resp.status != 200)
    throw Error(ErrorCode::UpstreamUnavailable,
                "Media Cloud HTTP " + std::to_string(resp.status));
  nlohmann::json j = nlohmann::json::parse(resp.body, nullptr, false);
  if (j.is_discarded() || !j.contains("stories"))
    throw Error(ErrorCode::UpstreamUnavailable,
                "Media Cloud returned unexpected payload");

  std::vector<Candidate> candidates;
  for (const auto& s : j.at("stories")) {
    if (!s.contains("url")) continue;
    std::string stratum;
    for (const auto& k : spec.diversity_keys)
      stratum += s.value(k, std::string("?")) + "|";
    candidates.push_back({s.at("url").get<std::string>(), stratum});
  }
  return harvest(candidates, spec);
}

IngestResult SeedIngestor::load_text_seeds(const std::filesystem::path& path,
                                           UtcTime now, int max_content_chars) {
  IngestResult result;
  auto add = [&](const std::string& content, const std::string& origin) {
    std::string trimmed = content;
    while (!trimmed.empty() &&
           std::isspace(static_cast<unsigned char>(trimmed.back())))
      trimmed.pop_back();
    if (trimmed.empty()) {
      result.warnings.push_back("skipped empty seed: " + origin);
      return;
    }
    result.seeds.push_back(Seed::make(
        SeedSource::text, truncate_at_paragraph(trimmed, max_content_chars), "",
        now));
  };

  std::error_code ec;
  if (std::filesystem::is_directory(path, ec)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::ifstream in(f);
      if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + f.string());
      std::string content((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
      add(content, f.filename().string());
    }
  } else if (std::filesystem::is_regular_file(path, ec)) {
    size_t n = 0;
    jsonl::for_each(path, [&](const nlohmann::json& j) {
      ++n;
      std::string content = j.value("content", j.value("text", ""));
      add(content, path.filename().string() + ":" + std::to_string(n));
    });
  } else {
    throw Error(ErrorCode::IoFailure, "unreadable seed path: " + path.string());
  }

  std::sort(result.seeds.begin(), result.seeds.end(),
            [](const Seed& a, const Seed& b) { return a.id < b.id; });
  result.seeds.erase(std::unique(result.seeds.begin(), result.seeds.end(),
                                 [](const Seed& a, const Seed& b) {
                                   return a.id == b.id;
                                 }),
                     result.seeds.end());
  return result;
}

}  // namespace ffoundry
