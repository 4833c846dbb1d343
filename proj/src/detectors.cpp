#include "kbforge/detectors.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "kbforge/errors.hpp"

namespace kbforge {

std::string_view to_string(KbConfig c) {
  switch (c) {
    case KbConfig::NoKb:
      return "none";
    case KbConfig::LongKb:
      return "long";
    case KbConfig::ShortKb:
      return "short";
  }
  return "none";
}

std::string_view display_name(KbConfig c) {
  switch (c) {
    case KbConfig::NoKb:
      return "No KB";
    case KbConfig::LongKb:
      return "Long KB";
    case KbConfig::ShortKb:
      return "Short KB";
  }
  return "No KB";
}

KbConfig kb_config_from_string(std::string_view s) {
  const auto key = normalize_key(s);
  if (key == "none" || key == "no" || key == "nokb") return KbConfig::NoKb;
  if (key == "long" || key == "longkb") return KbConfig::LongKb;
  if (key == "short" || key == "shortkb") return KbConfig::ShortKb;
  throw ConfigError("unknown KB configuration: " + std::string(s));
}

// ---- rule oracle -----------------------------------------------------------

void RuleOracleConfig::validate() const {
  if (!(min_score >= 0.0 && min_score <= 1.0)) {
    throw ConfigError("rule oracle min_score must be in [0, 1]");
  }
}

namespace {

struct ConstraintOutcome {
  double credit;
  bool mandatory_failed;
};

ConstraintOutcome check(const Constraint& c, double v) {
  return std::visit(
      [v](const auto& k) -> ConstraintOutcome {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, MandatoryEquals>) {
          const bool ok = std::fabs(v - k.value) <= k.tolerance;
          return {ok ? 1.0 : 0.0, !ok};
        } else if constexpr (std::is_same_v<T, InRange>) {
          return {k.lo <= v && v <= k.hi ? 1.0 : 0.0, false};
        } else {
          const double d = std::fabs(v - k.value);
          if (d <= k.tolerance) return {1.0, false};
          if (d <= 2.0 * k.tolerance) return {0.5, false};
          return {0.0, false};
        }
      },
      c.kind);
}

}  // namespace

std::map<AttackLabel, double> rule_oracle_scores(const FlowRecord& record, const StructuredKb& kb,
                                                 const RuleOracleConfig& config) {
  std::map<AttackLabel, double> scores;
  for (const auto& [attack, constraints] : kb.per_attack) {
    if (constraints.empty()) {
      scores[attack] = 0.0;
      continue;
    }
    double credit = 0.0;
    bool failed = false;
    for (const auto& c : constraints) {
      const auto outcome = check(c, record.value(c.feature));
      credit += outcome.credit;
      failed = failed || outcome.mandatory_failed;
    }
    scores[attack] =
        failed && config.mandatory_strict ? 0.0 : credit / static_cast<double>(constraints.size());
  }
  return scores;
}

AttackLabel rule_oracle_classify(const FlowRecord& record, const StructuredKb& kb,
                                 const RuleOracleConfig& config) {
  if (kb.empty()) throw DataError("rule oracle needs a non-empty structured KB");
  const auto scores = rule_oracle_scores(record, kb, config);
  // std::map iterates in label order, which is the tie-break order.
  AttackLabel best = AttackLabel::Unknown;
  double best_score = -1.0;
  for (const auto& [attack, score] : scores) {
    if (score > best_score) {
      best = attack;
      best_score = score;
    }
  }
  return best_score >= config.min_score ? best : AttackLabel::Unknown;
}

RuleOracleDetector::RuleOracleDetector(StructuredKb kb, RuleOracleConfig config)
    : kb_(std::move(kb)), config_(config) {
  config_.validate();
  if (kb_.empty()) throw DataError("rule oracle needs a non-empty structured KB");
}

DetectionResult RuleOracleDetector::classify(const FlowRecord& record, const KbContext& kb) {
  const auto start = std::chrono::steady_clock::now();
  const StructuredKb& use = kb.structured != nullptr ? *kb.structured : kb_;
  DetectionResult r;
  r.predicted = rule_oracle_classify(record, use, config_);
  r.latency = std::chrono::steady_clock::now() - start;
  r.backend_id = id();
  return r;
}

// ---- LLM endpoint ----------------------------------------------------------

std::string_view to_string(TransportErrorKind kind) {
  switch (kind) {
    case TransportErrorKind::Timeout:
      return "timeout";
    case TransportErrorKind::ConnectionRefused:
      return "connection_refused";
    case TransportErrorKind::HttpStatus:
      return "http_status";
    case TransportErrorKind::MalformedResponse:
      return "malformed_response";
  }
  return "unknown";
}

namespace {

struct ParsedUrl {
  std::string host_port;  // "http://host:port"
  std::string path_prefix;
};

ParsedUrl parse_base_url(const std::string& url) {
  constexpr std::string_view kScheme = "http://";
  if (url.rfind(kScheme, 0) != 0 || url.size() == kScheme.size()) {
    throw ConfigError("base_url must start with http:// and name a host: " + url);
  }
  const auto slash = url.find('/', kScheme.size());
  ParsedUrl p;
  p.host_port = url.substr(0, slash);
  if (slash != std::string::npos) {
    p.path_prefix = url.substr(slash);
    while (!p.path_prefix.empty() && p.path_prefix.back() == '/') p.path_prefix.pop_back();
  }
  return p;
}

}  // namespace

void LlmEndpointConfig::validate() const {
  parse_base_url(base_url);
  if (model_name.empty()) throw ConfigError("model name must not be empty");
  if (request_timeout.count() <= 0) throw ConfigError("request timeout must be positive");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("temperature must be >= 0");
  }
  if (initial_backoff.count() < 0 || !(backoff_multiplier >= 1.0)) {
    throw ConfigError("backoff must be non-negative with multiplier >= 1");
  }
  if (max_in_flight == 0 || max_in_flight > 1024) {
    throw ConfigError("max_in_flight must be in [1, 1024]");
  }
  prompt.thresholds.validate();
}

std::span<const std::string_view> known_models() {
  static constexpr std::array<std::string_view, 5> kModels = {
      "llama3.1:8b", "phi3:medium", "gemma2:9b", "llama3.2:3b", "phi3:mini"};
  return kModels;
}

nlohmann::json llm_request_body(const LlmEndpointConfig& config, const std::string& prompt) {
  if (config.api == LlmApi::ChatCompletions) {
    return {{"model", config.model_name},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
            {"temperature", config.temperature}};
  }
  return {{"model", config.model_name},
          {"prompt", prompt},
          {"stream", false},
          {"options", {{"temperature", config.temperature}}}};
}

namespace {

std::string extract_text(const LlmEndpointConfig& config, const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(TransportErrorKind::MalformedResponse,
                         std::string("response is not JSON: ") + e.what());
  }
  const nlohmann::json* text = nullptr;
  if (config.api == LlmApi::ChatCompletions) {
    if (j.is_object() && j.contains("choices") && j["choices"].is_array() &&
        !j["choices"].empty()) {
      const auto& choice = j["choices"][0];
      if (choice.is_object() && choice.contains("message") && choice["message"].is_object() &&
          choice["message"].contains("content")) {
        text = &choice["message"]["content"];
      }
    }
  } else if (j.is_object() && j.contains("response")) {
    text = &j["response"];
  }
  if (text == nullptr || !text->is_string()) {
    throw TransportError(TransportErrorKind::MalformedResponse,
                         "response JSON lacks the expected text field");
  }
  return text->get<std::string>();
}

struct Reply {
  std::string text;
  std::chrono::duration<double, std::milli> latency;
};

Reply post_with_retries(const LlmEndpointConfig& config, const std::string& prompt) {
  const auto url = parse_base_url(config.base_url);
  const std::string path = url.path_prefix + (config.api == LlmApi::ChatCompletions
                                                  ? "/v1/chat/completions"
                                                  : "/api/generate");
  const std::string body = llm_request_body(config, prompt).dump();

  httplib::Client client(url.host_port);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(config.request_timeout);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const int attempts = config.max_retries + 1;
  auto backoff = std::chrono::duration<double, std::milli>(config.initial_backoff);
  for (int attempt = 1;; ++attempt) {
    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(path, body, "application/json");
    const auto elapsed = std::chrono::steady_clock::now() - start;

    std::optional<TransportError> failure;
    bool retryable = false;
    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                             (err == httplib::Error::Read && elapsed >= config.request_timeout * 9 / 10);
      failure.emplace(timed_out ? TransportErrorKind::Timeout : TransportErrorKind::ConnectionRefused,
                      "request to " + config.base_url + path + " failed: " + httplib::to_string(err),
                      0, attempt);
      retryable = true;
    } else if (res->status < 200 || res->status >= 300) {
      failure.emplace(TransportErrorKind::HttpStatus,
                      "endpoint returned HTTP " + std::to_string(res->status), res->status, attempt);
      retryable = res->status >= 500;
    } else {
      try {
        return {extract_text(config, res->body), elapsed};
      } catch (const TransportError& e) {
        throw TransportError(e.kind(), e.what(), 0, attempt);
      }
    }

    if (!retryable || attempt >= attempts) throw *failure;
    std::this_thread::sleep_for(backoff);
    backoff *= config.backoff_multiplier;
  }
}

}  // namespace

DetectionResult llm_classify(const FlowRecord& record, const KnowledgeBase* kb,
                             const LlmEndpointConfig& config) {
  config.validate();
  const auto prompt = build_prompt(record, kb, config.prompt);
  auto reply = post_with_retries(config, prompt.text);
  DetectionResult r;
  r.predicted = parse_response(reply.text);
  r.raw_response = std::move(reply.text);
  r.latency = reply.latency;
  r.backend_id = config.model_name;
  return r;
}

LlmDetector::LlmDetector(LlmEndpointConfig config) : config_(std::move(config)) {
  config_.validate();
  in_flight_ = std::make_unique<std::counting_semaphore<1024>>(config_.max_in_flight);
}

DetectionResult LlmDetector::classify(const FlowRecord& record, const KbContext& kb) {
  in_flight_->acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{*in_flight_};
  return llm_classify(record, kb.text, config_);
}

// ---- record / replay -------------------------------------------------------

ReplayStore::ReplayStore(const ReplayStore& other) {
  std::lock_guard lock(other.mutex_);
  entries_ = other.entries_;
}

ReplayStore& ReplayStore::operator=(const ReplayStore& other) {
  if (this != &other) {
    std::scoped_lock lock(mutex_, other.mutex_);
    entries_ = other.entries_;
  }
  return *this;
}

ReplayStore ReplayStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open replay store " + path.string());
  ReplayStore store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ReplayEntry e;
      e.digest = j.at("digest").get<std::string>();
      e.response = j.at("response").get<std::string>();
      e.label = canonicalize_label(j.at("label").get<std::string>());
      store.add(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return store;
}

void ReplayStore::save(const std::filesystem::path& path) const {
  std::lock_guard lock(mutex_);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write replay store " + path.string());
  for (const auto& [digest, e] : entries_) {
    out << nlohmann::json{{"digest", e.digest},
                          {"response", e.response},
                          {"label", std::string(render_label(e.label))}}
               .dump()
        << '\n';
  }
}

void ReplayStore::add(ReplayEntry entry) {
  std::lock_guard lock(mutex_);
  auto key = entry.digest;
  entries_[std::move(key)] = std::move(entry);
}

std::optional<ReplayEntry> ReplayStore::find(const std::string& digest) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(digest);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::size_t ReplayStore::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

DetectionResult replay_classify(const std::string& digest, const ReplayStore& store) {
  const auto entry = store.find(digest);
  if (!entry) throw ReplayMissError(digest);
  DetectionResult r;
  r.predicted = parse_response(entry->response);
  r.raw_response = entry->response;
  r.backend_id = "replay";
  return r;
}

DetectionResult ReplayDetector::classify(const FlowRecord& record, const KbContext&) {
  return replay_classify(record_digest(record), store_);
}

DetectionResult RecordingDetector::classify(const FlowRecord& record, const KbContext& kb) {
  auto result = inner_.classify(record, kb);
  store_.add({record_digest(record),
              result.raw_response.value_or(std::string(render_label(result.predicted))),
              result.predicted});
  return result;
}

}  // namespace kbforge
