#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbforge/flow_data.hpp"
#include "kbforge/kb.hpp"
#include "kbforge/prompting.hpp"

namespace kbforge {

enum class KbConfig { NoKb, LongKb, ShortKb };

std::string_view to_string(KbConfig c);
/// Accepts "none"/"no", "long", "short" and the display forms ("No KB", ...).
/// Throws ConfigError otherwise.
KbConfig kb_config_from_string(std::string_view s);
/// "No KB", "Long KB", "Short KB".
std::string_view display_name(KbConfig c);

struct DetectionResult {
  AttackLabel predicted = AttackLabel::Unknown;
  /// Present iff the backend produced text.
  std::optional<std::string> raw_response;
  std::chrono::duration<double, std::milli> latency{0};
  std::string backend_id;
};

/// Knowledge available to one classify call. Text backends read `text`;
/// the rule oracle reads `structured` when set, otherwise its own KB.
struct KbContext {
  KbConfig config = KbConfig::NoKb;
  const KnowledgeBase* text = nullptr;
  const StructuredKb* structured = nullptr;
};

class Detector {
 public:
  virtual ~Detector() = default;
  /// Never throws because of model output. Transport failures throw
  /// TransportError; other backend failures throw their own error types.
  virtual DetectionResult classify(const FlowRecord& record, const KbContext& kb) = 0;
  virtual std::string id() const = 0;
};

// ---- rule oracle -----------------------------------------------------------

struct RuleOracleConfig {
  double min_score = 0.5;
  bool mandatory_strict = true;

  /// Throws ConfigError unless min_score is in [0, 1].
  void validate() const;
};

/// Per-attack scores in [0, 1] (attacks in KB order).
std::map<AttackLabel, double> rule_oracle_scores(const FlowRecord& record, const StructuredKb& kb,
                                                 const RuleOracleConfig& config);

/// argmax of rule_oracle_scores if it reaches min_score, else Unknown. Ties go
/// to the earlier attack in label order. Throws DataError on an empty KB.
AttackLabel rule_oracle_classify(const FlowRecord& record, const StructuredKb& kb,
                                 const RuleOracleConfig& config = {});

class RuleOracleDetector final : public Detector {
 public:
  RuleOracleDetector(StructuredKb kb, RuleOracleConfig config = {});

  DetectionResult classify(const FlowRecord& record, const KbContext& kb) override;
  std::string id() const override { return "rule-oracle"; }

 private:
  StructuredKb kb_;
  RuleOracleConfig config_;
};

// ---- LLM endpoint ----------------------------------------------------------

enum class TransportErrorKind { Timeout, ConnectionRefused, HttpStatus, MalformedResponse };

std::string_view to_string(TransportErrorKind kind);

class TransportError : public std::runtime_error {
 public:
  TransportError(TransportErrorKind kind, const std::string& what, int status = 0,
                 int attempts = 1)
      : std::runtime_error(what), kind_(kind), status_(status), attempts_(attempts) {}

  TransportErrorKind kind() const { return kind_; }
  /// HTTP status for HttpStatus errors, else 0.
  int status() const { return status_; }
  int attempts() const { return attempts_; }

 private:
  TransportErrorKind kind_;
  int status_;
  int attempts_;
};

enum class LlmApi { Generate, ChatCompletions };

struct LlmEndpointConfig {
  std::string base_url = "http://127.0.0.1:11434";
  std::string model_name = "llama3.1:8b";
  std::chrono::milliseconds request_timeout{60000};
  int max_retries = 2;
  double temperature = 0.0;
  LlmApi api = LlmApi::Generate;
  std::chrono::milliseconds initial_backoff{250};
  double backoff_multiplier = 2.0;
  unsigned max_in_flight = 4;
  PromptOptions prompt;

  /// Throws ConfigError on a non-http URL, timeout <= 0, max_retries < 0,
  /// temperature < 0, or max_in_flight == 0.
  void validate() const;
};

/// Model names usable as defaults.
std::span<const std::string_view> known_models();

/// Request body for one prompt, per the configured API.
nlohmann::json llm_request_body(const LlmEndpointConfig& config, const std::string& prompt);

/// Builds the prompt, POSTs it and parses the reply. Retries 5xx, connection
/// failures and timeouts up to max_retries times with exponential backoff.
/// Latency covers the final successful request only.
DetectionResult llm_classify(const FlowRecord& record, const KnowledgeBase* kb,
                             const LlmEndpointConfig& config);

class LlmDetector final : public Detector {
 public:
  explicit LlmDetector(LlmEndpointConfig config);

  /// Blocks while max_in_flight requests are outstanding.
  DetectionResult classify(const FlowRecord& record, const KbContext& kb) override;
  std::string id() const override { return config_.model_name; }

  const LlmEndpointConfig& config() const { return config_; }

 private:
  LlmEndpointConfig config_;
  std::unique_ptr<std::counting_semaphore<1024>> in_flight_;
};

// ---- record / replay -------------------------------------------------------

class ReplayMissError : public std::runtime_error {
 public:
  explicit ReplayMissError(const std::string& digest)
      : std::runtime_error("no replay entry for digest " + digest), digest_(digest) {}
  const std::string& digest() const { return digest_; }

 private:
  std::string digest_;
};

struct ReplayEntry {
  std::string digest;
  std::string response;
  AttackLabel label = AttackLabel::Unknown;
};

/// Digest-keyed responses for one KB configuration, persisted as JSON lines
/// {"digest", "response", "label"}. Thread-safe.
class ReplayStore {
 public:
  ReplayStore() = default;
  ReplayStore(const ReplayStore& other);
  ReplayStore& operator=(const ReplayStore& other);

  /// Throws DataError on a missing file or a malformed line.
  static ReplayStore load(const std::filesystem::path& path);
  /// Entries sorted by digest.
  void save(const std::filesystem::path& path) const;

  /// Later entries for the same digest replace earlier ones.
  void add(ReplayEntry entry);
  std::optional<ReplayEntry> find(const std::string& digest) const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, ReplayEntry> entries_;
};

/// Stored response for `digest`, parsed with parse_response. Throws
/// ReplayMissError when absent.
DetectionResult replay_classify(const std::string& digest, const ReplayStore& store);

/// Serves a fixed store; the KB context is ignored because a store already
/// belongs to one KB configuration.
class ReplayDetector final : public Detector {
 public:
  explicit ReplayDetector(ReplayStore store) : store_(std::move(store)) {}

  DetectionResult classify(const FlowRecord& record, const KbContext& kb) override;
  std::string id() const override { return "replay"; }

 private:
  ReplayStore store_;
};

/// Forwards to `inner` and records every result into `store`.
class RecordingDetector final : public Detector {
 public:
  RecordingDetector(Detector& inner, ReplayStore& store) : inner_(inner), store_(store) {}

  DetectionResult classify(const FlowRecord& record, const KbContext& kb) override;
  std::string id() const override { return inner_.id(); }

 private:
  Detector& inner_;
  ReplayStore& store_;
};

}  // namespace kbforge
