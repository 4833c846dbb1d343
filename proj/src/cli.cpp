#include "kbforge/cli.hpp"

#include <fcntl.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <array>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "kbforge/errors.hpp"
#include "kbforge/evaluation.hpp"
#include "kbforge/kb.hpp"
#include "kbforge/profile.hpp"
#include "kbforge/synth.hpp"

extern char** environ;

namespace kbforge {

namespace {

enum class KeyType { String, OptPath, Bool, Number, Unsigned, Integer };

struct KeySpec {
  std::string_view name;
  KeyType type;
};

constexpr std::array<KeySpec, 30> kKeys = {{
    {"dataset", KeyType::OptPath},
    {"synth", KeyType::Bool},
    {"jitter", KeyType::Number},
    {"profiles", KeyType::OptPath},
    {"label_column", KeyType::String},
    {"seed", KeyType::Unsigned},
    {"out", KeyType::String},
    {"trees", KeyType::Integer},
    {"max_depth", KeyType::Integer},
    {"min_samples_leaf", KeyType::Integer},
    {"threads", KeyType::Unsigned},
    {"k", KeyType::Unsigned},
    {"kb", KeyType::String},
    {"kb_source", KeyType::String},
    {"backend", KeyType::String},
    {"base_url", KeyType::String},
    {"model", KeyType::String},
    {"timeout_ms", KeyType::Integer},
    {"max_retries", KeyType::Integer},
    {"backoff_ms", KeyType::Integer},
    {"temperature", KeyType::Number},
    {"api", KeyType::String},
    {"max_in_flight", KeyType::Unsigned},
    {"prompt_mode", KeyType::String},
    {"min_score", KeyType::Number},
    {"mandatory_strict", KeyType::Bool},
    {"replay_dir", KeyType::OptPath},
    {"record_dir", KeyType::OptPath},
    {"n_per_class", KeyType::Unsigned},
    {"best_effort", KeyType::Bool},
}};

const KeySpec* find_key(std::string_view name) {
  for (const auto& k : kKeys) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

std::string_view to_string(BackendKind b) {
  switch (b) {
    case BackendKind::RuleOracle:
      return "rule-oracle";
    case BackendKind::Llm:
      return "llm";
    case BackendKind::Replay:
      return "replay";
  }
  return "rule-oracle";
}

BackendKind backend_from_string(const std::string& s) {
  const auto key = normalize_key(s);
  if (key == "ruleoracle" || key == "rule") return BackendKind::RuleOracle;
  if (key == "llm" || key == "ollama") return BackendKind::Llm;
  if (key == "replay") return BackendKind::Replay;
  throw ConfigError("unknown backend: " + s + " (expected rule-oracle, llm or replay)");
}

KbSource kb_source_from_string(const std::string& s) {
  if (s == "canonical") return KbSource::Canonical;
  if (s == "generated") return KbSource::Generated;
  throw ConfigError("unknown kb_source: " + s + " (expected canonical or generated)");
}

void check_type(const KeySpec& spec, const nlohmann::json& v) {
  bool ok = false;
  switch (spec.type) {
    case KeyType::String:
      ok = v.is_string();
      break;
    case KeyType::OptPath:
      ok = v.is_string() || v.is_null();
      break;
    case KeyType::Bool:
      ok = v.is_boolean();
      break;
    case KeyType::Number:
      ok = v.is_number();
      break;
    case KeyType::Unsigned:
      ok = v.is_number_unsigned();
      break;
    case KeyType::Integer:
      ok = v.is_number_integer();
      break;
  }
  if (!ok) throw ConfigError("config key '" + std::string(spec.name) + "' has the wrong type");
}

std::optional<std::filesystem::path> opt_path(const nlohmann::json& v) {
  if (v.is_null() || v.get<std::string>().empty()) return std::nullopt;
  return std::filesystem::path(v.get<std::string>());
}

}  // namespace

std::span<const std::string_view> config_keys() {
  static const auto kNames = [] {
    std::array<std::string_view, kKeys.size()> names{};
    for (std::size_t i = 0; i < kKeys.size(); ++i) names[i] = kKeys[i].name;
    return names;
  }();
  return kNames;
}

RunConfig config_from_json(const nlohmann::json& layer) {
  if (!layer.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  for (const auto& [key, v] : layer.items()) {
    const auto* spec = find_key(key);
    if (spec == nullptr) throw ConfigError("unknown config key: " + key);
    check_type(*spec, v);
    if (key == "dataset") c.dataset = opt_path(v);
    else if (key == "synth") c.synth = v.get<bool>();
    else if (key == "jitter") c.jitter = v.get<double>();
    else if (key == "profiles") c.profiles = opt_path(v);
    else if (key == "label_column") c.label_column = v.get<std::string>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "out") c.out = v.get<std::string>();
    else if (key == "trees") c.forest.num_trees = v.get<int>();
    else if (key == "max_depth") c.forest.max_depth = v.get<int>();
    else if (key == "min_samples_leaf") c.forest.min_samples_leaf = v.get<int>();
    else if (key == "threads") c.forest.threads = v.get<unsigned>();
    else if (key == "k") c.k = v.get<std::size_t>();
    else if (key == "kb") c.kb = kb_config_from_string(v.get<std::string>());
    else if (key == "kb_source") c.kb_source = kb_source_from_string(v.get<std::string>());
    else if (key == "backend") c.backend = backend_from_string(v.get<std::string>());
    else if (key == "base_url") c.llm.base_url = v.get<std::string>();
    else if (key == "model") c.llm.model_name = v.get<std::string>();
    else if (key == "timeout_ms") c.llm.request_timeout = std::chrono::milliseconds(v.get<long long>());
    else if (key == "max_retries") c.llm.max_retries = v.get<int>();
    else if (key == "backoff_ms") c.llm.initial_backoff = std::chrono::milliseconds(v.get<long long>());
    else if (key == "temperature") c.llm.temperature = v.get<double>();
    else if (key == "api") {
      const auto api = v.get<std::string>();
      if (api == "generate") c.llm.api = LlmApi::Generate;
      else if (api == "chat") c.llm.api = LlmApi::ChatCompletions;
      else throw ConfigError("unknown api: " + api + " (expected generate or chat)");
    } else if (key == "max_in_flight") c.llm.max_in_flight = v.get<unsigned>();
    else if (key == "prompt_mode") {
      const auto mode = v.get<std::string>();
      if (mode == "qualitative") c.llm.prompt.mode = FlowRenderMode::Qualitative;
      else if (mode == "numeric") c.llm.prompt.mode = FlowRenderMode::Numeric;
      else throw ConfigError("unknown prompt_mode: " + mode);
    } else if (key == "min_score") c.rule_oracle.min_score = v.get<double>();
    else if (key == "mandatory_strict") c.rule_oracle.mandatory_strict = v.get<bool>();
    else if (key == "replay_dir") c.replay_dir = opt_path(v);
    else if (key == "record_dir") c.record_dir = opt_path(v);
    else if (key == "n_per_class") c.n_per_class = v.get<std::size_t>();
    else if (key == "best_effort") c.best_effort = v.get<bool>();
  }

  c.forest.validate();
  c.rule_oracle.validate();
  c.llm.validate();
  if (!(c.jitter >= 0.0 && c.jitter <= 1.0)) throw ConfigError("jitter must be in [0, 1]");
  if (c.k == 0) throw ConfigError("k must be at least 1");
  if (c.n_per_class == 0) throw ConfigError("n_per_class must be at least 1");
  if (c.out.empty()) throw ConfigError("out must not be empty");
  return c;
}

nlohmann::json config_to_json(const RunConfig& c) {
  auto path_or_null = [](const std::optional<std::filesystem::path>& p) -> nlohmann::json {
    return p ? nlohmann::json(p->generic_string()) : nlohmann::json(nullptr);
  };
  return {
      {"dataset", path_or_null(c.dataset)},
      {"synth", c.synth},
      {"jitter", c.jitter},
      {"profiles", path_or_null(c.profiles)},
      {"label_column", c.label_column},
      {"seed", c.seed},
      {"out", c.out.generic_string()},
      {"trees", c.forest.num_trees},
      {"max_depth", c.forest.max_depth},
      {"min_samples_leaf", c.forest.min_samples_leaf},
      {"threads", c.forest.threads},
      {"k", c.k},
      {"kb", std::string(to_string(c.kb))},
      {"kb_source", std::string(to_string(c.kb_source))},
      {"backend", std::string(to_string(c.backend))},
      {"base_url", c.llm.base_url},
      {"model", c.llm.model_name},
      {"timeout_ms", static_cast<long long>(c.llm.request_timeout.count())},
      {"max_retries", c.llm.max_retries},
      {"backoff_ms", static_cast<long long>(c.llm.initial_backoff.count())},
      {"temperature", c.llm.temperature},
      {"api", c.llm.api == LlmApi::Generate ? "generate" : "chat"},
      {"max_in_flight", c.llm.max_in_flight},
      {"prompt_mode", c.llm.prompt.mode == FlowRenderMode::Qualitative ? "qualitative" : "numeric"},
      {"min_score", c.rule_oracle.min_score},
      {"mandatory_strict", c.rule_oracle.mandatory_strict},
      {"replay_dir", path_or_null(c.replay_dir)},
      {"record_dir", path_or_null(c.record_dir)},
      {"n_per_class", c.n_per_class},
      {"best_effort", c.best_effort},
  };
}

nlohmann::json env_layer(const char* const* envp) {
  nlohmann::json layer = nlohmann::json::object();
  if (envp == nullptr) return layer;
  constexpr std::string_view kPrefix = "KBFORGE_";
  for (const char* const* e = envp; *e != nullptr; ++e) {
    std::string_view entry(*e);
    if (entry.substr(0, kPrefix.size()) != kPrefix) continue;
    const auto eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    std::string key(entry.substr(kPrefix.size(), eq - kPrefix.size()));
    for (auto& ch : key) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    const auto* spec = find_key(key);
    if (spec == nullptr) continue;  // other KBFORGE_* variables are not config
    const std::string value(entry.substr(eq + 1));
    if (spec->type == KeyType::String || spec->type == KeyType::OptPath) {
      layer[key] = value;
      continue;
    }
    try {
      layer[key] = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("environment variable KBFORGE_" + std::string(entry.substr(kPrefix.size(), eq - kPrefix.size())) +
                        " is not a valid value: " + value);
    }
  }
  return layer;
}

std::string run_id(const RunConfig& config) {
  const auto canonical = config_to_json(config).dump();
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_Digest(canonical.data(), canonical.size(), md.data(), &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < 8 && i < len; ++i) {
    hex += kHex[md[i] >> 4];
    hex += kHex[md[i] & 0xF];
  }
  return hex;
}

namespace {

/// Exclusive claim on an output directory for the lifetime of one run.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir) : path_(dir / ".kbforge.lock") {
    std::filesystem::create_directories(dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw std::runtime_error("output directory " + dir.string() +
                               " is locked by another run (remove " + path_.string() +
                               " if stale)");
    }
    const auto pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd_, pid.data(), pid.size());
  }
  ~OutputLock() {
    ::close(fd_);
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + " is not valid JSON: " + e.what());
  }
}

enum class DataNeed { None, Required, Optional };

void validate_sources(const RunConfig& c, DataNeed need) {
  if (c.dataset && c.synth) throw ConfigError("choose either a dataset or --synth, not both");
  if (need == DataNeed::Required && !c.dataset && !c.synth) {
    throw ConfigError("no data source: pass --dataset <csv> or --synth");
  }
  if (c.dataset && !std::filesystem::is_regular_file(*c.dataset)) {
    throw ConfigError("dataset not found: " + c.dataset->string());
  }
  if (c.profiles && !std::filesystem::is_regular_file(*c.profiles)) {
    throw ConfigError("profiles file not found: " + c.profiles->string());
  }
}

std::vector<AttackProfile> synth_profiles(const RunConfig& c) {
  if (c.profiles) return profiles_from_json(read_json_file(*c.profiles));
  return reference_profiles();
}

Dataset load_data(const RunConfig& c) {
  if (c.synth) {
    SynthSpec spec;
    spec.profiles = synth_profiles(c);
    spec.n_per_attack = c.n_per_class;
    spec.jitter = c.jitter;
    spec.seed = c.seed;
    return generate_dataset(spec);
  }
  LoadOptions options;
  options.label_column = c.label_column;
  auto full = load_dataset(*c.dataset, options);
  Dataset sampled;
  sampled.records = stratified_sample(full.records, c.n_per_class, c.seed);
  for (const auto& r : sampled.records) sampled.summary.count(r);
  sampled.summary.skipped_count = full.summary.skipped_count;
  return sampled;
}

struct Ranked {
  AttackLabel attack;
  ImportanceReport report;
};

std::vector<Ranked> rank_all(const RunConfig& c, const Dataset& data) {
  std::vector<Ranked> out;
  for (AttackLabel attack : kAttackLabels) {
    auto it = data.summary.per_label_counts.find(attack);
    if (it == data.summary.per_label_counts.end() || it->second == 0) continue;
    out.push_back({attack, rank_features_for_attack(data.records, attack, c.forest, c.seed)});
  }
  if (out.empty()) throw DataError("the data contains no attack records to rank");
  return out;
}

std::vector<AttackProfile> profiles_from_data(const RunConfig& c, const Dataset& data) {
  std::vector<AttackProfile> out;
  for (const auto& r : rank_all(c, data)) {
    out.push_back(build_attack_profile(data.records, r.attack, r.report, c.k));
  }
  return out;
}

/// Explicit profiles file, else profiles computed from the dataset, else the
/// built-in reference profiles.
std::vector<AttackProfile> resolve_profiles(const RunConfig& c) {
  if (c.profiles) return profiles_from_json(read_json_file(*c.profiles));
  if (c.dataset) return profiles_from_data(c, load_data(c));
  return reference_profiles();
}

KeyFeatureSet generated_keys(std::span<const AttackProfile> profiles) {
  KeyFeatureSet keys;
  if (profiles.size() >= 2) keys = derive_key_features(profiles);
  // Attacks without a profile keep their reference key features so the short
  // KB always lists all seven attacks.
  const auto fallback = canonical_key_features();
  for (const auto& [attack, list] : fallback.per_attack) {
    if (!keys.per_attack.count(attack)) keys.per_attack[attack] = list;
  }
  return keys;
}

struct KbSet {
  KnowledgeBase long_kb;
  KnowledgeBase short_kb;
  StructuredKb structured;
};

KbSet build_kbs(const RunConfig& c) {
  const auto profiles = resolve_profiles(c);
  KbSet set;
  if (c.kb_source == KbSource::Canonical) {
    set.long_kb = canonical_kb(KbVariant::Long);
    set.short_kb = canonical_kb(KbVariant::Short);
  } else {
    set.long_kb = render_long_kb(profiles);
    set.short_kb = render_short_kb(generated_keys(profiles));
  }
  set.structured = structured_kb(profiles);
  return set;
}

KbContext context_for(const KbSet& kbs, KbConfig config) {
  KbContext ctx;
  ctx.config = config;
  if (config == KbConfig::LongKb) ctx.text = &kbs.long_kb;
  if (config == KbConfig::ShortKb) ctx.text = &kbs.short_kb;
  return ctx;
}

std::unique_ptr<Detector> make_detector(const RunConfig& c, const KbSet& kbs, KbConfig config) {
  switch (c.backend) {
    case BackendKind::RuleOracle:
      return std::make_unique<RuleOracleDetector>(kbs.structured, c.rule_oracle);
    case BackendKind::Llm:
      return std::make_unique<LlmDetector>(c.llm);
    case BackendKind::Replay: {
      const auto path = *c.replay_dir / (std::string(to_string(config)) + ".jsonl");
      return std::make_unique<ReplayDetector>(ReplayStore::load(path));
    }
  }
  throw ConfigError("unsupported backend");
}

void validate_backend(const RunConfig& c) {
  if (c.backend == BackendKind::Replay) {
    if (!c.replay_dir) throw ConfigError("the replay backend needs --replay-dir");
    if (!std::filesystem::is_directory(*c.replay_dir)) {
      throw ConfigError("replay directory not found: " + c.replay_dir->string());
    }
  }
}

// ---- subcommands -----------------------------------------------------------

int cmd_rank(const RunConfig& c, std::ostream& out) {
  validate_sources(c, DataNeed::Required);
  const auto data = load_data(c);
  const auto ranked = rank_all(c, data);
  OutputLock lock(c.out);
  for (const auto& r : ranked) {
    const auto base = c.out / "rank" / std::string(render_label(r.attack));
    write_text(base.string() + ".json", to_json(r.report).dump(2) + "\n");
    write_text(base.string() + ".csv", report_to_csv(r.report));
    const auto bars = render_ranked_bars(r.report, r.attack);
    write_text(base.string() + ".txt", bars);
    out << bars << "\n";
  }
  return 0;
}

int cmd_profile(const RunConfig& c, std::ostream& out) {
  validate_sources(c, DataNeed::Required);
  const auto profiles = profiles_from_data(c, load_data(c));
  OutputLock lock(c.out);
  const auto text = profiles_to_json(profiles).dump(2) + "\n";
  write_text(c.out / "profiles.json", text);
  out << "wrote " << (c.out / "profiles.json").generic_string() << " (" << profiles.size()
      << " attacks)\n";
  return 0;
}

int cmd_kb_build(const RunConfig& c, const std::string& variant, std::ostream& out) {
  validate_sources(c, DataNeed::Optional);
  if (variant != "long" && variant != "short" && variant != "both") {
    throw ConfigError("--variant must be long, short or both");
  }
  std::vector<KnowledgeBase> kbs;
  StructuredKb structured;
  KeyFeatureSet keys;
  if (c.kb_source == KbSource::Canonical) {
    if (variant != "short") kbs.push_back(canonical_kb(KbVariant::Long));
    if (variant != "long") kbs.push_back(canonical_kb(KbVariant::Short));
  } else {
    const auto profiles = resolve_profiles(c);
    keys = generated_keys(profiles);
    if (variant != "short") kbs.push_back(render_long_kb(profiles));
    if (variant != "long") kbs.push_back(render_short_kb(keys));
    structured = structured_kb(profiles);
  }
  OutputLock lock(c.out);
  for (const auto& kb : kbs) {
    for (const auto& path : write_kb_files(kb, c.out / "kb")) {
      out << "wrote " << path.generic_string() << "\n";
    }
  }
  if (c.kb_source == KbSource::Generated) {
    write_text(c.out / "kb" / "structured.json", to_json(structured).dump(2) + "\n");
    write_text(c.out / "kb" / "key_features.json", to_json(keys).dump(2) + "\n");
  }
  return 0;
}

int cmd_synth(const RunConfig& c, std::ostream& out) {
  validate_sources(c, DataNeed::Optional);
  if (c.dataset) throw ConfigError("synth generates data; do not pass --dataset");
  SynthSpec spec;
  spec.profiles = synth_profiles(c);
  spec.n_per_attack = c.n_per_class;
  spec.jitter = c.jitter;
  spec.seed = c.seed;
  const auto data = generate_dataset(spec);
  OutputLock lock(c.out);
  std::ostringstream csv;
  write_csv(csv, data.records, c.label_column);
  write_text(c.out / "synth.csv", csv.str());
  write_text(c.out / "synth_summary.json", to_json(data.summary).dump(2) + "\n");
  out << "wrote " << (c.out / "synth.csv").generic_string() << " (" << data.records.size()
      << " records)\n";
  return 0;
}

int cmd_detect(const RunConfig& c, const std::string& input, std::ostream& out) {
  validate_sources(c, DataNeed::Optional);
  validate_backend(c);
  if (input.empty()) throw ConfigError("detect needs --input <csv>");
  if (!std::filesystem::is_regular_file(input)) throw ConfigError("input not found: " + input);
  LoadOptions options;
  options.label_column = c.label_column;
  options.require_labels = false;
  const auto data = load_dataset(std::filesystem::path(input), options);
  const auto kbs = build_kbs(c);
  auto detector = make_detector(c, kbs, c.kb);
  const auto ctx = context_for(kbs, c.kb);

  OutputLock lock(c.out);
  std::string lines;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& r = data.records[i];
    const auto result = detector->classify(r, ctx);
    nlohmann::json j = {{"index", i},
                        {"digest", record_digest(r)},
                        {"predicted", std::string(render_label(result.predicted))},
                        {"backend", result.backend_id},
                        {"kb_config", std::string(to_string(c.kb))}};
    if (r.label()) j["truth"] = std::string(render_label(*r.label()));
    if (result.raw_response) j["raw_response"] = *result.raw_response;
    lines += j.dump() + "\n";
    j["latency_ms"] = result.latency.count();
    out << j.dump() << "\n";
  }
  write_text(c.out / "detect.jsonl", lines);
  return 0;
}

int cmd_eval(const RunConfig& c, std::ostream& out) {
  validate_sources(c, DataNeed::Required);
  validate_backend(c);
  const auto data = load_data(c);
  const auto kbs = build_kbs(c);
  const auto id = run_id(c);
  const auto dir = c.out / "results" / id;

  OutputLock lock(c.out);
  EvaluationGrid grid;
  grid.n_per_cell = c.n_per_class;
  EvalOptions options;
  options.best_effort = c.best_effort;
  options.threads = c.backend == BackendKind::Llm ? c.llm.max_in_flight : 1;

  for (KbConfig config : {KbConfig::NoKb, KbConfig::LongKb, KbConfig::ShortKb}) {
    auto detector = make_detector(c, kbs, config);
    ReplayStore recorded;
    std::unique_ptr<Detector> recorder;
    Detector* active = detector.get();
    if (c.record_dir) {
      recorder = std::make_unique<RecordingDetector>(*detector, recorded);
      active = recorder.get();
    }
    const auto outcome = evaluate(*active, data.records, context_for(kbs, config), options);
    for (const auto& [label, acc] : per_class_accuracy(outcome.matrix)) {
      if (!is_attack(label)) continue;
      grid.set(label, config, detector->id(), {acc, outcome.matrix.class_total(label)});
    }
    const nlohmann::json cm = {{"kb_config", std::string(to_string(config))},
                               {"backend", detector->id()},
                               {"errors", outcome.errors},
                               {"matrix", to_json(outcome.matrix)}};
    write_text(dir / ("confusion_" + std::string(to_string(config)) + ".json"), cm.dump(2) + "\n");
    if (c.record_dir) recorded.save(*c.record_dir / (std::string(to_string(config)) + ".jsonl"));
  }

  const auto table = render_table(grid);
  write_text(dir / "grid.txt", table.text);
  write_text(dir / "grid.csv", table.csv);
  write_text(dir / "grid.json", table.json);
  write_text(dir / "config.json", config_to_json(c).dump(2) + "\n");
  out << "run " << id << "\n" << table.text;
  return 0;
}

int cmd_select(const RunConfig& c, const std::string& grid_path, const std::string& backend_id,
               std::ostream& out) {
  if (grid_path.empty()) throw ConfigError("select needs --grid <grid.json>");
  const auto grid = grid_from_json(read_json_file(grid_path));
  if (grid.empty()) throw ConfigError("grid " + grid_path + " has no cells");
  std::vector<std::string> backends;
  if (backend_id.empty()) {
    backends = grid.backends();
  } else {
    backends.push_back(backend_id);
  }
  nlohmann::json result = nlohmann::json::object();
  for (const auto& b : backends) {
    nlohmann::json row = nlohmann::json::object();
    for (const auto& [attack, config] : select_best_kb(grid, b)) {
      const auto* cell = grid.find(attack, config, b);
      row[std::string(render_label(attack))] = {{"kb_config", std::string(to_string(config))},
                                               {"accuracy", cell->accuracy}};
    }
    result[b] = std::move(row);
  }
  OutputLock lock(c.out);
  write_text(c.out / "best_kb.json", result.dump(2) + "\n");
  out << result.dump(2) << "\n";
  return 0;
}

void report_error(std::ostream& err, std::string_view kind, const std::string& message,
                  int code) {
  err << nlohmann::json{{"error", {{"kind", kind}, {"message", message}}}, {"exit_code", code}}
             .dump()
      << "\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
            const char* const* envp) {
  CLI::App app{"kbforge: feature-ranked knowledge bases and DDoS flow detectors"};
  app.fallthrough();
  app.set_help_all_flag("--help-all", "Print help for every subcommand and exit");
  app.require_subcommand(1);
  app.footer(
      "kb build options: --canonical | --generated, --variant long|short|both\n"
      "See `kbforge <subcommand> --help` for per-subcommand options.");

  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir, backend, kb, kb_source, base_url, model, dataset, profiles,
      replay_dir, record_dir;
  std::optional<std::size_t> n_per_class;
  std::optional<double> jitter;
  bool synth = false;
  bool best_effort = false;

  app.add_option("--config", config_path, "JSON config file (flat object of config keys)");
  app.add_option("--seed", seed, "Seed for sampling, forests and synthesis");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--backend", backend, "Detector backend: rule-oracle, llm or replay");
  app.add_option("--kb", kb, "KB configuration for detect: none, long or short");
  app.add_option("--kb-source", kb_source, "KB text source: canonical or generated");
  app.add_option("--n-per-class", n_per_class, "Records per class (sampling and synthesis)");
  app.add_option("--base-url", base_url, "LLM endpoint base URL");
  app.add_option("--model", model, "LLM model name");
  app.add_option("--dataset", dataset, "Labeled flow CSV");
  app.add_flag("--synth", synth, "Use synthetic flows generated from profiles");
  app.add_option("--jitter", jitter, "Synthetic jitter in [0, 1]");
  app.add_option("--profiles", profiles, "AttackProfiles JSON (from `profile`)");
  app.add_option("--replay-dir", replay_dir, "Directory of <kb>.jsonl replay stores");
  app.add_option("--record-dir", record_dir, "Record eval responses as replay stores here");
  app.add_flag("--best-effort", best_effort, "Count transport failures instead of aborting");

  auto* rank = app.add_subcommand("rank", "Rank features per attack (one-vs-rest forest)");
  auto* profile = app.add_subcommand("profile", "Build top-k {min, median, max} profiles");
  auto* kb_cmd = app.add_subcommand("kb", "Knowledge-base commands");
  kb_cmd->require_subcommand(1);
  auto* kb_build = kb_cmd->add_subcommand("build", "Write long/short KB text files");
  bool canonical = false;
  bool generated = false;
  std::string variant = "both";
  auto* canonical_flag = kb_build->add_flag("--canonical", canonical, "Reference KB texts");
  auto* generated_flag =
      kb_build->add_flag("--generated", generated, "KB texts rendered from profiles");
  canonical_flag->excludes(generated_flag);
  kb_build->add_option("--variant", variant, "long, short or both")->capture_default_str();
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic flow CSV");
  auto* detect = app.add_subcommand("detect", "Classify the records of a CSV file");
  std::string input;
  detect->add_option("--input", input, "Flow CSV to classify");
  auto* eval = app.add_subcommand("eval", "Evaluate all KB configurations into a grid");
  auto* select = app.add_subcommand("select", "Pick the best KB configuration per attack");
  std::string grid_path;
  std::string backend_id;
  select->add_option("--grid", grid_path, "grid.json written by eval");
  select->add_option("--backend-id", backend_id, "Backend column to select for (default: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", e.what(), 2);
    return 2;
  }

  try {
    nlohmann::json layer = nlohmann::json::object();
    if (config_path) layer = read_json_file(*config_path);
    if (!layer.is_object()) throw ConfigError("config must be a JSON object");
    layer.update(env_layer(envp != nullptr ? envp : environ));
    if (seed) layer["seed"] = *seed;
    if (out_dir) layer["out"] = *out_dir;
    if (backend) layer["backend"] = *backend;
    if (kb) layer["kb"] = *kb;
    if (kb_source) layer["kb_source"] = *kb_source;
    if (canonical) layer["kb_source"] = "canonical";
    if (generated) layer["kb_source"] = "generated";
    if (n_per_class) layer["n_per_class"] = *n_per_class;
    if (base_url) layer["base_url"] = *base_url;
    if (model) layer["model"] = *model;
    if (dataset) layer["dataset"] = *dataset;
    if (synth) layer["synth"] = true;
    if (jitter) layer["jitter"] = *jitter;
    if (profiles) layer["profiles"] = *profiles;
    if (replay_dir) layer["replay_dir"] = *replay_dir;
    if (record_dir) layer["record_dir"] = *record_dir;
    if (best_effort) layer["best_effort"] = true;
    const auto config = config_from_json(layer);

    if (rank->parsed()) return cmd_rank(config, out);
    if (profile->parsed()) return cmd_profile(config, out);
    if (kb_build->parsed()) return cmd_kb_build(config, variant, out);
    if (synth_cmd->parsed()) return cmd_synth(config, out);
    if (detect->parsed()) return cmd_detect(config, input, out);
    if (eval->parsed()) return cmd_eval(config, out);
    if (select->parsed()) return cmd_select(config, grid_path, backend_id, out);
    report_error(err, "usage", "no subcommand given", 2);
    return 2;
  } catch (const ConfigError& e) {
    report_error(err, "config", e.what(), 2);
    return 2;
  } catch (const TransportError& e) {
    report_error(err, "transport:" + std::string(to_string(e.kind())), e.what(), 1);
    return 1;
  } catch (const std::exception& e) {
    report_error(err, "runtime", e.what(), 1);
    return 1;
  }
}

}  // namespace kbforge
