#include "kbforge/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "kbforge/errors.hpp"
#include "kbforge/numfmt.hpp"

namespace kbforge {

void ConfusionMatrix::add(AttackLabel truth, AttackLabel predicted, std::size_t n) {
  counts_[index_of(truth)][index_of(predicted)] += n;
  total_ += n;
}

std::size_t ConfusionMatrix::correct() const {
  std::size_t sum = 0;
  for (std::size_t i = 0; i < kLabelCount; ++i) sum += counts_[i][i];
  return sum;
}

std::size_t ConfusionMatrix::class_total(AttackLabel truth) const {
  std::size_t sum = 0;
  for (auto c : counts_[index_of(truth)]) sum += c;
  return sum;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  for (std::size_t i = 0; i < kLabelCount; ++i) {
    for (std::size_t j = 0; j < kLabelCount; ++j) counts_[i][j] += other.counts_[i][j];
  }
  total_ += other.total_;
}

ConfusionMatrix confusion_from(std::span<const AttackLabel> truths,
                               std::span<const AttackLabel> predictions) {
  if (truths.size() != predictions.size()) {
    throw DataError("truth and prediction lists differ in length");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truths.size(); ++i) cm.add(truths[i], predictions[i]);
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw DataError("accuracy of an empty confusion matrix");
  return static_cast<double>(cm.correct()) / static_cast<double>(cm.total());
}

std::map<AttackLabel, double> per_class_accuracy(const ConfusionMatrix& cm) {
  std::map<AttackLabel, double> out;
  for (AttackLabel l : kAllLabels) {
    const auto n = cm.class_total(l);
    if (n == 0) continue;
    out[l] = static_cast<double>(cm.count(l, l)) / static_cast<double>(n);
  }
  return out;
}

nlohmann::json to_json(const ConfusionMatrix& cm) {
  nlohmann::json labels = nlohmann::json::array();
  nlohmann::json rows = nlohmann::json::array();
  for (AttackLabel t : kAllLabels) {
    labels.push_back(std::string(render_label(t)));
    nlohmann::json row = nlohmann::json::array();
    for (AttackLabel p : kAllLabels) row.push_back(cm.count(t, p));
    rows.push_back(std::move(row));
  }
  return {{"labels", labels}, {"counts", rows}, {"total", cm.total()}};
}

ConfusionMatrix confusion_from_json(const nlohmann::json& j) {
  const auto& labels = j.at("labels");
  const auto& rows = j.at("counts");
  if (labels.size() != rows.size()) throw DataError("confusion matrix shape mismatch");
  std::vector<AttackLabel> order;
  for (const auto& l : labels) order.push_back(canonicalize_label(l.get<std::string>()));
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != order.size()) throw DataError("confusion matrix shape mismatch");
    for (std::size_t k = 0; k < order.size(); ++k) {
      cm.add(order[i], order[k], rows[i][k].get<std::size_t>());
    }
  }
  if (j.contains("total") && j["total"].get<std::size_t>() != cm.total()) {
    throw DataError("confusion matrix total does not match its counts");
  }
  return cm;
}

EvalOutcome evaluate(Detector& detector, std::span<const FlowRecord> records, const KbContext& kb,
                     const EvalOptions& options) {
  for (const auto& r : records) {
    if (!r.label()) throw DataError("evaluation needs labeled records");
  }
  unsigned threads = options.threads != 0 ? options.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(records.size())));

  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex mutex;
  EvalOutcome total;
  std::exception_ptr failure;

  auto worker = [&] {
    EvalOutcome local;
    while (!abort.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= records.size()) break;
      const auto& r = records[i];
      try {
        local.matrix.add(*r.label(), detector.classify(r, kb).predicted);
      } catch (const TransportError&) {
        if (options.best_effort) {
          ++local.errors;
          continue;
        }
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
        abort = true;
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
        abort = true;
      }
    }
    std::lock_guard lock(mutex);
    total.matrix.merge(local.matrix);
    total.errors += local.errors;
  };

  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return total;
}

void EvaluationGrid::set(AttackLabel attack, KbConfig config, const std::string& backend,
                         GridCell cell) {
  if (!(cell.accuracy >= 0.0 && cell.accuracy <= 1.0)) {
    throw DataError("grid accuracy must be in [0, 1]");
  }
  if (std::find(backends_.begin(), backends_.end(), backend) == backends_.end()) {
    backends_.push_back(backend);
  }
  cells_[{attack, config, backend}] = cell;
}

const GridCell* EvaluationGrid::find(AttackLabel attack, KbConfig config,
                                     const std::string& backend) const {
  auto it = cells_.find({attack, config, backend});
  return it == cells_.end() ? nullptr : &it->second;
}

std::vector<AttackLabel> EvaluationGrid::attacks() const {
  std::vector<AttackLabel> out;
  for (const auto& [key, cell] : cells_) {
    const auto attack = std::get<0>(key);
    if (out.empty() || out.back() != attack) out.push_back(attack);
  }
  return out;
}

namespace {

// Tie precedence: later entries win only on strictly higher accuracy.
constexpr std::array<KbConfig, 3> kPrecedence = {KbConfig::ShortKb, KbConfig::LongKb,
                                                 KbConfig::NoKb};
constexpr std::array<KbConfig, 3> kColumnOrder = {KbConfig::NoKb, KbConfig::LongKb,
                                                  KbConfig::ShortKb};

}  // namespace

std::map<AttackLabel, KbConfig> select_best_kb(const EvaluationGrid& grid,
                                               const std::string& backend) {
  std::map<AttackLabel, KbConfig> best;
  for (AttackLabel attack : grid.attacks()) {
    const GridCell* top = nullptr;
    KbConfig choice = KbConfig::ShortKb;
    for (KbConfig c : kPrecedence) {
      const auto* cell = grid.find(attack, c, backend);
      if (cell != nullptr && (top == nullptr || cell->accuracy > top->accuracy)) {
        top = cell;
        choice = c;
      }
    }
    if (top != nullptr) best[attack] = choice;
  }
  if (best.empty()) throw DataError("no grid cells for backend " + backend);
  return best;
}

std::string_view short_attack_name(AttackLabel l) {
  switch (l) {
    case AttackLabel::IcmpFlood:
      return "ICMP";
    case AttackLabel::UdpFlood:
      return "UDP";
    case AttackLabel::TcpFlood:
      return "TCP";
    case AttackLabel::PshAckFlood:
      return "PSHACK";
    case AttackLabel::SynFlood:
      return "SYN";
    case AttackLabel::RstFinFlood:
      return "RSTFIN";
    case AttackLabel::SynonymousIpFlood:
      return "SynonymousIP";
    case AttackLabel::Normal:
      return "Normal";
    case AttackLabel::Unknown:
      return "Unknown";
  }
  return "Unknown";
}

nlohmann::json to_json(const EvaluationGrid& grid) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& [key, cell] : grid.cells()) {
    const auto& [attack, config, backend] = key;
    cells.push_back({{"attack", std::string(render_label(attack))},
                     {"kb_config", std::string(to_string(config))},
                     {"backend", backend},
                     {"accuracy", cell.accuracy},
                     {"n", cell.n}});
  }
  return {{"n_per_cell", grid.n_per_cell}, {"backends", grid.backends()}, {"cells", cells}};
}

EvaluationGrid grid_from_json(const nlohmann::json& j) {
  EvaluationGrid grid;
  grid.n_per_cell = j.at("n_per_cell").get<std::size_t>();
  // Register backends first so their order survives the round trip.
  std::vector<std::string> order = j.value("backends", std::vector<std::string>{});
  std::map<std::string, std::vector<const nlohmann::json*>> by_backend;
  for (const auto& c : j.at("cells")) {
    const auto backend = c.at("backend").get<std::string>();
    if (std::find(order.begin(), order.end(), backend) == order.end()) order.push_back(backend);
    by_backend[backend].push_back(&c);
  }
  for (const auto& backend : order) {
    for (const auto* c : by_backend[backend]) {
      const auto attack = canonicalize_label(c->at("attack").get<std::string>());
      grid.set(attack, kb_config_from_string(c->at("kb_config").get<std::string>()), backend,
               {c->at("accuracy").get<double>(), c->at("n").get<std::size_t>()});
    }
  }
  return grid;
}

RenderedTable render_table(const EvaluationGrid& grid) {
  if (grid.empty()) throw DataError("cannot render an empty grid");
  RenderedTable out;

  constexpr std::size_t kLabelWidth = 14;
  constexpr std::size_t kCellWidth = 10;
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  const std::size_t group_width = kColumnOrder.size() * (kCellWidth + 3) - 3;

  std::string header1 = "| " + pad("Attack Type", kLabelWidth) + " |";
  std::string header2 = "| " + pad("", kLabelWidth) + " |";
  for (const auto& backend : grid.backends()) {
    header1 += " " + pad(backend, group_width) + " |";
    for (KbConfig c : kColumnOrder) header2 += " " + pad(std::string(display_name(c)), kCellWidth) + " |";
  }
  std::string rule(header2.size(), '-');
  out.text = rule + "\n" + header1 + "\n" + header2 + "\n" + rule + "\n";
  for (AttackLabel attack : grid.attacks()) {
    std::string row = "| " + pad(std::string(short_attack_name(attack)), kLabelWidth) + " |";
    for (const auto& backend : grid.backends()) {
      for (KbConfig c : kColumnOrder) {
        const auto* cell = grid.find(attack, c, backend);
        row += " " + pad(cell ? format_percent(cell->accuracy) : "-", kCellWidth) + " |";
      }
    }
    out.text += row + "\n";
  }
  out.text += rule + "\n";

  out.csv = "attack,backend,kb_config,accuracy,n\n";
  for (AttackLabel attack : grid.attacks()) {
    for (const auto& backend : grid.backends()) {
      for (KbConfig c : kColumnOrder) {
        if (const auto* cell = grid.find(attack, c, backend)) {
          out.csv += std::string(render_label(attack)) + "," + backend + "," +
                     std::string(to_string(c)) + "," + shortest_repr(cell->accuracy) + "," +
                     std::to_string(cell->n) + "\n";
        }
      }
    }
  }
  out.json = to_json(grid).dump(2) + "\n";
  return out;
}

}  // namespace kbforge
