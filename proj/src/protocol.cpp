#include "viewgrasp/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <set>

#include "viewgrasp/cloud_io.hpp"

namespace viewgrasp {

using json = nlohmann::json;

void ProtocolConfig::validate() const {
  require(tau > 0.0 && tau < 1.0, ErrorKind::Argument, "tau must lie in (0, 1)");
  require(window_factor >= 1, ErrorKind::Argument, "window factor must be at least 1");
  require(breakpoint_iters >= 1, ErrorKind::Argument, "breakpoint must be at least 1 iteration");
  require(instances_per_teach >= 1, ErrorKind::Argument, "instances per teach must be at least 1");
  require(max_runs >= 1, ErrorKind::Argument, "max runs must be at least 1");
  require(smoothing > 0.0, ErrorKind::Argument, "smoothing must be positive");
}

std::size_t DatasetHandle::instance_count() const {
  std::size_t n = 0;
  for (const auto& [label, items] : categories) n += items.size();
  return n;
}

const Instance* DatasetHandle::find(const std::string& id) const {
  for (const auto& [label, items] : categories)
    for (const auto& inst : items)
      if (inst.id == id) return &inst;
  return nullptr;
}

std::optional<std::string> DatasetHandle::label_of(const std::string& id) const {
  for (const auto& [label, items] : categories)
    for (const auto& inst : items)
      if (inst.id == id) return label;
  return std::nullopt;
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Teach: return "teach";
    case EventKind::Ask: return "ask";
    case EventKind::Correct: return "correct";
  }
  return "?";
}

EventKind parse_event_kind(std::string_view text) {
  if (text == "teach") return EventKind::Teach;
  if (text == "ask") return EventKind::Ask;
  if (text == "correct") return EventKind::Correct;
  fail(ErrorKind::Format, "unknown event kind '" + std::string(text) + "'");
}

std::string_view to_string(StopReason reason) {
  return reason == StopReason::Breakpoint ? "breakpoint" : "lack_of_data";
}

namespace {

class SimulatedTeacher {
 public:
  SimulatedTeacher(const ProtocolConfig& config, const DatasetHandle& data)
      : config_(config), data_(data), rng_(config.seed), kb_(config.smoothing) {
    for (const auto& [label, items] : data.categories) order_.push_back(label);
    std::shuffle(order_.begin(), order_.end(), rng_);
    for (const auto& label : order_) {
      auto& pool = unseen_[label];
      pool.resize(data.categories.at(label).size());
      for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
      std::shuffle(pool.begin(), pool.end(), rng_);
    }
    report_.seed = config.seed;
  }

  ProtocolReport run() {
    introduce_next();
    while (true) {
      const auto query = draw_query();
      if (!query) {
        report_.stop_reason = StopReason::LackOfData;
        break;
      }
      const auto& [label, inst] = *query;
      ++iteration_;
      const Prediction pred = kb_.classify(inst->feature);
      const bool hit = pred.label == label;
      report_.timeline.push_back({iteration_, EventKind::Ask, label, pred.label, hit, inst->id});
      if (!hit) {
        kb_.correct(label, inst->feature);
        ++stored_;
        report_.timeline.push_back({iteration_, EventKind::Correct, label, "", std::nullopt, inst->id});
      }
      results_.push_back(hit);

      const int known = static_cast<int>(known_.size());
      if (static_cast<int>(results_.size()) >= known) {
        const double acc = *sliding_accuracy(results_, known, config_.window_factor);
        report_.window_accuracies.push_back(acc);
        if (acc > config_.tau) {
          if (next_ < order_.size()) {
            introduce_next();
            continue;
          }
          report_.stop_reason = StopReason::LackOfData;
          break;
        }
      }
      if (iteration_ - last_teach_ >= config_.breakpoint_iters) {
        report_.stop_reason = StopReason::Breakpoint;
        break;
      }
    }
    finish();
    return std::move(report_);
  }

 private:
  void introduce_next() {
    const std::string& label = order_[next_++];
    const auto& items = data_.categories.at(label);
    auto& pool = unseen_.at(label);
    std::vector<FeatureVector> batch;
    for (int i = 0; i < config_.instances_per_teach; ++i) {
      const Instance& inst = items[pool.back()];
      pool.pop_back();
      batch.push_back(inst.feature);
      report_.timeline.push_back({iteration_, EventKind::Teach, label, "", std::nullopt, inst.id});
    }
    kb_.teach(label, batch);
    stored_ += config_.instances_per_teach;
    known_.push_back(label);
    report_.introduction_order.push_back(label);
    results_.clear();
    last_teach_ = iteration_;
  }

  std::optional<std::pair<std::string, const Instance*>> draw_query() {
    std::size_t total = 0;
    for (const auto& label : known_) total += unseen_.at(label).size();
    if (total == 0) return std::nullopt;
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    std::size_t r = pick(rng_);
    for (const auto& label : known_) {
      auto& pool = unseen_.at(label);
      if (r < pool.size()) {
        const std::size_t idx = pool[r];
        pool[r] = pool.back();
        pool.pop_back();
        return std::make_pair(label, &data_.categories.at(label)[idx]);
      }
      r -= pool.size();
    }
    return std::nullopt;
  }

  void finish() {
    int asks = 0;
    int hits = 0;
    for (const auto& e : report_.timeline) {
      if (e.event != EventKind::Ask) continue;
      ++asks;
      hits += *e.correct ? 1 : 0;
    }
    report_.qci = asks;
    report_.alc = static_cast<int>(known_.size());
    report_.aic = static_cast<double>(stored_) / report_.alc;
    report_.gca = asks > 0 ? static_cast<double>(hits) / asks : 0.0;
    double sum = 0.0;
    for (double a : report_.window_accuracies) sum += a;
    report_.apa = report_.window_accuracies.empty() ? 0.0 : sum / static_cast<double>(report_.window_accuracies.size());
  }

  const ProtocolConfig& config_;
  const DatasetHandle& data_;
  std::mt19937_64 rng_;
  KnowledgeBase kb_;
  std::vector<std::string> order_;
  std::map<std::string, std::vector<std::size_t>> unseen_;
  std::vector<std::string> known_;
  std::size_t next_ = 0;
  std::vector<bool> results_;  // answers since the last teach
  int iteration_ = 0;
  int last_teach_ = 0;
  long long stored_ = 0;
  ProtocolReport report_;
};

}  // namespace

ProtocolReport run_experiment(const ProtocolConfig& config, const DatasetHandle& data) {
  config.validate();
  require(!data.categories.empty(), ErrorKind::Argument, "dataset has no categories");
  std::set<std::string> ids;
  for (const auto& [label, items] : data.categories) {
    require(static_cast<int>(items.size()) >= config.instances_per_teach + 1, ErrorKind::Argument,
            "category '" + label + "' has fewer than instances_per_teach + 1 instances");
    for (const auto& inst : items)
      require(ids.insert(inst.id).second, ErrorKind::Argument, "duplicate instance id '" + inst.id + "'");
  }
  return SimulatedTeacher(config, data).run();
}

ProtocolSummary aggregate_runs(std::span<const ProtocolReport> reports) {
  require(!reports.empty(), ErrorKind::Argument, "no reports to aggregate");
  ProtocolSummary s;
  s.runs = static_cast<int>(reports.size());
  auto summarize = [&](auto metric) {
    double mean = 0.0;
    for (const auto& r : reports) mean += metric(r);
    mean /= s.runs;
    double var = 0.0;
    for (const auto& r : reports) var += (metric(r) - mean) * (metric(r) - mean);
    return MetricSummary{mean, std::sqrt(var / s.runs)};
  };
  s.qci = summarize([](const ProtocolReport& r) { return static_cast<double>(r.qci); });
  s.alc = summarize([](const ProtocolReport& r) { return static_cast<double>(r.alc); });
  s.aic = summarize([](const ProtocolReport& r) { return r.aic; });
  s.gca = summarize([](const ProtocolReport& r) { return r.gca; });
  s.apa = summarize([](const ProtocolReport& r) { return r.apa; });
  for (const auto& r : reports) {
    if (r.stop_reason == StopReason::Breakpoint)
      ++s.breakpoint_stops;
    else
      ++s.lack_of_data_stops;
  }
  return s;
}

json event_to_json(const TimelineEvent& e) {
  json row = {{"iteration", e.iteration},
              {"event", to_string(e.event)},
              {"label", e.label},
              {"predicted", e.predicted},
              {"instance_id", e.instance_id}};
  row["correct"] = e.correct ? json(*e.correct) : json(nullptr);
  return row;
}

TimelineEvent event_from_json(const json& doc) {
  try {
    TimelineEvent e;
    e.iteration = doc.at("iteration").get<int>();
    e.event = parse_event_kind(doc.at("event").get<std::string>());
    e.label = doc.at("label").get<std::string>();
    e.predicted = doc.value("predicted", std::string());
    e.instance_id = doc.at("instance_id").get<std::string>();
    if (doc.contains("correct") && !doc.at("correct").is_null()) e.correct = doc.at("correct").get<bool>();
    return e;
  } catch (const json::exception& ex) {
    fail(ErrorKind::Format, std::string("malformed timeline event: ") + ex.what());
  }
}

json report_to_json(const ProtocolReport& report) {
  json timeline = json::array();
  for (const auto& e : report.timeline) timeline.push_back(event_to_json(e));
  return {{"seed", report.seed},
          {"qci", report.qci},
          {"alc", report.alc},
          {"aic", report.aic},
          {"gca", report.gca},
          {"apa", report.apa},
          {"stop_reason", to_string(report.stop_reason)},
          {"introduction_order", report.introduction_order},
          {"window_accuracies", report.window_accuracies},
          {"timeline", timeline}};
}

void write_timeline_csv(std::ostream& out, const ProtocolReport& report) {
  out << "iteration,event,label,predicted,correct\n";
  for (const auto& e : report.timeline) {
    out << e.iteration << ',' << to_string(e.event) << ',' << e.label << ',' << e.predicted << ',';
    if (e.correct) out << (*e.correct ? "true" : "false");
    out << '\n';
  }
}

void write_summary_csv(std::ostream& out, const ProtocolSummary& summary) {
  auto row = [&](const char* name, const MetricSummary& m) {
    out << name << ',' << json(m.mean).dump() << ',' << json(m.stddev).dump() << '\n';
  };
  out << "metric,mean,std\n";
  row("qci", summary.qci);
  row("alc", summary.alc);
  row("aic", summary.aic);
  row("gca", summary.gca);
  row("apa", summary.apa);
  out << "runs," << summary.runs << ",0\n";
  out << "breakpoint_stops," << summary.breakpoint_stops << ",0\n";
  out << "lack_of_data_stops," << summary.lack_of_data_stops << ",0\n";
}

DatasetHandle load_dataset(const std::filesystem::path& root, const DescriptorOptions& options) {
  namespace fs = std::filesystem;
  require(fs::is_directory(root), ErrorKind::Io, "dataset directory not found: " + root.string());
  DatasetHandle data;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    const std::string label = dir.filename().string();
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<Instance> items;
    for (const auto& file : files) {
      const auto ext = file.extension();
      if (ext == ".csv") {
        for (auto& [id, f] : load_feature_rows(file))
          items.push_back({label + "/" + file.stem().string() + "/" + id, std::move(f)});
      } else if (ext == ".xyz" || ext == ".ply") {
        items.push_back({label + "/" + file.filename().string(), object_descriptor(load_cloud(file), options)});
      }
    }
    require(!items.empty(), ErrorKind::Argument, "category '" + label + "' has no instances");
    data.categories.emplace(label, std::move(items));
  }
  require(!data.categories.empty(), ErrorKind::Argument, "dataset has no category directories");
  return data;
}

}  // namespace viewgrasp
