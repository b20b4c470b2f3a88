#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <ranges>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "viewgrasp/learner.hpp"

namespace viewgrasp {

struct ProtocolConfig {
  double tau = 0.75;
  int window_factor = 3;
  int breakpoint_iters = 100;
  int instances_per_teach = 3;
  int max_runs = 10;
  std::uint64_t seed = 1;
  double smoothing = KnowledgeBase::kDefaultSmoothing;

  void validate() const;
};

struct Instance {
  std::string id;
  FeatureVector feature;
};

/// Category label -> instances. Instance ids must be unique across the set.
struct DatasetHandle {
  std::map<std::string, std::vector<Instance>> categories;

  std::size_t instance_count() const;
  const Instance* find(const std::string& id) const;
  std::optional<std::string> label_of(const std::string& id) const;
};

enum class EventKind { Teach, Ask, Correct };
enum class StopReason { Breakpoint, LackOfData };

std::string_view to_string(EventKind kind);
std::string_view to_string(StopReason reason);
EventKind parse_event_kind(std::string_view text);

/// One row of a run's history. Teach rows carry one absorbed instance each;
/// ask rows carry the prediction and its correctness.
struct TimelineEvent {
  int iteration = 0;
  EventKind event = EventKind::Ask;
  std::string label;
  std::string predicted;
  std::optional<bool> correct;
  std::string instance_id;
};

struct ProtocolReport {
  std::uint64_t seed = 0;
  int qci = 0;
  int alc = 0;
  double aic = 0.0;
  double gca = 0.0;
  double apa = 0.0;
  StopReason stop_reason = StopReason::LackOfData;
  std::vector<std::string> introduction_order;
  /// Window accuracy at every threshold check; apa is their mean.
  std::vector<double> window_accuracies;
  std::vector<TimelineEvent> timeline;
};

/// Fraction correct over the last window_factor * n results, or over all of
/// them while fewer exist. Empty input yields nullopt.
template <std::ranges::random_access_range Results>
std::optional<double> sliding_accuracy(const Results& results, int known_categories, int window_factor = 3) {
  const auto size = static_cast<std::size_t>(std::ranges::size(results));
  if (size == 0) return std::nullopt;
  require(known_categories >= 1, ErrorKind::Argument, "sliding accuracy needs at least one known category");
  const std::size_t window =
      std::min(size, static_cast<std::size_t>(window_factor) * static_cast<std::size_t>(known_categories));
  std::size_t hits = 0;
  for (std::size_t i = size - window; i < size; ++i)
    if (static_cast<bool>(results[i])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(window);
}

/// Simulated-teacher open-ended run (test-then-train):
///  - teach a new category with instances_per_teach random unseen instances;
///  - ask on a random unseen instance of a known category, correct mistakes;
///  - once at least n answers exist since the last teach, compare the window
///    accuracy to tau and introduce the next category when it is exceeded;
///  - stop at breakpoint_iters asks after the last teach, or when data runs
///    out (no unseen queries, or no category left to introduce).
ProtocolReport run_experiment(const ProtocolConfig& config, const DatasetHandle& data);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;
};

struct ProtocolSummary {
  int runs = 0;
  MetricSummary qci, alc, aic, gca, apa;
  int breakpoint_stops = 0;
  int lack_of_data_stops = 0;
};

/// Per-metric mean and population standard deviation over runs.
ProtocolSummary aggregate_runs(std::span<const ProtocolReport> reports);

nlohmann::json event_to_json(const TimelineEvent& event);
TimelineEvent event_from_json(const nlohmann::json& doc);
nlohmann::json report_to_json(const ProtocolReport& report);
void write_timeline_csv(std::ostream& out, const ProtocolReport& report);
void write_summary_csv(std::ostream& out, const ProtocolSummary& summary);

/// One subdirectory per category. Each *.csv file contributes one instance
/// per row (embedding or descriptor format); each *.xyz / *.ply file is one
/// instance rendered through object_descriptor.
DatasetHandle load_dataset(const std::filesystem::path& root, const DescriptorOptions& options = {});

}  // namespace viewgrasp
