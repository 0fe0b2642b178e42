#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "icsad/ingest.hpp"

// Seeded synthetic telemetry with labelled fault injections. Used for the
// end-to-end benchmark and for grid-search validation when no labels exist.
namespace icsad::synthetic {

enum class AnomalyKind { kSpike, kStuckAt };

struct InjectedEvent {
  std::size_t row = 0;
  std::size_t length = 1;
  std::size_t feature = 0;
  AnomalyKind kind = AnomalyKind::kSpike;
};

struct InjectionOptions {
  double fraction = 0.05;      // share of rows that end up labelled 1
  double spike_share = 0.7;    // probability an event is a spike rather than stuck-at
  double spike_factor = 10.0;  // v -> v + (factor - 1) * max(|v|, column range)
  double stuck_value = 0.0;
  std::size_t spike_length = 1;
  std::size_t stuck_length = 1;
  std::size_t min_gap = 8;     // minimum normal rows between events
};

/// Sinusoids with distinct periods and positive offsets plus Gaussian noise.
/// Feature k is named "f<k>". No labels.
ingest::RecordTable normal_process(std::size_t rows, std::size_t features, double noise,
                                   std::uint64_t seed);

/// Mutates `table` in place and sets its labels (existing 1s are kept).
/// Events never overlap existing attack rows.
std::vector<InjectedEvent> inject_anomalies(ingest::RecordTable& table,
                                            const InjectionOptions& options, std::uint64_t seed);

struct BenchmarkOptions {
  std::size_t rows = 2000;
  std::size_t features = 6;
  double noise = 0.05;
  InjectionOptions injection;
  std::uint64_t seed = 2024;
};

struct Benchmark {
  ingest::RecordTable table;
  std::vector<InjectedEvent> events;
};

Benchmark make_benchmark(const BenchmarkOptions& options);

/// Features injected into rows [begin, end), deduplicated and sorted.
std::vector<std::size_t> injected_features(const std::vector<InjectedEvent>& events,
                                           std::size_t begin, std::size_t end);

}  // namespace icsad::synthetic
