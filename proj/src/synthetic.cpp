#include "icsad/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "icsad/error.hpp"
#include "icsad/random.hpp"

namespace icsad::synthetic {

ingest::RecordTable normal_process(std::size_t rows, std::size_t features, double noise,
                                   std::uint64_t seed) {
  if (rows < 1 || features < 1) throw InvalidArgument("normal_process: empty shape");
  constexpr double kTwoPi = 6.283185307179586;
  Rng rng(seed);
  ingest::RecordTable table;
  table.rows.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(features));
  std::vector<double> phase(features);
  for (std::size_t k = 0; k < features; ++k) {
    table.feature_names.push_back("f" + std::to_string(k));
    phase[k] = rng.uniform(0.0, kTwoPi);
  }
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t k = 0; k < features; ++k) {
      const double period = 16.0 + 6.0 * static_cast<double>(k);
      const double offset = 2.0 + 0.5 * static_cast<double>(k);
      const double v = offset + std::sin(kTwoPi * static_cast<double>(t) / period + phase[k]) +
                       noise * rng.normal();
      table.rows(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = v;
    }
  }
  return table;
}

std::vector<InjectedEvent> inject_anomalies(ingest::RecordTable& table,
                                            const InjectionOptions& options, std::uint64_t seed) {
  const std::size_t n = table.num_rows();
  const std::size_t m = table.num_features();
  if (n == 0 || m == 0) throw InvalidArgument("inject_anomalies: empty table");
  if (!(options.fraction >= 0.0 && options.fraction < 1.0)) {
    throw InvalidArgument("inject_anomalies: fraction must lie in [0, 1)");
  }
  if (!table.labels) table.labels = std::vector<int>(n, 0);
  auto& labels = *table.labels;

  const Eigen::VectorXd range =
      (table.rows.colwise().maxCoeff() - table.rows.colwise().minCoeff()).transpose();

  // Rows blocked for new events: existing attacks padded by the minimum gap.
  std::vector<char> blocked(n, 0);
  auto block = [&](std::size_t first, std::size_t last) {
    const std::size_t lo = first >= options.min_gap ? first - options.min_gap : 0;
    const std::size_t hi = std::min(n, last + options.min_gap);
    std::fill(blocked.begin() + static_cast<std::ptrdiff_t>(lo),
              blocked.begin() + static_cast<std::ptrdiff_t>(hi), 1);
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i]) block(i, i + 1);
  }

  Rng rng(seed);
  std::vector<std::size_t> starts(n);
  std::iota(starts.begin(), starts.end(), std::size_t{0});
  rng.shuffle(starts.begin(), starts.end());

  const auto target = static_cast<std::size_t>(std::llround(options.fraction * static_cast<double>(n)));
  std::size_t injected = 0;
  std::vector<InjectedEvent> events;
  for (std::size_t start : starts) {
    if (injected >= target) break;
    InjectedEvent ev;
    ev.kind = rng.uniform() < options.spike_share ? AnomalyKind::kSpike : AnomalyKind::kStuckAt;
    ev.length = ev.kind == AnomalyKind::kSpike ? options.spike_length : options.stuck_length;
    ev.length = std::min(ev.length, target - injected);
    ev.feature = static_cast<std::size_t>(rng.below(m));
    ev.row = start;
    if (start + ev.length > n) continue;
    if (std::any_of(blocked.begin() + static_cast<std::ptrdiff_t>(start),
                    blocked.begin() + static_cast<std::ptrdiff_t>(start + ev.length),
                    [](char b) { return b != 0; })) {
      continue;
    }
    const auto k = static_cast<Eigen::Index>(ev.feature);
    for (std::size_t r = start; r < start + ev.length; ++r) {
      double& v = table.rows(static_cast<Eigen::Index>(r), k);
      if (ev.kind == AnomalyKind::kSpike) {
        const double scale = std::max({std::abs(v), range[k], 1e-12});
        v += (options.spike_factor - 1.0) * scale;
      } else {
        v = options.stuck_value;
      }
      labels[r] = 1;
    }
    block(start, start + ev.length);
    injected += ev.length;
    events.push_back(ev);
  }
  std::sort(events.begin(), events.end(),
            [](const InjectedEvent& a, const InjectedEvent& b) { return a.row < b.row; });
  return events;
}

Benchmark make_benchmark(const BenchmarkOptions& options) {
  Benchmark bench;
  bench.table = normal_process(options.rows, options.features, options.noise, mix_seed(options.seed, 0));
  bench.events = inject_anomalies(bench.table, options.injection, mix_seed(options.seed, 1));
  return bench;
}

std::vector<std::size_t> injected_features(const std::vector<InjectedEvent>& events,
                                           std::size_t begin, std::size_t end) {
  std::vector<std::size_t> out;
  for (const auto& ev : events) {
    if (ev.row < end && ev.row + ev.length > begin) out.push_back(ev.feature);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace icsad::synthetic
