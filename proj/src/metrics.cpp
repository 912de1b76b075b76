#include "vlb/metrics.hpp"

#include "vlb/error.hpp"

namespace vlb {

double failure_rate(std::span<const int> reinit_counts, double route_length_km) {
  if (reinit_counts.empty()) throw Error(ErrorCode::InvalidSpec, "failure rate needs episodes");
  if (!(route_length_km > 0.0)) throw Error(ErrorCode::InvalidSpec, "route length must be positive");
  double sum = 0.0;
  for (int r : reinit_counts) sum += static_cast<double>(r) / route_length_km;
  return sum / static_cast<double>(reinit_counts.size());
}

double failure_rate(std::span<const EpisodeResult> results, double route_length_km) {
  std::vector<int> counts;
  counts.reserve(results.size());
  for (const EpisodeResult& r : results) counts.push_back(r.reinit_count);
  return failure_rate(counts, route_length_km);
}

std::array<std::size_t, 3> recall_hits(std::span<const LocalizationAttempt> log,
                                       const RecallThresholds& thresholds) {
  const std::array<RecallThreshold, 3> t{thresholds.t1, thresholds.t2, thresholds.t3};
  std::array<std::size_t, 3> hits{0, 0, 0};
  for (const LocalizationAttempt& a : log) {
    if (!a.estimate) continue;
    const PoseError e = pose_error(*a.estimate, a.truth);
    for (std::size_t i = 0; i < 3; ++i)
      if (e.translation_error < t[i].translation_m && e.rotation_error < t[i].rotation_deg) ++hits[i];
  }
  return hits;
}

std::array<double, 3> recall(std::span<const LocalizationAttempt> log,
                             const RecallThresholds& thresholds) {
  std::array<double, 3> out{0.0, 0.0, 0.0};
  if (log.empty()) return out;
  const auto hits = recall_hits(log, thresholds);
  for (std::size_t i = 0; i < 3; ++i)
    out[i] = static_cast<double>(hits[i]) / static_cast<double>(log.size());
  return out;
}

double success_rate(std::span<const EpisodeResult> results) {
  if (results.empty()) throw Error(ErrorCode::InvalidSpec, "success rate needs episodes");
  std::size_t ok = 0;
  for (const EpisodeResult& r : results)
    if (r.reinit_count == 0 && r.completed) ++ok;
  return static_cast<double>(ok) / static_cast<double>(results.size());
}

}  // namespace vlb
