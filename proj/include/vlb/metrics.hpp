#pragma once

#include <array>
#include <span>
#include <vector>

#include "vlb/episode.hpp"

namespace vlb {

/// Average re-initializations per kilometer: (1/N) * sum(r_i) / L_km.
double failure_rate(std::span<const int> reinit_counts, double route_length_km);
double failure_rate(std::span<const EpisodeResult> results, double route_length_km);

/// Attempts within T1, T2, T3 (strict bounds on both error components).
std::array<std::size_t, 3> recall_hits(std::span<const LocalizationAttempt> log,
                                       const RecallThresholds& thresholds);
/// Fractions of attempts within T1, T2, T3. Missing estimates count as misses.
std::array<double, 3> recall(std::span<const LocalizationAttempt> log,
                             const RecallThresholds& thresholds);

/// Fraction of episodes completed without any re-initialization.
double success_rate(std::span<const EpisodeResult> results);

}  // namespace vlb
