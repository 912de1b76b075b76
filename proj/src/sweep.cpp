#include "vlb/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include <boost/algorithm/string.hpp>
#include <json.hpp>

#include "vlb/error.hpp"
#include "vlb/metrics.hpp"

namespace vlb {

namespace {

using nlohmann::json;

double parse_number(const std::string& text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
    throw Error(ErrorCode::ConfigError, "bad sweep value '" + text + "'");
  return v;
}

std::string shortest(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<std::string> split_values(std::string_view values) {
  std::vector<std::string> parts;
  const std::string text(values);
  boost::split(parts, text, boost::is_any_of(","));
  for (auto& p : parts) boost::trim(p);
  std::erase_if(parts, [](const std::string& p) { return p.empty(); });
  return parts;
}

std::string default_values(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Illumination: return "0,1,2,3,4,5,6,7,8,9,10";
    case SweepAxis::Fog: return "90,60,30,10";
    case SweepAxis::Dropout: return "0,0.25,0.5,0.75,0.9,0.95,1";
    case SweepAxis::Viewpoint: {
      std::string s;
      for (const auto& [z, theta] : kViewpointOffsets)
        s += (s.empty() ? "" : ",") + shortest(z) + "/" + shortest(theta);
      return s;
    }
    case SweepAxis::None: return "";
  }
  return "";
}

json failure_to_json(const FailureEvent& f) {
  return {{"t", f.timestamp}, {"x", f.position.x()}, {"y", f.position.y()},
          {"s", f.arc_length}, {"cause", to_string(f.cause)}};
}

FailureEvent failure_from_json(const json& j) {
  FailureEvent f;
  f.timestamp = j.at("t").get<double>();
  f.position = {j.at("x").get<double>(), j.at("y").get<double>()};
  f.arc_length = j.at("s").get<double>();
  f.cause = j.at("cause").get<std::string>() == "stall" ? FailureCause::Stall
                                                        : FailureCause::LateralDeviation;
  return f;
}

EpisodeRecord to_record(const EpisodeResult& r, const std::string& method,
                        const std::string& axis_value) {
  EpisodeRecord rec;
  rec.method = method;
  rec.axis_value = axis_value;
  rec.episode_index = r.episode_index;
  rec.reinit_count = r.reinit_count;
  rec.completed = r.completed;
  rec.duration = r.duration;
  rec.attempts = r.localization_log.size();
  rec.accepted = static_cast<std::size_t>(std::count_if(
      r.localization_log.begin(), r.localization_log.end(),
      [](const LocalizationAttempt& a) { return a.accepted; }));
  rec.failures = r.failure_events;
  return rec;
}

ReferenceRecord to_reference(const std::vector<LocalizationAttempt>& log,
                             const RecallThresholds& thresholds, const std::string& method,
                             const std::string& axis_value) {
  return {method, axis_value, log.size(), recall_hits(log, thresholds)};
}

/// Runs the tasks on `jobs` threads. Each task writes only to its own slot.
void run_parallel(std::vector<std::function<void()>>& tasks, int jobs) {
  const std::size_t workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) tasks[i]();
  };
  if (workers <= 1) {
    worker();
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
}

}  // namespace

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::None: return "none";
    case SweepAxis::Illumination: return "illumination";
    case SweepAxis::Fog: return "fog";
    case SweepAxis::Viewpoint: return "viewpoint";
    case SweepAxis::Dropout: return "dropout";
  }
  return "none";
}

SweepAxis parse_sweep_axis(std::string_view name) {
  for (SweepAxis a : {SweepAxis::None, SweepAxis::Illumination, SweepAxis::Fog,
                      SweepAxis::Viewpoint, SweepAxis::Dropout})
    if (to_string(a) == name) return a;
  throw Error(ErrorCode::ConfigError, "unknown sweep axis '" + std::string(name) + "'");
}

std::vector<AxisPoint> expand_axis(const ScenarioConfig& base, SweepAxis axis,
                                   std::string_view values) {
  if (axis == SweepAxis::None) return {{"base", base}};
  const std::string list =
      boost::trim_copy(std::string(values)) == "default" ? default_values(axis) : std::string(values);
  const std::vector<std::string> parts = split_values(list);
  if (parts.empty()) throw Error(ErrorCode::ConfigError, "sweep axis has no values");

  std::vector<AxisPoint> points;
  for (const std::string& part : parts) {
    AxisPoint p{part, base};
    switch (axis) {
      case SweepAxis::Illumination: {
        const double k = parse_number(part);
        if (k != std::floor(k)) throw Error(ErrorCode::ConfigError, "k must be an integer");
        p.config.condition.illumination_k = static_cast<int>(k);
        p.label = shortest(k);
        break;
      }
      case SweepAxis::Fog:
        if (part == "none") {
          p.config.condition.visual_range.reset();
        } else {
          p.config.condition.visual_range = parse_number(part);
          p.label = shortest(*p.config.condition.visual_range);
        }
        break;
      case SweepAxis::Viewpoint: {
        std::vector<std::string> zt;
        boost::split(zt, part, boost::is_any_of("/"));
        if (zt.size() != 2) throw Error(ErrorCode::ConfigError, "viewpoint values are z/theta pairs");
        const double z = parse_number(boost::trim_copy(zt[0]));
        const double theta = parse_number(boost::trim_copy(zt[1]));
        p.config.condition.camera_offset_z = z;
        p.config.condition.camera_pitch_deg = theta;
        p.label = shortest(z) + "/" + shortest(theta);
        break;
      }
      case SweepAxis::Dropout:
        p.config.degradation.dropout_max = parse_number(part);
        p.label = shortest(p.config.degradation.dropout_max);
        break;
      case SweepAxis::None: break;
    }
    p.config.validate();
    points.push_back(std::move(p));
  }
  return points;
}

std::array<double, 3> ReferenceRecord::recall() const {
  std::array<double, 3> r{0.0, 0.0, 0.0};
  if (attempts == 0) return r;
  for (std::size_t i = 0; i < 3; ++i)
    r[i] = static_cast<double>(hits[i]) / static_cast<double>(attempts);
  return r;
}

std::vector<std::string> ResultSet::methods() const {
  std::vector<std::string> out;
  auto add = [&](const std::string& m) {
    if (m != kBaselineMethod && std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  };
  for (const auto& e : episodes) add(e.method);
  for (const auto& r : references) add(r.method);
  return out;
}

bool ResultSet::has_baseline() const {
  return std::any_of(episodes.begin(), episodes.end(),
                     [](const EpisodeRecord& e) { return e.method == kBaselineMethod; });
}

ResultSet run_sweep(const ScenarioConfig& config, const Scene& scene,
                    const std::vector<AxisPoint>& points, std::string axis, int jobs) {
  if (points.empty()) throw Error(ErrorCode::ConfigError, "sweep axis has no values");
  const int n = config.metrics.episodes;
  const std::string& method = config.metrics.method_label;

  // Slot layout: per point n episodes then the reference pass; baseline last.
  const std::size_t per_point = static_cast<std::size_t>(n) + 1;
  const std::size_t total = points.size() * per_point + static_cast<std::size_t>(n);
  std::vector<std::optional<EpisodeRecord>> episode_slots(total);
  std::vector<std::optional<ReferenceRecord>> reference_slots(total);
  std::vector<std::optional<std::string>> error_slots(total);

  std::vector<std::function<void()>> tasks;
  tasks.reserve(total);
  for (std::size_t p = 0; p < points.size(); ++p) {
    for (std::size_t e = 0; e <= static_cast<std::size_t>(n); ++e) {
      const std::size_t slot = p * per_point + e;
      tasks.emplace_back([&, p, e, slot] {
        const AxisPoint& pt = points[p];
        try {
          if (e < static_cast<std::size_t>(n)) {
            episode_slots[slot] = to_record(
                run_episode(pt.config, scene, static_cast<int>(e), true), method, pt.label);
          } else {
            reference_slots[slot] = to_reference(run_reference_recall(pt.config, scene),
                                                 pt.config.metrics.thresholds, method, pt.label);
          }
        } catch (const std::exception& ex) {
          error_slots[slot] = ex.what();
        }
      });
    }
  }
  for (int e = 0; e < n; ++e) {
    const std::size_t slot = points.size() * per_point + static_cast<std::size_t>(e);
    tasks.emplace_back([&, e, slot] {
      try {
        episode_slots[slot] =
            to_record(run_episode(config, scene, e, false), kBaselineMethod, kBaselineAxisValue);
      } catch (const std::exception& ex) {
        error_slots[slot] = ex.what();
      }
    });
  }
  run_parallel(tasks, jobs);

  ResultSet out;
  out.axis = std::move(axis);
  out.seed = config.seed;
  out.route_length_km = scene.route_length_km();
  for (const RoutePoint& rp : scene.world.route.waypoints()) out.route.push_back(rp.position);
  for (const AxisPoint& p : points) out.axis_values.push_back(p.label);
  for (std::size_t s = 0; s < total; ++s) {
    if (episode_slots[s]) out.episodes.push_back(std::move(*episode_slots[s]));
    if (reference_slots[s]) out.references.push_back(std::move(*reference_slots[s]));
    if (error_slots[s]) {
      const bool baseline = s >= points.size() * per_point;
      out.errors.push_back({baseline ? kBaselineMethod : method,
                            baseline ? kBaselineAxisValue : points[s / per_point].label,
                            *error_slots[s]});
    }
  }
  return out;
}

ResultSet run_sweep(const ScenarioConfig& config, const Scene& scene, int jobs) {
  const SweepAxis axis = parse_sweep_axis(config.metrics.sweep_axis);
  return run_sweep(config, scene, expand_axis(config, axis, config.metrics.sweep_values),
                   to_string(axis), jobs);
}

void save_result_set(const ResultSet& results, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());

  json route = json::array();
  for (const Vec2& p : results.route) route.push_back({p.x(), p.y()});
  out << json{{"record", "header"},
              {"schema_version", results.schema_version},
              {"axis", results.axis},
              {"seed", results.seed},
              {"route_length_km", results.route_length_km},
              {"axis_values", results.axis_values},
              {"route", route}}
             .dump()
      << '\n';
  for (const EpisodeRecord& e : results.episodes) {
    json failures = json::array();
    for (const FailureEvent& f : e.failures) failures.push_back(failure_to_json(f));
    out << json{{"record", "episode"},      {"method", e.method},
                {"axis_value", e.axis_value}, {"episode_index", e.episode_index},
                {"reinit_count", e.reinit_count}, {"completed", e.completed},
                {"duration", e.duration},    {"attempts", e.attempts},
                {"accepted", e.accepted},    {"failures", failures}}
               .dump()
        << '\n';
  }
  for (const ReferenceRecord& r : results.references)
    out << json{{"record", "reference"}, {"method", r.method}, {"axis_value", r.axis_value},
                {"attempts", r.attempts}, {"hits", r.hits}}
               .dump()
        << '\n';
  for (const PointError& e : results.errors)
    out << json{{"record", "error"}, {"method", e.method}, {"axis_value", e.axis_value},
                {"message", e.message}}
               .dump()
        << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

ResultSet load_result_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  ResultSet rs;
  std::string line;
  bool header = false;
  std::size_t line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (boost::trim_copy(line).empty()) continue;
      const json j = json::parse(line);
      const std::string kind = j.at("record").get<std::string>();
      if (!header) {
        if (kind != "header") throw Error(ErrorCode::IoError, "missing header record");
        rs.schema_version = j.at("schema_version").get<int>();
        if (rs.schema_version != kResultSchemaVersion)
          throw Error(ErrorCode::SchemaVersion,
                      "result schema version " + std::to_string(rs.schema_version) + " unsupported");
        rs.axis = j.at("axis").get<std::string>();
        rs.seed = j.at("seed").get<std::uint64_t>();
        rs.route_length_km = j.at("route_length_km").get<double>();
        rs.axis_values = j.at("axis_values").get<std::vector<std::string>>();
        for (const auto& p : j.at("route")) rs.route.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
        header = true;
      } else if (kind == "episode") {
        EpisodeRecord e;
        e.method = j.at("method").get<std::string>();
        e.axis_value = j.at("axis_value").get<std::string>();
        e.episode_index = j.at("episode_index").get<int>();
        e.reinit_count = j.at("reinit_count").get<int>();
        e.completed = j.at("completed").get<bool>();
        e.duration = j.at("duration").get<double>();
        e.attempts = j.at("attempts").get<std::size_t>();
        e.accepted = j.at("accepted").get<std::size_t>();
        for (const auto& f : j.at("failures")) e.failures.push_back(failure_from_json(f));
        rs.episodes.push_back(std::move(e));
      } else if (kind == "reference") {
        ReferenceRecord r;
        r.method = j.at("method").get<std::string>();
        r.axis_value = j.at("axis_value").get<std::string>();
        r.attempts = j.at("attempts").get<std::size_t>();
        r.hits = j.at("hits").get<std::array<std::size_t, 3>>();
        rs.references.push_back(std::move(r));
      } else if (kind == "error") {
        rs.errors.push_back({j.at("method").get<std::string>(), j.at("axis_value").get<std::string>(),
                             j.at("message").get<std::string>()});
      } else {
        throw Error(ErrorCode::IoError, "unknown record '" + kind + "'");
      }
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::IoError,
                path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
  }
  if (!header) throw Error(ErrorCode::IoError, path.string() + " has no header record");
  return rs;
}

ResultSet merge_result_sets(const std::vector<ResultSet>& sets) {
  if (sets.empty()) throw Error(ErrorCode::InvalidSpec, "nothing to merge");
  ResultSet out = sets.front();
  for (std::size_t i = 1; i < sets.size(); ++i) {
    const ResultSet& s = sets[i];
    if (s.axis != out.axis) throw Error(ErrorCode::InvalidSpec, "result sets sweep different axes");
    if (std::abs(s.route_length_km - out.route_length_km) > 1e-9)
      throw Error(ErrorCode::InvalidSpec, "result sets use different routes");
    for (const std::string& v : s.axis_values)
      if (std::find(out.axis_values.begin(), out.axis_values.end(), v) == out.axis_values.end())
        out.axis_values.push_back(v);
    const bool skip_baseline = out.has_baseline();
    for (const EpisodeRecord& e : s.episodes)
      if (!(skip_baseline && e.method == kBaselineMethod)) out.episodes.push_back(e);
    out.references.insert(out.references.end(), s.references.begin(), s.references.end());
    out.errors.insert(out.errors.end(), s.errors.begin(), s.errors.end());
  }
  return out;
}

std::vector<SummaryRow> summarize(const ResultSet& results) {
  std::vector<SummaryRow> rows;
  auto make_row = [&](const std::string& value, const std::string& method) -> std::optional<SummaryRow> {
    std::vector<int> counts;
    std::size_t ok = 0;
    for (const EpisodeRecord& e : results.episodes) {
      if (e.method != method || e.axis_value != value) continue;
      counts.push_back(e.reinit_count);
      if (e.reinit_count == 0 && e.completed) ++ok;
    }
    if (counts.empty()) return std::nullopt;
    SummaryRow row;
    row.axis_value = value;
    row.method = method;
    row.failure_rate = failure_rate(counts, results.route_length_km);
    row.success_rate = static_cast<double>(ok) / static_cast<double>(counts.size());
    row.episodes = static_cast<int>(counts.size());
    return row;
  };
  for (const std::string& method : results.methods()) {
    for (const std::string& value : results.axis_values) {
      auto row = make_row(value, method);
      if (!row) continue;
      for (const ReferenceRecord& r : results.references)
        if (r.method == method && r.axis_value == value) row->recall = r.recall();
      rows.push_back(std::move(*row));
    }
  }
  if (auto base = make_row(kBaselineAxisValue, kBaselineMethod)) rows.push_back(std::move(*base));
  return rows;
}

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", value == 0.0 ? 0.0 : value);
  return buf;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << "axis_value,method,failure_rate,recall_T1,recall_T2,recall_T3,success_rate,episodes\n";
  for (const SummaryRow& r : rows) {
    out << r.axis_value << ',' << r.method << ',' << format_number(r.failure_rate);
    for (std::size_t i = 0; i < 3; ++i)
      out << ',' << (r.recall ? format_number((*r.recall)[i]) : std::string());
    out << ',' << format_number(r.success_rate) << ',' << r.episodes << '\n';
  }
  return out.str();
}

}  // namespace vlb
