// Command-line front end: world generation, gallery building, episode runs,
// sweeps and reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vlb/episode.hpp"
#include "vlb/error.hpp"
#include "vlb/persistence.hpp"
#include "vlb/report.hpp"
#include "vlb/sweep.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitExecution = 3;

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  int jobs = 1;
};

vlb::ScenarioConfig load_config(const GlobalOptions& g) {
  vlb::ScenarioConfig c = g.config.empty() ? vlb::ScenarioConfig{} : vlb::load_scenario(g.config);
  if (g.seed) c.seed = *g.seed;
  c.validate();
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw vlb::Error(vlb::ErrorCode::IoError, "cannot write " + path.string());
}

void write_results(const vlb::ResultSet& rs, const fs::path& out) {
  vlb::save_result_set(rs, out / "episodes.jsonl");
  write_text(out / "summary.csv", vlb::summary_csv(vlb::summarize(rs)));
  for (const vlb::PointError& e : rs.errors)
    std::cerr << "warning: " << e.method << " at " << e.axis_value << ": " << e.message << '\n';
  std::cout << "wrote " << (out / "episodes.jsonl").string() << " and "
            << (out / "summary.csv").string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop visual localization benchmark on synthetic street scenes"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "Scenario INI file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Experiment seed (overrides [metrics] seed)");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  auto* gen = app.add_subcommand("generate-world", "Generate the world and write it to OUT/world.json");
  auto* gal = app.add_subcommand("build-gallery", "Build the gallery and write it to OUT/gallery.vlbg");
  auto* run = app.add_subcommand("run", "Run episodes at the configured condition");
  auto* sweep = app.add_subcommand("sweep", "Sweep one condition axis");
  std::string axis, values;
  sweep->add_option("--axis", axis, "illumination, fog, viewpoint or dropout ([metrics] sweep_axis)");
  sweep->add_option("--values", values, "Comma-separated axis values, or 'default'");
  auto* report = app.add_subcommand("report", "Tables and plot data from result files");
  std::vector<std::string> inputs;
  bool no_svg = false;
  report->add_option("inputs", inputs, "episodes.jsonl files (default OUT/episodes.jsonl)");
  report->add_flag("--no-svg", no_svg, "Skip SVG charts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    const fs::path out = g.out;
    if (*report) {
      std::vector<vlb::ResultSet> sets;
      if (inputs.empty()) inputs.push_back((out / "episodes.jsonl").string());
      for (const std::string& in : inputs) sets.push_back(vlb::load_result_set(in));
      vlb::write_report(vlb::build_report(vlb::merge_result_sets(sets)), out, !no_svg);
      std::cout << "wrote report to " << out.string() << '\n';
      return 0;
    }

    vlb::ScenarioConfig config = load_config(g);
    if (*sweep) {
      if (!axis.empty()) config.metrics.sweep_axis = axis;
      if (!values.empty()) config.metrics.sweep_values = values;
      config.validate();
    }
    write_text(out / "scenario.ini", vlb::scenario_to_ini(config));

    if (*gen) {
      const vlb::WorldMap world = vlb::generate_world(config.world);
      vlb::save_world(world, out / "world.json");
      std::cout << "wrote " << (out / "world.json").string() << " (" << world.landmarks.size()
                << " landmarks, route " << world.route.total_length() << " m)\n";
      return 0;
    }
    if (*gal) {
      const vlb::WorldMap world = config.world_file.empty() ? vlb::generate_world(config.world)
                                                            : vlb::load_world(config.world_file);
      const vlb::GalleryMap gallery =
          vlb::build_gallery(world, world.route, config.gallery, config.degradation);
      vlb::save_gallery(gallery, out / "gallery.vlbg");
      std::cout << "wrote " << (out / "gallery.vlbg").string() << " (" << gallery.keyframes().size()
                << " keyframes, " << gallery.points().size() << " points)\n";
      return 0;
    }

    const vlb::Scene scene = vlb::prepare_scene(config);
    if (*run) {
      const auto points = vlb::expand_axis(config, vlb::SweepAxis::None, "");
      write_results(vlb::run_sweep(config, scene, points, "none", g.jobs), out);
      return 0;
    }
    if (*sweep) {
      write_results(vlb::run_sweep(config, scene, g.jobs), out);
      return 0;
    }
  } catch (const vlb::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == vlb::ErrorCode::ConfigError ? kExitConfig : kExitExecution;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitExecution;
  }
  return 0;
}
