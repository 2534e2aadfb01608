#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dsm/evaluation.hpp"
#include "dsm/io.hpp"
#include "dsm/mapper.hpp"
#include "dsm/simworld.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "1.0.0";

// Error carrying the file it concerns.
struct CliError : std::runtime_error {
  CliError(const fs::path& file, const std::string& message) : std::runtime_error(file.string() + ": " + message) {}
};

std::string frame_name(const char* prefix, dsm::TimeIndex t, const char* ext) {
  std::ostringstream ss;
  ss << prefix << std::setw(6) << std::setfill('0') << t << ext;
  return ss.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw CliError(dir, "output directory cannot be created");
  const fs::path probe = dir / ".dsm-write-probe";
  {
    std::ofstream out(probe);
    if (!out) throw CliError(dir, "output directory is not writable");
  }
  fs::remove(probe, ec);
}

struct SimulateArgs {
  std::string world;
  std::string out;
  std::uint64_t seed = 0;
  bool binary = false;
  bool voxel_gt = true;
};

int run_simulate(const SimulateArgs& a) {
  const dsm::WorldSpec world = dsm::io::load_world(a.world);
  const fs::path out(a.out);
  ensure_dir(out);
  {
    std::ofstream reg(out / "registry.txt");
    dsm::io::write_registry(reg, world.registry);
    if (!reg) throw CliError(out / "registry.txt", "write failed");
  }
  for (dsm::TimeIndex t = 0; t < world.num_scans; ++t) {
    auto frame = dsm::render_scan(world, t, a.seed);
    if (!frame) throw CliError(a.world, "scan t=" + std::to_string(t) + " has no returns");
    dsm::io::save_scan(out / frame_name("scan_", t, a.binary ? ".dsmb" : ".dsm"), *frame, a.binary);
    dsm::io::save_ground_truth(out / frame_name("gt_points_", t, ".gt"), dsm::render_gt_points(world, t),
                               world.registry);
    if (a.voxel_gt) {
      dsm::io::save_ground_truth(out / frame_name("gt_voxels_", t, ".gt"),
                                 dsm::render_gt(world, t, world.gt_resolution, world.samples_per_voxel_axis),
                                 world.registry);
    }
  }
  return 0;
}

struct MapArgs {
  std::string scans;
  std::string config;
  std::string out;
  bool no_bacc = false;
  bool no_forc = false;
  bool static_baseline = false;
  bool no_free_sampling = false;
  bool no_ego_comp = false;
  unsigned threads = 1;
};

std::vector<fs::path> scan_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw CliError(dir, "scan directory does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    const auto ext = e.path().extension();
    if (e.is_regular_file() && name.rfind("scan_", 0) == 0 && (ext == ".dsm" || ext == ".dsmb")) {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw CliError(dir, "no scan_* files found");
  return files;
}

int run_map(const MapArgs& a) {
  const fs::path dir(a.scans);
  const auto files = scan_files(dir);

  dsm::io::ConfigFile cfg;
  if (!a.config.empty()) cfg = dsm::io::load_config(a.config);
  std::optional<dsm::ClassRegistry> registry = cfg.registry;
  const fs::path reg_path = dir / "registry.txt";
  if (fs::exists(reg_path)) {
    std::ifstream in(reg_path);
    const auto from_dir = dsm::io::read_registry(in, reg_path.string());
    if (registry && !(*registry == from_dir)) {
      throw CliError(reg_path, "class registry does not match the one in " + a.config);
    }
    registry = from_dir;
  }
  if (!registry) throw CliError(dir, "no class registry (registry.txt missing and config has no [classes])");

  dsm::StepOptions opt;
  opt.bacc = !a.no_bacc;
  opt.forc = !a.no_forc;
  opt.prediction = !a.static_baseline;
  opt.free_sampling = !a.no_free_sampling;
  opt.ego_compensation = !a.no_ego_comp;
  opt.threads = a.threads;

  dsm::SemanticMap map(cfg.config, *registry);
  std::optional<dsm::TimeIndex> previous;
  for (const auto& f : files) {
    const auto frame = dsm::io::load_scan(f);
    if (previous) {
      if (frame.time_index <= *previous) {
        throw CliError(f, "time index " + std::to_string(frame.time_index) + " does not follow " +
                              std::to_string(*previous));
      }
      if (frame.time_index != *previous + 1) {
        throw CliError(f, "missing frames between t=" + std::to_string(*previous) + " and t=" +
                              std::to_string(frame.time_index));
      }
    }
    try {
      frame.validate(*registry);
      dsm::step(map, frame, opt);
    } catch (const std::invalid_argument& e) {
      throw CliError(f, e.what());
    }
    previous = frame.time_index;
  }
  dsm::io::save_map(a.out, map);
  return 0;
}

struct EvalArgs {
  std::string map;
  std::string gt;
  std::string mode;
  std::string scan;
  std::string report = "-";
  std::optional<double> margin;
  bool no_free_sampling = false;
};

std::string prefixed(const dsm::EvalReport& r, const std::string& set, bool header) {
  std::ostringstream body;
  dsm::io::write_report_csv(body, r);
  std::istringstream lines(body.str());
  std::string line, out;
  bool first = true;
  while (std::getline(lines, line)) {
    if (first) {
      first = false;
      if (header) out += "set," + line + '\n';
      continue;
    }
    out += set + ',' + line + '\n';
  }
  return out;
}

int run_eval(const EvalArgs& a) {
  const dsm::SemanticMap map = dsm::io::load_map(a.map);
  dsm::ClassRegistry gt_registry = map.registry();
  const auto gt = dsm::io::load_ground_truth(a.gt, &gt_registry);
  if (!(gt_registry == map.registry())) throw CliError(a.gt, "class registry does not match the map " + a.map);

  std::optional<dsm::TrainingFrame> frame;
  if (!a.scan.empty()) {
    frame = dsm::io::load_scan(a.scan);
    try {
      frame->validate(map.registry());
    } catch (const std::invalid_argument& e) {
      throw CliError(a.scan, e.what());
    }
  }
  auto need_scan = [&] {
    if (!frame) throw CliError(a.map, "mode '" + a.mode + "' needs --scan to define the visible set");
  };
  dsm::StepOptions opt;
  opt.free_sampling = !a.no_free_sampling;

  std::string csv;
  if (a.mode == "accuracy") {
    if (gt.mode != dsm::GroundTruthMode::point_set) {
      throw CliError(a.gt, "map accuracy needs point-set ground truth, got a voxel grid");
    }
    need_scan();
    std::ostringstream out;
    dsm::io::write_report_csv(out, dsm::map_accuracy(map, dsm::visible_set(map, *frame, opt), gt));
    csv = out.str();
  } else if (a.mode == "completeness") {
    need_scan();
    const double margin = a.margin.value_or(map.config().resolution);
    if (!(margin > 0)) throw CliError(a.gt, "completeness margin must be positive");
    const auto r = dsm::map_completeness(map, dsm::visible_set(map, *frame, opt), gt, margin);
    csv = prefixed(r.visible, "visible", true) + prefixed(r.occluded, "occluded", false);
  } else if (a.mode == "segmentation") {
    need_scan();
    if (gt.mode != dsm::GroundTruthMode::point_set) {
      throw CliError(a.gt, "segmentation needs point-set ground truth, got a voxel grid");
    }
    const std::size_t n = frame->points.size();
    if (gt.points.size() < n) throw CliError(a.gt, "fewer ground truth points than scan points in " + a.scan);
    std::vector<dsm::ClassId> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      if ((gt.points[i].position - frame->points[i].position).norm() > 1e-5) {
        throw CliError(a.gt, "ground truth point " + std::to_string(i) + " does not match scan " + a.scan);
      }
      labels[i] = gt.points[i].label;
    }
    std::ostringstream out;
    dsm::io::write_report_csv(out, dsm::segmentation_eval(map, *frame, labels));
    csv = out.str();
  } else {
    throw CliError(a.map, "unknown mode '" + a.mode + "'");
  }

  if (a.report == "-") {
    std::cout << csv;
  } else {
    std::ofstream out(a.report, std::ios::trunc);
    out << csv;
    out.flush();
    if (!out) throw CliError(a.report, "report cannot be written");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic semantic mapping with Bayesian kernel inference"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Render scans and ground truth from a world file");
  simulate->add_option("--world", sim.world, "World file")->required();
  simulate->add_option("--out", sim.out, "Output directory")->required();
  simulate->add_option("--seed", sim.seed, "Noise seed");
  simulate->add_flag("--binary", sim.binary, "Write DSMB1 binary scans");
  simulate->add_flag("!--no-voxel-gt", sim.voxel_gt, "Skip voxel-grid ground truth");

  MapArgs mp;
  auto* map = app.add_subcommand("map", "Build a map from a directory of scans");
  map->add_option("scans", mp.scans, "Scan directory")->required();
  map->add_option("--config", mp.config, "Config file");
  map->add_option("--out", mp.out, "Output map file")->required();
  map->add_flag("--no-bacc", mp.no_bacc, "Zero dynamic-class flows before prediction");
  map->add_flag("--no-forc", mp.no_forc, "Zero free and static flows before prediction");
  map->add_flag("--static-baseline", mp.static_baseline, "Disable the prediction step");
  map->add_flag("--no-free-sampling", mp.no_free_sampling, "Do not add free-space samples");
  map->add_flag("--no-ego-comp", mp.no_ego_comp, "Do not subtract the static mean flow");
  map->add_option("--threads", mp.threads, "Worker threads (0 = all cores)");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Evaluate a map against ground truth");
  eval->add_option("--map", ev.map, "Map file")->required();
  eval->add_option("--gt", ev.gt, "Ground truth file")->required();
  eval->add_option("--mode", ev.mode, "accuracy | completeness | segmentation")
      ->required()
      ->check(CLI::IsMember({"accuracy", "completeness", "segmentation"}));
  eval->add_option("--margin", ev.margin, "Completeness margin, meters (default: map resolution)");
  eval->add_option("--scan", ev.scan, "Latest scan (visible set / segmented points)");
  eval->add_option("--report", ev.report, "CSV output path, '-' for stdout");
  eval->add_flag("--no-free-sampling", ev.no_free_sampling, "Visible set without free-space samples");

  auto* version = app.add_subcommand("version", "Print the version");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*simulate) return run_simulate(sim);
    if (*map) return run_map(mp);
    if (*eval) return run_eval(ev);
    if (*version) {
      std::cout << "dsm " << kVersion << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "dsm: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
