// viewgrasp command line: batch entry points over the library.
//
// Exit codes: 0 ok, 2 argument error, 3 data error, 4 no valid grasp.

#include <sys/file.h>
#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "viewgrasp/cloud_io.hpp"
#include "viewgrasp/depth_view_io.hpp"
#include "viewgrasp/digest.hpp"
#include "viewgrasp/pipeline.hpp"
#include "viewgrasp/protocol.hpp"
#include "viewgrasp/service.hpp"

// httplib pulls in <resolv.h>, whose _res macro breaks Eigen headers included after it.
#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"
#include "json_config.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace viewgrasp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitArgument = 2;
constexpr int kExitData = 3;
constexpr int kExitNoGrasp = 4;

using Clock = std::chrono::steady_clock;

// CLI11 streams captured defaults at six digits; keep doubles exact so a
// manifest's config snapshot replays bit for bit.
template <typename T>
CLI::Option* add_option(CLI::App* app, const std::string& name, T& value, const std::string& help) {
  CLI::Option* opt = app->add_option(name, value, help);
  if constexpr (std::is_floating_point_v<T>) opt->default_str(json(value).dump());
  return opt;
}

double ms_since(Clock::time_point t) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

struct SetupFlags {
  std::string kind = "orthographic";
  double alpha = 0.0;
  double phi = 60.0;
  double beta = 0.0;
  int azimuths = 0;
  int elevations = 0;

  void add(CLI::App* app) {
    add_option(app, "--setup", kind, "view setup")->check(CLI::IsMember({"orthographic", "orbit", "sphere"}));
    add_option(app, "--alpha", alpha, "azimuth interval in degrees (orbit, sphere)");
    add_option(app, "--phi", phi, "orbit elevation in degrees");
    add_option(app, "--beta", beta, "elevation interval in degrees (sphere)");
    add_option(app, "--azimuths", azimuths, "azimuth count, alternative to --alpha");
    add_option(app, "--elevations", elevations, "elevation count, alternative to --beta");
  }

  ViewSetup build() const {
    switch (parse_setup_kind(kind)) {
      case SetupKind::Orthographic: return ViewSetup::orthographic();
      case SetupKind::Orbit:
        if (azimuths > 0) return ViewSetup::orbit_counts(azimuths, phi);
        require(alpha > 0, ErrorKind::Argument, "orbit setup needs --alpha or --azimuths");
        return ViewSetup::orbit(alpha, phi);
      case SetupKind::Sphere: {
        require(azimuths > 0 || alpha > 0, ErrorKind::Argument, "sphere setup needs --alpha or --azimuths");
        require(elevations > 0 || beta > 0, ErrorKind::Argument, "sphere setup needs --beta or --elevations");
        const int az = azimuths > 0 ? azimuths : ViewSetup::sphere(alpha, 180.0).azimuth_count();
        const int el = elevations > 0 ? elevations : ViewSetup::sphere(360.0, beta).elevation_count();
        return ViewSetup::sphere_counts(az, el);
      }
    }
    fail(ErrorKind::Argument, "unknown setup");
  }
};

struct DescriptorFlags {
  SetupFlags setup;
  std::string pooling = "avg";
  int bins = defaults::recognition_bins;
  double distance = defaults::camera_distance;

  void add(CLI::App* app) {
    setup.add(app);
    add_option(app, "--pooling", pooling, "view pooling")->check(CLI::IsMember({"max", "avg", "append"}));
    add_option(app, "--bins", bins, "bins per side of recognition views")->check(CLI::PositiveNumber);
    add_option(app, "--distance", distance, "camera distance in meters")->check(CLI::PositiveNumber);
  }

  DescriptorOptions build() const {
    DescriptorOptions o;
    o.setup = setup.build();
    o.pooling = parse_pooling(pooling);
    o.bins = bins;
    o.distance = distance;
    return o;
  }
};

struct GraspFlags {
  SetupFlags setup;
  int bins = defaults::grasp_bins;
  double plane_side = defaults::grasp_plane_side;
  double distance = defaults::camera_distance;
  double delta = defaults::grasp_delta;
  int budget = 64;
  GripperGeometry grip;
  AnnealSchedule schedule;
  FitnessWeights weights;
  std::optional<double> table_height;
  int normal_neighbors = 10;
  std::string entropy = "depth";

  void add(CLI::App* app) {
    setup.add(app);
    add_option(app, "--bins", bins, "bins per side of the grasp view")->check(CLI::PositiveNumber);
    add_option(app, "--plane-side", plane_side, "fixed projection plane side in meters")->check(CLI::PositiveNumber);
    add_option(app, "--distance", distance, "camera distance in meters")->check(CLI::PositiveNumber);
    add_option(app, "--delta", delta, "grasp-depth neighbourhood radius in meters")->check(CLI::NonNegativeNumber);
    add_option(app, "--budget", budget, "number of annealed candidates")->check(CLI::PositiveNumber);
    add_option(app, "--max-width", grip.max_width, "gripper stroke in meters");
    add_option(app, "--finger-thickness", grip.finger_thickness, "finger thickness in meters");
    add_option(app, "--finger-depth", grip.finger_depth, "finger depth in meters");
    add_option(app, "--t0", schedule.t0, "initial annealing temperature");
    add_option(app, "--cooling", schedule.cooling, "geometric cooling factor");
    add_option(app, "--iters", schedule.iters, "annealing iterations per candidate");
    add_option(app, "--sigma-rotation", schedule.sigma_rotation, "rotation proposal std-dev in radians");
    add_option(app, "--sigma-width", schedule.sigma_width, "width proposal std-dev in meters");
    add_option(app, "--w-coverage", weights.coverage, "fitness weight of coverage");
    add_option(app, "--w-stability", weights.stability, "fitness weight of stability");
    add_option(app, "--w-centering", weights.centering, "fitness weight of centering");
    add_option(app, "--table-height", table_height, "world z of the table plane");
    add_option(app, "--normal-neighbors", normal_neighbors, "neighbourhood size for normal estimation")
        ->check(CLI::PositiveNumber);
    add_option(app, "--entropy", entropy, "view entropy mode")->check(CLI::IsMember({"depth", "occupancy"}));
  }

  GraspPlanOptions build(std::uint64_t seed) const {
    GraspPlanOptions o;
    o.setup = setup.build();
    o.bins = bins;
    o.plane_side = plane_side;
    o.distance = distance;
    o.delta = delta;
    o.grip = grip;
    o.schedule = schedule;
    o.weights = weights;
    o.budget = budget;
    o.seed = seed;
    o.table_height = table_height;
    o.normal_neighbors = normal_neighbors;
    o.entropy = entropy == "occupancy" ? EntropyMode::Occupancy : EntropyMode::Depth;
    return o;
  }
};

// One manifest per invocation; outputs are recorded with their digests.
class Run {
 public:
  Run(std::string command, fs::path out, std::uint64_t seed, json config)
      : command_(std::move(command)), out_(std::move(out)), seed_(seed), config_(std::move(config)) {}

  const fs::path& out() const { return out_; }

  void input(const fs::path& path) {
    std::string digest;
    if (fs::is_directory(path)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(path))
        if (e.is_regular_file()) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      std::string listing;
      for (const auto& f : files) listing += fs::relative(f, path).generic_string() + " " + sha256_file(f) + "\n";
      digest = sha256_hex(listing);
    } else {
      digest = sha256_file(path);
    }
    inputs_.push_back({{"path", path.string()}, {"sha256", digest}});
  }

  void write(const std::string& name, const std::string& content) {
    const fs::path path = out_ / name;
    std::ofstream f(path, std::ios::binary);
    require(static_cast<bool>(f), ErrorKind::Io, "cannot write " + path.string());
    f << content;
    f.close();
    require(static_cast<bool>(f), ErrorKind::Io, "failed writing " + path.string());
    outputs_.push_back({{"path", path.string()}, {"sha256", sha256_hex(content)}});
  }

  void time(const std::string& stage, double ms) { timings_[stage] = ms; }
  json& results() { return results_; }

  void finish(int exit_code, const std::string& error = {}) {
    timings_["total"] = ms_since(start_);
    json doc = {{"command", command_},     {"seed", seed_},          {"config", config_},
                {"inputs", inputs_},       {"outputs", outputs_},    {"timings_ms", timings_},
                {"results", results_},     {"exit_code", exit_code}};
    if (!error.empty()) doc["error"] = error;
    std::ofstream f(out_ / "manifest.json");
    f << doc.dump(2) << '\n';
  }

 private:
  std::string command_;
  fs::path out_;
  std::uint64_t seed_;
  json config_;
  json inputs_ = json::array();
  json outputs_ = json::array();
  json timings_ = json::object();
  json results_ = json::object();
  Clock::time_point start_ = Clock::now();
};

// Held for the process lifetime; flock releases on exit, even after a crash.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir) {
    const auto path = (dir / ".viewgrasp.lock").string();
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
    require(fd_ >= 0, ErrorKind::Io, "cannot open lock file " + path);
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      fd_ = -1;
      fail(ErrorKind::Io, "output directory " + dir.string() + " is in use by another run");
    }
  }
  ~OutputLock() {
    if (fd_ >= 0) ::close(fd_);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  int fd_ = -1;
};

json option_snapshot(const CLI::App* app) {
  json out = json::object();
  for (const CLI::Option* opt : app->get_options({})) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames()[0];
    if (name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      out[name] = r.size() == 1 ? json(r[0]) : json(r);
    } else {
      out[name] = opt->get_default_str();
    }
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  try {
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
      const auto lo = std::stoull(text.substr(0, dots));
      const auto hi = std::stoull(text.substr(dots + 2));
      require(lo <= hi, ErrorKind::Argument, "seed range '" + text + "' is empty");
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    } else {
      std::istringstream in(text);
      std::string part;
      while (std::getline(in, part, ',')) seeds.push_back(std::stoull(part));
    }
  } catch (const std::logic_error&) {
    fail(ErrorKind::Argument, "cannot parse seeds '" + text + "'");
  }
  require(!seeds.empty(), ErrorKind::Argument, "no seeds given");
  return seeds;
}

std::string csv_number(double v) { return json(v).dump(); }

std::vector<LabeledFeature> gather_features(Run& run, const std::vector<std::string>& clouds,
                                            const std::vector<std::string>& feature_files,
                                            const DescriptorOptions& opts) {
  std::vector<LabeledFeature> rows;
  for (const auto& path : clouds) {
    run.input(path);
    rows.emplace_back(fs::path(path).stem().string(), object_descriptor(load_cloud(path), opts));
  }
  for (const auto& path : feature_files) {
    run.input(path);
    for (auto& row : load_feature_rows(path)) rows.push_back(std::move(row));
  }
  return rows;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void progress(const std::string& line) { std::cout << line << '\n' << std::flush; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"viewgrasp: projection-based recognition, open-ended learning and grasp synthesis"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 1;
  std::string out_dir = "out";
  add_option(&app, "--seed", seed, "random seed");
  add_option(&app, "--out", out_dir, "output directory");

  // Pick the config reader from the file extension before CLI11 parses.
  bool json_config = false;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    std::string value;
    if (arg == "--config" && i + 1 < argc) value = argv[i + 1];
    else if (arg.rfind("--config=", 0) == 0) value = arg.substr(9);
    if (!value.empty()) json_config = fs::path(value).extension() == ".json";
  }
  app.set_config("--config", "", "TOML or JSON config file (flags take precedence)");
  if (json_config) app.config_formatter(std::make_shared<cli::JsonConfig>());

  // project
  auto* project = app.add_subcommand("project", "render depth views of a cloud");
  std::string project_cloud;
  SetupFlags project_setup;
  std::string project_mode = "scale-invariant";
  int project_bins = 0;
  double project_side = defaults::grasp_plane_side;
  double project_distance = defaults::camera_distance;
  add_option(project, "--cloud", project_cloud, "input cloud (.xyz or .ply)")->required();
  project_setup.add(project);
  add_option(project, "--mode", project_mode, "projection mode")
      ->check(CLI::IsMember({"scale-invariant", "fixed-size"}));
  add_option(project, "--bins", project_bins, "bins per side (0: 32 scale-invariant, 64 fixed-size)")
      ->check(CLI::NonNegativeNumber);
  add_option(project, "--plane-side", project_side, "plane side for fixed-size mode")->check(CLI::PositiveNumber);
  add_option(project, "--distance", project_distance, "camera distance")->check(CLI::PositiveNumber);

  // rank
  auto* rank = app.add_subcommand("rank", "rank views by entropy");
  std::string rank_cloud;
  std::vector<std::string> rank_views_in;
  SetupFlags rank_setup;
  std::string rank_mode = "fixed-size";
  int rank_bins = 0;
  double rank_side = defaults::grasp_plane_side;
  std::string rank_entropy = "depth";
  add_option(rank, "--cloud", rank_cloud, "input cloud to render");
  add_option(rank, "--views", rank_views_in, "DVIEW files to rank");
  rank_setup.add(rank);
  add_option(rank, "--mode", rank_mode, "projection mode")->check(CLI::IsMember({"scale-invariant", "fixed-size"}));
  add_option(rank, "--bins", rank_bins, "bins per side (0: mode default)")->check(CLI::NonNegativeNumber);
  add_option(rank, "--plane-side", rank_side, "plane side for fixed-size mode")->check(CLI::PositiveNumber);
  add_option(rank, "--entropy", rank_entropy, "entropy mode")->check(CLI::IsMember({"depth", "occupancy"}));

  // features
  auto* features = app.add_subcommand("features", "compute pooled view descriptors");
  std::vector<std::string> features_clouds;
  std::string features_dataset;
  DescriptorFlags features_desc;
  add_option(features, "--cloud", features_clouds, "input clouds");
  add_option(features, "--dataset", features_dataset, "dataset directory (one subdirectory per category)");
  features_desc.add(features);

  // teach
  auto* teach = app.add_subcommand("teach", "teach categories into a knowledge base");
  std::string teach_kb;
  std::string teach_label;
  std::vector<std::string> teach_clouds;
  std::vector<std::string> teach_features;
  std::string teach_dataset;
  double teach_smoothing = KnowledgeBase::kDefaultSmoothing;
  DescriptorFlags teach_desc;
  add_option(teach, "--kb", teach_kb, "existing knowledge base to extend");
  add_option(teach, "--label", teach_label, "category label for --cloud / --features");
  add_option(teach, "--cloud", teach_clouds, "instance clouds");
  add_option(teach, "--features", teach_features, "feature CSV files");
  add_option(teach, "--dataset", teach_dataset, "teach every category of a dataset directory");
  add_option(teach, "--smoothing", teach_smoothing, "Laplace smoothing for a new knowledge base")
      ->check(CLI::PositiveNumber);
  teach_desc.add(teach);

  // classify
  auto* classify = app.add_subcommand("classify", "classify instances against a knowledge base");
  std::string classify_kb;
  std::vector<std::string> classify_clouds;
  std::vector<std::string> classify_features;
  DescriptorFlags classify_desc;
  add_option(classify, "--kb", classify_kb, "knowledge base JSON")->required();
  add_option(classify, "--cloud", classify_clouds, "instance clouds");
  add_option(classify, "--features", classify_features, "feature CSV files");
  classify_desc.add(classify);

  // protocol
  auto* protocol = app.add_subcommand("protocol", "run simulated-teacher experiments");
  std::string protocol_dataset;
  std::string protocol_seeds = "1..10";
  ProtocolConfig pconf;
  DescriptorFlags protocol_desc;
  add_option(protocol, "--dataset", protocol_dataset, "dataset directory")->required();
  add_option(protocol, "--seeds", protocol_seeds, "seed range a..b or list a,b,c");
  add_option(protocol, "--tau", pconf.tau, "accuracy threshold");
  add_option(protocol, "--window-factor", pconf.window_factor, "window size per known category");
  add_option(protocol, "--breakpoint", pconf.breakpoint_iters, "iterations without a teach before stopping");
  add_option(protocol, "--instances-per-teach", pconf.instances_per_teach, "instances per new category");
  add_option(protocol, "--smoothing", pconf.smoothing, "Laplace smoothing");
  protocol_desc.add(protocol);

  // grasp
  auto* grasp = app.add_subcommand("grasp", "synthesize a grasp on the most informative view");
  std::string grasp_cloud;
  GraspFlags grasp_flags;
  add_option(grasp, "--cloud", grasp_cloud, "input cloud")->required();
  grasp_flags.add(grasp);

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP JSON API for teaching sessions and grasp previews");
  std::string serve_dataset;
  std::string serve_objects;
  std::string serve_state;
  std::string serve_host = "127.0.0.1";
  int serve_port = 8080;
  double serve_smoothing = KnowledgeBase::kDefaultSmoothing;
  int serve_window = 3;
  DescriptorFlags serve_desc;
  GraspFlags serve_grasp;
  add_option(serve, "--dataset", serve_dataset, "dataset directory for session instances");
  add_option(serve, "--objects", serve_objects, "directory of object clouds");
  add_option(serve, "--state-dir", serve_state, "persist session event logs here");
  add_option(serve, "--host", serve_host, "bind address");
  add_option(serve, "--port", serve_port, "port (0 picks a free one)");
  add_option(serve, "--smoothing", serve_smoothing, "Laplace smoothing")->check(CLI::PositiveNumber);
  add_option(serve, "--window-factor", serve_window, "window size per known category")->check(CLI::PositiveNumber);
  add_option(serve, "--pooling", serve_desc.pooling, "view pooling")->check(CLI::IsMember({"max", "avg", "append"}));
  add_option(serve, "--descriptor-bins", serve_desc.bins, "bins of recognition views")->check(CLI::PositiveNumber);
  add_option(serve, "--budget", serve_grasp.budget, "default grasp budget")->check(CLI::PositiveNumber);
  add_option(serve, "--grasp-bins", serve_grasp.bins, "bins of grasp views")->check(CLI::PositiveNumber);
  add_option(serve, "--table-height", serve_grasp.table_height, "world z of the table plane");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitArgument;
  }

  CLI::App* cmd = app.get_subcommands().front();
  json config = option_snapshot(&app);
  config[cmd->get_name()] = option_snapshot(cmd);

  std::optional<Run> run;
  std::optional<OutputLock> lock;
  auto report_error = [&](int code, const std::string& message) {
    std::cerr << "viewgrasp " << cmd->get_name() << ": " << message << '\n';
    if (run) run->finish(code, message);
    return code;
  };

  try {
    fs::create_directories(out_dir);
    lock.emplace(out_dir);
    run.emplace(cmd->get_name(), out_dir, seed, config);
    auto& r = *run;

    if (cmd == project) {
      r.input(project_cloud);
      auto t = Clock::now();
      const PointCloud cloud = load_cloud(project_cloud);
      RenderOptions render;
      render.mode = parse_projection_mode(project_mode);
      render.bins = project_bins > 0 ? project_bins
                                     : (render.mode == ProjectionMode::FixedSize ? defaults::grasp_bins
                                                                                 : defaults::recognition_bins);
      render.distance = project_distance;
      render.fixed_side = project_side;
      const auto rendered = render_views(cloud, project_setup.build(), render);
      r.time("render", ms_since(t));
      for (std::size_t i = 0; i < rendered.views.size(); ++i) {
        std::ostringstream s;
        write_dview(s, rendered.views[i]);
        char name[32];
        std::snprintf(name, sizeof name, "view_%03zu.dview", i);
        r.write(name, s.str());
      }
      r.results()["views"] = rendered.views.size();
      progress("wrote " + std::to_string(rendered.views.size()) + " views to " + out_dir);
    } else if (cmd == rank) {
      require(!rank_cloud.empty() || !rank_views_in.empty(), ErrorKind::Argument, "rank needs --cloud or --views");
      std::vector<DepthView<double>> views;
      if (!rank_cloud.empty()) {
        r.input(rank_cloud);
        RenderOptions render;
        render.mode = parse_projection_mode(rank_mode);
        render.bins = rank_bins > 0 ? rank_bins
                                    : (render.mode == ProjectionMode::FixedSize ? defaults::grasp_bins
                                                                                : defaults::recognition_bins);
        render.fixed_side = rank_side;
        views = render_views(load_cloud(rank_cloud), rank_setup.build(), render).views;
      }
      for (const auto& path : rank_views_in) {
        r.input(path);
        views.push_back(load_dview(path));
      }
      const auto t = Clock::now();
      const auto scores = rank_views(views, rank_entropy == "occupancy" ? EntropyMode::Occupancy : EntropyMode::Depth);
      r.time("rank", ms_since(t));
      std::string csv = "view_index,entropy_bits\n";
      for (const auto& s : scores) csv += std::to_string(s.view_index) + "," + csv_number(s.entropy_bits) + "\n";
      r.write("ranking.csv", csv);
      r.results()["best_view"] = scores.front().view_index;
      std::cout << csv << std::flush;
    } else if (cmd == features) {
      const auto opts = features_desc.build();
      const auto t = Clock::now();
      auto rows = gather_features(r, features_clouds, {}, opts);
      if (!features_dataset.empty()) {
        r.input(features_dataset);
        for (auto& [label, items] : load_dataset(features_dataset, opts).categories)
          for (auto& inst : items) rows.emplace_back(inst.id, inst.feature);
      }
      require(!rows.empty(), ErrorKind::Argument, "features needs --cloud or --dataset");
      r.time("describe", ms_since(t));
      std::ostringstream s;
      write_descriptors(s, rows);
      r.write("descriptors.csv", s.str());
      r.results()["rows"] = rows.size();
      progress("wrote " + std::to_string(rows.size()) + " descriptors");
    } else if (cmd == teach) {
      KnowledgeBase kb(teach_smoothing);
      if (!teach_kb.empty()) {
        r.input(teach_kb);
        kb = load_kb(read_text(teach_kb));
      }
      const auto opts = teach_desc.build();
      const auto rows = gather_features(r, teach_clouds, teach_features, opts);
      if (!rows.empty()) {
        require(!teach_label.empty(), ErrorKind::Argument, "--label is required with --cloud or --features");
        std::vector<FeatureVector> batch;
        for (const auto& row : rows) batch.push_back(row.second);
        kb.teach(teach_label, batch);
      }
      if (!teach_dataset.empty()) {
        r.input(teach_dataset);
        for (const auto& [label, items] : load_dataset(teach_dataset, opts).categories) {
          std::vector<FeatureVector> batch;
          for (const auto& inst : items) batch.push_back(inst.feature);
          kb.teach(label, batch);
        }
      }
      require(!rows.empty() || !teach_dataset.empty(), ErrorKind::Argument,
              "teach needs --cloud, --features or --dataset");
      r.write("kb.json", save_kb(kb));
      r.results()["categories"] = kb.category_count();
      r.results()["N"] = kb.total_instances();
      r.results()["kb_digest"] = kb_digest(kb);
      progress("knowledge base: " + std::to_string(kb.category_count()) + " categories, N = " +
               std::to_string(kb.total_instances()));
    } else if (cmd == classify) {
      r.input(classify_kb);
      const KnowledgeBase kb = load_kb(read_text(classify_kb));
      const auto t = Clock::now();
      const auto rows = gather_features(r, classify_clouds, classify_features, classify_desc.build());
      require(!rows.empty(), ErrorKind::Argument, "classify needs --cloud or --features");
      std::string csv = "id,predicted,log_score\n";
      for (const auto& [id, f] : rows) {
        const Prediction p = kb.classify(f);
        csv += id + "," + p.label + "," + csv_number(p.log_scores.at(p.label)) + "\n";
      }
      r.time("classify", ms_since(t));
      r.write("predictions.csv", csv);
      std::cout << csv << std::flush;
    } else if (cmd == protocol) {
      r.input(protocol_dataset);
      auto t = Clock::now();
      const DatasetHandle data = load_dataset(protocol_dataset, protocol_desc.build());
      r.time("load", ms_since(t));
      std::vector<ProtocolReport> reports;
      for (const auto s : parse_seeds(protocol_seeds)) {
        ProtocolConfig c = pconf;
        c.seed = s;
        t = Clock::now();
        reports.push_back(run_experiment(c, data));
        r.time("run_seed_" + std::to_string(s), ms_since(t));
        const auto& rep = reports.back();
        r.write("report_seed" + std::to_string(s) + ".json", report_to_json(rep).dump(2) + "\n");
        std::ostringstream tl;
        write_timeline_csv(tl, rep);
        r.write("timeline_seed" + std::to_string(s) + ".csv", tl.str());
        progress("seed " + std::to_string(s) + ": alc " + std::to_string(rep.alc) + ", qci " +
                 std::to_string(rep.qci) + ", stop " + std::string(to_string(rep.stop_reason)));
      }
      const auto summary = aggregate_runs(reports);
      std::ostringstream sum;
      write_summary_csv(sum, summary);
      r.write("summary.csv", sum.str());
      r.results()["runs"] = summary.runs;
      r.results()["breakpoint_stops"] = summary.breakpoint_stops;
      r.results()["lack_of_data_stops"] = summary.lack_of_data_stops;
    } else if (cmd == grasp) {
      r.input(grasp_cloud);
      const PointCloud cloud = load_cloud(grasp_cloud);
      const auto t = Clock::now();
      const GraspPlan plan = plan_grasp(cloud, grasp_flags.build(seed));
      r.time("plan", ms_since(t));
      const auto& view = plan.view();
      const double entropy = plan.ranking.front().entropy_bits;
      progress("selected view " + std::to_string(plan.selected_view) + " (entropy " + csv_number(entropy) +
               " bits)");
      r.results()["selected_view"] = plan.selected_view;
      r.results()["selected_entropy_bits"] = entropy;
      r.results()["rejected"] = plan.rejected;

      std::ostringstream gm, cands, dv;
      write_gmap(gm, plan.synthesis.map);
      r.write("grasp_map.gmap", gm.str());
      write_grasp_csv(cands, plan.synthesis.candidates);
      r.write("candidates.csv", cands.str());
      write_dview(dv, view);
      r.write("selected_view.dview", dv.str());
      if (!plan.best) {
        return report_error(kExitNoGrasp, "no collision-free grasp among " +
                                              std::to_string(plan.synthesis.candidates.size()) + " candidates");
      }
      std::ostringstream best;
      write_grasp_csv(best, std::span(&*plan.best, 1));
      r.write("best_grasp.csv", best.str());
      auto pose = [](const GraspPose& p) {
        auto v = [](const Eigen::Vector3d& x) { return json::array({x.x(), x.y(), x.z()}); };
        return json{{"position", v(p.position)}, {"closing_axis", v(p.axes.col(0))},
                    {"binormal", v(p.axes.col(1))}, {"approach_axis", v(p.axes.col(2))}, {"width_m", p.width}};
      };
      r.write("best_grasp.json", json{{"selected_view", plan.selected_view},
                                      {"u", plan.best->center_px.x()},
                                      {"v", plan.best->center_px.y()},
                                      {"rotation_rad", plan.best->rotation_rad},
                                      {"width_m", plan.best->width_m},
                                      {"quality", plan.best->quality},
                                      {"pose_object", pose(*plan.pose_object)},
                                      {"pose_world", pose(*plan.pose_world)}}
                                     .dump(2) + "\n");
      r.results()["quality"] = plan.best->quality;
      std::cout << best.str() << std::flush;
    } else if (cmd == serve) {
      ServiceConfig sc;
      sc.smoothing = serve_smoothing;
      sc.window_factor = serve_window;
      sc.grasp = serve_grasp.build(seed);
      if (!serve_state.empty()) sc.state_dir = serve_state;
      if (!serve_dataset.empty()) {
        r.input(serve_dataset);
        sc.dataset = load_dataset(serve_dataset, serve_desc.build());
      }
      if (!serve_objects.empty()) {
        r.input(serve_objects);
        for (const auto& e : fs::directory_iterator(serve_objects)) {
          const auto ext = e.path().extension();
          if (e.is_regular_file() && (ext == ".xyz" || ext == ".ply"))
            sc.objects.emplace(e.path().stem().string(), load_cloud(e.path()));
        }
      }
      Service service(std::move(sc));
      httplib::Server server;
      service.bind(server);
      int port = serve_port;
      if (port == 0) {
        port = server.bind_to_any_port(serve_host);
      } else {
        require(server.bind_to_port(serve_host, port), ErrorKind::Io,
                "cannot bind " + serve_host + ":" + std::to_string(port));
      }
      require(port > 0, ErrorKind::Io, "cannot bind " + serve_host);
      r.results()["host"] = serve_host;
      r.results()["port"] = port;
      r.finish(kExitOk);
      progress("listening on http://" + serve_host + ":" + std::to_string(port));
      server.listen_after_bind();
      return kExitOk;
    }
    r.finish(kExitOk);
    return kExitOk;
  } catch (const Error& e) {
    const int code = e.kind() == ErrorKind::Argument ? kExitArgument : kExitData;
    return report_error(code, std::string(to_string(e.kind())) + ": " + e.what());
  } catch (const std::exception& e) {
    return report_error(kExitData, e.what());
  }
}
