#include "viewgrasp/service.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "httplib.h"

namespace viewgrasp {

using json = nlohmann::json;

namespace {

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotFound: return 404;
    case ErrorKind::Argument:
    case ErrorKind::Parse:
    case ErrorKind::Format: return 400;
    case ErrorKind::UnknownCategory:
    case ErrorKind::NoKnowledge: return 409;
    default: return 422;
  }
}

ApiResponse error_response(int status, std::string_view code, const std::string& message) {
  return {status, json{{"code", code}, {"message", message}}};
}

template <typename Derived>
json grid_json(const Eigen::DenseBase<Derived>& grid) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < grid.cols(); ++c) row.push_back(grid(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vec_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

json frame_json(const Eigen::Vector3d& origin, const Eigen::Matrix3d& axes) {
  return {{"origin", vec_json(origin)}, {"x", vec_json(axes.col(0))}, {"y", vec_json(axes.col(1))},
          {"z", vec_json(axes.col(2))}};
}

json pose_json(const GraspPose& pose) {
  json out = frame_json(pose.position, pose.axes);
  out["width_m"] = pose.width;
  return out;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  const std::string clean = path.substr(0, path.find('?'));
  std::istringstream in(clean);
  std::string part;
  while (std::getline(in, part, '/'))
    if (!part.empty()) parts.push_back(part);
  return parts;
}

std::string string_field(const json& body, const char* name) {
  require(body.contains(name) && body.at(name).is_string(), ErrorKind::Argument,
          std::string("field '") + name + "' must be a string");
  return body.at(name).get<std::string>();
}

}  // namespace

struct Service::Session {
  std::string id;
  mutable std::mutex mutex;
  KnowledgeBase kb;
  std::vector<TimelineEvent> events;
  std::vector<bool> results;  // answers since the last teach
  std::vector<double> window_accuracies;
  int iteration = 0;
  int asks = 0;
  int hits = 0;
  int window_factor = 3;

  Session(std::string id_, double smoothing, int wf) : id(std::move(id_)), kb(smoothing), window_factor(wf) {}

  std::optional<double> window_accuracy() const {
    return sliding_accuracy(results, std::max<int>(1, static_cast<int>(kb.category_count())), window_factor);
  }

  // Single mutation path for live requests and restores.
  void apply(const TimelineEvent& e, const FeatureVector& feature) {
    switch (e.event) {
      case EventKind::Teach:
        kb.teach(e.label, feature);
        results.clear();
        break;
      case EventKind::Correct:
        kb.correct(e.label, feature);
        break;
      case EventKind::Ask: {
        iteration = e.iteration;
        ++asks;
        const bool hit = e.correct.value_or(false);
        hits += hit ? 1 : 0;
        results.push_back(hit);
        if (results.size() >= kb.category_count())
          window_accuracies.push_back(*sliding_accuracy(results, static_cast<int>(kb.category_count()), window_factor));
        break;
      }
    }
    events.push_back(e);
  }
};

KnowledgeBase replay_events(std::span<const TimelineEvent> events, const DatasetHandle& dataset, double smoothing) {
  KnowledgeBase kb(smoothing);
  for (const auto& e : events) {
    if (e.event == EventKind::Ask) continue;
    const Instance* inst = dataset.find(e.instance_id);
    require(inst != nullptr, ErrorKind::NotFound, "unknown instance '" + e.instance_id + "'");
    if (e.event == EventKind::Teach)
      kb.teach(e.label, inst->feature);
    else
      kb.correct(e.label, inst->feature);
  }
  return kb;
}

Service::Service(ServiceConfig config) : config_(std::move(config)) {
  require(config_.window_factor >= 1, ErrorKind::Argument, "window factor must be at least 1");
  if (config_.state_dir) restore();
}

Service::~Service() = default;

std::shared_ptr<Service::Session> Service::find_session(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(id);
  require(it != sessions_.end(), ErrorKind::NotFound, "unknown session '" + id + "'");
  return it->second;
}

const Instance& Service::instance(const std::string& id) const {
  const Instance* inst = config_.dataset.find(id);
  require(inst != nullptr, ErrorKind::NotFound, "unknown instance '" + id + "'");
  return *inst;
}

const PointCloud& Service::object(const std::string& id) const {
  auto it = config_.objects.find(id);
  require(it != config_.objects.end(), ErrorKind::NotFound, "unknown object '" + id + "'");
  return it->second;
}

json Service::session_metrics(const Session& s) const {
  const auto k = static_cast<int>(s.kb.category_count());
  double apa = 0.0;
  for (double a : s.window_accuracies) apa += a;
  if (!s.window_accuracies.empty()) apa /= static_cast<double>(s.window_accuracies.size());
  const auto window = s.window_accuracy();
  return {{"qci", s.asks},
          {"alc", k},
          {"aic", k > 0 ? static_cast<double>(s.kb.total_instances()) / k : 0.0},
          {"gca", s.asks > 0 ? static_cast<double>(s.hits) / s.asks : 0.0},
          {"apa", apa},
          {"window_accuracy", window ? json(*window) : json(nullptr)},
          {"answers_since_teach", s.results.size()}};
}

json Service::session_state(const Session& s) const {
  json cats = json::array();
  for (const auto& [label, model] : s.kb.categories()) cats.push_back({{"label", label}, {"n", model.count}});
  return {{"id", s.id},
          {"K", s.kb.category_count()},
          {"N", s.kb.total_instances()},
          {"d", s.kb.dimension()},
          {"categories", cats},
          {"events", s.events.size()},
          {"iteration", s.iteration},
          {"kb_digest", kb_digest(s.kb)},
          {"metrics", session_metrics(s)}};
}

std::string Service::session_digest(const std::string& id) const {
  auto s = find_session(id);
  std::lock_guard lock(s->mutex);
  return kb_digest(s->kb);
}

std::vector<TimelineEvent> Service::session_events(const std::string& id) const {
  auto s = find_session(id);
  std::lock_guard lock(s->mutex);
  return s->events;
}

void Service::persist(const Session& s) const {
  if (!config_.state_dir) return;
  json events = json::array();
  for (const auto& e : s.events) events.push_back(event_to_json(e));
  const auto path = *config_.state_dir / (s.id + ".json");
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write session state " + tmp);
    out << json{{"id", s.id}, {"events", events}}.dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

void Service::restore() {
  namespace fs = std::filesystem;
  fs::create_directories(*config_.state_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(*config_.state_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    std::ifstream in(file);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      fail(ErrorKind::Format, "session state " + file.string() + ": " + e.what());
    }
    auto s = std::make_shared<Session>(doc.at("id").get<std::string>(), config_.smoothing, config_.window_factor);
    for (const auto& row : doc.at("events")) {
      const TimelineEvent e = event_from_json(row);
      s->apply(e, instance(e.instance_id).feature);
    }
    if (s->id.size() > 1 && s->id[0] == 's')
      next_session_ = std::max(next_session_, std::stoi(s->id.substr(1)) + 1);
    sessions_.emplace(s->id, std::move(s));
  }
}

ApiResponse Service::create_session() {
  std::shared_ptr<Session> s;
  {
    std::unique_lock lock(sessions_mutex_);
    s = std::make_shared<Session>("s" + std::to_string(next_session_++), config_.smoothing, config_.window_factor);
    sessions_.emplace(s->id, s);
  }
  std::lock_guard lock(s->mutex);
  persist(*s);
  return {201, session_state(*s)};
}

ApiResponse Service::teach(Session& s, const json& body) {
  const std::string label = string_field(body, "label");
  require(body.contains("instance_ids") && body.at("instance_ids").is_array() && !body.at("instance_ids").empty(),
          ErrorKind::Argument, "field 'instance_ids' must be a non-empty array");
  std::vector<const Instance*> batch;
  for (const auto& id : body.at("instance_ids")) {
    require(id.is_string(), ErrorKind::Argument, "instance ids must be strings");
    batch.push_back(&instance(id.get<std::string>()));
  }
  std::lock_guard lock(s.mutex);
  // Dry run so a bad batch leaves the session untouched.
  KnowledgeBase trial = s.kb;
  for (const Instance* inst : batch) trial.teach(label, inst->feature);
  for (const Instance* inst : batch)
    s.apply({s.iteration, EventKind::Teach, label, "", std::nullopt, inst->id}, inst->feature);
  persist(s);
  return {200, session_state(s)};
}

ApiResponse Service::ask(Session& s, const json& body) {
  const Instance& inst = instance(string_field(body, "instance_id"));
  const std::string truth = *config_.dataset.label_of(inst.id);
  std::lock_guard lock(s.mutex);
  require(!s.kb.empty(), ErrorKind::NoKnowledge, "no categories have been taught yet; teach one first");
  const Prediction pred = s.kb.classify(inst.feature);
  const bool hit = pred.label == truth;
  s.apply({s.iteration + 1, EventKind::Ask, truth, pred.label, hit, inst.id}, inst.feature);
  persist(s);
  const auto window = s.window_accuracy();
  return {200, json{{"instance_id", inst.id},
                    {"label", pred.label},
                    {"log_scores", pred.log_scores},
                    {"true_label", truth},
                    {"correct", hit},
                    {"iteration", s.iteration},
                    {"window_accuracy", window ? json(*window) : json(nullptr)},
                    {"metrics", session_metrics(s)}}};
}

ApiResponse Service::correct(Session& s, const json& body) {
  const std::string label = string_field(body, "label");
  const Instance& inst = instance(string_field(body, "instance_id"));
  std::lock_guard lock(s.mutex);
  require(s.kb.contains(label), ErrorKind::UnknownCategory, "unknown category '" + label + "'");
  s.apply({s.iteration, EventKind::Correct, label, "", std::nullopt, inst.id}, inst.feature);
  persist(s);
  return {200, session_state(s)};
}

ApiResponse Service::list_objects() const {
  json items = json::array();
  for (const auto& [id, cloud] : config_.objects)
    items.push_back({{"id", id}, {"points", cloud.size()}, {"has_normals", cloud.has_normals()}});
  return {200, json{{"objects", items}}};
}

ApiResponse Service::object_views(const std::string& id) const {
  const PointCloud& cloud = object(id);
  const auto& opt = config_.grasp;
  RenderOptions render;
  render.mode = ProjectionMode::FixedSize;
  render.bins = opt.bins;
  render.distance = opt.distance;
  render.fixed_side = opt.plane_side;
  const auto rendered = render_views(cloud, opt.setup, render);
  const auto ranking = rank_views(rendered.views, opt.entropy);
  json views = json::array();
  for (const auto& score : ranking) {
    const auto& v = rendered.views[static_cast<std::size_t>(score.view_index)];
    views.push_back({{"view_index", score.view_index},
                     {"entropy_bits", score.entropy_bits},
                     {"camera", frame_json(v.camera.pose.origin, v.camera.pose.axes)},
                     {"grid", grid_json(v.grid)}});
  }
  return {200, json{{"object_id", id},
                    {"setup", to_string(opt.setup.kind())},
                    {"mode", to_string(render.mode)},
                    {"bins", opt.bins},
                    {"plane_side", opt.plane_side},
                    {"views", views}}};
}

ApiResponse Service::object_grasp(const std::string& id, const json& body) const {
  const PointCloud& cloud = object(id);
  GraspPlanOptions opt = config_.grasp;
  if (body.contains("seed")) {
    require(body.at("seed").is_number_unsigned(), ErrorKind::Argument, "seed must be a non-negative integer");
    opt.seed = body.at("seed").get<std::uint64_t>();
  }
  if (body.contains("budget")) {
    require(body.at("budget").is_number_integer(), ErrorKind::Argument, "budget must be an integer");
    opt.budget = body.at("budget").get<int>();
  }
  const GraspPlan plan = plan_grasp(cloud, opt);
  const auto& view = plan.view();
  json best = nullptr;
  if (plan.best) {
    const auto& g = *plan.best;
    json corners = json::array();
    for (const auto& c : to_rect(g, view, opt.grip).corners()) corners.push_back({c.x(), c.y()});
    best = {{"u", g.center_px.x()},
            {"v", g.center_px.y()},
            {"rotation_rad", g.rotation_rad},
            {"width_m", g.width_m},
            {"quality", g.quality},
            {"rect_corners", corners},
            {"pose_object", pose_json(*plan.pose_object)},
            {"pose_world", pose_json(*plan.pose_world)}};
  }
  const auto& map = plan.synthesis.map;
  return {200, json{{"object_id", id},
                    {"seed", opt.seed},
                    {"budget", opt.budget},
                    {"selected_view", plan.selected_view},
                    {"view_grid", grid_json(view.grid)},
                    {"map", {{"quality", grid_json(map.quality)},
                             {"rotation", grid_json(map.rotation)},
                             {"width", grid_json(map.width)}}},
                    {"best", best},
                    {"rejected", plan.rejected}}};
}

ApiResponse Service::handle(const std::string& method, const std::string& path, const std::string& body) {
  try {
    const auto parts = split_path(path);
    json doc = json::object();
    if (method == "POST" && !body.empty()) {
      try {
        doc = json::parse(body);
      } catch (const json::exception& e) {
        fail(ErrorKind::Parse, std::string("request body is not valid JSON: ") + e.what());
      }
      require(doc.is_object(), ErrorKind::Argument, "request body must be a JSON object");
    }
    const auto n = parts.size();
    if (n >= 1 && parts[0] == "sessions") {
      if (n == 1 && method == "POST") return create_session();
      if (n >= 2) {
        auto s = find_session(parts[1]);
        if (n == 2 && method == "GET") {
          std::lock_guard lock(s->mutex);
          return {200, session_state(*s)};
        }
        if (n == 3 && method == "GET" && parts[2] == "metrics") {
          std::lock_guard lock(s->mutex);
          return {200, session_metrics(*s)};
        }
        if (n == 3 && method == "POST") {
          if (parts[2] == "teach") return teach(*s, doc);
          if (parts[2] == "ask") return ask(*s, doc);
          if (parts[2] == "correct") return correct(*s, doc);
        }
      }
    } else if (n >= 1 && parts[0] == "objects") {
      if (n == 1 && method == "GET") return list_objects();
      if (n == 3 && method == "GET" && parts[2] == "views") return object_views(parts[1]);
      if (n == 3 && method == "POST" && parts[2] == "grasp") return object_grasp(parts[1], doc);
    }
    return error_response(404, "not-found", "no route for " + method + " " + path);
  } catch (const Error& e) {
    return error_response(http_status(e.kind()), to_string(e.kind()), e.what());
  } catch (const json::exception& e) {
    return error_response(400, "argument", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

void Service::bind(httplib::Server& server) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    const ApiResponse out = handle(req.method, req.path, req.body);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  server.Get(".*", handler);
  server.Post(".*", handler);
}

}  // namespace viewgrasp
