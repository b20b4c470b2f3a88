#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "viewgrasp/pipeline.hpp"
#include "viewgrasp/protocol.hpp"

namespace httplib {
class Server;
}

namespace viewgrasp {

struct ServiceConfig {
  DatasetHandle dataset;
  std::map<std::string, PointCloud> objects;
  GraspPlanOptions grasp;
  double smoothing = KnowledgeBase::kDefaultSmoothing;
  int window_factor = 3;
  /// When set, every session's event log is written here after each change
  /// and reloaded on start.
  std::optional<std::filesystem::path> state_dir;
};

/// Folds teach and correct events into a fresh knowledge base.
KnowledgeBase replay_events(std::span<const TimelineEvent> events, const DatasetHandle& dataset,
                            double smoothing = KnowledgeBase::kDefaultSmoothing);

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// Teaching sessions and grasp previews behind a JSON API. handle() is the
/// transport-free entry point; bind() mounts it on an httplib server.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();

  ApiResponse handle(const std::string& method, const std::string& path, const std::string& body);
  void bind(httplib::Server& server);

  /// Digest of a session's knowledge base; NotFound for unknown ids.
  std::string session_digest(const std::string& id) const;
  std::vector<TimelineEvent> session_events(const std::string& id) const;

 private:
  struct Session;

  std::shared_ptr<Session> find_session(const std::string& id) const;
  nlohmann::json session_state(const Session& s) const;
  nlohmann::json session_metrics(const Session& s) const;
  const Instance& instance(const std::string& id) const;
  const PointCloud& object(const std::string& id) const;
  void persist(const Session& s) const;
  void restore();

  ApiResponse create_session();
  ApiResponse teach(Session& s, const nlohmann::json& body);
  ApiResponse ask(Session& s, const nlohmann::json& body);
  ApiResponse correct(Session& s, const nlohmann::json& body);
  ApiResponse list_objects() const;
  ApiResponse object_views(const std::string& id) const;
  ApiResponse object_grasp(const std::string& id, const nlohmann::json& body) const;

  ServiceConfig config_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  int next_session_ = 1;
};

}  // namespace viewgrasp
