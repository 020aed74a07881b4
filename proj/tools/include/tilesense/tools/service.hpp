#pragma once

// Local HTTP service over the pipeline. Handlers are plain functions of the
// request so they can be exercised without a socket.

#include <filesystem>
#include <memory>
#include <string>

#include "tilesense/compose.hpp"
#include "tilesense/config.hpp"

namespace httplib {
class Server;
}

namespace tilesense::service {

inline constexpr std::size_t kMaxBodyBytes = 4u * 1024u * 1024u;

/// Immutable after construction; shared by all request threads.
struct ServiceState {
  PipelineConfig config;
  compose::TemplateRegistry registry;
  std::filesystem::path static_dir;  ///< empty = no static files

  explicit ServiceState(PipelineConfig cfg, std::filesystem::path static_root = {});
};

struct Reply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

Reply get_catalog(const ServiceState& state);
Reply get_templates(const ServiceState& state);
/// Body: SceneSpec JSON. Replies with PNG bytes.
Reply render_scene(const ServiceState& state, const std::string& body);
/// Body: SceneSpec JSON, or PNG bytes when `content_type` is image/png.
Reply detect(const ServiceState& state, const std::string& body, const std::string& content_type);
/// Body: {"template_id", "detections": [...] | "scene": SceneSpec, "tolerance"?}.
Reply compose_check(const ServiceState& state, const std::string& body);

/// httplib server with all routes installed (and static files mounted at /
/// when the state has a static dir). The state must outlive the server.
std::unique_ptr<httplib::Server> make_server(const ServiceState& state);

}  // namespace tilesense::service
