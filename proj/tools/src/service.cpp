#include "tilesense/tools/service.hpp"

#include <stdexcept>
#include <utility>

#include "httplib.h"
#include "tilesense/detection.hpp"
#include "tilesense/image.hpp"
#include "tilesense/json_util.hpp"
#include "tilesense/refdetect.hpp"
#include "tilesense/scenegen.hpp"

namespace tilesense::service {

namespace {

namespace ju = json_util;

Reply json_reply(int status, const nlohmann::json& j) { return {status, "application/json", scenegen::dump_stable(j)}; }

Reply error_reply(int status, const std::string& message, const std::string& field = {}) {
  nlohmann::json j{{"error", message}};
  if (!field.empty()) j["field"] = field;
  return json_reply(status, j);
}

nlohmann::json parse_body(const std::string& body) {
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("$", std::string("invalid JSON: ") + e.what());
  }
}

scenegen::SceneSpec parse_scene(const ServiceState& state, const nlohmann::json& j) {
  scenegen::SceneSpec scene = scenegen::scene_from_json(j, state.config.catalog);
  if (scene.tiles.size() > 64) throw SchemaError("tiles", "at most 64 tiles");
  return scene;
}

// Shared error mapping: schema problems are the client's fault, anything else
// is ours.
template <typename Fn>
Reply guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const SchemaError& e) {
    return error_reply(400, e.what(), e.field());
  } catch (const std::invalid_argument& e) {
    return error_reply(400, e.what());
  } catch (const std::exception& e) {
    return error_reply(500, e.what());
  }
}

}  // namespace

ServiceState::ServiceState(PipelineConfig cfg, std::filesystem::path static_root)
    : config(std::move(cfg)), registry(config.catalog), static_dir(std::move(static_root)) {
  for (compose::CompositionTemplate& t : compose::builtin_templates(config.catalog)) {
    registry.register_template(std::move(t));
  }
}

Reply get_catalog(const ServiceState& state) { return json_reply(200, to_json(state.config.catalog)); }

Reply get_templates(const ServiceState& state) {
  nlohmann::json arr = nlohmann::json::array();
  for (const std::string& id : state.registry.ids()) arr.push_back(compose::to_json(state.registry.at(id)));
  return json_reply(200, arr);
}

Reply render_scene(const ServiceState& state, const std::string& body) {
  if (body.size() > kMaxBodyBytes) return error_reply(413, "request body over 4 MB");
  return guarded([&] {
    const scenegen::SceneSpec scene = parse_scene(state, parse_body(body));
    const std::vector<std::uint8_t> png = encode_png(scenegen::rasterize(scene, state.config.catalog));
    return Reply{200, "image/png", std::string(png.begin(), png.end())};
  });
}

Reply detect(const ServiceState& state, const std::string& body, const std::string& content_type) {
  if (body.size() > kMaxBodyBytes) return error_reply(413, "image over 4 MB");
  return guarded([&] {
    Image image;
    if (content_type.rfind("image/png", 0) == 0) {
      try {
        image = decode_png({reinterpret_cast<const std::uint8_t*>(body.data()), body.size()});
      } catch (const std::exception& e) {
        throw SchemaError("$", std::string("not a PNG image: ") + e.what());
      }
    } else {
      image = scenegen::rasterize(parse_scene(state, parse_body(body)), state.config.catalog);
    }
    const auto dets = tilesense::detect(image, state.config.catalog, state.config.detect);
    return json_reply(200, detections_to_json(dets));
  });
}

Reply compose_check(const ServiceState& state, const std::string& body) {
  if (body.size() > kMaxBodyBytes) return error_reply(413, "request body over 4 MB");
  return guarded([&] {
    const nlohmann::json j = parse_body(body);
    ju::require_object(j, "");
    ju::reject_unknown(j, "", {"template_id", "detections", "scene", "tolerance"});
    const std::string id = ju::string(j, "", "template_id");
    if (!state.registry.contains(id)) return error_reply(404, "unknown template '" + id + "'", "template_id");

    const bool has_dets = j.contains("detections");
    const bool has_scene = j.contains("scene");
    if (has_dets == has_scene) throw SchemaError("$", "exactly one of 'detections' or 'scene' is required");

    std::vector<Detection> dets;
    if (has_dets) {
      const auto& d = j["detections"];
      dets = detections_from_json(d.is_array() ? nlohmann::json{{"detections", d}} : d, state.config.catalog);
    } else {
      const Image image = scenegen::rasterize(parse_scene(state, j["scene"]), state.config.catalog);
      dets = tilesense::detect(image, state.config.catalog, state.config.detect);
    }

    compose::Tolerance tol = state.config.compose;
    if (j.contains("tolerance")) {
      const auto& t = j["tolerance"];
      ju::require_object(t, "tolerance");
      ju::reject_unknown(t, "tolerance", {"pos_tol", "theta_tol"});
      tol.pos_tol = ju::number_or(t, "tolerance", "pos_tol", tol.pos_tol);
      tol.theta_tol = ju::number_or(t, "tolerance", "theta_tol", tol.theta_tol);
      if (!(tol.pos_tol > 0.0)) throw SchemaError("tolerance.pos_tol", "must be > 0");
      if (!(tol.theta_tol > 0.0)) throw SchemaError("tolerance.theta_tol", "must be > 0");
    }

    const compose::CompositionResult result = compose::check_composition(dets, id, state.registry, tol);
    nlohmann::json out{{"result", compose::to_json(result)}, {"feedback", compose::feedback(result)}};
    if (has_scene) out["detections"] = detections_to_json(dets)["detections"];
    return json_reply(200, out);
  });
}

std::unique_ptr<httplib::Server> make_server(const ServiceState& state) {
  auto svr = std::make_unique<httplib::Server>();
  svr->set_payload_max_length(kMaxBodyBytes);

  auto send = [](httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  svr->Get("/catalog", [&state, send](const httplib::Request&, httplib::Response& res) { send(res, get_catalog(state)); });
  svr->Get("/templates",
           [&state, send](const httplib::Request&, httplib::Response& res) { send(res, get_templates(state)); });
  svr->Post("/scenes/render", [&state, send](const httplib::Request& req, httplib::Response& res) {
    send(res, render_scene(state, req.body));
  });
  svr->Post("/detect", [&state, send](const httplib::Request& req, httplib::Response& res) {
    send(res, detect(state, req.body, req.get_header_value("Content-Type")));
  });
  svr->Post("/compose/check", [&state, send](const httplib::Request& req, httplib::Response& res) {
    send(res, compose_check(state, req.body));
  });
  svr->set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const char* msg = res.status == 413 ? "request body over 4 MB" : res.status == 404 ? "not found" : "request failed";
    res.set_content(scenegen::dump_stable({{"error", msg}}), "application/json");
  });
  if (!state.static_dir.empty() && !svr->set_mount_point("/", state.static_dir.string())) {
    throw std::runtime_error("static directory not found: " + state.static_dir.string());
  }
  return svr;
}

}  // namespace tilesense::service
