#include <gtest/gtest.h>

#include <thread>

#include "httplib.h"
#include "tilesense/image.hpp"
#include "tilesense/scenegen.hpp"
#include "tilesense/tools/service.hpp"

namespace tilesense::service {
namespace {

std::string scene_body(std::uint64_t seed = 4) {
  return scenegen::to_json(scenegen::sample_scene(seed, scenegen::SceneConfig::clean())).dump();
}

class Handlers : public ::testing::Test {
 protected:
  ServiceState state{PipelineConfig{}};
};

TEST_F(Handlers, CatalogAndTemplates) {
  const Reply c = get_catalog(state);
  EXPECT_EQ(c.status, 200);
  EXPECT_EQ(nlohmann::json::parse(c.body).size(), 6u);
  const auto t = nlohmann::json::parse(get_templates(state).body);
  ASSERT_EQ(t.size(), 3u);
}

TEST_F(Handlers, RenderReturnsAPng) {
  const Reply r = render_scene(state, scene_body());
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.content_type, "image/png");
  const Image img = decode_png({reinterpret_cast<const std::uint8_t*>(r.body.data()), r.body.size()});
  EXPECT_EQ(img.width, 480);
}

TEST_F(Handlers, DetectAcceptsSceneOrPng) {
  const auto scene = scenegen::sample_scene(4, scenegen::SceneConfig::clean());
  const Reply from_scene = detect(state, scene_body(), "application/json");
  ASSERT_EQ(from_scene.status, 200);
  const Reply png = render_scene(state, scene_body());
  const Reply from_png = detect(state, png.body, "image/png");
  ASSERT_EQ(from_png.status, 200);
  EXPECT_EQ(from_scene.body, from_png.body);
  EXPECT_EQ(nlohmann::json::parse(from_png.body)["detections"].size(), scene.tiles.size());
}

TEST_F(Handlers, ClientErrors) {
  Reply r = render_scene(state, "{not json");
  EXPECT_EQ(r.status, 400);
  EXPECT_TRUE(nlohmann::json::parse(r.body).contains("error"));

  r = render_scene(state, R"({"tiles": [{"spec_id": "square_blue", "cx": 10, "cy": 10, "theta_deg": 0, "z": 1}]})");
  EXPECT_EQ(r.status, 400);
  EXPECT_NE(nlohmann::json::parse(r.body)["field"].get<std::string>().find("tiles[0]"), std::string::npos);

  EXPECT_EQ(detect(state, "garbage", "image/png").status, 400);
  EXPECT_EQ(detect(state, std::string(kMaxBodyBytes + 1, 'x'), "image/png").status, 413);
  EXPECT_EQ(compose_check(state, R"({"template_id": "pizza", "detections": []})").status, 404);
  EXPECT_EQ(compose_check(state, R"({"template_id": "house"})").status, 400);
  EXPECT_EQ(compose_check(state, R"({"template_id": "house", "detections": [], "tolerance": {"pos_tol": -1}})").status,
            400);
}

TEST_F(Handlers, ComposeCheckFromScene) {
  const auto scene = scenegen::sample_composition("house", {}, 3, state.registry, scenegen::SceneConfig::clean());
  const nlohmann::json body{{"template_id", "house"}, {"scene", scenegen::to_json(scene)}};
  const Reply r = compose_check(state, body.dump());
  ASSERT_EQ(r.status, 200) << r.body;
  const auto j = nlohmann::json::parse(r.body);
  EXPECT_TRUE(j["result"]["complete"].get<bool>());
  EXPECT_EQ(j["feedback"][0], "ingredient complete: house");
  EXPECT_EQ(j["detections"].size(), 2u);

  const nlohmann::json by_dets{{"template_id", "house"}, {"detections", j["detections"]}};
  const auto again = nlohmann::json::parse(compose_check(state, by_dets.dump()).body);
  EXPECT_TRUE(again["result"]["complete"].get<bool>());
}

TEST(Server, RoutesOverHttp) {
  const ServiceState state{PipelineConfig{}};
  auto server = make_server(state);
  const int port = server->bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread t([&] { server->listen_after_bind(); });
  server->wait_until_ready();

  httplib::Client cli("127.0.0.1", port);
  auto res = cli.Get("/catalog");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Content-Type"), "application/json");

  res = cli.Post("/scenes/render", scene_body(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");

  res = cli.Post("/detect", res->body, "image/png");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_TRUE(nlohmann::json::parse(res->body).contains("detections"));

  res = cli.Post("/compose/check", R"({"template_id": "nope", "detections": []})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);

  res = cli.Post("/detect", std::string(kMaxBodyBytes + 10, 'x'), "image/png");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 413);
  EXPECT_TRUE(nlohmann::json::parse(res->body).contains("error"));

  res = cli.Get("/nowhere");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);

  server->stop();
  t.join();
}

}  // namespace
}  // namespace tilesense::service
