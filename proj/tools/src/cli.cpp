#include "tilesense/tools/cli.hpp"

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "httplib.h"
#include "tilesense/bench.hpp"
#include "tilesense/config.hpp"
#include "tilesense/encoding.hpp"
#include "tilesense/eval.hpp"
#include "tilesense/image.hpp"
#include "tilesense/json_util.hpp"
#include "tilesense/refdetect.hpp"
#include "tilesense/rng.hpp"
#include "tilesense/scenegen.hpp"
#include "tilesense/tools/service.hpp"

namespace tilesense::cli {

namespace fs = std::filesystem;

namespace {

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

PipelineConfig config_or_default(const std::string& path) {
  return path.empty() ? PipelineConfig{} : load_config(path);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void emit(const nlohmann::json& j, const std::string& out_path, std::ostream& out) {
  const std::string text = scenegen::dump_stable(j);
  if (out_path.empty() || out_path == "-") {
    out << text;
  } else {
    write_text(out_path, text);
  }
}

int cmd_generate(std::size_t count, std::uint64_t seed, const std::string& out_dir, const std::string& mode,
                 int max_tiles, std::ostream& out) {
  scenegen::DatasetOptions opts;
  opts.scene.max_tiles = max_tiles;
  const scenegen::DatasetManifest m =
      scenegen::generate_dataset(count, seed, out_dir, scenegen::dataset_mode_from_string(mode), opts);
  out << "wrote " << m.count() - m.failures() << " of " << m.count() << " scenes to " << out_dir << "\n";
  if (m.failures()) {
    for (const auto& e : m.entries) {
      if (!e.error.empty()) out << "  " << e.image_path << ": " << e.error << "\n";
    }
    return kFailure;
  }
  return kOk;
}

int cmd_detect(const std::string& image_path, const std::string& out_path, const std::string& config_path,
               std::ostream& out) {
  const PipelineConfig cfg = config_or_default(config_path);
  if (fs::is_directory(image_path)) {
    if (out_path.empty()) throw std::invalid_argument("--out directory is required when --image is a directory");
    std::vector<fs::path> images;
    for (const auto& e : fs::directory_iterator(image_path)) {
      if (e.is_regular_file() && e.path().extension() == ".png") images.push_back(e.path());
    }
    std::sort(images.begin(), images.end());
    fs::create_directories(out_path);
    for (const fs::path& p : images) {
      const auto dets = detect(read_png(p.string()), cfg.catalog, cfg.detect);
      write_text(fs::path(out_path) / p.filename().replace_extension(".json"),
                 scenegen::dump_stable(detections_to_json(dets)));
    }
    out << "detected " << images.size() << " images into " << out_path << "\n";
    return kOk;
  }
  const auto dets = detect(read_png(image_path), cfg.catalog, cfg.detect);
  emit(detections_to_json(dets), out_path, out);
  return kOk;
}

int cmd_decode(const std::string& pred_path, const std::string& config_path, const std::string& out_path,
               std::ostream& out) {
  const PipelineConfig cfg = config_or_default(config_path);
  const PredictionTensor pred = load_predictions(pred_path);
  const auto dets = decode(pred, cfg.anchor_grid(), cfg.catalog, cfg.decode);
  emit(detections_to_json(dets), out_path, out);
  return kOk;
}

int cmd_eval(const std::string& pred, const std::string& gt, double tau, const std::string& out_path,
             std::ostream& out) {
  MatchConfig mc;
  mc.tau_vertex = tau;
  mc.validate();
  const EvalReport report = evaluate_dataset(pred, gt, mc, default_catalog());
  nlohmann::json j = to_json(report);
  j["tau_vertex"] = tau;
  emit(j, out_path, out);
  if (!out_path.empty() && out_path != "-") {
    char line[160];
    std::snprintf(line, sizeof line, "precision %.2f recall %.2f fscore %.2f (tp %zu, fp %zu, fn %zu)\n",
                  report.metrics.precision, report.metrics.recall, report.metrics.fscore, report.metrics.tp,
                  report.metrics.fp, report.metrics.fn);
    out << line;
  }
  return kOk;
}

int cmd_bench(const std::string& config_path, int iters, std::ostream& out) {
  const PipelineConfig cfg = config_or_default(config_path);
  scenegen::SceneConfig sc;
  sc.catalog = cfg.catalog;
  sc.width = cfg.width;
  sc.height = cfg.height;
  if (!cfg.bench.photometrics) sc.photometrics = scenegen::PhotometricRanges::none();
  std::vector<scenegen::SceneSpec> scenes;
  for (int i = 0; i < cfg.bench.images; ++i) {
    scenes.push_back(scenegen::sample_scene(derive_seed(cfg.scene_seed, static_cast<std::uint64_t>(i)), sc));
  }
  const TimingReport r = bench(cfg, scenes, iters > 0 ? iters : cfg.bench.iterations, cfg.bench.warmup);
  out << scenegen::dump_stable(to_json(r));
  return kOk;
}

int cmd_serve(int port, const std::string& static_dir, std::ostream& out) {
  const service::ServiceState state(PipelineConfig{}, static_dir);
  auto server = service::make_server(state);
  if (!server->bind_to_port("127.0.0.1", port)) throw std::runtime_error("cannot bind port " + std::to_string(port));
  g_server = server.get();
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  out << "serving on http://127.0.0.1:" << port << "\n" << std::flush;
  const bool ok = server->listen_after_bind();
  g_server = nullptr;
  return ok ? kOk : kFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic tile scenes, reference detection, decoding and evaluation"};
  app.name("tilesense");
  app.require_subcommand(1);

  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string mode = "random";
  int max_tiles = 8;
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
  gen->add_option("--count", count, "Number of scenes")->required();
  gen->add_option("--seed", seed, "Dataset seed");
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--mode", mode, "random | compositions | mixed")
      ->check(CLI::IsMember({"random", "compositions", "mixed"}));
  gen->add_option("--max-tiles", max_tiles, "Maximum tiles per random scene")->check(CLI::Range(1, 64));

  std::string image;
  std::string det_out;
  std::string det_config;
  auto* det = app.add_subcommand("detect", "Run the reference detector on a PNG or a directory of PNGs");
  det->add_option("--image", image, "PNG file or directory")->required();
  det->add_option("--out", det_out, "Output JSON file (directory for directory input)");
  det->add_option("--config", det_config, "Pipeline config JSON");

  std::string pred;
  std::string dec_config;
  std::string dec_out;
  auto* dec = app.add_subcommand("decode", "Decode an external prediction tensor");
  dec->add_option("--pred", pred, "Prediction tensor file")->required();
  dec->add_option("--config", dec_config, "Pipeline config JSON");
  dec->add_option("--out", dec_out, "Output JSON file");

  std::string eval_pred;
  std::string eval_gt;
  double tau = 5.0;
  std::string eval_out;
  auto* ev = app.add_subcommand("eval", "Score detections against annotations");
  ev->add_option("--pred", eval_pred, "Detections file or directory")->required();
  ev->add_option("--gt", eval_gt, "Annotation file, directory or dataset root")->required();
  ev->add_option("--tau", tau, "Vertex distance threshold in pixels");
  ev->add_option("--out", eval_out, "Report JSON file");

  std::string bench_config;
  int iters = 0;
  auto* bn = app.add_subcommand("bench", "Time the pipeline stages");
  bn->add_option("--config", bench_config, "Pipeline config JSON");
  bn->add_option("--iters", iters, "Timed iterations")->check(CLI::PositiveNumber);

  int port = 8080;
  std::string static_dir;
  auto* sv = app.add_subcommand("serve", "Run the local HTTP service");
  sv->add_option("--port", port, "TCP port")->check(CLI::Range(1, 65535));
  sv->add_option("--static", static_dir, "Directory served at /");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(count, seed, out_dir, mode, max_tiles, out);
    if (det->parsed()) return cmd_detect(image, det_out, det_config, out);
    if (dec->parsed()) return cmd_decode(pred, dec_config, dec_out, out);
    if (ev->parsed()) return cmd_eval(eval_pred, eval_gt, tau, eval_out, out);
    if (bn->parsed()) return cmd_bench(bench_config, iters, out);
    if (sv->parsed()) return cmd_serve(port, static_dir, out);
  } catch (const SchemaError& e) {
    err << "tilesense: config error: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    err << "tilesense: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace tilesense::cli
