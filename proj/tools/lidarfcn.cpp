// Command-line front end: synth, train, detect, eval, render, gradcheck.

#include "lidarfcn/checkpoint.hpp"
#include "lidarfcn/config.hpp"
#include "lidarfcn/dataset.hpp"
#include "lidarfcn/detector.hpp"
#include "lidarfcn/gradcheck.hpp"
#include "lidarfcn/pipeline.hpp"
#include "lidarfcn/render.hpp"
#include "lidarfcn/synth.hpp"
#include "lidarfcn/trainer.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace lfcn;

namespace {

struct ConfigFlags {
  std::string config_file;
  std::vector<std::string> overrides;

  void add_to(CLI::App* app) {
    app->add_option("--config", config_file, "key = value config file (default: $LIDARFCN_CONFIG)");
    app->add_option("--set", overrides, "override one key, e.g. --set train.iterations=500");
  }

  /// defaults -> optional base file -> --config (or the environment) -> --set
  RunConfig resolve(const std::optional<fs::path>& base = std::nullopt) const {
    RunConfig cfg;
    if (base && fs::exists(*base)) cfg.merge_file(*base);
    if (!config_file.empty()) {
      cfg.merge_file(config_file);
    } else if (const auto env = default_config_path()) {
      cfg.merge_file(*env);
    }
    for (const auto& o : overrides) cfg.set_assignment(o);
    return cfg;
  }
};

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// A run directory stands for its model.lfcn.
fs::path model_path(const fs::path& checkpoint) {
  return fs::is_directory(checkpoint) ? checkpoint / "model.lfcn" : checkpoint;
}

Network<float> load_network(const fs::path& given, const RunConfig& cfg) {
  const fs::path checkpoint = model_path(given);
  if (!fs::exists(checkpoint)) throw DataError("checkpoint " + checkpoint.string() + " does not exist");
  Network<float> net(NetworkSpec::fcn(cfg.network()));
  net.set_params(load_checkpoint(checkpoint, net.spec()));
  return net;
}

int run_synth(int count, std::uint64_t seed, bool seed_given, const fs::path& out, const ConfigFlags& flags) {
  RunConfig cfg = flags.resolve();
  if (seed_given) cfg.set("synth.seed", std::to_string(seed));
  if (count < 0) throw ConfigError("--count must be >= 0");
  const ProjectionConfig proj = cfg.projection();
  const SceneConfig scene_cfg = cfg.scene();
  std::vector<SceneSpec> scenes;
  for (int i = 0; i < count; ++i) {
    scenes.push_back(generate_scene(scene_cfg, scene_seed(cfg.get_uint("synth.seed"), std::size_t(i))));
  }
  make_dir(out);
  write_dataset(scenes, proj, out, cfg.synth_labels());
  cfg.write(out / "config.txt");
  spdlog::info("wrote {} scenes to {}", count, out.string());
  return 0;
}

struct TrainFlags {
  std::string data;
  std::string out;
  bool resume = false;
};

int run_train(const TrainFlags& f, const ConfigFlags& flags) {
  const fs::path out(f.out);
  const fs::path model = out / "model.lfcn";
  const fs::path velocity = out / "velocity.lfcn";
  const fs::path state_file = out / "state.txt";
  RunConfig cfg = flags.resolve(f.resume ? std::optional<fs::path>(out / "config.txt") : std::nullopt);

  const auto data = load_training_set(f.data);
  if (data.empty()) throw DataError("no frames in " + f.data);
  TrainConfig tc = cfg.train();
  if (tc.loss.mean_vehicle_points <= 0.0) {
    tc.loss.mean_vehicle_points = mean_vehicle_points(data, tc.projection, tc.label_margin);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", tc.loss.mean_vehicle_points);
    cfg.set("loss.mean_vehicle_points", buf);
  }
  spdlog::info("{} training scans, mean vehicle points {:.2f}", data.size(), tc.loss.mean_vehicle_points);

  Network<float> net(NetworkSpec::fcn(cfg.network()));
  net.spec().infer_shapes(tc.projection.rows, tc.projection.cols);
  TrainState state;
  if (f.resume) {
    net.set_params(load_checkpoint(model, net.spec()));
    if (fs::exists(velocity)) state.velocity = load_checkpoint(velocity, net.spec());
    state.iteration = std::stoi(read_text(state_file));
    spdlog::info("resuming at iteration {}", state.iteration);
  } else {
    net.initialize(tc.seed);
  }
  make_dir(out);
  cfg.write(out / "config.txt");

  std::ofstream log(out / "loss.csv", f.resume ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot write " + (out / "loss.csv").string());
  if (!f.resume) log << loss_log_header() << '\n';
  double window = 0.0, window_acc = 0.0;
  int in_window = 0;
  train(data, net, tc, state, [&](const IterationStats& s) {
    log << loss_log_row(s) << '\n';
    window += s.total;
    window_acc += s.accuracy;
    if (++in_window == 100 || s.iteration + 1 == tc.iterations) {
      spdlog::info("iteration {:6d}  loss {:10.4f}  accuracy {:.4f}", s.iteration + 1, window / in_window,
                   window_acc / in_window);
      window = window_acc = 0.0;
      in_window = 0;
    }
  });
  save_checkpoint(net.params(), net.spec(), model);
  if (!state.velocity.empty()) save_checkpoint(state.velocity, net.spec(), velocity);
  write_text(state_file, std::to_string(state.iteration) + "\n");
  spdlog::info("saved {}", model.string());
  return 0;
}

int run_detect(const std::string& checkpoint, const std::string& data_dir, const fs::path& out,
               const ConfigFlags& flags) {
  const RunConfig cfg = flags.resolve(model_path(checkpoint).parent_path() / "config.txt");
  const Network<float> net = load_network(checkpoint, cfg);
  const DetectorConfig dc = cfg.detector();
  make_dir(out);
  cfg.write(out / "config.txt");
  std::size_t total = 0;
  for (const auto& id : list_frames(data_dir)) {
    const Frame frame = load_frame(data_dir, id);
    std::vector<Detection> dets;
    if (!frame.scan.empty()) dets = detect(net, frame.scan, dc).detections;
    write_detections(out / (id + ".csv"), id, dets);
    total += dets.size();
  }
  spdlog::info("{} detections written to {}", total, out.string());
  return 0;
}

int run_eval(const std::string& det_dir, const std::string& gt_dir, const std::string& criterion,
             const fs::path& out, const ConfigFlags& flags) {
  const RunConfig cfg = flags.resolve();
  EvalSettings s;
  s.difficulty = cfg.difficulty();
  s.mode = parse_difficulty_mode(cfg.get("eval.difficulty"));
  s.threshold = cfg.get_double("eval.threshold");
  if (cfg.get_bool("eval.clip_to_image")) {
    s.image_size = std::make_pair(cfg.get_double("eval.image_width"), cfg.get_double("eval.image_height"));
  } else {
    s.image_size.reset();
  }
  std::vector<Criterion> criteria;
  if (criterion == "world" || criterion == "both") criteria.push_back(Criterion::World);
  if (criterion == "image" || criterion == "both") criteria.push_back(Criterion::Image);
  if (criteria.empty()) throw ConfigError("--criterion must be world, image or both");

  std::vector<EvalFrame> frames;
  for (const auto& id : list_frames(gt_dir)) {
    const Frame frame = load_frame(gt_dir, id);
    EvalFrame ef;
    ef.groundtruth = groundtruth_objects(frame, s);
    const fs::path det_file = fs::path(det_dir) / (id + ".csv");
    if (fs::exists(det_file)) {
      for (const auto& r : read_detections(det_file)) {
        ef.detections.push_back(to_eval_detection(r.box, r.confidence, frame.calib, s));
      }
    } else {
      spdlog::warn("no detection file for frame {}", id);
    }
    frames.push_back(std::move(ef));
  }

  std::vector<MetricsRow> rows;
  for (Criterion c : criteria) {
    for (Difficulty d : {Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard}) {
      rows.push_back(evaluate(frames, c, d, s.threshold));
    }
  }
  make_dir(out);
  cfg.write(out / "config.txt");
  const std::string table = metrics_csv(rows);
  write_text(out / "metrics.csv", table);
  for (const auto& r : rows) {
    write_text(out / ("pr_" + to_string(r.criterion) + "_" + to_string(r.difficulty) + ".csv"),
               pr_curve_csv(r.curve));
  }
  std::cout << table;
  return 0;
}

struct RenderFlags {
  std::string data;
  std::string frame;
  std::string what = "scan";
  std::string checkpoint;
  std::string detections;
  std::string out;
};

int run_render(const RenderFlags& f, const ConfigFlags& flags) {
  const std::optional<fs::path> base =
      f.checkpoint.empty() ? std::nullopt : std::optional<fs::path>(model_path(f.checkpoint).parent_path() / "config.txt");
  const RunConfig cfg = flags.resolve(base);
  const ProjectionConfig proj = cfg.projection();
  const Frame frame = load_frame(f.data, f.frame);
  const PointMap map = project_scan(frame.scan, proj);

  Image img;
  if (f.what == "scan") {
    img = render_depth(map);
  } else if (f.what == "confidence") {
    if (f.checkpoint.empty()) throw ConfigError("render confidence needs --checkpoint");
    const Network<float> net = load_network(f.checkpoint, cfg);
    const auto result = detect(net, frame.scan, cfg.detector());
    img = render_confidence(result.objectness, result.map);
  } else if (f.what == "detections") {
    img = render_depth(map);
    for (const auto& b : training_boxes(frame)) {
      draw_box(img, b.box, proj, b.cls == BoxClass::Vehicle ? std::array<std::uint8_t, 3>{255, 40, 40}
                                                           : std::array<std::uint8_t, 3>{200, 160, 0});
    }
    std::vector<Box3D> boxes;
    if (!f.detections.empty()) {
      for (const auto& r : read_detections(fs::path(f.detections) / (f.frame + ".csv"))) boxes.push_back(r.box);
    } else if (!f.checkpoint.empty()) {
      const Network<float> net = load_network(f.checkpoint, cfg);
      for (const auto& d : detect(net, frame.scan, cfg.detector()).detections) boxes.push_back(d.box);
    }
    for (const auto& b : boxes) draw_box(img, b, proj, {40, 255, 40});
  } else {
    throw ConfigError("render target must be scan, confidence or detections");
  }
  write_ppm(f.out, img);
  spdlog::info("wrote {} ({}x{})", f.out, img.width, img.height);
  return 0;
}

int run_gradcheck(const std::string& corrupt, const ConfigFlags& flags) {
  const RunConfig cfg = flags.resolve();
  GradcheckOptions o;
  o.rows = cfg.get_int("gradcheck.rows");
  o.cols = cfg.get_int("gradcheck.cols");
  o.net = FcnOptions::with_widths(cfg.get_int("gradcheck.conv1"), cfg.get_int("gradcheck.conv2"),
                                  cfg.get_int("gradcheck.conv3"));
  o.samples = cfg.get_int("gradcheck.samples");
  o.epsilon = cfg.get_double("gradcheck.epsilon");
  o.tolerance = cfg.get_double("gradcheck.tolerance");
  o.seed = cfg.get_uint("gradcheck.seed");
  o.corrupt_layer = corrupt;
  const GradcheckReport report = run_gradcheck(o);
  std::cout << report.format();
  return report.passed() ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lidar vehicle detection with a fully convolutional network"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("--verbose", verbose, "debug logging");

  ConfigFlags flags;
  int count = 0;
  std::uint64_t seed = 0;
  std::string out_dir;
  auto* synth = app.add_subcommand("synth", "write a synthetic KITTI-layout dataset");
  synth->add_option("--count", count, "number of scenes")->required();
  auto* seed_opt = synth->add_option("--seed", seed, "dataset seed (synth.seed)");
  synth->add_option("--out-dir", out_dir, "output directory")->required();
  flags.add_to(synth);

  TrainFlags tf;
  auto* trainc = app.add_subcommand("train", "train the network");
  trainc->add_option("--data-dir", tf.data, "training dataset")->required();
  trainc->add_option("--out-dir", tf.out, "run directory")->required();
  trainc->add_flag("--resume", tf.resume, "continue the run in --out-dir");
  flags.add_to(trainc);

  std::string checkpoint, data_dir;
  auto* detectc = app.add_subcommand("detect", "write per-scan detection CSVs");
  detectc->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  detectc->add_option("--data-dir", data_dir, "dataset to run on")->required();
  detectc->add_option("--out-dir", out_dir, "output directory")->required();
  flags.add_to(detectc);

  std::string det_dir, gt_dir, criterion = "both";
  auto* evalc = app.add_subcommand("eval", "AP and AOS of detections against groundtruth");
  evalc->add_option("--detections", det_dir, "detection CSV directory")->required();
  evalc->add_option("--groundtruth", gt_dir, "dataset with label_2/")->required();
  evalc->add_option("--criterion", criterion, "world, image or both");
  evalc->add_option("--out-dir", out_dir, "report directory")->required();
  flags.add_to(evalc);

  RenderFlags rf;
  auto* renderc = app.add_subcommand("render", "PPM images of a scan, its confidence map or boxes");
  renderc->add_option("--data-dir", rf.data, "dataset")->required();
  renderc->add_option("--frame", rf.frame, "frame id")->required();
  renderc->add_option("--what", rf.what, "scan, confidence or detections");
  renderc->add_option("--checkpoint", rf.checkpoint, "model checkpoint");
  renderc->add_option("--detections", rf.detections, "detection CSV directory");
  renderc->add_option("--out", rf.out, "output .ppm")->required();
  flags.add_to(renderc);

  std::string corrupt;
  auto* gradc = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  gradc->add_option("--corrupt-layer", corrupt, "scale one layer's analytic gradient (test hook)");
  flags.add_to(gradc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  spdlog::set_pattern("[%H:%M:%S] %^%l%$ %v");
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*synth) return run_synth(count, seed, seed_opt->count() > 0, out_dir, flags);
    if (*trainc) return run_train(tf, flags);
    if (*detectc) return run_detect(checkpoint, data_dir, out_dir, flags);
    if (*evalc) return run_eval(det_dir, gt_dir, criterion, out_dir, flags);
    if (*renderc) return run_render(rf, flags);
    if (*gradc) return run_gradcheck(corrupt, flags);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const NumericError& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 1;
}
