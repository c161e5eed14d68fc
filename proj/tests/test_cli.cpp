#include "support.hpp"

#include "lidarfcn/dataset.hpp"
#include "lidarfcn/render.hpp"

#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include <sys/wait.h>

using namespace lfcn;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LIDARFCN_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string capture_cli(const std::string& args, const fs::path& out) {
  const std::string cmd = std::string(LIDARFCN_CLI) + " " + args + " > " + out.string() + " 2>/dev/null";
  [[maybe_unused]] const int status = std::system(cmd.c_str());
  return testing::slurp(out);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(testing::slurp(p));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) f.push_back(tok);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    rows.push_back(f);
  }
  return rows;
}

std::vector<std::string> dir_files(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), dir).string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct Ppm {
  int width = 0, height = 0;
  std::string pixels;
};

Ppm read_ppm(const fs::path& p) {
  std::istringstream in(testing::slurp(p));
  std::string magic;
  int maxval = 0;
  Ppm img;
  in >> magic >> img.width >> img.height >> maxval;
  in.get();
  REQUIRE(magic == "P6");
  REQUIRE(maxval == 255);
  img.pixels.assign(std::istreambuf_iterator<char>(in), {});
  REQUIRE(img.pixels.size() == std::size_t(img.width) * img.height * 3);
  return img;
}

/// Toy projection and network, no augmentation, small iteration count.
struct Workspace {
  testing::TempDir dir{"cli"};
  fs::path config = dir / "toy.cfg";
  fs::path data = dir / "data";

  explicit Workspace(int scans, std::uint64_t seed = 7) {
    testing::spit(config, std::string(testing::kToyConfig) +
                              "augment.max_rotation_deg = 0\n"
                              "augment.max_translation_xy = 0\n"
                              "augment.max_translation_z = 0\n"
                              "train.iterations = 20\n");
    REQUIRE(run_cli("synth --count " + std::to_string(scans) + " --seed " + std::to_string(seed) +
                    " --out-dir " + data.string() + " --config " + config.string()) == 0);
  }
  std::string cfg() const { return " --config " + config.string(); }
};

std::vector<double> loss_column(const fs::path& csv) {
  std::vector<double> out;
  const auto rows = read_csv(csv);
  for (std::size_t i = 1; i < rows.size(); ++i) out.push_back(std::stod(rows[i][3]));
  return out;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("synth writes count frames and a manifest") {
    testing::TempDir dir("cli_synth");
    REQUIRE(run_cli("synth --count 5 --seed 7 --out-dir " + (dir / "a").string()) == 0);
    const auto ids = list_frames(dir / "a");
    CHECK(ids.size() == 5);
    for (const auto& id : ids) {
      CHECK(fs::exists(dir / "a" / "velodyne" / (id + ".bin")));
      CHECK(fs::exists(dir / "a" / "label_2" / (id + ".txt")));
      CHECK(fs::exists(dir / "a" / "calib" / (id + ".txt")));
    }
    CHECK(fs::exists(dir / "a" / "config.txt"));

    REQUIRE(run_cli("synth --count 5 --seed 7 --out-dir " + (dir / "b").string()) == 0);
    const auto files = dir_files(dir / "a");
    REQUIRE(files == dir_files(dir / "b"));
    for (const auto& f : files) CHECK(testing::slurp(dir / "a" / f) == testing::slurp(dir / "b" / f));

    REQUIRE(run_cli("synth --count 5 --seed 8 --out-dir " + (dir / "c").string()) == 0);
    CHECK(testing::slurp(dir / "a/velodyne/000000.bin") != testing::slurp(dir / "c/velodyne/000000.bin"));

    REQUIRE(run_cli("synth --count 0 --out-dir " + (dir / "empty").string()) == 0);
    CHECK(fs::exists(dir / "empty" / "manifest.txt"));
    CHECK(testing::slurp(dir / "empty" / "manifest.txt").empty());
    CHECK(list_frames(dir / "empty").empty());
  }

  TEST_CASE("usage and config errors exit 1") {
    testing::TempDir dir("cli_usage");
    CHECK(run_cli("") == 1);
    CHECK(run_cli("frobnicate") == 1);
    CHECK(run_cli("synth --count 1") == 1);
    CHECK(run_cli("synth --count 1 --out-dir " + (dir / "x").string() + " --set no.such.key=1") == 1);
    CHECK(run_cli("synth --count 1 --out-dir " + (dir / "x").string() + " --set projection.rows=abc") == 1);
    CHECK(run_cli("synth --count -1 --out-dir " + (dir / "x").string()) == 1);
    testing::spit(dir / "bad.cfg", "bogus = 3\n");
    CHECK(run_cli("synth --count 1 --out-dir " + (dir / "x").string() + " --config " + (dir / "bad.cfg").string()) ==
          1);
  }

  TEST_CASE("config text round trips and rejects unknown keys") {
    RunConfig a = testing::toy_config();
    a.set("train.iterations", "123");
    RunConfig b;
    b.merge_text(a.serialize());
    CHECK(b.serialize() == a.serialize());
    CHECK(b.get_int("train.iterations") == 123);
    CHECK(b.projection().rows == 32);
    CHECK_THROWS_AS(b.set("train.iteration", "1"), ConfigError);
    CHECK_THROWS_AS(b.merge_text("projection.rows 32\n"), ConfigError);
    CHECK_NOTHROW(b.merge_text("# comment\n\n  train.seed = 4  \n"));
    CHECK(b.get_uint("train.seed") == 4);
    CHECK_THROWS_AS(b.set_assignment("train.seed"), ConfigError);
  }

  TEST_CASE("train writes a run directory and resume continues numbering") {
    Workspace ws(3);
    const fs::path run = ws.dir / "run";
    REQUIRE(run_cli("train --data-dir " + ws.data.string() + " --out-dir " + run.string() + ws.cfg()) == 0);
    for (const char* f : {"config.txt", "loss.csv", "model.lfcn", "velocity.lfcn", "state.txt"}) {
      CHECK(fs::exists(run / f));
    }
    CHECK(loss_column(run / "loss.csv").size() == 20);
    CHECK(testing::slurp(run / "state.txt") == "20\n");
    RunConfig saved;
    saved.merge_file(run / "config.txt");
    CHECK(saved.get_int("projection.rows") == 32);
    CHECK(saved.get_double("loss.mean_vehicle_points") > 0.0);

    REQUIRE(run_cli("train --resume --data-dir " + ws.data.string() + " --out-dir " + run.string() +
                    " --set train.iterations=35") == 0);
    const auto rows = read_csv(run / "loss.csv");
    REQUIRE(rows.size() == 36);
    CHECK(rows[0][0] == "iteration");
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(std::stoi(rows[i][0]) == int(i - 1));
    CHECK(testing::slurp(run / "state.txt") == "35\n");

    // Rerunning from the saved config reproduces the first run bit for bit.
    const fs::path again = ws.dir / "again";
    REQUIRE(run_cli("train --data-dir " + ws.data.string() + " --out-dir " + again.string() + " --config " +
                    (run / "config.txt").string() + " --set train.iterations=20") == 0);
    const auto first = loss_column(run / "loss.csv");
    const auto second = loss_column(again / "loss.csv");
    REQUIRE(second.size() == 20);
    for (std::size_t i = 0; i < 20; ++i) CHECK(first[i] == second[i]);
  }

  TEST_CASE("train with zero learning rate gives a flat loss") {
    Workspace ws(1);
    const fs::path run = ws.dir / "flat";
    REQUIRE(run_cli("train --data-dir " + ws.data.string() + " --out-dir " + run.string() + ws.cfg() +
                    " --set train.learning_rate=0") == 0);
    const auto loss = loss_column(run / "loss.csv");
    REQUIRE(loss.size() == 20);
    for (double v : loss) CHECK(v == loss.front());
  }

  TEST_CASE("train on five scans, then detect recovers them") {
    Workspace ws(5, 3);
    const fs::path run = ws.dir / "fit";
    REQUIRE(run_cli("train --data-dir " + ws.data.string() + " --out-dir " + run.string() + ws.cfg() +
                    " --set train.iterations=5000 --set train.clip_norm=300") == 0);
    const auto loss = loss_column(run / "loss.csv");
    REQUIRE(loss.size() == 5000);
    double early = 0.0, late = 0.0;
    for (std::size_t i = 0; i < 100; ++i) {
      early += loss[i];
      late += loss[loss.size() - 100 + i];
    }
    CHECK(late < 0.2 * early);

    REQUIRE(run_cli("detect --checkpoint " + run.string() + " --data-dir " + ws.data.string() + " --out-dir " +
                    (ws.dir / "det").string()) == 0);
    REQUIRE(run_cli("eval --detections " + (ws.dir / "det").string() + " --groundtruth " + ws.data.string() +
                    " --criterion world --out-dir " + (ws.dir / "eval").string() + ws.cfg()) == 0);
    const auto rows = read_csv(ws.dir / "eval" / "metrics.csv");
    REQUIRE(rows.size() == 4);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      INFO("row ", rows[i][1]);
      if (!rows[i][2].empty()) CHECK(std::stod(rows[i][4]) >= 0.95);
    }
  }

  TEST_CASE("train errors") {
    Workspace ws(1);
    CHECK(run_cli("train --data-dir " + (ws.dir / "nothing").string() + " --out-dir " + (ws.dir / "r").string() +
                  ws.cfg()) == 2);
    CHECK(run_cli("train --data-dir " + ws.data.string() + " --out-dir " + (ws.dir / "r").string() + ws.cfg() +
                  " --set train.learning_rate=1e30 --set train.clip_norm=0") == 3);
  }

  TEST_CASE("detect is deterministic and needs a checkpoint") {
    Workspace ws(2);
    const fs::path run = ws.dir / "run";
    REQUIRE(run_cli("train --data-dir " + ws.data.string() + " --out-dir " + run.string() + ws.cfg()) == 0);
    // Low min_score so that an undertrained net still produces rows.
    const std::string args = "detect --checkpoint " + run.string() + " --data-dir " + ws.data.string() +
                             " --set nms.min_score=1 --out-dir ";
    REQUIRE(run_cli(args + (ws.dir / "d1").string()) == 0);
    REQUIRE(run_cli(args + (ws.dir / "d2").string()) == 0);
    for (const char* f : {"000000.csv", "000001.csv"}) {
      REQUIRE(fs::exists(ws.dir / "d1" / f));
      CHECK(testing::slurp(ws.dir / "d1" / f) == testing::slurp(ws.dir / "d2" / f));
      CHECK(read_csv(ws.dir / "d1" / f)[0][0] == "scan_id");
    }
    CHECK(run_cli("detect --checkpoint " + (ws.dir / "none.lfcn").string() + " --data-dir " + ws.data.string() +
                  " --out-dir " + (ws.dir / "d3").string()) == 2);
    // A checkpoint whose widths disagree with the config.
    CHECK(run_cli(args + (ws.dir / "d4").string() + " --set net.conv1=4") == 1);
  }

  TEST_CASE("eval of perfect and empty detections") {
    Workspace ws(6, 21);
    const fs::path perfect = ws.dir / "perfect";
    fs::create_directories(perfect);
    fs::create_directories(ws.dir / "none");
    std::size_t cars = 0;
    for (const auto& id : list_frames(ws.data)) {
      const Frame f = load_frame(ws.data, id);
      std::vector<Detection> dets;
      for (const auto& b : training_boxes(f)) {
        if (b.cls != BoxClass::Vehicle) continue;
        Detection d;
        d.box = b.box;
        d.score = 10;
        d.confidence = 0.9;
        dets.push_back(d);
        ++cars;
      }
      write_detections(perfect / (id + ".csv"), id, dets);
      write_detections(ws.dir / "none" / (id + ".csv"), id, {});
    }
    REQUIRE(cars > 0);

    REQUIRE(run_cli("eval --detections " + perfect.string() + " --groundtruth " + ws.data.string() +
                    " --criterion both --out-dir " + (ws.dir / "e1").string()) == 0);
    const auto rows = read_csv(ws.dir / "e1" / "metrics.csv");
    REQUIRE(rows.size() == 7);
    CHECK(rows[0] == std::vector<std::string>{"criterion", "difficulty", "AP", "AOS", "max_recall"});
    int world = 0, image = 0, scored = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      world += rows[i][0] == "world";
      image += rows[i][0] == "image";
      if (rows[i][2].empty()) continue;
      ++scored;
      CHECK(rows[i][2] == "1.000000");
      CHECK(rows[i][3] == "1.000000");
      CHECK(rows[i][4] == "1.000000");
    }
    CHECK(world == 3);
    CHECK(image == 3);
    CHECK(scored >= 2);
    for (const char* f : {"pr_world_easy.csv", "pr_image_moderate.csv", "pr_world_hard.csv"}) {
      CHECK(fs::exists(ws.dir / "e1" / f));
    }

    REQUIRE(run_cli("eval --detections " + (ws.dir / "none").string() + " --groundtruth " + ws.data.string() +
                    " --criterion world --out-dir " + (ws.dir / "e2").string()) == 0);
    const auto empty = read_csv(ws.dir / "e2" / "metrics.csv");
    REQUIRE(empty.size() == 4);
    for (std::size_t i = 1; i < empty.size(); ++i) {
      CHECK(empty[i][0] == "world");
      if (!empty[i][2].empty()) CHECK(empty[i][2] == "0.000000");
    }
    CHECK(run_cli("eval --detections " + perfect.string() + " --groundtruth " + ws.data.string() +
                  " --criterion sideways --out-dir " + (ws.dir / "e3").string()) == 1);
  }

  TEST_CASE("render scan lights exactly the occupied cells") {
    Workspace ws(1, 12);
    const fs::path out = ws.dir / "scan.ppm";
    REQUIRE(run_cli("render --data-dir " + ws.data.string() + " --frame 000000 --what scan --out " + out.string() +
                    ws.cfg()) == 0);
    const Ppm img = read_ppm(out);
    const RunConfig cfg = testing::toy_config();
    const ProjectionConfig proj = cfg.projection();
    REQUIRE(img.width == proj.cols);
    REQUIRE(img.height == proj.rows);
    const PointMap map = project_scan(load_frame(ws.data, "000000").scan, proj);
    REQUIRE(map.occupied_count() > 0);
    for (int row = 0; row < proj.rows; ++row) {
      for (int col = 0; col < proj.cols; ++col) {
        const std::size_t px = (std::size_t(proj.rows - 1 - row) * proj.cols + col) * 3;
        const bool lit = img.pixels[px] != 0 || img.pixels[px + 1] != 0 || img.pixels[px + 2] != 0;
        REQUIRE(lit == map.at(row, col).occupied);
      }
    }
    // Same bytes as rendering in-process, and on a second run.
    CHECK(testing::slurp(out) == encode_ppm(render_depth(map)));
    REQUIRE(run_cli("render --data-dir " + ws.data.string() + " --frame 000000 --what scan --out " +
                    (ws.dir / "again.ppm").string() + ws.cfg()) == 0);
    CHECK(testing::slurp(out) == testing::slurp(ws.dir / "again.ppm"));
  }

  TEST_CASE("render confidence and boxes") {
    Workspace ws(1, 13);
    const fs::path run = ws.dir / "run";
    REQUIRE(run_cli("train --data-dir " + ws.data.string() + " --out-dir " + run.string() + ws.cfg()) == 0);
    const fs::path conf = ws.dir / "conf.ppm";
    REQUIRE(run_cli("render --data-dir " + ws.data.string() + " --frame 000000 --what confidence --checkpoint " +
                    run.string() + " --out " + conf.string()) == 0);
    const Ppm img = read_ppm(conf);
    CHECK(img.width == 128);
    CHECK(img.height == 32);
    const fs::path boxes = ws.dir / "boxes.ppm";
    REQUIRE(run_cli("render --data-dir " + ws.data.string() + " --frame 000000 --what detections --out " +
                    boxes.string() + ws.cfg()) == 0);
    CHECK(read_ppm(boxes).width == 128);
    CHECK(run_cli("render --data-dir " + ws.data.string() + " --frame 000000 --what confidence --out " +
                  conf.string() + ws.cfg()) == 1);
    CHECK(run_cli("render --data-dir " + ws.data.string() + " --frame 000000 --what nothing --out " +
                  conf.string() + ws.cfg()) == 1);
  }

  TEST_CASE("gradcheck passes, lists layers, and catches corruption") {
    testing::TempDir dir("cli_grad");
    const std::string report = capture_cli("gradcheck --set gradcheck.samples=20", dir / "ok.txt");
    CHECK(run_cli("gradcheck --set gradcheck.samples=20") == 0);
    for (const char* layer : {"conv1", "conv2", "conv3", "deconv4", "deconv5a", "deconv6a", "deconv6b"}) {
      CHECK(report.find(layer) != std::string::npos);
    }
    CHECK(report.find("passed") != std::string::npos);
    CHECK(run_cli("gradcheck --set gradcheck.samples=20 --corrupt-layer deconv5a") == 3);
    const std::string bad =
        capture_cli("gradcheck --set gradcheck.samples=20 --corrupt-layer conv2", dir / "bad.txt");
    CHECK(bad.find("FAIL") != std::string::npos);
  }

  TEST_CASE("LIDARFCN_CONFIG supplies the default config") {
    testing::TempDir dir("cli_env");
    testing::spit(dir / "env.cfg", "synth.seed = 99\nprojection.rows = 32\nprojection.cols = 128\n"
                                   "projection.delta_theta_deg = 0.4\nprojection.delta_phi_deg = 0.8\n"
                                   "projection.phi_min_deg = -23.2\n");
    const std::string cmd = "LIDARFCN_CONFIG=" + (dir / "env.cfg").string() + " " + LIDARFCN_CLI +
                            " synth --count 1 --out-dir " + (dir / "out").string() + " > /dev/null 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    RunConfig saved;
    saved.merge_file(dir / "out" / "config.txt");
    CHECK(saved.get_uint("synth.seed") == 99);
    CHECK(saved.get_int("projection.rows") == 32);
  }
}
