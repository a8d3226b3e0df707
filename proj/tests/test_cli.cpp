// End-to-end tests of the command-line tool: each case drives the built
// binary through a shell invocation against synthetic PGM sequences and
// checks outputs, exit codes, and byte-level reproducibility.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dyntex/model_io.hpp"
#include "dyntex/video_io.hpp"
#include "support/synthetic.hpp"

#ifndef DYNTEX_CLI_PATH
#error "DYNTEX_CLI_PATH must point at the built binary"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
namespace ts = testsupport;

namespace {

struct RunResult {
  int exit_code = -1;
};

RunResult run_cli(const std::string& args) {
  const std::string command = std::string(DYNTEX_CLI_PATH) + " " + args + " 2>/dev/null";
  const int status = std::system(command.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

fs::path make_temp_dir(const char* tag) {
  static std::mt19937_64 rng(std::random_device{}());
  const fs::path dir =
      fs::temp_directory_path() / ("dyntex_cli_" + std::string(tag) + "_" + std::to_string(rng()));
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// A small planted sequence written as PGM frames; returns the frames dir.
fs::path write_frames(const fs::path& root, std::uint64_t seed, int frames = 24) {
  const auto planted = ts::make_flicker(8, 8, 5, frames, 0.01, seed);
  const fs::path dir = root / "frames";
  dyntex::save_sequence(ts::to_sequence(planted), dir);
  return dir;
}

} // namespace

TEST_CASE("cli: identical train runs produce byte-identical model and history") {
  const auto root = make_temp_dir("repro");
  const auto frames = write_frames(root, 201);
  const std::string common = "train --frames " + frames.string() +
                             " --kind avdl --k 6 --loops 5 --lambda1 0.05 --lambda2 0.003 "
                             "--seed 9 --out ";
  CHECK(run_cli(common + (root / "a").string()).exit_code == 0);
  CHECK(run_cli(common + (root / "b").string()).exit_code == 0);

  CHECK(slurp(root / "a" / "model.bin") == slurp(root / "b" / "model.bin"));
  CHECK(slurp(root / "a" / "history.csv") == slurp(root / "b" / "history.csv"));

  // The echoes agree on everything except where they were told to write.
  json echo_a = json::parse(slurp(root / "a" / "config.json"));
  json echo_b = json::parse(slurp(root / "b" / "config.json"));
  echo_a.erase("out");
  echo_b.erase("out");
  CHECK(echo_a == echo_b);
  fs::remove_all(root);
}

TEST_CASE("cli: zero loops serialize the initialization with an empty history") {
  const auto root = make_temp_dir("zero");
  const auto frames = write_frames(root, 202);
  const std::string common = "train --frames " + frames.string() +
                             " --kind avdl --k 5 --loops 0 --lambda1 0.05 --lambda2 0.003 "
                             "--seed 3 --out ";
  CHECK(run_cli(common + (root / "out").string()).exit_code == 0);
  const auto model = dyntex::load_model(root / "out" / "model.bin");
  const auto& avdl = std::get<dyntex::AvdlModel>(model);
  CHECK(avdl.history.empty());
  CHECK(slurp(root / "out" / "history.csv") == "loop,objective,step,sigma,nnz_fraction\n");

  // The file is exactly the serialized seeded initialization: a second run
  // reproduces it byte for byte.
  CHECK(run_cli(common + (root / "again").string()).exit_code == 0);
  CHECK(slurp(root / "out" / "model.bin") == slurp(root / "again" / "model.bin"));
  fs::remove_all(root);
}

TEST_CASE("cli: lds training records the exact compression rate") {
  const auto root = make_temp_dir("lds");
  const auto frames = write_frames(root, 203, 30);
  const auto run = run_cli("train --frames " + frames.string() + " --kind lds --k 4 --out " +
                           (root / "out").string());
  CHECK(run.exit_code == 0);

  const auto model = dyntex::load_model(root / "out" / "model.bin");
  const auto& lds = std::get<dyntex::LdsModel>(model);
  // k/m in the model metadata: 4 / 64.
  CHECK(static_cast<double>(lds.pcs.cols()) / lds.pcs.rows() == 0.0625);
  const std::string history = slurp(root / "out" / "history.csv");
  CHECK(history.find("0.0625") != std::string::npos);
  fs::remove_all(root);
}

TEST_CASE("cli: eval reproduces the final history row of the model it loads") {
  const auto root = make_temp_dir("eval");
  const auto frames = write_frames(root, 204);
  REQUIRE(run_cli("train --frames " + frames.string() +
                  " --kind avdl --k 6 --loops 4 --lambda1 0.05 --lambda2 0.003 --seed 2 --out " +
                  (root / "train").string())
              .exit_code == 0);
  REQUIRE(run_cli("eval --model " + (root / "train" / "model.bin").string() + " --frames " +
                  frames.string() + " --out " + (root / "eval").string())
              .exit_code == 0);

  const auto metrics = json::parse(slurp(root / "eval" / "metrics.json"));
  const auto model = dyntex::load_model(root / "train" / "model.bin");
  const auto& last = std::get<dyntex::AvdlModel>(model).history.back();
  CHECK(std::abs(metrics.at("sigma").get<double>() - last.sigma) <= 1e-9);
  CHECK(std::abs(metrics.at("compression_rate").get<double>() - last.nnz_fraction) <= 1e-9);

  const std::string row_csv = slurp(root / "eval" / "metrics_row.csv");
  CHECK(row_csv.rfind("model_kind,loops_or_k,compression_rate,sigma,e_y,e_x\n", 0) == 0);
  CHECK(row_csv.find("avdl,4,") != std::string::npos);
  fs::remove_all(root);
}

TEST_CASE("cli: synth writes the requested frames; plain equals lasso at lambda zero") {
  const auto root = make_temp_dir("synth");
  const auto frames = write_frames(root, 205);
  REQUIRE(run_cli("train --frames " + frames.string() +
                  " --kind avdl --k 6 --loops 3 --lambda1 0.05 --lambda2 0.003 --seed 4 --out " +
                  (root / "train").string())
              .exit_code == 0);
  const std::string model_arg = " --model " + (root / "train" / "model.bin").string() +
                                " --frames " + frames.string();

  REQUIRE(run_cli("synth" + model_arg + " --length 1 --out " + (root / "one").string())
              .exit_code == 0);
  CHECK(fs::exists(root / "one" / "frames" / "000000.pgm"));
  CHECK(!fs::exists(root / "one" / "frames" / "000001.pgm"));

  REQUIRE(run_cli("synth" + model_arg + " --length 8 --mode plain --out " +
                  (root / "plain").string())
              .exit_code == 0);
  REQUIRE(run_cli("synth" + model_arg + " --length 8 --mode lasso --lasso-lambda 0 --out " +
                  (root / "lasso").string())
              .exit_code == 0);
  for (int i = 0; i < 8; ++i) {
    char name[16];
    std::snprintf(name, sizeof(name), "%06d.pgm", i);
    CHECK(slurp(root / "plain" / "frames" / name) == slurp(root / "lasso" / "frames" / name));
  }

  const auto metrics = json::parse(slurp(root / "plain" / "metrics.json"));
  CHECK(metrics.at("sigma").get<double>() >= 0.0);
  CHECK(std::isfinite(metrics.at("e_y").get<double>()));
  fs::remove_all(root);
}

TEST_CASE("cli: reconstruct with gaussian corruption improves the error against the reference") {
  const auto root = make_temp_dir("rec");
  const auto planted = ts::make_sparse_planted(16, 16, 16, 3, 24, 206);
  const fs::path frames = root / "frames";
  dyntex::save_sequence(ts::to_sequence(planted), frames);

  // A model built directly from the planted dictionary: train with zero
  // loops starting from k frames is not that model, so train briefly on the
  // clean frames instead.
  REQUIRE(run_cli("train --frames " + frames.string() +
                  " --kind avdl --k 16 --loops 6 --lambda1 0.2 --lambda2 0.015 --seed 5 --out " +
                  (root / "train").string())
              .exit_code == 0);

  const auto run = run_cli("reconstruct --model " + (root / "train" / "model.bin").string() +
                           " --frames " + frames.string() + " --reference " + frames.string() +
                           " --corrupt-kind gaussian --noise-stddev 0.1 --corrupt-seed 7 --out " +
                           (root / "rec").string());
  REQUIRE(run.exit_code == 0);

  CHECK(fs::exists(root / "rec" / "corrupted" / "000000.pgm"));
  CHECK(fs::exists(root / "rec" / "reconstructed" / "000000.pgm"));
  const auto metrics = json::parse(slurp(root / "rec" / "metrics.json"));
  CHECK(metrics.at("reconstruction_error_vs_reference").get<double>() <
        metrics.at("input_error_vs_reference").get<double>());
  fs::remove_all(root);
}

TEST_CASE("cli: classify rejects a single-class corpus with a data error") {
  const auto root = make_temp_dir("cls1");
  const auto planted = ts::make_flicker(8, 8, 4, 16, 0.01, 207);
  dyntex::save_sequence(ts::planted_clip(planted, 16, 0.01, 1), root / "c0");
  dyntex::save_sequence(ts::planted_clip(planted, 16, 0.01, 2), root / "c1");

  const json config{{"seed", 1},
                    {"classify",
                     {{"corpus", json::array({json{{"label", "only"},
                                                   {"clips", json::array({(root / "c0").string(),
                                                                          (root / "c1").string()})}}})},
                      {"rates", json::array({0.0})},
                      {"avdl", {{"lambda1", 0.05}, {"lambda2", 0.003}, {"loops", 2}}}}}};
  const fs::path config_path = root / "config.json";
  std::ofstream(config_path) << config.dump();

  const auto run = run_cli("classify --config " + config_path.string() + " --out " +
                           (root / "out").string());
  CHECK(run.exit_code == 2);
  // The config echo lands even though the run failed.
  CHECK(fs::exists(root / "out" / "config.json"));
  fs::remove_all(root);
}

TEST_CASE("cli: classify runs the benchmark end to end from a config file") {
  const auto root = make_temp_dir("cls");
  json corpus = json::array();
  const char* labels[] = {"ash", "foam"};
  for (int c = 0; c < 2; ++c) {
    const auto planted = ts::make_flicker(8, 8, 4, 16, 0.0, 208 + 19ULL * c);
    json clips = json::array();
    for (int j = 0; j < 4; ++j) {
      const fs::path dir = root / (std::string(labels[c]) + "_" + std::to_string(j));
      dyntex::save_sequence(ts::planted_clip(planted, 16, 1e-3, 300 + 7ULL * j + c), dir);
      clips.push_back(dir.string());
    }
    corpus.push_back(json{{"label", labels[c]}, {"clips", clips}});
  }
  const json config{{"seed", 2},
                    {"classify",
                     {{"corpus", corpus},
                      {"rates", json::array({0.0, 0.3})},
                      {"lds_k", 4},
                      {"avdl_k", 6},
                      {"avdl",
                       {{"lambda1", 0.05}, {"lambda2", 0.003}, {"loops", 4}, {"gamma", 0.5}}}}}};
  const fs::path config_path = root / "config.json";
  std::ofstream(config_path) << config.dump();

  const auto run = run_cli("classify --config " + config_path.string() + " --out " +
                           (root / "out").string());
  REQUIRE(run.exit_code == 0);
  const std::string csv = slurp(root / "out" / "benchmark.csv");
  CHECK(csv.rfind("method,occlusion_rate,accuracy\n", 0) == 0);
  CHECK(csv.find("lds_nn,0,") != std::string::npos);
  CHECK(csv.find("avdl_src,0.2999") != std::string::npos); // 0.3 printed at %.17g
  const auto predictions = json::parse(slurp(root / "out" / "predictions.json"));
  CHECK(predictions.at("predictions").size() == 2 * 2 * 2 * 2); // methods × rates × classes × test clips
  fs::remove_all(root);
}

TEST_CASE("cli: exit codes distinguish config, data, and numeric failures") {
  const auto root = make_temp_dir("codes");
  const auto frames = write_frames(root, 209);

  // Usage / config errors.
  CHECK(run_cli("train --frames " + frames.string() + " --kind avdl --k 6 --loops 1 --out " +
                (root / "o1").string() + " --lambda1 0 --lambda2 0.003")
            .exit_code == 1);
  CHECK(run_cli("train --no-such-flag").exit_code == 1);
  CHECK(run_cli("train --frames " + frames.string() +
                " --kind nonsense --k 6 --lambda1 0.1 --lambda2 0.003 --out " +
                (root / "o2").string())
            .exit_code == 1);

  // Data errors.
  CHECK(run_cli("train --frames /nonexistent_dir_xyz --kind lds --k 2 --out " +
                (root / "o3").string())
            .exit_code == 2);
  CHECK(run_cli("eval --model " + (root / "missing.bin").string() + " --frames " +
                frames.string() + " --out " + (root / "o4").string())
            .exit_code == 2);

  // Numeric failure: an elastic net capped at one sweep cannot certify its
  // tolerance on coupled data.
  const json config{{"seed", 1},
                    {"frames", frames.string()},
                    {"out", (root / "o5").string()},
                    {"train",
                     {{"kind", "avdl"},
                      {"k", 6},
                      {"loops", 1},
                      {"lambda1", 1e-4},
                      {"lambda2", 1e-6},
                      {"kkt_tolerance", 1e-14},
                      {"max_sweeps", 1}}}};
  const fs::path config_path = root / "hard.json";
  std::ofstream(config_path) << config.dump();
  CHECK(run_cli("train --config " + config_path.string()).exit_code == 3);
  fs::remove_all(root);
}

TEST_CASE("cli: a run is reproducible from its own config echo") {
  const auto root = make_temp_dir("echo");
  const auto frames = write_frames(root, 210);
  REQUIRE(run_cli("train --frames " + frames.string() +
                  " --kind avdl --k 5 --loops 3 --lambda1 0.06 --lambda2 0.004 --seed 17 --out " +
                  (root / "first").string())
              .exit_code == 0);
  // Re-run purely from the echoed config; only the output directory moves.
  REQUIRE(run_cli("train --config " + (root / "first" / "config.json").string() + " --out " +
                  (root / "second").string())
              .exit_code == 0);
  CHECK(slurp(root / "first" / "model.bin") == slurp(root / "second" / "model.bin"));
  CHECK(slurp(root / "first" / "history.csv") == slurp(root / "second" / "history.csv"));
  fs::remove_all(root);
}
