// Command-line front end: train / synth / reconstruct / eval / classify.
// Every run resolves its configuration (defaults <- JSON config <- explicit
// flags, flags win), echoes it to <out>/config.json, then executes. All
// randomness is seeded and recorded, so a run is reproducible from the echo
// alone.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dyntex/classify.hpp"
#include "dyntex/dynamics.hpp"
#include "dyntex/exceptions.hpp"
#include "dyntex/model_io.hpp"
#include "dyntex/video_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dyntex::ConfigError("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& err) {
    throw dyntex::ConfigError("config file " + path + ": " + err.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dyntex::DataError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw dyntex::DataError(path.string() + ": write failure");
}

void echo_config(const fs::path& out_dir, const json& resolved) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  write_text(out_dir / "config.json", resolved.dump(2) + "\n");
}

template <typename T>
T require(const json& j, const std::string& key, const char* context) {
  if (!j.contains(key)) {
    throw dyntex::ConfigError(std::string(context) + ": missing required key '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& err) {
    throw dyntex::ConfigError(std::string(context) + ": key '" + key + "': " + err.what());
  }
}

dyntex::FrameSequence load_frames_dir(const std::string& dir) {
  const auto files = dyntex::list_pgm_files(dir);
  if (files.size() < 2) {
    throw dyntex::DataError(dir + ": found " + std::to_string(files.size()) +
                            " .pgm files, need at least 2");
  }
  return dyntex::load_sequence(files);
}

dyntex::AvdlParams avdl_params_from(const json& block, std::uint64_t seed) {
  dyntex::ElasticNetParams defaults(1.0, 0.01);
  dyntex::AvdlParams params{dyntex::ElasticNetParams(
      require<double>(block, "lambda1", "train"), require<double>(block, "lambda2", "train"),
      block.value("kkt_tolerance", defaults.kkt_tolerance),
      block.value("max_sweeps", defaults.max_sweeps))};
  params.gamma = block.value("gamma", params.gamma);
  params.max_loops = block.value("loops", params.max_loops);
  params.armijo_c = block.value("armijo_c", params.armijo_c);
  params.shrink = block.value("shrink", params.shrink);
  params.initial_step = block.value("initial_step", params.initial_step);
  params.tol_rel_obj = block.value("tol_rel_obj", params.tol_rel_obj);
  params.allow_overcomplete = block.value("allow_overcomplete", params.allow_overcomplete);
  params.seed = seed;
  params.validate();
  return params;
}

std::optional<dyntex::CorruptionSpec> corruption_from(const json& root, std::uint64_t seed) {
  if (!root.contains("corrupt")) return std::nullopt;
  const json& block = root.at("corrupt");
  const auto kind = require<std::string>(block, "kind", "corrupt");
  if (kind == "gaussian") {
    dyntex::GaussianNoise noise;
    noise.stddev = require<double>(block, "stddev", "corrupt");
    noise.seed = block.value("seed", seed);
    return dyntex::CorruptionSpec(noise);
  }
  if (kind == "occlusion") {
    dyntex::Occlusion occ;
    occ.rect_h = require<int>(block, "rect_h", "corrupt");
    occ.rect_w = require<int>(block, "rect_w", "corrupt");
    occ.frame_fraction = require<double>(block, "frame_fraction", "corrupt");
    occ.seed = block.value("seed", seed);
    occ.intensity = block.value("intensity", 1.0);
    return dyntex::CorruptionSpec(occ);
  }
  throw dyntex::ConfigError("corrupt.kind must be 'gaussian' or 'occlusion', got '" + kind + "'");
}

void write_history_csv(const fs::path& path, const std::vector<dyntex::TrainingRecord>& history) {
  std::string csv = "loop,objective,step,sigma,nnz_fraction\n";
  for (const auto& row : history) {
    csv += std::to_string(row.loop) + "," + fmt_double(row.objective) + "," +
           fmt_double(row.step) + "," + fmt_double(row.sigma) + "," +
           fmt_double(row.nnz_fraction) + "\n";
  }
  write_text(path, csv);
}

json metrics_to_json(const dyntex::MetricsReport& metrics) {
  json j{{"e_y", metrics.e_y},
         {"e_x", metrics.e_x},
         {"sigma", metrics.sigma},
         {"compression_rate", metrics.compression_rate}};
  if (metrics.occlusion_hit_rate) j["occlusion_hit_rate"] = *metrics.occlusion_hit_rate;
  return j;
}

// One-row CSV mirroring the synthesis table layout; appends without a header
// when the file already has one.
void append_metrics_row(const fs::path& path, const std::string& model_kind, int loops_or_k,
                        const dyntex::MetricsReport& metrics) {
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw dyntex::DataError(path.string() + ": cannot open for appending");
  if (fresh) out << "model_kind,loops_or_k,compression_rate,sigma,e_y,e_x\n";
  out << model_kind << "," << loops_or_k << "," << fmt_double(metrics.compression_rate) << ","
      << fmt_double(metrics.sigma) << "," << fmt_double(metrics.e_y) << ","
      << fmt_double(metrics.e_x) << "\n";
}

json block_or_empty(const json& root, const char* key) {
  return root.contains(key) ? root.at(key) : json::object();
}

int loops_or_k(const dyntex::LoadedModel& model) {
  if (const auto* avdl = std::get_if<dyntex::AvdlModel>(&model)) {
    return avdl->history.empty() ? 0 : avdl->history.back().loop;
  }
  return static_cast<int>(std::get<dyntex::LdsModel>(model).pcs.cols());
}

// ---------------------------------------------------------------------------

int cmd_train(const json& resolved) {
  const fs::path out_dir = require<std::string>(resolved, "out", "train");
  echo_config(out_dir, resolved);

  const json& block = resolved.at("train");
  const auto kind = require<std::string>(block, "kind", "train");
  const int k = require<int>(block, "k", "train");
  const std::uint64_t seed = resolved.value("seed", 0ULL);
  const auto frames = load_frames_dir(require<std::string>(resolved, "frames", "train"));

  if (kind == "avdl") {
    const auto params = avdl_params_from(block, seed);
    const auto model = dyntex::train(frames, k, params);
    dyntex::save_model(model, out_dir / "model.bin");
    write_history_csv(out_dir / "history.csv", model.history);
  } else if (kind == "lds") {
    const auto model = dyntex::fit_lds(frames, k);
    dyntex::save_model(model, out_dir / "model.bin");
    const auto metrics =
        dyntex::evaluate(model.transition, model.pcs, frames.data(), model.states,
                         dyntex::CompressionKind::principal_components);
    const Eigen::Index n = model.states.cols() - 1;
    const double objective =
        0.5 * (model.states.rightCols(n) - model.transition * model.states.leftCols(n))
                  .squaredNorm();
    write_history_csv(out_dir / "history.csv",
                      {{1, objective, 0.0, metrics.sigma, metrics.compression_rate, 0.0, 0.0}});
  } else {
    throw dyntex::ConfigError("train.kind must be 'avdl' or 'lds', got '" + kind + "'");
  }
  return 0;
}

int cmd_synth(const json& resolved) {
  const fs::path out_dir = require<std::string>(resolved, "out", "synth");
  echo_config(out_dir, resolved);

  const json block = block_or_empty(resolved, "synth");
  const auto model = dyntex::load_model(require<std::string>(resolved, "model", "synth"));
  const auto frames = load_frames_dir(require<std::string>(resolved, "frames", "synth"));

  dyntex::SynthesisSpec spec;
  spec.length = require<int>(block, "length", "synth");
  const auto mode = block.value("mode", std::string("plain"));
  if (mode == "plain") {
    spec.mode = dyntex::SynthesisSpec::Mode::plain;
  } else if (mode == "lasso") {
    spec.mode = dyntex::SynthesisSpec::Mode::lasso;
  } else {
    throw dyntex::ConfigError("synth.mode must be 'plain' or 'lasso', got '" + mode + "'");
  }
  spec.lasso_lambda = block.value("lasso_lambda", 0.0);
  const int seed_frame = block.value("seed_frame", 0);
  if (seed_frame < 0 || seed_frame >= frames.frame_count()) {
    throw dyntex::ConfigError("synth.seed_frame out of range");
  }

  dyntex::SynthesisResult result = [&] {
    if (const auto* avdl = std::get_if<dyntex::AvdlModel>(&model)) {
      if (frames.pixel_count() != avdl->dictionary.signal_dim()) {
        throw dyntex::DataError("seed frames do not match the model's signal dimension");
      }
      // The initial state is the elastic-net code of the seed frame.
      spec.x0 = dyntex::solve(avdl->dictionary, frames.data().col(seed_frame),
                              avdl->params.elastic)
                    .values;
      return dyntex::synthesize(avdl->transition, avdl->dictionary.matrix(), spec, avdl->height,
                                avdl->width);
    }
    const auto& lds = std::get<dyntex::LdsModel>(model);
    if (frames.pixel_count() != lds.pcs.rows()) {
      throw dyntex::DataError("seed frames do not match the model's signal dimension");
    }
    spec.x0 = lds.pcs.transpose() * frames.data().col(seed_frame);
    return dyntex::synthesize(lds.transition, lds.pcs, spec, lds.height, lds.width);
  }();

  dyntex::save_frames(result.frames, result.height, result.width, out_dir / "frames");
  dyntex::MetricsReport metrics;
  if (const auto* avdl = std::get_if<dyntex::AvdlModel>(&model)) {
    metrics = dyntex::evaluate(avdl->transition, avdl->dictionary.matrix(), result.frames,
                               result.states, dyntex::CompressionKind::sparse_codes);
  } else {
    const auto& lds = std::get<dyntex::LdsModel>(model);
    metrics = dyntex::evaluate(lds.transition, lds.pcs, result.frames, result.states,
                               dyntex::CompressionKind::principal_components);
  }
  write_text(out_dir / "metrics.json", metrics_to_json(metrics).dump(2) + "\n");
  return 0;
}

int cmd_reconstruct(const json& resolved) {
  const fs::path out_dir = require<std::string>(resolved, "out", "reconstruct");
  echo_config(out_dir, resolved);

  const std::uint64_t seed = resolved.value("seed", 0ULL);
  const auto model = dyntex::load_model(require<std::string>(resolved, "model", "reconstruct"));
  auto input = load_frames_dir(require<std::string>(resolved, "frames", "reconstruct"));

  if (const auto spec = corruption_from(resolved, seed)) {
    input = dyntex::corrupt(input, *spec);
    dyntex::save_sequence(input, out_dir / "corrupted");
  }

  const dyntex::FrameSequence restored =
      std::holds_alternative<dyntex::AvdlModel>(model)
          ? dyntex::reconstruct(std::get<dyntex::AvdlModel>(model), input)
          : dyntex::reconstruct(std::get<dyntex::LdsModel>(model), input);
  dyntex::save_sequence(restored, out_dir / "reconstructed");

  const auto column_error_sum = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) total += (a.col(j) - b.col(j)).norm();
    return total;
  };
  json report{{"residual_vs_input", column_error_sum(restored.data(), input.data())}};
  if (resolved.contains("reference")) {
    const auto reference = load_frames_dir(resolved.at("reference").get<std::string>());
    if (reference.frame_count() != input.frame_count() ||
        reference.pixel_count() != input.pixel_count()) {
      throw dyntex::DataError("reference geometry does not match the input");
    }
    report["input_error_vs_reference"] = column_error_sum(input.data(), reference.data());
    report["reconstruction_error_vs_reference"] =
        column_error_sum(restored.data(), reference.data());
  }
  write_text(out_dir / "metrics.json", report.dump(2) + "\n");
  return 0;
}

int cmd_eval(const json& resolved) {
  const fs::path out_dir = require<std::string>(resolved, "out", "eval");
  echo_config(out_dir, resolved);

  const auto model = dyntex::load_model(require<std::string>(resolved, "model", "eval"));
  const auto frames = load_frames_dir(require<std::string>(resolved, "frames", "eval"));

  dyntex::MetricsReport metrics;
  std::string kind;
  if (const auto* avdl = std::get_if<dyntex::AvdlModel>(&model)) {
    kind = "avdl";
    const auto codes = dyntex::batch_solve(avdl->dictionary, frames.data(), avdl->params.elastic);
    metrics =
        dyntex::evaluate(avdl->transition, avdl->dictionary.matrix(), frames.data(), codes);
  } else {
    kind = "lds";
    const auto& lds = std::get<dyntex::LdsModel>(model);
    const Eigen::MatrixXd states = lds.pcs.transpose() * frames.data();
    metrics = dyntex::evaluate(lds.transition, lds.pcs, frames.data(), states,
                               dyntex::CompressionKind::principal_components);
  }
  if (resolved.contains("eval") && resolved.at("eval").contains("detector")) {
    const json& det = resolved.at("eval").at("detector");
    dyntex::OcclusionDetector detector;
    detector.rect_h = require<int>(det, "rect_h", "eval.detector");
    detector.rect_w = require<int>(det, "rect_w", "eval.detector");
    detector.mean_threshold = det.value("mean_threshold", detector.mean_threshold);
    metrics.occlusion_hit_rate = dyntex::occlusion_hit_rate(frames, detector);
  }

  write_text(out_dir / "metrics.json", metrics_to_json(metrics).dump(2) + "\n");
  fs::path csv = out_dir / "metrics_row.csv";
  if (resolved.contains("eval") && resolved.at("eval").contains("metrics_csv")) {
    csv = resolved.at("eval").at("metrics_csv").get<std::string>();
  }
  append_metrics_row(csv, kind, loops_or_k(model), metrics);
  return 0;
}

int cmd_classify(const json& resolved) {
  const fs::path out_dir = require<std::string>(resolved, "out", "classify");
  echo_config(out_dir, resolved);

  const json block = block_or_empty(resolved, "classify");
  std::vector<dyntex::LabeledClip> corpus;
  for (const json& entry : require<json>(block, "corpus", "classify")) {
    const auto label = require<std::string>(entry, "label", "classify.corpus");
    for (const json& clip_dir : require<json>(entry, "clips", "classify.corpus")) {
      corpus.push_back({label, load_frames_dir(clip_dir.get<std::string>())});
    }
  }
  const auto rates = require<std::vector<double>>(block, "rates", "classify");

  dyntex::BenchmarkConfig config;
  config.seed = resolved.value("seed", 1ULL);
  config.block_area_fraction = block.value("block_area_fraction", config.block_area_fraction);
  config.train_fraction = block.value("train_fraction", config.train_fraction);
  config.lds_k = block.value("lds_k", config.lds_k);
  config.martin_horizon = block.value("martin_horizon", config.martin_horizon);
  config.avdl_k = block.value("avdl_k", config.avdl_k);
  config.src_beta = block.value("beta", config.src_beta);
  config.avdl = avdl_params_from(require<json>(block, "avdl", "classify"), config.seed);

  const auto result = dyntex::run_occlusion_benchmark(corpus, rates, config);

  std::string csv = "method,occlusion_rate,accuracy\n";
  for (const auto& cell : result.table) {
    csv += cell.method + "," + fmt_double(cell.occlusion_rate) + "," + fmt_double(cell.accuracy) +
           "\n";
  }
  write_text(out_dir / "benchmark.csv", csv);

  json predictions = json::array();
  for (const auto& p : result.predictions) {
    predictions.push_back({{"method", p.method},
                           {"occlusion_rate", p.occlusion_rate},
                           {"true_label", p.true_label},
                           {"predicted", p.predicted},
                           {"margin", p.margin}});
  }
  write_text(out_dir / "predictions.json", json{{"predictions", predictions}}.dump(2) + "\n");
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic-texture modeling: sparse-code dynamical systems and a PCA baseline"};
  app.require_subcommand(1);

  std::string config_path, out_dir, frames_dir, model_path, reference_dir, metrics_csv;
  std::uint64_t seed = 0;
  std::string kind = "avdl", mode = "plain";
  int k = 0, loops = 0, length = 0, seed_frame = 0;
  double lambda1 = 0, lambda2 = 0, gamma = 0, armijo_c = 0, shrink = 0, initial_step = 0,
         tol_rel_obj = 0, lasso_lambda = 0, noise_stddev = 0, frame_fraction = 0;
  int rect_h = 0, rect_w = 0;
  std::uint64_t corrupt_seed = 0;
  std::string corrupt_kind;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file; explicit flags win");
    cmd->add_option("--out", out_dir, "run directory for all outputs");
    cmd->add_option("--seed", seed, "seed for all randomness in the run");
  };

  CLI::App* train = app.add_subcommand("train", "fit a model to a frame sequence");
  add_common(train);
  train->add_option("--frames", frames_dir, "directory of .pgm frames");
  train->add_option("--kind", kind, "avdl or lds");
  train->add_option("--k", k, "state dimension / atom count");
  train->add_option("--loops", loops, "training loops (avdl)");
  train->add_option("--lambda1", lambda1);
  train->add_option("--lambda2", lambda2);
  train->add_option("--gamma", gamma, "stability penalty weight");
  train->add_option("--armijo-c", armijo_c);
  train->add_option("--shrink", shrink);
  train->add_option("--initial-step", initial_step);
  train->add_option("--tol-rel-obj", tol_rel_obj);

  CLI::App* synth = app.add_subcommand("synth", "synthesize a sequence from a model");
  add_common(synth);
  synth->add_option("--model", model_path);
  synth->add_option("--frames", frames_dir, "sequence providing the seed frame");
  synth->add_option("--length", length);
  synth->add_option("--mode", mode, "plain or lasso");
  synth->add_option("--lasso-lambda", lasso_lambda);
  synth->add_option("--seed-frame", seed_frame);

  CLI::App* reconstruct = app.add_subcommand("reconstruct", "code-and-decode a sequence");
  add_common(reconstruct);
  reconstruct->add_option("--model", model_path);
  reconstruct->add_option("--frames", frames_dir);
  reconstruct->add_option("--reference", reference_dir, "clean sequence for error reporting");
  reconstruct->add_option("--corrupt-kind", corrupt_kind, "gaussian or occlusion");
  reconstruct->add_option("--noise-stddev", noise_stddev);
  reconstruct->add_option("--rect-h", rect_h);
  reconstruct->add_option("--rect-w", rect_w);
  reconstruct->add_option("--frame-fraction", frame_fraction);
  reconstruct->add_option("--corrupt-seed", corrupt_seed);

  CLI::App* eval = app.add_subcommand("eval", "metrics of a model against a sequence");
  add_common(eval);
  eval->add_option("--model", model_path);
  eval->add_option("--frames", frames_dir);
  eval->add_option("--metrics-csv", metrics_csv, "appendable one-row CSV target");

  CLI::App* classify = app.add_subcommand("classify", "occlusion-robustness benchmark");
  add_common(classify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    if (err.get_exit_code() == 0) return app.exit(err); // --help
    std::cerr << "error: config: " << err.what() << "\n";
    return 1;
  }

  try {
    json resolved = json::object();
    if (!config_path.empty()) resolved.update(load_config_file(config_path), true);

    const auto set_if = [](const CLI::App* cmd, const char* flag, json& target,
                           const std::string& key, const auto& value) {
      if (cmd->count(flag) > 0) target[key] = value;
    };

    if (seed != 0 || app.get_subcommands().front()->count("--seed") > 0) resolved["seed"] = seed;
    if (!out_dir.empty()) resolved["out"] = out_dir;
    if (!frames_dir.empty()) resolved["frames"] = frames_dir;
    if (!model_path.empty()) resolved["model"] = model_path;
    if (!reference_dir.empty()) resolved["reference"] = reference_dir;

    if (train->parsed()) {
      resolved["command"] = "train";
      json& block = resolved["train"];
      set_if(train, "--kind", block, "kind", kind);
      set_if(train, "--k", block, "k", k);
      set_if(train, "--loops", block, "loops", loops);
      set_if(train, "--lambda1", block, "lambda1", lambda1);
      set_if(train, "--lambda2", block, "lambda2", lambda2);
      set_if(train, "--gamma", block, "gamma", gamma);
      set_if(train, "--armijo-c", block, "armijo_c", armijo_c);
      set_if(train, "--shrink", block, "shrink", shrink);
      set_if(train, "--initial-step", block, "initial_step", initial_step);
      set_if(train, "--tol-rel-obj", block, "tol_rel_obj", tol_rel_obj);
      if (!block.contains("kind")) block["kind"] = kind;
      return cmd_train(resolved);
    }
    if (synth->parsed()) {
      resolved["command"] = "synth";
      json& block = resolved["synth"];
      set_if(synth, "--length", block, "length", length);
      set_if(synth, "--mode", block, "mode", mode);
      set_if(synth, "--lasso-lambda", block, "lasso_lambda", lasso_lambda);
      set_if(synth, "--seed-frame", block, "seed_frame", seed_frame);
      return cmd_synth(resolved);
    }
    if (reconstruct->parsed()) {
      resolved["command"] = "reconstruct";
      if (reconstruct->count("--corrupt-kind") > 0) {
        json& block = resolved["corrupt"];
        block["kind"] = corrupt_kind;
        set_if(reconstruct, "--noise-stddev", block, "stddev", noise_stddev);
        set_if(reconstruct, "--rect-h", block, "rect_h", rect_h);
        set_if(reconstruct, "--rect-w", block, "rect_w", rect_w);
        set_if(reconstruct, "--frame-fraction", block, "frame_fraction", frame_fraction);
        set_if(reconstruct, "--corrupt-seed", block, "seed", corrupt_seed);
      }
      return cmd_reconstruct(resolved);
    }
    if (eval->parsed()) {
      resolved["command"] = "eval";
      if (eval->count("--metrics-csv") > 0) resolved["eval"]["metrics_csv"] = metrics_csv;
      return cmd_eval(resolved);
    }
    if (classify->parsed()) {
      resolved["command"] = "classify";
      return cmd_classify(resolved);
    }
    throw dyntex::ConfigError("no subcommand selected");
  } catch (const dyntex::ConfigError& err) {
    std::cerr << "error: config: " << err.what() << "\n";
    return 1;
  } catch (const dyntex::DataError& err) {
    std::cerr << "error: data: " << err.what() << "\n";
    return 2;
  } catch (const dyntex::NumericError& err) {
    std::cerr << "error: numeric: " << err.what() << "\n";
    return 3;
  } catch (const json::exception& err) {
    std::cerr << "error: config: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: data: " << err.what() << "\n";
    return 2;
  }
}
