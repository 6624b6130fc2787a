#include "fovs/cli/app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "fovs/baselines.hpp"
#include "fovs/dataset.hpp"
#include "fovs/evaluate.hpp"
#include "fovs/forecaster.hpp"
#include "fovs/projection.hpp"
#include "fovs/random.hpp"
#include "fovs/standard_benchmark.hpp"
#include "fovs/synth.hpp"
#include "fovs/training.hpp"

namespace fovs::cli {
namespace {

namespace fs = std::filesystem;

// Raised for flag combinations CLI11 cannot express; reported like a parse error.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SpanFlags {
  double cube_length = 3.2;
  int resolution = 16;
  double t_past = 2.0;
  double t_future = 2.0;
  double stride = 1.0;
  double frame_duration = 1.0;
  double frame_quantum = 0.1;
  bool no_outlier_filter = false;

  void add_to(CLI::App& app) {
    app.add_option("--cube-length", cube_length, "Cube side D in metres")->capture_default_str();
    app.add_option("--resolution", resolution, "Grid resolution R")->capture_default_str();
    app.add_option("--t-past", t_past, "Observed history in seconds")->capture_default_str();
    app.add_option("--t-future", t_future, "Prediction horizon in seconds")->capture_default_str();
    app.add_option("--stride", stride, "Window stride in seconds")->capture_default_str();
    app.add_option("--frame-duration", frame_duration, "Input frame length in seconds")->capture_default_str();
    app.add_option("--frame-quantum", frame_quantum, "Stream frame quantum in seconds")->capture_default_str();
    app.add_flag("--no-outlier-filter", no_outlier_filter, "Skip the statistical outlier filter");
  }

  SampleSpec spec() const {
    SampleSpec s;
    s.t_past_s = t_past;
    s.t_future_s = t_future;
    s.stride_s = stride;
    s.frame_duration_s = frame_duration;
    s.cfg.cube_length_m = cube_length;
    s.cfg.resolution = resolution;
    s.cfg.frame_quantum_s = frame_quantum;
    s.cfg.outlier_filter = !no_outlier_filter;
    s.validate();
    return s;
  }
};

struct StreamFlags {
  std::string points, trajectory, gaze;

  void add_to(CLI::App& app, bool required) {
    auto* p = app.add_option("--points", points, "Keypoint stream (t,x,y,z,inv_dist_var)");
    auto* t = app.add_option("--trajectory", trajectory, "Pose stream (t,qw,qx,qy,qz,tx,ty,tz)");
    auto* g = app.add_option("--gaze", gaze, "Gaze stream (t,gx,gy,gz)");
    for (auto* o : {p, t, g}) {
      o->check(CLI::ExistingFile);
      if (required) o->required();
    }
  }
  bool given() const { return !points.empty() || !trajectory.empty() || !gaze.empty(); }
  void require_all() const {
    if (points.empty() || trajectory.empty() || gaze.empty()) {
      throw UsageError("--points, --trajectory and --gaze must be given together");
    }
  }
};

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path);
}

std::string format_report(const MetricReport& report, const std::string& format) {
  return format == "json" ? report_json(report) + "\n" : report_csv(report);
}

std::vector<std::size_t> split_indices(const std::vector<SpanSample>& samples, const std::string& which,
                                       double val_fraction, double test_fraction, std::uint64_t seed) {
  if (which == "all") {
    std::vector<std::size_t> all(samples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  SplitPolicy policy;
  policy.val_fraction = val_fraction;
  policy.test_fraction = test_fraction;
  policy.seed = seed;
  const Split s = split(samples, policy);
  if (which == "train") return s.train;
  if (which == "val") return s.val;
  return s.test;
}

ModelConfig variant_config(const SampleSpec& spec, const std::string& variant, const std::string& level,
                           std::uint64_t seed) {
  ModelConfig cfg = model_config_for(spec);
  cfg.seed = seed;
  if (variant == "no-history") {
    cfg.use_history = false;
  } else if (variant == "no-global") {
    cfg.use_global_embedding = false;
  } else if (variant == "bce") {
    cfg.loss = LossKind::bce;
  } else if (variant == "single-task") {
    if (level.empty()) throw UsageError("--variant single-task needs --level");
    cfg.single_task_level = parse_level(level);
  }
  if (variant != "single-task" && !level.empty()) throw UsageError("--level only applies to --variant single-task");
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// --config: "key = value" lines naming the subcommand's long flags.

std::map<std::string, std::string> read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

// Expands --config into flag tokens placed before the command-line flags.
// Keys already given on the command line are skipped so flags win.
std::vector<std::string> expand_config(CLI::App& sub, std::vector<std::string> args) {
  std::vector<std::string> rest;
  std::optional<std::string> config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      config = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!config) return rest;
  std::vector<std::string> expanded;
  for (const auto& [key, value] : read_config(*config)) {
    const std::string flag = "--" + key;
    const CLI::Option* opt = sub.get_option_no_throw(flag);
    if (opt == nullptr || key == "help") throw UsageError("unknown config key '" + key + "'");
    const bool on_command_line = std::any_of(rest.begin(), rest.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (on_command_line) continue;
    if (opt->get_expected_min() == 0) {
      if (value == "true" || value == "1" || value == "yes") {
        expanded.push_back(flag);
      } else if (value != "false" && value != "0" && value != "no") {
        throw UsageError("config key '" + key + "' expects true or false");
      }
    } else {
      expanded.push_back(flag);
      expanded.push_back(value);
    }
  }
  expanded.insert(expanded.end(), rest.begin(), rest.end());
  return expanded;
}

// ---------------------------------------------------------------------------
// Subcommands

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 42;
  std::optional<std::uint64_t> behavior_seed;
  double duration = 30.0;
  double density = 1.0;
  double frame_quantum = 0.1;
  double outlier_rate = 0.0;
  double outlier_magnitude = 1.0;
};

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  const auto scene = synth::standard_scene(a.seed, a.density);
  const auto behavior =
      synth::touring_behavior(scene, a.behavior_seed.value_or(mix_seed(a.seed, 1000)), a.duration);
  synth::GenerationOptions options;
  options.frame_quantum_s = a.frame_quantum;
  auto rec = synth::generate(scene, behavior, options);
  if (a.outlier_rate > 0.0) {
    rec.points = synth::inject_outliers(rec.points, a.outlier_rate, a.outlier_magnitude, mix_seed(a.seed, 77)).points;
  }
  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_points(dir / "points.csv", rec.points);
  write_trajectory(dir / "trajectory.csv", rec.poses);
  write_gaze(dir / "gaze.csv", rec.gazes);
  out << "wrote " << rec.points.size() << " points, " << rec.poses.size() << " poses, " << rec.gazes.size()
      << " gaze samples to " << dir.string() << "\n";
}

void cmd_lift(const StreamFlags& streams, const SpanFlags& span, const std::string& out_path, std::ostream& out) {
  const SampleSpec spec = span.spec();
  IngestReport ingest_report;
  const auto aligned = ingest(streams.points, streams.trajectory, streams.gaze, spec.cfg.frame_quantum_s, &ingest_report);
  BuildReport report;
  const auto samples = build_samples(aligned, spec, "lift", &report);
  std::ostringstream csv;
  csv << "sample_time,part,frame,channel,count,cells\n";
  const char* channels[] = {"foveal", "central", "peripheral", "orientation", "scene"};
  const auto row = [&](double t, const char* part, int frame, const char* channel, const OccupancyGrid& g) {
    csv << t << ',' << part << ',' << frame << ',' << channel << ',' << g.count() << ',';
    bool first = true;
    for (std::size_t c : g.set_cells()) {
      csv << (first ? "" : " ") << c;
      first = false;
    }
    csv << '\n';
  };
  for (const auto& s : samples) {
    for (std::size_t f = 0; f < s.inputs.size(); ++f) {
      for (std::size_t c = 0; c < kInputChannels; ++c) row(s.sample_time, "input", static_cast<int>(f), channels[c], s.inputs[f][c]);
    }
    for (std::size_t l = 0; l < kNumLevels; ++l) row(s.sample_time, "target", -1, channels[l], s.target[l]);
  }
  write_text(out_path, csv.str(), out);
  for (const auto& w : ingest_report.warnings) std::cerr << "warning: " << w << "\n";
  if (!out_path.empty() && out_path != "-") {
    out << report.windows << " windows, " << samples.size() << " samples, " << report.dropped_empty_future
        << " dropped\n";
  }
}

struct CurateArgs {
  StreamFlags streams;
  SpanFlags span;
  std::string out;
  std::string recording_id = "rec0";
  bool standard = false;
  std::size_t samples = 2000;
  std::uint64_t seed = 42;
  double recording_s = 60.0;
};

void cmd_curate(const CurateArgs& a, std::ostream& out) {
  const SampleSpec spec = a.span.spec();
  std::vector<SpanSample> samples;
  std::size_t dropped = 0;
  if (a.standard) {
    if (a.streams.given()) throw UsageError("--standard excludes stream files");
    BenchmarkSpec bench;
    bench.scene_seed = a.seed;
    bench.sample_count = a.samples;
    bench.recording_s = a.recording_s;
    bench.spec = spec;
    samples = standard_benchmark(bench);
  } else {
    a.streams.require_all();
    IngestReport ingest_report;
    const auto aligned =
        ingest(a.streams.points, a.streams.trajectory, a.streams.gaze, spec.cfg.frame_quantum_s, &ingest_report);
    BuildReport report;
    samples = build_samples(aligned, spec, a.recording_id, &report);
    dropped = report.dropped_empty_future;
    for (const auto& w : ingest_report.warnings) std::cerr << "warning: " << w << "\n";
  }
  write_archive(a.out, spec, samples);
  out << "wrote " << samples.size() << " samples (" << dropped << " dropped) to " << a.out << "\n";
}

struct TrainArgs {
  std::string archive, out, report;
  std::string variant = "full";
  std::string level;
  std::uint64_t seed = 0;
  int epochs = 50;
  int batch = 8;
  double lr = 1e-3;
  std::optional<std::size_t> max_steps;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t split_seed = 0;
};

void cmd_train(const TrainArgs& a, std::ostream& out) {
  const Archive ar = read_archive(a.archive);
  const ModelConfig cfg = variant_config(ar.spec, a.variant, a.level, a.seed);
  const auto train_idx = split_indices(ar.samples, "train", a.val_fraction, a.test_fraction, a.split_seed);
  const auto val_idx = split_indices(ar.samples, "val", a.val_fraction, a.test_fraction, a.split_seed);
  if (train_idx.empty()) throw std::runtime_error("training split is empty");
  TrainOptions options;
  options.epochs = a.epochs;
  options.batch_size = a.batch;
  options.learning_rate = a.lr;
  options.max_steps = a.max_steps;
  options.on_epoch = [&](const EpochRecord& r) {
    out << "epoch " << r.epoch << " steps " << r.steps << " loss " << r.train_loss;
    for (double v : r.val_iou) out << ' ' << v;
    out << std::endl;
  };
  const TrainResult result = train(ar.samples, train_idx, val_idx, cfg, options);
  save_checkpoint(a.out, result.model);
  if (!a.report.empty()) {
    std::ostringstream json;
    json << "{\"variant\":\"" << a.variant << "\",\"steps\":" << result.report.steps << ",\"epochs\":[";
    for (std::size_t i = 0; i < result.report.epochs.size(); ++i) {
      const auto& e = result.report.epochs[i];
      json << (i ? "," : "") << "{\"epoch\":" << e.epoch << ",\"steps\":" << e.steps << ",\"train_loss\":"
           << e.train_loss << ",\"val_iou\":[";
      for (std::size_t l = 0; l < e.val_iou.size(); ++l) json << (l ? "," : "") << e.val_iou[l];
      json << "]}";
    }
    json << "]}\n";
    write_text(a.report, json.str(), out);
  }
  out << "wrote checkpoint " << a.out << " after " << result.report.steps << " steps\n";
}

struct PredictorArgs {
  std::string archive, checkpoint, baseline;
  std::string split = "test";
  double threshold = 0.5;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t split_seed = 0;

  void add_to(CLI::App& app) {
    app.add_option("--archive", archive, "Sample archive")->required()->check(CLI::ExistingFile);
    auto* ck = app.add_option("--checkpoint", checkpoint, "Model checkpoint")->check(CLI::ExistingFile);
    auto* bl = app.add_option("--baseline", baseline, "Baseline instead of a model")
                   ->check(CLI::IsMember({"persistence", "prior"}));
    ck->excludes(bl);
    app.add_option("--split", split, "Samples to score")
        ->check(CLI::IsMember({"train", "val", "test", "all"}))
        ->capture_default_str();
    app.add_option("--threshold", threshold, "Binarisation threshold")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    app.add_option("--val-fraction", val_fraction)->capture_default_str();
    app.add_option("--test-fraction", test_fraction)->capture_default_str();
    app.add_option("--split-seed", split_seed)->capture_default_str();
  }
};

struct LoadedPredictor {
  Archive archive;
  std::vector<std::size_t> indices;
  std::optional<Forecaster> model;
  std::optional<GlobalPrior> prior;
  std::string source;
  Predictor predict;
};

std::unique_ptr<LoadedPredictor> load_predictor(const PredictorArgs& a) {
  if (a.checkpoint.empty() == a.baseline.empty()) throw UsageError("give exactly one of --checkpoint and --baseline");
  auto p = std::make_unique<LoadedPredictor>();
  p->archive = read_archive(a.archive);
  const auto& samples = p->archive.samples;
  p->indices = split_indices(samples, a.split, a.val_fraction, a.test_fraction, a.split_seed);
  const double threshold = a.threshold;
  if (!a.checkpoint.empty()) {
    p->model.emplace(load_checkpoint(a.checkpoint));
    if (p->model->config().resolution != p->archive.spec.cfg.resolution) {
      throw std::runtime_error("checkpoint resolution does not match the archive");
    }
    p->source = a.checkpoint;
    const Forecaster* m = &*p->model;
    p->predict = [m, threshold](const SpanSample& s) { return m->predict(s, threshold); };
  } else if (a.baseline == "prior") {
    p->prior.emplace(samples, split_indices(samples, "train", a.val_fraction, a.test_fraction, a.split_seed));
    p->source = "baseline_global_prior";
    const GlobalPrior* g = &*p->prior;
    p->predict = [g, threshold](const SpanSample& s) { return g->forecast(s, threshold); };
  } else {
    p->source = "baseline_persistence";
    p->predict = [](const SpanSample& s) { return baseline_persistence(s); };
  }
  return p;
}

void cmd_eval(const PredictorArgs& a, const std::string& format, const std::string& out_path, std::ostream& out) {
  const auto p = load_predictor(a);
  const Evaluation e = evaluate(p->predict, p->archive.samples, p->indices, p->source);
  write_text(out_path, format_report(e.report, format), out);
}

// Reference track for 2D scoring: the target foveal cell nearest to the
// centroid of all target foveal cells, projected like a forecast.
std::optional<GazeTrack> truth_track(const SpanSample& s, const CameraModel& cam, int steps) {
  const OccupancyGrid& fov = s.target[static_cast<std::size_t>(SpanLevel::foveal)];
  const auto cells = fov.set_cells();
  if (cells.empty()) return std::nullopt;
  Vec3 centroid = Vec3::Zero();
  for (std::size_t c : cells) {
    const auto ijk = fov.cell_of(c);
    centroid += fov.cell_center(ijk[0], ijk[1], ijk[2]);
  }
  centroid /= static_cast<double>(cells.size());
  std::size_t best = cells.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c : cells) {
    const auto ijk = fov.cell_of(c);
    const double d = (fov.cell_center(ijk[0], ijk[1], ijk[2]) - centroid).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  std::vector<double> soft(kNumLevels * fov.cell_count(), 0.0);
  soft[best] = 1.0;
  const Forecast f = make_forecast({kAllLevels.begin(), kAllLevels.end()}, std::move(soft), fov);
  return project_to_2d(f, s.anchor, cam, s.current_gaze, steps);
}

void cmd_project2d(const PredictorArgs& a, int steps, bool score, const std::string& out_path, std::ostream& out) {
  if (steps < 1) throw UsageError("--steps must be >= 1");
  const auto p = load_predictor(a);
  const CameraModel cam;
  std::ostringstream csv;
  csv << "sample,step,u,v,in_frame\n";
  double f1 = 0.0, pr = 0.0, re = 0.0;
  std::size_t scored = 0, skipped = 0;
  for (std::size_t idx : p->indices) {
    const SpanSample& s = p->archive.samples[idx];
    const Forecast forecast = p->predict(s);
    GazeTrack track;
    try {
      track = project_to_2d(forecast, s.anchor, cam, s.current_gaze, steps);
    } catch (const std::invalid_argument&) {
      ++skipped;  // constant foveal channel
      continue;
    }
    for (std::size_t k = 0; k < track.points.size(); ++k) {
      const auto& pt = track.points[k];
      csv << idx << ',' << k << ',';
      if (pt) {
        csv << pt->x() << ',' << pt->y() << ",1\n";
      } else {
        csv << ",,0\n";
      }
    }
    if (score) {
      const auto truth = truth_track(s, cam, steps);
      if (!truth) continue;
      const Scores2D sc = score_2d(track.points, truth->points, cam);
      f1 += sc.f1;
      pr += sc.precision;
      re += sc.recall;
      ++scored;
    }
  }
  write_text(out_path, csv.str(), out);
  if (skipped > 0) std::cerr << "skipped " << skipped << " samples with a constant foveal forecast\n";
  if (score) {
    if (scored == 0) throw std::runtime_error("no samples could be scored");
    const double n = static_cast<double>(scored);
    std::ostream& dst = (out_path.empty() || out_path == "-") ? std::cerr : out;
    dst << "f1 " << f1 / n << " precision " << pr / n << " recall " << re / n << " over " << scored << " samples\n";
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-level 3D visual span forecasting from egocentric streams", "fovs"};
  app.require_subcommand(0, 1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic keypoint, pose and gaze streams");
  synth_cmd->add_option("--out", synth_args.out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth_args.seed, "Scene seed")->capture_default_str();
  synth_cmd->add_option("--behavior-seed", synth_args.behavior_seed, "Behaviour seed (derived from --seed by default)");
  synth_cmd->add_option("--duration", synth_args.duration, "Seconds")->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--density", synth_args.density, "Point density scale")->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--frame-quantum", synth_args.frame_quantum)->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--outlier-rate", synth_args.outlier_rate)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  synth_cmd->add_option("--outlier-magnitude", synth_args.outlier_magnitude)->check(CLI::PositiveNumber)->capture_default_str();

  StreamFlags lift_streams;
  SpanFlags lift_span;
  std::string lift_out;
  auto* lift_cmd = app.add_subcommand("lift", "Dump per-window span grids as CSV");
  lift_streams.add_to(*lift_cmd, true);
  lift_span.add_to(*lift_cmd);
  lift_cmd->add_option("--out", lift_out, "CSV path (stdout by default)");

  CurateArgs curate_args;
  auto* curate_cmd = app.add_subcommand("curate", "Build a sample archive from streams or the standard benchmark");
  curate_args.streams.add_to(*curate_cmd, false);
  curate_args.span.add_to(*curate_cmd);
  curate_cmd->add_option("--out", curate_args.out, "Archive path")->required();
  curate_cmd->add_option("--recording-id", curate_args.recording_id)->capture_default_str();
  curate_cmd->add_flag("--standard", curate_args.standard, "Generate the standard synthetic benchmark");
  curate_cmd->add_option("--samples", curate_args.samples, "Benchmark sample count")->check(CLI::PositiveNumber)->capture_default_str();
  curate_cmd->add_option("--seed", curate_args.seed, "Benchmark scene seed")->capture_default_str();
  curate_cmd->add_option("--recording-length", curate_args.recording_s, "Benchmark recording seconds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a forecaster on an archive");
  train_cmd->add_option("--archive", train_args.archive)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_args.out, "Checkpoint path")->required();
  train_cmd->add_option("--report", train_args.report, "Training report JSON path");
  train_cmd->add_option("--variant", train_args.variant)
      ->check(CLI::IsMember({"full", "no-history", "no-global", "single-task", "bce"}))
      ->capture_default_str();
  train_cmd->add_option("--level", train_args.level, "Level for --variant single-task")
      ->check(CLI::IsMember({"foveal", "central", "peripheral", "orientation"}));
  train_cmd->add_option("--seed", train_args.seed)->capture_default_str();
  train_cmd->add_option("--epochs", train_args.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--batch", train_args.batch)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--lr", train_args.lr)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--max-steps", train_args.max_steps)->check(CLI::PositiveNumber);
  train_cmd->add_option("--val-fraction", train_args.val_fraction)->capture_default_str();
  train_cmd->add_option("--test-fraction", train_args.test_fraction)->capture_default_str();
  train_cmd->add_option("--split-seed", train_args.split_seed)->capture_default_str();

  PredictorArgs eval_args;
  std::string eval_format = "csv", eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint or baseline on an archive split");
  eval_args.add_to(*eval_cmd);
  eval_cmd->add_option("--report-format", eval_format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "Report path (stdout by default)");

  PredictorArgs p2_args;
  int p2_steps = 5;
  bool p2_score = false;
  std::string p2_out;
  auto* p2_cmd = app.add_subcommand("project2d", "Project foveal forecasts to 2D gaze tracks");
  p2_args.add_to(*p2_cmd);
  p2_cmd->add_option("--steps", p2_steps, "Points per track")->capture_default_str();
  p2_cmd->add_flag("--score", p2_score, "Score against the target foveal span");
  p2_cmd->add_option("--out", p2_out, "CSV path (stdout by default)");

  BenchOptions bench_opts;
  std::string bench_points, bench_trajectory, bench_gaze, bench_checkpoint, bench_format = "table", bench_out;
  auto* bench_cmd = app.add_subcommand("bench", "Per-stage latency of the online pipeline");
  bench_cmd->add_option("--points", bench_points)->check(CLI::ExistingFile);
  bench_cmd->add_option("--trajectory", bench_trajectory)->check(CLI::ExistingFile);
  bench_cmd->add_option("--gaze", bench_gaze)->check(CLI::ExistingFile);
  bench_cmd->add_option("--checkpoint", bench_checkpoint)->check(CLI::ExistingFile);
  bench_cmd->add_option("--seed", bench_opts.seed, "Scene seed")->capture_default_str();
  bench_cmd->add_option("--density", bench_opts.density_scale, "Point density scale")->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--windows", bench_opts.windows)->check(CLI::Range(std::size_t{100}, std::size_t{1000000}))->capture_default_str();
  bench_cmd->add_option("--warmup", bench_opts.warmup)->capture_default_str();
  bench_cmd->add_option("--cube-length", bench_opts.cube_length_m)->capture_default_str();
  bench_cmd->add_option("--resolution", bench_opts.resolution)->capture_default_str();
  bench_cmd->add_option("--t-past", bench_opts.t_past_s)->capture_default_str();
  bench_cmd->add_option("--t-future", bench_opts.t_future_s)->capture_default_str();
  bench_cmd->add_option("--stride", bench_opts.stride_s)->capture_default_str();
  bench_cmd->add_option("--frame-duration", bench_opts.frame_duration_s)->capture_default_str();
  bench_cmd->add_option("--report-format", bench_format)->check(CLI::IsMember({"table", "json"}))->capture_default_str();
  bench_cmd->add_option("--out", bench_out, "Report path (stdout by default)");

  for (auto* sub : app.get_subcommands({})) sub->add_option("--config", "key = value file of flags")->expected(1);

  if (args.empty()) {
    out << app.help();
    return 2;
  }

  try {
    std::vector<std::string> argv = args;
    if (CLI::App* sub = app.get_subcommand_no_throw(args.front())) {
      std::vector<std::string> tail(args.begin() + 1, args.end());
      argv = expand_config(*sub, tail);
      argv.insert(argv.begin(), args.front());
    }
    std::reverse(argv.begin(), argv.end());
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "fovs: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    err << "fovs: " << e.what() << "\n";
    return 2;
  }

  try {
    if (synth_cmd->parsed()) {
      cmd_synth(synth_args, out);
    } else if (lift_cmd->parsed()) {
      cmd_lift(lift_streams, lift_span, lift_out, out);
    } else if (curate_cmd->parsed()) {
      cmd_curate(curate_args, out);
    } else if (train_cmd->parsed()) {
      cmd_train(train_args, out);
    } else if (eval_cmd->parsed()) {
      cmd_eval(eval_args, eval_format, eval_out, out);
    } else if (p2_cmd->parsed()) {
      cmd_project2d(p2_args, p2_steps, p2_score, p2_out, out);
    } else if (bench_cmd->parsed()) {
      StreamFlags s{bench_points, bench_trajectory, bench_gaze};
      if (s.given()) {
        s.require_all();
        bench_opts.points = bench_points;
        bench_opts.trajectory = bench_trajectory;
        bench_opts.gaze = bench_gaze;
      }
      if (!bench_checkpoint.empty()) bench_opts.checkpoint = bench_checkpoint;
      const LatencyReport report = run_bench(bench_opts);
      write_text(bench_out, bench_format == "json" ? latency_json(report) : latency_table(report), out);
    } else {
      out << app.help();
      return 2;
    }
  } catch (const UsageError& e) {
    err << "fovs: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "fovs: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace fovs::cli
