#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "densepoint/decoder.hpp"
#include "densepoint/errors.hpp"
#include "densepoint/io.hpp"
#include "densepoint/losses.hpp"
#include "densepoint/metrics.hpp"
#include "densepoint/micronet.hpp"
#include "densepoint/supervision.hpp"
#include "densepoint/synthcrowd.hpp"
#include "densepoint/train.hpp"

namespace densepoint::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::uint64_t RunManifest::config_digest() const { return fnv1a64(config_json); }

std::string RunManifest::to_json() const {
  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(config_digest()));
  json j;
  j["command"] = command;
  j["config"] = json::parse(config_json);
  j["config_digest"] = digest;
  j["seed"] = seed;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["version"] = kToolkitVersion;
  return j.dump(2) + "\n";
}

namespace {

struct SceneOptions {
  SceneConfig scene;
  std::size_t n_train = 200;
  std::size_t n_val = 50;
  std::size_t n_test = 50;
};

struct TrainOptions {
  std::string data;
  std::string out;
  TrainConfig train;
  LossConfig loss;
  SupervisionConfig sup;
  bool quiet = false;
};

struct EvalOptions {
  std::string data;
  std::string checkpoint;
  std::string out;
  DecodeConfig decode;
  std::string val_split = "val";
  std::string test_split = "test";
  bool json_output = false;
};

struct TargetOptions {
  std::string data;
  std::string split = "train";
  std::string out;
  SupervisionConfig sup;
};

struct PlotOptions {
  std::string data;
  std::string split = "test";
  std::size_t index = 0;
  std::string checkpoint;
  std::string grid;
  std::string out;
  double threshold = 0.4;
  SupervisionConfig sup;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  }
}

void require_dir(const std::string& path, const char* what) {
  if (!fs::is_directory(path)) {
    throw IoError(std::string(what) + " '" + path + "' does not exist");
  }
}

json supervision_json(const SupervisionConfig& s) {
  return {{"sigma_c", s.sigma_c},
          {"knn_k", s.knn_k},
          {"sigma_coeff", s.sigma_coeff},
          {"sigma_d_min", s.sigma_d_min},
          {"truncate_radius_sigmas", s.truncate_radius_sigmas},
          {"density_stride", s.density_stride}};
}

void write_manifest(const fs::path& dir, const RunManifest& m) {
  write_text_file(dir / ("manifest." + m.command + ".json"), m.to_json());
}

void add_supervision_flags(CLI::App* app, SupervisionConfig& s) {
  app->add_option("--sigma-c", s.sigma_c, "Density kernel std in output pixels")
      ->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--knn-k", s.knn_k, "Neighbours for the adaptive heatmap sigma")
      ->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--sigma-coeff", s.sigma_coeff, "Heatmap sigma = coeff * sum of k-NN distances")
      ->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--sigma-d-min", s.sigma_d_min, "Heatmap sigma floor")
      ->check(CLI::PositiveNumber)->capture_default_str();
}

int cmd_gen_data(const SceneOptions& o, const std::string& out_dir, std::ostream& out) {
  const DatasetSplit split = generate_split(o.scene, o.n_train, o.n_val, o.n_test, o.scene.seed);
  const fs::path dir(out_dir);
  ensure_dir(dir);
  write_split(dir, "train", split.train);
  write_split(dir, "val", split.val);
  write_split(dir, "test", split.test);

  RunManifest m;
  m.command = "gen-data";
  m.seed = o.scene.seed;
  m.config_json = json{{"image_size", o.scene.image_size},
                       {"count_min", o.scene.count_min},
                       {"count_max", o.scene.count_max},
                       {"radius_min", o.scene.radius_min},
                       {"radius_max", o.scene.radius_max},
                       {"min_separation", o.scene.min_separation},
                       {"noise_std", o.scene.noise_std},
                       {"seed", o.scene.seed},
                       {"train", o.n_train},
                       {"val", o.n_val},
                       {"test", o.n_test}}
                      .dump();
  m.outputs = {"train.json", "train/", "val.json", "val/", "test.json", "test/"};
  write_manifest(dir, m);
  out << "wrote " << split.train.size() << " train, " << split.val.size() << " val, "
      << split.test.size() << " test scenes to " << dir.string() << "\n";
  return kOk;
}

int cmd_targets(const TargetOptions& o, std::ostream& out) {
  require_dir(o.data, "dataset directory");
  const auto records = read_split(o.data, o.split);
  const fs::path dir(o.out);
  ensure_dir(dir);
  for (const ImageRecord& r : records) {
    store_grid(make_heatmap(r, o.sup), dir / (r.id + "_heatmap.dpg"));
    store_grid(make_density(r, o.sup), dir / (r.id + "_density.dpg"));
  }
  RunManifest m;
  m.command = "targets";
  m.config_json = json{{"split", o.split}, {"supervision", supervision_json(o.sup)}}.dump();
  m.inputs = {o.data};
  m.outputs = {"<id>_heatmap.dpg", "<id>_density.dpg"};
  write_manifest(dir, m);
  out << "wrote targets for " << records.size() << " images to " << dir.string() << "\n";
  return kOk;
}

json train_config_json(const TrainOptions& o) {
  return {{"epochs", o.train.epochs},
          {"batch", o.train.batch},
          {"lr", o.train.adam.lr},
          {"beta1", o.train.adam.beta1},
          {"beta2", o.train.adam.beta2},
          {"adam_eps", o.train.adam.eps},
          {"crop", o.train.crop},
          {"flip_prob", o.train.flip_prob},
          {"seed", o.train.seed},
          {"gamma", o.loss.gamma},
          {"delta", o.loss.delta},
          {"lambda1", o.loss.lambda1},
          {"lambda2", o.loss.lambda2},
          {"fp_thresh", o.loss.fp_region_thresh},
          {"prob_eps", o.loss.prob_eps},
          {"supervision", supervision_json(o.sup)},
          {"architecture", default_micronet_spec().describe()}};
}

int cmd_train(const TrainOptions& o, std::ostream& out) {
  require_dir(o.data, "dataset directory");
  const auto records = read_split(o.data, "train");
  const fs::path dir(o.out);
  ensure_dir(dir);

  // Initialisation and the training stream use separate derived seeds.
  Rng init_rng(mix64(o.train.seed ^ 0x696e6974ULL));
  MicroNet net = MicroNet::initialized(default_micronet_spec(), init_rng);
  const TrainResult result = train(net, records, o.train, o.loss, o.sup, [&](const EpochLoss& e) {
    if (!o.quiet) {
      char line[160];
      std::snprintf(line, sizeof line, "epoch %4d  l_nsf %.5f  l_fp %.5f  l_r %.6g  total %.5f\n",
                    e.epoch, e.nsf, e.fp, e.reg, e.total);
      out << line << std::flush;
    }
  });

  save_checkpoint(net, dir / "checkpoint.dpw");
  write_text_file(dir / "loss_curve.csv", loss_curve_csv(result.curve));
  RunManifest m;
  m.command = "train";
  m.seed = o.train.seed;
  m.config_json = train_config_json(o).dump();
  m.inputs = {o.data};
  m.outputs = {"checkpoint.dpw", "loss_curve.csv"};
  write_manifest(dir, m);
  out << "trained " << result.steps << " steps; checkpoint at " << (dir / "checkpoint.dpw").string()
      << "\n";
  return kOk;
}

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  require_dir(o.data, "dataset directory");
  const MicroNet net = load_checkpoint(o.checkpoint, default_micronet_spec());
  const auto val = read_split(o.data, o.val_split);
  const auto test = read_split(o.data, o.test_split);
  if (val.empty() || test.empty()) {
    throw ValidationError("eval: validation and test splits must be non-empty");
  }

  std::vector<ValidationImage> val_items;
  val_items.reserve(val.size());
  for (const ImageRecord& r : val) {
    if (!r.pixels) throw ValidationError("eval: record '" + r.id + "' has no pixels");
    val_items.push_back({net.forward(*r.pixels).heatmap, r});
  }
  DecodeConfig decode_cfg = o.decode;
  decode_cfg.threshold = search_threshold(val_items, o.decode, MatchMode::large);

  std::vector<ImageEvaluation> evals;
  evals.reserve(test.size());
  std::ostringstream jsonl;
  for (const ImageRecord& r : test) {
    if (!r.pixels) throw ValidationError("eval: record '" + r.id + "' has no pixels");
    const Prediction p = net.forward(*r.pixels);
    ImageEvaluation e{decode(p.heatmap, decode_cfg), r, count_from_density(p.density)};
    write_detections_jsonl(jsonl, r.id, e.detections);
    evals.push_back(std::move(e));
  }
  EvalReport report = evaluate(evals);
  report.threshold = decode_cfg.threshold;

  if (!o.out.empty()) {
    const fs::path dir(o.out);
    ensure_dir(dir);
    write_text_file(dir / "report.json", report_to_json(report) + "\n");
    write_text_file(dir / "detections.jsonl", jsonl.str());
    RunManifest m;
    m.command = "eval";
    m.config_json = json{{"search_lo", o.decode.search_lo},
                         {"search_hi", o.decode.search_hi},
                         {"search_step", o.decode.search_step},
                         {"val_split", o.val_split},
                         {"test_split", o.test_split}}
                        .dump();
    m.inputs = {o.data, o.checkpoint};
    m.outputs = {"report.json", "detections.jsonl"};
    write_manifest(dir, m);
  }
  out << (o.json_output ? report_to_json(report) + "\n" : report_to_table(report));
  return kOk;
}

int cmd_plot(const PlotOptions& o, std::ostream& out) {
  const fs::path dir(o.out);
  if (!o.grid.empty()) {
    const DenseGrid g = load_grid(o.grid);
    ensure_dir(dir);
    const fs::path target = dir / (fs::path(o.grid).stem().string() + ".pgm");
    export_pgm(g, target, true);
    out << "wrote " << target.string() << "\n";
    return kOk;
  }
  require_dir(o.data, "dataset directory");
  const auto records = read_split(o.data, o.split);
  if (o.index >= records.size()) {
    throw ValidationError("plot: index " + std::to_string(o.index) + " out of range for split '" +
                          o.split + "' (" + std::to_string(records.size()) + " images)");
  }
  const ImageRecord& r = records[o.index];
  if (!r.pixels) {
    throw ValidationError("plot: record '" + r.id + "' has no pixels");
  }
  ensure_dir(dir);

  DenseGrid heat(1, 1), density(1, 1);
  RgbImage overlay = RgbImage::from_gray(*r.pixels, false);
  const std::string tag = o.checkpoint.empty() ? "gt" : "pred";
  if (o.checkpoint.empty()) {
    heat = make_heatmap(r, o.sup);
    density = make_density(r, o.sup);
    for (const PointAnnotation& p : r.points) {
      overlay.draw_circle(p.x, p.y, 3.0, {0, 255, 0});
    }
  } else {
    const MicroNet net = load_checkpoint(o.checkpoint, default_micronet_spec());
    Prediction p = net.forward(*r.pixels);
    DecodeConfig cfg;
    cfg.threshold = o.threshold;
    for (const Detection& d : decode(p.heatmap, cfg)) {
      overlay.draw_circle(d.x, d.y, 3.0, {255, 255, 0});
    }
    heat = std::move(p.heatmap);
    density = std::move(p.density);
  }
  export_pgm(*r.pixels, dir / (r.id + "_input.pgm"), false);
  export_pgm(heat, dir / (r.id + "_" + tag + "_heatmap.pgm"), false);
  export_pgm(density, dir / (r.id + "_" + tag + "_density.pgm"), true);
  export_ppm(overlay, dir / (r.id + "_" + tag + "_overlay.ppm"));
  char line[128];
  std::snprintf(line, sizeof line, "%s: %zu annotated heads, density sum %.3f\n", r.id.c_str(),
                r.points.size(), density.sum());
  out << line;
  return kOk;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"densepoint: dense point supervision, losses, decoding and evaluation for crowd "
               "counting and localization"};
  app.require_subcommand(1);

  SceneOptions scene;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "Generate synthetic train/val/test scenes");
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_option("--train", scene.n_train, "Training scenes")->capture_default_str();
  gen->add_option("--val", scene.n_val, "Validation scenes")->capture_default_str();
  gen->add_option("--test", scene.n_test, "Test scenes")->capture_default_str();
  gen->add_option("--seed", scene.scene.seed, "Master seed")->capture_default_str();
  gen->add_option("--image-size", scene.scene.image_size)->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--count-min", scene.scene.count_min)->check(CLI::NonNegativeNumber)->capture_default_str();
  gen->add_option("--count-max", scene.scene.count_max)->check(CLI::NonNegativeNumber)->capture_default_str();
  gen->add_option("--radius-min", scene.scene.radius_min)->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--radius-max", scene.scene.radius_max)->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--min-separation", scene.scene.min_separation)->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--noise-std", scene.scene.noise_std)->check(CLI::NonNegativeNumber)->capture_default_str();

  TargetOptions targets;
  auto* tgt = app.add_subcommand("targets", "Write heatmap and density targets as DPG1 grids");
  tgt->add_option("--data", targets.data, "Dataset directory")->required();
  tgt->add_option("--split", targets.split)->capture_default_str();
  tgt->add_option("--out", targets.out, "Output directory")->required();
  add_supervision_flags(tgt, targets.sup);

  TrainOptions topt;
  auto* trn = app.add_subcommand("train", "Train the two-head network");
  trn->add_option("--data", topt.data, "Dataset directory")->required();
  trn->add_option("--out", topt.out, "Run directory")->required();
  trn->add_option("--epochs", topt.train.epochs)->check(CLI::NonNegativeNumber)->capture_default_str();
  trn->add_option("--batch", topt.train.batch)->check(CLI::PositiveNumber)->capture_default_str();
  trn->add_option("--lr", topt.train.adam.lr, "Adam learning rate")->check(CLI::NonNegativeNumber)->capture_default_str();
  trn->add_option("--crop", topt.train.crop, "Square crop size")->check(CLI::PositiveNumber)->capture_default_str();
  trn->add_option("--flip-prob", topt.train.flip_prob)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  trn->add_option("--seed", topt.train.seed)->capture_default_str();
  trn->add_option("--gamma", topt.loss.gamma, "Focal exponent")->check(CLI::NonNegativeNumber)->capture_default_str();
  trn->add_option("--delta", topt.loss.delta, "Negative relief exponent near heads")->check(CLI::NonNegativeNumber)->capture_default_str();
  trn->add_option("--lambda1", topt.loss.lambda1, "False-positive loss weight")->check(CLI::NonNegativeNumber)->capture_default_str();
  trn->add_option("--lambda2", topt.loss.lambda2, "Density regression loss weight")->check(CLI::NonNegativeNumber)->capture_default_str();
  trn->add_option("--fp-thresh", topt.loss.fp_region_thresh, "False-positive region threshold")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  trn->add_flag("--quiet", topt.quiet, "Do not print per-epoch losses");
  add_supervision_flags(trn, topt.sup);

  EvalOptions eopt;
  auto* evl = app.add_subcommand("eval", "Search the decode threshold on val, then score test");
  evl->add_option("--data", eopt.data, "Dataset directory")->required();
  evl->add_option("--checkpoint", eopt.checkpoint, "Checkpoint written by train")->required();
  evl->add_option("--out", eopt.out, "Directory for report.json and detections.jsonl");
  evl->add_option("--search-lo", eopt.decode.search_lo)->capture_default_str();
  evl->add_option("--search-hi", eopt.decode.search_hi)->capture_default_str();
  evl->add_option("--search-step", eopt.decode.search_step)->check(CLI::PositiveNumber)->capture_default_str();
  evl->add_option("--val-split", eopt.val_split)->capture_default_str();
  evl->add_option("--test-split", eopt.test_split)->capture_default_str();
  evl->add_flag("--json", eopt.json_output, "Print the report as JSON");

  PlotOptions popt;
  auto* plt = app.add_subcommand("plot", "Export heatmap, density and overlay images");
  plt->add_option("--data", popt.data, "Dataset directory");
  plt->add_option("--split", popt.split)->capture_default_str();
  plt->add_option("--index", popt.index, "Image index within the split")->capture_default_str();
  plt->add_option("--checkpoint", popt.checkpoint, "Plot predictions instead of targets");
  plt->add_option("--threshold", popt.threshold, "Decode threshold for the overlay")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  plt->add_option("--grid", popt.grid, "Render a single DPG1 grid file instead");
  plt->add_option("--out", popt.out, "Output directory")->required();
  add_supervision_flags(plt, popt.sup);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen_data(scene, gen_out, out);
    if (*tgt) return cmd_targets(targets, out);
    if (*trn) return cmd_train(topt, out);
    if (*evl) return cmd_eval(eopt, out);
    if (*plt) {
      if (popt.grid.empty() && popt.data.empty()) {
        err << "plot: one of --data or --grid is required\n";
        return kUsage;
      }
      return cmd_plot(popt, out);
    }
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace densepoint::cli
