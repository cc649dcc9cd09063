// Command-line front end: dataset utilities, training, evaluation and plots.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "transrac/transrac.hpp"

namespace fs = std::filesystem;
using namespace transrac;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::string fmt(double v) { return detail::format_double(v); }

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

int cmd_stats(const std::string& csv) {
  const DatasetStats s = dataset_stats(load_annotations(csv));
  std::cout << "num_videos      " << s.num_videos << '\n'
            << "duration_mean_s " << fmt(s.duration_mean) << '\n'
            << "duration_std_s  " << fmt(s.duration_std) << '\n'
            << "duration_min_s  " << fmt(s.duration_min) << '\n'
            << "duration_max_s  " << fmt(s.duration_max) << '\n'
            << "count_mean      " << fmt(s.count_mean) << '\n'
            << "count_std       " << fmt(s.count_std) << '\n'
            << "count_min       " << s.count_min << '\n'
            << "count_max       " << s.count_max << '\n';
  return 0;
}

int cmd_split(const std::string& csv, const std::string& mode, std::uint64_t seed,
              const std::vector<double>& ratios, const fs::path& out) {
  SplitMode m;
  if (mode == "regular") m = SplitMode::regular;
  else if (mode == "open-set") m = SplitMode::open_set;
  else throw ValidationError("unknown split mode '" + mode + "'");
  if (ratios.size() != 3) throw ValidationError("--ratios needs three values");
  const Split split =
      split_dataset(load_annotations(csv), m, seed, {ratios[0], ratios[1], ratios[2]});
  fs::create_directories(out);
  auto write_ids = [&](const char* name, const std::vector<std::string>& ids) {
    std::string text;
    for (const auto& id : ids) text += id + '\n';
    io::write_file(out / name, text);
  };
  write_ids("train.txt", split.train);
  write_ids("val.txt", split.val);
  write_ids("test.txt", split.test);
  std::cout << "train " << split.train.size() << ", val " << split.val.size() << ", test "
            << split.test.size() << '\n';
  return 0;
}

int cmd_synth(const std::string& spec_path, std::uint64_t seed, const fs::path& out) {
  const SynthSetSpec spec = parse_synth_set_spec(io::read_file(spec_path));
  const auto videos = generate_synthetic_set(spec, seed);
  write_dataset(out, videos);
  std::cout << "wrote " << videos.size() << " videos to " << out.string() << '\n';
  return 0;
}

int cmd_make_targets(const std::string& csv, int n, const std::string& variant,
                     double sigma_floor, const fs::path& out) {
  const TargetVariant v = parse_target_variant(variant);
  fs::create_directories(out);
  for (const auto& rec : load_annotations(csv)) {
    const auto spans = map_cycles_to_samples(rec.cycles, rec.frame_count, n);
    const auto target = make_density_target(spans, n, v, sigma_floor);
    std::ostringstream os;
    os.precision(17);
    os << "frame,target\n";
    for (std::size_t k = 0; k < target.size(); ++k) os << k << ',' << target[k] << '\n';
    io::write_file(out / (rec.video_id + ".csv"), os.str());
  }
  return 0;
}

void print_report(const GradReport& r) {
  for (const auto& t : r.tensors)
    std::printf("%-36s max_rel_err %.3e  checked %zu  skipped %zu%s\n", t.name.c_str(),
                t.max_rel_error, t.checked, t.skipped, t.under_sampled ? "  (too few checked)" : "");
  std::printf("global max relative error %.3e (threshold %.1e): %s\n", r.global_max, r.threshold,
              r.pass ? "PASS" : "FAIL");
}

int cmd_gradcheck(const std::string& config_path, std::uint64_t seed, double eps) {
  TrainConfig tc = parse_train_config(io::read_file(config_path));
  GradCheckOptions opt;
  opt.eps = eps;
  const GradReport r = grad_check(tc.model_config(), seed, opt);
  print_report(r);
  return r.pass ? 0 : kExitRuntime;
}

fs::path default_loss_path(const fs::path& model) {
  fs::path p = model;
  p.replace_extension(".loss.csv");
  return p;
}

template <typename T>
int train_with(const TrainConfig& tc, const ModelConfig& mc, const fs::path& data,
               const fs::path& out, const fs::path& loss_csv) {
  const auto examples = load_examples<T>(data, mc, tc.variant, tc.sigma_floor);
  const auto result = train<T>(examples, tc, mc, [&](int step, double loss) {
    if ((step + 1) % 100 == 0 || step + 1 == tc.steps)
      std::fprintf(stderr, "step %d loss %.6g\n", step + 1, loss);
  });
  ensure_parent(out);
  ensure_parent(loss_csv);
  save_checkpoint(out, result.params);
  std::ostringstream os;
  os.precision(17);
  os << "step,loss\n";
  for (std::size_t i = 0; i < result.history.size(); ++i) os << i << ',' << result.history[i] << '\n';
  io::write_file(loss_csv, os.str());
  return 0;
}

int cmd_train(const std::string& config_path, const fs::path& data, const fs::path& out,
              fs::path loss_csv) {
  TrainConfig tc = parse_train_config(io::read_file(config_path));
  const auto records = load_annotations(data / kAnnotationFile);
  if (records.empty()) throw ValidationError("train: no videos in " + data.string());
  const Tensor<float> probe = read_racf(feature_path(data, records.front().video_id));
  tc.grid_h = static_cast<int>(probe.dim(1));
  tc.grid_w = static_cast<int>(probe.dim(2));
  tc.feature_dim = static_cast<int>(probe.dim(3));
  const ModelConfig mc = tc.model_config();
  if (loss_csv.empty()) loss_csv = default_loss_path(out);
  return tc.precision == "float32" ? train_with<float>(tc, mc, data, out, loss_csv)
                                   : train_with<double>(tc, mc, data, out, loss_csv);
}

FeatureLoader dir_loader(const fs::path& data) {
  return [data](const VideoRecord& rec) { return read_racf(feature_path(data, rec.video_id)); };
}

int cmd_eval(const fs::path& model, const fs::path& data, const fs::path& report, bool round) {
  const auto params = load_checkpoint<double>(model);
  const auto records = load_annotations(data / kAnnotationFile);
  const EvalResult r = evaluate(params, records, dir_loader(data), {round});
  ensure_parent(report);
  io::write_file(report, format_eval_report(r));
  std::printf("videos %zu  MAE %.4f  OBO %.4f\n", r.rows.size(), r.mae, r.obo);
  for (const auto& row : r.rows)
    if (row.excluded_from_mae) std::printf("note: %s has zero cycles, excluded from MAE\n", row.video_id.c_str());
  for (const auto& f : r.failures)
    std::fprintf(stderr, "error: %s: %s\n", f.video_id.c_str(), f.message.c_str());
  return r.failures.empty() ? 0 : kExitRuntime;
}

int cmd_plot(const fs::path& model, const fs::path& data, const std::string& video,
             const std::string& variant, const fs::path& out) {
  const auto params = load_checkpoint<double>(model);
  const auto records = load_annotations(data / kAnnotationFile);
  const auto it = std::find_if(records.begin(), records.end(),
                               [&](const VideoRecord& r) { return r.video_id == video; });
  if (it == records.end()) throw ValidationError("video '" + video + "' not in annotations");
  const auto ex = make_example<double>(*it, read_racf(feature_path(data, video)), params.config,
                                       parse_target_variant(variant));
  const auto pred = forward(params, ex.features);
  ensure_parent(out);
  emit_plot(pred.data, ex.target.data, out);
  std::printf("%s: predicted %.4f, annotated %d\n", video.c_str(), count_from_density(pred),
              it->count());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Repetitive action counting: density-map regression over temporal correlation"};
  app.require_subcommand(1);

  std::string csv, mode = "regular", spec, config, variant = "mid", video;
  std::uint64_t seed = 0;
  std::vector<double> ratios{0.6, 0.2, 0.2};
  std::string out, data, model, report, loss_csv;
  int n = 64;
  double sigma_floor = kDefaultSigmaFloor, eps = 1e-5;
  bool round = false;

  auto* stats = app.add_subcommand("stats", "Dataset statistics of an annotation CSV");
  stats->add_option("annotations", csv, "Annotation CSV")->required();

  auto* split = app.add_subcommand("split", "Write train/val/test id lists");
  split->add_option("annotations", csv, "Annotation CSV")->required();
  split->add_option("--mode", mode, "regular | open-set");
  split->add_option("--seed", seed);
  split->add_option("--ratios", ratios, "train val test")->delimiter(',')->expected(3);
  split->add_option("--out", out)->required();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset (RACF + CSV)");
  synth->add_option("--spec", spec, "Synthetic set JSON")->required();
  synth->add_option("--seed", seed);
  synth->add_option("--out", out)->required();

  auto* targets = app.add_subcommand("make-targets", "Write density-map targets per video");
  targets->add_option("annotations", csv, "Annotation CSV")->required();
  targets->add_option("--n", n, "Sampled frames");
  targets->add_option("--variant", variant, "begin | mid | end | merge");
  targets->add_option("--sigma-floor", sigma_floor);
  targets->add_option("--out", out)->required();

  auto* grad = app.add_subcommand("gradcheck", "Verify gradients by central differences");
  grad->add_option("--config", config, "Train config JSON")->required();
  grad->add_option("--seed", seed);
  grad->add_option("--eps", eps);

  auto* trn = app.add_subcommand("train", "Train on a dataset directory");
  trn->add_option("--config", config, "Train config JSON")->required();
  trn->add_option("--data", data, "Dataset directory")->required();
  trn->add_option("--out", out, "Checkpoint path (.racw)")->required();
  trn->add_option("--loss-csv", loss_csv, "Loss history path (default <out>.loss.csv)");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint (MAE / OBO)");
  ev->add_option("--model", model)->required();
  ev->add_option("--data", data)->required();
  ev->add_option("--report", report)->required();
  ev->add_flag("--round", round, "Round predicted counts before scoring");

  auto* plt = app.add_subcommand("plot", "Emit density-map CSV and PGM for one video");
  plt->add_option("--model", model)->required();
  plt->add_option("--data", data)->required();
  plt->add_option("--video", video)->required();
  plt->add_option("--variant", variant, "Target variant drawn in row 2");
  plt->add_option("--out", out, "Output prefix")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*stats) return cmd_stats(csv);
    if (*split) return cmd_split(csv, mode, seed, ratios, out);
    if (*synth) return cmd_synth(spec, seed, out);
    if (*targets) return cmd_make_targets(csv, n, variant, sigma_floor, out);
    if (*grad) return cmd_gradcheck(config, seed, eps);
    if (*trn) return cmd_train(config, data, out, loss_csv);
    if (*ev) return cmd_eval(model, data, report, round);
    if (*plt) return cmd_plot(model, data, video, variant, out);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
