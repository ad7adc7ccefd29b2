#include <cstdint>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "irmap/dataset.hpp"
#include "irmap/error.hpp"
#include "irmap/evaluation.hpp"
#include "irmap/io.hpp"
#include "irmap/model_file.hpp"
#include "irmap/pipeline.hpp"

namespace fs = std::filesystem;
using namespace irmap;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Mode mode_arg(const std::string& s) {
  const auto m = parse_mode(s);
  if (!m) throw UsageError("unknown mode '" + s + "' (expected On, In or Off)");
  return *m;
}

struct PhantomOptions {
  int width = 320;
  int height = 240;
  int frames = 60;
  double noise = 0.03;
  std::string contrast = "default";
  int max_tumors = 2;
  double vessel_probability = 0.5;
  double damaged_probability = 0.3;
  double max_drift = 1.0;

  void add_to(CLI::App* app) {
    app->add_option("--width", width, "Frame width in pixels")->capture_default_str();
    app->add_option("--height", height, "Frame height in pixels")->capture_default_str();
    app->add_option("--frames", frames, "Frames per sequence")->capture_default_str();
    app->add_option("--noise", noise, "Sensor noise sigma, C")->capture_default_str();
    app->add_option("--contrast", contrast, "Zone dynamics: default or reduced")
        ->check(CLI::IsMember({"default", "reduced"}))
        ->capture_default_str();
    app->add_option("--max-tumors", max_tumors, "Upper bound on tumors per phantom")->capture_default_str();
    app->add_option("--vessel-probability", vessel_probability)->capture_default_str();
    app->add_option("--damaged-probability", damaged_probability)->capture_default_str();
    app->add_option("--max-drift", max_drift, "Bound of the random-walk drift, px")->capture_default_str();
  }

  phantom::ConfigSampler sampler() const {
    phantom::ConfigSampler s;
    s.base.width = width;
    s.base.height = height;
    s.base.n_frames = frames;
    s.base.noise_sigma = noise;
    s.base.recovery = contrast == "reduced" ? phantom::reduced_contrast_recovery() : phantom::default_recovery();
    s.max_tumors = max_tumors;
    s.vessel_probability = vessel_probability;
    s.damaged_probability = damaged_probability;
    s.max_drift = max_drift;
    return s;
  }
};

pipeline::PipelineConfig load_config(const std::string& path) {
  return path.empty() ? pipeline::PipelineConfig{} : pipeline::read_config(path);
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    io::atomic_write(path, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active IR-thermal zone mapping: phantoms, training, inference and evaluation"};
  app.require_subcommand(1);
  std::function<void()> run;

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic phantom dataset");
  struct {
    std::optional<int> n;
    std::string mode_mix = "On=1";
    std::uint64_t seed = 0;
    std::string out;
    PhantomOptions phantom;
  } gen_args;
  gen->add_option("--n", gen_args.n, "Number of sequences (mode mix used as proportions)");
  gen->add_option("--mode-mix", gen_args.mode_mix, "Counts per mode, e.g. On=28,In=42,Off=1")->capture_default_str();
  gen->add_option("--seed", gen_args.seed)->capture_default_str();
  gen->add_option("--out", gen_args.out, "Output directory")->required();
  gen_args.phantom.add_to(gen);
  gen->callback([&] {
    run = [&] {
      ModeMix mix;
      try {
        mix = parse_mode_mix(gen_args.mode_mix);
      } catch (const DataError& e) {
        throw UsageError(e.what());
      }
      if (gen_args.n) {
        if (*gen_args.n < 0) throw UsageError("--n must be >= 0");
        mix = scale_mode_mix(mix, *gen_args.n);
      }
      const auto manifest = make_dataset(gen_args.out, mix, gen_args.phantom.sampler(), gen_args.seed);
      std::cout << "wrote " << manifest.entries.size() << " sequences to " << gen_args.out << "\n";
    };
  });

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Register a sequence and delete damaged frames");
  struct {
    std::string in, report, out, config;
  } pre_args;
  pre->add_option("--in", pre_args.in, "Input sequence (.irts)")->required();
  pre->add_option("--report", pre_args.report, "Report file ('-' for stdout)");
  pre->add_option("--out", pre_args.out, "Write the cleaned sequence here");
  pre->add_option("--config", pre_args.config, "Pipeline configuration file");
  pre->callback([&] {
    run = [&] {
      const auto config = load_config(pre_args.config);
      const auto cleaned = pipeline::clean_sequence(io::read_sequence(pre_args.in), config);
      if (!pre_args.out.empty()) io::write_sequence(pre_args.out, cleaned.sequence);
      emit(pre_args.report, cleaned.report.to_text());
    };
  });

  // train
  auto* train = app.add_subcommand("train", "Train a classifier cascade");
  struct {
    std::string manifest, backend, mode = "On", config, model_out;
    std::uint64_t seed = 0;
  } train_args;
  train->add_option("--manifest", train_args.manifest, "Training manifest")->required();
  train->add_option("--backend", train_args.backend, "rf or sdae")->required()->check(CLI::IsMember({"rf", "sdae"}));
  train->add_option("--mode", train_args.mode, "On, In or Off")->capture_default_str();
  train->add_option("--config", train_args.config, "Pipeline configuration file");
  train->add_option("--seed", train_args.seed)->capture_default_str();
  train->add_option("--model-out", train_args.model_out, "Model file to write")->required();
  train->callback([&] {
    run = [&] {
      const auto config = load_config(train_args.config);
      const auto manifest = read_manifest(train_args.manifest);
      const auto model = pipeline::train_from_manifest(manifest, mode_arg(train_args.mode),
                                                       *models::parse_backend(train_args.backend), config,
                                                       train_args.seed);
      io::write_model(train_args.model_out, model);
      std::cout << "trained " << models::to_string(model.backend) << " cascade for mode " << to_string(model.mode)
                << "\n";
      for (auto st : models::kAllStages) {
        if (!model.stage(st)) continue;
        const auto& a = model.available[static_cast<std::size_t>(st)];
        std::cout << "  " << models::to_string(st) << ": negative=" << a.negative << " positive=" << a.positive
                  << "\n";
      }
    };
  });

  // infer
  auto* inf = app.add_subcommand("infer", "Map zones of one sequence");
  struct {
    std::string model, in, zpr = "auto", config, out_mask, out_probs, report;
    std::optional<double> alpha, beta;
  } inf_args;
  inf->add_option("--model", inf_args.model, "Model file")->required();
  inf->add_option("--in", inf_args.in, "Input sequence (.irts)")->required();
  inf->add_option("--zpr", inf_args.zpr, "A priori mask (.pgm) or 'auto'")->capture_default_str();
  inf->add_option("--alpha", inf_args.alpha, "Target HA false-alarm rate");
  inf->add_option("--beta", inf_args.beta, "Target HA miss rate");
  inf->add_option("--config", inf_args.config, "Pipeline configuration file");
  inf->add_option("--out-mask", inf_args.out_mask, "Output mask (.pgm)")->required();
  inf->add_option("--out-probs", inf_args.out_probs, "Output leaf probabilities (.irtn)");
  inf->add_option("--report", inf_args.report, "Thresholds and component report ('-' for stdout)");
  inf->callback([&] {
    run = [&] {
      auto config = load_config(inf_args.config);
      if (inf_args.alpha) config.alpha = *inf_args.alpha;
      if (inf_args.beta) config.beta = *inf_args.beta;
      const auto model = io::read_model(inf_args.model);
      const auto seq = io::read_sequence(inf_args.in);
      std::optional<post::PriorMask> prior;
      if (inf_args.zpr != "auto") {
        const auto zpr = io::read_mask(inf_args.zpr);
        if (zpr.mode != model.mode)
          throw DataError("a priori mask is mode " + std::string(to_string(zpr.mode)) + ", model is mode " +
                          std::string(to_string(model.mode)));
        prior = post::prior_from_mask(zpr.mask);
      }
      const auto result = pipeline::infer(model, seq, prior ? &*prior : nullptr, config);
      io::write_mask(inf_args.out_mask, result.mask, model.mode);
      if (!inf_args.out_probs.empty()) io::write_tensor(inf_args.out_probs, io::to_tensor(result.smoothed));
      if (!inf_args.report.empty())
        emit(inf_args.report,
             result.preprocess.to_text() + result.thresholds.to_text() + result.components.to_text());
    };
  });

  // eval
  auto* ev = app.add_subcommand("eval", "Score predicted masks against references");
  struct {
    std::vector<std::string> pred, ref;
    std::string format = "table", name = "Alg";
  } ev_args;
  ev->add_option("--pred", ev_args.pred, "Predicted masks")->required();
  ev->add_option("--ref", ev_args.ref, "Reference masks, paired in order with --pred")->required();
  ev->add_option("--format", ev_args.format, "table or kv")->check(CLI::IsMember({"table", "kv"}))->capture_default_str();
  ev->add_option("--name", ev_args.name, "Model name in the report")->capture_default_str();
  ev->callback([&] {
    run = [&] {
      if (ev_args.pred.size() != ev_args.ref.size()) throw UsageError("--pred and --ref need the same number of masks");
      eval::ModelReport report;
      report.model = ev_args.name;
      for (std::size_t i = 0; i < ev_args.pred.size(); ++i) {
        const auto pred = io::read_mask(ev_args.pred[i]);
        const auto ref = io::read_mask(ev_args.ref[i]);
        report.add(fs::path(ev_args.ref[i]).stem().string(), pred.mask, ref.mask);
      }
      std::cout << (ev_args.format == "kv" ? eval::format_kv({report}) : eval::format_table({report}));
    };
  });

  // render
  auto* ren = app.add_subcommand("render", "Draw reference and algorithm boundaries over the mean frame");
  struct {
    std::string seq, ref, alg, out;
    bool frame_border = false;
  } ren_args;
  ren->add_option("--seq", ren_args.seq, "Sequence (.irts)")->required();
  ren->add_option("--ref", ren_args.ref, "Reference mask (.pgm)");
  ren->add_option("--alg", ren_args.alg, "Algorithm mask (.pgm)");
  ren->add_option("--out", ren_args.out, "Output image (.ppm)")->required();
  ren->add_flag("--frame-border", ren_args.frame_border, "Outline the IR frame edge");
  ren->callback([&] {
    run = [&] {
      const auto seq = io::read_sequence(ren_args.seq);
      std::optional<io::MaskFile> ref, alg;
      if (!ren_args.ref.empty()) ref = io::read_mask(ren_args.ref);
      if (!ren_args.alg.empty()) alg = io::read_mask(ren_args.alg);
      io::OverlayOptions options;
      options.frame_border = ren_args.frame_border;
      const auto image = io::render_overlay(io::mean_frame(seq), ref ? &ref->mask : nullptr,
                                            alg ? &alg->mask : nullptr, options);
      io::atomic_write(ren_args.out, io::encode_ppm(image));
    };
  });

  // e2e
  auto* e2e = app.add_subcommand("e2e", "Generate phantoms, train, infer and report");
  struct {
    std::uint64_t seed = 0;
    std::string out, mode = "On", backend = "both", config;
    int n_train = 40, n_test = 10;
    PhantomOptions phantom;
  } e2e_args;
  e2e->add_option("--seed", e2e_args.seed)->capture_default_str();
  e2e->add_option("--out", e2e_args.out, "Working directory")->required();
  e2e->add_option("--n-train", e2e_args.n_train)->capture_default_str();
  e2e->add_option("--n-test", e2e_args.n_test)->capture_default_str();
  e2e->add_option("--mode", e2e_args.mode)->capture_default_str();
  e2e->add_option("--backend", e2e_args.backend, "rf, sdae or both")
      ->check(CLI::IsMember({"rf", "sdae", "both"}))
      ->capture_default_str();
  e2e->add_option("--config", e2e_args.config, "Pipeline configuration file");
  e2e_args.phantom.add_to(e2e);
  e2e->callback([&] {
    run = [&] {
      pipeline::EndToEndOptions options;
      options.seed = e2e_args.seed;
      options.n_train = e2e_args.n_train;
      options.n_test = e2e_args.n_test;
      options.mode = mode_arg(e2e_args.mode);
      options.config = load_config(e2e_args.config);
      options.sampler = e2e_args.phantom.sampler();
      if (e2e_args.backend == "rf")
        options.backends = {models::Backend::RandomForest};
      else if (e2e_args.backend == "sdae")
        options.backends = {models::Backend::SDAE};
      std::cout << pipeline::run_end_to_end(options, e2e_args.out);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  try {
    if (run) run();
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "irmap: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "irmap: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "irmap: " << e.what() << "\n";
    return kExitData;
  }
}
