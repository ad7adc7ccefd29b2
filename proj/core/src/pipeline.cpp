#include "irmap/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "irmap/error.hpp"
#include "irmap/io.hpp"
#include "irmap/model_file.hpp"
#include "irmap/parallel.hpp"
#include "irmap/random.hpp"

namespace irmap::pipeline {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw DataError("config: bad value '" + value + "' for " + key);
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
  if (out.empty()) throw DataError("config: empty list for " + key);
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define IRMAP_FIELD(path, type)                                                                  \
  Field {                                                                                        \
    [](PipelineConfig& c, const std::string& k, const std::string& v) { c.path = parse_number<type>(k, v); }, \
        [](const PipelineConfig& c) {                                                            \
          if constexpr (std::is_floating_point_v<type>)                                          \
            return num(static_cast<double>(c.path));                                             \
          else                                                                                   \
            return std::to_string(c.path);                                                       \
        }                                                                                        \
  }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"registration.max_shift", IRMAP_FIELD(registration.max_shift, int)},
      {"registration.snap_px", IRMAP_FIELD(registration.snap_px, double)},
      {"registration.max_refinements", IRMAP_FIELD(registration.max_refinements, int)},
      {"damage.outlier_frac", IRMAP_FIELD(damage.outlier_frac, double)},
      {"damage.outlier_temp_dev", IRMAP_FIELD(damage.outlier_temp_dev, double)},
      {"damage.median_half_window", IRMAP_FIELD(damage.median_half_window, int)},
      {"fit.noise_floor", IRMAP_FIELD(fit.noise_floor, double)},
      {"fit.max_iterations", IRMAP_FIELD(fit.max_iterations, int)},
      {"fit.step_tolerance", IRMAP_FIELD(fit.step_tolerance, double)},
      {"fit.tau_min", IRMAP_FIELD(fit.tau_min, double)},
      {"fit.tau_max", IRMAP_FIELD(fit.tau_max, double)},
      {"rf.n_trees", IRMAP_FIELD(train.rf.n_trees, int)},
      {"rf.max_depth", IRMAP_FIELD(train.rf.max_depth, int)},
      {"rf.min_leaf", IRMAP_FIELD(train.rf.min_leaf, int)},
      {"rf.features_per_split", IRMAP_FIELD(train.rf.features_per_split, int)},
      {"sdae.hidden",
       Field{[](PipelineConfig& c, const std::string& k, const std::string& v) {
               c.train.sdae.hidden = parse_int_list(k, v);
             },
             [](const PipelineConfig& c) {
               std::string s;
               for (std::size_t i = 0; i < c.train.sdae.hidden.size(); ++i)
                 s += (i ? "," : "") + std::to_string(c.train.sdae.hidden[i]);
               return s;
             }}},
      {"sdae.corruption", IRMAP_FIELD(train.sdae.corruption, double)},
      {"sdae.learning_rate", IRMAP_FIELD(train.sdae.learning_rate, double)},
      {"sdae.batch_size", IRMAP_FIELD(train.sdae.batch_size, int)},
      {"sdae.pretrain_epochs", IRMAP_FIELD(train.sdae.pretrain_epochs, int)},
      {"sdae.finetune_epochs", IRMAP_FIELD(train.sdae.finetune_epochs, int)},
      {"sdae.patience", IRMAP_FIELD(train.sdae.patience, int)},
      {"sdae.holdout", IRMAP_FIELD(train.sdae.holdout, double)},
      {"train.max_samples_per_class", IRMAP_FIELD(train.max_samples_per_class, std::size_t)},
      {"train.min_samples_per_class", IRMAP_FIELD(train.min_samples_per_class, std::size_t)},
      {"train.standardizer_samples", IRMAP_FIELD(train.standardizer_samples, std::size_t)},
      {"calibration.fraction", IRMAP_FIELD(calibration_fraction, double)},
      {"calibration.samples_per_class", IRMAP_FIELD(calibration_samples_per_class, std::size_t)},
      {"post.alpha", IRMAP_FIELD(alpha, double)},
      {"post.beta", IRMAP_FIELD(beta, double)},
      {"post.pf_radius", IRMAP_FIELD(pf_radius, int)},
      {"post.min_area_mm2", IRMAP_FIELD(min_area_mm2, double)},
      {"post.connectivity",
       Field{[](PipelineConfig& c, const std::string& k, const std::string& v) {
               const int n = parse_number<int>(k, v);
               if (n != 4 && n != 8) throw DataError("config: post.connectivity must be 4 or 8");
               c.connectivity = n == 4 ? post::Connectivity::Four : post::Connectivity::Eight;
             },
             [](const PipelineConfig& c) { return std::to_string(static_cast<int>(c.connectivity)); }}},
      {"post.prior_margin", IRMAP_FIELD(prior_margin, int)},
  };
  return table;
}

#undef IRMAP_FIELD

std::string sequence_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "mask_%04zu.pgm", i);
  return buf;
}

}  // namespace

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw DataError("config line " + std::to_string(line_no) + ": expected key=value, got '" + t + "'");
    const std::string key = trim(t.substr(0, eq)), value = trim(t.substr(eq + 1));
    bool found = false;
    for (const auto& [name, field] : fields()) {
      if (name != key) continue;
      field.set(config, key, value);
      found = true;
      break;
    }
    if (!found) throw DataError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  return config;
}

std::string format_config(const PipelineConfig& config) {
  std::string s = "# irmap pipeline configuration\n";
  for (const auto& [name, field] : fields()) s += name + "=" + field.get(config) + "\n";
  return s;
}

PipelineConfig read_config(const std::filesystem::path& path) { return parse_config(io::read_text(path)); }

preprocess::Preprocessed clean_sequence(const ThermalSequence& raw, const PipelineConfig& config) {
  raw.validate();
  auto registered = preprocess::register_sequence(raw, config.registration);
  return preprocess::remove_damaged_frames(registered.sequence, std::move(registered.report), config.damage);
}

features::FeatureMap compute_features(const ThermalSequence& seq, const Grid<std::uint8_t>& valid,
                                      const preprocess::FitOptions& options) {
  if (valid.width() != seq.width() || valid.height() != seq.height())
    throw DataError("compute_features: validity mask does not match the sequence");
  features::FeatureMap map;
  map.width = seq.width();
  map.height = seq.height();
  map.values = features::Matrix(seq.frame_size(), features::kFeatureCount);
  map.usable.assign(seq.frame_size(), 0);
  const auto& times = seq.timestamps();
  const auto degenerate = features::degenerate_features();
  parallel_for(seq.frame_size(), [&](std::size_t i) {
    auto row = map.values.row(i);
    if (!valid[i]) {
      std::copy(degenerate.begin(), degenerate.end(), row.begin());
      return;
    }
    std::vector<double> series(times.size());
    seq.pixel_series(i, series);
    const auto fit = preprocess::fit_recovery(series, times, options);
    const auto f = features::extract_features(fit, series, times);
    std::copy(f.begin(), f.end(), row.begin());
    map.usable[i] = fit.degenerate ? 0 : 1;
  }, 64);
  return map;
}

Prepared prepare(const ThermalSequence& raw, const PipelineConfig& config) {
  auto cleaned = clean_sequence(raw, config);
  auto map = compute_features(cleaned.sequence, cleaned.report.valid, config.fit);
  return {std::move(cleaned), std::move(map)};
}

models::Calibration calibrate(const models::CascadeModel& model, std::span<const models::TrainingSequence> data,
                              const PipelineConfig& config, std::uint64_t seed) {
  std::array<std::vector<double>, 2> scores;
  for (const auto& seq : data) {
    const auto probs = post::probabilistic_filter(models::cascade_predict(model, seq.features, model.mode),
                                                  config.pf_radius);
    if (!probs.same_shape(seq.labels)) throw DataError("calibrate: labels do not match the feature map");
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const ZoneLabel z = seq.labels[i];
      if (is_working(z)) scores[is_tumor(z) ? 1 : 0].push_back(tumor_given_tissue(probs[i]));
    }
  }
  Rng rng(seed);
  for (auto& v : scores) {
    const std::size_t k = std::min(v.size(), config.calibration_samples_per_class);
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, v.size() - 1);
      std::swap(v[i], v[pick(rng)]);
    }
    v.resize(k);
  }
  return {std::move(scores[0]), std::move(scores[1])};
}

std::vector<models::TrainingSequence> load_training_data(const Manifest& manifest, Mode mode,
                                                         const PipelineConfig& config) {
  std::vector<models::TrainingSequence> data;
  for (const auto& e : manifest.entries) {
    if (e.mode != mode) continue;
    const auto seq = io::read_sequence(manifest.sequence_file(e));
    const auto mask = io::read_mask(manifest.mask_file(e));
    if (mask.mask.width() != seq.width() || mask.mask.height() != seq.height())
      throw DataError("mask " + manifest.mask_file(e).string() + " does not match its sequence");
    auto prepared = prepare(seq, config);
    data.push_back({std::move(prepared.features), mask.mask.labels});
  }
  if (data.empty())
    throw DataError("manifest " + manifest.directory.string() + " has no sequences in mode " +
                    std::string(to_string(mode)));
  return data;
}

models::CascadeModel train(std::span<const models::TrainingSequence> data, Mode mode, models::Backend backend,
                           const PipelineConfig& config, std::uint64_t seed) {
  if (!(config.calibration_fraction >= 0.0 && config.calibration_fraction < 1.0))
    throw DataError("calibration.fraction must lie in [0, 1)");
  if (data.empty()) throw DataError("train: no training sequences");
  std::size_t held_out = 0;
  if (data.size() >= 2)
    held_out = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(config.calibration_fraction * static_cast<double>(data.size()))), 1,
        data.size() - 1);
  const auto fit_part = data.first(data.size() - held_out);
  const auto calibration_part = held_out ? data.last(held_out) : data;

  auto train_config = config.train;
  train_config.backend = backend;
  auto model = models::cascade_train(fit_part, mode, train_config, seed);
  model.calibration = calibrate(model, calibration_part, config, derive_seed(seed, 1));
  return model;
}

models::CascadeModel train_from_manifest(const Manifest& manifest, Mode mode, models::Backend backend,
                                         const PipelineConfig& config, std::uint64_t seed) {
  return train(load_training_data(manifest, mode, config), mode, backend, config, seed);
}

post::DecisionThresholds model_thresholds(const models::CascadeModel& model, double alpha, double beta) {
  return post::fit_thresholds(model.calibration.intact, model.calibration.tumor, alpha, beta);
}

Inference infer(const models::CascadeModel& model, Prepared prepared, double pixel_size,
                const post::PriorMask* prior, const PipelineConfig& config) {
  const int w = prepared.features.width, h = prepared.features.height;
  Inference out;
  out.preprocess = std::move(prepared.cleaned.report);
  out.probabilities = models::cascade_predict(model, prepared.features, model.mode);
  out.smoothed = post::probabilistic_filter(out.probabilities, config.pf_radius);
  out.thresholds = model_thresholds(model, config.alpha, config.beta);
  const post::PriorMask automatic = prior ? post::PriorMask{} : post::auto_prior(w, h, pixel_size, config.prior_margin);
  out.provisional = post::lps_decide(out.smoothed, prior ? *prior : automatic, model.mode, out.thresholds);
  out.provisional.pixel_size = pixel_size;
  auto tf = post::topological_filter(out.provisional.labels, pixel_size, config.min_area_mm2, config.connectivity);
  out.mask = {std::move(tf.labels), pixel_size};
  out.components = std::move(tf.report);
  return out;
}

Inference infer(const models::CascadeModel& model, const ThermalSequence& raw, const post::PriorMask* prior,
                const PipelineConfig& config) {
  return infer(model, prepare(raw, config), raw.pixel_size(), prior, config);
}

std::vector<TestItem> load_test_data(const Manifest& test, const PipelineConfig& config) {
  std::vector<TestItem> items;
  for (const auto& e : test.entries) {
    const auto seq = io::read_sequence(test.sequence_file(e));
    auto ref = io::read_mask(test.mask_file(e));
    if (ref.mask.width() != seq.width() || ref.mask.height() != seq.height())
      throw DataError("mask " + test.mask_file(e).string() + " does not match its sequence");
    items.push_back({std::filesystem::path(e.sequence_path).stem().string(), e.mode, prepare(seq, config),
                     std::move(ref.mask)});
  }
  return items;
}

eval::ModelReport evaluate(const models::CascadeModel& model, std::span<const TestItem> test,
                           const PipelineConfig& config, const std::string& name,
                           const std::filesystem::path& predictions_dir) {
  eval::ModelReport report;
  report.model = name;
  if (!predictions_dir.empty()) std::filesystem::create_directories(predictions_dir);
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& item = test[i];
    if (item.mode != model.mode)
      throw DataError("test sequence " + item.id + " is mode " + std::string(to_string(item.mode)) +
                      ", model is mode " + std::string(to_string(model.mode)));
    const auto result = infer(model, item.prepared, item.reference.pixel_size, nullptr, config);
    if (!predictions_dir.empty()) io::write_mask(predictions_dir / sequence_name(i), result.mask, model.mode);
    report.add(item.id, result.mask, item.reference);
  }
  return report;
}

eval::ModelReport evaluate(const models::CascadeModel& model, const Manifest& test, const PipelineConfig& config,
                           const std::string& name, const std::filesystem::path& predictions_dir) {
  for (const auto& e : test.entries)
    if (e.mode != model.mode)
      throw DataError("test sequence " + e.sequence_path + " is mode " + std::string(to_string(e.mode)) +
                      ", model is mode " + std::string(to_string(model.mode)));
  return evaluate(model, load_test_data(test, config), config, name, predictions_dir);
}

std::string run_end_to_end(const EndToEndOptions& options, const std::filesystem::path& out_dir) {
  if (options.n_train <= 0 || options.n_test <= 0) throw DataError("e2e: train and test counts must be positive");
  std::filesystem::create_directories(out_dir);
  const auto train = make_dataset(out_dir / "train", {{options.mode, options.n_train}}, options.sampler,
                                  derive_seed(options.seed, 1));
  const auto test = make_dataset(out_dir / "test", {{options.mode, options.n_test}}, options.sampler,
                                 derive_seed(options.seed, 2));
  const auto train_data = load_training_data(train, options.mode, options.config);
  const auto test_data = load_test_data(test, options.config);
  std::vector<eval::ModelReport> reports;
  for (auto backend : options.backends) {
    const std::string name(models::to_string(backend));
    std::string lower = name;
    for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const auto model = pipeline::train(train_data, options.mode, backend, options.config, derive_seed(options.seed, 3));
    io::write_model(out_dir / ("model_" + lower + ".txt"), model);
    reports.push_back(evaluate(model, test_data, options.config, name, out_dir / ("pred_" + lower)));
  }
  const std::string table = eval::format_table(reports);
  io::atomic_write(out_dir / "report.txt", table);
  io::atomic_write(out_dir / "report.kv", eval::format_kv(reports));
  return table;
}

}  // namespace irmap::pipeline
