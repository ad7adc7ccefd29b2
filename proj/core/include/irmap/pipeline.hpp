#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "irmap/cascade.hpp"
#include "irmap/dataset.hpp"
#include "irmap/evaluation.hpp"
#include "irmap/features.hpp"
#include "irmap/postprocess.hpp"
#include "irmap/preprocess.hpp"

namespace irmap::pipeline {

/// Every tunable of the processing chain. Serialized as key=value lines.
struct PipelineConfig {
  preprocess::RegistrationOptions registration;
  preprocess::DamageOptions damage;
  preprocess::FitOptions fit;
  models::CascadeTrainConfig train;
  double calibration_fraction = 0.1;  // share of training sequences held out for threshold calibration
  std::size_t calibration_samples_per_class = 5000;
  double alpha = 0.05;
  double beta = 0.05;
  int pf_radius = 1;
  double min_area_mm2 = 2.0;
  post::Connectivity connectivity = post::Connectivity::Eight;
  int prior_margin = 4;
};

/// Keys are documented in format_config's output. Blank lines and lines
/// starting with '#' are ignored. Throws DataError on unknown keys or
/// malformed values.
PipelineConfig parse_config(const std::string& text);
std::string format_config(const PipelineConfig& config);
PipelineConfig read_config(const std::filesystem::path& path);

/// Registration followed by damaged-frame removal.
preprocess::Preprocessed clean_sequence(const ThermalSequence& raw, const PipelineConfig& config);

/// Fits every valid pixel of a cleaned sequence and extracts its features.
features::FeatureMap compute_features(const ThermalSequence& seq, const Grid<std::uint8_t>& valid,
                                      const preprocess::FitOptions& options);

struct Prepared {
  preprocess::Preprocessed cleaned;
  features::FeatureMap features;
};

Prepared prepare(const ThermalSequence& raw, const PipelineConfig& config);

/// P(HA | tissue) after the probabilistic filter, over the reference NA and
/// HA pixels of `data`, subsampled per class.
models::Calibration calibrate(const models::CascadeModel& model, std::span<const models::TrainingSequence> data,
                              const PipelineConfig& config, std::uint64_t seed);

/// Prepared features and reference labels of the manifest entries recorded
/// with `mode`. Throws DataError when there is none.
std::vector<models::TrainingSequence> load_training_data(const Manifest& manifest, Mode mode,
                                                         const PipelineConfig& config);

/// Trains the cascade and fills its calibration. The last
/// calibration_fraction of the sequences (at least one when there are two
/// or more) is held out for calibration; a single sequence serves both.
models::CascadeModel train(std::span<const models::TrainingSequence> data, Mode mode, models::Backend backend,
                           const PipelineConfig& config, std::uint64_t seed);

models::CascadeModel train_from_manifest(const Manifest& manifest, Mode mode, models::Backend backend,
                                         const PipelineConfig& config, std::uint64_t seed);

/// Thresholds fitted on the model's held-out calibration scores.
post::DecisionThresholds model_thresholds(const models::CascadeModel& model, double alpha, double beta);

struct Inference {
  preprocess::PreprocessReport preprocess;
  ProbabilityMap probabilities;  // cascade output
  ProbabilityMap smoothed;       // after the probabilistic filter
  post::DecisionThresholds thresholds;
  ZoneMask provisional;  // LPS output
  ZoneMask mask;         // after the topological filter
  post::ComponentReport components;
};

/// Cascade -> PF -> LPS -> TF on prepared features. A null prior selects
/// auto_prior with config.prior_margin.
Inference infer(const models::CascadeModel& model, Prepared prepared, double pixel_size,
                const post::PriorMask* prior, const PipelineConfig& config);
Inference infer(const models::CascadeModel& model, const ThermalSequence& raw, const post::PriorMask* prior,
                const PipelineConfig& config);

/// A labeled test sequence, prepared once and shareable across models.
struct TestItem {
  std::string id;
  Mode mode = Mode::On;
  Prepared prepared;
  ZoneMask reference;
};

std::vector<TestItem> load_test_data(const Manifest& test, const PipelineConfig& config);

/// Runs inference over labeled test data. Throws DataError when an item's
/// mode differs from the model's. When `predictions_dir` is set, the final
/// masks are written there as mask_NNNN.pgm.
eval::ModelReport evaluate(const models::CascadeModel& model, std::span<const TestItem> test,
                           const PipelineConfig& config, const std::string& name,
                           const std::filesystem::path& predictions_dir = {});
eval::ModelReport evaluate(const models::CascadeModel& model, const Manifest& test, const PipelineConfig& config,
                           const std::string& name, const std::filesystem::path& predictions_dir = {});

struct EndToEndOptions {
  int n_train = 40;
  int n_test = 10;
  Mode mode = Mode::On;
  std::vector<models::Backend> backends = {models::Backend::RandomForest, models::Backend::SDAE};
  phantom::ConfigSampler sampler;
  PipelineConfig config;
  std::uint64_t seed = 0;
};

/// Generates train/test phantoms under `out_dir`, trains one model per
/// backend, evaluates each, and writes models, predicted masks and
/// report.txt / report.kv. Returns the table report.
std::string run_end_to_end(const EndToEndOptions& options, const std::filesystem::path& out_dir);

}  // namespace irmap::pipeline
