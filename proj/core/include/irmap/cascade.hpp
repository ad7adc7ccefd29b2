#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "irmap/features.hpp"
#include "irmap/random_forest.hpp"
#include "irmap/sdae.hpp"
#include "irmap/zones.hpp"

namespace irmap::models {

enum class Backend : std::uint8_t { RandomForest = 0, SDAE = 1 };

std::string_view to_string(Backend b);
/// Accepts "rf" / "sdae" (also the display names "RF" / "SDAE").
std::optional<Backend> parse_backend(std::string_view s);

/// A trained per-pixel binary classifier, either backend behind one API.
class BinaryClassifier {
 public:
  explicit BinaryClassifier(RFModel m) : model_(std::move(m)) {}
  explicit BinaryClassifier(SDAEModel m) : model_(std::move(m)) {}

  Backend backend() const { return model_.index() == 0 ? Backend::RandomForest : Backend::SDAE; }
  /// P(class 1) for one standardized feature vector.
  double predict_proba(std::span<const double> x) const;

  const RFModel* rf() const { return std::get_if<RFModel>(&model_); }
  const SDAEModel* sdae() const { return std::get_if<SDAEModel>(&model_); }

 private:
  std::variant<RFModel, SDAEModel> model_;
};

/// The four binary stages. Class 1 of each:
///   WorkingArea (C1): WA          Layer (C2): DM given WA
///   CortexTumor (C3): HA given BC DuraTumor (C4): HA given DM
enum class Stage : std::uint8_t { WorkingArea = 0, Layer = 1, CortexTumor = 2, DuraTumor = 3 };

inline constexpr std::array<Stage, 4> kAllStages = {Stage::WorkingArea, Stage::Layer, Stage::CortexTumor,
                                                    Stage::DuraTumor};

std::string_view to_string(Stage s);

/// Stages a mode needs. On skips C2 and C3, Off skips C2 and C4.
bool stage_required(Mode mode, Stage stage);

struct StageOutputs {
  double p_working = 1.0;      // P(WA)
  double p_dura = 1.0;         // P(DM | WA)
  double p_cortex_tumor = 0.0; // P(HA | BC)
  double p_dura_tumor = 0.0;   // P(HA | DM)
};

/// Leaf probabilities as products along the cascade tree. The mode pins
/// P(DM | WA) to 1 (On) or 0 (Off). Leaves illegal for the mode get 0.
LeafProbs combine_stages(Mode mode, StageOutputs s);

/// Held-out P(HA | tissue) scores of reference NA and HA pixels, used to
/// fit decision thresholds. Filled by the caller after training.
struct Calibration {
  std::vector<double> intact;
  std::vector<double> tumor;
};

struct StageCounts {
  std::uint64_t negative = 0;
  std::uint64_t positive = 0;
};

struct CascadeModel {
  Mode mode = Mode::On;
  Backend backend = Backend::RandomForest;
  std::uint64_t seed = 0;
  features::Standardizer standardizer;
  std::array<std::optional<BinaryClassifier>, 4> stages;
  std::array<StageCounts, 4> available;  // routed training pixels per class, before subsampling
  Calibration calibration;

  const std::optional<BinaryClassifier>& stage(Stage s) const { return stages[static_cast<std::size_t>(s)]; }
};

/// One training frame: raw features plus its ground-truth labels.
struct TrainingSequence {
  features::FeatureMap features;
  Grid<ZoneLabel> labels;
};

struct CascadeTrainConfig {
  Backend backend = Backend::RandomForest;
  RFConfig rf;
  SDAEConfig sdae;
  std::size_t max_samples_per_class = 8000;  // per stage, class-balanced subsample
  std::size_t min_samples_per_class = 100;
  std::size_t standardizer_samples = 50000;
};

/// Trains each required stage on the pixels its parent would route to it,
/// using ground-truth routing. Throws DataError on mode-illegal labels and
/// TrainingError (with per-stage counts) when a stage lacks samples.
CascadeModel cascade_train(std::span<const TrainingSequence> data, Mode mode, const CascadeTrainConfig& config,
                           std::uint64_t seed);

/// Leaf probabilities for one raw feature vector. Degenerate vectors map to NWA.
LeafProbs cascade_predict_pixel(const CascadeModel& model, std::span<const double> raw_features);

/// Per-pixel leaf probabilities. Unusable pixels are hard-assigned NWA.
/// Throws DataError when `mode` differs from the model's.
ProbabilityMap cascade_predict(const CascadeModel& model, const features::FeatureMap& map, Mode mode);

void write_cascade(ByteWriter& w, const CascadeModel& model);
CascadeModel read_cascade(ByteReader& r);

}  // namespace irmap::models
