#include "irmap/cascade.hpp"

#include <algorithm>

#include "irmap/error.hpp"
#include "irmap/parallel.hpp"
#include "irmap/random.hpp"

namespace irmap::models {

std::string_view to_string(Backend b) { return b == Backend::RandomForest ? "RF" : "SDAE"; }

std::optional<Backend> parse_backend(std::string_view s) {
  if (s == "rf" || s == "RF") return Backend::RandomForest;
  if (s == "sdae" || s == "SDAE") return Backend::SDAE;
  return std::nullopt;
}

double BinaryClassifier::predict_proba(std::span<const double> x) const {
  if (const auto* m = rf()) return rf_predict_proba(*m, x);
  return sdae()->predict_proba(x);
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::WorkingArea: return "C1(WA|NWA)";
    case Stage::Layer: return "C2(DM|BC)";
    case Stage::CortexTumor: return "C3(HA|NA in BC)";
    case Stage::DuraTumor: return "C4(HA|NA in DM)";
  }
  return "?";
}

bool stage_required(Mode mode, Stage stage) {
  switch (stage) {
    case Stage::WorkingArea: return true;
    case Stage::Layer: return mode == Mode::In;
    case Stage::CortexTumor: return mode != Mode::On;
    case Stage::DuraTumor: return mode != Mode::Off;
  }
  return false;
}

LeafProbs combine_stages(Mode mode, StageOutputs s) {
  if (mode == Mode::On) s.p_dura = 1.0;
  if (mode == Mode::Off) s.p_dura = 0.0;
  const double wa = s.p_working;
  const double dm = wa * s.p_dura;
  const double bc = wa * (1.0 - s.p_dura);
  LeafProbs p{};
  p[index_of(ZoneLabel::NWA)] = 1.0 - wa;
  p[index_of(ZoneLabel::HA_DM)] = dm * s.p_dura_tumor;
  p[index_of(ZoneLabel::NA_DM)] = dm - p[index_of(ZoneLabel::HA_DM)];
  p[index_of(ZoneLabel::HA_BC)] = bc * s.p_cortex_tumor;
  p[index_of(ZoneLabel::NA_BC)] = bc - p[index_of(ZoneLabel::HA_BC)];
  return p;
}

namespace {

struct PixelRef {
  std::uint32_t sequence;
  std::uint32_t pixel;
};

std::uint64_t key(PixelRef r) { return (static_cast<std::uint64_t>(r.sequence) << 32) | r.pixel; }

// Stage routing under ground truth: nullopt when the pixel does not reach the stage.
std::optional<std::uint8_t> route(Stage stage, ZoneLabel z) {
  switch (stage) {
    case Stage::WorkingArea: return static_cast<std::uint8_t>(is_working(z));
    case Stage::Layer:
      if (!is_working(z)) return std::nullopt;
      return static_cast<std::uint8_t>(is_dura(z));
    case Stage::CortexTumor:
      if (!is_cortex(z)) return std::nullopt;
      return static_cast<std::uint8_t>(is_tumor(z));
    case Stage::DuraTumor:
      if (!is_dura(z)) return std::nullopt;
      return static_cast<std::uint8_t>(is_tumor(z));
  }
  return std::nullopt;
}

// Uniform sample of at most k items, order-preserving after selection.
std::vector<PixelRef> sample(std::vector<PixelRef> items, std::size_t k, Rng& rng) {
  if (items.size() <= k) return items;
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
    std::swap(items[i], items[pick(rng)]);
  }
  items.resize(k);
  std::sort(items.begin(), items.end(), [](PixelRef a, PixelRef b) { return key(a) < key(b); });
  return items;
}

std::string counts_text(const std::array<StageCounts, 4>& counts, Mode mode) {
  std::string s;
  for (Stage st : kAllStages) {
    if (!stage_required(mode, st)) continue;
    const auto& c = counts[static_cast<std::size_t>(st)];
    s += " " + std::string(to_string(st)) + ": negative=" + std::to_string(c.negative) +
         " positive=" + std::to_string(c.positive) + ";";
  }
  return s;
}

}  // namespace

CascadeModel cascade_train(std::span<const TrainingSequence> data, Mode mode, const CascadeTrainConfig& config,
                           std::uint64_t seed) {
  if (data.empty()) throw DataError("cascade_train: no training sequences");
  for (std::size_t s = 0; s < data.size(); ++s) {
    const auto& seq = data[s];
    if (seq.features.size() != seq.labels.size() || seq.features.values.rows() != seq.labels.size())
      throw DataError("cascade_train: features and labels of sequence " + std::to_string(s) + " differ in size");
    if (seq.features.values.cols() != features::kFeatureCount)
      throw DataError("cascade_train: unexpected feature dimension");
    check_legal(seq.labels, mode);
  }

  CascadeModel model;
  model.mode = mode;
  model.backend = config.backend;
  model.seed = seed;
  Rng rng(derive_seed(seed, 0));

  std::vector<PixelRef> usable;
  for (std::uint32_t s = 0; s < data.size(); ++s)
    for (std::uint32_t i = 0; i < data[s].features.size(); ++i)
      if (data[s].features.usable[i]) usable.push_back({s, i});
  if (usable.empty()) throw TrainingError("cascade_train: no usable pixels");

  {
    features::Matrix sample_rows;
    for (PixelRef r : sample(usable, config.standardizer_samples, rng))
      sample_rows.append_row(data[r.sequence].features.values.row(r.pixel));
    model.standardizer = features::fit_standardizer(sample_rows);
  }

  std::array<std::array<std::vector<PixelRef>, 2>, 4> routed;
  for (PixelRef r : usable) {
    const ZoneLabel z = data[r.sequence].labels[r.pixel];
    for (Stage st : kAllStages) {
      if (!stage_required(mode, st)) continue;
      if (auto cls = route(st, z)) routed[static_cast<std::size_t>(st)][*cls].push_back(r);
    }
  }
  bool short_stage = false;
  for (Stage st : kAllStages) {
    const auto i = static_cast<std::size_t>(st);
    model.available[i] = {routed[i][0].size(), routed[i][1].size()};
    if (stage_required(mode, st) &&
        (routed[i][0].size() < config.min_samples_per_class || routed[i][1].size() < config.min_samples_per_class))
      short_stage = true;
  }
  if (short_stage)
    throw TrainingError("cascade_train: a stage has fewer than " + std::to_string(config.min_samples_per_class) +
                        " samples per class;" + counts_text(model.available, mode));

  for (Stage st : kAllStages) {
    if (!stage_required(mode, st)) continue;
    const auto i = static_cast<std::size_t>(st);
    features::Matrix x;
    std::vector<std::uint8_t> y;
    std::vector<double> z(features::kFeatureCount);
    for (std::uint8_t cls = 0; cls < 2; ++cls) {
      for (PixelRef r : sample(routed[i][cls], config.max_samples_per_class, rng)) {
        model.standardizer.apply(data[r.sequence].features.values.row(r.pixel), z);
        x.append_row(z);
        y.push_back(cls);
      }
    }
    const std::uint64_t stage_seed = derive_seed(seed, 10 + i);
    if (config.backend == Backend::RandomForest)
      model.stages[i].emplace(train_rf(x, y, config.rf, stage_seed));
    else
      model.stages[i].emplace(train_sdae(x, y, config.sdae, stage_seed));
  }

  return model;
}

LeafProbs cascade_predict_pixel(const CascadeModel& model, std::span<const double> raw) {
  if (raw.size() != model.standardizer.dimension())
    throw DataError("cascade_predict: expected " + std::to_string(model.standardizer.dimension()) +
                    " features, got " + std::to_string(raw.size()));
  if (raw[features::kDegenerate] != 0.0) return combine_stages(model.mode, {0.0, 1.0, 0.0, 0.0});
  std::array<double, features::kFeatureCount> z{};
  model.standardizer.apply(raw, z);
  StageOutputs s;
  auto run = [&](Stage st, double fallback) {
    const auto& c = model.stage(st);
    return c ? c->predict_proba(z) : fallback;
  };
  s.p_working = run(Stage::WorkingArea, 1.0);
  s.p_dura = run(Stage::Layer, model.mode == Mode::Off ? 0.0 : 1.0);
  s.p_cortex_tumor = run(Stage::CortexTumor, 0.0);
  s.p_dura_tumor = run(Stage::DuraTumor, 0.0);
  return combine_stages(model.mode, s);
}

ProbabilityMap cascade_predict(const CascadeModel& model, const features::FeatureMap& map, Mode mode) {
  if (mode != model.mode)
    throw DataError("cascade_predict: model was trained for mode " + std::string(to_string(model.mode)) +
                    ", request is " + std::string(to_string(mode)));
  if (map.values.rows() != map.size() || map.size() != static_cast<std::size_t>(map.width) * map.height)
    throw DataError("cascade_predict: malformed feature map");
  ProbabilityMap out(map.width, map.height);
  const LeafProbs nwa = combine_stages(model.mode, {0.0, 1.0, 0.0, 0.0});
  parallel_for(map.size(), [&](std::size_t i) {
    out[i] = map.usable[i] ? cascade_predict_pixel(model, map.values.row(i)) : nwa;
  });
  return out;
}

void write_cascade(ByteWriter& w, const CascadeModel& m) {
  w.u8(static_cast<std::uint8_t>(m.mode));
  w.u8(static_cast<std::uint8_t>(m.backend));
  w.u64(m.seed);
  w.f64s(m.standardizer.mean());
  w.f64s(m.standardizer.scale());
  for (Stage st : kAllStages) {
    const auto i = static_cast<std::size_t>(st);
    w.u64(m.available[i].negative);
    w.u64(m.available[i].positive);
    const auto& c = m.stages[i];
    if (!c) {
      w.u8(0);
      continue;
    }
    w.u8(1);
    w.u8(static_cast<std::uint8_t>(c->backend()));
    if (c->rf())
      write_rf(w, *c->rf());
    else
      write_sdae(w, *c->sdae());
  }
  w.f64s(m.calibration.intact);
  w.f64s(m.calibration.tumor);
}

CascadeModel read_cascade(ByteReader& r) {
  CascadeModel m;
  const std::uint8_t mode = r.u8();
  const std::uint8_t backend = r.u8();
  if (mode > 2 || backend > 1) throw DataError("cascade block: bad mode or backend tag");
  m.mode = static_cast<Mode>(mode);
  m.backend = static_cast<Backend>(backend);
  m.seed = r.u64();
  auto mean = r.f64s();
  auto scale = r.f64s();
  m.standardizer = features::Standardizer(std::move(mean), std::move(scale));
  for (Stage st : kAllStages) {
    const auto i = static_cast<std::size_t>(st);
    m.available[i].negative = r.u64();
    m.available[i].positive = r.u64();
    if (r.u8() == 0) continue;
    const std::uint8_t tag = r.u8();
    if (tag == static_cast<std::uint8_t>(Backend::RandomForest))
      m.stages[i].emplace(read_rf(r));
    else if (tag == static_cast<std::uint8_t>(Backend::SDAE))
      m.stages[i].emplace(read_sdae(r));
    else
      throw DataError("cascade block: bad stage backend tag");
  }
  for (Stage st : kAllStages)
    if (stage_required(m.mode, st) != m.stage(st).has_value())
      throw DataError("cascade block: stages do not match mode " + std::string(to_string(m.mode)));
  m.calibration.intact = r.f64s();
  m.calibration.tumor = r.f64s();
  return m;
}

}  // namespace irmap::models
