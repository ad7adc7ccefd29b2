#include "irmap/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <boost/math/special_functions/beta.hpp>

#include "irmap/error.hpp"

namespace irmap::eval {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string opt(const std::optional<double>& v, int digits) { return v ? fixed(*v, digits) : "n/a"; }

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::size_t class_of(ZoneLabel z, Grouping g) {
  switch (g) {
    case Grouping::Leaf: return index_of(z);
    case Grouping::Table: return !is_working(z) ? 0 : is_tumor(z) ? 2 : 1;
    case Grouping::WorkingArea: return is_working(z) ? 1 : 0;
  }
  return 0;
}

std::vector<std::string> class_names(Grouping g) {
  switch (g) {
    case Grouping::Leaf: {
      std::vector<std::string> v;
      for (ZoneLabel z : kAllZones) v.emplace_back(to_string(z));
      return v;
    }
    case Grouping::Table: return {"NWA", "NA", "HA"};
    case Grouping::WorkingArea: return {"NWA", "WA"};
  }
  return {};
}

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> classes)
    : classes_(std::move(classes)), counts_(classes_.size() * classes_.size(), 0) {}

std::size_t ConfusionMatrix::index(const std::string& name) const {
  const auto it = std::find(classes_.begin(), classes_.end(), name);
  if (it == classes_.end()) throw DataError("confusion matrix has no class '" + name + "'");
  return static_cast<std::size_t>(it - classes_.begin());
}

void ConfusionMatrix::add(std::size_t ref, std::size_t pred, std::uint64_t n) {
  if (ref >= size() || pred >= size()) throw DataError("confusion matrix: class index out of range");
  counts_[ref * size() + pred] += n;
}

std::uint64_t ConfusionMatrix::row_total(std::size_t ref) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < size(); ++p) s += at(ref, p);
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

std::uint64_t ConfusionMatrix::correct() const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < size(); ++i) s += at(i, i);
  return s;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw DataError("confusion matrix merge: class lists differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

void accumulate(ConfusionMatrix& cm, const ZoneMask& pred, const ZoneMask& ref, Grouping g) {
  if (!pred.labels.same_shape(ref.labels))
    throw DataError("confusion: prediction is " + std::to_string(pred.width()) + "x" + std::to_string(pred.height()) +
                    ", reference is " + std::to_string(ref.width()) + "x" + std::to_string(ref.height()));
  const auto names = class_names(g);
  if (cm.classes() != names) throw DataError("confusion: matrix grouping does not match");
  for (std::size_t i = 0; i < ref.labels.size(); ++i) cm.add(class_of(ref.labels[i], g), class_of(pred.labels[i], g));
}

ConfusionMatrix confusion(const ZoneMask& pred, const ZoneMask& ref, Grouping g) {
  ConfusionMatrix cm(g);
  accumulate(cm, pred, ref, g);
  return cm;
}

std::optional<double> sensitivity(const ConfusionMatrix& cm, std::size_t cls) {
  if (cls >= cm.size()) throw DataError("sensitivity: class index out of range");
  const auto row = cm.row_total(cls);
  if (row == 0) return std::nullopt;
  return static_cast<double>(cm.at(cls, cls)) / static_cast<double>(row);
}

double accuracy(const ConfusionMatrix& cm) {
  const auto n = cm.total();
  if (n == 0) throw DataError("accuracy: empty confusion matrix");
  return static_cast<double>(cm.correct()) / static_cast<double>(n);
}

double balanced_accuracy(const ConfusionMatrix& cm) {
  if (cm.size() == 0) throw DataError("balanced_accuracy: no classes");
  double sum = 0.0;
  for (std::size_t c = 0; c < cm.size(); ++c) {
    const auto sn = sensitivity(cm, c);
    if (!sn) throw DataError("balanced_accuracy: class '" + cm.classes()[c] + "' has no reference pixels");
    sum += *sn;
  }
  return sum / static_cast<double>(cm.size());
}

std::optional<double> one_vs_rest_balanced_accuracy(const ConfusionMatrix& cm, std::size_t cls) {
  if (cls >= cm.size()) throw DataError("balanced accuracy: class index out of range");
  const std::uint64_t pos = cm.row_total(cls);
  const std::uint64_t neg = cm.total() - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  std::uint64_t tn = 0;
  for (std::size_t r = 0; r < cm.size(); ++r) {
    if (r == cls) continue;
    tn += cm.row_total(r) - cm.at(r, cls);
  }
  const double tpr = static_cast<double>(cm.at(cls, cls)) / static_cast<double>(pos);
  const double tnr = static_cast<double>(tn) / static_cast<double>(neg);
  return 0.5 * (tpr + tnr);
}

Interval accuracy_ci(std::uint64_t correct, std::uint64_t total, double level) {
  if (total == 0) throw DataError("accuracy_ci: total must be > 0");
  if (correct > total) throw DataError("accuracy_ci: correct exceeds total");
  if (!(level > 0.0 && level < 1.0)) throw DataError("accuracy_ci: level must lie in (0, 1)");
  const double tail = 0.5 * (1.0 - level);
  const double k = static_cast<double>(correct), n = static_cast<double>(total);
  Interval ci;
  if (correct == 0) {
    ci.lo = 0.0;
    ci.hi = 1.0 - std::pow(tail, 1.0 / n);
  } else if (correct == total) {
    ci.lo = std::pow(tail, 1.0 / n);
    ci.hi = 1.0;
  } else {
    ci.lo = boost::math::ibeta_inv(k, n - k + 1.0, tail);
    ci.hi = boost::math::ibeta_inv(k + 1.0, n - k, 1.0 - tail);
  }
  return ci;
}

MapScores map_scores(std::string id, const ZoneMask& pred, const ZoneMask& ref) {
  const auto table = confusion(pred, ref, Grouping::Table);
  const auto wa = confusion(pred, ref, Grouping::WorkingArea);
  return {std::move(id), one_vs_rest_balanced_accuracy(table, 1), one_vs_rest_balanced_accuracy(table, 2),
          one_vs_rest_balanced_accuracy(wa, 1)};
}

std::string format_map_scores(const MapScores& s) {
  const auto pct = [](const std::optional<double>& v) { return v ? fixed(100.0 * *v, 2) + "%" : std::string("n/a"); };
  return "NA -- " + pct(s.na) + ", HA -- " + pct(s.ha) + ", WA -- " + pct(s.wa);
}

void ModelReport::add(std::string id, const ZoneMask& pred, const ZoneMask& ref) {
  accumulate(pooled, pred, ref, Grouping::Table);
  maps.push_back(map_scores(std::move(id), pred, ref));
}

std::string format_table(const std::vector<ModelReport>& reports) {
  std::size_t name_width = 5;
  for (const auto& r : reports) name_width = std::max(name_width, r.model.size());
  std::string s = pad("Model", name_width) + " | 95% CI Ac        | Sn NA  | Sn HA  | Sn NWA\n";
  s += std::string(name_width, '-') + "-|------------------|--------|--------|-------\n";
  for (const auto& r : reports) {
    std::string ci = "n/a";
    if (r.pooled.total() > 0) {
      const auto iv = accuracy_ci(r.pooled.correct(), r.pooled.total());
      ci = "(" + fixed(iv.lo, 4) + ", " + fixed(iv.hi, 4) + ")";
    }
    s += pad(r.model, name_width) + " | " + pad(ci, 16) + " | " + pad(opt(sensitivity(r.pooled, 1), 4), 6) + " | " +
         pad(opt(sensitivity(r.pooled, 2), 4), 6) + " | " + opt(sensitivity(r.pooled, 0), 4) + "\n";
  }
  for (const auto& r : reports) {
    if (r.maps.empty()) continue;
    s += "\nBalanced accuracy per map, " + r.model + ":\n";
    for (const auto& m : r.maps) s += "  " + m.id + ": " + format_map_scores(m) + "\n";
  }
  return s;
}

std::string format_kv(const std::vector<ModelReport>& reports) {
  std::string s;
  for (const auto& r : reports) {
    s += "model=" + r.model + " pixels=" + std::to_string(r.pooled.total()) +
         " correct=" + std::to_string(r.pooled.correct());
    if (r.pooled.total() > 0) {
      const auto iv = accuracy_ci(r.pooled.correct(), r.pooled.total());
      s += " accuracy=" + fixed(accuracy(r.pooled), 6) + " ci_lo=" + fixed(iv.lo, 6) + " ci_hi=" + fixed(iv.hi, 6);
    }
    s += " sn_na=" + opt(sensitivity(r.pooled, 1), 6) + " sn_ha=" + opt(sensitivity(r.pooled, 2), 6) +
         " sn_nwa=" + opt(sensitivity(r.pooled, 0), 6) + "\n";
    for (const auto& m : r.maps)
      s += "map model=" + r.model + " id=" + m.id + " ba_na=" + opt(m.na, 6) + " ba_ha=" + opt(m.ha, 6) +
           " ba_wa=" + opt(m.wa, 6) + "\n";
  }
  return s;
}

}  // namespace irmap::eval
