#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "irmap/zones.hpp"

namespace irmap::eval {

/// How leaf labels are grouped into confusion classes.
///   Leaf        - the five leaves
///   Table       - NWA, NA, HA (sublayers merged)
///   WorkingArea - NWA, WA
enum class Grouping : std::uint8_t { Leaf, Table, WorkingArea };

std::size_t class_of(ZoneLabel z, Grouping g);
std::vector<std::string> class_names(Grouping g);

/// counts[ref][pred] over an ordered class list.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> classes);
  explicit ConfusionMatrix(Grouping g) : ConfusionMatrix(class_names(g)) {}

  std::size_t size() const { return classes_.size(); }
  const std::vector<std::string>& classes() const { return classes_; }
  /// Index of a class name; throws DataError when absent.
  std::size_t index(const std::string& name) const;

  std::uint64_t at(std::size_t ref, std::size_t pred) const { return counts_[ref * size() + pred]; }
  void add(std::size_t ref, std::size_t pred, std::uint64_t n = 1);
  std::uint64_t row_total(std::size_t ref) const;
  std::uint64_t total() const;
  std::uint64_t correct() const;
  /// Elementwise sum; throws DataError when the class lists differ.
  void merge(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::vector<std::string> classes_;
  std::vector<std::uint64_t> counts_;
};

/// Throws DataError when shapes differ.
ConfusionMatrix confusion(const ZoneMask& pred, const ZoneMask& ref, Grouping g = Grouping::Table);
void accumulate(ConfusionMatrix& cm, const ZoneMask& pred, const ZoneMask& ref, Grouping g);

/// Recall of one class; absent when the class has no reference pixels.
std::optional<double> sensitivity(const ConfusionMatrix& cm, std::size_t cls);
double accuracy(const ConfusionMatrix& cm);
/// Mean sensitivity over classes. Throws DataError on an empty row.
double balanced_accuracy(const ConfusionMatrix& cm);
/// Two-class balanced accuracy of `cls` against all other classes; absent
/// when either side has no reference pixels.
std::optional<double> one_vs_rest_balanced_accuracy(const ConfusionMatrix& cm, std::size_t cls);

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Clopper-Pearson exact interval for a binomial proportion. Throws
/// DataError when total == 0, correct > total, or level is outside (0, 1).
Interval accuracy_ci(std::uint64_t correct, std::uint64_t total, double level = 0.95);

/// Per-map balanced accuracies for NA, HA and WA, each one-vs-rest.
struct MapScores {
  std::string id;
  std::optional<double> na;
  std::optional<double> ha;
  std::optional<double> wa;
};

MapScores map_scores(std::string id, const ZoneMask& pred, const ZoneMask& ref);
/// "NA -- 68.11%, HA -- 68.45%, WA -- 94.55%"; undefined entries print "n/a".
std::string format_map_scores(const MapScores& s);

/// Pooled-pixel results for one model over a labeled test set.
struct ModelReport {
  std::string model;
  ConfusionMatrix pooled{Grouping::Table};
  std::vector<MapScores> maps;

  void add(std::string id, const ZoneMask& pred, const ZoneMask& ref);
};

/// Aligned table: "Model | 95% CI Ac | Sn NA | Sn HA | Sn NWA", one row per
/// model, followed by the per-map scores.
std::string format_table(const std::vector<ModelReport>& reports);
/// One key=value record per model and per map.
std::string format_kv(const std::vector<ModelReport>& reports);

}  // namespace irmap::eval
