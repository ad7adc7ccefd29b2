#include "irmap/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "irmap/io.hpp"
#include "irmap/random.hpp"

namespace irmap {
namespace fs = std::filesystem;

namespace {
// Column order of the count fields in the manifest.
constexpr std::array<ZoneLabel, kZoneCount> kManifestOrder = {
    ZoneLabel::NWA, ZoneLabel::NA_BC, ZoneLabel::HA_BC, ZoneLabel::NA_DM, ZoneLabel::HA_DM};
}  // namespace

ZoneCounts Manifest::totals() const {
  ZoneCounts t{};
  for (const auto& e : entries)
    for (std::size_t i = 0; i < kZoneCount; ++i) t[i] += e.counts[i];
  return t;
}

std::string format_manifest(const Manifest& manifest) {
  std::string out = "# irmap-manifest v1\n# sequence\tmask\tmode";
  for (ZoneLabel z : kManifestOrder) out += "\t" + std::string(to_string(z));
  out += "\n";
  for (const auto& e : manifest.entries) {
    out += e.sequence_path + "\t" + e.mask_path + "\t" + std::string(to_string(e.mode));
    for (ZoneLabel z : kManifestOrder) out += "\t" + std::to_string(e.counts[index_of(z)]);
    out += "\n";
  }
  return out;
}

Manifest parse_manifest(const std::string& text, const fs::path& directory) {
  Manifest m;
  m.directory = directory;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    ManifestEntry e;
    std::string mode;
    if (!(fields >> e.sequence_path >> e.mask_path >> mode))
      throw DataError("manifest line " + std::to_string(line_no) + ": expected sequence, mask and mode");
    auto parsed = parse_mode(mode);
    if (!parsed) throw DataError("manifest line " + std::to_string(line_no) + ": unknown mode " + mode);
    e.mode = *parsed;
    for (ZoneLabel z : kManifestOrder)
      if (!(fields >> e.counts[index_of(z)]))
        throw DataError("manifest line " + std::to_string(line_no) + ": missing count for " + std::string(to_string(z)));
    m.entries.push_back(std::move(e));
  }
  return m;
}

void write_manifest(const fs::path& path, const Manifest& manifest) { io::atomic_write(path, format_manifest(manifest)); }

Manifest read_manifest(const fs::path& path) {
  return parse_manifest(io::read_text(path), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

ModeMix parse_mode_mix(const std::string& text) {
  ModeMix mix;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw DataError("mode mix entry '" + item + "' is not MODE=COUNT");
    auto mode = parse_mode(item.substr(0, eq));
    if (!mode) throw DataError("unknown mode in mode mix: " + item.substr(0, eq));
    int count = 0;
    try {
      std::size_t used = 0;
      count = std::stoi(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError("bad count in mode mix entry '" + item + "'");
    }
    if (count < 0) throw DataError("mode mix counts must be non-negative");
    mix[*mode] += count;
  }
  return mix;
}

ModeMix scale_mode_mix(const ModeMix& mix, int total) {
  if (total < 0) throw DataError("sequence count must be non-negative");
  long weight = 0;
  for (const auto& [mode, count] : mix) weight += count;
  ModeMix out;
  if (total == 0) return out;
  if (weight <= 0) throw DataError("mode mix has no positive counts");
  std::vector<std::pair<long, Mode>> remainders;
  int assigned = 0;
  for (Mode m : kAllModes) {
    const auto it = mix.find(m);
    const long w = it == mix.end() ? 0 : it->second;
    const long scaled = w * total;
    out[m] = static_cast<int>(scaled / weight);
    assigned += out[m];
    remainders.push_back({scaled % weight, m});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++out[remainders[i % remainders.size()].second];
  for (auto it = out.begin(); it != out.end();) it = it->second == 0 ? out.erase(it) : std::next(it);
  return out;
}

Manifest make_dataset(const fs::path& out_dir, const ModeMix& mode_mix, const phantom::ConfigSampler& sampler,
                      std::uint64_t seed) {
  for (const auto& [mode, count] : mode_mix)
    if (count < 0) throw DataError("mode mix counts must be non-negative");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw io::FormatError(io::FormatErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());

  Manifest manifest;
  manifest.directory = out_dir;
  std::uint64_t index = 0;
  for (Mode mode : kAllModes) {
    const auto it = mode_mix.find(mode);
    const int count = it == mode_mix.end() ? 0 : it->second;
    for (int k = 0; k < count; ++k, ++index) {
      const std::uint64_t s = derive_seed(seed, index);
      const phantom::PhantomConfig config = sampler.sample(mode, derive_seed(s, 0));
      phantom::Phantom p = phantom::generate_phantom(config, derive_seed(s, 1));
      char name[32];
      std::snprintf(name, sizeof name, "%04llu", static_cast<unsigned long long>(index));
      ManifestEntry e;
      e.sequence_path = std::string("seq_") + name + ".irts";
      e.mask_path = std::string("mask_") + name + ".pgm";
      e.mode = mode;
      e.counts = count_zones(p.mask.labels);
      p.sequence.meta.source_id = e.sequence_path;
      io::write_sequence(out_dir / e.sequence_path, p.sequence);
      io::write_mask(out_dir / e.mask_path, p.mask, mode);
      manifest.entries.push_back(std::move(e));
    }
  }
  write_manifest(out_dir / "manifest.txt", manifest);
  return manifest;
}

void verify_manifest(const Manifest& manifest) {
  for (const auto& e : manifest.entries) {
    const io::MaskFile mf = io::read_mask(manifest.mask_file(e));
    if (count_zones(mf.mask.labels) != e.counts)
      throw DataError("manifest counts disagree with " + manifest.mask_file(e).string());
    if (mf.mode != e.mode) throw DataError("manifest mode disagrees with " + manifest.mask_file(e).string());
  }
}

}  // namespace irmap
