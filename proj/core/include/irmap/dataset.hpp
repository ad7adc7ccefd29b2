#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "irmap/phantom.hpp"
#include "irmap/zones.hpp"

namespace irmap {

/// One manifest record: a sequence container, its mask, and class counts.
struct ManifestEntry {
  std::string sequence_path;  // relative to the manifest directory
  std::string mask_path;
  Mode mode = Mode::On;
  ZoneCounts counts{};
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Line-oriented dataset index:
///   # irmap-manifest v1
///   # sequence<TAB>mask<TAB>mode<TAB>NWA<TAB>NA_BC<TAB>HA_BC<TAB>NA_DM<TAB>HA_DM
///   seq_0000.irts<TAB>mask_0000.pgm<TAB>On<TAB>...
struct Manifest {
  std::filesystem::path directory;
  std::vector<ManifestEntry> entries;

  std::filesystem::path sequence_file(const ManifestEntry& e) const { return directory / e.sequence_path; }
  std::filesystem::path mask_file(const ManifestEntry& e) const { return directory / e.mask_path; }
  ZoneCounts totals() const;
};

std::string format_manifest(const Manifest& manifest);
Manifest parse_manifest(const std::string& text, const std::filesystem::path& directory);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);

using ModeMix = std::map<Mode, int>;

/// Parses "On=28,In=42,Off=1".
ModeMix parse_mode_mix(const std::string& text);

/// Rescales the mix to `total` sequences, keeping proportions by largest
/// remainder (ties go to the earlier mode in On, In, Off order). Throws
/// DataError when total > 0 and the mix is all zero.
ModeMix scale_mode_mix(const ModeMix& mix, int total);

/// Generates sum(mode_mix) phantoms into `out_dir` (created if needed) and
/// writes `out_dir/manifest.txt`. Sequence i uses seed derive_seed(seed, i).
/// Modes are emitted in order On, In, Off.
Manifest make_dataset(const std::filesystem::path& out_dir, const ModeMix& mode_mix,
                      const phantom::ConfigSampler& sampler, std::uint64_t seed);

/// Recounts classes from the mask files; throws DataError on any mismatch.
void verify_manifest(const Manifest& manifest);

}  // namespace irmap
