#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "irmap/error.hpp"
#include "irmap/grid.hpp"
#include "irmap/sequence.hpp"
#include "irmap/zones.hpp"

namespace irmap::io {

enum class FormatErrorKind {
  BadMagic,
  UnsupportedVersion,
  Truncated,     // file ends inside the fixed-size header
  SizeMismatch,  // payload length differs from the declared dimensions
  BadValue,      // header field or sample outside its domain
  BadChecksum,
  Io,
};

std::string_view to_string(FormatErrorKind kind);

class FormatError : public DataError {
 public:
  FormatError(FormatErrorKind kind, const std::string& what) : DataError(what), kind_(kind) {}
  FormatErrorKind kind() const { return kind_; }

 private:
  FormatErrorKind kind_;
};

// --- IRTS sequence container ---------------------------------------------
//   "IRTS" | u16 version=1 | u32 width | u32 height | u32 n_frames |
//   f64 pixel_size_m | n_frames x (f64 timestamp | width*height x f32)
// All little-endian.

inline constexpr std::uint16_t kSequenceVersion = 1;

std::vector<std::uint8_t> encode_sequence(const ThermalSequence& seq);
ThermalSequence decode_sequence(std::span<const std::uint8_t> bytes);
void write_sequence(const std::filesystem::path& path, const ThermalSequence& seq);
ThermalSequence read_sequence(const std::filesystem::path& path);

// --- Masks: binary PGM with fixed label codes plus a one-line sidecar ------

std::uint8_t mask_code(ZoneLabel z);
std::optional<ZoneLabel> label_from_code(std::uint8_t code);

struct MaskFile {
  ZoneMask mask;
  Mode mode = Mode::On;
};

/// Writes `path` (P5) and `path` + ".meta" ("pixel_size=<m> mode=<On|In|Off>").
void write_mask(const std::filesystem::path& path, const ZoneMask& mask, Mode mode);
/// Validates codes and their legality for the sidecar's mode.
MaskFile read_mask(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& mask_path);

// --- Netpbm primitives ----------------------------------------------------

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

std::string encode_pgm(const Grid<std::uint8_t>& image);
Grid<std::uint8_t> decode_pgm(const std::string& bytes);
std::string encode_ppm(const Grid<Rgb>& image);
Grid<Rgb> decode_ppm(const std::string& bytes);

// --- IRTN tensor container ------------------------------------------------
//   "IRTN" | u16 version=1 | u32 rank | rank x u64 dims | prod(dims) x f64

struct Tensor {
  std::vector<std::uint64_t> shape;
  std::vector<double> values;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);
void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

/// Flattens a probability map to shape {height, width, 5}.
Tensor to_tensor(const ProbabilityMap& probs);
ProbabilityMap probabilities_from_tensor(const Tensor& t);

// --- Overlay rendering ----------------------------------------------------

struct OverlayColors {
  Rgb wa_ref{0, 0, 255};
  Rgb wa_alg{0, 255, 255};
  Rgb ha_ref{255, 0, 0};
  Rgb ha_alg{255, 165, 0};
  Rgb frame{255, 255, 255};
};

struct OverlayOptions {
  OverlayColors colors;
  bool frame_border = false;  // outline the IR frame edge (Img_IR)
};

/// Grayscale background (min-max normalized temperatures) with region
/// boundaries drawn in z-order WA_Ref, HA_Ref, WA_Alg, HA_Alg, frame border.
/// A boundary pixel lies inside a region and has a 4-neighbor outside it.
/// Either mask may be null.
Grid<Rgb> render_overlay(const Grid<float>& background, const ZoneMask* reference, const ZoneMask* algorithm,
                         const OverlayOptions& options = {});

/// Per-pixel temporal mean, used as the overlay background.
Grid<float> mean_frame(const ThermalSequence& seq);

// --- File helpers ---------------------------------------------------------

/// Writes via a temporary sibling and renames into place.
void atomic_write(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void atomic_write(const std::filesystem::path& path, const std::string& text);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

}  // namespace irmap::io
