#include "irmap/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "irmap/bytes.hpp"

namespace irmap::io {
namespace fs = std::filesystem;

std::string_view to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::BadMagic: return "bad magic";
    case FormatErrorKind::UnsupportedVersion: return "unsupported version";
    case FormatErrorKind::Truncated: return "truncated";
    case FormatErrorKind::SizeMismatch: return "size mismatch";
    case FormatErrorKind::BadValue: return "bad value";
    case FormatErrorKind::BadChecksum: return "bad checksum";
    case FormatErrorKind::Io: return "i/o error";
  }
  return "?";
}

namespace {

[[noreturn]] void fail(FormatErrorKind kind, const std::string& what) {
  throw FormatError(kind, std::string(to_string(kind)) + ": " + what);
}

constexpr std::size_t kSequenceHeader = 4 + 2 + 4 + 4 + 4 + 8;
constexpr std::size_t kTensorHeader = 4 + 2 + 4;

void expect_magic(std::span<const std::uint8_t> bytes, std::string_view magic, std::string_view what) {
  if (bytes.size() < magic.size()) fail(FormatErrorKind::Truncated, std::string(what) + " shorter than its magic");
  if (!std::equal(magic.begin(), magic.end(), bytes.begin()))
    fail(FormatErrorKind::BadMagic, std::string(what) + " does not start with \"" + std::string(magic) + "\"");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Netpbm header: magic, width, height, maxval, then a single whitespace.
struct NetpbmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t data_offset = 0;
};

NetpbmHeader parse_netpbm(const std::string& bytes, std::string_view magic) {
  if (bytes.size() < 2) fail(FormatErrorKind::Truncated, "netpbm header");
  if (bytes.compare(0, 2, magic) != 0) fail(FormatErrorKind::BadMagic, "expected " + std::string(magic));
  std::size_t pos = 2;
  auto next_int = [&]() -> int {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    int value = 0;
    auto [ptr, ec] = std::from_chars(bytes.data() + pos, bytes.data() + bytes.size(), value);
    if (ec != std::errc() || ptr == bytes.data() + pos) fail(FormatErrorKind::Truncated, "netpbm header field");
    pos = static_cast<std::size_t>(ptr - bytes.data());
    return value;
  };
  NetpbmHeader h;
  h.width = next_int();
  h.height = next_int();
  h.maxval = next_int();
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    fail(FormatErrorKind::Truncated, "netpbm header terminator");
  h.data_offset = pos + 1;
  if (h.width <= 0 || h.height <= 0) fail(FormatErrorKind::BadValue, "netpbm dimensions must be positive");
  if (h.maxval != 255) fail(FormatErrorKind::BadValue, "only maxval 255 is supported");
  return h;
}

}  // namespace

std::vector<std::uint8_t> encode_sequence(const ThermalSequence& seq) {
  ByteWriter w;
  for (char c : std::string_view("IRTS")) w.u8(static_cast<std::uint8_t>(c));
  w.u16(kSequenceVersion);
  w.u32(static_cast<std::uint32_t>(seq.width()));
  w.u32(static_cast<std::uint32_t>(seq.height()));
  w.u32(static_cast<std::uint32_t>(seq.n_frames()));
  w.f64(seq.pixel_size());
  for (int t = 0; t < seq.n_frames(); ++t) {
    w.f64(seq.timestamp(t));
    for (float v : seq.frame(t)) w.f32(v);
  }
  return w.release();
}

ThermalSequence decode_sequence(std::span<const std::uint8_t> bytes) {
  expect_magic(bytes, "IRTS", "sequence container");
  if (bytes.size() < kSequenceHeader) fail(FormatErrorKind::Truncated, "sequence header");
  ByteReader r(bytes.subspan(4));
  const std::uint16_t version = r.u16();
  if (version != kSequenceVersion) fail(FormatErrorKind::UnsupportedVersion, "sequence version " + std::to_string(version));
  const std::uint64_t width = r.u32();
  const std::uint64_t height = r.u32();
  const std::uint64_t frames = r.u32();
  const double pixel_size = r.f64();
  if (width == 0 || height == 0) fail(FormatErrorKind::BadValue, "sequence dimensions must be positive");
  if (width > std::numeric_limits<int>::max() || height > std::numeric_limits<int>::max())
    fail(FormatErrorKind::BadValue, "sequence dimensions too large");
  const std::uint64_t frame_bytes = 8 + width * height * 4;
  const std::uint64_t payload = r.remaining();
  if (frames != 0 && payload / frames != frame_bytes) {
    fail(FormatErrorKind::SizeMismatch, "declared " + std::to_string(frames) + " frames of " +
                                            std::to_string(frame_bytes) + " bytes, payload has " +
                                            std::to_string(payload) + " bytes");
  }
  if (payload != frames * frame_bytes)
    fail(FormatErrorKind::SizeMismatch, "payload has " + std::to_string(payload) + " bytes, expected " +
                                            std::to_string(frames * frame_bytes));
  std::vector<double> timestamps(frames);
  std::vector<float> samples(frames * width * height);
  std::size_t k = 0;
  for (std::uint64_t t = 0; t < frames; ++t) {
    timestamps[t] = r.f64();
    for (std::uint64_t i = 0; i < width * height; ++i) samples[k++] = r.f32();
  }
  ThermalSequence out(static_cast<int>(width), static_cast<int>(height), std::move(timestamps), pixel_size);
  for (std::uint64_t t = 0; t < frames; ++t) {
    auto dst = out.frame(static_cast<int>(t));
    std::copy_n(samples.begin() + static_cast<std::ptrdiff_t>(t * width * height), dst.size(), dst.begin());
  }
  if (!(pixel_size > 0.0) || !std::isfinite(pixel_size)) fail(FormatErrorKind::BadValue, "pixel size must be positive");
  try {
    out.validate();
  } catch (const FormatError&) {
    throw;
  } catch (const DataError& e) {
    fail(FormatErrorKind::BadValue, e.what());
  }
  return out;
}

void write_sequence(const fs::path& path, const ThermalSequence& seq) { atomic_write(path, encode_sequence(seq)); }

ThermalSequence read_sequence(const fs::path& path) {
  try {
    return decode_sequence(read_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(e.kind(), path.string() + ": " + e.what());
  }
}

std::uint8_t mask_code(ZoneLabel z) {
  switch (z) {
    case ZoneLabel::NWA: return 0;
    case ZoneLabel::NA_DM: return 50;
    case ZoneLabel::HA_DM: return 100;
    case ZoneLabel::NA_BC: return 150;
    case ZoneLabel::HA_BC: return 200;
  }
  return 0;
}

std::optional<ZoneLabel> label_from_code(std::uint8_t code) {
  for (ZoneLabel z : kAllZones)
    if (mask_code(z) == code) return z;
  return std::nullopt;
}

fs::path sidecar_path(const fs::path& mask_path) { return fs::path(mask_path.string() + ".meta"); }

void write_mask(const fs::path& path, const ZoneMask& mask, Mode mode) {
  check_legal(mask.labels, mode);
  Grid<std::uint8_t> codes(mask.width(), mask.height());
  for (std::size_t i = 0; i < codes.size(); ++i) codes[i] = mask_code(mask.labels[i]);
  atomic_write(path, encode_pgm(codes));
  atomic_write(sidecar_path(path),
               "pixel_size=" + format_double(mask.pixel_size) + " mode=" + std::string(to_string(mode)) + "\n");
}

MaskFile read_mask(const fs::path& path) {
  Grid<std::uint8_t> codes;
  try {
    codes = decode_pgm(read_text(path));
  } catch (const FormatError& e) {
    throw FormatError(e.kind(), path.string() + ": " + e.what());
  }
  MaskFile out;
  std::istringstream meta(read_text(sidecar_path(path)));
  std::string token;
  bool have_size = false, have_mode = false;
  while (meta >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) fail(FormatErrorKind::BadValue, sidecar_path(path).string() + ": malformed token " + token);
    const std::string key = token.substr(0, eq), value = token.substr(eq + 1);
    if (key == "pixel_size") {
      char* end = nullptr;
      out.mask.pixel_size = std::strtod(value.c_str(), &end);
      if (end == value.c_str() || *end != '\0' || !(out.mask.pixel_size > 0.0))
        fail(FormatErrorKind::BadValue, sidecar_path(path).string() + ": bad pixel_size");
      have_size = true;
    } else if (key == "mode") {
      auto m = parse_mode(value);
      if (!m) fail(FormatErrorKind::BadValue, sidecar_path(path).string() + ": unknown mode " + value);
      out.mode = *m;
      have_mode = true;
    }
  }
  if (!have_size || !have_mode) fail(FormatErrorKind::BadValue, sidecar_path(path).string() + ": missing pixel_size or mode");
  out.mask.labels = Grid<ZoneLabel>(codes.width(), codes.height());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    auto z = label_from_code(codes[i]);
    if (!z) fail(FormatErrorKind::BadValue, path.string() + ": undefined label code " + std::to_string(codes[i]));
    if (!is_legal(out.mode, *z))
      fail(FormatErrorKind::BadValue, path.string() + ": label " + std::string(to_string(*z)) + " illegal in mode " +
                                          std::string(to_string(out.mode)));
    out.mask.labels[i] = *z;
  }
  return out;
}

std::string encode_pgm(const Grid<std::uint8_t>& image) {
  std::string out = "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.values().data()), image.size());
  return out;
}

Grid<std::uint8_t> decode_pgm(const std::string& bytes) {
  const NetpbmHeader h = parse_netpbm(bytes, "P5");
  const std::size_t expected = static_cast<std::size_t>(h.width) * h.height;
  if (bytes.size() - h.data_offset != expected)
    fail(FormatErrorKind::SizeMismatch, "PGM payload has " + std::to_string(bytes.size() - h.data_offset) +
                                            " bytes, expected " + std::to_string(expected));
  Grid<std::uint8_t> image(h.width, h.height);
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset), bytes.end(), image.values().begin());
  return image;
}

std::string encode_ppm(const Grid<Rgb>& image) {
  std::string out = "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  out.reserve(out.size() + image.size() * 3);
  for (const Rgb& p : image.values()) {
    out.push_back(static_cast<char>(p.r));
    out.push_back(static_cast<char>(p.g));
    out.push_back(static_cast<char>(p.b));
  }
  return out;
}

Grid<Rgb> decode_ppm(const std::string& bytes) {
  const NetpbmHeader h = parse_netpbm(bytes, "P6");
  const std::size_t expected = static_cast<std::size_t>(h.width) * h.height * 3;
  if (bytes.size() - h.data_offset != expected) fail(FormatErrorKind::SizeMismatch, "PPM payload length");
  Grid<Rgb> image(h.width, h.height);
  for (std::size_t i = 0; i < image.size(); ++i) {
    const std::size_t o = h.data_offset + 3 * i;
    image[i] = {static_cast<std::uint8_t>(bytes[o]), static_cast<std::uint8_t>(bytes[o + 1]),
                static_cast<std::uint8_t>(bytes[o + 2])};
  }
  return image;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  std::uint64_t n = 1;
  for (auto d : t.shape) n *= d;
  if (n != t.values.size()) throw DataError("tensor shape does not match value count");
  ByteWriter w;
  for (char c : std::string_view("IRTN")) w.u8(static_cast<std::uint8_t>(c));
  w.u16(1);
  w.u32(static_cast<std::uint32_t>(t.shape.size()));
  for (auto d : t.shape) w.u64(d);
  for (double v : t.values) w.f64(v);
  return w.release();
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  expect_magic(bytes, "IRTN", "tensor container");
  if (bytes.size() < kTensorHeader) fail(FormatErrorKind::Truncated, "tensor header");
  ByteReader r(bytes.subspan(4));
  const std::uint16_t version = r.u16();
  if (version != 1) fail(FormatErrorKind::UnsupportedVersion, "tensor version " + std::to_string(version));
  const std::uint32_t rank = r.u32();
  if (r.remaining() < static_cast<std::uint64_t>(rank) * 8) fail(FormatErrorKind::Truncated, "tensor shape");
  Tensor t;
  std::uint64_t n = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    t.shape.push_back(r.u64());
    if (t.shape.back() != 0 && n > std::numeric_limits<std::uint64_t>::max() / 8 / t.shape.back())
      fail(FormatErrorKind::BadValue, "tensor too large");
    n *= t.shape.back();
  }
  if (r.remaining() != n * 8)
    fail(FormatErrorKind::SizeMismatch, "tensor payload has " + std::to_string(r.remaining()) + " bytes, expected " +
                                            std::to_string(n * 8));
  t.values.resize(n);
  for (auto& v : t.values) v = r.f64();
  return t;
}

void write_tensor(const fs::path& path, const Tensor& t) { atomic_write(path, encode_tensor(t)); }

Tensor read_tensor(const fs::path& path) { return decode_tensor(read_bytes(path)); }

Tensor to_tensor(const ProbabilityMap& probs) {
  Tensor t;
  t.shape = {static_cast<std::uint64_t>(probs.height()), static_cast<std::uint64_t>(probs.width()), kZoneCount};
  t.values.reserve(probs.size() * kZoneCount);
  for (const auto& p : probs.values()) t.values.insert(t.values.end(), p.begin(), p.end());
  return t;
}

ProbabilityMap probabilities_from_tensor(const Tensor& t) {
  if (t.shape.size() != 3 || t.shape[2] != kZoneCount)
    fail(FormatErrorKind::BadValue, "probability tensor must have shape {height, width, 5}");
  ProbabilityMap probs(static_cast<int>(t.shape[1]), static_cast<int>(t.shape[0]));
  for (std::size_t i = 0; i < probs.size(); ++i)
    std::copy_n(t.values.begin() + static_cast<std::ptrdiff_t>(i * kZoneCount), kZoneCount, probs[i].begin());
  return probs;
}

Grid<float> mean_frame(const ThermalSequence& seq) {
  Grid<float> out(seq.width(), seq.height());
  std::vector<double> acc(seq.frame_size(), 0.0);
  for (int t = 0; t < seq.n_frames(); ++t) {
    auto f = seq.frame(t);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f[i];
  }
  for (std::size_t i = 0; i < acc.size(); ++i)
    out[i] = static_cast<float>(seq.n_frames() > 0 ? acc[i] / seq.n_frames() : 0.0);
  return out;
}

Grid<Rgb> render_overlay(const Grid<float>& background, const ZoneMask* reference, const ZoneMask* algorithm,
                         const OverlayOptions& options) {
  for (const ZoneMask* m : {reference, algorithm})
    if (m && !m->labels.same_shape(background)) throw DataError("overlay mask shape differs from background");
  const auto [lo_it, hi_it] = std::minmax_element(background.values().begin(), background.values().end());
  const double lo = background.empty() ? 0.0 : *lo_it;
  const double hi = background.empty() ? 0.0 : *hi_it;
  Grid<Rgb> out(background.width(), background.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = hi > lo ? (background[i] - lo) / (hi - lo) : 0.0;
    const auto g = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    out[i] = {g, g, g};
  }

  auto draw = [&](const ZoneMask* mask, bool (*in_region)(ZoneLabel), Rgb color) {
    if (!mask) return;
    const auto& labels = mask->labels;
    for (int y = 0; y < labels.height(); ++y) {
      for (int x = 0; x < labels.width(); ++x) {
        if (!in_region(labels(x, y))) continue;
        bool edge = false;
        constexpr int dx[4] = {1, -1, 0, 0};
        constexpr int dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4 && !edge; ++k) {
          const int nx = x + dx[k], ny = y + dy[k];
          edge = labels.contains(nx, ny) && !in_region(labels(nx, ny));
        }
        if (edge) out(x, y) = color;
      }
    }
  };
  draw(reference, [](ZoneLabel z) { return is_working(z); }, options.colors.wa_ref);
  draw(reference, [](ZoneLabel z) { return is_tumor(z); }, options.colors.ha_ref);
  draw(algorithm, [](ZoneLabel z) { return is_working(z); }, options.colors.wa_alg);
  draw(algorithm, [](ZoneLabel z) { return is_tumor(z); }, options.colors.ha_alg);
  if (options.frame_border) {
    for (int y = 0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x)
        if (x == 0 || y == 0 || x == out.width() - 1 || y == out.height() - 1) out(x, y) = options.colors.frame;
  }
  return out;
}

void atomic_write(const fs::path& path, std::span<const std::uint8_t> bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) fail(FormatErrorKind::Io, "cannot open " + tmp.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) fail(FormatErrorKind::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(FormatErrorKind::Io, "cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void atomic_write(const fs::path& path, const std::string& text) {
  atomic_write(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(FormatErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(FormatErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace irmap::io
