#include "irmap/model_file.hpp"

#include <cstdio>
#include <map>
#include <sstream>

#include "irmap/bytes.hpp"
#include "irmap/io.hpp"

namespace irmap::io {

namespace {

constexpr std::string_view kMagic = "irmap-model";
constexpr std::string_view kVersion = "v1";
constexpr std::size_t kBytesPerLine = 64;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

int nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string header(const models::CascadeModel& m) {
  using models::Stage;
  std::string h;
  h += "backend=" + std::string(models::to_string(m.backend)) + "\n";
  h += "mode=" + std::string(to_string(m.mode)) + "\n";
  h += "features=" + std::to_string(m.standardizer.dimension()) + "\n";
  h += "seed=" + std::to_string(m.seed) + "\n";
  for (Stage st : models::kAllStages) {
    const auto& c = m.stage(st);
    if (!c) continue;
    const auto i = std::to_string(static_cast<int>(st) + 1);
    const auto& avail = m.available[static_cast<std::size_t>(st)];
    h += "stage.C" + i + "=" + std::string(models::to_string(st)) + " negative=" + std::to_string(avail.negative) +
         " positive=" + std::to_string(avail.positive);
    if (const auto* rf = c->rf()) {
      h += " seed=" + std::to_string(rf->seed) + " n_trees=" + std::to_string(rf->config.n_trees) +
           " max_depth=" + std::to_string(rf->config.max_depth) + " min_leaf=" + std::to_string(rf->config.min_leaf) +
           " features_per_split=" + std::to_string(rf->config.features_per_split) +
           " oob_accuracy=" + num(rf->oob_accuracy);
    } else if (const auto* s = c->sdae()) {
      const auto& k = s->config;
      h += " seed=" + std::to_string(s->seed) + " hidden=" + join(k.hidden) + " corruption=" + num(k.corruption) +
           " learning_rate=" + num(k.learning_rate) + " batch_size=" + std::to_string(k.batch_size) +
           " pretrain_epochs=" + std::to_string(k.pretrain_epochs) +
           " finetune_epochs=" + std::to_string(k.finetune_epochs) + " patience=" + std::to_string(k.patience) +
           " holdout=" + num(k.holdout) + " best_epoch=" + std::to_string(s->best_epoch);
    }
    h += "\n";
  }
  h += "calibration=intact:" + std::to_string(m.calibration.intact.size()) +
       " tumor:" + std::to_string(m.calibration.tumor.size()) + "\n";
  return h;
}

}  // namespace

std::string encode_model(const models::CascadeModel& model) {
  ByteWriter w;
  models::write_cascade(w, model);
  const auto& bytes = w.bytes();
  std::string out = std::string(kMagic) + " " + std::string(kVersion) + "\n" + header(model);
  out += "payload_bytes=" + std::to_string(bytes.size()) + "\n";
  out += "checksum=fnv1a64:" + hex64(fnv1a64(bytes)) + "\n";
  out += "payload\n";
  static constexpr char kDigits[] = "0123456789abcdef";
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    out += kDigits[bytes[i] >> 4];
    out += kDigits[bytes[i] & 15];
    if ((i + 1) % kBytesPerLine == 0 || i + 1 == bytes.size()) out += '\n';
  }
  return out;
}

models::CascadeModel decode_model(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind(kMagic, 0) != 0)
    throw FormatError(FormatErrorKind::BadMagic, "model file: missing 'irmap-model' header");
  if (line != std::string(kMagic) + " " + std::string(kVersion))
    throw FormatError(FormatErrorKind::UnsupportedVersion, "model file: unsupported version line '" + line + "'");

  std::map<std::string, std::string> fields;
  bool payload = false;
  while (std::getline(in, line)) {
    if (line == "payload") {
      payload = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(FormatErrorKind::BadValue, "model file: bad header line '" + line + "'");
    fields[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (!payload) throw FormatError(FormatErrorKind::SizeMismatch, "model file: payload section missing");
  const auto need = [&](const std::string& k) -> const std::string& {
    const auto it = fields.find(k);
    if (it == fields.end()) throw FormatError(FormatErrorKind::BadValue, "model file: header lacks '" + k + "'");
    return it->second;
  };

  std::uint64_t declared = 0;
  try {
    std::size_t used = 0;
    declared = std::stoull(need("payload_bytes"), &used);
    if (used != need("payload_bytes").size()) throw std::invalid_argument("trailing");
  } catch (const std::logic_error&) {
    throw FormatError(FormatErrorKind::BadValue, "model file: bad payload_bytes");
  }

  std::vector<std::uint8_t> bytes;
  int high = -1;
  while (std::getline(in, line)) {
    for (char c : line) {
      const int v = nibble(c);
      if (v < 0) throw FormatError(FormatErrorKind::BadValue, "model file: non-hex character in payload");
      if (high < 0) {
        high = v;
      } else {
        bytes.push_back(static_cast<std::uint8_t>(high << 4 | v));
        high = -1;
      }
    }
  }
  if (high >= 0 || bytes.size() != declared)
    throw FormatError(FormatErrorKind::SizeMismatch, "model file: payload holds " + std::to_string(bytes.size()) +
                                                         " bytes, header declares " + std::to_string(declared));
  const std::string expected = "fnv1a64:" + hex64(fnv1a64(bytes));
  if (need("checksum") != expected)
    throw FormatError(FormatErrorKind::BadChecksum,
                      "model file: checksum " + need("checksum") + " does not match payload (" + expected + ")");

  models::CascadeModel m;
  try {
    ByteReader r(bytes);
    m = models::read_cascade(r);
    if (r.remaining() != 0) throw DataError("trailing bytes after cascade block");
  } catch (const FormatError&) {
    throw;
  } catch (const DataError& e) {
    throw FormatError(FormatErrorKind::BadValue, std::string("model file: ") + e.what());
  }
  if (need("backend") != models::to_string(m.backend) || need("mode") != to_string(m.mode))
    throw FormatError(FormatErrorKind::BadValue, "model file: header backend/mode disagree with payload");
  return m;
}

void write_model(const std::filesystem::path& path, const models::CascadeModel& model) {
  atomic_write(path, encode_model(model));
}

models::CascadeModel read_model(const std::filesystem::path& path) { return decode_model(read_text(path)); }

}  // namespace irmap::io
