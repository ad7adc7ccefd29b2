#pragma once

#include <filesystem>
#include <string>

#include "irmap/cascade.hpp"

namespace irmap::io {

// Model file layout:
//   irmap-model v1
//   key=value header lines (backend, mode, dimensions, hyperparameters, seeds)
//   payload_bytes=<n>
//   checksum=fnv1a64:<16 hex digits>
//   payload
//   <hex-encoded binary cascade block, 64 bytes per line>
// The header is descriptive; the payload alone determines the model.

std::string encode_model(const models::CascadeModel& model);
/// Throws FormatError: BadMagic, UnsupportedVersion, SizeMismatch,
/// BadChecksum or BadValue.
models::CascadeModel decode_model(const std::string& text);

void write_model(const std::filesystem::path& path, const models::CascadeModel& model);
models::CascadeModel read_model(const std::filesystem::path& path);

}  // namespace irmap::io
