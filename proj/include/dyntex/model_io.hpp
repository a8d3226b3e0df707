#pragma once

#include <filesystem>
#include <variant>

#include "dyntex/avdl.hpp"
#include "dyntex/lds.hpp"

namespace dyntex {

// Binary model files: 8-byte magic, format version, model kind, explicit
// dimensions, then matrices as little-endian 64-bit floats in column-major
// order. Save/load round-trips are bit-exact; loading rejects a mismatched
// format version.

void save_model(const AvdlModel& model, const std::filesystem::path& path);
void save_model(const LdsModel& model, const std::filesystem::path& path);

using LoadedModel = std::variant<AvdlModel, LdsModel>;

LoadedModel load_model(const std::filesystem::path& path);

} // namespace dyntex
