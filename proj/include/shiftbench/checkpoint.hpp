#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "shiftbench/nn.hpp"

namespace shiftbench {

/// Flat binary checkpoint. Optional first line "#phase <tag>", then per
/// tensor a text header line "<name> <d0> <d1> ..." followed by the values
/// as little-endian IEEE-754 doubles. Round-trips exactly.
struct Checkpoint {
  Parameters tensors;
  std::optional<std::string> phase;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace shiftbench
