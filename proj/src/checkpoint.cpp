#include "shiftbench/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "shiftbench/error.hpp"

namespace shiftbench {

namespace {

void put_le(std::ostream& os, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xffu);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

double get_le(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) throw IoError("checkpoint truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  if (ckpt.phase) {
    if (ckpt.phase->find_first_of(" \n") != std::string::npos) {
      throw IoError("phase tag must not contain whitespace");
    }
    os << "#phase " << *ckpt.phase << '\n';
  }
  for (const auto& [name, t] : ckpt.tensors.entries()) {
    if (name.empty() || name.find_first_of(" \n#") != std::string::npos) {
      throw IoError("tensor name '" + name + "' cannot be stored in a checkpoint");
    }
    os << name;
    for (auto d : t.shape()) os << ' ' << d;
    os << '\n';
    for (double v : t.data()) put_le(os, v);
  }
  if (!os) throw IoError("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& is) {
  Checkpoint ckpt;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (first && line.rfind("#phase ", 0) == 0) {
      ckpt.phase = line.substr(7);
      first = false;
      continue;
    }
    first = false;
    std::istringstream hs(line);
    std::string name;
    if (!(hs >> name)) throw IoError("malformed checkpoint header line");
    std::vector<std::size_t> shape;
    std::size_t d = 0;
    while (hs >> d) shape.push_back(d);
    if (shape.empty()) throw IoError("checkpoint tensor '" + name + "' has no shape");
    Tensor t(shape, 0.0);
    for (auto& v : t.data()) v = get_le(is);
    ckpt.tensors.add(name, std::move(t));
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_checkpoint(os, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  return read_checkpoint(is);
}

}  // namespace shiftbench
