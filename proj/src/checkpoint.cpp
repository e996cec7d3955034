#include "favi/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace favi {

namespace {

constexpr char kMagic[4] = {'F', 'A', 'V', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void write_str(std::ostream& os, const std::string& s) {
  write_pod<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::istream& is) {
  auto n = read_pod<std::uint64_t>(is);
  if (n > (1ULL << 30)) throw std::runtime_error("checkpoint: implausible string length");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& descriptor, const ParamGraph& pg) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  os.write(kMagic, 4);
  write_pod<std::uint32_t>(os, kVersion);
  write_str(os, descriptor);
  write_pod<std::uint64_t>(os, pg.param_count());
  for (const auto& name : pg.names()) {
    const Tensor& t = pg.value(name);
    write_str(os, name);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.ndim()));
    for (std::size_t d : t.shape) write_pod<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
  auto version = read_pod<std::uint32_t>(is);
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ck;
  ck.descriptor = read_str(is);
  auto count = read_pod<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = read_str(is);
    auto ndim = read_pod<std::uint32_t>(is);
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) d = static_cast<std::size_t>(read_pod<std::uint64_t>(is));
    Tensor t = Tensor::zeros(shape);
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated parameter data");
    ck.params.add(name, std::move(t));
  }
  return ck;
}

}  // namespace favi
