#include "xdet/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace xdet {

namespace {

constexpr char kMagic[8] = {'X', 'D', 'E', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_real(std::ostream& out, real v) {
  if constexpr (sizeof(real) == 8) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
  } else {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
  }
}

real get_real(std::istream& in) {
  if constexpr (sizeof(real) == 8) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    real v;
    std::memcpy(&v, &bits, 8);
    return v;
  } else {
    std::uint32_t bits = get_u32(in);
    real v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const NamedParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, 8);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(sizeof(real)));
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, tensor] : params) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(tensor.shape().size()));
    for (int d : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (real v : tensor.values()) put_real(out, v);
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

void load_checkpoint(const std::string& path, NamedParams& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  const std::uint32_t version = get_u32(in);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                             " in " + path);
  const std::uint32_t real_size = get_u32(in);
  if (real_size != sizeof(real))
    throw std::runtime_error("checkpoint precision mismatch (" + std::to_string(real_size) +
                             " bytes) in " + path);
  const std::uint32_t count = get_u32(in);
  if (count != params.size())
    throw std::runtime_error("checkpoint parameter count mismatch in " + path);
  for (auto& [name, tensor] : params) {
    const std::uint32_t name_len = get_u32(in);
    std::string file_name(name_len, '\0');
    in.read(file_name.data(), name_len);
    if (file_name != name)
      throw std::runtime_error("checkpoint parameter order mismatch: expected " + name +
                               ", found " + file_name + " in " + path);
    const std::uint32_t ndim = get_u32(in);
    std::vector<int> shape(ndim);
    for (std::uint32_t i = 0; i < ndim; ++i) shape[i] = static_cast<int>(get_u32(in));
    if (shape != tensor.shape())
      throw std::runtime_error("checkpoint shape mismatch for " + name + " in " + path);
    for (real& v : tensor.values()) v = get_real(in);
  }
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
}

}  // namespace xdet
