#include "maskvae/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "maskvae/errors.hpp"

namespace maskvae {

static_assert(std::endian::native == std::endian::little, "tensor blobs assume little-endian hosts");

namespace {

constexpr char kMagic[8] = {'M', 'V', 'A', 'E', 'T', 'N', 'S', '1'};

template <typename V>
void put(std::ofstream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::ifstream& in, const std::filesystem::path& path) {
  V v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(V))) {
    throw FormatError("truncated tensor file " + path.string());
  }
  return v;
}

}  // namespace

void write_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors,
                   std::uint64_t tag) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint64_t>(out, tag);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.value.rank()));
    for (auto d : t.value.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.value.data()),
              static_cast<std::streamsize>(t.value.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<NamedTensor> read_tensors(const std::filesystem::path& path, std::uint64_t* tag) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(path.string() + " is not a tensor file");
  }
  const auto t = get<std::uint64_t>(in, path);
  if (tag) *tag = t;
  const auto count = get<std::uint32_t>(in, path);
  std::vector<NamedTensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in, path);
    if (len > 4096) throw FormatError("bad tensor name length in " + path.string());
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw FormatError("truncated tensor file " + path.string());
    const auto rank = get<std::uint32_t>(in, path);
    if (rank > 8) throw FormatError("bad tensor rank in " + path.string());
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(in, path));
    Tensor<float> value(shape);
    if (!in.read(reinterpret_cast<char*>(value.data()),
                 static_cast<std::streamsize>(value.size() * sizeof(float)))) {
      throw FormatError("truncated tensor file " + path.string());
    }
    tensors.push_back({std::move(name), std::move(value)});
  }
  return tensors;
}

}  // namespace maskvae
