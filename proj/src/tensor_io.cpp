#include "imd/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "imd/error.hpp"

namespace imd {
namespace {

constexpr std::uint8_t kMagic[4] = {0x49, 0x4D, 0x44, 0x54};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint64_t take(int width) {
    if (pos_ + width > bytes_.size()) throw IoError("IMDT: truncated input");
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += width;
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_imdt(const Tensor& tensor) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(9 + 4 * tensor.rank() + 8 * tensor.size());
  out.push_back(kImdtVersion);
  put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
  for (std::size_t d : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : tensor.data()) put_f64(out, v);
  return out;
}

Tensor decode_imdt(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw IoError("IMDT: bad magic");
  if (bytes[4] != kImdtVersion) throw IoError("IMDT: unsupported version " + std::to_string(bytes[4]));
  std::vector<std::uint8_t> rest(bytes.begin() + 5, bytes.end());
  Reader r(rest);
  const auto rank = static_cast<std::size_t>(r.take(4));
  if (rank == 0) throw IoError("IMDT: rank 0");
  Shape shape(rank);
  for (auto& d : shape) d = static_cast<std::size_t>(r.take(4));
  const std::size_t n = shape_size(shape);
  if (r.remaining() != 8 * n) throw IoError("IMDT: payload size does not match dims");
  std::vector<double> data(n);
  for (auto& v : data) v = std::bit_cast<double>(r.take(8));
  try {
    return Tensor(std::move(shape), std::move(data));
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("IMDT: ") + e.what());
  }
}

void write_imdt(const std::filesystem::path& path, const Tensor& tensor) {
  const auto bytes = encode_imdt(tensor);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Tensor read_imdt(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_imdt(bytes);
}

}  // namespace imd
