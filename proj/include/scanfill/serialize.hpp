#ifndef SCANFILL_SERIALIZE_HPP
#define SCANFILL_SERIALIZE_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "scanfill/tensor.hpp"

namespace scanfill {

// SFT1 tensor container: magic "SFT1", dtype (u8: 0=f32, 1=f64), rank (u32),
// dims (u64 each), raw little-endian values.

static_assert(std::endian::native == std::endian::little,
              "SFT1 writer assumes a little-endian host");

namespace detail {
template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_raw(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("SFT1: truncated stream");
  return v;
}
template <typename T>
constexpr std::uint8_t dtype_code() {
  if constexpr (std::is_same_v<T, float>) return 0;
  else return 1;
}
}  // namespace detail

template <typename T>
void write_sft1(std::ostream& os, const Tensor<T>& t) {
  os.write("SFT1", 4);
  detail::write_raw<std::uint8_t>(os, detail::dtype_code<T>());
  detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape())
    detail::write_raw<std::uint64_t>(os, static_cast<std::uint64_t>(d));
  os.write(reinterpret_cast<const char*>(t.data().data()),
           static_cast<std::streamsize>(t.data().size() * sizeof(T)));
}

template <typename T>
Tensor<T> read_sft1(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SFT1", 4) != 0)
    throw std::runtime_error("SFT1: bad magic");
  const auto dtype = detail::read_raw<std::uint8_t>(is);
  if (dtype != detail::dtype_code<T>())
    throw std::runtime_error("SFT1: dtype mismatch (got code " +
                             std::to_string(dtype) + ")");
  const auto rank = detail::read_raw<std::uint32_t>(is);
  Shape shape(rank);
  for (auto& d : shape)
    d = static_cast<std::int64_t>(detail::read_raw<std::uint64_t>(is));
  Tensor<T> t = Tensor<T>::zeros(shape);
  is.read(reinterpret_cast<char*>(t.data().data()),
          static_cast<std::streamsize>(t.data().size() * sizeof(T)));
  if (!is) throw std::runtime_error("SFT1: truncated tensor data");
  return t;
}

}  // namespace scanfill

#endif  // SCANFILL_SERIALIZE_HPP
