#include "bitmatrix.hpp"

#include <bit>

#include "errors.hpp"

namespace blink {

std::size_t BitMatrix::row_popcount(std::size_t i) const {
  std::size_t c = 0;
  const std::uint64_t* w = row(i);
  for (std::size_t k = 0; k < stride_; ++k) c += std::popcount(w[k]);
  return c;
}

std::size_t BitMatrix::popcount() const {
  std::size_t c = 0;
  for (std::uint64_t w : words_) c += std::popcount(w);
  return c;
}

std::vector<std::uint8_t> BitMatrix::to_bytes() const {
  std::size_t row_bytes = (cols_ + 7) / 8;
  std::vector<std::uint8_t> out(rows_ * row_bytes, 0);
  for (std::size_t i = 0; i < rows_; ++i) {
    const std::uint64_t* w = row(i);
    std::uint8_t* dst = out.data() + i * row_bytes;
    for (std::size_t b = 0; b < row_bytes; ++b) {
      std::size_t word = b / 8, shift = (b % 8) * 8;
      dst[b] = static_cast<std::uint8_t>(w[word] >> shift);
    }
    // Mask tail bits past the last column.
    std::size_t tail = cols_ % 8;
    if (tail != 0) dst[row_bytes - 1] &= static_cast<std::uint8_t>((1u << tail) - 1u);
  }
  return out;
}

BitMatrix BitMatrix::from_bytes(std::size_t rows, std::size_t cols,
                                const std::vector<std::uint8_t>& bytes) {
  std::size_t row_bytes = (cols + 7) / 8;
  if (bytes.size() != rows * row_bytes)
    throw DataError("bitset payload has unexpected size");
  BitMatrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::uint8_t* src = bytes.data() + i * row_bytes;
    std::uint64_t* w = m.row(i);
    for (std::size_t b = 0; b < row_bytes; ++b) {
      std::size_t word = b / 8, shift = (b % 8) * 8;
      w[word] |= static_cast<std::uint64_t>(src[b]) << shift;
    }
  }
  return m;
}

}  // namespace blink
