#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

namespace blink {

// Dense n x m bit matrix. Rows are packed into 64-bit words, bit j of a row
// lives at word j/64, position j%64. Serialized form is row-major bytes,
// LSB-first within each byte.
class BitMatrix {
 public:
  BitMatrix() = default;
  BitMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), stride_((cols + 63) / 64), words_(rows * stride_, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  bool get(std::size_t i, std::size_t j) const {
    return (words_[i * stride_ + j / 64] >> (j % 64)) & 1ULL;
  }
  void set(std::size_t i, std::size_t j, bool v) {
    std::uint64_t& w = words_[i * stride_ + j / 64];
    std::uint64_t m = 1ULL << (j % 64);
    if (v)
      w |= m;
    else
      w &= ~m;
  }

  const std::uint64_t* row(std::size_t i) const { return words_.data() + i * stride_; }
  std::uint64_t* row(std::size_t i) { return words_.data() + i * stride_; }
  std::size_t words_per_row() const { return stride_; }

  std::size_t row_popcount(std::size_t i) const;
  std::size_t popcount() const;

  bool operator==(const BitMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && words_ == o.words_;
  }

  // Row-major, LSB-first-within-byte packing used by the on-disk formats.
  std::vector<std::uint8_t> to_bytes() const;
  static BitMatrix from_bytes(std::size_t rows, std::size_t cols,
                              const std::vector<std::uint8_t>& bytes);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t stride_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace blink
