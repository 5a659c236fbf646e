#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lmpc/error.hpp"

namespace lmpc {

/// An oracle-width value. Widths up to 64 bits are supported throughout.
using Word = std::uint64_t;

constexpr Word low_mask(unsigned width) {
  return width >= 64 ? ~Word{0} : (Word{1} << width) - 1;
}

constexpr bool fits(Word value, unsigned width) {
  return width >= 64 || (value >> width) == 0;
}

/// Smallest b with 2^b >= x; 0 for x <= 1.
constexpr unsigned ceil_log2(std::uint64_t x) {
  return x <= 1 ? 0u : static_cast<unsigned>(std::bit_width(x - 1));
}

/// Growable bit string, most-significant bit first within every appended field.
class BitString {
 public:
  BitString() = default;

  static BitString from_bytes(std::span<const std::uint8_t> bytes, std::size_t bits) {
    if (bits > bytes.size() * 8) {
      throw Error(ErrorKind::length_mismatch, "bit count exceeds byte payload");
    }
    BitString out;
    out.bytes_.assign(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>((bits + 7) / 8));
    out.size_ = bits;
    out.clear_tail();
    return out;
  }

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }
  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

  void append(Word value, unsigned width) {
    if (!fits(value, width)) {
      throw Error(ErrorKind::width_mismatch, "value does not fit in " + std::to_string(width) + " bits");
    }
    while (width > 0) {
      const unsigned used = static_cast<unsigned>(size_ % 8);
      if (used == 0) bytes_.push_back(0);
      const unsigned room = 8 - used;
      const unsigned take = width < room ? width : room;
      const auto chunk = static_cast<std::uint8_t>((value >> (width - take)) & low_mask(take));
      bytes_.back() = static_cast<std::uint8_t>(bytes_.back() | (chunk << (room - take)));
      size_ += take;
      width -= take;
    }
  }

  void append_bit(bool bit) { append(bit ? 1 : 0, 1); }

  void append(const BitString& other) {
    if (size_ % 8 == 0) {
      bytes_.insert(bytes_.end(), other.bytes_.begin(), other.bytes_.end());
      size_ += other.size_;
      return;
    }
    std::size_t pos = 0;
    while (pos < other.size_) {
      const unsigned take = static_cast<unsigned>(std::min<std::size_t>(56, other.size_ - pos));
      append(other.read(pos, take), take);
      pos += take;
    }
  }

  Word read(std::size_t offset, unsigned width) const {
    if (width > 64 || offset + width > size_) {
      throw Error(ErrorKind::length_mismatch, "read past end of bit string");
    }
    Word out = 0;
    while (width > 0) {
      const unsigned used = static_cast<unsigned>(offset % 8);
      const unsigned room = 8 - used;
      const unsigned take = width < room ? width : room;
      const unsigned byte = bytes_[offset / 8];
      out = (out << take) | ((byte >> (room - take)) & low_mask(take));
      offset += take;
      width -= take;
    }
    return out;
  }

  bool bit(std::size_t offset) const { return read(offset, 1) != 0; }

  /// Number of zero bits padding the last byte.
  std::size_t padding() const noexcept { return bytes_.size() * 8 - size_; }

  std::string to_hex() const;

  friend bool operator==(const BitString& a, const BitString& b) {
    return a.size_ == b.size_ && a.bytes_ == b.bytes_;
  }
  friend bool operator<(const BitString& a, const BitString& b) {
    if (a.size_ != b.size_) return a.size_ < b.size_;
    return a.bytes_ < b.bytes_;
  }

 private:
  void clear_tail() {
    if (size_ % 8 != 0) {
      bytes_.back() = static_cast<std::uint8_t>(bytes_.back() & ~low_mask(8 - size_ % 8));
    }
  }

  std::vector<std::uint8_t> bytes_;
  std::size_t size_ = 0;
};

class BitReader {
 public:
  explicit BitReader(const BitString& bits, std::size_t offset = 0) : bits_(&bits), pos_(offset) {}

  Word read(unsigned width) {
    const Word v = bits_->read(pos_, width);
    pos_ += width;
    return v;
  }

  BitString read_bits(std::size_t count) {
    if (pos_ + count > bits_->size()) {
      throw Error(ErrorKind::length_mismatch, "read past end of bit string");
    }
    BitString out;
    while (count > 0) {
      const unsigned take = static_cast<unsigned>(std::min<std::size_t>(56, count));
      out.append(read(take), take);
      count -= take;
    }
    return out;
  }

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bits_->size() - pos_; }
  bool at_end() const noexcept { return pos_ >= bits_->size(); }

 private:
  const BitString* bits_;
  std::size_t pos_;
};

namespace detail {

inline int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace detail

inline std::string BitString::to_hex() const {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve((size_ + 3) / 4);
  for (std::size_t pos = 0; pos < size_; pos += 4) {
    const unsigned take = static_cast<unsigned>(std::min<std::size_t>(4, size_ - pos));
    out.push_back(digits[read(pos, take) << (4 - take)]);
  }
  return out;
}

/// Parses hex digits MSB-first into exactly `bits` bits. The digit count must be
/// ceil(bits/4) and any padding bits of the final digit must be zero.
inline BitString bits_from_hex(std::string_view hex, std::size_t bits) {
  if (hex.size() != (bits + 3) / 4) {
    throw Error(ErrorKind::length_mismatch, "expected " + std::to_string((bits + 3) / 4) +
                                                " hex digits, got " + std::to_string(hex.size()));
  }
  BitString out;
  std::size_t left = bits;
  for (char c : hex) {
    const int d = detail::hex_value(c);
    if (d < 0) throw Error(ErrorKind::format, std::string("not a hex digit: ") + c);
    const unsigned take = static_cast<unsigned>(std::min<std::size_t>(4, left));
    if ((static_cast<unsigned>(d) & low_mask(4 - take)) != 0) {
      throw Error(ErrorKind::length_mismatch, "excess nonzero bits beyond payload");
    }
    out.append(static_cast<Word>(d) >> (4 - take), take);
    left -= take;
  }
  return out;
}

/// Fixed-width lowercase hex for an n-bit word (ceil(n/4) digits, value right-aligned).
inline std::string word_hex(Word value, unsigned width) {
  static constexpr char digits[] = "0123456789abcdef";
  const unsigned count = (width + 3) / 4;
  std::string out(count == 0 ? 1 : count, '0');
  for (unsigned i = 0; i < count; ++i) {
    out[count - 1 - i] = digits[(value >> (4 * i)) & 0xf];
  }
  return out;
}

inline void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32_le(std::span<const std::uint8_t> in, std::size_t offset) {
  if (offset + 4 > in.size()) throw Error(ErrorKind::format, "truncated u32 field");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
  return v;
}

inline constexpr std::string_view file_magic = "LMPC1";

enum class SectionId : std::uint8_t {
  oracle_table = 0x01,
  input_vector = 0x02,
  encoding_blob = 0x03,
};

}  // namespace lmpc
