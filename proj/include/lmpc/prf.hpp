#pragma once

#include <sodium.h>

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "lmpc/bits.hpp"
#include "lmpc/error.hpp"

namespace lmpc {

namespace detail {

inline void ensure_sodium() {
  static const bool ready = [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
    return true;
  }();
  (void)ready;
}

inline std::array<std::uint8_t, 8> be64(std::uint64_t v) {
  std::array<std::uint8_t, 8> out{};
  for (int i = 0; i < 8; ++i) out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
  return out;
}

inline std::uint64_t load_be64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
  return v;
}

}  // namespace detail

/// 32-byte opaque seed. Textual form is exactly 64 hex characters.
class Seed {
 public:
  using Bytes = std::array<std::uint8_t, 32>;

  Seed() = default;
  explicit Seed(const Bytes& bytes) : bytes_(bytes) {}

  static Seed from_hex(std::string_view hex) {
    if (hex.size() != 64) {
      throw Error(ErrorKind::config, "seed must be 64 hex characters, got " + std::to_string(hex.size()));
    }
    Bytes b{};
    for (std::size_t i = 0; i < 32; ++i) {
      const int hi = detail::hex_value(hex[2 * i]);
      const int lo = detail::hex_value(hex[2 * i + 1]);
      if (hi < 0 || lo < 0) throw Error(ErrorKind::config, "seed contains a non-hex character");
      b[i] = static_cast<std::uint8_t>(hi * 16 + lo);
    }
    return Seed(b);
  }

  /// Seed whose last eight bytes hold `v` big-endian, rest zero. Handy in tests.
  static Seed from_u64(std::uint64_t v) {
    Bytes b{};
    const auto tail = detail::be64(v);
    for (std::size_t i = 0; i < 8; ++i) b[24 + i] = tail[i];
    return Seed(b);
  }

  std::string hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (auto byte : bytes_) {
      out.push_back(digits[byte >> 4]);
      out.push_back(digits[byte & 0xf]);
    }
    return out;
  }

  const Bytes& bytes() const noexcept { return bytes_; }

  /// Child seed = BLAKE2b-256 keyed by this seed over be64(index).
  Seed derive(std::uint64_t index) const {
    detail::ensure_sodium();
    const auto msg = detail::be64(index);
    Bytes out{};
    crypto_generichash(out.data(), out.size(), msg.data(), msg.size(), bytes_.data(), bytes_.size());
    return Seed(out);
  }

  friend bool operator==(const Seed&, const Seed&) = default;

 private:
  Bytes bytes_{};
};

/// Domain-separated keyed hash over 64-bit inputs: SipHash-2-4 keyed with
/// BLAKE2b-128(key = seed, msg = domain).
class Prf {
 public:
  Prf(const Seed& seed, std::string_view domain) {
    detail::ensure_sodium();
    crypto_generichash(key_.data(), key_.size(), reinterpret_cast<const unsigned char*>(domain.data()),
                       domain.size(), seed.bytes().data(), seed.bytes().size());
  }

  std::uint64_t operator()(std::uint64_t x) const {
    const auto msg = detail::be64(x);
    unsigned char out[crypto_shorthash_BYTES];
    crypto_shorthash(out, msg.data(), msg.size(), key_.data());
    return detail::load_be64(out);
  }

 private:
  std::array<unsigned char, crypto_shorthash_KEYBYTES> key_{};
};

/// Counter-mode generator over a Prf. Satisfies UniformRandomBitGenerator, but
/// callers use below() rather than std distributions so draws are portable.
class Rng {
 public:
  using result_type = std::uint64_t;

  Rng(const Seed& seed, std::string_view domain) : prf_(seed, domain) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() { return prf_(counter_++); }

  /// Uniform draw from [0, bound). bound must be nonzero.
  std::uint64_t below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    // 2^64 - threshold is a multiple of bound.
    const std::uint64_t threshold = (std::uint64_t{0} - bound) % bound;
    for (;;) {
      const std::uint64_t r = (*this)();
      if (r >= threshold) return r % bound;
    }
  }

  Word bits(unsigned width) { return (*this)() & low_mask(width); }

 private:
  Prf prf_;
  std::uint64_t counter_ = 0;
};

}  // namespace lmpc
