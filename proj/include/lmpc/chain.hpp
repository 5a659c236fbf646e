#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lmpc/bits.hpp"
#include "lmpc/error.hpp"

namespace lmpc {

enum class ChainKind { line, simline };

inline std::string_view to_string(ChainKind kind) { return kind == ChainKind::line ? "line" : "simline"; }

inline ChainKind parse_chain_kind(std::string_view s) {
  if (s == "line") return ChainKind::line;
  if (s == "simline") return ChainKind::simline;
  throw Error(ErrorKind::config, "unknown function '" + std::string(s) + "' (expected line or simline)");
}

/// Sizes of one chain instance and of the machine model running against it.
///
///   n  oracle width            u  block width (floor(n/3) unless overridden)
///   v  number of input blocks  w  chain length (oracle iterations)
///   m  machines                s  local memory in bits
///   q  queries per machine per round
///   d  enumeration depth used by the enumerative codec
struct Parameters {
  unsigned n = 24;
  unsigned u = 8;
  std::uint64_t v = 16;
  std::uint64_t w = 16;
  std::uint64_t m = 1;
  std::uint64_t s = 0;
  std::uint64_t q = 1;
  unsigned d = 2;

  static Parameters for_width(unsigned n) {
    Parameters p;
    p.n = n;
    p.u = n / 3;
    return p;
  }

  /// Width of the counter field in a Line query.
  unsigned c_bits() const { return n >= 2 * u ? n - 2 * u : 0; }
  /// Width of the block selector at the top of a Line answer.
  unsigned ell_bits() const { return ceil_log2(v); }
  unsigned q_bits() const { return ceil_log2(q); }
  /// Residual answer width after (ell, r) for Line, after r for SimLine.
  unsigned z_bits(ChainKind kind) const {
    return kind == ChainKind::line ? n - ell_bits() - u : n - u;
  }
  std::uint64_t input_bits() const { return v * u; }

  /// Checks the sizes needed to evaluate the chain function of `kind`.
  void validate(ChainKind kind) const {
    auto fail = [](const std::string& why) { throw Error(ErrorKind::invalid_parameters, why); };
    if (n == 0 || n > 64) fail("n must be in 1..64");
    if (u == 0) fail("u must be positive");
    if (2 * u > n) fail("2u must not exceed n");
    if (v == 0) fail("v must be positive");
    if (w == 0) fail("w must be positive");
    if (kind == ChainKind::line) {
      if (2 * u + ell_bits() > n) fail("2u + ceil(log2 v) must not exceed n for Line answers");
      if (c_bits() < 64 && w + 1 >= (std::uint64_t{1} << c_bits())) {
        fail("w + 1 must be below 2^(n - 2u) for the Line counter");
      }
    }
  }

  /// Additionally checks the machine-model sizes.
  void validate_model(ChainKind kind) const {
    validate(kind);
    auto fail = [](const std::string& why) { throw Error(ErrorKind::invalid_parameters, why); };
    if (v < 2) fail("v must be at least 2");
    if (m == 0) fail("m must be positive");
    if (s < u) fail("s must be at least u");
    if (q == 0) fail("q must be positive");
  }

  /// u > (d + 2) ceil(log2 v) + ceil(log2 q), the compression precondition with
  /// depth d standing in for log^2 w.
  bool enumerative_precondition() const {
    return static_cast<std::uint64_t>(u) > static_cast<std::uint64_t>(d + 2) * ell_bits() + q_bits();
  }

  /// h = s / (u - (d+2) ceil(log v) - ceil(log q)) + 1; zero when the
  /// denominator is not positive.
  double reachable_threshold() const {
    const long long denom = static_cast<long long>(u) - static_cast<long long>((d + 2) * ell_bits()) -
                            static_cast<long long>(q_bits());
    if (denom <= 0) return 0.0;
    return static_cast<double>(s) / static_cast<double>(denom) + 1.0;
  }

  friend bool operator==(const Parameters&, const Parameters&) = default;
};

/// One chain node: the values feeding query i (ell selects the block).
struct NodeState {
  std::uint64_t index = 1;
  std::uint64_t ell = 0;
  Word r = 0;
  Word z = 0;

  friend bool operator==(const NodeState&, const NodeState&) = default;
};

struct InputVector {
  std::vector<Word> blocks;

  friend bool operator==(const InputVector&, const InputVector&) = default;
};

inline void check_input(const InputVector& x, const Parameters& p) {
  if (x.blocks.size() != p.v) {
    throw Error(ErrorKind::length_mismatch,
                "input has " + std::to_string(x.blocks.size()) + " blocks, expected " + std::to_string(p.v));
  }
  for (Word b : x.blocks) {
    if (!fits(b, p.u)) throw Error(ErrorKind::width_mismatch, "input block wider than u");
  }
}

/// Line query layout: [i (c_bits) | x (u) | r (u) | zero padding].
inline Word pack_line_query(std::uint64_t i, Word x, Word r, const Parameters& p) {
  if (i == 0) throw Error(ErrorKind::counter_overflow, "chain index starts at 1");
  if (!fits(i, p.c_bits())) {
    throw Error(ErrorKind::counter_overflow, "index " + std::to_string(i) + " needs more than " +
                                                 std::to_string(p.c_bits()) + " counter bits");
  }
  if (!fits(x, p.u) || !fits(r, p.u)) throw Error(ErrorKind::width_mismatch, "x and r must fit in u bits");
  const unsigned pad = p.n - p.c_bits() - 2 * p.u;
  return (((i << p.u | x) << p.u | r) << pad);
}

struct LineAnswer {
  std::uint64_t ell = 0;
  Word r = 0;
  Word z = 0;

  friend bool operator==(const LineAnswer&, const LineAnswer&) = default;
};

/// Splits an answer into [ell_raw (ceil log v) | r (u) | z (rest)], ell = ell_raw mod v.
inline LineAnswer unpack_line_answer(Word a, const Parameters& p) {
  if (!fits(a, p.n)) throw Error(ErrorKind::width_mismatch, "answer wider than n");
  const unsigned lb = p.ell_bits();
  const unsigned zb = p.n - lb - p.u;
  LineAnswer out;
  out.z = a & low_mask(zb);
  out.r = (a >> zb) & low_mask(p.u);
  const Word raw = lb == 0 ? 0 : (a >> (zb + p.u)) & low_mask(lb);
  out.ell = raw % p.v;
  return out;
}

/// Inverse of unpack_line_answer for ell < v.
inline Word pack_line_answer(const LineAnswer& a, const Parameters& p) {
  const unsigned lb = p.ell_bits();
  const unsigned zb = p.n - lb - p.u;
  if (a.ell >= p.v || !fits(a.r, p.u) || !fits(a.z, zb)) {
    throw Error(ErrorKind::width_mismatch, "answer fields out of range");
  }
  return ((a.ell << p.u | a.r) << zb) | a.z;
}

/// The x field of a packed Line query.
inline Word line_query_block(Word query, const Parameters& p) {
  const unsigned pad = p.n - p.c_bits() - 2 * p.u;
  return (query >> (pad + p.u)) & low_mask(p.u);
}

inline std::uint64_t line_query_index(Word query, const Parameters& p) {
  const unsigned pad = p.n - p.c_bits() - 2 * p.u;
  return (query >> (pad + 2 * p.u)) & low_mask(p.c_bits());
}

inline Word line_query_r(Word query, const Parameters& p) {
  const unsigned pad = p.n - p.c_bits() - 2 * p.u;
  return (query >> pad) & low_mask(p.u);
}

/// SimLine query layout: [x (u) | r (u) | zero padding].
inline Word pack_simline_query(Word x, Word r, const Parameters& p) {
  if (!fits(x, p.u) || !fits(r, p.u)) throw Error(ErrorKind::width_mismatch, "x and r must fit in u bits");
  return ((x << p.u) | r) << (p.n - 2 * p.u);
}

struct SimLineAnswer {
  Word r = 0;
  Word z = 0;

  friend bool operator==(const SimLineAnswer&, const SimLineAnswer&) = default;
};

inline SimLineAnswer unpack_simline_answer(Word a, const Parameters& p) {
  if (!fits(a, p.n)) throw Error(ErrorKind::width_mismatch, "answer wider than n");
  const unsigned zb = p.n - p.u;
  return {(a >> zb) & low_mask(p.u), a & low_mask(zb)};
}

inline Word simline_query_block(Word query, const Parameters& p) {
  return (query >> (p.n - p.u)) & low_mask(p.u);
}

/// 0-based block used by SimLine step i (1-based): (i - 1) mod v.
inline std::uint64_t simline_input_index(std::uint64_t i, const Parameters& p) {
  if (i == 0) throw Error(ErrorKind::invalid_parameters, "chain index starts at 1");
  return (i - 1) % p.v;
}

/// The block value embedded in a query of either kind.
inline Word query_block(ChainKind kind, Word query, const Parameters& p) {
  return kind == ChainKind::line ? line_query_block(query, p) : simline_query_block(query, p);
}

inline InputVector input_from_bits(const BitString& bits, const Parameters& p) {
  if (bits.size() != p.input_bits()) {
    throw Error(ErrorKind::length_mismatch, "input payload has " + std::to_string(bits.size()) + " bits, expected " +
                                                std::to_string(p.input_bits()));
  }
  InputVector x;
  x.blocks.reserve(p.v);
  BitReader reader(bits);
  for (std::uint64_t i = 0; i < p.v; ++i) x.blocks.push_back(reader.read(p.u));
  return x;
}

inline BitString input_to_bits(const InputVector& x, const Parameters& p) {
  check_input(x, p);
  BitString out;
  for (Word b : x.blocks) out.append(b, p.u);
  return out;
}

/// Hex form: ceil(v*u/4) digits, blocks MSB-first, excess bits rejected.
inline InputVector parse_input(std::string_view hex, const Parameters& p) {
  if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
  return input_from_bits(bits_from_hex(hex, p.input_bits()), p);
}

inline std::string input_to_hex(const InputVector& x, const Parameters& p) { return input_to_bits(x, p).to_hex(); }

/// Input file: "LMPC1", 0x02, u32le v, u32le u, bit-packed blocks.
inline std::vector<std::uint8_t> serialize_input(const InputVector& x, const Parameters& p) {
  const BitString bits = input_to_bits(x, p);
  std::vector<std::uint8_t> out(file_magic.begin(), file_magic.end());
  out.push_back(static_cast<std::uint8_t>(SectionId::input_vector));
  put_u32_le(out, static_cast<std::uint32_t>(p.v));
  put_u32_le(out, p.u);
  out.insert(out.end(), bits.bytes().begin(), bits.bytes().end());
  return out;
}

inline bool is_input_file(std::span<const std::uint8_t> file) {
  return file.size() >= file_magic.size() + 1 && std::equal(file_magic.begin(), file_magic.end(), file.begin()) &&
         file[file_magic.size()] == static_cast<std::uint8_t>(SectionId::input_vector);
}

inline InputVector parse_input_file(std::span<const std::uint8_t> file, const Parameters& p) {
  const std::size_t header = file_magic.size() + 1 + 8;
  if (file.size() < header || !is_input_file(file)) throw Error(ErrorKind::format, "not an input vector file");
  const std::uint32_t v = get_u32_le(file, file_magic.size() + 1);
  const std::uint32_t u = get_u32_le(file, file_magic.size() + 5);
  if (v != p.v || u != p.u) {
    throw Error(ErrorKind::length_mismatch, "input file is for v=" + std::to_string(v) + ", u=" + std::to_string(u));
  }
  if (file.size() - header != (p.input_bits() + 7) / 8) throw Error(ErrorKind::length_mismatch, "input payload size");
  const auto payload = file.subspan(header);
  const std::size_t pad = payload.size() * 8 - p.input_bits();
  if (pad > 0 && (payload.back() & low_mask(static_cast<unsigned>(pad))) != 0) {
    throw Error(ErrorKind::length_mismatch, "excess nonzero bits beyond payload");
  }
  return input_from_bits(BitString::from_bytes(payload, p.input_bits()), p);
}

}  // namespace lmpc
