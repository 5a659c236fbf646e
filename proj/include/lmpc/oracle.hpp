#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lmpc/bits.hpp"
#include "lmpc/error.hpp"
#include "lmpc/prf.hpp"

namespace lmpc {

enum class OracleMode {
  lazy,
  eager,
  /// Same mechanism as lazy; kept distinct for reporting the hash instantiation.
  keyed_hash,
};

/// Attribution of a query. machine < 0 marks queries issued outside the
/// machine model (sequential evaluator, harnesses).
struct QueryTag {
  std::int32_t machine = -1;
  std::uint32_t round = 0;

  friend bool operator==(const QueryTag&, const QueryTag&) = default;
};

struct QueryRecord {
  QueryTag tag;
  Word query = 0;
};

/// Overwritten entries, key -> answer.
using PatchMap = std::map<Word, Word>;

/// Seedable stand-in for a uniformly random function {0,1}^n -> {0,1}^n.
///
/// The base answer for x is the first n bits of a keyed hash of x under the seed.
/// Copies share the base (and any eager table); patch() layers an overlay on top
/// without touching the original handle. The query log belongs to each handle.
class OracleHandle {
 public:
  static constexpr unsigned max_eager_width = 22;

  OracleHandle(const Seed& seed, unsigned n, OracleMode mode = OracleMode::lazy)
      : base_(std::make_shared<Base>(seed, n, mode)), patches_(empty_patches()) {}

  /// An eager oracle whose base is the given table (no seed). Inverse of dump_table().
  static OracleHandle from_table(unsigned n, std::vector<Word> table) {
    return OracleHandle(std::make_shared<Base>(n, std::move(table)), empty_patches());
  }

  unsigned width() const noexcept { return base_->n; }
  OracleMode mode() const noexcept { return base_->mode; }
  const std::optional<Seed>& seed() const noexcept { return base_->seed; }
  bool has_table() const noexcept { return !base_->table.empty(); }

  /// Pure lookup, not logged.
  Word answer(Word x) const {
    check_width(x);
    if (!patches_->empty()) {
      if (auto it = patches_->find(x); it != patches_->end()) return it->second;
    }
    return base_->base_answer(x);
  }

  /// Answer without the overlay.
  Word base_answer(Word x) const {
    check_width(x);
    return base_->base_answer(x);
  }

  Word query(Word x, QueryTag tag = {}) {
    const Word a = answer(x);
    log_.push_back({tag, x});
    return a;
  }

  /// New handle answering `entries` on their keys and the current answers
  /// elsewhere. Later patches win over earlier ones on the same key.
  OracleHandle patch(const PatchMap& entries) const {
    for (const auto& [k, v] : entries) {
      check_width(k);
      check_width(v);
    }
    auto merged = std::make_shared<PatchMap>(*patches_);
    for (const auto& [k, v] : entries) (*merged)[k] = v;
    return OracleHandle(base_, std::move(merged));
  }

  const PatchMap& patches() const noexcept { return *patches_; }

  /// Position i holds answer(i).
  std::vector<Word> dump_table() const {
    if (width() > max_eager_width) {
      throw Error(ErrorKind::mode_unsupported,
                  "table dump needs n <= " + std::to_string(max_eager_width) + ", n = " + std::to_string(width()));
    }
    const std::size_t size = std::size_t{1} << width();
    std::vector<Word> out;
    if (has_table()) {
      out = base_->table;
    } else {
      out.resize(size);
      for (std::size_t i = 0; i < size; ++i) out[i] = base_->base_answer(i);
    }
    for (const auto& [k, v] : *patches_) out[static_cast<std::size_t>(k)] = v;
    return out;
  }

  const std::vector<QueryRecord>& query_log() const noexcept { return log_; }
  void clear_log() { log_.clear(); }

  std::size_t count_tagged(QueryTag tag) const {
    std::size_t count = 0;
    for (const auto& r : log_) count += r.tag == tag ? 1 : 0;
    return count;
  }

 private:
  struct Base {
    Base(const Seed& s, unsigned width, OracleMode m) : n(width), mode(m), seed(s), prf(Prf(s, "lmpc/oracle")) {
      if (n == 0 || n > 64) throw Error(ErrorKind::invalid_parameters, "oracle width must be in 1..64");
      if (mode == OracleMode::eager) {
        if (n > max_eager_width) {
          throw Error(ErrorKind::mode_unsupported, "eager mode needs n <= " + std::to_string(max_eager_width));
        }
        const std::size_t size = std::size_t{1} << n;
        table.resize(size);
        for (std::size_t i = 0; i < size; ++i) table[i] = hashed(i);
      }
    }

    Base(unsigned width, std::vector<Word> t) : n(width), mode(OracleMode::eager), table(std::move(t)) {
      if (n == 0 || n > max_eager_width) {
        throw Error(ErrorKind::mode_unsupported, "table oracles need 1 <= n <= " + std::to_string(max_eager_width));
      }
      if (table.size() != (std::size_t{1} << n)) {
        throw Error(ErrorKind::length_mismatch, "table must hold 2^n entries");
      }
      for (Word v : table) {
        if (!fits(v, n)) throw Error(ErrorKind::width_mismatch, "table entry wider than n");
      }
    }

    Word hashed(Word x) const { return n == 64 ? (*prf)(x) : (*prf)(x) >> (64 - n); }

    Word base_answer(Word x) const {
      if (!table.empty()) return table[static_cast<std::size_t>(x)];
      return hashed(x);
    }

    unsigned n;
    OracleMode mode;
    std::optional<Seed> seed;
    std::optional<Prf> prf;
    std::vector<Word> table;
  };

  OracleHandle(std::shared_ptr<const Base> base, std::shared_ptr<const PatchMap> patches)
      : base_(std::move(base)), patches_(std::move(patches)) {}

  static std::shared_ptr<const PatchMap> empty_patches() {
    static const auto empty = std::make_shared<const PatchMap>();
    return empty;
  }

  void check_width(Word x) const {
    if (!fits(x, base_->n)) {
      throw Error(ErrorKind::width_mismatch, "word wider than n = " + std::to_string(base_->n));
    }
  }

  std::shared_ptr<const Base> base_;
  std::shared_ptr<const PatchMap> patches_;
  std::vector<QueryRecord> log_;
};

/// Table file: "LMPC1", 0x01, u32le n, then entry i at bit offset i*n, MSB first.
inline std::vector<std::uint8_t> serialize_table(unsigned n, std::span<const Word> table) {
  if (table.size() != (std::size_t{1} << n)) throw Error(ErrorKind::length_mismatch, "table must hold 2^n entries");
  BitString packed;
  for (Word v : table) packed.append(v, n);
  std::vector<std::uint8_t> out(file_magic.begin(), file_magic.end());
  out.push_back(static_cast<std::uint8_t>(SectionId::oracle_table));
  put_u32_le(out, n);
  out.insert(out.end(), packed.bytes().begin(), packed.bytes().end());
  return out;
}

inline OracleHandle restore_table(std::span<const std::uint8_t> file) {
  const std::size_t header = file_magic.size() + 1 + 4;
  if (file.size() < header || !std::equal(file_magic.begin(), file_magic.end(), file.begin()) ||
      file[file_magic.size()] != static_cast<std::uint8_t>(SectionId::oracle_table)) {
    throw Error(ErrorKind::format, "not an oracle table file");
  }
  const unsigned n = get_u32_le(file, file_magic.size() + 1);
  if (n == 0 || n > OracleHandle::max_eager_width) throw Error(ErrorKind::format, "unsupported table width");
  const std::size_t count = std::size_t{1} << n;
  const std::size_t bits = count * n;
  if (file.size() - header != (bits + 7) / 8) throw Error(ErrorKind::format, "table payload has wrong length");
  const BitString packed = BitString::from_bytes(file.subspan(header), bits);
  std::vector<Word> table(count);
  BitReader reader(packed);
  for (auto& v : table) v = reader.read(n);
  return OracleHandle::from_table(n, std::move(table));
}

}  // namespace lmpc
