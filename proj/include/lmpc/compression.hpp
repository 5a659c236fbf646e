#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lmpc/bits.hpp"
#include "lmpc/chain.hpp"
#include "lmpc/error.hpp"
#include "lmpc/mpc_engine.hpp"
#include "lmpc/oracle.hpp"
#include "lmpc/ram_eval.hpp"

namespace lmpc {

// ---------------------------------------------------------------------------
// Blob framing
// ---------------------------------------------------------------------------

enum class Scheme : std::uint8_t { warmup = 0x01, enumerative = 0x02 };

inline std::string_view to_string(Scheme s) { return s == Scheme::warmup ? "warmup" : "enum"; }

inline Scheme parse_scheme(std::string_view s) {
  if (s == "warmup") return Scheme::warmup;
  if (s == "enum" || s == "enumerative") return Scheme::enumerative;
  throw Error(ErrorKind::config, "unknown scheme '" + std::string(s) + "' (expected warmup or enum)");
}

enum class BlobSection : std::uint8_t {
  table = 0x01,
  memory = 0x02,
  context = 0x03,
  count = 0x04,
  records = 0x05,
  rest = 0x06,
  seq_counts = 0x07,
  seq_records = 0x08,
};

/// Header sections carry framing data (who/where the replay happens, how many
/// records follow). They are reported separately and left out of bound checks.
inline bool is_header_section(BlobSection id) {
  return id == BlobSection::context || id == BlobSection::count || id == BlobSection::seq_counts;
}

inline const std::vector<BlobSection>& section_order(Scheme scheme) {
  static const std::vector<BlobSection> warm = {BlobSection::table,   BlobSection::memory,  BlobSection::context,
                                                BlobSection::count,   BlobSection::records, BlobSection::rest};
  static const std::vector<BlobSection> enumerative = {BlobSection::table,      BlobSection::memory,
                                                       BlobSection::context,    BlobSection::seq_counts,
                                                       BlobSection::seq_records, BlobSection::rest};
  return scheme == Scheme::warmup ? warm : enumerative;
}

struct BlobPart {
  BlobSection id = BlobSection::table;
  BitString bits;
};

/// Serialized as "LMPC1", 0x03, scheme byte, u32le section count, then per
/// section: u8 id, u32le bit length, the bits padded with zeros to a byte.
struct EncodingBlob {
  static constexpr std::uint64_t fixed_framing_bits = (5 + 1 + 1 + 4) * 8;
  static constexpr std::uint64_t section_framing_bits = (1 + 4) * 8;

  Scheme scheme = Scheme::warmup;
  std::vector<BlobPart> sections;

  std::uint64_t framing_bits() const { return fixed_framing_bits + sections.size() * section_framing_bits; }

  std::uint64_t payload_bits() const {
    std::uint64_t total = 0;
    for (const auto& s : sections) total += is_header_section(s.id) ? 0 : s.bits.size();
    return total;
  }

  std::uint64_t header_bits() const {
    std::uint64_t total = framing_bits();
    for (const auto& s : sections) total += is_header_section(s.id) ? s.bits.size() : 0;
    return total;
  }

  std::uint64_t total_bits() const { return payload_bits() + header_bits(); }

  std::uint64_t padding_bits() const {
    std::uint64_t total = 0;
    for (const auto& s : sections) total += s.bits.padding();
    return total;
  }

  const BitString& section(BlobSection id) const {
    for (const auto& s : sections) {
      if (s.id == id) return s.bits;
    }
    throw Error(ErrorKind::decode, "blob has no section " + std::to_string(static_cast<int>(id)));
  }

  std::vector<std::uint8_t> serialize() const {
    std::vector<std::uint8_t> out(file_magic.begin(), file_magic.end());
    out.push_back(static_cast<std::uint8_t>(SectionId::encoding_blob));
    out.push_back(static_cast<std::uint8_t>(scheme));
    put_u32_le(out, static_cast<std::uint32_t>(sections.size()));
    for (const auto& s : sections) {
      out.push_back(static_cast<std::uint8_t>(s.id));
      put_u32_le(out, static_cast<std::uint32_t>(s.bits.size()));
      out.insert(out.end(), s.bits.bytes().begin(), s.bits.bytes().end());
    }
    return out;
  }

  /// The serialized bytes as one bit string (the codeword).
  BitString codeword() const {
    const auto bytes = serialize();
    return BitString::from_bytes(bytes, bytes.size() * 8);
  }

  static EncodingBlob parse(std::span<const std::uint8_t> file) {
    const std::size_t head = file_magic.size() + 2 + 4;
    if (file.size() < head || !std::equal(file_magic.begin(), file_magic.end(), file.begin()) ||
        file[file_magic.size()] != static_cast<std::uint8_t>(SectionId::encoding_blob)) {
      throw Error(ErrorKind::format, "not an encoding blob");
    }
    EncodingBlob blob;
    const std::uint8_t scheme = file[file_magic.size() + 1];
    if (scheme != 0x01 && scheme != 0x02) throw Error(ErrorKind::format, "unknown blob scheme");
    blob.scheme = static_cast<Scheme>(scheme);
    const std::uint32_t count = get_u32_le(file, file_magic.size() + 2);
    const auto& order = section_order(blob.scheme);
    if (count != order.size()) throw Error(ErrorKind::format, "wrong number of blob sections");
    std::size_t pos = head;
    for (std::uint32_t i = 0; i < count; ++i) {
      if (file.size() < pos + 5) throw Error(ErrorKind::format, "truncated section header");
      const auto id = static_cast<BlobSection>(file[pos]);
      if (id != order[i]) throw Error(ErrorKind::format, "blob sections out of order");
      const std::uint32_t bits = get_u32_le(file, pos + 1);
      pos += 5;
      const std::size_t bytes = (static_cast<std::size_t>(bits) + 7) / 8;
      if (file.size() < pos + bytes) throw Error(ErrorKind::format, "truncated section payload");
      BitString part = BitString::from_bytes(file.subspan(pos, bytes), bits);
      if (bytes > 0 && (file[pos + bytes - 1] & low_mask(static_cast<unsigned>(part.padding()))) != 0) {
        throw Error(ErrorKind::format, "nonzero section padding");
      }
      blob.sections.push_back({id, std::move(part)});
      pos += bytes;
    }
    if (pos != file.size()) throw Error(ErrorKind::format, "trailing bytes after blob");
    return blob;
  }
};

// ---------------------------------------------------------------------------
// Shared pieces
// ---------------------------------------------------------------------------

/// What the codec needs to re-run one machine-round: the algorithm (strategy
/// plus shared tape) and which machine/round to run.
struct ReplayContext {
  const Strategy* strategy = nullptr;
  Parameters params;
  std::uint64_t machine = 0;
  std::uint64_t round = 0;
  Seed tape_seed{};
  std::uint64_t tape_cap = SharedTape::default_cap;
};

inline StepOutcome replay_machine_round(const ReplayContext& ctx, const BitString& memory, const AnswerFn& answer) {
  if (ctx.strategy == nullptr) throw Error(ErrorKind::invalid_parameters, "replay needs a strategy");
  const SharedTape tape(ctx.tape_seed, ctx.tape_cap);
  return execute_step(*ctx.strategy, ctx.params, ctx.machine, ctx.round, memory, answer, tape);
}

/// Replays against an oracle handle (answers are pure lookups, nothing logged).
inline StepOutcome replay_machine_round(const ReplayContext& ctx, const BitString& memory, const OracleHandle& oracle) {
  const AnswerFn answer = [&oracle](Word w) { return oracle.answer(w); };
  return replay_machine_round(ctx, memory, answer);
}

struct RecoveryRecord {
  std::uint64_t query_index = 0;
  std::uint64_t block = 0;

  friend bool operator==(const RecoveryRecord&, const RecoveryRecord&) = default;
};

struct DecodedInstance {
  std::vector<Word> table;
  InputVector x;
  /// Queries of every replay the decoder ran, in order.
  std::vector<std::vector<Word>> replays;
};

namespace detail {

constexpr unsigned context_field_bits = 32;

inline void check_codec_oracle(const OracleHandle& oracle, const Parameters& p) {
  if (oracle.width() != p.n) throw Error(ErrorKind::width_mismatch, "oracle width differs from n");
  if (p.n > OracleHandle::max_eager_width) {
    throw Error(ErrorKind::mode_unsupported, "codecs store the whole table and need n <= 22");
  }
}

inline BitString table_bits(const std::vector<Word>& table, const Parameters& p) {
  BitString out;
  for (Word v : table) out.append(v, p.n);
  return out;
}

inline std::vector<Word> read_table(const BitString& bits, const Parameters& p) {
  const std::size_t count = std::size_t{1} << p.n;
  if (bits.size() != count * p.n) throw Error(ErrorKind::decode, "table section has the wrong length");
  std::vector<Word> table(count);
  BitReader reader(bits);
  for (auto& v : table) v = reader.read(p.n);
  return table;
}

inline std::optional<std::size_t> first_index(const std::vector<Word>& queries, Word word) {
  const auto it = std::find(queries.begin(), queries.end(), word);
  if (it == queries.end()) return std::nullopt;
  return static_cast<std::size_t>(it - queries.begin());
}

/// Appends the blocks whose index is not in `recovered`, ascending.
inline BitString rest_bits(const InputVector& x, const std::vector<bool>& recovered, const Parameters& p) {
  BitString out;
  for (std::uint64_t i = 0; i < p.v; ++i) {
    if (!recovered[i]) out.append(x.blocks[i], p.u);
  }
  return out;
}

inline void fill_rest(const BitString& bits, std::vector<std::optional<Word>>& xs, const std::vector<bool>& recovered,
                      const Parameters& p) {
  std::uint64_t missing = 0;
  for (std::uint64_t i = 0; i < p.v; ++i) missing += recovered[i] ? 0 : 1;
  if (bits.size() != missing * p.u) throw Error(ErrorKind::decode, "rest section has the wrong length");
  BitReader reader(bits);
  for (std::uint64_t i = 0; i < p.v; ++i) {
    if (!recovered[i]) xs[i] = reader.read(p.u);
  }
}

inline InputVector finish_input(const std::vector<std::optional<Word>>& xs) {
  InputVector x;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!xs[i]) throw Error(ErrorKind::decode, "block " + std::to_string(i) + " was never recovered");
    x.blocks.push_back(*xs[i]);
  }
  return x;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Warm-up codec
// ---------------------------------------------------------------------------

/// One correct entry a codec tries to find among the replayed queries.
struct TargetEntry {
  std::uint64_t position = 0;
  Word word = 0;
  std::uint64_t block = 0;
};

/// Correct entries at positions first, first+1, ... (at most `count`, capped
/// at w), keeping only the first position for each block.
inline std::vector<TargetEntry> target_window(ChainKind kind, const Parameters& p, const OracleHandle& oracle,
                                              const InputVector& x, std::uint64_t first, std::uint64_t count) {
  const auto trace = chain_trace(kind, p, oracle, x);
  std::vector<TargetEntry> out;
  std::vector<bool> seen(p.v, false);
  for (std::uint64_t pos = std::max<std::uint64_t>(first, 1); pos < first + count && pos <= p.w; ++pos) {
    const auto& row = trace[pos - 1];
    const std::uint64_t block = row.node.ell;
    if (seen[block]) continue;
    seen[block] = true;
    out.push_back({pos, row.query, block});
  }
  return out;
}

/// s + I(ceil log q + ceil log v) + (v - I)u + n 2^n.
inline std::uint64_t warmup_bound_bits(const Parameters& p, std::uint64_t intersect) {
  return p.s + intersect * (p.q_bits() + p.ell_bits()) + (p.v - intersect) * p.u + (std::uint64_t{p.n} << p.n);
}

inline unsigned warmup_count_bits(const Parameters& p) { return ceil_log2(p.v + 1); }

struct WarmupEncoding {
  EncodingBlob blob;
  std::vector<RecoveryRecord> records;
  std::vector<Word> queries;
  std::uint64_t intersect_size = 0;
  std::uint64_t bound_bits = 0;
};

/// Encodes (table, X) given machine `ctx.machine`'s round-`ctx.round` memory.
/// Returns nothing when fewer than `alpha` targets appear among the replayed
/// queries (the instance lies outside the compressible set).
inline std::optional<WarmupEncoding> encode_warmup(const OracleHandle& oracle, const InputVector& x,
                                                   const ReplayContext& ctx, const BitString& memory,
                                                   const std::vector<TargetEntry>& targets, std::uint64_t alpha) {
  const Parameters& p = ctx.params;
  detail::check_codec_oracle(oracle, p);
  check_input(x, p);
  if (memory.size() > p.s) throw Error(ErrorKind::invalid_parameters, "memory longer than s");

  WarmupEncoding enc;
  enc.queries = replay_machine_round(ctx, memory, oracle).queries;

  std::vector<bool> recovered(p.v, false);
  for (const auto& t : targets) {
    const auto idx = detail::first_index(enc.queries, t.word);
    if (!idx) continue;
    ++enc.intersect_size;
    if (recovered[t.block]) continue;
    recovered[t.block] = true;
    enc.records.push_back({*idx, t.block});
  }
  if (enc.intersect_size < alpha) return std::nullopt;

  BitString context;
  context.append(ctx.machine, detail::context_field_bits);
  context.append(ctx.round, detail::context_field_bits);
  BitString count;
  count.append(enc.records.size(), warmup_count_bits(p));
  BitString records;
  for (const auto& r : enc.records) {
    records.append(r.query_index, p.q_bits());
    records.append(r.block, p.ell_bits());
  }

  enc.blob.scheme = Scheme::warmup;
  enc.blob.sections = {
      {BlobSection::table, detail::table_bits(oracle.dump_table(), p)},
      {BlobSection::memory, memory},
      {BlobSection::context, std::move(context)},
      {BlobSection::count, std::move(count)},
      {BlobSection::records, std::move(records)},
      {BlobSection::rest, detail::rest_bits(x, recovered, p)},
  };
  enc.bound_bits = warmup_bound_bits(p, enc.records.size());
  return enc;
}

/// Inverse of encode_warmup. Only the strategy, parameters and tape are taken
/// from `ctx`; machine and round come from the blob.
inline DecodedInstance decode_warmup(const EncodingBlob& blob, const ReplayContext& ctx) {
  if (blob.scheme != Scheme::warmup) throw Error(ErrorKind::decode, "not a warm-up blob");
  const Parameters& p = ctx.params;
  DecodedInstance out;
  out.table = detail::read_table(blob.section(BlobSection::table), p);
  const OracleHandle oracle = OracleHandle::from_table(p.n, out.table);
  const BitString& memory = blob.section(BlobSection::memory);

  ReplayContext run = ctx;
  BitReader context(blob.section(BlobSection::context));
  run.machine = context.read(detail::context_field_bits);
  run.round = context.read(detail::context_field_bits);

  const BitString& count_bits = blob.section(BlobSection::count);
  if (count_bits.size() != warmup_count_bits(p)) throw Error(ErrorKind::decode, "count section has the wrong length");
  const std::uint64_t count = count_bits.read(0, warmup_count_bits(p));
  const BitString& record_bits = blob.section(BlobSection::records);
  if (record_bits.size() != count * (p.q_bits() + p.ell_bits())) {
    throw Error(ErrorKind::decode, "records section has the wrong length");
  }

  const std::vector<Word> queries = replay_machine_round(run, memory, oracle).queries;
  std::vector<std::optional<Word>> xs(p.v);
  std::vector<bool> recovered(p.v, false);
  BitReader reader(record_bits);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t idx = reader.read(p.q_bits());
    const std::uint64_t block = reader.read(p.ell_bits());
    if (idx >= queries.size() || block >= p.v) throw Error(ErrorKind::decode, "record points outside the replay");
    xs[block] = query_block(ctx.strategy->kind(), queries[idx], p);
    recovered[block] = true;
  }
  detail::fill_rest(blob.section(BlobSection::rest), xs, recovered, p);
  out.x = detail::finish_input(xs);
  out.replays.push_back(queries);
  return out;
}

// ---------------------------------------------------------------------------
// Patched oracles
// ---------------------------------------------------------------------------

/// The chain position a round-k replay starts from. `frontier` is the largest
/// correct position queried before round k (0 if none); the first position not
/// yet reached is g = frontier + 1, with block a_0 = ell_g and value r_g.
struct FrontierInfo {
  std::uint64_t frontier = 0;
  std::uint64_t g = 1;
  std::uint64_t a0 = 0;
  Word r_g = 0;

  bool active(const Parameters& p) const { return g <= p.w; }
};

inline FrontierInfo frontier_info(const Parameters& p, const OracleHandle& oracle, const InputVector& x,
                                  std::uint64_t frontier) {
  FrontierInfo f;
  f.frontier = frontier;
  f.g = frontier + 1;
  if (f.g <= p.w) {
    const auto trace = chain_trace(ChainKind::line, p, oracle, x);
    f.a0 = trace[f.g - 1].node.ell;
    f.r_g = trace[f.g - 1].node.r;
  }
  return f;
}

struct PatchedChain {
  OracleHandle oracle;
  /// q_b = (g+b, x_{a_b}, r'_{g+b}) for b = 0.. while g+b <= w.
  std::vector<Word> chain_queries;
  /// a_b for the same b.
  std::vector<std::uint64_t> chain_blocks;
};

/// Overwrites the answer at (g+t-1, x_{a_{t-1}}, r'_{g+t-1}) for t = 1..d so its
/// block field reads a_t, keeping r' and z' from the unpatched answer. Entries
/// past position w are left alone.
inline PatchedChain patched_chain(const OracleHandle& base, const InputVector& x, const Parameters& p,
                                  const FrontierInfo& f, const std::vector<std::uint64_t>& seq) {
  for (auto a : seq) {
    if (a >= p.v) throw Error(ErrorKind::width_mismatch, "sequence entry outside [v]");
  }
  PatchMap patches;
  std::vector<Word> queries;
  std::vector<std::uint64_t> blocks;
  if (f.active(p)) {
    Word r = f.r_g;
    queries.push_back(pack_line_query(f.g, x.blocks[f.a0], r, p));
    blocks.push_back(f.a0);
    for (std::size_t t = 1; t <= seq.size(); ++t) {
      const Word key = queries.back();
      const LineAnswer base_answer = unpack_line_answer(base.answer(key), p);
      patches[key] = pack_line_answer({seq[t - 1], base_answer.r, base_answer.z}, p);
      r = base_answer.r;
      if (f.g + t > p.w) break;
      queries.push_back(pack_line_query(f.g + t, x.blocks[seq[t - 1]], r, p));
      blocks.push_back(seq[t - 1]);
    }
  }
  return {base.patch(patches), std::move(queries), std::move(blocks)};
}

inline OracleHandle build_patched_oracle(const OracleHandle& base, const InputVector& x, const Parameters& p,
                                         const FrontierInfo& f, const std::vector<std::uint64_t>& seq) {
  return patched_chain(base, x, p, f, seq).oracle;
}

/// Number of sequences in [v]^d, or an error when it exceeds `cap`.
inline std::uint64_t sequence_count(const Parameters& p, std::uint64_t cap) {
  std::uint64_t total = 1;
  for (unsigned i = 0; i < p.d; ++i) {
    if (total > cap / p.v) {
      throw Error(ErrorKind::cap_exceeded, "v^d exceeds the enumeration cap of " + std::to_string(cap));
    }
    total *= p.v;
  }
  if (total > cap) throw Error(ErrorKind::cap_exceeded, "v^d exceeds the enumeration cap of " + std::to_string(cap));
  return total;
}

/// The index-th sequence of [v]^d in lexicographic order.
inline std::vector<std::uint64_t> sequence_at(const Parameters& p, std::uint64_t index) {
  std::vector<std::uint64_t> seq(p.d);
  for (unsigned i = p.d; i-- > 0;) {
    seq[i] = index % p.v;
    index /= p.v;
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Guessable sets and the jump event
// ---------------------------------------------------------------------------

struct GuessableEntry {
  std::uint64_t position = 0;
  Word word = 0;
  /// Entry whose answer the word's r field comes from; none for position 1.
  std::optional<Word> predecessor;
};

struct GuessableSet {
  std::uint64_t anchor = 0;
  unsigned depth = 0;
  std::vector<GuessableEntry> entries;
};

/// V^(j): the correct entry j+1 plus, for every choice of blocks a_1..a_d, the
/// entries (j+1+b, x_{a_b}, r') reached by following those choices. Positions
/// past w are dropped.
inline GuessableSet guessable_set(const Parameters& p, const OracleHandle& oracle, const InputVector& x,
                                  std::uint64_t anchor, const std::vector<Word>& correct) {
  GuessableSet set;
  set.anchor = anchor;
  set.depth = p.d;
  if (anchor + 1 > p.w) return set;
  GuessableEntry root{anchor + 1, correct[anchor], std::nullopt};
  if (anchor >= 1) root.predecessor = correct[anchor - 1];
  set.entries.push_back(root);

  std::vector<Word> level = {root.word};
  for (unsigned b = 1; b <= p.d && anchor + 1 + b <= p.w; ++b) {
    std::vector<Word> next;
    for (Word parent : level) {
      const Word r = unpack_line_answer(oracle.answer(parent), p).r;
      for (std::uint64_t a = 0; a < p.v; ++a) {
        const Word child = pack_line_query(anchor + 1 + b, x.blocks[a], r, p);
        set.entries.push_back({anchor + 1 + b, child, parent});
        next.push_back(child);
      }
    }
    level = std::move(next);
  }
  return set;
}

struct JumpEvent {
  std::uint64_t round = 0;
  std::uint64_t machine = 0;
  std::uint64_t query_index = 0;
  std::uint64_t position = 0;
  Word word = 0;
};

/// Scans the run's queries through `through_round`, in engine order, for an
/// entry of some V^(j) issued before any of its predecessors.
inline std::optional<JumpEvent> detect_jump(const RunReport& report, const Parameters& p, const OracleHandle& oracle,
                                            const InputVector& x, std::uint64_t through_round) {
  const std::vector<Word> correct = correct_chain(ChainKind::line, p, oracle, x);
  struct Info {
    std::uint64_t position = 0;
    bool free = false;  // some occurrence has no predecessor
    std::vector<Word> predecessors;
  };
  std::unordered_map<Word, Info> entries;
  for (std::uint64_t j = 0; j < p.w; ++j) {
    for (const auto& e : guessable_set(p, oracle, x, j, correct).entries) {
      Info& info = entries[e.word];
      info.position = e.position;
      if (e.predecessor) {
        info.predecessors.push_back(*e.predecessor);
      } else {
        info.free = true;
      }
    }
  }

  std::set<Word> queried;
  for (const auto& round : report.rounds) {
    if (round.round > through_round) break;
    for (const auto& mr : round.machines) {
      for (std::size_t i = 0; i < mr.queries.size(); ++i) {
        const Word q = mr.queries[i];
        if (auto it = entries.find(q); it != entries.end() && !it->second.free) {
          const bool ok = std::any_of(it->second.predecessors.begin(), it->second.predecessors.end(),
                                      [&](Word pred) { return queried.count(pred) > 0; });
          if (!ok) return JumpEvent{round.round, mr.machine, i, it->second.position, q};
        }
        queried.insert(q);
      }
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Reachable sets and the enumerative codec
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t default_enumeration_cap = 4096;

struct ReachableSet {
  std::uint64_t machine = 0;
  std::uint64_t round = 0;
  std::uint64_t frontier = 0;
  unsigned depth = 0;
  std::set<std::uint64_t> members;
};

/// State of one machine-round taken from a finished run.
struct RoundSnapshot {
  BitString memory;
  std::uint64_t frontier = 0;
};

inline RoundSnapshot snapshot(const RunReport& report, const ReplayContext& ctx) {
  return {report.memory_at(ctx.machine, ctx.round), report.frontier_before(ctx.round)};
}

namespace detail {

inline void require_no_jump(const RunReport& report, const Parameters& p, const OracleHandle& oracle,
                            const InputVector& x, std::uint64_t round) {
  if (auto jump = detect_jump(report, p, oracle, x, round)) {
    throw Error(ErrorKind::precondition_failed,
                "jump at round " + std::to_string(jump->round) + ", machine " + std::to_string(jump->machine) +
                    ", position " + std::to_string(jump->position));
  }
}

/// Visits every sequence with its patched chain and the replayed queries.
template <class Visit>
void for_each_sequence(const OracleHandle& oracle, const InputVector& x, const ReplayContext& ctx,
                       const RoundSnapshot& snap, std::uint64_t cap, Visit&& visit) {
  const Parameters& p = ctx.params;
  const FrontierInfo f = frontier_info(p, oracle, x, snap.frontier);
  const std::uint64_t total = sequence_count(p, cap);
  for (std::uint64_t s = 0; s < total; ++s) {
    const auto seq = sequence_at(p, s);
    const PatchedChain chain = patched_chain(oracle, x, p, f, seq);
    const auto queries = replay_machine_round(ctx, snap.memory, chain.oracle).queries;
    visit(seq, chain, queries);
  }
}

}  // namespace detail

/// B_i^(k): every a that occurs at some depth b of some sequence such that
/// machine i, replayed in round k against that sequence's patched oracle,
/// issues the depth-b chain query holding x_a. Depth 0 (the block of the first
/// unreached position) is included.
inline ReachableSet compute_reachable_set(const OracleHandle& oracle, const InputVector& x, const RunReport& report,
                                          const ReplayContext& ctx, std::uint64_t cap = default_enumeration_cap) {
  const Parameters& p = ctx.params;
  detail::require_no_jump(report, p, oracle, x, ctx.round);
  const RoundSnapshot snap = snapshot(report, ctx);
  ReachableSet out{ctx.machine, ctx.round, snap.frontier, p.d, {}};
  detail::for_each_sequence(oracle, x, ctx, snap, cap,
                            [&](const auto&, const PatchedChain& chain, const std::vector<Word>& queries) {
                              for (std::size_t b = 0; b < chain.chain_queries.size(); ++b) {
                                if (detail::first_index(queries, chain.chain_queries[b])) {
                                  out.members.insert(chain.chain_blocks[b]);
                                }
                              }
                            });
  return out;
}

/// s + |B|((d+2) ceil log v + ceil log q) + (v - |B|)u + n 2^n.
inline std::uint64_t enumerative_bound_bits(const Parameters& p, std::uint64_t reachable) {
  return p.s + reachable * ((p.d + 2) * p.ell_bits() + p.q_bits()) + (p.v - reachable) * p.u +
         (std::uint64_t{p.n} << p.n);
}

inline unsigned sequence_count_bits(const Parameters& p) { return ceil_log2(p.d + 2); }

struct SequenceRecord {
  std::vector<std::uint64_t> seq;
  std::vector<RecoveryRecord> recoveries;
  std::vector<Word> queries;  // the replay that produced them
};

struct EnumerativeEncoding {
  EncodingBlob blob;
  FrontierInfo frontier;
  std::vector<SequenceRecord> sequences;
  std::set<std::uint64_t> recovered;
  std::uint64_t bound_bits = 0;
};

struct EnumerativeOptions {
  std::uint64_t cap = default_enumeration_cap;
  /// Refuse parameters where u <= (d+2) ceil log v + ceil log q.
  bool require_bound_precondition = true;
};

inline EnumerativeEncoding encode_enumerative(const OracleHandle& oracle, const InputVector& x,
                                              const RunReport& report, const ReplayContext& ctx,
                                              const EnumerativeOptions& options = {}) {
  const Parameters& p = ctx.params;
  detail::check_codec_oracle(oracle, p);
  check_input(x, p);
  if (ctx.strategy == nullptr || ctx.strategy->kind() != ChainKind::line) {
    throw Error(ErrorKind::invalid_parameters, "the enumerative codec works on Line strategies");
  }
  if (options.require_bound_precondition && !p.enumerative_precondition()) {
    throw Error(ErrorKind::precondition_failed, "u must exceed (d+2) ceil(log2 v) + ceil(log2 q)");
  }
  detail::require_no_jump(report, p, oracle, x, ctx.round);
  const RoundSnapshot snap = snapshot(report, ctx);
  if (snap.memory.size() > p.s) throw Error(ErrorKind::invalid_parameters, "memory longer than s");

  EnumerativeEncoding enc;
  enc.frontier = frontier_info(p, oracle, x, snap.frontier);
  std::vector<bool> recovered(p.v, false);
  detail::for_each_sequence(
      oracle, x, ctx, snap, options.cap,
      [&](const std::vector<std::uint64_t>& seq, const PatchedChain& chain, const std::vector<Word>& queries) {
        SequenceRecord rec{seq, {}, queries};
        for (std::size_t b = 0; b < chain.chain_queries.size(); ++b) {
          const std::uint64_t a = chain.chain_blocks[b];
          if (recovered[a]) continue;
          if (const auto idx = detail::first_index(queries, chain.chain_queries[b])) {
            recovered[a] = true;
            rec.recoveries.push_back({*idx, a});
          }
        }
        if (!rec.recoveries.empty()) enc.sequences.push_back(std::move(rec));
      });
  for (std::uint64_t a = 0; a < p.v; ++a) {
    if (recovered[a]) enc.recovered.insert(a);
  }

  BitString context;
  context.append(ctx.machine, detail::context_field_bits);
  context.append(ctx.round, detail::context_field_bits);
  context.append(enc.frontier.g, detail::context_field_bits);
  context.append(enc.frontier.a0, p.ell_bits());
  context.append(enc.frontier.r_g, p.u);

  BitString counts;
  BitString records;
  for (const auto& s : enc.sequences) {
    counts.append(s.recoveries.size(), sequence_count_bits(p));
    for (auto a : s.seq) records.append(a, p.ell_bits());
    for (const auto& r : s.recoveries) {
      records.append(r.query_index, p.q_bits());
      records.append(r.block, p.ell_bits());
    }
  }
  counts.append(0, sequence_count_bits(p));

  enc.blob.scheme = Scheme::enumerative;
  enc.blob.sections = {
      {BlobSection::table, detail::table_bits(oracle.dump_table(), p)},
      {BlobSection::memory, snap.memory},
      {BlobSection::context, std::move(context)},
      {BlobSection::seq_counts, std::move(counts)},
      {BlobSection::seq_records, std::move(records)},
      {BlobSection::rest, detail::rest_bits(x, recovered, p)},
  };
  enc.bound_bits = enumerative_bound_bits(p, enc.recovered.size());
  return enc;
}

/// Inverse of encode_enumerative. The decoder never sees X directly: a patched
/// entry is recognised only once the blocks along its chain are known, either
/// from the rest section, from earlier sequences, or from a record that fires
/// at the current query.
inline DecodedInstance decode_enumerative(const EncodingBlob& blob, const ReplayContext& ctx) {
  if (blob.scheme != Scheme::enumerative) throw Error(ErrorKind::decode, "not an enumerative blob");
  const Parameters& p = ctx.params;
  DecodedInstance out;
  out.table = detail::read_table(blob.section(BlobSection::table), p);
  const OracleHandle base = OracleHandle::from_table(p.n, out.table);
  const BitString& memory = blob.section(BlobSection::memory);

  ReplayContext run = ctx;
  FrontierInfo f;
  {
    const BitString& bits = blob.section(BlobSection::context);
    if (bits.size() != 3 * detail::context_field_bits + p.ell_bits() + p.u) {
      throw Error(ErrorKind::decode, "context section has the wrong length");
    }
    BitReader reader(bits);
    run.machine = reader.read(detail::context_field_bits);
    run.round = reader.read(detail::context_field_bits);
    f.g = reader.read(detail::context_field_bits);
    f.frontier = f.g - 1;
    f.a0 = reader.read(p.ell_bits());
    f.r_g = reader.read(p.u);
    if (f.a0 >= p.v) throw Error(ErrorKind::decode, "context block index out of range");
  }

  std::vector<SequenceRecord> sequences;
  {
    const BitString& count_bits = blob.section(BlobSection::seq_counts);
    BitReader counts(count_bits);
    const BitString& record_bits = blob.section(BlobSection::seq_records);
    BitReader records(record_bits);
    for (;;) {
      if (counts.remaining() < sequence_count_bits(p)) throw Error(ErrorKind::decode, "missing sequence sentinel");
      const std::uint64_t count = counts.read(sequence_count_bits(p));
      if (count == 0) break;
      SequenceRecord s;
      for (unsigned i = 0; i < p.d; ++i) s.seq.push_back(records.read(p.ell_bits()));
      for (std::uint64_t i = 0; i < count; ++i) {
        RecoveryRecord r;
        r.query_index = records.read(p.q_bits());
        r.block = records.read(p.ell_bits());
        s.recoveries.push_back(r);
      }
      sequences.push_back(std::move(s));
    }
    if (!counts.at_end() || !records.at_end()) throw Error(ErrorKind::decode, "trailing record bits");
  }

  std::vector<bool> recovered(p.v, false);
  for (const auto& s : sequences) {
    for (const auto& r : s.recoveries) {
      if (r.block >= p.v || recovered[r.block]) throw Error(ErrorKind::decode, "bad recovery record");
      recovered[r.block] = true;
    }
  }
  std::vector<std::optional<Word>> xs(p.v);
  detail::fill_rest(blob.section(BlobSection::rest), xs, recovered, p);

  for (const auto& s : sequences) {
    for (auto a : s.seq) {
      if (a >= p.v) throw Error(ErrorKind::decode, "sequence entry out of range");
    }
    std::multimap<std::uint64_t, std::uint64_t> fire;  // query index -> block
    for (const auto& r : s.recoveries) fire.emplace(r.query_index, r.block);

    // keys[t-1] / answers[t-1]: patched entry t once resolvable.
    std::vector<Word> keys;
    std::vector<Word> answers;
    Word r_next = f.r_g;
    auto resolve = [&] {
      while (keys.size() < s.seq.size()) {
        const std::size_t t = keys.size() + 1;
        const std::uint64_t position = f.g + t - 1;
        if (position > p.w) return;
        const std::uint64_t block = t == 1 ? f.a0 : s.seq[t - 2];
        if (!xs[block]) return;
        const Word key = pack_line_query(position, *xs[block], r_next, p);
        const LineAnswer ans = unpack_line_answer(base.answer(key), p);
        keys.push_back(key);
        answers.push_back(pack_line_answer({s.seq[t - 1], ans.r, ans.z}, p));
        r_next = ans.r;
      }
    };

    std::uint64_t index = 0;
    const AnswerFn answer = [&](Word query) {
      const auto [lo, hi] = fire.equal_range(index);
      for (auto it = lo; it != hi; ++it) xs[it->second] = line_query_block(query, p);
      ++index;
      if (f.g <= p.w) resolve();
      for (std::size_t i = 0; i < keys.size(); ++i) {
        if (keys[i] == query) return answers[i];
      }
      return base.answer(query);
    };
    auto replay = replay_machine_round(run, memory, answer);
    for (const auto& r : s.recoveries) {
      if (r.query_index >= replay.queries.size()) throw Error(ErrorKind::decode, "record points outside the replay");
    }
    out.replays.push_back(std::move(replay.queries));
  }
  out.x = detail::finish_input(xs);
  return out;
}

inline DecodedInstance decode_blob(const EncodingBlob& blob, const ReplayContext& ctx) {
  return blob.scheme == Scheme::warmup ? decode_warmup(blob, ctx) : decode_enumerative(blob, ctx);
}

// ---------------------------------------------------------------------------
// Counting bound
// ---------------------------------------------------------------------------

struct CountingResult {
  std::uint64_t messages = 0;
  std::uint64_t max_len = 0;
  double bound = 0;  // log2 |M| - 1
  bool pass = false;
};

/// Checks that `encode` is injective on `space` and that its longest codeword
/// is at least log2 |M| - 1 bits. A collision is a codec bug and is thrown.
template <class Message, class Encode>
CountingResult counting_bound_check(const std::vector<Message>& space, Encode&& encode) {
  constexpr std::size_t max_space = std::size_t{1} << 20;
  if (space.empty() || space.size() > max_space) {
    throw Error(ErrorKind::invalid_parameters, "message space must hold 1..2^20 messages");
  }
  std::map<BitString, std::size_t> seen;
  CountingResult out;
  out.messages = space.size();
  for (std::size_t i = 0; i < space.size(); ++i) {
    BitString code = encode(space[i]);
    out.max_len = std::max<std::uint64_t>(out.max_len, code.size());
    const auto [it, fresh] = seen.emplace(std::move(code), i);
    if (!fresh) {
      throw Error(ErrorKind::injectivity,
                  "messages " + std::to_string(it->second) + " and " + std::to_string(i) + " share a codeword");
    }
  }
  out.bound = std::log2(static_cast<double>(space.size())) - 1.0;
  out.pass = static_cast<double>(out.max_len) >= out.bound;
  return out;
}

}  // namespace lmpc
