#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lmpc/bits.hpp"
#include "lmpc/chain.hpp"
#include "lmpc/error.hpp"
#include "lmpc/oracle.hpp"
#include "lmpc/prf.hpp"
#include "lmpc/ram_eval.hpp"

namespace lmpc {

// ---------------------------------------------------------------------------
// Shared random tape
// ---------------------------------------------------------------------------

/// Read-only random tape visible to every machine. Reads are a pure function
/// of (seed, offset, len).
class SharedTape {
 public:
  static constexpr std::uint64_t default_cap = std::uint64_t{1} << 24;

  explicit SharedTape(const Seed& seed, std::uint64_t cap = default_cap) : prf_(seed, "lmpc/tape"), cap_(cap) {}

  BitString read(std::uint64_t offset, std::uint64_t len) const {
    if (len > cap_) {
      throw Error(ErrorKind::cap_exceeded, "tape read of " + std::to_string(len) + " bits exceeds cap " +
                                               std::to_string(cap_));
    }
    BitString out;
    std::uint64_t pos = offset;
    const std::uint64_t end = offset + len;
    while (pos < end) {
      const std::uint64_t block = prf_(pos / 64);
      const unsigned skip = static_cast<unsigned>(pos % 64);
      const unsigned take = static_cast<unsigned>(std::min<std::uint64_t>(64 - skip, end - pos));
      const Word chunk = (block << skip) >> (64 - take);
      out.append(chunk, take);
      pos += take;
    }
    return out;
  }

  std::uint64_t cap() const noexcept { return cap_; }

 private:
  Prf prf_;
  std::uint64_t cap_;
};

inline BitString shared_tape(const Seed& seed, std::uint64_t offset, std::uint64_t len,
                             std::uint64_t cap = SharedTape::default_cap) {
  return SharedTape(seed, cap).read(offset, len);
}

// ---------------------------------------------------------------------------
// Machine memory records
// ---------------------------------------------------------------------------
//
// Machine memory is a sequence of tagged records, so the concatenation of
// several received messages is again a well-formed memory:
//
//   blocks  [00][count: ceil log2(v+1)][count x (index: ceil log2 v, value: u)]
//   token   [01][position: bit_width(w+1)][ell: ceil log2 v][r: u]
//   answer  [10][n-bit final answer]
//   opaque  [11][length: 16][length bits]

enum class RecordTag : std::uint8_t { blocks = 0, token = 1, answer = 2, opaque = 3 };

/// Chain frontier handed between machines: the next node to evaluate.
struct Token {
  std::uint64_t position = 1;
  std::uint64_t ell = 0;
  Word r = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

struct OwnedBlock {
  std::uint64_t index = 0;
  Word value = 0;

  friend bool operator==(const OwnedBlock&, const OwnedBlock&) = default;
};

struct MemoryImage {
  std::vector<OwnedBlock> blocks;
  std::optional<Token> token;
  std::optional<Word> answer;
  std::vector<BitString> opaque;

  const Word* find_block(std::uint64_t index) const {
    for (const auto& b : blocks) {
      if (b.index == index) return &b.value;
    }
    return nullptr;
  }
};

inline unsigned token_position_bits(const Parameters& p) { return static_cast<unsigned>(std::bit_width(p.w + 1)); }
inline unsigned block_count_bits(const Parameters& p) { return ceil_log2(p.v + 1); }
inline std::uint64_t block_entry_bits(const Parameters& p) { return p.ell_bits() + p.u; }

inline std::uint64_t blocks_record_bits(const Parameters& p, std::uint64_t count) {
  return 2 + block_count_bits(p) + count * block_entry_bits(p);
}
inline std::uint64_t token_record_bits(const Parameters& p) {
  return 2 + token_position_bits(p) + p.ell_bits() + p.u;
}
inline std::uint64_t answer_record_bits(const Parameters& p) { return 2 + std::uint64_t{p.n}; }

inline void append_blocks_record(BitString& out, const std::vector<OwnedBlock>& blocks, const Parameters& p) {
  out.append(static_cast<Word>(RecordTag::blocks), 2);
  out.append(blocks.size(), block_count_bits(p));
  for (const auto& b : blocks) {
    out.append(b.index, p.ell_bits());
    out.append(b.value, p.u);
  }
}

inline void append_token_record(BitString& out, const Token& t, const Parameters& p) {
  out.append(static_cast<Word>(RecordTag::token), 2);
  out.append(t.position, token_position_bits(p));
  out.append(t.ell, p.ell_bits());
  out.append(t.r, p.u);
}

inline void append_answer_record(BitString& out, Word answer, const Parameters& p) {
  out.append(static_cast<Word>(RecordTag::answer), 2);
  out.append(answer, p.n);
}

inline void append_opaque_record(BitString& out, const BitString& payload) {
  if (payload.size() >= (1u << 16)) throw Error(ErrorKind::width_mismatch, "opaque record too long");
  out.append(static_cast<Word>(RecordTag::opaque), 2);
  out.append(payload.size(), 16);
  out.append(payload);
}

inline MemoryImage parse_memory(const BitString& memory, const Parameters& p) {
  MemoryImage image;
  BitReader reader(memory);
  while (!reader.at_end()) {
    switch (static_cast<RecordTag>(reader.read(2))) {
      case RecordTag::blocks: {
        const auto count = reader.read(block_count_bits(p));
        for (Word i = 0; i < count; ++i) {
          OwnedBlock b;
          b.index = reader.read(p.ell_bits());
          b.value = reader.read(p.u);
          image.blocks.push_back(b);
        }
        break;
      }
      case RecordTag::token: {
        Token t;
        t.position = reader.read(token_position_bits(p));
        t.ell = reader.read(p.ell_bits());
        t.r = reader.read(p.u);
        image.token = t;
        break;
      }
      case RecordTag::answer:
        image.answer = reader.read(p.n);
        break;
      case RecordTag::opaque: {
        const auto len = reader.read(16);
        image.opaque.push_back(reader.read_bits(len));
        break;
      }
    }
  }
  return image;
}

// ---------------------------------------------------------------------------
// Input distribution
// ---------------------------------------------------------------------------

enum class DistributionPolicy { round_robin_blocks, contiguous_blocks, custom };

inline DistributionPolicy parse_distribution_policy(std::string_view s) {
  if (s == "round_robin" || s == "round_robin_blocks") return DistributionPolicy::round_robin_blocks;
  if (s == "contiguous" || s == "contiguous_blocks") return DistributionPolicy::contiguous_blocks;
  if (s == "custom") return DistributionPolicy::custom;
  throw Error(ErrorKind::config, "unknown ownership policy '" + std::string(s) + "'");
}

/// owned[i] lists the blocks of machine i, ascending.
struct Ownership {
  std::vector<std::vector<std::uint64_t>> owned;
  std::vector<std::uint64_t> owner;  // owner[block]

  std::uint64_t max_share() const {
    std::uint64_t best = 0;
    for (const auto& o : owned) best = std::max<std::uint64_t>(best, o.size());
    return best;
  }
};

/// `custom` maps each block to a machine and is only read for the custom policy.
inline Ownership assign_blocks(const Parameters& p, DistributionPolicy policy,
                               const std::vector<std::uint64_t>& custom = {}) {
  Ownership out;
  out.owned.resize(p.m);
  out.owner.resize(p.v);
  const std::uint64_t chunk = (p.v + p.m - 1) / p.m;
  for (std::uint64_t b = 0; b < p.v; ++b) {
    std::uint64_t machine = 0;
    switch (policy) {
      case DistributionPolicy::round_robin_blocks: machine = b % p.m; break;
      case DistributionPolicy::contiguous_blocks: machine = b / chunk; break;
      case DistributionPolicy::custom:
        if (custom.size() != p.v) throw Error(ErrorKind::config, "custom ownership map needs one entry per block");
        machine = custom[b];
        if (machine >= p.m) throw Error(ErrorKind::config, "custom ownership names a machine >= m");
        break;
    }
    out.owner[b] = machine;
    out.owned[machine].push_back(b);
  }
  return out;
}

/// Initial memories holding each machine's blocks as one blocks record.
inline std::vector<BitString> distribute_input(const InputVector& x, const Parameters& p, const Ownership& own) {
  check_input(x, p);
  if (own.max_share() * block_entry_bits(p) > p.s) {
    throw Error(ErrorKind::share_overflow, "a machine would hold " + std::to_string(own.max_share()) +
                                               " blocks, more than s = " + std::to_string(p.s) + " bits allow");
  }
  std::vector<BitString> memories(p.m);
  for (std::uint64_t i = 0; i < p.m; ++i) {
    std::vector<OwnedBlock> blocks;
    for (auto b : own.owned[i]) blocks.push_back({b, x.blocks[b]});
    append_blocks_record(memories[i], blocks, p);
  }
  return memories;
}

inline std::vector<BitString> distribute_input(const InputVector& x, const Parameters& p, DistributionPolicy policy,
                                               const std::vector<std::uint64_t>& custom = {}) {
  return distribute_input(x, p, assign_blocks(p, policy, custom));
}

// ---------------------------------------------------------------------------
// Strategy contract
// ---------------------------------------------------------------------------

struct Message {
  std::uint64_t src = 0;
  std::uint64_t dst = 0;
  BitString payload;

  friend bool operator==(const Message&, const Message&) = default;
};

/// Adaptive oracle access for one machine in one round.
class OracleAccess {
 public:
  virtual ~OracleAccess() = default;
  virtual Word query(Word x) = 0;
  virtual std::uint64_t remaining() const = 0;
};

struct StepContext {
  std::uint64_t machine = 0;
  std::uint64_t round = 0;
  const BitString& memory;
  const Parameters& params;
  OracleAccess& oracle;
  const SharedTape& tape;
};

struct StepResult {
  std::vector<Message> messages;  // src is filled in by the engine
  std::optional<Word> claim;
};

/// A deterministic per-machine program. step() may depend only on its context.
class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual std::string name() const = 0;
  virtual ChainKind kind() const = 0;
  virtual std::vector<BitString> initial_memories(const InputVector& x, const Parameters& p) const = 0;
  virtual StepResult step(const StepContext& ctx) const = 0;
};

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

enum class ViolationKind { memory, query_budget, receiver_capacity, bad_destination, strategy_error };

inline std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::memory: return "memory";
    case ViolationKind::query_budget: return "query-budget";
    case ViolationKind::receiver_capacity: return "receiver-capacity";
    case ViolationKind::bad_destination: return "bad-destination";
    case ViolationKind::strategy_error: return "strategy-error";
  }
  return "unknown";
}

struct Violation {
  ViolationKind kind = ViolationKind::memory;
  std::uint64_t round = 0;
  std::uint64_t machine = 0;
  std::string detail;
};

struct Claim {
  std::uint64_t round = 0;
  std::uint64_t machine = 0;
  Word value = 0;
};

/// One machine's activity in one round.
struct MachineRound {
  std::uint64_t machine = 0;
  BitString memory;               // envelope at the start of the round
  std::vector<Word> queries;      // Q_i^(k), issue order
  std::vector<Message> messages;  // outbox
  std::optional<Word> claim;
  std::uint64_t new_correct = 0;  // correct positions first reached by this machine

  std::uint64_t message_bits() const {
    std::uint64_t total = 0;
    for (const auto& m : messages) total += m.payload.size();
    return total;
  }
};

struct RoundRecord {
  std::uint64_t round = 0;
  std::vector<MachineRound> machines;
  /// |Q^(<=k)| counted as distinct words.
  std::uint64_t cumulative_distinct_queries = 0;
  /// Chain positions (1-based) whose correct entry is in Q^(<=k), ascending.
  std::vector<std::uint64_t> covered_positions;
  /// Largest covered position, 0 if none.
  std::uint64_t frontier = 0;

  /// |Q^(<=k) ∩ C^(k')| with C^(k') = {i : k'·stride < i <= w}.
  std::uint64_t intersection(std::uint64_t k_prime, std::uint64_t stride) const {
    const std::uint64_t lo = k_prime * stride;
    return static_cast<std::uint64_t>(
        std::count_if(covered_positions.begin(), covered_positions.end(), [lo](auto i) { return i > lo; }));
  }
};

struct RunReport {
  bool success = false;
  std::uint64_t rounds_used = 0;
  std::vector<RoundRecord> rounds;
  std::vector<Violation> violations;
  std::vector<Claim> claims;
  /// Memories at the start of the first round not executed.
  std::vector<BitString> final_memories;
  Word ground_truth = 0;
  std::vector<Word> correct_entries;

  bool clean() const { return violations.empty(); }

  /// Q^(<=k) as a set of words.
  std::set<Word> cumulative_queries(std::uint64_t k) const {
    std::set<Word> out;
    for (const auto& r : rounds) {
      if (r.round > k) break;
      for (const auto& mr : r.machines) out.insert(mr.queries.begin(), mr.queries.end());
    }
    return out;
  }

  /// Memory of `machine` at the start of round k (k may be one past the last executed round).
  const BitString& memory_at(std::uint64_t machine, std::uint64_t k) const {
    if (k < rounds.size()) return rounds[k].machines.at(machine).memory;
    if (k == rounds.size()) return final_memories.at(machine);
    throw Error(ErrorKind::invalid_parameters, "round " + std::to_string(k) + " was not reached");
  }

  /// Frontier before round k: largest correct position queried in rounds < k.
  std::uint64_t frontier_before(std::uint64_t k) const { return k == 0 ? 0 : rounds.at(k - 1).frontier; }
};

// ---------------------------------------------------------------------------
// Step execution
// ---------------------------------------------------------------------------

using AnswerFn = std::function<Word(Word)>;

namespace detail {

struct BudgetExceeded {};

class BudgetedOracle final : public OracleAccess {
 public:
  BudgetedOracle(const AnswerFn& answer, std::uint64_t budget, std::vector<Word>& issued)
      : answer_(answer), budget_(budget), issued_(issued) {}

  Word query(Word x) override {
    if (issued_.size() >= budget_) throw BudgetExceeded{};
    const Word a = answer_(x);
    issued_.push_back(x);
    return a;
  }

  std::uint64_t remaining() const override { return budget_ - issued_.size(); }

 private:
  const AnswerFn& answer_;
  std::uint64_t budget_;
  std::vector<Word>& issued_;
};

}  // namespace detail

struct StepOutcome {
  std::vector<Word> queries;
  StepResult result;
  std::optional<Violation> violation;
};

/// Runs one machine for one round against `answer`, enforcing the query budget.
/// Used by the engine and by anything that needs to replay a machine-round.
inline StepOutcome execute_step(const Strategy& strategy, const Parameters& p, std::uint64_t machine,
                                std::uint64_t round, const BitString& memory, const AnswerFn& answer,
                                const SharedTape& tape) {
  StepOutcome out;
  detail::BudgetedOracle access(answer, p.q, out.queries);
  const StepContext ctx{machine, round, memory, p, access, tape};
  try {
    out.result = strategy.step(ctx);
  } catch (const detail::BudgetExceeded&) {
    out.violation = Violation{ViolationKind::query_budget, round, machine,
                              "attempted more than q = " + std::to_string(p.q) + " queries"};
  } catch (const Error& e) {
    out.violation = Violation{ViolationKind::strategy_error, round, machine, e.what()};
  }
  for (auto& m : out.result.messages) m.src = machine;
  return out;
}

// ---------------------------------------------------------------------------
// Routing
// ---------------------------------------------------------------------------

struct RoutingResult {
  std::vector<BitString> inboxes;
  std::vector<std::uint64_t> overflowed;   // receivers over capacity
  std::vector<std::uint64_t> bad_sources;  // senders addressing a machine >= m
};

/// Inbox j is the concatenation of payloads addressed to j, ordered by
/// (src, emission). outboxes[i] holds the messages emitted by machine i.
inline RoutingResult route_messages(const std::vector<std::vector<Message>>& outboxes, std::uint64_t m,
                                    std::uint64_t s) {
  RoutingResult out;
  out.inboxes.resize(m);
  for (std::size_t src = 0; src < outboxes.size(); ++src) {
    for (const auto& msg : outboxes[src]) {
      if (msg.dst >= m) {
        out.bad_sources.push_back(src);
        continue;
      }
      out.inboxes[msg.dst].append(msg.payload);
    }
  }
  for (std::uint64_t j = 0; j < m; ++j) {
    if (out.inboxes[j].size() > s) out.overflowed.push_back(j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

struct RunOptions {
  std::uint64_t max_rounds = 64;
  Seed tape_seed{};
  std::uint64_t tape_cap = SharedTape::default_cap;
  bool stop_on_success = true;
};

/// Executes rounds 0..max_rounds-1 of `strategy` on (x, oracle). All queries are
/// appended to oracle's log tagged (machine, round). Any budget breach is
/// recorded and ends the run with success = false.
inline RunReport run(const Parameters& p, const Strategy& strategy, const InputVector& x, OracleHandle& oracle,
                     const RunOptions& options = {}) {
  const ChainKind kind = strategy.kind();
  p.validate_model(kind);
  check_input(x, p);

  RunReport report;
  {
    OracleHandle scratch = oracle;
    scratch.clear_log();
    report.ground_truth = eval_chain(kind, p, scratch, x).output;
    for (const auto& rec : scratch.query_log()) report.correct_entries.push_back(rec.query);
  }
  std::unordered_map<Word, std::vector<std::uint64_t>> positions;
  for (std::size_t i = 0; i < report.correct_entries.size(); ++i) {
    positions[report.correct_entries[i]].push_back(i + 1);
  }

  const SharedTape tape(options.tape_seed, options.tape_cap);
  std::vector<BitString> memories = strategy.initial_memories(x, p);
  if (memories.size() != p.m) {
    report.violations.push_back({ViolationKind::memory, 0, 0, "strategy produced the wrong number of memories"});
    return report;
  }
  for (std::uint64_t i = 0; i < p.m; ++i) {
    if (memories[i].size() > p.s) {
      report.violations.push_back({ViolationKind::memory, 0, i,
                                   "initial memory holds " + std::to_string(memories[i].size()) + " bits > s"});
    }
  }
  if (!report.clean()) {
    report.final_memories = std::move(memories);
    return report;
  }

  std::set<Word> seen;
  std::vector<bool> covered(p.w + 1, false);
  std::uint64_t frontier = 0;

  for (std::uint64_t k = 0; k < options.max_rounds; ++k) {
    RoundRecord record;
    record.round = k;
    std::vector<std::vector<Message>> outboxes(p.m);
    bool aborted = false;

    for (std::uint64_t i = 0; i < p.m && !aborted; ++i) {
      const AnswerFn answer = [&oracle, i, k](Word w) {
        return oracle.query(w, QueryTag{static_cast<std::int32_t>(i), static_cast<std::uint32_t>(k)});
      };
      StepOutcome outcome = execute_step(strategy, p, i, k, memories[i], answer, tape);

      MachineRound mr;
      mr.machine = i;
      mr.memory = memories[i];
      mr.queries = std::move(outcome.queries);
      for (Word qw : mr.queries) {
        seen.insert(qw);
        if (auto it = positions.find(qw); it != positions.end()) {
          for (auto pos : it->second) {
            if (!covered[pos]) {
              covered[pos] = true;
              ++mr.new_correct;
              frontier = std::max(frontier, pos);
            }
          }
        }
      }
      mr.messages = outcome.result.messages;
      mr.claim = outcome.result.claim;
      outboxes[i] = std::move(outcome.result.messages);
      record.machines.push_back(std::move(mr));

      if (outcome.violation) {
        report.violations.push_back(*outcome.violation);
        aborted = true;
      }
    }

    record.cumulative_distinct_queries = seen.size();
    for (std::uint64_t pos = 1; pos <= p.w; ++pos) {
      if (covered[pos]) record.covered_positions.push_back(pos);
    }
    record.frontier = frontier;

    RoutingResult routed;
    if (!aborted) {
      routed = route_messages(outboxes, p.m, p.s);
      for (auto src : routed.bad_sources) {
        report.violations.push_back({ViolationKind::bad_destination, k, src, "message addressed to machine >= m"});
      }
      for (auto dst : routed.overflowed) {
        report.violations.push_back({ViolationKind::receiver_capacity, k, dst,
                                     "inbox of " + std::to_string(routed.inboxes[dst].size()) + " bits exceeds s = " +
                                         std::to_string(p.s)});
      }
      aborted = !report.clean();
    }

    bool hit = false;
    if (!aborted) {
      for (const auto& mr : record.machines) {
        if (mr.claim) {
          report.claims.push_back({k, mr.machine, *mr.claim});
          hit = hit || *mr.claim == report.ground_truth;
        }
      }
    }

    report.rounds.push_back(std::move(record));
    report.rounds_used = k + 1;
    if (aborted) {
      report.success = false;
      report.final_memories = memories;
      return report;
    }
    memories = std::move(routed.inboxes);
    if (hit) {
      report.success = true;
      if (options.stop_on_success) break;
    }
  }
  report.final_memories = std::move(memories);
  return report;
}

/// Re-executes machine `machine` in round k from its recorded envelope,
/// answering queries from `oracle` without logging.
inline StepOutcome replay_round(const RunReport& report, const Parameters& p, const Strategy& strategy,
                                std::uint64_t machine, std::uint64_t k, const OracleHandle& oracle,
                                const SharedTape& tape) {
  const AnswerFn answer = [&oracle](Word w) { return oracle.answer(w); };
  return execute_step(strategy, p, machine, k, report.memory_at(machine, k), answer, tape);
}

}  // namespace lmpc
