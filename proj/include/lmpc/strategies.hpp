#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lmpc/chain.hpp"
#include "lmpc/error.hpp"
#include "lmpc/mpc_engine.hpp"
#include "lmpc/oracle.hpp"
#include "lmpc/prf.hpp"
#include "lmpc/ram_eval.hpp"

namespace lmpc {

/// Bits a machine needs beyond its blocks: the blocks record header plus room
/// for either a token or the final answer.
inline std::uint64_t strategy_overhead_bits(const Parameters& p) {
  return 2 + block_count_bits(p) + std::max(token_record_bits(p), answer_record_bits(p));
}

inline std::uint64_t blocks_for_memory(const Parameters& p) {
  const std::uint64_t overhead = strategy_overhead_bits(p);
  return p.s > overhead ? (p.s - overhead) / block_entry_bits(p) : 0;
}

/// Smallest s that lets every machine keep `blocks` owned blocks.
inline std::uint64_t memory_for_blocks(const Parameters& p, std::uint64_t blocks) {
  return strategy_overhead_bits(p) + blocks * block_entry_bits(p);
}

namespace detail {

/// The token held at the start of a round, if any. The owner of block 0 starts
/// the chain in round 0.
inline std::optional<Token> current_token(const MemoryImage& image, std::uint64_t round, bool owns_first_block) {
  if (image.token) return image.token;
  if (round == 0 && owns_first_block) return Token{1, 0, 0};
  return std::nullopt;
}

inline Message message_to(std::uint64_t dst, BitString payload) { return Message{0, dst, std::move(payload)}; }

}  // namespace detail

// ---------------------------------------------------------------------------
// segment (SimLine)
// ---------------------------------------------------------------------------

/// Machine j stores blocks [j*b, (j+1)*b). The machine holding the frontier
/// evaluates its whole run of owned blocks in one round, then hands the token
/// to the owner of the next block. The finished answer goes to self and is
/// claimed the following round.
class SegmentStrategy final : public Strategy {
 public:
  SegmentStrategy(const Parameters& p, std::optional<std::uint64_t> blocks_per_machine = std::nullopt)
      : b_(blocks_per_machine.value_or(blocks_for_memory(p))) {
    if (b_ == 0) {
      throw Error(ErrorKind::insufficient_memory,
                  "s = " + std::to_string(p.s) + " leaves no room for a block after " +
                      std::to_string(strategy_overhead_bits(p)) + " bits of overhead");
    }
    if (p.m * b_ < p.v) {
      throw Error(ErrorKind::precondition_failed, "m * b = " + std::to_string(p.m * b_) + " does not cover v = " +
                                                      std::to_string(p.v) + " blocks");
    }
  }

  std::string name() const override { return "segment"; }
  ChainKind kind() const override { return ChainKind::simline; }
  std::uint64_t blocks_per_machine() const noexcept { return b_; }

  std::uint64_t owner(std::uint64_t block) const { return block / b_; }

  /// Rounds to success when every machine holds a full segment and q >= b.
  static std::uint64_t closed_form_rounds(std::uint64_t w, std::uint64_t b) { return (w + b - 1) / b + 1; }

  std::vector<BitString> initial_memories(const InputVector& x, const Parameters& p) const override {
    std::vector<std::uint64_t> map(p.v);
    for (std::uint64_t i = 0; i < p.v; ++i) map[i] = owner(i);
    return distribute_input(x, p, DistributionPolicy::custom, map);
  }

  StepResult step(const StepContext& ctx) const override {
    const Parameters& p = ctx.params;
    const MemoryImage image = parse_memory(ctx.memory, p);
    StepResult out;
    if (image.answer) {
      out.claim = image.answer;
      return out;
    }
    BitString self;
    append_blocks_record(self, image.blocks, p);
    out.messages.push_back(detail::message_to(ctx.machine, std::move(self)));

    auto token = detail::current_token(image, ctx.round, owner(0) == ctx.machine);
    if (!token) return out;

    std::uint64_t pos = token->position;
    Word r = token->r;
    Word answer = 0;
    std::uint64_t prev_block = 0;
    std::uint64_t advanced = 0;
    while (pos <= p.w && ctx.oracle.remaining() > 0) {
      const std::uint64_t block = simline_input_index(pos, p);
      if (owner(block) != ctx.machine) break;
      if (advanced > 0 && block <= prev_block) break;  // stay within one ascending run
      const Word* x = image.find_block(block);
      if (x == nullptr) throw Error(ErrorKind::precondition_failed, "owner lost block " + std::to_string(block));
      answer = ctx.oracle.query(pack_simline_query(*x, r, p));
      r = unpack_simline_answer(answer, p).r;
      prev_block = block;
      ++pos;
      ++advanced;
    }

    BitString next;
    if (pos > p.w) {
      append_answer_record(next, answer, p);
      out.messages.push_back(detail::message_to(ctx.machine, std::move(next)));
    } else {
      const std::uint64_t block = simline_input_index(pos, p);
      append_token_record(next, Token{pos, block, r}, p);
      out.messages.push_back(detail::message_to(owner(block), std::move(next)));
    }
    return out;
  }

 private:
  std::uint64_t b_;
};

// ---------------------------------------------------------------------------
// token (Line)
// ---------------------------------------------------------------------------

/// Static ownership. The frontier token travels to the owner of the next
/// block; that owner advances while it holds each successive block.
class TokenStrategy : public Strategy {
 public:
  TokenStrategy(const Parameters& p, DistributionPolicy policy = DistributionPolicy::contiguous_blocks,
                const std::vector<std::uint64_t>& custom = {})
      : own_(assign_blocks(p, policy, custom)) {}

  std::string name() const override { return "token"; }
  ChainKind kind() const override { return ChainKind::line; }
  const Ownership& ownership() const noexcept { return own_; }

  std::uint64_t required_memory(const Parameters& p) const { return memory_for_blocks(p, own_.max_share()); }

  std::vector<BitString> initial_memories(const InputVector& x, const Parameters& p) const override {
    return distribute_input(x, p, own_);
  }

  StepResult step(const StepContext& ctx) const override { return advance(ctx, true); }

 protected:
  /// Greedy advance from the held token. With `forward`, an unfinished token
  /// goes to the owner of its block; otherwise it stays with this machine.
  StepResult advance(const StepContext& ctx, bool forward) const {
    const Parameters& p = ctx.params;
    const MemoryImage image = parse_memory(ctx.memory, p);
    StepResult out;
    if (image.answer) {
      out.claim = image.answer;
      return out;
    }
    BitString self;
    append_blocks_record(self, image.blocks, p);

    auto token = detail::current_token(image, ctx.round, own_.owner.at(0) == ctx.machine);
    if (!token) {
      out.messages.push_back(detail::message_to(ctx.machine, std::move(self)));
      return out;
    }

    Token t = *token;
    Word answer = 0;
    while (t.position <= p.w && ctx.oracle.remaining() > 0 && own_.owner.at(t.ell) == ctx.machine) {
      const Word* x = image.find_block(t.ell);
      if (x == nullptr) throw Error(ErrorKind::precondition_failed, "owner lost block " + std::to_string(t.ell));
      answer = ctx.oracle.query(pack_line_query(t.position, *x, t.r, p));
      const LineAnswer next = unpack_line_answer(answer, p);
      t = Token{t.position + 1, next.ell, next.r};
    }

    BitString carry;
    std::uint64_t dst = ctx.machine;
    if (t.position > p.w) {
      append_answer_record(carry, answer, p);
    } else {
      append_token_record(carry, t, p);
      if (forward) dst = own_.owner.at(t.ell);
    }
    if (dst == ctx.machine) {
      self.append(carry);
      out.messages.push_back(detail::message_to(ctx.machine, std::move(self)));
    } else {
      out.messages.push_back(detail::message_to(ctx.machine, std::move(self)));
      out.messages.push_back(detail::message_to(dst, std::move(carry)));
    }
    return out;
  }

  Ownership own_;
};

/// Run-mpc face of the greedy probe: the machine holding the chain start
/// advances as far as its own blocks allow and never hands the token on.
class GreedyProbeStrategy final : public TokenStrategy {
 public:
  using TokenStrategy::TokenStrategy;
  std::string name() const override { return "greedy_probe"; }
  StepResult step(const StepContext& ctx) const override { return advance(ctx, false); }
};

// ---------------------------------------------------------------------------
// jump (Line)
// ---------------------------------------------------------------------------

/// Every machine spends its whole budget guessing chain entries ahead of the
/// start: position 2 + (g mod window) with an owned block and an r read from
/// the shared tape. It never claims.
class JumpStrategy final : public Strategy {
 public:
  JumpStrategy(const Parameters& p, std::uint64_t guess_window, DistributionPolicy policy = DistributionPolicy::contiguous_blocks)
      : own_(assign_blocks(p, policy)), window_(std::max<std::uint64_t>(1, std::min(guess_window, p.w - 1))) {
    if (p.w < 2) throw Error(ErrorKind::invalid_parameters, "jump guesses need w >= 2");
  }

  std::string name() const override { return "jump"; }
  ChainKind kind() const override { return ChainKind::line; }

  std::vector<BitString> initial_memories(const InputVector& x, const Parameters& p) const override {
    return distribute_input(x, p, own_);
  }

  StepResult step(const StepContext& ctx) const override {
    const Parameters& p = ctx.params;
    const MemoryImage image = parse_memory(ctx.memory, p);
    StepResult out;
    BitString self;
    append_blocks_record(self, image.blocks, p);
    out.messages.push_back(detail::message_to(ctx.machine, std::move(self)));
    if (image.blocks.empty()) return out;

    const std::uint64_t base = (ctx.round * p.m + ctx.machine) * p.q;
    for (std::uint64_t g = 0; g < p.q; ++g) {
      const std::uint64_t pos = 2 + (base + g) % window_;
      const Word x = image.blocks[(base + g) % image.blocks.size()].value;
      const Word r = ctx.tape.read((base + g) * p.u, p.u).read(0, p.u);
      ctx.oracle.query(pack_line_query(pos, x, r, p));
    }
    return out;
  }

 private:
  Ownership own_;
  std::uint64_t window_;
};

// ---------------------------------------------------------------------------
// Measurement harnesses
// ---------------------------------------------------------------------------

/// Advances from `start` while the needed block is in `owned`, at most q steps.
/// Returns the advance count k.
inline std::uint64_t greedy_probe(const Parameters& p, OracleHandle& oracle, const InputVector& x,
                                  const std::vector<bool>& owned, NodeState start) {
  std::uint64_t k = 0;
  NodeState node = start;
  while (k < p.q && node.index <= p.w && owned.at(node.ell)) {
    const Word a = oracle.query(pack_line_query(node.index, x.blocks[node.ell], node.r, p));
    const LineAnswer next = unpack_line_answer(a, p);
    node = NodeState{node.index + 1, next.ell, next.r, next.z};
    ++k;
  }
  return k;
}

inline InputVector random_input(const Parameters& p, const Seed& seed) {
  Rng rng(seed, "lmpc/input");
  InputVector x;
  x.blocks.reserve(p.v);
  for (std::uint64_t i = 0; i < p.v; ++i) x.blocks.push_back(rng.bits(p.u));
  return x;
}

/// Uniform b-subset of [v] as a membership mask (partial Fisher-Yates).
inline std::vector<bool> random_owned_set(std::uint64_t v, std::uint64_t b, Rng& rng) {
  std::vector<std::uint64_t> idx(v);
  for (std::uint64_t i = 0; i < v; ++i) idx[i] = i;
  std::vector<bool> owned(v, false);
  for (std::uint64_t i = 0; i < std::min(b, v); ++i) {
    const std::uint64_t j = i + rng.below(v - i);
    std::swap(idx[i], idx[j]);
    owned[idx[i]] = true;
  }
  return owned;
}

/// One greedy-probe trial: fresh oracle, input and owned set from `trial_seed`,
/// starting at node 1.
inline std::uint64_t greedy_probe_trial(const Parameters& p, std::uint64_t b, const Seed& trial_seed) {
  OracleHandle oracle(trial_seed, p.n);
  const InputVector x = random_input(p, trial_seed);
  Rng rng(trial_seed, "lmpc/owned");
  const std::vector<bool> owned = random_owned_set(p.v, b, rng);
  return greedy_probe(p, oracle, x, owned, NodeState{1, 0, 0, 0});
}

struct DecayRow {
  std::uint64_t j = 0;
  double empirical = 0;  // fraction of trials with k >= j
  double expected = 0;   // rho^j
  double z = 0;
};

/// counts[k] = number of trials that advanced exactly k steps.
inline std::vector<DecayRow> decay_table(const std::vector<std::uint64_t>& counts, double rho, std::uint64_t j_max) {
  std::uint64_t trials = 0;
  for (auto c : counts) trials += c;
  std::vector<DecayRow> rows;
  for (std::uint64_t j = 0; j <= j_max; ++j) {
    std::uint64_t at_least = 0;
    for (std::size_t k = j; k < counts.size(); ++k) at_least += counts[k];
    DecayRow row;
    row.j = j;
    row.empirical = trials == 0 ? 0.0 : static_cast<double>(at_least) / static_cast<double>(trials);
    row.expected = std::pow(rho, static_cast<double>(j));
    const double sigma = std::sqrt(row.expected * (1.0 - row.expected) / static_cast<double>(trials));
    row.z = sigma > 0 ? (row.empirical - row.expected) / sigma : (row.empirical == row.expected ? 0.0 : HUGE_VAL);
    rows.push_back(row);
  }
  return rows;
}

/// True iff `word` is the correct entry at 1-based `position`.
inline bool is_jump_hit(const std::vector<Word>& correct, std::uint64_t position, Word word) {
  return position >= 1 && position <= correct.size() && correct[position - 1] == word;
}

struct JumpTrial {
  std::uint64_t guesses = 0;
  std::uint64_t hits = 0;
};

/// The adversary knows X and every true block index, but not the r value of
/// any node past the start. It guesses r uniformly for positions
/// 2 .. 1 + window and counts exact hits on the correct chain.
inline JumpTrial jump_adversary_trial(const Parameters& p, std::uint64_t guesses, std::uint64_t window,
                                      const Seed& trial_seed) {
  if (p.w < 2) throw Error(ErrorKind::invalid_parameters, "jump guesses need w >= 2");
  window = std::max<std::uint64_t>(1, std::min(window, p.w - 1));
  OracleHandle oracle(trial_seed, p.n);
  const InputVector x = random_input(p, trial_seed);
  const auto trace = chain_trace(ChainKind::line, p, oracle, x);
  std::vector<Word> correct;
  for (std::size_t i = 0; i + 1 < trace.size(); ++i) correct.push_back(trace[i].query);

  Rng rng(trial_seed, "lmpc/guess");
  JumpTrial out;
  for (std::uint64_t g = 0; g < guesses; ++g) {
    const std::uint64_t pos = 2 + g % window;
    const Word guess = pack_line_query(pos, x.blocks[trace[pos - 1].node.ell], rng.bits(p.u), p);
    oracle.query(guess);
    ++out.guesses;
    if (is_jump_hit(correct, pos, guess)) ++out.hits;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Factory
// ---------------------------------------------------------------------------

struct StrategyConfig {
  std::string name = "segment";
  std::optional<std::uint64_t> blocks_per_machine;
  DistributionPolicy ownership = DistributionPolicy::contiguous_blocks;
  std::vector<std::uint64_t> custom_owners;
  std::uint64_t guess_window = 8;
};

inline std::unique_ptr<Strategy> make_strategy(const StrategyConfig& cfg, const Parameters& p) {
  if (cfg.name == "segment") return std::make_unique<SegmentStrategy>(p, cfg.blocks_per_machine);
  if (cfg.name == "token") return std::make_unique<TokenStrategy>(p, cfg.ownership, cfg.custom_owners);
  if (cfg.name == "greedy_probe") return std::make_unique<GreedyProbeStrategy>(p, cfg.ownership, cfg.custom_owners);
  if (cfg.name == "jump") return std::make_unique<JumpStrategy>(p, cfg.guess_window, cfg.ownership);
  throw Error(ErrorKind::config, "unknown strategy '" + cfg.name + "' (expected segment, token, greedy_probe or jump)");
}

}  // namespace lmpc
