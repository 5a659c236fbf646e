#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lmpc/chain.hpp"
#include "lmpc/oracle.hpp"

namespace lmpc {

/// Node i together with the query it issues and the answer it received.
struct TraceRow {
  NodeState node;
  Word query = 0;
  Word answer = 0;
};

struct EvalResult {
  /// Full n-bit answer to the w-th query.
  Word output = 0;
  /// Nodes 1..w+1 when a trace was requested. The last node has no query.
  std::optional<std::vector<TraceRow>> trace;
};

namespace detail {

inline void push_trace(std::optional<std::vector<TraceRow>>& trace, const NodeState& node, Word query,
                       Word answer) {
  if (trace) trace->push_back({node, query, answer});
}

}  // namespace detail

/// Sequential Line evaluation: exactly w oracle queries, holding only the
/// current node besides the input.
inline EvalResult eval_line(const Parameters& p, OracleHandle& oracle, const InputVector& x, bool trace = false,
                            QueryTag tag = {}) {
  p.validate(ChainKind::line);
  check_input(x, p);
  if (oracle.width() != p.n) throw Error(ErrorKind::width_mismatch, "oracle width differs from n");

  EvalResult result;
  if (trace) result.trace.emplace().reserve(p.w + 1);
  NodeState node{1, 0, 0, 0};
  Word answer = 0;
  for (std::uint64_t i = 1; i <= p.w; ++i) {
    const Word query = pack_line_query(i, x.blocks[node.ell], node.r, p);
    answer = oracle.query(query, tag);
    detail::push_trace(result.trace, node, query, answer);
    const LineAnswer next = unpack_line_answer(answer, p);
    node = NodeState{i + 1, next.ell, next.r, next.z};
  }
  detail::push_trace(result.trace, node, 0, 0);
  result.output = answer;
  return result;
}

inline EvalResult eval_simline(const Parameters& p, OracleHandle& oracle, const InputVector& x, bool trace = false,
                               QueryTag tag = {}) {
  p.validate(ChainKind::simline);
  check_input(x, p);
  if (oracle.width() != p.n) throw Error(ErrorKind::width_mismatch, "oracle width differs from n");

  EvalResult result;
  if (trace) result.trace.emplace().reserve(p.w + 1);
  NodeState node{1, 0, 0, 0};
  Word answer = 0;
  for (std::uint64_t i = 1; i <= p.w; ++i) {
    node.ell = simline_input_index(i, p);
    const Word query = pack_simline_query(x.blocks[node.ell], node.r, p);
    answer = oracle.query(query, tag);
    detail::push_trace(result.trace, node, query, answer);
    const SimLineAnswer next = unpack_simline_answer(answer, p);
    node = NodeState{i + 1, 0, next.r, next.z};
  }
  node.ell = p.w % p.v;
  detail::push_trace(result.trace, node, 0, 0);
  result.output = answer;
  return result;
}

inline EvalResult eval_chain(ChainKind kind, const Parameters& p, OracleHandle& oracle, const InputVector& x,
                             bool trace = false, QueryTag tag = {}) {
  return kind == ChainKind::line ? eval_line(p, oracle, x, trace, tag) : eval_simline(p, oracle, x, trace, tag);
}

/// The w correct entries: element i-1 is the packed query of node i.
inline std::vector<Word> correct_chain(ChainKind kind, const Parameters& p, const OracleHandle& oracle,
                                       const InputVector& x) {
  OracleHandle scratch = oracle;
  scratch.clear_log();
  eval_chain(kind, p, scratch, x);
  std::vector<Word> out;
  out.reserve(p.w);
  for (const auto& rec : scratch.query_log()) out.push_back(rec.query);
  return out;
}

inline std::vector<Word> correct_chain(const Parameters& p, const OracleHandle& oracle, const InputVector& x) {
  return correct_chain(ChainKind::line, p, oracle, x);
}

/// Full trace (nodes 1..w+1) without touching the caller's query log.
inline std::vector<TraceRow> chain_trace(ChainKind kind, const Parameters& p, const OracleHandle& oracle,
                                         const InputVector& x) {
  OracleHandle scratch = oracle;
  return *eval_chain(kind, p, scratch, x, true).trace;
}

}  // namespace lmpc
