#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lmpc/chain.hpp"
#include "lmpc/compression.hpp"
#include "lmpc/config.hpp"
#include "lmpc/mpc_engine.hpp"
#include "lmpc/oracle.hpp"
#include "lmpc/prf.hpp"
#include "lmpc/ram_eval.hpp"
#include "lmpc/strategies.hpp"

namespace lmpc {

/// Seed for experiment row `row`: a keyed hash of the master seed and the index.
inline Seed sub_seed(const Seed& master, std::uint64_t row) { return master.derive(row); }

/// Shared-tape seed belonging to a trial seed.
inline Seed tape_seed_for(const Seed& trial) { return trial.derive(~std::uint64_t{0}); }

/// fn(i) for i in [0, count) on up to `jobs` threads; results in index order.
template <class Fn>
auto parallel_map(std::uint64_t count, unsigned jobs, Fn&& fn) -> std::vector<decltype(fn(std::uint64_t{0}))> {
  using Result = decltype(fn(std::uint64_t{0}));
  std::vector<std::optional<Result>> slots(count);
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::uint64_t>(count, 1))));
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_lock;
  auto worker = [&] {
    for (;;) {
      const std::uint64_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        std::lock_guard<std::mutex> guard(failure_lock);
        if (!failure) failure = std::current_exception();
        next = count;
        return;
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<Result> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

inline std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

struct ExperimentOutput {
  std::string csv;
  bool passed = true;
  std::string summary;
};

// ---------------------------------------------------------------------------
// Strategy setup
// ---------------------------------------------------------------------------

inline OracleMode parse_oracle_mode(std::string_view s) {
  if (s == "lazy") return OracleMode::lazy;
  if (s == "eager") return OracleMode::eager;
  if (s == "keyed_hash" || s == "keyed-hash") return OracleMode::keyed_hash;
  throw Error(ErrorKind::config, "unknown oracle mode '" + std::string(s) + "'");
}

inline StrategyConfig strategy_config_from(const Config& cfg) {
  StrategyConfig sc;
  sc.name = cfg.get_or("strategy", sc.name);
  if (cfg.has("blocks_per_machine") && cfg.get_list("blocks_per_machine").front() != "auto") {
    sc.blocks_per_machine = Config::to_u64("blocks_per_machine", cfg.get_list("blocks_per_machine").front());
  }
  if (cfg.has("ownership_policy")) sc.ownership = parse_distribution_policy(cfg.get("ownership_policy"));
  if (cfg.has("custom_owners")) sc.custom_owners = cfg.get_u64_list("custom_owners");
  sc.guess_window = cfg.get_u64_or("guess_window", sc.guess_window);
  return sc;
}

/// Segment size used when none is configured: ceil(v/m).
inline std::uint64_t default_segment(const Parameters& p) { return (p.v + p.m - 1) / p.m; }

/// Memory that lets the named strategy hold its share.
inline std::uint64_t auto_memory(const StrategyConfig& sc, const Parameters& p) {
  if (sc.name == "segment") return memory_for_blocks(p, sc.blocks_per_machine.value_or(default_segment(p)));
  return memory_for_blocks(p, assign_blocks(p, sc.ownership, sc.custom_owners).max_share());
}

/// Builds the strategy, filling in s (when zero) and the segment size.
inline std::unique_ptr<Strategy> prepare_strategy(StrategyConfig& sc, Parameters& p) {
  if (sc.name == "segment" && !sc.blocks_per_machine && p.s == 0) sc.blocks_per_machine = default_segment(p);
  if (p.s == 0) p.s = auto_memory(sc, p);
  auto strategy = make_strategy(sc, p);
  p.validate_model(strategy->kind());
  return strategy;
}

struct RunTrial {
  bool success = false;
  std::uint64_t rounds_used = 0;
  bool clean = true;
};

/// Fresh oracle and random input from `seed`, then a full run.
inline RunTrial run_trial(const Parameters& p, const Strategy& strategy, const Seed& seed, std::uint64_t rounds,
                          OracleMode mode = OracleMode::lazy) {
  OracleHandle oracle(seed, p.n, mode);
  const InputVector x = random_input(p, seed);
  RunOptions options;
  options.max_rounds = rounds;
  options.tape_seed = tape_seed_for(seed);
  const RunReport report = run(p, strategy, x, oracle, options);
  return {report.success, report.rounds_used, report.clean()};
}

// ---------------------------------------------------------------------------
// CSV renderers for single runs
// ---------------------------------------------------------------------------

inline std::string trace_csv(const std::vector<TraceRow>& trace, const Parameters& p, ChainKind kind) {
  std::ostringstream out;
  out << "i,ell,r_hex,z_hex,query_hex,answer_hex\n";
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const auto& row = trace[k];
    const bool last = k + 1 == trace.size();
    out << row.node.index << ',' << row.node.ell << ',' << word_hex(row.node.r, p.u) << ','
        << word_hex(row.node.z, p.z_bits(kind)) << ',' << (last ? "" : word_hex(row.query, p.n)) << ','
        << (last ? "" : word_hex(row.answer, p.n)) << '\n';
  }
  return out.str();
}

inline std::string report_csv(const RunReport& report, const Parameters& p) {
  std::ostringstream out;
  out << "round,machine,queries_issued,new_correct_entries,messages_out_bits,output_claimed\n";
  for (const auto& round : report.rounds) {
    for (const auto& mr : round.machines) {
      out << round.round << ',' << mr.machine << ',' << mr.queries.size() << ',' << mr.new_correct << ','
          << mr.message_bits() << ',' << (mr.claim ? word_hex(*mr.claim, p.n) : "") << '\n';
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> axis(const Config& cfg, const std::string& key, const std::string& fallback) {
  return cfg.has(key) ? cfg.get_list(key) : std::vector<std::string>{fallback};
}

}  // namespace detail

/// Cartesian grid over strategy, n, u, v, w, m, s, q, blocks_per_machine (each
/// a list; "auto" for u, s and blocks_per_machine derives the value). Each cell
/// runs `trials` instances. Segment cells with v = m*b and q >= b must succeed
/// in exactly ceil(w/b)+1 rounds whenever the round cap allows it.
inline ExperimentOutput run_sweep(const Config& cfg, const Seed& master, std::uint64_t trials, unsigned jobs) {
  const Parameters defaults = parameters_from(Config{});
  const auto strategies = detail::axis(cfg, "strategy", "segment");
  const auto ns = detail::axis(cfg, "n", std::to_string(defaults.n));
  const auto us = detail::axis(cfg, "u", "auto");
  const auto vs = detail::axis(cfg, "v", std::to_string(defaults.v));
  const auto ws = detail::axis(cfg, "w", std::to_string(defaults.w));
  const auto ms = detail::axis(cfg, "m", std::to_string(defaults.m));
  const auto ss = detail::axis(cfg, "s", "auto");
  const auto qs = detail::axis(cfg, "q", std::to_string(defaults.q));
  const auto bs = detail::axis(cfg, "blocks_per_machine", "auto");
  const std::uint64_t d = cfg.get_u64_or("d", defaults.d);
  const OracleMode mode = parse_oracle_mode(cfg.get_or("oracle_mode", "lazy"));

  struct Cell {
    std::string strategy;
    Parameters p;
    std::optional<std::uint64_t> b;
    bool s_auto = false;
  };
  std::vector<Cell> cells;
  auto num = [](const std::string& key, const std::string& v) { return Config::to_u64(key, v); };
  for (const auto& st : strategies)
    for (const auto& n : ns)
      for (const auto& u : us)
        for (const auto& v : vs)
          for (const auto& w : ws)
            for (const auto& m : ms)
              for (const auto& s : ss)
                for (const auto& q : qs)
                  for (const auto& b : bs) {
                    Cell c;
                    c.strategy = st;
                    c.p.n = static_cast<unsigned>(num("n", n));
                    c.p.u = u == "auto" ? c.p.n / 3 : static_cast<unsigned>(num("u", u));
                    c.p.v = num("v", v);
                    c.p.w = num("w", w);
                    c.p.m = num("m", m);
                    c.s_auto = s == "auto";
                    c.p.s = c.s_auto ? 0 : num("s", s);
                    c.p.q = num("q", q);
                    c.p.d = static_cast<unsigned>(d);
                    if (b != "auto") c.b = num("blocks_per_machine", b);
                    cells.push_back(c);
                  }

  struct Row {
    std::string line;
    bool ok = true;
  };
  const auto rows = parallel_map(cells.size(), jobs, [&](std::uint64_t i) -> Row {
    Cell cell = cells[i];
    const Seed seed = sub_seed(master, i);
    std::ostringstream line;
    auto prefix = [&](const Parameters& p, const std::string& func, const std::string& b, std::uint64_t cap) {
      line << i << ',' << cell.strategy << ',' << func << ',' << p.n << ',' << p.u << ',' << p.v << ',' << p.w << ','
           << p.m << ',' << p.s << ',' << p.q << ',' << b << ',' << cap << ',' << trials << ',';
    };
    StrategyConfig sc = strategy_config_from(cfg);
    sc.name = cell.strategy;
    sc.blocks_per_machine = cell.b;
    Parameters p = cell.p;
    std::unique_ptr<Strategy> strategy;
    try {
      strategy = prepare_strategy(sc, p);
    } catch (const Error& e) {
      prefix(p, "", cell.b ? std::to_string(*cell.b) : "", 0);
      std::string reason = e.what();
      std::replace(reason.begin(), reason.end(), ',', ';');
      line << ",,,,,skipped: " << reason << ',' << seed.hex() << '\n';
      return {line.str(), true};
    }

    std::optional<std::uint64_t> closed;
    std::string b_text;
    if (auto* seg = dynamic_cast<const SegmentStrategy*>(strategy.get())) {
      const std::uint64_t b = seg->blocks_per_machine();
      b_text = std::to_string(b);
      if (p.v == p.m * b && p.q >= b) closed = SegmentStrategy::closed_form_rounds(p.w, b);
    }
    const std::uint64_t cap = cfg.get_u64_or("rounds", closed ? *closed + 1 : p.w + 2);
    prefix(p, std::string(to_string(strategy->kind())), b_text, cap);

    std::uint64_t successes = 0;
    std::uint64_t rounds_total = 0;
    bool ok = true;
    for (std::uint64_t t = 0; t < trials; ++t) {
      const RunTrial r = run_trial(p, *strategy, seed.derive(t), cap, mode);
      successes += r.success ? 1 : 0;
      rounds_total += r.rounds_used;
      if (!r.clean) ok = false;
      if (closed && cap >= *closed && (!r.success || r.rounds_used != *closed)) ok = false;
    }
    const double mean = trials == 0 ? 0.0 : static_cast<double>(rounds_total) / static_cast<double>(trials);
    const double rate = trials == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(trials);
    line << successes << ',' << fixed6(rate) << ',' << fixed6(mean) << ',' << (closed ? std::to_string(*closed) : "")
         << ',' << (ok ? "ok" : "mismatch") << ',' << seed.hex() << '\n';
    return {line.str(), ok};
  });

  ExperimentOutput out;
  out.csv = "row,strategy,func,n,u,v,w,m,s,q,b,rounds_cap,trials,successes,success_rate,mean_rounds,closed_form,"
            "status,sub_seed\n";
  std::uint64_t bad = 0;
  for (const auto& r : rows) {
    out.csv += r.line;
    if (!r.ok) ++bad;
  }
  out.passed = bad == 0;
  out.summary = std::to_string(cells.size()) + " cells, " + std::to_string(bad) + " failing";
  return out;
}

// ---------------------------------------------------------------------------
// decay
// ---------------------------------------------------------------------------

/// Greedy-probe advance histogram over `trials` trials; trial t uses
/// sub_seed(master, t). counts[k] = trials that advanced exactly k.
inline std::vector<std::uint64_t> decay_counts(const Parameters& p, std::uint64_t b, const Seed& master,
                                               std::uint64_t trials, unsigned jobs) {
  const auto ks = parallel_map(trials, jobs, [&](std::uint64_t t) { return greedy_probe_trial(p, b, sub_seed(master, t)); });
  std::vector<std::uint64_t> counts(p.q + 1, 0);
  for (auto k : ks) ++counts[k];
  return counts;
}

inline ExperimentOutput run_decay(const Config& cfg, const Seed& master, std::uint64_t trials, unsigned jobs) {
  Parameters p = parameters_from(cfg);
  p.validate(ChainKind::line);
  if (trials < 1000) throw Error(ErrorKind::config, "decay needs at least 1000 trials");
  const std::uint64_t b = cfg.get_u64_or("b", p.v / 2);
  if (b > p.v) throw Error(ErrorKind::config, "b must not exceed v");
  const std::uint64_t j_max = cfg.get_u64_or("j_max", 5);
  const double z_limit = static_cast<double>(cfg.get_u64_or("z_limit", 3));
  const double rho = static_cast<double>(b) / static_cast<double>(p.v);

  const auto rows = decay_table(decay_counts(p, b, master, trials, jobs), rho, j_max);
  ExperimentOutput out;
  out.csv = "j,empirical,expected,z,trials,master_seed\n";
  std::uint64_t bad = 0;
  for (const auto& r : rows) {
    // Beyond min(q, w) the probe cannot advance, so the law stops applying.
    const bool checked = r.j >= 1 && r.j <= std::min<std::uint64_t>(p.q, p.w);
    if (checked && std::abs(r.z) > z_limit) ++bad;
    out.csv += std::to_string(r.j) + ',' + fixed6(r.empirical) + ',' + fixed6(r.expected) + ',' + fixed6(r.z) + ',' +
               std::to_string(trials) + ',' + master.hex() + '\n';
  }
  out.passed = bad == 0;
  out.summary = "rho = " + fixed6(rho) + ", " + std::to_string(bad) + " rows outside " + fixed6(z_limit) + " sigma";
  return out;
}

// ---------------------------------------------------------------------------
// jump
// ---------------------------------------------------------------------------

struct JumpSummary {
  std::uint64_t trials = 0;
  std::uint64_t guesses = 0;
  std::uint64_t hits = 0;
  double rate = 0;
  double expected_rate = 0;
  double z = 0;
};

inline JumpSummary jump_summary(const Parameters& p, std::uint64_t guesses_per_trial, std::uint64_t window,
                                const Seed& master, std::uint64_t trials, unsigned jobs) {
  const auto results = parallel_map(trials, jobs, [&](std::uint64_t t) {
    return jump_adversary_trial(p, guesses_per_trial, window, sub_seed(master, t));
  });
  JumpSummary s;
  s.trials = trials;
  for (const auto& r : results) {
    s.guesses += r.guesses;
    s.hits += r.hits;
  }
  s.expected_rate = std::ldexp(1.0, -static_cast<int>(p.u));
  s.rate = s.guesses == 0 ? 0.0 : static_cast<double>(s.hits) / static_cast<double>(s.guesses);
  const double sigma = std::sqrt(s.expected_rate * (1 - s.expected_rate) / static_cast<double>(std::max<std::uint64_t>(s.guesses, 1)));
  s.z = (s.rate - s.expected_rate) / sigma;
  return s;
}

/// Per-guess hit rate against 2^-u. With `check = rate` the rate must lie within
/// z_limit sigma; with `check = tail` total hits must stay within 10x the
/// expectation. `auto` picks rate when at least 100 hits are expected.
inline ExperimentOutput run_jump(const Config& cfg, const Seed& master, std::uint64_t trials, unsigned jobs) {
  Parameters p = parameters_from(cfg);
  p.validate(ChainKind::line);
  if (p.w < 2) throw Error(ErrorKind::config, "jump needs w >= 2");
  const std::uint64_t guesses = cfg.get_u64_or("guesses", 64);
  const std::uint64_t window = cfg.get_u64_or("guess_window", p.w - 1);
  const double z_limit = static_cast<double>(cfg.get_u64_or("z_limit", 3));
  const JumpSummary s = jump_summary(p, guesses, window, master, trials, jobs);
  const double expected_hits = s.expected_rate * static_cast<double>(s.guesses);
  std::string check = cfg.get_or("check", "auto");
  if (check == "auto") check = expected_hits >= 100 ? "rate" : "tail";
  if (check != "rate" && check != "tail") throw Error(ErrorKind::config, "check must be auto, rate or tail");
  const double limit = 10 * expected_hits;
  const bool pass = check == "rate" ? std::abs(s.z) <= z_limit : static_cast<double>(s.hits) <= limit;

  ExperimentOutput out;
  out.csv = "trials,guesses_per_trial,total_guesses,hits,rate,expected_rate,z,expected_hits,check,limit,pass,master_seed\n";
  out.csv += std::to_string(trials) + ',' + std::to_string(guesses) + ',' + std::to_string(s.guesses) + ',' +
             std::to_string(s.hits) + ',' + fixed6(s.rate) + ',' + fixed6(s.expected_rate) + ',' + fixed6(s.z) + ',' +
             fixed6(expected_hits) + ',' + check + ',' + (check == "rate" ? fixed6(z_limit) : fixed6(limit)) + ',' +
             (pass ? "true" : "false") + ',' + master.hex() + '\n';
  out.passed = pass;
  out.summary = std::to_string(s.hits) + " hits in " + std::to_string(s.guesses) + " guesses";
  return out;
}

// ---------------------------------------------------------------------------
// Codec trials
// ---------------------------------------------------------------------------

struct CodecTrial {
  bool qualified = false;
  std::string note;
  std::uint64_t machine = 0;
  std::uint64_t round = 0;
  std::uint64_t intersect = 0;
  std::uint64_t reachable = 0;
  std::uint64_t payload_bits = 0;
  std::uint64_t header_bits = 0;
  std::uint64_t bound_bits = 0;
  bool roundtrip = false;
  bool within_bound = false;
  bool replay_match = false;
  bool reachable_ok = true;

  bool pass() const { return qualified && roundtrip && within_bound && replay_match && reachable_ok; }
};

namespace detail {

/// (machine, round) pairs where the machine issued at least one query.
inline std::vector<std::pair<std::uint64_t, std::uint64_t>> active_machine_rounds(const RunReport& report) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
  for (const auto& r : report.rounds) {
    for (const auto& mr : r.machines) {
      if (!mr.queries.empty()) out.emplace_back(mr.machine, r.round);
    }
  }
  return out;
}

inline void fill_sizes(CodecTrial& t, const EncodingBlob& blob) {
  t.payload_bits = blob.payload_bits();
  t.header_bits = blob.header_bits();
}

}  // namespace detail

/// SimLine segment run on a fresh eager oracle; a random active machine-round
/// is encoded against the v correct entries following the frontier.
inline CodecTrial warmup_trial(const Parameters& p, std::uint64_t b, std::uint64_t alpha, const Seed& seed) {
  const SegmentStrategy strategy(p, b);
  p.validate_model(ChainKind::simline);
  const OracleHandle oracle(seed, p.n, OracleMode::eager);
  const InputVector x = random_input(p, seed);
  RunOptions options;
  options.max_rounds = SegmentStrategy::closed_form_rounds(p.w, b) + 1;
  options.tape_seed = tape_seed_for(seed);
  OracleHandle run_oracle = oracle;
  const RunReport report = run(p, strategy, x, run_oracle, options);

  CodecTrial t;
  const auto active = detail::active_machine_rounds(report);
  if (active.empty()) {
    t.note = "no active round";
    return t;
  }
  Rng pick(seed, "lmpc/pick");
  std::tie(t.machine, t.round) = active[pick.below(active.size())];

  ReplayContext ctx{&strategy, p, t.machine, t.round, options.tape_seed, options.tape_cap};
  const auto targets =
      target_window(ChainKind::simline, p, oracle, x, report.frontier_before(t.round) + 1, p.v);
  const auto enc = encode_warmup(oracle, x, ctx, report.memory_at(t.machine, t.round), targets, alpha);
  if (!enc) {
    t.note = "no intersection";
    return t;
  }
  t.qualified = true;
  t.intersect = enc->intersect_size;
  t.bound_bits = enc->bound_bits;
  detail::fill_sizes(t, enc->blob);
  t.within_bound = t.payload_bits <= t.bound_bits;

  const auto parsed = EncodingBlob::parse(enc->blob.serialize());
  const DecodedInstance dec = decode_warmup(parsed, ctx);
  t.roundtrip = dec.x == x && dec.table == oracle.dump_table();
  t.replay_match = dec.replays.size() == 1 && dec.replays[0] == enc->queries;
  return t;
}

/// Line token run on a fresh eager oracle; a random active machine-round is
/// encoded with the enumerative codec and cross-checked against its reachable set.
inline CodecTrial enumerative_trial(const Parameters& p, const StrategyConfig& sc, const EnumerativeOptions& opts,
                                    const Seed& seed) {
  const TokenStrategy strategy(p, sc.ownership, sc.custom_owners);
  p.validate_model(ChainKind::line);
  const OracleHandle oracle(seed, p.n, OracleMode::eager);
  const InputVector x = random_input(p, seed);
  RunOptions options;
  options.max_rounds = p.w + 2;
  options.tape_seed = tape_seed_for(seed);
  OracleHandle run_oracle = oracle;
  const RunReport report = run(p, strategy, x, run_oracle, options);

  CodecTrial t;
  const auto active = detail::active_machine_rounds(report);
  if (active.empty()) {
    t.note = "no active round";
    return t;
  }
  Rng pick(seed, "lmpc/pick");
  std::tie(t.machine, t.round) = active[pick.below(active.size())];
  ReplayContext ctx{&strategy, p, t.machine, t.round, options.tape_seed, options.tape_cap};

  std::optional<EnumerativeEncoding> enc;
  try {
    enc = encode_enumerative(oracle, x, report, ctx, opts);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::precondition_failed) throw;
    t.note = e.what();
    return t;
  }
  t.qualified = true;
  const ReachableSet reach = compute_reachable_set(oracle, x, report, ctx, opts.cap);
  t.intersect = enc->recovered.size();
  t.reachable = reach.members.size();
  t.reachable_ok = std::includes(reach.members.begin(), reach.members.end(), enc->recovered.begin(),
                                 enc->recovered.end());
  t.bound_bits = enumerative_bound_bits(p, reach.members.size());
  detail::fill_sizes(t, enc->blob);
  t.within_bound = t.payload_bits <= t.bound_bits;

  const auto parsed = EncodingBlob::parse(enc->blob.serialize());
  const DecodedInstance dec = decode_enumerative(parsed, ctx);
  t.roundtrip = dec.x == x && dec.table == oracle.dump_table();
  t.replay_match = dec.replays.size() == enc->sequences.size();
  for (std::size_t i = 0; t.replay_match && i < dec.replays.size(); ++i) {
    t.replay_match = dec.replays[i] == enc->sequences[i].queries;
  }
  return t;
}

/// Warm-up codec over every (oracle seed, X) pair of a tiny SimLine family:
/// `seeds` oracles times all 2^(uv) inputs, segment strategy with one machine,
/// machine 0 round 0, alpha = 0.
inline CountingResult warmup_counting_check(const Parameters& p, const Seed& master, std::uint64_t seeds) {
  if (p.input_bits() > 20) throw Error(ErrorKind::invalid_parameters, "input family too large to enumerate");
  const SegmentStrategy strategy(p, p.v);
  std::vector<std::pair<std::uint64_t, Word>> space;
  for (std::uint64_t s = 0; s < seeds; ++s) {
    for (Word xbits = 0; xbits < (Word{1} << p.input_bits()); ++xbits) space.emplace_back(s, xbits);
  }
  std::vector<OracleHandle> oracles;
  for (std::uint64_t s = 0; s < seeds; ++s) oracles.emplace_back(sub_seed(master, s), p.n, OracleMode::eager);

  return counting_bound_check(space, [&](const std::pair<std::uint64_t, Word>& msg) {
    const OracleHandle& oracle = oracles[msg.first];
    BitString bits;
    bits.append(msg.second, static_cast<unsigned>(p.input_bits()));
    const InputVector x = input_from_bits(bits, p);
    const auto memories = strategy.initial_memories(x, p);
    ReplayContext ctx{&strategy, p, 0, 0, tape_seed_for(sub_seed(master, msg.first)), SharedTape::default_cap};
    const auto targets = target_window(ChainKind::simline, p, oracle, x, 1, p.v);
    const auto enc = encode_warmup(oracle, x, ctx, memories[0], targets, 0);
    const auto dec = decode_warmup(enc->blob, ctx);
    if (!(dec.x == x) || dec.table != oracle.dump_table()) {
      throw Error(ErrorKind::decode, "warm-up roundtrip failed inside the counting family");
    }
    return enc->blob.codeword();
  });
}

/// compress-check: one row per trial. Rows whose instance falls outside the
/// compressible set (no intersection, or a jump before the round) are marked
/// "excluded"; any other failure fails the command.
inline ExperimentOutput run_compress(const Config& cfg, Scheme scheme, const Seed& master, std::uint64_t trials,
                                     unsigned jobs) {
  Parameters p = parameters_from(cfg);
  StrategyConfig sc = strategy_config_from(cfg);
  std::uint64_t b = 0;
  if (scheme == Scheme::warmup) {
    sc.name = "segment";
    b = sc.blocks_per_machine.value_or(default_segment(p));
    sc.blocks_per_machine = b;
  } else {
    sc.name = "token";
  }
  if (p.s == 0) p.s = auto_memory(sc, p);
  p.validate_model(scheme == Scheme::warmup ? ChainKind::simline : ChainKind::line);
  if (p.n > OracleHandle::max_eager_width) throw Error(ErrorKind::config, "compress-check needs n <= 22");
  const std::uint64_t alpha = cfg.get_u64_or("alpha", 1);
  EnumerativeOptions opts;
  opts.cap = cfg.get_u64_or("cap", opts.cap);
  opts.require_bound_precondition = cfg.get_bool_or("require_bound_precondition", true);
  if (scheme == Scheme::enumerative && opts.require_bound_precondition && !p.enumerative_precondition()) {
    throw Error(ErrorKind::config, "u must exceed (d+2) ceil(log2 v) + ceil(log2 q); set "
                                   "require_bound_precondition = false to run anyway");
  }

  const auto results = parallel_map(trials, jobs, [&](std::uint64_t t) {
    const Seed seed = sub_seed(master, t);
    return scheme == Scheme::warmup ? warmup_trial(p, b, alpha, seed) : enumerative_trial(p, sc, opts, seed);
  });

  ExperimentOutput out;
  out.csv = "trial,intersect_size,blob_bits,bound_bits,pass,sub_seed\n";
  std::uint64_t failures = 0;
  std::uint64_t excluded = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    const auto& r = results[t];
    std::string verdict = "excluded";
    if (r.qualified) {
      verdict = r.pass() ? "true" : "false";
      failures += r.pass() ? 0 : 1;
    } else {
      ++excluded;
    }
    out.csv += std::to_string(t) + ',' + std::to_string(r.intersect) + ',' + std::to_string(r.payload_bits) + ',' +
               std::to_string(r.bound_bits) + ',' + verdict + ',' + sub_seed(master, t).hex() + '\n';
  }
  out.passed = failures == 0;
  out.summary = std::to_string(trials - excluded - failures) + " passed, " + std::to_string(failures) + " failed, " +
                std::to_string(excluded) + " excluded";
  return out;
}

}  // namespace lmpc
