#include <gtest/gtest.h>

#include "lmpc/compression.hpp"
#include "lmpc/strategies.hpp"

using namespace lmpc;

namespace {

Parameters warm_params() {
  Parameters p;
  p.n = 12;
  p.u = 4;
  p.v = 8;
  p.w = 16;
  p.m = 2;
  p.q = 8;
  p.s = memory_for_blocks(p, 4);
  return p;
}

Parameters enum_params() {
  Parameters p;
  p.n = 12;
  p.u = 4;
  p.v = 4;
  p.w = 12;
  p.m = 2;
  p.q = 4;
  p.d = 2;
  p.s = memory_for_blocks(p, 2);
  return p;
}

struct LineRun {
  Parameters p;
  OracleHandle oracle;
  InputVector x;
  TokenStrategy strategy;
  RunReport report;
  Seed tape;
};

LineRun token_run(const Parameters& p, std::uint64_t seed) {
  const Seed s = Seed::from_u64(seed);
  LineRun r{p, OracleHandle(s, p.n, OracleMode::eager), random_input(p, s), TokenStrategy(p), {}, s.derive(1)};
  OracleHandle logged = r.oracle;
  RunOptions opt;
  opt.max_rounds = p.w + 2;
  opt.tape_seed = r.tape;
  r.report = run(p, r.strategy, r.x, logged, opt);
  return r;
}

}  // namespace

TEST(Blob, SerializeParseAndSizes) {
  EncodingBlob blob;
  blob.scheme = Scheme::warmup;
  for (auto id : section_order(Scheme::warmup)) {
    BitString b;
    b.append(static_cast<Word>(id), 5);
    blob.sections.push_back({id, b});
  }
  const auto bytes = blob.serialize();
  EXPECT_EQ(bytes.size() * 8, blob.total_bits() + blob.padding_bits());
  EXPECT_EQ(blob.payload_bits(), 4u * 5);
  EXPECT_EQ(blob.header_bits(), blob.framing_bits() + 2 * 5);
  const EncodingBlob back = EncodingBlob::parse(bytes);
  EXPECT_EQ(back.serialize(), bytes);
  EXPECT_EQ(back.section(BlobSection::rest).read(0, 5), 6u);
  EXPECT_THROW(back.section(BlobSection::seq_counts), Error);
  EXPECT_EQ(blob.codeword().size(), bytes.size() * 8);
}

TEST(Blob, StrictParsing) {
  EncodingBlob blob;
  blob.scheme = Scheme::warmup;
  for (auto id : section_order(Scheme::warmup)) {
    BitString b;
    b.append(1, 3);
    blob.sections.push_back({id, b});
  }
  const auto good = blob.serialize();
  auto bad = good;
  bad[0] = 'M';
  EXPECT_THROW(EncodingBlob::parse(bad), Error);
  bad = good;
  bad.push_back(0);
  EXPECT_THROW(EncodingBlob::parse(bad), Error);
  bad = good;
  bad.back() |= 1;  // padding bit of the last section
  EXPECT_THROW(EncodingBlob::parse(bad), Error);
  bad = good;
  bad[6] = 0x09;  // unknown scheme
  EXPECT_THROW(EncodingBlob::parse(bad), Error);
  bad = good;
  bad[11] = static_cast<std::uint8_t>(BlobSection::memory);  // first section id swapped
  EXPECT_THROW(EncodingBlob::parse(bad), Error);
  bad = std::vector<std::uint8_t>(good.begin(), good.end() - 1);
  EXPECT_THROW(EncodingBlob::parse(bad), Error);
}

TEST(Blob, SchemeNames) {
  EXPECT_EQ(parse_scheme("warmup"), Scheme::warmup);
  EXPECT_EQ(parse_scheme("enum"), Scheme::enumerative);
  EXPECT_EQ(to_string(Scheme::enumerative), "enum");
  EXPECT_THROW(parse_scheme("zip"), Error);
}

TEST(Warmup, TargetWindowDedupsBlocks) {
  Parameters p = warm_params();
  const OracleHandle o(Seed::from_u64(1), p.n, OracleMode::eager);
  const InputVector x = random_input(p, Seed::from_u64(1));
  const auto targets = target_window(ChainKind::simline, p, o, x, 3, 8);
  ASSERT_EQ(targets.size(), 8u);  // SimLine visits each block once per 8 steps
  EXPECT_EQ(targets[0].position, 3u);
  EXPECT_EQ(targets[0].block, 2u);
  const auto tail = target_window(ChainKind::simline, p, o, x, 14, 8);
  EXPECT_EQ(tail.size(), 3u);  // capped at w
  Parameters lp = p;
  lp.w = 14;  // Line counter holds w + 1 < 16
  const auto line = target_window(ChainKind::line, lp, o, x, 1, 8);
  std::set<std::uint64_t> blocks;
  for (const auto& t : line) EXPECT_TRUE(blocks.insert(t.block).second);
}

TEST(Warmup, RoundtripOnSegmentRun) {
  const Parameters p = warm_params();
  const SegmentStrategy seg(p, 4);
  const OracleHandle o(Seed::from_u64(2), p.n, OracleMode::eager);
  const InputVector x = random_input(p, Seed::from_u64(2));
  OracleHandle logged = o;
  RunOptions opt;
  opt.max_rounds = 6;
  opt.tape_seed = Seed::from_u64(3);
  const RunReport r = run(p, seg, x, logged, opt);
  ASSERT_TRUE(r.success);

  // Machine 0 in round 0 evaluates positions 1..4.
  const ReplayContext ctx{&seg, p, 0, 0, opt.tape_seed, opt.tape_cap};
  const auto targets = target_window(ChainKind::simline, p, o, x, 1, p.v);
  const auto enc = encode_warmup(o, x, ctx, r.memory_at(0, 0), targets, 1);
  ASSERT_TRUE(enc);
  EXPECT_EQ(enc->intersect_size, 4u);
  ASSERT_EQ(enc->records.size(), 4u);
  EXPECT_EQ(enc->records[2], (RecoveryRecord{2, 2}));
  EXPECT_EQ(enc->blob.section(BlobSection::rest).size(), 4u * p.u);
  EXPECT_EQ(enc->blob.section(BlobSection::records).size(), 4u * (3 + 3));
  EXPECT_LE(enc->blob.payload_bits(), enc->bound_bits);
  EXPECT_EQ(enc->bound_bits, warmup_bound_bits(p, 4));

  const DecodedInstance dec = decode_warmup(EncodingBlob::parse(enc->blob.serialize()), ctx);
  EXPECT_EQ(dec.x, x);
  EXPECT_EQ(dec.table, o.dump_table());
  ASSERT_EQ(dec.replays.size(), 1u);
  EXPECT_EQ(dec.replays[0], enc->queries);

  // Machine 1 does nothing in round 0: below alpha, no encoding.
  const ReplayContext idle{&seg, p, 1, 0, opt.tape_seed, opt.tape_cap};
  EXPECT_FALSE(encode_warmup(o, x, idle, r.memory_at(1, 0), targets, 1));
  const auto zero = encode_warmup(o, x, idle, r.memory_at(1, 0), targets, 0);
  ASSERT_TRUE(zero);
  EXPECT_EQ(decode_warmup(zero->blob, idle).x, x);
}

TEST(Warmup, BoundFormula) {
  const Parameters p = warm_params();
  // s + I(3 + 3) + (8 - I)4 + 12 * 4096
  EXPECT_EQ(warmup_bound_bits(p, 0), p.s + 32 + 49152);
  EXPECT_EQ(warmup_bound_bits(p, 8), p.s + 48 + 49152);
  EXPECT_EQ(warmup_count_bits(p), 4u);
}

TEST(Warmup, CodecRefusesWideOracle) {
  Parameters p = warm_params();
  p.n = 24;
  p.u = 8;
  const SegmentStrategy seg(p, 4);
  const OracleHandle o(Seed::from_u64(2), p.n);
  const ReplayContext ctx{&seg, p, 0, 0, Seed{}, SharedTape::default_cap};
  EXPECT_THROW(encode_warmup(o, random_input(p, Seed::from_u64(1)), ctx, BitString{}, {}, 0), Error);
}

TEST(Patched, ChainFollowsSequence) {
  Parameters p = enum_params();
  const OracleHandle o(Seed::from_u64(5), p.n, OracleMode::eager);
  const InputVector x{{3, 7, 11, 15}};
  const FrontierInfo f = frontier_info(p, o, x, 4);
  EXPECT_EQ(f.g, 5u);
  const auto trace = chain_trace(ChainKind::line, p, o, x);
  EXPECT_EQ(f.a0, trace[4].node.ell);
  EXPECT_EQ(f.r_g, trace[4].node.r);

  const PatchedChain chain = patched_chain(o, x, p, f, {3, 1});
  ASSERT_EQ(chain.chain_queries.size(), 3u);
  EXPECT_EQ(chain.chain_blocks, (std::vector<std::uint64_t>{f.a0, 3, 1}));
  EXPECT_EQ(chain.chain_queries[0], trace[4].query);
  EXPECT_EQ(chain.oracle.patches().size(), 2u);

  // Each patched answer keeps r and z and points at the chosen block.
  for (std::size_t t = 0; t < 2; ++t) {
    const Word key = chain.chain_queries[t];
    const LineAnswer base = unpack_line_answer(o.answer(key), p);
    const LineAnswer patched = unpack_line_answer(chain.oracle.answer(key), p);
    EXPECT_EQ(patched.ell, t == 0 ? 3u : 1u);
    EXPECT_EQ(patched.r, base.r);
    EXPECT_EQ(patched.z, base.z);
    EXPECT_EQ(line_query_r(chain.chain_queries[t + 1], p), base.r);
    EXPECT_EQ(line_query_index(chain.chain_queries[t + 1], p), f.g + t + 1);
  }
  EXPECT_EQ(line_query_block(chain.chain_queries[1], p), 15u);
  EXPECT_EQ(line_query_block(chain.chain_queries[2], p), 7u);

  // Evaluating on the patched oracle walks the same chain.
  const auto walked = chain_trace(ChainKind::line, p, chain.oracle, x);
  EXPECT_EQ(walked[5].node.ell, 3u);
  EXPECT_EQ(walked[6].node.ell, 1u);
  EXPECT_EQ(walked[6].query, chain.chain_queries[2]);

  EXPECT_THROW(patched_chain(o, x, p, f, {4, 0}), Error);
}

TEST(Patched, StopsAtChainEnd) {
  Parameters p = enum_params();
  const OracleHandle o(Seed::from_u64(5), p.n, OracleMode::eager);
  const InputVector x{{3, 7, 11, 15}};
  const PatchedChain last = patched_chain(o, x, p, frontier_info(p, o, x, p.w - 1), {0, 0});
  EXPECT_EQ(last.chain_queries.size(), 1u);
  EXPECT_EQ(last.oracle.patches().size(), 1u);
  const PatchedChain done = patched_chain(o, x, p, frontier_info(p, o, x, p.w), {0, 0});
  EXPECT_TRUE(done.chain_queries.empty());
  EXPECT_TRUE(done.oracle.patches().empty());
}

TEST(Patched, SequenceEnumeration) {
  Parameters p = enum_params();
  EXPECT_EQ(sequence_count(p, 4096), 16u);
  EXPECT_EQ(sequence_at(p, 0), (std::vector<std::uint64_t>{0, 0}));
  EXPECT_EQ(sequence_at(p, 6), (std::vector<std::uint64_t>{1, 2}));
  EXPECT_EQ(sequence_at(p, 15), (std::vector<std::uint64_t>{3, 3}));
  EXPECT_THROW(sequence_count(p, 15), Error);
  p.v = 1 << 20;
  p.d = 4;
  EXPECT_THROW(sequence_count(p, 4096), Error);
}

TEST(Jumps, GuessableSetShape) {
  Parameters p = enum_params();
  const OracleHandle o(Seed::from_u64(6), p.n, OracleMode::eager);
  const InputVector x{{1, 2, 3, 4}};
  const auto correct = correct_chain(ChainKind::line, p, o, x);
  const GuessableSet v0 = guessable_set(p, o, x, 0, correct);
  EXPECT_EQ(v0.entries.size(), 1u + 4 + 16);
  EXPECT_FALSE(v0.entries[0].predecessor);
  EXPECT_EQ(v0.entries[0].word, correct[0]);
  const GuessableSet v3 = guessable_set(p, o, x, 3, correct);
  EXPECT_EQ(v3.entries[0].predecessor, correct[2]);
  // the true next entry is among depth-1 children
  bool found = false;
  for (const auto& e : v3.entries) found = found || (e.position == 5 && e.word == correct[4]);
  EXPECT_TRUE(found);
  EXPECT_EQ(guessable_set(p, o, x, p.w - 1, correct).entries.size(), 1u);
  EXPECT_TRUE(guessable_set(p, o, x, p.w, correct).entries.empty());
}

TEST(Jumps, DetectsSkippedPredecessor) {
  Parameters p = enum_params();
  const OracleHandle o(Seed::from_u64(6), p.n, OracleMode::eager);
  const InputVector x{{1, 2, 3, 4}};
  const auto correct = correct_chain(ChainKind::line, p, o, x);

  RunReport in_order;
  in_order.rounds.resize(1);
  in_order.rounds[0].machines.resize(1);
  in_order.rounds[0].machines[0].queries = {correct[0], correct[1], correct[2]};
  EXPECT_FALSE(detect_jump(in_order, p, o, x, 0));

  RunReport skip = in_order;
  skip.rounds[0].machines[0].queries = {correct[0], correct[2]};
  const auto jump = detect_jump(skip, p, o, x, 0);
  ASSERT_TRUE(jump);
  EXPECT_EQ(jump->position, 3u);
  EXPECT_EQ(jump->query_index, 1u);

  // Position 1 needs no predecessor.
  RunReport first = in_order;
  first.rounds[0].machines[0].queries = {correct[0]};
  EXPECT_FALSE(detect_jump(first, p, o, x, 0));
}

TEST(Enumerative, RoundtripAndReachableWithinOwnership) {
  const Parameters p = enum_params();
  std::size_t checked = 0;
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const LineRun r = token_run(p, seed);
    ASSERT_TRUE(r.report.clean());
    for (const auto& round : r.report.rounds) {
      for (const auto& mr : round.machines) {
        if (detect_jump(r.report, p, r.oracle, r.x, round.round)) continue;
        const ReplayContext ctx{&r.strategy, p, mr.machine, round.round, r.tape, SharedTape::default_cap};
        EnumerativeOptions opts;
        opts.require_bound_precondition = false;
        const EnumerativeEncoding enc = encode_enumerative(r.oracle, r.x, r.report, ctx, opts);
        const ReachableSet reach = compute_reachable_set(r.oracle, r.x, r.report, ctx);

        // A machine can only issue entries built from block values it holds;
        // with u = 4 distinct blocks may share a value.
        const auto& owned = r.strategy.ownership().owned[mr.machine];
        for (auto a : reach.members) {
          EXPECT_TRUE(std::any_of(owned.begin(), owned.end(), [&](auto b) { return r.x.blocks[b] == r.x.blocks[a]; }))
              << a;
        }
        EXPECT_TRUE(std::includes(reach.members.begin(), reach.members.end(), enc.recovered.begin(),
                                  enc.recovered.end()));

        const DecodedInstance dec = decode_blob(EncodingBlob::parse(enc.blob.serialize()), ctx);
        ASSERT_EQ(dec.x, r.x);
        ASSERT_EQ(dec.table, r.oracle.dump_table());
        ASSERT_EQ(dec.replays.size(), enc.sequences.size());
        for (std::size_t i = 0; i < dec.replays.size(); ++i) EXPECT_EQ(dec.replays[i], enc.sequences[i].queries);
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 50u);
}

TEST(Enumerative, ActiveRoundRecoversFrontierBlock) {
  const Parameters p = enum_params();
  const LineRun r = token_run(p, 3);
  // Machine 0 owns block 0 and starts the chain in round 0.
  const ReplayContext ctx{&r.strategy, p, 0, 0, r.tape, SharedTape::default_cap};
  EnumerativeOptions opts;
  opts.require_bound_precondition = false;
  const EnumerativeEncoding enc = encode_enumerative(r.oracle, r.x, r.report, ctx, opts);
  EXPECT_EQ(enc.frontier.g, 1u);
  EXPECT_EQ(enc.frontier.a0, 0u);
  EXPECT_TRUE(enc.recovered.count(0));
  ASSERT_FALSE(enc.sequences.empty());
  EXPECT_EQ(enc.sequences[0].seq, (std::vector<std::uint64_t>{0, 0}));
  EXPECT_EQ(enc.sequences[0].recoveries.front(), (RecoveryRecord{0, 0}));
  EXPECT_EQ(enc.blob.section(BlobSection::rest).size(), (p.v - enc.recovered.size()) * p.u);
}

TEST(Enumerative, Preconditions) {
  Parameters p = enum_params();
  const LineRun r = token_run(p, 4);
  const ReplayContext ctx{&r.strategy, p, 0, 0, r.tape, SharedTape::default_cap};
  EXPECT_THROW(encode_enumerative(r.oracle, r.x, r.report, ctx), Error);  // u = 4 is too small

  const SegmentStrategy seg(p, 2);
  const ReplayContext wrong{&seg, p, 0, 0, r.tape, SharedTape::default_cap};
  EnumerativeOptions opts;
  opts.require_bound_precondition = false;
  EXPECT_THROW(encode_enumerative(r.oracle, r.x, r.report, wrong, opts), Error);
  opts.cap = 8;
  EXPECT_THROW(encode_enumerative(r.oracle, r.x, r.report, ctx, opts), Error);
}

TEST(Enumerative, BoundFormula) {
  Parameters p;
  p.n = 22;
  p.u = 9;
  p.v = 4;
  p.q = 1;
  p.d = 2;
  p.s = 100;
  // s + B(4*2 + 0) + (4 - B)9 + 22 * 2^22
  EXPECT_EQ(enumerative_bound_bits(p, 2), 100u + 16 + 18 + (22ull << 22));
  EXPECT_EQ(sequence_count_bits(p), 2u);
}

TEST(Counting, IdentityCodecOnEightBits) {
  std::vector<Word> space(256);
  for (Word i = 0; i < 256; ++i) space[i] = i;
  const CountingResult r = counting_bound_check(space, [](Word m) {
    BitString b;
    b.append(m, 8);
    return b;
  });
  EXPECT_EQ(r.messages, 256u);
  EXPECT_EQ(r.max_len, 8u);
  EXPECT_DOUBLE_EQ(r.bound, 7.0);
  EXPECT_TRUE(r.pass);
}

TEST(Counting, ShortCodecCannotBeInjective) {
  std::vector<Word> space(256);
  for (Word i = 0; i < 256; ++i) space[i] = i;
  EXPECT_THROW(counting_bound_check(space,
                                    [](Word m) {
                                      BitString b;
                                      b.append(m >> 2, 6);
                                      return b;
                                    }),
               Error);
}

TEST(Counting, VariableLengthCodecIsChecked) {
  // Unary-ish prefix code: injective, long enough.
  std::vector<Word> space(16);
  for (Word i = 0; i < 16; ++i) space[i] = i;
  const CountingResult r = counting_bound_check(space, [](Word m) {
    BitString b;
    for (Word i = 0; i < m; ++i) b.append(1, 1);
    b.append(0, 1);
    return b;
  });
  EXPECT_EQ(r.max_len, 16u);
  EXPECT_TRUE(r.pass);
}
