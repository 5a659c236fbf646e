#include <gtest/gtest.h>

#include "lmpc/lmpc.hpp"

using namespace lmpc;

TEST(Config, ParsesKeysCommentsAndLists) {
  const Config cfg = Config::parse(
      "# sizes\n"
      "n = 24\n"
      "  w = 8, 16 ,32   # trailing comment\n"
      "strategy=token\r\n"
      "\n"
      "flag = yes\n");
  EXPECT_EQ(cfg.get_u64("n"), 24u);
  EXPECT_EQ(cfg.get_u64_list("w"), (std::vector<std::uint64_t>{8, 16, 32}));
  EXPECT_EQ(cfg.get("strategy"), "token");
  EXPECT_TRUE(cfg.get_bool_or("flag", false));
  EXPECT_FALSE(cfg.get_bool_or("other", false));
  EXPECT_EQ(cfg.get_or("missing", "x"), "x");
  EXPECT_EQ(cfg.get_u64_or("missing", 7), 7u);
  EXPECT_THROW(cfg.get("missing"), Error);
}

TEST(Config, Errors) {
  EXPECT_THROW(Config::parse("n 24\n"), Error);
  EXPECT_THROW(Config::parse(" = 3\n"), Error);
  const Config cfg = Config::parse("n = 2x\nl = 1,,2\nb = maybe\n");
  EXPECT_THROW(cfg.get_u64("n"), Error);
  EXPECT_THROW(cfg.get_list("l"), Error);
  EXPECT_THROW(cfg.get_bool_or("b", true), Error);
  EXPECT_THROW(Config::load("/nonexistent/params.cfg"), Error);
  try {
    cfg.get_u64("n");
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
}

TEST(Config, ParametersFrom) {
  const Parameters p = parameters_from(Config::parse("n = 30\nv = 8\nw = 12, 24\nm = 2\nq = 3\nd = 1\n"));
  EXPECT_EQ(p.n, 30u);
  EXPECT_EQ(p.u, 10u);  // floor(n/3)
  EXPECT_EQ(p.v, 8u);
  EXPECT_EQ(p.w, 12u);  // first list item
  EXPECT_EQ(p.m, 2u);
  EXPECT_EQ(p.q, 3u);
  EXPECT_EQ(p.d, 1u);
  EXPECT_EQ(parameters_from(Config::parse("n = 12\nu = auto\n")).u, 4u);
  EXPECT_EQ(parameters_from(Config::parse("n = 12\nu = 3\n")).u, 3u);
  EXPECT_THROW(parameters_from(Config::parse("n = 65\n")), Error);
}

TEST(Config, StrategyConfig) {
  const StrategyConfig sc = strategy_config_from(
      Config::parse("strategy = token\nownership_policy = custom\ncustom_owners = 1,0,1,0\nguess_window = 3\n"));
  EXPECT_EQ(sc.name, "token");
  EXPECT_EQ(sc.ownership, DistributionPolicy::custom);
  EXPECT_EQ(sc.custom_owners, (std::vector<std::uint64_t>{1, 0, 1, 0}));
  EXPECT_EQ(sc.guess_window, 3u);
  EXPECT_FALSE(sc.blocks_per_machine);
  EXPECT_EQ(strategy_config_from(Config::parse("blocks_per_machine = 4\n")).blocks_per_machine, 4u);
  EXPECT_FALSE(strategy_config_from(Config::parse("blocks_per_machine = auto\n")).blocks_per_machine);
}

TEST(Setup, PrepareStrategyFillsMemory) {
  Parameters p;
  p.n = 12;
  p.u = 4;
  p.v = 8;
  p.w = 16;
  p.m = 2;
  p.q = 4;
  StrategyConfig sc;
  sc.name = "segment";
  auto seg = prepare_strategy(sc, p);
  EXPECT_EQ(sc.blocks_per_machine, 4u);
  EXPECT_EQ(p.s, memory_for_blocks(p, 4));
  EXPECT_EQ(seg->kind(), ChainKind::simline);

  Parameters q = p;
  q.s = 0;
  q.w = 12;
  sc = StrategyConfig{};
  sc.name = "token";
  sc.ownership = DistributionPolicy::round_robin_blocks;
  prepare_strategy(sc, q);
  EXPECT_EQ(q.s, memory_for_blocks(q, 4));
  EXPECT_EQ(default_segment(q), 4u);
}

TEST(Seeding, SubSeedsAreStableAndDistinct) {
  const Seed master = Seed::from_u64(1);
  EXPECT_EQ(sub_seed(master, 0), master.derive(0));
  EXPECT_NE(sub_seed(master, 0), sub_seed(master, 1));
  EXPECT_NE(tape_seed_for(master), master);
  EXPECT_EQ(random_input(Parameters{}, master), random_input(Parameters{}, master));
}

TEST(Parallel, OrderedAndJobIndependent) {
  auto f = [](std::uint64_t i) { return i * i + 1; };
  const auto one = parallel_map(100, 1, f);
  const auto many = parallel_map(100, 7, f);
  EXPECT_EQ(one, many);
  EXPECT_EQ(one[9], 82u);
  EXPECT_TRUE(parallel_map(0, 4, f).empty());
  EXPECT_THROW(parallel_map(50, 4,
                            [](std::uint64_t i) -> int {
                              if (i == 17) throw Error(ErrorKind::config, "boom");
                              return 0;
                            }),
               Error);
}

TEST(Csv, TraceAndReport) {
  Parameters p;
  p.n = 12;
  p.u = 4;
  p.v = 4;
  p.w = 2;
  OracleHandle o(Seed::from_u64(1), 12);
  const auto trace = chain_trace(ChainKind::line, p, o, InputVector{{1, 2, 3, 4}});
  const std::string csv = trace_csv(trace, p, ChainKind::line);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "i,ell,r_hex,z_hex,query_hex,answer_hex");
  EXPECT_NE(csv.find("\n1,0,0,00,110,"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_EQ(csv.substr(csv.rfind("\n3,")).back(), '\n');
}

TEST(Sweep, ClosedFormCellsPass) {
  const Config cfg = Config::parse(
      "strategy = segment\nn = 12\nu = 4\nv = 4\nw = 1, 5, 9\nm = 2\nq = 2\nblocks_per_machine = 2\n");
  const ExperimentOutput out = run_sweep(cfg, Seed::from_u64(1), 3, 1);
  EXPECT_TRUE(out.passed) << out.csv;
  EXPECT_EQ(std::count(out.csv.begin(), out.csv.end(), '\n'), 4);
  EXPECT_NE(out.csv.find(",ok,"), std::string::npos);
  EXPECT_EQ(out.csv, run_sweep(cfg, Seed::from_u64(1), 3, 4).csv);
}

TEST(Sweep, InvalidCellsAreSkipped) {
  const Config cfg = Config::parse("strategy = segment\nn = 12\nu = 4\nv = 8\nw = 4\nm = 1\nq = 2\nblocks_per_machine = 2\n");
  const ExperimentOutput out = run_sweep(cfg, Seed::from_u64(1), 2, 1);
  EXPECT_TRUE(out.passed);
  EXPECT_NE(out.csv.find("skipped: precondition-failed"), std::string::npos);
}

TEST(Decay, SmallRunStaysNearGeometric) {
  const Config cfg = Config::parse("n = 24\nu = 8\nv = 16\nw = 32\nq = 6\nb = 8\n");
  const ExperimentOutput out = run_decay(cfg, Seed::from_u64(5), 4000, 4);
  EXPECT_TRUE(out.passed) << out.csv;
  EXPECT_EQ(out.csv, run_decay(cfg, Seed::from_u64(5), 4000, 1).csv);
  EXPECT_THROW(run_decay(cfg, Seed::from_u64(5), 999, 1), Error);
  EXPECT_THROW(run_decay(Config::parse("n = 24\nu = 8\nv = 16\nb = 17\n"), Seed::from_u64(5), 1000, 1), Error);
}

TEST(Jump, SummaryCounts) {
  Parameters p;
  p.n = 12;
  p.u = 4;
  p.v = 4;
  p.w = 12;
  const JumpSummary s = jump_summary(p, 64, 11, Seed::from_u64(2), 100, 2);
  EXPECT_EQ(s.guesses, 6400u);
  EXPECT_DOUBLE_EQ(s.expected_rate, 1.0 / 16);
  EXPECT_LT(std::abs(s.z), 4.0);
}

TEST(Codec, WarmupTrialPasses) {
  Parameters p;
  p.n = 12;
  p.u = 4;
  p.v = 8;
  p.w = 16;
  p.m = 2;
  p.q = 8;
  p.s = memory_for_blocks(p, 4);
  std::size_t qualified = 0;
  for (std::uint64_t t = 0; t < 20; ++t) {
    const CodecTrial r = warmup_trial(p, 4, 1, Seed::from_u64(t));
    if (!r.qualified) continue;
    ++qualified;
    EXPECT_TRUE(r.pass()) << t;
    EXPECT_GE(r.intersect, 1u);
  }
  EXPECT_GT(qualified, 10u);
}

TEST(Codec, EnumerativeTrialPasses) {
  Parameters p;
  p.n = 12;
  p.u = 4;
  p.v = 4;
  p.w = 12;
  p.m = 2;
  p.q = 4;
  p.s = memory_for_blocks(p, 2);
  EnumerativeOptions opts;
  opts.require_bound_precondition = false;
  StrategyConfig sc;
  sc.name = "token";
  for (std::uint64_t t = 0; t < 10; ++t) {
    const CodecTrial r = enumerative_trial(p, sc, opts, Seed::from_u64(t));
    if (!r.qualified) continue;
    EXPECT_TRUE(r.pass()) << t;
    EXPECT_LE(r.intersect, r.reachable);
  }
}

TEST(Codec, CountingFamily) {
  Parameters p;
  p.n = 8;
  p.u = 3;
  p.v = 2;
  p.w = 2;
  p.m = 1;
  p.q = 2;
  p.s = memory_for_blocks(p, 2);
  const CountingResult r = warmup_counting_check(p, Seed::from_u64(1), 4);
  EXPECT_EQ(r.messages, 256u);
  EXPECT_TRUE(r.pass);
  EXPECT_GE(r.max_len, 7u);
}

TEST(Codec, CompressCommandOutput) {
  const Config cfg = Config::parse("n = 12\nu = 4\nv = 8\nw = 16\nm = 2\nq = 8\nblocks_per_machine = 4\n");
  const ExperimentOutput out = run_compress(cfg, Scheme::warmup, Seed::from_u64(1), 10, 2);
  EXPECT_TRUE(out.passed) << out.csv;
  EXPECT_EQ(out.csv.substr(0, out.csv.find('\n')), "trial,intersect_size,blob_bits,bound_bits,pass,sub_seed");
  EXPECT_EQ(out.csv, run_compress(cfg, Scheme::warmup, Seed::from_u64(1), 10, 1).csv);
  EXPECT_THROW(run_compress(Config::parse("n = 24\nv = 8\nw = 16\nm = 2\nq = 8\n"), Scheme::warmup, Seed::from_u64(1), 1, 1),
               Error);
  EXPECT_THROW(run_compress(cfg, Scheme::enumerative, Seed::from_u64(1), 1, 1), Error);
}

TEST(Modes, OracleModeNames) {
  EXPECT_EQ(parse_oracle_mode("eager"), OracleMode::eager);
  EXPECT_EQ(parse_oracle_mode("keyed_hash"), OracleMode::keyed_hash);
  EXPECT_THROW(parse_oracle_mode("fast"), Error);
}
