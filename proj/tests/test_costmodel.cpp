#include <catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "coma/costmodel.hpp"

using namespace coma;

// Pinned model values; regenerating them means re-deriving from the profile
// constants by hand, never from this codebase.

TEST_CASE("encrypted-transport latency is affine in message size") {
  CostParams c1 = CostParams::coma1();
  CostParams c2 = CostParams::coma2();
  CHECK(t_comm_dcc(c2, 1024) == 37860);
  CHECK(t_comm_dcc(c1, 0) == 10492);
  CHECK(t_comm_dcc(c2, 0) == 20452);
  CHECK(t_comm_dcc(c1, 1024) == 10492 + 72 * 1024);
}

TEST_CASE("PRNG key-fill cycles round up against throughput") {
  CostParams c1 = CostParams::coma1();
  CostParams c2 = CostParams::coma2();
  CHECK(c_prng(c2) == 15);  // 960 bits at 64 bits/cycle
  CHECK(c_prng(c1) == 75);  // 960 bits at 12.8 bits/cycle
  c2.n = 4;
  c2.bw = 4;
  CHECK(c_prng(c2) == 1);  // 24 bits still cost a full cycle
  c2.n = 6;
  CHECK_THROWS_AS(c_prng(c2), ConfigError);
}

TEST_CASE("masked-transport init covers seed exchange plus first fill") {
  CostParams c1 = CostParams::coma1();
  CostParams c2 = CostParams::coma2();
  CHECK(lcc_init_cycles(c2) == 20739);
  CHECK(lcc_init_cycles(c1) == 11719);
  c2.c_byte = 0;
  CHECK(lcc_init_cycles(c2) == c2.c_fix + c_prng(c2));
}

TEST_CASE("masked-transport per-byte cost is an exact rational") {
  CostParams p = CostParams::coma2();
  CHECK(c_byte_lcc(p) == Ratio(9, 8));
  p.n = 32;
  CHECK(c_byte_lcc(p) == Ratio(5, 4));
  p.n = 8;
  CHECK(c_byte_lcc(p) == Ratio(2, 1));  // 16/n at n == bw
  p.n = 64;
  p.bw = 48;
  CHECK_THROWS_AS(c_byte_lcc(p), ConfigError);
  CHECK(Ratio(72, 64) == Ratio(9, 8));
}

TEST_CASE("epoch energy, gated and stalled regimes") {
  CostParams p = CostParams::coma2();  // refill 15, epoch 30 blocks * 9 cycles
  CHECK(e_lcc_uwc(p) == 15 * 254 + 255 * 110);
  CHECK(e_lcc_uwc(p) == 31860);
  CHECK(e_lcc(p) == Catch::Approx(31.86));

  SECTION("boundary: refill exactly fills the epoch") {
    p.p_refill = 270;
    CHECK(e_lcc_uwc(p) == 270 * 254);
  }
  SECTION("gated tail grows linearly in the epoch length") {
    std::uint64_t e30 = e_lcc_uwc(p);
    p.u_blocks = 60;
    CHECK(e_lcc_uwc(p) - e30 == 270 * 110);
  }
  SECTION("refill longer than the epoch charges the tail at PRNG power") {
    p.u_blocks = 1;  // 9 comm cycles < 15 refill cycles
    CHECK(e_lcc_uwc(p) == 9 * 254 + 6 * 144);
  }
}

TEST_CASE("masked-transport latency closed form") {
  CostParams p = CostParams::coma2();
  CHECK(lcc_comm_cycles(p, 0) == 0);
  CHECK(lcc_comm_cycles(p, 1) == 9);  // partial block occupies a full block
  CHECK(lcc_comm_cycles(p, 8) == 9);
  CHECK(lcc_comm_cycles(p, 16) == 18);
  // 512 blocks, 17 overlapped refreshes, no stall
  CHECK(lcc_comm_cycles(p, 4096) == 512 * 9);
  CHECK(lcc_total_cycles(p, 4096) == 20739 + 4608);

  SECTION("slow refill stalls each refresh") {
    p.p_refill = 500;  // epoch traffic is 270 cycles
    std::uint64_t bytes = 61 * 8;  // 61 blocks -> 3 epochs -> 2 refreshes
    CHECK(lcc_comm_cycles(p, bytes) == 61 * 9 + 2 * (500 - 270));
  }
}

TEST_CASE("masked transport wins past amortization, loses before it") {
  for (CostParams p : {CostParams::coma1(), CostParams::coma2()}) {
    INFO(p.profile);
    CHECK(lcc_total_cycles(p, 0) > t_comm_dcc(p, 0));
    for (std::uint64_t b : {512u, 4096u, 65536u})
      CHECK(lcc_total_cycles(p, b) < t_comm_dcc(p, b));
  }
}

TEST_CASE("profile crossover: computed break-even vs quoted figure") {
  CostParams c1 = CostParams::coma1();
  CostParams c2 = CostParams::coma2();
  Crossover x = crossover(c1, c2);
  CHECK(x.computed_bytes == 182);
  CHECK(x.quoted_bytes == 128);
  CHECK(x.discrepancy);
  CHECK(x.fast_start == "coma1");
  CHECK(x.slow_start == "coma2");

  // argument order does not matter
  Crossover y = crossover(c2, c1);
  CHECK(y.computed_bytes == 182);
  CHECK(y.fast_start == "coma1");

  // the break-even really is the smallest winning size
  for (std::uint64_t b = 0; b < 400; ++b) {
    bool lean_wins = t_comm_dcc(c2, b) < t_comm_dcc(c1, b);
    CHECK(lean_wins == (b >= x.computed_bytes));
  }

  CHECK_THROWS_AS(crossover(c1, c1), ConfigError);
}

TEST_CASE("sweep emits one dcc and one lcc row per profile and size") {
  std::vector<CostParams> profs{CostParams::coma1(), CostParams::coma2()};
  std::vector<SweepRow> rows = sweep(profs, {0, 16, 1024});
  REQUIRE(rows.size() == 12);
  std::string csv = sweep_csv(rows);
  CHECK(csv.rfind("profile,mode,bytes,cycles,energy\n", 0) == 0);
  CHECK(csv.find("coma2,dcc,1024,37860,19119.300\n") != std::string::npos);
  CHECK(csv.find("coma1,dcc,0,10492,") != std::string::npos);
  // lcc energy at 1024 B: 128 blocks at network power + 5 fills at PRNG power
  std::uint64_t e = 128 * 9 * 110 + 5 * 15 * 144;
  CHECK(lcc_energy_uwc(CostParams::coma2(), 1024) == e);
}

TEST_CASE("profiles load from JSON with per-field overrides") {
  nlohmann::json j = {{"base", "coma2"},
                      {"profile", "tuned"},
                      {"c_byte", 9},
                      {"prng_bits_per_cycle", {64, 5}},
                      {"u", 12},
                      {"p_l2_mw", 0.2}};
  CostParams p = params_from_json(j);
  CHECK(p.profile == "tuned");
  CHECK(p.c_fix == 20452);
  CHECK(p.c_byte == 9);
  CHECK(c_prng(p) == 75);
  CHECK(p.u_blocks == 12);
  CHECK(p.p_l2_uw == 200);
  CHECK(p.p_l1_uw == 110);

  CHECK_THROWS_AS(params_from_json({{"base", "coma9"}}), ConfigError);
  CHECK_THROWS_AS(params_from_json({{"base", "coma2"}, {"n", 48}}), ConfigError);
  CHECK_THROWS_AS(params_from_json({{"base", "coma2"}, {"c_byte", 0}}), ConfigError);

  std::string path = "costmodel_profiles_test.json";
  {
    std::ofstream out(path);
    out << R"({"profiles":[{"base":"coma1"},{"base":"coma2","profile":"lite"}]})";
  }
  std::vector<CostParams> loaded = load_profiles(path);
  std::remove(path.c_str());
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].profile == "coma1");
  CHECK(loaded[1].profile == "lite");
  CHECK(loaded[1].c_fix == 20452);
  CHECK_THROWS_AS(load_profiles("no_such_file.json"), ConfigError);
}

TEST_CASE("wall-clock conversion is reporting only") {
  CHECK(cycles_to_us(CostParams::coma2(), 1000000) == Catch::Approx(1180.0));
  CHECK(cycles_to_us(CostParams::coma1(), 1000000) == Catch::Approx(1970.0));
  CHECK(profile_by_name("coma1").c_byte == 72);
  CHECK_THROWS_AS(profile_by_name("x"), ConfigError);
}
