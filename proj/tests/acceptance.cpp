// Acceptance suite: one checkable criterion per function, each printing a
// single PASS/FAIL line. Run with no arguments for all criteria or with a
// criterion number (1-10) for one of them.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ncmr/circuit.hpp"
#include "ncmr/circuit_mrc.hpp"
#include "ncmr/crcw.hpp"
#include "ncmr/crcw_to_mrc.hpp"
#include "ncmr/mrc_engine.hpp"
#include "ncmr/pbp.hpp"
#include "ncmr/pbp_mrc.hpp"
#include "oracles.hpp"

using namespace ncmr;

namespace {

struct Failure {
  std::string what;
};

#define REQUIRE_THAT(cond, msg)                       \
  do {                                                \
    if (!(cond)) throw Failure{std::string(msg)};     \
  } while (0)

// ---- 1. Barrington equivalence ------------------------------------------

void criterion1() {
  std::mt19937_64 rng(1001);
  int built = 0;
  for (std::uint64_t seed = 0; built < 50; ++seed) {
    std::uint32_t n = 3 + seed % 6;        // 3..8
    std::uint32_t depth = 2 + seed % 5;    // 2..6
    if ((1u << depth) < n) continue;
    Circuit c = gen_random_dag(n, depth, seed);
    ++built;
    Pbp b = barrington_compile(c);
    REQUIRE_THAT(b.width == 5, "compiled width must be 5");
    REQUIRE_THAT(static_cast<double>(b.lines.size()) <= std::pow(4.0, depth_of(c)),
                 "length exceeds 4^depth");
    for (std::uint64_t bits = 0; bits < (1ull << n); ++bits) {
      Assignment a = oracles::assignment_from_bits(bits, n);
      REQUIRE_THAT(accepts(b, a) == eval_direct(c, a), "PBP verdict diverges from eval_direct");
    }
  }
  for (std::uint32_t n : {2u, 4u, 8u, 16u}) {
    Circuit c = gen_parity(n);
    Pbp b = barrington_compile(c);
    REQUIRE_THAT(b.width == 5, "parity width must be 5");
    REQUIRE_THAT(static_cast<double>(b.lines.size()) <= std::pow(4.0, depth_of(c)),
                 "parity length exceeds 4^depth");
    std::uint64_t cases = n <= 8 ? (1ull << n) : 1000;
    for (std::uint64_t i = 0; i < cases; ++i) {
      Assignment a = n <= 8 ? oracles::assignment_from_bits(i, n) : oracles::random_assignment(rng, n);
      REQUIRE_THAT(accepts(b, a) == eval_direct(c, a), "parity PBP diverges from eval_direct");
    }
  }
}

// ---- 2. NC1 pipeline, constant rounds ------------------------------------

void criterion2() {
  std::mt19937_64 rng(1002);
  std::set<std::size_t> round_counts;
  for (std::uint32_t n : {4u, 8u, 16u}) {
    std::uint32_t depth = n == 4 ? 3 : 4;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Circuit c = gen_random_dag(n, depth, seed);
      for (int trial = 0; trial < 3; ++trial) {
        Assignment a = oracles::random_assignment(rng, n);
        pbp_mrc::Nc1Result r = pbp_mrc::run_nc1_pipeline(c, a, 0.5);
        REQUIRE_THAT(r.bit == eval_direct(c, a), "pipeline verdict diverges from eval_direct");
        round_counts.insert(r.total_rounds);
      }
    }
  }
  REQUIRE_THAT(round_counts.size() == 1, "round count varies across inputs");
  REQUIRE_THAT(*round_counts.begin() == pbp_mrc::kNc1PipelineRounds,
               "round count differs from the fixed schedule");
}

// ---- 3. Budget adherence --------------------------------------------------

void criterion3() {
  std::mt19937_64 rng(1003);
  for (double eps : {0.5, 0.3}) {
    for (std::uint32_t n : {2u, 4u, 8u, 16u}) {
      Circuit c = gen_parity(n);
      Assignment a = oracles::random_assignment(rng, n);
      pbp_mrc::Nc1Result r = pbp_mrc::run_nc1_pipeline(c, a, eps);
      REQUIRE_THAT(r.report.clean(), "parity corpus run has budget violations");
    }
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Circuit c = gen_random_dag(6, 5, seed);
      Assignment a = oracles::random_assignment(rng, 6);
      pbp_mrc::Nc1Result r = pbp_mrc::run_nc1_pipeline(c, a, eps);
      REQUIRE_THAT(r.report.clean(), "random corpus run has budget violations");
    }
  }

  // accountant sensitivity: an adversarial fan-in round in the same engine
  std::size_t n = 64;
  mrc::Pairs in;
  for (std::size_t i = 0; i < n; ++i) in.push_back({i, {i}});
  mrc::RoundProgram fan = {
      [n](const mrc::KeyValuePair& p) {
        mrc::Pairs out;
        for (std::size_t i = 0; i < n; ++i) out.push_back({0, p.value});
        return out;
      },
      mrc::identity_round().reducer,
  };
  auto adv = mrc::run_program(std::vector<mrc::RoundProgram>{fan}, in,
                              mrc::Budget(0.5, mrc::words_of(in)),
                              {.mode = mrc::BudgetMode::Advisory});
  REQUIRE_THAT(!adv.report.clean(), "adversarial round must violate the budget");
}

// ---- 4. Lemma 10 kernel ----------------------------------------------------

void criterion4() {
  std::mt19937_64 rng(1004);
  for (std::size_t q : {8u, 16u, 64u, 256u}) {
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<crcw::Reg> x(q);
      for (crcw::Reg& v : x) v = static_cast<crcw::Reg>(rng() % 1000);
      auto pm = crcw::build_prefix_sums_machine(q);
      REQUIRE_THAT(pm.machine.steps.size() == 2, "prefix sums must take exactly 2 steps");
      auto run = crcw::run_crcw(pm.machine, x);
      REQUIRE_THAT(run.steps_executed == 2, "prefix sums executed a different step count");
      std::vector<crcw::Reg> got(q);
      for (std::size_t j = 0; j < q; ++j) got[j] = run.registers[pm.output_base + j];
      REQUIRE_THAT(got == oracles::sequential_prefix_sums(x), "prefix sums diverge from scans");
    }
  }
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<crcw::Reg> x(8);
    for (crcw::Reg& v : x) v = static_cast<crcw::Reg>(rng() % 100);
    auto pm = crcw::build_prefix_sums_machine(8);
    auto run = crcw::run_crcw(pm.machine, x);
    auto s = [&](std::size_t i, std::size_t j) { return run.registers[pm.block_sum_reg(i, j)]; };
    auto y = [&](std::size_t j) { return run.registers[pm.output_base + j]; };
    REQUIRE_THAT(y(7) == s(3, 0), "decomposition identity y7 = s3(0) fails");
    REQUIRE_THAT(y(6) == s(2, 0) + s(1, 2) + s(0, 6), "identity y6 = s2(0)+s1(2)+s0(6) fails");
  }
}

// ---- 5. Lemma 11 kernel ----------------------------------------------------

void criterion5() {
  std::mt19937_64 rng(1005);
  std::set<std::size_t> step_counts;
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t domain = 32 + rng() % 481;  // <= 512
    std::size_t count = 1 + rng() % std::min<std::size_t>(domain, 64);
    std::set<std::uint64_t> pick;
    while (pick.size() < count) pick.insert(1 + rng() % domain);
    std::vector<std::uint64_t> values(pick.begin(), pick.end());
    for (std::size_t i = values.size(); i > 1; --i) std::swap(values[i - 1], values[rng() % i]);

    auto sm = crcw::build_sort_machine(values, domain);
    auto run = crcw::run_crcw(sm.machine, std::vector<crcw::Reg>(values.begin(), values.end()));
    step_counts.insert(run.steps_executed);
    std::vector<std::uint64_t> got(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
      got[i] = static_cast<std::uint64_t>(run.registers[sm.output_base + i]);
    std::vector<std::uint64_t> want = values;
    std::sort(want.begin(), want.end());
    REQUIRE_THAT(got == want, "sort output diverges from the comparison sort");
  }
  REQUIRE_THAT(step_counts.size() == 1, "sort step count varies across runs");
}

// ---- 6. Technical tool -----------------------------------------------------

void criterion6() {
  std::mt19937_64 rng(1006);
  std::vector<std::pair<crcw::SumCrcwMachine, std::vector<crcw::Reg>>> corpus;

  auto pm8 = crcw::build_prefix_sums_machine(8);
  std::vector<crcw::Reg> x8(8);
  for (crcw::Reg& v : x8) v = static_cast<crcw::Reg>(rng() % 50);
  corpus.push_back({pm8.machine, x8});

  auto pm16 = crcw::build_prefix_sums_machine(16);
  std::vector<crcw::Reg> x16(16);
  for (crcw::Reg& v : x16) v = static_cast<crcw::Reg>(rng() % 50);
  corpus.push_back({pm16.machine, x16});

  auto sm = crcw::build_sort_machine({9, 2, 14, 5, 1, 11}, 16);
  corpus.push_back({sm.machine, {9, 2, 14, 5, 1, 11}});

  crcw::SumCrcwMachine inc;
  inc.processors = 40;
  inc.registers = 4;
  inc.steps = {{
      [](std::size_t) -> std::vector<std::size_t> { return {}; },
      [](std::size_t p, const crcw::RegView&) -> std::vector<crcw::Write> {
        return {{p % 4, static_cast<crcw::Reg>(p)}};
      },
  }};
  corpus.push_back({inc, {}});

  for (const auto& [machine, preload] : corpus) {
    auto direct = crcw::run_crcw(machine, preload);
    mrc::Budget budget(0.5, mrc::words_of(crcw_mrc::encode_machine_state(machine, preload)), 1e6,
                       1e15);
    auto sim = crcw_mrc::simulate_crcw(machine, preload, budget);
    REQUIRE_THAT(sim.registers == direct.registers, "simulated registers diverge from direct run");
  }

  // round scaling: constant when m covers the machine, predicted growth as m halves
  crcw::SumCrcwMachine rot;
  rot.processors = 32;
  rot.registers = 8;
  for (int t = 0; t < 2; ++t)
    rot.steps.push_back({
        [](std::size_t p) -> std::vector<std::size_t> { return {p % 8}; },
        [](std::size_t p, const crcw::RegView& reg) -> std::vector<crcw::Write> {
          return {{(p + 1) % 8, reg(p % 8)}};
        },
    });
  std::vector<crcw::Reg> preload = {1, 2, 3, 4, 5, 6, 7, 8};
  auto direct = crcw::run_crcw(rot, preload);
  mrc::Budget budget(0.5, mrc::words_of(crcw_mrc::encode_machine_state(rot, preload)), 1e6, 1e15);
  std::size_t max_pm = std::max(rot.processors, rot.registers);

  auto big = crcw_mrc::simulate_crcw(rot, preload, budget, crcw_mrc::SimulationPlan::with_fan_in(rot, 64));
  REQUIRE_THAT(big.rounds == 3 * rot.steps.size(), "rounds/T must be 3 when m covers max(P,M)");

  std::size_t prev = 0;
  for (std::size_t fan = 64; fan >= 2; fan /= 2) {
    std::size_t depth = 1, cover = fan;
    while (cover < max_pm) {
      cover *= fan;
      ++depth;
    }
    auto sim =
        crcw_mrc::simulate_crcw(rot, preload, budget, crcw_mrc::SimulationPlan::with_fan_in(rot, fan));
    REQUIRE_THAT(sim.registers == direct.registers, "halved-m simulation diverges");
    REQUIRE_THAT(sim.rounds >= prev, "rounds must grow monotonically as m halves");
    std::size_t predicted = rot.steps.size() * 3 * depth;
    std::size_t per_step = sim.rounds / rot.steps.size();
    std::size_t predicted_per_step = predicted / rot.steps.size();
    REQUIRE_THAT(per_step + 1 >= predicted_per_step && per_step <= predicted_per_step + 1,
                 "rounds per step stray from the predicted log_m factor");
    prev = sim.rounds;
  }
}

// ---- 7. NC pipeline round schedule ----------------------------------------

void criterion7() {
  std::set<std::size_t> sort_rounds;
  int circuits = 0;
  for (std::size_t s : {2u, 3u}) {
    for (std::size_t mult : {2u, 4u, 8u}) {
      std::size_t depth = mult * s;
      std::size_t per_combo = mult == 8 ? 2 : 4;  // 2*(4+4+2) = 20 circuits
      for (std::uint64_t seed = 0; seed < per_combo; ++seed) {
        std::uint32_t n = 3;
        Circuit c = gen_random_dag(n, static_cast<std::uint32_t>(depth), seed);
        ++circuits;
        std::size_t expected_phases = (depth + s - 1) / s;
        for (std::uint64_t bits = 0; bits < (1ull << n); ++bits) {
          Assignment a = oracles::assignment_from_bits(bits, n);
          circuit_mrc::NcResult r = circuit_mrc::run_nc_pipeline(
              c, a, 0.3, 0.1, s, circuit_mrc::LevelsMode::Oracle,
              mrc::Budget::kDefaultSpaceConstant, mrc::Budget::kDefaultTotalConstant,
              {.mode = mrc::BudgetMode::Advisory});
          REQUIRE_THAT(r.bit == eval_direct(c, a), "nc pipeline diverges from eval_direct");
          std::map<std::string, std::size_t> st;
          for (const auto& stage : r.stages) st[stage.name] = stage.rounds;
          sort_rounds.insert(st["sort"]);
          REQUIRE_THAT(st["construct"] == 1 + 2 * s, "construction stage is not 1+2s rounds");
          REQUIRE_THAT(st["evaluate"] == expected_phases, "evaluation stage is not ceil(depth/s)");
        }
      }
    }
  }
  REQUIRE_THAT(circuits == 20, "criterion must cover 20 circuits");
  REQUIRE_THAT(sort_rounds.size() == 1, "sort stage round count varies across inputs");
}

// ---- 8. Augmentation soundness --------------------------------------------

void criterion8() {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (std::size_t s : {2u, 3u}) {
      std::uint32_t n = 5;
      Circuit c = gen_random_dag(n, 8, seed);
      LevelMap lv = levels_direct(c);
      circuit_mrc::AugmentedCircuit aug = circuit_mrc::augment_jumping_edges(c, lv, s);
      REQUIRE_THAT(aug.circuit.size() <= 3 * aug.original_edges, "|E'| exceeds 3|E|");
      for (const auto& [u, v] : aug.circuit.edges()) {
        bool special = false;
        for (const auto& [d1, d2] : aug.special_edges)
          if (d1 == u && d2 == v) special = true;
        if (special) continue;
        REQUIRE_THAT(circuit_mrc::classify_edge(aug.levels[u], aug.levels[v], s).dums == 0,
                     "a jumping edge survived augmentation");
      }
      for (std::uint64_t bits = 0; bits < (1ull << n); ++bits) {
        Assignment a = oracles::assignment_from_bits(bits, n);
        REQUIRE_THAT(eval_direct(aug.circuit, a) == eval_direct(c, a),
                     "augmentation changed the function");
      }
    }
  }
}

// ---- 9. Order-insensitivity ------------------------------------------------

void criterion9() {
  Circuit c1 = gen_random_dag(5, 4, 3);
  Assignment a1 = {{1, 0, 1, 1, 0}};
  mrc::ExecOptions base_opt;
  base_opt.capture_round_outputs = true;
  pbp_mrc::Nc1Result base1 = pbp_mrc::run_nc1_pipeline(c1, a1, 0.5, mrc::Budget::kDefaultSpaceConstant,
                                                       mrc::Budget::kDefaultTotalConstant, base_opt);
  Circuit c2 = gen_random_dag(4, 6, 5);
  Assignment a2 = {{1, 0, 1, 1}};
  circuit_mrc::NcResult base2 = circuit_mrc::run_nc_pipeline(
      c2, a2, 0.3, 0.1, 2, circuit_mrc::LevelsMode::Oracle, mrc::Budget::kDefaultSpaceConstant,
      mrc::Budget::kDefaultTotalConstant, base_opt);

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    mrc::ExecOptions opt;
    opt.reducer_order_seed = seed;
    opt.capture_round_outputs = true;
    pbp_mrc::Nc1Result r1 = pbp_mrc::run_nc1_pipeline(c1, a1, 0.5, mrc::Budget::kDefaultSpaceConstant,
                                                      mrc::Budget::kDefaultTotalConstant, opt);
    REQUIRE_THAT(r1.bit == base1.bit, "nc1 verdict changed under reducer reordering");
    REQUIRE_THAT(r1.round_outputs == base1.round_outputs,
                 "nc1 per-round pair multisets changed under reducer reordering");

    circuit_mrc::NcResult r2 = circuit_mrc::run_nc_pipeline(
        c2, a2, 0.3, 0.1, 2, circuit_mrc::LevelsMode::Oracle, mrc::Budget::kDefaultSpaceConstant,
        mrc::Budget::kDefaultTotalConstant, opt);
    REQUIRE_THAT(r2.bit == base2.bit, "nc verdict changed under reducer reordering");
    REQUIRE_THAT(r2.round_outputs == base2.round_outputs,
                 "nc per-round pair multisets changed under reducer reordering");
  }
}

// ---- 10. Parameter gates ----------------------------------------------------

void criterion10() {
  Circuit c = gen_parity(4);
  Assignment a = {{1, 0, 0, 0}};

  bool nc_rejects_half = false;
  try {
    circuit_mrc::run_nc_pipeline(c, a, 0.5, 0.1, 2, circuit_mrc::LevelsMode::Oracle);
  } catch (const ValidationError&) {
    nc_rejects_half = true;
  }
  REQUIRE_THAT(nc_rejects_half, "nc pipeline must reject epsilon = 1/2");

  bool nc_rejects_alpha = false;
  try {
    circuit_mrc::run_nc_pipeline(c, a, 0.3, 0.4, 2, circuit_mrc::LevelsMode::Oracle);
  } catch (const ValidationError&) {
    nc_rejects_alpha = true;
  }
  REQUIRE_THAT(nc_rejects_alpha, "nc pipeline must reject alpha >= 1 - 2*eps");

  pbp_mrc::Nc1Result r = pbp_mrc::run_nc1_pipeline(c, a, 0.5);
  REQUIRE_THAT(r.bit == 1, "nc1 pipeline must accept epsilon = 1/2");
}

struct Criterion {
  int number;
  const char* title;
  std::function<void()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<Criterion> criteria = {
      {1, "Barrington equivalence (width 5, length <= 4^depth, truth tables)", criterion1},
      {2, "NC1 pipeline runs in one fixed round count R*", criterion2},
      {3, "NC1 budget adherence and accountant sensitivity", criterion3},
      {4, "prefix-sums kernel: 2 steps, scans, dyadic identities", criterion4},
      {5, "sort kernel: comparison-sort agreement, constant steps", criterion5},
      {6, "technical tool: bit-exact simulation, log_m round scaling", criterion6},
      {7, "NC pipeline stage schedule (sort const, 1+2s, ceil(depth/s))", criterion7},
      {8, "augmentation soundness (no jumping edges, <=3|E|, equivalence)", criterion8},
      {9, "order-insensitivity across seeded reducer permutations", criterion9},
      {10, "parameter gates (nc: eps<1/2, alpha<1-2eps; nc1: eps<=1/2)", criterion10},
  };

  int only = argc > 1 ? std::atoi(argv[1]) : 0;
  int failures = 0;
  for (const Criterion& cr : criteria) {
    if (only != 0 && cr.number != only) continue;
    auto start = std::chrono::steady_clock::now();
    std::string verdict = "PASS";
    std::string detail;
    try {
      cr.run();
    } catch (const Failure& f) {
      verdict = "FAIL";
      detail = f.what;
      ++failures;
    } catch (const std::exception& e) {
      verdict = "FAIL";
      detail = e.what();
      ++failures;
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] criterion %2d: %s (%.2fs)%s%s\n", verdict.c_str(), cr.number, cr.title, secs,
                detail.empty() ? "" : " -- ", detail.c_str());
  }
  return failures == 0 ? 0 : 1;
}
