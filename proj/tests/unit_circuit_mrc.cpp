#include <doctest.h>

#include <random>
#include <set>

#include "ncmr/circuit_mrc.hpp"
#include "oracles.hpp"

using namespace ncmr;
using namespace ncmr::circuit_mrc;

namespace {

Circuit id_chain(std::uint32_t length) {
  std::string text = "input 0 0\n";
  for (std::uint32_t i = 1; i <= length; ++i)
    text += "id " + std::to_string(i) + " " + std::to_string(i - 1) + "\n";
  text += "output " + std::to_string(length) + "\n";
  return parse_circuit(text);
}

SubcircuitParams params_for(const Circuit& c, std::size_t s, double eps = 0.3) {
  return SubcircuitParams::derive(c, eps, 0.1, s);
}

}  // namespace

TEST_CASE("mr_compute_levels: id chain counts down") {
  Circuit c = id_chain(8);
  LevelsRun run = mr_compute_levels(c);
  for (std::uint32_t i = 0; i <= 8; ++i) CHECK(run.levels[i] == 8 - i);
  CHECK(run.rounds >= 8);
}

TEST_CASE("mr_compute_levels equals levels_direct on parity and random dags") {
  Circuit p = gen_parity(16);
  LevelsRun pr = mr_compute_levels(p);
  LevelMap want = levels_direct(p);
  for (const Node& nd : p.nodes()) CHECK(pr.levels[nd.id] == want[nd.id]);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Circuit c = gen_random_dag(6, 5, seed);
    LevelsRun run = mr_compute_levels(c);
    LevelMap direct = levels_direct(c);
    for (const Node& nd : c.nodes()) CHECK(run.levels[nd.id] == direct[nd.id]);
  }
}

TEST_CASE("mr_sort_by_level ranks nodes level-major") {
  // an already-sorted chain: ranks mirror positions
  Circuit chain = id_chain(5);
  LevelMap lv = levels_direct(chain);
  SortRun run = mr_sort_by_level(chain, lv, 0.3);
  CHECK(run.rounds == kSortStageRounds);
  // node id i has level 5-i; level-major ascending means output (level 0) first
  for (std::uint32_t id = 0; id <= 5; ++id) CHECK(run.rank_of_id[id] == 5 - id);

  // random dags: rank order equals a comparison sort of (level, id)
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Circuit c = gen_random_dag(6, 4, seed);
    LevelMap levels = levels_direct(c);
    SortRun sr = mr_sort_by_level(c, levels, 0.3);
    CHECK(sr.rounds == kSortStageRounds);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> order;  // (level, id)
    for (const Node& nd : c.nodes()) order.push_back({levels[nd.id], nd.id});
    std::sort(order.begin(), order.end());
    for (std::size_t r = 0; r < order.size(); ++r) CHECK(sr.rank_of_id[order[r].second] == r);
  }
}

TEST_CASE("classify_edge covers the band cases") {
  // s = 2: bands [0,2], [2,4], [4,6]
  CHECK(classify_edge(2, 1, 2).dums == 0);  // within a band
  CHECK(classify_edge(4, 2, 2).dums == 0);  // boundary to boundary, one band

  EdgeSplit one = classify_edge(3, 1, 2);  // spans exactly one boundary
  CHECK(one.dums == 1);
  CHECK(one.lower == 2);

  EdgeSplit two = classify_edge(6, 1, 2);  // spans three bands
  CHECK(two.dums == 2);
  CHECK(two.upper == 4);
  CHECK(two.lower == 2);
}

TEST_CASE("augmentation removes jumping edges, bounds growth, preserves meaning") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    Circuit c = gen_random_dag(6, 8, seed);
    LevelMap lv = levels_direct(c);
    for (std::size_t s : {2u, 3u}) {
      AugmentedCircuit aug = augment_jumping_edges(c, lv, s);
      CHECK(aug.circuit.size() <= 3 * aug.original_edges);
      // zero jumping edges under the assigned leveling
      for (const auto& [u, v] : aug.circuit.edges()) {
        EdgeSplit split = classify_edge(aug.levels[u], aug.levels[v], s);
        bool is_special = false;
        for (const auto& [d1, d2] : aug.special_edges)
          if (d1 == u && d2 == v) is_special = true;
        if (!is_special) CHECK(split.dums == 0);
      }
      // evaluation is unchanged, exhaustively
      for (std::uint64_t bits = 0; bits < 64; ++bits) {
        Assignment a = oracles::assignment_from_bits(bits, 6);
        CHECK(eval_direct(aug.circuit, a) == eval_direct(c, a));
      }
    }
  }
}

TEST_CASE("augmentation leaves within-band edges untouched") {
  Circuit c = gen_parity(4);  // depth 6
  LevelMap lv = levels_direct(c);
  AugmentedCircuit aug = augment_jumping_edges(c, lv, 6);  // one band: nothing jumps
  CHECK(aug.circuit.size() == c.size());
  CHECK(aug.special_edges.empty());
}

TEST_CASE("distribute_circuit_input annotates every input node") {
  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    Circuit c = gen_random_dag(5, 4, seed);
    Assignment a = oracles::random_assignment(rng, 5);
    DistributeRun run = distribute_circuit_input(c, a, 0.3);
    CHECK(run.rounds == kDistributeStageRounds);
    REQUIRE(run.inputs.size() == 5);
    std::set<std::uint32_t> vars;
    LevelMap lv = levels_direct(c);
    for (const AnnotatedInput& in : run.inputs) {
      vars.insert(in.var);
      CHECK(in.bit == a[in.var]);
      // level annotation matches the oracle for the node with that variable
      for (const Node& nd : c.nodes())
        if (nd.kind == NodeKind::Input && nd.var == in.var) CHECK(lv[nd.id] == in.level);
    }
    CHECK(vars.size() == 5);
  }
}

TEST_CASE("distribute_circuit_input on the single-node circuit") {
  Circuit c = parse_circuit("input 0 0\noutput 0\n");
  DistributeRun run = distribute_circuit_input(c, {{1}}, 0.3);
  REQUIRE(run.inputs.size() == 1);
  CHECK(run.inputs[0].bit == 1);
  CHECK(run.inputs[0].level == 0);
}

TEST_CASE("build_updown_circuits on an id chain splits at the middle boundary") {
  // chain of length 2s with the middle node on boundary L_1 = s
  const std::size_t s = 2;
  Circuit c = id_chain(2 * s);
  SubcircuitParams params = params_for(c, s);
  BuildRun run = build_updown_circuits(c, {{1}}, params);
  CHECK(run.rounds == 1 + 2 * s);

  // node id i has level 2s - i; the middle node (level s) is id s
  LevelMap lv = levels_direct(c);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> order;
  for (const Node& nd : c.nodes()) order.push_back({lv[nd.id], nd.id});
  std::sort(order.begin(), order.end());
  std::map<std::uint32_t, std::uint64_t> rank_of;
  for (std::size_t r = 0; r < order.size(); ++r) rank_of[order[r].second] = r;

  bool saw_middle_down = false, saw_middle_up = false;
  for (const ConeRecord& cone : run.cones) {
    if (cone.root != rank_of[s]) continue;
    if (cone.dir == 0) {
      saw_middle_down = true;
      // the upper half: ranks of ids 0..s
      std::set<std::uint64_t> want;
      for (std::uint32_t id = 0; id <= s; ++id) want.insert(rank_of[id]);
      CHECK(cone.nodes == want);
    } else {
      saw_middle_up = true;
      std::set<std::uint64_t> want;
      for (std::uint32_t id = s; id <= 2 * s; ++id) want.insert(rank_of[id]);
      CHECK(cone.nodes == want);
    }
  }
  CHECK(saw_middle_down);
  CHECK(saw_middle_up);
}

TEST_CASE("build_updown_circuits matches the sequential reachability oracle") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    for (std::size_t s : {2u, 3u}) {
      Circuit c = gen_random_dag(5, 2 * s, seed);
      SubcircuitParams params = params_for(c, s);
      Assignment a;
      a.bits.assign(5, 1);
      BuildRun run = build_updown_circuits(c, a, params);
      CHECK(run.rounds == 1 + 2 * s);

      // sequential oracle over the augmented, ranked circuit
      LevelMap lv = levels_direct(c);
      AugmentedCircuit aug = augment_jumping_edges(c, lv, s);
      std::vector<std::pair<std::uint32_t, std::uint32_t>> order;
      for (const Node& nd : c.nodes()) order.push_back({lv[nd.id], nd.id});
      std::sort(order.begin(), order.end());
      std::map<std::uint32_t, std::uint64_t> rank_of;
      for (std::size_t r = 0; r < order.size(); ++r) rank_of[order[r].second] = r;
      // dums get the construction's appended ranks; recover them by id order:
      // dum ids were allocated as id_base + 2e in edge order, ranks as |V| + 2e
      std::uint32_t id_base = 0;
      for (const Node& nd : c.nodes()) id_base = std::max(id_base, nd.id + 1);
      for (const Node& nd : aug.circuit.nodes())
        if (nd.id >= id_base)
          rank_of[nd.id] = c.nodes().size() + (nd.id - id_base);

      std::set<std::pair<std::uint64_t, std::uint64_t>> specials;
      for (const auto& [d1, d2] : aug.special_edges) specials.insert({rank_of[d1], rank_of[d2]});

      std::map<std::pair<std::uint64_t, int>, ConeRecord> got;
      for (const ConeRecord& cone : run.cones) got[{cone.root, cone.dir}] = cone;

      for (const Node& nd : aug.circuit.nodes()) {
        std::uint32_t level = aug.levels[nd.id];
        if (level % s != 0) continue;
        std::uint64_t root_rank = rank_of[nd.id];
        for (int dir : {0, 1}) {
          // oracle cone by BFS over the augmented circuit
          std::set<std::uint64_t> nodes = {root_rank};
          std::set<std::pair<std::uint64_t, std::uint64_t>> edges;
          std::vector<std::uint32_t> stack = {nd.id};
          while (!stack.empty()) {
            std::uint32_t x = stack.back();
            stack.pop_back();
            const auto& next = dir == 0 ? aug.circuit.producers(x) : aug.circuit.consumers(x);
            for (std::uint32_t w : next) {
              bool special = specials.count(dir == 0 ? std::make_pair(rank_of[w], rank_of[x])
                                                     : std::make_pair(rank_of[x], rank_of[w]));
              if (special) continue;
              bool in_band = dir == 0 ? aug.levels[w] <= level + s : aug.levels[w] + s >= level;
              if (!in_band) continue;
              edges.insert(dir == 0 ? std::make_pair(rank_of[w], rank_of[x])
                                    : std::make_pair(rank_of[x], rank_of[w]));
              if (nodes.insert(rank_of[w]).second) stack.push_back(w);
            }
          }
          REQUIRE(got.count({root_rank, dir}) == 1);
          const ConeRecord& cone = got[{root_rank, dir}];
          CHECK(cone.nodes == nodes);
          CHECK(cone.edges == edges);
        }
      }
    }
  }
}

TEST_CASE("nc pipeline: depth <= s evaluates in a single local phase") {
  Circuit c = gen_parity(4);  // depth 6
  SubcircuitParams params = params_for(c, 6);
  CHECK(params.r == 1);
  for (std::uint64_t bits = 0; bits < 16; ++bits) {
    Assignment a = oracles::assignment_from_bits(bits, 4);
    NcResult r = run_nc_pipeline(c, a, 0.3, 0.1, 6, LevelsMode::Oracle);
    CHECK(r.bit == eval_direct(c, a));
    CHECK(r.stages.back().rounds == 1);
  }
}

TEST_CASE("nc pipeline: id chain of depth 3s needs exactly 3 phases") {
  const std::size_t s = 2;
  Circuit c = id_chain(3 * s);
  for (std::uint8_t bit : {0, 1}) {
    Assignment a;
    a.bits = {bit};
    NcResult r = run_nc_pipeline(c, a, 0.3, 0.1, s, LevelsMode::Oracle);
    CHECK(r.bit == bit);
    CHECK(r.stages.back().rounds == 3);
  }
}

TEST_CASE("nc pipeline: stage round formulas hold exactly") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    for (std::size_t s : {2u, 3u}) {
      Circuit c = gen_random_dag(4, 2 * s, seed);
      Assignment a = oracles::assignment_from_bits(seed, 4);
      NcResult r = run_nc_pipeline(c, a, 0.3, 0.1, s, LevelsMode::Oracle,
                                   mrc::Budget::kDefaultSpaceConstant,
                                   mrc::Budget::kDefaultTotalConstant,
                                   {.mode = mrc::BudgetMode::Advisory});
      CHECK(r.bit == eval_direct(c, a));
      std::map<std::string, std::size_t> by_name;
      for (const auto& st : r.stages) by_name[st.name] = st.rounds;
      CHECK(by_name["levels"] == 0);  // oracle mode
      CHECK(by_name["sort"] == kSortStageRounds);
      CHECK(by_name["distribute"] == kDistributeStageRounds);
      CHECK(by_name["augment"] == kAugmentStageRounds);
      CHECK(by_name["construct"] == 1 + 2 * s);
      CHECK(by_name["evaluate"] == params_for(c, s).r);
    }
  }
}

TEST_CASE("nc pipeline equals eval_direct exhaustively on deep random dags") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const std::size_t s = 2;
    Circuit c = gen_random_dag(4, 4 * s, seed);
    for (std::uint64_t bits = 0; bits < 16; ++bits) {
      Assignment a = oracles::assignment_from_bits(bits, 4);
      NcResult r = run_nc_pipeline(c, a, 0.3, 0.1, s, LevelsMode::Oracle);
      CHECK(r.bit == eval_direct(c, a));
      CHECK(r.stages.back().rounds == 4);
    }
  }
}

TEST_CASE("nc pipeline with mr levels matches the oracle path") {
  Circuit c = gen_random_dag(4, 6, 5);
  Assignment a = {{1, 0, 1, 1}};
  NcResult mr = run_nc_pipeline(c, a, 0.3, 0.1, 2, LevelsMode::Mr);
  NcResult oracle = run_nc_pipeline(c, a, 0.3, 0.1, 2, LevelsMode::Oracle);
  CHECK(mr.bit == oracle.bit);
  CHECK(mr.bit == eval_direct(c, a));
  CHECK(mr.stages[0].rounds >= depth_of(c));
}

TEST_CASE("nc pipeline: single gate circuit") {
  Circuit c = parse_circuit("input 0 0\ninput 1 1\nor 2 0 1\noutput 2\n");
  for (std::uint64_t bits = 0; bits < 4; ++bits) {
    Assignment a = oracles::assignment_from_bits(bits, 2);
    NcResult r = run_nc_pipeline(c, a, 0.3, 0.1, 2, LevelsMode::Oracle);
    CHECK(r.bit == eval_direct(c, a));
    CHECK(r.stages.back().rounds == 1);
  }
}

TEST_CASE("nc pipeline: epsilon sweep gives identical verdicts within budgets") {
  Circuit c = gen_random_dag(4, 4, 9);
  Assignment a = {{1, 1, 0, 1}};
  std::set<std::uint8_t> bits;
  for (double eps : {0.2, 0.3, 0.4}) {
    NcResult r = run_nc_pipeline(c, a, eps, 0.1, 2, LevelsMode::Oracle);
    bits.insert(r.bit);
    CHECK(r.report.clean());
  }
  CHECK(bits.size() == 1);
  CHECK(*bits.begin() == eval_direct(c, a));
}

TEST_CASE("nc pipeline parameter gates") {
  Circuit c = gen_parity(4);
  Assignment a = {{1, 0, 0, 0}};
  CHECK_THROWS_WITH_AS(run_nc_pipeline(c, a, 0.5, 0.1, 2, LevelsMode::Oracle),
                       doctest::Contains("eps < 1/2"), ValidationError);
  CHECK_THROWS_WITH_AS(run_nc_pipeline(c, a, 0.3, 0.4, 2, LevelsMode::Oracle),
                       doctest::Contains("alpha"), ValidationError);
  CHECK_THROWS_AS(run_nc_pipeline(c, a, 0.3, 0.0, 2, LevelsMode::Oracle), ValidationError);
}

TEST_CASE("nc pipeline is order-insensitive under seeded reducer permutations") {
  Circuit c = gen_random_dag(3, 4, 2);
  Assignment a = {{1, 0, 1}};
  mrc::ExecOptions base_opt;
  base_opt.capture_round_outputs = true;
  NcResult base = run_nc_pipeline(c, a, 0.3, 0.1, 2, LevelsMode::Oracle,
                                  mrc::Budget::kDefaultSpaceConstant,
                                  mrc::Budget::kDefaultTotalConstant, base_opt);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    mrc::ExecOptions opt;
    opt.reducer_order_seed = seed;
    opt.capture_round_outputs = true;
    NcResult r = run_nc_pipeline(c, a, 0.3, 0.1, 2, LevelsMode::Oracle,
                                 mrc::Budget::kDefaultSpaceConstant,
                                 mrc::Budget::kDefaultTotalConstant, opt);
    CHECK(r.bit == base.bit);
    REQUIRE(r.round_outputs.size() == base.round_outputs.size());
    for (std::size_t i = 0; i < r.round_outputs.size(); ++i)
      CHECK(r.round_outputs[i] == base.round_outputs[i]);
  }
}

TEST_CASE("subcircuit size bound holds for constructed cones") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const std::size_t s = 2;
    Circuit c = gen_random_dag(5, 4, seed);
    SubcircuitParams params = params_for(c, s);
    Assignment a;
    a.bits.assign(5, 0);
    BuildRun run = build_updown_circuits(c, a, params);
    double bound = 0;
    for (std::size_t i = 1; i <= params.s; ++i) bound += std::pow(params.delta, i);
    for (const ConeRecord& cone : run.cones)
      CHECK(static_cast<double>(cone.edges.size()) <= bound);
  }
}
