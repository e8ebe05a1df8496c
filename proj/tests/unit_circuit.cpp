#include <doctest.h>

#include <random>

#include "ncmr/circuit.hpp"
#include "oracles.hpp"

using namespace ncmr;

TEST_CASE("parse smallest conjunction") {
  Circuit c = parse_circuit("input 0 0\ninput 1 1\nand 2 0 1\noutput 2\n");
  CHECK(c.num_inputs() == 2);
  CHECK(c.size() == 2);
  CHECK(c.output() == 2);
  CHECK(eval_direct(c, {{1, 1}}) == 1);
  CHECK(eval_direct(c, {{1, 0}}) == 0);
}

TEST_CASE("parser rejects malformed input") {
  CHECK_THROWS_WITH_AS(parse_circuit("input 0 0\nand 2 0 7\noutput 2\n"),
                       doctest::Contains("dangling edge"), ValidationError);
  CHECK_THROWS_AS(parse_circuit("input 0 0\nnot 1 0\n"), ParseError);          // no output
  CHECK_THROWS_AS(parse_circuit("input 0 0\nfoo 1 0\noutput 0\n"), ParseError);
  CHECK_THROWS_AS(parse_circuit("input 0 0\nand 1 0\noutput 1\n"), ParseError);  // arity
  CHECK_THROWS_AS(parse_circuit("input 0 x\noutput 0\n"), ParseError);
  // cycle between two id gates
  CHECK_THROWS_WITH_AS(parse_circuit("input 0 0\nid 1 2\nid 2 1\nand 3 0 1\noutput 3\n"),
                       doctest::Contains("cycle"), ValidationError);
  // a second sink
  CHECK_THROWS_WITH_AS(parse_circuit("input 0 0\nnot 1 0\nnot 2 0\noutput 1\n"),
                       doctest::Contains("sink"), ValidationError);
  // duplicate variable
  CHECK_THROWS_AS(parse_circuit("input 0 0\ninput 1 0\nand 2 0 1\noutput 2\n"), ValidationError);
}

TEST_CASE("serialize/parse round-trip preserves structure") {
  Circuit c = gen_parity(8);
  Circuit rt = parse_circuit(serialize_circuit(c));
  REQUIRE(rt.nodes().size() == c.nodes().size());
  REQUIRE(rt.size() == c.size());
  CHECK(rt.output() == c.output());
  for (const Node& nd : c.nodes()) {
    CHECK(rt.node(nd.id).kind == nd.kind);
    CHECK(rt.node(nd.id).var == nd.var);
    auto a = c.producers(nd.id);
    auto b = rt.producers(nd.id);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
}

TEST_CASE("eval_direct agrees with the recursive oracle exhaustively") {
  Circuit c = gen_random_dag(8, 6, 7);
  for (std::uint64_t bits = 0; bits < 256; ++bits) {
    Assignment a = oracles::assignment_from_bits(bits, 8);
    CHECK(eval_direct(c, a) == oracles::eval_recursive(c, a));
  }
}

TEST_CASE("parity gadget evaluates xor") {
  Circuit c2 = gen_parity(2);
  CHECK(eval_direct(c2, {{1, 1}}) == 0);
  CHECK(eval_direct(c2, {{0, 1}}) == 1);
  CHECK(eval_direct(c2, {{1, 0}}) == 1);
  CHECK(eval_direct(c2, {{0, 0}}) == 0);

  Circuit c4 = gen_parity(4);
  CHECK(eval_direct(c4, {{1, 0, 1, 1}}) == 1);

  Circuit c16 = gen_parity(16);
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    Assignment a = oracles::random_assignment(rng, 16);
    int ones = 0;
    for (std::uint8_t b : a.bits) ones += b;
    CHECK(eval_direct(c16, a) == ones % 2);
  }
}

TEST_CASE("levels of an id chain count down to the sink") {
  // input -> id -> id -> ... -> output, k id gates
  std::string text = "input 0 0\n";
  const int k = 9;
  for (int i = 1; i <= k; ++i)
    text += "id " + std::to_string(i) + " " + std::to_string(i - 1) + "\n";
  text += "output " + std::to_string(k) + "\n";
  Circuit c = parse_circuit(text);
  LevelMap lv = levels_direct(c);
  for (int i = 0; i <= k; ++i) CHECK(lv[i] == static_cast<std::uint32_t>(k - i));
  CHECK(depth_of(c) == k);
}

TEST_CASE("single-node circuit has level zero") {
  Circuit c = parse_circuit("input 0 0\noutput 0\n");
  CHECK(levels_direct(c)[0] == 0);
  CHECK(depth_of(c) == 0);
  CHECK(eval_direct(c, {{1}}) == 1);
}

TEST_CASE("levels match the longest-path oracle") {
  Circuit c = gen_random_dag(16, 10, 3);
  LevelMap got = levels_direct(c);
  LevelMap want = oracles::levels_longest_path(c);
  for (const Node& nd : c.nodes()) CHECK(got[nd.id] == want[nd.id]);
}

TEST_CASE("random dag generator is deterministic and honors its postconditions") {
  Circuit a = gen_random_dag(4, 3, 0);
  Circuit b = gen_random_dag(4, 3, 0);
  CHECK(serialize_circuit(a) == serialize_circuit(b));
  CHECK(depth_of(a) == 3);

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Circuit c = gen_random_dag(8, 5, seed);
    CHECK(depth_of(c) == 5);
    Circuit rt = parse_circuit(serialize_circuit(c));  // validates on construction
    CHECK(rt.size() == c.size());
  }
}

TEST_CASE("random dag generator reports infeasible shapes") {
  CHECK_THROWS_WITH_AS(gen_random_dag(8, 2, 1), doctest::Contains("infeasible"), ValidationError);
}

TEST_CASE("edges always point from higher to lower level") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Circuit c = gen_random_dag(6, 5, seed);
    LevelMap lv = levels_direct(c);
    for (const auto& [u, v] : c.edges()) CHECK(lv[u] > lv[v]);
  }
}

TEST_CASE("size equals the parser's edge count") {
  Circuit c = gen_parity(8);
  Circuit rt = parse_circuit(serialize_circuit(c));
  CHECK(c.size() == rt.size());
  std::size_t gate_edges = 0;
  for (const Node& nd : rt.nodes()) gate_edges += fan_in_of(nd.kind);
  CHECK(rt.size() == gate_edges);
}

TEST_CASE("and-tree accepts exactly the all-ones assignment") {
  for (std::uint32_t n : {1u, 3u, 5u, 8u}) {
    Circuit c = gen_and_tree(n);
    for (std::uint64_t bits = 0; bits < (1ull << n); ++bits) {
      Assignment a = oracles::assignment_from_bits(bits, n);
      CHECK(eval_direct(c, a) == (bits + 1 == (1ull << n) ? 1 : 0));
    }
  }
}

TEST_CASE("assignment parsing") {
  Assignment a = parse_assignment("1011\n", 4);
  CHECK(a.bits == std::vector<std::uint8_t>{1, 0, 1, 1});
  CHECK_THROWS_AS(parse_assignment("10", 4), ValidationError);
  CHECK_THROWS_AS(parse_assignment("10x1", 4), ParseError);
  CHECK(serialize_assignment(a) == "1011\n");
}
