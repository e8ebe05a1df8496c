#include <doctest.h>

#include <map>
#include <random>

#include "ncmr/mrc_engine.hpp"

using namespace ncmr;
using namespace ncmr::mrc;

namespace {

Budget roomy_budget(std::size_t n) { return Budget(0.5, n, 1e9, 1e18); }

Pairs random_pairs(std::mt19937_64& rng, std::size_t count, std::size_t key_space) {
  Pairs pairs;
  for (std::size_t i = 0; i < count; ++i)
    pairs.push_back({rng() % key_space, {rng() % 16, rng() % 4}});
  return pairs;
}

}  // namespace

TEST_CASE("shuffle groups by key with canonical value order") {
  Pairs in = {{1, {10}}, {0, {11}}, {1, {9}}};
  auto groups = shuffle(in);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].first == 0);
  CHECK(groups[0].second == std::vector<std::vector<Word>>{{11}});
  CHECK(groups[1].first == 1);
  CHECK(groups[1].second == std::vector<std::vector<Word>>{{9}, {10}});

  CHECK(shuffle({}).empty());
}

TEST_CASE("shuffle preserves the multiset exactly") {
  std::mt19937_64 rng(7);
  Pairs in = random_pairs(rng, 10000, 64);
  auto groups = shuffle(in);
  Pairs flattened;
  for (auto& [k, vals] : groups)
    for (auto& v : vals) flattened.push_back({k, v});
  Pairs expect = in;
  std::sort(expect.begin(), expect.end());
  std::sort(flattened.begin(), flattened.end());
  CHECK(flattened == expect);
}

TEST_CASE("identity round echoes its input") {
  std::mt19937_64 rng(8);
  Pairs in = random_pairs(rng, 100, 8);
  std::vector<RoundProgram> program = {identity_round()};
  auto result = run_program(program, in, roomy_budget(words_of(in)));
  Pairs out = result.output;
  Pairs expect = in;
  std::sort(out.begin(), out.end());
  std::sort(expect.begin(), expect.end());
  CHECK(out == expect);
  CHECK(result.report.rounds_executed() == 1);
  CHECK(result.report.clean());
}

TEST_CASE("adversarial fan-in violates the reducer budget in strict mode") {
  std::size_t n = 64;
  Pairs in;
  for (std::size_t i = 0; i < n; ++i) in.push_back({i, {i}});
  RoundProgram fan = {
      [n](const KeyValuePair& p) {
        Pairs out;
        for (std::size_t i = 0; i < n; ++i) out.push_back({0, p.value});
        return out;
      },
      identity_round().reducer,
  };
  Budget tight(0.5, words_of(in));
  CHECK_THROWS_AS((void)run_program(std::vector<RoundProgram>{fan}, in, tight,
                                    {.mode = BudgetMode::Strict}),
                  BudgetViolationError);

  auto advisory = run_program(std::vector<RoundProgram>{fan}, in, tight,
                              {.mode = BudgetMode::Advisory});
  CHECK(!advisory.report.clean());
  bool saw_reducer_in = false;
  for (const auto& v : advisory.report.violations)
    if (v.kind == "reducer input words") saw_reducer_in = true;
  CHECK(saw_reducer_in);
}

TEST_CASE("word count program vs sequential frequency oracle") {
  // keys are words; one round of counting
  std::mt19937_64 rng(9);
  std::vector<std::uint64_t> text;
  for (int i = 0; i < 500; ++i) text.push_back(rng() % 23);

  Pairs in;
  for (std::size_t i = 0; i < text.size(); ++i) in.push_back({i, {text[i]}});
  RoundProgram count = {
      [](const KeyValuePair& p) { return Pairs{{p.value[0], {1}}}; },
      [](Key k, const std::vector<std::vector<Word>>& vs) {
        return Pairs{{k, {static_cast<Word>(vs.size())}}};
      },
  };
  auto result = run_program(std::vector<RoundProgram>{count}, in, roomy_budget(words_of(in)));

  std::map<std::uint64_t, std::uint64_t> expect;
  for (std::uint64_t w : text) expect[w]++;
  REQUIRE(result.output.size() == expect.size());
  for (const KeyValuePair& p : result.output) CHECK(p.value[0] == expect[p.key]);
}

TEST_CASE("check_budget boundary and zero cases") {
  Budget b(0.5, 256, 1.0, 1.0);
  BudgetReport r;
  r.rounds.push_back({0, 0, 0, 0, 0, 0});
  CHECK(check_budget(r, b).empty());

  // measured == limit passes (inclusive limits)
  RoundMetrics at_limit{1, 1, b.reducer_limit(), b.reducer_limit(), b.reducer_limit(),
                        b.total_limit()};
  r.rounds.push_back(at_limit);
  CHECK(check_budget(r, b).empty());

  RoundMetrics over{2, 1, b.reducer_limit() + 1, 0, 0, b.total_limit() + 1};
  r.rounds.push_back(over);
  auto v = check_budget(r, b);
  REQUIRE(v.size() == 2);
  CHECK(v[0].kind == "reducer input words");
  CHECK(v[1].kind == "total shuffle words");
}

TEST_CASE("check_budget agrees with an independent checker on random reports") {
  std::mt19937_64 rng(10);
  Budget b(0.3, 100, 2.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    BudgetReport r;
    RoundMetrics m;
    m.round = 0;
    m.max_mapper_out_words = rng() % 200;
    m.max_reducer_in_words = rng() % 200;
    m.max_reducer_out_words = rng() % 200;
    m.shuffle_words = rng() % 10000;
    r.rounds.push_back(m);

    // independent re-derivation of the limits
    std::size_t rl = static_cast<std::size_t>(std::ceil(2.0 * std::pow(100.0, 0.7)));
    std::size_t tl = static_cast<std::size_t>(std::ceil(3.0 * std::pow(100.0, 1.4)));
    std::size_t expected = 0;
    if (m.max_mapper_out_words > rl) ++expected;
    if (m.max_reducer_in_words > rl) ++expected;
    if (m.max_reducer_out_words > rl) ++expected;
    if (m.shuffle_words > tl) ++expected;
    CHECK(check_budget(r, b).size() == expected);
  }
}

TEST_CASE("execution is deterministic across repeated runs") {
  std::mt19937_64 rng(11);
  Pairs in = random_pairs(rng, 200, 16);
  std::vector<RoundProgram> program = {identity_round(), identity_round()};
  auto r1 = run_program(program, in, roomy_budget(words_of(in)));
  auto r2 = run_program(program, in, roomy_budget(words_of(in)));
  Pairs a = r1.output, b = r2.output;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
  CHECK(r1.report.rounds.size() == r2.report.rounds.size());
  for (std::size_t i = 0; i < r1.report.rounds.size(); ++i) {
    CHECK(r1.report.rounds[i].shuffle_words == r2.report.rounds[i].shuffle_words);
    CHECK(r1.report.rounds[i].distinct_keys == r2.report.rounds[i].distinct_keys);
  }
}

TEST_CASE("order-insensitive reducers give identical output under seeded permutation") {
  std::mt19937_64 rng(12);
  Pairs in = random_pairs(rng, 300, 8);
  RoundProgram sum = {
      [](const KeyValuePair& p) { return Pairs{p}; },
      [](Key k, const std::vector<std::vector<Word>>& vs) {
        Word total = 0;
        for (const auto& v : vs) total += v[0];
        return Pairs{{k, {total}}};
      },
  };
  auto base = run_program(std::vector<RoundProgram>{sum}, in, roomy_budget(words_of(in)));
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExecOptions opt;
    opt.reducer_order_seed = seed;
    auto shuffled = run_program(std::vector<RoundProgram>{sum}, in, roomy_budget(words_of(in)), opt);
    Pairs a = base.output, b = shuffled.output;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
}

TEST_CASE("reducer emitting a foreign key is an error") {
  Pairs in = {{0, {1}}};
  RoundProgram bad = {
      [](const KeyValuePair& p) { return Pairs{p}; },
      [](Key, const std::vector<std::vector<Word>>&) { return Pairs{{99, {1}}}; },
  };
  CHECK_THROWS_WITH_AS((void)run_program(std::vector<RoundProgram>{bad}, in, roomy_budget(2)),
                       doctest::Contains("foreign key"), Error);
}

TEST_CASE("budget rejects out-of-range epsilon") {
  CHECK_THROWS_AS(Budget(0.0, 10), ValidationError);
  CHECK_THROWS_AS(Budget(0.6, 10), ValidationError);
  CHECK_NOTHROW(Budget(0.5, 10));
  CHECK_NOTHROW(Budget(0.1, 10));
}
