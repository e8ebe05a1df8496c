#include "ncmr/mrc_engine.hpp"

#include <algorithm>
#include <random>

namespace ncmr::mrc {

std::size_t words_of(const Pairs& pairs) {
  std::size_t w = 0;
  for (const KeyValuePair& p : pairs) w += p.words();
  return w;
}

RoundProgram identity_round() {
  return {
      [](const KeyValuePair& p) { return Pairs{p}; },
      [](Key k, const std::vector<std::vector<Word>>& values) {
        Pairs out;
        out.reserve(values.size());
        for (const auto& v : values) out.push_back({k, v});
        return out;
      },
  };
}

Budget::Budget(double eps, std::size_t n_words, double cs, double ct)
    : epsilon(eps), input_words(n_words), c_space(cs), c_total(ct) {
  if (!(epsilon > 0.0) || !(epsilon <= 0.5))
    throw ValidationError("epsilon must satisfy 0 < eps <= 1/2");
  if (c_space <= 0 || c_total <= 0) throw ValidationError("budget constants must be positive");
}

namespace {

std::size_t clamped_limit(double v) {
  constexpr double kMax = 9.0e18;  // below SIZE_MAX to survive the cast
  return v >= kMax ? static_cast<std::size_t>(kMax) : static_cast<std::size_t>(v);
}

}  // namespace

std::size_t Budget::reducer_limit() const {
  double n = static_cast<double>(input_words);
  return clamped_limit(std::ceil(c_space * std::pow(n, 1.0 - epsilon)));
}

std::size_t Budget::total_limit() const {
  double n = static_cast<double>(input_words);
  return clamped_limit(std::ceil(c_total * std::pow(n, 2.0 * (1.0 - epsilon))));
}

std::vector<BudgetViolation> check_budget(const BudgetReport& report, const Budget& budget) {
  std::vector<BudgetViolation> out;
  std::size_t rl = budget.reducer_limit();
  std::size_t tl = budget.total_limit();
  for (const RoundMetrics& m : report.rounds) {
    if (m.max_mapper_out_words > rl) out.push_back({m.round, "mapper output words", m.max_mapper_out_words, rl});
    if (m.max_reducer_in_words > rl) out.push_back({m.round, "reducer input words", m.max_reducer_in_words, rl});
    if (m.max_reducer_out_words > rl) out.push_back({m.round, "reducer output words", m.max_reducer_out_words, rl});
    if (m.shuffle_words > tl) out.push_back({m.round, "total shuffle words", m.shuffle_words, tl});
  }
  return out;
}

void BudgetAccountant::record(const RoundMetrics& m) {
  report_.rounds.push_back(m);
  BudgetReport single;
  single.rounds.push_back(m);
  for (const BudgetViolation& v : check_budget(single, budget_)) {
    report_.violations.push_back(v);
    if (options_.mode == BudgetMode::Strict) throw BudgetViolationError(v);
  }
}

void BudgetAccountant::capture(const Pairs& sorted_output) {
  if (options_.capture_round_outputs) round_outputs_.push_back(sorted_output);
}

std::vector<std::pair<Key, std::vector<std::vector<Word>>>> shuffle(const Pairs& pairs) {
  Pairs sorted = pairs;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<Key, std::vector<std::vector<Word>>>> groups;
  for (KeyValuePair& p : sorted) {
    if (groups.empty() || groups.back().first != p.key) groups.push_back({p.key, {}});
    groups.back().second.push_back(std::move(p.value));
  }
  return groups;
}

namespace {

// Deterministic Fisher-Yates; per-group seed mixes the key so different
// groups see different permutations.
void audit_permute(std::vector<std::vector<Word>>& values, std::uint64_t seed, Key key, std::size_t round) {
  std::mt19937_64 eng(seed ^ (0x9e3779b97f4a7c15ULL * (key + 1)) ^ (0xbf58476d1ce4e5b9ULL * (round + 1)));
  for (std::size_t i = values.size(); i > 1; --i)
    std::swap(values[i - 1], values[eng() % i]);
}

}  // namespace

Pairs run_round(const RoundProgram& round, const Pairs& input, BudgetAccountant& acct) {
  RoundMetrics m;
  m.round = acct.next_round();

  Pairs mapped;
  for (const KeyValuePair& p : input) {
    Pairs out = round.mapper(p);
    std::size_t w = words_of(out);
    m.max_mapper_out_words = std::max(m.max_mapper_out_words, w);
    m.shuffle_words += w;
    for (KeyValuePair& q : out) mapped.push_back(std::move(q));
  }

  auto groups = shuffle(mapped);
  m.distinct_keys = groups.size();

  Pairs output;
  for (auto& [key, values] : groups) {
    std::size_t in_words = 1;
    for (const auto& v : values) in_words += 1 + v.size();
    m.max_reducer_in_words = std::max(m.max_reducer_in_words, in_words);

    if (acct.options().reducer_order_seed)
      audit_permute(values, *acct.options().reducer_order_seed, key, m.round);

    Pairs out = round.reducer(key, values);
    for (const KeyValuePair& q : out)
      if (q.key != key)
        throw Error("reducer for key " + std::to_string(key) + " emitted foreign key " +
                    std::to_string(q.key));
    m.max_reducer_out_words = std::max(m.max_reducer_out_words, words_of(out));
    for (KeyValuePair& q : out) output.push_back(std::move(q));
  }

  acct.record(m);  // throws in strict mode on violation
  Pairs canon = output;
  std::sort(canon.begin(), canon.end());
  acct.capture(canon);
  return output;
}

Pairs run_program(std::span<const RoundProgram> program, Pairs input, BudgetAccountant& acct) {
  if (program.empty()) throw ValidationError("program must contain at least one round");
  for (const RoundProgram& r : program) input = run_round(r, input, acct);
  return input;
}

RunResult run_program(std::span<const RoundProgram> program, Pairs input, const Budget& budget,
                      ExecOptions options) {
  BudgetAccountant acct(budget, options);
  Pairs out = run_program(program, std::move(input), acct);
  return {std::move(out), acct.report()};
}

}  // namespace ncmr::mrc
