#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ncmr/circuit.hpp"  // Error types

namespace ncmr::mrc {

using Word = std::uint64_t;
using Key = std::uint64_t;

/// Keys namespace-partition on their top byte so independently written round
/// programs can share one key space without colliding.
constexpr Key make_key(std::uint8_t channel, std::uint64_t index) {
  return (static_cast<Key>(channel) << 56) | index;
}
constexpr std::uint8_t key_channel(Key k) { return static_cast<std::uint8_t>(k >> 56); }
constexpr std::uint64_t key_index(Key k) { return k & ((Key{1} << 56) - 1); }

struct KeyValuePair {
  Key key = 0;
  std::vector<Word> value;

  std::size_t words() const { return 1 + value.size(); }
  friend bool operator==(const KeyValuePair&, const KeyValuePair&) = default;
  friend auto operator<=>(const KeyValuePair&, const KeyValuePair&) = default;
};

using Pairs = std::vector<KeyValuePair>;

std::size_t words_of(const Pairs& pairs);

/// One round: a pure map function applied pair-wise and a pure reduce
/// function applied group-wise. Reducers must emit only their own key.
using Mapper = std::function<Pairs(const KeyValuePair&)>;
using Reducer = std::function<Pairs(Key, const std::vector<std::vector<Word>>&)>;

struct RoundProgram {
  Mapper mapper;
  Reducer reducer;
};

RoundProgram identity_round();

enum class BudgetMode { Strict, Advisory };

/// Space limits derived from epsilon and the fixed input size N:
/// per-primitive words <= ceil(c_space * N^(1-eps)),
/// per-round shuffle words <= ceil(c_total * N^(2(1-eps))).
struct Budget {
  double epsilon = 0.5;
  std::size_t input_words = 0;  // N, fixed at pipeline start
  double c_space = kDefaultSpaceConstant;
  double c_total = kDefaultTotalConstant;

  static constexpr double kDefaultSpaceConstant = 256.0;
  static constexpr double kDefaultTotalConstant = 512.0;

  Budget() = default;
  Budget(double eps, std::size_t n_words, double cs = kDefaultSpaceConstant,
         double ct = kDefaultTotalConstant);

  std::size_t reducer_limit() const;
  std::size_t total_limit() const;
};

struct RoundMetrics {
  std::size_t round = 0;
  std::size_t distinct_keys = 0;
  std::size_t max_reducer_in_words = 0;
  std::size_t max_reducer_out_words = 0;
  std::size_t max_mapper_out_words = 0;
  std::size_t shuffle_words = 0;
};

struct BudgetViolation {
  std::size_t round = 0;
  std::string kind;
  std::size_t measured = 0;
  std::size_t limit = 0;
  friend bool operator==(const BudgetViolation&, const BudgetViolation&) = default;
};

struct BudgetReport {
  std::vector<RoundMetrics> rounds;
  std::vector<BudgetViolation> violations;

  std::size_t rounds_executed() const { return rounds.size(); }
  bool clean() const { return violations.empty(); }
};

/// Limits are inclusive: measured <= limit passes.
std::vector<BudgetViolation> check_budget(const BudgetReport& report, const Budget& budget);

class BudgetViolationError : public Error {
 public:
  explicit BudgetViolationError(const BudgetViolation& v)
      : Error("round " + std::to_string(v.round) + ": " + v.kind + " = " + std::to_string(v.measured) +
              " exceeds limit " + std::to_string(v.limit)),
        violation_(v) {}
  const BudgetViolation& violation() const { return violation_; }

 private:
  BudgetViolation violation_;
};

struct ExecOptions {
  BudgetMode mode = BudgetMode::Strict;
  /// When set, each reducer's value list is permuted with this seed after
  /// canonical grouping (order-insensitivity audit).
  std::optional<std::uint64_t> reducer_order_seed;
  /// Capture each round's full output multiset (canonically sorted).
  bool capture_round_outputs = false;
};

/// Carries budget state across run_program calls so iterative drivers
/// accumulate one report per pipeline.
class BudgetAccountant {
 public:
  BudgetAccountant(Budget budget, ExecOptions options = {})
      : budget_(budget), options_(options) {}

  const Budget& budget() const { return budget_; }
  const ExecOptions& options() const { return options_; }
  const BudgetReport& report() const { return report_; }
  const std::vector<Pairs>& round_outputs() const { return round_outputs_; }
  std::size_t next_round() const { return report_.rounds.size(); }

  /// Records metrics; in strict mode throws BudgetViolationError on the
  /// first violated limit.
  void record(const RoundMetrics& m);
  void capture(const Pairs& sorted_output);

 private:
  Budget budget_;
  ExecOptions options_;
  BudgetReport report_;
  std::vector<Pairs> round_outputs_;
};

/// Grouping by key, keys ascending, values in canonical (lexicographic)
/// order; multiset cardinalities preserved.
std::vector<std::pair<Key, std::vector<std::vector<Word>>>> shuffle(const Pairs& pairs);

/// One map-shuffle-reduce round.
Pairs run_round(const RoundProgram& round, const Pairs& input, BudgetAccountant& acct);

Pairs run_program(std::span<const RoundProgram> program, Pairs input, BudgetAccountant& acct);

struct RunResult {
  Pairs output;
  BudgetReport report;
};

RunResult run_program(std::span<const RoundProgram> program, Pairs input, const Budget& budget,
                      ExecOptions options = {});

}  // namespace ncmr::mrc
