#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ncmr/circuit.hpp"  // Error types

namespace ncmr::crcw {

using Reg = std::int64_t;

struct Write {
  std::size_t reg = 0;
  Reg addend = 0;
};

/// Register accessor handed to step functions; direct execution backs it
/// with the full pre-step snapshot, the MapReduce simulation with only the
/// registers the step declared it reads.
using RegView = std::function<Reg(std::size_t)>;

/// One synchronous step. `reads(p)` declares which registers processor p
/// inspects (a bounded constant count); `compute(p, view)` may read exactly
/// those and returns the writes, which are summed per register at the step
/// barrier.
struct Step {
  std::function<std::vector<std::size_t>(std::size_t)> reads;
  std::function<std::vector<Write>(std::size_t, const RegView&)> compute;
};

struct SumCrcwMachine {
  std::size_t processors = 0;
  std::size_t registers = 0;
  std::vector<Step> steps;
  /// Optional halt: processors vote by writing nonzero; the machine stops
  /// after the step in which this register becomes nonzero.
  std::optional<std::size_t> halt_register;

  /// Largest read set any processor declares in any step.
  std::size_t max_reads_per_step() const;
};

struct CrcwTraceStep {
  std::size_t step = 0;
  std::vector<Write> deltas;  // summed per register, nonzero only
};

struct CrcwRunOptions {
  bool record_trace = false;
};

struct CrcwRunResult {
  std::vector<Reg> registers;
  std::size_t steps_executed = 0;
  std::vector<CrcwTraceStep> trace;
};

CrcwRunResult run_crcw(const SumCrcwMachine& m, const std::vector<Reg>& preload,
                       CrcwRunOptions options = {});

/// Lemma-10 machine: prefix sums of q numbers (q padded to a power of two)
/// in exactly 2 synchronous steps with P <= c*q*log q, M <= c*q.
struct PrefixSumsMachine {
  SumCrcwMachine machine;
  std::size_t q = 0;         // original length
  std::size_t q_pad = 0;     // padded to a power of two
  std::size_t input_base = 0;
  std::size_t output_base = 0;
  /// Register holding the dyadic block sum s_i(j).
  std::size_t block_sum_reg(std::size_t i, std::size_t j) const;

 private:
  friend PrefixSumsMachine build_prefix_sums_machine(std::size_t q);
  std::vector<std::size_t> level_base_;
};

PrefixSumsMachine build_prefix_sums_machine(std::size_t q);

std::vector<Reg> crcw_prefix_sums(const std::vector<Reg>& x);

/// Lemma-11 machine: sorts a set of distinct integers from {1..D} in a
/// fixed constant number of steps (5).
struct SortMachine {
  SumCrcwMachine machine;
  std::size_t domain = 0;     // D
  std::size_t count = 0;      // |I|
  std::size_t input_base = 0;
  std::size_t output_base = 0;
};

SortMachine build_sort_machine(const std::vector<std::uint64_t>& values, std::size_t domain);

std::vector<std::uint64_t> crcw_sort(const std::vector<std::uint64_t>& values, std::size_t domain);

/// Step count of the sort machine, a constant by Lemma 11.
constexpr std::size_t kSortSteps = 5;
constexpr std::size_t kPrefixSumsSteps = 2;

}  // namespace ncmr::crcw
