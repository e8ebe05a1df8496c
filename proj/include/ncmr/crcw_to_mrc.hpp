#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ncmr/crcw.hpp"
#include "ncmr/mrc_engine.hpp"

namespace ncmr::crcw_mrc {

/// Routing plan for one machine: cells keyed 0..M-1, processors M..M+P-1,
/// and m-ary aggregation/broadcast trees above when a fan-in would exceed m.
/// Every PRAM step costs exactly 3 * tree_depth engine rounds.
struct SimulationPlan {
  std::size_t m = 0;           // per-reducer fan-in bound, in pairs
  std::size_t tree_depth = 1;  // ceil(log_m(max(P, M))), at least 1

  static SimulationPlan derive(const crcw::SumCrcwMachine& machine, const mrc::Budget& budget);
  static SimulationPlan with_fan_in(const crcw::SumCrcwMachine& machine, std::size_t m);
  /// Smallest fan-in whose tree has exactly `depth` levels.
  static SimulationPlan with_tree_depth(const crcw::SumCrcwMachine& machine, std::size_t depth);
};

struct SimulateResult {
  std::vector<crcw::Reg> registers;
  mrc::BudgetReport report;
  SimulationPlan plan;
  std::size_t rounds = 0;
  /// Set when (M+P)*log_{N^(1-eps)}(M+P) exceeds c_total*N^(2(1-eps)).
  bool hypothesis_warning = false;
};

/// Builds the per-round map/reduce functions realizing the machine.
std::vector<mrc::RoundProgram> build_simulation_program(const crcw::SumCrcwMachine& machine,
                                                        const SimulationPlan& plan);

mrc::Pairs encode_machine_state(const crcw::SumCrcwMachine& machine,
                                const std::vector<crcw::Reg>& preload);

SimulateResult simulate_crcw(const crcw::SumCrcwMachine& machine, const std::vector<crcw::Reg>& preload,
                             const mrc::Budget& budget,
                             std::optional<SimulationPlan> plan = std::nullopt,
                             mrc::ExecOptions options = {});

}  // namespace ncmr::crcw_mrc
