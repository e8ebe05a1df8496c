#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ncmr/circuit.hpp"
#include "ncmr/mrc_engine.hpp"
#include "ncmr/pbp_mrc.hpp"

namespace ncmr::circuit_mrc {

/// Band/subcircuit parameters: s = ceil(alpha*log2(n)/log2(delta)) levels per
/// band (overridable at desk scale), beta = ceil(N^(1-eps-alpha)) nodes per
/// reducer, r = ceil(depth/s) evaluation phases. Requires 0 < eps < 1/2 and
/// 0 < alpha < 1 - 2*eps.
struct SubcircuitParams {
  double epsilon = 0.3;
  double alpha = 0.1;
  std::size_t delta = 2;  // measured max degree, floored at 2
  std::size_t s = 1;
  std::size_t beta = 1;
  std::size_t r = 1;
  std::size_t depth = 0;
  std::size_t n = 0;        // input variables
  std::size_t n_o = 0;      // |V| + |E| encoding words
  std::size_t n_i = 0;      // n assignment words
  std::size_t num_nodes = 0;

  std::size_t input_words() const { return n_o + n_i; }
  /// Band boundary level L_i = i*s.
  std::size_t boundary(std::size_t i) const { return i * s; }

  static SubcircuitParams derive(const Circuit& c, double epsilon, double alpha,
                                 std::optional<std::size_t> s_override = std::nullopt);
};

/// How an edge (u producer, v consumer) interacts with the band boundaries:
/// 0 dums (band-aligned), 1 dum, or 2 dums with the middle edge special.
struct EdgeSplit {
  int dums = 0;
  std::uint32_t upper = 0;  // level of dum_1, adjacent to the producer
  std::uint32_t lower = 0;  // level of dum_2, adjacent to the consumer
};

EdgeSplit classify_edge(std::uint32_t level_u, std::uint32_t level_v, std::size_t s);

/// Host-level augmentation: subdivides every jumping edge with Id nodes at
/// band boundaries. `levels` maps the new nodes to their assigned boundary
/// levels (the original nodes keep theirs).
struct AugmentedCircuit {
  Circuit circuit;
  LevelMap levels;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> special_edges;  // (dum1, dum2)
  std::size_t original_edges = 0;
};

AugmentedCircuit augment_jumping_edges(const Circuit& c, const LevelMap& levels, std::size_t s);

enum class LevelsMode { Mr, Oracle };

struct LevelsRun {
  LevelMap levels;
  std::size_t rounds = 0;
};

/// Frontier max-relaxation from the sink; Theta(depth) rounds.
LevelsRun mr_compute_levels(const Circuit& c);

struct SortRun {
  std::vector<std::uint64_t> rank_of_id;  // node id -> rank, level-major order
  std::size_t rounds = 0;
};

/// Sorting-index sort via the simulated Lemma-11 machine; constant rounds.
SortRun mr_sort_by_level(const Circuit& c, const LevelMap& levels, double epsilon,
                         double c_space = mrc::Budget::kDefaultSpaceConstant,
                         double c_total = mrc::Budget::kDefaultTotalConstant);

struct AnnotatedInput {
  std::uint64_t rank = 0;
  std::uint32_t level = 0;
  std::uint32_t var = 0;
  std::uint8_t bit = 0;
  friend auto operator<=>(const AnnotatedInput&, const AnnotatedInput&) = default;
};

struct DistributeRun {
  std::vector<AnnotatedInput> inputs;
  std::size_t rounds = 0;
};

/// Lemma 4-7 machinery over input-node mentions: every input node ends up
/// annotated with its assigned bit.
DistributeRun distribute_circuit_input(const Circuit& c, const Assignment& a, double epsilon);

struct ConeRecord {
  std::uint64_t root = 0;
  int dir = 0;  // 0 = down, 1 = up
  std::set<std::uint64_t> nodes;                           // ranks
  std::set<std::pair<std::uint64_t, std::uint64_t>> edges;  // (rank_u, rank_v)
  friend auto operator<=>(const ConeRecord&, const ConeRecord&) = default;
};

struct BuildRun {
  std::vector<ConeRecord> cones;
  std::size_t rounds = 0;  // construction stage only: 1 + 2s
};

/// Runs the pipeline through the construction stage and extracts the
/// up/down-circuits owned by the reducers.
BuildRun build_updown_circuits(const Circuit& c, const Assignment& a, const SubcircuitParams& params,
                               LevelsMode levels_mode = LevelsMode::Oracle);

struct NcResult {
  std::uint8_t bit = 0;
  mrc::BudgetReport report;
  std::vector<pbp_mrc::StageRounds> stages;
  std::size_t total_rounds = 0;
  SubcircuitParams params;
  pbp_mrc::BlockParams block_params;
  std::vector<mrc::Pairs> round_outputs;
  /// Largest reducer-held store observed during construction/evaluation, in
  /// words (for the beta*Delta^s bound).
  std::size_t max_store_words = 0;
};

NcResult run_nc_pipeline(const Circuit& c, const Assignment& a, double epsilon, double alpha,
                         std::optional<std::size_t> s_override = std::nullopt,
                         LevelsMode levels_mode = LevelsMode::Mr,
                         double c_space = mrc::Budget::kDefaultSpaceConstant,
                         double c_total = mrc::Budget::kDefaultTotalConstant,
                         mrc::ExecOptions options = {});

/// Rounds of the embedded sorting-machine simulation (fixed tree depth 2).
constexpr std::size_t kSortSimRounds = 30;  // 5 steps * 3 * tree depth 2
constexpr std::size_t kSortJoinRounds = 2;
constexpr std::size_t kSortStageRounds = kSortSimRounds + kSortJoinRounds;
constexpr std::size_t kDistributeStageRounds = 8;
constexpr std::size_t kAugmentStageRounds = 1;

}  // namespace ncmr::circuit_mrc
