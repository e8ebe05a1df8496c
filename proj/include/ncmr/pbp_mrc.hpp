#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ncmr/mrc_engine.hpp"
#include "ncmr/pbp.hpp"

namespace ncmr::pbp_mrc {

/// Blocking parameters: d = ceil(N_O^(1-eps)) lines per block, ell =
/// ceil(N_O^eps) blocks, lines padded so d*ell = t. N_O counts one word per
/// program line, N_I one word per assigned variable; budgets run against
/// N = N_O + N_I.
struct BlockParams {
  std::size_t n_o = 0;
  std::size_t n_i = 0;
  std::size_t d = 1;
  std::size_t ell = 1;
  std::size_t t = 1;
  std::size_t original_lines = 0;
  double epsilon = 0.5;

  std::size_t input_words() const { return n_o + n_i; }

  static BlockParams derive(std::size_t n_o, std::size_t n_i, double epsilon);
  /// Explicit blocking for tests; pads t up to d*ell.
  static BlockParams with_blocks(std::size_t original_lines, std::size_t n_i, std::size_t d,
                                 std::size_t ell);
};

/// Key channels (top byte of the engine key) used by the pipeline stages.
namespace channel {
constexpr std::uint8_t kLine = 1;     // <p; (x_ip, f_p, g_p)> packed in one word
constexpr std::uint8_t kAssign = 2;   // <i; (x_i, v_i)> packed in one word
constexpr std::uint8_t kBlock = 3;    // subprogram block reducers
constexpr std::uint8_t kVar = 4;      // per-variable reducers
constexpr std::uint8_t kYBlock = 5;   // prefix-sum blocks
constexpr std::uint8_t kZ = 6;        // single block-total reducer
constexpr std::uint8_t kRoute = 7;    // Lemma-7 routing reducers
constexpr std::uint8_t kRange = 8;    // split-range reducers
constexpr std::uint8_t kOut = 9;      // final composition reducer
}  // namespace channel

mrc::Key make_key(std::uint8_t channel, std::uint64_t index);
std::uint8_t channel_of(mrc::Key k);
std::uint64_t index_of(mrc::Key k);

struct EncodedPbp {
  mrc::Pairs line_pairs;    // padded to params.t lines
  mrc::Pairs assign_pairs;  // one per variable
  BlockParams params;
};

mrc::Pairs encode_lines(const Pbp& pbp, const BlockParams& params);
mrc::Pairs encode_assignment(const Assignment& a);

EncodedPbp encode(const Pbp& pbp, const Assignment& a, double epsilon,
                  std::optional<std::pair<std::size_t, std::size_t>> explicit_blocks = std::nullopt);

struct StageRun {
  mrc::Pairs pairs;
  std::size_t rounds = 0;
  mrc::BudgetReport report;
};

/// Decoded <i; (#P(x_i), i)> record.
struct OccurrenceCount {
  std::uint32_t var = 0;
  std::uint64_t count = 0;
  friend bool operator==(const OccurrenceCount&, const OccurrenceCount&) = default;
};

/// #P(x_i): the number of subprogram blocks mentioning x_i; 2 rounds.
StageRun count_occurrences(const mrc::Pairs& line_pairs, const BlockParams& params);
std::vector<OccurrenceCount> decode_counts(const mrc::Pairs& pairs);

/// Lemma-4 cross-check: the same counts via the literal one-step Sum-CRCW
/// machine routed through the technical tool.
std::vector<OccurrenceCount> count_occurrences_via_crcw(const mrc::Pairs& line_pairs,
                                                        const BlockParams& params,
                                                        const mrc::Budget& budget);

/// Prefix sums y_i of the counts in exactly 3 rounds.
StageRun mr_prefix_sums(const mrc::Pairs& count_pairs, const BlockParams& params);
/// Decoded <i; y_i> records, index -> running sum.
std::vector<std::pair<std::uint32_t, std::uint64_t>> decode_prefix_sums(const mrc::Pairs& pairs);

/// sigma_0 = -1, sigma_1..sigma_{ell-1}, sigma_ell = n-1.
struct SplitValues {
  std::vector<std::int64_t> sigma;
};

struct SplitRun {
  SplitValues splits;
  std::size_t rounds = 0;
};

SplitRun compute_split_values(const mrc::Pairs& y_pairs, const BlockParams& params);

/// Decoded alpha_q triple: first-occurrence line, variable, bit.
struct AlphaEntry {
  std::uint64_t block = 0;
  std::uint64_t first_line = 0;
  std::uint32_t var = 0;
  std::uint8_t bit = 0;
  friend bool operator==(const AlphaEntry&, const AlphaEntry&) = default;
  friend auto operator<=>(const AlphaEntry&, const AlphaEntry&) = default;
};

/// Lemma 7: routes lines and assignment blocks through the split ranges and
/// emits the per-block partial assignments alpha_q; 2 rounds.
StageRun distribute_assignments(const mrc::Pairs& line_pairs, const mrc::Pairs& assign_pairs,
                                const SplitValues& splits, const BlockParams& params);
std::vector<AlphaEntry> decode_alphas(const mrc::Pairs& pairs);

/// Lemma 3: per-block action tables, then one reducer composes them;
/// 2 rounds. Returns the accept bit.
struct EvaluateRun {
  std::uint8_t bit = 0;
  std::size_t rounds = 0;
};
EvaluateRun evaluate_blocks(const mrc::Pairs& line_pairs, const mrc::Pairs& alpha_pairs,
                            const Pbp& pbp, const BlockParams& params);

struct StageRounds {
  std::string name;
  std::size_t rounds = 0;
};

struct Nc1Result {
  std::uint8_t bit = 0;
  mrc::BudgetReport report;
  std::vector<StageRounds> stages;
  std::size_t total_rounds = 0;
  BlockParams params;
  std::vector<mrc::Pairs> round_outputs;  // when options.capture_round_outputs
};

/// Fixed round count of the NC1 pipeline (all stages).
constexpr std::size_t kNc1PipelineRounds = 10;

Nc1Result run_nc1_pipeline(const Circuit& c, const Assignment& a, double epsilon,
                           double c_space = mrc::Budget::kDefaultSpaceConstant,
                           double c_total = mrc::Budget::kDefaultTotalConstant,
                           mrc::ExecOptions options = {});

/// The ten engine rounds of the pipeline, for composition and testing.
std::vector<mrc::RoundProgram> build_nc1_program(const Pbp& pbp, const BlockParams& params);

/// Round builders, reused by the circuit pipeline for its Lemma 4-6 stages.
namespace rounds {

/// Maps a pair to the (block, variable) mention it contributes, if any.
using MentionExtractor =
    std::function<std::optional<std::pair<std::uint64_t, std::uint32_t>>(const mrc::KeyValuePair&)>;

MentionExtractor line_mentions(const BlockParams& params);

mrc::RoundProgram count_mentions(const BlockParams& params, MentionExtractor extractor = {});
mrc::RoundProgram count_markers();
mrc::RoundProgram psum_local(const BlockParams& params, std::size_t n);
mrc::RoundProgram psum_totals(const BlockParams& params, std::size_t n);
mrc::RoundProgram psum_offsets();
mrc::RoundProgram split_detect(const BlockParams& params, std::size_t n);
mrc::RoundProgram route_tag(const BlockParams& params, std::size_t n);
mrc::RoundProgram route_match();
mrc::RoundProgram block_tables(const BlockParams& params, std::uint32_t width);
mrc::RoundProgram compose_tables(const BlockParams& params, std::uint32_t width,
                                 std::vector<std::uint32_t> accept_ranks);

}  // namespace rounds

/// Value-tag words shared with the circuit pipeline's composed rounds.
/// The crcw_to_mrc simulation owns tags below 32.
namespace tags {
constexpr mrc::Word kSigma = 42;         // [t, q, sigma+1]
constexpr mrc::Word kSplit = 43;         // [t, q, sigma+1] broadcast copy
constexpr mrc::Word kAssignAt = 45;      // [t, var, bit]
constexpr mrc::Word kAssignTagged = 47;  // [t, range_q, var, bit]
}  // namespace tags

/// Splits encoded as the sigma pairs emitted by split_detect.
mrc::Pairs encode_splits(const SplitValues& splits);

}  // namespace ncmr::pbp_mrc
