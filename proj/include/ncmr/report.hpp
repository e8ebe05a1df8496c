#pragma once

#include <string>
#include <vector>

#include "ncmr/mrc_engine.hpp"
#include "ncmr/pbp_mrc.hpp"

namespace ncmr::report {

/// One JSON record per line: stage, round, keys, max_in_words, max_out_words,
/// shuffle_words, violation. Stage names come from the breakdown; rounds
/// outside any stage are labeled "-".
std::string render_jsonl(const mrc::BudgetReport& report,
                         const std::vector<pbp_mrc::StageRounds>& stages);

void write_file(const std::string& path, const std::string& content);

}  // namespace ncmr::report
