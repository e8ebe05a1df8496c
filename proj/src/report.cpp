#include "ncmr/report.hpp"

#include <fstream>

#include <json.hpp>

namespace ncmr::report {

std::string render_jsonl(const mrc::BudgetReport& report,
                         const std::vector<pbp_mrc::StageRounds>& stages) {
  // Map each round index to its stage name by walking the breakdown.
  std::vector<std::string> stage_of(report.rounds.size(), "-");
  std::size_t next = 0;
  for (const pbp_mrc::StageRounds& st : stages)
    for (std::size_t i = 0; i < st.rounds && next < stage_of.size(); ++i) stage_of[next++] = st.name;

  std::string out;
  for (const mrc::RoundMetrics& m : report.rounds) {
    nlohmann::json rec;
    rec["stage"] = m.round < stage_of.size() ? stage_of[m.round] : "-";
    rec["round"] = m.round;
    rec["keys"] = m.distinct_keys;
    rec["max_in_words"] = m.max_reducer_in_words;
    rec["max_out_words"] = m.max_reducer_out_words;
    rec["shuffle_words"] = m.shuffle_words;
    std::string violation;
    for (const mrc::BudgetViolation& v : report.violations)
      if (v.round == m.round) violation = v.kind;
    rec["violation"] = violation;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open report file " + path);
  f << content;
}

}  // namespace ncmr::report
