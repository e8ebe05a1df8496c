#include "ncmr/crcw_to_mrc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <set>
#include <memory>

namespace ncmr::crcw_mrc {

namespace {

using mrc::Key;
using mrc::KeyValuePair;
using mrc::Pairs;
using mrc::Word;

enum Tag : Word {
  kCell = 1,   // [tag, value]
  kToken = 2,  // [tag]
  kReq = 3,    // [tag, cell, from_level, from_group]
  kChild = 4,  // [tag, node_level, child_level, child_group]
  kAns = 5,    // [tag, cell, value, dest_level, dest_group]
  kAdd = 6,    // [tag, cell, addend, from_level, from_group]
};

Word enc_reg(crcw::Reg v) { return std::bit_cast<Word>(v); }
crcw::Reg dec_reg(Word w) { return std::bit_cast<crcw::Reg>(w); }

std::size_t tree_depth_for(std::size_t m, std::size_t max_pm) {
  std::size_t d = 1, cover = m;
  while (cover < max_pm) {
    cover *= m;
    ++d;
  }
  return d;
}

// Key geometry: cells, then processors, then the two tree families.
struct KeySpace {
  std::size_t cells = 0, procs = 0, m = 2, depth = 1, groups = 1;

  Key proc(std::size_t p) const { return cells + p; }
  // kind 0 = request/broadcast tree, 1 = write-aggregation tree
  Key tree(int kind, std::size_t c, std::size_t level, std::size_t group) const {
    Key base = cells + procs;
    return base + (((static_cast<Key>(kind) * (depth + 1) + level) * cells + c) * groups + group);
  }
  Key req_endpoint(std::size_t c, std::size_t level, std::size_t group) const {
    return level == 0 ? proc(group) : tree(0, c, level, group);
  }
};

}  // namespace

SimulationPlan SimulationPlan::with_fan_in(const crcw::SumCrcwMachine& machine, std::size_t m) {
  if (m < 2) throw ValidationError("simulation plan infeasible: fan-in bound m must be >= 2");
  SimulationPlan plan;
  plan.m = m;
  plan.tree_depth = tree_depth_for(m, std::max(machine.processors, machine.registers));
  return plan;
}

SimulationPlan SimulationPlan::derive(const crcw::SumCrcwMachine& machine, const mrc::Budget& budget) {
  // Routed pairs are at most 6 words; keep a full reducer clear of the limit.
  std::size_t m = budget.reducer_limit() / 8;
  return with_fan_in(machine, std::max<std::size_t>(m, 2));
}

SimulationPlan SimulationPlan::with_tree_depth(const crcw::SumCrcwMachine& machine, std::size_t depth) {
  if (depth < 1) throw ValidationError("tree depth must be >= 1");
  std::size_t max_pm = std::max(machine.processors, machine.registers);
  std::size_t m = 2;
  while (tree_depth_for(m, max_pm) > depth) ++m;
  SimulationPlan plan;
  plan.m = m;
  plan.tree_depth = depth;
  return plan;
}

mrc::Pairs encode_machine_state(const crcw::SumCrcwMachine& machine,
                                const std::vector<crcw::Reg>& preload) {
  if (preload.size() > machine.registers) throw ValidationError("preload exceeds register count");
  Pairs pairs;
  for (std::size_t c = 0; c < machine.registers; ++c) {
    crcw::Reg v = c < preload.size() ? preload[c] : 0;
    pairs.push_back({c, {kCell, enc_reg(v)}});
  }
  for (std::size_t p = 0; p < machine.processors; ++p)
    pairs.push_back({machine.registers + p, {kToken}});
  return pairs;
}

std::vector<mrc::RoundProgram> build_simulation_program(const crcw::SumCrcwMachine& machine,
                                                        const SimulationPlan& plan) {
  auto mach = std::make_shared<const crcw::SumCrcwMachine>(machine);
  const std::size_t M = mach->registers;
  const std::size_t D = plan.tree_depth;
  const std::size_t m = plan.m;
  const KeySpace ks{M, mach->processors, m, D, std::max(mach->processors, M) / m + 2};

  auto declared_reads = [mach](std::size_t step, std::size_t p) {
    std::vector<std::size_t> regs = mach->steps[step].reads(p);
    if (mach->halt_register &&
        std::find(regs.begin(), regs.end(), *mach->halt_register) == regs.end())
      regs.push_back(*mach->halt_register);
    return regs;
  };

  std::vector<mrc::RoundProgram> program;

  for (std::size_t step = 0; step < mach->steps.size(); ++step) {
    // Per PRAM step, exactly 3*D rounds: requests ascend (the first round
    // also creates them from the processor tokens), cells answer, answers
    // descend, processors compute, addends ascend, cells apply.
    for (std::size_t level = 1; level < D; ++level) {
      program.push_back({
          [=](const KeyValuePair& pr) -> Pairs {
            Pairs out{pr};
            if (mrc::key_channel(pr.key) != 0 || pr.value.empty()) return out;
            if (level == 1 && pr.value[0] == kToken) {
              std::size_t p = static_cast<std::size_t>(pr.key - M);
              for (std::size_t c : declared_reads(step, p))
                out.push_back({ks.tree(0, c, 1, p / m), {kReq, c, 0, p}});
            } else if (pr.value[0] == kReq && pr.value[2] == level - 1 && level >= 2) {
              out.back().key = ks.tree(0, pr.value[1], level, pr.value[3] / m);
            }
            return out;
          },
          [=](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
            Pairs out;
            if (mrc::key_channel(k) != 0) {
              for (const auto& v : vs) out.push_back({k, v});
              return out;
            }
            bool forwarded = false;
            std::set<std::pair<Word, Word>> children;
            for (const auto& v : vs) {
              if (v[0] == kReq && v[2] == level - 1) {
                children.insert({v[2], v[3]});
                if (!forwarded) {
                  out.push_back({k, {kReq, v[1], level, v[3] / m}});
                  forwarded = true;
                }
              } else {
                out.push_back({k, v});
              }
            }
            for (const auto& child : children)
              out.push_back({k, {kChild, level, child.first, child.second}});
            return out;
          },
      });
    }

    program.push_back({  // answer round
        [=](const KeyValuePair& pr) -> Pairs {
          Pairs out{pr};
          if (mrc::key_channel(pr.key) != 0 || pr.value.empty()) return out;
          if (D == 1 && pr.value[0] == kToken) {
            std::size_t p = static_cast<std::size_t>(pr.key - M);
            for (std::size_t c : declared_reads(step, p)) out.push_back({c, {kReq, c, 0, p}});
          } else if (pr.value[0] == kReq && pr.value[2] == D - 1 && D >= 2) {
            out.back().key = pr.value[1];
          }
          return out;
        },
        [=](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
          Pairs out;
          if (mrc::key_channel(k) != 0) {
            for (const auto& v : vs) out.push_back({k, v});
            return out;
          }
          bool is_cell = false;
          Word cell_value = 0;
          std::vector<std::pair<Word, Word>> requesters;
          for (const auto& v : vs) {
            if (v[0] == kCell) {
              is_cell = true;
              cell_value = v[1];
              out.push_back({k, v});
            } else if (v[0] == kReq) {
              requesters.emplace_back(v[2], v[3]);
            } else {
              out.push_back({k, v});
            }
          }
          if (is_cell)
            for (const auto& [lvl, grp] : requesters)
              out.push_back({k, {kAns, k, cell_value, lvl, grp}});
          return out;
        },
    });

    for (std::size_t level = D - 1; level >= 1; --level) {  // broadcast back down
      program.push_back({
          [=](const KeyValuePair& pr) -> Pairs {
            Pairs out{pr};
            if (mrc::key_channel(pr.key) != 0) return out;
            if (!pr.value.empty() && pr.value[0] == kAns && pr.value[3] == level)
              out.back().key = ks.req_endpoint(pr.value[1], level, pr.value[4]);
            return out;
          },
          [=](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
            Pairs out;
            if (mrc::key_channel(k) != 0) {
              for (const auto& v : vs) out.push_back({k, v});
              return out;
            }
            std::optional<std::pair<Word, Word>> answer;  // (cell, value)
            std::vector<std::pair<Word, Word>> children;
            for (const auto& v : vs) {
              if (v[0] == kAns && v[3] == level) {
                answer = {{v[1], v[2]}};
              } else if (v[0] == kChild && v[1] == level) {
                children.emplace_back(v[2], v[3]);
              } else {
                out.push_back({k, v});
              }
            }
            if (answer)
              for (const auto& [lvl, grp] : children)
                out.push_back({k, {kAns, answer->first, answer->second, lvl, grp}});
            return out;
          },
      });
    }

    program.push_back({  // compute round
        [=](const KeyValuePair& pr) -> Pairs {
          Pairs out{pr};
          if (mrc::key_channel(pr.key) != 0) return out;
          if (!pr.value.empty() && pr.value[0] == kAns && pr.value[3] == 0)
            out.back().key = ks.proc(pr.value[4]);
          return out;
        },
        [=](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
          Pairs out;
          if (mrc::key_channel(k) != 0) {
            for (const auto& v : vs) out.push_back({k, v});
            return out;
          }
          bool is_proc = false;
          std::map<std::size_t, crcw::Reg> read_values;
          for (const auto& v : vs) {
            if (v[0] == kToken) {
              is_proc = true;
              out.push_back({k, v});
            } else if (v[0] == kAns) {
              read_values[v[1]] = dec_reg(v[2]);
            } else {
              out.push_back({k, v});
            }
          }
          if (!is_proc) return out;
          std::size_t p = static_cast<std::size_t>(k - M);
          if (mach->halt_register) {
            auto it = read_values.find(*mach->halt_register);
            if (it != read_values.end() && it->second != 0) return out;  // frozen after halt
          }
          crcw::RegView view = [&read_values](std::size_t r) -> crcw::Reg {
            auto it = read_values.find(r);
            if (it == read_values.end())
              throw Error("undeclared register read: " + std::to_string(r));
            return it->second;
          };
          for (const crcw::Write& w : mach->steps[step].compute(p, view)) {
            if (w.reg >= M) throw Error("register index out of range: " + std::to_string(w.reg));
            if (w.addend != 0) out.push_back({k, {kAdd, w.reg, enc_reg(w.addend), 0, p}});
          }
          return out;
        },
    });

    for (std::size_t level = 1; level < D; ++level) {  // write aggregation tree
      program.push_back({
          [=](const KeyValuePair& pr) -> Pairs {
            Pairs out{pr};
            if (mrc::key_channel(pr.key) != 0) return out;
            if (!pr.value.empty() && pr.value[0] == kAdd && pr.value[3] == level - 1)
              out.back().key = ks.tree(1, pr.value[1], level, pr.value[4] / m);
            return out;
          },
          [=](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
            Pairs out;
            if (mrc::key_channel(k) != 0) {
              for (const auto& v : vs) out.push_back({k, v});
              return out;
            }
            crcw::Reg sum = 0;
            std::optional<Word> cell;
            Word group = 0;
            for (const auto& v : vs) {
              if (v[0] == kAdd && v[3] == level - 1) {
                cell = v[1];
                sum += dec_reg(v[2]);
                group = v[4] / m;
              } else {
                out.push_back({k, v});
              }
            }
            if (cell) out.push_back({k, {kAdd, *cell, enc_reg(sum), level, group}});
            return out;
          },
      });
    }

    program.push_back({  // apply round
        [=](const KeyValuePair& pr) -> Pairs {
          Pairs out{pr};
          if (mrc::key_channel(pr.key) != 0) return out;
          if (!pr.value.empty() && pr.value[0] == kAdd && pr.value[3] == D - 1)
            out.back().key = pr.value[1];
          return out;
        },
        [](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
          Pairs out;
          if (mrc::key_channel(k) != 0) {
            for (const auto& v : vs) out.push_back({k, v});
            return out;
          }
          bool is_cell = false;
          crcw::Reg value = 0, delta = 0;
          for (const auto& v : vs) {
            if (v[0] == kCell) {
              is_cell = true;
              value = dec_reg(v[1]);
            } else if (v[0] == kAdd) {
              delta += dec_reg(v[2]);
            } else {
              out.push_back({k, v});
            }
          }
          if (is_cell) out.push_back({k, {kCell, enc_reg(value + delta)}});
          return out;
        },
    });
  }
  return program;
}

SimulateResult simulate_crcw(const crcw::SumCrcwMachine& machine, const std::vector<crcw::Reg>& preload,
                             const mrc::Budget& budget, std::optional<SimulationPlan> plan_in,
                             mrc::ExecOptions options) {
  SimulationPlan plan = plan_in ? *plan_in : SimulationPlan::derive(machine, budget);
  if (plan.m < 2) throw ValidationError("simulation plan infeasible: fan-in bound m must be >= 2");

  SimulateResult result;
  result.plan = plan;

  double mp = static_cast<double>(machine.registers + machine.processors);
  double n = static_cast<double>(budget.input_words);
  if (n > 1 && mp > 1) {
    double log_base = std::log(mp) / std::log(std::pow(n, 1.0 - budget.epsilon));
    result.hypothesis_warning =
        mp * log_base > budget.c_total * std::pow(n, 2.0 * (1.0 - budget.epsilon));
  }

  std::vector<mrc::RoundProgram> program = build_simulation_program(machine, plan);
  mrc::BudgetAccountant acct(budget, options);
  Pairs out = mrc::run_program(program, encode_machine_state(machine, preload), acct);

  result.registers.assign(machine.registers, 0);
  for (const KeyValuePair& p : out)
    if (!p.value.empty() && p.value[0] == kCell && p.key < machine.registers)
      result.registers[p.key] = dec_reg(p.value[1]);
  result.report = acct.report();
  result.rounds = result.report.rounds_executed();
  return result;
}

}  // namespace ncmr::crcw_mrc
