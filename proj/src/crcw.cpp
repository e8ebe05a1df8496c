#include "ncmr/crcw.hpp"

#include <algorithm>
#include <bit>
#include <set>

namespace ncmr::crcw {

std::size_t SumCrcwMachine::max_reads_per_step() const {
  std::size_t m = 0;
  for (const Step& st : steps)
    for (std::size_t p = 0; p < processors; ++p) m = std::max(m, st.reads(p).size());
  return m;
}

CrcwRunResult run_crcw(const SumCrcwMachine& m, const std::vector<Reg>& preload,
                       CrcwRunOptions options) {
  if (preload.size() > m.registers)
    throw ValidationError("preload of " + std::to_string(preload.size()) + " values exceeds M = " +
                          std::to_string(m.registers));
  CrcwRunResult result;
  result.registers = preload;
  result.registers.resize(m.registers, 0);

  for (std::size_t s = 0; s < m.steps.size(); ++s) {
    const Step& st = m.steps[s];
    const std::vector<Reg> snapshot = result.registers;
    std::vector<Reg> delta(m.registers, 0);
    for (std::size_t p = 0; p < m.processors; ++p) {
      std::vector<std::size_t> declared = st.reads(p);
      RegView view = [&snapshot, &declared, &m](std::size_t r) -> Reg {
        if (r >= m.registers) throw Error("register index out of range: " + std::to_string(r));
        if (std::find(declared.begin(), declared.end(), r) == declared.end())
          throw Error("undeclared register read: " + std::to_string(r));
        return snapshot[r];
      };
      for (const Write& w : st.compute(p, view)) {
        if (w.reg >= m.registers)
          throw Error("register index out of range: " + std::to_string(w.reg));
        delta[w.reg] += w.addend;
      }
    }
    if (options.record_trace) {
      CrcwTraceStep tr{s, {}};
      for (std::size_t r = 0; r < m.registers; ++r)
        if (delta[r] != 0) tr.deltas.push_back({r, delta[r]});
      result.trace.push_back(std::move(tr));
    }
    for (std::size_t r = 0; r < m.registers; ++r) result.registers[r] += delta[r];
    result.steps_executed = s + 1;
    if (m.halt_register && result.registers[*m.halt_register] != 0) break;
  }
  return result;
}

namespace {

std::size_t next_pow2(std::size_t v) {
  return std::bit_ceil(std::max<std::size_t>(v, 1));
}

// The two Lemma-10 steps over a register file: dyadic block sums s_i(j) in
// step one, then y(j) as the sum of the block sums selected by the binary
// representation of j+1.
struct PrefixCore {
  std::size_t q_pad = 0;
  std::size_t log_q = 0;
  std::size_t input_base = 0;
  std::size_t output_base = 0;
  std::vector<std::size_t> level_base;  // level_base[i] for i in [0, log_q]

  std::size_t block_sum_reg(std::size_t i, std::size_t j) const { return level_base[i] + j; }

  // Registers consumed beyond the input region.
  static PrefixCore layout(std::size_t q_pad, std::size_t input_base, std::size_t scratch_base) {
    PrefixCore core;
    core.q_pad = q_pad;
    core.log_q = static_cast<std::size_t>(std::countr_zero(q_pad));
    core.input_base = input_base;
    core.level_base.resize(core.log_q + 1);
    core.level_base[0] = input_base;  // s_0(j) = x_j
    std::size_t next = scratch_base;
    for (std::size_t i = 1; i <= core.log_q; ++i) {
      core.level_base[i] = next;
      next += q_pad >> i;
    }
    core.output_base = next;
    return core;
  }
  std::size_t end() const { return output_base + q_pad; }

  std::size_t step1_processors() const { return log_q * q_pad; }
  std::size_t step2_processors() const { return q_pad * (log_q + 1); }

  Step step1() const {
    PrefixCore core = *this;
    return Step{
        [core](std::size_t pid) -> std::vector<std::size_t> {
          if (pid >= core.step1_processors()) return {};
          return {core.input_base + pid % core.q_pad};
        },
        [core](std::size_t pid, const RegView& reg) -> std::vector<Write> {
          if (pid >= core.step1_processors()) return {};
          std::size_t i = 1 + pid / core.q_pad;
          std::size_t p = pid % core.q_pad;
          return {{core.block_sum_reg(i, p >> i), reg(core.input_base + p)}};
        },
    };
  }

  Step step2() const {
    PrefixCore core = *this;
    auto source = [core](std::size_t pid) -> std::optional<std::size_t> {
      if (pid >= core.step2_processors()) return std::nullopt;
      std::size_t j = pid / (core.log_q + 1);
      std::size_t p = pid % (core.log_q + 1);
      if (((j + 1) >> p & 1) == 0) return std::nullopt;
      return core.block_sum_reg(p, (j + 1 - (std::size_t{1} << p)) >> p);
    };
    return Step{
        [source](std::size_t pid) -> std::vector<std::size_t> {
          auto src = source(pid);
          return src ? std::vector<std::size_t>{*src} : std::vector<std::size_t>{};
        },
        [core, source](std::size_t pid, const RegView& reg) -> std::vector<Write> {
          auto src = source(pid);
          if (!src) return {};
          std::size_t j = pid / (core.log_q + 1);
          return {{core.output_base + j, reg(*src)}};
        },
    };
  }
};

}  // namespace

std::size_t PrefixSumsMachine::block_sum_reg(std::size_t i, std::size_t j) const {
  return level_base_[i] + j;
}

PrefixSumsMachine build_prefix_sums_machine(std::size_t q) {
  std::size_t q_pad = next_pow2(q);
  PrefixCore core = PrefixCore::layout(q_pad, 0, q_pad);

  PrefixSumsMachine pm;
  pm.q = q;
  pm.q_pad = q_pad;
  pm.input_base = core.input_base;
  pm.output_base = core.output_base;
  pm.level_base_ = core.level_base;
  pm.machine.registers = core.end();
  pm.machine.processors = std::max(core.step1_processors(), core.step2_processors());
  pm.machine.steps = {core.step1(), core.step2()};
  return pm;
}

std::vector<Reg> crcw_prefix_sums(const std::vector<Reg>& x) {
  PrefixSumsMachine pm = build_prefix_sums_machine(x.size());
  std::vector<Reg> preload = x;  // padded suffix is zero
  CrcwRunResult run = run_crcw(pm.machine, preload);
  std::vector<Reg> y(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) y[j] = run.registers[pm.output_base + j];
  return y;
}

SortMachine build_sort_machine(const std::vector<std::uint64_t>& values, std::size_t domain) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t v : values) {
    if (v < 1 || v > domain)
      throw ValidationError("sort element " + std::to_string(v) + " outside domain {1.." +
                            std::to_string(domain) + "}");
    if (!seen.insert(v).second)
      throw ValidationError("duplicate sort element " + std::to_string(v));
  }

  std::size_t p = values.size();
  std::size_t zlen = domain + 1;
  std::size_t q_pad = next_pow2(zlen);

  SortMachine sm;
  sm.domain = domain;
  sm.count = p;
  sm.input_base = 0;
  std::size_t z_base = p;
  // z occupies the prefix-core input region (padded with zeros)
  PrefixCore core = PrefixCore::layout(q_pad, z_base, z_base + q_pad);
  std::size_t zhat_base = core.output_base;
  sm.output_base = core.end();

  sm.machine.registers = sm.output_base + p;
  std::size_t x_base = sm.input_base;

  Step zero{
      [](std::size_t) -> std::vector<std::size_t> { return {}; },
      [z_base, zlen](std::size_t pid, const RegView&) -> std::vector<Write> {
        if (pid >= zlen) return {};
        return {{z_base + pid, 0}};
      },
  };
  Step mark{
      [x_base, p](std::size_t pid) -> std::vector<std::size_t> {
        if (pid >= p) return {};
        return {x_base + pid};
      },
      [x_base, z_base, p](std::size_t pid, const RegView& reg) -> std::vector<Write> {
        if (pid >= p) return {};
        return {{z_base + static_cast<std::size_t>(reg(x_base + pid)), 1}};
      },
  };
  Step emit{
      [zhat_base, domain](std::size_t pid) -> std::vector<std::size_t> {
        if (pid < 1 || pid > domain) return {};
        return {zhat_base + pid, zhat_base + pid - 1};
      },
      [zhat_base, out_base = sm.output_base, domain](std::size_t pid,
                                                     const RegView& reg) -> std::vector<Write> {
        if (pid < 1 || pid > domain) return {};
        Reg zk = reg(zhat_base + pid);
        Reg zk1 = reg(zhat_base + pid - 1);
        if (zk == zk1) return {};
        // zhat ranks run 1..p; outputs are normalized to 0-based
        return {{out_base + static_cast<std::size_t>(zk) - 1, static_cast<Reg>(pid)}};
      },
  };

  sm.machine.steps = {zero, mark, core.step1(), core.step2(), emit};
  sm.machine.processors = std::max({zlen, p, core.step1_processors(), core.step2_processors(),
                                    domain + 1});
  return sm;
}

std::vector<std::uint64_t> crcw_sort(const std::vector<std::uint64_t>& values, std::size_t domain) {
  SortMachine sm = build_sort_machine(values, domain);
  std::vector<Reg> preload(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) preload[i] = static_cast<Reg>(values[i]);
  CrcwRunResult run = run_crcw(sm.machine, preload);
  std::vector<std::uint64_t> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = static_cast<std::uint64_t>(run.registers[sm.output_base + i]);
  return out;
}

}  // namespace ncmr::crcw
