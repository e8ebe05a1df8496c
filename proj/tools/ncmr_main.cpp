// Command-line front end: generate circuits, compile them to width-5
// permutation branching programs, and run the MapReduce pipelines or the
// PRAM kernels with budget/round reporting.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "ncmr/circuit.hpp"
#include "ncmr/circuit_mrc.hpp"
#include "ncmr/crcw.hpp"
#include "ncmr/crcw_to_mrc.hpp"
#include "ncmr/mrc_engine.hpp"
#include "ncmr/pbp.hpp"
#include "ncmr/pbp_mrc.hpp"
#include "ncmr/report.hpp"

namespace {

constexpr int kExitAccept = 0;
constexpr int kExitReject = 1;
constexpr int kExitViolation = 2;
constexpr int kExitError = 3;

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ncmr::Error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw ncmr::Error("cannot write " + path);
  f << content;
}

struct RunConfig {
  double epsilon = 0.5;
  double alpha = 0.1;
  double c_space = ncmr::mrc::Budget::kDefaultSpaceConstant;
  double c_total = ncmr::mrc::Budget::kDefaultTotalConstant;
  std::string mode = "strict";
  std::uint64_t seed = 0;
  std::string levels = "mr";
  std::string report_path;
  std::size_t subcircuit_depth = 0;  // 0 = derive from alpha

  ncmr::mrc::ExecOptions exec_options() const {
    ncmr::mrc::ExecOptions opt;
    opt.mode = mode == "advisory" ? ncmr::mrc::BudgetMode::Advisory : ncmr::mrc::BudgetMode::Strict;
    return opt;
  }
};

void add_run_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--epsilon", cfg.epsilon, "memory exponent");
  cmd->add_option("--alpha", cfg.alpha, "subcircuit exponent (nc)");
  cmd->add_option("--c-space", cfg.c_space, "reducer space constant");
  cmd->add_option("--c-total", cfg.c_total, "total space constant");
  cmd->add_option("--mode", cfg.mode, "strict|advisory")
      ->check(CLI::IsMember({"strict", "advisory"}));
  cmd->add_option("--seed", cfg.seed, "seed for seeded operations");
  cmd->add_option("--levels", cfg.levels, "mr|oracle level computation (nc)")
      ->check(CLI::IsMember({"mr", "oracle"}));
  cmd->add_option("--report", cfg.report_path, "write a JSONL round report");
  cmd->add_option("--subcircuit-depth", cfg.subcircuit_depth,
                  "pin the band depth s instead of deriving it from alpha");
}

void maybe_write_report(const RunConfig& cfg, const ncmr::mrc::BudgetReport& report,
                        const std::vector<ncmr::pbp_mrc::StageRounds>& stages) {
  if (cfg.report_path.empty()) return;
  ncmr::report::write_file(cfg.report_path, ncmr::report::render_jsonl(report, stages));
}

std::vector<std::int64_t> parse_numbers(const std::string& text) {
  std::vector<std::int64_t> out;
  std::istringstream in(text);
  std::int64_t v;
  while (in >> v) out.push_back(v);
  return out;
}

int cmd_run_nc1(const std::string& circuit_path, const std::string& assign_path,
                const RunConfig& cfg) {
  ncmr::Circuit c = ncmr::parse_circuit(slurp(circuit_path));
  ncmr::Assignment a = ncmr::parse_assignment(slurp(assign_path), c.num_inputs());
  try {
    auto result =
        ncmr::pbp_mrc::run_nc1_pipeline(c, a, cfg.epsilon, cfg.c_space, cfg.c_total,
                                        cfg.exec_options());
    maybe_write_report(cfg, result.report, result.stages);
    std::cout << "verdict: " << (result.bit ? "accept" : "reject") << "\n"
              << "rounds: " << result.total_rounds << "\n"
              << "violations: " << result.report.violations.size() << "\n";
    return result.bit ? kExitAccept : kExitReject;
  } catch (const ncmr::mrc::BudgetViolationError& e) {
    std::cerr << "budget violation: " << e.what() << "\n";
    return kExitViolation;
  }
}

int cmd_run_nc(const std::string& circuit_path, const std::string& assign_path,
               const RunConfig& cfg) {
  ncmr::Circuit c = ncmr::parse_circuit(slurp(circuit_path));
  ncmr::Assignment a = ncmr::parse_assignment(slurp(assign_path), c.num_inputs());
  if (!(cfg.epsilon > 0.0) || !(cfg.epsilon < 0.5))
    throw ncmr::ValidationError("epsilon must be < 1/2 for nc pipeline");
  try {
    auto result = ncmr::circuit_mrc::run_nc_pipeline(
        c, a, cfg.epsilon, cfg.alpha,
        cfg.subcircuit_depth ? std::optional<std::size_t>(cfg.subcircuit_depth) : std::nullopt,
        cfg.levels == "oracle" ? ncmr::circuit_mrc::LevelsMode::Oracle
                               : ncmr::circuit_mrc::LevelsMode::Mr,
        cfg.c_space, cfg.c_total, cfg.exec_options());
    maybe_write_report(cfg, result.report, result.stages);
    std::cout << "verdict: " << (result.bit ? "accept" : "reject") << "\n"
              << "rounds: " << result.total_rounds << "\n";
    for (const auto& st : result.stages)
      std::cout << "stage " << st.name << ": " << st.rounds << " rounds\n";
    std::cout << "violations: " << result.report.violations.size() << "\n";
    return result.bit ? kExitAccept : kExitReject;
  } catch (const ncmr::mrc::BudgetViolationError& e) {
    std::cerr << "budget violation: " << e.what() << "\n";
    return kExitViolation;
  }
}

int cmd_run_crcw(const std::string& kernel, const std::string& numbers_path, std::size_t domain,
                 bool trace, const RunConfig& cfg) {
  std::vector<std::int64_t> numbers = parse_numbers(slurp(numbers_path));
  ncmr::crcw::SumCrcwMachine machine;
  std::vector<ncmr::crcw::Reg> preload;
  std::size_t output_base = 0, output_count = 0;

  if (kernel == "prefix-sums") {
    auto pm = ncmr::crcw::build_prefix_sums_machine(numbers.size());
    machine = pm.machine;
    preload.assign(numbers.begin(), numbers.end());
    output_base = pm.output_base;
    output_count = numbers.size();
  } else {
    std::vector<std::uint64_t> values(numbers.begin(), numbers.end());
    std::size_t dom = domain;
    if (dom == 0)
      for (std::uint64_t v : values) dom = std::max<std::size_t>(dom, v);
    auto sm = ncmr::crcw::build_sort_machine(values, dom);
    machine = sm.machine;
    preload.assign(numbers.begin(), numbers.end());
    output_base = sm.output_base;
    output_count = values.size();
  }

  auto direct = ncmr::crcw::run_crcw(machine, preload, {.record_trace = trace});
  if (trace) {
    for (const auto& step : direct.trace) {
      std::cout << "step " << step.step << ":";
      for (const auto& d : step.deltas) std::cout << " r" << d.reg << "+=" << d.addend;
      std::cout << "\n";
    }
  }
  ncmr::mrc::Pairs initial = ncmr::crcw_mrc::encode_machine_state(machine, preload);
  ncmr::mrc::Budget budget(cfg.epsilon, ncmr::mrc::words_of(initial), cfg.c_space, cfg.c_total);
  try {
    auto sim = ncmr::crcw_mrc::simulate_crcw(machine, preload, budget, std::nullopt,
                                             cfg.exec_options());
    maybe_write_report(cfg, sim.report, {{"simulate_crcw", sim.rounds}});
    bool agree = sim.registers == direct.registers;
    std::cout << kernel << ":";
    for (std::size_t i = 0; i < output_count; ++i)
      std::cout << ' ' << direct.registers[output_base + i];
    std::cout << "\nsimulation " << (agree ? "matches" : "DIVERGES from") << " the direct run; "
              << sim.rounds << " rounds, T = " << machine.steps.size() << "\n";
    if (sim.hypothesis_warning)
      std::cout << "warning: (M+P)log_m(M+P) exceeds the total-space budget hypothesis\n";
    return agree ? kExitAccept : kExitError;
  } catch (const ncmr::mrc::BudgetViolationError& e) {
    std::cerr << "budget violation: " << e.what() << "\n";
    return kExitViolation;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"circuit-to-MapReduce simulation toolkit"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a circuit file");
  gen->require_subcommand(1);
  std::uint32_t gen_n = 8, gen_depth = 4;
  std::uint64_t gen_seed = 0;
  std::string gen_out;

  auto* gen_parity_cmd = gen->add_subcommand("parity", "parity of n inputs (n a power of two)");
  gen_parity_cmd->add_option("n", gen_n, "inputs")->required();
  gen_parity_cmd->add_option("-o,--out", gen_out, "output path");

  auto* gen_and_cmd = gen->add_subcommand("and-tree", "conjunction of n inputs");
  gen_and_cmd->add_option("n", gen_n, "inputs")->required();
  gen_and_cmd->add_option("-o,--out", gen_out, "output path");

  auto* gen_rand_cmd = gen->add_subcommand("random", "random DAG with exact depth");
  gen_rand_cmd->add_option("n", gen_n, "inputs")->required();
  gen_rand_cmd->add_option("depth", gen_depth, "depth")->required();
  gen_rand_cmd->add_option("--seed", gen_seed, "seed");
  gen_rand_cmd->add_option("-o,--out", gen_out, "output path");

  // compile-pbp
  auto* compile = app.add_subcommand("compile-pbp", "compile a circuit to a width-5 PBP");
  std::string compile_in, compile_out;
  compile->add_option("circuit", compile_in, "circuit file")->required();
  compile->add_option("-o,--out", compile_out, "output path");

  // run
  auto* run = app.add_subcommand("run", "run a pipeline or PRAM kernel");
  run->require_subcommand(1);
  RunConfig cfg;
  std::string run_circuit, run_assign, run_numbers;
  std::size_t crcw_domain = 0;

  auto* run_nc1 = run->add_subcommand("nc1", "constant-round PBP pipeline");
  run_nc1->add_option("circuit", run_circuit)->required();
  run_nc1->add_option("assignment", run_assign)->required();
  add_run_flags(run_nc1, cfg);

  auto* run_nc = run->add_subcommand("nc", "banded circuit pipeline");
  run_nc->add_option("circuit", run_circuit)->required();
  run_nc->add_option("assignment", run_assign)->required();
  add_run_flags(run_nc, cfg);

  auto* run_crcw = run->add_subcommand("crcw", "PRAM kernel, direct and simulated");
  std::string crcw_kernel;
  bool crcw_trace = false;
  run_crcw->add_option("kernel", crcw_kernel, "prefix-sums|sort")
      ->required()
      ->check(CLI::IsMember({"prefix-sums", "sort"}));
  run_crcw->add_option("numbers", run_numbers, "whitespace-separated integers")->required();
  run_crcw->add_option("--domain", crcw_domain, "sort domain bound D");
  run_crcw->add_flag("--trace", crcw_trace, "dump per-step register deltas");
  add_run_flags(run_crcw, cfg);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_parity_cmd->parsed() || gen_and_cmd->parsed() || gen_rand_cmd->parsed()) {
      ncmr::Circuit c = gen_parity_cmd->parsed() ? ncmr::gen_parity(gen_n)
                        : gen_and_cmd->parsed()  ? ncmr::gen_and_tree(gen_n)
                                                 : ncmr::gen_random_dag(gen_n, gen_depth, gen_seed);
      std::string text = ncmr::serialize_circuit(c);
      if (gen_out.empty())
        std::cout << text;
      else
        spit(gen_out, text);
      return kExitAccept;
    }
    if (compile->parsed()) {
      ncmr::Circuit c = ncmr::parse_circuit(slurp(compile_in));
      ncmr::Pbp pbp = ncmr::barrington_compile(c);
      std::uint32_t depth = ncmr::depth_of(c);
      double bound = std::pow(4.0, depth);
      std::string text = ncmr::serialize_pbp(pbp);
      if (compile_out.empty())
        std::cout << text;
      else
        spit(compile_out, text);
      std::cerr << "width: " << pbp.width << "\nlength: " << pbp.lines.size()
                << "\ndepth: " << depth << "\nlength <= 4^depth: "
                << (static_cast<double>(pbp.lines.size()) <= bound ? "yes" : "NO") << "\n";
      return kExitAccept;
    }
    if (run_nc1->parsed()) return cmd_run_nc1(run_circuit, run_assign, cfg);
    if (run_nc->parsed()) return cmd_run_nc(run_circuit, run_assign, cfg);
    if (run_crcw->parsed()) return cmd_run_crcw(crcw_kernel, run_numbers, crcw_domain, crcw_trace, cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
