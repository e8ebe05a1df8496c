#include "ncmr/circuit.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace ncmr {

const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Input: return "input";
    case NodeKind::And: return "and";
    case NodeKind::Or: return "or";
    case NodeKind::Not: return "not";
    case NodeKind::Id: return "id";
  }
  return "?";
}

int fan_in_of(NodeKind k) {
  switch (k) {
    case NodeKind::Input: return 0;
    case NodeKind::Not:
    case NodeKind::Id: return 1;
    case NodeKind::And:
    case NodeKind::Or: return 2;
  }
  return 0;
}

Circuit::Circuit(std::vector<Node> nodes, std::vector<std::pair<std::uint32_t, std::uint32_t>> edges,
                 std::uint32_t output)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), output_(output) {
  validate();
}

bool Circuit::has_node(std::uint32_t id) const {
  return id < index_of_.size() && index_of_[id] >= 0;
}

const Node& Circuit::node(std::uint32_t id) const {
  if (!has_node(id)) throw ValidationError("unknown node id " + std::to_string(id));
  return nodes_[static_cast<std::size_t>(index_of_[id])];
}

const std::vector<std::uint32_t>& Circuit::producers(std::uint32_t id) const {
  return producers_[static_cast<std::size_t>(index_of_[id])];
}

const std::vector<std::uint32_t>& Circuit::consumers(std::uint32_t id) const {
  return consumers_[static_cast<std::size_t>(index_of_[id])];
}

void Circuit::validate() {
  if (nodes_.empty()) throw ValidationError("empty circuit");

  std::uint32_t max_id = 0;
  for (const Node& nd : nodes_) max_id = std::max(max_id, nd.id);
  index_of_.assign(max_id + 1, -1);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (index_of_[nodes_[i].id] >= 0)
      throw ValidationError("duplicate node id " + std::to_string(nodes_[i].id));
    index_of_[nodes_[i].id] = static_cast<std::int32_t>(i);
  }
  if (!has_node(output_)) throw ValidationError("dangling output id " + std::to_string(output_));

  producers_.assign(nodes_.size(), {});
  consumers_.assign(nodes_.size(), {});
  for (const auto& [from, to] : edges_) {
    if (!has_node(from) || !has_node(to))
      throw ValidationError("dangling edge " + std::to_string(from) + " -> " + std::to_string(to));
    producers_[static_cast<std::size_t>(index_of_[to])].push_back(from);
    consumers_[static_cast<std::size_t>(index_of_[from])].push_back(to);
  }

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& nd = nodes_[i];
    int expect = fan_in_of(nd.kind);
    if (static_cast<int>(producers_[i].size()) != expect)
      throw ValidationError("node " + std::to_string(nd.id) + " (" + to_string(nd.kind) +
                            ") has fan-in " + std::to_string(producers_[i].size()) + ", expected " +
                            std::to_string(expect));
  }
  if (!consumers_[static_cast<std::size_t>(index_of_[output_])].empty())
    throw ValidationError("output node has nonzero fan-out");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (consumers_[i].empty() && nodes_[i].id != output_)
      throw ValidationError("node " + std::to_string(nodes_[i].id) +
                            " is a sink distinct from the output");
  }

  // Acyclicity via Kahn on producer counts.
  std::vector<std::size_t> indeg(nodes_.size());
  std::vector<std::uint32_t> order;
  order.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    indeg[i] = producers_[i].size();
    if (indeg[i] == 0) order.push_back(nodes_[i].id);
  }
  for (std::size_t head = 0; head < order.size(); ++head) {
    for (std::uint32_t c : consumers(order[head])) {
      std::size_t ci = static_cast<std::size_t>(index_of_[c]);
      if (--indeg[ci] == 0) order.push_back(c);
    }
  }
  if (order.size() != nodes_.size()) throw ValidationError("cycle detected");

  // Every node must have a path to the output.
  std::vector<bool> reaches(nodes_.size(), false);
  std::vector<std::uint32_t> stack = {output_};
  reaches[static_cast<std::size_t>(index_of_[output_])] = true;
  while (!stack.empty()) {
    std::uint32_t v = stack.back();
    stack.pop_back();
    for (std::uint32_t p : producers(v)) {
      std::size_t pi = static_cast<std::size_t>(index_of_[p]);
      if (!reaches[pi]) {
        reaches[pi] = true;
        stack.push_back(p);
      }
    }
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (!reaches[i])
      throw ValidationError("node " + std::to_string(nodes_[i].id) + " cannot reach the output");

  // Input variables: exactly one input node per variable, indices 0..n-1.
  std::vector<std::uint32_t> vars;
  for (const Node& nd : nodes_)
    if (nd.kind == NodeKind::Input) vars.push_back(nd.var);
  std::sort(vars.begin(), vars.end());
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i] != i)
      throw ValidationError(vars[i] == (i ? vars[i - 1] : ~0u)
                                ? "duplicate input variable x" + std::to_string(vars[i])
                                : "input variables are not contiguous from 0");
  }
  if (vars.empty()) throw ValidationError("circuit has no input nodes");
  n_ = static_cast<std::uint32_t>(vars.size());
}

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> toks;
  std::istringstream in(line);
  std::string t;
  while (in >> t) toks.push_back(t);
  return toks;
}

std::uint32_t parse_u32(const std::string& tok, std::size_t lineno) {
  try {
    std::size_t pos = 0;
    unsigned long v = std::stoul(tok, &pos);
    if (pos != tok.size() || v > 0xffffffffUL) throw std::invalid_argument("range");
    return static_cast<std::uint32_t>(v);
  } catch (const std::exception&) {
    throw ParseError(lineno, "expected a non-negative integer, got '" + tok + "'");
  }
}

}  // namespace

Circuit parse_circuit(const std::string& text) {
  std::vector<Node> nodes;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  bool have_output = false;
  std::uint32_t output = 0;

  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::vector<std::string> toks = tokenize(raw);
    if (toks.empty()) continue;
    const std::string& op = toks[0];

    auto want = [&](std::size_t n) {
      if (toks.size() != n)
        throw ParseError(lineno, "'" + op + "' takes " + std::to_string(n - 1) + " arguments");
    };

    if (op == "input") {
      want(3);
      nodes.push_back({parse_u32(toks[1], lineno), NodeKind::Input, parse_u32(toks[2], lineno)});
    } else if (op == "and" || op == "or") {
      want(4);
      std::uint32_t id = parse_u32(toks[1], lineno);
      nodes.push_back({id, op == "and" ? NodeKind::And : NodeKind::Or, 0});
      edges.emplace_back(parse_u32(toks[2], lineno), id);
      edges.emplace_back(parse_u32(toks[3], lineno), id);
    } else if (op == "not" || op == "id") {
      want(3);
      std::uint32_t id = parse_u32(toks[1], lineno);
      nodes.push_back({id, op == "not" ? NodeKind::Not : NodeKind::Id, 0});
      edges.emplace_back(parse_u32(toks[2], lineno), id);
    } else if (op == "output") {
      want(2);
      if (have_output) throw ParseError(lineno, "multiple output declarations");
      have_output = true;
      output = parse_u32(toks[1], lineno);
    } else {
      throw ParseError(lineno, "unknown directive '" + op + "'");
    }
  }
  if (!have_output) throw ParseError(lineno, "missing output declaration");
  return Circuit(std::move(nodes), std::move(edges), output);
}

std::string serialize_circuit(const Circuit& c) {
  std::vector<Node> nodes = c.nodes();
  std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
  std::ostringstream out;
  for (const Node& nd : nodes) {
    out << to_string(nd.kind) << ' ' << nd.id;
    if (nd.kind == NodeKind::Input) {
      out << ' ' << nd.var;
    } else {
      for (std::uint32_t p : c.producers(nd.id)) out << ' ' << p;
    }
    out << '\n';
  }
  out << "output " << c.output() << '\n';
  return out.str();
}

Assignment parse_assignment(const std::string& text, std::size_t expected_n) {
  Assignment a;
  for (char ch : text) {
    if (ch == '0' || ch == '1') {
      a.bits.push_back(static_cast<std::uint8_t>(ch - '0'));
    } else if (ch == '\n' || ch == '\r' || ch == ' ' || ch == '\t') {
      continue;
    } else {
      throw ParseError(1, std::string("unexpected character '") + ch + "' in assignment");
    }
  }
  if (a.bits.size() != expected_n)
    throw ValidationError("assignment has " + std::to_string(a.bits.size()) + " bits, circuit expects " +
                          std::to_string(expected_n));
  return a;
}

std::string serialize_assignment(const Assignment& a) {
  std::string s;
  s.reserve(a.bits.size() + 1);
  for (std::uint8_t b : a.bits) s += static_cast<char>('0' + b);
  s += '\n';
  return s;
}

namespace {

std::vector<std::uint32_t> topo_order(const Circuit& c) {
  std::map<std::uint32_t, std::size_t> indeg;
  std::vector<std::uint32_t> order;
  order.reserve(c.nodes().size());
  for (const Node& nd : c.nodes()) {
    indeg[nd.id] = c.producers(nd.id).size();
    if (indeg[nd.id] == 0) order.push_back(nd.id);
  }
  for (std::size_t head = 0; head < order.size(); ++head)
    for (std::uint32_t v : c.consumers(order[head]))
      if (--indeg[v] == 0) order.push_back(v);
  return order;  // producers before consumers
}

}  // namespace

std::vector<std::uint8_t> eval_all_nodes(const Circuit& c, const Assignment& a) {
  if (a.size() != c.num_inputs())
    throw ValidationError("assignment length " + std::to_string(a.size()) + " != n = " +
                          std::to_string(c.num_inputs()));
  std::uint32_t max_id = 0;
  for (const Node& nd : c.nodes()) max_id = std::max(max_id, nd.id);
  std::vector<std::uint8_t> val(max_id + 1, 0);
  for (std::uint32_t id : topo_order(c)) {
    const Node& nd = c.node(id);
    const auto& ps = c.producers(id);
    switch (nd.kind) {
      case NodeKind::Input: val[id] = a[nd.var]; break;
      case NodeKind::And: val[id] = val[ps[0]] & val[ps[1]]; break;
      case NodeKind::Or: val[id] = val[ps[0]] | val[ps[1]]; break;
      case NodeKind::Not: val[id] = val[ps[0]] ^ 1u; break;
      case NodeKind::Id: val[id] = val[ps[0]]; break;
    }
  }
  return val;
}

std::uint8_t eval_direct(const Circuit& c, const Assignment& a) {
  return eval_all_nodes(c, a)[c.output()];
}

LevelMap levels_direct(const Circuit& c) {
  std::uint32_t max_id = 0;
  for (const Node& nd : c.nodes()) max_id = std::max(max_id, nd.id);
  LevelMap level(max_id + 1, 0);
  std::vector<std::uint32_t> order = topo_order(c);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    std::uint32_t v = *it;
    const auto& cs = c.consumers(v);
    if (cs.empty()) {
      level[v] = 0;  // the unique sink
    } else {
      std::uint32_t m = 0;
      for (std::uint32_t u : cs) m = std::max(m, level[u]);
      level[v] = m + 1;
    }
  }
  return level;
}

std::uint32_t depth_of(const Circuit& c) {
  LevelMap lv = levels_direct(c);
  std::uint32_t d = 0;
  for (const Node& nd : c.nodes()) d = std::max(d, lv[nd.id]);
  return d;
}

Circuit gen_parity(std::uint32_t n) {
  if (n < 2 || (n & (n - 1)) != 0)
    throw ValidationError("parity generator needs a power of two >= 2, got " + std::to_string(n));
  std::vector<Node> nodes;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::uint32_t next_id = 0;
  std::vector<std::uint32_t> wave;
  for (std::uint32_t i = 0; i < n; ++i) {
    nodes.push_back({next_id, NodeKind::Input, i});
    wave.push_back(next_id++);
  }
  while (wave.size() > 1) {
    std::vector<std::uint32_t> next_wave;
    for (std::size_t i = 0; i < wave.size(); i += 2) {
      std::uint32_t x = wave[i], y = wave[i + 1];
      std::uint32_t g_or = next_id++, g_and = next_id++, g_not = next_id++, g_out = next_id++;
      nodes.push_back({g_or, NodeKind::Or, 0});
      nodes.push_back({g_and, NodeKind::And, 0});
      nodes.push_back({g_not, NodeKind::Not, 0});
      nodes.push_back({g_out, NodeKind::And, 0});
      edges.emplace_back(x, g_or);
      edges.emplace_back(y, g_or);
      edges.emplace_back(x, g_and);
      edges.emplace_back(y, g_and);
      edges.emplace_back(g_and, g_not);
      edges.emplace_back(g_or, g_out);
      edges.emplace_back(g_not, g_out);
      next_wave.push_back(g_out);
    }
    wave = std::move(next_wave);
  }
  return Circuit(std::move(nodes), std::move(edges), wave[0]);
}

Circuit gen_and_tree(std::uint32_t n) {
  if (n < 1) throw ValidationError("and-tree generator needs n >= 1");
  std::vector<Node> nodes;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::uint32_t next_id = 0;
  std::vector<std::uint32_t> wave;
  for (std::uint32_t i = 0; i < n; ++i) {
    nodes.push_back({next_id, NodeKind::Input, i});
    wave.push_back(next_id++);
  }
  while (wave.size() > 1) {
    std::vector<std::uint32_t> next_wave;
    for (std::size_t i = 0; i + 1 < wave.size(); i += 2) {
      std::uint32_t g = next_id++;
      nodes.push_back({g, NodeKind::And, 0});
      edges.emplace_back(wave[i], g);
      edges.emplace_back(wave[i + 1], g);
      next_wave.push_back(g);
    }
    if (wave.size() % 2 == 1) {  // odd one passes through to keep levels tight
      std::uint32_t g = next_id++;
      nodes.push_back({g, NodeKind::Id, 0});
      edges.emplace_back(wave.back(), g);
      next_wave.push_back(g);
    }
    wave = std::move(next_wave);
  }
  return Circuit(std::move(nodes), std::move(edges), wave[0]);
}

namespace {

// Deterministic bounded draw; avoids stdlib distribution differences.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  std::uint64_t next() { return eng_(); }
  // uniform in [lo, hi]
  std::uint64_t range(std::uint64_t lo, std::uint64_t hi) {
    assert(hi >= lo);
    return lo + eng_() % (hi - lo + 1);
  }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[range(0, i - 1)]);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace

Circuit gen_random_dag(std::uint32_t n, std::uint32_t depth, std::uint64_t seed) {
  if (n < 1) throw ValidationError("random dag generator needs n >= 1");
  if (depth == 0) {
    if (n != 1) throw ValidationError("infeasible shape: depth 0 admits only n = 1");
    return Circuit({{0, NodeKind::Input, 0}}, {}, 0);
  }
  if (depth < 63 && (std::uint64_t{1} << depth) < n)
    throw ValidationError("infeasible shape: n = " + std::to_string(n) + " inputs cannot fit in depth " +
                          std::to_string(depth));

  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);

  // Plan input placement over layers 1..depth (>= 1 input at layer `depth`),
  // then repair until the fan-in-2 pyramid toward the single output fits.
  std::vector<std::uint32_t> inputs_at(depth + 1, 0);
  inputs_at[depth] = 1;
  for (std::uint32_t i = 1; i < n; ++i) inputs_at[rng.range(1, depth)]++;

  auto min_chain_ok = [&](void) -> bool {
    // minimal layer sizes with all-fan-in-2 gates and no extras
    std::uint64_t need = inputs_at[depth];
    for (std::uint32_t k = depth; k-- > 1;) need = inputs_at[k] + (need + 1) / 2;
    return need <= 2;
  };
  while (!min_chain_ok()) {
    // push a random shallow input one layer deeper
    std::uint32_t k = 1;
    while (k < depth && inputs_at[k] == 0) ++k;
    std::uint32_t pick = k;
    for (std::uint32_t j = k; j < depth; ++j)
      if (inputs_at[j] > 0 && rng.range(0, 2) == 0) pick = j;
    inputs_at[pick]--;
    inputs_at[pick + 1]++;
  }

  // Gate counts and fan-ins, bottom-up: slots at layer k must cover layer k+1.
  std::vector<std::uint32_t> gates_at(depth + 1, 0);
  std::vector<std::uint32_t> two_fanin_at(depth + 1, 0);  // of which And/Or
  std::uint32_t need_above = inputs_at[depth];
  for (std::uint32_t k = depth; k-- > 1;) {
    std::uint32_t gmin = (need_above + 1) / 2;
    std::uint32_t g = gmin;
    for (std::uint32_t extra = static_cast<std::uint32_t>(rng.range(0, 2)); extra > 0; --extra) {
      // extra gate allowed only while the pyramid below still closes
      std::uint64_t need = inputs_at[k] + g + 1;
      bool ok = true;
      for (std::uint32_t j = k; j-- > 1;) need = inputs_at[j] + (need + 1) / 2;
      ok = need <= 2;
      if (ok) ++g;
    }
    std::uint32_t two_min = need_above > g ? need_above - g : 0;
    two_fanin_at[k] = static_cast<std::uint32_t>(rng.range(two_min, g));
    gates_at[k] = g;
    need_above = inputs_at[k] + g;
  }
  // Output gate at layer 0.
  std::uint32_t out_fanin = need_above >= 2 ? 2 : static_cast<std::uint32_t>(rng.range(1, 2));

  struct Slot {
    std::uint32_t gate;
    bool taken = false;
  };
  struct Planned {
    std::uint32_t id;
    NodeKind kind;
    std::uint32_t layer;
    std::uint32_t fanin;
  };

  std::vector<Planned> planned;
  std::vector<std::vector<std::uint32_t>> layer_nodes(depth + 1);
  std::uint32_t next_id = 0;
  auto add_node = [&](NodeKind kind, std::uint32_t layer, std::uint32_t fanin) {
    planned.push_back({next_id, kind, layer, fanin});
    layer_nodes[layer].push_back(next_id);
    return next_id++;
  };

  auto pick_two_kind = [&]() { return rng.range(0, 1) ? NodeKind::And : NodeKind::Or; };
  auto pick_one_kind = [&]() { return rng.range(0, 1) ? NodeKind::Not : NodeKind::Id; };

  // Layer 0: the output gate.
  add_node(out_fanin == 2 ? pick_two_kind() : pick_one_kind(), 0, out_fanin);
  for (std::uint32_t k = 1; k <= depth; ++k) {
    std::uint32_t twos = two_fanin_at[k];
    for (std::uint32_t g = 0; g < gates_at[k]; ++g) {
      bool two = g < twos;
      add_node(two ? pick_two_kind() : pick_one_kind(), k, two ? 2 : 1);
    }
    for (std::uint32_t i = 0; i < inputs_at[k]; ++i) add_node(NodeKind::Input, k, 0);
  }

  // Wiring: each node above layer 0 claims one open slot in the layer below,
  // which pins its level exactly; leftovers are filled from any higher layer.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::vector<std::vector<Slot>> open(depth + 1);
  for (const Planned& p : planned)
    for (std::uint32_t s = 0; s < p.fanin; ++s) open[p.layer].push_back({p.id});

  for (std::uint32_t k = 1; k <= depth; ++k) {
    std::vector<std::uint32_t> order = layer_nodes[k];
    rng.shuffle(order);
    for (std::uint32_t id : order) {
      std::vector<std::size_t> free;
      for (std::size_t s = 0; s < open[k - 1].size(); ++s)
        if (!open[k - 1][s].taken) free.push_back(s);
      assert(!free.empty());
      std::size_t pick = free[rng.range(0, free.size() - 1)];
      open[k - 1][pick].taken = true;
      edges.emplace_back(id, open[k - 1][pick].gate);
    }
  }
  std::vector<std::uint32_t> above;  // nodes usable as producers for layer k slots
  for (std::uint32_t k = depth + 1; k-- > 0;) {
    for (Slot& s : open[k]) {
      if (s.taken) continue;
      assert(!above.empty());
      std::uint32_t cand = above[rng.range(0, above.size() - 1)];
      // prefer a producer distinct from the one already wired, when available
      for (int tries = 0; tries < 4; ++tries) {
        bool dup = false;
        for (const auto& e : edges)
          if (e.second == s.gate && e.first == cand) dup = true;
        if (!dup) break;
        cand = above[rng.range(0, above.size() - 1)];
      }
      edges.emplace_back(cand, s.gate);
    }
    for (std::uint32_t id : layer_nodes[k]) above.push_back(id);
  }

  // Assign variable indices to input nodes in shuffled order.
  std::vector<std::uint32_t> var_order(n);
  std::iota(var_order.begin(), var_order.end(), 0);
  rng.shuffle(var_order);
  std::vector<Node> nodes;
  std::size_t vi = 0;
  for (const Planned& p : planned) {
    Node nd{p.id, p.kind, 0};
    if (p.kind == NodeKind::Input) nd.var = var_order[vi++];
    nodes.push_back(nd);
  }
  return Circuit(std::move(nodes), std::move(edges), planned[0].id);
}

}  // namespace ncmr
