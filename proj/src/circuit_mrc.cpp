#include "ncmr/circuit_mrc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

#include "ncmr/crcw.hpp"
#include "ncmr/crcw_to_mrc.hpp"

namespace ncmr::circuit_mrc {

using mrc::Key;
using mrc::KeyValuePair;
using mrc::Pairs;
using mrc::Word;
using pbp_mrc::channel_of;
using pbp_mrc::index_of;
using pbp_mrc::make_key;

namespace {

namespace channel {
constexpr std::uint8_t kCNode = 20;  // node states keyed by node id
constexpr std::uint8_t kCEdge = 21;  // raw edges keyed by edge index
constexpr std::uint8_t kRNode = 22;  // rank-keyed node records
constexpr std::uint8_t kREdge = 23;  // augmented edges keyed by edge id
constexpr std::uint8_t kStore = 24;  // subcircuit stores keyed by rank block
}  // namespace channel

// Value tags; pbp_mrc owns 32..52, the machine simulation owns < 32.
enum Tag : Word {
  ctState = 64,        // [t,id,kind,var,outdeg,prodc,p0,p1,received,maxlvl,leveled,announced,level,rank]
  ctConsLevel = 65,    // [t, level]
  ctRank = 66,         // [t, rank]
  ctEF = 67,           // [t, e, u, v]
  ctEF2 = 68,          // [t, e, ru, lu, u, ku, varu, v]
  ctREdge = 69,        // [t, e, special, ru, lu, u, ku, varu, rv, lv, v, kv, varv]
  ctRNode = 70,        // [t, rank, level, id, kind, var, isdum2]
  ctNodeMention = 71,  // [t, range, rank, var, level]
  ctAnnot = 72,        // [t, rank, bit, level, var]
  ctSNode = 73,        // [t, rank, level, id, kind, var, hasbit, bit, isdum2]
  ctSEdge = 74,        // [t, e, special, ru, lu, ku, varu, rv, lv, kv, varv]
  ctFetched = 75,      // [t, rank]
  ctReq = 76,          // [t, u_rank, from_block]
  ctAnsN = 77,         // [t, from, rank, level, id, kind, var, hasbit, bit, isdum2]
  ctAnsE = 78,         // [t, from, e, special, ru, lu, ku, varu, rv, lv, kv, varv]
  ctVal = 79,          // [t, dest_block, rank, val]
  ctDumVal = 80,       // [t, dest_block, dum2_rank, val]
  ctVerdict = 81,      // [t, bit]
};

struct StateIdx {
  enum : std::size_t {
    kId = 1, kKind = 2, kVar = 3, kOutDeg = 4, kProdCount = 5, kProd0 = 6, kProd1 = 7,
    kReceived = 8, kMaxLvl = 9, kLeveled = 10, kAnnounced = 11, kLevel = 12, kRank = 13,
    kSize = 14,
  };
};

// Node/edge record views used by the store rounds.
struct NodeRec {
  std::uint64_t rank = 0;
  std::uint32_t level = 0;
  std::uint32_t id = 0;
  NodeKind kind = NodeKind::Input;
  std::uint32_t var = 0;
  bool has_bit = false;
  std::uint8_t bit = 0;
  bool is_dum2 = false;

  std::vector<Word> to_snode() const {
    return {ctSNode, rank, level, id, static_cast<Word>(kind), var,
            has_bit ? Word{1} : Word{0}, bit, is_dum2 ? Word{1} : Word{0}};
  }
  static NodeRec from_words(const std::vector<Word>& v, std::size_t off) {
    NodeRec r;
    r.rank = v[off];
    r.level = static_cast<std::uint32_t>(v[off + 1]);
    r.id = static_cast<std::uint32_t>(v[off + 2]);
    r.kind = static_cast<NodeKind>(v[off + 3]);
    r.var = static_cast<std::uint32_t>(v[off + 4]);
    r.has_bit = v[off + 5] != 0;
    r.bit = static_cast<std::uint8_t>(v[off + 6]);
    r.is_dum2 = v[off + 7] != 0;
    return r;
  }
};

struct EdgeRec {
  std::uint64_t e = 0;
  bool special = false;
  std::uint64_t ru = 0;
  std::uint32_t lu = 0;
  NodeKind ku = NodeKind::Input;
  std::uint32_t varu = 0;
  std::uint64_t rv = 0;
  std::uint32_t lv = 0;
  NodeKind kv = NodeKind::Input;
  std::uint32_t varv = 0;

  std::vector<Word> to_sedge() const {
    return {ctSEdge, e, special ? Word{1} : Word{0}, ru, lu, static_cast<Word>(ku), varu,
            rv, lv, static_cast<Word>(kv), varv};
  }
  static EdgeRec from_words(const std::vector<Word>& v, std::size_t off) {
    EdgeRec r;
    r.e = v[off];
    r.special = v[off + 1] != 0;
    r.ru = v[off + 2];
    r.lu = static_cast<std::uint32_t>(v[off + 3]);
    r.ku = static_cast<NodeKind>(v[off + 4]);
    r.varu = static_cast<std::uint32_t>(v[off + 5]);
    r.rv = v[off + 6];
    r.lv = static_cast<std::uint32_t>(v[off + 7]);
    r.kv = static_cast<NodeKind>(v[off + 8]);
    r.varv = static_cast<std::uint32_t>(v[off + 9]);
    return r;
  }
};

// Shared pool view a store reducer assembles from its state pairs.
struct StorePool {
  std::map<std::uint64_t, NodeRec> nodes;          // rank -> record
  std::map<std::uint64_t, EdgeRec> edges;          // edge id -> record
  std::set<std::uint64_t> fetched;                 // ranks with complete adjacency
  std::map<std::uint64_t, std::uint8_t> annots;    // rank -> bit (K1 only)

  void absorb(const std::vector<Word>& v) {
    switch (v[0]) {
      case ctSNode: {
        NodeRec r = NodeRec::from_words(v, 1);
        auto [it, fresh] = nodes.try_emplace(r.rank, r);
        if (!fresh && r.has_bit) {
          it->second.has_bit = true;
          it->second.bit = r.bit;
        }
        break;
      }
      case ctAnsN: {
        NodeRec r = NodeRec::from_words(v, 2);
        auto [it, fresh] = nodes.try_emplace(r.rank, r);
        if (!fresh && r.has_bit) {
          it->second.has_bit = true;
          it->second.bit = r.bit;
        }
        fetched.insert(r.rank);
        break;
      }
      case ctSEdge: edges.try_emplace(v[1], EdgeRec::from_words(v, 1)); break;
      case ctAnsE: edges.try_emplace(v[2], EdgeRec::from_words(v, 2)); break;
      case ctFetched: fetched.insert(v[1]); break;
      case ctAnnot: annots[v[1]] = static_cast<std::uint8_t>(v[2]); break;
      default: break;
    }
  }

  Pairs emit(Key k) const {
    Pairs out;
    for (const auto& [rank, rec] : nodes) out.push_back({k, rec.to_snode()});
    for (const auto& [e, rec] : edges) out.push_back({k, rec.to_sedge()});
    for (std::uint64_t rank : fetched) out.push_back({k, {ctFetched, rank}});
    return out;
  }

  std::uint32_t level_of(std::uint64_t rank) const {
    auto it = nodes.find(rank);
    if (it != nodes.end()) return it->second.level;
    for (const auto& [e, rec] : edges) {
      if (rec.ru == rank) return rec.lu;
      if (rec.rv == rank) return rec.lv;
    }
    throw Error("store pool has no level for rank " + std::to_string(rank));
  }

  // Down (dir 0): nodes reaching the root from above within s levels.
  // Up (dir 1): nodes reachable from the root below within s levels.
  // Special dum-dum edges never participate.
  void cone(std::uint64_t root, int dir, std::uint32_t root_level, std::size_t s,
            std::set<std::uint64_t>& nodes_out,
            std::set<std::pair<std::uint64_t, std::uint64_t>>& edges_out) const {
    nodes_out.insert(root);
    std::vector<std::uint64_t> stack = {root};
    std::multimap<std::uint64_t, const EdgeRec*> by_head;  // rank the BFS enters at
    for (const auto& [e, rec] : edges) {
      if (rec.special) continue;
      by_head.emplace(dir == 0 ? rec.rv : rec.ru, &rec);
    }
    while (!stack.empty()) {
      std::uint64_t x = stack.back();
      stack.pop_back();
      auto [lo, hi] = by_head.equal_range(x);
      for (auto it = lo; it != hi; ++it) {
        const EdgeRec& rec = *it->second;
        std::uint64_t far = dir == 0 ? rec.ru : rec.rv;
        std::uint32_t far_level = dir == 0 ? rec.lu : rec.lv;
        bool in_band = dir == 0 ? far_level <= root_level + s
                                : far_level + s >= root_level;
        if (!in_band) continue;
        edges_out.insert({rec.ru, rec.rv});
        if (nodes_out.insert(far).second) stack.push_back(far);
      }
    }
  }
};

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

}  // namespace

SubcircuitParams SubcircuitParams::derive(const Circuit& c, double epsilon, double alpha,
                                          std::optional<std::size_t> s_override) {
  if (!(epsilon > 0.0) || !(epsilon < 0.5))
    throw ValidationError("nc pipeline requires 0 < eps < 1/2 strictly");
  if (!(alpha > 0.0) || !(alpha < 1.0 - 2.0 * epsilon))
    throw ValidationError("nc pipeline requires 0 < alpha < 1 - 2*eps");

  SubcircuitParams params;
  params.epsilon = epsilon;
  params.alpha = alpha;
  params.depth = depth_of(c);
  params.n = c.num_inputs();
  params.num_nodes = c.nodes().size();
  params.n_o = c.nodes().size() + c.edges().size();
  params.n_i = c.num_inputs();

  std::map<std::uint32_t, std::size_t> in_deg, out_deg;
  for (const auto& [u, v] : c.edges()) {
    out_deg[u]++;
    in_deg[v]++;
  }
  params.delta = 2;
  for (const auto& [id, d] : in_deg) params.delta = std::max(params.delta, d);
  for (const auto& [id, d] : out_deg) params.delta = std::max(params.delta, d);

  if (s_override) {
    if (*s_override < 1) throw ValidationError("subcircuit depth s must be >= 1");
    params.s = *s_override;
  } else {
    double log_n = std::log2(std::max<double>(2.0, static_cast<double>(params.n)));
    double log_delta = std::log2(static_cast<double>(params.delta));
    params.s = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(alpha * log_n / log_delta)));
  }
  double n_words = static_cast<double>(params.input_words());
  params.beta = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(std::pow(n_words, 1.0 - epsilon - alpha))));
  params.r = std::max<std::size_t>(1, ceil_div(params.depth, params.s));
  return params;
}

EdgeSplit classify_edge(std::uint32_t level_u, std::uint32_t level_v, std::size_t s) {
  EdgeSplit split;
  std::uint32_t band = static_cast<std::uint32_t>(level_v / s);
  std::uint32_t low = static_cast<std::uint32_t>((band + 1) * s);
  if (level_u <= low) return split;  // both endpoints share a band
  std::uint32_t high = static_cast<std::uint32_t>(((level_u - 1) / s) * s);
  if (high == low) {
    split.dums = 1;
    split.upper = split.lower = low;
  } else {
    split.dums = 2;
    split.upper = high;
    split.lower = low;
  }
  return split;
}

AugmentedCircuit augment_jumping_edges(const Circuit& c, const LevelMap& levels, std::size_t s) {
  // New node ids mirror the pipeline's rank allocation: edge e may spawn
  // dums with ids id_base + 2e and id_base + 2e + 1.
  std::uint32_t id_base = 0;
  for (const Node& nd : c.nodes()) id_base = std::max(id_base, nd.id + 1);

  std::vector<Node> nodes = c.nodes();
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> specials;
  LevelMap new_levels(id_base + 2 * c.edges().size(), 0);
  for (const Node& nd : c.nodes()) new_levels[nd.id] = levels[nd.id];

  for (std::size_t e = 0; e < c.edges().size(); ++e) {
    const auto& [u, v] = c.edges()[e];
    EdgeSplit split = classify_edge(levels[u], levels[v], s);
    if (split.dums == 0) {
      edges.emplace_back(u, v);
    } else if (split.dums == 1) {
      std::uint32_t dum = id_base + static_cast<std::uint32_t>(2 * e);
      nodes.push_back({dum, NodeKind::Id, 0});
      new_levels[dum] = split.lower;
      edges.emplace_back(u, dum);
      edges.emplace_back(dum, v);
    } else {
      std::uint32_t dum1 = id_base + static_cast<std::uint32_t>(2 * e);
      std::uint32_t dum2 = dum1 + 1;
      nodes.push_back({dum1, NodeKind::Id, 0});
      nodes.push_back({dum2, NodeKind::Id, 0});
      new_levels[dum1] = split.upper;
      new_levels[dum2] = split.lower;
      edges.emplace_back(u, dum1);
      edges.emplace_back(dum1, dum2);
      edges.emplace_back(dum2, v);
      specials.emplace_back(dum1, dum2);
    }
  }
  return {Circuit(std::move(nodes), std::move(edges), c.output()), std::move(new_levels),
          std::move(specials), c.edges().size()};
}

namespace {

// ---- encoding ----

Pairs encode_node_states(const Circuit& c, const LevelMap* levels) {
  Pairs pairs;
  for (const Node& nd : c.nodes()) {
    std::vector<Word> v(StateIdx::kSize, 0);
    v[0] = ctState;
    v[StateIdx::kId] = nd.id;
    v[StateIdx::kKind] = static_cast<Word>(nd.kind);
    v[StateIdx::kVar] = nd.var;
    v[StateIdx::kOutDeg] = c.consumers(nd.id).size();
    const auto& ps = c.producers(nd.id);
    v[StateIdx::kProdCount] = ps.size();
    if (!ps.empty()) v[StateIdx::kProd0] = ps[0];
    if (ps.size() > 1) v[StateIdx::kProd1] = ps[1];
    if (levels) {
      v[StateIdx::kLeveled] = 1;
      v[StateIdx::kAnnounced] = 1;
      v[StateIdx::kLevel] = (*levels)[nd.id];
    }
    pairs.push_back({make_key(channel::kCNode, nd.id), std::move(v)});
  }
  return pairs;
}

Pairs encode_edges(const Circuit& c) {
  Pairs pairs;
  for (std::size_t e = 0; e < c.edges().size(); ++e) {
    const auto& [u, v] = c.edges()[e];
    pairs.push_back({make_key(channel::kCEdge, e), {ctEF, e, u, v}});
  }
  return pairs;
}

// ---- levels stage: frontier max-relaxation from the sink ----

mrc::RoundProgram level_round() {
  return {
      [](const KeyValuePair& p) -> Pairs {
        if (channel_of(p.key) == channel::kCNode && p.value[0] == ctState &&
            p.value[StateIdx::kLeveled] == 1 && p.value[StateIdx::kAnnounced] == 0) {
          Pairs out;
          std::vector<Word> v = p.value;
          v[StateIdx::kAnnounced] = 1;
          out.push_back({p.key, std::move(v)});
          for (std::size_t i = 0; i < p.value[StateIdx::kProdCount]; ++i)
            out.push_back({make_key(channel::kCNode, p.value[StateIdx::kProd0 + i]),
                           {ctConsLevel, p.value[StateIdx::kLevel]}});
          return out;
        }
        return {p};
      },
      [](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
        Pairs out;
        std::optional<std::vector<Word>> state;
        std::size_t reports = 0;
        Word max_lvl = 0;
        for (const auto& v : vs) {
          if (channel_of(k) == channel::kCNode && v[0] == ctState)
            state = v;
          else if (channel_of(k) == channel::kCNode && v[0] == ctConsLevel) {
            ++reports;
            max_lvl = std::max(max_lvl, v[1]);
          } else
            out.push_back({k, v});
        }
        if (state) {
          std::vector<Word>& st = *state;
          st[StateIdx::kReceived] += reports;
          st[StateIdx::kMaxLvl] = std::max(st[StateIdx::kMaxLvl], max_lvl);
          if (st[StateIdx::kLeveled] == 0) {
            if (st[StateIdx::kOutDeg] == 0) {
              st[StateIdx::kLeveled] = 1;
              st[StateIdx::kLevel] = 0;
            } else if (st[StateIdx::kReceived] == st[StateIdx::kOutDeg]) {
              st[StateIdx::kLeveled] = 1;
              st[StateIdx::kLevel] = st[StateIdx::kMaxLvl] + 1;
            }
          }
          out.push_back({k, st});
        }
        return out;
      },
  };
}

struct LevelsStage {
  Pairs pairs;
  LevelMap levels;
  std::size_t rounds = 0;
};

LevelsStage run_levels_stage(Pairs input, std::size_t num_nodes, mrc::BudgetAccountant& acct) {
  LevelsStage stage;
  mrc::RoundProgram round = level_round();
  std::size_t start = acct.report().rounds_executed();
  Pairs cur = std::move(input);
  for (std::size_t guard = 0; guard <= num_nodes + 2; ++guard) {
    bool all_leveled = true;
    for (const KeyValuePair& p : cur)
      if (channel_of(p.key) == channel::kCNode && p.value[0] == ctState &&
          p.value[StateIdx::kLeveled] == 0)
        all_leveled = false;
    if (all_leveled) {
      stage.pairs = std::move(cur);
      stage.rounds = acct.report().rounds_executed() - start;
      std::uint64_t max_id = 0;
      for (const KeyValuePair& p : stage.pairs)
        if (channel_of(p.key) == channel::kCNode && p.value[0] == ctState)
          max_id = std::max(max_id, p.value[StateIdx::kId]);
      stage.levels.assign(max_id + 1, 0);
      for (const KeyValuePair& p : stage.pairs)
        if (channel_of(p.key) == channel::kCNode && p.value[0] == ctState)
          stage.levels[p.value[StateIdx::kId]] =
              static_cast<std::uint32_t>(p.value[StateIdx::kLevel]);
      return stage;
    }
    cur = mrc::run_round(round, cur, acct);
  }
  throw Error("level relaxation failed to converge");
}

// ---- sort stage: Lemma-11 machine on sorting indices, then two joins ----

struct SortPrep {
  crcw::SortMachine machine;
  std::size_t id_bits = 1;
  std::uint64_t output_rank_source = 0;
};

std::uint64_t pack_sidx(std::uint32_t level, std::uint32_t id, std::size_t id_bits) {
  return (static_cast<std::uint64_t>(level) << id_bits) | id;
}

// J1: ranks meet node states; edges meet their producer endpoint.
mrc::RoundProgram sort_join_from() {
  return {
      [](const KeyValuePair& p) -> Pairs {
        if (channel_of(p.key) == 0) return {};  // machine state retired
        if (channel_of(p.key) == channel::kCEdge && p.value[0] == ctEF)
          return {{make_key(channel::kCNode, p.value[2]), p.value}};
        return {p};
      },
      [](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
        Pairs out;
        std::optional<std::vector<Word>> state;
        std::optional<Word> rank;
        std::vector<std::vector<Word>> edge_froms;
        for (const auto& v : vs) {
          if (channel_of(k) == channel::kCNode && v[0] == ctState)
            state = v;
          else if (channel_of(k) == channel::kCNode && v[0] == ctRank)
            rank = v[1];
          else if (channel_of(k) == channel::kCNode && v[0] == ctEF)
            edge_froms.push_back(v);
          else
            out.push_back({k, v});
        }
        if (!state) return out;
        if (!rank) throw Error("sort join: node has no rank");
        std::vector<Word>& st = *state;
        st[StateIdx::kRank] = *rank;
        Word lu = st[StateIdx::kLevel], ku = st[StateIdx::kKind], varu = st[StateIdx::kVar];
        out.push_back({k, st});
        out.push_back(
            {k, {ctRNode, *rank, lu, st[StateIdx::kId], ku, varu, 0}});
        for (const auto& ef : edge_froms)
          out.push_back({k, {ctEF2, ef[1], *rank, lu, ef[2], ku, varu, ef[3]}});
        return out;
      },
  };
}

// J2: edges meet their consumer endpoint; node records move to rank keys.
mrc::RoundProgram sort_join_to() {
  return {
      [](const KeyValuePair& p) -> Pairs {
        if (channel_of(p.key) == channel::kCNode && p.value[0] == ctEF2)
          return {{make_key(channel::kCNode, p.value[7]), p.value}};
        if (channel_of(p.key) == channel::kCNode && p.value[0] == ctRNode)
          return {{make_key(channel::kRNode, p.value[1]), p.value}};
        return {p};
      },
      [](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
        Pairs out;
        std::optional<std::vector<Word>> state;
        std::vector<std::vector<Word>> halves;
        for (const auto& v : vs) {
          if (channel_of(k) == channel::kCNode && v[0] == ctState)
            state = v;  // consumed: states end here
          else if (channel_of(k) == channel::kCNode && v[0] == ctEF2)
            halves.push_back(v);
          else
            out.push_back({k, v});
        }
        for (const auto& h : halves) {
          if (!state) throw Error("sort join: edge endpoint has no state");
          const std::vector<Word>& st = *state;
          out.push_back({k,
                         {ctREdge, h[1], 0, h[2], h[3], h[4], h[5], h[6], st[StateIdx::kRank],
                          st[StateIdx::kLevel], st[StateIdx::kId], st[StateIdx::kKind],
                          st[StateIdx::kVar]}});
        }
        return out;
      },
  };
}

// ---- distribute stage: Lemma 4-6 machinery over input-node mentions ----

pbp_mrc::rounds::MentionExtractor input_node_mentions(const pbp_mrc::BlockParams& bparams) {
  std::size_t d = bparams.d;
  return [d](const KeyValuePair& p) -> std::optional<std::pair<std::uint64_t, std::uint32_t>> {
    if (channel_of(p.key) != channel::kRNode || p.value[0] != ctRNode) return std::nullopt;
    if (static_cast<NodeKind>(p.value[4]) != NodeKind::Input) return std::nullopt;
    return {{p.value[1] / d, static_cast<std::uint32_t>(p.value[5])}};
  };
}

mrc::RoundProgram circuit_route_tag(const pbp_mrc::BlockParams& bparams, std::size_t n,
                                    std::size_t num_ranks) {
  std::size_t d = bparams.d;
  std::size_t ell = bparams.ell;
  std::size_t kappas = std::max<std::size_t>(
      {ceil_div(std::max<std::size_t>(num_ranks, 1), d), ceil_div(std::max<std::size_t>(n, 1), d), 1});
  return {
      [d, kappas](const KeyValuePair& p) -> Pairs {
        std::uint8_t ch = channel_of(p.key);
        if (ch == channel::kRNode && p.value[0] == ctRNode) {
          Pairs out{p};
          if (static_cast<NodeKind>(p.value[4]) == NodeKind::Input)
            out.push_back({make_key(pbp_mrc::channel::kRoute, p.value[1] / d),
                           {ctNodeMention, 0, p.value[1], p.value[5], p.value[2]}});
          return out;
        }
        if (ch == pbp_mrc::channel::kAssign)
          return {{make_key(pbp_mrc::channel::kRoute, index_of(p.key) / d),
                   {pbp_mrc::tags::kAssignAt, p.value[0] >> 1, p.value[0] & 1}}};
        if (ch == pbp_mrc::channel::kYBlock && p.value[0] == pbp_mrc::tags::kSigma) {
          Pairs out;
          for (std::size_t kp = 0; kp < kappas; ++kp)
            out.push_back({make_key(pbp_mrc::channel::kRoute, kp),
                           {pbp_mrc::tags::kSplit, p.value[1], p.value[2]}});
          return out;
        }
        return {p};
      },
      [ell](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
        Pairs out;
        std::vector<std::int64_t> sigma(ell + 1, 0);
        std::vector<std::vector<Word>> mentions, assigns;
        for (const auto& v : vs) {
          if (channel_of(k) != pbp_mrc::channel::kRoute) {
            out.push_back({k, v});
            continue;
          }
          if (v[0] == pbp_mrc::tags::kSplit)
            sigma[v[1]] = static_cast<std::int64_t>(v[2]) - 1;
          else if (v[0] == ctNodeMention)
            mentions.push_back(v);
          else if (v[0] == pbp_mrc::tags::kAssignAt)
            assigns.push_back(v);
          else
            out.push_back({k, v});
        }
        if (channel_of(k) != pbp_mrc::channel::kRoute) return out;
        auto range_of = [&sigma](std::uint64_t var) {
          auto it = std::lower_bound(sigma.begin() + 1, sigma.end(), static_cast<std::int64_t>(var));
          return static_cast<std::uint64_t>(it - sigma.begin()) - 1;
        };
        for (auto& m : mentions) {
          m[1] = range_of(m[3]);
          out.push_back({k, m});
        }
        for (const auto& a : assigns)
          out.push_back({k, {pbp_mrc::tags::kAssignTagged, range_of(a[1]), a[1], a[2]}});
        return out;
      },
  };
}

mrc::RoundProgram circuit_route_match() {
  return {
      [](const KeyValuePair& p) -> Pairs {
        if (channel_of(p.key) == pbp_mrc::channel::kRoute &&
            (p.value[0] == ctNodeMention || p.value[0] == pbp_mrc::tags::kAssignTagged))
          return {{make_key(pbp_mrc::channel::kRange, p.value[1]), p.value}};
        return {p};
      },
      [](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
        Pairs out;
        std::map<std::uint64_t, Word> bits;
        std::vector<std::vector<Word>> mentions;
        for (const auto& v : vs) {
          if (channel_of(k) == pbp_mrc::channel::kRange && v[0] == pbp_mrc::tags::kAssignTagged)
            bits[v[2]] = v[3];
          else if (channel_of(k) == pbp_mrc::channel::kRange && v[0] == ctNodeMention)
            mentions.push_back(v);
          else
            out.push_back({k, v});
        }
        for (const auto& m : mentions) {
          auto it = bits.find(m[3]);
          if (it == bits.end())
            throw Error("unassigned input variable x" + std::to_string(m[3]) +
                        " reachable from output");
          out.push_back({k, {ctAnnot, m[2], it->second, m[4], m[3]}});
        }
        return out;
      },
  };
}

// ---- augment round ----

mrc::RoundProgram augment_round(std::size_t s, std::uint64_t rank_base, std::uint64_t id_base,
                                std::uint64_t edge_base) {
  return {
      [s, rank_base, id_base, edge_base](const KeyValuePair& p) -> Pairs {
        if (p.value.empty() || p.value[0] != ctREdge) return {p};
        const std::vector<Word>& v = p.value;
        std::uint64_t e = v[1];
        std::uint64_t ru = v[3], lu = v[4], u = v[5], ku = v[6], varu = v[7];
        std::uint64_t rv = v[8], lv = v[9], nv = v[10], kv = v[11], varv = v[12];
        EdgeSplit split =
            classify_edge(static_cast<std::uint32_t>(lu), static_cast<std::uint32_t>(lv), s);
        Word kid = static_cast<Word>(NodeKind::Id);
        if (split.dums == 0)
          return {{make_key(channel::kREdge, e), {ctREdge, e, 0, ru, lu, u, ku, varu, rv, lv, nv, kv, varv}}};
        std::uint64_t e0 = edge_base + 3 * e, e1 = e0 + 1, e2 = e0 + 2;
        if (split.dums == 1) {
          std::uint64_t dr = rank_base + 2 * e, di = id_base + 2 * e;
          return {
              {make_key(channel::kRNode, dr), {ctRNode, dr, split.lower, di, kid, 0, 0}},
              {make_key(channel::kREdge, e0),
               {ctREdge, e0, 0, ru, lu, u, ku, varu, dr, split.lower, di, kid, 0}},
              {make_key(channel::kREdge, e1),
               {ctREdge, e1, 0, dr, split.lower, di, kid, 0, rv, lv, nv, kv, varv}},
          };
        }
        std::uint64_t dr1 = rank_base + 2 * e, di1 = id_base + 2 * e;
        std::uint64_t dr2 = dr1 + 1, di2 = di1 + 1;
        return {
            {make_key(channel::kRNode, dr1), {ctRNode, dr1, split.upper, di1, kid, 0, 0}},
            {make_key(channel::kRNode, dr2), {ctRNode, dr2, split.lower, di2, kid, 0, 1}},
            {make_key(channel::kREdge, e0),
             {ctREdge, e0, 0, ru, lu, u, ku, varu, dr1, split.upper, di1, kid, 0}},
            {make_key(channel::kREdge, e1),
             {ctREdge, e1, 1, dr1, split.upper, di1, kid, 0, dr2, split.lower, di2, kid, 0}},
            {make_key(channel::kREdge, e2),
             {ctREdge, e2, 0, dr2, split.lower, di2, kid, 0, rv, lv, nv, kv, varv}},
        };
      },
      [](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
        Pairs out;
        for (const auto& v : vs) out.push_back({k, v});
        return out;
      },
  };
}

// ---- construction stage ----

struct StoreCtx {
  std::size_t beta = 1;
  std::size_t s = 1;
  std::size_t r = 1;
  std::size_t depth = 0;
  std::uint64_t output_rank = 0;
};

// Collect requests for the unexpanded interior of every boundary cone.
Pairs frontier_requests(const StorePool& pool, const StoreCtx& ctx, Key k, std::uint64_t block) {
  std::set<std::uint64_t> want;
  for (const auto& [rank, rec] : pool.nodes) {
    if (rank / ctx.beta != block) continue;
    if (rec.level % ctx.s != 0) continue;
    std::uint32_t root_level = rec.level;
    for (int dir : {0, 1}) {
      std::set<std::uint64_t> cone_nodes;
      std::set<std::pair<std::uint64_t, std::uint64_t>> cone_edges;
      pool.cone(rank, dir, root_level, ctx.s, cone_nodes, cone_edges);
      for (std::uint64_t x : cone_nodes) {
        if (pool.fetched.count(x)) continue;
        std::uint32_t lx = pool.level_of(x);
        bool interior = dir == 0 ? (lx > root_level && lx < root_level + ctx.s)
                                 : (lx < root_level && lx + ctx.s > root_level);
        if (interior) want.insert(x);
      }
    }
  }
  Pairs out;
  for (std::uint64_t x : want) out.push_back({k, {ctReq, x, block}});
  return out;
}

// Boundary values emitted for the roots at the very top band when the depth
// is a multiple of s (those roots are sources carrying their input bit).
Pairs top_band_values(const StorePool& pool, const StoreCtx& ctx, Key k, std::uint64_t block) {
  Pairs out;
  if (ctx.depth == 0 || ctx.depth % ctx.s != 0) return out;
  std::uint32_t top = static_cast<std::uint32_t>(ctx.r * ctx.s);
  for (const auto& [rank, rec] : pool.nodes) {
    if (rank / ctx.beta != block || rec.level != top) continue;
    if (!rec.has_bit) throw Error("top-band source lacks its input bit");
    std::set<std::uint64_t> cone_nodes;
    std::set<std::pair<std::uint64_t, std::uint64_t>> cone_edges;
    pool.cone(rank, 1, rec.level, ctx.s, cone_nodes, cone_edges);
    std::set<std::uint64_t> dests;
    for (std::uint64_t x : cone_nodes)
      if (pool.level_of(x) == rec.level - ctx.s) dests.insert(x / ctx.beta);
    for (std::uint64_t dest : dests) out.push_back({k, {ctVal, dest, rank, rec.bit}});
  }
  return out;
}

mrc::RoundProgram construct_init(const StoreCtx& ctx) {
  std::size_t beta = ctx.beta;
  return {
      [beta](const KeyValuePair& p) -> Pairs {
        if (channel_of(p.key) == channel::kRNode && p.value[0] == ctRNode) {
          const std::vector<Word>& v = p.value;
          return {{make_key(channel::kStore, v[1] / beta),
                   {ctSNode, v[1], v[2], v[3], v[4], v[5], 0, 0, v[6]}}};
        }
        if (channel_of(p.key) == pbp_mrc::channel::kRange && p.value[0] == ctAnnot)
          return {{make_key(channel::kStore, p.value[1] / beta), p.value}};
        if (p.value[0] == ctREdge && channel_of(p.key) == channel::kREdge) {
          const std::vector<Word>& v = p.value;
          std::vector<Word> rec = {ctSEdge, v[1], v[2], v[3], v[4], v[6], v[7],
                                   v[8], v[9], v[11], v[12]};
          Pairs out = {{make_key(channel::kStore, v[3] / beta), rec}};
          if (v[8] / beta != v[3] / beta)
            out.push_back({make_key(channel::kStore, v[8] / beta), rec});
          return out;
        }
        return {p};
      },
      [ctx](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
        Pairs out;
        StorePool pool;
        for (const auto& v : vs) {
          if (channel_of(k) == channel::kStore)
            pool.absorb(v);
          else
            out.push_back({k, v});
        }
        if (channel_of(k) != channel::kStore) return out;
        std::uint64_t block = index_of(k);
        for (auto& [rank, rec] : pool.nodes) {
          auto it = pool.annots.find(rank);
          if (it != pool.annots.end()) {
            rec.has_bit = true;
            rec.bit = it->second;
          }
          pool.fetched.insert(rank);  // owned adjacency is complete
        }
        Pairs state = pool.emit(k);
        out.insert(out.end(), state.begin(), state.end());
        Pairs reqs = frontier_requests(pool, ctx, k, block);
        out.insert(out.end(), reqs.begin(), reqs.end());
        return out;
      },
  };
}

mrc::RoundProgram construct_answer(const StoreCtx& ctx) {
  std::size_t beta = ctx.beta;
  return {
      [beta](const KeyValuePair& p) -> Pairs {
        if (channel_of(p.key) == channel::kStore && p.value[0] == ctReq)
          return {{make_key(channel::kStore, p.value[1] / beta), p.value}};
        return {p};
      },
      [](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
        Pairs out;
        StorePool pool;
        std::set<std::pair<std::uint64_t, std::uint64_t>> reqs;  // (u, from)
        for (const auto& v : vs) {
          if (channel_of(k) != channel::kStore) {
            out.push_back({k, v});
            continue;
          }
          if (v[0] == ctReq)
            reqs.insert({v[1], v[2]});
          else
            pool.absorb(v);
        }
        if (channel_of(k) != channel::kStore) return out;
        Pairs state = pool.emit(k);
        out.insert(out.end(), state.begin(), state.end());
        for (const auto& [u, from] : reqs) {
          auto it = pool.nodes.find(u);
          if (it == pool.nodes.end())
            throw Error("edge request for rank " + std::to_string(u) + " reached the wrong block");
          const NodeRec& rec = it->second;
          out.push_back({k, {ctAnsN, from, rec.rank, rec.level, rec.id,
                             static_cast<Word>(rec.kind), rec.var,
                             rec.has_bit ? Word{1} : Word{0}, rec.bit,
                             rec.is_dum2 ? Word{1} : Word{0}}});
          for (const auto& [e, er] : pool.edges) {
            if (er.ru != u && er.rv != u) continue;
            out.push_back({k, {ctAnsE, from, er.e, er.special ? Word{1} : Word{0}, er.ru, er.lu,
                               static_cast<Word>(er.ku), er.varu, er.rv, er.lv,
                               static_cast<Word>(er.kv), er.varv}});
          }
        }
        return out;
      },
  };
}

mrc::RoundProgram construct_merge(const StoreCtx& ctx, bool last_iteration) {
  return {
      [](const KeyValuePair& p) -> Pairs {
        if (channel_of(p.key) == channel::kStore &&
            (p.value[0] == ctAnsN || p.value[0] == ctAnsE))
          return {{make_key(channel::kStore, p.value[1]), p.value}};
        return {p};
      },
      [ctx, last_iteration](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
        Pairs out;
        StorePool pool;
        for (const auto& v : vs) {
          if (channel_of(k) == channel::kStore)
            pool.absorb(v);
          else
            out.push_back({k, v});
        }
        if (channel_of(k) != channel::kStore) return out;
        std::uint64_t block = index_of(k);
        Pairs state = pool.emit(k);
        out.insert(out.end(), state.begin(), state.end());
        if (!last_iteration) {
          Pairs reqs = frontier_requests(pool, ctx, k, block);
          out.insert(out.end(), reqs.begin(), reqs.end());
        } else {
          Pairs vals = top_band_values(pool, ctx, k, block);
          out.insert(out.end(), vals.begin(), vals.end());
        }
        return out;
      },
  };
}

// ---- evaluation stage ----

mrc::RoundProgram evaluate_phase(const StoreCtx& ctx, std::size_t phase) {
  return {
      [](const KeyValuePair& p) -> Pairs {
        if (channel_of(p.key) == channel::kStore &&
            (p.value[0] == ctVal || p.value[0] == ctDumVal))
          return {{make_key(channel::kStore, p.value[1]), p.value}};
        return {p};
      },
      [ctx, phase](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
        Pairs out;
        StorePool pool;
        std::map<std::uint64_t, std::uint8_t> leaf_vals;
        std::vector<std::vector<Word>> dum_vals;
        for (const auto& v : vs) {
          if (channel_of(k) != channel::kStore) {
            out.push_back({k, v});
            continue;
          }
          if (v[0] == ctVal)
            leaf_vals[v[2]] = static_cast<std::uint8_t>(v[3]);
          else if (v[0] == ctDumVal)
            dum_vals.push_back(v);
          else
            pool.absorb(v);
        }
        if (channel_of(k) != channel::kStore) return out;
        std::uint64_t block = index_of(k);
        Pairs state = pool.emit(k);
        out.insert(out.end(), state.begin(), state.end());

        std::uint32_t band_level = static_cast<std::uint32_t>(phase * ctx.s);
        std::uint32_t leaf_level = static_cast<std::uint32_t>((phase + 1) * ctx.s);
        std::map<std::uint64_t, std::uint8_t> root_vals;

        for (const auto& [rank, rec] : pool.nodes) {
          if (rank / ctx.beta != block || rec.level != band_level || rec.is_dum2) continue;
          std::set<std::uint64_t> cone_nodes;
          std::set<std::pair<std::uint64_t, std::uint64_t>> cone_edges;
          pool.cone(rank, 0, rec.level, ctx.s, cone_nodes, cone_edges);

          std::map<std::uint64_t, NodeKind> kind_of;
          for (const auto& [e, er] : pool.edges) {
            kind_of[er.ru] = er.ku;
            kind_of[er.rv] = er.kv;
          }
          for (const auto& [nr, nrec] : pool.nodes) kind_of[nr] = nrec.kind;

          std::vector<std::pair<std::uint32_t, std::uint64_t>> order;  // (level, rank) desc
          for (std::uint64_t x : cone_nodes) order.push_back({pool.level_of(x), x});
          std::sort(order.begin(), order.end(), std::greater<>());

          std::map<std::uint64_t, std::uint8_t> val;
          for (const auto& [lx, x] : order) {
            if (x != rank && lx == leaf_level) {
              auto it = leaf_vals.find(x);
              if (it == leaf_vals.end())
                throw Error("missing dependency value at phase " + std::to_string(phase) +
                            " for rank " + std::to_string(x));
              val[x] = it->second;
              continue;
            }
            NodeKind kind = kind_of.at(x);
            if (kind == NodeKind::Input) {
              auto nit = pool.nodes.find(x);
              if (nit == pool.nodes.end() || !nit->second.has_bit)
                throw Error("input rank " + std::to_string(x) + " has no bit in the store");
              val[x] = nit->second.bit;
              continue;
            }
            // gather producers from the edge multiset: parallel edges count
            // once per copy
            std::vector<std::uint8_t> ins;
            for (const auto& [e, er] : pool.edges)
              if (er.rv == x && cone_edges.count({er.ru, er.rv})) ins.push_back(val.at(er.ru));
            int expect = fan_in_of(kind);
            if (static_cast<int>(ins.size()) != expect)
              throw Error("missing dependency value at phase " + std::to_string(phase) +
                          " for rank " + std::to_string(x));
            switch (kind) {
              case NodeKind::And: val[x] = ins[0] & ins[1]; break;
              case NodeKind::Or: val[x] = ins[0] | ins[1]; break;
              case NodeKind::Not: val[x] = ins[0] ^ 1; break;
              case NodeKind::Id: val[x] = ins[0]; break;
              case NodeKind::Input: break;
            }
          }
          root_vals[rank] = val.at(rank);
        }

        // Route values of this band's roots to the cones one band below.
        for (const auto& [rank, value] : root_vals) {
          if (phase == 0) {
            if (rank == ctx.output_rank) out.push_back({k, {ctVerdict, value}});
            continue;
          }
          const NodeRec& rec = pool.nodes.at(rank);
          std::set<std::uint64_t> cone_nodes;
          std::set<std::pair<std::uint64_t, std::uint64_t>> cone_edges;
          pool.cone(rank, 1, rec.level, ctx.s, cone_nodes, cone_edges);
          std::set<std::uint64_t> dests;
          for (std::uint64_t x : cone_nodes)
            if (pool.level_of(x) + ctx.s == rec.level) dests.insert(x / ctx.beta);
          for (std::uint64_t dest : dests) out.push_back({k, {ctVal, dest, rank, value}});
        }

        // Special dum-dum edges: the dum1 side fires its freshly computed
        // value toward dum2's owner; dum2's owner replays it to the cones
        // below when dum2's band comes up.
        for (const auto& [e, er] : pool.edges) {
          if (!er.special || er.ru / ctx.beta != block) continue;
          if (er.lu != band_level) continue;
          auto it = root_vals.find(er.ru);
          if (it == root_vals.end()) throw Error("special edge source was not evaluated");
          out.push_back({k, {ctDumVal, er.rv / ctx.beta, er.rv, it->second}});
        }
        for (const auto& dv : dum_vals) {
          std::uint64_t dum2 = dv[2];
          const NodeRec& rec = pool.nodes.at(dum2);
          if (rec.level == phase * ctx.s) {
            std::set<std::uint64_t> cone_nodes;
            std::set<std::pair<std::uint64_t, std::uint64_t>> cone_edges;
            pool.cone(dum2, 1, rec.level, ctx.s, cone_nodes, cone_edges);
            std::set<std::uint64_t> dests;
            for (std::uint64_t x : cone_nodes)
              if (pool.level_of(x) + ctx.s == rec.level) dests.insert(x / ctx.beta);
            for (std::uint64_t dest : dests)
              out.push_back({k, {ctVal, dest, dum2, dv[3]}});
          } else {
            out.push_back({k, dv});
          }
        }
        return out;
      },
  };
}

}  // namespace

LevelsRun mr_compute_levels(const Circuit& c) {
  mrc::Budget budget(0.5, std::max<std::size_t>(1, c.nodes().size() + c.edges().size()));
  mrc::BudgetAccountant acct(budget, {.mode = mrc::BudgetMode::Advisory});
  Pairs input = encode_node_states(c, nullptr);
  Pairs edges = encode_edges(c);
  input.insert(input.end(), edges.begin(), edges.end());
  LevelsStage stage = run_levels_stage(std::move(input), c.nodes().size(), acct);
  return {stage.levels, stage.rounds};
}

namespace {

struct SortStage {
  Pairs pairs;
  std::vector<std::uint64_t> rank_of_id;
  std::size_t rounds = 0;
};

SortStage run_sort_stage(Pairs input, const Circuit& c, const LevelMap& levels,
                         mrc::BudgetAccountant& acct) {
  std::size_t start = acct.report().rounds_executed();
  std::uint32_t max_id = 0;
  for (const Node& nd : c.nodes()) max_id = std::max(max_id, nd.id);
  std::size_t id_bits = std::max<std::size_t>(1, std::bit_width(static_cast<std::uint64_t>(max_id)));

  std::vector<std::uint64_t> packed;
  for (const Node& nd : c.nodes()) packed.push_back(pack_sidx(levels[nd.id], nd.id, id_bits) + 1);
  std::uint64_t domain = 0;
  for (std::uint64_t v : packed) domain = std::max(domain, v);

  crcw::SortMachine machine = crcw::build_sort_machine(packed, domain);
  crcw_mrc::SimulationPlan plan = crcw_mrc::SimulationPlan::with_tree_depth(machine.machine, 2);
  std::vector<mrc::RoundProgram> sim = crcw_mrc::build_simulation_program(machine.machine, plan);

  std::vector<crcw::Reg> preload(packed.size());
  for (std::size_t i = 0; i < packed.size(); ++i) preload[i] = static_cast<crcw::Reg>(packed[i]);
  Pairs machine_pairs = crcw_mrc::encode_machine_state(machine.machine, preload);
  input.insert(input.end(), machine_pairs.begin(), machine_pairs.end());

  Pairs cur = mrc::run_program(sim, std::move(input), acct);

  // Ranks from the machine's output region, re-injected as join pairs.
  std::vector<std::uint64_t> sorted(packed.size(), 0);
  for (const KeyValuePair& p : cur)
    if (channel_of(p.key) == 0 && !p.value.empty() && p.value[0] == 1 /*kCell*/ &&
        p.key >= machine.output_base && p.key < machine.output_base + packed.size())
      sorted[p.key - machine.output_base] = static_cast<std::uint64_t>(p.value[1]);

  SortStage stage;
  stage.rank_of_id.assign(max_id + 1, 0);
  for (std::size_t r = 0; r < sorted.size(); ++r) {
    std::uint64_t idx = sorted[r] - 1;  // undo the domain shift
    std::uint64_t id = idx & ((std::uint64_t{1} << id_bits) - 1);
    stage.rank_of_id[id] = r;
    cur.push_back({make_key(channel::kCNode, id), {ctRank, r}});
  }

  cur = mrc::run_round(sort_join_from(), cur, acct);
  cur = mrc::run_round(sort_join_to(), cur, acct);
  stage.pairs = std::move(cur);
  stage.rounds = acct.report().rounds_executed() - start;
  return stage;
}

struct DistributeStage {
  Pairs pairs;
  std::size_t rounds = 0;
};

DistributeStage run_distribute_stage(Pairs input, const pbp_mrc::BlockParams& bparams,
                                     std::size_t n, std::size_t num_ranks,
                                     mrc::BudgetAccountant& acct) {
  std::size_t start = acct.report().rounds_executed();
  std::vector<mrc::RoundProgram> program = {
      pbp_mrc::rounds::count_mentions(bparams, input_node_mentions(bparams)),
      pbp_mrc::rounds::count_markers(),
      pbp_mrc::rounds::psum_local(bparams, n),
      pbp_mrc::rounds::psum_totals(bparams, n),
      pbp_mrc::rounds::psum_offsets(),
      pbp_mrc::rounds::split_detect(bparams, n),
      circuit_route_tag(bparams, n, num_ranks),
      circuit_route_match(),
  };
  DistributeStage stage;
  stage.pairs = mrc::run_program(program, std::move(input), acct);
  stage.rounds = acct.report().rounds_executed() - start;
  return stage;
}

struct PipelineState {
  SubcircuitParams params;
  pbp_mrc::BlockParams block_params;
  LevelMap levels;
  std::vector<std::uint64_t> rank_of_id;
  Pairs pairs;
  std::vector<pbp_mrc::StageRounds> stages;
};

PipelineState run_through_construction(const Circuit& c, const Assignment& a,
                                       const SubcircuitParams& params, LevelsMode levels_mode,
                                       mrc::BudgetAccountant& acct) {
  if (a.size() != c.num_inputs()) throw ValidationError("assignment length mismatch");
  PipelineState st;
  st.params = params;

  // Stage 1: levels.
  std::size_t level_rounds = 0;
  if (levels_mode == LevelsMode::Oracle) {
    st.levels = levels_direct(c);
    st.pairs = encode_node_states(c, &st.levels);
  } else {
    Pairs input = encode_node_states(c, nullptr);
    LevelsStage ls = run_levels_stage(std::move(input), c.nodes().size(), acct);
    st.levels = ls.levels;
    st.pairs = std::move(ls.pairs);
    level_rounds = ls.rounds;
  }
  st.stages.push_back({"levels", level_rounds});
  Pairs edges = encode_edges(c);
  st.pairs.insert(st.pairs.end(), edges.begin(), edges.end());
  mrc::Pairs assign = pbp_mrc::encode_assignment(a);
  st.pairs.insert(st.pairs.end(), assign.begin(), assign.end());

  // Stage 2: sort by level.
  SortStage sort = run_sort_stage(std::move(st.pairs), c, st.levels, acct);
  st.rank_of_id = sort.rank_of_id;
  st.pairs = std::move(sort.pairs);
  st.stages.push_back({"sort", sort.rounds});

  // Stage 3: distribute the input assignment.
  st.block_params = pbp_mrc::BlockParams::derive(params.n_o, params.n_i, params.epsilon);
  DistributeStage dist =
      run_distribute_stage(std::move(st.pairs), st.block_params, params.n, c.nodes().size(), acct);
  st.pairs = std::move(dist.pairs);
  st.stages.push_back({"distribute", dist.rounds});

  // Stage 4: augment jumping edges.
  std::size_t astart = acct.report().rounds_executed();
  st.pairs = mrc::run_round(
      augment_round(params.s, c.nodes().size(), st.rank_of_id.size(), c.edges().size()), st.pairs,
      acct);
  st.stages.push_back({"augment", acct.report().rounds_executed() - astart});

  // Stage 5: construct the up/down-circuits.
  StoreCtx ctx{params.beta, params.s, params.r, params.depth,
               st.rank_of_id.empty() ? 0 : st.rank_of_id[c.output()]};
  std::size_t cstart = acct.report().rounds_executed();
  st.pairs = mrc::run_round(construct_init(ctx), st.pairs, acct);
  for (std::size_t it = 1; it <= params.s; ++it) {
    st.pairs = mrc::run_round(construct_answer(ctx), st.pairs, acct);
    st.pairs = mrc::run_round(construct_merge(ctx, it == params.s), st.pairs, acct);
  }
  st.stages.push_back({"construct", acct.report().rounds_executed() - cstart});
  return st;
}

}  // namespace

SortRun mr_sort_by_level(const Circuit& c, const LevelMap& levels, double epsilon, double c_space,
                         double c_total) {
  mrc::Budget budget(epsilon,
                     std::max<std::size_t>(1, c.nodes().size() + c.edges().size() + c.num_inputs()),
                     c_space, c_total);
  mrc::BudgetAccountant acct(budget, {.mode = mrc::BudgetMode::Advisory});
  Pairs input = encode_node_states(c, &levels);
  Pairs edges = encode_edges(c);
  input.insert(input.end(), edges.begin(), edges.end());
  SortStage stage = run_sort_stage(std::move(input), c, levels, acct);
  return {stage.rank_of_id, stage.rounds};
}

DistributeRun distribute_circuit_input(const Circuit& c, const Assignment& a, double epsilon) {
  SubcircuitParams params = SubcircuitParams::derive(c, epsilon, (1.0 - 2.0 * epsilon) / 2.0);
  mrc::Budget budget(epsilon, std::max<std::size_t>(1, params.input_words()));
  mrc::BudgetAccountant acct(budget, {.mode = mrc::BudgetMode::Advisory});

  LevelMap levels = levels_direct(c);
  Pairs input = encode_node_states(c, &levels);
  Pairs edges = encode_edges(c);
  input.insert(input.end(), edges.begin(), edges.end());
  mrc::Pairs assign = pbp_mrc::encode_assignment(a);
  input.insert(input.end(), assign.begin(), assign.end());

  SortStage sort = run_sort_stage(std::move(input), c, levels, acct);
  pbp_mrc::BlockParams bparams = pbp_mrc::BlockParams::derive(params.n_o, params.n_i, epsilon);
  std::size_t start = acct.report().rounds_executed();
  DistributeStage dist =
      run_distribute_stage(std::move(sort.pairs), bparams, params.n, c.nodes().size(), acct);

  DistributeRun run;
  run.rounds = acct.report().rounds_executed() - start;
  for (const KeyValuePair& p : dist.pairs)
    if (channel_of(p.key) == pbp_mrc::channel::kRange && !p.value.empty() && p.value[0] == ctAnnot)
      run.inputs.push_back({p.value[1], static_cast<std::uint32_t>(p.value[3]),
                            static_cast<std::uint32_t>(p.value[4]),
                            static_cast<std::uint8_t>(p.value[2])});
  std::sort(run.inputs.begin(), run.inputs.end());
  return run;
}

BuildRun build_updown_circuits(const Circuit& c, const Assignment& a, const SubcircuitParams& params,
                               LevelsMode levels_mode) {
  mrc::Budget budget(params.epsilon, std::max<std::size_t>(1, params.input_words()));
  mrc::BudgetAccountant acct(budget, {.mode = mrc::BudgetMode::Advisory});
  PipelineState st = run_through_construction(c, a, params, levels_mode, acct);

  BuildRun run;
  run.rounds = st.stages.back().rounds;

  // Reassemble each block's pool and extract the cones it owns.
  std::map<std::uint64_t, StorePool> pools;
  for (const KeyValuePair& p : st.pairs)
    if (channel_of(p.key) == channel::kStore) pools[index_of(p.key)].absorb(p.value);
  for (const auto& [block, pool] : pools) {
    for (const auto& [rank, rec] : pool.nodes) {
      if (rank / params.beta != block || rec.level % params.s != 0) continue;
      for (int dir : {0, 1}) {
        ConeRecord cone;
        cone.root = rank;
        cone.dir = dir;
        pool.cone(rank, dir, rec.level, params.s, cone.nodes, cone.edges);
        run.cones.push_back(std::move(cone));
      }
    }
  }
  std::sort(run.cones.begin(), run.cones.end());
  return run;
}

NcResult run_nc_pipeline(const Circuit& c, const Assignment& a, double epsilon, double alpha,
                         std::optional<std::size_t> s_override, LevelsMode levels_mode,
                         double c_space, double c_total, mrc::ExecOptions options) {
  SubcircuitParams params = SubcircuitParams::derive(c, epsilon, alpha, s_override);
  mrc::Budget budget(epsilon, std::max<std::size_t>(1, params.input_words()), c_space, c_total);
  mrc::BudgetAccountant acct(budget, options);

  PipelineState st = run_through_construction(c, a, params, levels_mode, acct);

  StoreCtx ctx{params.beta, params.s, params.r, params.depth, st.rank_of_id[c.output()]};
  std::size_t estart = acct.report().rounds_executed();
  std::optional<std::uint8_t> verdict;
  for (std::size_t phase = params.r; phase-- > 0;) {
    st.pairs = mrc::run_round(evaluate_phase(ctx, phase), st.pairs, acct);
    for (const KeyValuePair& p : st.pairs)
      if (channel_of(p.key) == channel::kStore && !p.value.empty() && p.value[0] == ctVerdict)
        verdict = static_cast<std::uint8_t>(p.value[1]);
  }
  st.stages.push_back({"evaluate", acct.report().rounds_executed() - estart});
  if (!verdict) throw Error("pipeline produced no verdict");

  NcResult result;
  result.bit = *verdict;
  result.report = acct.report();
  result.stages = st.stages;
  result.total_rounds = acct.report().rounds_executed();
  result.params = params;
  result.block_params = st.block_params;
  result.round_outputs = acct.round_outputs();
  for (std::size_t r = estart >= (params.s * 2 + 1) ? estart - params.s * 2 - 1 : 0;
       r < result.report.rounds.size(); ++r)
    result.max_store_words =
        std::max(result.max_store_words, result.report.rounds[r].max_reducer_in_words);
  return result;
}

}  // namespace ncmr::circuit_mrc
