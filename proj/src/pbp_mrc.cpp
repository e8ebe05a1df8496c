#include "ncmr/pbp_mrc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "ncmr/crcw_to_mrc.hpp"

namespace ncmr::pbp_mrc {

using mrc::Key;
using mrc::KeyValuePair;
using mrc::Pairs;
using mrc::Word;

mrc::Key make_key(std::uint8_t ch, std::uint64_t index) { return mrc::make_key(ch, index); }
std::uint8_t channel_of(mrc::Key k) { return mrc::key_channel(k); }
std::uint64_t index_of(mrc::Key k) { return mrc::key_index(k); }

namespace {

// Stage-internal value tags. Disjoint from the crcw_to_mrc tags (< 32) so
// these rounds compose with embedded machine simulations.
enum Tag : Word {
  tMentionRaw = 32,    // [t, var]
  tMention = 33,       // [t, var]
  tOne = 34,           // [t]
  tCount = 35,         // [t, var, count]
  tCountAt = 36,       // [t, var, count]
  tPsum = 37,          // [t, j, local_y]
  tLast = 38,          // [t, b, local_last]
  tZOff = 39,          // [t, b_target, z]
  tY = 40,             // [t, j, y]
  tYLeft = 41,         // [t, j, y]
  tSigma = 42,         // [t, q, sigma+1]
  tSplit = 43,         // [t, q, sigma+1]
  tLineAt = 44,        // [t, p, packed_line]
  tAssignAt = 45,      // [t, var, bit]
  tMentionFirst = 46,  // [t, range_q, block_q, p_first, var]
  tAssignTagged = 47,  // [t, range_q, var, bit]
  tAlpha = 48,         // [t, block_q, p_first, var, bit]
  tLine3 = 49,         // [t, p, packed_line]
  tAlpha2 = 50,        // [t, block_q, p_first, var, bit]
  tTable = 51,         // [t, q, row_count, rows...]
  tVerdict = 52,       // [t, bit]
  tSeed = 53,          // [t] forces a y-block reducer into existence
};

constexpr std::uint64_t kMaxVar = 1u << 16;

Word pack_line(std::uint32_t var, const Permutation& f, const Permutation& g) {
  return (static_cast<Word>(var) << 32) | (static_cast<Word>(f.rank()) << 16) |
         static_cast<Word>(g.rank());
}
std::uint32_t line_var(Word w) { return static_cast<std::uint32_t>(w >> 32); }
std::uint32_t line_f_rank(Word w) { return static_cast<std::uint32_t>((w >> 16) & 0xffff); }
std::uint32_t line_g_rank(Word w) { return static_cast<std::uint32_t>(w & 0xffff); }

Word pack_assign(std::uint32_t var, std::uint8_t bit) {
  return (static_cast<Word>(var) << 1) | bit;
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

// q in [0, ell) with sigma[q] < var <= sigma[q+1].
std::size_t range_of_var(const std::vector<std::int64_t>& sigma, std::uint64_t var) {
  auto it = std::lower_bound(sigma.begin() + 1, sigma.end(), static_cast<std::int64_t>(var));
  return static_cast<std::size_t>(it - sigma.begin()) - 1;
}

}  // namespace

BlockParams BlockParams::derive(std::size_t n_o, std::size_t n_i, double epsilon) {
  if (!(epsilon > 0.0) || !(epsilon <= 0.5))
    throw ValidationError("epsilon must satisfy 0 < eps <= 1/2");
  BlockParams params;
  params.n_o = n_o;
  params.n_i = n_i;
  params.original_lines = n_o;
  params.epsilon = epsilon;
  double base = static_cast<double>(n_o);
  params.d = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::pow(base, 1.0 - epsilon))));
  params.ell = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::pow(base, epsilon))));
  params.t = params.d * params.ell;
  if (params.t < n_o) throw Error("internal: block padding shorter than the program");
  return params;
}

BlockParams BlockParams::with_blocks(std::size_t original_lines, std::size_t n_i, std::size_t d,
                                     std::size_t ell) {
  if (d < 1 || ell < 1) throw ValidationError("d and ell must be >= 1");
  if (d * ell < original_lines)
    throw ValidationError("d*ell = " + std::to_string(d * ell) + " cannot hold " +
                          std::to_string(original_lines) + " lines");
  BlockParams params;
  params.n_o = original_lines;
  params.n_i = n_i;
  params.original_lines = original_lines;
  params.d = d;
  params.ell = ell;
  params.t = d * ell;
  return params;
}

mrc::Pairs encode_lines(const Pbp& pbp, const BlockParams& params) {
  if (pbp.n == 0 || pbp.n >= kMaxVar)
    throw ValidationError("pipeline encoding requires 1 <= n < 2^16");
  Pairs pairs;
  pairs.reserve(params.t);
  Permutation id = Permutation::identity(pbp.width);
  for (std::size_t p = 0; p < params.t; ++p) {
    Word w = p < pbp.lines.size()
                 ? pack_line(pbp.lines[p].var, pbp.lines[p].on_true, pbp.lines[p].on_false)
                 : pack_line(0, id, id);  // identity padding references x_0
    pairs.push_back({make_key(channel::kLine, p), {w}});
  }
  return pairs;
}

mrc::Pairs encode_assignment(const Assignment& a) {
  Pairs pairs;
  pairs.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    pairs.push_back({make_key(channel::kAssign, i), {pack_assign(static_cast<std::uint32_t>(i), a[i])}});
  return pairs;
}

EncodedPbp encode(const Pbp& pbp, const Assignment& a, double epsilon,
                  std::optional<std::pair<std::size_t, std::size_t>> explicit_blocks) {
  if (a.size() != pbp.n) throw ValidationError("assignment length mismatch");
  EncodedPbp enc;
  enc.params = explicit_blocks
                   ? BlockParams::with_blocks(pbp.lines.size(), a.size(), explicit_blocks->first,
                                              explicit_blocks->second)
                   : BlockParams::derive(pbp.lines.size(), a.size(), epsilon);
  enc.params.epsilon = epsilon;
  enc.line_pairs = encode_lines(pbp, enc.params);
  enc.assign_pairs = encode_assignment(a);
  return enc;
}

namespace rounds {

MentionExtractor line_mentions(const BlockParams& params) {
  std::size_t d = params.d;
  return [d](const KeyValuePair& p) -> std::optional<std::pair<std::uint64_t, std::uint32_t>> {
    if (channel_of(p.key) != channel::kLine) return std::nullopt;
    return {{index_of(p.key) / d, line_var(p.value[0])}};
  };
}

// Round 1 of #P: block reducers emit one marker per distinct variable.
mrc::RoundProgram count_mentions(const BlockParams& params, MentionExtractor extractor) {
  if (!extractor) extractor = line_mentions(params);
  return {
      [extractor](const KeyValuePair& p) -> Pairs {
        if (auto mention = extractor(p))
          return {p, {make_key(channel::kBlock, mention->first), {tMentionRaw, mention->second}}};
        return {p};
      },
      [](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
        Pairs out;
        std::set<Word> vars;
        for (const auto& v : vs) {
          if (channel_of(k) == channel::kBlock && v[0] == tMentionRaw)
            vars.insert(v[1]);
          else
            out.push_back({k, v});
        }
        for (Word var : vars) out.push_back({k, {tMention, var}});
        return out;
      },
  };
}

// Round 2 of #P: variable reducers count the markers.
mrc::RoundProgram count_markers() {
  return {
      [](const KeyValuePair& p) -> Pairs {
        if (channel_of(p.key) == channel::kBlock && p.value[0] == tMention)
          return {{make_key(channel::kVar, p.value[1]), {tOne}}};
        return {p};
      },
      [](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
        Pairs out;
        Word ones = 0;
        for (const auto& v : vs) {
          if (channel_of(k) == channel::kVar && v[0] == tOne)
            ++ones;
          else
            out.push_back({k, v});
        }
        if (ones > 0) out.push_back({k, {tCount, index_of(k), ones}});
        return out;
      },
  };
}

// Prefix-sum round 1: local prefix sums per d-block of variable indices.
// Assignment pairs seed every block's reducer so count-free blocks still
// produce their (all-zero) local sums.
mrc::RoundProgram psum_local(const BlockParams& params, std::size_t n) {
  std::size_t d = params.d;
  return {
      [d](const KeyValuePair& p) -> Pairs {
        if (channel_of(p.key) == channel::kVar && p.value[0] == tCount)
          return {{make_key(channel::kYBlock, p.value[1] / d), {tCountAt, p.value[1], p.value[2]}}};
        if (channel_of(p.key) == channel::kAssign)
          return {p, {make_key(channel::kYBlock, index_of(p.key) / d), {tSeed}}};
        return {p};
      },
      [d, n](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
        Pairs out;
        std::map<std::uint64_t, Word> counts;
        for (const auto& v : vs) {
          if (channel_of(k) == channel::kYBlock && v[0] == tCountAt)
            counts[v[1]] = v[2];
          else if (channel_of(k) == channel::kYBlock && v[0] == tSeed)
            continue;  // consumed
          else
            out.push_back({k, v});
        }
        if (channel_of(k) != channel::kYBlock) return out;
        std::uint64_t b = index_of(k);
        std::uint64_t lo = b * d, hi = std::min<std::uint64_t>(lo + d, n);
        Word running = 0;
        for (std::uint64_t j = lo; j < hi; ++j) {
          auto it = counts.find(j);
          if (it != counts.end()) running += it->second;
          out.push_back({k, {tPsum, j, running}});
        }
        out.push_back({k, {tLast, b, running}});
        return out;
      },
  };
}

// Prefix-sum round 2: one reducer turns the block totals into offsets.
mrc::RoundProgram psum_totals(const BlockParams& params, std::size_t n) {
  std::size_t nblocks = std::max<std::size_t>(1, ceil_div(n, params.d));
  return {
      [](const KeyValuePair& p) -> Pairs {
        if (channel_of(p.key) == channel::kYBlock && p.value[0] == tLast)
          return {{make_key(channel::kZ, 0), p.value}};
        return {p};
      },
      [nblocks](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
        Pairs out;
        std::map<std::uint64_t, Word> lasts;
        for (const auto& v : vs) {
          if (channel_of(k) == channel::kZ && v[0] == tLast)
            lasts[v[1]] = v[2];
          else
            out.push_back({k, v});
        }
        Word cum = 0;
        for (const auto& [b, last] : lasts) {
          cum += last;
          if (b + 1 < nblocks) out.push_back({k, {tZOff, b + 1, cum}});
        }
        return out;
      },
  };
}

// Prefix-sum round 3: blocks add the offset from the previous blocks.
mrc::RoundProgram psum_offsets() {
  return {
      [](const KeyValuePair& p) -> Pairs {
        if (channel_of(p.key) == channel::kZ && p.value[0] == tZOff)
          return {{make_key(channel::kYBlock, p.value[1]), p.value}};
        return {p};
      },
      [](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
        Pairs out;
        Word offset = 0;
        std::vector<std::pair<std::uint64_t, Word>> locals;
        for (const auto& v : vs) {
          if (channel_of(k) == channel::kYBlock && v[0] == tZOff)
            offset = v[2];
          else if (channel_of(k) == channel::kYBlock && v[0] == tPsum)
            locals.emplace_back(v[1], v[2]);
          else
            out.push_back({k, v});
        }
        for (const auto& [j, ly] : locals) out.push_back({k, {tY, j, ly + offset}});
        return out;
      },
  };
}

// Split-value round: copy the boundary prefix sum right, then each block
// scans its consecutive pairs for the unique crossing of each threshold q*d.
mrc::RoundProgram split_detect(const BlockParams& params, std::size_t n) {
  std::size_t d = params.d;
  std::size_t ell = params.ell;
  std::size_t nblocks = std::max<std::size_t>(1, ceil_div(n, d));
  return {
      [d, n, nblocks](const KeyValuePair& p) -> Pairs {
        if (channel_of(p.key) == channel::kYBlock && p.value[0] == tY) {
          std::uint64_t b = index_of(p.key);
          std::uint64_t hi = std::min<std::uint64_t>((b + 1) * d, n);
          Pairs out{p};
          if (p.value[1] + 1 == hi && b + 1 < nblocks)
            out.push_back({make_key(channel::kYBlock, b + 1), {tYLeft, p.value[1], p.value[2]}});
          return out;
        }
        return {p};
      },
      [d, n, ell, nblocks](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
        Pairs out;
        std::map<std::uint64_t, Word> y;
        std::optional<std::pair<std::uint64_t, Word>> left;
        for (const auto& v : vs) {
          if (channel_of(k) == channel::kYBlock && v[0] == tY)
            y[v[1]] = v[2];
          else if (channel_of(k) == channel::kYBlock && v[0] == tYLeft)
            left = {{v[1], v[2]}};
          else
            out.push_back({k, v});
        }
        if (channel_of(k) != channel::kYBlock) return out;
        std::uint64_t b = index_of(k);
        if (b == 0) out.push_back({k, {tSigma, 0, 0}});  // sigma_0 = -1, stored +1
        if (y.count(n - 1) > 0) out.push_back({k, {tSigma, ell, n}});  // sigma_ell = n-1
        std::vector<std::pair<std::uint64_t, Word>> seq;
        if (left) seq.push_back(*left);
        for (const auto& [j, yv] : y) seq.push_back({j, yv});
        for (std::size_t q = 1; q < ell; ++q) {
          Word threshold = q * d;
          for (std::size_t i = 0; i < seq.size(); ++i) {
            if (seq[i].second > threshold) continue;
            bool pair_crossing = i + 1 < seq.size() && seq[i + 1].second > threshold;
            bool terminal = seq[i].first == n - 1;
            if (pair_crossing || terminal)
              out.push_back({k, {tSigma, q, seq[i].first + 1}});
          }
        }
        return out;
      },
  };
}

// Lemma-7 round 1: routing reducers hold a line block, an assignment block,
// and the split values; they tag first occurrences and assignments with the
// split range of their variable.
mrc::RoundProgram route_tag(const BlockParams& params, std::size_t n) {
  std::size_t d = params.d;
  std::size_t ell = params.ell;
  std::size_t kappas = std::max<std::size_t>({ell, ceil_div(std::max<std::size_t>(n, 1), d), 1});
  return {
      [d, kappas](const KeyValuePair& p) -> Pairs {
        std::uint8_t ch = channel_of(p.key);
        if (ch == channel::kLine)
          return {{make_key(channel::kRoute, index_of(p.key) / d),
                   {tLineAt, index_of(p.key), p.value[0]}}};
        if (ch == channel::kAssign)
          return {{make_key(channel::kRoute, index_of(p.key) / d),
                   {tAssignAt, p.value[0] >> 1, p.value[0] & 1}}};
        if (ch == channel::kYBlock && p.value[0] == tSigma) {
          Pairs out;
          for (std::size_t kp = 0; kp < kappas; ++kp)
            out.push_back({make_key(channel::kRoute, kp), {tSplit, p.value[1], p.value[2]}});
          return out;
        }
        return {p};
      },
      [ell](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
        Pairs out;
        std::vector<std::int64_t> sigma(ell + 1, 0);
        std::vector<std::pair<std::uint64_t, Word>> lines;  // (p, word)
        std::vector<std::pair<std::uint64_t, Word>> assigns;
        for (const auto& v : vs) {
          if (channel_of(k) != channel::kRoute) {
            out.push_back({k, v});
            continue;
          }
          switch (v[0]) {
            case tSplit: sigma[v[1]] = static_cast<std::int64_t>(v[2]) - 1; break;
            case tLineAt:
              lines.emplace_back(v[1], v[2]);
              out.push_back({k, v});  // lines travel on to the block tables
              break;
            case tAssignAt: assigns.emplace_back(v[1], v[2]); break;
            default: out.push_back({k, v});
          }
        }
        if (channel_of(k) != channel::kRoute) return out;
        std::map<std::uint64_t, std::uint64_t> first_line;  // var -> min p
        for (const auto& [p, w] : lines) {
          std::uint64_t var = line_var(w);
          auto it = first_line.find(var);
          if (it == first_line.end() || p < it->second) first_line[var] = p;
        }
        for (const auto& [var, p] : first_line) {
          std::uint64_t range = range_of_var(sigma, var);
          out.push_back({k, {tMentionFirst, range, index_of(k), p, var}});
        }
        for (const auto& [var, bit] : assigns) {
          std::uint64_t range = range_of_var(sigma, var);
          out.push_back({k, {tAssignTagged, range, var, bit}});
        }
        return out;
      },
  };
}

// Lemma-7 round 2: range reducers join mention and assignment by variable,
// producing the alpha_q triples.
mrc::RoundProgram route_match() {
  return {
      [](const KeyValuePair& p) -> Pairs {
        if (channel_of(p.key) == channel::kRoute && p.value[0] == tMentionFirst)
          return {{make_key(channel::kRange, p.value[1]), p.value}};
        if (channel_of(p.key) == channel::kRoute && p.value[0] == tAssignTagged)
          return {{make_key(channel::kRange, p.value[1]), p.value}};
        return {p};
      },
      [](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
        Pairs out;
        std::map<std::uint64_t, Word> bits;
        std::vector<std::vector<Word>> mentions;
        for (const auto& v : vs) {
          if (channel_of(k) == channel::kRange && v[0] == tAssignTagged)
            bits[v[2]] = v[3];
          else if (channel_of(k) == channel::kRange && v[0] == tMentionFirst)
            mentions.push_back(v);
          else
            out.push_back({k, v});
        }
        for (const auto& v : mentions) {
          auto it = bits.find(v[4]);
          if (it == bits.end())
            throw Error("no assignment for variable x" + std::to_string(v[4]) + " in split range " +
                        std::to_string(index_of(k)));
          out.push_back({k, {tAlpha, v[2], v[3], v[4], it->second}});
        }
        return out;
      },
  };
}

// Lemma-3 round 1: block reducers simulate their subprogram on all w! start
// permutations under alpha_q.
mrc::RoundProgram block_tables(const BlockParams& params, std::uint32_t width) {
  std::size_t d = params.d;
  return {
      [d](const KeyValuePair& p) -> Pairs {
        std::uint8_t ch = channel_of(p.key);
        if (ch == channel::kRoute && p.value[0] == tLineAt)
          return {{make_key(channel::kBlock, p.value[1] / d), {tLine3, p.value[1], p.value[2]}}};
        if (ch == channel::kLine)  // standalone use: lines arrive unrouted
          return {{make_key(channel::kBlock, index_of(p.key) / d),
                   {tLine3, index_of(p.key), p.value[0]}}};
        if (ch == channel::kRange && p.value[0] == tAlpha)
          return {{make_key(channel::kBlock, p.value[1]),
                   {tAlpha2, p.value[1], p.value[2], p.value[3], p.value[4]}}};
        return {p};
      },
      [d, width](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
        Pairs out;
        std::map<std::uint64_t, Word> lines;  // p -> packed
        std::map<std::uint64_t, std::uint8_t> bits;
        std::size_t alpha_count = 0;
        for (const auto& v : vs) {
          if (channel_of(k) == channel::kBlock && v[0] == tLine3) {
            lines[v[1]] = v[2];
          } else if (channel_of(k) == channel::kBlock && v[0] == tAlpha2) {
            bits[v[3]] = static_cast<std::uint8_t>(v[4]);
            ++alpha_count;
          } else {
            out.push_back({k, v});
          }
        }
        if (lines.empty()) return out;
        if (alpha_count > d)
          throw Error("alpha for block " + std::to_string(index_of(k)) + " exceeds d");
        std::uint32_t f = Permutation::factorial(width);
        std::vector<Word> table = {tTable, index_of(k), f};
        const std::vector<Permutation>& perms = all_permutations(width);
        // block value = composition of its lines, applied in line order
        Permutation block_value = Permutation::identity(width);
        for (const auto& [p, w] : lines) {
          auto it = bits.find(line_var(w));
          if (it == bits.end())
            throw Error("missing assignment for variable x" + std::to_string(line_var(w)) +
                        " used in block " + std::to_string(index_of(k)));
          std::uint32_t r = it->second ? line_f_rank(w) : line_g_rank(w);
          block_value = compose(perms[r], block_value);
        }
        for (std::uint32_t r = 0; r < f; ++r)
          table.push_back(compose(block_value, perms[r]).rank());
        out.push_back({k, std::move(table)});
        return out;
      },
  };
}

// Lemma-3 round 2: one reducer composes the tables and tests acceptance.
mrc::RoundProgram compose_tables(const BlockParams& params, std::uint32_t width,
                                 std::vector<std::uint32_t> accept_ranks) {
  std::size_t ell = params.ell;
  std::sort(accept_ranks.begin(), accept_ranks.end());
  return {
      [](const KeyValuePair& p) -> Pairs {
        if (channel_of(p.key) == channel::kBlock && p.value[0] == tTable)
          return {{make_key(channel::kOut, 0), p.value}};
        return {p};
      },
      [ell, width, accept_ranks](Key k, const std::vector<std::vector<Word>>& vs) -> Pairs {
        Pairs out;
        std::map<std::uint64_t, const std::vector<Word>*> tables;
        for (const auto& v : vs) {
          if (channel_of(k) == channel::kOut && v[0] == tTable)
            tables[v[1]] = &v;
          else
            out.push_back({k, v});
        }
        if (channel_of(k) != channel::kOut) return out;
        if (tables.size() != ell)
          throw Error("expected " + std::to_string(ell) + " action tables, got " +
                      std::to_string(tables.size()));
        std::uint32_t cur = Permutation::identity(width).rank();
        for (const auto& [q, tbl] : tables) cur = static_cast<std::uint32_t>((*tbl)[3 + cur]);
        std::uint8_t bit =
            std::binary_search(accept_ranks.begin(), accept_ranks.end(), cur) ? 1 : 0;
        out.push_back({k, {tVerdict, bit}});
        return out;
      },
  };
}

}  // namespace rounds

namespace {

mrc::Budget staging_budget(const BlockParams& params) {
  return mrc::Budget(params.epsilon > 0 ? params.epsilon : 0.5,
                     std::max<std::size_t>(params.input_words(), 1));
}

StageRun run_stage(std::vector<mrc::RoundProgram> program, mrc::Pairs input,
                   const BlockParams& params) {
  mrc::BudgetAccountant acct(staging_budget(params), {.mode = mrc::BudgetMode::Advisory});
  StageRun run;
  run.pairs = mrc::run_program(program, std::move(input), acct);
  run.rounds = acct.report().rounds_executed();
  run.report = acct.report();
  return run;
}

}  // namespace

StageRun count_occurrences(const mrc::Pairs& line_pairs, const BlockParams& params) {
  return run_stage({rounds::count_mentions(params), rounds::count_markers()}, line_pairs, params);
}

std::vector<OccurrenceCount> decode_counts(const mrc::Pairs& pairs) {
  std::vector<OccurrenceCount> out;
  for (const KeyValuePair& p : pairs)
    if (channel_of(p.key) == channel::kVar && !p.value.empty() && p.value[0] == tCount)
      out.push_back({static_cast<std::uint32_t>(p.value[1]), p.value[2]});
  std::sort(out.begin(), out.end(),
            [](const OccurrenceCount& a, const OccurrenceCount& b) { return a.var < b.var; });
  return out;
}

std::vector<OccurrenceCount> count_occurrences_via_crcw(const mrc::Pairs& line_pairs,
                                                        const BlockParams& params,
                                                        const mrc::Budget& budget) {
  // The Lemma-4 machine: one processor per (block, mentioned variable) adds 1
  // to the variable's register in a single step.
  std::map<std::uint64_t, std::set<std::uint32_t>> block_vars;
  std::uint32_t max_var = 0;
  for (const KeyValuePair& p : line_pairs) {
    if (channel_of(p.key) != channel::kLine) continue;
    std::uint32_t var = line_var(p.value[0]);
    block_vars[index_of(p.key) / params.d].insert(var);
    max_var = std::max(max_var, var);
  }
  std::vector<std::uint32_t> writes;  // processor id -> register
  for (const auto& [q, vars] : block_vars)
    for (std::uint32_t var : vars) writes.push_back(var);

  crcw::SumCrcwMachine machine;
  machine.processors = writes.size();
  machine.registers = max_var + 1;
  machine.steps = {{
      [](std::size_t) -> std::vector<std::size_t> { return {}; },
      [writes](std::size_t p, const crcw::RegView&) -> std::vector<crcw::Write> {
        return {{writes[p], 1}};
      },
  }};

  auto sim = crcw_mrc::simulate_crcw(machine, {}, budget);
  std::vector<OccurrenceCount> out;
  for (std::uint32_t var = 0; var < machine.registers; ++var)
    if (sim.registers[var] > 0) out.push_back({var, static_cast<std::uint64_t>(sim.registers[var])});
  return out;
}

StageRun mr_prefix_sums(const mrc::Pairs& count_pairs, const BlockParams& params) {
  std::size_t n = params.n_i;
  mrc::Pairs input = count_pairs;
  for (std::size_t b = 0; b < ceil_div(std::max<std::size_t>(n, 1), params.d); ++b)
    input.push_back({make_key(channel::kYBlock, b), {tSeed}});
  return run_stage(
      {rounds::psum_local(params, n), rounds::psum_totals(params, n), rounds::psum_offsets()},
      std::move(input), params);
}

std::vector<std::pair<std::uint32_t, std::uint64_t>> decode_prefix_sums(const mrc::Pairs& pairs) {
  std::vector<std::pair<std::uint32_t, std::uint64_t>> out;
  for (const KeyValuePair& p : pairs)
    if (channel_of(p.key) == channel::kYBlock && !p.value.empty() && p.value[0] == tY)
      out.emplace_back(static_cast<std::uint32_t>(p.value[1]), p.value[2]);
  std::sort(out.begin(), out.end());
  return out;
}

SplitRun compute_split_values(const mrc::Pairs& y_pairs, const BlockParams& params) {
  StageRun run = run_stage({rounds::split_detect(params, params.n_i)}, y_pairs, params);
  SplitRun sr;
  sr.rounds = run.rounds;
  sr.splits.sigma.assign(params.ell + 1, 0);
  for (const KeyValuePair& p : run.pairs)
    if (channel_of(p.key) == channel::kYBlock && !p.value.empty() && p.value[0] == tSigma)
      sr.splits.sigma[p.value[1]] = static_cast<std::int64_t>(p.value[2]) - 1;
  return sr;
}

mrc::Pairs encode_splits(const SplitValues& splits) {
  Pairs pairs;
  for (std::size_t q = 0; q < splits.sigma.size(); ++q)
    pairs.push_back(
        {make_key(channel::kYBlock, 0), {tSigma, q, static_cast<Word>(splits.sigma[q] + 1)}});
  return pairs;
}

StageRun distribute_assignments(const mrc::Pairs& line_pairs, const mrc::Pairs& assign_pairs,
                                const SplitValues& splits, const BlockParams& params) {
  mrc::Pairs input = line_pairs;
  input.insert(input.end(), assign_pairs.begin(), assign_pairs.end());
  mrc::Pairs sig = encode_splits(splits);
  input.insert(input.end(), sig.begin(), sig.end());
  return run_stage({rounds::route_tag(params, params.n_i), rounds::route_match()}, std::move(input),
                   params);
}

std::vector<AlphaEntry> decode_alphas(const mrc::Pairs& pairs) {
  std::vector<AlphaEntry> out;
  for (const KeyValuePair& p : pairs)
    if (channel_of(p.key) == channel::kRange && !p.value.empty() && p.value[0] == tAlpha)
      out.push_back({p.value[1], p.value[2], static_cast<std::uint32_t>(p.value[3]),
                     static_cast<std::uint8_t>(p.value[4])});
  std::sort(out.begin(), out.end());
  return out;
}

EvaluateRun evaluate_blocks(const mrc::Pairs& line_pairs, const mrc::Pairs& alpha_pairs,
                            const Pbp& pbp, const BlockParams& params) {
  std::vector<std::uint32_t> accept_ranks;
  for (const Permutation& p : pbp.accept) accept_ranks.push_back(p.rank());
  mrc::Pairs input = line_pairs;
  input.insert(input.end(), alpha_pairs.begin(), alpha_pairs.end());
  StageRun run = run_stage({rounds::block_tables(params, pbp.width),
                            rounds::compose_tables(params, pbp.width, accept_ranks)},
                           std::move(input), params);
  EvaluateRun er;
  er.rounds = run.rounds;
  for (const KeyValuePair& p : run.pairs)
    if (channel_of(p.key) == channel::kOut && !p.value.empty() && p.value[0] == tVerdict)
      er.bit = static_cast<std::uint8_t>(p.value[1]);
  return er;
}

std::vector<mrc::RoundProgram> build_nc1_program(const Pbp& pbp, const BlockParams& params) {
  std::size_t n = pbp.n;
  std::vector<std::uint32_t> accept_ranks;
  for (const Permutation& p : pbp.accept) accept_ranks.push_back(p.rank());
  return {
      rounds::count_mentions(params),
      rounds::count_markers(),
      rounds::psum_local(params, n),
      rounds::psum_totals(params, n),
      rounds::psum_offsets(),
      rounds::split_detect(params, n),
      rounds::route_tag(params, n),
      rounds::route_match(),
      rounds::block_tables(params, pbp.width),
      rounds::compose_tables(params, pbp.width, accept_ranks),
  };
}

Nc1Result run_nc1_pipeline(const Circuit& c, const Assignment& a, double epsilon, double c_space,
                           double c_total, mrc::ExecOptions options) {
  Pbp pbp = barrington_compile(c);
  EncodedPbp enc = encode(pbp, a, epsilon);

  mrc::Budget budget(epsilon, enc.params.input_words(), c_space, c_total);
  mrc::BudgetAccountant acct(budget, options);

  mrc::Pairs input = enc.line_pairs;
  input.insert(input.end(), enc.assign_pairs.begin(), enc.assign_pairs.end());

  std::vector<mrc::RoundProgram> program = build_nc1_program(pbp, enc.params);
  mrc::Pairs out = mrc::run_program(program, std::move(input), acct);

  Nc1Result result;
  result.params = enc.params;
  result.report = acct.report();
  result.total_rounds = acct.report().rounds_executed();
  result.stages = {{"count_occurrences", 2}, {"prefix_sums", 3},     {"split_values", 1},
                   {"distribute", 2},        {"evaluate_blocks", 2}};
  result.round_outputs = acct.round_outputs();
  bool have_verdict = false;
  for (const KeyValuePair& p : out) {
    if (channel_of(p.key) == channel::kOut && !p.value.empty() && p.value[0] == tVerdict) {
      result.bit = static_cast<std::uint8_t>(p.value[1]);
      have_verdict = true;
    }
  }
  if (!have_verdict) throw Error("pipeline produced no verdict");
  return result;
}

}  // namespace ncmr::pbp_mrc
