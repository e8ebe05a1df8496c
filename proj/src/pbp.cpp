#include "ncmr/pbp.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <sstream>

namespace ncmr {

Permutation::Permutation(std::vector<std::uint8_t> images) : width_(static_cast<std::uint32_t>(images.size())) {
  if (images.size() == 0 || images.size() > kMaxWidth)
    throw ValidationError("permutation width must be in [1, 8], got " + std::to_string(images.size()));
  std::array<bool, kMaxWidth> seen{};
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i] >= width_ || seen[images[i]])
      throw ValidationError("not a bijection on {0..w-1}");
    seen[images[i]] = true;
    images_[i] = images[i];
  }
  for (std::size_t i = images.size(); i < kMaxWidth; ++i) images_[i] = 0;
}

Permutation Permutation::identity(std::uint32_t w) {
  std::vector<std::uint8_t> im(w);
  for (std::uint32_t i = 0; i < w; ++i) im[i] = static_cast<std::uint8_t>(i);
  return Permutation(std::move(im));
}

Permutation Permutation::cycle(std::uint32_t w, const std::vector<std::uint8_t>& points) {
  std::vector<std::uint8_t> im(w);
  for (std::uint32_t i = 0; i < w; ++i) im[i] = static_cast<std::uint8_t>(i);
  for (std::size_t i = 0; i < points.size(); ++i)
    im[points[i]] = points[(i + 1) % points.size()];
  return Permutation(std::move(im));
}

Permutation Permutation::inverse() const {
  std::vector<std::uint8_t> im(width_);
  for (std::uint32_t i = 0; i < width_; ++i) im[images_[i]] = static_cast<std::uint8_t>(i);
  return Permutation(std::move(im));
}

bool Permutation::is_identity() const {
  for (std::uint32_t i = 0; i < width_; ++i)
    if (images_[i] != i) return false;
  return true;
}

bool Permutation::is_full_cycle() const {
  std::uint8_t p = 0;
  for (std::uint32_t steps = 1; steps < width_; ++steps) {
    p = images_[p];
    if (p == 0) return false;
  }
  return images_[p] == 0;
}

std::uint32_t Permutation::factorial(std::uint32_t w) {
  std::uint32_t f = 1;
  for (std::uint32_t i = 2; i <= w; ++i) f *= i;
  return f;
}

std::uint32_t Permutation::rank() const {
  // Lehmer code
  std::uint32_t r = 0;
  for (std::uint32_t i = 0; i < width_; ++i) {
    std::uint32_t smaller = 0;
    for (std::uint32_t j = i + 1; j < width_; ++j)
      if (images_[j] < images_[i]) ++smaller;
    r = r * (width_ - i) + smaller;
  }
  return r;
}

Permutation Permutation::unrank(std::uint32_t w, std::uint32_t rank) {
  std::vector<std::uint8_t> digits(w, 0);
  for (std::uint32_t i = w; i-- > 0;) {
    digits[i] = static_cast<std::uint8_t>(rank % (w - i));
    rank /= (w - i);
  }
  std::vector<std::uint8_t> pool(w);
  for (std::uint32_t i = 0; i < w; ++i) pool[i] = static_cast<std::uint8_t>(i);
  std::vector<std::uint8_t> im;
  im.reserve(w);
  for (std::uint32_t i = 0; i < w; ++i) {
    im.push_back(pool[digits[i]]);
    pool.erase(pool.begin() + digits[i]);
  }
  return Permutation(std::move(im));
}

Permutation compose(const Permutation& p, const Permutation& q) {
  if (p.width() != q.width())
    throw ValidationError("permutation width mismatch: " + std::to_string(p.width()) + " vs " +
                          std::to_string(q.width()));
  std::vector<std::uint8_t> im(p.width());
  for (std::uint32_t i = 0; i < p.width(); ++i) im[i] = p.images_[q.images_[i]];
  return Permutation(std::move(im));
}

bool operator==(const Permutation& a, const Permutation& b) {
  if (a.width_ != b.width_) return false;
  for (std::uint32_t i = 0; i < a.width_; ++i)
    if (a.images_[i] != b.images_[i]) return false;
  return true;
}

const std::vector<Permutation>& all_permutations(std::uint32_t w) {
  static std::array<std::vector<Permutation>, Permutation::kMaxWidth + 1> cache;
  if (w == 0 || w > Permutation::kMaxWidth) throw ValidationError("width out of range");
  std::vector<Permutation>& v = cache[w];
  if (v.empty()) {
    std::uint32_t f = Permutation::factorial(w);
    v.reserve(f);
    for (std::uint32_t r = 0; r < f; ++r) v.push_back(Permutation::unrank(w, r));
  }
  return v;
}

void Pbp::validate() const {
  if (width == 0 || width > Permutation::kMaxWidth)
    throw ValidationError("pbp width must be in [1, 8]");
  for (const PbpInstruction& ins : lines) {
    if (ins.var >= n) throw ValidationError("instruction variable index out of range");
    if (ins.on_true.width() != width || ins.on_false.width() != width)
      throw ValidationError("instruction permutation width mismatch");
  }
  for (const Permutation& p : accept)
    if (p.width() != width) throw ValidationError("accept permutation width mismatch");
}

Permutation eval_pbp(const Pbp& b, const Assignment& a) {
  if (a.size() != b.n)
    throw ValidationError("assignment length " + std::to_string(a.size()) + " != n = " +
                          std::to_string(b.n));
  Permutation acc = Permutation::identity(b.width);
  for (const PbpInstruction& ins : b.lines)
    acc = compose(a[ins.var] ? ins.on_true : ins.on_false, acc);
  return acc;
}

std::uint8_t accepts(const Pbp& b, const Assignment& a) {
  Permutation r = eval_pbp(b, a);
  return std::binary_search(b.accept.begin(), b.accept.end(), r) ? 1 : 0;
}

namespace {

using Program = std::vector<PbpInstruction>;

// gamma with target = gamma . theta . gamma^-1, both full 5-cycles.
Permutation conjugator(const Permutation& theta, const Permutation& target) {
  std::uint32_t w = theta.width();
  std::vector<std::uint8_t> im(w);
  std::uint8_t a = 0, b = 0;
  for (std::uint32_t i = 0; i < w; ++i) {
    im[a] = b;
    a = theta.apply(a);
    b = target.apply(b);
  }
  return Permutation(std::move(im));
}

// Rewrites the program's value V into gamma . V . gamma^-1 by folding the
// constants into the first and last instructions.
void conjugate_in_place(Program& prog, const Permutation& gamma) {
  assert(!prog.empty());
  Permutation gi = gamma.inverse();
  prog.front().on_true = compose(prog.front().on_true, gi);
  prog.front().on_false = compose(prog.front().on_false, gi);
  prog.back().on_true = compose(gamma, prog.back().on_true);
  prog.back().on_false = compose(gamma, prog.back().on_false);
}

Program inverted(const Program& prog) {
  Program out;
  out.reserve(prog.size());
  for (auto it = prog.rbegin(); it != prog.rend(); ++it)
    out.push_back({it->var, it->on_true.inverse(), it->on_false.inverse()});
  return out;
}

struct CommutatorBasis {
  Permutation alpha;
  Permutation beta;
  Permutation gamma;  // beta^-1 . alpha^-1 . beta . alpha, a 5-cycle
};

const CommutatorBasis& commutator_basis() {
  static const CommutatorBasis basis = [] {
    Permutation alpha = Permutation::cycle(5, {0, 1, 2, 3, 4});
    for (const Permutation& beta : all_permutations(5)) {
      if (!beta.is_full_cycle()) continue;
      Permutation g = compose(beta.inverse(), compose(alpha.inverse(), compose(beta, alpha)));
      if (g.is_full_cycle()) return CommutatorBasis{alpha, beta, g};
    }
    throw Error("no commutator witness in S5");  // unreachable
  }();
  return basis;
}

}  // namespace

const Permutation& barrington_sigma() {
  static const Permutation sigma = Permutation::cycle(5, {0, 1, 2, 3, 4});
  return sigma;
}

Pbp barrington_compile(const Circuit& c) {
  const Permutation id5 = Permutation::identity(5);
  const Permutation& sigma = barrington_sigma();
  const CommutatorBasis& basis = commutator_basis();

  // For each node, a program evaluating to `cycle` when the node is 1 and to
  // the identity when it is 0. Built in topological order over the DAG.
  struct Compiled {
    Program prog;
    Permutation cycle;
  };
  std::map<std::uint32_t, Compiled> memo;

  std::map<std::uint32_t, std::size_t> pending;
  std::vector<std::uint32_t> ready;
  for (const Node& nd : c.nodes()) {
    pending[nd.id] = c.producers(nd.id).size();
    if (pending[nd.id] == 0) ready.push_back(nd.id);
  }

  auto retarget = [](const Compiled& in, const Permutation& target) {
    Program prog = in.prog;
    if (!(in.cycle == target)) conjugate_in_place(prog, conjugator(in.cycle, target));
    return prog;
  };
  auto negated = [&](Compiled in) {
    Permutation inv = in.cycle.inverse();
    in.prog.back().on_true = compose(inv, in.prog.back().on_true);
    in.prog.back().on_false = compose(inv, in.prog.back().on_false);
    in.cycle = inv;
    return in;
  };
  auto conjoined = [&](const Compiled& l, const Compiled& r) {
    Program a = retarget(l, basis.alpha);
    Program b = retarget(r, basis.beta);
    Program prog;
    prog.reserve(2 * a.size() + 2 * b.size());
    prog.insert(prog.end(), a.begin(), a.end());
    prog.insert(prog.end(), b.begin(), b.end());
    Program ai = inverted(a), bi = inverted(b);
    prog.insert(prog.end(), ai.begin(), ai.end());
    prog.insert(prog.end(), bi.begin(), bi.end());
    return Compiled{std::move(prog), basis.gamma};
  };

  for (std::size_t head = 0; head < ready.size(); ++head) {
    std::uint32_t id = ready[head];
    const Node& nd = c.node(id);
    const auto& ps = c.producers(id);
    Compiled out;
    switch (nd.kind) {
      case NodeKind::Input:
        out = {{{nd.var, sigma, id5}}, sigma};
        break;
      case NodeKind::Id:
        out = memo.at(ps[0]);
        break;
      case NodeKind::Not:
        out = negated(memo.at(ps[0]));
        break;
      case NodeKind::And:
        out = conjoined(memo.at(ps[0]), memo.at(ps[1]));
        break;
      case NodeKind::Or:
        // De Morgan: a|b = ~(~a & ~b); the negations fold into line constants.
        out = negated(conjoined(negated(memo.at(ps[0])), negated(memo.at(ps[1]))));
        break;
    }
    memo[id] = std::move(out);
    for (std::uint32_t cons : c.consumers(id))
      if (--pending[cons] == 0) ready.push_back(cons);
  }

  Pbp result;
  result.width = 5;
  result.n = c.num_inputs();
  result.lines = retarget(memo.at(c.output()), sigma);
  result.accept = {sigma};
  result.validate();
  return result;
}

namespace {

Permutation parse_perm(const std::vector<std::string>& toks, std::size_t& pos, std::uint32_t w,
                       std::size_t lineno) {
  if (pos + w > toks.size()) throw ParseError(lineno, "truncated permutation");
  std::vector<std::uint8_t> im;
  im.reserve(w);
  for (std::uint32_t i = 0; i < w; ++i) {
    int v = std::stoi(toks[pos++]);
    if (v < 0 || v >= static_cast<int>(w)) throw ParseError(lineno, "permutation image out of range");
    im.push_back(static_cast<std::uint8_t>(v));
  }
  return Permutation(std::move(im));
}

}  // namespace

Pbp parse_pbp(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  Pbp b;
  bool have_header = false;
  std::size_t expect_lines = 0;

  while (std::getline(in, raw)) {
    ++lineno;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> toks;
    std::string t;
    while (ls >> t) toks.push_back(t);
    if (toks.empty()) continue;

    try {
      if (toks[0] == "pbp") {
        if (toks.size() != 4 || toks[1].rfind("w=", 0) != 0 || toks[2].rfind("n=", 0) != 0 ||
            toks[3].rfind("t=", 0) != 0)
          throw ParseError(lineno, "expected 'pbp w=<w> n=<n> t=<t>'");
        b.width = static_cast<std::uint32_t>(std::stoul(toks[1].substr(2)));
        b.n = static_cast<std::uint32_t>(std::stoul(toks[2].substr(2)));
        expect_lines = std::stoul(toks[3].substr(2));
        have_header = true;
      } else if (toks[0] == "line") {
        if (!have_header) throw ParseError(lineno, "line before header");
        if (toks.size() != 3 + 2 * b.width) throw ParseError(lineno, "malformed instruction");
        PbpInstruction ins;
        ins.var = static_cast<std::uint32_t>(std::stoul(toks[2]));
        std::size_t pos = 3;
        ins.on_true = parse_perm(toks, pos, b.width, lineno);
        ins.on_false = parse_perm(toks, pos, b.width, lineno);
        std::size_t p = std::stoul(toks[1]);
        if (p != b.lines.size()) throw ParseError(lineno, "line numbers must be consecutive from 0");
        b.lines.push_back(std::move(ins));
      } else if (toks[0] == "accept") {
        if (!have_header) throw ParseError(lineno, "accept before header");
        std::size_t k = std::stoul(toks[1]);
        std::size_t pos = 2;
        for (std::size_t i = 0; i < k; ++i) b.accept.push_back(parse_perm(toks, pos, b.width, lineno));
        if (pos != toks.size()) throw ParseError(lineno, "trailing tokens after accept set");
      } else {
        throw ParseError(lineno, "unknown directive '" + toks[0] + "'");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(lineno, e.what());
    }
  }
  if (!have_header) throw ParseError(lineno, "missing pbp header");
  if (b.lines.size() != expect_lines)
    throw ParseError(lineno, "header declares t=" + std::to_string(expect_lines) + " but found " +
                                 std::to_string(b.lines.size()) + " lines");
  std::sort(b.accept.begin(), b.accept.end());
  b.accept.erase(std::unique(b.accept.begin(), b.accept.end()), b.accept.end());
  b.validate();
  return b;
}

std::string serialize_pbp(const Pbp& b) {
  std::ostringstream out;
  out << "pbp w=" << b.width << " n=" << b.n << " t=" << b.lines.size() << '\n';
  auto emit_perm = [&](const Permutation& p) {
    for (std::uint32_t i = 0; i < p.width(); ++i) out << ' ' << static_cast<int>(p[i]);
  };
  for (std::size_t p = 0; p < b.lines.size(); ++p) {
    out << "line " << p << ' ' << b.lines[p].var;
    emit_perm(b.lines[p].on_true);
    emit_perm(b.lines[p].on_false);
    out << '\n';
  }
  out << "accept " << b.accept.size();
  for (const Permutation& p : b.accept) emit_perm(p);
  out << '\n';
  return out.str();
}

}  // namespace ncmr
