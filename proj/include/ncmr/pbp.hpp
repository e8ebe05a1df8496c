#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ncmr/circuit.hpp"

namespace ncmr {

/// Permutation of {0..w-1} for w <= 8. Value type, totally ordered, with a
/// dense rank in [0, w!) so action tables can be stored as flat arrays.
class Permutation {
 public:
  static constexpr std::uint32_t kMaxWidth = 8;

  Permutation() : width_(0) { images_.fill(0); }
  explicit Permutation(std::vector<std::uint8_t> images);

  static Permutation identity(std::uint32_t w);
  /// Single cycle (c0 c1 ... ck-1), fixing the rest of {0..w-1}.
  static Permutation cycle(std::uint32_t w, const std::vector<std::uint8_t>& points);

  std::uint32_t width() const { return width_; }
  std::uint8_t apply(std::uint8_t point) const { return images_[point]; }
  std::uint8_t operator[](std::size_t i) const { return images_[i]; }

  Permutation inverse() const;
  bool is_identity() const;
  /// True iff this is a single cycle through all w points.
  bool is_full_cycle() const;

  std::uint32_t rank() const;
  static Permutation unrank(std::uint32_t w, std::uint32_t rank);
  static std::uint32_t factorial(std::uint32_t w);

  friend Permutation compose(const Permutation& p, const Permutation& q);
  friend bool operator==(const Permutation& a, const Permutation& b);
  friend auto operator<=>(const Permutation& a, const Permutation& b) = default;

 private:
  std::array<std::uint8_t, kMaxWidth> images_;
  std::uint32_t width_;
};

/// p after q: (p∘q)(x) = p(q(x)).
Permutation compose(const Permutation& p, const Permutation& q);

/// All w! permutations of width w in rank order.
const std::vector<Permutation>& all_permutations(std::uint32_t w);

struct PbpInstruction {
  std::uint32_t var = 0;
  Permutation on_true;   // f: taken when the variable is 1
  Permutation on_false;  // g: taken when the variable is 0
};

/// Width-w permutation branching program: instruction list plus the set of
/// accepting permutations.
struct Pbp {
  std::uint32_t width = 0;
  std::uint32_t n = 0;
  std::vector<PbpInstruction> lines;
  std::vector<Permutation> accept;  // kept sorted, set semantics

  void validate() const;
};

/// Composition of the evaluated instructions, line 0 applied first.
Permutation eval_pbp(const Pbp& b, const Assignment& a);

std::uint8_t accepts(const Pbp& b, const Assignment& a);

/// Barrington's construction: width-5 program with accept = {sigma} for a
/// fixed 5-cycle sigma, agreeing with eval_direct on every assignment and of
/// length at most 4^depth(c).
Pbp barrington_compile(const Circuit& c);

/// The fixed accepting 5-cycle used by barrington_compile.
const Permutation& barrington_sigma();

Pbp parse_pbp(const std::string& text);
std::string serialize_pbp(const Pbp& b);

}  // namespace ncmr
