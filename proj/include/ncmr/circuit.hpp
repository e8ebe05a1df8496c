#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncmr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

enum class NodeKind : std::uint8_t { Input, And, Or, Not, Id };

const char* to_string(NodeKind k);

/// Gate fan-in implied by the kind: Input 0, Not/Id 1, And/Or 2.
int fan_in_of(NodeKind k);

struct Node {
  std::uint32_t id = 0;
  NodeKind kind = NodeKind::Input;
  std::uint32_t var = 0;  // variable index, Input nodes only
};

/// Fan-in-<=2 Boolean DAG over {And, Or, Not} plus Id gates, with one
/// designated output sink. Edges run from producer to consumer; size() is
/// the edge count. Instances are immutable once validated.
class Circuit {
 public:
  Circuit(std::vector<Node> nodes, std::vector<std::pair<std::uint32_t, std::uint32_t>> edges,
          std::uint32_t output);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges() const { return edges_; }
  std::uint32_t output() const { return output_; }
  std::uint32_t num_inputs() const { return n_; }
  std::size_t size() const { return edges_.size(); }

  const Node& node(std::uint32_t id) const;
  bool has_node(std::uint32_t id) const;
  /// Producer ids feeding `id`, in declaration order (size = fan-in).
  const std::vector<std::uint32_t>& producers(std::uint32_t id) const;
  /// Consumer ids fed by `id` (size = fan-out).
  const std::vector<std::uint32_t>& consumers(std::uint32_t id) const;

 private:
  void validate();

  std::vector<Node> nodes_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges_;
  std::uint32_t output_;
  std::uint32_t n_ = 0;
  std::vector<std::int32_t> index_of_;  // node id -> position in nodes_, -1 if absent
  std::vector<std::vector<std::uint32_t>> producers_;
  std::vector<std::vector<std::uint32_t>> consumers_;
};

struct Assignment {
  std::vector<std::uint8_t> bits;

  std::size_t size() const { return bits.size(); }
  std::uint8_t operator[](std::size_t i) const { return bits[i]; }
};

/// node id -> level. level(output) = 0; otherwise 1 + max over consumers.
using LevelMap = std::vector<std::uint32_t>;

Circuit parse_circuit(const std::string& text);
std::string serialize_circuit(const Circuit& c);

Assignment parse_assignment(const std::string& text, std::size_t expected_n);
std::string serialize_assignment(const Assignment& a);

/// Sequential oracle: value of the output node under `a`.
std::uint8_t eval_direct(const Circuit& c, const Assignment& a);

/// Values of every node (indexed by node id) under `a`.
std::vector<std::uint8_t> eval_all_nodes(const Circuit& c, const Assignment& a);

/// Sequential oracle for the level map; depth(c) = max entry.
LevelMap levels_direct(const Circuit& c);

std::uint32_t depth_of(const Circuit& c);

/// XOR of n inputs (n a power of two >= 2) via the gadget
/// x^y = (x|y) & ~(x&y); depth 3*log2(n).
Circuit gen_parity(std::uint32_t n);

/// Balanced AND over n >= 1 inputs (odd nodes pass through Id gates).
Circuit gen_and_tree(std::uint32_t n);

/// Deterministic random DAG with exactly `depth` levels and n input
/// variables. Throws ValidationError for infeasible shapes (n > 2^depth).
Circuit gen_random_dag(std::uint32_t n, std::uint32_t depth, std::uint64_t seed);

}  // namespace ncmr
