#pragma once

#include <string>
#include <utility>
#include <vector>

namespace coopgait {

enum class GuardKind { kPhaseComplete, kSwingPointHeight, kNormalForceZero };
enum class ResetKind { kIdentity, kImpact };

/// Event function of a domain. Fires when it crosses zero from positive.
struct Guard {
  GuardKind kind = GuardKind::kPhaseComplete;
  std::string point;         // swing point or contact name, when relevant
  double scale = 1.0;        // characteristic magnitude; values are divided by it
  double armed_from = 0.0;   // minimum phase before the guard may fire
};

struct DomainSpec {
  std::string name;
  std::vector<std::string> contacts;
  Guard guard;
};

/// Directed cycle of locomotion domains. Vertex v has the single outgoing
/// edge v -> next_domain(v) with reset kind reset(v).
class GaitGraph {
 public:
  GaitGraph() = default;
  /// successor[v] and resets[v] describe the edge leaving v. Throws
  /// std::invalid_argument unless the edges form one cycle through all
  /// vertices.
  GaitGraph(std::vector<DomainSpec> domains, std::vector<int> successor, std::vector<ResetKind> resets);
  /// Cycle 0 -> 1 -> ... -> n-1 -> 0.
  static GaitGraph cycle(std::vector<DomainSpec> domains, std::vector<ResetKind> resets);

  int size() const { return static_cast<int>(domains_.size()); }
  const DomainSpec& domain(int v) const { return domains_.at(static_cast<size_t>(v)); }
  const std::vector<DomainSpec>& domains() const { return domains_; }
  int next_domain(int v) const { return successor_.at(static_cast<size_t>(v)); }
  ResetKind reset(int v) const { return resets_.at(static_cast<size_t>(v)); }
  /// Position of v along the cycle starting from vertex 0.
  int cycle_position(int v) const { return position_.at(static_cast<size_t>(v)); }
  bool has_edge(int from, int to) const { return next_domain(from) == to; }

 private:
  std::vector<DomainSpec> domains_;
  std::vector<int> successor_;
  std::vector<ResetKind> resets_;
  std::vector<int> position_;
};

/// Convenience: graph with anonymous phase-complete domains.
GaitGraph plain_cycle(int n);

struct ProductVertex {
  int v = 0;
  int w = 0;
  bool operator==(const ProductVertex&) const = default;
  auto operator<=>(const ProductVertex&) const = default;
};

struct ProductEdge {
  ProductVertex from, to;
  int condition = 0;  // 1: v stays, 2: w stays, 3: both move
};

struct ProductGraph {
  std::vector<ProductVertex> vertices;  // lexicographic
  std::vector<ProductEdge> edges;       // lexicographic by (from, to)
  int index(const ProductVertex& p) const;
};

ProductGraph strong_product(const GaitGraph& g);

/// Which strong-product condition admits from -> to, or 0 if none does. When
/// several hold (self-loops) the lowest is reported.
int classify_edge(const GaitGraph& g, const ProductVertex& from, const ProductVertex& to);

}  // namespace coopgait
