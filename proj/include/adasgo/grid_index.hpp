#pragma once

#include <compare>
#include <cstddef>
#include <initializer_list>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

namespace adasgo {

/// Level vector (i_1, ..., i_d) with every component >= 1.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> levels);
  MultiIndex(std::initializer_list<int> levels);

  static MultiIndex ones(std::size_t dim);
  static MultiIndex filled(std::size_t dim, int level);

  std::size_t dim() const { return levels_.size(); }
  int operator[](std::size_t k) const { return levels_[k]; }
  const std::vector<int>& levels() const { return levels_; }

  /// |i|_1
  int l1() const;
  int max() const;
  MultiIndex incremented(std::size_t k) const;
  MultiIndex decremented(std::size_t k) const;

  /// Componentwise i <= other.
  bool componentwise_le(const MultiIndex& other) const;

  auto operator<=>(const MultiIndex&) const = default;

 private:
  std::vector<int> levels_;
};

struct MultiIndexHash {
  std::size_t operator()(const MultiIndex& i) const noexcept;
};

/// Downward-closed index set below a componentwise cap.
///
/// Membership lives in a hash set; the insertion journal keeps the order in
/// which indices were added so downstream sums are reproducible.
class Downset {
 public:
  /// Empty set with the given cap.
  explicit Downset(MultiIndex cap);

  static Downset full_box(const MultiIndex& cap);
  /// {i : |i|_1 <= level + d - 1}, capped at (level, ..., level).
  static Downset classical(int level, std::size_t dim);
  /// Inserts `members` in graded order; throws NotADownset if not closed.
  static Downset from_indices(const MultiIndex& cap, std::vector<MultiIndex> members);

  std::size_t dimension() const { return cap_.dim(); }
  const MultiIndex& cap() const { return cap_; }
  std::size_t size() const { return journal_.size(); }
  bool empty() const { return journal_.empty(); }
  const std::vector<MultiIndex>& journal() const { return journal_; }

  bool contains(const MultiIndex& i) const;

  /// True iff i is not a member and every backward neighbour i - e_k
  /// (with i_k > 1) is. Throws DimensionMismatch.
  bool is_covering_element(const MultiIndex& i) const;

  /// All covering elements within the cap, lexicographically sorted.
  std::vector<MultiIndex> covering_elements() const;

  /// Covering elements of the form i + e_k; used after inserting i.
  std::vector<MultiIndex> forward_covering(const MultiIndex& i) const;

  /// Throws NotADownset if i is not a covering element within the cap.
  void insert(const MultiIndex& i);

  /// Brute-force closure check over all members.
  bool is_downward_closed() const;

  /// JSON array of integer arrays in insertion order.
  nlohmann::json to_json() const;
  static Downset from_json(const MultiIndex& cap, const nlohmann::json& j);

 private:
  MultiIndex cap_;
  std::unordered_set<MultiIndex, MultiIndexHash> members_;
  std::vector<MultiIndex> journal_;
};

/// Number of indices in the full box {1 <= i <= cap}: prod cap_k.
double box_cardinality(const MultiIndex& cap);

}  // namespace adasgo
