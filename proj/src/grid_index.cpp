#include "adasgo/grid_index.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "adasgo/errors.hpp"

namespace adasgo {

namespace {

std::string describe(const MultiIndex& i) {
  std::string s = "(";
  for (std::size_t k = 0; k < i.dim(); ++k) {
    if (k) s += ",";
    s += std::to_string(i[k]);
  }
  return s + ")";
}

void check_dim(const MultiIndex& a, std::size_t dim) {
  if (a.dim() != dim) {
    throw Error(ErrorCode::DimensionMismatch, "index " + describe(a) + " has dimension " +
                                                  std::to_string(a.dim()) + ", expected " +
                                                  std::to_string(dim));
  }
}

// Visits every i with 1 <= i <= cap in lexicographic order.
template <typename Fn>
void for_each_in_box(const MultiIndex& cap, Fn&& fn) {
  std::vector<int> cur(cap.dim(), 1);
  while (true) {
    fn(MultiIndex(cur));
    std::size_t k = cap.dim();
    while (k > 0) {
      --k;
      if (cur[k] < cap[k]) {
        ++cur[k];
        std::fill(cur.begin() + static_cast<std::ptrdiff_t>(k) + 1, cur.end(), 1);
        break;
      }
      if (k == 0) return;
    }
    if (cap.dim() == 0) return;
  }
}

}  // namespace

MultiIndex::MultiIndex(std::vector<int> levels) : levels_(std::move(levels)) {
  for (int l : levels_) {
    if (l < 1) throw Error(ErrorCode::InvalidArgument, "multi-index components must be >= 1");
  }
}

MultiIndex::MultiIndex(std::initializer_list<int> levels) : MultiIndex(std::vector<int>(levels)) {}

MultiIndex MultiIndex::ones(std::size_t dim) { return filled(dim, 1); }

MultiIndex MultiIndex::filled(std::size_t dim, int level) {
  return MultiIndex(std::vector<int>(dim, level));
}

int MultiIndex::l1() const { return std::accumulate(levels_.begin(), levels_.end(), 0); }

int MultiIndex::max() const {
  return levels_.empty() ? 0 : *std::max_element(levels_.begin(), levels_.end());
}

MultiIndex MultiIndex::incremented(std::size_t k) const {
  MultiIndex out = *this;
  ++out.levels_[k];
  return out;
}

MultiIndex MultiIndex::decremented(std::size_t k) const {
  MultiIndex out = *this;
  --out.levels_[k];
  if (out.levels_[k] < 1) throw Error(ErrorCode::InvalidArgument, "multi-index component below 1");
  return out;
}

bool MultiIndex::componentwise_le(const MultiIndex& other) const {
  check_dim(other, dim());
  for (std::size_t k = 0; k < dim(); ++k) {
    if (levels_[k] > other.levels_[k]) return false;
  }
  return true;
}

std::size_t MultiIndexHash::operator()(const MultiIndex& i) const noexcept {
  std::size_t h = 1469598103934665603ull;
  for (int l : i.levels()) {
    h ^= static_cast<std::size_t>(l);
    h *= 1099511628211ull;
  }
  return h;
}

Downset::Downset(MultiIndex cap) : cap_(std::move(cap)) {
  if (cap_.dim() == 0) throw Error(ErrorCode::InvalidArgument, "downset dimension must be >= 1");
}

Downset Downset::full_box(const MultiIndex& cap) {
  Downset out(cap);
  // Lexicographic order visits every backward neighbour first.
  for_each_in_box(cap, [&](const MultiIndex& i) { out.insert(i); });
  return out;
}

Downset Downset::classical(int level, std::size_t dim) {
  if (level < 1) throw Error(ErrorCode::InvalidArgument, "sparse grid level must be >= 1");
  const MultiIndex cap = MultiIndex::filled(dim, level);
  const int budget = level + static_cast<int>(dim) - 1;
  std::vector<MultiIndex> members;
  for_each_in_box(cap, [&](const MultiIndex& i) {
    if (i.l1() <= budget) members.push_back(i);
  });
  return from_indices(cap, std::move(members));
}

Downset Downset::from_indices(const MultiIndex& cap, std::vector<MultiIndex> members) {
  std::sort(members.begin(), members.end(), [](const MultiIndex& a, const MultiIndex& b) {
    if (a.l1() != b.l1()) return a.l1() < b.l1();
    return a < b;
  });
  members.erase(std::unique(members.begin(), members.end()), members.end());
  Downset out(cap);
  for (const auto& i : members) out.insert(i);
  return out;
}

bool Downset::contains(const MultiIndex& i) const { return members_.count(i) != 0; }

bool Downset::is_covering_element(const MultiIndex& i) const {
  check_dim(i, dimension());
  if (contains(i)) return false;
  for (std::size_t k = 0; k < i.dim(); ++k) {
    if (i[k] > 1 && !contains(i.decremented(k))) return false;
  }
  return true;
}

std::vector<MultiIndex> Downset::covering_elements() const {
  std::vector<MultiIndex> out;
  if (empty()) {
    out.push_back(MultiIndex::ones(dimension()));
    return out;
  }
  for (const auto& i : journal_) {
    for (auto& c : forward_covering(i)) out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<MultiIndex> Downset::forward_covering(const MultiIndex& i) const {
  check_dim(i, dimension());
  std::vector<MultiIndex> out;
  for (std::size_t k = 0; k < i.dim(); ++k) {
    if (i[k] >= cap_[k]) continue;
    MultiIndex c = i.incremented(k);
    if (is_covering_element(c)) out.push_back(std::move(c));
  }
  return out;
}

void Downset::insert(const MultiIndex& i) {
  check_dim(i, dimension());
  if (!i.componentwise_le(cap_)) {
    throw Error(ErrorCode::NotADownset, "index " + describe(i) + " exceeds cap " + describe(cap_));
  }
  if (!is_covering_element(i)) {
    throw Error(ErrorCode::NotADownset,
                "inserting " + describe(i) + " would break downward closure");
  }
  members_.insert(i);
  journal_.push_back(i);
}

bool Downset::is_downward_closed() const {
  for (const auto& i : journal_) {
    for (std::size_t k = 0; k < i.dim(); ++k) {
      if (i[k] > 1 && !contains(i.decremented(k))) return false;
    }
  }
  return true;
}

nlohmann::json Downset::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& i : journal_) arr.push_back(i.levels());
  return arr;
}

Downset Downset::from_json(const MultiIndex& cap, const nlohmann::json& j) {
  Downset out(cap);
  for (const auto& entry : j) out.insert(MultiIndex(entry.get<std::vector<int>>()));
  return out;
}

double box_cardinality(const MultiIndex& cap) {
  double n = 1.0;
  for (int l : cap.levels()) n *= static_cast<double>(l);
  return n;
}

}  // namespace adasgo
