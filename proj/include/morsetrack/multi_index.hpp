#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "morsetrack/errors.hpp"

namespace morsetrack {

inline constexpr int kMaxVars = 8;
inline constexpr int kMaxOrder = 8;

/// Exponent tuple of a monomial in n variables.
struct MultiIndex {
  std::array<std::uint8_t, kMaxVars> e{};
  int n = 0;

  int degree() const {
    int d = 0;
    for (int i = 0; i < n; ++i) d += e[i];
    return d;
  }

  /// a! = prod a_i!  (fits comfortably in double for order <= 8)
  double factorial() const {
    static constexpr double fact[9] = {1, 1, 2, 6, 24, 120, 720, 5040, 40320};
    double f = 1.0;
    for (int i = 0; i < n; ++i) f *= fact[e[i]];
    return f;
  }

  std::uint32_t pack() const {
    std::uint32_t key = 0;
    for (int i = 0; i < n; ++i) key |= std::uint32_t(e[i] & 0xF) << (4 * i);
    return key;
  }

  bool operator==(const MultiIndex& o) const { return n == o.n && e == o.e; }
};

/// Dense enumeration of all multi-indices with total degree <= order, in
/// lexicographic order of the exponent tuple.  Shared and cached per (n, order);
/// index 0 is always the constant monomial.
class MultiIndexTable {
 public:
  static const MultiIndexTable& get(int n, int order) {
    if (n < 1 || n > kMaxVars) throw domain_error("multi-index table: n out of range");
    if (order < 0 || order > kMaxOrder) throw domain_error("multi-index table: order out of range");
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::unique_ptr<MultiIndexTable>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(n, order);
    auto it = cache.find(key);
    if (it == cache.end())
      it = cache.emplace(key, std::unique_ptr<MultiIndexTable>(new MultiIndexTable(n, order))).first;
    return *it->second;
  }

  int n() const { return n_; }
  int order() const { return order_; }
  int size() const { return int(list_.size()); }
  const MultiIndex& at(int i) const { return list_[std::size_t(i)]; }

  /// Index of a tuple, or -1 when its degree exceeds the table order.
  int index_of(const MultiIndex& m) const {
    auto it = lookup_.find(m.pack());
    return it == lookup_.end() ? -1 : it->second;
  }

  /// Index of at(i) + at(j), or -1 when the sum exceeds the order.
  int product_index(int i, int j) const { return prod_[std::size_t(i) * list_.size() + j]; }

 private:
  MultiIndexTable(int n, int order) : n_(n), order_(order) {
    MultiIndex cur;
    cur.n = n;
    enumerate(cur, 0, order);
    lookup_.reserve(list_.size() * 2);
    for (int i = 0; i < int(list_.size()); ++i) lookup_.emplace(list_[i].pack(), i);
    prod_.assign(list_.size() * list_.size(), -1);
    for (int i = 0; i < int(list_.size()); ++i)
      for (int j = 0; j < int(list_.size()); ++j) {
        if (list_[i].degree() + list_[j].degree() > order) continue;
        MultiIndex s;
        s.n = n;
        for (int v = 0; v < n; ++v) s.e[v] = std::uint8_t(list_[i].e[v] + list_[j].e[v]);
        prod_[std::size_t(i) * list_.size() + j] = index_of(s);
      }
  }

  void enumerate(MultiIndex& cur, int pos, int budget) {
    if (pos == n_) {
      list_.push_back(cur);
      return;
    }
    for (int v = 0; v <= budget; ++v) {
      cur.e[pos] = std::uint8_t(v);
      enumerate(cur, pos + 1, budget - v);
    }
    cur.e[pos] = 0;
  }

  int n_, order_;
  std::vector<MultiIndex> list_;
  std::unordered_map<std::uint32_t, int> lookup_;
  std::vector<int> prod_;
};

}  // namespace morsetrack
