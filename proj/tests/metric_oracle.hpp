#pragma once

#include <algorithm>
#include <iterator>
#include <set>
#include <vector>

#include "liahr/metrics.hpp"

namespace liahr::testing {

/// Independent set-arithmetic implementation of the sample metrics.
struct SetPair {
  std::set<std::size_t> pred, ref;
};

inline std::vector<SetPair> to_sets(const std::vector<metrics::LabelPair>& pairs) {
  std::vector<SetPair> out;
  for (const auto& p : pairs) {
    auto a = p.predicted.indices();
    auto b = p.reference.indices();
    out.push_back({{a.begin(), a.end()}, {b.begin(), b.end()}});
  }
  return out;
}

inline std::set<std::size_t> intersect(const std::set<std::size_t>& a, const std::set<std::size_t>& b) {
  std::set<std::size_t> o;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(o, o.end()));
  return o;
}

inline std::set<std::size_t> unite(const std::set<std::size_t>& a, const std::set<std::size_t>& b) {
  std::set<std::size_t> o;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::inserter(o, o.end()));
  return o;
}

inline double oracle_jaccard(const std::vector<SetPair>& v) {
  double s = 0;
  for (const auto& p : v) {
    const auto u = unite(p.pred, p.ref).size();
    s += u == 0 ? 1.0 : static_cast<double>(intersect(p.pred, p.ref).size()) / static_cast<double>(u);
  }
  return s / static_cast<double>(v.size());
}

inline double oracle_accuracy(const std::vector<SetPair>& v) {
  double s = 0;
  for (const auto& p : v) s += p.pred == p.ref ? 1.0 : 0.0;
  return s / static_cast<double>(v.size());
}

inline double oracle_micro_f1(const std::vector<SetPair>& v) {
  double tp = 0, pred = 0, ref = 0;
  for (const auto& p : v) {
    tp += static_cast<double>(intersect(p.pred, p.ref).size());
    pred += static_cast<double>(p.pred.size());
    ref += static_cast<double>(p.ref.size());
  }
  if (pred + ref == 0) return 1.0;
  return 2 * tp / (pred + ref);
}

inline double oracle_macro_f1(const std::vector<SetPair>& v, std::size_t n_labels) {
  double total = 0;
  for (std::size_t l = 0; l < n_labels; ++l) {
    double tp = 0, fp = 0, fn = 0;
    for (const auto& p : v) {
      const bool in_p = p.pred.count(l) > 0, in_r = p.ref.count(l) > 0;
      tp += (in_p && in_r) ? 1 : 0;
      fp += (in_p && !in_r) ? 1 : 0;
      fn += (!in_p && in_r) ? 1 : 0;
    }
    total += (tp + fp + fn) == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
  }
  return total / static_cast<double>(n_labels);
}

}  // namespace liahr::testing
