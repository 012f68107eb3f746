#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace daps {

/// Shape of a joint-outcome table: N detectors, outcomes 0..K each.
/// Cells are indexed base (K+1) with arm 0 as the most significant digit.
struct TableShape {
  int N = 0;
  int K = 0;

  std::size_t entries() const {
    std::size_t e = 1;
    for (int i = 0; i < N; ++i) e *= static_cast<std::size_t>(K + 1);
    return e;
  }
  std::size_t index(std::span<const int> tuple) const {
    std::size_t idx = 0;
    for (int i = 0; i < N; ++i) idx = idx * (K + 1) + static_cast<std::size_t>(tuple[i]);
    return idx;
  }
  void decode(std::size_t idx, std::span<int> tuple) const {
    for (int i = N - 1; i >= 0; --i) {
      tuple[i] = static_cast<int>(idx % (K + 1));
      idx /= (K + 1);
    }
  }
  bool operator==(const TableShape&) const = default;
};

/// Real-valued table over outcome tuples (probabilities, symmetrized counts,
/// asymmetry parts, ...).
struct Table {
  TableShape shape;
  std::vector<double> v;

  Table() = default;
  explicit Table(TableShape s) : shape(s), v(s.entries(), 0.0) {}

  double sum() const {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc;
  }
};

/// Integer coincidence events E(k_1,...,k_N) with total E.
struct CoincidenceCounts {
  TableShape shape;
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  CoincidenceCounts() = default;
  explicit CoincidenceCounts(TableShape s) : shape(s), counts(s.entries(), 0) {}
};

/// Histogram (N_0,...,N_K) view of a tuple table: N_k counts how many arms
/// reported outcome k.
std::map<std::vector<int>, double> histogram_view(const Table& table);

/// Lightweight per-setting view handed to the estimator. Exactly one of
/// exact/events may be null.
struct SettingCounts {
  int index = 0;
  double beta2 = 0.0;
  const Table* exact = nullptr;
  const CoincidenceCounts* events = nullptr;
};

}  // namespace daps
