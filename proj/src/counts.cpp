#include "daps/counts.hpp"

namespace daps {

std::map<std::vector<int>, double> histogram_view(const Table& table) {
  std::map<std::vector<int>, double> hist;
  std::vector<int> tuple(table.shape.N, 0);
  for (std::size_t idx = 0; idx < table.v.size(); ++idx) {
    if (table.v[idx] == 0.0) continue;
    table.shape.decode(idx, tuple);
    std::vector<int> key(table.shape.K + 1, 0);
    for (int k : tuple) ++key[k];
    hist[key] += table.v[idx];
  }
  return hist;
}

}  // namespace daps
