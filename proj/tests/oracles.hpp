#pragma once

// Brute-force reference implementations used only by tests. They must stay
// independent of the library code paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

namespace oracles {

// AUC by explicit (positive, negative) pair enumeration
inline double auc_pairs(const std::vector<double>& scores,
                        const std::vector<int8_t>& labels) {
  double wins = 0.0;
  int64_t np = 0, nn = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    ++np;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  for (int8_t l : labels)
    if (l == 0) ++nn;
  return wins / (static_cast<double>(np) * static_cast<double>(nn));
}

// KS by sweeping every observed score as a threshold
inline double ks_sweep(const std::vector<double>& scores,
                       const std::vector<int8_t>& labels) {
  std::set<double> thresholds(scores.begin(), scores.end());
  int64_t np = 0, nn = 0;
  for (int8_t l : labels) (l == 1 ? np : nn)++;
  double best = 0.0;
  for (double t : thresholds) {
    int64_t cp = 0, cn = 0;
    for (size_t i = 0; i < scores.size(); ++i)
      if (scores[i] <= t) (labels[i] == 1 ? cp : cn)++;
    best = std::max(best,
                    std::abs(static_cast<double>(cp) / static_cast<double>(np) -
                             static_cast<double>(cn) / static_cast<double>(nn)));
  }
  return best;
}

}  // namespace oracles
