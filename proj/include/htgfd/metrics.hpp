#pragma once

#include <json.hpp>

#include <cstdint>
#include <vector>

namespace htgfd {

// Mann-Whitney AUC: over all (positive, negative) pairs a win counts 1 and a
// tie 0.5, computed via average ranks. Requires both classes present.
double auc_score(const std::vector<double>& scores,
                 const std::vector<int8_t>& labels);

// Two-sample Kolmogorov-Smirnov statistic: the largest gap between the
// empirical score CDFs of the two classes, evaluated at observed scores.
double ks_score(const std::vector<double>& scores,
                const std::vector<int8_t>& labels);

struct Confusion {
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// counts at the fixed 0.5 threshold (score > 0.5 predicts positive)
Confusion confusion_at_half(const std::vector<double>& scores,
                            const std::vector<int8_t>& labels);

// {auc, ks, n_pos, n_neg, threshold_0.5: {tp, fp, tn, fn}}
nlohmann::json eval_report(const std::vector<double>& scores,
                           const std::vector<int8_t>& labels);

}  // namespace htgfd
