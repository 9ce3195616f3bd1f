#include "htgfd/metrics.hpp"

#include "htgfd/common.hpp"

#include <algorithm>
#include <numeric>

namespace htgfd {

namespace {

void check_two_classes(const std::vector<double>& scores,
                       const std::vector<int8_t>& labels, int64_t& n_pos,
                       int64_t& n_neg) {
  require(scores.size() == labels.size(), "metrics: score/label size mismatch");
  n_pos = n_neg = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] == 0 || labels[i] == 1, "metrics: labels must be 0/1");
    require(std::isfinite(scores[i]), "metrics: non-finite score");
    (labels[i] == 1 ? n_pos : n_neg)++;
  }
  require(n_pos > 0 && n_neg > 0,
          "metrics: need at least one positive and one negative");
}

}  // namespace

double auc_score(const std::vector<double>& scores,
                 const std::vector<int8_t>& labels) {
  int64_t n_pos = 0, n_neg = 0;
  check_two_classes(scores, labels, n_pos, n_neg);

  std::vector<size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // average ranks inside tie groups make ties count 0.5 per pair
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < idx.size()) {
    size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) +
                             static_cast<double>(j)) /
                            2.0;
    for (size_t k = i; k < j; ++k)
      if (labels[idx[k]] == 1) rank_sum_pos += avg_rank;
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double ks_score(const std::vector<double>& scores,
                const std::vector<int8_t>& labels) {
  int64_t n_pos = 0, n_neg = 0;
  check_two_classes(scores, labels, n_pos, n_neg);

  std::vector<size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  double best = 0.0;
  int64_t cpos = 0, cneg = 0;
  size_t i = 0;
  while (i < idx.size()) {
    size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    for (size_t k = i; k < j; ++k) (labels[idx[k]] == 1 ? cpos : cneg)++;
    const double gap =
        std::abs(static_cast<double>(cpos) / static_cast<double>(n_pos) -
                 static_cast<double>(cneg) / static_cast<double>(n_neg));
    best = std::max(best, gap);
    i = j;
  }
  return best;
}

Confusion confusion_at_half(const std::vector<double>& scores,
                            const std::vector<int8_t>& labels) {
  Confusion c;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] > 0.5;
    if (labels[i] == 1)
      (pred ? c.tp : c.fn)++;
    else
      (pred ? c.fp : c.tn)++;
  }
  return c;
}

nlohmann::json eval_report(const std::vector<double>& scores,
                           const std::vector<int8_t>& labels) {
  int64_t n_pos = 0, n_neg = 0;
  check_two_classes(scores, labels, n_pos, n_neg);
  Confusion c = confusion_at_half(scores, labels);
  return {{"auc", auc_score(scores, labels)},
          {"ks", ks_score(scores, labels)},
          {"n_pos", n_pos},
          {"n_neg", n_neg},
          {"threshold_0.5",
           {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}}}};
}

}  // namespace htgfd
