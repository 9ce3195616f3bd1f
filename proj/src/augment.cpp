#include "htgfd/augment.hpp"

#include "htgfd/common.hpp"

#include <algorithm>
#include <numeric>

namespace htgfd {

Hypergraph build_hypergraph(const std::vector<std::vector<SeqItem>>& paths) {
  Hypergraph hg;
  hg.edges.reserve(paths.size());
  for (const auto& p : paths) {
    require(!p.empty(), "build_hypergraph: empty path");
    const int32_t id = static_cast<int32_t>(hg.edges.size());
    for (size_t pos = 0; pos < p.size(); ++pos)
      hg.incidence[p[pos].gid].push_back({id, static_cast<int32_t>(pos)});
    hg.edges.push_back(p);
  }
  return hg;
}

CorpusHypergraph build_corpus_hypergraph(const UrsCorpus& corpus) {
  CorpusHypergraph ch;
  std::vector<std::vector<SeqItem>> paths;
  ch.edge_of.resize(corpus.per_user.size());
  for (size_t u = 0; u < corpus.per_user.size(); ++u) {
    for (const auto& spec : corpus.per_user[u]) {
      ch.edge_of[u].push_back(static_cast<int32_t>(paths.size()));
      paths.push_back(spec.path);
    }
  }
  ch.hg = build_hypergraph(paths);
  return ch;
}

namespace {

// [lo, hi) of the contiguous real span
std::pair<int, int> real_span(const HistorySpec& spec) {
  int lo = -1, hi = -1;
  for (size_t i = 0; i < spec.mask.size(); ++i) {
    if (spec.mask[i]) {
      if (lo < 0) lo = static_cast<int>(i);
      hi = static_cast<int>(i) + 1;
    }
  }
  require(lo >= 0, "augment: sequence has no real positions");
  return {lo, hi};
}

}  // namespace

AugmentPlan reorder(const HistorySpec& spec, double gamma, uint64_t rng_seed) {
  require(gamma >= 0.0 && gamma <= 1.0, "reorder: gamma must lie in [0,1]");
  AugmentPlan plan;
  plan.op = AugmentPlan::Op::kReorder;
  const int L = spec.length();
  plan.perm.resize(static_cast<size_t>(L));
  std::iota(plan.perm.begin(), plan.perm.end(), 0);
  plan.path = spec.path;

  auto [lo, hi] = real_span(spec);
  const int n = hi - lo;
  const int w = static_cast<int>(gamma * n);
  plan.window_len = w;
  if (w <= 1) return plan;  // identity

  Rng rng(Rng::mix({rng_seed, 0x2E02ull, static_cast<uint64_t>(spec.owner)}));
  const int start =
      lo + static_cast<int>(rng.below(static_cast<uint64_t>(n - w + 1)));
  plan.window_start = start;
  for (int i = w; i > 1; --i) {
    int j = static_cast<int>(rng.below(static_cast<uint64_t>(i)));
    std::swap(plan.perm[static_cast<size_t>(start + i - 1)],
              plan.perm[static_cast<size_t>(start + j)]);
  }
  if (!spec.path.empty())
    for (int i = 0; i < L; ++i)
      plan.path[static_cast<size_t>(i)] =
          spec.path[static_cast<size_t>(plan.perm[static_cast<size_t>(i)])];
  return plan;
}

AugmentPlan substitute(const HistorySpec& spec, const CorpusHypergraph& ch,
                       int32_t own_edge, double alpha, uint64_t rng_seed) {
  require(alpha >= 0.0 && alpha <= 1.0, "substitute: alpha must lie in [0,1]");
  require(spec.view == ViewKind::URS, "substitute: needs a node-id path");
  AugmentPlan plan;
  plan.op = AugmentPlan::Op::kSubstitute;
  const int L = spec.length();
  plan.perm.resize(static_cast<size_t>(L));
  std::iota(plan.perm.begin(), plan.perm.end(), 0);
  plan.path = spec.path;

  const int k = static_cast<int>(alpha * L);
  if (k == 0) return plan;

  Rng rng(Rng::mix({rng_seed, 0x5B57ull, static_cast<uint64_t>(spec.owner)}));
  auto positions = rng.sample_indices(L, k);
  for (int32_t pos : positions) {
    const int32_t node = spec.path[static_cast<size_t>(pos)].gid;
    auto it = ch.hg.incidence.find(node);
    if (it == ch.hg.incidence.end()) continue;
    // distinct foreign hyperedges where the node has a neighbor on the path
    std::vector<int32_t> candidates;
    for (const auto& [edge, _] : it->second) {
      if (edge == own_edge) continue;
      if (ch.hg.edges[static_cast<size_t>(edge)].size() < 2) continue;
      if (candidates.empty() || candidates.back() != edge)
        candidates.push_back(edge);
    }
    candidates.erase(std::unique(candidates.begin(), candidates.end()),
                     candidates.end());
    if (candidates.empty()) continue;  // left unchanged
    const int32_t edge = candidates[static_cast<size_t>(
        rng.below(candidates.size()))];
    const auto& epath = ch.hg.edges[static_cast<size_t>(edge)];
    size_t occ = 0;
    while (occ < epath.size() && epath[occ].gid != node) ++occ;
    const size_t repl = occ + 1 < epath.size() ? occ + 1 : occ - 1;
    plan.path[static_cast<size_t>(pos)] = epath[repl];
    ++plan.substituted;
  }
  return plan;
}

AugmentedPairPlan augment_pair(const HistorySpec& spec,
                               const CorpusHypergraph* ch, int32_t own_edge,
                               double gamma, double alpha, uint64_t rng_seed) {
  AugmentedPairPlan pair;
  if (spec.view == ViewKind::TSS) {
    pair.a = reorder(spec, gamma, Rng::mix({rng_seed, 1}));
    pair.b = reorder(spec, gamma, Rng::mix({rng_seed, 2}));
  } else {
    require(ch != nullptr, "augment_pair: URS needs the hypergraph");
    pair.a = reorder(spec, gamma, Rng::mix({rng_seed, 1}));
    pair.b = substitute(spec, *ch, own_edge, alpha, Rng::mix({rng_seed, 2}));
  }
  return pair;
}

}  // namespace htgfd
