#pragma once

#include "htgfd/rng.hpp"
#include "htgfd/sequences.hpp"

#include <unordered_map>
#include <vector>

namespace htgfd {

// One hyperedge per user relation sequence in the corpus; shared nodes across
// sequences create the hyperconnections the substitute operator follows.
struct Hypergraph {
  std::vector<std::vector<SeqItem>> edges;  // hyperedge id -> ordered path
  // node gid -> every (hyperedge, position) occurrence
  std::unordered_map<int32_t, std::vector<std::pair<int32_t, int32_t>>>
      incidence;
};

Hypergraph build_hypergraph(const std::vector<std::vector<SeqItem>>& paths);

// Flat corpus view of a UrsCorpus plus the owning sequence ids per user, so a
// sequence knows its own hyperedge.
struct CorpusHypergraph {
  Hypergraph hg;
  std::vector<std::vector<int32_t>> edge_of;  // per user, per sequence index
};

CorpusHypergraph build_corpus_hypergraph(const UrsCorpus& corpus);

// A materialized augmentation of one sequence: a position permutation
// (identity outside the shuffled window) and, for substituted views, the
// replacement path. Assembly into vectors happens at training time.
struct AugmentPlan {
  enum class Op { kReorder, kSubstitute } op = Op::kReorder;
  std::vector<int32_t> perm;  // over all positions; identity on padding
  std::vector<SeqItem> path;  // URS views: the (possibly substituted) path
  int window_start = -1;      // reorder bookkeeping
  int window_len = 0;
  int substituted = 0;
};

// Shuffle a contiguous window of length floor(gamma * n) inside the
// non-padding span of n real positions. Windows of length 0 or 1 degrade to
// the identity. Padding never moves.
AugmentPlan reorder(const HistorySpec& spec, double gamma, uint64_t rng_seed);

// Replace floor(alpha * n) uniformly chosen path nodes by their successor
// (predecessor at the path end) inside a uniformly chosen foreign hyperedge;
// nodes without a foreign hyperedge stay put.
AugmentPlan substitute(const HistorySpec& spec, const CorpusHypergraph& ch,
                       int32_t own_edge, double alpha, uint64_t rng_seed);

struct AugmentedPairPlan {
  AugmentPlan a, b;
};

// TSS: two independent reorders. URS: reorder plus substitute.
AugmentedPairPlan augment_pair(const HistorySpec& spec,
                               const CorpusHypergraph* ch, int32_t own_edge,
                               double gamma, double alpha, uint64_t rng_seed);

}  // namespace htgfd
