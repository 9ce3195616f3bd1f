#pragma once

#include "htgfd/graph.hpp"
#include "htgfd/rng.hpp"

#include <optional>
#include <vector>

namespace htgfd {

enum class ViewKind { TSS, URS };

struct SeqItem {
  int32_t gid = -1;  // graph node of any kind
  int t = 0;         // snapshot of the edge that placed it
  auto operator<=>(const SeqItem&) const = default;
  bool operator==(const SeqItem&) const = default;
};

// Structural description of one user-history sequence. Item vectors are
// assembled later (they depend on encoder parameters); this layer fixes
// lengths, masks and node paths.
struct HistorySpec {
  ViewKind view = ViewKind::TSS;
  int32_t owner = -1;  // dense user id

  // TSS: per-snapshot flags, index 0 = snapshot 1. mask marks the contiguous
  // real span (first..last presence); present marks snapshots with an
  // embedding; interior absences are real zero-vector positions.
  std::vector<uint8_t> mask;
  std::vector<uint8_t> present;

  // URS: time-ordered path over 1-hop out-neighbors (all positions real)
  std::vector<SeqItem> path;

  int32_t borrowed_from = -1;  // source user when the path was borrowed
  bool fallback = false;       // length-1 self sequence (nothing to borrow)

  int length() const {
    return view == ViewKind::TSS ? static_cast<int>(mask.size())
                                 : static_cast<int>(path.size());
  }
  int real_count() const {
    int n = 0;
    for (uint8_t m : mask) n += m != 0;
    return view == ViewKind::TSS ? n : static_cast<int>(path.size());
  }
};

// Temporal snapshot sequence structure for one user: presence per snapshot,
// padding only outside the first..last presence span. Errors when the user
// is absent from every snapshot.
HistorySpec extract_tss_spec(const GraphStream& g, int32_t user);

// User relation sequences for one user with out-edges: time-strictly
// increasing walks over its out-neighbors, branching over same-timestamp
// alternatives (sampled without replacement up to max_count), truncated to
// the most recent l_max items. Deterministic given rng_seed.
std::vector<HistorySpec> extract_urs_own(const GraphStream& g, int32_t user,
                                         int max_count, int l_max,
                                         uint64_t rng_seed);

// Full corpus: own sequences where they exist, borrowed suffixes otherwise
// (sub-sequences of other users' sequences starting at this user's node),
// and a logged length-1 fallback when nothing is borrowable.
struct UrsCorpus {
  std::vector<std::vector<HistorySpec>> per_user;
  int64_t n_borrowed = 0;
  int64_t n_fallback = 0;
};

UrsCorpus extract_urs_corpus(const GraphStream& g, int max_count, int l_max,
                             uint64_t rng_seed);

}  // namespace htgfd
