#pragma once

#include "htgfd/augment.hpp"
#include "htgfd/sequences.hpp"

#include <optional>
#include <string>
#include <vector>

namespace htgfd {

// Everything extraction and augmentation produce before training starts:
// temporal-snapshot presence structure and relation-sequence paths, plus the
// materialized augmented-pair plans. Item vectors are assembled at training
// time because they depend on live encoder parameters.

struct TssWorld {
  std::vector<std::optional<HistorySpec>> specs;  // per user
  std::vector<AugmentedPairPlan> plans;
  int n_skipped = 0;
};

struct UrsWorld {
  UrsCorpus corpus;
  CorpusHypergraph ch;
  std::vector<std::vector<AugmentedPairPlan>> plans;  // per user, per sequence
};

struct ViewParams {
  double gamma = 0.4;
  double alpha = 0.4;
  int max_urs = 10;
  int l_max = 32;
  uint64_t seed = 1;
};

TssWorld build_tss_world(const GraphStream& g, const ViewParams& p);
UrsWorld build_urs_world(const GraphStream& g, const ViewParams& p);

// Disk cache (manifest JSON + packed binary arrays) so repeated commands
// reuse extraction and augmentation. The cache key folds the graph content
// and every parameter the structures depend on. Directory comes from the
// HTGFD_CACHE_DIR environment variable; empty means no caching.
std::string view_cache_key(const GraphStream& g, const ViewParams& p);

TssWorld cached_tss_world(const GraphStream& g, const ViewParams& p,
                          const std::string& cache_dir);
UrsWorld cached_urs_world(const GraphStream& g, const ViewParams& p,
                          const std::string& cache_dir);

std::string cache_dir_from_env();

}  // namespace htgfd
