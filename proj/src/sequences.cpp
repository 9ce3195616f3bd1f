#include "htgfd/sequences.hpp"

#include <algorithm>
#include <array>
#include <iostream>
#include <map>
#include <set>

namespace htgfd {

HistorySpec extract_tss_spec(const GraphStream& g, int32_t user) {
  require(user >= 0 && user < g.n_users(), "extract_tss: unknown user");
  const int32_t ugid = g.user_gid(user);
  HistorySpec spec;
  spec.view = ViewKind::TSS;
  spec.owner = user;
  spec.present.assign(static_cast<size_t>(g.T()), 0);
  int first = -1, last = -1;
  for (int t = 1; t <= g.T(); ++t) {
    if (g.active(t, ugid)) {
      spec.present[static_cast<size_t>(t - 1)] = 1;
      if (first < 0) first = t;
      last = t;
    }
  }
  require(first > 0, "extract_tss: user " + std::to_string(user) +
                         " is absent from every snapshot");
  spec.mask.assign(static_cast<size_t>(g.T()), 0);
  for (int t = first; t <= last; ++t)
    spec.mask[static_cast<size_t>(t - 1)] = 1;
  return spec;
}

namespace {

// one slot per distinct timestamp; alternatives are the distinct targets of
// the user's out-edges at that timestamp
struct TieGroups {
  std::vector<int> ts;
  std::vector<std::vector<int32_t>> alternatives;
};

TieGroups tie_groups(const GraphStream& g, int32_t user) {
  TieGroups tg;
  std::map<int, std::set<int32_t>> by_t;
  for (const auto& e : g.out_edges_over_time(g.user_gid(user)))
    by_t[e.t].insert(e.dst);
  for (auto& [t, dsts] : by_t) {
    tg.ts.push_back(t);
    tg.alternatives.emplace_back(dsts.begin(), dsts.end());
  }
  return tg;
}

HistorySpec path_to_spec(int32_t owner, std::vector<SeqItem> path, int l_max) {
  if (static_cast<int>(path.size()) > l_max)
    path.erase(path.begin(),
               path.begin() + (static_cast<int>(path.size()) - l_max));
  HistorySpec spec;
  spec.view = ViewKind::URS;
  spec.owner = owner;
  spec.mask.assign(path.size(), 1);
  spec.path = std::move(path);
  return spec;
}

}  // namespace

std::vector<HistorySpec> extract_urs_own(const GraphStream& g, int32_t user,
                                         int max_count, int l_max,
                                         uint64_t rng_seed) {
  require(max_count >= 1, "extract_urs: max_count must be >= 1");
  require(l_max >= 1, "extract_urs: l_max must be >= 1");
  require(user >= 0 && user < g.n_users(), "extract_urs: unknown user");

  TieGroups tg = tie_groups(g, user);
  if (tg.ts.empty()) return {};

  const size_t n_slots = tg.ts.size();
  double total = 1.0;
  for (const auto& alt : tg.alternatives) {
    total *= static_cast<double>(alt.size());
    if (total > 1e9) break;
  }

  std::vector<std::vector<int32_t>> choices;  // one entry per sequence
  if (total <= static_cast<double>(max_count)) {
    // enumerate every branch lexicographically
    std::vector<int32_t> odo(n_slots, 0);
    for (;;) {
      choices.push_back(odo);
      size_t k = n_slots;
      bool overflow = true;
      while (k > 0) {
        --k;
        if (++odo[k] < static_cast<int32_t>(tg.alternatives[k].size())) {
          overflow = false;
          break;
        }
        odo[k] = 0;
      }
      if (overflow) break;
    }
  } else {
    Rng rng(Rng::mix({rng_seed, 0x5EC5ull, static_cast<uint64_t>(user)}));
    std::set<std::vector<int32_t>> seen;
    int attempts = 0;
    while (static_cast<int>(choices.size()) < max_count &&
           attempts < 64 * max_count) {
      ++attempts;
      std::vector<int32_t> pick(n_slots);
      for (size_t k = 0; k < n_slots; ++k)
        pick[k] = static_cast<int32_t>(
            rng.below(tg.alternatives[k].size()));
      if (seen.insert(pick).second) choices.push_back(pick);
    }
  }
  if (static_cast<int>(choices.size()) > max_count)
    choices.resize(static_cast<size_t>(max_count));

  std::vector<HistorySpec> out;
  out.reserve(choices.size());
  for (const auto& pick : choices) {
    std::vector<SeqItem> path;
    path.reserve(n_slots);
    for (size_t k = 0; k < n_slots; ++k)
      path.push_back(
          {tg.alternatives[k][static_cast<size_t>(pick[k])], tg.ts[k]});
    out.push_back(path_to_spec(user, std::move(path), l_max));
  }
  return out;
}

UrsCorpus extract_urs_corpus(const GraphStream& g, int max_count, int l_max,
                             uint64_t rng_seed) {
  UrsCorpus corpus;
  corpus.per_user.resize(static_cast<size_t>(g.n_users()));

  // pass 1: users with their own out-edges
  for (int32_t u = 0; u < g.n_users(); ++u)
    corpus.per_user[static_cast<size_t>(u)] =
        extract_urs_own(g, u, max_count, l_max, rng_seed);

  // occurrence index over own sequences: user gid -> (user, seq, pos)
  std::unordered_map<int32_t, std::vector<std::array<int32_t, 3>>> occur;
  for (int32_t u = 0; u < g.n_users(); ++u)
    for (size_t s = 0; s < corpus.per_user[static_cast<size_t>(u)].size(); ++s) {
      const auto& path = corpus.per_user[static_cast<size_t>(u)][s].path;
      for (size_t pos = 0; pos < path.size(); ++pos)
        occur[path[pos].gid].push_back(
            {u, static_cast<int32_t>(s), static_cast<int32_t>(pos)});
    }

  // pass 2: borrow suffixes for users with no out-edges
  for (int32_t u = 0; u < g.n_users(); ++u) {
    auto& mine = corpus.per_user[static_cast<size_t>(u)];
    if (!mine.empty()) continue;
    auto it = occur.find(g.user_gid(u));
    if (it != occur.end()) {
      auto candidates = it->second;  // deterministic construction order
      Rng rng(Rng::mix({rng_seed, 0xB0A7ull, static_cast<uint64_t>(u)}));
      auto idx = rng.sample_indices(static_cast<int32_t>(candidates.size()),
                                    max_count);
      std::set<std::vector<SeqItem>> dedup;
      for (int32_t ci : idx) {
        const auto& [src, seq, pos] = candidates[static_cast<size_t>(ci)];
        const auto& path =
            corpus.per_user[static_cast<size_t>(src)][static_cast<size_t>(seq)]
                .path;
        // keep the starting occurrence; cap the suffix at l_max items
        std::vector<SeqItem> sub(path.begin() + pos, path.end());
        if (static_cast<int>(sub.size()) > l_max) sub.resize(l_max);
        if (!dedup.insert(sub).second) continue;
        HistorySpec spec = path_to_spec(u, std::move(sub), l_max);
        spec.borrowed_from = src;
        mine.push_back(std::move(spec));
        ++corpus.n_borrowed;
      }
    }
    if (mine.empty()) {
      HistorySpec spec = path_to_spec(u, {{g.user_gid(u), 1}}, l_max);
      spec.fallback = true;
      mine.push_back(std::move(spec));
      ++corpus.n_fallback;
    }
  }

  if (corpus.n_borrowed || corpus.n_fallback)
    std::cerr << "urs corpus: " << corpus.n_borrowed << " borrowed, "
              << corpus.n_fallback << " fallback sequences\n";
  return corpus;
}

}  // namespace htgfd
