#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "htgfd/augment.hpp"
#include "htgfd/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

using namespace htgfd;

namespace {

HistorySpec tss_spec(std::vector<uint8_t> mask) {
  HistorySpec s;
  s.view = ViewKind::TSS;
  s.owner = 0;
  s.present = mask;
  s.mask = std::move(mask);
  return s;
}

HistorySpec urs_spec(std::vector<SeqItem> path, int32_t owner = 0) {
  HistorySpec s;
  s.view = ViewKind::URS;
  s.owner = owner;
  s.mask.assign(path.size(), 1);
  s.path = std::move(path);
  return s;
}

bool is_identity(const std::vector<int32_t>& perm) {
  for (size_t i = 0; i < perm.size(); ++i)
    if (perm[i] != static_cast<int32_t>(i)) return false;
  return true;
}

}  // namespace

TEST_CASE("reorder: gamma 0 is the identity") {
  auto spec = tss_spec({1, 1, 1, 1, 1});
  for (uint64_t seed = 0; seed < 20; ++seed)
    CHECK(is_identity(reorder(spec, 0.0, seed).perm));
}

TEST_CASE("reorder: window arithmetic and padding immobility") {
  // [A, B, C, D, pad, pad]: span 4, gamma 0.5 -> window 2
  auto spec = tss_spec({1, 1, 1, 1, 0, 0});
  for (uint64_t seed = 0; seed < 200; ++seed) {
    auto plan = reorder(spec, 0.5, seed);
    CHECK(plan.window_len == 2);
    CHECK(plan.perm[4] == 4);
    CHECK(plan.perm[5] == 5);
    std::set<int32_t> moved;
    for (size_t i = 0; i < plan.perm.size(); ++i)
      if (plan.perm[i] != static_cast<int32_t>(i))
        moved.insert(static_cast<int32_t>(i));
    if (!moved.empty()) {
      CHECK(*moved.rbegin() - *moved.begin() < 2);  // inside one window
      CHECK(*moved.begin() >= 0);
      CHECK(*moved.rbegin() <= 3);
    }
  }
}

TEST_CASE("reorder: permutation confined to one contiguous real window") {
  Rng rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const int lead = static_cast<int>(rng.below(3));
    const int span = 1 + static_cast<int>(rng.below(8));
    const int tail = static_cast<int>(rng.below(3));
    std::vector<uint8_t> mask;
    for (int i = 0; i < lead; ++i) mask.push_back(0);
    for (int i = 0; i < span; ++i) mask.push_back(1);
    for (int i = 0; i < tail; ++i) mask.push_back(0);
    auto spec = tss_spec(mask);
    const double gamma = rng.real01();
    auto plan = reorder(spec, gamma, rng.u64());

    // permutation property: a bijection on positions
    auto sorted = plan.perm;
    std::sort(sorted.begin(), sorted.end());
    for (size_t i = 0; i < sorted.size(); ++i)
      CHECK(sorted[i] == static_cast<int32_t>(i));

    const int w = static_cast<int>(gamma * span);
    int lo = plan.perm.size() + 1, hi = -1;
    for (size_t i = 0; i < plan.perm.size(); ++i) {
      if (plan.perm[i] != static_cast<int32_t>(i)) {
        lo = std::min<int>(lo, static_cast<int>(i));
        hi = std::max<int>(hi, static_cast<int>(i));
        CHECK(mask[i] == 1);  // padding never moves
      }
    }
    if (hi >= 0) {
      CHECK(w >= 2);
      CHECK(hi - lo < w);  // confined to one window of length w
    }
  }
}

TEST_CASE("hypergraph: incidence from the worked corpus") {
  // v2=2, v3=3, v5=5, v7=7
  auto hg = build_hypergraph({{{2, 1}, {3, 2}, {5, 3}}, {{3, 1}, {7, 2}}});
  REQUIRE(hg.edges.size() == 2);
  CHECK(hg.incidence.at(3).size() == 2);  // v3 on both hyperedges
  CHECK(hg.incidence.at(2).size() == 1);
  CHECK(hg.incidence.at(7).size() == 1);

  // brute-force reconstruction matches the index
  std::map<int32_t, std::set<std::pair<int32_t, int32_t>>> want;
  for (size_t e = 0; e < hg.edges.size(); ++e)
    for (size_t p = 0; p < hg.edges[e].size(); ++p)
      want[hg.edges[e][p].gid].insert(
          {static_cast<int32_t>(e), static_cast<int32_t>(p)});
  for (const auto& [gid, occ] : hg.incidence) {
    std::set<std::pair<int32_t, int32_t>> got(occ.begin(), occ.end());
    CHECK(got == want.at(gid));
  }
}

TEST_CASE("hypergraph: disjoint sequences touch one hyperedge each") {
  auto hg = build_hypergraph({{{1, 1}, {2, 2}}, {{3, 1}, {4, 2}}});
  for (int32_t gid = 1; gid <= 4; ++gid)
    CHECK(hg.incidence.at(gid).size() == 1);
}

TEST_CASE("substitute: the worked example v2,v3,v5 -> v2,v7,v5") {
  UrsCorpus corpus;
  corpus.per_user.resize(7);
  corpus.per_user[1].push_back(urs_spec({{2, 1}, {3, 2}, {5, 3}}, 1));
  corpus.per_user[6].push_back(urs_spec({{3, 1}, {7, 2}}, 6));
  auto ch = build_corpus_hypergraph(corpus);
  const auto& seq = corpus.per_user[1][0];
  const int32_t own = ch.edge_of[1][0];

  // alpha = 1 selects every position; only v3 has a foreign hyperedge
  for (uint64_t seed = 0; seed < 50; ++seed) {
    auto plan = substitute(seq, ch, own, 1.0, seed);
    CHECK(plan.path == std::vector<SeqItem>{{2, 1}, {7, 2}, {5, 3}});
    CHECK(plan.substituted == 1);
  }

  // alpha = 0 is the identity
  CHECK(substitute(seq, ch, own, 0.0, 3).path == seq.path);

  // with a third-of-the-path selection, any change must be the v3 swap
  bool saw_change = false;
  for (uint64_t seed = 0; seed < 60; ++seed) {
    auto plan = substitute(seq, ch, own, 0.34, seed);
    if (plan.path != seq.path) {
      saw_change = true;
      CHECK(plan.path == std::vector<SeqItem>{{2, 1}, {7, 2}, {5, 3}});
    }
  }
  CHECK(saw_change);
}

TEST_CASE("substitute: replacements always share a hyperedge with the node") {
  auto dir = std::filesystem::temp_directory_path() / "htgfd_aug_synth";
  std::filesystem::remove_all(dir);
  SynthConfig cfg;
  cfg.n_users = 200;
  cfg.n_groups = 20;
  cfg.n_devices = 50;
  cfg.victims_per_ring = 8;
  cfg.seed = 17;
  auto res = generate_synthetic(cfg, dir.string());
  auto g = load_graph(res.edges_path, res.nodes_path, res.labels_path,
                      Schema::mmma());
  std::filesystem::remove_all(dir);

  auto corpus = extract_urs_corpus(g, 5, 16, 3);
  auto ch = build_corpus_hypergraph(corpus);
  int changes = 0;
  for (int32_t u = 0; u < g.n_users(); u += 3) {
    const auto& seqs = corpus.per_user[static_cast<size_t>(u)];
    for (size_t s = 0; s < seqs.size(); ++s) {
      const int32_t own = ch.edge_of[static_cast<size_t>(u)][s];
      auto plan = substitute(seqs[s], ch, own, 0.5,
                             Rng::mix({91, static_cast<uint64_t>(u),
                                       static_cast<uint64_t>(s)}));
      REQUIRE(plan.path.size() == seqs[s].path.size());
      for (size_t i = 0; i < plan.path.size(); ++i) {
        if (plan.path[i] == seqs[s].path[i]) continue;
        ++changes;
        // replaced and replacement co-occur on some foreign hyperedge
        const int32_t old_gid = seqs[s].path[i].gid;
        const int32_t new_gid = plan.path[i].gid;
        bool found = false;
        for (const auto& [e, pos] : ch.hg.incidence.at(old_gid)) {
          if (e == own) continue;
          for (const auto& item : ch.hg.edges[static_cast<size_t>(e)])
            if (item.gid == new_gid) found = true;
        }
        CHECK(found);
      }
    }
  }
  CHECK(changes > 50);
}

TEST_CASE("augment_pair: view composition and determinism") {
  auto tspec = tss_spec({1, 1, 1, 1, 1, 1, 0, 0});
  auto p1 = augment_pair(tspec, nullptr, -1, 0.5, 0.5, 42);
  auto p2 = augment_pair(tspec, nullptr, -1, 0.5, 0.5, 42);
  CHECK(p1.a.op == AugmentPlan::Op::kReorder);
  CHECK(p1.b.op == AugmentPlan::Op::kReorder);
  CHECK(p1.a.perm == p2.a.perm);
  CHECK(p1.b.perm == p2.b.perm);
  CHECK(p1.a.perm != p1.b.perm);  // independent sub-seeds (w=3 shuffle)

  UrsCorpus corpus;
  corpus.per_user.resize(2);
  corpus.per_user[0].push_back(urs_spec({{5, 1}, {6, 2}, {7, 3}}, 0));
  corpus.per_user[1].push_back(urs_spec({{6, 1}, {9, 4}}, 1));
  auto ch = build_corpus_hypergraph(corpus);
  auto up = augment_pair(corpus.per_user[0][0], &ch, ch.edge_of[0][0], 0.67,
                         0.67, 9);
  CHECK(up.a.op == AugmentPlan::Op::kReorder);
  CHECK(up.b.op == AugmentPlan::Op::kSubstitute);
  auto up2 = augment_pair(corpus.per_user[0][0], &ch, ch.edge_of[0][0], 0.67,
                          0.67, 9);
  CHECK(up.b.path == up2.b.path);
}
