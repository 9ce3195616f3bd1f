#pragma once

#include "htgfd/graph.hpp"
#include "htgfd/params.hpp"
#include "htgfd/tape.hpp"

#include <algorithm>
#include <array>
#include <string>
#include <unordered_map>
#include <vector>

namespace htgfd {

// Two stacked relation-wise GNN layers over one snapshot plus a linear+sigmoid
// score head. Message passing targets user nodes only; group/device
// representations are recomputed at every layer as the mean of their
// neighboring users' current-layer embeddings.
struct HgConfig {
  int f = 64;
  int d_in = 7;
  int layers = 2;
  int relations = 7;
};

// Parameter layout under `prefix`:
//   w_h: f x d_in
//   l{k}.r{r}.{w_m: f x 3f, b_m: 1 x f, w_s: f x f, b_s: 1 x f,
//              w_q: f x 2f, b_q: 1 x f, w_w: f x f, b_w: 1 x f}
//   l{k}.attn_a: f x 1
//   score.w: 1 x f, score.b: 1 x 1
template <class S>
void add_hg_params(ParamStore<S>& store, const std::string& prefix,
                   const HgConfig& cfg, Rng& rng) {
  const Index f = cfg.f;
  store.add_uniform(prefix + "w_h", f, cfg.d_in, cfg.d_in, rng);
  for (int k = 0; k < cfg.layers; ++k) {
    const std::string lp = prefix + "l" + std::to_string(k) + ".";
    for (int r = 0; r < cfg.relations; ++r) {
      const std::string rp = lp + "r" + std::to_string(r) + ".";
      store.add_uniform(rp + "w_m", f, 3 * f, 3 * f, rng);
      store.add_uniform(rp + "b_m", 1, f, 3 * f, rng);
      store.add_uniform(rp + "w_s", f, f, f, rng);
      store.add_uniform(rp + "b_s", 1, f, f, rng);
      store.add_uniform(rp + "w_q", f, 2 * f, 2 * f, rng);
      store.add_uniform(rp + "b_q", 1, f, 2 * f, rng);
      store.add_uniform(rp + "w_w", f, f, f, rng);
      store.add_uniform(rp + "b_w", 1, f, f, rng);
    }
    store.add_uniform(lp + "attn_a", f, 1, f, rng);
  }
  store.add_uniform(prefix + "score.w", 1, f, f, rng);
  store.add_zeros(prefix + "score.b", 1, 1);
}

// mean|max|sum pooling over neighbor rows followed by the relation's affine
// map; rows grouped by `seg` into n_seg targets (callers pass only targets
// with at least one neighbor)
template <class S>
Var hg_relation_message(Tape<S>& tape, Var neighbor_rows,
                        std::vector<int32_t> seg, Index n_seg, Var w_m,
                        Var b_m) {
  Var mean = tape.segment_mean(neighbor_rows, seg, n_seg);
  Var mx = tape.segment_max(neighbor_rows, seg, n_seg);
  Var sum = tape.segment_sum(neighbor_rows, std::move(seg), n_seg);
  Var pooled = tape.concat_cols({mean, mx, sum});
  return tape.linear(pooled, w_m, b_m);
}

// self-connection and update with L2 normalization (zero-norm rows stay zero)
template <class S>
Var hg_relation_update(Tape<S>& tape, Var message, Var h0, Var w_s, Var b_s,
                       Var w_q, Var b_q) {
  Var s = tape.linear(h0, w_s, b_s);
  Var e = tape.relu(tape.concat_cols({message, s}));
  Var q = tape.relu(tape.linear(e, w_q, b_q));
  return tape.l2_normalize_rows(q, S(1e-12));
}

// Relation-level attention fuse. attention_rows selects the rows (the
// deduplicated snapshot-active target users) that contribute to the per
// relation means; when empty the distribution falls back to uniform.
// Returns {fused rows, beta as 1 x R}.
template <class S>
std::pair<Var, Var> hg_fuse(Tape<S>& tape,
                            const std::vector<Var>& relation_reps,
                            const std::vector<int32_t>& attention_rows,
                            Var attn_a,
                            const std::vector<std::pair<Var, Var>>& w_w_b_w) {
  const int R = static_cast<int>(relation_reps.size());
  require(R >= 1, "hg_fuse: no relations");
  require(tape.value(relation_reps[0]).rows() >= 1, "hg_fuse: empty batch");
  Var beta;
  if (!attention_rows.empty()) {
    std::vector<Var> scores;
    scores.reserve(static_cast<size_t>(R));
    for (int r = 0; r < R; ++r) {
      Var rows = tape.gather_rows(relation_reps[static_cast<size_t>(r)],
                                  attention_rows);
      Var t = tape.tanh_(tape.linear(rows, w_w_b_w[static_cast<size_t>(r)].first,
                                     w_w_b_w[static_cast<size_t>(r)].second));
      scores.push_back(tape.mean_all(tape.matmul(t, attn_a)));
    }
    beta = tape.softmax_rows(tape.concat_cols(scores));
  } else {
    beta = tape.constant(
        Mat<S>::Constant(1, R, S(1) / static_cast<S>(R)));
  }
  Var fused;
  for (int r = 0; r < R; ++r) {
    Var term = tape.scale_by(relation_reps[static_cast<size_t>(r)],
                             tape.slice_cols(beta, r, 1));
    fused = r == 0 ? term : tape.add(fused, term);
  }
  return {fused, beta};
}

// Group/device embeddings from their snapshot user neighborhoods: the mean of
// user_rows (indexed by dense user id) over each node's neighboring users,
// zero when a node has no user neighbor in the snapshot.
template <class S>
Var hg_neighbor_mean(Tape<S>& tape, Var user_rows, const GraphStream& g, int t,
                     const std::vector<int32_t>& gd_gids) {
  const Index f = tape.value(user_rows).cols();
  if (gd_gids.empty()) return tape.constant(Mat<S>::Zero(0, f));
  std::vector<int32_t> member_rows, seg;
  for (size_t i = 0; i < gd_gids.size(); ++i) {
    for (int32_t m : g.user_neighbors(t, gd_gids[i])) {
      member_rows.push_back(m - g.user_gid(0));
      seg.push_back(static_cast<int32_t>(i));
    }
  }
  if (member_rows.empty())
    return tape.constant(Mat<S>::Zero(static_cast<Index>(gd_gids.size()), f));
  Var gathered = tape.gather_rows(user_rows, std::move(member_rows));
  return tape.segment_mean(gathered, std::move(seg),
                           static_cast<Index>(gd_gids.size()));
}

template <class S>
struct HgEncodeResult {
  Var fused;                // n_targets x f final-layer user embeddings
  Var h0;                   // n_targets x f initial projections
  std::vector<Var> betas;   // one 1 x R distribution per layer
};

namespace detail {

struct HgUniverse {
  std::vector<int32_t> users_l1;  // gids needing layer-1 reps (sorted)
  std::vector<int32_t> gd_l0;     // group/device gids needing layer-0 reps
  std::vector<int32_t> gd_l1;     // group/device gids needing layer-1 reps
};

inline HgUniverse hg_universe(const GraphStream& g, int t,
                              const std::vector<int32_t>& target_gids) {
  const int R = g.n_relations();
  std::unordered_map<int32_t, char> seen_u1, seen_gd1, seen_gd0;
  std::vector<int32_t> u1;

  auto add_u1 = [&](int32_t gid) {
    if (seen_u1.emplace(gid, 0).second) u1.push_back(gid);
  };
  for (int32_t gid : target_gids) add_u1(gid);
  for (int32_t gid : target_gids) {
    for (int r = 0; r < R; ++r) {
      for (int32_t nb : g.und_gids(t, r, gid)) {
        if (g.is_user(nb)) {
          add_u1(nb);
        } else if (seen_gd1.emplace(nb, 0).second) {
          for (int32_t m : g.user_neighbors(t, nb)) add_u1(m);
        }
      }
    }
  }
  HgUniverse uni;
  uni.users_l1 = std::move(u1);
  std::sort(uni.users_l1.begin(), uni.users_l1.end());
  for (auto& [gid, _] : seen_gd1) uni.gd_l1.push_back(gid);
  std::sort(uni.gd_l1.begin(), uni.gd_l1.end());

  for (int32_t gid : uni.users_l1)
    for (int r = 0; r < R; ++r)
      for (int32_t nb : g.und_gids(t, r, gid))
        if (!g.is_user(nb) && seen_gd0.emplace(nb, 0).second)
          uni.gd_l0.push_back(nb);
  std::sort(uni.gd_l0.begin(), uni.gd_l0.end());
  return uni;
}

}  // namespace detail

// Encode `target_users` (dense user ids, no duplicates) in snapshot t
// (t == 0 is the union graph). `features` is indexed by dense user id and is
// either the raw attribute table or an override (the detect-phase
// concatenation). Inactive targets are encoded from self-connections alone
// and do not contribute to the attention means.
template <class S>
HgEncodeResult<S> hg_encode(Tape<S>& tape, const Bound<S>& params,
                            const std::string& prefix, const HgConfig& cfg,
                            const GraphStream& g, int t,
                            const std::vector<int32_t>& target_users,
                            const Mat<S>& features) {
  require(!target_users.empty(), "hg_encode: empty target set");
  require(cfg.relations == g.n_relations(),
          "hg_encode: relation count mismatch");
  require(features.rows() == g.n_users() && features.cols() == cfg.d_in,
          "hg_encode: feature table shape mismatch");
  const Index f = cfg.f;
  const int R = cfg.relations;

  std::vector<int32_t> target_gids;
  target_gids.reserve(target_users.size());
  {
    std::unordered_map<int32_t, char> dup;
    for (int32_t u : target_users) {
      require(u >= 0 && u < g.n_users(), "hg_encode: user id out of range");
      require(dup.emplace(u, 0).second, "hg_encode: duplicate target user");
      target_gids.push_back(g.user_gid(u));
    }
  }

  auto uni = detail::hg_universe(g, t, target_gids);
  std::unordered_map<int32_t, int32_t> row_l1;
  for (size_t i = 0; i < uni.users_l1.size(); ++i)
    row_l1.emplace(uni.users_l1[i], static_cast<int32_t>(i));

  // layer 0: project every user once; group/device means per universe
  Var h0_all = tape.linear(tape.constant(features), params[prefix + "w_h"],
                           tape.constant(Mat<S>::Zero(1, f)));
  auto h0_row = [&](int32_t gid) {
    return static_cast<int32_t>(gid - g.user_gid(0));
  };

  std::unordered_map<int32_t, int32_t> gd0_row;
  for (size_t i = 0; i < uni.gd_l0.size(); ++i)
    gd0_row.emplace(uni.gd_l0[i], static_cast<int32_t>(i));
  Var gd0 = hg_neighbor_mean(tape, h0_all, g, t, uni.gd_l0);

  // active (edge-incident) targets drive the attention means at every layer
  std::vector<int32_t> att_rows_l1, att_rows_l2;
  for (size_t i = 0; i < target_gids.size(); ++i)
    if (g.active(t, target_gids[i])) {
      att_rows_l2.push_back(static_cast<int32_t>(i));
      att_rows_l1.push_back(row_l1.at(target_gids[i]));
    }

  auto layer_params = [&](int k, int r) {
    const std::string rp =
        prefix + "l" + std::to_string(k) + ".r" + std::to_string(r) + ".";
    return std::array<Var, 8>{params[rp + "w_m"], params[rp + "b_m"],
                              params[rp + "w_s"], params[rp + "b_s"],
                              params[rp + "w_q"], params[rp + "b_q"],
                              params[rp + "w_w"], params[rp + "b_w"]};
  };

  // one message-passing layer over `rows` (user gids); neighbor level-k reps
  // are resolved through lookup closures
  auto run_layer = [&](int k, const std::vector<int32_t>& rows,
                       const std::vector<int32_t>& att_rows,
                       auto&& nbr_ref) -> std::pair<Var, Var> {
    const Index n = static_cast<Index>(rows.size());
    Var h0_rows;
    {
      std::vector<int32_t> idx;
      idx.reserve(rows.size());
      for (int32_t gid : rows) idx.push_back(h0_row(gid));
      h0_rows = tape.gather_rows(h0_all, std::move(idx));
    }
    std::vector<Var> reps;
    std::vector<std::pair<Var, Var>> att_params;
    reps.reserve(static_cast<size_t>(R));
    for (int r = 0; r < R; ++r) {
      auto pr = layer_params(k, r);
      std::vector<RowRef> flat;
      std::vector<int32_t> seg, occupied;
      for (size_t i = 0; i < rows.size(); ++i) {
        auto nbrs = g.und_gids(t, r, rows[i]);
        if (nbrs.empty()) continue;
        const int32_t slot = static_cast<int32_t>(occupied.size());
        occupied.push_back(static_cast<int32_t>(i));
        for (int32_t nb : nbrs) {
          flat.push_back(nbr_ref(nb));
          seg.push_back(slot);
        }
      }
      Var message;
      if (!occupied.empty()) {
        Var nbr_rows = tape.rows_from(std::move(flat), f);
        Var msg = hg_relation_message(tape, nbr_rows, std::move(seg),
                                      static_cast<Index>(occupied.size()),
                                      pr[0], pr[1]);
        message = tape.scatter_rows(msg, std::move(occupied), n);
      } else {
        message = tape.constant(Mat<S>::Zero(n, f));
      }
      reps.push_back(hg_relation_update(tape, message, h0_rows, pr[2], pr[3],
                                        pr[4], pr[5]));
      att_params.emplace_back(pr[6], pr[7]);
    }
    return hg_fuse(tape, reps, att_rows,
                   params[prefix + "l" + std::to_string(k) + ".attn_a"],
                   att_params);
  };

  // layer 1 over the one-hop user universe
  auto ref_l0 = [&](int32_t nb) -> RowRef {
    if (g.is_user(nb)) return RowRef{h0_all.i, h0_row(nb)};
    return RowRef{gd0.i, gd0_row.at(nb)};
  };
  auto [h1, beta1] = run_layer(0, uni.users_l1, att_rows_l1, ref_l0);

  // group/device layer-1 reps: mean of member users' layer-1 embeddings
  std::unordered_map<int32_t, int32_t> gd1_row;
  Var gd1;
  if (!uni.gd_l1.empty()) {
    std::vector<int32_t> member_rows;
    std::vector<int32_t> seg;
    for (size_t i = 0; i < uni.gd_l1.size(); ++i) {
      gd1_row.emplace(uni.gd_l1[i], static_cast<int32_t>(i));
      for (int32_t m : g.user_neighbors(t, uni.gd_l1[i])) {
        member_rows.push_back(row_l1.at(m));
        seg.push_back(static_cast<int32_t>(i));
      }
    }
    Var gathered = tape.gather_rows(h1, std::move(member_rows));
    gd1 = tape.segment_mean(gathered, std::move(seg),
                            static_cast<Index>(uni.gd_l1.size()));
  }

  // layer 2 over the targets
  auto ref_l1 = [&](int32_t nb) -> RowRef {
    if (g.is_user(nb)) return RowRef{h1.i, row_l1.at(nb)};
    return RowRef{gd1.i, gd1_row.at(nb)};
  };
  require(cfg.layers == 2, "hg_encode: two-layer configuration expected");
  auto [h2, beta2] = run_layer(1, target_gids, att_rows_l2, ref_l1);

  HgEncodeResult<S> out;
  out.fused = h2;
  {
    std::vector<int32_t> idx;
    for (int32_t gid : target_gids) idx.push_back(h0_row(gid));
    out.h0 = tape.gather_rows(h0_all, std::move(idx));
  }
  out.betas = {beta1, beta2};
  return out;
}

template <class S>
Var hg_score_logits(Tape<S>& tape, const Bound<S>& params,
                    const std::string& prefix, Var embeddings) {
  return tape.linear(embeddings, params[prefix + "score.w"],
                     params[prefix + "score.b"]);
}

}  // namespace htgfd
