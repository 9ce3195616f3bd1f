#pragma once

#include "htgfd/params.hpp"
#include "htgfd/tape.hpp"

#include <string>
#include <vector>

namespace htgfd {

// Transformer sequence encoder with learnable position encodings, two
// post-norm blocks of 8-head self-attention plus a 4f feed-forward sublayer,
// a two-layer projection head for the contrastive task, and a linear+sigmoid
// score head for the supervised task.
struct CsConfig {
  int f = 64;
  int max_len = 14;  // position-matrix rows: T for snapshot views, L_max for
                     // relation views
  int heads = 8;
  int blocks = 2;
};

// Parameter layout under `prefix`:
//   pos: max_len x f
//   b{i}.attn.{w_q,w_k,w_v,w_o}: f x f with 1 x f biases
//   b{i}.ln1.{g,b}, b{i}.ln2.{g,b}: 1 x f
//   b{i}.ffn.{w1: 4f x f, b1: 1 x 4f, w2: f x 4f, b2: 1 x f}
//   proj.{w1: f x f, b1: 1 x f, w2: f x f, b2: 1 x f}
//   score.{w: 1 x f, b: 1 x 1}
template <class S>
void add_cs_params(ParamStore<S>& store, const std::string& prefix,
                   const CsConfig& cfg, Rng& rng) {
  const Index f = cfg.f;
  require(cfg.heads > 0 && cfg.f % cfg.heads == 0,
          "cs: head count must divide the model width");
  store.add_uniform(prefix + "pos", cfg.max_len, f, f, rng);
  for (int b = 0; b < cfg.blocks; ++b) {
    const std::string bp = prefix + "b" + std::to_string(b) + ".";
    for (const char* w : {"attn.w_q", "attn.w_k", "attn.w_v", "attn.w_o"})
      store.add_uniform(bp + w, f, f, f, rng);
    for (const char* b2 : {"attn.b_q", "attn.b_k", "attn.b_v", "attn.b_o"})
      store.add_zeros(bp + b2, 1, f);
    store.add(bp + "ln1.g", Mat<S>::Ones(1, f));
    store.add_zeros(bp + "ln1.b", 1, f);
    store.add_uniform(bp + "ffn.w1", 4 * f, f, f, rng);
    store.add_zeros(bp + "ffn.b1", 1, 4 * f);
    store.add_uniform(bp + "ffn.w2", f, 4 * f, 4 * f, rng);
    store.add_zeros(bp + "ffn.b2", 1, f);
    store.add(bp + "ln2.g", Mat<S>::Ones(1, f));
    store.add_zeros(bp + "ln2.b", 1, f);
  }
  store.add_uniform(prefix + "proj.w1", f, f, f, rng);
  store.add_zeros(prefix + "proj.b1", 1, f);
  store.add_uniform(prefix + "proj.w2", f, f, f, rng);
  store.add_zeros(prefix + "proj.b2", 1, f);
  store.add_uniform(prefix + "score.w", 1, f, f, rng);
  store.add_zeros(prefix + "score.b", 1, 1);
}

// Encode one padded sequence (items: L x f) to its last real hidden state.
// Position encodings are added on real positions only; padded positions are
// excluded from attention through the additive mask.
template <class S>
Var cs_encode_sequence(Tape<S>& tape, const Bound<S>& params,
                       const std::string& prefix, const CsConfig& cfg,
                       Var items, const std::vector<uint8_t>& mask) {
  const Index L = tape.value(items).rows();
  require(static_cast<Index>(mask.size()) == L,
          "cs_encode: mask length mismatch");
  require(L <= cfg.max_len, "cs_encode: sequence longer than the position matrix");
  int last_real = -1;
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) last_real = static_cast<int>(i);
  require(last_real >= 0, "cs_encode: all-padding sequence");

  Mat<S> mask_cols(L, tape.value(items).cols());
  for (Index i = 0; i < L; ++i)
    mask_cols.row(i).setConstant(mask[static_cast<size_t>(i)] ? S(1) : S(0));

  Var pos = tape.slice_rows(params[prefix + "pos"], 0, L);
  Var x = tape.add(items, tape.cmul(pos, std::move(mask_cols)));
  for (int b = 0; b < cfg.blocks; ++b) {
    const std::string bp = prefix + "b" + std::to_string(b) + ".";
    Var q = tape.linear(x, params[bp + "attn.w_q"], params[bp + "attn.b_q"]);
    Var k = tape.linear(x, params[bp + "attn.w_k"], params[bp + "attn.b_k"]);
    Var v = tape.linear(x, params[bp + "attn.w_v"], params[bp + "attn.b_v"]);
    Var att = tape.attention(q, k, v, mask, cfg.heads);
    Var o = tape.linear(att, params[bp + "attn.w_o"], params[bp + "attn.b_o"]);
    x = tape.layer_norm_rows(tape.add(x, o), params[bp + "ln1.g"],
                             params[bp + "ln1.b"]);
    Var h = tape.relu(
        tape.linear(x, params[bp + "ffn.w1"], params[bp + "ffn.b1"]));
    Var ff = tape.linear(h, params[bp + "ffn.w2"], params[bp + "ffn.b2"]);
    x = tape.layer_norm_rows(tape.add(x, ff), params[bp + "ln2.g"],
                             params[bp + "ln2.b"]);
  }
  return tape.slice_rows(x, last_real, 1);
}

// two-layer projection head g(.)
template <class S>
Var cs_project(Tape<S>& tape, const Bound<S>& params,
               const std::string& prefix, Var reps) {
  Var h = tape.relu(
      tape.linear(reps, params[prefix + "proj.w1"], params[prefix + "proj.b1"]));
  return tape.linear(h, params[prefix + "proj.w2"], params[prefix + "proj.b2"]);
}

template <class S>
Var cs_score_logits(Tape<S>& tape, const Bound<S>& params,
                    const std::string& prefix, Var reps) {
  return tape.linear(reps, params[prefix + "score.w"],
                     params[prefix + "score.b"]);
}

// A mini-batch of sequences with their two augmented views, already
// assembled into item matrices. Views share the anchor's mask.
template <class S>
struct CsBatch {
  std::vector<Var> orig, view_a, view_b;
  std::vector<std::vector<uint8_t>> mask;
  std::vector<int8_t> labels;  // -1 unlabeled
};

// In-batch normalized-temperature contrastive loss over the 2N projected
// views (anchor u pairs with its mate; the other 2(N-1) views are negatives).
template <class S>
Var cs_contrastive_loss(Tape<S>& tape, const Bound<S>& params,
                        const std::string& prefix, const CsConfig& cfg,
                        const CsBatch<S>& batch, S tau) {
  require(tau > S(0), "contrastive loss: temperature must be positive");
  const size_t N = batch.view_a.size();
  require(N >= 1 && batch.view_b.size() == N && batch.mask.size() == N,
          "contrastive loss: malformed batch");
  std::vector<Var> reps;
  reps.reserve(2 * N);
  for (size_t i = 0; i < N; ++i)
    reps.push_back(cs_encode_sequence(tape, params, prefix, cfg,
                                      batch.view_a[i], batch.mask[i]));
  for (size_t i = 0; i < N; ++i)
    reps.push_back(cs_encode_sequence(tape, params, prefix, cfg,
                                      batch.view_b[i], batch.mask[i]));
  Var z = cs_project(tape, params, prefix, tape.vstack(reps));
  Var zn = tape.l2_normalize_rows(z);
  Var cosines = tape.matmul(zn, zn, false, true);
  return tape.ntxent(cosines, tau);
}

template <class S>
struct CsLossParts {
  Var total;
  Var contrastive;          // always built
  Var bce;                  // invalid when no labeled members
  int labeled = 0;
};

// Multi-task objective: mean BCE of the score head over the labeled members'
// un-augmented sequences, plus the contrastive term (dropped when
// use_contrastive is off; batches without labels contribute the contrastive
// term alone).
template <class S>
CsLossParts<S> cs_multitask_loss(Tape<S>& tape, const Bound<S>& params,
                                 const std::string& prefix,
                                 const CsConfig& cfg, const CsBatch<S>& batch,
                                 S tau, bool use_contrastive = true,
                                 S lambda = S(1)) {
  CsLossParts<S> parts;
  parts.contrastive =
      cs_contrastive_loss(tape, params, prefix, cfg, batch, tau);

  std::vector<Var> labeled_reps;
  std::vector<S> targets;
  for (size_t i = 0; i < batch.orig.size(); ++i) {
    if (batch.labels[i] < 0) continue;
    labeled_reps.push_back(cs_encode_sequence(tape, params, prefix, cfg,
                                              batch.orig[i], batch.mask[i]));
    targets.push_back(static_cast<S>(batch.labels[i]));
  }
  parts.labeled = static_cast<int>(labeled_reps.size());
  if (!labeled_reps.empty()) {
    Var logits =
        cs_score_logits(tape, params, prefix, tape.vstack(labeled_reps));
    parts.bce = tape.bce_with_logits(logits, std::move(targets));
    parts.total = use_contrastive
                      ? tape.add(parts.bce,
                                 tape.scale(parts.contrastive, lambda))
                      : parts.bce;
  } else {
    require(use_contrastive,
            "multitask loss: no labeled members and no contrastive term");
    parts.total = tape.scale(parts.contrastive, lambda);
  }
  return parts;
}

}  // namespace htgfd
