#include "htgfd/pipeline.hpp"

#include "htgfd/adam.hpp"
#include "htgfd/augment.hpp"
#include "htgfd/checkpoint.hpp"
#include "htgfd/cs_encoder.hpp"
#include "htgfd/hg_encoder.hpp"
#include "htgfd/manifest.hpp"
#include "htgfd/metrics.hpp"
#include "htgfd/rng.hpp"
#include "htgfd/sequences.hpp"
#include "htgfd/views.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

namespace htgfd {

namespace fs = std::filesystem;

nlohmann::json TrainConfig::to_json() const {
  return {{"f", f},
          {"batch", batch},
          {"lr", lr},
          {"gamma", gamma},
          {"alpha", alpha},
          {"tau", tau},
          {"l_max", l_max},
          {"max_urs", max_urs},
          {"split_train", split_train},
          {"split_val", split_val},
          {"seed", seed},
          {"max_epochs", max_epochs},
          {"patience", patience},
          {"steps_per_epoch", steps_per_epoch},
          {"hops", hops},
          {"fanout", fanout},
          {"precision", precision},
          {"contrastive", contrastive},
          {"lambda", lambda},
          {"use_tss", use_tss},
          {"use_urs", use_urs},
          {"raw_inputs", raw_inputs}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.f = j.value("f", c.f);
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.gamma = j.value("gamma", c.gamma);
  c.alpha = j.value("alpha", c.alpha);
  c.tau = j.value("tau", c.tau);
  c.l_max = j.value("l_max", c.l_max);
  c.max_urs = j.value("max_urs", c.max_urs);
  c.split_train = j.value("split_train", c.split_train);
  c.split_val = j.value("split_val", c.split_val);
  c.seed = j.value("seed", c.seed);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
  c.hops = j.value("hops", c.hops);
  c.fanout = j.value("fanout", c.fanout);
  c.precision = j.value("precision", c.precision);
  c.contrastive = j.value("contrastive", c.contrastive);
  c.lambda = j.value("lambda", c.lambda);
  c.use_tss = j.value("use_tss", c.use_tss);
  c.use_urs = j.value("use_urs", c.use_urs);
  c.raw_inputs = j.value("raw_inputs", c.raw_inputs);
  require(c.split_train > 0 && c.split_val >= 0 &&
              c.split_train + c.split_val < 1.0 + 1e-12,
          "config: split ratios must form fractions of 1");
  require(c.f > 0 && c.batch > 0 && c.l_max > 0 && c.max_urs > 0,
          "config: dimensions must be positive");
  require(c.precision == "f32" || c.precision == "f64",
          "config: precision must be f32 or f64");
  return c;
}

Split make_split(const GraphStream& g, const TrainConfig& cfg) {
  std::vector<int32_t> labeled;
  Split split;
  for (int32_t u = 0; u < g.n_users(); ++u) {
    if (g.labels()[static_cast<size_t>(u)] >= 0)
      labeled.push_back(u);
    else
      split.unlabeled.push_back(u);
  }
  require(!labeled.empty(), "split: no labeled users");
  Rng rng(Rng::mix({cfg.seed, 0x517Dull}));
  rng.shuffle(labeled);
  const size_t n_train =
      static_cast<size_t>(cfg.split_train * static_cast<double>(labeled.size()));
  const size_t n_val =
      static_cast<size_t>(cfg.split_val * static_cast<double>(labeled.size()));
  split.train.assign(labeled.begin(), labeled.begin() + n_train);
  split.val.assign(labeled.begin() + n_train,
                   labeled.begin() + n_train + n_val);
  split.test.assign(labeled.begin() + n_train + n_val, labeled.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

GraphStream make_training_view(const GraphStream& g, const TrainConfig& cfg) {
  std::vector<int32_t> seeds(static_cast<size_t>(g.n_users()));
  for (int32_t u = 0; u < g.n_users(); ++u) seeds[static_cast<size_t>(u)] = u;
  return sample_subgraph(g, seeds, cfg.hops, cfg.fanout,
                         Rng::mix({cfg.seed, 0x5A3Bull}));
}

const char* component_name(Component c) {
  switch (c) {
    case Component::kTss: return "tss";
    case Component::kUrs: return "urs";
    default: return "detect";
  }
}

namespace {

// ---------------------------------------------------------------------------
// shared structures

ViewParams view_params(const TrainConfig& cfg) {
  return ViewParams{.gamma = cfg.gamma,
                    .alpha = cfg.alpha,
                    .max_urs = cfg.max_urs,
                    .l_max = cfg.l_max,
                    .seed = cfg.seed};
}

std::vector<int8_t> training_labels(const GraphStream& g, const Split& split) {
  std::vector<int8_t> lab(static_cast<size_t>(g.n_users()), -1);
  for (int32_t u : split.train)
    lab[static_cast<size_t>(u)] = g.labels()[static_cast<size_t>(u)];
  return lab;
}

std::vector<int32_t> training_pool(const Split& split, bool with_unlabeled) {
  std::vector<int32_t> pool = split.train;
  if (with_unlabeled)
    pool.insert(pool.end(), split.unlabeled.begin(), split.unlabeled.end());
  std::sort(pool.begin(), pool.end());
  return pool;
}

struct EpochPlan {
  std::vector<std::vector<int32_t>> batches;
};

EpochPlan epoch_batches(const std::vector<int32_t>& pool, int batch,
                        int steps_cap, uint64_t seed) {
  std::vector<int32_t> order = pool;
  Rng rng(seed);
  rng.shuffle(order);
  EpochPlan plan;
  for (size_t at = 0; at < order.size();
       at += static_cast<size_t>(batch)) {
    if (steps_cap > 0 &&
        plan.batches.size() >= static_cast<size_t>(steps_cap))
      break;
    size_t end = std::min(order.size(), at + static_cast<size_t>(batch));
    plan.batches.emplace_back(order.begin() + at, order.begin() + end);
  }
  return plan;
}

// ---------------------------------------------------------------------------
// snapshot-view (TSS) forward machinery

template <class S>
struct SnapshotEncodes {
  std::vector<Var> fused;  // index t-1; invalid when nobody is present
  std::vector<std::unordered_map<int32_t, int32_t>> row;
};

template <class S>
SnapshotEncodes<S> encode_snapshots(Tape<S>& tape, const Bound<S>& params,
                                    const std::string& hg_prefix,
                                    const HgConfig& hg_cfg,
                                    const GraphStream& g, const Mat<S>& feats,
                                    const std::vector<int32_t>& users,
                                    const TssWorld& world) {
  SnapshotEncodes<S> enc;
  enc.fused.resize(static_cast<size_t>(g.T()));
  enc.row.resize(static_cast<size_t>(g.T()));
  for (int t = 1; t <= g.T(); ++t) {
    std::vector<int32_t> present;
    for (int32_t u : users) {
      const auto& spec = world.specs[static_cast<size_t>(u)];
      if (spec && spec->present[static_cast<size_t>(t - 1)])
        present.push_back(u);
    }
    if (present.empty()) continue;
    auto res = hg_encode(tape, params, hg_prefix, hg_cfg, g, t, present, feats);
    enc.fused[static_cast<size_t>(t - 1)] = res.fused;
    for (size_t i = 0; i < present.size(); ++i)
      enc.row[static_cast<size_t>(t - 1)].emplace(
          present[i], static_cast<int32_t>(i));
  }
  return enc;
}

template <class S>
Var tss_items(Tape<S>& tape, const SnapshotEncodes<S>& enc,
              const HistorySpec& spec, const std::vector<int32_t>* perm,
              Index f) {
  const int T = spec.length();
  std::vector<RowRef> refs(static_cast<size_t>(T));
  for (int p = 0; p < T; ++p) {
    const int q = perm ? (*perm)[static_cast<size_t>(p)] : p;
    if (!spec.present[static_cast<size_t>(q)]) continue;  // zero row
    const auto& row = enc.row[static_cast<size_t>(q)];
    auto it = row.find(spec.owner);
    require(it != row.end(), "tss_items: snapshot encode missing the owner");
    refs[static_cast<size_t>(p)] =
        RowRef{enc.fused[static_cast<size_t>(q)].i, it->second};
  }
  return tape.rows_from(std::move(refs), f);
}

std::vector<uint8_t> spec_mask(const HistorySpec& spec) { return spec.mask; }

// ---------------------------------------------------------------------------
// relation-view (URS) forward machinery

template <class S>
struct UrsItemSources {
  Var h0_all;  // every user's projection, row = dense user id
  std::map<std::pair<int, int32_t>, std::pair<Var, int32_t>> gd;  // (t, gid)
};

template <class S>
UrsItemSources<S> urs_item_sources(
    Tape<S>& tape, const Bound<S>& params, const std::string& proj_name,
    const GraphStream& g, const Mat<S>& feats,
    const std::vector<const std::vector<SeqItem>*>& paths) {
  UrsItemSources<S> src;
  src.h0_all =
      tape.linear(tape.constant(feats), params[proj_name],
                  tape.constant(Mat<S>::Zero(1, tape.value(params[proj_name]).rows())));
  std::map<int, std::vector<int32_t>> gd_by_t;
  std::map<std::pair<int, int32_t>, char> seen;
  for (const auto* path : paths)
    for (const auto& item : *path)
      if (!g.is_user(item.gid) &&
          seen.emplace(std::make_pair(item.t, item.gid), 0).second)
        gd_by_t[item.t].push_back(item.gid);
  for (auto& [t, gids] : gd_by_t) {
    std::sort(gids.begin(), gids.end());
    Var node = hg_neighbor_mean(tape, src.h0_all, g, t, gids);
    for (size_t i = 0; i < gids.size(); ++i)
      src.gd.emplace(std::make_pair(t, gids[i]),
                     std::make_pair(node, static_cast<int32_t>(i)));
  }
  return src;
}

template <class S>
Var urs_items(Tape<S>& tape, const UrsItemSources<S>& src,
              const GraphStream& g, const std::vector<SeqItem>& path,
              Index f) {
  std::vector<RowRef> refs;
  refs.reserve(path.size());
  for (const auto& item : path) {
    if (g.is_user(item.gid)) {
      refs.push_back(RowRef{src.h0_all.i, item.gid - g.user_gid(0)});
    } else {
      const auto& [node, row] = src.gd.at({item.t, item.gid});
      refs.push_back(RowRef{node.i, row});
    }
  }
  return tape.rows_from(std::move(refs), f);
}

// ---------------------------------------------------------------------------
// frozen forward passes (scores and representations)

template <class S>
struct TssForward {
  std::vector<double> scores;
  Mat<S> reps;
};

template <class S>
TssForward<S> tss_forward(const GraphStream& g, const Mat<S>& feats,
                          const ParamStore<S>& store, const HgConfig& hg_cfg,
                          const CsConfig& cs_cfg, const TssWorld& world,
                          const std::vector<int32_t>& users, bool want_reps,
                          int chunk_size = 512) {
  TssForward<S> out;
  out.scores.assign(users.size(), 0.5);
  if (want_reps) out.reps = Mat<S>::Zero(static_cast<Index>(users.size()),
                                         cs_cfg.f);
  for (size_t at = 0; at < users.size();
       at += static_cast<size_t>(chunk_size)) {
    const size_t end =
        std::min(users.size(), at + static_cast<size_t>(chunk_size));
    std::vector<int32_t> chunk;
    for (size_t i = at; i < end; ++i) {
      if (world.specs[static_cast<size_t>(users[i])])
        chunk.push_back(users[i]);
    }
    Tape<S> tape;
    auto bound = Bound<S>::frozen(tape, store);
    if (!chunk.empty()) {
      auto enc = encode_snapshots(tape, bound, "hg.", hg_cfg, g, feats, chunk,
                                  world);
      std::vector<Var> reps;
      for (int32_t u : chunk) {
        const auto& spec = *world.specs[static_cast<size_t>(u)];
        Var items = tss_items(tape, enc, spec, nullptr, cs_cfg.f);
        reps.push_back(cs_encode_sequence(tape, bound, "cs.", cs_cfg, items,
                                          spec.mask));
      }
      Var stacked = tape.vstack(reps);
      Var probs = tape.sigmoid(cs_score_logits(tape, bound, "cs.", stacked));
      std::unordered_map<int32_t, size_t> pos;
      for (size_t i = 0; i < chunk.size(); ++i) pos.emplace(chunk[i], i);
      for (size_t i = at; i < end; ++i) {
        auto it = pos.find(users[i]);
        if (it == pos.end()) continue;  // user without a sequence: 0.5 / zero
        out.scores[i] =
            static_cast<double>(tape.value(probs)(static_cast<Index>(it->second), 0));
        if (want_reps)
          out.reps.row(static_cast<Index>(i)) =
              tape.value(stacked).row(static_cast<Index>(it->second));
      }
    }
  }
  return out;
}

template <class S>
struct UrsForward {
  std::vector<double> scores;
  Mat<S> reps;  // mean over the user's sequence representations
};

template <class S>
UrsForward<S> urs_forward(const GraphStream& g, const Mat<S>& feats,
                          const ParamStore<S>& store, const CsConfig& cs_cfg,
                          const UrsWorld& world,
                          const std::vector<int32_t>& users, bool want_reps,
                          int chunk_size = 256) {
  UrsForward<S> out;
  out.scores.assign(users.size(), 0.5);
  out.reps = Mat<S>::Zero(static_cast<Index>(users.size()), cs_cfg.f);
  for (size_t at = 0; at < users.size();
       at += static_cast<size_t>(chunk_size)) {
    const size_t end =
        std::min(users.size(), at + static_cast<size_t>(chunk_size));
    Tape<S> tape;
    auto bound = Bound<S>::frozen(tape, store);
    std::vector<const std::vector<SeqItem>*> paths;
    for (size_t i = at; i < end; ++i)
      for (const auto& spec :
           world.corpus.per_user[static_cast<size_t>(users[i])])
        paths.push_back(&spec.path);
    auto src = urs_item_sources(tape, bound, "w_h", g, feats, paths);
    for (size_t i = at; i < end; ++i) {
      const auto& seqs = world.corpus.per_user[static_cast<size_t>(users[i])];
      std::vector<Var> reps;
      for (const auto& spec : seqs) {
        Var items = urs_items(tape, src, g, spec.path, cs_cfg.f);
        reps.push_back(cs_encode_sequence(tape, bound, "cs.", cs_cfg, items,
                                          spec.mask));
      }
      Var mean = tape.mean_rows(tape.vstack(reps));
      Var prob = tape.sigmoid(cs_score_logits(tape, bound, "cs.", mean));
      out.scores[i] = static_cast<double>(tape.value(prob)(0, 0));
      if (want_reps)
        out.reps.row(static_cast<Index>(i)) = tape.value(mean).row(0);
    }
  }
  return out;
}

template <class S>
struct DetForward {
  std::vector<double> scores;
  Mat<S> reps;
  Mat<S> h0;
};

template <class S>
DetForward<S> det_forward(const GraphStream& g, const Mat<S>& inputs,
                          const ParamStore<S>& store, const HgConfig& hg_cfg,
                          const std::vector<int32_t>& users, bool want_reps,
                          int chunk_size = 1024) {
  DetForward<S> out;
  out.scores.assign(users.size(), 0.5);
  if (want_reps) {
    out.reps = Mat<S>::Zero(static_cast<Index>(users.size()), hg_cfg.f);
    out.h0 = Mat<S>::Zero(static_cast<Index>(users.size()), hg_cfg.f);
  }
  for (size_t at = 0; at < users.size();
       at += static_cast<size_t>(chunk_size)) {
    const size_t end =
        std::min(users.size(), at + static_cast<size_t>(chunk_size));
    std::vector<int32_t> chunk(users.begin() + at, users.begin() + end);
    Tape<S> tape;
    auto bound = Bound<S>::frozen(tape, store);
    auto res = hg_encode(tape, bound, "hg.", hg_cfg, g, 0, chunk, inputs);
    Var probs =
        tape.sigmoid(hg_score_logits(tape, bound, "hg.", res.fused));
    for (size_t i = at; i < end; ++i) {
      out.scores[i] =
          static_cast<double>(tape.value(probs)(static_cast<Index>(i - at), 0));
      if (want_reps) {
        out.reps.row(static_cast<Index>(i)) =
            tape.value(res.fused).row(static_cast<Index>(i - at));
        out.h0.row(static_cast<Index>(i)) =
            tape.value(res.h0).row(static_cast<Index>(i - at));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// training loops

struct EpochRecord {
  double mean_loss = 0.0;
  double val_auc = 0.0;
};

double auc_of(const std::vector<double>& scores,
              const std::vector<int32_t>& users, const GraphStream& g) {
  std::vector<int8_t> labels;
  std::vector<double> s;
  for (size_t i = 0; i < users.size(); ++i) {
    int8_t l = g.labels()[static_cast<size_t>(users[i])];
    if (l < 0) continue;
    labels.push_back(l);
    s.push_back(scores[i]);
  }
  try {
    return auc_score(s, labels);
  } catch (const std::exception&) {
    return 0.5;  // degenerate validation set (single class)
  }
}

template <class S>
struct TrainOutcome {
  ParamStore<S> best;
  nlohmann::json history;
  double best_auc = 0.0;
  int epochs = 0;
};

template <class S>
TrainOutcome<S> train_sequence_component(bool is_tss, const GraphStream& g,
                                         const TrainConfig& cfg,
                                         const Split& split) {
  const Mat<S> feats = g.user_features().cast<S>().eval();
  const int d_raw = g.feature_dim();
  HgConfig hg_cfg{.f = cfg.f, .d_in = d_raw, .layers = 2,
                  .relations = g.n_relations()};
  CsConfig cs_cfg{.f = cfg.f, .max_len = is_tss ? g.T() : cfg.l_max,
                  .heads = 8, .blocks = 2};

  ParamStore<S> store;
  Rng init_rng(Rng::mix({cfg.seed, 0x171ull, is_tss ? 1ull : 2ull}));
  if (is_tss)
    add_hg_params(store, "hg.", hg_cfg, init_rng);
  else
    store.add_uniform("w_h", cfg.f, d_raw, d_raw, init_rng);
  add_cs_params(store, "cs.", cs_cfg, init_rng);

  TssWorld tss_world;
  UrsWorld urs_world;
  if (is_tss)
    tss_world = cached_tss_world(g, view_params(cfg), cache_dir_from_env());
  else
    urs_world = cached_urs_world(g, view_params(cfg), cache_dir_from_env());

  const auto pool = training_pool(split, cfg.contrastive);
  const auto train_labels = training_labels(g, split);
  Adam<S> opt(store, static_cast<S>(cfg.lr));

  TrainOutcome<S> out;
  out.best = store;
  out.history = nlohmann::json::array();
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    auto plan = epoch_batches(pool, cfg.batch, cfg.steps_per_epoch,
                              Rng::mix({cfg.seed, 0xE90Cull,
                                        static_cast<uint64_t>(epoch),
                                        is_tss ? 1ull : 2ull}));
    double loss_sum = 0.0;
    int64_t steps = 0;
    for (const auto& batch_users : plan.batches) {
      Tape<S> tape;
      auto bound = Bound<S>::leaves(tape, store);
      CsBatch<S> batch;

      if (is_tss) {
        std::vector<int32_t> members;
        for (int32_t u : batch_users)
          if (tss_world.specs[static_cast<size_t>(u)]) members.push_back(u);
        if (members.empty()) continue;
        auto enc = encode_snapshots(tape, bound, "hg.", hg_cfg, g, feats,
                                    members, tss_world);
        for (int32_t u : members) {
          const auto& spec = *tss_world.specs[static_cast<size_t>(u)];
          const auto& plan2 = tss_world.plans[static_cast<size_t>(u)];
          batch.orig.push_back(tss_items(tape, enc, spec, nullptr, cfg.f));
          batch.view_a.push_back(
              tss_items(tape, enc, spec, &plan2.a.perm, cfg.f));
          batch.view_b.push_back(
              tss_items(tape, enc, spec, &plan2.b.perm, cfg.f));
          batch.mask.push_back(spec.mask);
          batch.labels.push_back(train_labels[static_cast<size_t>(u)]);
        }
      } else {
        // one sequence per user per epoch, rotating deterministically
        std::vector<const HistorySpec*> chosen;
        std::vector<const AugmentedPairPlan*> chosen_plans;
        std::vector<const std::vector<SeqItem>*> paths;
        for (int32_t u : batch_users) {
          const auto& seqs =
              urs_world.corpus.per_user[static_cast<size_t>(u)];
          const size_t k =
              (static_cast<size_t>(epoch) +
               static_cast<size_t>(Rng::mix({cfg.seed, 0x30C4ull,
                                             static_cast<uint64_t>(u)}) %
                                   seqs.size())) %
              seqs.size();
          chosen.push_back(&seqs[k]);
          chosen_plans.push_back(
              &urs_world.plans[static_cast<size_t>(u)][k]);
          paths.push_back(&seqs[k].path);
          paths.push_back(&urs_world.plans[static_cast<size_t>(u)][k].a.path);
          paths.push_back(&urs_world.plans[static_cast<size_t>(u)][k].b.path);
        }
        auto src = urs_item_sources(tape, bound, "w_h", g, feats, paths);
        for (size_t i = 0; i < chosen.size(); ++i) {
          const auto& spec = *chosen[i];
          batch.orig.push_back(urs_items(tape, src, g, spec.path, cfg.f));
          batch.view_a.push_back(
              urs_items(tape, src, g, chosen_plans[i]->a.path, cfg.f));
          batch.view_b.push_back(
              urs_items(tape, src, g, chosen_plans[i]->b.path, cfg.f));
          batch.mask.push_back(spec.mask);
          batch.labels.push_back(
              train_labels[static_cast<size_t>(spec.owner)]);
        }
      }

      auto parts = cs_multitask_loss(tape, bound, "cs.", cs_cfg, batch,
                                     static_cast<S>(cfg.tau), cfg.contrastive,
                                     static_cast<S>(cfg.lambda));
      tape.backward(parts.total);
      opt.step(store, bound.gradients(tape));
      loss_sum += static_cast<double>(tape.value(parts.total)(0, 0));
      ++steps;
    }

    double val_auc = 0.5;
    if (!split.val.empty()) {
      if (is_tss) {
        auto fwd = tss_forward(g, feats, store, hg_cfg, cs_cfg, tss_world,
                               split.val, false);
        val_auc = auc_of(fwd.scores, split.val, g);
      } else {
        auto fwd = urs_forward(g, feats, store, cs_cfg, urs_world, split.val,
                               false);
        val_auc = auc_of(fwd.scores, split.val, g);
      }
    }
    const double mean_loss = steps ? loss_sum / static_cast<double>(steps) : 0.0;
    out.history.push_back({{"epoch", epoch},
                           {"mean_loss", mean_loss},
                           {"val_auc", val_auc}});
    std::cerr << (is_tss ? "tss" : "urs") << " epoch " << epoch
              << " loss=" << mean_loss << " val_auc=" << val_auc << "\n";
    out.epochs = epoch + 1;
    if (val_auc > out.best_auc + 1e-9) {
      out.best_auc = val_auc;
      out.best = store;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return out;
}

// strip the component namespace back off for the forward passes
template <class S>
ParamStore<S> strip_prefix(const ParamStore<S>& store,
                           const std::string& prefix) {
  ParamStore<S> out;
  for (size_t i = 0; i < store.size(); ++i) {
    require(store.name(i).rfind(prefix, 0) == 0,
            "checkpoint: unexpected parameter " + store.name(i));
    out.add(store.name(i).substr(prefix.size()), store.value(i));
  }
  return out;
}

struct DetectMeta {
  std::string mode;  // "concat" or "raw"
  bool use_tss = true, use_urs = true;
  std::string h0_source;  // "tss" or "urs"
  TrainConfig cfg;
  int d_raw = 0;

  nlohmann::json to_json() const {
    return {{"mode", mode},          {"use_tss", use_tss},
            {"use_urs", use_urs},    {"h0_source", h0_source},
            {"config", cfg.to_json()}, {"d_raw", d_raw}};
  }
  static DetectMeta from_json(const nlohmann::json& j) {
    DetectMeta m;
    m.mode = j.at("mode").get<std::string>();
    m.use_tss = j.at("use_tss").get<bool>();
    m.use_urs = j.at("use_urs").get<bool>();
    m.h0_source = j.at("h0_source").get<std::string>();
    m.cfg = TrainConfig::from_json(j.at("config"));
    m.d_raw = j.at("d_raw").get<int>();
    return m;
  }
};

// detect-phase input features: [snapshot-view rep | relation-view rep | h0]
template <class S>
Mat<S> build_detect_inputs(const GraphStream& g, const TrainConfig& cfg,
                           const DetectMeta& meta, const std::string& dir) {
  const Mat<S> feats = g.user_features().cast<S>().eval();
  std::vector<int32_t> all_users(static_cast<size_t>(g.n_users()));
  for (int32_t u = 0; u < g.n_users(); ++u)
    all_users[static_cast<size_t>(u)] = u;

  if (meta.mode == "raw") return feats;

  const int f = cfg.f;
  Mat<S> inputs = Mat<S>::Zero(g.n_users(), 3 * f);
  HgConfig hg_cfg{.f = f, .d_in = g.feature_dim(), .layers = 2,
                  .relations = g.n_relations()};

  std::optional<ParamStore<S>> tss_store, urs_store;
  if (meta.use_tss || meta.h0_source == "tss")
    tss_store = strip_prefix(
        load_checkpoint<S>((fs::path(dir) / "tss").string()), "tss.");
  if (meta.use_urs || meta.h0_source == "urs")
    urs_store = strip_prefix(
        load_checkpoint<S>((fs::path(dir) / "urs").string()), "urs.");

  if (meta.use_tss) {
    CsConfig cs_cfg{.f = f, .max_len = g.T(), .heads = 8, .blocks = 2};
    auto world = cached_tss_world(g, view_params(cfg), cache_dir_from_env());
    auto fwd = tss_forward(g, feats, *tss_store, hg_cfg, cs_cfg, world,
                           all_users, true);
    inputs.middleCols(0, f) = fwd.reps;
  }
  if (meta.use_urs) {
    CsConfig cs_cfg{.f = f, .max_len = cfg.l_max, .heads = 8, .blocks = 2};
    auto world = cached_urs_world(g, view_params(cfg), cache_dir_from_env());
    auto fwd = urs_forward(g, feats, *urs_store, cs_cfg, world, all_users,
                           true);
    inputs.middleCols(f, f) = fwd.reps;
  }
  {
    const ParamStore<S>& src =
        meta.h0_source == "tss" ? *tss_store : *urs_store;
    const Mat<S>& w_h =
        meta.h0_source == "tss" ? src["hg.w_h"] : src["w_h"];
    inputs.middleCols(2 * f, f) = feats * w_h.transpose();
  }
  return inputs;
}

template <class S>
TrainOutcome<S> train_detect(const GraphStream& g, const TrainConfig& cfg,
                             const Split& split, const DetectMeta& meta,
                             const std::string& dir, Mat<S>* inputs_out) {
  Mat<S> inputs = build_detect_inputs<S>(g, cfg, meta, dir);
  HgConfig hg_cfg{.f = cfg.f, .d_in = static_cast<int>(inputs.cols()),
                  .layers = 2, .relations = g.n_relations()};
  ParamStore<S> store;
  Rng init_rng(Rng::mix({cfg.seed, 0x171ull, 3ull}));
  add_hg_params(store, "hg.", hg_cfg, init_rng);

  const auto train_labels = training_labels(g, split);
  Adam<S> opt(store, static_cast<S>(cfg.lr));
  TrainOutcome<S> out;
  out.best = store;
  out.history = nlohmann::json::array();
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    auto plan = epoch_batches(split.train, cfg.batch, cfg.steps_per_epoch,
                              Rng::mix({cfg.seed, 0xE90Cull,
                                        static_cast<uint64_t>(epoch), 3ull}));
    double loss_sum = 0.0;
    int64_t steps = 0;
    for (const auto& batch_users : plan.batches) {
      Tape<S> tape;
      auto bound = Bound<S>::leaves(tape, store);
      auto res = hg_encode(tape, bound, "hg.", hg_cfg, g, 0, batch_users,
                           inputs);
      Var logits = hg_score_logits(tape, bound, "hg.", res.fused);
      std::vector<S> targets;
      for (int32_t u : batch_users)
        targets.push_back(
            static_cast<S>(train_labels[static_cast<size_t>(u)]));
      Var loss = tape.bce_with_logits(logits, std::move(targets));
      tape.backward(loss);
      opt.step(store, bound.gradients(tape));
      loss_sum += static_cast<double>(tape.value(loss)(0, 0));
      ++steps;
    }
    double val_auc = 0.5;
    if (!split.val.empty()) {
      auto fwd = det_forward(g, inputs, store, hg_cfg, split.val, false);
      val_auc = auc_of(fwd.scores, split.val, g);
    }
    const double mean_loss = steps ? loss_sum / static_cast<double>(steps) : 0.0;
    out.history.push_back({{"epoch", epoch},
                           {"mean_loss", mean_loss},
                           {"val_auc", val_auc}});
    std::cerr << "detect epoch " << epoch << " loss=" << mean_loss
              << " val_auc=" << val_auc << "\n";
    out.epochs = epoch + 1;
    if (val_auc > out.best_auc + 1e-9) {
      out.best_auc = val_auc;
      out.best = store;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  if (inputs_out) *inputs_out = std::move(inputs);
  return out;
}

template <class S>
PretrainResult pretrain_impl(Component c, const GraphStream& g,
                             const TrainConfig& cfg,
                             const std::string& out_dir) {
  fs::create_directories(out_dir);
  const GraphStream view = make_training_view(g, cfg);
  const Split split = make_split(view, cfg);
  PretrainResult res;
  res.ckpt_stem = (fs::path(out_dir) / component_name(c)).string();

  if (c == Component::kDetect) {
    DetectMeta meta;
    meta.cfg = cfg;
    meta.d_raw = g.feature_dim();
    if (cfg.raw_inputs) {
      meta.mode = "raw";
      meta.use_tss = meta.use_urs = false;
      meta.h0_source = "none";
    } else {
      require(cfg.use_tss || cfg.use_urs,
              "detect pretraining: enable a sequence view or raw_inputs");
      meta.mode = "concat";
      meta.use_tss = cfg.use_tss;
      meta.use_urs = cfg.use_urs;
      meta.h0_source = cfg.use_tss ? "tss" : "urs";
    }
    auto outcome = train_detect<S>(view, cfg, split, meta, out_dir, nullptr);
    ParamStore<S> named;
    for (size_t i = 0; i < outcome.best.size(); ++i)
      named.add("det." + outcome.best.name(i), outcome.best.value(i));
    save_checkpoint(named, res.ckpt_stem);
    write_json(meta.to_json(),
               (fs::path(out_dir) / "detect.meta.json").string());
    res.history = std::move(outcome.history);
    res.best_val_auc = outcome.best_auc;
    res.epochs_run = outcome.epochs;
  } else {
    auto outcome =
        train_sequence_component<S>(c == Component::kTss, view, cfg, split);
    // namespace the store for disjoint checkpoint manifests
    ParamStore<S> named;
    for (size_t i = 0; i < outcome.best.size(); ++i)
      named.add(std::string(component_name(c)) + "." + outcome.best.name(i),
                outcome.best.value(i));
    save_checkpoint(named, res.ckpt_stem);
    res.history = std::move(outcome.history);
    res.best_val_auc = outcome.best_auc;
    res.epochs_run = outcome.epochs;
  }
  return res;
}

template <class S>
DetectOutput detect_impl(const GraphStream& g, const std::string& ckpt_dir,
                         const std::vector<int64_t>& user_orig_ids,
                         const DetectMeta& meta) {
  const TrainConfig& cfg = meta.cfg;
  const GraphStream view = make_training_view(g, cfg);

  DetectOutput out;
  std::vector<int32_t> users;
  for (int64_t oid : user_orig_ids) {
    int32_t u = g.dense_id(g.schema().user_kind, oid);
    if (u < 0) {
      out.errors.push_back("unknown user id " + std::to_string(oid));
      continue;
    }
    users.push_back(u);
  }
  require(!users.empty(), "detect: no known users requested");

  Mat<S> inputs = build_detect_inputs<S>(view, cfg, meta, ckpt_dir);
  auto det_store = strip_prefix(
      load_checkpoint<S>((fs::path(ckpt_dir) / "detect").string()), "det.");
  HgConfig hg_cfg{.f = cfg.f, .d_in = static_cast<int>(inputs.cols()),
                  .layers = 2, .relations = view.n_relations()};
  auto fwd = det_forward(view, inputs, det_store, hg_cfg, users, true);

  const int f = cfg.f;
  for (size_t i = 0; i < users.size(); ++i) {
    DetectionRecord rec;
    rec.user = users[i];
    rec.score = fwd.scores[i];
    rec.predicted = rec.score > 0.5 ? 1 : 0;
    auto slice = [&](Index c0) {
      std::vector<double> v(static_cast<size_t>(f));
      for (int k = 0; k < f; ++k)
        v[static_cast<size_t>(k)] = meta.mode == "raw"
                                        ? 0.0
                                        : static_cast<double>(inputs(
                                              users[i], c0 + k));
      return v;
    };
    rec.h_seq_temp = slice(0);
    rec.h_seq_rel = slice(f);
    rec.h0 = slice(2 * f);
    out.records.push_back(std::move(rec));
  }
  return out;
}

DetectMeta load_meta(const std::string& ckpt_dir) {
  return DetectMeta::from_json(
      read_json((fs::path(ckpt_dir) / "detect.meta.json").string()));
}

}  // namespace

PretrainResult pretrain_component(Component c, const GraphStream& g,
                                  const TrainConfig& cfg,
                                  const std::string& out_dir) {
  if (cfg.precision == "f64") return pretrain_impl<double>(c, g, cfg, out_dir);
  return pretrain_impl<float>(c, g, cfg, out_dir);
}

DetectOutput detect_users(const GraphStream& g, const std::string& ckpt_dir,
                          const std::vector<int64_t>& user_orig_ids) {
  DetectMeta meta = load_meta(ckpt_dir);
  if (meta.cfg.precision == "f64")
    return detect_impl<double>(g, ckpt_dir, user_orig_ids, meta);
  return detect_impl<float>(g, ckpt_dir, user_orig_ids, meta);
}

void write_detections_tsv(const GraphStream& g,
                          const std::vector<DetectionRecord>& records,
                          const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot write " + path);
  out << "user_id\tscore\tpredicted_label\n";
  char buf[64];
  for (const auto& rec : records) {
    std::snprintf(buf, sizeof(buf), "%.10g", rec.score);
    out << g.orig_id({g.schema().user_kind, rec.user}) << '\t' << buf << '\t'
        << rec.predicted << '\n';
  }
}

namespace {

template <class S>
Mat<double> export_impl(const GraphStream& g, const std::string& ckpt_dir,
                        const DetectMeta& meta) {
  const GraphStream view = make_training_view(g, meta.cfg);
  Mat<S> inputs = build_detect_inputs<S>(view, meta.cfg, meta, ckpt_dir);
  auto det_store = strip_prefix(
      load_checkpoint<S>((fs::path(ckpt_dir) / "detect").string()), "det.");
  HgConfig hg_cfg{.f = meta.cfg.f, .d_in = static_cast<int>(inputs.cols()),
                  .layers = 2, .relations = view.n_relations()};
  std::vector<int32_t> users(static_cast<size_t>(g.n_users()));
  for (int32_t u = 0; u < g.n_users(); ++u) users[static_cast<size_t>(u)] = u;
  auto fwd = det_forward(view, inputs, det_store, hg_cfg, users, true);
  return fwd.reps.template cast<double>();
}

}  // namespace

Mat<double> export_user_embeddings(const GraphStream& g,
                                   const std::string& ckpt_dir) {
  DetectMeta meta = load_meta(ckpt_dir);
  if (meta.cfg.precision == "f64")
    return export_impl<double>(g, ckpt_dir, meta);
  return export_impl<float>(g, ckpt_dir, meta);
}

nlohmann::json explain_user(const GraphStream& g, const std::string& ckpt_dir,
                            int64_t user_orig_id, int hops) {
  require(hops >= 1, "explain: hops must be >= 1");
  const int32_t center = g.dense_id(g.schema().user_kind, user_orig_id);
  require(center >= 0, "explain: unknown user " + std::to_string(user_orig_id));

  // h-hop neighborhood over the union graph, every node exactly once
  std::unordered_map<int32_t, int> depth;
  std::vector<int32_t> frontier = {g.user_gid(center)};
  depth.emplace(g.user_gid(center), 0);
  for (int h = 1; h <= hops; ++h) {
    std::vector<int32_t> next;
    for (int32_t x : frontier) {
      for (int r = 0; r < g.n_relations(); ++r) {
        for (int32_t nb : g.und_gids(0, r, x)) {
          if (depth.emplace(nb, h).second) next.push_back(nb);
        }
      }
    }
    std::sort(next.begin(), next.end());
    frontier = std::move(next);
  }

  std::vector<int32_t> nodes;
  for (const auto& [gid, _] : depth) nodes.push_back(gid);
  std::sort(nodes.begin(), nodes.end());

  // Embeddings come from the same canonical all-users inference pass that
  // detection and export use. Relation attention follows the inference
  // batch, so sharing one pass keeps the three surfaces consistent.
  std::vector<int32_t> embed_users(static_cast<size_t>(g.n_users()));
  for (int32_t u = 0; u < g.n_users(); ++u)
    embed_users[static_cast<size_t>(u)] = u;

  auto embedding_of = [&](int32_t gid) -> Eigen::RowVectorXd {
    if (g.is_user(gid)) return emb.row(gid - g.user_gid(0));
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(emb.cols());
    auto members = g.user_neighbors(0, gid);
    if (members.empty()) return acc;
    for (int32_t m : members) acc += emb.row(m - g.user_gid(0));
    return acc / static_cast<double>(members.size());
  };

  const double eps = 1e-9;
  Eigen::RowVectorXd center_emb = embedding_of(g.user_gid(center));
  nlohmann::json report;
  report["user_id"] = user_orig_id;
  report["hops"] = hops;
  auto& jnodes = report["nodes"] = nlohmann::json::array();
  for (int32_t gid : nodes) {
    NodeRef n = g.node(gid);
    const double dist = (embedding_of(gid) - center_emb).norm();
    nlohmann::json jn = {
        {"id", g.orig_id(n)},
        {"kind", g.schema().kinds[static_cast<size_t>(n.kind)]},
        {"depth", depth.at(gid)},
        {"reciprocal_distance", 1.0 / (eps + dist)},
        {"capped", dist == 0.0}};
    if (n.kind == g.schema().user_kind) {
      int8_t lab = g.labels()[static_cast<size_t>(n.id)];
      if (lab >= 0) jn["label"] = static_cast<int>(lab);
    }
    jnodes.push_back(std::move(jn));
  }
  auto& jedges = report["edges"] = nlohmann::json::array();
  for (const auto& e : g.edge_rows()) {
    if (!depth.count(e.src) || !depth.count(e.dst)) continue;
    jedges.push_back(
        {{"src", g.orig_id(g.node(e.src))},
         {"dst", g.orig_id(g.node(e.dst))},
         {"relation",
          g.schema().relations[static_cast<size_t>(e.relation)].name},
         {"t", e.t}});
  }
  return report;
}

}  // namespace htgfd
