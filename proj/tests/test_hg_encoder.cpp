#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "htgfd/grad_check.hpp"
#include "htgfd/hg_encoder.hpp"
#include "hg_oracle.hpp"

#include <cmath>

using namespace htgfd;

namespace {

Schema one_relation_schema() {
  return Schema::from_json(nlohmann::json::parse(R"({
    "kinds": ["user"],
    "user_kind": "user",
    "relations": [{"name": "E", "src": "user", "dst": "user"}]
  })"));
}

GraphStream make_graph(const Schema& schema,
                       const std::vector<std::vector<int64_t>>& ids,
                       const Mat<double>& feats,
                       const std::vector<EdgeRow>& edges, int T) {
  return GraphStream(schema, ids, feats, {}, edges, T);
}

Mat<double> random_feats(Index n, Index d, Rng& rng) {
  Mat<double> m(n, d);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.sym(1.0);
  return m;
}

// random MMMA-style micro-graph for oracle comparisons
GraphStream random_mmma_graph(uint64_t seed, int32_t n_users, int32_t n_groups,
                              int32_t n_devices, int T, int n_edges,
                              Mat<double>* feats_out) {
  Rng rng(seed);
  Schema schema = Schema::mmma();
  std::vector<std::vector<int64_t>> ids(3);
  for (int32_t i = 0; i < n_users; ++i) ids[0].push_back(i);
  for (int32_t i = 0; i < n_groups; ++i) ids[1].push_back(100 + i);
  for (int32_t i = 0; i < n_devices; ++i) ids[2].push_back(200 + i);
  std::vector<EdgeRow> edges;
  for (int e = 0; e < n_edges; ++e) {
    const int r = static_cast<int>(rng.below(7));
    const auto& spec = schema.relations[static_cast<size_t>(r)];
    const int t = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(T)));
    int32_t src = static_cast<int32_t>(rng.below(static_cast<uint64_t>(n_users)));
    int32_t dst;
    if (spec.dst_kind == 0)
      dst = static_cast<int32_t>(rng.below(static_cast<uint64_t>(n_users)));
    else if (spec.dst_kind == 1)
      dst = n_users + static_cast<int32_t>(
                          rng.below(static_cast<uint64_t>(n_groups)));
    else
      dst = n_users + n_groups +
            static_cast<int32_t>(rng.below(static_cast<uint64_t>(n_devices)));
    if (spec.dst_kind == 0 && src == dst) continue;
    edges.push_back({t, r, src, dst});
  }
  *feats_out = random_feats(n_users, 7, rng);
  return GraphStream(schema, ids, *feats_out, {}, edges, T);
}

}  // namespace

TEST_CASE("group/device initial embeddings are user-neighbor means") {
  Schema schema = Schema::mmma();
  std::vector<std::vector<int64_t>> ids = {{0, 1, 2}, {10, 11}, {20}};
  Rng rng(3);
  Mat<double> feats = random_feats(3, 7, rng);
  // group 10: users 0 and 1 enter; group 11: only user 2; device 20: user 0
  std::vector<EdgeRow> edges = {{1, schema.relation_id("ENTER"), 0, 3},
                                {1, schema.relation_id("ENTER"), 1, 3},
                                {1, schema.relation_id("ENTER"), 2, 4},
                                {1, schema.relation_id("LOGIN"), 0, 5}};
  auto g = make_graph(schema, ids, feats, edges, 1);

  ParamStore<double> store;
  HgConfig cfg{.f = 4, .d_in = 7, .layers = 2, .relations = 7};
  add_hg_params(store, "hg.", cfg, rng);

  Tape<double> tape;
  tape.check_finite = true;
  auto bound = Bound<double>::frozen(tape, store);
  Var h0 = tape.linear(tape.constant(feats.cast<double>().eval()),
                       bound["hg.w_h"],
                       tape.constant(Mat<double>::Zero(1, 4)));
  Var gd = hg_neighbor_mean(tape, h0, g, 1, {g.gid({1, 0}), g.gid({1, 1}),
                                             g.gid({2, 0})});
  const auto& v = tape.value(gd);
  const auto& h = tape.value(h0);
  CHECK((v.row(0) - (h.row(0) + h.row(1)) / 2.0).cwiseAbs().maxCoeff() <
        1e-15);
  CHECK((v.row(1) - h.row(2)).cwiseAbs().maxCoeff() == 0.0);  // singleton mean
  CHECK((v.row(2) - h.row(0)).cwiseAbs().maxCoeff() == 0.0);  // device
}

TEST_CASE("relation message: pools then affine") {
  Tape<double> tape;
  SUBCASE("single neighbor: all pools equal h") {
    Rng rng(5);
    Mat<double> h(1, 3);
    h << 0.3, -0.2, 0.9;
    Mat<double> w = Mat<double>::Zero(3, 9);
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 9; ++j) w(i, j) = rng.sym(1.0);
    Mat<double> b(1, 3);
    b << 0.1, 0.2, 0.3;
    Var msg = hg_relation_message(tape, tape.constant(h), {0}, 1,
                                  tape.constant(w), tape.constant(b));
    Mat<double> pooled(1, 9);
    pooled << h, h, h;
    Mat<double> want = pooled * w.transpose() + b;
    CHECK((tape.value(msg) - want).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("coordinate-selecting weights recover the mean pool") {
    Mat<double> nbrs(2, 2);
    nbrs << 1, 0, 0, 1;
    Mat<double> w = Mat<double>::Zero(2, 6);
    w(0, 0) = 1;  // first mean coordinate
    w(1, 1) = 1;  // second mean coordinate
    Var msg = hg_relation_message(tape, tape.constant(nbrs), {0, 0}, 1,
                                  tape.constant(w),
                                  tape.constant(Mat<double>::Zero(1, 2)));
    CHECK(tape.value(msg)(0, 0) == 0.5);
    CHECK(tape.value(msg)(0, 1) == 0.5);
  }
}

TEST_CASE("relation update: unit norm or exact zero") {
  Rng rng(11);
  Tape<double> tape;
  const Index f = 5;
  SUBCASE("random inputs give unit rows and match a straight-line eval") {
    Mat<double> m = random_feats(6, f, rng), h0 = random_feats(6, f, rng);
    Mat<double> ws = random_feats(f, f, rng), bs = random_feats(1, f, rng);
    Mat<double> wq = random_feats(f, 2 * f, rng), bq = random_feats(1, f, rng);
    Var out = hg_relation_update(tape, tape.constant(m), tape.constant(h0),
                                 tape.constant(ws), tape.constant(bs),
                                 tape.constant(wq), tape.constant(bq));
    for (Index i = 0; i < 6; ++i) {
      Eigen::VectorXd s = ws * h0.row(i).transpose() + bs.row(0).transpose();
      Eigen::VectorXd e(2 * f);
      e << m.row(i).transpose(), s;
      e = e.cwiseMax(0.0);
      Eigen::VectorXd q = (wq * e + bq.row(0).transpose()).cwiseMax(0.0);
      double n = q.norm();
      Eigen::VectorXd want = n <= 1e-12 ? Eigen::VectorXd(Eigen::VectorXd::Zero(f))
                                        : Eigen::VectorXd((q / n).eval());
      CHECK((tape.value(out).row(i).transpose() - want).cwiseAbs().maxCoeff() <
            1e-12);
      const double norm = tape.value(out).row(i).norm();
      CHECK((std::abs(norm - 1.0) < 1e-6 || norm == 0.0));
    }
  }
  SUBCASE("all-zero inputs with zero biases hit the zero guard") {
    Mat<double> z = Mat<double>::Zero(2, f);
    Var out = hg_relation_update(
        tape, tape.constant(z), tape.constant(z),
        tape.constant(random_feats(f, f, rng)),
        tape.constant(Mat<double>::Zero(1, f)),
        tape.constant(random_feats(f, 2 * f, rng)),
        tape.constant(Mat<double>::Zero(1, f)));
    CHECK(tape.value(out).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("relation fuse: softmax symmetry and engineered weights") {
  Tape<double> tape;
  Rng rng(17);
  const Index f = 3;
  Mat<double> h1 = random_feats(4, f, rng), h2 = random_feats(4, f, rng);
  Var r1 = tape.constant(h1), r2 = tape.constant(h2);
  Var a = tape.constant([] {
    Mat<double> m = Mat<double>::Zero(3, 1);
    m(0, 0) = 1.0;
    return m;
  }());
  Var w0 = tape.constant(Mat<double>::Zero(f, f));
  SUBCASE("identical scores give the uniform distribution") {
    Var b = tape.constant(Mat<double>::Constant(1, f, 0.4));
    auto [fused, beta] = hg_fuse<double>(tape, {r1, r2}, {0, 1, 2, 3}, a,
                                         {{w0, b}, {w0, b}});
    CHECK(std::abs(tape.value(beta)(0, 0) - 0.5) < 1e-12);
    CHECK((tape.value(fused) - (0.5 * h1 + 0.5 * h2)).cwiseAbs().maxCoeff() <
          1e-12);
  }
  SUBCASE("scores (ln 2, 0) give beta (2/3, 1/3)") {
    Mat<double> b1v = Mat<double>::Zero(1, f);
    b1v(0, 0) = std::atanh(std::log(2.0));
    Var b1 = tape.constant(b1v);
    Var b2 = tape.constant(Mat<double>::Zero(1, f));
    auto [fused, beta] = hg_fuse<double>(tape, {r1, r2}, {0, 1, 2, 3}, a,
                                         {{w0, b1}, {w0, b2}});
    CHECK(std::abs(tape.value(beta)(0, 0) - 2.0 / 3.0) < 1e-12);
    CHECK(std::abs(tape.value(beta)(0, 1) - 1.0 / 3.0) < 1e-12);
    CHECK(std::abs(tape.value(beta).sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("encode: isolated user is finite; duplicates rejected") {
  Schema schema = one_relation_schema();
  std::vector<std::vector<int64_t>> ids = {{0}};
  Rng rng(23);
  Mat<double> feats = random_feats(1, 3, rng);
  // single node, no edges: GraphStream requires 1+ edges, so add a self-free
  // second user pair instead
  ids[0].push_back(1);
  Mat<double> feats2 = random_feats(2, 3, rng);
  std::vector<EdgeRow> edges = {{1, 0, 0, 1}};
  ids[0].push_back(2);  // user 2 stays isolated
  Mat<double> feats3 = random_feats(3, 3, rng);
  auto g = make_graph(schema, ids, feats3, edges, 1);

  ParamStore<double> store;
  HgConfig cfg{.f = 4, .d_in = 3, .layers = 2, .relations = 1};
  add_hg_params(store, "hg.", cfg, rng);

  Tape<double> tape;
  tape.check_finite = true;
  auto bound = Bound<double>::frozen(tape, store);
  auto res = hg_encode(tape, bound, "hg.", cfg, g, 1, {2}, feats3);
  CHECK(tape.value(res.fused).allFinite());
  CHECK(tape.value(res.fused).rows() == 1);
  CHECK_THROWS(hg_encode(tape, bound, "hg.", cfg, g, 1, {0, 0}, feats3));
  CHECK_THROWS(
      hg_encode(tape, bound, "hg.", cfg, g, 1, std::vector<int32_t>{}, feats3));
}

TEST_CASE("encode matches the loop oracle on a one-edge graph (f=2, R=1)") {
  Schema schema = one_relation_schema();
  std::vector<std::vector<int64_t>> ids = {{0, 1}};
  Rng rng(31);
  Mat<double> feats = random_feats(2, 2, rng);
  std::vector<EdgeRow> edges = {{1, 0, 0, 1}};
  auto g = make_graph(schema, ids, feats, edges, 1);

  ParamStore<double> store;
  HgConfig cfg{.f = 2, .d_in = 2, .layers = 2, .relations = 1};
  add_hg_params(store, "hg.", cfg, rng);

  Tape<double> tape;
  auto bound = Bound<double>::frozen(tape, store);
  auto res = hg_encode(tape, bound, "hg.", cfg, g, 1, {0, 1}, feats);
  auto want = hg_oracle::encode(g, 1, {0, 1}, feats, store, "hg.", 2);
  for (int i = 0; i < 2; ++i) {
    CHECK((tape.value(res.fused).row(i).transpose() - want.fused[i])
              .cwiseAbs()
              .maxCoeff() < 1e-10);
    CHECK((tape.value(res.h0).row(i).transpose() - want.h0[i])
              .cwiseAbs()
              .maxCoeff() < 1e-10);
  }
}

TEST_CASE("encode matches the loop oracle on random micro-graphs") {
  for (uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    Mat<double> feats;
    auto g = random_mmma_graph(seed, 5, 2, 2, 3, 14, &feats);
    Rng rng(seed + 100);
    ParamStore<double> store;
    HgConfig cfg{.f = 6, .d_in = 7, .layers = 2, .relations = 7};
    add_hg_params(store, "hg.", cfg, rng);
    std::vector<int32_t> targets = {0, 1, 2, 3, 4};
    for (int t = 1; t <= g.T(); ++t) {
      Tape<double> tape;
      auto bound = Bound<double>::frozen(tape, store);
      auto res = hg_encode(tape, bound, "hg.", cfg, g, t, targets, feats);
      auto want = hg_oracle::encode(g, t, targets, feats, store, "hg.", 6);
      for (size_t i = 0; i < targets.size(); ++i) {
        CHECK((tape.value(res.fused)
                   .row(static_cast<Index>(i))
                   .transpose() -
               want.fused[i])
                  .cwiseAbs()
                  .maxCoeff() < 1e-10);
      }
      for (int k = 0; k < 2; ++k)
        CHECK((tape.value(res.betas[static_cast<size_t>(k)]).row(0).transpose() -
               want.betas[static_cast<size_t>(k)])
                  .cwiseAbs()
                  .maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("structural invariants: unit norms and beta distributions") {
  Mat<double> feats;
  auto g = random_mmma_graph(77, 8, 3, 2, 2, 30, &feats);
  Rng rng(8);
  ParamStore<double> store;
  HgConfig cfg{.f = 8, .d_in = 7, .layers = 2, .relations = 7};
  add_hg_params(store, "hg.", cfg, rng);
  Tape<double> tape;
  tape.check_finite = true;
  auto bound = Bound<double>::frozen(tape, store);
  auto res = hg_encode(tape, bound, "hg.", cfg, g, 1,
                       {0, 1, 2, 3, 4, 5, 6, 7}, feats);
  for (Var beta : res.betas) {
    const auto& b = tape.value(beta);
    CHECK(b.minCoeff() >= 0.0);
    CHECK(std::abs(b.sum() - 1.0) < 1e-6);
  }
}

TEST_CASE("adding an isolated user leaves other components' embeddings put") {
  Schema schema = one_relation_schema();
  Rng rng(41);
  // two disconnected pairs
  std::vector<std::vector<int64_t>> ids = {{0, 1, 2, 3}};
  Mat<double> feats = random_feats(4, 2, rng);
  std::vector<EdgeRow> edges = {{1, 0, 0, 1}, {1, 0, 2, 3}};
  auto g1 = make_graph(schema, ids, feats, edges, 1);

  std::vector<std::vector<int64_t>> ids2 = {{0, 1, 2, 3, 4}};
  Mat<double> feats2(5, 2);
  feats2.topRows(4) = feats;
  feats2.row(4) << 0.5, -0.5;
  auto g2 = make_graph(schema, ids2, feats2, edges, 1);

  ParamStore<double> store;
  HgConfig cfg{.f = 3, .d_in = 2, .layers = 2, .relations = 1};
  add_hg_params(store, "hg.", cfg, rng);

  Tape<double> t1, t2;
  auto b1 = Bound<double>::frozen(t1, store);
  auto b2 = Bound<double>::frozen(t2, store);
  auto r1 = hg_encode(t1, b1, "hg.", cfg, g1, 1, {0, 1, 2, 3}, feats);
  auto r2 = hg_encode(t2, b2, "hg.", cfg, g2, 1, {0, 1, 2, 3, 4}, feats2);
  CHECK((t1.value(r1.fused) - t2.value(r2.fused).topRows(4))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("score head: sigmoid of a linear map") {
  Rng rng(6);
  ParamStore<double> store;
  HgConfig cfg{.f = 4, .d_in = 7, .layers = 2, .relations = 7};
  add_hg_params(store, "hg.", cfg, rng);
  store["hg.score.w"].setZero();
  store["hg.score.b"].setZero();

  Tape<double> tape;
  auto bound = Bound<double>::frozen(tape, store);
  Mat<double> h = random_feats(3, 4, rng);
  Var logits = hg_score_logits(tape, bound, "hg.", tape.constant(h));
  Var prob = tape.sigmoid(logits);
  CHECK(tape.value(prob)(0, 0) == 0.5);  // zero weights and bias

  store["hg.score.w"].setConstant(20.0);
  store["hg.score.b"](0, 0) = 5.0;
  Tape<double> tape2;
  auto bound2 = Bound<double>::frozen(tape2, store);
  Mat<double> ones = Mat<double>::Ones(1, 4);
  Var p2 = tape2.sigmoid(hg_score_logits(tape2, bound2, "hg.",
                                         tape2.constant(ones)));
  CHECK(tape2.value(p2)(0, 0) > 0.99);

  // random inputs match a scalar recomputation
  Tape<double> tape3;
  auto bound3 = Bound<double>::frozen(tape3, store);
  Var p3 = tape3.sigmoid(hg_score_logits(tape3, bound3, "hg.",
                                         tape3.constant(h)));
  for (Index i = 0; i < 3; ++i) {
    double z = (store["hg.score.w"].row(0) * h.row(i).transpose())(0, 0) +
               store["hg.score.b"](0, 0);
    CHECK(std::abs(tape3.value(p3)(i, 0) - 1.0 / (1.0 + std::exp(-z))) <
          1e-12);
  }
}

TEST_CASE("gradients of BCE over encode+score pass the finite-check") {
  Mat<double> feats;
  auto g = random_mmma_graph(123, 6, 2, 2, 2, 18, &feats);
  Rng rng(9);
  ParamStore<double> store;
  HgConfig cfg{.f = 8, .d_in = 7, .layers = 2, .relations = 3};
  // 3-relation schema over the same node kinds: reuse first 3 relations
  Schema s3 = Schema::from_json(nlohmann::json::parse(R"({
    "kinds": ["user", "group", "device"],
    "user_kind": "user",
    "relations": [
      {"name": "CREATE", "src": "user", "dst": "group"},
      {"name": "ENTER", "src": "user", "dst": "group"},
      {"name": "PULL", "src": "user", "dst": "user"}
    ]
  })"));
  std::vector<std::vector<int64_t>> ids = {{0, 1, 2, 3, 4, 5},
                                           {10, 11},
                                           {20, 21}};
  std::vector<EdgeRow> edges;
  Rng erng(55);
  for (int e = 0; e < 14; ++e) {
    int r = static_cast<int>(erng.below(3));
    int t = 1 + static_cast<int>(erng.below(2));
    int32_t src = static_cast<int32_t>(erng.below(6));
    int32_t dst = r == 2 ? static_cast<int32_t>(erng.below(6))
                         : 6 + static_cast<int32_t>(erng.below(2));
    if (r == 2 && src == dst) continue;
    edges.push_back({t, r, src, dst});
  }
  auto g3 = GraphStream(s3, ids, feats.topRows(6), {}, edges, 2);
  add_hg_params(store, "hg.", cfg, rng);

  std::vector<double> labels = {1, 0, 1, 1, 0, 0};
  auto fn = [&](ParamStore<double>& params, std::vector<Mat<double>>* grads,
                uint64_t* kink) {
    Tape<double> tape;
    auto bound = Bound<double>::leaves(tape, params);
    auto res = hg_encode(tape, bound, "hg.", cfg, g3, 1, {0, 1, 2, 3, 4, 5},
                         feats.topRows(6).eval());
    Var logits = hg_score_logits(tape, bound, "hg.", res.fused);
    Var loss = tape.bce_with_logits(logits, labels);
    if (grads) {
      tape.backward(loss);
      *grads = bound.gradients(tape);
    }
    if (kink) *kink = tape.kink_signature();
    return tape.value(loss)(0, 0);
  };
  auto rep = grad_check(fn, store, 250, 2024);
  INFO(rep.worst);
  CHECK(rep.max_rel_err < 1e-5);
}
