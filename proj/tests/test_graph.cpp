#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "htgfd/graph.hpp"
#include "htgfd/synth.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace htgfd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path p;
  explicit TempDir(const std::string& name) {
    p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
  }
  ~TempDir() { fs::remove_all(p); }
  std::string file(const std::string& f) const { return (p / f).string(); }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kNodes =
    "node_id\tkind\tfeatures\n"
    "0\tuser\t1,0,0,1,0,0,0\n"
    "1\tuser\t0,1,0,0,0,0,0\n"
    "2\tuser\t0,0,1,0,0,0,0\n"
    "10\tgroup\t\n"
    "20\tdevice\t\n";

const char* kEdges =
    "src_id\tsrc_kind\tdst_id\tdst_kind\trelation\tt\n"
    "0\tuser\t1\tuser\tADD\t1\n"
    "0\tuser\t10\tgroup\tCREATE\t1\n"
    "1\tuser\t10\tgroup\tENTER\t2\n";

const char* kLabels =
    "node_id\tlabel\n"
    "0\t1\n"
    "1\t0\n";

}  // namespace

TEST_CASE("loads a small graph with correct structure") {
  TempDir dir("htgfd_graph_small");
  write_file(dir.file("nodes.tsv"), kNodes);
  write_file(dir.file("edges.tsv"), kEdges);
  write_file(dir.file("labels.tsv"), kLabels);

  auto g = load_graph(dir.file("edges.tsv"), dir.file("nodes.tsv"),
                      dir.file("labels.tsv"), Schema::mmma());
  CHECK(g.T() == 2);
  CHECK(g.n_users() == 3);
  CHECK(g.n_nodes(1) == 1);
  CHECK(g.n_nodes(2) == 1);
  CHECK(g.n_edge_rows() == 3);
  CHECK(g.labels()[0] == 1);
  CHECK(g.labels()[1] == 0);
  CHECK(g.labels()[2] == -1);
  CHECK(g.feature_dim() == 7);

  const int add = g.schema().relation_id("ADD");
  // symmetric ADD is visible from both endpoints
  CHECK(g.out_gids(1, add, g.user_gid(0)).size() == 1);
  CHECK(g.out_gids(1, add, g.user_gid(1)).size() == 1);
  CHECK(g.edge_count(1, add) == 1);

  auto nb = g.out_neighbors(1, NodeRef{0, 1});
  REQUIRE(nb.size() == 1);
  CHECK(nb[0].first == NodeRef{0, 0});
  CHECK(nb[0].second == 1);

  // isolated node in snapshot 2
  CHECK(g.out_neighbors(2, NodeRef{0, 2}).empty());
  CHECK(g.active(1, g.user_gid(0)));
  CHECK_FALSE(g.active(2, g.user_gid(0)));

  // snapshot views carry only their own timestamps
  for (const auto& e : g.edge_rows()) {
    CHECK(e.t >= 1);
    CHECK(e.t <= g.T());
  }

  CHECK_THROWS(g.out_neighbors(3, NodeRef{0, 0}));
  CHECK_THROWS(g.out_neighbors(1, NodeRef{0, 99}));
}

TEST_CASE("malformed inputs are rejected with the offending line") {
  TempDir dir("htgfd_graph_bad");
  write_file(dir.file("nodes.tsv"), kNodes);

  auto expect_load_error = [&](const std::string& edges,
                               const std::string& needle) {
    write_file(dir.file("edges.tsv"), edges);
    try {
      load_graph(dir.file("edges.tsv"), dir.file("nodes.tsv"), std::nullopt,
                 Schema::mmma());
      FAIL("expected a load error");
    } catch (const std::exception& e) {
      INFO(e.what());
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  expect_load_error("h\n0\tuser\t1\tuser\tADD\t0\n", ":2");      // t = 0
  expect_load_error("h\n0\tuser\t1\tuser\tADD\n", "6 columns");  // arity
  expect_load_error("h\n0\tuser\t1\tuser\tNOPE\t1\n", "unknown relation");
  expect_load_error("h\n0\tghost\t1\tuser\tADD\t1\n", "unknown kind");
  expect_load_error("h\n0\tuser\t9\tuser\tADD\t1\n", "undeclared");
  expect_load_error("h\n0\tuser\t10\tgroup\tADD\t1\n", "does not join");

  // conflicting kind re-declaration
  write_file(dir.file("nodes.tsv"),
             "h\n0\tuser\t1,0\n0\tgroup\t\n");
  write_file(dir.file("edges.tsv"),
             "h\n0\tuser\t0\tgroup\tENTER\t1\n");
  CHECK_THROWS_WITH_AS(
      load_graph(dir.file("edges.tsv"), dir.file("nodes.tsv"), std::nullopt,
                 Schema::mmma()),
      doctest::Contains("conflicting kind"), std::runtime_error);
}

TEST_CASE("union of per-snapshot out_neighbors equals the raw rows") {
  TempDir dir("htgfd_graph_union");
  SynthConfig cfg;
  cfg.n_users = 120;
  cfg.n_groups = 12;
  cfg.n_devices = 30;
  cfg.victims_per_ring = 8;
  cfg.seed = 5;
  auto res = generate_synthetic(cfg, dir.file("data"));
  auto g = load_graph(res.edges_path, res.nodes_path, res.labels_path,
                      Schema::mmma());

  // oracle: scan the TSV rows, collecting directed out-edges per source
  // (symmetric ADD counts for both endpoints)
  std::map<int64_t, std::set<std::tuple<int, std::string, int64_t>>> want;
  std::ifstream ef(res.edges_path);
  std::string line;
  std::getline(ef, line);
  while (std::getline(ef, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string sid, sk, did, dk, rel, ts;
    std::getline(ss, sid, '\t');
    std::getline(ss, sk, '\t');
    std::getline(ss, did, '\t');
    std::getline(ss, dk, '\t');
    std::getline(ss, rel, '\t');
    std::getline(ss, ts, '\t');
    if (sk == "user") want[std::stoll(sid)].insert(
        {std::stoi(ts), dk, std::stoll(did)});
    if (rel == "ADD" && dk == "user")
      want[std::stoll(did)].insert({std::stoi(ts), sk, std::stoll(sid)});
  }

  for (int32_t u = 0; u < g.n_users(); ++u) {
    std::set<std::tuple<int, std::string, int64_t>> got;
    for (int t = 1; t <= g.T(); ++t)
      for (auto [n, tt] : g.out_neighbors(t, NodeRef{0, u}))
        got.insert({tt, g.schema().kinds[static_cast<size_t>(n.kind)],
                    g.orig_id(n)});
    auto it = want.find(g.orig_id({0, u}));
    if (it == want.end())
      CHECK(got.empty());
    else
      CHECK(got == it->second);
  }
}

TEST_CASE("save then load is idempotent") {
  TempDir dir("htgfd_graph_roundtrip");
  SynthConfig cfg;
  cfg.n_users = 80;
  cfg.n_groups = 10;
  cfg.n_devices = 16;
  cfg.victims_per_ring = 6;
  auto res = generate_synthetic(cfg, dir.file("data"));
  auto g1 = load_graph(res.edges_path, res.nodes_path, res.labels_path,
                       Schema::mmma());
  save_graph(g1, dir.file("e1.tsv"), dir.file("n1.tsv"), dir.file("l1.tsv"));
  auto g2 = load_graph(dir.file("e1.tsv"), dir.file("n1.tsv"),
                       dir.file("l1.tsv"), Schema::mmma());
  save_graph(g2, dir.file("e2.tsv"), dir.file("n2.tsv"), dir.file("l2.tsv"));
  CHECK(slurp(dir.file("e1.tsv")) == slurp(dir.file("e2.tsv")));
  CHECK(slurp(dir.file("n1.tsv")) == slurp(dir.file("n2.tsv")));
  CHECK(slurp(dir.file("l1.tsv")) == slurp(dir.file("l2.tsv")));
}

TEST_CASE("subgraph sampling: caps, exactness, determinism") {
  // star: center user 0 with 5 PULL leaves at t=1
  std::vector<std::vector<int64_t>> ids(3);
  for (int64_t i = 0; i < 6; ++i) ids[0].push_back(i);
  Mat<double> feats = Mat<double>::Zero(6, 2);
  std::vector<EdgeRow> edges;
  const int pull = Schema::mmma().relation_id("PULL");
  for (int32_t leaf = 1; leaf <= 5; ++leaf)
    edges.push_back({1, pull, 0, leaf});
  GraphStream g(Schema::mmma(), ids, feats, {}, edges, 1);

  SUBCASE("fanout below degree keeps exactly fanout neighbors") {
    auto view = sample_subgraph(g, {0}, 1, 1, 7);
    CHECK(view.n_edge_rows() == 1);
    CHECK(view.out_gids(1, pull, 0).size() == 1);
  }

  SUBCASE("fanout at or above max degree reproduces the full neighborhood") {
    auto view = sample_subgraph(g, {0}, 2, 5, 7);
    CHECK(view.n_edge_rows() == g.n_edge_rows());
  }

  SUBCASE("same seed, same subgraph; empty seeds rejected") {
    TempDir dir("htgfd_sample_det");
    auto v1 = sample_subgraph(g, {0}, 1, 2, 99);
    auto v2 = sample_subgraph(g, {0}, 1, 2, 99);
    save_graph(v1, dir.file("a.tsv"), dir.file("an.tsv"), std::nullopt);
    save_graph(v2, dir.file("b.tsv"), dir.file("bn.tsv"), std::nullopt);
    CHECK(slurp(dir.file("a.tsv")) == slurp(dir.file("b.tsv")));
    CHECK_THROWS(sample_subgraph(g, {}, 1, 2, 1));
  }
}

TEST_CASE("sampling a dense synthetic graph with huge fanout is the identity") {
  TempDir dir("htgfd_sample_exact");
  SynthConfig cfg;
  cfg.n_users = 60;
  cfg.n_groups = 8;
  cfg.n_devices = 12;
  cfg.victims_per_ring = 5;
  auto res = generate_synthetic(cfg, dir.file("data"));
  auto g = load_graph(res.edges_path, res.nodes_path, res.labels_path,
                      Schema::mmma());
  std::vector<int32_t> seeds;
  for (int32_t u = 0; u < g.n_users(); ++u) seeds.push_back(u);
  auto view = sample_subgraph(g, seeds, 2, 1000000, 3);
  CHECK(view.n_edge_rows() == g.n_edge_rows());
}
