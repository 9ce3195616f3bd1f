#pragma once

#include "htgfd/common.hpp"
#include "htgfd/schema.hpp"

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace htgfd {

struct NodeRef {
  int kind = 0;
  int32_t id = 0;  // dense per-kind index
  bool operator==(const NodeRef&) const = default;
};

// One directed edge row in canonical storage (symmetric relations appear
// once; adjacency expands them).
struct EdgeRow {
  int t = 0;
  int relation = 0;
  int32_t src = 0;  // global node index
  int32_t dst = 0;
};

// Heterogeneous temporal graph: T snapshots of typed nodes and relation-typed
// directed edges, plus user features and optional labels. Immutable after
// construction; all queries are read-only.
class GraphStream {
 public:
  // node_ids[k] lists the original ids of kind k in dense order
  GraphStream(Schema schema, std::vector<std::vector<int64_t>> node_ids,
              Mat<double> user_features, std::vector<int8_t> user_labels,
              std::vector<EdgeRow> edges, int T);

  const Schema& schema() const { return schema_; }
  int T() const { return T_; }
  int n_relations() const { return schema_.n_relations(); }
  int32_t n_nodes(int kind) const {
    return static_cast<int32_t>(node_ids_[static_cast<size_t>(kind)].size());
  }
  int32_t n_users() const { return n_nodes(schema_.user_kind); }
  int32_t n_total() const { return n_total_; }

  // global index <-> typed reference
  int32_t gid(NodeRef n) const {
    return kind_offset_[static_cast<size_t>(n.kind)] + n.id;
  }
  int32_t user_gid(int32_t user) const {
    return kind_offset_[static_cast<size_t>(schema_.user_kind)] + user;
  }
  NodeRef node(int32_t gid) const;
  int kind_of(int32_t gid) const { return node(gid).kind; }
  bool is_user(int32_t gid) const { return kind_of(gid) == schema_.user_kind; }

  int64_t orig_id(NodeRef n) const {
    return node_ids_[static_cast<size_t>(n.kind)][static_cast<size_t>(n.id)];
  }
  // dense id from an original id; -1 when absent
  int32_t dense_id(int kind, int64_t orig) const;

  const Mat<double>& user_features() const { return features_; }
  int feature_dim() const { return static_cast<int>(features_.cols()); }
  // -1 unknown, else 0/1; indexed by dense user id
  const std::vector<int8_t>& labels() const { return labels_; }

  const std::vector<EdgeRow>& edge_rows() const { return rows_; }
  int64_t n_edge_rows() const { return static_cast<int64_t>(rows_.size()); }

  // --- queries ------------------------------------------------------------
  // t in 1..T selects a snapshot; t == 0 selects the union graph (edges of
  // all snapshots, deduplicated per relation).

  // directed adjacency
  std::span<const int32_t> out_gids(int t, int relation, int32_t gid) const {
    return csr_span(out_, t, relation, gid);
  }
  std::span<const int32_t> in_gids(int t, int relation, int32_t gid) const {
    return csr_span(in_, t, relation, gid);
  }
  // undirected relation neighborhood N_u^r (out and in, deduplicated)
  std::span<const int32_t> und_gids(int t, int relation, int32_t gid) const {
    return csr_span(und_, t, relation, gid);
  }
  // user-kind neighbors under any relation (for group/device averaging)
  std::span<const int32_t> user_neighbors(int t, int32_t gid) const;

  bool active(int t, int32_t gid) const;

  // spec-facing neighbor queries (validated, typed results)
  std::vector<std::pair<NodeRef, int>> out_neighbors(
      int t, NodeRef n, std::optional<int> relation = std::nullopt) const;
  std::vector<std::pair<NodeRef, int>> in_neighbors(
      int t, NodeRef n, std::optional<int> relation = std::nullopt) const;

  // all out edges of a user across snapshots, sorted by (t, dst gid, relation)
  struct OutEdge {
    int t;
    int relation;
    int32_t dst;
  };
  std::vector<OutEdge> out_edges_over_time(int32_t user_gid) const;

  // edges per (snapshot, relation) in canonical storage
  int64_t edge_count(int t, int relation) const {
    return counts_[static_cast<size_t>(t * schema_.n_relations() + relation)];
  }

 private:
  struct Csr {
    std::vector<int64_t> off;
    std::vector<int32_t> adj;
  };

  std::span<const int32_t> csr_span(const std::vector<Csr>& table, int t,
                                    int relation, int32_t gid) const;

  Schema schema_;
  int T_ = 0;
  int32_t n_total_ = 0;
  std::vector<int32_t> kind_offset_;
  std::vector<std::vector<int64_t>> node_ids_;
  std::vector<std::unordered_map<int64_t, int32_t>> dense_;
  Mat<double> features_;
  std::vector<int8_t> labels_;
  std::vector<EdgeRow> rows_;  // canonical, sorted by (t, relation, src, dst)

  // tables indexed by t * R + r with t in 0..T (0 = union)
  std::vector<Csr> out_, in_, und_;
  std::vector<Csr> user_nbr_;          // indexed by t in 0..T
  std::vector<std::vector<uint8_t>> active_;  // indexed by t in 0..T
  std::vector<int64_t> counts_;
};

// --- file interface ---------------------------------------------------------
// edges.tsv: src_id  src_kind  dst_id  dst_kind  relation  t    (header line)
// nodes.tsv: node_id  kind  f1,f2,...                           (header line)
// labels.tsv: node_id  label                                     (header line)

GraphStream load_graph(const std::string& edges_path,
                       const std::string& nodes_path,
                       const std::optional<std::string>& labels_path,
                       const Schema& schema);

// canonical serialization; loading then re-serializing is idempotent
void save_graph(const GraphStream& g, const std::string& edges_path,
                const std::string& nodes_path,
                const std::optional<std::string>& labels_path);

// Seeded neighborhood sampling: per newly reached node, per snapshot, per
// relation, per direction, keep at most fanout neighbors (without
// replacement). Runs once before training; the result is materialized.
GraphStream sample_subgraph(const GraphStream& g,
                            const std::vector<int32_t>& seed_users, int hops,
                            int fanout, uint64_t rng_seed);

}  // namespace htgfd
