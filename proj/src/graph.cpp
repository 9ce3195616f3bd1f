#include "htgfd/graph.hpp"

#include "htgfd/rng.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace htgfd {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  for (;;) {
    size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

int64_t parse_int(const std::string& s, const std::string& where) {
  size_t pos = 0;
  int64_t v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    fail(where + ": not an integer: '" + s + "'");
  }
  require(pos == s.size(), where + ": trailing characters in '" + s + "'");
  return v;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// expand symmetric relations into both directions for adjacency
void directed_pairs(const Schema& schema, const EdgeRow& e,
                    std::vector<std::pair<int32_t, int32_t>>& out) {
  out.clear();
  out.emplace_back(e.src, e.dst);
  if (schema.relations[static_cast<size_t>(e.relation)].symmetric &&
      e.src != e.dst)
    out.emplace_back(e.dst, e.src);
}

}  // namespace

GraphStream::GraphStream(Schema schema,
                         std::vector<std::vector<int64_t>> node_ids,
                         Mat<double> user_features,
                         std::vector<int8_t> user_labels,
                         std::vector<EdgeRow> edges, int T)
    : schema_(std::move(schema)),
      T_(T),
      node_ids_(std::move(node_ids)),
      features_(std::move(user_features)),
      labels_(std::move(user_labels)),
      rows_(std::move(edges)) {
  require(T_ >= 1, "graph: T must be at least 1");
  require(static_cast<int>(node_ids_.size()) == schema_.n_kinds(),
          "graph: node table count != kind count");

  kind_offset_.assign(node_ids_.size() + 1, 0);
  dense_.resize(node_ids_.size());
  for (size_t k = 0; k < node_ids_.size(); ++k) {
    kind_offset_[k + 1] =
        kind_offset_[k] + static_cast<int32_t>(node_ids_[k].size());
    for (size_t i = 0; i < node_ids_[k].size(); ++i) {
      auto [it, fresh] =
          dense_[k].emplace(node_ids_[k][i], static_cast<int32_t>(i));
      require(fresh, "graph: duplicate node id within kind " +
                          schema_.kinds[k]);
    }
  }
  n_total_ = kind_offset_.back();

  const int32_t n_users = n_nodes(schema_.user_kind);
  require(features_.rows() == n_users, "graph: feature row count mismatch");
  if (labels_.empty()) labels_.assign(static_cast<size_t>(n_users), -1);
  require(static_cast<int32_t>(labels_.size()) == n_users,
          "graph: label count mismatch");

  const int R = schema_.n_relations();
  for (EdgeRow& e : rows_) {
    require(e.t >= 1 && e.t <= T_, "graph: edge timestamp out of range");
    require(e.relation >= 0 && e.relation < R, "graph: bad relation id");
    require(e.src >= 0 && e.src < n_total_ && e.dst >= 0 && e.dst < n_total_,
            "graph: edge endpoint out of range");
    if (schema_.relations[static_cast<size_t>(e.relation)].symmetric &&
        e.dst < e.src)
      std::swap(e.src, e.dst);
  }
  std::sort(rows_.begin(), rows_.end(), [](const EdgeRow& a, const EdgeRow& b) {
    return std::tie(a.t, a.relation, a.src, a.dst) <
           std::tie(b.t, b.relation, b.src, b.dst);
  });
  rows_.erase(std::unique(rows_.begin(), rows_.end(),
                          [](const EdgeRow& a, const EdgeRow& b) {
                            return a.t == b.t && a.relation == b.relation &&
                                   a.src == b.src && a.dst == b.dst;
                          }),
              rows_.end());

  // adjacency tables: slot t*R+r for t in 0..T (0 = union over snapshots)
  const size_t n_slots = static_cast<size_t>((T_ + 1) * R);
  counts_.assign(n_slots, 0);
  std::vector<std::vector<std::pair<int32_t, int32_t>>> fwd(n_slots), rev(n_slots);
  std::vector<std::pair<int32_t, int32_t>> dirs;
  for (const EdgeRow& e : rows_) {
    ++counts_[static_cast<size_t>(e.t * R + e.relation)];
    directed_pairs(schema_, e, dirs);
    for (auto [s, d] : dirs) {
      fwd[static_cast<size_t>(e.t * R + e.relation)].emplace_back(s, d);
      rev[static_cast<size_t>(e.t * R + e.relation)].emplace_back(d, s);
      fwd[static_cast<size_t>(e.relation)].emplace_back(s, d);
      rev[static_cast<size_t>(e.relation)].emplace_back(d, s);
    }
  }
  for (int r = 0; r < R; ++r)
    counts_[static_cast<size_t>(r)] = 0;  // union counts filled below

  auto build_csr = [&](std::vector<std::pair<int32_t, int32_t>>& pairs,
                       bool dedup) {
    std::sort(pairs.begin(), pairs.end());
    if (dedup) pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    Csr csr;
    csr.off.assign(static_cast<size_t>(n_total_) + 1, 0);
    csr.adj.reserve(pairs.size());
    for (auto [s, d] : pairs) {
      ++csr.off[static_cast<size_t>(s) + 1];
      csr.adj.push_back(d);
    }
    for (size_t i = 1; i < csr.off.size(); ++i) csr.off[i] += csr.off[i - 1];
    return csr;
  };

  out_.resize(n_slots);
  in_.resize(n_slots);
  und_.resize(n_slots);
  for (size_t slot = 0; slot < n_slots; ++slot) {
    const bool is_union = slot < static_cast<size_t>(R);
    if (is_union)
      counts_[slot] = 0;
    auto und_pairs = fwd[slot];
    und_pairs.insert(und_pairs.end(), rev[slot].begin(), rev[slot].end());
    out_[slot] = build_csr(fwd[slot], is_union);
    in_[slot] = build_csr(rev[slot], is_union);
    und_[slot] = build_csr(und_pairs, true);
    if (is_union)
      counts_[slot] = static_cast<int64_t>(out_[slot].adj.size());
  }

  // per-t any-relation user neighborhoods and activity flags
  user_nbr_.resize(static_cast<size_t>(T_) + 1);
  active_.assign(static_cast<size_t>(T_) + 1,
                 std::vector<uint8_t>(static_cast<size_t>(n_total_), 0));
  for (int t = 0; t <= T_; ++t) {
    std::vector<std::pair<int32_t, int32_t>> pairs;
    for (int r = 0; r < R; ++r) {
      const Csr& u = und_[static_cast<size_t>(t * R + r)];
      for (int32_t g = 0; g < n_total_; ++g) {
        for (int64_t i = u.off[static_cast<size_t>(g)];
             i < u.off[static_cast<size_t>(g) + 1]; ++i) {
          active_[static_cast<size_t>(t)][static_cast<size_t>(g)] = 1;
          if (is_user(u.adj[static_cast<size_t>(i)]))
            pairs.emplace_back(g, u.adj[static_cast<size_t>(i)]);
        }
      }
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    Csr csr;
    csr.off.assign(static_cast<size_t>(n_total_) + 1, 0);
    csr.adj.reserve(pairs.size());
    for (auto [s, d] : pairs) {
      ++csr.off[static_cast<size_t>(s) + 1];
      csr.adj.push_back(d);
    }
    for (size_t i = 1; i < csr.off.size(); ++i) csr.off[i] += csr.off[i - 1];
    user_nbr_[static_cast<size_t>(t)] = std::move(csr);
  }
}

NodeRef GraphStream::node(int32_t gid) const {
  require(gid >= 0 && gid < n_total_, "graph: gid out of range");
  int k = 0;
  while (gid >= kind_offset_[static_cast<size_t>(k) + 1]) ++k;
  return NodeRef{k, gid - kind_offset_[static_cast<size_t>(k)]};
}

int32_t GraphStream::dense_id(int kind, int64_t orig) const {
  const auto& m = dense_[static_cast<size_t>(kind)];
  auto it = m.find(orig);
  return it == m.end() ? -1 : it->second;
}

std::span<const int32_t> GraphStream::csr_span(const std::vector<Csr>& table,
                                               int t, int relation,
                                               int32_t gid) const {
  require(t >= 0 && t <= T_, "graph: snapshot index out of range");
  require(relation >= 0 && relation < schema_.n_relations(),
          "graph: relation out of range");
  require(gid >= 0 && gid < n_total_, "graph: gid out of range");
  const Csr& c = table[static_cast<size_t>(t * schema_.n_relations() + relation)];
  const int64_t a = c.off[static_cast<size_t>(gid)];
  const int64_t b = c.off[static_cast<size_t>(gid) + 1];
  return {c.adj.data() + a, static_cast<size_t>(b - a)};
}

std::span<const int32_t> GraphStream::user_neighbors(int t, int32_t gid) const {
  require(t >= 0 && t <= T_, "graph: snapshot index out of range");
  const Csr& c = user_nbr_[static_cast<size_t>(t)];
  const int64_t a = c.off[static_cast<size_t>(gid)];
  const int64_t b = c.off[static_cast<size_t>(gid) + 1];
  return {c.adj.data() + a, static_cast<size_t>(b - a)};
}

bool GraphStream::active(int t, int32_t gid) const {
  require(t >= 0 && t <= T_, "graph: snapshot index out of range");
  require(gid >= 0 && gid < n_total_, "graph: gid out of range");
  return active_[static_cast<size_t>(t)][static_cast<size_t>(gid)] != 0;
}

std::vector<std::pair<NodeRef, int>> GraphStream::out_neighbors(
    int t, NodeRef n, std::optional<int> relation) const {
  require(t >= 1 && t <= T_, "out_neighbors: snapshot index out of range");
  require(n.kind >= 0 && n.kind < schema_.n_kinds() && n.id >= 0 &&
              n.id < n_nodes(n.kind),
          "out_neighbors: unknown node");
  std::vector<std::pair<NodeRef, int>> res;
  const int R = schema_.n_relations();
  std::vector<std::pair<int32_t, int>> collected;
  for (int r = 0; r < R; ++r) {
    if (relation && *relation != r) continue;
    for (int32_t g : out_gids(t, r, gid(n))) collected.emplace_back(g, r);
  }
  std::sort(collected.begin(), collected.end());
  for (auto [g, r] : collected) res.emplace_back(node(g), t);
  return res;
}

std::vector<std::pair<NodeRef, int>> GraphStream::in_neighbors(
    int t, NodeRef n, std::optional<int> relation) const {
  require(t >= 1 && t <= T_, "in_neighbors: snapshot index out of range");
  require(n.kind >= 0 && n.kind < schema_.n_kinds() && n.id >= 0 &&
              n.id < n_nodes(n.kind),
          "in_neighbors: unknown node");
  std::vector<std::pair<NodeRef, int>> res;
  const int R = schema_.n_relations();
  std::vector<std::pair<int32_t, int>> collected;
  for (int r = 0; r < R; ++r) {
    if (relation && *relation != r) continue;
    for (int32_t g : in_gids(t, r, gid(n))) collected.emplace_back(g, r);
  }
  std::sort(collected.begin(), collected.end());
  for (auto [g, r] : collected) res.emplace_back(node(g), t);
  return res;
}

std::vector<GraphStream::OutEdge> GraphStream::out_edges_over_time(
    int32_t ugid) const {
  std::vector<OutEdge> res;
  for (int t = 1; t <= T_; ++t)
    for (int r = 0; r < schema_.n_relations(); ++r)
      for (int32_t d : out_gids(t, r, ugid)) res.push_back({t, r, d});
  std::sort(res.begin(), res.end(), [](const OutEdge& a, const OutEdge& b) {
    return std::tie(a.t, a.dst, a.relation) < std::tie(b.t, b.dst, b.relation);
  });
  return res;
}

// --- loading -----------------------------------------------------------------

GraphStream load_graph(const std::string& edges_path,
                       const std::string& nodes_path,
                       const std::optional<std::string>& labels_path,
                       const Schema& schema) {
  // pass 1: nodes
  std::ifstream nf(nodes_path);
  require(nf.good(), "cannot open " + nodes_path);
  std::vector<std::vector<int64_t>> node_ids(
      static_cast<size_t>(schema.n_kinds()));
  std::vector<std::vector<double>> feat_rows;
  std::vector<std::unordered_map<int64_t, int32_t>> seen(
      static_cast<size_t>(schema.n_kinds()));
  std::unordered_map<int64_t, int> id_kind;  // detect cross-kind conflicts
  std::string line;
  int lineno = 0;
  int d_in = -1;
  while (std::getline(nf, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;  // header
    auto cols = split_tabs(line);
    require(cols.size() == 3,
            nodes_path + ":" + std::to_string(lineno) + ": expected 3 columns");
    const int64_t id = parse_int(cols[0], nodes_path + ":" + std::to_string(lineno));
    const int kind = schema.kind_id(cols[1]);
    require(kind >= 0, nodes_path + ":" + std::to_string(lineno) +
                           ": unknown kind '" + cols[1] + "'");
    auto prev = id_kind.find(id);
    if (prev != id_kind.end())
      require(prev->second == kind,
              nodes_path + ":" + std::to_string(lineno) + ": node id " +
                  cols[0] + " re-declared with conflicting kind");
    id_kind.emplace(id, kind);
    require(seen[static_cast<size_t>(kind)].emplace(id, 0).second,
            nodes_path + ":" + std::to_string(lineno) + ": duplicate node id");
    node_ids[static_cast<size_t>(kind)].push_back(id);
    if (kind == schema.user_kind) {
      std::vector<double> feats;
      std::stringstream ss(cols[2]);
      std::string tok;
      while (std::getline(ss, tok, ','))
        if (!tok.empty()) {
          try {
            feats.push_back(std::stod(tok));
          } catch (const std::exception&) {
            fail(nodes_path + ":" + std::to_string(lineno) +
                 ": bad feature value '" + tok + "'");
          }
        }
      require(!feats.empty(), nodes_path + ":" + std::to_string(lineno) +
                                  ": user node without features");
      if (d_in < 0) d_in = static_cast<int>(feats.size());
      require(static_cast<int>(feats.size()) == d_in,
              nodes_path + ":" + std::to_string(lineno) +
                  ": inconsistent feature arity");
      feat_rows.push_back(std::move(feats));
    } else {
      require(cols[2].empty(), nodes_path + ":" + std::to_string(lineno) +
                                   ": only " +
                                   schema.kinds[static_cast<size_t>(
                                       schema.user_kind)] +
                                   " nodes may carry features");
    }
  }
  require(d_in > 0, nodes_path + ": no user nodes declared");

  Mat<double> features(static_cast<Index>(feat_rows.size()), d_in);
  for (size_t i = 0; i < feat_rows.size(); ++i)
    for (int j = 0; j < d_in; ++j)
      features(static_cast<Index>(i), j) = feat_rows[i][static_cast<size_t>(j)];

  std::vector<std::unordered_map<int64_t, int32_t>> dense(
      static_cast<size_t>(schema.n_kinds()));
  for (size_t k = 0; k < node_ids.size(); ++k)
    for (size_t i = 0; i < node_ids[k].size(); ++i)
      dense[k].emplace(node_ids[k][i], static_cast<int32_t>(i));
  std::vector<int32_t> offset(static_cast<size_t>(schema.n_kinds()) + 1, 0);
  for (size_t k = 0; k < node_ids.size(); ++k)
    offset[k + 1] = offset[k] + static_cast<int32_t>(node_ids[k].size());

  // pass 2: edges
  std::ifstream ef(edges_path);
  require(ef.good(), "cannot open " + edges_path);
  std::vector<EdgeRow> edges;
  int T = 0;
  lineno = 0;
  while (std::getline(ef, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    auto cols = split_tabs(line);
    const std::string where = edges_path + ":" + std::to_string(lineno);
    require(cols.size() == 6, where + ": expected 6 columns");
    const int sk = schema.kind_id(cols[1]);
    const int dk = schema.kind_id(cols[3]);
    require(sk >= 0, where + ": unknown kind '" + cols[1] + "'");
    require(dk >= 0, where + ": unknown kind '" + cols[3] + "'");
    const int r = schema.relation_id(cols[4]);
    require(r >= 0, where + ": unknown relation '" + cols[4] + "'");
    const auto& spec = schema.relations[static_cast<size_t>(r)];
    const bool ok_fwd = sk == spec.src_kind && dk == spec.dst_kind;
    const bool ok_sym = spec.symmetric && sk == spec.dst_kind && dk == spec.src_kind;
    require(ok_fwd || ok_sym,
            where + ": relation " + spec.name + " does not join " + cols[1] +
                " -> " + cols[3]);
    const int64_t sid = parse_int(cols[0], where);
    const int64_t did = parse_int(cols[2], where);
    const int64_t t = parse_int(cols[5], where);
    require(t >= 1, where + ": timestamp out of range (must be >= 1)");
    auto si = dense[static_cast<size_t>(sk)].find(sid);
    require(si != dense[static_cast<size_t>(sk)].end(),
            where + ": undeclared source node " + cols[0]);
    auto di = dense[static_cast<size_t>(dk)].find(did);
    require(di != dense[static_cast<size_t>(dk)].end(),
            where + ": undeclared target node " + cols[2]);
    EdgeRow e;
    e.t = static_cast<int>(t);
    e.relation = r;
    e.src = offset[static_cast<size_t>(sk)] + si->second;
    e.dst = offset[static_cast<size_t>(dk)] + di->second;
    if (spec.symmetric && e.dst < e.src) std::swap(e.src, e.dst);  // canonical
    T = std::max(T, e.t);
    edges.push_back(e);
  }
  require(!edges.empty(), edges_path + ": no edges");

  // pass 3: labels
  std::vector<int8_t> labels;
  if (labels_path) {
    labels.assign(node_ids[static_cast<size_t>(schema.user_kind)].size(), -1);
    std::ifstream lf(*labels_path);
    require(lf.good(), "cannot open " + *labels_path);
    lineno = 0;
    while (std::getline(lf, line)) {
      ++lineno;
      if (lineno == 1 || line.empty()) continue;
      auto cols = split_tabs(line);
      const std::string where = *labels_path + ":" + std::to_string(lineno);
      require(cols.size() == 2, where + ": expected 2 columns");
      const int64_t id = parse_int(cols[0], where);
      const int64_t lab = parse_int(cols[1], where);
      require(lab == 0 || lab == 1, where + ": label must be 0 or 1");
      auto it = dense[static_cast<size_t>(schema.user_kind)].find(id);
      require(it != dense[static_cast<size_t>(schema.user_kind)].end(),
              where + ": label for undeclared user " + cols[0]);
      labels[static_cast<size_t>(it->second)] = static_cast<int8_t>(lab);
    }
  }

  GraphStream g(schema, std::move(node_ids), std::move(features),
                std::move(labels), std::move(edges), T);

  std::cerr << "loaded graph: T=" << g.T();
  for (int k = 0; k < g.schema().n_kinds(); ++k)
    std::cerr << " " << g.schema().kinds[static_cast<size_t>(k)] << "="
              << g.n_nodes(k);
  std::cerr << " edge_rows=" << g.n_edge_rows() << "\n";
  return g;
}

void save_graph(const GraphStream& g, const std::string& edges_path,
                const std::string& nodes_path,
                const std::optional<std::string>& labels_path) {
  const Schema& schema = g.schema();
  {
    std::ofstream nf(nodes_path);
    require(nf.good(), "cannot write " + nodes_path);
    nf << "node_id\tkind\tfeatures\n";
    for (int k = 0; k < schema.n_kinds(); ++k) {
      for (int32_t i = 0; i < g.n_nodes(k); ++i) {
        nf << g.orig_id({k, i}) << '\t' << schema.kinds[static_cast<size_t>(k)]
           << '\t';
        if (k == schema.user_kind) {
          const auto& f = g.user_features();
          for (Index c = 0; c < f.cols(); ++c) {
            if (c) nf << ',';
            nf << fmt_double(f(i, c));
          }
        }
        nf << '\n';
      }
    }
  }
  {
    std::ofstream ef(edges_path);
    require(ef.good(), "cannot write " + edges_path);
    ef << "src_id\tsrc_kind\tdst_id\tdst_kind\trelation\tt\n";
    for (const EdgeRow& e : g.edge_rows()) {
      NodeRef s = g.node(e.src), d = g.node(e.dst);
      ef << g.orig_id(s) << '\t' << schema.kinds[static_cast<size_t>(s.kind)]
         << '\t' << g.orig_id(d) << '\t'
         << schema.kinds[static_cast<size_t>(d.kind)] << '\t'
         << schema.relations[static_cast<size_t>(e.relation)].name << '\t'
         << e.t << '\n';
    }
  }
  if (labels_path) {
    std::ofstream lf(*labels_path);
    require(lf.good(), "cannot write " + *labels_path);
    lf << "node_id\tlabel\n";
    for (int32_t i = 0; i < g.n_users(); ++i) {
      int8_t lab = g.labels()[static_cast<size_t>(i)];
      if (lab < 0) continue;
      lf << g.orig_id({schema.user_kind, i}) << '\t' << int(lab) << '\n';
    }
  }
}

GraphStream sample_subgraph(const GraphStream& g,
                            const std::vector<int32_t>& seed_users, int hops,
                            int fanout, uint64_t rng_seed) {
  require(!seed_users.empty(), "sample_subgraph: empty seed set");
  require(hops >= 1, "sample_subgraph: hops must be >= 1");
  require(fanout >= 1, "sample_subgraph: fanout must be >= 1");

  const int R = g.n_relations();
  std::vector<uint8_t> visited(static_cast<size_t>(g.n_total()), 0);
  std::vector<int32_t> frontier;
  for (int32_t u : seed_users) {
    int32_t gid = g.user_gid(u);
    if (!visited[static_cast<size_t>(gid)]) {
      visited[static_cast<size_t>(gid)] = 1;
      frontier.push_back(gid);
    }
  }
  std::sort(frontier.begin(), frontier.end());

  std::set<std::tuple<int, int, int32_t, int32_t>> kept;  // (t, r, src, dst)
  auto keep = [&](int t, int r, int32_t src, int32_t dst) {
    if (g.schema().relations[static_cast<size_t>(r)].symmetric && dst < src)
      std::swap(src, dst);
    kept.emplace(t, r, src, dst);
  };

  for (int hop = 0; hop < hops && !frontier.empty(); ++hop) {
    std::vector<int32_t> next;
    for (int32_t x : frontier) {
      for (int t = 1; t <= g.T(); ++t) {
        for (int r = 0; r < R; ++r) {
          for (int dir = 0; dir < 2; ++dir) {
            auto nbrs = dir == 0 ? g.out_gids(t, r, x) : g.in_gids(t, r, x);
            if (nbrs.empty()) continue;
            std::vector<int32_t> chosen;
            if (static_cast<int>(nbrs.size()) <= fanout) {
              chosen.assign(nbrs.begin(), nbrs.end());
            } else {
              Rng rng(Rng::mix({rng_seed, static_cast<uint64_t>(x),
                                static_cast<uint64_t>(t),
                                static_cast<uint64_t>(r),
                                static_cast<uint64_t>(dir)}));
              for (int32_t i :
                   rng.sample_indices(static_cast<int32_t>(nbrs.size()), fanout))
                chosen.push_back(nbrs[static_cast<size_t>(i)]);
              std::sort(chosen.begin(), chosen.end());
            }
            for (int32_t v : chosen) {
              if (dir == 0)
                keep(t, r, x, v);
              else
                keep(t, r, v, x);
              if (!visited[static_cast<size_t>(v)]) {
                visited[static_cast<size_t>(v)] = 1;
                next.push_back(v);
              }
            }
          }
        }
      }
    }
    std::sort(next.begin(), next.end());
    frontier = std::move(next);
  }

  std::vector<EdgeRow> edges;
  edges.reserve(kept.size());
  for (const auto& [t, r, s, d] : kept) edges.push_back({t, r, s, d});

  std::vector<std::vector<int64_t>> node_ids(
      static_cast<size_t>(g.schema().n_kinds()));
  for (int k = 0; k < g.schema().n_kinds(); ++k)
    for (int32_t i = 0; i < g.n_nodes(k); ++i)
      node_ids[static_cast<size_t>(k)].push_back(g.orig_id({k, i}));

  return GraphStream(g.schema(), std::move(node_ids), g.user_features(),
                     g.labels(), std::move(edges), g.T());
}

}  // namespace htgfd
