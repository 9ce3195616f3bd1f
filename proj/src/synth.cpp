#include "htgfd/synth.hpp"

#include "htgfd/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <tuple>

namespace htgfd {

namespace {

int poisson(Rng& rng, double mean) {
  const double l = std::exp(-mean);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= rng.real01();
  } while (p > l);
  return k - 1;
}

struct EdgeSet {
  // canonical rows; symmetric relations stored min-gid first
  std::set<std::tuple<int, int, int32_t, int32_t>> rows;
  const Schema* schema;

  void add(int t, int r, int32_t src, int32_t dst) {
    if (schema->relations[static_cast<size_t>(r)].symmetric && dst < src)
      std::swap(src, dst);
    rows.emplace(t, r, src, dst);
  }
};

}  // namespace

nlohmann::json SynthConfig::to_json() const {
  return {{"n_users", n_users},
          {"fraud_fraction", fraud_fraction},
          {"n_groups", n_groups},
          {"n_devices", n_devices},
          {"t_snapshots", t_snapshots},
          {"seed", seed},
          {"label_noise", label_noise},
          {"ring_size", ring_size},
          {"add_burst", add_burst},
          {"pull_count", pull_count},
          {"send_count", send_count},
          {"transfer_count", transfer_count},
          {"victims_per_ring", victims_per_ring},
          {"normal_actions_mean", normal_actions_mean},
          {"power_user_fraction", power_user_fraction},
          {"power_actions_mean", power_actions_mean},
          {"attr_probs_fraud", attr_probs_fraud},
          {"attr_probs_normal", attr_probs_normal}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.n_users = j.value("n_users", c.n_users);
  c.fraud_fraction = j.value("fraud_fraction", c.fraud_fraction);
  c.n_groups = j.value("n_groups", c.n_groups);
  c.n_devices = j.value("n_devices", c.n_devices);
  c.t_snapshots = j.value("t_snapshots", c.t_snapshots);
  c.seed = j.value("seed", c.seed);
  c.label_noise = j.value("label_noise", c.label_noise);
  c.ring_size = j.value("ring_size", c.ring_size);
  c.add_burst = j.value("add_burst", c.add_burst);
  c.pull_count = j.value("pull_count", c.pull_count);
  c.send_count = j.value("send_count", c.send_count);
  c.transfer_count = j.value("transfer_count", c.transfer_count);
  c.victims_per_ring = j.value("victims_per_ring", c.victims_per_ring);
  c.normal_actions_mean = j.value("normal_actions_mean", c.normal_actions_mean);
  c.power_user_fraction = j.value("power_user_fraction", c.power_user_fraction);
  c.power_actions_mean = j.value("power_actions_mean", c.power_actions_mean);
  if (j.contains("attr_probs_fraud"))
    c.attr_probs_fraud = j.at("attr_probs_fraud").get<std::vector<double>>();
  if (j.contains("attr_probs_normal"))
    c.attr_probs_normal = j.at("attr_probs_normal").get<std::vector<double>>();
  return c;
}

SynthResult generate_synthetic(const SynthConfig& cfg,
                               const std::string& out_dir) {
  require(cfg.n_users >= 10, "synth: need at least 10 users");
  require(cfg.fraud_fraction >= 0.0 && cfg.fraud_fraction <= 1.0,
          "synth: fraud_fraction must lie in [0,1]");
  require(cfg.label_noise >= 0.0 && cfg.label_noise <= 1.0,
          "synth: label_noise must lie in [0,1]");
  require(cfg.t_snapshots >= 12, "synth: the fraud script needs T >= 12");
  require(cfg.pull_count <= cfg.n_users,
          "synth: pull_count exceeds the user population");
  require(cfg.attr_probs_fraud.size() == cfg.attr_probs_normal.size() &&
              !cfg.attr_probs_fraud.empty(),
          "synth: attribute probability vectors disagree");

  const int32_t n_users = static_cast<int32_t>(cfg.n_users);
  const int32_t n_fraud =
      static_cast<int32_t>(std::llround(cfg.fraud_fraction * cfg.n_users));
  const int T = cfg.t_snapshots;
  const Schema schema = Schema::mmma();

  Rng rng(Rng::mix({cfg.seed, 0xC0FFEEull}));

  // class assignment over shuffled user ids
  std::vector<int32_t> order(static_cast<size_t>(n_users));
  for (int32_t i = 0; i < n_users; ++i) order[static_cast<size_t>(i)] = i;
  rng.shuffle(order);
  std::vector<uint8_t> is_fraud(static_cast<size_t>(n_users), 0);
  std::vector<int32_t> fraudsters(order.begin(), order.begin() + n_fraud);
  std::sort(fraudsters.begin(), fraudsters.end());
  for (int32_t f : fraudsters) is_fraud[static_cast<size_t>(f)] = 1;
  std::vector<int32_t> normals;
  normals.reserve(static_cast<size_t>(n_users - n_fraud));
  for (int32_t u = 0; u < n_users; ++u)
    if (!is_fraud[static_cast<size_t>(u)]) normals.push_back(u);
  require(!normals.empty(), "synth: no normal users left");

  const int n_rings =
      n_fraud == 0 ? 0 : (n_fraud + cfg.ring_size - 1) / cfg.ring_size;
  require(cfg.n_groups > n_rings, "synth: not enough groups for fraud rings");
  require(cfg.n_devices > 2 * n_rings,
          "synth: not enough devices for fraud rings");
  require(cfg.victims_per_ring <= static_cast<int>(normals.size()),
          "synth: victims_per_ring exceeds the normal population");

  // power users among normals
  std::vector<uint8_t> is_power(static_cast<size_t>(n_users), 0);
  {
    std::vector<int32_t> pool = normals;
    rng.shuffle(pool);
    const size_t n_power = static_cast<size_t>(
        std::llround(cfg.power_user_fraction * static_cast<double>(n_users)));
    for (size_t i = 0; i < std::min(n_power, pool.size()); ++i)
      is_power[static_cast<size_t>(pool[i])] = 1;
  }

  // node universe: users, groups, devices with dense ids
  const int32_t n_groups = static_cast<int32_t>(cfg.n_groups);
  const int32_t n_devices = static_cast<int32_t>(cfg.n_devices);
  auto user_gid = [&](int32_t u) { return u; };
  auto group_gid = [&](int32_t g) { return n_users + g; };
  auto device_gid = [&](int32_t d) { return n_users + n_groups + d; };

  // ring resources come first in the group/device tables
  EdgeSet edges;
  edges.schema = &schema;

  // per-user home devices (1-2) for background logins
  std::vector<std::array<int32_t, 2>> home(static_cast<size_t>(n_users));
  const int32_t first_free_device = 2 * n_rings;
  for (int32_t u = 0; u < n_users; ++u) {
    Rng r(Rng::mix({cfg.seed, 0xD1CEull, static_cast<uint64_t>(u)}));
    int32_t d0 = first_free_device +
                 static_cast<int32_t>(r.below(static_cast<uint64_t>(
                     std::max<int32_t>(1, n_devices - first_free_device))));
    int32_t d1 = first_free_device +
                 static_cast<int32_t>(r.below(static_cast<uint64_t>(
                     std::max<int32_t>(1, n_devices - first_free_device))));
    home[static_cast<size_t>(u)] = {d0, d1};
  }

  // --- normal background: sparse, temporally diffuse -----------------------
  const int32_t first_free_group = n_rings;
  for (int32_t u = 0; u < n_users; ++u) {
    if (is_fraud[static_cast<size_t>(u)]) continue;
    Rng r(Rng::mix({cfg.seed, 0xBEEFull, static_cast<uint64_t>(u)}));
    const double mean = is_power[static_cast<size_t>(u)]
                            ? cfg.power_actions_mean
                            : cfg.normal_actions_mean;
    int count = poisson(r, mean);
    for (int a = 0; a < count; ++a) {
      const int t = 1 + static_cast<int>(r.below(static_cast<uint64_t>(T)));
      const double roll = r.real01();
      if (roll < 0.40) {
        // befriend another non-fraud user
        int32_t v = normals[static_cast<size_t>(
            r.below(static_cast<uint64_t>(normals.size())))];
        if (v != u) edges.add(t, schema.relation_id("ADD"), user_gid(u), user_gid(v));
      } else if (roll < 0.60) {
        int32_t g = first_free_group +
                    static_cast<int32_t>(r.below(static_cast<uint64_t>(
                        n_groups - first_free_group)));
        edges.add(t, schema.relation_id("ENTER"), user_gid(u), group_gid(g));
      } else if (roll < 0.75) {
        int32_t d = home[static_cast<size_t>(u)][r.below(2)];
        edges.add(t, schema.relation_id("LOGIN"), user_gid(u), device_gid(d));
      } else if (roll < 0.83) {
        int32_t g = first_free_group +
                    static_cast<int32_t>(r.below(static_cast<uint64_t>(
                        n_groups - first_free_group)));
        edges.add(t, schema.relation_id("SEND"), user_gid(u), group_gid(g));
      } else if (roll < 0.93) {
        int32_t v = normals[static_cast<size_t>(
            r.below(static_cast<uint64_t>(normals.size())))];
        if (v != u)
          edges.add(t, schema.relation_id("TRANSFER"), user_gid(u), user_gid(v));
      } else if (roll < 0.97) {
        int32_t g = first_free_group +
                    static_cast<int32_t>(r.below(static_cast<uint64_t>(
                        n_groups - first_free_group)));
        edges.add(t, schema.relation_id("CREATE"), user_gid(u), group_gid(g));
      } else {
        int32_t v = normals[static_cast<size_t>(
            r.below(static_cast<uint64_t>(normals.size())))];
        if (v != u) edges.add(t, schema.relation_id("PULL"), user_gid(u), user_gid(v));
      }
    }
  }

  // --- fraud rings: the scripted playbook ----------------------------------
  for (int ring = 0; ring < n_rings; ++ring) {
    Rng r(Rng::mix({cfg.seed, 0xF00Dull, static_cast<uint64_t>(ring)}));
    std::vector<int32_t> members;
    for (int i = ring * cfg.ring_size;
         i < std::min<int>((ring + 1) * cfg.ring_size, n_fraud); ++i)
      members.push_back(fraudsters[static_cast<size_t>(i)]);
    if (members.empty()) continue;

    const int t0 = 1 + static_cast<int>(r.below(3));  // script start day
    const int32_t g_ring = ring;                      // dedicated group
    const int32_t dev_a = 2 * ring, dev_b = 2 * ring + 1;

    // victims for this ring
    std::vector<int32_t> victims;
    {
      auto idx = r.sample_indices(static_cast<int32_t>(normals.size()),
                                  cfg.victims_per_ring);
      for (int32_t i : idx) victims.push_back(normals[static_cast<size_t>(i)]);
    }

    // phase A (t0..t0+1): friend-request burst, group creation, logins
    edges.add(t0, schema.relation_id("CREATE"), user_gid(members[0]),
              group_gid(g_ring));
    for (size_t mi = 0; mi < members.size(); ++mi) {
      const int32_t f = members[mi];
      edges.add(t0 + (mi % 2 ? 1 : 0), schema.relation_id("ENTER"),
                user_gid(f), group_gid(g_ring));
      for (int a = 0; a < cfg.add_burst; ++a) {
        int32_t v = victims[static_cast<size_t>(
            r.below(static_cast<uint64_t>(victims.size())))];
        edges.add(t0 + static_cast<int>(r.below(2)), schema.relation_id("ADD"),
                  user_gid(f), user_gid(v));
      }
      // shared ring devices across the whole campaign
      for (int day = t0; day <= std::min(T, t0 + 9); day += 2 + (mi % 2))
        edges.add(day, schema.relation_id("LOGIN"), user_gid(f),
                  device_gid(mi % 2 ? dev_b : dev_a));
    }

    // phase B (t0+2..t0+4): invitations; victims join the fraud group
    for (const int32_t f : members) {
      for (int a = 0; a < cfg.pull_count; ++a) {
        int32_t v = victims[static_cast<size_t>(
            r.below(static_cast<uint64_t>(victims.size())))];
        const int t = t0 + 2 + static_cast<int>(r.below(3));
        edges.add(t, schema.relation_id("PULL"), user_gid(f), user_gid(v));
        edges.add(std::min(T, t + static_cast<int>(r.below(2))),
                  schema.relation_id("ENTER"), user_gid(v), group_gid(g_ring));
      }
    }

    // phase C (t0+5..t0+7): bonus packets and small rewards
    for (const int32_t f : members) {
      for (int a = 0; a < cfg.send_count; ++a)
        edges.add(std::min(T, t0 + 5 + static_cast<int>(r.below(3))),
                  schema.relation_id("SEND"), user_gid(f), group_gid(g_ring));
      for (int a = 0; a < cfg.transfer_count / 2; ++a) {
        int32_t v = victims[static_cast<size_t>(
            r.below(static_cast<uint64_t>(victims.size())))];
        edges.add(std::min(T, t0 + 5 + static_cast<int>(r.below(3))),
                  schema.relation_id("TRANSFER"), user_gid(f), user_gid(v));
      }
      // victims pay for the first tasks
      for (int a = 0; a < 2; ++a) {
        int32_t v = victims[static_cast<size_t>(
            r.below(static_cast<uint64_t>(victims.size())))];
        edges.add(std::min(T, t0 + 6 + static_cast<int>(r.below(2))),
                  schema.relation_id("TRANSFER"), user_gid(v), user_gid(f));
      }
    }

    // phase D (t0+8..t0+10): cash-out
    for (const int32_t f : members) {
      for (int a = 0; a < 3; ++a) {
        int32_t v = victims[static_cast<size_t>(
            r.below(static_cast<uint64_t>(victims.size())))];
        edges.add(std::min(T, t0 + 8 + static_cast<int>(r.below(3))),
                  schema.relation_id("TRANSFER"), user_gid(v), user_gid(f));
      }
      for (int a = 0; a < cfg.transfer_count - cfg.transfer_count / 2; ++a) {
        int32_t peer = members[static_cast<size_t>(
            r.below(static_cast<uint64_t>(members.size())))];
        if (peer != f)
          edges.add(std::min(T, t0 + 8 + static_cast<int>(r.below(3))),
                    schema.relation_id("TRANSFER"), user_gid(f),
                    user_gid(peer));
      }
    }
  }

  // --- attributes and labels ------------------------------------------------
  const int d_in = static_cast<int>(cfg.attr_probs_fraud.size());
  Mat<double> features(n_users, d_in);
  for (int32_t u = 0; u < n_users; ++u) {
    Rng r(Rng::mix({cfg.seed, 0xA77Full, static_cast<uint64_t>(u)}));
    const auto& probs = is_fraud[static_cast<size_t>(u)]
                            ? cfg.attr_probs_fraud
                            : cfg.attr_probs_normal;
    for (int j = 0; j < d_in; ++j)
      features(u, j) =
          r.real01() < probs[static_cast<size_t>(j)] ? 1.0 : 0.0;
  }
  std::vector<int8_t> labels(static_cast<size_t>(n_users));
  {
    Rng r(Rng::mix({cfg.seed, 0x7AB5ull}));
    for (int32_t u = 0; u < n_users; ++u) {
      int8_t lab = is_fraud[static_cast<size_t>(u)] ? 1 : 0;
      if (cfg.label_noise > 0.0 && r.real01() < cfg.label_noise) lab ^= 1;
      labels[static_cast<size_t>(u)] = lab;
    }
  }

  std::vector<EdgeRow> rows;
  rows.reserve(edges.rows.size());
  for (const auto& [t, r, s, d] : edges.rows) rows.push_back({t, r, s, d});

  // original ids are globally unique: users, then groups, then devices
  std::vector<std::vector<int64_t>> node_ids(3);
  for (int32_t i = 0; i < n_users; ++i) node_ids[0].push_back(i);
  for (int32_t i = 0; i < n_groups; ++i) node_ids[1].push_back(n_users + i);
  for (int32_t i = 0; i < n_devices; ++i)
    node_ids[2].push_back(n_users + n_groups + i);

  GraphStream g(schema, std::move(node_ids), std::move(features), labels,
                std::move(rows), T);

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  SynthResult res;
  res.edges_path = (fs::path(out_dir) / "edges.tsv").string();
  res.nodes_path = (fs::path(out_dir) / "nodes.tsv").string();
  res.labels_path = (fs::path(out_dir) / "labels.tsv").string();
  res.manifest_path = (fs::path(out_dir) / "manifest.json").string();
  save_graph(g, res.edges_path, res.nodes_path, res.labels_path);

  nlohmann::json manifest;
  manifest["config"] = cfg.to_json();
  manifest["schema"] = schema.to_json();
  auto& counts = manifest["counts"];
  counts["users"] = n_users;
  counts["groups"] = n_groups;
  counts["devices"] = n_devices;
  counts["fraud_users"] = n_fraud;
  counts["edge_rows"] = g.n_edge_rows();
  auto& per_rel = counts["per_relation"];
  for (int r = 0; r < schema.n_relations(); ++r) {
    int64_t n = 0;
    for (int t = 1; t <= T; ++t) n += g.edge_count(t, r);
    per_rel[schema.relations[static_cast<size_t>(r)].name] = n;
  }
  auto& per_t = counts["per_snapshot"] = nlohmann::json::array();
  for (int t = 1; t <= T; ++t) {
    int64_t n = 0;
    for (int r = 0; r < schema.n_relations(); ++r) n += g.edge_count(t, r);
    per_t.push_back(n);
  }
  std::ofstream mf(res.manifest_path);
  require(mf.good(), "cannot write " + res.manifest_path);
  mf << manifest.dump(2) << "\n";
  res.manifest = std::move(manifest);
  return res;
}

}  // namespace htgfd
