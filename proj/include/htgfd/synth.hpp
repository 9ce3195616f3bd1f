#pragma once

#include "htgfd/graph.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace htgfd {

// Generator for labeled MMMA-style heterogeneous temporal graphs. Fraud rings
// follow a scripted four-phase playbook (friend-request burst and group
// creation, victim recruitment, bonus/reward grooming, final cash-out) while
// normal users act sparsely and diffusely over time. A configurable share of
// "power users" matches fraudster activity volume without the temporal
// script, so raw degree alone does not separate the classes.
struct SynthConfig {
  int64_t n_users = 20000;
  double fraud_fraction = 0.05;
  int64_t n_groups = 1200;
  int64_t n_devices = 4000;
  int t_snapshots = 14;
  uint64_t seed = 1;
  double label_noise = 0.0;

  int ring_size = 4;
  int add_burst = 18;        // ADD edges per fraudster in the burst phase
  int pull_count = 10;       // PULL invitations per fraudster
  int send_count = 5;        // bonus packets per fraudster
  int transfer_count = 10;   // money transfers per fraudster
  int victims_per_ring = 24;

  double normal_actions_mean = 6.0;
  double power_user_fraction = 0.05;
  double power_actions_mean = 40.0;

  // Table-1-style binary attribute probabilities per class. Deliberately
  // overlapping: attributes alone should not separate the classes.
  std::vector<double> attr_probs_fraud = {0.7, 0.5, 0.25, 0.3, 0.15, 0.25, 0.2};
  std::vector<double> attr_probs_normal = {0.3, 0.6, 0.4, 0.2, 0.05, 0.10, 0.08};

  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);
};

struct SynthResult {
  nlohmann::json manifest;
  std::string edges_path, nodes_path, labels_path, manifest_path;
};

// Writes edges.tsv, nodes.tsv, labels.tsv and manifest.json into out_dir.
// Same config (including seed) reproduces the files byte for byte.
SynthResult generate_synthetic(const SynthConfig& cfg,
                               const std::string& out_dir);

}  // namespace htgfd
