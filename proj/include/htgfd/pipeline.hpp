#pragma once

#include "htgfd/graph.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace htgfd {

// Resolved training/detection configuration. Defaults follow the reference
// hyperparameters (width 64, batch 256, learning rate 1e-3, ratios 0.4,
// temperature 0.2, at most 10 relation sequences of length <= 32 per user,
// 8:1:1 split, early stopping on validation AUC).
struct TrainConfig {
  int f = 64;
  int batch = 256;
  double lr = 0.001;
  double gamma = 0.4;
  double alpha = 0.4;
  double tau = 0.2;
  int l_max = 32;
  int max_urs = 10;
  double split_train = 0.8;
  double split_val = 0.1;
  uint64_t seed = 1;
  int max_epochs = 200;
  int patience = 10;
  int steps_per_epoch = 0;  // 0 covers the training pool each epoch
  int hops = 2;
  int fanout = 10;
  std::string precision = "f32";  // f32 for training, f64 for verification
  bool contrastive = true;        // the self-supervised term in pretraining
  double lambda = 1.0;
  bool use_tss = true;   // detect-phase wiring: zero-fill when off
  bool use_urs = true;
  bool raw_inputs = false;  // detect encoder over raw attributes (baseline)

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct Split {
  std::vector<int32_t> train, val, test;  // dense user ids, labeled only
  std::vector<int32_t> unlabeled;
};

// seeded shuffle of the labeled users into train/val/test
Split make_split(const GraphStream& g, const TrainConfig& cfg);

// the materialized pre-training view: every user seeded, per-node degree caps
GraphStream make_training_view(const GraphStream& g, const TrainConfig& cfg);

enum class Component { kTss, kUrs, kDetect };
const char* component_name(Component c);

struct PretrainResult {
  std::string ckpt_stem;
  nlohmann::json history;  // per-epoch losses and validation AUC
  double best_val_auc = 0.0;
  int epochs_run = 0;
};

// Train one component and write <out_dir>/<component>.{json,bin} plus a run
// manifest. The detect component consumes the frozen tss/urs checkpoints in
// out_dir according to cfg wiring (or raw attributes when cfg.raw_inputs).
PretrainResult pretrain_component(Component c, const GraphStream& g,
                                  const TrainConfig& cfg,
                                  const std::string& out_dir);

struct DetectionRecord {
  int32_t user = -1;          // dense user id
  double score = 0.0;
  int predicted = 0;          // score > 0.5
  std::vector<double> h_seq_temp, h_seq_rel, h0;
};

// Score users with the frozen checkpoints in ckpt_dir. Unknown users are
// reported in `errors` and skipped; the batch continues.
struct DetectOutput {
  std::vector<DetectionRecord> records;
  std::vector<std::string> errors;
};

// configuration comes from the checkpoint directory's meta file
DetectOutput detect_users(const GraphStream& g, const std::string& ckpt_dir,
                          const std::vector<int64_t>& user_orig_ids);

void write_detections_tsv(const GraphStream& g,
                          const std::vector<DetectionRecord>& records,
                          const std::string& path);

// final detection-phase embeddings for every user (row = dense user id)
Mat<double> export_user_embeddings(const GraphStream& g,
                                   const std::string& ckpt_dir);

// reciprocal-Euclidean-distance neighborhood report around one user
nlohmann::json explain_user(const GraphStream& g, const std::string& ckpt_dir,
                            int64_t user_orig_id, int hops);

}  // namespace htgfd
