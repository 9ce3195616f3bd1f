// htgfd: fraud detection over heterogeneous temporal graphs.
//
// Subcommands: generate, pretrain, detect, eval, export-embeddings, explain,
// model-size. Config is a JSON file with "synth", "train" and "model_size"
// sections; command-line flags override the matching leaf keys. Every
// artifact-producing run writes a manifest with the resolved config, the
// seed, and content hashes of its inputs.

#include <CLI11.hpp>

#include "htgfd/graph.hpp"
#include "htgfd/manifest.hpp"
#include "htgfd/metrics.hpp"
#include "htgfd/model_size.hpp"
#include "htgfd/pipeline.hpp"
#include "htgfd/synth.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace htgfd;

namespace {

nlohmann::json load_config_section(const std::string& path,
                                   const std::string& section) {
  if (path.empty()) return nlohmann::json::object();
  nlohmann::json j = read_json(path);
  if (j.contains(section)) return j.at(section);
  return nlohmann::json::object();
}

Schema schema_from_config(const nlohmann::json& cfg) {
  if (cfg.contains("schema")) return Schema::from_json(cfg.at("schema"));
  return Schema::mmma();
}

struct DataPaths {
  std::string edges, nodes, labels;
  explicit DataPaths(const std::string& dir)
      : edges((fs::path(dir) / "edges.tsv").string()),
        nodes((fs::path(dir) / "nodes.tsv").string()),
        labels((fs::path(dir) / "labels.tsv").string()) {}
};

GraphStream load_data_dir(const std::string& dir, const Schema& schema) {
  DataPaths p(dir);
  std::optional<std::string> labels;
  if (fs::exists(p.labels)) labels = p.labels;
  return load_graph(p.edges, p.nodes, labels, schema);
}

// flags write into the JSON section so that config file < flag precedence
// holds for every leaf key
void add_train_flags(CLI::App* cmd, nlohmann::json& sec) {
  auto opt_i = [cmd, &sec](const std::string& key) {
    cmd->add_option_function<int64_t>(
        "--" + key, [&sec, key](int64_t v) { sec[key] = v; });
  };
  auto opt_d = [cmd, &sec](const std::string& key) {
    cmd->add_option_function<double>(
        "--" + key, [&sec, key](double v) { sec[key] = v; });
  };
  auto opt_b = [cmd, &sec](const std::string& key) {
    cmd->add_option_function<bool>(
        "--" + key, [&sec, key](bool v) { sec[key] = v; });
  };
  for (const char* k :
       {"f", "batch", "l_max", "max_urs", "max_epochs", "patience",
        "steps_per_epoch", "hops", "fanout", "seed"})
    opt_i(k);
  for (const char* k : {"lr", "gamma", "alpha", "tau", "lambda", "split_train",
                        "split_val"})
    opt_d(k);
  for (const char* k : {"contrastive", "use_tss", "use_urs", "raw_inputs"})
    opt_b(k);
  cmd->add_option_function<std::string>(
      "--precision", [&sec](const std::string& v) { sec["precision"] = v; });
}

int run(int argc, char** argv) {
  CLI::App app{"fraud detection over heterogeneous temporal graphs"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_path, ckpt_dir, component;
  std::string detections_path, labels_path;
  int64_t user_id = -1;
  int hops = 2;

  // generate ----------------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "write a synthetic benchmark");
  nlohmann::json gen_over = nlohmann::json::object();
  gen->add_option("--config", config_path, "config JSON");
  gen->add_option("--out", out_path, "output directory")->required();
  for (const char* k : {"n_users", "n_groups", "n_devices", "t_snapshots",
                        "seed", "ring_size", "add_burst", "pull_count",
                        "send_count", "transfer_count", "victims_per_ring"})
    gen->add_option_function<int64_t>(
        std::string("--") + k, [&gen_over, k](int64_t v) { gen_over[k] = v; });
  for (const char* k :
       {"fraud_fraction", "label_noise", "normal_actions_mean",
        "power_user_fraction", "power_actions_mean"})
    gen->add_option_function<double>(
        std::string("--") + k, [&gen_over, k](double v) { gen_over[k] = v; });

  // pretrain ----------------------------------------------------------------
  auto* pre = app.add_subcommand("pretrain", "train one component");
  nlohmann::json train_over = nlohmann::json::object();
  pre->add_option("--component", component, "tss | urs | detect")->required();
  pre->add_option("--data", data_dir, "data directory")->required();
  pre->add_option("--config", config_path, "config JSON");
  pre->add_option("--out", ckpt_dir, "checkpoint directory")->required();
  add_train_flags(pre, train_over);

  // detect --------------------------------------------------------------
  auto* det = app.add_subcommand("detect", "score users at threshold 0.5");
  det->add_option("--data", data_dir, "data directory")->required();
  det->add_option("--ckpts", ckpt_dir, "checkpoint directory")->required();
  det->add_option("--out", out_path, "detections TSV")->required();

  // eval ----------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "AUC/KS report from detections");
  ev->add_option("--detections", detections_path, "detections TSV")
      ->required();
  ev->add_option("--labels", labels_path, "labels TSV")->required();
  ev->add_option("--out", out_path, "report JSON")->required();

  // export-embeddings -----------------------------------------------------
  auto* exp = app.add_subcommand("export-embeddings",
                                 "final user embeddings as TSV");
  exp->add_option("--data", data_dir, "data directory")->required();
  exp->add_option("--ckpts", ckpt_dir, "checkpoint directory")->required();
  exp->add_option("--out", out_path, "embedding TSV")->required();

  // explain ---------------------------------------------------------------
  auto* xp = app.add_subcommand("explain",
                                "reciprocal-distance neighborhood report");
  xp->add_option("--data", data_dir, "data directory")->required();
  xp->add_option("--ckpts", ckpt_dir, "checkpoint directory")->required();
  xp->add_option("--user", user_id, "user id")->required();
  xp->add_option("--hops", hops, "neighborhood radius");
  xp->add_option("--out", out_path, "report JSON")->required();

  // model-size --------------------------------------------------------------
  auto* ms = app.add_subcommand("model-size", "closed-form and enumerated "
                                              "parameter counts");
  nlohmann::json ms_over = nlohmann::json::object();
  ms->add_option("--config", config_path, "config JSON");
  for (const char* k : {"relations", "f", "layers", "t_snapshots", "heads",
                        "f_hidden", "cs_blocks", "d_in", "l_max"})
    ms->add_option_function<int64_t>(
        std::string("--") + k, [&ms_over, k](int64_t v) { ms_over[k] = v; });
  ms->add_option("--out", out_path, "also write the report JSON here");

  CLI11_PARSE(app, argc, argv);

  if (*gen) {
    nlohmann::json sec = load_config_section(config_path, "synth");
    sec.update(gen_over);
    SynthConfig cfg = SynthConfig::from_json(sec);
    auto res = generate_synthetic(cfg, out_path);
    nlohmann::json manifest = make_run_manifest(
        "generate", cfg.to_json(),
        config_path.empty() ? std::vector<std::string>{}
                            : std::vector<std::string>{config_path});
    manifest["outputs"] = {res.edges_path, res.nodes_path, res.labels_path,
                           res.manifest_path};
    write_json(manifest, (fs::path(out_path) / "run.json").string());
    std::cout << "wrote " << res.edges_path << "\n";
    return 0;
  }

  if (*pre) {
    nlohmann::json sec = load_config_section(config_path, "train");
    sec.update(train_over);
    TrainConfig cfg = TrainConfig::from_json(sec);
    Component c;
    if (component == "tss")
      c = Component::kTss;
    else if (component == "urs")
      c = Component::kUrs;
    else if (component == "detect")
      c = Component::kDetect;
    else {
      std::cerr << "unknown component '" << component
                << "' (expected tss, urs or detect)\n";
      return 1;
    }
    nlohmann::json synth_sec = load_config_section(config_path, "synth");
    auto g = load_data_dir(data_dir, schema_from_config(synth_sec));
    auto res = pretrain_component(c, g, cfg, ckpt_dir);
    DataPaths paths(data_dir);
    std::vector<std::string> inputs = {paths.edges, paths.nodes};
    if (fs::exists(paths.labels)) inputs.push_back(paths.labels);
    nlohmann::json manifest =
        make_run_manifest("pretrain-" + component, cfg.to_json(), inputs);
    manifest["history"] = res.history;
    manifest["best_val_auc"] = res.best_val_auc;
    manifest["epochs_run"] = res.epochs_run;
    manifest["checkpoint"] = res.ckpt_stem;
    write_json(manifest, res.ckpt_stem + ".run.json");
    std::cout << "component " << component << ": best val AUC "
              << res.best_val_auc << " after " << res.epochs_run
              << " epochs -> " << res.ckpt_stem << "\n";
    return 0;
  }

  if (*det) {
    auto g = load_data_dir(data_dir, Schema::mmma());
    std::vector<int64_t> ids;
    for (int32_t u = 0; u < g.n_users(); ++u)
      ids.push_back(g.orig_id({g.schema().user_kind, u}));
    auto out = detect_users(g, ckpt_dir, ids);
    for (const auto& e : out.errors) std::cerr << "detect: " << e << "\n";
    write_detections_tsv(g, out.records, out_path);
    DataPaths paths(data_dir);
    nlohmann::json manifest = make_run_manifest(
        "detect", nlohmann::json{{"ckpts", ckpt_dir}},
        {paths.edges, paths.nodes,
         (fs::path(ckpt_dir) / "detect.bin").string(),
         (fs::path(ckpt_dir) / "detect.json").string()});
    manifest["outputs"] = {out_path};
    write_json(manifest, out_path + ".manifest.json");
    std::cout << "wrote " << out_path << " (" << out.records.size()
              << " users)\n";
    return 0;
  }

  if (*ev) {
    std::ifstream df(detections_path);
    require(df.good(), "cannot open " + detections_path);
    std::map<int64_t, double> scores_by_id;
    std::string line;
    int lineno = 0;
    while (std::getline(df, line)) {
      ++lineno;
      if (lineno == 1 || line.empty()) continue;
      std::stringstream ss(line);
      std::string id, score, pred;
      std::getline(ss, id, '\t');
      std::getline(ss, score, '\t');
      std::getline(ss, pred, '\t');
      scores_by_id[std::stoll(id)] = std::stod(score);
    }
    std::ifstream lf(labels_path);
    require(lf.good(), "cannot open " + labels_path);
    std::vector<double> scores;
    std::vector<int8_t> labels;
    lineno = 0;
    while (std::getline(lf, line)) {
      ++lineno;
      if (lineno == 1 || line.empty()) continue;
      std::stringstream ss(line);
      std::string id, lab;
      std::getline(ss, id, '\t');
      std::getline(ss, lab, '\t');
      auto it = scores_by_id.find(std::stoll(id));
      if (it == scores_by_id.end()) continue;
      scores.push_back(it->second);
      labels.push_back(static_cast<int8_t>(std::stoi(lab)));
    }
    nlohmann::json report = eval_report(scores, labels);
    write_json(report, out_path);
    std::cout << report.dump(2) << "\n";
    return 0;
  }

  if (*exp) {
    auto g = load_data_dir(data_dir, Schema::mmma());
    Mat<double> emb = export_user_embeddings(g, ckpt_dir);
    std::ofstream out(out_path);
    require(out.good(), "cannot write " + out_path);
    char buf[64];
    for (int32_t u = 0; u < g.n_users(); ++u) {
      out << g.orig_id({g.schema().user_kind, u});
      for (Index c = 0; c < emb.cols(); ++c) {
        std::snprintf(buf, sizeof(buf), "%.9g", emb(u, c));
        out << '\t' << buf;
      }
      out << '\n';
    }
    std::cout << "wrote " << out_path << "\n";
    return 0;
  }

  if (*xp) {
    auto g = load_data_dir(data_dir, Schema::mmma());
    auto report = explain_user(g, ckpt_dir, user_id, hops);
    write_json(report, out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
  }

  if (*ms) {
    nlohmann::json sec = load_config_section(config_path, "model_size");
    sec.update(ms_over);
    ModelSizeArgs args;
    args.relations = sec.value("relations", args.relations);
    args.f = sec.value("f", args.f);
    args.layers = sec.value("layers", args.layers);
    args.t_snapshots = sec.value("t_snapshots", args.t_snapshots);
    args.heads = sec.value("heads", args.heads);
    args.f_hidden = sec.value("f_hidden", args.f_hidden);
    args.cs_blocks = sec.value("cs_blocks", args.cs_blocks);
    args.d_in = sec.value("d_in", args.d_in);
    args.l_max = sec.value("l_max", args.l_max);
    auto rep = model_size(args).to_json();
    std::cout << rep.dump(2) << "\n";
    if (!out_path.empty()) write_json(rep, out_path);
    return 0;
  }

  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
