#include "htgfd/views.hpp"

#include "htgfd/rng.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace htgfd {

namespace fs = std::filesystem;

TssWorld build_tss_world(const GraphStream& g, const ViewParams& p) {
  TssWorld w;
  w.specs.resize(static_cast<size_t>(g.n_users()));
  w.plans.resize(static_cast<size_t>(g.n_users()));
  for (int32_t u = 0; u < g.n_users(); ++u) {
    try {
      w.specs[static_cast<size_t>(u)] = extract_tss_spec(g, u);
    } catch (const std::exception&) {
      ++w.n_skipped;  // absent from every snapshot
      continue;
    }
    w.plans[static_cast<size_t>(u)] = augment_pair(
        *w.specs[static_cast<size_t>(u)], nullptr, -1, p.gamma, p.alpha,
        Rng::mix({p.seed, 0xA46ull, static_cast<uint64_t>(u)}));
  }
  if (w.n_skipped)
    std::cerr << "tss: " << w.n_skipped
              << " users absent from every snapshot were skipped\n";
  return w;
}

UrsWorld build_urs_world(const GraphStream& g, const ViewParams& p) {
  UrsWorld w;
  w.corpus = extract_urs_corpus(g, p.max_urs, p.l_max,
                                Rng::mix({p.seed, 0x0125ull}));
  w.ch = build_corpus_hypergraph(w.corpus);
  w.plans.resize(w.corpus.per_user.size());
  for (size_t u = 0; u < w.corpus.per_user.size(); ++u) {
    for (size_t s = 0; s < w.corpus.per_user[u].size(); ++s) {
      w.plans[u].push_back(augment_pair(
          w.corpus.per_user[u][s], &w.ch, w.ch.edge_of[u][s], p.gamma,
          p.alpha,
          Rng::mix({p.seed, 0xA47ull, static_cast<uint64_t>(u),
                    static_cast<uint64_t>(s)})));
    }
  }
  return w;
}

namespace {

// packed int32 stream
struct Writer {
  std::ofstream out;
  explicit Writer(const std::string& path) : out(path, std::ios::binary) {}
  void i32(int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
  void vec(const std::vector<int32_t>& v) {
    i32(static_cast<int32_t>(v.size()));
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(4 * v.size()));
  }
};

struct Reader {
  std::ifstream in;
  explicit Reader(const std::string& path) : in(path, std::ios::binary) {}
  int32_t i32() {
    int32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  }
  std::vector<int32_t> vec() {
    std::vector<int32_t> v(static_cast<size_t>(i32()));
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(4 * v.size()));
    return v;
  }
  bool ok() const { return in.good(); }
};

void write_plan(Writer& w, const AugmentPlan& plan) {
  w.i32(plan.op == AugmentPlan::Op::kReorder ? 0 : 1);
  w.i32(plan.window_start);
  w.i32(plan.window_len);
  w.i32(plan.substituted);
  w.vec(plan.perm);
  std::vector<int32_t> flat;
  flat.reserve(2 * plan.path.size());
  for (const auto& it : plan.path) {
    flat.push_back(it.gid);
    flat.push_back(it.t);
  }
  w.vec(flat);
}

AugmentPlan read_plan(Reader& r) {
  AugmentPlan plan;
  plan.op = r.i32() == 0 ? AugmentPlan::Op::kReorder
                         : AugmentPlan::Op::kSubstitute;
  plan.window_start = r.i32();
  plan.window_len = r.i32();
  plan.substituted = r.i32();
  plan.perm = r.vec();
  auto flat = r.vec();
  for (size_t i = 0; i + 1 < flat.size(); i += 2)
    plan.path.push_back({flat[i], flat[i + 1]});
  return plan;
}

uint64_t graph_signature(const GraphStream& g) {
  uint64_t h = 1469598103934665603ull;
  auto fold = [&h](uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  fold(static_cast<uint64_t>(g.T()));
  for (int k = 0; k < g.schema().n_kinds(); ++k)
    fold(static_cast<uint64_t>(g.n_nodes(k)));
  for (const auto& e : g.edge_rows()) {
    fold(static_cast<uint64_t>(e.t) << 48 |
         static_cast<uint64_t>(e.relation) << 40 |
         static_cast<uint64_t>(static_cast<uint32_t>(e.src)));
    fold(static_cast<uint64_t>(static_cast<uint32_t>(e.dst)));
  }
  return h;
}

}  // namespace

std::string view_cache_key(const GraphStream& g, const ViewParams& p) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%016llx-g%.4f-a%.4f-m%d-l%d-s%llu",
                static_cast<unsigned long long>(graph_signature(g)), p.gamma,
                p.alpha, p.max_urs, p.l_max,
                static_cast<unsigned long long>(p.seed));
  return buf;
}

std::string cache_dir_from_env() {
  const char* dir = std::getenv("HTGFD_CACHE_DIR");
  return dir ? dir : "";
}

TssWorld cached_tss_world(const GraphStream& g, const ViewParams& p,
                          const std::string& cache_dir) {
  if (cache_dir.empty()) return build_tss_world(g, p);
  const std::string stem =
      (fs::path(cache_dir) / ("tss-" + view_cache_key(g, p))).string();
  if (fs::exists(stem + ".bin")) {
    Reader r(stem + ".bin");
    TssWorld w;
    const int32_t n = r.i32();
    const int32_t T = r.i32();
    if (r.ok() && n == g.n_users() && T == g.T()) {
      w.specs.resize(static_cast<size_t>(n));
      w.plans.resize(static_cast<size_t>(n));
      for (int32_t u = 0; u < n && r.ok(); ++u) {
        if (!r.i32()) {
          ++w.n_skipped;
          continue;
        }
        HistorySpec spec;
        spec.view = ViewKind::TSS;
        spec.owner = u;
        auto mask = r.vec();
        auto present = r.vec();
        spec.mask.assign(mask.begin(), mask.end());
        spec.present.assign(present.begin(), present.end());
        w.specs[static_cast<size_t>(u)] = std::move(spec);
        w.plans[static_cast<size_t>(u)].a = read_plan(r);
        w.plans[static_cast<size_t>(u)].b = read_plan(r);
      }
      if (r.ok()) return w;
    }
    std::cerr << "sequence cache: stale entry " << stem << ", rebuilding\n";
  }
  TssWorld w = build_tss_world(g, p);
  fs::create_directories(cache_dir);
  Writer wr(stem + ".bin");
  wr.i32(g.n_users());
  wr.i32(g.T());
  for (int32_t u = 0; u < g.n_users(); ++u) {
    const auto& spec = w.specs[static_cast<size_t>(u)];
    wr.i32(spec ? 1 : 0);
    if (!spec) continue;
    wr.vec(std::vector<int32_t>(spec->mask.begin(), spec->mask.end()));
    wr.vec(std::vector<int32_t>(spec->present.begin(), spec->present.end()));
    write_plan(wr, w.plans[static_cast<size_t>(u)].a);
    write_plan(wr, w.plans[static_cast<size_t>(u)].b);
  }
  nlohmann::json manifest = {{"kind", "tss"},
                             {"users", g.n_users()},
                             {"t", g.T()},
                             {"skipped", w.n_skipped},
                             {"key", view_cache_key(g, p)}};
  std::ofstream mf(stem + ".json");
  mf << manifest.dump(2) << "\n";
  return w;
}

UrsWorld cached_urs_world(const GraphStream& g, const ViewParams& p,
                          const std::string& cache_dir) {
  if (cache_dir.empty()) return build_urs_world(g, p);
  const std::string stem =
      (fs::path(cache_dir) / ("urs-" + view_cache_key(g, p))).string();
  if (fs::exists(stem + ".bin")) {
    Reader r(stem + ".bin");
    UrsWorld w;
    const int32_t n = r.i32();
    if (r.ok() && n == g.n_users()) {
      w.corpus.per_user.resize(static_cast<size_t>(n));
      w.plans.resize(static_cast<size_t>(n));
      w.corpus.n_borrowed = r.i32();
      w.corpus.n_fallback = r.i32();
      for (int32_t u = 0; u < n && r.ok(); ++u) {
        const int32_t n_seq = r.i32();
        for (int32_t s = 0; s < n_seq; ++s) {
          HistorySpec spec;
          spec.view = ViewKind::URS;
          spec.owner = u;
          spec.borrowed_from = r.i32();
          spec.fallback = r.i32() != 0;
          auto flat = r.vec();
          for (size_t i = 0; i + 1 < flat.size(); i += 2)
            spec.path.push_back({flat[i], flat[i + 1]});
          spec.mask.assign(spec.path.size(), 1);
          w.corpus.per_user[static_cast<size_t>(u)].push_back(std::move(spec));
          AugmentedPairPlan pair;
          pair.a = read_plan(r);
          pair.b = read_plan(r);
          w.plans[static_cast<size_t>(u)].push_back(std::move(pair));
        }
      }
      if (r.ok()) {
        w.ch = build_corpus_hypergraph(w.corpus);
        return w;
      }
    }
    std::cerr << "sequence cache: stale entry " << stem << ", rebuilding\n";
  }
  UrsWorld w = build_urs_world(g, p);
  fs::create_directories(cache_dir);
  Writer wr(stem + ".bin");
  wr.i32(g.n_users());
  wr.i32(static_cast<int32_t>(w.corpus.n_borrowed));
  wr.i32(static_cast<int32_t>(w.corpus.n_fallback));
  for (int32_t u = 0; u < g.n_users(); ++u) {
    const auto& seqs = w.corpus.per_user[static_cast<size_t>(u)];
    wr.i32(static_cast<int32_t>(seqs.size()));
    for (size_t s = 0; s < seqs.size(); ++s) {
      wr.i32(seqs[s].borrowed_from);
      wr.i32(seqs[s].fallback ? 1 : 0);
      std::vector<int32_t> flat;
      for (const auto& it : seqs[s].path) {
        flat.push_back(it.gid);
        flat.push_back(it.t);
      }
      wr.vec(flat);
      write_plan(wr, w.plans[static_cast<size_t>(u)][s].a);
      write_plan(wr, w.plans[static_cast<size_t>(u)][s].b);
    }
  }
  nlohmann::json manifest = {{"kind", "urs"},
                             {"users", g.n_users()},
                             {"borrowed", w.corpus.n_borrowed},
                             {"fallback", w.corpus.n_fallback},
                             {"key", view_cache_key(g, p)}};
  std::ofstream mf(stem + ".json");
  mf << manifest.dump(2) << "\n";
  return w;
}

}  // namespace htgfd
