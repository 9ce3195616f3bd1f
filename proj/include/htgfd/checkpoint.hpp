#pragma once

#include "htgfd/params.hpp"

#include <json.hpp>

#include <bit>
#include <cstdio>
#include <fstream>
#include <string>

namespace htgfd {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian");

template <class S>
constexpr const char* dtype_name() {
  if constexpr (sizeof(S) == 4)
    return "f32";
  else
    return "f64";
}

inline constexpr int kCheckpointVersion = 1;

// <stem>.json holds the manifest (version, dtype, name/shape per parameter);
// <stem>.bin holds the concatenated row-major payloads. Round trips are
// bit-exact.
template <class S>
void save_checkpoint(const ParamStore<S>& params, const std::string& stem) {
  nlohmann::json manifest;
  manifest["version"] = kCheckpointVersion;
  manifest["dtype"] = dtype_name<S>();
  auto& plist = manifest["params"] = nlohmann::json::array();
  for (size_t i = 0; i < params.size(); ++i) {
    plist.push_back({{"name", params.name(i)},
                     {"shape", {params.value(i).rows(), params.value(i).cols()}}});
  }
  std::ofstream mf(stem + ".json");
  require(mf.good(), "cannot write " + stem + ".json");
  mf << manifest.dump(2) << "\n";

  std::ofstream bf(stem + ".bin", std::ios::binary);
  require(bf.good(), "cannot write " + stem + ".bin");
  for (size_t i = 0; i < params.size(); ++i) {
    const Mat<S>& v = params.value(i);
    bf.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(sizeof(S) * v.size()));
  }
  require(bf.good(), "short write to " + stem + ".bin");
}

inline std::string checkpoint_dtype(const std::string& stem) {
  std::ifstream mf(stem + ".json");
  require(mf.good(), "cannot read " + stem + ".json");
  nlohmann::json manifest = nlohmann::json::parse(mf);
  return manifest.at("dtype").get<std::string>();
}

template <class S>
ParamStore<S> load_checkpoint(const std::string& stem) {
  std::ifstream mf(stem + ".json");
  require(mf.good(), "cannot read " + stem + ".json");
  nlohmann::json manifest = nlohmann::json::parse(mf);
  require(manifest.at("version").get<int>() == kCheckpointVersion,
          "unsupported checkpoint version in " + stem);
  require(manifest.at("dtype").get<std::string>() == dtype_name<S>(),
          "checkpoint dtype mismatch in " + stem + " (expected " +
              dtype_name<S>() + ")");

  std::ifstream bf(stem + ".bin", std::ios::binary);
  require(bf.good(), "cannot read " + stem + ".bin");
  ParamStore<S> params;
  for (const auto& p : manifest.at("params")) {
    const auto name = p.at("name").get<std::string>();
    const Index rows = p.at("shape")[0].get<Index>();
    const Index cols = p.at("shape")[1].get<Index>();
    Mat<S> v(rows, cols);
    bf.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(sizeof(S) * v.size()));
    require(bf.gcount() ==
                static_cast<std::streamsize>(sizeof(S) * v.size()),
            "truncated payload in " + stem + ".bin at " + name);
    params.add(name, std::move(v));
  }
  return params;
}

}  // namespace htgfd
