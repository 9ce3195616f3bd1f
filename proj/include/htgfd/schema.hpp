#pragma once

#include <json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace htgfd {

struct RelationSpec {
  std::string name;
  int src_kind = 0;
  int dst_kind = 0;
  bool symmetric = false;  // stored as two directed edges
};

// Node-kind and relation registry. Kind/relation ids are indices into the
// declaration order and are fixed once a graph is loaded.
struct Schema {
  std::vector<std::string> kinds;
  std::vector<RelationSpec> relations;
  int user_kind = 0;  // the feature-bearing, labeled, scored kind

  int kind_id(std::string_view name) const;       // -1 when unknown
  int relation_id(std::string_view name) const;   // -1 when unknown
  int n_kinds() const { return static_cast<int>(kinds.size()); }
  int n_relations() const { return static_cast<int>(relations.size()); }

  nlohmann::json to_json() const;
  static Schema from_json(const nlohmann::json& j);

  // user/group/device with CREATE, ENTER, LOGIN, PULL, SEND, ADD, TRANSFER.
  // PULL is modeled user->user (inviter->invitee); ADD is symmetric.
  static Schema mmma();
};

}  // namespace htgfd
