#include "htgfd/schema.hpp"

#include "htgfd/common.hpp"

namespace htgfd {

int Schema::kind_id(std::string_view name) const {
  for (size_t i = 0; i < kinds.size(); ++i)
    if (kinds[i] == name) return static_cast<int>(i);
  return -1;
}

int Schema::relation_id(std::string_view name) const {
  for (size_t i = 0; i < relations.size(); ++i)
    if (relations[i].name == name) return static_cast<int>(i);
  return -1;
}

nlohmann::json Schema::to_json() const {
  nlohmann::json j;
  j["kinds"] = kinds;
  j["user_kind"] = kinds.at(static_cast<size_t>(user_kind));
  auto& rels = j["relations"] = nlohmann::json::array();
  for (const auto& r : relations)
    rels.push_back({{"name", r.name},
                    {"src", kinds.at(static_cast<size_t>(r.src_kind))},
                    {"dst", kinds.at(static_cast<size_t>(r.dst_kind))},
                    {"symmetric", r.symmetric}});
  return j;
}

Schema Schema::from_json(const nlohmann::json& j) {
  Schema s;
  s.kinds = j.at("kinds").get<std::vector<std::string>>();
  require(!s.kinds.empty(), "schema: no kinds declared");
  if (j.contains("user_kind")) {
    s.user_kind = s.kind_id(j.at("user_kind").get<std::string>());
    require(s.user_kind >= 0, "schema: unknown user_kind");
  }
  for (const auto& r : j.at("relations")) {
    RelationSpec spec;
    spec.name = r.at("name").get<std::string>();
    spec.src_kind = s.kind_id(r.at("src").get<std::string>());
    spec.dst_kind = s.kind_id(r.at("dst").get<std::string>());
    require(spec.src_kind >= 0 && spec.dst_kind >= 0,
            "schema: relation " + spec.name + " references unknown kind");
    spec.symmetric = r.value("symmetric", false);
    if (spec.symmetric)
      require(spec.src_kind == spec.dst_kind,
              "schema: symmetric relation must join one kind");
    s.relations.push_back(std::move(spec));
  }
  require(!s.relations.empty(), "schema: no relations declared");
  return s;
}

Schema Schema::mmma() {
  Schema s;
  s.kinds = {"user", "group", "device"};
  s.user_kind = 0;
  s.relations = {
      {"CREATE", 0, 1, false},  {"ENTER", 0, 1, false},
      {"LOGIN", 0, 2, false},   {"PULL", 0, 0, false},
      {"SEND", 0, 1, false},    {"ADD", 0, 0, true},
      {"TRANSFER", 0, 0, false},
  };
  return s;
}

}  // namespace htgfd
