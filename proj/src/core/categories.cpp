#include "pmf/core/categories.hpp"

#include <algorithm>
#include <set>

#include "pmf/core/errors.hpp"

namespace pmf {

std::string to_string(Split split) { return split == Split::kBase ? "base" : "novel"; }

Split parse_split(const std::string& text) {
  if (text == "base") return Split::kBase;
  if (text == "novel") return Split::kNovel;
  throw FormatError("undefined category split '" + text + "'");
}

CategoryTable::CategoryTable(std::vector<Category> entries) : entries_(std::move(entries)) {
  std::set<int> ids;
  std::set<std::string> names;
  for (const auto& c : entries_) {
    if (!ids.insert(c.id).second) {
      throw InvalidArgument("duplicate category id " + std::to_string(c.id));
    }
    if (!names.insert(c.name).second) throw InvalidArgument("duplicate category name " + c.name);
  }
}

const Category* CategoryTable::find(int id) const noexcept {
  const auto it = std::find_if(entries_.begin(), entries_.end(), [id](const Category& c) { return c.id == id; });
  return it == entries_.end() ? nullptr : &*it;
}

const Category& CategoryTable::at(int id) const {
  if (const Category* c = find(id)) return *c;
  throw InvalidArgument("unknown category id " + std::to_string(id));
}

std::size_t CategoryTable::index_of(int id) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].id == id) return i;
  }
  throw InvalidArgument("unknown category id " + std::to_string(id));
}

std::vector<int> CategoryTable::ids() const {
  std::vector<int> out;
  for (const auto& c : entries_) out.push_back(c.id);
  return out;
}

std::vector<int> CategoryTable::ids(Split split) const {
  std::vector<int> out;
  for (const auto& c : entries_) {
    if (c.split == split) out.push_back(c.id);
  }
  return out;
}

void CategoryTable::require_base() const {
  if (ids(Split::kBase).empty()) throw InvalidArgument("category table has no base category");
}

nlohmann::json CategoryTable::to_json() const {
  auto arr = nlohmann::json::array();
  for (const auto& c : entries_) {
    arr.push_back({{"id", c.id}, {"name", c.name}, {"split", to_string(c.split)}});
  }
  return arr;
}

CategoryTable CategoryTable::from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw FormatError("categories must be an array");
  std::vector<Category> entries;
  for (const auto& e : j) {
    try {
      entries.push_back({e.at("id").get<int>(), e.at("name").get<std::string>(),
                         parse_split(e.at("split").get<std::string>())});
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(std::string("bad category entry: ") + ex.what());
    }
  }
  return CategoryTable(std::move(entries));
}

}  // namespace pmf
