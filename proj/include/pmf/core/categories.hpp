#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace pmf {

enum class Split { kBase, kNovel };

std::string to_string(Split split);
/// Throws FormatError on anything other than "base" / "novel".
Split parse_split(const std::string& text);

struct Category {
  int id = 0;
  std::string name;
  Split split = Split::kBase;
  friend bool operator==(const Category&, const Category&) = default;
};

/// Vocabulary with its base/novel split. Ids are unique.
class CategoryTable {
 public:
  CategoryTable() = default;
  /// Throws InvalidArgument on duplicate ids or names.
  explicit CategoryTable(std::vector<Category> entries);

  const std::vector<Category>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  const Category* find(int id) const noexcept;
  const Category& at(int id) const;
  /// Position of `id` in entries(); throws when absent.
  std::size_t index_of(int id) const;
  bool is_novel(int id) const { return at(id).split == Split::kNovel; }

  std::vector<int> ids() const;
  std::vector<int> ids(Split split) const;

  /// WSPN training needs at least one base category.
  void require_base() const;

  nlohmann::json to_json() const;
  static CategoryTable from_json(const nlohmann::json& j);

  friend bool operator==(const CategoryTable&, const CategoryTable&) = default;

 private:
  std::vector<Category> entries_;
};

}  // namespace pmf
