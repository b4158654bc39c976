#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace liahr {

enum class TaskKind { multilabel, single_label, binary };

std::string_view to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view s);

/// Subset of a label space, stored as a bitmask over the space's label order.
/// Iteration and rendering therefore always follow the space order.
class LabelSet {
 public:
  static constexpr std::size_t kMaxLabels = 64;

  constexpr LabelSet() = default;
  static constexpr LabelSet from_bits(std::uint64_t bits) { return LabelSet(bits); }
  static LabelSet of(std::initializer_list<std::size_t> indices);

  constexpr std::uint64_t bits() const { return bits_; }
  bool contains(std::size_t index) const { return (bits_ >> index) & 1U; }
  void insert(std::size_t index) { bits_ |= (std::uint64_t{1} << index); }
  void erase(std::size_t index) { bits_ &= ~(std::uint64_t{1} << index); }
  std::size_t size() const;
  bool empty() const { return bits_ == 0; }

  /// Member indices in ascending (space) order.
  std::vector<std::size_t> indices() const;

  LabelSet operator&(LabelSet o) const { return LabelSet(bits_ & o.bits_); }
  LabelSet operator|(LabelSet o) const { return LabelSet(bits_ | o.bits_); }
  friend constexpr bool operator==(LabelSet, LabelSet) = default;

 private:
  explicit constexpr LabelSet(std::uint64_t bits) : bits_(bits) {}
  std::uint64_t bits_ = 0;
};

/// |A ∩ B| / |A ∪ B|; two empty sets count as full agreement.
double jaccard(LabelSet a, LabelSet b);

/// A task's label vocabulary. Immutable after construction.
class LabelSpace {
 public:
  LabelSpace(std::string name, TaskKind kind, std::vector<std::string> labels,
             std::optional<std::string> binary_positive = std::nullopt);

  const std::string& name() const { return name_; }
  TaskKind kind() const { return kind_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  const std::optional<std::string>& binary_positive() const { return binary_positive_; }

  /// Plural noun used in prompt instructions ("emotions", "moral foundations").
  const std::string& noun() const { return noun_; }
  /// Optional instruction template overriding the per-kind default.
  const std::optional<std::string>& instruction() const { return instruction_; }
  void set_noun(std::string noun) { noun_ = std::move(noun); }
  void set_instruction(std::string text) { instruction_ = std::move(text); }

  std::optional<std::size_t> index_of(std::string_view label) const;
  /// Throws ValidationError for unknown labels.
  std::size_t require_index(std::string_view label) const;

  /// Builds a set from names; enforces single_label/binary cardinality.
  LabelSet make_set(const std::vector<std::string>& names) const;
  std::vector<std::string> names(LabelSet set) const;

  /// Membership and cardinality check for the space's kind.
  bool valid(LabelSet set) const;
  void validate(LabelSet set) const;
  LabelSet all() const;

  nlohmann::ordered_json to_json() const;
  static LabelSpace from_json(const nlohmann::json& j);
  static std::shared_ptr<const LabelSpace> load(const std::filesystem::path& path);

 private:
  std::string name_;
  TaskKind kind_;
  std::vector<std::string> labels_;
  std::optional<std::string> binary_positive_;
  std::string noun_ = "labels";
  std::optional<std::string> instruction_;
};

using LabelSpacePtr = std::shared_ptr<const LabelSpace>;

}  // namespace liahr
