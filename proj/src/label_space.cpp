#include "liahr/label_space.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <fstream>
#include <set>

#include "liahr/error.hpp"

namespace liahr {

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::multilabel: return "multilabel";
    case TaskKind::single_label: return "single_label";
    case TaskKind::binary: return "binary";
  }
  return "?";
}

TaskKind task_kind_from_string(std::string_view s) {
  if (s == "multilabel") return TaskKind::multilabel;
  if (s == "single_label") return TaskKind::single_label;
  if (s == "binary") return TaskKind::binary;
  throw ValidationError("unknown label-space kind '" + std::string(s) + "'");
}

LabelSet LabelSet::of(std::initializer_list<std::size_t> indices) {
  LabelSet s;
  for (auto i : indices) s.insert(i);
  return s;
}

std::size_t LabelSet::size() const { return static_cast<std::size_t>(std::popcount(bits_)); }

std::vector<std::size_t> LabelSet::indices() const {
  std::vector<std::size_t> out;
  for (std::uint64_t b = bits_; b != 0; b &= b - 1) {
    out.push_back(static_cast<std::size_t>(std::countr_zero(b)));
  }
  return out;
}

double jaccard(LabelSet a, LabelSet b) {
  const auto uni = (a | b).size();
  if (uni == 0) return 1.0;
  return static_cast<double>((a & b).size()) / static_cast<double>(uni);
}

namespace {

bool is_lowercase(const std::string& s) {
  return std::none_of(s.begin(), s.end(),
                      [](unsigned char c) { return std::isupper(c) != 0; });
}

}  // namespace

LabelSpace::LabelSpace(std::string name, TaskKind kind, std::vector<std::string> labels,
                       std::optional<std::string> binary_positive)
    : name_(std::move(name)),
      kind_(kind),
      labels_(std::move(labels)),
      binary_positive_(std::move(binary_positive)) {
  if (labels_.size() < 2) {
    throw ValidationError("label space '" + name_ + "' needs at least two labels");
  }
  if (labels_.size() > LabelSet::kMaxLabels) {
    throw ValidationError("label space '" + name_ + "' exceeds 64 labels");
  }
  std::set<std::string> seen;
  for (const auto& l : labels_) {
    if (l.empty()) throw ValidationError("empty label name in space '" + name_ + "'");
    if (!is_lowercase(l)) throw ValidationError("label '" + l + "' is not lowercase");
    if (!seen.insert(l).second) throw ValidationError("duplicate label '" + l + "'");
  }
  if (kind_ == TaskKind::binary) {
    if (labels_.size() != 2) throw ValidationError("binary space must have exactly two labels");
    if (!binary_positive_ || !index_of(*binary_positive_)) {
      throw ValidationError("binary space needs binary_positive naming one of its labels");
    }
  } else if (binary_positive_) {
    throw ValidationError("binary_positive is only valid for binary spaces");
  }
}

std::optional<std::size_t> LabelSpace::index_of(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels_.begin());
}

std::size_t LabelSpace::require_index(std::string_view label) const {
  if (auto i = index_of(label)) return *i;
  throw ValidationError("unknown label '" + std::string(label) + "' for space '" + name_ + "'");
}

LabelSet LabelSpace::make_set(const std::vector<std::string>& names) const {
  LabelSet s;
  for (const auto& n : names) s.insert(require_index(n));
  validate(s);
  return s;
}

std::vector<std::string> LabelSpace::names(LabelSet set) const {
  std::vector<std::string> out;
  for (auto i : set.indices()) out.push_back(labels_.at(i));
  return out;
}

bool LabelSpace::valid(LabelSet set) const {
  if ((set.bits() & ~all().bits()) != 0) return false;
  if (kind_ != TaskKind::multilabel && set.size() != 1) return false;
  return true;
}

void LabelSpace::validate(LabelSet set) const {
  if ((set.bits() & ~all().bits()) != 0) {
    throw ValidationError("label set outside space '" + name_ + "'");
  }
  if (kind_ != TaskKind::multilabel && set.size() != 1) {
    throw ValidationError("space '" + name_ + "' is " + std::string(to_string(kind_)) +
                          " and needs exactly one label, got " + std::to_string(set.size()));
  }
}

LabelSet LabelSpace::all() const {
  if (labels_.size() == 64) return LabelSet::from_bits(~std::uint64_t{0});
  return LabelSet::from_bits((std::uint64_t{1} << labels_.size()) - 1);
}

nlohmann::ordered_json LabelSpace::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name_;
  j["kind"] = std::string(to_string(kind_));
  j["labels"] = labels_;
  if (binary_positive_) j["binary_positive"] = *binary_positive_;
  if (noun_ != "labels") j["noun"] = noun_;
  if (instruction_) j["instruction"] = *instruction_;
  return j;
}

LabelSpace LabelSpace::from_json(const nlohmann::json& j) {
  try {
    std::optional<std::string> positive;
    if (j.contains("binary_positive")) positive = j.at("binary_positive").get<std::string>();
    LabelSpace space(j.at("name").get<std::string>(),
                     task_kind_from_string(j.at("kind").get<std::string>()),
                     j.at("labels").get<std::vector<std::string>>(), positive);
    if (j.contains("noun")) space.set_noun(j.at("noun").get<std::string>());
    if (j.contains("instruction")) space.set_instruction(j.at("instruction").get<std::string>());
    return space;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("label-space schema: ") + e.what());
  }
}

LabelSpacePtr LabelSpace::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open label-space file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return std::make_shared<const LabelSpace>(from_json(j));
}

}  // namespace liahr
