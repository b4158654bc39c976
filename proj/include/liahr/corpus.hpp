#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "liahr/label_space.hpp"

namespace liahr {

enum class Split { train, dev, test };

std::string_view to_string(Split split);
Split split_from_string(std::string_view s);

struct AnnotatedExample {
  std::string id;
  std::string text;
  LabelSet gold;
  std::map<std::string, LabelSet> annotator_labels;
  std::map<std::string, LabelSet> alt_gold;
  /// Absent in the source record means "train" for pool selection; the
  /// writer preserves absence.
  std::optional<Split> split;

  Split effective_split() const { return split.value_or(Split::train); }
};

/// Ordered, validated collection of examples over one label space.
/// Immutable once loaded; share freely across threads.
class Corpus {
 public:
  static constexpr std::string_view kFormatVersion = "liahr-corpus/1";

  Corpus(LabelSpacePtr space, std::vector<AnnotatedExample> examples,
         std::string source = {});

  const LabelSpace& space() const { return *space_; }
  const LabelSpacePtr& space_ptr() const { return space_; }
  const std::vector<AnnotatedExample>& examples() const { return examples_; }
  std::size_t size() const { return examples_.size(); }
  const AnnotatedExample& at(std::size_t i) const { return examples_.at(i); }
  const std::string& source() const { return source_; }

  const AnnotatedExample* find(std::string_view id) const;
  const AnnotatedExample& get(std::string_view id) const;
  std::optional<std::size_t> index_of(std::string_view id) const;

  /// Indices of examples in the given splits, in file order.
  std::vector<std::size_t> indices_in(const std::vector<Split>& splits) const;

  /// Git-style blob hash ("sha1 of 'blob <len>\\0' + bytes") of the canonical
  /// serialization.
  std::string content_hash() const;

 private:
  LabelSpacePtr space_;
  std::vector<AnnotatedExample> examples_;
  std::string source_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// Parses one canonical record. `line_no` is used in error messages only.
AnnotatedExample parse_record(const nlohmann::json& record, const LabelSpace& space,
                              std::size_t line_no);
nlohmann::ordered_json record_to_json(const AnnotatedExample& ex, const LabelSpace& space);

/// Labels serialize as an array for multilabel spaces and as a bare string
/// for single_label and binary spaces.
nlohmann::ordered_json labels_to_json(LabelSet set, const LabelSpace& space);
LabelSet labels_from_json(const nlohmann::json& j, const LabelSpace& space);

Corpus load_corpus(const std::filesystem::path& path, LabelSpacePtr space);
Corpus parse_corpus(std::string_view text, LabelSpacePtr space, std::string source = {});

/// One canonical record per line, '\n' terminated, file order.
std::string serialize_corpus(const Corpus& corpus);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

}  // namespace liahr
