#include "liahr/corpus.hpp"

#include <fstream>
#include <sstream>

#include "liahr/error.hpp"
#include "liahr/hash.hpp"

namespace liahr {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  throw ValidationError("unknown split '" + std::string(s) + "'");
}

Corpus::Corpus(LabelSpacePtr space, std::vector<AnnotatedExample> examples, std::string source)
    : space_(std::move(space)), examples_(std::move(examples)), source_(std::move(source)) {
  by_id_.reserve(examples_.size());
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    const auto& ex = examples_[i];
    if (ex.id.empty()) throw ValidationError("example " + std::to_string(i + 1) + " has empty id");
    if (ex.text.empty()) throw ValidationError("example '" + ex.id + "' has empty text");
    if (!by_id_.emplace(ex.id, i).second) {
      throw ValidationError("duplicate id '" + ex.id + "' at record " + std::to_string(i + 1));
    }
    space_->validate(ex.gold);
    for (const auto& [_, s] : ex.annotator_labels) space_->validate(s);
    for (const auto& [_, s] : ex.alt_gold) space_->validate(s);
  }
}

const AnnotatedExample* Corpus::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &examples_[it->second];
}

const AnnotatedExample& Corpus::get(std::string_view id) const {
  if (const auto* ex = find(id)) return *ex;
  throw ValidationError("unknown example id '" + std::string(id) + "'");
}

std::optional<std::size_t> Corpus::index_of(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> Corpus::indices_in(const std::vector<Split>& splits) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    const auto s = examples_[i].effective_split();
    for (auto want : splits) {
      if (s == want) {
        out.push_back(i);
        break;
      }
    }
  }
  return out;
}

std::string Corpus::content_hash() const { return git_blob_sha1(serialize_corpus(*this)); }

nlohmann::ordered_json labels_to_json(LabelSet set, const LabelSpace& space) {
  auto names = space.names(set);
  if (space.kind() != TaskKind::multilabel && names.size() == 1) return names.front();
  return names;
}

LabelSet labels_from_json(const nlohmann::json& j, const LabelSpace& space) {
  std::vector<std::string> names;
  if (j.is_string()) {
    names.push_back(j.get<std::string>());
  } else if (j.is_array()) {
    for (const auto& e : j) {
      if (!e.is_string()) throw ValidationError("label entries must be strings");
      names.push_back(e.get<std::string>());
    }
  } else {
    throw ValidationError("labels must be a string or an array of strings");
  }
  LabelSet set;
  for (const auto& n : names) set.insert(space.require_index(n));
  if (space.kind() != TaskKind::multilabel && names.size() != 1) {
    throw ValidationError("label-count violation: " + std::string(to_string(space.kind())) +
                          " space needs exactly one label, got " + std::to_string(names.size()));
  }
  space.validate(set);
  return set;
}

namespace {

std::map<std::string, LabelSet> parse_label_map(const nlohmann::json& j, const LabelSpace& space,
                                                const char* field) {
  if (!j.is_object()) throw ValidationError(std::string(field) + " must be an object");
  std::map<std::string, LabelSet> out;
  for (const auto& [k, v] : j.items()) out.emplace(k, labels_from_json(v, space));
  return out;
}

}  // namespace

AnnotatedExample parse_record(const nlohmann::json& record, const LabelSpace& space,
                              std::size_t line_no) {
  const auto where = "line " + std::to_string(line_no) + ": ";
  try {
    if (!record.is_object()) throw ValidationError("record is not an object");
    AnnotatedExample ex;
    ex.id = record.at("id").get<std::string>();
    ex.text = record.at("text").get<std::string>();
    if (ex.text.empty()) throw ValidationError("empty text");
    ex.gold = labels_from_json(record.at("labels"), space);
    if (record.contains("annotators")) {
      ex.annotator_labels = parse_label_map(record.at("annotators"), space, "annotators");
    }
    if (record.contains("alt_labels")) {
      ex.alt_gold = parse_label_map(record.at("alt_labels"), space, "alt_labels");
    }
    if (record.contains("split")) ex.split = split_from_string(record.at("split").get<std::string>());
    return ex;
  } catch (const ValidationError& e) {
    throw ValidationError(where + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(where + "malformed record: " + e.what());
  }
}

nlohmann::ordered_json record_to_json(const AnnotatedExample& ex, const LabelSpace& space) {
  nlohmann::ordered_json j;
  j["id"] = ex.id;
  j["text"] = ex.text;
  j["labels"] = labels_to_json(ex.gold, space);
  if (!ex.annotator_labels.empty()) {
    nlohmann::ordered_json a = nlohmann::ordered_json::object();
    for (const auto& [k, v] : ex.annotator_labels) a[k] = labels_to_json(v, space);
    j["annotators"] = std::move(a);
  }
  if (!ex.alt_gold.empty()) {
    nlohmann::ordered_json a = nlohmann::ordered_json::object();
    for (const auto& [k, v] : ex.alt_gold) a[k] = labels_to_json(v, space);
    j["alt_labels"] = std::move(a);
  }
  if (ex.split) j["split"] = std::string(to_string(*ex.split));
  return j;
}

Corpus parse_corpus(std::string_view text, LabelSpacePtr space, std::string source) {
  std::vector<AnnotatedExample> examples;
  std::unordered_map<std::string, std::size_t> first_line;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": malformed line: " + e.what());
    }
    auto ex = parse_record(j, *space, line_no);
    auto [it, inserted] = first_line.emplace(ex.id, line_no);
    if (!inserted) {
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate id '" + ex.id +
                            "' (first seen on line " + std::to_string(it->second) + ")");
    }
    examples.push_back(std::move(ex));
  }
  return Corpus(std::move(space), std::move(examples), std::move(source));
}

Corpus load_corpus(const std::filesystem::path& path, LabelSpacePtr space) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open corpus file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), std::move(space), path.string());
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& ex : corpus.examples()) {
    out += record_to_json(ex, corpus.space()).dump();
    out += '\n';
  }
  return out;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write corpus file " + path.string());
  out << serialize_corpus(corpus);
  if (!out) throw ValidationError("write failed for " + path.string());
}

}  // namespace liahr
