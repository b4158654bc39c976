#include "liahr/parse.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

#include <nlohmann/json.hpp>

#include "liahr/error.hpp"

namespace liahr {

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

namespace {

/// End (exclusive) of the balanced object starting at `open`, honoring
/// quoted strings of either quote style.
std::optional<std::size_t> balanced_end(std::string_view text, std::size_t open) {
  int depth = 0;
  char quote = 0;
  bool escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (quote != 0) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == quote) {
        quote = 0;
      }
      continue;
    }
    if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::nullopt;
}

std::optional<nlohmann::json> parse_object(std::string_view candidate) {
  auto j = nlohmann::json::parse(candidate, nullptr, false);
  if (j.is_discarded()) {
    // Models sometimes answer with Python-style single quotes.
    std::string swapped(candidate);
    std::replace(swapped.begin(), swapped.end(), '\'', '"');
    j = nlohmann::json::parse(swapped, nullptr, false);
  }
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

}  // namespace

LabelParse parse_label_output(std::string_view text, const LabelSpace& space) {
  for (auto open = text.find('{'); open != std::string_view::npos; open = text.find('{', open + 1)) {
    const auto end = balanced_end(text, open);
    if (!end) continue;
    auto obj = parse_object(text.substr(open, *end - open));
    if (!obj || !obj->contains("label")) continue;

    const auto& value = obj->at("label");
    std::vector<std::string> names;
    if (value.is_string()) {
      names.push_back(value.get<std::string>());
    } else if (value.is_array()) {
      for (const auto& e : value) {
        if (e.is_string()) names.push_back(e.get<std::string>());
      }
    } else if (!value.is_null()) {
      continue;
    }

    LabelParse out;
    for (const auto& raw : names) {
      const auto key = to_lower(trim(raw));
      if (auto idx = space.index_of(key)) {
        if (space.kind() != TaskKind::multilabel && !out.labels.empty()) continue;
        out.labels.insert(*idx);
      } else {
        ++out.unknown;
      }
    }
    if (space.kind() != TaskKind::multilabel && out.labels.empty()) {
      throw ParseError("no recognized label in output for " +
                       std::string(to_string(space.kind())) + " space");
    }
    return out;
  }
  throw ParseError("no parseable {\"label\": ...} object in output");
}

std::size_t parse_assessment(std::string_view text, const AssessmentVocabulary& vocabulary) {
  const auto hay = to_lower(text);
  std::array<std::size_t, 2> order{0, 1};
  if (vocabulary[1].size() > vocabulary[0].size()) order = {1, 0};
  for (std::size_t pos = 0; pos < hay.size(); ++pos) {
    for (auto idx : order) {
      const auto& word = vocabulary[idx];
      if (!word.empty() && hay.compare(pos, word.size(), word) == 0) return idx;
    }
  }
  throw ParseError("output contains neither '" + vocabulary[0] + "' nor '" + vocabulary[1] + "'");
}

}  // namespace liahr
