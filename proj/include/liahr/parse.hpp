#pragma once

#include <array>
#include <string>
#include <string_view>

#include "liahr/label_space.hpp"

namespace liahr {

struct LabelParse {
  LabelSet labels;
  /// Predicted names that are not in the space (dropped).
  std::size_t unknown = 0;
};

/// Extracts the first balanced `{...}` object holding a "label" key and maps
/// its entries onto the space. Matching is case-insensitive after trimming;
/// unknown names are dropped and counted; single_label keeps the first
/// recognized name. Throws ParseError when no such object exists or a
/// single_label output has no recognized label.
LabelParse parse_label_output(std::string_view text, const LabelSpace& space);

/// Two-way answer vocabulary, e.g. {"unreasonable", "reasonable"} or
/// {"no harm", "harm"}. Entries are lowercase and distinct.
using AssessmentVocabulary = std::array<std::string, 2>;

/// Scans left to right; at each position tries the longer answer first, so
/// "unreasonable" is never read as "reasonable". Returns the index of the
/// answer in `vocabulary`. Throws ParseError if neither answer occurs.
std::size_t parse_assessment(std::string_view text, const AssessmentVocabulary& vocabulary);

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);

}  // namespace liahr
