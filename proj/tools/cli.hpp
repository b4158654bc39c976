#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "liahr/corpus.hpp"
#include "liahr/engine.hpp"

namespace liahr::cli {

enum ExitCode : int {
  kOk = 0,
  kOther = 1,
  kConfig = 2,
  kTransport = 3,
  kValidation = 4,
};

/// A run fully described on disk: label space and corpus paths plus every
/// RunConfig field. Relative paths resolve against the spec file.
struct RunSpec {
  std::filesystem::path space;
  std::filesystem::path corpus;
  RunConfig config;
  std::optional<std::filesystem::path> out;
  std::filesystem::path output_root = "runs";

  nlohmann::ordered_json to_json() const;
  static RunSpec from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static RunSpec load(const std::filesystem::path& path);
};

/// Summary and metrics of one run, as written to report.json.
nlohmann::ordered_json run_report(const RunLog& log, const LabelSpace& space);
std::string run_report_markdown(const RunLog& log, const LabelSpace& space);

struct TableImport {
  std::string id_column = "id";
  std::string text_column = "text";
  std::string label_column = "labels";
  std::string split_column = "split";
  /// Cell separator; 0 picks ',' or '\t' from the file extension.
  char delimiter = 0;
  /// Separator between label names inside one cell.
  char label_separator = ',';
  /// Source label -> target label; unmapped labels must exist in the space.
  std::map<std::string, std::string> label_map;
};

/// RFC 4180 style rows (quoted fields, doubled quotes, embedded newlines).
std::vector<std::vector<std::string>> read_delimited(std::string_view text, char delimiter);
Corpus import_table(std::string_view text, LabelSpacePtr space, const TableImport& opts);

/// Entry point behind the `liahr` binary.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace liahr::cli
