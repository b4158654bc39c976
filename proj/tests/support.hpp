#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "liahr/corpus.hpp"
#include "liahr/engine.hpp"
#include "liahr/label_space.hpp"
#include "liahr/sampler.hpp"

namespace liahr::testing {

inline std::filesystem::path test_dir() { return LIAHR_TEST_DIR; }
inline std::filesystem::path data_dir() { return test_dir() / "data"; }
inline std::filesystem::path golden_dir() { return test_dir() / "golden" / "v1"; }

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

/// Fresh directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("liahr-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline LabelSpacePtr load_space(const std::string& file) { return LabelSpace::load(data_dir() / file); }

inline LabelSpacePtr make_space(std::size_t n, TaskKind kind = TaskKind::multilabel) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back("l" + std::to_string(i));
  std::optional<std::string> positive;
  if (kind == TaskKind::binary) positive = labels[1];
  return std::make_shared<const LabelSpace>("synthetic", kind, labels, positive);
}

/// Random corpus: multilabel gold has 1..3 labels; the first `train_share`
/// of examples are train, the rest dev.
inline Corpus synthetic_corpus(LabelSpacePtr space, std::size_t n, std::uint64_t seed,
                               double train_share = 0.5) {
  SeededSampler s(seed, "synthetic-corpus");
  std::vector<AnnotatedExample> out;
  const auto k = space->size();
  for (std::size_t i = 0; i < n; ++i) {
    AnnotatedExample ex;
    char id[32];
    std::snprintf(id, sizeof id, "ex-%05zu", i);
    ex.id = id;
    ex.text = "synthetic document " + std::to_string(i);
    if (space->kind() == TaskKind::multilabel) {
      const auto m = 1 + s.uniform_index(3);
      for (std::size_t j = 0; j < m; ++j) ex.gold.insert(s.uniform_index(k));
    } else {
      ex.gold.insert(s.uniform_index(k));
    }
    ex.split = static_cast<double>(i) < train_share * static_cast<double>(n) ? Split::train : Split::dev;
    out.push_back(std::move(ex));
  }
  return Corpus(std::move(space), std::move(out), "synthetic");
}

inline RunConfig mock_config(MockKind kind, std::vector<std::uint64_t> seeds = {0, 1, 2},
                             std::size_t queries = 10, std::size_t shots = 4) {
  RunConfig c;
  c.seeds = std::move(seeds);
  c.queries_per_seed = queries;
  c.n_shots = shots;
  c.backend.kind = BackendKind::mock;
  c.backend.mock.kind = kind;
  c.backend.concurrency = 4;
  return c;
}

}  // namespace liahr::testing
