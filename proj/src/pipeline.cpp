#include "liahr/pipeline.hpp"

#include <sstream>
#include <unordered_map>

#include "liahr/error.hpp"

namespace liahr {

std::string_view to_string(PipelineMode mode) {
  switch (mode) {
    case PipelineMode::original: return "original";
    case PipelineMode::replaced: return "replaced";
    case PipelineMode::replaced_trn: return "replaced_trn";
    case PipelineMode::filtered: return "filtered";
    case PipelineMode::bsl_filtered: return "bsl_filtered";
    case PipelineMode::predictions: return "predictions";
  }
  return "?";
}

PipelineMode pipeline_mode_from_string(std::string_view s) {
  for (auto m : {PipelineMode::original, PipelineMode::replaced, PipelineMode::replaced_trn,
                 PipelineMode::filtered, PipelineMode::bsl_filtered, PipelineMode::predictions}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown pipeline mode '" + std::string(s) + "'");
}

std::string_view to_string(ChangeAction a) {
  switch (a) {
    case ChangeAction::kept: return "kept";
    case ChangeAction::replaced: return "replaced";
    case ChangeAction::removed: return "removed";
  }
  return "?";
}

std::size_t ChangeManifest::count(ChangeAction a) const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.action == a ? 1 : 0;
  return n;
}

std::size_t ChangeManifest::count(ChangeAction a, Split s) const {
  std::size_t n = 0;
  for (const auto& e : entries) n += (e.action == a && e.split == s) ? 1 : 0;
  return n;
}

std::vector<std::string> ChangeManifest::warnings() const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (e.warning) out.push_back(e.id + ": " + *e.warning);
  }
  return out;
}

nlohmann::ordered_json ChangeManifest::to_json(const LabelSpace& space) const {
  nlohmann::ordered_json j;
  j["mode"] = mode;
  j["sources"] = sources;
  j["touched_splits"] = touched_splits;
  nlohmann::ordered_json counts;
  for (auto a : {ChangeAction::kept, ChangeAction::replaced, ChangeAction::removed}) {
    nlohmann::ordered_json by_split;
    for (auto s : {Split::train, Split::dev, Split::test}) by_split[std::string(liahr::to_string(s))] = count(a, s);
    counts[std::string(liahr::to_string(a))] = {{"total", count(a)}, {"by_split", by_split}};
  }
  j["counts"] = std::move(counts);
  j["warnings"] = warnings();
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    nlohmann::ordered_json ej;
    ej["id"] = e.id;
    ej["split"] = std::string(liahr::to_string(e.split));
    ej["action"] = std::string(liahr::to_string(e.action));
    ej["old"] = space.names(e.old_labels);
    if (e.new_labels) ej["new"] = space.names(*e.new_labels);
    if (e.warning) ej["warning"] = *e.warning;
    arr.push_back(std::move(ej));
  }
  j["entries"] = std::move(arr);
  return j;
}

std::string ChangeManifest::summary_table() const {
  std::ostringstream out;
  out << "| action | train | dev | test | total |\n|---|---|---|---|---|\n";
  for (auto a : {ChangeAction::kept, ChangeAction::replaced, ChangeAction::removed}) {
    out << "| " << liahr::to_string(a) << " | " << count(a, Split::train) << " | " << count(a, Split::dev)
        << " | " << count(a, Split::test) << " | " << count(a) << " |\n";
  }
  return out.str();
}

namespace {

using VerdictIndex = std::unordered_map<std::string, const Verdict*>;

/// First verdict per example in (seed, id) order.
VerdictIndex index_log(const RunLog& log) {
  VerdictIndex idx;
  for (const auto& v : log.verdicts) idx.emplace(v.id, &v);
  return idx;
}

const RunLog& require_log(const RunLog* log, const Corpus& corpus, const char* what, PipelineMode mode) {
  if (log == nullptr) {
    throw CoverageError("mode " + std::string(to_string(mode)) + " needs a " + what + " verdict log");
  }
  if (log->manifest.corpus_hash != corpus.content_hash()) {
    throw ValidationError(std::string(what) + " verdict log was produced on a different corpus");
  }
  return *log;
}

void require_coverage(const Corpus& corpus, const VerdictIndex& idx, const std::vector<Split>& splits,
                      const char* what, PipelineMode mode) {
  std::size_t missing = 0;
  std::string first;
  for (auto i : corpus.indices_in(splits)) {
    if (!idx.contains(corpus.at(i).id)) {
      if (missing++ == 0) first = corpus.at(i).id;
    }
  }
  if (missing > 0) {
    throw CoverageError("coverage gap: " + std::string(what) + " log misses " + std::to_string(missing) +
                        " example(s) required by mode " + std::string(to_string(mode)) + " (first: '" +
                        first + "')");
  }
}

bool in(const std::vector<Split>& splits, Split s) {
  return std::find(splits.begin(), splits.end(), s) != splits.end();
}

std::string describe(const RunLog& log) {
  return std::string(to_string(log.mode())) + ":" + log.source().str() + "@" + log.manifest.corpus_hash.substr(0, 12);
}

}  // namespace

std::pair<Corpus, ChangeManifest> apply_pipeline(const Corpus& corpus, PipelineMode mode,
                                                 const PipelineInputs& logs, const PipelineOptions& options) {
  ChangeManifest manifest;
  manifest.mode = std::string(to_string(mode));

  std::vector<Split> scope;
  const RunLog* source = nullptr;
  const char* what = "";
  switch (mode) {
    case PipelineMode::original: break;
    case PipelineMode::replaced:
      scope = options.exclude_test ? std::vector<Split>{Split::train, Split::dev}
                                   : std::vector<Split>{Split::train, Split::dev, Split::test};
      source = logs.liahr;
      what = "liahr";
      break;
    case PipelineMode::replaced_trn:
    case PipelineMode::filtered:
      scope = {Split::train};
      source = logs.liahr;
      what = "liahr";
      break;
    case PipelineMode::bsl_filtered:
      scope = {Split::train};
      source = logs.baseline;
      what = "baseline";
      break;
    case PipelineMode::predictions:
      scope = options.prediction_splits;
      source = logs.icl;
      what = "icl";
      break;
  }

  VerdictIndex idx;
  if (mode != PipelineMode::original) {
    const auto& log = require_log(source, corpus, what, mode);
    idx = index_log(log);
    require_coverage(corpus, idx, scope, what, mode);
    manifest.sources.push_back(describe(log));
  }
  for (auto s : scope) manifest.touched_splits.emplace_back(to_string(s));

  std::vector<AnnotatedExample> kept;
  kept.reserve(corpus.size());
  for (const auto& ex : corpus.examples()) {
    ChangeEntry e;
    e.id = ex.id;
    e.split = ex.effective_split();
    e.old_labels = ex.gold;
    auto out = ex;

    if (mode != PipelineMode::original && in(scope, e.split)) {
      const Verdict& v = *idx.at(ex.id);
      if (v.unparsed) {
        e.warning = "unparsed verdict; original labels kept";
      } else {
        switch (mode) {
          case PipelineMode::replaced:
          case PipelineMode::replaced_trn:
            if (v.flagged && v.alternative && *v.alternative != ex.gold) {
              out.gold = *v.alternative;
              e.action = ChangeAction::replaced;
              e.new_labels = out.gold;
            }
            break;
          case PipelineMode::filtered:
          case PipelineMode::bsl_filtered:
            if (v.flagged) e.action = ChangeAction::removed;
            break;
          case PipelineMode::predictions:
            if (v.predicted && *v.predicted != ex.gold) {
              out.gold = *v.predicted;
              e.action = ChangeAction::replaced;
              e.new_labels = out.gold;
            }
            break;
          case PipelineMode::original: break;
        }
      }
    }
    if (e.action != ChangeAction::removed) kept.push_back(std::move(out));
    manifest.entries.push_back(std::move(e));
  }
  return {Corpus(corpus.space_ptr(), std::move(kept), corpus.source()), std::move(manifest)};
}

}  // namespace liahr
