#include "liahr/engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "liahr/error.hpp"
#include "liahr/mock_backend.hpp"
#include "liahr/parse.hpp"

namespace liahr {

LabelSource LabelSource::parse(std::string_view s) {
  if (s == "gold") return {LabelSourceKind::gold, {}};
  if (s == "random") return {LabelSourceKind::random, {}};
  if (s == "flipped") return {LabelSourceKind::flipped, {}};
  if (s.starts_with("annotator:") && s.size() > 10) {
    return {LabelSourceKind::annotator, std::string(s.substr(10))};
  }
  if (s.starts_with("alt:") && s.size() > 4) return {LabelSourceKind::alt, std::string(s.substr(4))};
  throw ConfigError("unknown query label source '" + std::string(s) + "'");
}

std::string LabelSource::str() const {
  switch (kind) {
    case LabelSourceKind::gold: return "gold";
    case LabelSourceKind::random: return "random";
    case LabelSourceKind::flipped: return "flipped";
    case LabelSourceKind::annotator: return "annotator:" + name;
    case LabelSourceKind::alt: return "alt:" + name;
  }
  return "?";
}

void RunConfig::validate() const {
  if (queries_per_seed < 1) throw ConfigError("queries_per_seed must be >= 1");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (mode == PromptMode::baseline && n_shots % 2 != 0) {
    throw ConfigError("baseline needs an even number of shots, got " + std::to_string(n_shots));
  }
  if (mode == PromptMode::liahr && query_position > n_shots) {
    throw ConfigError("query_position " + std::to_string(query_position) + " exceeds n_shots " +
                      std::to_string(n_shots));
  }
  if (flag_tolerance <= 0.0 || flag_tolerance > 1.0) throw ConfigError("flag_tolerance must be in (0, 1]");
  if (parse_retries < 0) throw ConfigError("parse_retries must be >= 0");
  if (demo_splits.empty() || query_splits.empty()) throw ConfigError("demo and query splits must be non-empty");
  backend.validate();
}

namespace {

nlohmann::ordered_json splits_json(const std::vector<Split>& splits) {
  auto j = nlohmann::ordered_json::array();
  for (auto s : splits) j.push_back(std::string(to_string(s)));
  return j;
}

std::vector<Split> splits_from_json(const nlohmann::json& j) {
  std::vector<Split> out;
  for (const auto& s : j) out.push_back(split_from_string(s.get<std::string>()));
  return out;
}

}  // namespace

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["mode"] = std::string(liahr::to_string(mode));
  j["n_shots"] = n_shots;
  j["query_label_source"] = query_label_source.str();
  j["demos_use_source_labels"] = demos_use_source_labels;
  j["query_position"] = query_position;
  j["seeds"] = seeds;
  j["queries_per_seed"] = queries_per_seed;
  j["full_corpus"] = full_corpus;
  j["demo_splits"] = splits_json(demo_splits);
  j["query_splits"] = splits_json(query_splits);
  j["flag_tolerance"] = flag_tolerance;
  j["parse_retries"] = parse_retries;
  j["random_mode"] = random_mode == RandomLabelMode::donor ? "donor" : "uniform_subset";
  if (!instruction.empty()) j["instruction"] = instruction;
  if (!layout.empty()) j["layout"] = layout;
  j["backend"] = liahr::to_json(backend);
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    if (j.contains("mode")) c.mode = prompt_mode_from_string(j.at("mode").get<std::string>());
    c.n_shots = j.value("n_shots", c.n_shots);
    if (j.contains("query_label_source")) {
      c.query_label_source = LabelSource::parse(j.at("query_label_source").get<std::string>());
    }
    c.demos_use_source_labels = j.value("demos_use_source_labels", c.demos_use_source_labels);
    c.query_position = j.value("query_position", c.query_position);
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.queries_per_seed = j.value("queries_per_seed", c.queries_per_seed);
    c.full_corpus = j.value("full_corpus", c.full_corpus);
    if (j.contains("demo_splits")) c.demo_splits = splits_from_json(j.at("demo_splits"));
    if (j.contains("query_splits")) c.query_splits = splits_from_json(j.at("query_splits"));
    c.flag_tolerance = j.value("flag_tolerance", c.flag_tolerance);
    c.parse_retries = j.value("parse_retries", c.parse_retries);
    if (j.contains("random_mode")) {
      const auto m = j.at("random_mode").get<std::string>();
      if (m == "donor") {
        c.random_mode = RandomLabelMode::donor;
      } else if (m == "uniform_subset") {
        c.random_mode = RandomLabelMode::uniform_subset;
      } else {
        throw ConfigError("unknown random_mode '" + m + "'");
      }
    }
    c.instruction = j.value("instruction", std::string{});
    c.layout = j.value("layout", std::string{});
    if (j.contains("backend")) c.backend = backend_config_from_json(j.at("backend"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

nlohmann::ordered_json set_json(LabelSet s, const LabelSpace& space) { return space.names(s); }

LabelSet set_from(const nlohmann::json& j, const LabelSpace& space) {
  LabelSet s;
  for (const auto& n : j) s.insert(space.require_index(n.get<std::string>()));
  return s;
}

nlohmann::ordered_json number_or_null(double v, bool present) {
  return present ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

nlohmann::ordered_json Verdict::to_json(const LabelSpace& space) const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["id"] = id;
  j["mode"] = std::string(liahr::to_string(mode));
  j["source"] = source;
  j["provided"] = set_json(provided, space);
  j["predicted"] = predicted ? set_json(*predicted, space) : nlohmann::ordered_json(nullptr);
  j["assessment"] = assessment ? nlohmann::ordered_json(*assessment) : nlohmann::ordered_json(nullptr);
  j["gold"] = set_json(gold, space);
  j["copied_exact"] = copied_exact;
  j["jaccard_to_provided"] = number_or_null(jaccard_to_provided, !unparsed);
  j["jaccard_to_gold"] = number_or_null(jaccard_to_gold, !unparsed);
  j["flagged"] = flagged;
  j["alternative"] = alternative ? set_json(*alternative, space) : nlohmann::ordered_json(nullptr);
  j["unparsed"] = unparsed;
  j["unknown_labels"] = unknown_labels;
  j["query_position"] = query_position;
  j["demos"] = demos;
  j["fingerprint"] = fingerprint;
  j["attempts"] = attempts;
  j["raw"] = raw;
  return j;
}

Verdict Verdict::from_json(const nlohmann::json& j, const LabelSpace& space) {
  Verdict v;
  v.seed = j.at("seed").get<std::uint64_t>();
  v.id = j.at("id").get<std::string>();
  v.mode = prompt_mode_from_string(j.at("mode").get<std::string>());
  v.source = j.at("source").get<std::string>();
  v.provided = set_from(j.at("provided"), space);
  if (!j.at("predicted").is_null()) v.predicted = set_from(j.at("predicted"), space);
  if (!j.at("assessment").is_null()) v.assessment = j.at("assessment").get<std::string>();
  v.gold = set_from(j.at("gold"), space);
  v.copied_exact = j.at("copied_exact").get<bool>();
  v.unparsed = j.at("unparsed").get<bool>();
  if (!v.unparsed) {
    v.jaccard_to_provided = j.at("jaccard_to_provided").get<double>();
    v.jaccard_to_gold = j.at("jaccard_to_gold").get<double>();
  }
  v.flagged = j.at("flagged").get<bool>();
  if (!j.at("alternative").is_null()) v.alternative = set_from(j.at("alternative"), space);
  v.unknown_labels = j.value("unknown_labels", std::size_t{0});
  v.query_position = j.value("query_position", std::size_t{0});
  v.demos = j.value("demos", std::vector<std::string>{});
  v.fingerprint = j.value("fingerprint", std::string{});
  v.attempts = j.value("attempts", 0);
  v.raw = j.value("raw", std::string{});
  return v;
}

bool RunManifest::complete() const {
  return std::none_of(seeds.begin(), seeds.end(), [](const SeedStatus& s) { return s.error.has_value(); });
}

nlohmann::ordered_json RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = std::string(kFormatVersion);
  j["status"] = complete() ? "complete" : "partial";
  j["corpus_hash"] = corpus_hash;
  j["corpus_source"] = corpus_source;
  j["space"] = space_name;
  j["n_verdicts"] = n_verdicts;
  j["n_unparsed"] = n_unparsed;
  j["n_flagged"] = n_flagged;
  auto seeds_j = nlohmann::ordered_json::array();
  for (const auto& s : seeds) {
    nlohmann::ordered_json sj;
    sj["seed"] = s.seed;
    sj["queries"] = s.queries;
    sj["demos"] = s.demos;
    sj["error"] = s.error ? nlohmann::ordered_json(*s.error) : nlohmann::ordered_json(nullptr);
    seeds_j.push_back(std::move(sj));
  }
  j["seeds"] = std::move(seeds_j);
  j["config"] = config;
  return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    if (j.value("format", std::string{}) != kFormatVersion) {
      throw ValidationError("unsupported run manifest format");
    }
    m.corpus_hash = j.at("corpus_hash").get<std::string>();
    m.corpus_source = j.value("corpus_source", std::string{});
    m.space_name = j.value("space", std::string{});
    m.n_verdicts = j.value("n_verdicts", std::size_t{0});
    m.n_unparsed = j.value("n_unparsed", std::size_t{0});
    m.n_flagged = j.value("n_flagged", std::size_t{0});
    for (const auto& sj : j.at("seeds")) {
      SeedStatus s;
      s.seed = sj.at("seed").get<std::uint64_t>();
      s.queries = sj.at("queries").get<std::vector<std::string>>();
      s.demos = sj.at("demos").get<std::vector<std::string>>();
      if (!sj.at("error").is_null()) s.error = sj.at("error").get<std::string>();
      m.seeds.push_back(std::move(s));
    }
    m.config = j.at("config");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("run manifest: ") + e.what());
  }
  return m;
}

PromptMode RunLog::mode() const {
  return prompt_mode_from_string(manifest.config.at("mode").get<std::string>());
}

LabelSource RunLog::source() const {
  return LabelSource::parse(manifest.config.at("query_label_source").get<std::string>());
}

std::size_t RunLog::n_shots() const { return manifest.config.at("n_shots").get<std::size_t>(); }

namespace {

/// Labels of `ex` under the run's source, or nullopt when the example lacks
/// them. Random labels are drawn separately.
std::optional<LabelSet> perspective_labels(const AnnotatedExample& ex, const LabelSource& source) {
  switch (source.kind) {
    case LabelSourceKind::annotator: return labels_for_source(ex, "annotator:" + source.name);
    case LabelSourceKind::alt: return labels_for_source(ex, "alt:" + source.name);
    default: return ex.gold;
  }
}

bool restricts_pool(const LabelSource& s) {
  return s.kind == LabelSourceKind::annotator || s.kind == LabelSourceKind::alt;
}

std::vector<std::size_t> filter_pool(const Corpus& corpus, std::vector<std::size_t> pool,
                                     const LabelSource& source) {
  if (!restricts_pool(source)) return pool;
  std::erase_if(pool, [&](std::size_t i) { return !perspective_labels(corpus.at(i), source); });
  return pool;
}

std::string request_key(std::uint64_t seed, const std::string& id) {
  return "seed:" + std::to_string(seed) + "/" + id;
}

LabelSet shown_label(const Corpus& corpus, const AnnotatedExample& q, const RunConfig& config,
                     std::uint64_t seed) {
  const auto& src = config.query_label_source;
  switch (src.kind) {
    case LabelSourceKind::gold: return q.gold;
    case LabelSourceKind::random: {
      SeededSampler sampler(seed, "random/" + q.id);
      return sample_random_labels(corpus, q, sampler, config.random_mode);
    }
    case LabelSourceKind::flipped: return flip_binary_label(q.gold, corpus.space());
    case LabelSourceKind::annotator:
    case LabelSourceKind::alt: return *perspective_labels(q, src);
  }
  return q.gold;
}

}  // namespace

PreparedRun prepare_run(const Corpus& corpus, const RunConfig& config) {
  config.validate();
  if (config.query_label_source.kind == LabelSourceKind::flipped &&
      corpus.space().kind() != TaskKind::binary) {
    throw ConfigError("query label source 'flipped' needs a binary label space");
  }
  if (restricts_pool(config.query_label_source)) {
    const bool any = std::any_of(corpus.examples().begin(), corpus.examples().end(), [&](const auto& ex) {
      return perspective_labels(ex, config.query_label_source).has_value();
    });
    if (!any) {
      throw ConfigError("no example carries labels for source '" + config.query_label_source.str() + "'");
    }
  }

  const auto query_pool = filter_pool(corpus, corpus.indices_in(config.query_splits), config.query_label_source);
  const bool perspective_demos = config.demos_use_source_labels && restricts_pool(config.query_label_source);
  const auto demo_pool = perspective_demos
                             ? filter_pool(corpus, corpus.indices_in(config.demo_splits), config.query_label_source)
                             : corpus.indices_in(config.demo_splits);

  PreparedRun out;
  for (auto seed : config.seeds) {
    SeedStatus status;
    status.seed = seed;
    std::vector<PreparedQuery> seed_queries;
    try {
      std::vector<std::size_t> chosen;
      if (config.full_corpus || query_pool.size() <= config.queries_per_seed) {
        chosen = query_pool;
      } else {
        SeededSampler qs(seed, "queries");
        chosen = sample_demos(corpus, query_pool, config.queries_per_seed, {}, qs);
        std::sort(chosen.begin(), chosen.end());
      }
      {
        SeededSampler ds(seed, "demos");
        const auto base = sample_demos(corpus, demo_pool, std::min(config.n_shots, demo_pool.size()), {}, ds);
        for (auto i : base) status.demos.push_back(corpus.at(i).id);
      }

      for (auto qi : chosen) {
        const auto& q = corpus.at(qi);
        status.queries.push_back(q.id);
        SeededSampler ds(seed, "demos");
        const auto demo_idx = sample_demos(corpus, demo_pool, config.n_shots, {q.id}, ds);

        PromptPlan plan;
        plan.mode = config.mode;
        plan.instruction = config.instruction;
        plan.layout = config.layout;
        plan.space = corpus.space_ptr();
        plan.query = q.id;
        plan.query_position = config.query_position;
        for (auto di : demo_idx) {
          const auto& d = corpus.at(di);
          const auto labels = perspective_demos ? *perspective_labels(d, config.query_label_source) : d.gold;
          plan.demos.push_back({d.id, labels, std::nullopt});
        }

        PreparedQuery pq;
        pq.seed = seed;
        pq.id = q.id;
        pq.provided = config.mode == PromptMode::icl ? q.gold : shown_label(corpus, q, config, seed);
        for (auto di : demo_idx) pq.demos.push_back(corpus.at(di).id);
        if (config.mode != PromptMode::icl) plan.query_label = pq.provided;

        RenderedPrompt prompt;
        if (config.mode == PromptMode::baseline) {
          SeededSampler bs(seed, "baseline");
          prompt = render_baseline_prompt(plan, corpus, bs, config.random_mode);
        } else {
          prompt = render_task_prompt(plan, corpus);
        }
        pq.request = {request_key(seed, q.id), std::move(prompt)};
        seed_queries.push_back(std::move(pq));
      }
    } catch (const SamplingError& e) {
      status.error = std::string("sampling: ") + e.what();
    } catch (const ValidationError& e) {
      status.error = std::string("validation: ") + e.what();
    }
    // A seed whose preparation failed contributes no queries.
    if (!status.error) {
      for (auto& pq : seed_queries) out.queries.push_back(std::move(pq));
    }
    out.seeds.push_back(std::move(status));
  }
  return out;
}

namespace {

struct ParsedOutput {
  std::optional<LabelSet> labels;
  std::optional<std::string> assessment;
  std::size_t unknown = 0;
};

ParsedOutput parse_output(const std::string& text, PromptMode mode, const LabelSpace& space) {
  ParsedOutput out;
  if (mode == PromptMode::baseline) {
    const AssessmentVocabulary vocab{std::string(kUnreasonable), std::string(kReasonable)};
    out.assessment = vocab[parse_assessment(text, vocab)];
  } else if (space.kind() == TaskKind::binary) {
    const AssessmentVocabulary vocab{space.label(0), space.label(1)};
    out.labels = LabelSet::of({parse_assessment(text, vocab)});
  } else {
    auto p = parse_label_output(text, space);
    out.labels = p.labels;
    out.unknown = p.unknown;
  }
  return out;
}

Verdict make_verdict(const PreparedQuery& pq, const AnnotatedExample& ex, const RunConfig& config,
                     const Completion& completion, const ParsedOutput* parsed, int attempts) {
  Verdict v;
  v.id = pq.id;
  v.seed = pq.seed;
  v.mode = config.mode;
  v.source = config.mode == PromptMode::icl ? "gold" : config.query_label_source.str();
  v.provided = pq.provided;
  v.gold = ex.gold;
  v.query_position = config.mode == PromptMode::liahr ? config.query_position : 0;
  v.demos = pq.demos;
  v.raw = completion.text;
  v.fingerprint = pq.request.prompt.fingerprint;
  v.attempts = attempts;
  if (parsed == nullptr) {
    v.unparsed = true;
    return v;
  }
  v.unknown_labels = parsed->unknown;
  if (config.mode == PromptMode::baseline) {
    v.assessment = parsed->assessment;
    v.copied_exact = *parsed->assessment == kReasonable;
    v.flagged = !v.copied_exact;
    v.jaccard_to_provided = v.copied_exact ? 1.0 : 0.0;
    v.jaccard_to_gold = jaccard(v.provided, v.gold);
    return v;
  }
  v.predicted = parsed->labels;
  v.copied_exact = *v.predicted == v.provided;
  v.jaccard_to_provided = jaccard(*v.predicted, v.provided);
  v.jaccard_to_gold = jaccard(*v.predicted, v.gold);
  v.flagged = v.jaccard_to_provided < config.flag_tolerance;
  if (config.mode == PromptMode::liahr) v.alternative = v.predicted;
  return v;
}

}  // namespace

RunLog run(const Corpus& corpus, const RunConfig& config, Gateway& gateway) {
  auto prepared = prepare_run(corpus, config);
  const auto& space = corpus.space();

  std::vector<CompletionRequest> requests;
  requests.reserve(prepared.queries.size());
  for (const auto& pq : prepared.queries) requests.push_back(pq.request);
  auto outcomes = gateway.complete_batch(requests);

  std::vector<std::optional<ParsedOutput>> parsed(outcomes.size());
  std::vector<int> attempts(outcomes.size(), 1);
  std::map<std::uint64_t, std::string> seed_errors;
  std::vector<bool> failed(outcomes.size(), false);

  auto try_parse = [&](std::size_t i) {
    try {
      parsed[i] = parse_output(outcomes[i].completion->text, config.mode, space);
    } catch (const ParseError&) {
      parsed[i].reset();
    }
  };

  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].error) {
      try {
        std::rethrow_exception(outcomes[i].error);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        failed[i] = true;
        seed_errors.emplace(prepared.queries[i].seed, std::string("transport: ") + e.what());
      }
      continue;
    }
    try_parse(i);
  }

  for (int retry = 0; retry < config.parse_retries; ++retry) {
    std::vector<std::size_t> again;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (!failed[i] && !parsed[i]) again.push_back(i);
    }
    if (again.empty()) break;
    std::vector<CompletionRequest> retry_requests;
    for (auto i : again) retry_requests.push_back(requests[i]);
    auto retry_outcomes = gateway.complete_batch(retry_requests, /*bypass_cache=*/true);
    for (std::size_t k = 0; k < again.size(); ++k) {
      const auto i = again[k];
      ++attempts[i];
      if (retry_outcomes[k].error) continue;
      outcomes[i] = std::move(retry_outcomes[k]);
      try_parse(i);
    }
  }

  RunLog log;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& pq = prepared.queries[i];
    if (failed[i] || seed_errors.contains(pq.seed)) continue;
    const auto& ex = corpus.get(pq.id);
    const int total_attempts = attempts[i];
    log.verdicts.push_back(make_verdict(pq, ex, config, *outcomes[i].completion,
                                        parsed[i] ? &*parsed[i] : nullptr, total_attempts));
  }
  std::sort(log.verdicts.begin(), log.verdicts.end(), [](const Verdict& a, const Verdict& b) {
    return std::tie(a.seed, a.id) < std::tie(b.seed, b.id);
  });

  for (auto& s : prepared.seeds) {
    if (auto it = seed_errors.find(s.seed); it != seed_errors.end() && !s.error) s.error = it->second;
  }
  log.manifest.config = config.to_json();
  log.manifest.corpus_hash = corpus.content_hash();
  log.manifest.corpus_source = corpus.source();
  log.manifest.space_name = space.name();
  log.manifest.seeds = std::move(prepared.seeds);
  log.manifest.n_verdicts = log.verdicts.size();
  for (const auto& v : log.verdicts) {
    log.manifest.n_unparsed += v.unparsed ? 1 : 0;
    log.manifest.n_flagged += v.flagged ? 1 : 0;
  }
  return log;
}

RunLog run(const Corpus& corpus, const RunConfig& config) {
  Gateway gateway(make_backend(config.backend, corpus), config.backend);
  return run(corpus, config, gateway);
}

namespace {

void require_mode(const RunConfig& config, PromptMode mode) {
  if (config.mode != mode) {
    throw ConfigError("expected a " + std::string(to_string(mode)) + " config, got " +
                      std::string(to_string(config.mode)));
  }
}

}  // namespace

RunLog run_liahr(const Corpus& corpus, const RunConfig& config, Gateway& gateway) {
  require_mode(config, PromptMode::liahr);
  return run(corpus, config, gateway);
}

RunLog run_baseline(const Corpus& corpus, const RunConfig& config, Gateway& gateway) {
  require_mode(config, PromptMode::baseline);
  return run(corpus, config, gateway);
}

RunLog run_icl(const Corpus& corpus, const RunConfig& config, Gateway& gateway) {
  require_mode(config, PromptMode::icl);
  return run(corpus, config, gateway);
}

nlohmann::ordered_json RunSummary::to_json() const {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["n_parsed"] = n_parsed;
  j["n_unparsed"] = n_unparsed;
  j["n_flagged"] = n_flagged;
  j["exact_rate"] = exact_rate;
  j["jaccard_rate"] = jaccard_rate;
  j["flag_rate"] = flag_rate;
  j["mean_jaccard_to_gold"] = mean_jaccard_to_gold;
  auto by_seed = nlohmann::ordered_json::array();
  for (const auto& [s, r] : jaccard_rate_by_seed) by_seed.push_back({{"seed", s}, {"jaccard_rate", r}});
  j["jaccard_rate_by_seed"] = std::move(by_seed);
  j["orientation"] = orientation;
  return j;
}

RunSummary summarize(const RunLog& log) {
  RunSummary s;
  s.n = log.verdicts.size();
  std::map<std::uint64_t, std::pair<double, std::size_t>> per_seed;
  double exact = 0, jac = 0, jg = 0;
  for (const auto& v : log.verdicts) {
    if (v.unparsed) {
      ++s.n_unparsed;
      continue;
    }
    ++s.n_parsed;
    s.n_flagged += v.flagged ? 1 : 0;
    exact += v.copied_exact ? 1.0 : 0.0;
    jac += v.jaccard_to_provided;
    jg += v.jaccard_to_gold;
    auto& ps = per_seed[v.seed];
    ps.first += v.jaccard_to_provided;
    ps.second += 1;
  }
  if (s.n_parsed > 0) {
    const auto n = static_cast<double>(s.n_parsed);
    s.exact_rate = exact / n;
    s.jaccard_rate = jac / n;
    s.mean_jaccard_to_gold = jg / n;
    s.flag_rate = static_cast<double>(s.n_flagged) / n;
  }
  for (const auto& [seed, acc] : per_seed) {
    s.jaccard_rate_by_seed.emplace_back(seed, acc.first / static_cast<double>(acc.second));
  }
  const auto src = log.manifest.config.value("query_label_source", std::string("gold"));
  const bool adversarial = log.mode() != PromptMode::icl && (src == "random" || src == "flipped");
  s.orientation = adversarial ? "lower_is_better" : "higher_is_better";
  return s;
}

std::string verdicts_to_jsonl(const RunLog& log, const LabelSpace& space) {
  std::string out;
  for (const auto& v : log.verdicts) {
    out += v.to_json(space).dump();
    out += '\n';
  }
  return out;
}

void write_run_log(const RunLog& log, const LabelSpace& space, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "verdicts.jsonl", std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + (dir / "verdicts.jsonl").string());
    out << verdicts_to_jsonl(log, space);
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + (dir / "manifest.json").string());
  out << log.manifest.to_json().dump(2) << '\n';
}

RunLog read_run_log(const std::filesystem::path& dir, const LabelSpace& space) {
  RunLog log;
  {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw ValidationError("missing run manifest in " + dir.string());
    const auto j = nlohmann::ordered_json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ValidationError("malformed run manifest in " + dir.string());
    log.manifest = RunManifest::from_json(nlohmann::json::parse(j.dump()));
    // Keep the stored key order so a re-written manifest is byte-identical.
    if (j.contains("config")) log.manifest.config = j.at("config");
  }
  std::ifstream in(dir / "verdicts.jsonl");
  if (!in) throw ValidationError("missing verdict log in " + dir.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      log.verdicts.push_back(Verdict::from_json(nlohmann::json::parse(line), space));
    } catch (const std::exception& e) {
      throw ValidationError("verdicts.jsonl line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

}  // namespace liahr
