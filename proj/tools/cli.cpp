#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "liahr/error.hpp"
#include "liahr/gateway.hpp"
#include "liahr/hash.hpp"
#include "liahr/metrics.hpp"
#include "liahr/parse.hpp"
#include "liahr/pipeline.hpp"
#include "liahr/properties.hpp"
#include "liahr/review.hpp"
#include "liahr/stats.hpp"

namespace fs = std::filesystem;

namespace liahr::cli {

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
  if (!out) throw ValidationError("failed writing " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string utc_stamp(const char* format) {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, format, &tm);
  return buf;
}

std::string fmt_g(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string fmt_f(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

template <typename T>
std::vector<T> parse_list(const std::string& s, const char* what) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = std::string(trim(item));
    if (t.empty()) continue;
    std::istringstream is(t);
    T v{};
    if (!(is >> v) || !is.eof()) throw ConfigError(std::string("bad value '") + t + "' in " + what);
    out.push_back(v);
  }
  return out;
}

std::vector<Split> parse_splits(const std::string& s) {
  std::vector<Split> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(split_from_string(trim(item)));
    } catch (const ValidationError& e) {
      throw ConfigError(e.what());
    }
  }
  return out;
}

LabelSpacePtr load_space(const fs::path& p) {
  if (p.empty()) throw ConfigError("a label space (--space) is required");
  return LabelSpace::load(p);
}

Corpus load_corpus_arg(const fs::path& p, LabelSpacePtr space) {
  if (p.empty()) throw ConfigError("a corpus (--corpus) is required");
  return load_corpus(p, std::move(space));
}

const std::set<std::string>& run_spec_keys() {
  static const std::set<std::string> keys{
      "space", "corpus", "out", "output_root", "mode", "n_shots", "query_label_source",
      "demos_use_source_labels", "query_position", "seeds", "queries_per_seed", "full_corpus",
      "demo_splits", "query_splits", "flag_tolerance", "parse_retries", "random_mode", "instruction",
      "layout", "backend"};
  return keys;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

nlohmann::ordered_json RunSpec::to_json() const {
  nlohmann::ordered_json j;
  j["space"] = space.string();
  j["corpus"] = corpus.string();
  const auto cfg = config.to_json();
  for (const auto& [k, v] : cfg.items()) j[k] = v;
  return j;
}

RunSpec RunSpec::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("run spec must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!run_spec_keys().contains(k)) throw ConfigError("unknown run spec key '" + k + "'");
  }
  RunSpec s;
  try {
    if (j.contains("space")) s.space = resolve(base_dir, j.at("space").get<std::string>());
    if (j.contains("corpus")) s.corpus = resolve(base_dir, j.at("corpus").get<std::string>());
    if (j.contains("out")) s.out = resolve(base_dir, j.at("out").get<std::string>());
    if (j.contains("output_root")) s.output_root = resolve(base_dir, j.at("output_root").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run spec: ") + e.what());
  }
  auto cfg = j;
  if (cfg.contains("backend")) {
    auto& mock = cfg["backend"];
    if (mock.contains("mock") && mock["mock"].contains("oracle_corpus")) {
      mock["mock"]["oracle_corpus"] = resolve(base_dir, mock["mock"]["oracle_corpus"].get<std::string>()).string();
    }
    if (mock.contains("cache_dir")) mock["cache_dir"] = resolve(base_dir, mock["cache_dir"].get<std::string>()).string();
  }
  s.config = RunConfig::from_json(cfg);
  return s;
}

RunSpec RunSpec::load(const fs::path& path) { return from_json(read_json(path), path.parent_path()); }

nlohmann::ordered_json run_report(const RunLog& log, const LabelSpace& space) {
  nlohmann::ordered_json j;
  j["mode"] = std::string(to_string(log.mode()));
  j["source"] = log.source().str();
  j["corpus_hash"] = log.manifest.corpus_hash;
  j["status"] = log.manifest.complete() ? "complete" : "partial";
  j["summary"] = summarize(log).to_json();
  if (log.mode() == PromptMode::baseline) {
    std::size_t reasonable = 0, unreasonable = 0;
    for (const auto& v : log.verdicts) {
      if (v.unparsed) continue;
      (v.flagged ? unreasonable : reasonable)++;
    }
    j["assessments"] = {{"reasonable", reasonable}, {"unreasonable", unreasonable}};
  } else {
    std::vector<metrics::LabelPair> copy, gold;
    std::size_t unparsed = 0;
    for (const auto& v : log.verdicts) {
      if (v.unparsed || !v.predicted) {
        ++unparsed;
        continue;
      }
      copy.push_back({*v.predicted, v.provided});
      gold.push_back({*v.predicted, v.gold});
    }
    if (copy.empty()) {
      j["copy_metrics"] = nullptr;
      j["gold_metrics"] = nullptr;
    } else {
      j["copy_metrics"] = metrics::evaluate(copy, space, unparsed).to_json();
      j["gold_metrics"] = metrics::evaluate(gold, space, unparsed).to_json();
    }
  }
  auto seeds = nlohmann::ordered_json::array();
  for (const auto& s : log.manifest.seeds) {
    seeds.push_back({{"seed", s.seed}, {"queries", s.queries.size()},
                     {"error", s.error ? nlohmann::ordered_json(*s.error) : nlohmann::ordered_json(nullptr)}});
  }
  j["seeds"] = std::move(seeds);
  return j;
}

std::string run_report_markdown(const RunLog& log, const LabelSpace& space) {
  const auto s = summarize(log);
  std::ostringstream out;
  out << "# " << to_string(log.mode()) << " run (" << log.source().str() << ")\n\n";
  out << "| metric | value |\n|---|---|\n";
  out << "| verdicts | " << s.n << " |\n";
  out << "| parsed | " << s.n_parsed << " |\n";
  out << "| unparsed | " << s.n_unparsed << " |\n";
  out << "| flagged | " << s.n_flagged << " |\n";
  out << "| exact copy rate | " << fmt_f(s.exact_rate) << " |\n";
  out << "| jaccard copy rate | " << fmt_f(s.jaccard_rate) << " |\n";
  out << "| flag rate | " << fmt_f(s.flag_rate) << " |\n";
  out << "| mean jaccard to gold | " << fmt_f(s.mean_jaccard_to_gold) << " |\n";
  out << "| orientation | " << s.orientation << " |\n";
  for (const auto& [seed, rate] : s.jaccard_rate_by_seed) {
    out << "| seed " << seed << " jaccard rate | " << fmt_f(rate) << " |\n";
  }
  if (log.mode() != PromptMode::baseline) {
    const auto r = run_report(log, space);
    const auto& g = r.at("gold_metrics");
    if (!g.is_null()) {
      out << "\nAgainst gold: jaccard " << fmt_f(g.at("jaccard_samples").get<double>()) << ", micro-F1 "
          << fmt_f(g.at("micro_f1").get<double>()) << ", macro-F1 " << fmt_f(g.at("macro_f1").get<double>())
          << "\n";
    }
  }
  if (!log.manifest.complete()) {
    out << "\nPartial run:\n";
    for (const auto& seed : log.manifest.seeds) {
      if (seed.error) out << "- seed " << seed.seed << ": " << *seed.error << "\n";
    }
  }
  return out.str();
}

std::vector<std::vector<std::string>> read_delimited(std::string_view text, char delimiter) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      field_started = true;
    } else if (c == delimiter) {
      row.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (field_started || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      field_started = false;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw ValidationError("unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

Corpus import_table(std::string_view text, LabelSpacePtr space, const TableImport& opts) {
  const char delim = opts.delimiter ? opts.delimiter : ',';
  const auto rows = read_delimited(text, delim);
  if (rows.empty()) throw ValidationError("input table is empty");
  const auto& header = rows.front();
  auto column = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    if (required) throw ValidationError("input table has no column '" + name + "'");
    return std::nullopt;
  };
  const auto id_col = column(opts.id_column, false);
  const auto text_col = *column(opts.text_column, true);
  const auto label_col = *column(opts.label_column, true);
  const auto split_col = column(opts.split_column, false);

  std::vector<AnnotatedExample> examples;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const auto line = std::to_string(r + 1);
    if (row.size() != header.size()) {
      throw ValidationError("row " + line + ": expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(row.size()));
    }
    AnnotatedExample ex;
    if (id_col) {
      ex.id = std::string(trim(row[*id_col]));
    } else {
      char buf[32];
      std::snprintf(buf, sizeof buf, "row-%06zu", r);
      ex.id = buf;
    }
    ex.text = row[text_col];
    std::vector<std::string> names;
    std::stringstream ss(row[label_col]);
    std::string item;
    const char sep = space->kind() == TaskKind::multilabel ? opts.label_separator : '\0';
    auto add = [&](std::string raw) {
      auto name = to_lower(trim(raw));
      if (name.empty()) return;
      if (auto m = opts.label_map.find(name); m != opts.label_map.end()) name = m->second;
      if (name.empty()) return;
      if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    };
    if (sep == '\0') {
      add(row[label_col]);
    } else {
      while (std::getline(ss, item, sep)) add(item);
    }
    try {
      ex.gold = space->make_set(names);
      if (split_col && !trim(row[*split_col]).empty()) ex.split = split_from_string(trim(row[*split_col]));
    } catch (const ValidationError& e) {
      throw ValidationError("row " + line + ": " + e.what());
    }
    examples.push_back(std::move(ex));
  }
  return Corpus(std::move(space), std::move(examples));
}

namespace {

struct Session {
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> argv;
};

properties::Thresholds load_thresholds(const std::optional<fs::path>& path) {
  properties::Thresholds t;
  if (!path) return t;
  const auto j = read_json(*path);
  try {
    t.gap = j.value("gap", t.gap);
    if (j.contains("flag_band")) {
      const auto b = j.at("flag_band").get<std::vector<double>>();
      if (b.size() != 2) throw ConfigError("flag_band needs two values");
      t.flag_band = {b[0], b[1]};
    }
    t.drop = j.value("drop", t.drop);
    t.trend_band = j.value("trend_band", t.trend_band);
    t.annotator_spread = j.value("annotator_spread", t.annotator_spread);
    t.position_range = j.value("position_range", t.position_range);
    t.per_label_sigma = j.value("per_label_sigma", t.per_label_sigma);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("thresholds: ") + e.what());
  }
  return t;
}

fs::path unique_run_dir(const fs::path& root, const std::string& stem) {
  fs::path dir = root / stem;
  for (int i = 1; fs::exists(dir); ++i) dir = root / (stem + "-" + std::to_string(i));
  return dir;
}

void write_run_info(const fs::path& dir, const Session& s) {
  nlohmann::ordered_json info;
  info["created_utc"] = utc_stamp("%Y-%m-%dT%H:%M:%SZ");
  info["argv"] = s.argv;
  write_file(dir / "run_info.json", info.dump(2) + "\n");
}

int seed_error_code(const RunLog& log) {
  int code = kOk;
  for (const auto& s : log.manifest.seeds) {
    if (!s.error) continue;
    if (s.error->rfind("transport:", 0) == 0) return kTransport;
    code = kValidation;
  }
  return code;
}

struct RunArgs {
  std::optional<fs::path> config;
  std::optional<fs::path> space, corpus, out, output_root, cache_dir;
  std::optional<std::string> backend, source, seeds, query_splits, demo_splits, random_mode;
  std::optional<std::size_t> queries, shots, position;
  std::optional<double> tolerance;
  bool full_corpus = false;
  bool dry_run = false;
  bool bypass_cache = false;
};

void add_run_options(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("-c,--config", a.config, "RunSpec JSON file");
  cmd->add_option("--space", a.space, "label space JSON");
  cmd->add_option("--corpus", a.corpus, "canonical JSONL corpus");
  cmd->add_option("--backend", a.backend, "backend shorthand, e.g. mock:echo, mock:oracle, mock:prior");
  cmd->add_option("--source", a.source, "query label source: gold, random, flipped, annotator:<k>, alt:<name>");
  cmd->add_option("--seeds", a.seeds, "comma-separated seeds");
  cmd->add_option("--queries", a.queries, "queries per seed");
  cmd->add_option("--shots", a.shots, "demonstrations per prompt");
  cmd->add_option("--position", a.position, "query position among the demonstrations");
  cmd->add_option("--tolerance", a.tolerance, "flag when jaccard(predicted, provided) is below this");
  cmd->add_option("--query-splits", a.query_splits, "comma-separated splits for queries");
  cmd->add_option("--demo-splits", a.demo_splits, "comma-separated splits for demonstrations");
  cmd->add_option("--random-mode", a.random_mode, "donor or uniform_subset");
  cmd->add_option("--cache-dir", a.cache_dir, "response cache directory");
  cmd->add_flag("--no-cache", a.bypass_cache, "ignore cached responses");
  cmd->add_flag("--full-corpus", a.full_corpus, "query every example of the query splits");
  cmd->add_option("-o,--out", a.out, "exact output directory");
  cmd->add_option("--output-root", a.output_root, "parent of timestamped output directories");
  cmd->add_flag("--dry-run", a.dry_run, "render prompts without calling a backend");
}

RunSpec build_spec(const RunArgs& a, PromptMode mode) {
  RunSpec spec = a.config ? RunSpec::load(*a.config) : RunSpec{};
  if (a.space) spec.space = *a.space;
  if (a.corpus) spec.corpus = *a.corpus;
  if (a.out) spec.out = *a.out;
  if (a.output_root) spec.output_root = *a.output_root;
  auto& c = spec.config;
  c.mode = mode;
  if (a.backend) apply_backend_shorthand(c.backend, *a.backend);
  if (a.source) {
    try {
      c.query_label_source = LabelSource::parse(*a.source);
    } catch (const ValidationError& e) {
      throw ConfigError(e.what());
    }
  }
  if (a.seeds) c.seeds = parse_list<std::uint64_t>(*a.seeds, "--seeds");
  if (a.queries) c.queries_per_seed = *a.queries;
  if (a.shots) c.n_shots = *a.shots;
  if (a.position) c.query_position = *a.position;
  if (a.tolerance) c.flag_tolerance = *a.tolerance;
  if (a.query_splits) c.query_splits = parse_splits(*a.query_splits);
  if (a.demo_splits) c.demo_splits = parse_splits(*a.demo_splits);
  if (a.random_mode) {
    if (*a.random_mode == "donor") {
      c.random_mode = RandomLabelMode::donor;
    } else if (*a.random_mode == "uniform_subset") {
      c.random_mode = RandomLabelMode::uniform_subset;
    } else {
      throw ConfigError("unknown --random-mode '" + *a.random_mode + "'");
    }
  }
  if (a.cache_dir) c.backend.cache_dir = *a.cache_dir;
  if (a.bypass_cache) c.backend.bypass_cache = true;
  if (a.full_corpus) c.full_corpus = true;
  c.validate();
  c.backend.validate();
  return spec;
}

int cmd_run(const RunArgs& a, PromptMode mode, Session& s) {
  auto spec = build_spec(a, mode);
  auto space = load_space(spec.space);
  const auto corpus = load_corpus_arg(spec.corpus, space);
  spec.space = fs::absolute(spec.space).lexically_normal();
  spec.corpus = fs::absolute(spec.corpus).lexically_normal();
  const auto spec_json = spec.to_json();

  fs::path dir;
  if (spec.out) {
    dir = *spec.out;
  } else {
    const auto tag = sha256_hex(spec_json.dump()).substr(0, 8);
    dir = unique_run_dir(spec.output_root,
                         std::string(to_string(mode)) + "-" + utc_stamp("%Y%m%dT%H%M%SZ") + "-" + tag);
  }
  fs::create_directories(dir);
  write_file(dir / "runspec.json", spec_json.dump(2) + "\n");
  write_run_info(dir, s);

  if (a.dry_run) {
    const auto prepared = prepare_run(corpus, spec.config);
    std::string index;
    for (const auto& q : prepared.queries) {
      const auto name = std::to_string(q.seed) + "-" + q.id + ".txt";
      write_file(dir / "prompts" / name, q.request.prompt.text);
      nlohmann::ordered_json row{{"seed", q.seed}, {"id", q.id}, {"file", "prompts/" + name},
                                 {"fingerprint", q.request.prompt.fingerprint}};
      index += row.dump() + "\n";
    }
    write_file(dir / "prompts.jsonl", index);
    s.out << "rendered " << prepared.queries.size() << " prompt(s) into " << dir.string() << "\n";
    for (const auto& seed : prepared.seeds) {
      if (seed.error) s.err << "seed " << seed.seed << ": " << *seed.error << "\n";
    }
    return kOk;
  }

  Gateway gateway(make_backend(spec.config.backend, corpus), spec.config.backend);
  const auto log = run(corpus, spec.config, gateway);
  write_run_log(log, *space, dir);
  write_file(dir / "report.json", run_report(log, *space).dump(2) + "\n");
  const auto md = run_report_markdown(log, *space);
  write_file(dir / "report.md", md);
  s.out << md << "\nartifacts: " << dir.string() << "\n";
  for (const auto& seed : log.manifest.seeds) {
    if (seed.error) s.err << "seed " << seed.seed << ": " << *seed.error << "\n";
  }
  return seed_error_code(log);
}

struct PropertiesArgs {
  std::optional<fs::path> space, gold, random, icl, per_label, sweep, thresholds;
  std::vector<fs::path> diversity;
  fs::path out;
};

int cmd_properties(const PropertiesArgs& a, Session& s) {
  const auto space = load_space(a.space.value_or(fs::path{}));
  const auto t = load_thresholds(a.thresholds);
  std::vector<properties::PropertyReport> reports;
  auto log = [&](const fs::path& p) { return read_run_log(p, *space); };

  std::optional<RunLog> gold, random;
  if (a.gold) gold = log(*a.gold);
  if (a.random) random = log(*a.random);
  if (gold && a.icl) reports.push_back(properties::nonconformity(*gold, log(*a.icl), t));
  if (gold && random) reports.push_back(properties::noise_rejection(*gold, *random, t));
  if (random) reports.push_back(properties::rectification(*random, t));
  if (!a.diversity.empty()) {
    std::vector<RunLog> runs;
    for (const auto& p : a.diversity) runs.push_back(log(p));
    reports.push_back(properties::diversity(runs, *space, t));
  }
  if (a.per_label) reports.push_back(properties::per_label_rates(log(*a.per_label), *space, t));
  if (a.sweep) {
    const auto spec = RunSpec::load(*a.sweep);
    const auto corpus = load_corpus_arg(spec.corpus, load_space(spec.space));
    Gateway gateway(make_backend(spec.config.backend, corpus), spec.config.backend);
    auto sweep = properties::position_sweep(corpus, spec.config, gateway, t);
    for (std::size_t i = 0; i < sweep.runs.size(); ++i) {
      write_run_log(sweep.runs[i], corpus.space(), a.out / "position_sweep" / ("position-" + std::to_string(i)));
    }
    reports.push_back(std::move(sweep.report));
  }
  if (reports.empty()) {
    throw ConfigError("no property inputs given (use --gold/--random/--icl/--diversity/--per-label/--sweep)");
  }

  auto arr = nlohmann::ordered_json::array();
  std::string md;
  for (const auto& r : reports) {
    arr.push_back(r.to_json());
    md += "## " + r.property + "\n\n" + r.summary_table() + "\n";
  }
  fs::create_directories(a.out);
  write_file(a.out / "properties.json", arr.dump(2) + "\n");
  write_file(a.out / "properties.md", md);
  write_file(a.out / "scores.csv", properties::scores_csv(reports));
  s.out << md;
  return kOk;
}

struct CorrectArgs {
  std::optional<fs::path> space, corpus, liahr, baseline, icl;
  std::string mode;
  bool exclude_test = false;
  fs::path out;
};

int cmd_correct(const CorrectArgs& a, Session& s) {
  const auto mode = pipeline_mode_from_string(a.mode);
  const auto space = load_space(a.space.value_or(fs::path{}));
  const auto corpus = load_corpus_arg(a.corpus.value_or(fs::path{}), space);
  std::optional<RunLog> liahr, baseline, icl;
  if (a.liahr) liahr = read_run_log(*a.liahr, *space);
  if (a.baseline) baseline = read_run_log(*a.baseline, *space);
  if (a.icl) icl = read_run_log(*a.icl, *space);
  PipelineInputs inputs{liahr ? &*liahr : nullptr, baseline ? &*baseline : nullptr, icl ? &*icl : nullptr};
  PipelineOptions opts;
  opts.exclude_test = a.exclude_test;
  const auto [fixed, manifest] = apply_pipeline(corpus, mode, inputs, opts);
  fs::create_directories(a.out);
  write_corpus(fixed, a.out / "corpus.jsonl");
  write_file(a.out / "change_manifest.json", manifest.to_json(*space).dump(2) + "\n");
  const auto table = manifest.summary_table();
  write_file(a.out / "change_summary.md", "# " + manifest.mode + "\n\n" + table);
  s.out << table;
  for (const auto& w : manifest.warnings()) s.err << "warning: " << w << "\n";
  return kOk;
}

void print_test(Session& s, const stats::TestResult& r, bool json) {
  if (json) {
    s.out << r.to_json().dump() << "\n";
    return;
  }
  s.out << r.method << ": statistic = " << fmt_g(r.statistic) << ", df = " << r.df
        << ", p = " << fmt_g(r.p_value, 3) << "\n";
}

struct ServeArgs {
  std::optional<fs::path> space, corpus, static_dir, export_dir;
  fs::path store;
  std::vector<fs::path> logs;
  std::string host = "127.0.0.1";
  int port = 8080;
  bool unseal = false;
  std::uint64_t order_seed = 0;
};

int cmd_serve(const ServeArgs& a, Session& s) {
  const auto space = load_space(a.space.value_or(fs::path{}));
  const auto corpus = load_corpus_arg(a.corpus.value_or(fs::path{}), space);
  ReviewStore store(space, a.store, a.order_seed);
  for (const auto& p : a.logs) {
    const auto n = store.enqueue(read_run_log(p, *space), corpus);
    s.out << "enqueued " << n << " item(s) from " << p.string() << "\n";
  }
  ReviewServerOptions opts;
  opts.unseal = a.unseal;
  opts.static_dir = a.static_dir;
  opts.export_dir = a.export_dir;
  ReviewServer server(store, corpus, opts);
  if (!server.bind(a.host, a.port)) throw ConfigError("cannot bind " + a.host + ":" + std::to_string(a.port));
  s.out << "review queue on http://" << a.host << ":" << a.port << "/ (" << store.progress().pending
        << " pending)" << std::endl;
  server.listen_after_bind();
  store.snapshot();
  return kOk;
}

struct ReportArgs {
  std::optional<fs::path> space, csv;
  std::vector<fs::path> logs;
};

int cmd_report(const ReportArgs& a, Session& s) {
  const auto space = load_space(a.space.value_or(fs::path{}));
  std::string csv = "log,mode,source,n,n_parsed,n_flagged,exact_rate,jaccard_rate,flag_rate,mean_jaccard_to_gold\n";
  for (const auto& p : a.logs) {
    const auto log = read_run_log(p, *space);
    s.out << run_report_markdown(log, *space) << "\n";
    const auto sum = summarize(log);
    csv += p.string() + "," + std::string(to_string(log.mode())) + "," + log.source().str() + "," +
           std::to_string(sum.n) + "," + std::to_string(sum.n_parsed) + "," + std::to_string(sum.n_flagged) +
           "," + fmt_g(sum.exact_rate, 10) + "," + fmt_g(sum.jaccard_rate, 10) + "," + fmt_g(sum.flag_rate, 10) +
           "," + fmt_g(sum.mean_jaccard_to_gold, 10) + "\n";
  }
  if (a.csv) write_file(*a.csv, csv);
  return kOk;
}

struct ConvertArgs {
  std::optional<fs::path> space, map;
  fs::path input, out;
  TableImport table;
  std::string delimiter;
  std::string label_separator = ",";
};

int cmd_convert(ConvertArgs a, Session& s) {
  const auto space = load_space(a.space.value_or(fs::path{}));
  if (a.delimiter == "tab" || a.delimiter == "\\t") {
    a.table.delimiter = '\t';
  } else if (a.delimiter.size() == 1) {
    a.table.delimiter = a.delimiter[0];
  } else if (a.delimiter.empty()) {
    const auto ext = a.input.extension().string();
    a.table.delimiter = (ext == ".tsv" || ext == ".tab") ? '\t' : ',';
  } else {
    throw ConfigError("--delimiter must be a single character or 'tab'");
  }
  if (a.label_separator.size() != 1) throw ConfigError("--label-sep must be a single character");
  a.table.label_separator = a.label_separator[0];
  if (a.map) {
    const auto map = read_json(*a.map);
    for (const auto& [k, v] : map.items()) {
      a.table.label_map[to_lower(k)] = to_lower(v.get<std::string>());
    }
  }
  const auto corpus = import_table(read_file(a.input), space, a.table);
  write_corpus(corpus, a.out);
  s.out << "wrote " << corpus.size() << " example(s) to " << a.out.string() << " (" << corpus.content_hash()
        << ")\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Session session{out, err, std::vector<std::string>(argv, argv + argc)};
  CLI::App app{"Label verification and rectification toolkit", "liahr"};
  app.require_subcommand(1);
  std::function<int()> action;

  RunArgs verify_args, baseline_args, icl_args;
  auto* verify = app.add_subcommand("verify", "LiaHR copy-check run");
  add_run_options(verify, verify_args);
  verify->callback([&] { action = [&] { return cmd_run(verify_args, PromptMode::liahr, session); }; });
  auto* baseline = app.add_subcommand("baseline", "reasonableness-baseline run");
  add_run_options(baseline, baseline_args);
  baseline->callback([&] { action = [&] { return cmd_run(baseline_args, PromptMode::baseline, session); }; });
  auto* icl = app.add_subcommand("icl", "plain in-context classification run");
  add_run_options(icl, icl_args);
  icl->callback([&] { action = [&] { return cmd_run(icl_args, PromptMode::icl, session); }; });

  PropertiesArgs prop_args;
  auto* props = app.add_subcommand("properties", "proxy property reports from run logs");
  props->add_option("--space", prop_args.space, "label space JSON")->required();
  props->add_option("--gold", prop_args.gold, "LiaHR run with gold query labels");
  props->add_option("--random", prop_args.random, "LiaHR run with random query labels");
  props->add_option("--icl", prop_args.icl, "ICL run matching --gold");
  props->add_option("--diversity", prop_args.diversity, "runs over annotator perspectives");
  props->add_option("--per-label", prop_args.per_label, "run for per-label copy rates");
  props->add_option("--sweep", prop_args.sweep, "RunSpec for a query-position sweep");
  props->add_option("--thresholds", prop_args.thresholds, "JSON threshold overrides");
  props->add_option("-o,--out", prop_args.out, "output directory")->required();
  props->callback([&] { action = [&] { return cmd_properties(prop_args, session); }; });

  CorrectArgs correct_args;
  auto* correct = app.add_subcommand("correct", "build a corrected corpus from verdict logs");
  correct->add_option("--space", correct_args.space, "label space JSON")->required();
  correct->add_option("--corpus", correct_args.corpus, "canonical JSONL corpus")->required();
  correct->add_option("--mode", correct_args.mode, "original|replaced|replaced_trn|filtered|bsl_filtered|predictions")
      ->required();
  correct->add_option("--liahr", correct_args.liahr, "LiaHR run directory");
  correct->add_option("--baseline", correct_args.baseline, "baseline run directory");
  correct->add_option("--icl", correct_args.icl, "ICL run directory");
  correct->add_flag("--exclude-test", correct_args.exclude_test, "leave the test split untouched in replaced mode");
  correct->add_option("-o,--out", correct_args.out, "output directory")->required();
  correct->callback([&] { action = [&] { return cmd_correct(correct_args, session); }; });

  auto* stats_cmd = app.add_subcommand("stats", "significance tests from counts");
  stats_cmd->require_subcommand(1);
  bool json = false;
  std::string table;
  auto* chi2 = stats_cmd->add_subcommand("chi2", "Yates-corrected 2x2 independence test");
  chi2->add_option("--table", table, "a,b,c,d (row-major)")->required();
  chi2->add_flag("--json", json, "machine-readable output");
  chi2->callback([&] {
    action = [&] {
      const auto v = parse_list<std::int64_t>(table, "--table");
      if (v.size() != 4) throw ConfigError("--table needs four counts");
      print_test(session, stats::chi2_independence_yates({v[0], v[1], v[2], v[3]}), json);
      return static_cast<int>(kOk);
    };
  });
  std::string ratio;
  std::optional<std::int64_t> successes, trials;
  bool one_sided = false;
  auto* binom = stats_cmd->add_subcommand("binom", "exact binomial test against 1/2");
  binom->add_option("ratio", ratio, "k/n");
  binom->add_option("-k,--successes", successes, "preferences for the model's labels");
  binom->add_option("-n,--trials", trials, "total judgements");
  binom->add_flag("--one-sided", one_sided, "report P(X >= k) instead of the doubled tail");
  binom->add_flag("--json", json, "machine-readable output");
  binom->callback([&] {
    action = [&] {
      std::int64_t k = 0, n = 0;
      if (!ratio.empty()) {
        const auto slash = ratio.find('/');
        if (slash == std::string::npos) throw ConfigError("ratio must look like k/n");
        k = parse_list<std::int64_t>(ratio.substr(0, slash), "ratio").at(0);
        n = parse_list<std::int64_t>(ratio.substr(slash + 1), "ratio").at(0);
      } else if (successes && trials) {
        k = *successes;
        n = *trials;
      } else {
        throw ConfigError("give k/n or --successes and --trials");
      }
      print_test(session, one_sided ? stats::binomial_one_sided(k, n) : stats::binomial_two_sided_doubled(k, n),
                 json);
      return static_cast<int>(kOk);
    };
  });
  std::string observed, expected;
  auto* gof = stats_cmd->add_subcommand("gof", "chi-square goodness of fit");
  gof->add_option("--observed", observed, "comma-separated counts")->required();
  gof->add_option("--expected", expected, "comma-separated probabilities")->required();
  gof->add_flag("--json", json, "machine-readable output");
  gof->callback([&] {
    action = [&] {
      const auto o = parse_list<std::int64_t>(observed, "--observed");
      const auto e = parse_list<double>(expected, "--expected");
      print_test(session, stats::chi2_goodness_of_fit(o, e), json);
      return static_cast<int>(kOk);
    };
  });

  ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "review queue HTTP service");
  serve->add_option("--space", serve_args.space, "label space JSON")->required();
  serve->add_option("--corpus", serve_args.corpus, "canonical JSONL corpus")->required();
  serve->add_option("--store", serve_args.store, "review state directory")->required();
  serve->add_option("--log", serve_args.logs, "LiaHR run directories to enqueue");
  serve->add_option("--host", serve_args.host, "bind address");
  serve->add_option("--port", serve_args.port, "bind port");
  serve->add_option("--static", serve_args.static_dir, "directory served at /");
  serve->add_option("--export-dir", serve_args.export_dir, "where POST /api/export writes files");
  serve->add_option("--order-seed", serve_args.order_seed, "seed for presentation order");
  serve->add_flag("--unseal", serve_args.unseal, "expose which candidate is the model's (debugging)");
  serve->callback([&] { action = [&] { return cmd_serve(serve_args, session); }; });

  ReportArgs report_args;
  auto* report = app.add_subcommand("report", "summaries of run logs");
  report->add_option("--space", report_args.space, "label space JSON")->required();
  report->add_option("logs", report_args.logs, "run directories")->required();
  report->add_option("--csv", report_args.csv, "write a CSV row per run");
  report->callback([&] { action = [&] { return cmd_report(report_args, session); }; });

  ConvertArgs convert_args;
  auto* convert = app.add_subcommand("convert", "CSV/TSV table to canonical JSONL");
  convert->add_option("--space", convert_args.space, "label space JSON")->required();
  convert->add_option("input", convert_args.input, "input table")->required();
  convert->add_option("-o,--out", convert_args.out, "output JSONL")->required();
  convert->add_option("--id-col", convert_args.table.id_column, "id column (row numbers if absent)");
  convert->add_option("--text-col", convert_args.table.text_column, "text column");
  convert->add_option("--label-col", convert_args.table.label_column, "label column");
  convert->add_option("--split-col", convert_args.table.split_column, "split column");
  convert->add_option("--delimiter", convert_args.delimiter, "cell delimiter (default from extension)");
  convert->add_option("--label-sep", convert_args.label_separator, "separator inside the label cell");
  convert->add_option("--map", convert_args.map, "JSON object mapping source labels to space labels");
  convert->callback([&] { action = [&] { return cmd_convert(convert_args, session); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfig;
  }

  try {
    return action ? action() : kConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const TransportError& e) {
    err << "transport error: " << e.what() << "\n";
    return kTransport;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const SamplingError& e) {
    err << "sampling error: " << e.what() << "\n";
    return kValidation;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kOther;
  }
}

}  // namespace liahr::cli
