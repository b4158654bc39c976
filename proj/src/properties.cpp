#include "liahr/properties.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "liahr/error.hpp"
#include "liahr/metrics.hpp"

namespace liahr::properties {

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::met: return "met";
    case Outcome::not_met: return "not_met";
    case Outcome::trend: return "trend";
  }
  return "?";
}

nlohmann::ordered_json Thresholds::to_json() const {
  nlohmann::ordered_json j;
  j["provenance"] = "toolkit default unless overridden";
  j["gap"] = gap;
  j["flag_band"] = {flag_band.first, flag_band.second};
  j["drop"] = drop;
  j["trend_band"] = trend_band;
  j["annotator_spread"] = annotator_spread;
  j["position_range"] = position_range;
  j["per_label_sigma"] = per_label_sigma;
  return j;
}

double PropertyReport::score(const std::string& name) const {
  for (const auto& [k, v] : scores) {
    if (k == name) return v;
  }
  throw ValidationError("report '" + property + "' has no score '" + name + "'");
}

bool PropertyReport::has_score(const std::string& name) const {
  return std::any_of(scores.begin(), scores.end(), [&](const auto& kv) { return kv.first == name; });
}

nlohmann::ordered_json PropertyReport::to_json() const {
  nlohmann::ordered_json j;
  j["property"] = property;
  j["inputs"] = inputs;
  nlohmann::ordered_json s = nlohmann::ordered_json::object();
  for (const auto& [k, v] : scores) s[k] = v;
  j["scores"] = std::move(s);
  j["outcome"] = std::string(to_string(outcome));
  nlohmann::ordered_json by = nlohmann::ordered_json::object();
  for (const auto& [k, v] : outcomes_by_semantics) by[k] = std::string(to_string(v));
  j["outcomes_by_semantics"] = std::move(by);
  j["thresholds"] = thresholds;
  j["details"] = details;
  return j;
}

std::string PropertyReport::summary_table() const {
  std::ostringstream out;
  out << "### " << property << "\n\n| score | value |\n|---|---|\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& [k, v] : scores) out << "| " << k << " | " << v << " |\n";
  out << "| outcome | " << to_string(outcome) << " |\n";
  for (const auto& [k, v] : outcomes_by_semantics) out << "| outcome (" << k << ") | " << to_string(v) << " |\n";
  return out.str();
}

namespace {

std::string describe(const RunLog& log) {
  return std::string(liahr::to_string(log.mode())) + ":" + log.source().str() + "@" +
         log.manifest.corpus_hash.substr(0, 12);
}

std::vector<std::uint64_t> seed_list(const RunLog& log) {
  std::vector<std::uint64_t> out;
  for (const auto& s : log.manifest.seeds) out.push_back(s.seed);
  return out;
}

void require_runs_match(const RunLog& a, const RunLog& b, bool same_shots) {
  if (a.manifest.corpus_hash != b.manifest.corpus_hash) {
    throw ValidationError("mismatched manifests: runs were made on different corpora");
  }
  if (seed_list(a) != seed_list(b)) throw ValidationError("mismatched manifests: runs use different seeds");
  if (same_shots && a.n_shots() != b.n_shots()) {
    throw ValidationError("mismatched manifests: runs use different numbers of shots");
  }
}

void require_nonempty(const RunLog& log, const char* what) {
  if (log.verdicts.empty()) throw ValidationError(std::string(what) + " is missing or empty");
}

Outcome threshold_outcome(bool ok) { return ok ? Outcome::met : Outcome::not_met; }

Outcome margin_outcome(double margin, double band) {
  if (margin > 0.0) return Outcome::met;
  if (margin > -band) return Outcome::trend;
  return Outcome::not_met;
}

}  // namespace

PropertyReport nonconformity(const RunLog& gold_run, const RunLog& icl_run, const Thresholds& t) {
  require_nonempty(gold_run, "gold liahr run");
  require_nonempty(icl_run, "icl run");
  if (gold_run.mode() != PromptMode::liahr || gold_run.source().kind != LabelSourceKind::gold) {
    throw ValidationError("nonconformity needs a liahr run with gold query labels");
  }
  if (icl_run.mode() != PromptMode::icl) throw ValidationError("nonconformity needs an icl reference run");
  require_runs_match(gold_run, icl_run, /*same_shots=*/true);

  const auto g = summarize(gold_run);
  const auto c = summarize(icl_run);
  PropertyReport r;
  r.property = "nonconformity";
  r.inputs = {describe(gold_run), describe(icl_run)};
  const double gap = g.jaccard_rate - c.jaccard_rate;
  const double gap_exact = g.exact_rate - c.exact_rate;
  r.scores = {{"gold_copy_rate", g.jaccard_rate},
              {"gold_copy_rate_exact", g.exact_rate},
              {"icl_rate", c.jaccard_rate},
              {"icl_rate_exact", c.exact_rate},
              {"gap", gap},
              {"gap_exact", gap_exact},
              {"flag_rate", g.flag_rate},
              {"n_unparsed", static_cast<double>(g.n_unparsed + c.n_unparsed)}};
  const bool in_band = g.flag_rate >= t.flag_band.first && g.flag_rate <= t.flag_band.second;
  r.outcome = threshold_outcome(gap >= t.gap && in_band);
  r.outcomes_by_semantics = {{"jaccard", r.outcome},
                             {"exact", threshold_outcome(gap_exact >= t.gap && in_band)}};
  r.thresholds = {{"gap", t.gap}, {"flag_band", {t.flag_band.first, t.flag_band.second}},
                  {"provenance", "toolkit default unless overridden"}};
  return r;
}

PropertyReport noise_rejection(const RunLog& gold_run, const RunLog& random_run, const Thresholds& t) {
  require_nonempty(gold_run, "gold run");
  require_nonempty(random_run, "random run");
  auto strip = [](nlohmann::ordered_json c) {
    c.erase("query_label_source");
    return c;
  };
  if (strip(gold_run.manifest.config) != strip(random_run.manifest.config)) {
    throw ValidationError("mismatched manifests: runs must differ only in query_label_source");
  }
  require_runs_match(gold_run, random_run, true);
  if (gold_run.source().kind != LabelSourceKind::gold) throw ValidationError("first run must use gold labels");
  const auto rs = random_run.source().kind;
  if (rs != LabelSourceKind::random && rs != LabelSourceKind::flipped) {
    throw ValidationError("second run must use random (or flipped) labels");
  }

  const auto g = summarize(gold_run);
  const auto x = summarize(random_run);
  PropertyReport r;
  r.property = "noise_rejection";
  r.inputs = {describe(gold_run), describe(random_run)};
  const double degradation = g.jaccard_rate - x.jaccard_rate;
  const double degradation_exact = g.exact_rate - x.exact_rate;
  r.scores = {{"gold_success", g.jaccard_rate},
              {"random_success", x.jaccard_rate},
              {"degradation", degradation},
              {"gold_success_exact", g.exact_rate},
              {"random_success_exact", x.exact_rate},
              {"degradation_exact", degradation_exact}};
  r.outcome = threshold_outcome(degradation >= t.drop);
  r.outcomes_by_semantics = {{"jaccard", r.outcome}, {"exact", threshold_outcome(degradation_exact >= t.drop)}};
  r.thresholds = {{"drop", t.drop}, {"provenance", "toolkit default unless overridden"}};
  return r;
}

PropertyReport rectification(const RunLog& random_run, const Thresholds& t) {
  require_nonempty(random_run, "random run");
  if (random_run.mode() != PromptMode::liahr || random_run.source().kind != LabelSourceKind::random) {
    throw ValidationError("rectification needs a liahr run with randomized query labels");
  }
  double to_gold = 0, to_random = 0, exact_gold = 0, exact_random = 0;
  std::size_t n = 0;
  for (const auto& v : random_run.verdicts) {
    if (v.unparsed) continue;
    ++n;
    to_gold += v.jaccard_to_gold;
    to_random += v.jaccard_to_provided;
    exact_gold += (*v.predicted == v.gold) ? 1.0 : 0.0;
    exact_random += v.copied_exact ? 1.0 : 0.0;
  }
  if (n == 0) throw ValidationError("random run has no parsed verdicts");
  const double dn = static_cast<double>(n);
  PropertyReport r;
  r.property = "rectification";
  r.inputs = {describe(random_run)};
  const double margin = (to_gold - to_random) / dn;
  const double margin_exact = (exact_gold - exact_random) / dn;
  r.scores = {{"sim_to_gold", to_gold / dn},
              {"sim_to_random", to_random / dn},
              {"margin", margin},
              {"sim_to_gold_exact", exact_gold / dn},
              {"sim_to_random_exact", exact_random / dn},
              {"margin_exact", margin_exact}};
  r.outcome = margin_outcome(margin, t.trend_band);
  r.outcomes_by_semantics = {{"jaccard", r.outcome}, {"exact", margin_outcome(margin_exact, t.trend_band)}};
  r.thresholds = {{"met", "margin > 0"}, {"trend_band", t.trend_band},
                  {"provenance", "toolkit default unless overridden"}};
  return r;
}

namespace {

std::string source_label(const LabelSource& s) {
  return s.kind == LabelSourceKind::gold ? "aggregate" : s.str();
}

bool is_perspective(const LabelSource& s) {
  return s.kind == LabelSourceKind::annotator || s.kind == LabelSourceKind::alt;
}

bool is_adversarial(const LabelSource& s) {
  return s.kind == LabelSourceKind::random || s.kind == LabelSourceKind::flipped;
}

}  // namespace

PropertyReport diversity(const std::vector<RunLog>& runs, const LabelSpace& space, const Thresholds& t) {
  if (runs.size() < 2) throw ValidationError("diversity needs at least two runs");
  const auto& first = runs.front();
  for (const auto& run : runs) {
    require_nonempty(run, "diversity run");
    require_runs_match(first, run, true);
    for (std::size_t i = 0; i < run.manifest.seeds.size(); ++i) {
      if (run.manifest.seeds[i].demos != first.manifest.seeds[i].demos) {
        throw ValidationError("sources with non-shared demo draws: " + source_label(run.source()) + " vs " +
                              source_label(first.source()));
      }
    }
  }

  PropertyReport r;
  r.property = "diversity";
  std::vector<std::pair<std::string, double>> perspective;
  std::optional<double> adversarial_rate;
  std::optional<double> aggregate_rate;
  nlohmann::ordered_json roc = nlohmann::ordered_json::object();

  for (const auto& run : runs) {
    const auto src = run.source();
    const auto s = summarize(run);
    r.inputs.push_back(describe(run));
    r.scores.emplace_back("success:" + source_label(src), s.jaccard_rate);
    r.scores.emplace_back("success_exact:" + source_label(src), s.exact_rate);
    if (is_perspective(src)) perspective.emplace_back(src.str(), s.jaccard_rate);
    if (is_adversarial(src)) adversarial_rate = adversarial_rate ? std::min(*adversarial_rate, s.jaccard_rate) : s.jaccard_rate;
    if (src.kind == LabelSourceKind::gold) aggregate_rate = s.jaccard_rate;

    if (space.kind() == TaskKind::binary) {
      std::vector<metrics::LabelPair> pairs;
      for (const auto& v : run.verdicts) {
        if (!v.unparsed && v.predicted) pairs.push_back({*v.predicted, v.provided});
      }
      try {
        roc[source_label(src)] = metrics::roc_auc_binary(pairs, space);
      } catch (const ValidationError&) {
        roc[source_label(src)] = nullptr;
      }
    }
  }

  double spread = 0.0;
  double mean = 0.0;
  if (!perspective.empty()) {
    double lo = perspective.front().second, hi = lo;
    for (const auto& [_, v] : perspective) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      mean += v;
    }
    mean /= static_cast<double>(perspective.size());
    spread = hi - lo;
    r.scores.emplace_back("annotator_spread", spread);
    r.scores.emplace_back("annotator_mean", mean);
    if (adversarial_rate) r.scores.emplace_back("annotator_mean_minus_random", mean - *adversarial_rate);
    if (aggregate_rate) r.scores.emplace_back("aggregate_minus_annotator_mean", *aggregate_rate - mean);
  }

  // Mean pairwise Jaccard between the label sets different perspectives
  // assign to the same example.
  std::vector<std::map<std::string, LabelSet>> shown;
  for (const auto& run : runs) {
    if (!is_perspective(run.source())) continue;
    std::map<std::string, LabelSet> m;
    for (const auto& v : run.verdicts) m.emplace(v.id, v.provided);
    shown.push_back(std::move(m));
  }
  if (shown.size() >= 2) {
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < shown.size(); ++a) {
      for (std::size_t b = a + 1; b < shown.size(); ++b) {
        double s = 0.0;
        std::size_t n = 0;
        for (const auto& [id, la] : shown[a]) {
          auto it = shown[b].find(id);
          if (it == shown[b].end()) continue;
          s += jaccard(la, it->second);
          ++n;
        }
        if (n > 0) {
          total += s / static_cast<double>(n);
          ++pairs;
        }
      }
    }
    if (pairs > 0) r.scores.emplace_back("cross_annotator_similarity", total / static_cast<double>(pairs));
  }

  bool ok = !perspective.empty() && spread <= t.annotator_spread;
  if (adversarial_rate) {
    for (const auto& [_, v] : perspective) ok = ok && v > *adversarial_rate;
  } else {
    r.details["note"] = "no random or flipped run supplied; the above-random condition was not evaluated";
  }
  r.outcome = threshold_outcome(ok);
  if (space.kind() == TaskKind::binary) r.details["roc_auc"] = std::move(roc);
  r.thresholds = {{"annotator_spread", t.annotator_spread},
                  {"met", "every perspective > random and spread <= threshold"},
                  {"provenance", "toolkit default unless overridden"}};
  return r;
}

PropertyReport per_label_rates(const RunLog& run, const LabelSpace& space, const Thresholds& t) {
  require_nonempty(run, "run");
  std::vector<metrics::LabelPair> pairs;
  for (const auto& v : run.verdicts) {
    if (!v.unparsed && v.predicted) pairs.push_back({*v.predicted, v.provided});
  }
  if (pairs.empty()) throw ValidationError("per_label_rates needs parsed label predictions");
  const auto counts = metrics::label_counts(pairs);

  PropertyReport r;
  r.property = "per_label_rates";
  r.inputs = {describe(run)};
  std::vector<std::pair<std::string, double>> rates;
  for (std::size_t l = 0; l < space.size(); ++l) {
    if (counts.tp[l] + counts.fp[l] + counts.fn[l] == 0) continue;
    rates.emplace_back(space.label(l), counts.f1(l));
  }
  double mean = 0.0, sq = 0.0;
  for (const auto& [_, v] : rates) mean += v;
  mean /= static_cast<double>(rates.size());
  for (const auto& [_, v] : rates) sq += (v - mean) * (v - mean);
  const double sigma = std::sqrt(sq / static_cast<double>(rates.size()));
  const double cut = mean - t.per_label_sigma * sigma;

  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  std::vector<std::string> flagged;
  for (const auto& [name, v] : rates) {
    r.scores.emplace_back("f1:" + name, v);
    const bool low = v < cut;
    if (low) flagged.push_back(name);
    table.push_back({{"label", name}, {"f1", v}, {"flagged", low}});
  }
  r.scores.emplace_back("mean", mean);
  r.scores.emplace_back("sigma", sigma);
  r.details["labels"] = std::move(table);
  r.details["flagged"] = flagged;
  r.outcome = threshold_outcome(flagged.empty());
  r.thresholds = {{"sigma_cut", t.per_label_sigma}, {"provenance", "toolkit default unless overridden"}};
  return r;
}

PositionSweep position_sweep(const Corpus& corpus, const RunConfig& base_config, Gateway& gateway,
                             const Thresholds& t) {
  if (base_config.mode != PromptMode::liahr) throw ConfigError("position sweep needs a liahr config");
  PositionSweep out;
  auto& r = out.report;
  r.property = "position_sweep";
  nlohmann::ordered_json vec = nlohmann::ordered_json::array();
  double lo = 1.0, hi = 0.0;
  for (std::size_t p = 0; p <= base_config.n_shots; ++p) {
    auto cfg = base_config;
    cfg.query_position = p;
    auto log = run(corpus, cfg, gateway);
    const auto s = summarize(log);
    lo = std::min(lo, s.jaccard_rate);
    hi = std::max(hi, s.jaccard_rate);
    r.scores.emplace_back("success@" + std::to_string(p), s.jaccard_rate);
    vec.push_back({{"position", p}, {"jaccard_rate", s.jaccard_rate}, {"exact_rate", s.exact_rate}});
    if (p == 0) r.inputs.push_back(describe(log));
    out.runs.push_back(std::move(log));
  }
  r.scores.emplace_back("range", hi - lo);
  r.details["positions"] = std::move(vec);
  r.outcome = threshold_outcome(hi - lo <= t.position_range);
  r.thresholds = {{"position_range", t.position_range}, {"provenance", "toolkit default unless overridden"}};
  return out;
}

std::string scores_csv(const std::vector<PropertyReport>& reports) {
  std::ostringstream out;
  out << "property,score,value\n";
  out << std::setprecision(17);
  for (const auto& r : reports) {
    for (const auto& [k, v] : r.scores) out << r.property << ',' << k << ',' << v << '\n';
  }
  return out.str();
}

}  // namespace liahr::properties
