#include <doctest.h>

#include <atomic>
#include <mutex>
#include <set>

#include "liahr/engine.hpp"
#include "liahr/error.hpp"
#include "support.hpp"

using namespace liahr;
using namespace liahr::testing;

namespace {

Corpus semeval() { return load_corpus(data_dir() / "semeval_toy.jsonl", load_space("semeval.space.json")); }
Corpus queer() { return load_corpus(data_dir() / "queer_toy.jsonl", load_space("queer.space.json")); }

/// Fails every request whose key starts with `bad_prefix`.
class FlakyBackend : public Backend {
 public:
  FlakyBackend(std::unique_ptr<Backend> inner, std::string bad_prefix)
      : inner_(std::move(inner)), bad_(std::move(bad_prefix)) {}
  Completion complete(const CompletionRequest& r) override {
    if (r.key.starts_with(bad_)) throw TransportError("connection reset");
    return inner_->complete(r);
  }
  std::string model_id() const override { return "flaky"; }

 private:
  std::unique_ptr<Backend> inner_;
  std::string bad_;
};

/// Returns garbage the first time it sees a key, then copies the shown label.
class StutterBackend : public Backend {
 public:
  explicit StutterBackend(std::unique_ptr<Backend> inner) : inner_(std::move(inner)) {}
  Completion complete(const CompletionRequest& r) override {
    ++calls;
    std::lock_guard lock(mu_);
    if (seen_.insert(r.key).second) return Completion{"I would rather not say.", {}, 0.0, 1, false};
    return inner_->complete(r);
  }
  std::string model_id() const override { return "stutter"; }
  std::atomic<int> calls{0};

 private:
  std::unique_ptr<Backend> inner_;
  std::mutex mu_;
  std::set<std::string> seen_;
};

}  // namespace

TEST_CASE("label source strings round-trip") {
  for (const char* s : {"gold", "random", "flipped", "annotator:a1", "alt:in_group"}) {
    CHECK(LabelSource::parse(s).str() == s);
  }
  CHECK_THROWS_AS(LabelSource::parse("annotator:"), ConfigError);
  CHECK_THROWS_AS(LabelSource::parse("silver"), ConfigError);
}

TEST_CASE("run config validation and json round trip") {
  auto c = mock_config(MockKind::echo_query_label, {4, 5}, 7, 2);
  c.query_label_source = LabelSource::parse("random");
  c.query_splits = {Split::dev, Split::test};
  c.flag_tolerance = 0.5;
  const auto j = c.to_json();
  const auto back = RunConfig::from_json(j);
  CHECK(back.to_json().dump() == j.dump());
  CHECK(back.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(back.query_label_source == c.query_label_source);

  auto bad = c;
  bad.seeds.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.mode = PromptMode::baseline;
  bad.n_shots = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.flag_tolerance = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.query_position = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("prepared demos are shared within a seed except for self-exclusion") {
  const auto corpus = semeval();
  auto c = mock_config(MockKind::echo_query_label, {0, 1, 2, 3}, 100, 4);
  c.query_splits = {Split::train};
  const auto prep = prepare_run(corpus, c);
  REQUIRE(prep.seeds.size() == 4);
  for (const auto& st : prep.seeds) {
    CHECK_FALSE(st.error);
    CHECK(st.queries.size() == 19);
    CHECK(st.demos.size() == 4);
  }
  std::size_t replaced = 0;
  for (const auto& pq : prep.queries) {
    const auto& base = prep.seeds[pq.seed].demos;
    CHECK(std::find(pq.demos.begin(), pq.demos.end(), pq.id) == pq.demos.end());
    const bool in_base = std::find(base.begin(), base.end(), pq.id) != base.end();
    if (in_base) {
      ++replaced;
    } else {
      CHECK(pq.demos == base);
    }
    CHECK(pq.request.key == "seed:" + std::to_string(pq.seed) + "/" + pq.id);
  }
  CHECK(replaced == 16);  // four base demos per seed, each also a query
}

TEST_CASE("query subsampling is capped and sorted") {
  const auto corpus = semeval();
  auto c = mock_config(MockKind::echo_query_label, {9}, 5, 2);
  const auto prep = prepare_run(corpus, c);
  const auto& q = prep.seeds[0].queries;
  CHECK(q.size() == 5);
  CHECK(std::is_sorted(q.begin(), q.end()));
  c.queries_per_seed = 1000;
  CHECK(prepare_run(corpus, c).seeds[0].queries.size() == 9);
}

TEST_CASE("runs are deterministic and independent of concurrency") {
  const auto corpus = semeval();
  auto c = mock_config(MockKind::prior_biased, {0, 1, 2}, 9, 4);
  c.backend.mock.mixing = 0.5;
  c.backend.mock.threshold = 0.8;
  c.query_label_source = LabelSource::parse("random");
  c.backend.concurrency = 1;
  const auto a = run(corpus, c);
  c.backend.concurrency = 8;
  const auto b = run(corpus, c);
  CHECK(verdicts_to_jsonl(a, corpus.space()) == verdicts_to_jsonl(b, corpus.space()));
  CHECK(a.manifest.seeds.size() == b.manifest.seeds.size());
  for (std::size_t i = 0; i < a.manifest.seeds.size(); ++i) {
    CHECK(a.manifest.seeds[i].demos == b.manifest.seeds[i].demos);
    CHECK(a.manifest.seeds[i].queries == b.manifest.seeds[i].queries);
  }
  for (std::size_t i = 1; i < a.verdicts.size(); ++i) {
    const auto& p = a.verdicts[i - 1];
    const auto& v = a.verdicts[i];
    CHECK(std::tie(p.seed, p.id) < std::tie(v.seed, v.id));
  }
}

TEST_CASE("echo copies both gold and random labels") {
  const auto corpus = semeval();
  auto c = mock_config(MockKind::echo_query_label);
  auto gold = run(corpus, c);
  c.query_label_source = LabelSource::parse("random");
  auto rnd = run(corpus, c);
  REQUIRE(gold.verdicts.size() == 27);
  for (const auto& v : gold.verdicts) {
    CHECK(v.copied_exact);
    CHECK_FALSE(v.flagged);
    CHECK(v.source == "gold");
  }
  for (const auto& v : rnd.verdicts) {
    CHECK(v.copied_exact);
    CHECK(v.provided != v.gold);
    CHECK(v.jaccard_to_gold < 1.0);
  }
  CHECK(summarize(gold).exact_rate == 1.0);
  CHECK(summarize(rnd).orientation == "lower_is_better");
  CHECK(summarize(gold).orientation == "higher_is_better");
}

TEST_CASE("gold oracle flags random labels and proposes gold") {
  const auto corpus = semeval();
  auto c = mock_config(MockKind::gold_oracle);
  c.query_label_source = LabelSource::parse("random");
  const auto log = run(corpus, c);
  for (const auto& v : log.verdicts) {
    CHECK(v.flagged);
    REQUIRE(v.alternative);
    CHECK(*v.alternative == v.gold);
  }
  CHECK(log.manifest.n_flagged == log.verdicts.size());
  CHECK(summarize(log).flag_rate == 1.0);
}

TEST_CASE("flag tolerance admits near copies") {
  const auto corpus = semeval();
  auto c = mock_config(MockKind::gold_oracle, {0}, 9);
  c.query_label_source = LabelSource::parse("random");
  c.flag_tolerance = 1e-9;
  for (const auto& v : run(corpus, c).verdicts) {
    CHECK(v.flagged == (v.jaccard_to_provided == 0.0));
  }
}

TEST_CASE("baseline verdicts follow the assessment") {
  const auto corpus = semeval();
  auto c = mock_config(MockKind::gold_oracle, {0, 1});
  c.mode = PromptMode::baseline;
  const auto gold = run(corpus, c);
  c.query_label_source = LabelSource::parse("random");
  const auto rnd = run(corpus, c);
  for (const auto& v : gold.verdicts) {
    CHECK(v.assessment == std::optional<std::string>("reasonable"));
    CHECK(v.jaccard_to_provided == 1.0);
    CHECK_FALSE(v.predicted);
  }
  for (const auto& v : rnd.verdicts) {
    CHECK(v.assessment == std::optional<std::string>("unreasonable"));
    CHECK(v.flagged);
    CHECK_FALSE(v.alternative);
  }
}

TEST_CASE("icl compares predictions with gold") {
  const auto corpus = semeval();
  auto c = mock_config(MockKind::gold_oracle, {0});
  c.mode = PromptMode::icl;
  const auto log = run(corpus, c);
  for (const auto& v : log.verdicts) {
    CHECK(v.provided == v.gold);
    CHECK(v.predicted == std::optional<LabelSet>(v.gold));
    CHECK_FALSE(v.alternative);
  }
  c.backend.mock.kind = MockKind::echo_query_label;
  for (const auto& v : run(corpus, c).verdicts) {
    CHECK(v.predicted == std::optional<LabelSet>(LabelSet{}));
  }
}

TEST_CASE("annotator source restricts pools and demos use that perspective") {
  const auto corpus = semeval();
  auto c = mock_config(MockKind::echo_query_label, {0}, 10, 1);
  c.query_label_source = LabelSource::parse("annotator:a1");
  const auto prep = prepare_run(corpus, c);
  REQUIRE(prep.queries.size() == 2);
  CHECK(prep.queries[0].id == "se-021");
  CHECK(prep.queries[0].provided == corpus.space().make_set({"anger"}));
  CHECK(prep.queries[0].demos == std::vector<std::string>{"se-003"});
  CHECK(prep.queries[0].request.prompt.text.find("{\"label\": [\"joy\"]}") != std::string::npos);

  c.query_label_source = LabelSource::parse("annotator:zz");
  CHECK_THROWS_AS(prepare_run(corpus, c), ConfigError);
}

TEST_CASE("flipped source needs a binary space") {
  auto c = mock_config(MockKind::gold_oracle, {0}, 10, 2);
  c.query_label_source = LabelSource::parse("flipped");
  CHECK_THROWS_AS(prepare_run(semeval(), c), ConfigError);
  const auto q = queer();
  const auto log = run(q, c);
  REQUIRE_FALSE(log.verdicts.empty());
  for (const auto& v : log.verdicts) {
    CHECK(v.provided != v.gold);
    CHECK(v.flagged);
  }
}

TEST_CASE("undersized demo pool aborts every seed with a sampling error") {
  const auto corpus = semeval();
  auto c = mock_config(MockKind::echo_query_label, {0, 1}, 5, 40);
  c.query_position = 0;
  const auto log = run(corpus, c);
  CHECK(log.verdicts.empty());
  for (const auto& s : log.manifest.seeds) {
    REQUIRE(s.error);
    CHECK(s.error->starts_with("sampling:"));
  }
  CHECK_FALSE(log.manifest.complete());
}

TEST_CASE("transport failure aborts only its seed") {
  const auto corpus = semeval();
  auto c = mock_config(MockKind::echo_query_label, {0, 1}, 9);
  Gateway gw(std::make_unique<FlakyBackend>(make_backend(c.backend, corpus), "seed:1/"), c.backend);
  const auto log = run(corpus, c, gw);
  REQUIRE(log.manifest.seeds.size() == 2);
  CHECK_FALSE(log.manifest.seeds[0].error);
  REQUIRE(log.manifest.seeds[1].error);
  CHECK(log.manifest.seeds[1].error->starts_with("transport:"));
  CHECK(log.verdicts.size() == 9);
  for (const auto& v : log.verdicts) CHECK(v.seed == 0);
  CHECK_FALSE(log.manifest.complete());
}

TEST_CASE("unparseable output is retried once then kept as unparsed") {
  const auto corpus = semeval();
  auto c = mock_config(MockKind::echo_query_label, {0}, 3);
  {
    auto inner = make_backend(c.backend, corpus);
    auto stutter = std::make_unique<StutterBackend>(std::move(inner));
    auto* raw = stutter.get();
    Gateway gw(std::move(stutter), c.backend);
    const auto log = run(corpus, c, gw);
    CHECK(raw->calls == 6);
    for (const auto& v : log.verdicts) {
      CHECK_FALSE(v.unparsed);
      CHECK(v.attempts == 2);
      CHECK(v.copied_exact);
    }
  }
  c.backend.mock.kind = MockKind::scripted;
  c.backend.mock.script = {{"*", "no labels here"}};
  const auto log = run(corpus, c);
  CHECK(log.manifest.n_unparsed == 3);
  for (const auto& v : log.verdicts) {
    CHECK(v.unparsed);
    CHECK(v.attempts == 2);
    CHECK_FALSE(v.flagged);
  }
  const auto s = summarize(log);
  CHECK(s.n_unparsed == 3);
  CHECK(s.n_parsed == 0);
}

TEST_CASE("scripted mock without a matching entry is a configuration error") {
  auto c = mock_config(MockKind::scripted, {0}, 2);
  c.backend.mock.script = {{"id:nobody", "{\"label\": []}"}};
  CHECK_THROWS_AS(run(semeval(), c), ConfigError);
}

TEST_CASE("verdict json and run log round trip") {
  const auto corpus = semeval();
  auto c = mock_config(MockKind::prior_biased, {0, 1}, 9);
  c.backend.mock.mixing = 0.3;
  c.query_label_source = LabelSource::parse("random");
  const auto log = run(corpus, c);
  for (const auto& v : log.verdicts) {
    const auto j = v.to_json(corpus.space());
    CHECK(Verdict::from_json(j, corpus.space()).to_json(corpus.space()).dump() == j.dump());
  }
  TempDir dir("engine");
  write_run_log(log, corpus.space(), dir.path());
  const auto back = read_run_log(dir.path(), corpus.space());
  CHECK(verdicts_to_jsonl(back, corpus.space()) == verdicts_to_jsonl(log, corpus.space()));
  CHECK(back.manifest.to_json().dump() == log.manifest.to_json().dump());
  CHECK(back.mode() == PromptMode::liahr);
  CHECK(back.source() == LabelSource::parse("random"));
  CHECK(back.n_shots() == 4);
  CHECK(back.manifest.corpus_hash == corpus.content_hash());
}

TEST_CASE("summary per seed") {
  const auto corpus = semeval();
  auto c = mock_config(MockKind::echo_query_label, {3, 7}, 9);
  const auto s = summarize(run(corpus, c));
  CHECK(s.n == 18);
  REQUIRE(s.jaccard_rate_by_seed.size() == 2);
  CHECK(s.jaccard_rate_by_seed[0].first == 3);
  CHECK(s.jaccard_rate_by_seed[1].second == 1.0);
}
