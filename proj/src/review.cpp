#include "liahr/review.hpp"

#include <ctime>
#include <mutex>
#include <sstream>

#include "liahr/error.hpp"
#include "liahr/sampler.hpp"

namespace liahr {

std::string_view to_string(ReviewStatus s) { return s == ReviewStatus::pending ? "pending" : "decided"; }

std::string_view to_string(ReviewChoice c) {
  switch (c) {
    case ReviewChoice::accept_gold: return "accept_gold";
    case ReviewChoice::accept_alternative: return "accept_alternative";
    case ReviewChoice::edited: return "edited";
  }
  return "?";
}

ReviewStatus review_status_from_string(std::string_view s) {
  if (s == "pending") return ReviewStatus::pending;
  if (s == "decided") return ReviewStatus::decided;
  throw ValidationError("unknown review status '" + std::string(s) + "'");
}

ReviewChoice review_choice_from_string(std::string_view s) {
  for (auto c : {ReviewChoice::accept_gold, ReviewChoice::accept_alternative, ReviewChoice::edited}) {
    if (to_string(c) == s) return c;
  }
  throw ValidationError("unknown review choice '" + std::string(s) + "'");
}

nlohmann::ordered_json ReviewProgress::to_json() const {
  return {{"pending", pending}, {"decided", decided}, {"total", total()}};
}

namespace {

constexpr const char* kEventsFile = "events.jsonl";
constexpr const char* kSnapshotFile = "snapshot.json";

std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string_view order_name(PresentationOrder o) {
  return o == PresentationOrder::gold_first ? "gold_first" : "alternative_first";
}

PresentationOrder order_from_name(std::string_view s) {
  if (s == "gold_first") return PresentationOrder::gold_first;
  if (s == "alternative_first") return PresentationOrder::alternative_first;
  throw ValidationError("unknown presentation order '" + std::string(s) + "'");
}

LabelSet names_to_set(const nlohmann::json& j, const LabelSpace& space) {
  return space.make_set(j.get<std::vector<std::string>>());
}

nlohmann::ordered_json decision_json(const ReviewDecision& d, const LabelSpace& space) {
  nlohmann::ordered_json j;
  j["item_id"] = d.item_id;
  j["choice"] = std::string(to_string(d.choice));
  if (d.edited) j["edited"] = space.names(*d.edited);
  j["reviewer"] = d.reviewer;
  j["timestamp"] = d.timestamp;
  return j;
}

ReviewDecision decision_from_json(const nlohmann::json& j, const LabelSpace& space) {
  ReviewDecision d;
  d.item_id = j.at("item_id").get<std::string>();
  d.choice = review_choice_from_string(j.at("choice").get<std::string>());
  if (j.contains("edited")) d.edited = names_to_set(j.at("edited"), space);
  d.reviewer = j.value("reviewer", "");
  d.timestamp = j.value("timestamp", "");
  return d;
}

nlohmann::ordered_json item_json(const ReviewItem& it, const LabelSpace& space) {
  nlohmann::ordered_json j;
  j["id"] = it.id;
  j["example_id"] = it.example_id;
  j["text"] = it.text;
  j["gold"] = space.names(it.gold);
  j["alternative"] = space.names(it.alternative);
  j["order"] = std::string(order_name(it.order));
  return j;
}

ReviewItem item_from_json(const nlohmann::json& j, const LabelSpace& space) {
  ReviewItem it;
  it.id = j.at("id").get<std::string>();
  it.example_id = j.at("example_id").get<std::string>();
  it.text = j.at("text").get<std::string>();
  it.gold = names_to_set(j.at("gold"), space);
  it.alternative = names_to_set(j.at("alternative"), space);
  it.order = order_from_name(j.at("order").get<std::string>());
  return it;
}

}  // namespace

ReviewStore::ReviewStore(LabelSpacePtr space, std::filesystem::path dir, std::uint64_t order_seed)
    : space_(std::move(space)), dir_(std::move(dir)), order_seed_(order_seed), clock_(utc_now) {
  if (!dir_.empty()) {
    std::filesystem::create_directories(dir_);
    load();
    log_.open(dir_ / kEventsFile, std::ios::app | std::ios::binary);
    if (!log_) throw ConfigError("cannot open review log in " + dir_.string());
  }
}

ReviewStore::~ReviewStore() = default;

PresentationOrder ReviewStore::order_for(const std::string& example_id) const {
  SeededSampler s(order_seed_, "review/" + example_id);
  return s.bernoulli(0.5) ? PresentationOrder::alternative_first : PresentationOrder::gold_first;
}

void ReviewStore::apply_event(const nlohmann::json& event) {
  const auto type = event.at("event").get<std::string>();
  if (type == "enqueue") {
    auto it = item_from_json(event.at("item"), *space_);
    by_id_[it.id] = items_.size();
    by_example_[it.example_id] = items_.size();
    items_.push_back(std::move(it));
  } else if (type == "decision") {
    auto d = decision_from_json(event, *space_);
    auto& it = items_.at(by_id_.at(d.item_id));
    it.status = ReviewStatus::decided;
    it.history.push_back(std::move(d));
  } else {
    throw ValidationError("unknown review event '" + type + "'");
  }
  ++events_;
}

void ReviewStore::load() {
  const auto snap = dir_ / kSnapshotFile;
  std::size_t covered = 0;
  if (std::filesystem::exists(snap)) {
    std::ifstream in(snap);
    auto j = nlohmann::json::parse(in);
    covered = j.at("events").get<std::size_t>();
    for (const auto& ij : j.at("items")) {
      auto it = item_from_json(ij, *space_);
      for (const auto& dj : ij.at("history")) it.history.push_back(decision_from_json(dj, *space_));
      it.status = it.history.empty() ? ReviewStatus::pending : ReviewStatus::decided;
      by_id_[it.id] = items_.size();
      by_example_[it.example_id] = items_.size();
      items_.push_back(std::move(it));
    }
    events_ = covered;
  }
  std::ifstream in(dir_ / kEventsFile);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  for (const auto& l : lines) {
    ++line_no;
    if (line_no <= covered || l.empty()) continue;
    nlohmann::json ev;
    try {
      ev = nlohmann::json::parse(l);
    } catch (const nlohmann::json::exception&) {
      // A torn final line is what an interrupted append leaves behind.
      if (line_no == lines.size()) break;
      throw ValidationError("review log line " + std::to_string(line_no) + " is malformed");
    }
    apply_event(ev);
  }
}

void ReviewStore::append_event(const nlohmann::ordered_json& event) {
  if (dir_.empty()) return;
  log_ << event.dump() << '\n';
  log_.flush();
  if (!log_) throw Error("failed to append to review log");
}

std::size_t ReviewStore::enqueue(const RunLog& log, const Corpus& corpus) {
  std::unique_lock lock(mutex_);
  std::size_t added = 0;
  for (const auto& v : log.verdicts) {
    if (!v.flagged || !v.alternative || by_example_.contains(v.id)) continue;
    const auto& ex = corpus.get(v.id);
    if (*v.alternative == ex.gold) continue;
    ReviewItem it;
    char buf[32];
    std::snprintf(buf, sizeof buf, "item-%06zu", items_.size() + 1);
    it.id = buf;
    it.example_id = ex.id;
    it.text = ex.text;
    it.gold = ex.gold;
    it.alternative = *v.alternative;
    it.order = order_for(ex.id);
    nlohmann::ordered_json ev;
    ev["event"] = "enqueue";
    ev["item"] = item_json(it, *space_);
    append_event(ev);
    apply_event(ev);
    ++added;
    if (snapshot_interval_ && events_ % snapshot_interval_ == 0) {
      lock.unlock();
      snapshot();
      lock.lock();
    }
  }
  return added;
}

std::vector<ReviewItem> ReviewStore::queue(std::optional<ReviewStatus> status) const {
  std::shared_lock lock(mutex_);
  std::vector<ReviewItem> out;
  for (const auto& it : items_) {
    if (!status || it.status == *status) out.push_back(it);
  }
  return out;
}

ReviewItem ReviewStore::item(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto f = by_id_.find(id);
  if (f == by_id_.end()) throw ValidationError("unknown review item '" + id + "'");
  return items_[f->second];
}

void ReviewStore::decide(ReviewDecision decision) {
  std::unique_lock lock(mutex_);
  if (!by_id_.contains(decision.item_id)) {
    throw ValidationError("unknown review item '" + decision.item_id + "'");
  }
  if (decision.choice == ReviewChoice::edited) {
    if (!decision.edited) throw ValidationError("edited decision without labels");
    space_->validate(*decision.edited);
  } else {
    decision.edited.reset();
  }
  if (decision.timestamp.empty()) decision.timestamp = clock_();
  nlohmann::ordered_json line;
  line["event"] = "decision";
  const auto body = decision_json(decision, *space_);
  for (const auto& [k, v] : body.items()) line[k] = v;
  append_event(line);
  apply_event(line);
  if (snapshot_interval_ && events_ % snapshot_interval_ == 0) {
    lock.unlock();
    snapshot();
  }
}

ReviewProgress ReviewStore::progress() const {
  std::shared_lock lock(mutex_);
  ReviewProgress p;
  for (const auto& it : items_) (it.status == ReviewStatus::pending ? p.pending : p.decided)++;
  return p;
}

nlohmann::ordered_json ReviewStore::state_json() const {
  std::shared_lock lock(mutex_);
  nlohmann::ordered_json j;
  j["events"] = events_;
  j["order_seed"] = order_seed_;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& it : items_) {
    auto ij = item_json(it, *space_);
    ij["status"] = std::string(to_string(it.status));
    auto h = nlohmann::ordered_json::array();
    for (const auto& d : it.history) h.push_back(decision_json(d, *space_));
    ij["history"] = std::move(h);
    arr.push_back(std::move(ij));
  }
  j["items"] = std::move(arr);
  return j;
}

void ReviewStore::snapshot() {
  if (dir_.empty()) return;
  auto text = state_json().dump(2);
  std::unique_lock lock(mutex_);
  const auto tmp = dir_ / (std::string(kSnapshotFile) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text << '\n';
    if (!out) throw Error("failed to write review snapshot");
  }
  std::filesystem::rename(tmp, dir_ / kSnapshotFile);
}

ReviewExport ReviewStore::export_reviewed(const Corpus& corpus, bool partial) const {
  std::shared_lock lock(mutex_);
  std::size_t pending = 0;
  for (const auto& it : items_) pending += it.status == ReviewStatus::pending ? 1 : 0;
  if (pending > 0 && !partial) {
    throw ValidationError(std::to_string(pending) + " review item(s) still pending; export with partial");
  }
  for (const auto& it : items_) {
    const auto* ex = corpus.find(it.example_id);
    if (ex == nullptr) throw ValidationError("review item " + it.id + " refers to unknown example '" + it.example_id + "'");
    if (ex->gold != it.gold) throw ValidationError("example '" + it.example_id + "' changed since it was enqueued");
  }

  ChangeManifest m;
  m.mode = "reviewed";
  m.sources.push_back(dir_.empty() ? std::string("review:memory") : "review:" + dir_.string());
  std::vector<bool> touched(3, false);
  std::vector<AnnotatedExample> out;
  out.reserve(corpus.size());
  for (const auto& ex : corpus.examples()) {
    ChangeEntry e;
    e.id = ex.id;
    e.split = ex.effective_split();
    e.old_labels = ex.gold;
    auto copy = ex;
    auto f = by_example_.find(ex.id);
    if (f != by_example_.end()) {
      const auto& it = items_[f->second];
      touched[static_cast<std::size_t>(e.split)] = true;
      if (it.history.empty()) {
        e.warning = "review pending; original labels kept";
      } else {
        const auto& d = it.history.back();
        if (d.choice != ReviewChoice::accept_gold) {
          copy.gold = d.choice == ReviewChoice::edited ? *d.edited : it.alternative;
          e.action = ChangeAction::replaced;
          e.new_labels = copy.gold;
        }
      }
    }
    out.push_back(std::move(copy));
    m.entries.push_back(std::move(e));
  }
  for (auto s : {Split::train, Split::dev, Split::test}) {
    if (touched[static_cast<std::size_t>(s)]) m.touched_splits.emplace_back(to_string(s));
  }
  ReviewExport r{Corpus(corpus.space_ptr(), std::move(out), corpus.source()), std::move(m), {}};
  for (const auto& it : items_) {
    r.mapping.emplace_back(it.id, it.order == PresentationOrder::gold_first ? "gold" : "alternative");
  }
  return r;
}

nlohmann::ordered_json item_payload(const ReviewItem& item, const LabelSpace& space, bool unseal) {
  nlohmann::ordered_json j;
  j["id"] = item.id;
  j["example_id"] = item.example_id;
  j["text"] = item.text;
  j["first"] = space.names(item.first());
  j["second"] = space.names(item.second());
  j["status"] = std::string(to_string(item.status));
  j["decisions"] = item.history.size();
  if (!item.history.empty()) {
    const auto& d = item.history.back();
    nlohmann::ordered_json dj;
    const bool first_is_gold = item.order == PresentationOrder::gold_first;
    switch (d.choice) {
      case ReviewChoice::accept_gold: dj["choice"] = first_is_gold ? "first" : "second"; break;
      case ReviewChoice::accept_alternative: dj["choice"] = first_is_gold ? "second" : "first"; break;
      case ReviewChoice::edited:
        dj["choice"] = "edited";
        dj["labels"] = space.names(*d.edited);
        break;
    }
    dj["reviewer"] = d.reviewer;
    dj["timestamp"] = d.timestamp;
    j["decision"] = std::move(dj);
  }
  if (unseal) j["sealed"] = {{"first", item.order == PresentationOrder::gold_first ? "gold" : "alternative"}};
  return j;
}

nlohmann::ordered_json export_payload(const ReviewExport& e, const LabelSpace& space) {
  nlohmann::ordered_json j;
  j["manifest"] = e.manifest.to_json(space);
  auto mapping = nlohmann::ordered_json::array();
  for (const auto& [id, first] : e.mapping) mapping.push_back({{"item_id", id}, {"first", first}});
  j["mapping"] = std::move(mapping);
  j["corpus"] = serialize_corpus(e.corpus);
  return j;
}

}  // namespace liahr
