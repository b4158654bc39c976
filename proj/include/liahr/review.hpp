#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "liahr/corpus.hpp"
#include "liahr/engine.hpp"
#include "liahr/pipeline.hpp"

namespace httplib {
class Server;
}

namespace liahr {

enum class ReviewStatus { pending, decided };
enum class ReviewChoice { accept_gold, accept_alternative, edited };
/// Which candidate the reviewer sees first.
enum class PresentationOrder { gold_first, alternative_first };

std::string_view to_string(ReviewStatus s);
std::string_view to_string(ReviewChoice c);
ReviewStatus review_status_from_string(std::string_view s);
ReviewChoice review_choice_from_string(std::string_view s);

struct ReviewDecision {
  std::string item_id;
  ReviewChoice choice = ReviewChoice::accept_gold;
  std::optional<LabelSet> edited;
  std::string reviewer;
  std::string timestamp;  ///< ISO-8601 UTC
};

struct ReviewItem {
  std::string id;
  std::string example_id;
  std::string text;
  LabelSet gold;
  LabelSet alternative;
  PresentationOrder order = PresentationOrder::gold_first;
  ReviewStatus status = ReviewStatus::pending;
  /// Every decision in arrival order; the last one is in force.
  std::vector<ReviewDecision> history;

  LabelSet first() const { return order == PresentationOrder::gold_first ? gold : alternative; }
  LabelSet second() const { return order == PresentationOrder::gold_first ? alternative : gold; }
};

struct ReviewProgress {
  std::size_t pending = 0;
  std::size_t decided = 0;
  std::size_t total() const { return pending + decided; }
  nlohmann::ordered_json to_json() const;
};

struct ReviewExport {
  Corpus corpus;
  ChangeManifest manifest;
  /// item id -> "gold" / "alternative" for the first-shown candidate.
  std::vector<std::pair<std::string, std::string>> mapping;
};

/// Review queue backed by an append-only JSONL event log.
///
/// Events are `enqueue` and `decision` records; `snapshot.json` stores the
/// folded state plus the number of events it covers, and reopening a store
/// loads the snapshot and replays the rest of the log. With an empty
/// directory the store is memory-only.
class ReviewStore {
 public:
  using Clock = std::function<std::string()>;

  ReviewStore(LabelSpacePtr space, std::filesystem::path dir = {}, std::uint64_t order_seed = 0);
  ~ReviewStore();
  ReviewStore(const ReviewStore&) = delete;
  ReviewStore& operator=(const ReviewStore&) = delete;

  /// Adds every flagged verdict that carries an alternative, one item per
  /// example id (first verdict in log order). Returns the number added.
  std::size_t enqueue(const RunLog& log, const Corpus& corpus);

  std::vector<ReviewItem> queue(std::optional<ReviewStatus> status = std::nullopt) const;
  ReviewItem item(const std::string& id) const;
  /// Throws ValidationError for unknown items, invalid edited sets or a
  /// missing edited set.
  void decide(ReviewDecision decision);
  ReviewProgress progress() const;

  /// accept_gold -> kept, accept_alternative -> replaced(alternative),
  /// edited -> replaced(edited). Pending items are an error unless
  /// `partial`, in which case they are kept with a warning.
  ReviewExport export_reviewed(const Corpus& corpus, bool partial = false) const;

  void snapshot();
  void set_clock(Clock clock) { clock_ = std::move(clock); }
  /// Events between automatic snapshots (0 disables them).
  void set_snapshot_interval(std::size_t n) { snapshot_interval_ = n; }
  const LabelSpace& space() const { return *space_; }

  nlohmann::ordered_json state_json() const;

 private:
  void apply_event(const nlohmann::json& event);
  void append_event(const nlohmann::ordered_json& event);
  void load();
  PresentationOrder order_for(const std::string& example_id) const;

  LabelSpacePtr space_;
  std::filesystem::path dir_;
  std::uint64_t order_seed_;
  std::vector<ReviewItem> items_;
  std::map<std::string, std::size_t> by_id_;
  std::map<std::string, std::size_t> by_example_;
  std::size_t events_ = 0;
  std::size_t snapshot_interval_ = 64;
  std::ofstream log_;
  Clock clock_;
  mutable std::shared_mutex mutex_;
};

/// Item payload: `first` / `second` candidates; the gold/alternative mapping
/// is included only when `unseal` is set.
nlohmann::ordered_json item_payload(const ReviewItem& item, const LabelSpace& space, bool unseal);
nlohmann::ordered_json export_payload(const ReviewExport& e, const LabelSpace& space);

struct ReviewServerOptions {
  bool unseal = false;
  std::optional<std::filesystem::path> static_dir;
  /// When set, POST /api/export also writes corpus.jsonl and
  /// change_manifest.json here.
  std::optional<std::filesystem::path> export_dir;
  std::size_t page_size = 20;
};

/// HTTP+JSON front-end:
///   GET  /api/queue?status=pending|decided&page=N&page_size=K
///   GET  /api/items/{id}
///   POST /api/decisions   {"item_id", "choice": first|second|edited, "labels", "reviewer"}
///   GET  /api/progress
///   POST /api/export      {"partial": bool}
///   GET  /api/space
class ReviewServer {
 public:
  ReviewServer(ReviewStore& store, const Corpus& corpus, ReviewServerOptions options = {});
  ~ReviewServer();

  /// Binds to an ephemeral port and returns it.
  int bind_any(const std::string& host = "127.0.0.1");
  bool bind(const std::string& host, int port);
  /// Blocks until stop().
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  void routes();

  ReviewStore& store_;
  const Corpus& corpus_;
  ReviewServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace liahr
