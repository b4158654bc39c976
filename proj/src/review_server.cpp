#include <fstream>

#include <httplib.h>

#include "liahr/error.hpp"
#include "liahr/review.hpp"

namespace liahr {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

std::size_t query_size(const httplib::Request& req, const char* name, std::size_t fallback) {
  if (!req.has_param(name)) return fallback;
  const auto v = req.get_param_value(name);
  try {
    const auto n = std::stoll(v);
    if (n < 1) throw ValidationError("");
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw ValidationError("query parameter '" + std::string(name) + "' must be a positive integer");
  }
}

}  // namespace

ReviewServer::ReviewServer(ReviewStore& store, const Corpus& corpus, ReviewServerOptions options)
    : store_(store), corpus_(corpus), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  routes();
}

ReviewServer::~ReviewServer() { stop(); }

void ReviewServer::routes() {
  auto& s = *server_;
  const auto& space = store_.space();

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, std::string("malformed request body: ") + e.what());
    } catch (const ValidationError& e) {
      send_error(res, 400, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });

  s.Get("/api/space", [&space](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, space.to_json());
  });

  s.Get("/api/queue", [this, &space](const httplib::Request& req, httplib::Response& res) {
    std::optional<ReviewStatus> status;
    if (req.has_param("status") && req.get_param_value("status") != "all") {
      status = review_status_from_string(req.get_param_value("status"));
    }
    const auto page = query_size(req, "page", 1);
    const auto page_size = query_size(req, "page_size", options_.page_size);
    const auto items = store_.queue(status);
    auto arr = nlohmann::ordered_json::array();
    for (std::size_t i = (page - 1) * page_size; i < items.size() && i < page * page_size; ++i) {
      arr.push_back(item_payload(items[i], space, options_.unseal));
    }
    nlohmann::ordered_json body;
    body["items"] = std::move(arr);
    body["page"] = page;
    body["page_size"] = page_size;
    body["total"] = items.size();
    body["progress"] = store_.progress().to_json();
    send_json(res, 200, body);
  });

  s.Get(R"(/api/items/([^/]+))", [this, &space](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    ReviewItem item;
    try {
      item = store_.item(id);
    } catch (const ValidationError& e) {
      return send_error(res, 404, e.what());
    }
    send_json(res, 200, item_payload(item, space, options_.unseal));
  });

  s.Post("/api/decisions", [this, &space](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    ReviewDecision d;
    d.item_id = body.at("item_id").get<std::string>();
    ReviewItem item;
    try {
      item = store_.item(d.item_id);
    } catch (const ValidationError& e) {
      return send_error(res, 404, e.what());
    }
    const auto choice = body.at("choice").get<std::string>();
    const bool first_is_gold = item.order == PresentationOrder::gold_first;
    if (choice == "first") {
      d.choice = first_is_gold ? ReviewChoice::accept_gold : ReviewChoice::accept_alternative;
    } else if (choice == "second") {
      d.choice = first_is_gold ? ReviewChoice::accept_alternative : ReviewChoice::accept_gold;
    } else if (choice == "edited") {
      d.choice = ReviewChoice::edited;
      if (!body.contains("labels")) return send_error(res, 400, "edited decision needs 'labels'");
      d.edited = space.make_set(body.at("labels").get<std::vector<std::string>>());
    } else {
      return send_error(res, 400, "choice must be first, second or edited");
    }
    d.reviewer = req.has_header("X-Reviewer") ? req.get_header_value("X-Reviewer") : body.value("reviewer", "");
    store_.decide(d);
    const auto after = store_.item(d.item_id);
    send_json(res, 200, {{"ok", true}, {"item_id", d.item_id}, {"status", "decided"},
                         {"decisions", after.history.size()}, {"progress", store_.progress().to_json()}});
  });

  s.Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, store_.progress().to_json());
  });

  s.Post("/api/export", [this, &space](const httplib::Request& req, httplib::Response& res) {
    bool partial = false;
    if (!req.body.empty()) partial = nlohmann::json::parse(req.body).value("partial", false);
    if (req.has_param("partial")) partial = req.get_param_value("partial") == "true";
    std::optional<ReviewExport> exported;
    try {
      exported.emplace(store_.export_reviewed(corpus_, partial));
    } catch (const ValidationError& err) {
      return send_error(res, 409, err.what());
    }
    const auto& e = *exported;
    if (options_.export_dir) {
      std::filesystem::create_directories(*options_.export_dir);
      write_corpus(e.corpus, *options_.export_dir / "corpus.jsonl");
      std::ofstream(*options_.export_dir / "change_manifest.json") << e.manifest.to_json(space).dump(2) << '\n';
    }
    send_json(res, 200, export_payload(e, space));
  });

  if (options_.static_dir) {
    if (!s.set_mount_point("/", options_.static_dir->string())) {
      throw ConfigError("static directory not found: " + options_.static_dir->string());
    }
  }
}

int ReviewServer::bind_any(const std::string& host) { return server_->bind_to_any_port(host); }

bool ReviewServer::bind(const std::string& host, int port) { return server_->bind_to_port(host, port); }

bool ReviewServer::listen_after_bind() { return server_->listen_after_bind(); }

void ReviewServer::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

void ReviewServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace liahr
