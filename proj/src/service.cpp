#include "charactergpt/service.hpp"

#include <atomic>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <httplib.h>

#include "charactergpt/eval/compare.hpp"
#include "charactergpt/eval/ratings.hpp"

namespace charactergpt {

int http_status(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::validation: return 400;
        case ErrorKind::not_found: return 404;
        case ErrorKind::conflict: return 409;
        case ErrorKind::precondition: return 422;
        case ErrorKind::transport:
        case ErrorKind::protocol: return 502;
        case ErrorKind::internal: return 500;
    }
    return 500;
}

nlohmann::ordered_json error_envelope(const Error& error) {
    return {{"code", to_string(error.kind())}, {"message", error.what()}, {"details", error.details()}};
}

namespace {

using httplib::Request;
using httplib::Response;

void send_json(Response& res, const nlohmann::ordered_json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(Response& res, const Error& e) { send_json(res, error_envelope(e), http_status(e.kind())); }

nlohmann::ordered_json parse_body(const Request& req) {
    if (req.body.empty()) return nlohmann::ordered_json::object();
    auto doc = nlohmann::ordered_json::parse(req.body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) fail(ErrorKind::validation, "request body must be a JSON object");
    return doc;
}

template <class T>
T field(const nlohmann::ordered_json& body, const char* name) {
    if (!body.contains(name)) fail(ErrorKind::validation, std::string("missing field '") + name + "'");
    try {
        return body.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
        fail(ErrorKind::validation, std::string("field '") + name + "' has the wrong type");
    }
}

int epoch_param(const Request& req) {
    if (!req.has_param("epoch")) fail(ErrorKind::validation, "query parameter 'epoch' is required");
    const auto v = req.get_param_value("epoch");
    try {
        std::size_t used = 0;
        const int e = std::stoi(v, &used);
        if (used == v.size() && e >= 0) return e;
    } catch (const std::exception&) {
    }
    fail(ErrorKind::validation, "epoch must be a non-negative integer, got '" + v + "'");
}

template <class F>
httplib::Server::Handler guarded(F f) {
    return [f = std::move(f)](const Request& req, Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            send_error(res, e);
        } catch (const std::exception& e) {
            send_error(res, Error(ErrorKind::internal, e.what()));
        }
    };
}

nlohmann::ordered_json route(std::string summary, std::string method = "get") {
    return {{method, {{"summary", std::move(summary)}}}};
}

}  // namespace

nlohmann::ordered_json openapi_document() {
    nlohmann::ordered_json paths;
    paths["/healthz"] = route("Liveness probe");
    paths["/v1/characters"] = route("Register a character corpus {corpus_path}", "post");
    paths["/v1/characters"]["get"] = {{"summary", "List registered characters"}};
    paths["/v1/characters/{id}/initialize"] = route("Build and store the epoch-0 persona", "post");
    paths["/v1/characters/{id}/train"] = route("Start a training run {resume_from?}; returns a run id", "post");
    paths["/v1/runs/{id}"] = route("Training run status");
    paths["/v1/characters/{id}/epochs"] = route("Stored epochs");
    paths["/v1/characters/{id}/persona"] = route("Assembled persona, section offsets and per-trait token totals");
    paths["/v1/sessions"] = route("Open a chat session {character_id, epoch}", "post");
    paths["/v1/sessions/{id}/messages"] = route("Send {text}; returns the character's reply", "post");
    paths["/v1/sessions/{id}"] = route("Session transcript");
    paths["/v1/eval/bfi"] = route("Administer the BFI {character_id, epoch, runs}", "post");
    paths["/v1/eval/compare"] = route("Compare facet tables {human, models, expected?}", "post");
    paths["/v1/eval/stories"] = route("Generate stories {character_id, epoch, n}", "post");
    paths["/v1/eval/ratings"] = route("Aggregate a ratings CSV body (?grouping=group|story|all)", "post");
    return {{"openapi", "3.0.3"},
            {"info", {{"title", "CharacterGPT service"}, {"version", "1"}}},
            {"paths", std::move(paths)}};
}

struct Service::Impl {
    struct Run {
        std::string id;
        std::string character_id;
        std::string status = "running";
        std::vector<int> completed;
        std::optional<TrainRun> result;
        std::optional<nlohmann::ordered_json> error;
    };

    explicit Impl(Workspace& w) : ws(w) { install(); }

    ~Impl() {
        server.stop();
        std::vector<std::thread> pending;
        {
            std::lock_guard lock(mutex);
            pending.swap(workers);
        }
        for (auto& t : pending) t.join();
    }

    Workspace& ws;
    httplib::Server server;
    std::mutex mutex;
    std::map<std::string, std::shared_ptr<ChatSession>> sessions;
    std::map<std::string, std::shared_ptr<Run>> runs;
    std::set<std::string> training;
    std::vector<std::thread> workers;
    std::atomic<int> next_session{1};
    std::atomic<int> next_run{1};

    nlohmann::ordered_json run_json(const Run& run) {
        std::lock_guard lock(mutex);
        nlohmann::ordered_json j{{"run_id", run.id},
                                 {"character_id", run.character_id},
                                 {"status", run.status},
                                 {"completed_epochs", run.completed}};
        if (run.result) j["result"] = to_json(*run.result);
        if (run.error) j["error"] = *run.error;
        return j;
    }

    std::shared_ptr<ChatSession> session(const std::string& id) {
        std::lock_guard lock(mutex);
        auto it = sessions.find(id);
        if (it == sessions.end()) fail(ErrorKind::not_found, "no session " + id, {{"session_id", id}});
        return it->second;
    }

    void start_training(const CharacterId& id, std::optional<int> resume_from, Response& res) {
        if (!ws.store().head(id)) {
            fail(ErrorKind::precondition, "character '" + id.str() + "' has not been initialized",
                 {{"character_id", id.str()}});
        }
        auto run = std::make_shared<Run>();
        run->id = "run-" + std::to_string(next_run++);
        run->character_id = id.str();
        {
            std::lock_guard lock(mutex);
            if (!training.insert(id.str()).second) {
                fail(ErrorKind::conflict, "training already in progress for '" + id.str() + "'",
                     {{"character_id", id.str()}, {"lineage", ws.store().lineage()}});
            }
            runs[run->id] = run;
            workers.emplace_back([this, run, id, resume_from] {
                try {
                    auto result = ws.train(id, resume_from, [&](const EpochResult& r) {
                        std::lock_guard lock(mutex);
                        run->completed.push_back(r.snapshot.epoch);
                    });
                    std::lock_guard lock(mutex);
                    run->status = result.ok() ? "succeeded" : "failed";
                    run->result = std::move(result);
                } catch (const Error& e) {
                    std::lock_guard lock(mutex);
                    run->status = "failed";
                    run->error = error_envelope(e);
                } catch (const std::exception& e) {
                    std::lock_guard lock(mutex);
                    run->status = "failed";
                    run->error = error_envelope(Error(ErrorKind::internal, e.what()));
                }
                std::lock_guard lock(mutex);
                training.erase(id.str());
            });
        }
        send_json(res, {{"run_id", run->id}, {"character_id", id.str()}, {"status", "running"}}, 202);
    }

    nlohmann::ordered_json compare_request(const nlohmann::ordered_json& body) {
        const auto human = eval::FacetScoreTable::from_json(field<nlohmann::json>(body, "human"));
        std::vector<eval::NamedTable> models;
        const auto& m = body.contains("models") ? body["models"] : nlohmann::ordered_json();
        if (m.is_array()) {
            for (const auto& entry : m) {
                models.emplace_back(field<std::string>(entry, "name"),
                                    eval::FacetScoreTable::from_json(field<nlohmann::json>(entry, "table")));
            }
        } else if (m.is_object()) {
            for (const auto& [name, table] : m.items()) {
                models.emplace_back(name, eval::FacetScoreTable::from_json(nlohmann::json(table)));
            }
        } else {
            fail(ErrorKind::validation, "'models' must be an array of {name, table} or an object");
        }
        const auto report = eval::compare(human, models);
        auto out = report.to_json();
        out["table"] = eval::render_table(report);
        if (body.contains("expected")) {
            const auto footer = eval::FooterFixture::from_json(nlohmann::json(body["expected"]));
            auto divs = nlohmann::ordered_json::array();
            for (const auto& d : eval::divergences(report, footer)) divs.push_back(eval::to_json(d));
            out["divergences"] = std::move(divs);
        }
        return out;
    }

    void install() {
        server.set_payload_max_length(ws.config().body_limit);

        server.set_error_handler([](const Request&, Response& res) {
            if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
            const ErrorKind kind = res.status == 404   ? ErrorKind::not_found
                                   : res.status < 500 ? ErrorKind::validation
                                                      : ErrorKind::internal;
            const std::string message = res.status == 404   ? "no such route"
                                        : res.status == 413 ? "request body too large"
                                                            : httplib::status_message(res.status);
            res.set_content(error_envelope(Error(kind, message)).dump(), "application/json");
            return httplib::Server::HandlerResponse::Handled;
        });

        server.set_post_routing_handler([this](const Request& req, Response& res) {
            const auto origin = req.get_header_value("Origin");
            if (origin.empty()) return;
            const auto& allow = ws.config().cors_allowlist;
            const bool any = std::find(allow.begin(), allow.end(), "*") != allow.end();
            if (any || std::find(allow.begin(), allow.end(), origin) != allow.end()) {
                res.set_header("Access-Control-Allow-Origin", origin);
                res.set_header("Vary", "Origin");
            }
        });

        server.Options(R"(/.*)", [](const Request&, Response& res) {
            res.status = 204;
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
        });

        server.Get("/healthz", guarded([this](const Request&, Response& res) {
                       send_json(res, {{"status", "ok"}, {"lineage", ws.store().lineage()}});
                   }));
        server.Get("/openapi.json",
                   guarded([](const Request&, Response& res) { send_json(res, openapi_document()); }));

        server.Get("/v1/characters", guarded([this](const Request&, Response& res) {
                       auto list = nlohmann::ordered_json::array();
                       for (const auto& id : ws.store().characters()) {
                           nlohmann::ordered_json c{{"character_id", id.str()}};
                           if (auto rec = ws.store().character(id)) c["display_name"] = rec->display_name;
                           const auto h = ws.store().head(id);
                           c["head"] = h ? nlohmann::ordered_json(*h) : nlohmann::ordered_json();
                           list.push_back(std::move(c));
                       }
                       send_json(res, {{"characters", std::move(list)}});
                   }));

        server.Post("/v1/characters", guarded([this](const Request& req, Response& res) {
                        const auto body = parse_body(req);
                        const auto record = ws.register_character(field<std::string>(body, "corpus_path"));
                        const auto corpus = ws.corpus(record.character_id);
                        send_json(res,
                                  {{"character_id", record.character_id.str()},
                                   {"display_name", record.display_name},
                                   {"corpus_path", record.corpus_path.string()},
                                   {"chapters", corpus.chapters.size()}},
                                  201);
                    }));

        server.Post("/v1/characters/:id/initialize", guarded([this](const Request& req, Response& res) {
                        const CharacterId id(req.path_params.at("id"));
                        const auto result = ws.initialize(id);
                        send_json(res,
                                  {{"character_id", id.str()},
                                   {"epoch", 0},
                                   {"created_at", result.snapshot.created_at},
                                   {"warnings", result.warnings}},
                                  201);
                    }));

        server.Post("/v1/characters/:id/train", guarded([this](const Request& req, Response& res) {
                        const CharacterId id(req.path_params.at("id"));
                        const auto body = parse_body(req);
                        std::optional<int> resume_from;
                        if (body.contains("resume_from") && !body["resume_from"].is_null()) {
                            resume_from = field<int>(body, "resume_from");
                        }
                        start_training(id, resume_from, res);
                    }));

        server.Get("/v1/runs/:id", guarded([this](const Request& req, Response& res) {
                       std::shared_ptr<Run> run;
                       {
                           std::lock_guard lock(mutex);
                           auto it = runs.find(req.path_params.at("id"));
                           if (it != runs.end()) run = it->second;
                       }
                       if (!run) fail(ErrorKind::not_found, "no run " + req.path_params.at("id"));
                       send_json(res, run_json(*run));
                   }));

        server.Get("/v1/characters/:id/epochs", guarded([this](const Request& req, Response& res) {
                       const CharacterId id(req.path_params.at("id"));
                       auto list = nlohmann::ordered_json::array();
                       for (const auto& e : ws.epochs(id)) list.push_back(to_json(e));
                       send_json(res, {{"character_id", id.str()}, {"epochs", std::move(list)}});
                   }));

        server.Get("/v1/characters/:id/persona", guarded([this](const Request& req, Response& res) {
                       const CharacterId id(req.path_params.at("id"));
                       const int epoch = epoch_param(req);
                       const auto snap = ws.snapshot(id, epoch);
                       nlohmann::ordered_json totals = nlohmann::ordered_json::object();
                       for (const auto& [key, n] : section_token_totals(snap)) totals[std::string(to_string(key))] = n;
                       send_json(res, {{"persona", to_json(ws.persona(id, epoch))},
                                       {"token_totals", std::move(totals)},
                                       {"snapshot", to_json(snap)}});
                   }));

        server.Post("/v1/sessions", guarded([this](const Request& req, Response& res) {
                        const auto body = parse_body(req);
                        const CharacterId id(field<std::string>(body, "character_id"));
                        const int epoch = field<int>(body, "epoch");
                        const std::string sid = "s" + std::to_string(next_session++);
                        auto s = ws.open_session(id, epoch, sid);
                        {
                            std::lock_guard lock(mutex);
                            sessions[sid] = s;
                        }
                        send_json(res, {{"session_id", sid}, {"character_id", id.str()}, {"epoch", epoch}}, 201);
                    }));

        server.Post("/v1/sessions/:id/messages", guarded([this](const Request& req, Response& res) {
                        auto s = session(req.path_params.at("id"));
                        const auto body = parse_body(req);
                        const auto reply = s->respond(field<std::string>(body, "text"), ws.provider(), ws.chat_options());
                        send_json(res, {{"session_id", s->id()}, {"reply", reply}, {"turns", s->history().size()}});
                    }));

        server.Get("/v1/sessions/:id", guarded([this](const Request& req, Response& res) {
                       send_json(res, session(req.path_params.at("id"))->to_json());
                   }));

        server.Post("/v1/eval/bfi", guarded([this](const Request& req, Response& res) {
                        const auto body = parse_body(req);
                        const CharacterId id(field<std::string>(body, "character_id"));
                        const int runs_n = body.contains("runs") ? field<int>(body, "runs") : 1;
                        send_json(res, ws.bfi(id, field<int>(body, "epoch"), runs_n).to_json());
                    }));

        server.Post("/v1/eval/compare", guarded([this](const Request& req, Response& res) {
                        send_json(res, compare_request(parse_body(req)));
                    }));

        server.Post("/v1/eval/stories", guarded([this](const Request& req, Response& res) {
                        const auto body = parse_body(req);
                        const CharacterId id(field<std::string>(body, "character_id"));
                        const auto tasks = ws.stories(id, field<int>(body, "epoch"), field<int>(body, "n"));
                        auto ids = nlohmann::ordered_json::array();
                        auto stories = nlohmann::ordered_json::array();
                        for (const auto& t : tasks) {
                            ids.push_back(t.story_id);
                            nlohmann::ordered_json s{{"story_id", t.story_id}, {"word_count", t.word_count}};
                            if (t.error) s["error"] = *t.error;
                            stories.push_back(std::move(s));
                        }
                        send_json(res, {{"story_ids", std::move(ids)}, {"stories", std::move(stories)}});
                    }));

        server.Post("/v1/eval/ratings", guarded([](const Request& req, Response& res) {
                        const std::string g = req.has_param("grouping") ? req.get_param_value("grouping") : "group";
                        const auto grouping = eval::parse_grouping(g);
                        if (!grouping) fail(ErrorKind::validation, "unknown grouping '" + g + "'");
                        const auto sheets = eval::parse_ratings_csv(req.body);
                        const auto rows = eval::aggregate_ratings(sheets, *grouping);
                        auto out = nlohmann::ordered_json::array();
                        for (const auto& r : rows) out.push_back(eval::to_json(r));
                        nlohmann::ordered_json body{{"grouping", g}, {"rows", std::move(out)}};
                        if (*grouping == eval::Grouping::group && rows.size() > 1) {
                            body["average"] = eval::to_json(eval::cross_average(rows, "avg"));
                        }
                        send_json(res, body);
                    }));
    }
};

Service::Service(Workspace& workspace) : impl_(std::make_unique<Impl>(workspace)) {}

Service::~Service() = default;

bool Service::listen() { return impl_->server.listen(impl_->ws.config().host, impl_->ws.config().port); }

int Service::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool Service::listen_after_bind() { return impl_->server.listen_after_bind(); }

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

void Service::stop() { impl_->server.stop(); }

}  // namespace charactergpt
