#include <doctest.h>

#include <atomic>
#include <condition_variable>
#include <thread>

#include <httplib.h>

#include "charactergpt/service.hpp"
#include "support.hpp"

using namespace charactergpt;
using namespace std::chrono_literals;
using Json = nlohmann::json;

namespace {

/// Holds chapter extractions until released, so a training run can be
/// observed while it is still in progress.
struct Gate {
    std::mutex m;
    std::condition_variable cv;
    bool open = true;

    void close() {
        std::lock_guard lock(m);
        open = false;
    }
    void release() {
        {
            std::lock_guard lock(m);
            open = true;
        }
        cv.notify_all();
    }
    void wait() {
        std::unique_lock lock(m);
        cv.wait(lock, [this] { return open; });
    }
};

struct Harness {
    testsupport::TempDir tmp;
    std::shared_ptr<Gate> gate = std::make_shared<Gate>();
    std::unique_ptr<Workspace> ws;
    std::unique_ptr<Service> service;
    std::thread thread;
    int port = -1;

    explicit Harness(std::size_t body_limit = 4 * 1024 * 1024) {
        testsupport::write_synthetic_corpus(tmp / "corpus", "svc", 3);
        AppConfig c;
        c.store_root = tmp / "store";
        c.corpus_root = tmp / "corpus";
        c.prompts_dir = testsupport::prompts_dir();
        c.fixed_clock = true;
        c.cors_allowlist = {"http://ui.example"};
        c.body_limit = body_limit;
        auto inner = testsupport::pipeline_responder();
        auto g = gate;
        auto provider = std::make_unique<MockProvider>(
            std::vector<ScriptEntry>{}, [inner, g](const CompletionRequest& r, const std::string& fp) {
                if (r.attachment && r.attachment->find("chapmark-") != std::string::npos) g->wait();
                return inner(r, fp);
            });
        ws = std::make_unique<Workspace>(c, std::move(provider));
        service = std::make_unique<Service>(*ws);
        port = service->bind_any_port();
        REQUIRE(port > 0);
        thread = std::thread([this] { service->listen_after_bind(); });
        service->wait_until_ready();
    }

    ~Harness() {
        gate->release();
        service->stop();
        thread.join();
        service.reset();
    }

    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(30, 0);
        return c;
    }

    Json wait_run(const std::string& run_id) {
        auto c = client();
        for (int i = 0; i < 500; ++i) {
            auto res = c.Get("/v1/runs/" + run_id);
            REQUIRE(res);
            auto j = Json::parse(res->body);
            if (j["status"] != "running") return j;
            std::this_thread::sleep_for(10ms);
        }
        FAIL("training run did not finish");
        return {};
    }
};

Json post(httplib::Client& c, const std::string& path, const Json& body, int expected_status) {
    auto res = c.Post(path, body.dump(), "application/json");
    REQUIRE(res);
    CHECK_MESSAGE(res->status == expected_status, path << " -> " << res->body);
    return Json::parse(res->body);
}

Json get(httplib::Client& c, const std::string& path, int expected_status) {
    auto res = c.Get(path);
    REQUIRE(res);
    CHECK_MESSAGE(res->status == expected_status, path << " -> " << res->body);
    return Json::parse(res->body);
}

}  // namespace

TEST_SUITE("service") {

TEST_CASE("status mapping and envelope") {
    CHECK(http_status(ErrorKind::validation) == 400);
    CHECK(http_status(ErrorKind::not_found) == 404);
    CHECK(http_status(ErrorKind::conflict) == 409);
    CHECK(http_status(ErrorKind::precondition) == 422);
    CHECK(http_status(ErrorKind::transport) == 502);
    CHECK(http_status(ErrorKind::protocol) == 502);
    CHECK(http_status(ErrorKind::internal) == 500);
    const auto env = error_envelope(Error(ErrorKind::conflict, "busy", {{"x", 1}}));
    CHECK(env["code"] == "conflict");
    CHECK(env["message"] == "busy");
    CHECK(env["details"]["x"] == 1);
    CHECK(openapi_document()["paths"].contains("/v1/sessions/{id}/messages"));
}

TEST_CASE("full flow over HTTP") {
    Harness h;
    auto c = h.client();
    CHECK(get(c, "/healthz", 200)["status"] == "ok");
    CHECK(get(c, "/openapi.json", 200)["openapi"] == "3.0.3");

    const auto reg = post(c, "/v1/characters", {{"corpus_path", (h.tmp / "corpus" / "svc").string()}}, 201);
    CHECK(reg["chapters"] == 3);
    CHECK(get(c, "/v1/characters", 200)["characters"][0]["head"].is_null());

    CHECK(post(c, "/v1/characters/svc/train", Json::object(), 422)["code"] == "precondition");
    CHECK(post(c, "/v1/characters/svc/initialize", Json::object(), 201)["epoch"] == 0);
    CHECK(post(c, "/v1/characters/svc/initialize", Json::object(), 409)["code"] == "conflict");

    h.gate->close();
    const auto started = post(c, "/v1/characters/svc/train", Json::object(), 202);
    const std::string run_id = started["run_id"];
    CHECK(post(c, "/v1/characters/svc/train", Json::object(), 409)["code"] == "conflict");
    CHECK(get(c, "/v1/runs/" + run_id, 200)["status"] == "running");
    h.gate->release();
    const auto done = h.wait_run(run_id);
    CHECK(done["status"] == "succeeded");
    CHECK(done["completed_epochs"] == Json::array({1, 2, 3}));
    CHECK(get(c, "/v1/runs/nope", 404)["code"] == "not_found");

    const auto epochs = get(c, "/v1/characters/svc/epochs", 200)["epochs"];
    CHECK(epochs.size() == 4);
    const auto persona = get(c, "/v1/characters/svc/persona?epoch=2", 200);
    CHECK(persona["persona"]["epoch"] == 2);
    CHECK(persona["token_totals"].contains("backstory"));
    CHECK(persona["snapshot"]["epoch"] == 2);
    const auto missing = get(c, "/v1/characters/svc/persona?epoch=9", 404);
    CHECK(missing["details"]["available_epochs"] == Json::array({0, 1, 2, 3}));
    CHECK(get(c, "/v1/characters/svc/persona?epoch=x", 400)["code"] == "validation");
    CHECK(get(c, "/v1/characters/svc/persona", 400)["code"] == "validation");

    const auto s = post(c, "/v1/sessions", {{"character_id", "svc"}, {"epoch", 1}}, 201);
    const std::string sid = s["session_id"];
    const auto m1 = post(c, "/v1/sessions/" + sid + "/messages", {{"text", "Who are you?"}}, 200);
    CHECK(m1["turns"] == 2);
    CHECK_FALSE(m1["reply"].get<std::string>().empty());
    CHECK(get(c, "/v1/sessions/" + sid, 200)["messages"].size() == 2);
    CHECK(post(c, "/v1/sessions/zzz/messages", {{"text", "hi"}}, 404)["code"] == "not_found");
    CHECK(post(c, "/v1/sessions", {{"character_id", "svc"}, {"epoch", 7}}, 404)["code"] == "not_found");

    const auto bfi = post(c, "/v1/eval/bfi", {{"character_id", "svc"}, {"epoch", 3}, {"runs", 1}}, 200);
    CHECK(bfi["respondent"] == "svc@epoch3");
    const auto stories = post(c, "/v1/eval/stories", {{"character_id", "svc"}, {"epoch", 3}, {"n", 2}}, 200);
    CHECK(stories["story_ids"] == Json::array({"svc-e3-s1", "svc-e3-s2"}));
}

TEST_CASE("compare and ratings endpoints") {
    Harness h;
    auto c = h.client();
    const auto dir = testsupport::data_dir() / "bfi_tables" / "megumin";
    auto load = [&](const char* f) { return Json::parse(testsupport::read_file(dir / f)); };
    const Json body{{"human", load("human.json")},
                    {"models",
                     Json::array({{{"name", "ChatGPT"}, {"table", load("chatgpt.json")}},
                                  {{"name", "ChatGPT+Ours"}, {"table", load("chatgpt_ours.json")}},
                                  {{"name", "GPT-4"}, {"table", load("gpt4.json")}},
                                  {{"name", "GPT-4+Ours"}, {"table", load("gpt4_ours.json")}}})},
                    {"expected", load("footer.json")}};
    const auto report = post(c, "/v1/eval/compare", body, 200);
    CHECK(report["table"].get<std::string>().find("# Wins") != std::string::npos);
    for (const auto& d : report["divergences"]) CHECK(d["annotated"] == true);
    const auto& opn = report["traits"][0];
    CHECK(opn["sum_abs"] == Json{{"ChatGPT", 130}, {"ChatGPT+Ours", 143}, {"GPT-4", 113}, {"GPT-4+Ours", 69}});
    CHECK(opn["wins"] == Json{{"ChatGPT", 0}, {"ChatGPT+Ours", 3}, {"GPT-4", 2}, {"GPT-4+Ours", 3}});

    CHECK(post(c, "/v1/eval/compare", {{"human", load("human.json")}, {"models", 3}}, 400)["code"] == "validation");
    CHECK(post(c, "/v1/eval/compare", Json::object(), 400)["code"] == "validation");

    const std::string csv =
        "rater_id,story_id,Grammar,Coherence,Likability,Relevance,Complexity,Creativity\n"
        "r1,a-e1-s1,5,4,3,4,2,3\nr2,a-e1-s1,4,4,4,4,4,4\nr1,b-e1-s1,3,3,3,3,3,3\n";
    auto res = c.Post("/v1/eval/ratings", csv, "text/csv");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto agg = Json::parse(res->body);
    CHECK(agg["rows"].size() == 2);
    CHECK(agg["rows"][0]["means"]["Grammar"] == "4.50");
    CHECK(agg.contains("average"));
    res = c.Post("/v1/eval/ratings?grouping=rater", csv, "text/csv");
    REQUIRE(res);
    CHECK(res->status == 400);
    res = c.Post("/v1/eval/ratings", "rater_id,story_id\n", "text/csv");
    REQUIRE(res);
    CHECK(res->status == 400);
}

TEST_CASE("transport concerns: 404 route, malformed json, CORS, body limit") {
    Harness h(2048);
    auto c = h.client();
    const auto nf = get(c, "/v1/nowhere", 404);
    CHECK(nf["code"] == "not_found");

    auto res = c.Post("/v1/sessions", "{not json", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    CHECK(Json::parse(res->body)["code"] == "validation");

    res = c.Post("/v1/sessions", std::string(4096, 'x'), "application/json");
    REQUIRE(res);
    CHECK(res->status == 413);
    CHECK(Json::parse(res->body)["code"] == "validation");

    httplib::Headers allowed{{"Origin", "http://ui.example"}};
    res = c.Get("/healthz", allowed);
    REQUIRE(res);
    CHECK(res->get_header_value("Access-Control-Allow-Origin") == "http://ui.example");
    httplib::Headers foreign{{"Origin", "http://evil.example"}};
    res = c.Get("/healthz", foreign);
    REQUIRE(res);
    CHECK_FALSE(res->has_header("Access-Control-Allow-Origin"));
    res = c.Options("/v1/sessions", allowed);
    REQUIRE(res);
    CHECK(res->status == 204);
    CHECK(res->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);
}

}
