#include <atomic>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "occ/service.hpp"

using namespace occ;
using namespace std::chrono_literals;

namespace {

Dataset tiny(std::size_t per_class = 10) {
    SyntheticSpec spec;
    spec.samples_per_class = per_class;
    return generate_synthetic(spec);
}

TrainConfig quick() {
    TrainConfig c;
    c.epochs = 2;
    c.batch_size = 20;
    c.queries_per_batch = 1;
    c.learning_rate = 1e-3;
    c.label_extension = false;
    return c;
}

nlohmann::json get_json(httplib::Client& cli, const char* path, int expect = 200) {
    auto res = cli.Get(path);
    REQUIRE(res);
    CHECK(res->status == expect);
    return res->body.empty() ? nlohmann::json() : nlohmann::json::parse(res->body);
}

httplib::Result post_answer(httplib::Client& cli, std::uint64_t id, bool same) {
    return cli.Post("/answer", nlohmann::json{{"id", id}, {"same", same}}.dump(), "application/json");
}

}  // namespace

TEST_CASE("status before training") {
    QueryBroker broker;
    RunStatus status;
    OracleService service(broker, status);
    service.start();
    httplib::Client cli("127.0.0.1", service.port());
    const auto s = get_json(cli, "/status");
    CHECK(s["epoch"] == 0);
    CHECK(s["pending"] == 0);
    CHECK(s["queries_spent"] == 0);
    auto none = cli.Get("/next-query");
    REQUIRE(none);
    CHECK(none->status == 204);
    service.stop();
}

TEST_CASE("answers to unknown ids and malformed bodies are rejected") {
    QueryBroker broker;
    RunStatus status;
    OracleService service(broker, status);
    service.start();
    httplib::Client cli("127.0.0.1", service.port());
    auto res = post_answer(cli, 999, true);
    REQUIRE(res);
    CHECK(res->status == 404);
    const auto body = nlohmann::json::parse(res->body);
    CHECK(body["recorded"] == false);
    CHECK(body.contains("error"));
    auto bad = cli.Post("/answer", "{\"id\": \"x\"}", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    service.stop();
}

TEST_CASE("a human answering over http steers the store") {
    const Dataset d = tiny();
    QueryBroker broker(16, 10s);
    RunStatus status;
    OracleService service(broker, status);
    service.start();
    InteractiveOracle oracle(d, broker, status);

    std::atomic<bool> done{false};
    std::atomic<int> answered{0};
    std::thread human([&] {
        httplib::Client cli("127.0.0.1", service.port());
        while (!done) {
            auto res = cli.Get("/next-query");
            if (!res || res->status != 200) {
                std::this_thread::sleep_for(2ms);
                continue;
            }
            const auto q = nlohmann::json::parse(res->body);
            const SamplePair p(q["pair"][0].get<SampleId>(), q["pair"][1].get<SampleId>());
            CHECK(q["features_i"].size() == d.dim());
            const bool same = simulated_answer(p, d, d.map('B')) == Answer::Same;
            auto ok = post_answer(cli, q["id"].get<std::uint64_t>(), same);
            REQUIRE(ok);
            CHECK(ok->status == 200);
            CHECK(nlohmann::json::parse(ok->body)["recorded"] == true);
            ++answered;
        }
    });
    const auto result = train(d, &oracle, quick(), status_hooks(status, d));
    done = true;
    human.join();

    CHECK(answered > 0);
    CHECK(result.record.queries_skipped == 0);
    CHECK(result.store.oracle_count() == static_cast<std::size_t>(answered.load()));
    for (const auto& [pair, ann] : result.store.sorted_entries()) {
        CHECK(ann.provenance == Provenance::Oracle);
        CHECK(ann.answer == simulated_answer(pair, d, d.map('B')));
    }
    httplib::Client cli("127.0.0.1", service.port());
    const auto s = get_json(cli, "/status");
    CHECK(s["epoch"] == 1);
    CHECK(s["queries_spent"] == result.record.queries_spent);
    service.stop();
}

TEST_CASE("unanswered queries expire without touching the store or budget") {
    const Dataset d = tiny();
    QueryBroker broker(16, 30ms);
    RunStatus status;
    InteractiveOracle oracle(d, broker, status);
    TrainConfig c = quick();
    c.label_extension = true;
    const auto r = train(d, &oracle, c);
    CHECK(r.record.queries.size() > 0);
    CHECK(r.record.queries_skipped == r.record.queries.size());
    CHECK(r.record.queries_spent == 0);
    CHECK(r.store.size() == 0);
    for (const auto& e : r.record.epochs) CHECK(e.c_nonzero == 0);
    CHECK(broker.pending() == 0);

    // A late answer to an expired query is refused.
    CHECK(broker.answer(1, true) == AnswerOutcome::Expired);
    CHECK(broker.get(1)->status == QueryStatus::Expired);
}

TEST_CASE("late answers over http get 409") {
    QueryBroker broker(4, 20ms);
    RunStatus status;
    OracleService service(broker, status);
    service.start();
    const auto id = broker.enqueue(PendingQuery{});
    REQUIRE(id);
    CHECK_FALSE(broker.await(*id).has_value());
    httplib::Client cli("127.0.0.1", service.port());
    auto res = post_answer(cli, *id, true);
    REQUIRE(res);
    CHECK(res->status == 409);
    service.stop();
}

TEST_CASE("first answer wins under contention") {
    for (int round = 0; round < 50; ++round) {
        QueryBroker broker(4, 1s);
        const auto id = *broker.enqueue(PendingQuery{});
        std::atomic<int> go{0};
        AnswerOutcome out[2];
        std::thread t1([&] {
            while (!go) {}
            out[0] = broker.answer(id, true);
        });
        std::thread t2([&] {
            while (!go) {}
            out[1] = broker.answer(id, false);
        });
        go = 1;
        t1.join();
        t2.join();
        const int recorded = (out[0] == AnswerOutcome::Recorded) + (out[1] == AnswerOutcome::Recorded);
        CHECK(recorded == 1);
        CHECK((out[0] == AnswerOutcome::AlreadyAnswered || out[1] == AnswerOutcome::AlreadyAnswered));
        const auto a = broker.await(id);
        REQUIRE(a);
        CHECK(*a == (out[0] == AnswerOutcome::Recorded ? Answer::Same : Answer::Different));
    }
}

TEST_CASE("a full queue refuses new queries") {
    QueryBroker broker(2, 1s);
    CHECK(broker.enqueue(PendingQuery{}).has_value());
    CHECK(broker.enqueue(PendingQuery{}).has_value());
    CHECK_FALSE(broker.enqueue(PendingQuery{}).has_value());
    CHECK(broker.pending() == 2);
    CHECK(broker.next()->id == 1);
    broker.answer(1, true);
    CHECK(broker.enqueue(PendingQuery{}).has_value());
}

TEST_CASE("binding an occupied port fails at startup") {
    QueryBroker broker;
    RunStatus status;
    OracleService first(broker, status);
    first.start();
    OracleService second(broker, status);
    CHECK_THROWS_AS(second.start("127.0.0.1", first.port()), StartupError);
    OracleService bogus(broker, status);
    CHECK_THROWS_AS(bogus.start("256.1.1.1", 0), StartupError);
    first.stop();
}

TEST_CASE("scatter rows carry coordinates and labels") {
    const Dataset d = tiny(5);
    QueryBroker broker;
    RunStatus status;
    OracleService service(broker, status);
    service.start();
    httplib::Client cli("127.0.0.1", service.port());
    CHECK(get_json(cli, "/scatter").empty());
    CHECK(status.point(3) == std::array<double, 2>{0.0, 0.0});

    TrainConfig c = quick();
    c.batch_size = 10;
    train(d, nullptr, c, status_hooks(status, d));
    const auto rows = get_json(cli, "/scatter");
    REQUIRE(rows.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto& r = rows[i];
        for (const char* key : {"pc1", "pc2", "class", "orientA", "orientB", "cluster"}) CHECK(r.contains(key));
        CHECK(r["class"] == d.classes[i]);
        CHECK(r["orientB"] == d.orient_b[i]);
        CHECK(status.point(i)[0] == r["pc1"].get<double>());
    }
    auto pre = cli.Options("/answer");
    REQUIRE(pre);
    CHECK(pre->status == 204);
    CHECK(pre->get_header_value("Access-Control-Allow-Origin") == "*");
    service.stop();
}
