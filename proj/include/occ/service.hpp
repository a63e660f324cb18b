#pragma once

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "occ/data.hpp"
#include "occ/oracle.hpp"
#include "occ/trainer.hpp"

namespace httplib {
class Server;
}

namespace occ {

enum class QueryStatus { Pending, Answered, Expired };
std::string to_string(QueryStatus s);

struct PendingQuery {
    std::uint64_t id = 0;
    SamplePair pair;
    std::vector<double> features_i;
    std::vector<double> features_j;
    std::array<double, 2> pc_i{};
    std::array<double, 2> pc_j{};
    int epoch = 0;
    QueryStatus status = QueryStatus::Pending;
    std::optional<Answer> answer;
};

nlohmann::json to_json(const PendingQuery& q);

enum class AnswerOutcome { Recorded, UnknownId, Expired, AlreadyAnswered };

/// Queue of open oracle queries shared by the trainer thread and the HTTP
/// handlers. The first answer to an id wins; late answers are rejected.
class QueryBroker {
public:
    explicit QueryBroker(std::size_t capacity = 16,
                         std::chrono::milliseconds timeout = std::chrono::seconds(60));

    /// Assigns an id and opens the query; empty when the queue is full.
    std::optional<std::uint64_t> enqueue(PendingQuery query);

    /// Blocks until the query is answered or the timeout passes. On timeout
    /// the query is marked expired and nothing is returned.
    std::optional<Answer> await(std::uint64_t id);

    AnswerOutcome answer(std::uint64_t id, bool same);

    /// Oldest open query.
    std::optional<PendingQuery> next() const;
    std::optional<PendingQuery> get(std::uint64_t id) const;
    std::size_t pending() const;

    std::chrono::milliseconds timeout() const noexcept { return timeout_; }

private:
    mutable std::mutex mutex_;
    std::condition_variable answered_;
    std::map<std::uint64_t, PendingQuery> queries_;
    std::uint64_t next_id_ = 1;
    std::size_t capacity_;
    std::chrono::milliseconds timeout_;
};

/// Latest training progress as seen by /status and /scatter.
class RunStatus {
public:
    void update(const TrainProgress& progress);
    void set_scatter(std::vector<ScatterRow> rows);
    nlohmann::json status_json(std::size_t pending) const;
    nlohmann::json scatter_json() const;
    /// Scatter coordinates of one sample, (0, 0) before any scatter is set.
    std::array<double, 2> point(std::size_t sample) const;

private:
    mutable std::mutex mutex_;
    TrainProgress progress_;
    std::vector<ScatterRow> scatter_;
};

/// Oracle that hands each pair to the broker and waits for a human. Display
/// coordinates come from the current scatter in `status`.
class InteractiveOracle final : public OracleAdapter {
public:
    InteractiveOracle(const Dataset& dataset, QueryBroker& broker, const RunStatus& status);
    std::optional<Answer> ask(SamplePair pair, int epoch) override;

private:
    const Dataset& dataset_;
    QueryBroker& broker_;
    const RunStatus& status_;
};

struct StartupError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// HTTP front end: GET /next-query, POST /answer, GET /status, GET /scatter.
class OracleService {
public:
    OracleService(QueryBroker& broker, RunStatus& status);
    ~OracleService();
    OracleService(const OracleService&) = delete;
    OracleService& operator=(const OracleService&) = delete;

    /// Binds and starts serving on a background thread. Port 0 picks a free
    /// port. Throws StartupError when the address cannot be bound.
    void start(const std::string& host = "127.0.0.1", int port = 0);
    void stop();
    int port() const noexcept { return port_; }

private:
    QueryBroker& broker_;
    RunStatus& status_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

/// TrainHooks that keep `status` current, including the scatter export.
TrainHooks status_hooks(RunStatus& status, const Dataset& dataset);

}  // namespace occ
