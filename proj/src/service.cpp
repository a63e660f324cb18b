#include "occ/service.hpp"

#include "httplib.h"

namespace occ {

std::string to_string(QueryStatus s) {
    switch (s) {
        case QueryStatus::Pending: return "pending";
        case QueryStatus::Answered: return "answered";
        case QueryStatus::Expired: return "expired";
    }
    return "unknown";
}

nlohmann::json to_json(const PendingQuery& q) {
    return {{"id", q.id},
            {"pair", {q.pair.first, q.pair.second}},
            {"features_i", q.features_i},
            {"features_j", q.features_j},
            {"pc_i", q.pc_i},
            {"pc_j", q.pc_j},
            {"epoch", q.epoch}};
}

QueryBroker::QueryBroker(std::size_t capacity, std::chrono::milliseconds timeout)
    : capacity_(capacity), timeout_(timeout) {}

std::optional<std::uint64_t> QueryBroker::enqueue(PendingQuery query) {
    std::lock_guard lock(mutex_);
    std::size_t open = 0;
    for (const auto& [_, q] : queries_) open += q.status == QueryStatus::Pending;
    if (open >= capacity_) return std::nullopt;
    query.id = next_id_++;
    query.status = QueryStatus::Pending;
    query.answer.reset();
    const auto id = query.id;
    queries_.emplace(id, std::move(query));
    return id;
}

std::optional<Answer> QueryBroker::await(std::uint64_t id) {
    std::unique_lock lock(mutex_);
    auto it = queries_.find(id);
    if (it == queries_.end()) return std::nullopt;
    answered_.wait_for(lock, timeout_, [&] { return it->second.status != QueryStatus::Pending; });
    if (it->second.status == QueryStatus::Pending) it->second.status = QueryStatus::Expired;
    return it->second.status == QueryStatus::Answered ? it->second.answer : std::nullopt;
}

AnswerOutcome QueryBroker::answer(std::uint64_t id, bool same) {
    {
        std::lock_guard lock(mutex_);
        auto it = queries_.find(id);
        if (it == queries_.end()) return AnswerOutcome::UnknownId;
        if (it->second.status == QueryStatus::Expired) return AnswerOutcome::Expired;
        if (it->second.status == QueryStatus::Answered) return AnswerOutcome::AlreadyAnswered;
        it->second.status = QueryStatus::Answered;
        it->second.answer = same ? Answer::Same : Answer::Different;
    }
    answered_.notify_all();
    return AnswerOutcome::Recorded;
}

std::optional<PendingQuery> QueryBroker::next() const {
    std::lock_guard lock(mutex_);
    for (const auto& [_, q] : queries_)
        if (q.status == QueryStatus::Pending) return q;
    return std::nullopt;
}

std::optional<PendingQuery> QueryBroker::get(std::uint64_t id) const {
    std::lock_guard lock(mutex_);
    auto it = queries_.find(id);
    if (it == queries_.end()) return std::nullopt;
    return it->second;
}

std::size_t QueryBroker::pending() const {
    std::lock_guard lock(mutex_);
    std::size_t open = 0;
    for (const auto& [_, q] : queries_) open += q.status == QueryStatus::Pending;
    return open;
}

void RunStatus::update(const TrainProgress& progress) {
    std::lock_guard lock(mutex_);
    progress_ = progress;
}

void RunStatus::set_scatter(std::vector<ScatterRow> rows) {
    std::lock_guard lock(mutex_);
    scatter_ = std::move(rows);
}

nlohmann::json RunStatus::status_json(std::size_t pending) const {
    std::lock_guard lock(mutex_);
    return {{"epoch", progress_.epoch},
            {"loss_total", progress_.loss_total},
            {"queries_spent", progress_.queries_spent},
            {"budget_total", progress_.budget_total},
            {"pending", pending}};
}

nlohmann::json RunStatus::scatter_json() const {
    std::lock_guard lock(mutex_);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : scatter_)
        rows.push_back({{"pc1", r.pc1},
                        {"pc2", r.pc2},
                        {"class", r.latent_class},
                        {"orientA", r.orient_a},
                        {"orientB", r.orient_b},
                        {"cluster", r.cluster}});
    return rows;
}

std::array<double, 2> RunStatus::point(std::size_t sample) const {
    std::lock_guard lock(mutex_);
    if (sample >= scatter_.size()) return {0.0, 0.0};
    return {scatter_[sample].pc1, scatter_[sample].pc2};
}

InteractiveOracle::InteractiveOracle(const Dataset& dataset, QueryBroker& broker,
                                     const RunStatus& status)
    : dataset_(dataset), broker_(broker), status_(status) {}

std::optional<Answer> InteractiveOracle::ask(SamplePair pair, int epoch) {
    PendingQuery q;
    q.pair = pair;
    const auto fi = dataset_.features.row(pair.first);
    const auto fj = dataset_.features.row(pair.second);
    q.features_i.assign(fi.begin(), fi.end());
    q.features_j.assign(fj.begin(), fj.end());
    q.pc_i = status_.point(pair.first);
    q.pc_j = status_.point(pair.second);
    q.epoch = epoch;
    const auto id = broker_.enqueue(std::move(q));
    if (!id) return std::nullopt;
    return broker_.await(*id);
}

namespace {

void send_json(httplib::Response& res, int code, const nlohmann::json& body) {
    res.status = code;
    res.set_content(body.dump(), "application/json");
}

nlohmann::json rejection(const std::string& error) {
    return {{"ok", false}, {"recorded", false}, {"error", error}};
}

}  // namespace

OracleService::OracleService(QueryBroker& broker, RunStatus& status)
    : broker_(broker), status_(status), server_(std::make_unique<httplib::Server>()) {
    // httplib's default adds SO_REUSEPORT, which lets a second server share
    // the port silently. Keep only SO_REUSEADDR so a busy port is an error.
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    server_->Get("/next-query", [this](const httplib::Request&, httplib::Response& res) {
        const auto q = broker_.next();
        if (!q) {
            res.status = 204;
            return;
        }
        send_json(res, 200, to_json(*q));
    });
    server_->Post("/answer", [this](const httplib::Request& req, httplib::Response& res) {
        std::uint64_t id = 0;
        bool same = false;
        try {
            const auto body = nlohmann::json::parse(req.body);
            id = body.at("id").get<std::uint64_t>();
            same = body.at("same").get<bool>();
        } catch (const nlohmann::json::exception&) {
            send_json(res, 400, rejection("body must be {\"id\": int, \"same\": bool}"));
            return;
        }
        switch (broker_.answer(id, same)) {
            case AnswerOutcome::Recorded:
                send_json(res, 200, {{"ok", true}, {"recorded", true}});
                break;
            case AnswerOutcome::UnknownId: send_json(res, 404, rejection("unknown query id")); break;
            case AnswerOutcome::Expired: send_json(res, 409, rejection("query expired")); break;
            case AnswerOutcome::AlreadyAnswered:
                send_json(res, 409, rejection("query already answered"));
                break;
        }
    });
    server_->Get("/status", [this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, status_.status_json(broker_.pending()));
    });
    server_->Get("/scatter", [this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, status_.scatter_json());
    });
    // Lets a browser UI served from another origin talk to the service.
    server_->set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
    });
    server_->Options(".*", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
}

OracleService::~OracleService() { stop(); }

void OracleService::start(const std::string& host, int port) {
    if (thread_.joinable()) throw StartupError("service already running");
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
        if (port_ < 0) throw StartupError("cannot bind " + host);
    } else {
        if (!server_->bind_to_port(host, port))
            throw StartupError("cannot bind " + host + ":" + std::to_string(port));
        port_ = port;
    }
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

void OracleService::stop() {
    if (!thread_.joinable()) return;
    server_->stop();
    thread_.join();
}

TrainHooks status_hooks(RunStatus& status, const Dataset& dataset) {
    TrainHooks hooks;
    hooks.on_batch = [&status](const TrainProgress& p) { status.update(p); };
    hooks.on_epoch = [&status, &dataset](const EpochRecord&, const ModelParams& params) {
        const ForwardPass pass = embed(params, dataset);
        status.set_scatter(scatter_rows(dataset, pass.zhat, argmax_rows(pass.yhat)));
    };
    return hooks;
}

}  // namespace occ
