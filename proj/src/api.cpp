#include "occq/api.hpp"

#include <httplib.h>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <random>
#include <regex>
#include <shared_mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "occq/errors.hpp"
#include "occq/inference.hpp"
#include "occq/requests.hpp"
#include "occq/series.hpp"
#include "occq/simulator.hpp"

namespace occq::api {
namespace {

using nlohmann::json;

// ---- request schemas ----

json non_negative_int() { return {{"type", "integer"}, {"minimum", 0}}; }
json positive_number() { return {{"type", "number"}, {"exclusiveMinimum", 0}}; }

json horizons_schema() {
    return {{"anyOf",
             json::array({{{"type", "integer"}, {"minimum", 1}},
                          {{"type", "array"}, {"minItems", 1}, {"items", non_negative_int()}}})}};
}

json prediction_properties() {
    return {{"session_id", {{"type", "string"}}},
            {"params",
             {{"type", "object"},
              {"required", {"beta0", "beta1", "alpha"}},
              {"properties",
               {{"beta0", {{"type", "number"}}},
                {"beta1", {{"type", "number"}}},
                {"alpha", {{"type", "number"}}},
                {"theta", positive_number()},
                {"mean_service", positive_number()}}}}},
            {"tau", {{"type", "number"}}},
            {"n", non_negative_int()},
            {"horizons", horizons_schema()},
            {"holdout", {{"type", "integer"}, {"minimum", 1}}},
            {"mode", {{"enum", {"long_term", "short_term"}}}},
            {"seed", non_negative_int()}};
}

json build_schemas() {
    const json normal = {{"type", "object"},
                         {"required", {"mu", "sigma"}},
                         {"properties", {{"mu", {{"type", "number"}}}, {"sigma", positive_number()}}}};
    json schemas;
    schemas["series"] = {
        {"type", "object"},
        {"properties",
         {{"class_id", {{"type", "string"}}},
          {"origin", {{"type", "string"}}},
          {"counts", {{"type", "array"}, {"minItems", 1}, {"items", non_negative_int()}}},
          {"points",
           {{"type", "array"},
            {"minItems", 1},
            {"items",
             {{"type", "object"},
              {"required", {"month", "count"}},
              {"properties", {{"month", {{"type", "string"}}}, {"count", non_negative_int()}}}}}}},
          {"csv", {{"type", "string"}}},
          {"quarterly_csv", {{"type", "string"}}},
          {"synthetic",
           {{"type", "object"},
            {"required", {"truth", "months"}},
            {"properties", {{"truth", {{"type", "object"}}}, {"months", {{"type", "integer"}, {"minimum", 2}}}}}}},
          {"seed", non_negative_int()}}},
        {"anyOf",
         json::array({{{"required", {"counts", "origin"}}},
                      {{"required", {"points"}}},
                      {{"required", {"csv"}}},
                      {{"required", {"quarterly_csv"}}},
                      {{"required", {"synthetic"}}}})}};
    schemas["fit"] = {
        {"type", "object"},
        {"required", {"session_id", "priors"}},
        {"properties",
         {{"session_id", {{"type", "string"}}},
          {"priors",
           {{"type", "object"},
            {"required", {"beta0", "beta1", "mean_service"}},
            {"properties",
             {{"beta0", normal},
              {"beta1", normal},
              {"alpha",
               {{"type", "object"}, {"properties", {{"lo", {{"type", "number"}}}, {"hi", {{"type", "number"}}}}}}},
              {"mean_service", positive_number()}}}}},
          {"mcmc",
           {{"type", "object"},
            {"properties",
             {{"chains", {{"type", "integer"}, {"minimum", 1}, {"maximum", 8}}},
              {"iterations", {{"type", "integer"}, {"minimum", 10}}},
              {"warmup", non_negative_int()},
              {"max_restarts", {{"type", "integer"}, {"minimum", 0}, {"maximum", 5}}},
              {"rhat_threshold", {{"type", "number"}, {"exclusiveMinimum", 1}}}}}}},
          {"seed", non_negative_int()}}}};
    schemas["predict"] = {{"type", "object"},
                          {"properties", prediction_properties()},
                          {"anyOf", json::array({{{"required", {"session_id"}}},
                                                 {{"required", {"params", "tau", "n"}}}})}};
    json scenario_props = prediction_properties();
    scenario_props["switch"] = {{"type", "object"}, {"required", {"E_S_new"}}, {"properties", {{"E_S_new", positive_number()}}}};
    scenario_props["lambda_scale"] = {{"type", "number"}, {"minimum", 0}};
    scenario_props["pause"] = {
        {"anyOf", json::array({{{"type", "number"}, {"minimum", 0}},
                               {{"type", "object"},
                                {"required", {"months"}},
                                {"properties", {{"months", {{"type", "number"}, {"minimum", 0}}}}}}})}};
    schemas["scenario"] = {{"type", "object"},
                           {"properties", scenario_props},
                           {"anyOf", json::array({{{"required", {"session_id"}}},
                                                  {{"required", {"params", "tau", "n"}}}})}};
    schemas["recover"] = {
        {"type", "object"},
        {"required", {"lambda", "E_S", "alpha", "n"}},
        {"properties",
         {{"lambda", positive_number()},
          {"E_S", positive_number()},
          {"alpha", {{"type", "number"}}},
          {"n", {{"type", "number"}}},
          {"k", {{"type", "number"}}},
          {"intervention",
           {{"type", "object"},
            {"required", {"kind"}},
            {"properties",
             {{"kind", {{"enum", {"none", "scale_lambda", "pause_then_resume"}}}},
              {"factor", {{"type", "number"}}},
              {"resume_level", {{"type", "number"}}}}}}},
          {"seed", non_negative_int()}}}};
    schemas["lastdep"] = {{"type", "object"},
                          {"required", {"lambda", "E_S"}},
                          {"properties",
                           {{"lambda", positive_number()},
                            {"E_S", positive_number()},
                            {"alpha", {{"type", "number"}}},
                            {"scv", {{"type", "number"}}},
                            {"probabilities", {{"type", "array"}, {"items", {{"type", "number"}}}}},
                            {"grid", {{"type", "array"}, {"items", {{"type", "number"}, {"minimum", 0}}}}},
                            {"seed", non_negative_int()}}},
                          {"anyOf", json::array({{{"required", {"alpha"}}}, {{"required", {"scv"}}}})}};
    return schemas;
}

bool type_matches(const json& v, const std::string& type) {
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "integer") return v.is_number_integer() || (v.is_number_float() && v.get<double>() == std::floor(v.get<double>()));
    if (type == "number") return v.is_number();
    if (type == "boolean") return v.is_boolean();
    return v.is_null();
}

// Subset of JSON Schema: type, required, properties, items, minItems, minimum, maximum,
// exclusiveMinimum, enum, anyOf. Returns the first violation or an empty string.
std::string violation(const json& v, const json& s, const std::string& path) {
    const std::string where = path.empty() ? "body" : path;
    if (s.contains("type") && !type_matches(v, s["type"].get<std::string>()))
        return where + " must be of type " + s["type"].get<std::string>();
    if (s.contains("enum")) {
        bool found = false;
        for (const auto& e : s["enum"]) found = found || e == v;
        if (!found) return where + " must be one of " + s["enum"].dump();
    }
    if (v.is_number()) {
        const double x = v.get<double>();
        if (s.contains("minimum") && x < s["minimum"].get<double>())
            return where + " must be >= " + s["minimum"].dump();
        if (s.contains("maximum") && x > s["maximum"].get<double>())
            return where + " must be <= " + s["maximum"].dump();
        if (s.contains("exclusiveMinimum") && !(x > s["exclusiveMinimum"].get<double>()))
            return where + " must be > " + s["exclusiveMinimum"].dump();
    }
    if (v.is_object()) {
        if (s.contains("required"))
            for (const auto& r : s["required"])
                if (!v.contains(r.get<std::string>())) return where + " is missing \"" + r.get<std::string>() + "\"";
        if (s.contains("properties"))
            for (const auto& [key, sub] : s["properties"].items())
                if (v.contains(key)) {
                    auto err = violation(v[key], sub, path.empty() ? key : path + "." + key);
                    if (!err.empty()) return err;
                }
    }
    if (v.is_array()) {
        if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>())
            return where + " needs at least " + s["minItems"].dump() + " items";
        if (s.contains("items"))
            for (std::size_t i = 0; i < v.size(); ++i) {
                auto err = violation(v[i], s["items"], where + "[" + std::to_string(i) + "]");
                if (!err.empty()) return err;
            }
    }
    if (s.contains("anyOf")) {
        std::string first;
        for (const auto& alt : s["anyOf"]) {
            auto err = violation(v, alt, path);
            if (err.empty()) return {};
            if (first.empty()) first = err;
        }
        return first;
    }
    return {};
}

// ---- errors ----

struct HttpError : std::runtime_error {
    HttpError(int status, const std::string& what, std::string hint = {})
        : std::runtime_error(what), status(status), hint(std::move(hint)) {}
    int status;
    std::string hint;
};

// ---- sessions ----

struct Session {
    enum class FitStatus { none, queued, running, converged, failed, error };

    std::string id;
    CountSeries series;
    std::uint64_t series_seed = 0;
    FitStatus status = FitStatus::none;
    std::shared_ptr<const PosteriorDraws> draws;
    PriorSpec priors;
    McmcSettings mcmc;
    std::string error;
    json diagnostics = nullptr;
};

const char* status_name(Session::FitStatus s) {
    switch (s) {
        case Session::FitStatus::none: return "not_fitted";
        case Session::FitStatus::queued: return "queued";
        case Session::FitStatus::running: return "running";
        case Session::FitStatus::converged: return "converged";
        case Session::FitStatus::failed: return "not_converged";
        case Session::FitStatus::error: return "error";
    }
    return "unknown";
}

// Immutable session snapshots behind a shared mutex; updates replace the snapshot.
class SessionStore {
public:
    explicit SessionStore(std::size_t capacity) : capacity_(std::max<std::size_t>(1, capacity)) {}

    std::shared_ptr<const Session> get(const std::string& id) {
        std::shared_lock lock(mutex_);
        auto it = entries_.find(id);
        if (it == entries_.end()) return nullptr;
        it->second.last_used.store(++clock_);
        return it->second.session;
    }

    void put(std::shared_ptr<const Session> s) {
        std::unique_lock lock(mutex_);
        auto it = entries_.find(s->id);
        if (it != entries_.end()) {
            it->second.session = std::move(s);
            it->second.last_used.store(++clock_);
            return;
        }
        while (entries_.size() >= capacity_) {
            auto victim = entries_.begin();
            for (auto e = entries_.begin(); e != entries_.end(); ++e)
                if (e->second.last_used.load() < victim->second.last_used.load()) victim = e;
            entries_.erase(victim);
        }
        auto& e = entries_[s->id];
        e.session = std::move(s);
        e.last_used.store(++clock_);
    }

    /// Replaces only when the session still exists.
    void update(std::shared_ptr<const Session> s) {
        std::unique_lock lock(mutex_);
        auto it = entries_.find(s->id);
        if (it != entries_.end()) it->second.session = std::move(s);
    }

    std::size_t size() {
        std::shared_lock lock(mutex_);
        return entries_.size();
    }

private:
    struct Entry {
        std::shared_ptr<const Session> session;
        std::atomic<std::uint64_t> last_used{0};
    };
    std::size_t capacity_;
    std::shared_mutex mutex_;
    std::unordered_map<std::string, Entry> entries_;
    std::atomic<std::uint64_t> clock_{0};
};

// Fixed worker threads over a bounded queue.
class WorkerPool {
public:
    WorkerPool(unsigned workers, std::size_t queue_limit) : limit_(queue_limit) {
        for (unsigned i = 0; i < std::max(1u, workers); ++i) threads_.emplace_back([this] { loop(); });
    }
    ~WorkerPool() {
        {
            std::lock_guard lock(mutex_);
            stopping_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

    bool submit(std::function<void()> job) {
        {
            std::lock_guard lock(mutex_);
            if (queue_.size() >= limit_) return false;
            queue_.push_back(std::move(job));
        }
        cv_.notify_one();
        return true;
    }

    void drain() {
        std::unique_lock lock(mutex_);
        idle_.wait(lock, [this] { return queue_.empty() && busy_ == 0; });
    }

    std::size_t queued() {
        std::lock_guard lock(mutex_);
        return queue_.size();
    }
    std::size_t workers() const { return threads_.size(); }

private:
    void loop() {
        for (;;) {
            std::function<void()> job;
            {
                std::unique_lock lock(mutex_);
                cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
                if (queue_.empty()) return;
                job = std::move(queue_.front());
                queue_.pop_front();
                ++busy_;
            }
            job();
            {
                std::lock_guard lock(mutex_);
                --busy_;
            }
            idle_.notify_all();
        }
    }

    std::size_t limit_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::condition_variable idle_;
    std::deque<std::function<void()>> queue_;
    std::vector<std::thread> threads_;
    std::size_t busy_ = 0;
    bool stopping_ = false;
};

std::uint64_t fresh_seed() {
    std::random_device rd;
    return (std::uint64_t{rd()} << 21) ^ rd();
}

}  // namespace

const json& request_schemas() {
    static const json schemas = build_schemas();
    return schemas;
}

ServerConfig server_config_from_json(const json& j) {
    ServerConfig c;
    try {
        c.host = j.value("host", c.host);
        c.port = j.value("port", c.port);
        c.workers = j.value("workers", c.workers);
        c.queue_limit = j.value("queue_limit", c.queue_limit);
        c.capacity = j.value("capacity", c.capacity);
        c.cors_origin = j.value("cors_origin", c.cors_origin);
        c.max_iterations = j.value("max_iterations", c.max_iterations);
    } catch (const json::exception& e) {
        throw ParseError(std::string("server config: ") + plain_message(e));
    }
    return c;
}

struct Service::Impl {
    ServerConfig config;
    SessionStore store;
    WorkerPool pool;
    std::atomic<std::uint64_t> next_id{0};

    explicit Impl(ServerConfig c)
        : config(std::move(c)), store(config.capacity), pool(worker_threads(config.workers), config.queue_limit) {}

    static json parse_body(const std::string& body, const char* schema) {
        json j;
        try {
            j = json::parse(body);
        } catch (const json::parse_error& e) {
            throw HttpError(400, std::string("invalid JSON: ") + plain_message(e));
        }
        auto err = violation(j, request_schemas().at(schema), "");
        if (!err.empty()) throw HttpError(400, err, std::string("see GET /schemas for the ") + schema + " schema");
        return j;
    }

    static std::uint64_t seed_of(const json& j) {
        return j.contains("seed") ? j["seed"].get<std::uint64_t>() : fresh_seed();
    }

    std::shared_ptr<const Session> session(const std::string& id) {
        auto s = store.get(id);
        if (!s) throw HttpError(404, "unknown session \"" + id + "\"", "sessions are evicted least-recently-used first");
        return s;
    }

    std::shared_ptr<const PosteriorDraws> converged_draws(const Session& s) {
        if (s.status != Session::FitStatus::converged || !s.draws)
            throw HttpError(409, std::string("session ") + s.id + " has no converged fit (status " +
                                     status_name(s.status) + ")",
                            "POST /fit and poll GET /fit/{id} until it reports converged");
        return s.draws;
    }

    Response series(const std::string& body) {
        const json j = parse_body(body, "series");
        const std::uint64_t seed = seed_of(j);
        auto s = std::make_shared<Session>();
        if (j.contains("csv")) {
            std::istringstream in(j["csv"].get<std::string>());
            auto all = read_count_csv(in);
            const std::string cls = j.value("class_id", all.front().class_id);
            bool found = false;
            for (auto& c : all)
                if (c.class_id == cls) s->series = c, found = true;
            if (!found) throw HttpError(400, "class \"" + cls + "\" not in csv");
        } else if (j.contains("quarterly_csv")) {
            std::istringstream in(j["quarterly_csv"].get<std::string>());
            std::string cls;
            auto q = read_quarterly_csv(in, &cls);
            s->series = synthesize_monthly(q, seed, j.value("class_id", cls));
        } else if (j.contains("synthetic")) {
            const auto& syn = j["synthetic"];
            s->series = simulate_count_series(model_params_from_json(syn["truth"]), syn["months"].get<int>(), seed);
            if (j.contains("class_id")) s->series.class_id = j["class_id"].get<std::string>();
        } else {
            s->series = count_series_from_json(j);
        }
        s->series_seed = seed;
        s->id = "s" + std::to_string(++next_id);
        store.put(s);
        return {201, {{"session_id", s->id}, {"series", to_json(s->series)}, {"seed", seed}}};
    }

    Response start_fit(const std::string& body) {
        const json j = parse_body(body, "fit");
        auto current = session(j["session_id"].get<std::string>());
        if (current->status == Session::FitStatus::queued || current->status == Session::FitStatus::running)
            throw HttpError(409, "a fit is already in progress for session " + current->id);
        auto next = std::make_shared<Session>(*current);
        next->priors = prior_spec_from_json(j["priors"]);
        const auto warnings = next->priors.validate();
        next->mcmc = j.contains("mcmc") ? mcmc_settings_from_json(j["mcmc"]) : McmcSettings{};
        if (next->mcmc.iterations > config.max_iterations)
            throw HttpError(400, "mcmc.iterations exceeds the server limit of " + std::to_string(config.max_iterations));
        next->mcmc.seed = seed_of(j);
        if (next->series.size() < 2) throw DomainError("fit needs at least two months");
        next->status = Session::FitStatus::queued;
        next->draws.reset();
        next->error.clear();
        next->diagnostics = nullptr;
        const std::string id = next->id;
        const CountSeries series = next->series;
        const PriorSpec priors = next->priors;
        const McmcSettings mcmc = next->mcmc;
        store.update(next);
        const bool accepted = pool.submit([this, id, series, priors, mcmc] { run_fit(id, series, priors, mcmc); });
        if (!accepted) {
            store.update(current);
            throw HttpError(503, "fit queue is full", "retry later");
        }
        return {202,
                {{"session_id", id}, {"status", "queued"}, {"seed", mcmc.seed}, {"prior_warnings", warnings},
                 {"poll", "/fit/" + id}}};
    }

    void set_status(const std::string& id, const std::function<void(Session&)>& change) {
        auto s = store.get(id);
        if (!s) return;
        auto next = std::make_shared<Session>(*s);
        change(*next);
        store.update(next);
    }

    void run_fit(const std::string& id, const CountSeries& series, const PriorSpec& priors, const McmcSettings& mcmc) {
        set_status(id, [](Session& s) { s.status = Session::FitStatus::running; });
        try {
            auto draws = std::make_shared<const PosteriorDraws>(fit(series, priors, mcmc));
            set_status(id, [&](Session& s) {
                s.status = Session::FitStatus::converged;
                s.diagnostics = to_json(draws->diagnostics);
                s.draws = draws;
            });
        } catch (const FitConvergenceError& e) {
            set_status(id, [&](Session& s) {
                s.status = Session::FitStatus::failed;
                s.error = e.what();
                s.diagnostics = to_json(e.traces().diagnostics);
            });
        } catch (const std::exception& e) {
            set_status(id, [&](Session& s) {
                s.status = Session::FitStatus::error;
                s.error = e.what();
            });
        }
    }

    Response fit_status(const std::string& id) {
        auto s = session(id);
        json out = {{"session_id", s->id},
                    {"status", status_name(s->status)},
                    {"seed", s->status == Session::FitStatus::none ? json(nullptr) : json(s->mcmc.seed)},
                    {"diagnostics", s->diagnostics},
                    {"error", s->error.empty() ? json(nullptr) : json(s->error)}};
        if (s->status != Session::FitStatus::none) {
            out["priors"] = to_json(s->priors);
            out["mcmc"] = to_json(s->mcmc);
        }
        return {200, out};
    }

    Response posterior(const std::string& id) {
        auto s = session(id);
        auto draws = converged_draws(*s);
        json out = posterior_json(*draws);
        out["session_id"] = s->id;
        out["seed"] = s->mcmc.seed;
        return {200, out};
    }

    struct Target {
        std::shared_ptr<const PosteriorDraws> draws;
        std::shared_ptr<const Session> session;
        double tau;
        std::int64_t n;
        std::string class_id = "all";
    };

    // Posterior and observed state for /predict and /scenario.
    Target target(const json& j, std::size_t holdout) {
        Target t;
        if (j.contains("session_id")) {
            t.session = session(j["session_id"].get<std::string>());
            t.draws = converged_draws(*t.session);
            const auto& pts = t.session->series.points;
            if (holdout >= pts.size()) throw HttpError(400, "holdout must be smaller than the series length");
            const auto& last = pts[pts.size() - 1 - holdout];
            t.tau = last.t;
            t.n = last.n;
            t.class_id = t.session->series.class_id;
        } else {
            t.draws = std::make_shared<const PosteriorDraws>(point_posterior(model_params_from_json(j["params"])));
        }
        if (j.contains("tau")) t.tau = j["tau"].get<double>();
        if (j.contains("n")) t.n = j["n"].get<std::int64_t>();
        return t;
    }

    Response predict_route(const std::string& body, bool with_scenario) {
        const json j = parse_body(body, with_scenario ? "scenario" : "predict");
        const std::uint64_t seed = seed_of(j);
        const std::size_t holdout = j.contains("holdout") ? j["holdout"].get<std::size_t>() : 0;
        const bool short_term = j.value("mode", std::string("long_term")) == "short_term";
        PredictOptions opts;
        opts.seed = seed;
        json out = {{"seed", seed}};
        if (short_term) {
            if (with_scenario) throw HttpError(400, "scenarios use long_term mode");
            if (!j.contains("session_id") || holdout == 0)
                throw HttpError(400, "short_term mode needs session_id and holdout", "set holdout to the months to refit over");
            auto s = session(j["session_id"].get<std::string>());
            converged_draws(*s);
            if (holdout >= s->series.size()) throw HttpError(400, "holdout must be smaller than the series length");
            McmcSettings mcmc = s->mcmc;
            mcmc.seed = seed;
            const auto pred = predict_short_term(s->series, s->series.size() - holdout, static_cast<int>(holdout),
                                                 s->priors, mcmc, opts);
            out["prediction"] = to_json(pred);
            out["rmse"] = rmse(pred, s->series);
            return {200, out};
        }
        const Target t = target(j, holdout);
        const auto horizons = holdout ? horizon_range(static_cast<int>(holdout))
                                      : horizons_from_json(j.contains("horizons") ? j["horizons"] : json(12));
        auto base = predict(*t.draws, t.tau, t.n, horizons, opts);
        base.class_id = t.class_id;
        if (holdout && t.session) out["rmse"] = rmse(base, t.session->series);
        if (!with_scenario) {
            out["prediction"] = to_json(base);
            return {200, out};
        }
        opts.scenario = scenario_from_json(j);
        auto what_if = predict(*t.draws, t.tau, t.n, horizons, opts);
        what_if.class_id = t.class_id;
        out["scenario"] = to_json(opts.scenario);
        out["baseline"] = to_json(base);
        out["prediction"] = to_json(what_if);
        return {200, out};
    }

    Response recover(const std::string& body) {
        const json j = parse_body(body, "recover");
        json out = run_recovery(recovery_request_from_json(j));
        out["seed"] = j.contains("seed") ? j["seed"] : json(nullptr);
        return {200, out};
    }

    Response lastdep(const std::string& body) {
        const json j = parse_body(body, "lastdep");
        json out = run_last_departure(last_departure_request_from_json(j));
        out["seed"] = j.contains("seed") ? j["seed"] : json(nullptr);
        return {200, out};
    }

    Response route(const std::string& method, const std::string& path, const std::string& body) {
        static const std::regex fit_re(R"(^/fit/([A-Za-z0-9_-]+)$)");
        static const std::regex posterior_re(R"(^/fit/([A-Za-z0-9_-]+)/posterior$)");
        std::smatch m;
        if (method == "GET") {
            if (path == "/health")
                return {200,
                        {{"status", "ok"},
                         {"seed", nullptr},
                         {"sessions", store.size()},
                         {"workers", pool.workers()},
                         {"queued_fits", pool.queued()}}};
            if (path == "/schemas") return {200, {{"schemas", request_schemas()}, {"seed", nullptr}}};
            if (std::regex_match(path, m, posterior_re)) return posterior(m[1]);
            if (std::regex_match(path, m, fit_re)) return fit_status(m[1]);
        } else if (method == "POST") {
            if (path == "/series") return series(body);
            if (path == "/fit") return start_fit(body);
            if (path == "/predict") return predict_route(body, false);
            if (path == "/scenario") return predict_route(body, true);
            if (path == "/recover") return recover(body);
            if (path == "/lastdep") return lastdep(body);
        }
        throw HttpError(404, "no route for " + method + " " + path);
    }
};

Service::Service(ServerConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
Service::~Service() = default;

void Service::drain() { impl_->pool.drain(); }
const ServerConfig& Service::config() const { return impl_->config; }

Response Service::handle(const std::string& method, const std::string& path, const std::string& body) {
    Response r;
    auto fail = [&](int status, const std::string& what, const std::string& hint) {
        r.status = status;
        r.body = {{"error", what}, {"seed", nullptr}};
        if (!hint.empty()) r.body["hint"] = hint;
    };
    try {
        r = impl_->route(method, path, body);
    } catch (const HttpError& e) {
        fail(e.status, e.what(), e.hint);
    } catch (const ParseError& e) {
        fail(400, e.what(), e.hint());
    } catch (const ConvergenceError& e) {
        fail(409, e.what(), e.hint());
    } catch (const Error& e) {
        fail(422, e.what(), e.hint());
    } catch (const nlohmann::json::exception& e) {
        fail(400, plain_message(e), "see GET /schemas");
    } catch (const std::exception& e) {
        fail(500, e.what(), "");
    }
    r.body["engine_version"] = engine_version();
    return r;
}

struct HttpServer::Impl {
    Service service;
    httplib::Server http;

    explicit Impl(ServerConfig c) : service(std::move(c)) {
        const std::string origin = service.config().cors_origin;
        http.set_default_headers({{"Access-Control-Allow-Origin", origin},
                                  {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                  {"Access-Control-Allow-Headers", "Content-Type"}});
        auto forward = [this](const httplib::Request& req, httplib::Response& res) {
            const auto r = service.handle(req.method, req.path, req.body);
            res.status = r.status;
            res.set_content(r.body.dump(), "application/json");
        };
        http.Get(R"(/.*)", forward);
        http.Post(R"(/.*)", forward);
        http.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    }
};

HttpServer::HttpServer(ServerConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
    const auto& c = impl_->service.config();
    const int port = c.port == 0 ? impl_->http.bind_to_any_port(c.host)
                                 : (impl_->http.bind_to_port(c.host, c.port) ? c.port : -1);
    if (port < 0)
        throw Error("cannot bind " + c.host + ":" + std::to_string(c.port), "check the host address and that the port is free");
    return port;
}

void HttpServer::listen() { impl_->http.listen_after_bind(); }
void HttpServer::stop() {
    if (impl_->http.is_running()) impl_->http.stop();
}
Service& HttpServer::service() { return impl_->service; }

}  // namespace occq::api
