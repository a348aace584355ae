// occq: command-line front end for the occupancy engine.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "occq/api.hpp"
#include "occq/errors.hpp"
#include "occq/horizon.hpp"
#include "occq/inference.hpp"
#include "occq/requests.hpp"
#include "occq/series.hpp"
#include "occq/simulator.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace occq;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string sha256_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::vector<char> buf(1 << 16);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// JSON text with the parse position rendered as line and column.
json parse_json_text(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::string msg = e.what();
        if (const auto pos = msg.find("syntax error"); pos != std::string::npos) msg = msg.substr(pos);
        throw ParseError(origin + ": line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + msg,
                         "check the JSON syntax");
    }
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

struct Options {
    std::optional<std::uint64_t> seed;
    std::string config_path;
    std::string out = "occq-out";
    std::string format = "json";

    // synthesize
    std::string quarterly;
    bool model = false;
    bool arrivals_model = false;
    int months = 0;
    // shared inputs
    std::string series;
    std::string class_id;
    std::string arrivals;
    std::string posterior;
    std::optional<double> tau;
    std::optional<std::int64_t> n;
    std::optional<int> horizon;
    std::vector<int> horizons;
    std::optional<int> holdout;
    std::string mode = "long";
    // fit
    std::optional<int> iterations;
    std::optional<int> chains;
    std::optional<int> warmup;
    std::optional<double> mean_service;
    // scenario
    std::optional<double> mean_service_new;
    std::optional<double> lambda_scale;
    std::optional<double> pause;
    // recover / lastdep
    std::optional<double> lambda;
    std::optional<double> alpha;
    std::optional<double> scv;
    std::optional<double> k;
    std::optional<double> scale_lambda;
    std::optional<double> resume_level;
    std::vector<double> probabilities;
    std::vector<double> grid;
    // simulate
    std::vector<double> probes;
    std::optional<std::int64_t> replications;
    // serve
    std::optional<int> port;
    std::optional<std::string> host;
    std::optional<unsigned> workers;
    // replay
    std::string manifest;
};

class Run {
public:
    Run(std::string command, const Options& o, std::vector<std::string> argv)
        : command_(std::move(command)), opts_(o), argv_(std::move(argv)) {
        if (!o.config_path.empty()) {
            config_ = parse_json_text(slurp(o.config_path), o.config_path);
            if (!config_.is_object()) throw ParseError(o.config_path + ": config must be a JSON object");
        }
        if (o.seed) {
            seed_ = *o.seed;
        } else if (config_.contains("seed") && config_["seed"].is_number_unsigned()) {
            seed_ = config_["seed"].get<std::uint64_t>();
        } else {
            seed_ = (std::uint64_t{std::random_device{}()} << 32) ^ std::random_device{}();
        }
        out_ = o.out;
    }

    const json& config() const { return config_; }
    json section(const char* key) const { return config_.contains(key) ? config_.at(key) : json(); }
    std::uint64_t seed() const { return seed_; }
    bool csv() const { return opts_.format == "csv"; }

    void note_input(const std::string& path) {
        inputs_.push_back({{"path", fs::absolute(path).lexically_normal().string()}, {"sha256", sha256_file(path)}});
    }

    void make_out_dir() const {
        std::error_code ec;
        fs::create_directories(out_, ec);
        if (ec) throw Error("cannot create output directory " + out_.string() + ": " + ec.message(),
                            "pass a writable --out");
    }

    void emit(const std::string& name, const std::string& content) {
        make_out_dir();
        std::ofstream f(out_ / name, std::ios::binary);
        f << content;
        if (!f) throw Error("cannot write " + (out_ / name).string(), "check that --out is writable");
        outputs_.push_back(name);
    }

    void write_manifest() {
        json m = {{"command", command_},
                  {"argv", argv_},
                  {"cwd", fs::current_path().string()},
                  {"inputs", inputs_},
                  {"config", config_},
                  {"seed", seed_},
                  {"out", fs::absolute(out_).lexically_normal().string()},
                  {"outputs", outputs_},
                  {"engine_version", engine_version()},
                  {"timestamp", timestamp_utc()}};
        make_out_dir();
        std::ofstream f(out_ / "manifest.json");
        f << dump(m);
    }

private:
    std::string command_;
    const Options& opts_;
    std::vector<std::string> argv_;
    json config_ = json::object();
    std::uint64_t seed_ = 0;
    fs::path out_;
    json inputs_ = json::array();
    std::vector<std::string> outputs_;
};

// ---- input helpers ----

CountSeries load_series(Run& run, const std::string& path, const std::string& class_id) {
    run.note_input(path);
    std::vector<CountSeries> all;
    try {
        if (fs::path(path).extension() == ".json") {
            all.push_back(count_series_from_json(parse_json_text(slurp(path), path)));
        } else {
            std::ifstream in(path);
            all = read_count_csv(in);
        }
    } catch (const ParseError& e) {
        if (std::string(e.what()).rfind(path, 0) == 0) throw;
        throw ParseError(path + ": " + e.what(), e.hint());
    }
    if (!class_id.empty()) {
        for (auto& s : all)
            if (s.class_id == class_id) return s;
        throw UsageError("class \"" + class_id + "\" not found in " + path);
    }
    if (all.size() > 1) throw UsageError(path + " holds " + std::to_string(all.size()) + " classes; pick one with --class");
    return all.front();
}

PosteriorDraws load_draws(Run& run, const std::string& path) {
    run.note_input(path);
    std::ifstream in(path);
    try {
        return read_draws_csv(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), e.hint());
    }
}

PriorSpec load_priors(const Run& run, const Options& o) {
    const json j = run.section("priors");
    if (j.is_null()) throw UsageError("fit needs priors: add a \"priors\" section to --config or pass --arrivals");
    PriorSpec p = prior_spec_from_json(j);
    if (o.mean_service) p.mean_service = *o.mean_service;
    return p;
}

McmcSettings load_mcmc(const Run& run, const Options& o) {
    const json j = run.section("mcmc");
    McmcSettings m = j.is_null() ? McmcSettings{} : mcmc_settings_from_json(j);
    if (o.iterations) m.iterations = *o.iterations;
    if (o.chains) m.chains = *o.chains;
    if (o.warmup) m.warmup = *o.warmup;
    m.seed = run.seed();
    return m;
}

PredictOptions load_predict_options(const Run& run) {
    PredictOptions p;
    p.seed = run.seed();
    if (run.config().contains("horizon_cap")) p.horizon_cap = run.config()["horizon_cap"].get<double>();
    return p;
}

std::vector<int> resolve_horizons(const Options& o, const Run& run) {
    if (!o.horizons.empty()) return o.horizons;
    if (o.horizon) return horizons_from_json(*o.horizon);
    if (run.config().contains("horizons")) return horizons_from_json(run.config()["horizons"]);
    return horizon_range(12);
}

// The posterior used by predict and scenario: draws file or a point posterior from the config.
PosteriorDraws resolve_posterior(Run& run, const Options& o) {
    if (!o.posterior.empty()) return load_draws(run, o.posterior);
    if (run.config().contains("params")) return point_posterior(model_params_from_json(run.config()["params"]));
    throw UsageError("needs --posterior <draws.csv> or a \"params\" section in --config");
}

struct State {
    double tau;
    std::int64_t n;
    std::string class_id = "all";
};

State resolve_state(const Options& o, const std::optional<CountSeries>& series, std::size_t train) {
    if (o.tau || o.n) {
        if (!(o.tau && o.n)) throw UsageError("--tau and --n go together");
        return {*o.tau, *o.n};
    }
    if (!series) throw UsageError("needs --series or both --tau and --n");
    const auto& last = series->points.at(train - 1);
    return {static_cast<double>(last.t), last.n, series->class_id};
}

// ---- subcommands ----

void cmd_synthesize(Run& run, const Options& o) {
    CountSeries s;
    if (!o.quarterly.empty()) {
        run.note_input(o.quarterly);
        std::ifstream in(o.quarterly);
        std::string cls;
        std::vector<QuarterCount> q;
        try {
            q = read_quarterly_csv(in, &cls);
        } catch (const ParseError& e) {
            throw ParseError(o.quarterly + ": " + e.what(), e.hint());
        }
        s = synthesize_monthly(q, run.seed(), o.class_id.empty() ? cls : o.class_id);
    } else if (o.model || o.arrivals_model) {
        const json truth = run.section("truth");
        if (truth.is_null()) throw UsageError("--model and --arrivals-model need a \"truth\" section in --config");
        const int months = o.months > 0 ? o.months : run.config().value("months", 48);
        if (o.model) {
            s = simulate_count_series(model_params_from_json(truth), months, run.seed());
        } else {
            s = simulate_arrival_counts(truth.at("beta0").get<double>(), truth.at("beta1").get<double>(), months,
                                        run.seed());
        }
        if (run.config().contains("origin")) s.origin = YearMonth::parse(run.config()["origin"].get<std::string>());
        if (!o.class_id.empty()) s.class_id = o.class_id;
    } else {
        throw UsageError("synthesize needs --quarterly <csv>, --model or --arrivals-model");
    }
    if (run.csv()) {
        std::ostringstream os;
        write_count_csv(os, s);
        run.emit("series.csv", os.str());
    } else {
        run.emit("series.json", dump(to_json(s)));
    }
}

void cmd_fit(Run& run, const Options& o) {
    if (o.series.empty()) throw UsageError("fit needs --series");
    const auto series = load_series(run, o.series, o.class_id);
    const auto mcmc = load_mcmc(run, o);
    PriorSpec priors;
    json arrival_diag = nullptr;
    if (!o.arrivals.empty()) {
        const auto arrivals = load_series(run, o.arrivals, o.class_id);
        const auto post = fit_arrival_counts(arrivals, mcmc);
        const json j = run.section("priors");
        double es;
        if (o.mean_service) {
            es = *o.mean_service;
        } else if (j.is_object() && j.contains("mean_service")) {
            es = j["mean_service"].get<double>();
        } else {
            throw UsageError("--arrivals needs --mean-service or priors.mean_service in --config");
        }
        priors = prior_from_arrivals(post, es, run.config().value("prior_sd_scale", 10.0));
        arrival_diag = to_json(post.diagnostics);
    } else {
        priors = load_priors(run, o);
    }
    const auto warnings = priors.validate();
    json summary = {{"engine_version", engine_version()},
                    {"seed", run.seed()},
                    {"class_id", series.class_id},
                    {"months", series.size()},
                    {"priors", to_json(priors)},
                    {"prior_warnings", warnings},
                    {"mcmc", to_json(mcmc)},
                    {"arrival_fit", arrival_diag}};
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    PosteriorDraws draws;
    try {
        draws = fit(series, priors, mcmc);
    } catch (const FitConvergenceError& e) {
        std::ostringstream os;
        write_draws_csv(os, e.traces());
        run.emit("traces.csv", os.str());
        summary["converged"] = false;
        summary["diagnostics"] = to_json(e.traces().diagnostics);
        run.emit("fit.json", dump(summary));
        throw;
    }
    std::ostringstream os;
    write_draws_csv(os, draws);
    run.emit("posterior.csv", os.str());
    summary["converged"] = draws.converged;
    summary["diagnostics"] = to_json(draws.diagnostics);
    run.emit("fit.json", dump(summary));
}

json prediction_document(const Run& run, const PredictionSeries& p) {
    return {{"engine_version", engine_version()}, {"seed", run.seed()}, {"prediction", to_json(p)}};
}

void cmd_predict(Run& run, const Options& o) {
    std::optional<CountSeries> series;
    if (!o.series.empty()) series = load_series(run, o.series, o.class_id);
    if (o.mode != "long" && o.mode != "short") throw UsageError("--mode must be long or short");
    if (o.holdout && (!series || *o.holdout < 1 || static_cast<std::size_t>(*o.holdout) >= series->size()))
        throw UsageError("--holdout needs --series with more than holdout months");
    auto opts = load_predict_options(run);
    PredictionSeries pred;
    if (o.mode == "short") {
        if (!o.holdout) throw UsageError("--mode short needs --series and --holdout");
        pred = predict_short_term(*series, series->size() - *o.holdout, *o.holdout, load_priors(run, o), load_mcmc(run, o),
                                  opts);
    } else {
        const auto draws = resolve_posterior(run, o);
        const std::size_t train = series ? series->size() - (o.holdout ? *o.holdout : 0) : 0;
        const auto state = resolve_state(o, series, train);
        const auto horizons = o.holdout ? horizon_range(*o.holdout) : resolve_horizons(o, run);
        pred = predict(draws, state.tau, state.n, horizons, opts);
        pred.class_id = state.class_id;
    }
    json doc = prediction_document(run, pred);
    if (o.holdout) doc["rmse"] = rmse(pred, *series);
    if (run.csv()) {
        std::ostringstream os;
        write_prediction_csv(os, pred);
        run.emit("prediction.csv", os.str());
    } else {
        run.emit("prediction.json", dump(doc));
    }
}

void cmd_scenario(Run& run, const Options& o) {
    std::optional<CountSeries> series;
    if (!o.series.empty()) series = load_series(run, o.series, o.class_id);
    const auto draws = resolve_posterior(run, o);
    const auto state = resolve_state(o, series, series ? series->size() : 0);
    const auto horizons = resolve_horizons(o, run);
    auto opts = load_predict_options(run);
    Scenario sc = run.config().contains("scenario") ? scenario_from_json(run.config()["scenario"]) : Scenario{};
    if (o.mean_service_new) sc.new_mean_service = *o.mean_service_new;
    if (o.lambda_scale) sc.lambda_scale = *o.lambda_scale;
    if (o.pause) sc.pause_months = *o.pause;
    auto base = predict(draws, state.tau, state.n, horizons, opts);
    opts.scenario = sc;
    auto what_if = predict(draws, state.tau, state.n, horizons, opts);
    base.class_id = what_if.class_id = state.class_id;
    if (run.csv()) {
        std::ostringstream b, s;
        write_prediction_csv(b, base);
        write_prediction_csv(s, what_if);
        run.emit("baseline.csv", b.str());
        run.emit("scenario.csv", s.str());
    } else {
        run.emit("scenario.json", dump({{"engine_version", engine_version()},
                                        {"seed", run.seed()},
                                        {"scenario", to_json(sc)},
                                        {"baseline", to_json(base)},
                                        {"prediction", to_json(what_if)}}));
    }
}

void cmd_recover(Run& run, const Options& o) {
    json req = run.section("recover");
    if (req.is_null()) req = json::object();
    if (o.lambda) req["lambda"] = *o.lambda;
    if (o.mean_service) req["E_S"] = *o.mean_service;
    if (o.alpha) req["alpha"] = *o.alpha;
    if (o.n) req["n"] = static_cast<double>(*o.n);
    if (o.k) req["k"] = *o.k;
    if (o.scale_lambda && o.resume_level) throw UsageError("--scale-lambda and --resume-level are exclusive");
    if (o.scale_lambda) req["intervention"] = {{"kind", "scale_lambda"}, {"factor", *o.scale_lambda}};
    if (o.resume_level) req["intervention"] = {{"kind", "pause_then_resume"}, {"resume_level", *o.resume_level}};
    for (const char* key : {"lambda", "alpha", "n"})
        if (!req.contains(key)) throw UsageError(std::string("recover needs --") + key);
    if (!req.contains("E_S") && !req.contains("mean_service")) throw UsageError("recover needs --mean-service");
    const json result = run_recovery(recovery_request_from_json(req));
    if (run.csv()) {
        std::ostringstream os;
        os << "variant,phase,months,nu,from,to\n" << std::setprecision(17);
        for (const char* variant : {"baseline", "intervention"}) {
            if (result[variant].is_null()) continue;
            for (const auto& ph : result[variant]["phases"]) {
                os << variant << ',' << ph["label"].get<std::string>() << ',' << ph["months"].get<double>() << ','
                   << ph["nu"].get<double>() << ',' << ph["from"].get<double>() << ',' << ph["to"].get<double>() << '\n';
            }
        }
        run.emit("recovery.csv", os.str());
    } else {
        json doc = result;
        doc["engine_version"] = engine_version();
        doc["seed"] = run.seed();
        doc["request"] = req;
        run.emit("recovery.json", dump(doc));
    }
}

void cmd_lastdep(Run& run, const Options& o) {
    json req = run.section("lastdep");
    if (req.is_null()) req = json::object();
    if (o.lambda) req["lambda"] = *o.lambda;
    if (o.mean_service) req["E_S"] = *o.mean_service;
    if (o.alpha) req["alpha"] = *o.alpha;
    if (o.scv) req["scv"] = *o.scv;
    if (!o.probabilities.empty()) req["probabilities"] = o.probabilities;
    if (!o.grid.empty()) req["grid"] = o.grid;
    if (!req.contains("lambda")) throw UsageError("lastdep needs --lambda");
    if (!req.contains("dist") && !req.contains("E_S") && !req.contains("mean_service"))
        throw UsageError("lastdep needs --mean-service with --alpha or --scv");
    if (!req.contains("dist") && !req.contains("alpha") && !req.contains("scv"))
        throw UsageError("lastdep needs --alpha or --scv");
    const json result = run_last_departure(last_departure_request_from_json(req));
    if (run.csv()) {
        std::ostringstream os;
        os << "x,cdf,tail_equivalent\n" << std::setprecision(17);
        for (const auto& r : result["cdf"])
            os << r["x"].get<double>() << ',' << r["cdf"].get<double>() << ',' << r["tail_equivalent"].get<double>() << '\n';
        run.emit("lastdep_cdf.csv", os.str());
        std::ostringstream q;
        q << "p,x\n" << std::setprecision(17);
        for (const auto& r : result["quantiles"]) q << r["p"].get<double>() << ',' << r["x"].get<double>() << '\n';
        run.emit("lastdep_quantiles.csv", q.str());
    } else {
        json doc = result;
        doc["engine_version"] = engine_version();
        doc["seed"] = run.seed();
        run.emit("lastdep.json", dump(doc));
    }
}

void cmd_simulate(Run& run, const Options& o) {
    json j = run.section("simulation");
    if (j.is_null()) j = run.config();
    if (!j.contains("rate")) throw UsageError("simulate needs a simulation config (rate, dist, horizon) via --config");
    j["seed"] = run.seed();
    if (o.replications) j["replications"] = *o.replications;
    const SimConfig cfg = sim_config_from_json(j);
    std::vector<double> probes = o.probes;
    if (probes.empty() && run.config().contains("probes")) probes = run.config()["probes"].get<std::vector<double>>();
    if (probes.empty())
        for (double t = cfg.start; t <= cfg.start + cfg.horizon + 1e-9; t += 1.0) probes.push_back(t);
    const auto out = occq::run(cfg, probes);
    if (run.csv()) {
        std::ostringstream os;
        write_occupancy_csv(os, out);
        run.emit("occupancy.csv", os.str());
    } else {
        json doc = to_json(out);
        doc["engine_version"] = engine_version();
        doc["seed"] = run.seed();
        doc["config"] = to_json(cfg);
        run.emit("simulation.json", dump(doc));
    }
}

api::HttpServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

void cmd_serve(Run& run, const Options& o) {
    const json j = run.section("server");
    api::ServerConfig cfg = j.is_null() ? api::ServerConfig{} : api::server_config_from_json(j);
    if (o.port) cfg.port = *o.port;
    if (o.host) cfg.host = *o.host;
    if (o.workers) cfg.workers = *o.workers;
    api::HttpServer server(cfg);
    const int port = server.bind();
    run.write_manifest();
    std::cout << "listening on http://" << cfg.host << ':' << port << std::endl;
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.listen();
    g_server = nullptr;
}

int run_cli(const std::vector<std::string>& args);

// Drops --out/--config/--seed (and their values) so replay can supply its own.
std::vector<std::string> replayable_argv(const std::vector<std::string>& args) {
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        bool dropped = false;
        for (const char* flag : {"--out", "--config", "--seed"}) {
            const std::string f = flag;
            if (a == f) {
                ++i;
                dropped = true;
            } else if (a.rfind(f + "=", 0) == 0) {
                dropped = true;
            }
        }
        if (!dropped) kept.push_back(a);
    }
    return kept;
}

int cmd_replay(const Options& o) {
    const json m = parse_json_text(slurp(o.manifest), o.manifest);
    std::vector<std::string> argv;
    try {
        argv = m.at("argv").get<std::vector<std::string>>();
        if (m.at("command").get<std::string>() == "serve") throw UsageError("serve runs cannot be replayed");
        for (const auto& in : m.at("inputs")) {
            const std::string path = in.at("path").get<std::string>();
            if (!fs::exists(path)) throw Error("replay: input " + path + " is missing");
            if (sha256_file(path) != in.at("sha256").get<std::string>())
                throw Error("replay: input " + path + " changed since the recorded run",
                            "restore the original file or rerun the command");
        }
    } catch (const json::exception& e) {
        throw ParseError(o.manifest + ": not a run manifest (" + plain_message(e) + ")");
    }
    const fs::path out = fs::absolute(o.out);
    argv.push_back("--seed");
    argv.push_back(std::to_string(m.at("seed").get<std::uint64_t>()));
    argv.push_back("--out");
    argv.push_back(out.string());
    fs::path config_file;
    if (!m.at("config").empty()) {
        config_file = fs::temp_directory_path() / ("occq-replay-" + std::to_string(::getpid()) + ".json");
        std::ofstream(config_file) << m.at("config").dump();
        argv.push_back("--config");
        argv.push_back(config_file.string());
    }
    const fs::path here = fs::current_path();
    fs::current_path(m.at("cwd").get<std::string>());
    const int rc = run_cli(argv);
    fs::current_path(here);
    if (!config_file.empty()) fs::remove(config_file);
    return rc;
}

void render_error(const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (const auto* oe = dynamic_cast<const Error*>(&e); oe && !oe->hint().empty())
        std::cerr << "hint: " << oe->hint() << "\n";
}

int run_cli(const std::vector<std::string>& args) {
    Options o;
    CLI::App app{"Occupancy forecasting for observed M_t/G/inf queues", "occq"};
    app.set_version_flag("--version", engine_version());
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--seed", o.seed, "Random seed (default: drawn and recorded in the manifest)");
    app.add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--out", o.out, "Output directory")->capture_default_str();
    app.add_option("--format", o.format, "Tabular output format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();

    auto* synth = app.add_subcommand("synthesize", "Monthly series from quarterly counts or from the model");
    synth->add_option("--quarterly", o.quarterly, "quarter,class_id,count CSV")->check(CLI::ExistingFile);
    synth->add_flag("--model", o.model, "Occupancy series from config \"truth\"");
    synth->add_flag("--arrivals-model", o.arrivals_model, "Arrival counts from config \"truth\"");
    synth->add_option("--months", o.months, "Months to generate with --model")->check(CLI::PositiveNumber);
    synth->add_option("--class", o.class_id, "Class id of the output");

    auto* fitc = app.add_subcommand("fit", "Posterior draws for a monthly occupancy series");
    fitc->add_option("--series", o.series, "month,class_id,count CSV or series JSON")->check(CLI::ExistingFile);
    fitc->add_option("--class", o.class_id, "Class to fit");
    fitc->add_option("--arrivals", o.arrivals, "Arrival counts used to build the beta priors")->check(CLI::ExistingFile);
    fitc->add_option("--mean-service", o.mean_service, "E[S] in months")->check(CLI::PositiveNumber);
    fitc->add_option("--iterations", o.iterations, "Iterations per chain")->check(CLI::PositiveNumber);
    fitc->add_option("--chains", o.chains, "Chains")->check(CLI::PositiveNumber);
    fitc->add_option("--warmup", o.warmup, "Warmup iterations (default: half)")->check(CLI::NonNegativeNumber);

    auto add_state = [&](CLI::App* c) {
        c->add_option("--series", o.series, "Series whose last month is the observed state")->check(CLI::ExistingFile);
        c->add_option("--class", o.class_id, "Class within the series");
        c->add_option("--posterior", o.posterior, "Draws CSV from fit")->check(CLI::ExistingFile);
        c->add_option("--tau", o.tau, "Observation month");
        c->add_option("--n", o.n, "Observed count")->check(CLI::NonNegativeNumber);
        c->add_option("--horizon", o.horizon, "Forecast months 1..q");
        c->add_option("--horizons", o.horizons, "Explicit forecast months")->delimiter(',');
    };
    auto* pred = app.add_subcommand("predict", "Posterior predictive occupancy");
    add_state(pred);
    pred->add_option("--mode", o.mode, "long or short (refit after each held-out month)")->capture_default_str();
    pred->add_option("--holdout", o.holdout, "Hold out the last q months and report RMSE");
    pred->add_option("--iterations", o.iterations, "Iterations per chain for short-mode refits")
        ->check(CLI::PositiveNumber);
    pred->add_option("--chains", o.chains, "Chains for short-mode refits")->check(CLI::PositiveNumber);

    auto* scen = app.add_subcommand("scenario", "What-if prediction against the baseline");
    add_state(scen);
    scen->add_option("--mean-service-new", o.mean_service_new, "New E[S] for post-tau arrivals")
        ->check(CLI::PositiveNumber);
    scen->add_option("--lambda-scale", o.lambda_scale, "Factor on post-tau arrivals")->check(CLI::NonNegativeNumber);
    scen->add_option("--pause", o.pause, "Months without arrivals after tau")->check(CLI::NonNegativeNumber);

    auto* rec = app.add_subcommand("recover", "Mean congestion-recovery time");
    rec->add_option("--lambda", o.lambda, "Arrival rate per month");
    rec->add_option("--mean-service", o.mean_service, "E[S] in months");
    rec->add_option("--alpha", o.alpha, "Pareto shape");
    rec->add_option("--n", o.n, "Current level");
    rec->add_option("--k", o.k, "Target level (default ceil(nu + 1))");
    rec->add_option("--scale-lambda", o.scale_lambda, "Intervention: scale arrivals by this factor");
    rec->add_option("--resume-level", o.resume_level, "Intervention: pause arrivals, resume at k, stop at this level");

    auto* ld = app.add_subcommand("lastdep", "Last-departure law after arrivals stop");
    ld->add_option("--lambda", o.lambda, "Arrival rate per month");
    ld->add_option("--mean-service", o.mean_service, "E[S] in months");
    ld->add_option("--alpha", o.alpha, "Pareto shape");
    ld->add_option("--scv", o.scv, "Squared coefficient of variation (sets alpha)");
    ld->add_option("--probabilities", o.probabilities, "Quantile levels")->delimiter(',');
    ld->add_option("--grid", o.grid, "Points for the cdf table")->delimiter(',');

    auto* sim = app.add_subcommand("simulate", "Discrete-event simulation from a config");
    sim->add_option("--probes", o.probes, "Probe times")->delimiter(',');
    sim->add_option("--replications", o.replications, "Replications")->check(CLI::PositiveNumber);

    auto* srv = app.add_subcommand("serve", "Run the HTTP API");
    srv->add_option("--port", o.port, "Port (0 picks a free one)");
    srv->add_option("--host", o.host, "Bind address");
    srv->add_option("--workers", o.workers, "Fit workers");

    auto* rep = app.add_subcommand("replay", "Re-run a recorded manifest into --out");
    rep->add_option("manifest", o.manifest, "manifest.json of an earlier run")->required()->check(CLI::ExistingFile);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream out, err;
        const int rc = app.exit(e, out, err);
        std::cout << out.str();
        std::cerr << err.str();
        return rc == 0 ? 0 : 2;
    }

    try {
        if (rep->parsed()) return cmd_replay(o);
        const std::string command = app.get_subcommands().front()->get_name();
        Run run(command, o, replayable_argv(args));
        if (command == "serve") {
            cmd_serve(run, o);
            return 0;
        }
        if (command == "synthesize") cmd_synthesize(run, o);
        if (command == "fit") cmd_fit(run, o);
        if (command == "predict") cmd_predict(run, o);
        if (command == "scenario") cmd_scenario(run, o);
        if (command == "recover") cmd_recover(run, o);
        if (command == "lastdep") cmd_lastdep(run, o);
        if (command == "simulate") cmd_simulate(run, o);
        run.write_manifest();
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\nRun with --help for more information.\n";
        return 2;
    } catch (const std::exception& e) {
        render_error(e);
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) { return run_cli(std::vector<std::string>(argv + 1, argv + argc)); }
