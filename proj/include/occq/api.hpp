#pragma once

#include <cstddef>
#include <cstdint>
#include <json.hpp>
#include <memory>
#include <string>

namespace occq::api {

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    unsigned workers = 0;         ///< fit workers; 0 follows OCCQ_THREADS
    std::size_t queue_limit = 8;  ///< queued fits beyond the running ones before 503
    std::size_t capacity = 64;    ///< sessions kept before LRU eviction
    std::string cors_origin = "*";
    int max_iterations = 20000;  ///< per-chain cap accepted from clients
};

ServerConfig server_config_from_json(const nlohmann::json& j);

struct Response {
    int status = 200;
    nlohmann::json body;
};

/// Route table without the transport. Thread-safe.
class Service {
public:
    explicit Service(ServerConfig config);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    Response handle(const std::string& method, const std::string& path, const std::string& body);
    /// Blocks until queued and running fits finish.
    void drain();
    const ServerConfig& config() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// JSON Schema documents for request bodies, keyed by route name.
const nlohmann::json& request_schemas();

/// HTTP front end over a Service.
class HttpServer {
public:
    explicit HttpServer(ServerConfig config);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds to config.port (0 picks a free port) and returns the bound port.
    int bind();
    /// Serves until stop().
    void listen();
    void stop();
    Service& service();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace occq::api
