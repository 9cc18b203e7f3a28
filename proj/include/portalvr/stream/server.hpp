#pragma once

#include "portalvr/stream/simulation.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace portalvr::stream {

struct ServerConfig {
    std::string address = "127.0.0.1";
    std::uint16_t port = 8080;  ///< 0 picks a free port
    double fps = 30.0;
    std::optional<std::filesystem::path> web_root;  ///< static files for plain GET requests
    std::size_t max_pending_frames = 2;             ///< per client; older frames are dropped
};

/// WebSocket frame server plus `GET /healthz`. One simulation thread owns the
/// scene and rig; network threads only enqueue input and dequeue frames. The
/// first connected client holds input authority, later ones only watch.
class StreamServer {
public:
    StreamServer(Simulation simulation, ServerConfig config);
    ~StreamServer();
    StreamServer(const StreamServer&) = delete;
    StreamServer& operator=(const StreamServer&) = delete;

    /// Binds and starts the network and simulation threads. Throws
    /// std::runtime_error when the port is unavailable.
    void start();
    void stop();
    /// Blocks until stop() is called from another thread or a signal arrives.
    void wait();

    [[nodiscard]] std::uint16_t port() const;
    [[nodiscard]] std::size_t client_count() const;
    [[nodiscard]] std::uint64_t frames_rendered() const;

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

}  // namespace portalvr::stream
