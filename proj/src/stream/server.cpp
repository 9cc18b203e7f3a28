#include "portalvr/stream/server.hpp"

#include <boost/asio/signal_set.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace portalvr::stream {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

using Bytes = std::shared_ptr<const std::vector<std::uint8_t>>;

class WsSession;

struct StreamServer::Impl {
    Simulation sim;
    ServerConfig config;
    net::io_context ioc{1};
    tcp::acceptor acceptor{ioc};
    net::signal_set signals{ioc, SIGINT, SIGTERM};
    std::thread io_thread;
    std::thread sim_thread;
    std::atomic<bool> running{false};
    std::atomic<std::uint64_t> frames{0};

    std::mutex stop_mutex;
    std::condition_variable stop_cv;
    bool stopped = false;

    mutable std::mutex sessions_mutex;
    std::map<std::uint64_t, std::weak_ptr<WsSession>> sessions;
    std::uint64_t next_session = 1;

    std::mutex input_mutex;
    std::vector<InputEvent> inputs;

    Impl(Simulation s, ServerConfig c) : sim(std::move(s)), config(std::move(c)) {}

    std::uint64_t add_session(const std::shared_ptr<WsSession>& s) {
        std::lock_guard lock(sessions_mutex);
        const std::uint64_t id = next_session++;
        sessions.emplace(id, s);
        return id;
    }
    void remove_session(std::uint64_t id) {
        std::lock_guard lock(sessions_mutex);
        sessions.erase(id);
    }
    bool has_authority(std::uint64_t id) const {
        std::lock_guard lock(sessions_mutex);
        return !sessions.empty() && sessions.begin()->first == id;
    }
    std::size_t client_count() const {
        std::lock_guard lock(sessions_mutex);
        return sessions.size();
    }
    void push_input(const InputEvent& e) {
        std::lock_guard lock(input_mutex);
        inputs.push_back(e);
    }
    std::vector<InputEvent> drain_inputs() {
        std::lock_guard lock(input_mutex);
        std::vector<InputEvent> out;
        out.swap(inputs);
        return out;
    }

    void accept();
    void broadcast(std::vector<Bytes> messages);
    void simulate();
    void shutdown();
};

class WsSession : public std::enable_shared_from_this<WsSession> {
public:
    WsSession(tcp::socket socket, StreamServer::Impl& server) : ws_(std::move(socket)), server_(server) {}

    void start(http::request<http::string_body> req) {
        ws_.binary(true);
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
            if (ec) return;
            self->id_ = self->server_.add_session(self);
            self->read();
        });
    }

    // Called on the io thread.
    void send(const Bytes& msg, bool droppable) {
        if (droppable) {
            std::size_t frames = 0;
            for (const auto& q : queue_) frames += q.second ? 1 : 0;
            if (frames >= server_.config.max_pending_frames) {
                // Drop the oldest frame that is not currently being written.
                for (auto it = queue_.begin() + (writing_ ? 1 : 0); it != queue_.end(); ++it) {
                    if (it->second) {
                        queue_.erase(it);
                        break;
                    }
                }
            }
        }
        queue_.emplace_back(msg, droppable);
        if (!writing_) write();
    }

    // Called on the io thread.
    void abort() {
        beast::error_code ec;
        beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
        beast::get_lowest_layer(ws_).socket().close(ec);
    }

private:
    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->server_.remove_session(self->id_);
                return;
            }
            const auto data = self->buffer_.cdata();
            std::span<const std::uint8_t> bytes(static_cast<const std::uint8_t*>(data.data()), data.size());
            if (self->server_.has_authority(self->id_)) {
                try {
                    self->server_.push_input(decode_input_message(bytes));
                } catch (const ProtocolError&) {
                    // malformed input is dropped
                }
            }
            self->buffer_.consume(self->buffer_.size());
            self->read();
        });
    }

    void write() {
        if (queue_.empty()) {
            writing_ = false;
            return;
        }
        writing_ = true;
        const Bytes& msg = queue_.front().first;
        ws_.async_write(net::buffer(*msg), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            self->queue_.pop_front();
            if (ec) {
                self->writing_ = false;
                self->queue_.clear();
                self->server_.remove_session(self->id_);
                return;
            }
            self->write();
        });
    }

    websocket::stream<beast::tcp_stream> ws_;
    StreamServer::Impl& server_;
    beast::flat_buffer buffer_;
    std::deque<std::pair<Bytes, bool>> queue_;
    bool writing_ = false;
    std::uint64_t id_ = 0;
};

namespace {

std::string mime_type(const std::filesystem::path& p) {
    const std::string ext = p.extension().string();
    if (ext == ".html") return "text/html";
    if (ext == ".js" || ext == ".mjs") return "application/javascript";
    if (ext == ".css") return "text/css";
    if (ext == ".json") return "application/json";
    if (ext == ".png") return "image/png";
    if (ext == ".svg") return "image/svg+xml";
    return "application/octet-stream";
}

}  // namespace

class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket socket, StreamServer::Impl& server) : stream_(std::move(socket)), server_(server) {}

    void read() {
        req_ = {};
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return;
            self->handle();
        });
    }

private:
    void handle() {
        if (websocket::is_upgrade(req_)) {
            stream_.expires_never();
            std::make_shared<WsSession>(stream_.release_socket(), server_)->start(std::move(req_));
            return;
        }
        auto res = std::make_shared<http::response<http::string_body>>();
        res->version(req_.version());
        res->keep_alive(req_.keep_alive());
        res->set(http::field::server, "portalvr");
        const std::string target(req_.target());
        if (req_.method() != http::verb::get) {
            res->result(http::status::method_not_allowed);
            res->set(http::field::content_type, "text/plain");
            res->body() = "method not allowed\n";
        } else if (target == "/healthz") {
            res->result(http::status::ok);
            res->set(http::field::content_type, "text/plain");
            std::ostringstream body;
            body << "ok frames=" << server_.frames.load() << " clients=" << server_.client_count() << "\n";
            res->body() = body.str();
        } else if (!serve_file(target, *res)) {
            res->result(http::status::not_found);
            res->set(http::field::content_type, "text/plain");
            res->body() = "not found\n";
        }
        res->prepare_payload();
        http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
            if (ec || !res->keep_alive()) {
                beast::error_code ignored;
                self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
                return;
            }
            self->read();
        });
    }

    bool serve_file(const std::string& target, http::response<http::string_body>& res) const {
        if (!server_.config.web_root) return false;
        std::string path = target.substr(0, target.find('?'));
        if (path.empty() || path.front() != '/' || path.find("..") != std::string::npos) return false;
        if (path.back() == '/') path += "index.html";
        const std::filesystem::path full = *server_.config.web_root / path.substr(1);
        std::ifstream f(full, std::ios::binary);
        if (!f) return false;
        std::ostringstream data;
        data << f.rdbuf();
        res.result(http::status::ok);
        res.set(http::field::content_type, mime_type(full));
        res.body() = data.str();
        return true;
    }

    beast::tcp_stream stream_;
    StreamServer::Impl& server_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
};

void StreamServer::Impl::accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
        if (!acceptor.is_open()) return;
        if (!ec) std::make_shared<HttpSession>(std::move(socket), *this)->read();
        accept();
    });
}

void StreamServer::Impl::broadcast(std::vector<Bytes> messages) {
    net::post(ioc, [this, messages = std::move(messages)] {
        std::vector<std::shared_ptr<WsSession>> live;
        {
            std::lock_guard lock(sessions_mutex);
            for (auto& [id, weak] : sessions) {
                if (auto s = weak.lock()) live.push_back(std::move(s));
            }
        }
        for (auto& s : live) {
            for (std::size_t i = 0; i < messages.size(); ++i) {
                // The last message is the frame; acks are never dropped.
                s->send(messages[i], i + 1 == messages.size());
            }
        }
    });
}

void StreamServer::Impl::simulate() {
    using Clock = std::chrono::steady_clock;
    const double fps = config.fps > 0.0 ? config.fps : 30.0;
    const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / fps));
    auto next = Clock::now();
    while (running.load()) {
        if (client_count() == 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
            next = Clock::now();
            continue;
        }
        const std::vector<InputEvent> events = drain_inputs();
        TickResult r = sim.tick(events, 1.0 / fps);
        frames.fetch_add(1);
        std::vector<Bytes> out;
        for (const AckMessage& a : r.acks) out.push_back(std::make_shared<const std::vector<std::uint8_t>>(encode_ack_message(a)));
        out.push_back(std::make_shared<const std::vector<std::uint8_t>>(encode_frame_message(r.message)));
        broadcast(std::move(out));

        next += period;
        const auto now = Clock::now();
        if (next < now) {
            next = now;
        } else {
            std::this_thread::sleep_until(next);
        }
    }
}

void StreamServer::Impl::shutdown() {
    {
        std::lock_guard lock(stop_mutex);
        if (stopped) return;
        stopped = true;
    }
    running.store(false);
    net::post(ioc, [this] {
        std::vector<std::shared_ptr<WsSession>> live;
        {
            std::lock_guard lock(sessions_mutex);
            for (auto& [id, weak] : sessions) {
                if (auto s = weak.lock()) live.push_back(std::move(s));
            }
            sessions.clear();
        }
        for (auto& s : live) s->abort();
        beast::error_code ec;
        acceptor.close(ec);
        signals.cancel(ec);
        ioc.stop();
    });
    stop_cv.notify_all();
}

StreamServer::StreamServer(Simulation simulation, ServerConfig config)
    : impl_(std::make_unique<Impl>(std::move(simulation), std::move(config))) {}

StreamServer::~StreamServer() { stop(); }

void StreamServer::start() {
    Impl& s = *impl_;
    try {
        const tcp::endpoint endpoint(net::ip::make_address(s.config.address), s.config.port);
        s.acceptor.open(endpoint.protocol());
        s.acceptor.set_option(net::socket_base::reuse_address(true));
        s.acceptor.bind(endpoint);
        s.acceptor.listen(net::socket_base::max_listen_connections);
    } catch (const boost::system::system_error& e) {
        throw std::runtime_error("cannot listen on " + s.config.address + ":" + std::to_string(s.config.port) + ": " + e.what());
    }
    s.running.store(true);
    s.signals.async_wait([this](beast::error_code ec, int) {
        if (!ec) impl_->shutdown();
    });
    s.accept();
    s.io_thread = std::thread([&s] { s.ioc.run(); });
    s.sim_thread = std::thread([&s] { s.simulate(); });
}

void StreamServer::stop() {
    if (!impl_) return;
    impl_->shutdown();
    if (impl_->sim_thread.joinable()) impl_->sim_thread.join();
    if (impl_->io_thread.joinable()) impl_->io_thread.join();
}

void StreamServer::wait() {
    {
        std::unique_lock lock(impl_->stop_mutex);
        impl_->stop_cv.wait(lock, [this] { return impl_->stopped; });
    }
    stop();
}

std::uint16_t StreamServer::port() const {
    beast::error_code ec;
    const auto ep = impl_->acceptor.local_endpoint(ec);
    return ec ? impl_->config.port : ep.port();
}

std::size_t StreamServer::client_count() const { return impl_->client_count(); }

std::uint64_t StreamServer::frames_rendered() const { return impl_->frames.load(); }

}  // namespace portalvr::stream
