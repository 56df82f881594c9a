#include "eca/server.hpp"

#include "eca/behavior.hpp"
#include "eca/protocol.hpp"

#include <boost/asio/signal_set.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include <atomic>
#include <charconv>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace eca::gateway {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

struct Closable {
    virtual ~Closable() = default;
    virtual void shutdown() = 0;
    virtual void force_close() = 0;
};

std::map<std::string, std::string> parse_query(std::string_view target) {
    std::map<std::string, std::string> out;
    const auto q = target.find('?');
    if (q == std::string_view::npos)
        return out;
    std::string_view rest = target.substr(q + 1);
    while (!rest.empty()) {
        const auto amp = rest.find('&');
        const auto pair = rest.substr(0, amp);
        const auto eq = pair.find('=');
        if (eq == std::string_view::npos)
            out[std::string(pair)] = "";
        else
            out[std::string(pair.substr(0, eq))] = std::string(pair.substr(eq + 1));
        if (amp == std::string_view::npos)
            break;
        rest = rest.substr(amp + 1);
    }
    return out;
}

std::string_view target_of(const Request& req) { return {req.target().data(), req.target().size()}; }

std::string_view path_of(std::string_view target) { return target.substr(0, target.find('?')); }

template <class T>
std::optional<T> parse_number(const std::string& s) {
    T value{};
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc() || ptr != end)
        return std::nullopt;
    return value;
}

std::string_view mime_type(const std::filesystem::path& p) {
    const auto ext = p.extension().string();
    if (ext == ".html" || ext == ".htm")
        return "text/html";
    if (ext == ".js" || ext == ".mjs")
        return "application/javascript";
    if (ext == ".css")
        return "text/css";
    if (ext == ".json")
        return "application/json";
    if (ext == ".png")
        return "image/png";
    if (ext == ".svg")
        return "image/svg+xml";
    if (ext == ".wasm")
        return "application/wasm";
    return "application/octet-stream";
}

json summary_json(const std::vector<double>& values) {
    if (values.empty())
        return json{{"count", 0}, {"mean_ms", nullptr}, {"sd_ms", nullptr}};
    const auto s = session::summarize(values);
    return json{{"count", s.count}, {"mean_ms", s.mean_ms}, {"sd_ms", s.sd_ms ? json(*s.sd_ms) : json(nullptr)}};
}

}  // namespace

struct Server::Impl : std::enable_shared_from_this<Server::Impl> {
    explicit Impl(ServerConfig cfg)
        : config(std::move(cfg)), acceptor(net::make_strand(ioc)), sink(std::make_shared<session::MetricsSink>()) {
        if (!config.script)
            throw std::invalid_argument("server needs an ELIZA script");
        if (!config.presets)
            config.presets = std::make_shared<const expression::PresetTable>(expression::default_presets());
        if (config.threads == 0)
            config.threads = 1;
        const tcp::endpoint ep(net::ip::make_address(config.address), config.port);
        acceptor.open(ep.protocol());
        acceptor.set_option(net::socket_base::reuse_address(true));
        acceptor.bind(ep);
        acceptor.listen(net::socket_base::max_listen_connections);
        bound_port = acceptor.local_endpoint().port();
    }

    void do_accept();
    void begin_shutdown();
    void wait_for_drain(std::chrono::steady_clock::time_point deadline, bool forced = false);
    Response route(const Request& req);
    Response handle_lipsync(const Request& req);
    Response handle_static(const Request& req);

    session::SessionConfig session_config() const {
        session::SessionConfig sc;
        sc.seed = config.seed;
        sc.presets = config.presets;
        return sc;
    }

    void track(const std::shared_ptr<Closable>& c) {
        std::lock_guard lock(live_mutex);
        std::erase_if(live, [](const auto& w) { return w.expired(); });
        live.push_back(c);
    }

    ServerConfig config;
    net::io_context ioc;
    tcp::acceptor acceptor;
    std::shared_ptr<session::MetricsSink> sink;
    std::uint16_t bound_port = 0;
    std::atomic<bool> stopping{false};
    std::mutex live_mutex;
    std::vector<std::weak_ptr<Closable>> live;
    std::vector<std::thread> workers;
    std::unique_ptr<net::steady_timer> grace;
    std::unique_ptr<net::signal_set> signals;
};

namespace {

Response make_response(const Request& req, http::status status, std::string body,
                       std::string_view content_type = "application/json") {
    Response res{status, req.version()};
    res.set(http::field::server, "eca-gateway");
    res.set(http::field::content_type, beast::string_view(content_type.data(), content_type.size()));
    res.keep_alive(req.keep_alive());
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
}

Response error_response(const Request& req, http::status status, std::string_view code, std::string_view detail) {
    return make_response(req, status, json{{"error", {{"code", code}, {"detail", detail}}}}.dump());
}

class WsSession : public Closable, public std::enable_shared_from_this<WsSession> {
public:
    WsSession(tcp::socket&& socket, std::shared_ptr<Server::Impl> server)
        : ws_(std::move(socket)), server_(std::move(server)),
          handler_(server_->config.script, server_->session_config(), server_->sink) {}

    void run(Request req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.read_message_max(1u << 20);
        ws_.text(true);
        ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
    }

    void shutdown() override {
        net::post(ws_.get_executor(), [self = shared_from_this()] {
            self->closing_ = true;
            if (self->outbox_.empty())
                self->close();
        });
    }

    void force_close() override {
        net::post(ws_.get_executor(), [self = shared_from_this()] { beast::get_lowest_layer(self->ws_).close(); });
    }

private:
    void on_accept(beast::error_code ec) {
        if (ec)
            return;
        spdlog::debug("session opened");
        enqueue(handler_.open());
        do_read();
    }

    void do_read() {
        ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            if (ec != websocket::error::closed)
                spdlog::debug("session read ended: {}", ec.message());
            return;
        }
        std::vector<std::string> frames;
        if (!ws_.got_text()) {
            frames.push_back(encode(msg::Error{"bad_message", "frames must be text"}));
        } else {
            const auto data = beast::buffers_to_string(buffer_.data());
            frames = handler_.handle_frame(data);
        }
        buffer_.consume(buffer_.size());
        enqueue(std::move(frames));
        if (!closing_)
            do_read();
    }

    void enqueue(std::vector<std::string> frames) {
        const bool idle = outbox_.empty();
        for (auto& f : frames)
            outbox_.push_back(std::move(f));
        if (idle && !outbox_.empty())
            do_write();
    }

    void do_write() {
        ws_.async_write(net::buffer(outbox_.front()),
                        beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
    }

    void on_write(beast::error_code ec, std::size_t) {
        if (ec)
            return;
        outbox_.pop_front();
        if (!outbox_.empty())
            do_write();
        else if (closing_)
            close();
    }

    void close() {
        if (closed_)
            return;
        closed_ = true;
        ws_.async_close(websocket::close_code::going_away, [self = shared_from_this()](beast::error_code) {});
    }

    websocket::stream<beast::tcp_stream> ws_;
    std::shared_ptr<Server::Impl> server_;
    SessionHandler handler_;
    beast::flat_buffer buffer_;
    std::deque<std::string> outbox_;
    bool closing_ = false;
    bool closed_ = false;
};

class HttpSession : public Closable, public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket&& socket, std::shared_ptr<Server::Impl> server)
        : stream_(std::move(socket)), server_(std::move(server)) {}

    void run() {
        net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpSession::do_read, shared_from_this()));
    }

    void shutdown() override {
        net::post(stream_.get_executor(), [self = shared_from_this()] {
            beast::error_code ec;
            self->stream_.socket().shutdown(tcp::socket::shutdown_both, ec);
            self->stream_.close();
        });
    }

    void force_close() override { shutdown(); }

private:
    void do_read() {
        parser_.emplace();
        parser_->body_limit(server_->config.max_body_bytes);
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, *parser_,
                         beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec == http::error::end_of_stream) {
            stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
            return;
        }
        if (ec == http::error::body_limit) {
            Request req;
            send(error_response(req, http::status::payload_too_large, "too_large", "request body too large"));
            return;
        }
        if (ec)
            return;

        auto req = parser_->release();
        if (websocket::is_upgrade(req)) {
            if (path_of(target_of(req)) != "/session" || server_->stopping) {
                send(error_response(req, http::status::not_found, "not_found", "no such endpoint"));
                return;
            }
            stream_.expires_never();
            auto ws = std::make_shared<WsSession>(stream_.release_socket(), server_);
            server_->track(ws);
            ws->run(std::move(req));
            return;
        }
        send(server_->route(req));
    }

    void send(Response res) {
        auto sp = std::make_shared<Response>(std::move(res));
        http::async_write(stream_, *sp, [self = shared_from_this(), sp](beast::error_code ec, std::size_t) {
            if (ec)
                return;
            if (!sp->keep_alive() || self->server_->stopping) {
                self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
                return;
            }
            self->do_read();
        });
    }

    beast::tcp_stream stream_;
    std::shared_ptr<Server::Impl> server_;
    beast::flat_buffer buffer_;
    std::optional<http::request_parser<http::string_body>> parser_;
};

}  // namespace

void Server::Impl::do_accept() {
    acceptor.async_accept(net::make_strand(ioc), [self = shared_from_this()](beast::error_code ec, tcp::socket socket) {
        if (ec) {
            if (ec != net::error::operation_aborted)
                spdlog::warn("accept failed: {}", ec.message());
            if (!self->acceptor.is_open())
                return;
        } else {
            auto session = std::make_shared<HttpSession>(std::move(socket), self);
            self->track(session);
            session->run();
        }
        if (!self->stopping)
            self->do_accept();
    });
}

void Server::Impl::begin_shutdown() {
    if (stopping.exchange(true))
        return;
    net::post(acceptor.get_executor(), [self = shared_from_this()] {
        beast::error_code ec;
        self->acceptor.close(ec);
        std::vector<std::shared_ptr<Closable>> open;
        {
            std::lock_guard lock(self->live_mutex);
            for (auto& w : self->live)
                if (auto c = w.lock())
                    open.push_back(std::move(c));
        }
        for (auto& c : open)
            c->shutdown();
        if (self->signals)
            self->signals->cancel();
        self->grace = std::make_unique<net::steady_timer>(self->ioc);
        self->wait_for_drain(std::chrono::steady_clock::now() + std::chrono::seconds(5));
    });
}

void Server::Impl::wait_for_drain(std::chrono::steady_clock::time_point deadline, bool forced) {
    std::vector<std::shared_ptr<Closable>> open;
    {
        std::lock_guard lock(live_mutex);
        std::erase_if(live, [](const auto& w) { return w.expired(); });
        for (auto& w : live)
            if (auto c = w.lock())
                open.push_back(std::move(c));
    }
    if (open.empty() || forced) {
        ioc.stop();
        return;
    }
    auto wait = std::chrono::milliseconds(20);
    if (std::chrono::steady_clock::now() >= deadline) {
        spdlog::warn("closing {} connection(s) that did not finish the close handshake", open.size());
        for (auto& c : open)
            c->force_close();
        forced = true;
        wait = std::chrono::milliseconds(100);
    }
    grace->expires_after(wait);
    grace->async_wait(
        [self = shared_from_this(), deadline, forced](beast::error_code) { self->wait_for_drain(deadline, forced); });
}

Response Server::Impl::route(const Request& req) {
    const auto path = path_of(target_of(req));
    try {
        if (path == "/health") {
            if (req.method() != http::verb::get)
                return error_response(req, http::status::method_not_allowed, "method_not_allowed", "use GET");
            return make_response(req, http::status::ok, json{{"status", "ok"}}.dump());
        }
        if (path == "/lipsync") {
            if (req.method() != http::verb::post)
                return error_response(req, http::status::method_not_allowed, "method_not_allowed", "use POST");
            return handle_lipsync(req);
        }
        if (path == "/metrics") {
            const auto records = sink->records();
            std::vector<double> ai, plan, total;
            for (const auto& r : records) {
                ai.push_back(r.ai_ms);
                plan.push_back(r.plan_ms);
                total.push_back(r.total_server_ms);
            }
            json body{{"turns", records.size()},
                      {"ai_ms", summary_json(ai)},
                      {"plan_ms", summary_json(plan)},
                      {"total_server_ms", summary_json(total)},
                      {"client_stt_ms", summary_json(sink->client_stt_ms())},
                      {"client_tts_ms", summary_json(sink->client_tts_ms())}};
            return make_response(req, http::status::ok, body.dump());
        }
        if (path == "/listening") {
            auto q = parse_query(target_of(req));
            const auto duration = q.count("duration_ms") ? parse_number<double>(q["duration_ms"]) : std::nullopt;
            if (!duration || !(*duration >= 0) || *duration > 3.6e6)
                return error_response(req, http::status::bad_request, "bad_request",
                                      "duration_ms must be a number in [0, 3600000]");
            std::optional<std::uint64_t> seed = config.seed;
            if (q.count("seed"))
                seed = parse_number<std::uint64_t>(q["seed"]);
            if (!seed)
                return error_response(req, http::status::bad_request, "bad_request", "seed must be an unsigned integer");
            return make_response(req, http::status::ok,
                                 schedule_to_json(behavior::plan_listening(*duration, *seed)).dump());
        }
        if (config.static_dir && (req.method() == http::verb::get || req.method() == http::verb::head))
            return handle_static(req);
        return error_response(req, http::status::not_found, "not_found", "no such endpoint");
    } catch (const std::exception& e) {
        spdlog::error("request {} failed: {}", std::string(path), e.what());
        return error_response(req, http::status::internal_server_error, "internal", e.what());
    }
}

Response Server::Impl::handle_lipsync(const Request& req) {
    LipsyncRequest lr;
    try {
        const auto ctype = req[http::field::content_type];
        if (ctype.starts_with("application/json")) {
            lr = parse_lipsync_json(req.body());
        } else {
            auto q = parse_query(target_of(req));
            const auto fmt = parse_sample_format(q.count("format") ? q["format"] : "pcm16");
            if (!fmt)
                return error_response(req, http::status::unprocessable_entity, "unsupported_format",
                                      "format must be pcm16 or float32");
            const auto rate = q.count("sample_rate") ? parse_number<double>(q["sample_rate"]) : std::nullopt;
            if (!rate || !(*rate > 0))
                return error_response(req, http::status::bad_request, "bad_request", "sample_rate is required");
            lr.format = *fmt;
            lr.sample_rate_hz = *rate;
            lr.pcm.assign(req.body().begin(), req.body().end());
        }
    } catch (const ProtocolError& e) {
        return error_response(req, http::status::bad_request, "bad_request", e.what());
    } catch (const lipsync::LipsyncError& e) {
        return error_response(req, http::status::unprocessable_entity, "unsupported_format", e.what());
    }
    try {
        return make_response(req, http::status::ok, run_lipsync(lr, config.lipsync).dump());
    } catch (const lipsync::LipsyncError& e) {
        return error_response(req, http::status::unprocessable_entity, "lipsync_error", e.what());
    }
}

Response Server::Impl::handle_static(const Request& req) {
    std::string rel(path_of(target_of(req)));
    if (rel.find("..") != std::string::npos || rel.find('\\') != std::string::npos)
        return error_response(req, http::status::bad_request, "bad_request", "illegal path");
    if (rel.empty() || rel.back() == '/')
        rel += "index.html";
    const auto file = *config.static_dir / rel.substr(1);
    std::ifstream in(file, std::ios::binary);
    if (!in || std::filesystem::is_directory(file))
        return error_response(req, http::status::not_found, "not_found", "no such file");
    std::ostringstream body;
    body << in.rdbuf();
    auto res = make_response(req, http::status::ok, body.str(), mime_type(file));
    if (req.method() == http::verb::head)
        res.body().clear();
    return res;
}

Server::Server(ServerConfig config) : impl_(std::make_shared<Impl>(std::move(config))) {}

Server::~Server() {
    stop();
}

std::uint16_t Server::port() const noexcept { return impl_->bound_port; }

std::shared_ptr<session::MetricsSink> Server::metrics() const noexcept { return impl_->sink; }

void Server::run() {
    impl_->signals = std::make_unique<net::signal_set>(impl_->ioc, SIGINT, SIGTERM);
    impl_->signals->async_wait([impl = impl_.get()](beast::error_code ec, int sig) {
        if (ec)
            return;
        spdlog::info("signal {} received, shutting down", sig);
        impl->begin_shutdown();
    });
    impl_->do_accept();
    spdlog::info("listening on {}:{}", impl_->config.address, impl_->bound_port);
    for (unsigned i = 1; i < impl_->config.threads; ++i)
        impl_->workers.emplace_back([this] { impl_->ioc.run(); });
    impl_->ioc.run();
    for (auto& t : impl_->workers)
        if (t.joinable())
            t.join();
    impl_->workers.clear();
}

void Server::start() {
    impl_->do_accept();
    for (unsigned i = 0; i < impl_->config.threads; ++i)
        impl_->workers.emplace_back([this] { impl_->ioc.run(); });
}

void Server::stop() {
    if (!impl_)
        return;
    impl_->begin_shutdown();
    for (auto& t : impl_->workers)
        if (t.joinable() && t.get_id() != std::this_thread::get_id())
            t.join();
    impl_->workers.clear();
}

}  // namespace eca::gateway
