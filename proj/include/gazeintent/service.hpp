#pragma once

// WebSocket gateway for the selection engine plus a static file server for
// the demo bundle. Every connection owns its engine; models are shared
// read-only through the registry.

#include <gazeintent/protocol.hpp>

#include <boost/asio/bind_executor.hpp>
#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/version.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace gazeintent::service {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  std::string demo_dir;        // served over plain HTTP when set
  std::size_t threads = 1;
};

inline std::string mime_type(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".wasm") return "application/wasm";
  return "application/octet-stream";
}

// Maps a request target onto a file under `root`; empty when it escapes the root.
inline std::filesystem::path resolve_static(const std::filesystem::path& root, std::string_view target) {
  std::string path(target.substr(0, target.find('?')));
  if (path.empty() || path.front() != '/' || path.find("..") != std::string::npos) return {};
  if (path.back() == '/') path += "index.html";
  return root / std::filesystem::path(path.substr(1));
}

class Closable {
 public:
  virtual ~Closable() = default;
  virtual void close() = 0;
};

// Tracks live sessions for shutdown.
class SessionSet {
 public:
  void add(const std::shared_ptr<Closable>& s) {
    std::lock_guard lock(mu_);
    std::erase_if(sessions_, [](const auto& w) { return w.expired(); });
    sessions_.push_back(s);
  }
  void close_all() {
    std::vector<std::shared_ptr<Closable>> live;
    {
      std::lock_guard lock(mu_);
      for (auto& w : sessions_)
        if (auto s = w.lock()) live.push_back(std::move(s));
      sessions_.clear();
    }
    for (auto& s : live) s->close();
  }

 private:
  std::mutex mu_;
  std::vector<std::weak_ptr<Closable>> sessions_;
};

class WsSession : public Closable, public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, std::shared_ptr<const ModelRegistry> registry)
      : ws_(std::move(socket)), conn_(std::move(registry)) {}

  template <class Request>
  void run(Request req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
  }

  // Thread-safe; pending writes drain before the close frame goes out.
  void close() override {
    net::dispatch(ws_.get_executor(), [self = shared_from_this()] {
      self->closing_ = true;
      if (self->accepted_ && self->queue_.empty()) self->do_close();
    });
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    accepted_ = true;
    if (closing_) return do_close();
    send(wire::hello() + "\n");
    do_read();
  }

  void do_read() { ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this())); }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) return;  // closed or failed; the session ends with its last handler
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    for (auto& line : conn_.handle_text(text)) send(std::move(line) + "\n");
    do_read();
  }

  void send(std::string msg) {
    if (closed_) return;
    queue_.push_back(std::move(msg));
    if (queue_.size() == 1) do_write();
  }

  void do_write() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()), beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) {
      queue_.clear();
      return;
    }
    queue_.pop_front();
    if (!queue_.empty())
      do_write();
    else if (closing_)
      do_close();
  }

  void do_close() {
    if (closed_) return;
    closed_ = true;
    ws_.async_close(websocket::close_code::going_away, [self = shared_from_this()](beast::error_code) {});
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  Connection conn_;
  std::deque<std::string> queue_;
  bool accepted_ = false;
  bool closing_ = false;
  bool closed_ = false;
};

class HttpSession : public Closable, public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, std::shared_ptr<const ModelRegistry> registry, std::string demo_dir,
              SessionSet& sessions)
      : stream_(std::move(socket)), registry_(std::move(registry)), demo_dir_(std::move(demo_dir)), sessions_(sessions) {}

  void run() {
    net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpSession::do_read, shared_from_this()));
  }

  void close() override {
    net::dispatch(stream_.get_executor(), [self = shared_from_this()] {
      if (!self->upgraded_) self->stream_.cancel();
    });
  }

 private:
  void do_read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) return;
    if (websocket::is_upgrade(req_)) {
      stream_.expires_never();
      upgraded_ = true;
      auto ws = std::make_shared<WsSession>(stream_.release_socket(), registry_);
      sessions_.add(ws);
      ws->run(std::move(req_));
      return;
    }
    auto res = std::make_shared<http::response<http::string_body>>(respond());
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code wec, std::size_t) {
      if (wec || res->need_eof()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->do_read();
    });
  }

  http::response<http::string_body> respond() {
    auto make = [&](http::status status, std::string body, const std::string& type) {
      http::response<http::string_body> res{status, req_.version()};
      res.set(http::field::server, "gazeintent");
      res.set(http::field::content_type, type);
      res.keep_alive(req_.keep_alive());
      res.body() = std::move(body);
      res.prepare_payload();
      return res;
    };
    if (req_.method() != http::verb::get && req_.method() != http::verb::head)
      return make(http::status::bad_request, "unsupported method\n", "text/plain");
    if (demo_dir_.empty()) return make(http::status::not_found, "no demo bundle configured\n", "text/plain");
    const auto target = req_.target();
    const auto path = resolve_static(demo_dir_, std::string_view(target.data(), target.size()));
    std::error_code fec;
    if (path.empty() || !std::filesystem::is_regular_file(path, fec))
      return make(http::status::not_found, "not found\n", "text/plain");
    std::ifstream is(path, std::ios::binary);
    std::string body((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return make(http::status::ok, std::move(body), mime_type(path));
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  std::shared_ptr<const ModelRegistry> registry_;
  std::string demo_dir_;
  SessionSet& sessions_;
  bool upgraded_ = false;
};

class Server {
 public:
  Server(ServerOptions options, std::shared_ptr<const ModelRegistry> registry)
      : opts_(std::move(options)), registry_(std::move(registry)), acceptor_(ioc_) {
    if (opts_.threads == 0) opts_.threads = 1;
    beast::error_code ec;
    const auto addr = net::ip::make_address(opts_.address, ec);
    if (ec) fail(ErrorCode::Config, "bad bind address '" + opts_.address + "'");
    const tcp::endpoint ep{addr, opts_.port};
    acceptor_.open(ep.protocol(), ec);
    if (!ec) acceptor_.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(ep, ec);
    if (!ec) acceptor_.listen(net::socket_base::max_listen_connections, ec);
    if (ec) fail(ErrorCode::Io, "cannot listen on " + opts_.address + ":" + std::to_string(opts_.port) + ": " + ec.message());
  }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  // Blocks until stop() (or a handled signal) and every connection has closed.
  void run(bool handle_signals = false) {
    if (handle_signals) install_signal_handlers();
    do_accept();
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < opts_.threads; ++i) pool.emplace_back([this] { ioc_.run(); });
    ioc_.run();
    for (auto& t : pool) t.join();
  }

  // SIGINT and SIGTERM stop the server; call before announcing readiness so
  // an early signal is not lost.
  void install_signal_handlers() {
    if (signals_) return;
    signals_ = std::make_unique<net::signal_set>(ioc_, SIGINT, SIGTERM);
    signals_->async_wait([this](beast::error_code ec, int) {
      if (!ec) stop();
    });
  }

  // Thread-safe and idempotent.
  void stop() {
    if (stopping_.exchange(true)) return;
    net::post(ioc_, [this] {
      beast::error_code ec;
      acceptor_.close(ec);
      sessions_.close_all();
      if (signals_) signals_->cancel(ec);
    });
  }

 private:
  void do_accept() {
    acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      auto session = std::make_shared<HttpSession>(std::move(socket), registry_, opts_.demo_dir, sessions_);
      sessions_.add(session);
      session->run();
      do_accept();
    });
  }

  ServerOptions opts_;
  std::shared_ptr<const ModelRegistry> registry_;
  net::io_context ioc_;
  tcp::acceptor acceptor_;
  SessionSet sessions_;
  std::unique_ptr<net::signal_set> signals_;
  std::atomic<bool> stopping_{false};
};

}  // namespace gazeintent::service
