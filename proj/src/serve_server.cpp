#include "strol/serve.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <deque>
#include <iostream>

namespace strol {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

// One client: a session, its tick timer, and a serialized write queue. All
// handlers run on the single server thread, so no locking is needed.
class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, const ExperimentConfig& cfg, const RuleSet& rules, SessionSettings settings)
      : ws_(std::move(socket)), timer_(ws_.get_executor()), session_(cfg, rules, settings) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->send(self->session_.hello());
      self->send(self->session_.snapshot());
      self->read();
      self->schedule();
    });
  }

  void close() {
    closed_ = true;
    timer_.cancel();
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      if (auto reply = self->session_.handle_text(text)) self->send(*reply);
      self->read();
    });
  }

  void schedule() {
    if (closed_) return;
    timer_.expires_after(std::chrono::milliseconds(session_.tick_ms()));
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (ec || self->closed_) return;
      if (self->session_.tick()) self->send(self->session_.snapshot());
      self->schedule();
    });
  }

  void send(const nlohmann::json& msg) {
    if (closed_) return;
    queue_.push_back(msg.dump());
    if (queue_.size() == 1) write_next();
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(asio::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->write_next();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  asio::steady_timer timer_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  ServeSession session_;
  bool closed_ = false;
};

}  // namespace

struct ServeServer::Impl {
  ExperimentConfig cfg;
  ServerOptions options;
  RuleSet rules;
  asio::io_context io{1};
  tcp::acceptor acceptor{io};
  std::vector<std::weak_ptr<Connection>> connections;

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      try {
        auto conn = std::make_shared<Connection>(std::move(socket), cfg, rules, options.session);
        connections.push_back(conn);
        conn->start();
      } catch (const std::exception& e) {
        std::cerr << "serve: dropping connection: " << e.what() << "\n";
      }
      accept();
    });
  }
};

ServeServer::ServeServer(ExperimentConfig cfg, ServerOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->cfg = std::move(cfg);
  impl_->options = std::move(options);
  {
    const auto env = make_environment(impl_->cfg.env_name, impl_->cfg.env);
    impl_->rules = available_rules(impl_->cfg, *env);
  }
  // Fail on bad session settings before taking the port.
  ServeSession probe(impl_->cfg, impl_->rules, impl_->options.session);

  beast::error_code ec;
  const tcp::endpoint endpoint(asio::ip::make_address(impl_->options.address, ec), impl_->options.port);
  if (ec) throw std::invalid_argument("serve: bad address '" + impl_->options.address + "'");
  auto& acc = impl_->acceptor;
  acc.open(endpoint.protocol(), ec);
  if (!ec) acc.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) acc.bind(endpoint, ec);
  if (!ec) acc.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) {
    throw PortBusyError("serve: cannot listen on " + impl_->options.address + ":" +
                        std::to_string(impl_->options.port) + ": " + ec.message());
  }
}

ServeServer::~ServeServer() = default;

unsigned short ServeServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void ServeServer::run(bool handle_signals) {
  std::optional<asio::signal_set> signals;
  if (handle_signals) {
    signals.emplace(impl_->io, SIGINT, SIGTERM);
    signals->async_wait([this](beast::error_code ec, int) {
      if (!ec) stop();
    });
  }
  impl_->accept();
  impl_->io.run();
}

void ServeServer::stop() {
  asio::post(impl_->io, [impl = impl_.get()] {
    beast::error_code ec;
    impl->acceptor.close(ec);
    for (auto& weak : impl->connections)
      if (auto conn = weak.lock()) conn->close();
    impl->io.stop();
  });
}

}  // namespace strol
