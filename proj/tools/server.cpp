#include "server.hpp"

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <deque>
#include <iostream>

namespace livewire::service {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket&& socket, const ServiceConfig& config) : ws_(std::move(socket)), config_(config) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.read_message_max(kMaxMessageBytes);
    net::dispatch(ws_.get_executor(), beast::bind_front_handler(&Connection::accept, shared_from_this()));
  }

 private:
  void accept() { ws_.async_accept(beast::bind_front_handler(&Connection::on_accept, shared_from_this())); }

  void on_accept(beast::error_code ec) {
    if (ec) return;
    std::weak_ptr<Connection> weak = shared_from_this();
    auto executor = ws_.get_executor();
    session_ = std::make_unique<ServiceSession>(
        [weak, executor](const std::string& text) {
          net::post(executor, [weak, text] {
            if (auto self = weak.lock()) self->queue_write(text);
          });
        },
        config_);
    read();
  }

  void read() { ws_.async_read(buffer_, beast::bind_front_handler(&Connection::on_read, shared_from_this())); }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      // Oversized frames fail with message_too_big; beast has already sent the close frame.
      finish();
      return;
    }
    if (!ws_.got_text()) {
      buffer_.consume(buffer_.size());
      queue_write(R"({"type":"error","seq":null,"code":"bad_request","message":"binary frames are not supported"})");
      read();
      return;
    }
    session_->post(beast::buffers_to_string(buffer_.data()));
    buffer_.consume(buffer_.size());
    read();
  }

  void queue_write(const std::string& text) {
    if (closed_) return;
    outbox_.push_back(text);
    if (outbox_.size() == 1) write_next();
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front()), beast::bind_front_handler(&Connection::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) {
      finish();
      return;
    }
    outbox_.pop_front();
    if (!outbox_.empty()) write_next();
  }

  void finish() {
    if (closed_) return;
    closed_ = true;
    outbox_.clear();
    if (session_) {
      // Joining engine threads can take a moment; keep it off the I/O thread.
      std::thread([s = std::shared_ptr<ServiceSession>(std::move(session_))] { s->close(); }).detach();
    }
  }

  websocket::stream<beast::tcp_stream> ws_;
  ServiceConfig config_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  std::unique_ptr<ServiceSession> session_;
  bool closed_ = false;
};

}  // namespace

struct WebSocketServer::Impl {
  net::io_context ioc{1};
  tcp::acceptor acceptor{net::make_strand(ioc)};
  ServiceConfig config;

  void accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec == net::error::operation_aborted) return;
      if (!ec) std::make_shared<Connection>(std::move(socket), config)->start();
      accept();
    });
  }
};

WebSocketServer::WebSocketServer(const std::string& address, unsigned short port, ServiceConfig config)
    : impl_(std::make_unique<Impl>()) {
  impl_->config = std::move(config);
  beast::error_code ec;
  const tcp::endpoint endpoint{net::ip::make_address(address, ec), port};
  if (ec) throw InvalidArgument("bad listen address '" + address + "'");
  impl_->acceptor.open(endpoint.protocol());
  impl_->acceptor.set_option(net::socket_base::reuse_address(true));
  impl_->acceptor.bind(endpoint, ec);
  if (ec) throw IoError("cannot bind " + address + ":" + std::to_string(port) + ": " + ec.message());
  impl_->acceptor.listen(net::socket_base::max_listen_connections);
  impl_->accept();
}

WebSocketServer::~WebSocketServer() { stop(); }

unsigned short WebSocketServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void WebSocketServer::run() { impl_->ioc.run(); }

void WebSocketServer::start() {
  thread_ = std::thread([this] { run(); });
}

void WebSocketServer::stop() {
  impl_->ioc.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace livewire::service
