#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "fexgan/model.hpp"

namespace httplib {
class Server;
}

namespace fexgan {

/// Same `key = value` syntax as the training config.
struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string checkpoint;
  std::string corpus_root;  // optional; feeds GET /identities
  std::size_t max_body_bytes = 8u << 20;
  int timeout_seconds = 30;

  void validate() const;
  static ServiceConfig from_text(const std::string& text);
  static ServiceConfig from_file(const std::filesystem::path& path);
};

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws DomainError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

struct Identity {
  int id = 0;
  std::vector<std::uint8_t> thumbnail_png;
};

/// First neutral frame per identity found under a corpus root.
std::vector<Identity> scan_identities(const std::filesystem::path& corpus_root);

struct Response {
  int status = 200;
  std::string body;  // JSON
};

/// Request handling over one immutable model snapshot; handle() is a pure
/// function of (model, request) in deterministic mode.
class Service {
 public:
  Service(std::shared_ptr<const InferenceModel> model, std::int64_t checkpoint_step,
          std::vector<Identity> identities = {});

  Response handle(const std::string& method, const std::string& path, const std::string& body) const;
  std::uint64_t requests_served() const { return served_.load(); }

 private:
  Response health() const;
  Response affects() const;
  Response identities() const;
  Response encode(const std::string& body) const;
  Response decode(const std::string& body) const;
  Response transform(const std::string& body) const;

  std::shared_ptr<const InferenceModel> model_;
  std::int64_t step_;
  std::vector<Identity> identities_;
  mutable std::atomic<std::uint64_t> served_{0};
};

/// JSON error body {"error": ..., "detail": ...}.
std::string error_body(const std::string& error, const std::string& detail);

/// HTTP front end. start() binds (port 0 picks a free port) and serves on a
/// background thread; wait() blocks until stop().
class HttpServer {
 public:
  HttpServer(std::shared_ptr<const Service> service, const ServiceConfig& cfg);
  ~HttpServer();

  int start();
  void wait();
  void stop();
  int port() const { return port_; }

 private:
  std::shared_ptr<const Service> service_;
  ServiceConfig cfg_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

/// Loads the checkpoint (and identities, if configured) named by cfg.
std::shared_ptr<Service> make_service(const ServiceConfig& cfg);

}  // namespace fexgan
