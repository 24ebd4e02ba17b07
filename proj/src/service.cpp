#include "fexgan/service.hpp"

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include <boost/program_options.hpp>

#include <fstream>
#include <random>
#include <sstream>

#include "fexgan/checkpoint.hpp"
#include "fexgan/corpus.hpp"
#include "fexgan/errors.hpp"
#include "fexgan/image.hpp"
#include "fexgan/tensor_image.hpp"
#include "fexgan/trainer.hpp"

namespace fexgan {

using json = nlohmann::json;
namespace po = boost::program_options;

void ServiceConfig::validate() const {
  if (checkpoint.empty()) throw DomainError("service config needs a checkpoint");
  if (port < 0 || port > 65535) throw DomainError("port must lie in [0, 65535]");
  if (max_body_bytes == 0) throw DomainError("max_body_bytes must be > 0");
  if (timeout_seconds < 1) throw DomainError("timeout_seconds must be >= 1");
}

ServiceConfig ServiceConfig::from_text(const std::string& text) {
  ServiceConfig c;
  po::options_description desc;
  desc.add_options()
      ("host", po::value(&c.host))
      ("port", po::value(&c.port))
      ("checkpoint", po::value(&c.checkpoint))
      ("corpus_root", po::value(&c.corpus_root))
      ("max_body_bytes", po::value(&c.max_body_bytes))
      ("timeout_seconds", po::value(&c.timeout_seconds));
  std::istringstream in(text);
  po::variables_map vm;
  try {
    po::store(po::parse_config_file(in, desc), vm);
    po::notify(vm);
  } catch (const po::error& e) {
    throw DomainError(std::string("service config: ") + e.what());
  }
  return c;
}

ServiceConfig ServiceConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open service config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw DomainError("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out(text.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw DomainError("invalid base64");
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::vector<Identity> scan_identities(const std::filesystem::path& corpus_root) {
  std::vector<Identity> out;
  for (const auto& r : load_dataset(corpus_root)) {
    if (r.affect != Affect::neutral) continue;
    if (!out.empty() && out.back().id == r.identity_id) continue;
    out.push_back({r.identity_id, read_file_bytes(corpus_root / r.path)});
  }
  return out;
}

std::string error_body(const std::string& error, const std::string& detail) {
  return json{{"error", error}, {"detail", detail}}.dump();
}

namespace {

struct BadRequest : DomainError {
  BadRequest(const std::string& field, const std::string& what)
      : DomainError("field '" + field + "': " + what) {}
};

json parse_body(const std::string& body) {
  try {
    auto j = json::parse(body);
    if (!j.is_object()) throw BadRequest("body", "expected a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw BadRequest("body", std::string("malformed JSON: ") + e.what());
  }
}

const json& require(const json& j, const std::string& field) {
  auto it = j.find(field);
  if (it == j.end()) throw BadRequest(field, "missing");
  return *it;
}

double number_or(const json& j, const std::string& field, double fallback) {
  auto it = j.find(field);
  if (it == j.end()) return fallback;
  if (!it->is_number()) throw BadRequest(field, "expected a number");
  return it->get<double>();
}

Affect affect_field(const json& j, const std::string& field) {
  const auto& v = require(j, field);
  if (!v.is_string()) throw BadRequest(field, "expected an affect name");
  try {
    return affect_from_name(v.get<std::string>());
  } catch (const DomainError& e) {
    throw BadRequest(field, e.what());
  }
}

torch::Tensor image_field(const json& j, const std::string& field, int size) {
  const auto& v = require(j, field);
  if (!v.is_string()) throw BadRequest(field, "expected a base64 PNG string");
  try {
    const auto bytes = base64_decode(v.get<std::string>());
    return preprocess(decode_png(bytes), size).unsqueeze(0);
  } catch (const std::exception& e) {
    throw BadRequest(field, e.what());
  }
}

AffectVector blend_field(const json& j) {
  const auto& v = require(j, "blend");
  if (!v.is_object()) throw BadRequest("blend", "expected an object of affect name -> weight");
  BlendSpec spec;
  for (const auto& [name, w] : v.items()) {
    Affect a;
    try {
      a = affect_from_name(name);
    } catch (const DomainError& e) {
      throw BadRequest("blend", e.what());
    }
    if (!w.is_number()) throw BadRequest("blend." + name, "expected a number");
    spec.weights[a] = w.get<double>();
  }
  spec.lambda = number_or(j, "lambda", 0.0);
  spec.noise_scale = number_or(j, "noise_scale", spec.noise_scale);
  try {
    return blend(spec);
  } catch (const DomainError& e) {
    throw BadRequest("blend", e.what());
  }
}

std::string image_payload(const torch::Tensor& batch) {
  return base64_encode(encode_png(to_image(batch[0])));
}

torch::Tensor row(const AffectVector& v) { return affect_tensor(std::span(&v, 1)); }

std::vector<double> tensor_values(const torch::Tensor& t) {
  const auto d = t.to(torch::kFloat64).contiguous();
  return {d.data_ptr<double>(), d.data_ptr<double>() + d.numel()};
}

Response ok(const json& j) { return {200, j.dump()}; }

}  // namespace

Service::Service(std::shared_ptr<const InferenceModel> model, std::int64_t checkpoint_step,
                 std::vector<Identity> identities)
    : model_(std::move(model)), step_(checkpoint_step), identities_(std::move(identities)) {
  if (!model_) throw DomainError("service needs a model");
}

Response Service::handle(const std::string& method, const std::string& path, const std::string& body) const {
  ++served_;
  try {
    if (path == "/health" || path == "/affects" || path == "/identities") {
      if (method != "GET") return {405, error_body("method_not_allowed", path + " accepts GET")};
      if (path == "/health") return health();
      if (path == "/affects") return affects();
      return identities();
    }
    if (path == "/encode" || path == "/decode" || path == "/transform") {
      if (method != "POST") return {405, error_body("method_not_allowed", path + " accepts POST")};
      if (path == "/encode") return encode(body);
      if (path == "/decode") return decode(body);
      return transform(body);
    }
    return {404, error_body("not_found", "no endpoint " + path)};
  } catch (const std::invalid_argument& e) {
    return {400, error_body("bad_request", e.what())};
  } catch (const std::exception& e) {
    return {500, error_body("internal", e.what())};
  }
}

Response Service::health() const { return ok({{"status", "ok"}, {"checkpoint_step", step_}}); }

Response Service::affects() const {
  json list = json::array();
  for (Affect a : kAllAffects) list.push_back({{"id", affect_id(a)}, {"name", std::string(affect_name(a))}});
  return ok({{"affects", list}});
}

Response Service::identities() const {
  json list = json::array();
  for (const auto& id : identities_) {
    list.push_back({{"id", id.id}, {"thumbnail", base64_encode(id.thumbnail_png)}});
  }
  return ok({{"identities", list}});
}

Response Service::encode(const std::string& body) const {
  const auto j = parse_body(body);
  const auto img = image_field(j, "image", model_->image_size());
  const Affect a = affect_field(j, "affect");
  const auto dist = model_->encode(img, row(one_hot(a)));
  return ok({{"mu", tensor_values(dist.mu)}, {"log_var", tensor_values(dist.log_var)}});
}

Response Service::decode(const std::string& body) const {
  const auto j = parse_body(body);
  const auto& zj = require(j, "z");
  const int n = model_->latent_dim();
  if (!zj.is_array()) throw BadRequest("z", "expected an array of " + std::to_string(n) + " numbers");
  if (static_cast<int>(zj.size()) != n) {
    throw BadRequest("z", "expected " + std::to_string(n) + " values, got " + std::to_string(zj.size()));
  }
  std::vector<float> z;
  for (const auto& v : zj) {
    if (!v.is_number()) throw BadRequest("z", "entries must be numbers");
    z.push_back(v.get<float>());
  }
  const auto target = blend_field(j);
  const auto zt = torch::tensor(z).reshape({1, n});
  return ok({{"image", image_payload(model_->decode(zt, row(target)))}});
}

Response Service::transform(const std::string& body) const {
  const auto j = parse_body(body);
  const auto img = image_field(j, "image", model_->image_size());
  const Affect source = affect_field(j, "source_affect");
  const auto target = blend_field(j);
  bool deterministic = true;
  if (auto it = j.find("deterministic"); it != j.end()) {
    if (!it->is_boolean()) throw BadRequest("deterministic", "expected true or false");
    deterministic = it->get<bool>();
  }
  std::optional<torch::Tensor> eps;
  if (!deterministic) {
    std::uint64_t seed = 0;
    if (auto it = j.find("seed"); it != j.end()) {
      if (!it->is_number_integer()) throw BadRequest("seed", "expected an integer");
      seed = it->get<std::uint64_t>();
    }
    Rng rng(seed);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    std::vector<float> e(static_cast<std::size_t>(model_->latent_dim()));
    for (auto& v : e) v = normal(rng);
    eps = torch::tensor(e).reshape({1, model_->latent_dim()});
  }
  const auto out = model_->transform(img, row(one_hot(source)), row(target), eps);
  return ok({{"image", image_payload(out)}});
}

HttpServer::HttpServer(std::shared_ptr<const Service> service, const ServiceConfig& cfg)
    : service_(std::move(service)), cfg_(cfg), server_(std::make_unique<httplib::Server>()) {
  server_->set_payload_max_length(cfg_.max_body_bytes);
  server_->set_read_timeout(cfg_.timeout_seconds, 0);
  server_->set_write_timeout(cfg_.timeout_seconds, 0);

  auto dispatch = [svc = service_](const httplib::Request& req, httplib::Response& res) {
    const auto r = svc->handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server_->Get("/.*", dispatch);
  server_->Post("/.*", dispatch);
  server_->Put("/.*", dispatch);
  server_->Delete("/.*", dispatch);
  server_->set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    std::string error = "http_error";
    std::string detail = "request failed with status " + std::to_string(res.status);
    if (res.status == 413) {
      error = "payload_too_large";
      detail = "request body exceeds the configured limit";
    } else if (res.status == 404) {
      error = "not_found";
      detail = "no endpoint " + req.path;
    }
    res.set_content(error_body(error, detail), "application/json");
    return httplib::Server::HandlerResponse::Handled;
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start() {
  if (cfg_.port == 0) {
    port_ = server_->bind_to_any_port(cfg_.host);
  } else {
    port_ = server_->bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1;
  }
  if (port_ < 0) throw IoError("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void HttpServer::wait() {
  if (thread_.joinable()) thread_.join();
}

void HttpServer::stop() {
  if (server_) server_->stop();
  wait();
}

std::shared_ptr<Service> make_service(const ServiceConfig& cfg) {
  cfg.validate();
  const auto data = read_checkpoint(cfg.checkpoint);
  auto [gen, disc] = load_models(data);
  const auto step = data.get("meta.step").item<int64_t>();
  auto model = std::make_shared<NetworkModel>(gen, disc, step);
  std::vector<Identity> ids;
  if (!cfg.corpus_root.empty()) ids = scan_identities(cfg.corpus_root);
  return std::make_shared<Service>(model, step, std::move(ids));
}

}  // namespace fexgan
