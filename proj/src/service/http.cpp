#include "hitop/service/http.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "hitop/common/error.hpp"

namespace hitop::service {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                const std::string* field = nullptr) {
  json body = {{"code", code}, {"message", message}};
  if (field) body["field"] = *field;
  send_json(res, status, body);
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  return json::parse(req.body);  // parse_error is reported as bad-request
}

std::string who_of(const httplib::Request& req, const json& body) {
  if (body.is_object() && body.contains("who") && body["who"].is_string()) return body["who"].get<std::string>();
  if (req.has_header("X-Hitop-User")) return req.get_header_value("X-Hitop-User");
  return "anonymous";
}

// Maps library errors onto the error document.
template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ValidationError& e) {
      const std::string field = e.field();
      send_error(res, 422, "validation", e.what(), field.empty() ? nullptr : &field);
    } catch (const NotFoundError& e) {
      send_error(res, 404, "not-found", e.what());
    } catch (const ConflictError& e) {
      send_error(res, 409, "conflict", e.what());
    } catch (const DependencyError& e) {
      send_error(res, 424, "dependency", e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "bad-request", std::string("malformed JSON: ") + e.what());
    } catch (const ContractError& e) {
      send_error(res, 400, "bad-request", e.what());
    } catch (const ParameterError& e) {
      send_error(res, 400, "bad-request", e.what());
    } catch (const std::exception& e) {
      spdlog::error("{} {}: {}", req.method, req.path, e.what());
      send_error(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

struct HttpApi::Impl {
  SessionStore& store;
  httplib::Server server;

  explicit Impl(SessionStore& s) : store(s) {
    server.Post("/api/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      const std::string id = store.create(body, who_of(req, body));
      send_json(res, 201, {{"id", id}, {"phase", "created"}});
    }));

    server.Get(R"(/api/sessions/([0-9a-f]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, store.status(req.matches[1]));
    }));

    server.Post(R"(/api/sessions/([0-9a-f]+)/steps)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const json body = parse_body(req);
                  if (!body.is_object() || !body.contains("step") || !body["step"].is_number_integer())
                    throw ValidationError("step", "must be 1 or 3");
                  std::optional<int> iterations;
                  if (body.contains("iterations") && !body["iterations"].is_null()) {
                    if (!body["iterations"].is_number_integer())
                      throw ValidationError("iterations", "must be an integer");
                    iterations = body["iterations"].get<int>();
                  }
                  const auto started = store.start_step(req.matches[1], body["step"].get<int>(), iterations,
                                                        who_of(req, body));
                  send_json(res, 202,
                            {{"step", started.step},
                             {"iterations", started.iterations},
                             {"warnings", started.warnings},
                             {"phase", started.step == 1 ? "step1-running" : "step3-running"}});
                }));

    server.Get(R"(/api/sessions/([0-9a-f]+)/recommendation)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 if (!req.has_param("criterion")) throw ValidationError("criterion", "must be longest or node");
                 bool cached = false;
                 const auto rec = store.recommendation(req.matches[1], req.get_param_value("criterion"), &cached);
                 json body = rec.to_json();
                 body["cached"] = cached;
                 send_json(res, 200, body);
               }));

    server.Post(R"(/api/sessions/([0-9a-f]+)/region)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const json body = parse_body(req);
                  if (!body.is_object() || !body.contains("ellipse")) throw ValidationError("ellipse", "is required");
                  if (!body.contains("rmin") || !body["rmin"].is_number()) throw ValidationError("rmin", "must be a number");
                  const EllipseRegion ellipse = ellipse_from_json(body["ellipse"]);
                  const auto result =
                      store.submit_region(req.matches[1], ellipse, body["rmin"].get<double>(), who_of(req, body));
                  send_json(res, 200,
                            {{"inside", result.inside},
                             {"changed", result.changed},
                             {"noop", result.noop},
                             {"warnings", result.warnings},
                             {"rmin", result.rmin_summary}});
                }));

    server.Get(R"(/api/sessions/([0-9a-f]+)/export/([^/]+))",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const Artifact a = store.export_artifact(req.matches[1], req.matches[2]);
                 res.status = 200;
                 res.set_header("Content-Disposition", "attachment; filename=\"" + a.filename + "\"");
                 res.set_content(std::string(a.bytes.begin(), a.bytes.end()), a.content_type);
               }));

    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (!res.body.empty()) return;
      if (res.status == 404) send_error(res, 404, "not-found", "no route for " + req.method + " " + req.path);
    });
  }
};

HttpApi::HttpApi(SessionStore& store) : impl_(std::make_unique<Impl>(store)) {}
HttpApi::~HttpApi() { stop(); }

bool HttpApi::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }
int HttpApi::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool HttpApi::listen_after_bind() { return impl_->server.listen_after_bind(); }
void HttpApi::wait_until_ready() const { impl_->server.wait_until_ready(); }
void HttpApi::stop() { impl_->server.stop(); }

}  // namespace hitop::service
