#pragma once

#include <memory>
#include <string>

#include "hitop/service/session.hpp"

namespace hitop::service {

/// JSON API over a SessionStore. Errors are {code, message, field?} with
/// 400 bad-request, 404 not-found, 409 conflict, 422 validation, 424 dependency.
class HttpApi {
 public:
  explicit HttpApi(SessionStore& store);
  ~HttpApi();
  HttpApi(const HttpApi&) = delete;
  HttpApi& operator=(const HttpApi&) = delete;

  /// Blocks until stop(). Returns false when the port cannot be bound.
  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port and returns it (-1 on failure); serve with listen_after_bind().
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void wait_until_ready() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hitop::service
