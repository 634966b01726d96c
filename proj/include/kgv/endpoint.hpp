#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "kgv/error.hpp"

namespace kgv {

// Remote JSON-over-HTTP endpoint settings. The API key is read from the
// environment variable named by `api_key_env` at call time, never stored.
struct EndpointConfig {
  std::string base_url;
  std::string model;
  std::string api_key_env = "TRUSTFUL_JUDGE_API_KEY";
  double timeout_seconds = 60.0;
  int max_retries = 2;
  double initial_backoff_seconds = 0.5;
  double backoff_multiplier = 2.0;
};

// A single failed exchange. `status` is the HTTP status, or 0 when no response
// arrived (connect failure, timeout).
class TransportError : public Error {
 public:
  TransportError(int status, bool retryable, const std::string& what)
      : Error(what), status_(status), retryable_(retryable) {}
  int status() const { return status_; }
  bool retryable() const { return retryable_; }

 private:
  int status_;
  bool retryable_;
};

// Raised once retries are exhausted (or on a non-retryable failure).
class EndpointError : public Error {
 public:
  EndpointError(int attempts, int last_status, const std::string& what)
      : Error(what), attempts_(attempts), last_status_(last_status) {}
  int attempts() const { return attempts_; }
  int last_status() const { return last_status_; }

 private:
  int attempts_;
  int last_status_;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

class Transport {
 public:
  virtual ~Transport() = default;
  // POSTs `body` (JSON) to `path` under the transport's base URL and returns
  // the response body. Throws TransportError.
  virtual std::string post_json(const std::string& path, const std::string& body,
                                const Headers& headers) = 0;
};

// cpp-httplib backed transport; supports http:// and https:// base URLs.
std::unique_ptr<Transport> make_http_transport(const EndpointConfig& cfg);

struct RetryOutcome {
  std::string body;
  int attempts = 0;
  std::vector<std::chrono::milliseconds> delays;  // one per retry, in order
};

using SleepFn = std::function<void(std::chrono::milliseconds)>;

// At most cfg.max_retries + 1 attempts. Delays grow geometrically and never
// decrease. Non-retryable TransportErrors stop immediately.
RetryOutcome post_with_retries(Transport& transport, const EndpointConfig& cfg,
                               const std::string& path, const std::string& body,
                               const Headers& headers, const SleepFn& sleep = {});

// Reads the API key named by cfg.api_key_env. Throws kgv::Error naming the
// variable when it is unset or empty.
std::string read_api_key(const EndpointConfig& cfg);

}  // namespace kgv
