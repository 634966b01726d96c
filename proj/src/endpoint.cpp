#include "kgv/endpoint.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include "httplib.h"

namespace kgv {

namespace {

class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(const EndpointConfig& cfg) {
    // Split "scheme://host[:port]/prefix" into client origin and path prefix.
    const std::string& url = cfg.base_url;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error("base_url lacks a scheme: " + url);
    auto path_begin = url.find('/', scheme_end + 3);
    origin_ = url.substr(0, path_begin);
    if (path_begin != std::string::npos) prefix_ = url.substr(path_begin);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();

    client_ = std::make_unique<httplib::Client>(origin_);
    auto secs = static_cast<time_t>(cfg.timeout_seconds);
    auto usecs = static_cast<time_t>((cfg.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client_->set_connection_timeout(secs, usecs);
    client_->set_read_timeout(secs, usecs);
    client_->set_write_timeout(secs, usecs);
  }

  std::string post_json(const std::string& path, const std::string& body,
                        const Headers& headers) override {
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client_->Post(prefix_ + path, h, body, "application/json");
    if (!res) {
      throw TransportError(0, true, "request to " + origin_ + prefix_ + path +
                                        " failed: " + httplib::to_string(res.error()));
    }
    if (res->status >= 200 && res->status < 300) return res->body;
    bool retryable = res->status == 408 || res->status == 429 || res->status >= 500;
    throw TransportError(res->status, retryable,
                         "HTTP " + std::to_string(res->status) + " from " + origin_ + prefix_ + path);
  }

 private:
  std::string origin_;
  std::string prefix_;
  std::unique_ptr<httplib::Client> client_;
};

}  // namespace

std::unique_ptr<Transport> make_http_transport(const EndpointConfig& cfg) {
  return std::make_unique<HttpTransport>(cfg);
}

RetryOutcome post_with_retries(Transport& transport, const EndpointConfig& cfg,
                               const std::string& path, const std::string& body,
                               const Headers& headers, const SleepFn& sleep) {
  RetryOutcome outcome;
  const int max_attempts = std::max(0, cfg.max_retries) + 1;
  double delay = std::max(0.0, cfg.initial_backoff_seconds);
  const double growth = std::max(1.0, cfg.backoff_multiplier);
  int last_status = 0;
  std::string last_error;

  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    outcome.attempts = attempt;
    try {
      outcome.body = transport.post_json(path, body, headers);
      return outcome;
    } catch (const TransportError& e) {
      last_status = e.status();
      last_error = e.what();
      if (!e.retryable() || attempt == max_attempts) break;
    }
    auto wait = std::chrono::milliseconds(static_cast<long long>(std::llround(delay * 1000.0)));
    outcome.delays.push_back(wait);
    if (sleep) {
      sleep(wait);
    } else {
      std::this_thread::sleep_for(wait);
    }
    delay *= growth;
  }
  throw EndpointError(outcome.attempts, last_status,
                      last_error + " (after " + std::to_string(outcome.attempts) + " attempts)");
}

std::string read_api_key(const EndpointConfig& cfg) {
  const char* v = std::getenv(cfg.api_key_env.c_str());
  if (v == nullptr || *v == '\0')
    throw Error("environment variable " + cfg.api_key_env + " is not set");
  return v;
}

}  // namespace kgv
