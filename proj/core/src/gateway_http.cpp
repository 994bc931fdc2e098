#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ragrec/error.hpp"
#include "ragrec/gateway.hpp"

namespace ragrec {

using json = nlohmann::json;

namespace {

int approx_token_count(const std::string& text) {
  std::istringstream in(text);
  std::string w;
  int n = 0;
  while (in >> w) ++n;
  return n;
}

httplib::Headers auth_headers(const HttpBackendConfig& cfg) {
  httplib::Headers h;
  if (!cfg.api_key.empty()) h.emplace("Authorization", "Bearer " + cfg.api_key);
  return h;
}

// POST with retry on transport failure and 5xx; 4xx is not retried.
json post_json(const HttpBackendConfig& cfg, const std::string& path, const json& payload) {
  if (cfg.base_url.empty()) throw BackendError("http backend has no base_url configured");

  std::string last_error;
  for (int attempt = 1; attempt <= std::max(1, cfg.max_attempts); ++attempt) {
    if (attempt > 1) {
      const double sleep_s = cfg.backoff_base_s * std::pow(2.0, attempt - 2);
      std::this_thread::sleep_for(std::chrono::duration<double>(sleep_s));
    }
    httplib::Client client(cfg.base_url);
    client.set_connection_timeout(cfg.timeout_s, 0);
    client.set_read_timeout(cfg.timeout_s, 0);
    client.set_write_timeout(cfg.timeout_s, 0);

    auto res = client.Post(path, auth_headers(cfg), payload.dump(), "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server error " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw BackendError("POST " + path + " returned " + std::to_string(res->status) + ": " +
                         res->body);
    }
    try {
      return json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw BackendError("malformed backend JSON from " + path + ": " + e.what());
    }
  }
  throw BackendError("POST " + path + " failed after " + std::to_string(cfg.max_attempts) +
                     " attempts (" + last_error + ")");
}

}  // namespace

ChatResponse HttpChatBackend::chat(const ChatRequest& req) {
  json messages = json::array();
  for (const auto& m : req.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  json payload{{"model", cfg_.model},
               {"messages", messages},
               {"temperature", req.temperature},
               {"max_tokens", req.max_tokens},
               {"n", req.n_samples}};
  if (req.seed) payload["seed"] = *req.seed;

  json body = post_json(cfg_, "/v1/chat/completions", payload);
  if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty()) {
    throw BackendError("chat response has no choices");
  }

  ChatResponse resp;
  for (const auto& choice : body["choices"]) {
    if (!choice.contains("message") || !choice["message"].contains("content")) {
      throw BackendError("chat choice has no message content");
    }
    std::string text = choice["message"]["content"].is_null()
                           ? std::string()
                           : choice["message"]["content"].get<std::string>();
    // The wire format reports only aggregate usage, so per-sample counts
    // are approximated by whitespace tokens.
    resp.token_counts.push_back(approx_token_count(text));
    resp.texts.push_back(std::move(text));
  }
  if (static_cast<int>(resp.texts.size()) != req.n_samples) {
    throw BackendError("chat returned " + std::to_string(resp.texts.size()) +
                       " choices, requested " + std::to_string(req.n_samples));
  }
  return resp;
}

std::vector<float> HttpEmbedBackend::embed(const std::string& text) {
  if (text.empty()) throw DataError("cannot embed empty text");
  json payload{{"model", cfg_.model}, {"input", text}};
  json body = post_json(cfg_, "/v1/embeddings", payload);
  if (!body.contains("data") || !body["data"].is_array() || body["data"].empty() ||
      !body["data"][0].contains("embedding")) {
    throw BackendError("embeddings response has no data[0].embedding");
  }
  std::vector<float> vec;
  for (const auto& v : body["data"][0]["embedding"]) vec.push_back(v.get<float>());
  if (dim_ == 0) {
    dim_ = static_cast<int>(vec.size());
  } else if (static_cast<int>(vec.size()) != dim_) {
    throw BackendError("embedding dimension mismatch: got " + std::to_string(vec.size()) +
                       ", configured " + std::to_string(dim_));
  }
  return vec;
}

}  // namespace ragrec
