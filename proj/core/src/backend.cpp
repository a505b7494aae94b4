// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedpipe/backend.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "pedpipe/errors.hpp"

namespace pedpipe {

using nlohmann::json;

std::string EchoBackend::complete(const std::string& prompt, const SamplingParams&) { return prompt; }

std::string prompt_hash(const std::string& prompt) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(prompt.data(), prompt.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw BackendError("sha256 failed");
  }
  static const char* kHex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

ReplayBackend::ReplayBackend(std::map<std::string, std::string> by_hash) : by_hash_(std::move(by_hash)) {}

ReplayBackend ReplayBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open fixture " + path.string());
  std::map<std::string, std::string> entries;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      entries[j.at("prompt_hash").get<std::string>()] = j.at("completion").get<std::string>();
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return ReplayBackend(std::move(entries));
}

std::string ReplayBackend::complete(const std::string& prompt, const SamplingParams&) {
  const std::string h = prompt_hash(prompt);
  auto it = by_hash_.find(h);
  if (it == by_hash_.end()) throw BackendError("no fixture for prompt hash " + h);
  return it->second;
}

std::string RecordingBackend::complete(const std::string& prompt, const SamplingParams& params) {
  std::string out = inner_.complete(prompt, params);
  std::lock_guard lock(mutex_);
  entries_.emplace_back(prompt_hash(prompt), out);
  return out;
}

void RecordingBackend::save_fixture(const std::filesystem::path& path) const {
  std::lock_guard lock(mutex_);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write fixture " + path.string());
  for (const auto& [hash, completion] : entries_) out << json{{"prompt_hash", hash}, {"completion", completion}}.dump() << '\n';
}

RateLimiter::RateLimiter(double calls_per_second)
    : interval_(calls_per_second > 0
                    ? std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                          std::chrono::duration<double>(1.0 / calls_per_second))
                    : std::chrono::steady_clock::duration::zero()),
      next_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

RemoteBackend::RemoteBackend(RemoteConfig config)
    : config_(std::move(config)), limiter_(config_.rate_limit_per_second) {
  if (config_.endpoint.empty()) throw ArgumentError("remote backend: endpoint is not configured");
  if (config_.model.empty()) throw ArgumentError("remote backend: model is not configured");
  const char* key = std::getenv("PEDPIPE_API_KEY");
  if (!key || !*key) throw BackendError("remote backend: PEDPIPE_API_KEY is not set");
  api_key_ = key;
  const auto scheme = config_.endpoint.find("://");
  const auto slash = config_.endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  origin_ = config_.endpoint.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : config_.endpoint.substr(slash);
}

std::string RemoteBackend::post_once(const std::string& body) {
  httplib::Client client(origin_);
  const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_bearer_token_auth(api_key_);
  auto res = client.Post(path_, body, "application/json");
  if (!res) throw BackendError("request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw BackendError("HTTP " + std::to_string(res->status));
  const json j = json::parse(res->body);
  return j.at("choices").at(0).at("message").at("content").get<std::string>();
}

std::string RemoteBackend::complete(const std::string& prompt, const SamplingParams& params) {
  const json body = {{"model", config_.model},
                     {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                     {"temperature", params.temperature},
                     {"max_tokens", params.max_tokens}};
  const std::string payload = body.dump();
  double backoff = config_.initial_backoff_seconds;
  std::string last_error;
  for (std::size_t attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= 2;
    }
    limiter_.acquire();
    try {
      return post_once(payload);
    } catch (const std::exception& e) {
      last_error = e.what();
    }
  }
  throw BackendError("remote backend gave up after " + std::to_string(config_.max_retries + 1) +
                     " attempts: " + last_error);
}

}  // namespace pedpipe
