// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace pedpipe {

struct SamplingParams {
  double temperature = 0.7;
  std::size_t max_tokens = 1024;
};

/// Text-in/text-out completion service. Implementations throw BackendError.
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual std::string complete(const std::string& prompt, const SamplingParams& params) = 0;
  virtual std::string name() const = 0;
};

/// Returns the prompt unchanged.
class EchoBackend : public GenerationBackend {
 public:
  std::string complete(const std::string& prompt, const SamplingParams& params) override;
  std::string name() const override { return "echo"; }
};

/// Lowercase hex SHA-256 of the prompt bytes.
std::string prompt_hash(const std::string& prompt);

/// Serves completions from fixture lines {"prompt_hash", "completion"}.
class ReplayBackend : public GenerationBackend {
 public:
  explicit ReplayBackend(std::map<std::string, std::string> by_hash);
  static ReplayBackend from_file(const std::filesystem::path& path);

  std::string complete(const std::string& prompt, const SamplingParams& params) override;
  std::string name() const override { return "replay"; }
  std::size_t size() const { return by_hash_.size(); }

 private:
  std::map<std::string, std::string> by_hash_;
};

/// Forwards to another backend and keeps every (prompt hash, completion)
/// pair so a fixture file can be written afterwards.
class RecordingBackend : public GenerationBackend {
 public:
  explicit RecordingBackend(GenerationBackend& inner) : inner_(inner) {}
  std::string complete(const std::string& prompt, const SamplingParams& params) override;
  std::string name() const override { return "recording(" + inner_.name() + ")"; }
  void save_fixture(const std::filesystem::path& path) const;

 private:
  GenerationBackend& inner_;
  mutable std::mutex mutex_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Spaces call starts at least 1/calls_per_second apart across threads.
class RateLimiter {
 public:
  explicit RateLimiter(double calls_per_second);
  void acquire();

 private:
  std::chrono::steady_clock::duration interval_;
  std::chrono::steady_clock::time_point next_;
  std::mutex mutex_;
};

struct RemoteConfig {
  std::string endpoint;  // e.g. https://host/v1/chat/completions
  std::string model;
  double timeout_seconds = 60;
  std::size_t max_retries = 3;
  double initial_backoff_seconds = 1.0;
  double rate_limit_per_second = 1.0;
};

/// Chat-completions style HTTP client. The API key is read from
/// PEDPIPE_API_KEY when the backend is constructed.
class RemoteBackend : public GenerationBackend {
 public:
  explicit RemoteBackend(RemoteConfig config);
  std::string complete(const std::string& prompt, const SamplingParams& params) override;
  std::string name() const override { return "remote"; }

 private:
  std::string post_once(const std::string& body);

  RemoteConfig config_;
  std::string api_key_;
  std::string origin_, path_;
  RateLimiter limiter_;
};

}  // namespace pedpipe
