#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "blox/catalog.hpp"

namespace blox {

struct LmError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Message {
  std::string role;  // "system" | "user" | "assistant"
  std::string text;
  std::optional<std::string> image_path;  // attached render, if any
};

using Conversation = std::vector<Message>;

class LmClient {
 public:
  virtual ~LmClient() = default;
  virtual std::string send(const Conversation& conversation) = 0;
};

struct TranscriptTurn {
  Conversation request;
  std::string response;
  std::string timestamp;  // RFC 3339; recorded at capture time
};

// Append-only record of one client session, hash-stable under serialization.
struct Transcript {
  std::string id;
  std::string model;
  std::vector<TranscriptTurn> turns;

  std::string to_json() const;
  static Transcript from_json(const std::string& json_text);
  static Transcript load(const std::string& path);
  void save(const std::string& path) const;
  std::string content_hash() const;
};

// Replays a recorded transcript in call order; deterministic by construction.
class ReplayClient : public LmClient {
 public:
  explicit ReplayClient(Transcript transcript);
  std::string send(const Conversation& conversation) override;
  const Transcript& transcript() const { return transcript_; }
  size_t cursor() const { return cursor_; }

 private:
  Transcript transcript_;
  size_t cursor_ = 0;
};

// Wraps another client, recording every exchange.
class RecordingClient : public LmClient {
 public:
  RecordingClient(LmClient& inner, std::string id, std::string model);
  std::string send(const Conversation& conversation) override;
  const Transcript& transcript() const { return transcript_; }

 private:
  LmClient& inner_;
  Transcript transcript_;
};

struct LiveClientConfig {
  std::string endpoint;  // e.g. https://api.example.com
  std::string model;
  std::string api_key;
  int max_retries = 3;

  // Reads BLOX_LM_ENDPOINT / BLOX_LM_MODEL / BLOX_LM_KEY.
  static std::optional<LiveClientConfig> from_env();
};

// HTTPS chat-completion client; images attached base64.
class LiveClient : public LmClient {
 public:
  explicit LiveClient(LiveClientConfig config);
  std::string send(const Conversation& conversation) override;

 private:
  LiveClientConfig config_;
};

std::string base64_encode(const std::string& data);

}  // namespace blox
