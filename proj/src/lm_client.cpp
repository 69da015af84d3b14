#include "blox/lm_client.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace blox {

using nlohmann::json;

namespace {

std::string now_rfc3339() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
  return buf;
}

json conversation_to_json(const Conversation& conversation) {
  json messages = json::array();
  for (const Message& m : conversation) {
    json msg = {{"role", m.role}, {"text", m.text}};
    if (m.image_path) msg["image"] = *m.image_path;
    messages.push_back(std::move(msg));
  }
  return messages;
}

Conversation conversation_from_json(const json& messages) {
  Conversation out;
  for (const auto& msg : messages) {
    Message m;
    m.role = msg.value("role", std::string());
    m.text = msg.value("text", std::string());
    if (msg.contains("image")) m.image_path = msg["image"].get<std::string>();
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace

std::string Transcript::to_json() const {
  json turns_json = json::array();
  for (const TranscriptTurn& turn : turns) {
    turns_json.push_back({
        {"request", conversation_to_json(turn.request)},
        {"response", turn.response},
        {"timestamp", turn.timestamp},
    });
  }
  json doc = {{"schema_version", 1},
              {"id", id},
              {"model", model},
              {"turns", turns_json}};
  return doc.dump(2) + "\n";
}

Transcript Transcript::from_json(const std::string& json_text) {
  json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ParseError("malformed transcript document");
  }
  Transcript t;
  t.id = doc.value("id", std::string());
  t.model = doc.value("model", std::string());
  for (const auto& turn : doc.value("turns", json::array())) {
    TranscriptTurn tt;
    tt.request = conversation_from_json(turn.value("request", json::array()));
    tt.response = turn.value("response", std::string());
    tt.timestamp = turn.value("timestamp", std::string());
    t.turns.push_back(std::move(tt));
  }
  return t;
}

Transcript Transcript::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open transcript: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return from_json(text.str());
}

void Transcript::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write transcript: " + path);
  out << to_json();
}

std::string Transcript::content_hash() const { return fnv1a64_hex(to_json()); }

ReplayClient::ReplayClient(Transcript transcript)
    : transcript_(std::move(transcript)) {}

std::string ReplayClient::send(const Conversation&) {
  if (cursor_ >= transcript_.turns.size()) {
    throw LmError("replay transcript '" + transcript_.id + "' exhausted after " +
                  std::to_string(transcript_.turns.size()) + " turns");
  }
  return transcript_.turns[cursor_++].response;
}

RecordingClient::RecordingClient(LmClient& inner, std::string id,
                                 std::string model)
    : inner_(inner) {
  transcript_.id = std::move(id);
  transcript_.model = std::move(model);
}

std::string RecordingClient::send(const Conversation& conversation) {
  std::string response = inner_.send(conversation);
  transcript_.turns.push_back({conversation, response, now_rfc3339()});
  return response;
}

std::optional<LiveClientConfig> LiveClientConfig::from_env() {
  const char* endpoint = std::getenv("BLOX_LM_ENDPOINT");
  const char* model = std::getenv("BLOX_LM_MODEL");
  const char* key = std::getenv("BLOX_LM_KEY");
  if (endpoint == nullptr || model == nullptr || key == nullptr) {
    return std::nullopt;
  }
  LiveClientConfig config;
  config.endpoint = endpoint;
  config.model = model;
  config.api_key = key;
  return config;
}

LiveClient::LiveClient(LiveClientConfig config) : config_(std::move(config)) {}

std::string LiveClient::send(const Conversation& conversation) {
  json content_messages = json::array();
  for (const Message& m : conversation) {
    json content = json::array();
    if (!m.text.empty()) {
      content.push_back({{"type", "text"}, {"text", m.text}});
    }
    if (m.image_path) {
      std::ifstream in(*m.image_path, std::ios::binary);
      if (!in) throw LmError("cannot read image: " + *m.image_path);
      std::ostringstream bytes;
      bytes << in.rdbuf();
      content.push_back(
          {{"type", "image_url"},
           {"image_url",
            {{"url", "data:image/png;base64," + base64_encode(bytes.str())}}}});
    }
    content_messages.push_back({{"role", m.role}, {"content", content}});
  }
  const json body = {{"model", config_.model}, {"messages", content_messages}};

  std::string last_error;
  for (int attempt = 0; attempt < config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(250 << attempt));
    }
    httplib::Client client(config_.endpoint);
    client.set_read_timeout(120, 0);
    httplib::Headers headers = {
        {"Authorization", "Bearer " + config_.api_key}};
    auto res = client.Post("/v1/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res) {
      last_error = "transport error";
      continue;
    }
    if (res->status != 200) {
      last_error = "http status " + std::to_string(res->status);
      continue;
    }
    json doc = json::parse(res->body, nullptr, false);
    if (doc.is_discarded()) {
      last_error = "malformed response body";
      continue;
    }
    try {
      return doc.at("choices").at(0).at("message").at("content")
          .get<std::string>();
    } catch (const json::exception&) {
      last_error = "unexpected response shape";
    }
  }
  throw LmError("exhausted retries: " + last_error);
}

std::string base64_encode(const std::string& data) {
  static const char* alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  size_t i = 0;
  while (i + 2 < data.size()) {
    const unsigned v = (static_cast<unsigned char>(data[i]) << 16) |
                       (static_cast<unsigned char>(data[i + 1]) << 8) |
                       static_cast<unsigned char>(data[i + 2]);
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(alphabet[(v >> 6) & 63]);
    out.push_back(alphabet[v & 63]);
    i += 3;
  }
  if (i + 1 == data.size()) {
    const unsigned v = static_cast<unsigned char>(data[i]) << 16;
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out += "==";
  } else if (i + 2 == data.size()) {
    const unsigned v = (static_cast<unsigned char>(data[i]) << 16) |
                       (static_cast<unsigned char>(data[i + 1]) << 8);
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(alphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

}  // namespace blox
