#include "pcrd/gateway.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "pcrd/errors.hpp"

namespace pcrd::llm {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void ProviderConfig::check() const {
  if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  if (!(timeout_seconds > 0.0)) throw ConfigError("timeout must be positive");
  if (inflight_cap < 1) throw ConfigError("inflight_cap must be >= 1");
}

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------- http -----

std::string HttpProvider::complete(std::span<const ChatMessage> messages,
                                   const ProviderConfig& config) {
  config.check();
  if (messages.empty()) throw GatewayError("empty message list");
  const char* key = std::getenv(config.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw AuthError("credential variable '" + config.api_key_env +
                    "' is not set");
  }

  json body;
  body["model"] = config.model;
  body["temperature"] = config.temperature;
  body["max_tokens"] = config.max_tokens;
  body["messages"] = json::array();
  for (const auto& m : messages) {
    body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  }
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
    if (attempt > 1) {
      double seconds =
          config.backoff_base_seconds * std::pow(2.0, attempt - 2);
      std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
    }
    httplib::Client client(config.endpoint);
    client.set_connection_timeout(std::chrono::duration<double>(
        config.timeout_seconds));
    client.set_read_timeout(std::chrono::duration<double>(
        config.timeout_seconds));
    httplib::Headers headers{
        {"Authorization", std::string("Bearer ") + key}};
    auto res = client.Post(config.path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403) {
      throw AuthError("credential rejected with status " +
                      std::to_string(res->status));
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "retryable status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw GatewayError("request failed with status " +
                         std::to_string(res->status) + ": " + res->body);
    }
    try {
      json reply = json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content")
          .get<std::string>();
    } catch (const json::exception& e) {
      throw GatewayError(std::string("malformed completion response: ") +
                         e.what());
    }
  }
  throw GatewayError("exhausted " + std::to_string(config.max_attempts) +
                     " attempts; last error: " + last_error);
}

// ---------------------------------------------------------------- mocks ----

MockProvider::MockProvider(const std::string& script_dir,
                           size_t start_ordinal) {
  if (!fs::is_directory(script_dir)) {
    throw ConfigError("mock script directory not found: " + script_dir);
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(script_dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    responses_.push_back(ss.str());
  }
  if (start_ordinal > responses_.size()) {
    throw ConfigError("mock start ordinal past the end of the script");
  }
  ordinal_ = start_ordinal;
}

std::string MockProvider::complete(std::span<const ChatMessage> messages,
                                   const ProviderConfig& config) {
  (void)config;
  if (messages.empty()) throw GatewayError("empty message list");
  if (ordinal_ >= responses_.size()) {
    throw GatewayError("mock script exhausted after " +
                       std::to_string(responses_.size()) + " responses");
  }
  return responses_[ordinal_++];
}

void ScriptedProvider::add(std::string response, RequestCheck check) {
  script_.emplace_back(std::move(response), std::move(check));
}

std::string ScriptedProvider::complete(std::span<const ChatMessage> messages,
                                       const ProviderConfig& config) {
  (void)config;
  if (ordinal_ >= script_.size()) {
    throw GatewayError("scripted provider exhausted after " +
                       std::to_string(script_.size()) + " responses");
  }
  auto& [response, check] = script_[ordinal_++];
  if (check) check(messages);
  return response;
}

// ----------------------------------------------------------- transcripts ---

void TranscriptStore::record(CallRecord record) {
  std::lock_guard<std::mutex> lock(mutex_);
  records_.push_back(std::move(record));
}

void TranscriptStore::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) return;
  ordered_json doc = ordered_json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) return;
  std::lock_guard<std::mutex> lock(mutex_);
  records_.clear();
  for (const auto& call : doc) {
    CallRecord r;
    r.ordinal = call.value("ordinal", 0);
    r.timestamp = call.value("timestamp", "");
    r.is_generation = call.value("is_generation", false);
    for (const auto& m : call.value("request", ordered_json::array())) {
      r.request.push_back({m.value("role", ""), m.value("content", "")});
    }
    r.response = call.value("response", "");
    r.prompt_tokens = call.value("prompt_tokens", -1);
    r.completion_tokens = call.value("completion_tokens", -1);
    records_.push_back(std::move(r));
  }
}

void TranscriptStore::save(const std::string& path) const {
  std::lock_guard<std::mutex> lock(mutex_);
  ordered_json doc = ordered_json::array();
  for (const auto& r : records_) {
    ordered_json call;
    call["ordinal"] = r.ordinal;
    call["timestamp"] = r.timestamp;
    call["is_generation"] = r.is_generation;
    call["request"] = ordered_json::array();
    for (const auto& m : r.request) {
      call["request"].push_back({{"role", m.role}, {"content", m.content}});
    }
    call["response"] = r.response;
    if (r.prompt_tokens >= 0) call["prompt_tokens"] = r.prompt_tokens;
    if (r.completion_tokens >= 0) {
      call["completion_tokens"] = r.completion_tokens;
    }
    doc.push_back(std::move(call));
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write transcript: " + path);
  out << doc.dump(2) << "\n";
}

// ---------------------------------------------------------------- gateway --

Gateway::Gateway(Provider& provider, ProviderConfig config,
                 int initial_total_calls, int initial_generation_calls)
    : provider_(provider),
      config_(std::move(config)),
      total_calls_(initial_total_calls),
      generation_calls_(initial_generation_calls) {
  config_.check();
}

std::string Gateway::complete(std::span<const ChatMessage> messages,
                              bool is_generation) {
  if (messages.empty()) throw GatewayError("empty message list");
  {
    std::unique_lock<std::mutex> lock(mutex_);
    slot_free_.wait(lock, [this] { return inflight_ < config_.inflight_cap; });
    ++inflight_;
  }
  std::string response;
  try {
    response = provider_.complete(messages, config_);
  } catch (...) {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      --inflight_;
    }
    slot_free_.notify_one();
    throw;
  }
  CallRecord record;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    --inflight_;
    record.ordinal = total_calls_++;
    if (is_generation) ++generation_calls_;
  }
  slot_free_.notify_one();
  record.request.assign(messages.begin(), messages.end());
  record.response = response;
  record.is_generation = is_generation;
  record.timestamp = utc_timestamp();
  transcripts_.record(std::move(record));
  return response;
}

// ------------------------------------------------------------- extraction --

namespace {

std::string_view trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> extract_program_blocks(std::string_view response) {
  std::vector<std::string> blocks;
  std::string current;
  bool in_block = false;
  size_t pos = 0;
  while (pos <= response.size()) {
    size_t nl = response.find('\n', pos);
    std::string_view line = response.substr(
        pos, nl == std::string_view::npos ? response.size() - pos : nl - pos);
    std::string_view t = trim(line);
    if (!in_block) {
      if (t.rfind("```", 0) == 0 && trim(t.substr(3)) == "rdsl") {
        in_block = true;
        current.clear();
      }
    } else {
      if (t == "```") {
        in_block = false;
        blocks.push_back(current);
      } else {
        if (!current.empty()) current += '\n';
        current += std::string(line);
      }
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return blocks;
}

}  // namespace pcrd::llm
