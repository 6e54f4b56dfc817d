#pragma once

#include <condition_variable>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pcrd::llm {

struct ProviderConfig {
  std::string endpoint = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4o";
  double temperature = 1.0;
  int max_tokens = 4096;
  double timeout_seconds = 60.0;
  int max_attempts = 3;
  double backoff_base_seconds = 0.5;
  // Credentials come from the environment and are never persisted.
  std::string api_key_env = "PCRD_API_KEY";
  int inflight_cap = 4;

  void check() const;
};

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string complete(std::span<const ChatMessage> messages,
                               const ProviderConfig& config) = 0;
};

// OpenAI-compatible chat-completion transport with retry/backoff on
// transport faults, 429 and 5xx. 401/403 raise AuthError without retry.
class HttpProvider : public Provider {
 public:
  std::string complete(std::span<const ChatMessage> messages,
                       const ProviderConfig& config) override;
};

// Replays a directory of numbered response text files in filename order.
class MockProvider : public Provider {
 public:
  explicit MockProvider(const std::string& script_dir, size_t start_ordinal = 0);
  std::string complete(std::span<const ChatMessage> messages,
                       const ProviderConfig& config) override;
  size_t consumed() const { return ordinal_; }
  size_t total() const { return responses_.size(); }

 private:
  std::vector<std::string> responses_;
  size_t ordinal_ = 0;
};

// In-memory scripted provider with optional request-shape assertions.
class ScriptedProvider : public Provider {
 public:
  using RequestCheck = std::function<void(std::span<const ChatMessage>)>;
  void add(std::string response, RequestCheck check = nullptr);
  std::string complete(std::span<const ChatMessage> messages,
                       const ProviderConfig& config) override;
  size_t consumed() const { return ordinal_; }

 private:
  std::vector<std::pair<std::string, RequestCheck>> script_;
  size_t ordinal_ = 0;
};

struct CallRecord {
  int ordinal = 0;
  std::vector<ChatMessage> request;
  std::string response;
  bool is_generation = false;  // the response is parsed for reward programs
  std::string timestamp;
  int prompt_tokens = -1;      // -1 when the provider reports none
  int completion_tokens = -1;
};

class TranscriptStore {
 public:
  void record(CallRecord record);
  const std::vector<CallRecord>& records() const { return records_; }
  void save(const std::string& path) const;
  // Re-reads a saved transcript (used on resume); missing file is a no-op.
  void load(const std::string& path);

 private:
  std::vector<CallRecord> records_;
  mutable std::mutex mutex_;
};

// Provider wrapper: serializes the in-flight cap, counts calls, and records
// every request/response pair exactly once.
class Gateway {
 public:
  Gateway(Provider& provider, ProviderConfig config,
          int initial_total_calls = 0, int initial_generation_calls = 0);

  std::string complete(std::span<const ChatMessage> messages,
                       bool is_generation = false);

  int total_calls() const { return total_calls_; }
  int generation_calls() const { return generation_calls_; }
  TranscriptStore& transcripts() { return transcripts_; }
  const ProviderConfig& config() const { return config_; }

 private:
  Provider& provider_;
  ProviderConfig config_;
  TranscriptStore transcripts_;
  int total_calls_ = 0;
  int generation_calls_ = 0;
  int inflight_ = 0;
  std::mutex mutex_;
  std::condition_variable slot_free_;
};

// Every fenced block labeled `rdsl`, in order of appearance.
std::vector<std::string> extract_program_blocks(std::string_view response);

std::string utc_timestamp();

}  // namespace pcrd::llm
