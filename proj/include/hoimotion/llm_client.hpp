#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>

namespace hoimo::annotation {

// Raised when a backend cannot produce a completion; carries the prompt so
// callers can retry idempotently.
class ClientError : public std::runtime_error {
 public:
  ClientError(const std::string& what, std::string prompt)
      : std::runtime_error(what), prompt(std::move(prompt)) {}
  std::string prompt;
};

class LanguageModelClient {
 public:
  virtual ~LanguageModelClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
  virtual std::string name() const = 0;
};

// Deterministic rule-based backend: parses the structured prompt and writes
// the sentence(s) a cooperative model would return. Default everywhere.
class TemplateClient : public LanguageModelClient {
 public:
  std::string complete(const std::string& prompt) override;
  std::string name() const override { return "template"; }
};

// Replays completions recorded as JSON lines {"prompt_hash", "text"}.
class RecordedClient : public LanguageModelClient {
 public:
  explicit RecordedClient(const std::filesystem::path& fixture);
  std::string complete(const std::string& prompt) override;
  std::string name() const override { return "recorded"; }

 private:
  std::map<std::string, std::string> responses_;
};

// Tags each prompt with its hash; used to trace plumbing in pipeline tests.
class EchoClient : public LanguageModelClient {
 public:
  std::string complete(const std::string& prompt) override;
  std::string name() const override { return "echo"; }
};

// POSTs {"prompt": ...} to HOIMO_LLM_ENDPOINT (optional HOIMO_LLM_TOKEN,
// HOIMO_LLM_TIMEOUT_S) and expects {"text": ...} back.
class HttpClient : public LanguageModelClient {
 public:
  HttpClient();  // reads env vars, throws ClientError when unset
  HttpClient(std::string endpoint, std::string token, int timeout_s);
  std::string complete(const std::string& prompt) override;
  std::string name() const override { return "http"; }

 private:
  std::string endpoint_;
  std::string token_;
  int timeout_s_ = 30;
};

// Factory for config values: template | recorded:<path> | echo | http.
std::unique_ptr<LanguageModelClient> make_client(const std::string& descriptor);

}  // namespace hoimo::annotation
