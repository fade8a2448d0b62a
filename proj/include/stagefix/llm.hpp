#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace stagefix {

enum class AgentRole { Tester, Developer, Reviewer };

const char* to_string(AgentRole role);
AgentRole role_from_string(const std::string& name);

struct ChatRequest {
    AgentRole agent_role = AgentRole::Developer;
    std::string system_instruction;
    std::string user_prompt;
    double temperature = 0.0;
    int max_tokens = 1;
    std::string model_name;

    friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

struct TokenUsage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
    friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

struct ChatResponse {
    std::string text;
    std::optional<TokenUsage> usage;
    std::string backend;

    friend bool operator==(const ChatResponse&, const ChatResponse&) = default;
};

void to_json(nlohmann::json& j, const ChatRequest& r);
void from_json(const nlohmann::json& j, ChatRequest& r);
void to_json(nlohmann::json& j, const ChatResponse& r);
void from_json(const nlohmann::json& j, ChatResponse& r);

class LlmError : public std::runtime_error {
  public:
    enum class Kind { NetworkError, RateLimited, MalformedResponse, ReplayMiss, Config };
    LlmError(Kind kind, const std::string& detail);
    [[nodiscard]] Kind kind() const noexcept { return kind_; }

  private:
    Kind kind_;
};

/// SHA-256 hex over (agent_role, system_instruction, user_prompt,
/// temperature, sample_index) in a length-prefixed canonical encoding.
std::string digest(const ChatRequest& request, std::size_t sample_index);

/// Chat-completion backend. Implementations must be safe to call from
/// several threads.
class Backend {
  public:
    virtual ~Backend() = default;
    virtual ChatResponse complete(const ChatRequest& request, std::size_t sample_index) = 0;
};

struct TranscriptEntry {
    std::string digest;
    std::size_t sample_index = 0;
    ChatRequest request;
    ChatResponse response;
};

void to_json(nlohmann::json& j, const TranscriptEntry& e);
void from_json(const nlohmann::json& j, TranscriptEntry& e);

/// Ordered log of request/response pairs keyed by digest.
class TranscriptStore {
  public:
    /// Appends. Lookups resolve to the first entry recorded for a digest.
    void add(TranscriptEntry entry);
    [[nodiscard]] const TranscriptEntry* find(const std::string& digest) const;
    [[nodiscard]] const std::vector<TranscriptEntry>& entries() const noexcept { return entries_; }
    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }

    [[nodiscard]] std::string to_jsonl() const;
    void load_jsonl(const std::string& text, const std::string& origin = {});
    void load_file(const std::filesystem::path& path);
    /// Every *.jsonl file below `dir`, in path order.
    void load_directory(const std::filesystem::path& dir);
    void save(const std::filesystem::path& path) const;

  private:
    std::vector<TranscriptEntry> entries_;
    std::map<std::string, std::size_t> by_digest_;
};

/// Serves recorded responses; never touches the network.
class ReplayBackend final : public Backend {
  public:
    explicit ReplayBackend(TranscriptStore store) : store_(std::move(store)) {}
    ChatResponse complete(const ChatRequest& request, std::size_t sample_index) override;
    [[nodiscard]] const TranscriptStore& store() const noexcept { return store_; }

  private:
    TranscriptStore store_;
};

/// Delegates to another backend and appends one entry per call.
class RecordingBackend final : public Backend {
  public:
    explicit RecordingBackend(std::shared_ptr<Backend> inner) : inner_(std::move(inner)) {}
    ChatResponse complete(const ChatRequest& request, std::size_t sample_index) override;
    [[nodiscard]] TranscriptStore snapshot() const;

  private:
    std::shared_ptr<Backend> inner_;
    mutable std::mutex mu_;
    TranscriptStore store_;
};

}  // namespace stagefix
