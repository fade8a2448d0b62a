#include "stagefix/llm.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

namespace stagefix {

using json = nlohmann::json;

const char* to_string(AgentRole role) {
    switch (role) {
        case AgentRole::Tester: return "tester";
        case AgentRole::Developer: return "developer";
        case AgentRole::Reviewer: return "reviewer";
    }
    return "unknown";
}

AgentRole role_from_string(const std::string& name) {
    for (auto r : {AgentRole::Tester, AgentRole::Developer, AgentRole::Reviewer}) {
        if (name == to_string(r)) return r;
    }
    throw std::invalid_argument("unknown agent role '" + name + "'");
}

namespace {

const char* kind_name(LlmError::Kind kind) {
    switch (kind) {
        case LlmError::Kind::NetworkError: return "NetworkError";
        case LlmError::Kind::RateLimited: return "RateLimited";
        case LlmError::Kind::MalformedResponse: return "MalformedResponse";
        case LlmError::Kind::ReplayMiss: return "ReplayMiss";
        case LlmError::Kind::Config: return "Config";
    }
    return "LlmError";
}

void put_field(std::string& out, std::string_view name, std::string_view value) {
    out += name;
    out += ':';
    out += std::to_string(value.size());
    out += ':';
    out += value;
    out += '\n';
}

}  // namespace

LlmError::LlmError(Kind kind, const std::string& detail)
    : std::runtime_error(std::string(kind_name(kind)) + ": " + detail), kind_(kind) {}

std::string digest(const ChatRequest& request, std::size_t sample_index) {
    char temp[64];
    std::snprintf(temp, sizeof temp, "%.6f", request.temperature);
    std::string canonical;
    put_field(canonical, "agent_role", to_string(request.agent_role));
    put_field(canonical, "system_instruction", request.system_instruction);
    put_field(canonical, "user_prompt", request.user_prompt);
    put_field(canonical, "temperature", temp);
    put_field(canonical, "sample_index", std::to_string(sample_index));

    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(canonical.data(), canonical.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xF]);
    }
    return out;
}

void to_json(json& j, const ChatRequest& r) {
    j = json{{"agent_role", to_string(r.agent_role)},
             {"system_instruction", r.system_instruction},
             {"user_prompt", r.user_prompt},
             {"temperature", r.temperature},
             {"max_tokens", r.max_tokens},
             {"model_name", r.model_name}};
}

void from_json(const json& j, ChatRequest& r) {
    r.agent_role = role_from_string(j.at("agent_role").get<std::string>());
    r.system_instruction = j.at("system_instruction").get<std::string>();
    r.user_prompt = j.at("user_prompt").get<std::string>();
    r.temperature = j.at("temperature").get<double>();
    r.max_tokens = j.at("max_tokens").get<int>();
    r.model_name = j.value("model_name", std::string{});
}

void to_json(json& j, const ChatResponse& r) {
    j = json{{"text", r.text}, {"backend", r.backend}};
    if (r.usage) {
        j["usage"] = {{"prompt_tokens", r.usage->prompt_tokens},
                      {"completion_tokens", r.usage->completion_tokens}};
    }
}

void from_json(const json& j, ChatResponse& r) {
    r.text = j.at("text").get<std::string>();
    r.backend = j.value("backend", std::string{});
    r.usage.reset();
    if (auto it = j.find("usage"); it != j.end() && it->is_object()) {
        r.usage = TokenUsage{it->value("prompt_tokens", 0L), it->value("completion_tokens", 0L)};
    }
}

void to_json(json& j, const TranscriptEntry& e) {
    json request = e.request;
    request["sample_index"] = e.sample_index;
    j = json{{"digest", e.digest}, {"request", std::move(request)}, {"response", e.response}};
}

void from_json(const json& j, TranscriptEntry& e) {
    e.digest = j.at("digest").get<std::string>();
    e.request = j.at("request").get<ChatRequest>();
    e.sample_index = j.at("request").value("sample_index", std::size_t{0});
    e.response = j.at("response").get<ChatResponse>();
}

void TranscriptStore::add(TranscriptEntry entry) {
    by_digest_.emplace(entry.digest, entries_.size());
    entries_.push_back(std::move(entry));
}

const TranscriptEntry* TranscriptStore::find(const std::string& digest) const {
    auto it = by_digest_.find(digest);
    return it == by_digest_.end() ? nullptr : &entries_[it->second];
}

std::string TranscriptStore::to_jsonl() const {
    std::string out;
    for (const auto& e : entries_) {
        out += json(e).dump();
        out.push_back('\n');
    }
    return out;
}

void TranscriptStore::load_jsonl(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            add(json::parse(line).get<TranscriptEntry>());
        } catch (const std::exception& e) {
            throw LlmError(LlmError::Kind::Config,
                           (origin.empty() ? "transcript" : origin) + ":" + std::to_string(n) + ": " + e.what());
        }
    }
}

void TranscriptStore::load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LlmError(LlmError::Kind::Config, "cannot open transcript " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    load_jsonl(buf.str(), path.string());
}

void TranscriptStore::load_directory(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw LlmError(LlmError::Kind::Config, "transcript directory missing: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) load_file(f);
}

void TranscriptStore::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw LlmError(LlmError::Kind::Config, "cannot write transcript " + path.string());
    out << to_jsonl();
}

ChatResponse ReplayBackend::complete(const ChatRequest& request, std::size_t sample_index) {
    const auto d = digest(request, sample_index);
    const auto* entry = store_.find(d);
    if (!entry) {
        throw LlmError(LlmError::Kind::ReplayMiss, "no recorded response for digest " + d + " (" +
                                                       to_string(request.agent_role) + ", sample " +
                                                       std::to_string(sample_index) + ")");
    }
    return entry->response;
}

ChatResponse RecordingBackend::complete(const ChatRequest& request, std::size_t sample_index) {
    auto response = inner_->complete(request, sample_index);
    std::lock_guard lock(mu_);
    store_.add({digest(request, sample_index), sample_index, request, response});
    return response;
}

TranscriptStore RecordingBackend::snapshot() const {
    std::lock_guard lock(mu_);
    return store_;
}

}  // namespace stagefix
