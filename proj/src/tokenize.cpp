#include "stagefix/tokenize.hpp"

namespace stagefix {

namespace {

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c >= 0x80;
}

}  // namespace

std::string TokenStream::join() const {
    std::string out;
    for (const auto& t : tokens_) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

std::vector<TokenSpan> token_spans(std::string_view text) {
    std::vector<TokenSpan> spans;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_space(c)) {
            ++i;
        } else if (is_word(c)) {
            std::size_t j = i + 1;
            while (j < n && is_word(static_cast<unsigned char>(text[j]))) ++j;
            spans.push_back({i, j});
            i = j;
        } else {
            spans.push_back({i, i + 1});
            ++i;
        }
    }
    return spans;
}

TokenStream tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    for (const auto& s : token_spans(text)) {
        tokens.emplace_back(text.substr(s.begin, s.end - s.begin));
    }
    return TokenStream(std::move(tokens));
}

std::string truncate_tokens(std::string_view text, std::size_t max_tokens) {
    const auto spans = token_spans(text);
    if (spans.size() <= max_tokens) return std::string(text);
    if (max_tokens == 0) return {};
    return std::string(text.substr(0, spans[max_tokens - 1].end));
}

std::string normalize_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char ch : text) {
        if (is_space(static_cast<unsigned char>(ch))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(ch);
    }
    return out;
}

}  // namespace stagefix
