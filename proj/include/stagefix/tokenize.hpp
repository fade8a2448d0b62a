#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace stagefix {

/// Ordered sequence of code tokens. Tokens are non-empty and never contain
/// whitespace.
class TokenStream {
  public:
    TokenStream() = default;
    explicit TokenStream(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {}

    [[nodiscard]] std::size_t size() const noexcept { return tokens_.size(); }
    [[nodiscard]] bool empty() const noexcept { return tokens_.empty(); }
    [[nodiscard]] const std::string& operator[](std::size_t i) const { return tokens_[i]; }
    [[nodiscard]] auto begin() const noexcept { return tokens_.begin(); }
    [[nodiscard]] auto end() const noexcept { return tokens_.end(); }
    [[nodiscard]] const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    /// Tokens joined with single spaces.
    [[nodiscard]] std::string join() const;

    friend bool operator==(const TokenStream&, const TokenStream&) = default;

  private:
    std::vector<std::string> tokens_;
};

/// Splits on whitespace, then severs every character that is not
/// alphanumeric or '_' into its own token. Bytes >= 0x80 count as word
/// characters so UTF-8 sequences stay intact.
TokenStream tokenize(std::string_view text);

/// Byte span [begin, end) of each token inside the original text.
struct TokenSpan {
    std::size_t begin;
    std::size_t end;
};
std::vector<TokenSpan> token_spans(std::string_view text);

/// Prefix of `text` holding at most `max_tokens` tokens, cut right after the
/// last kept token. Text with fewer tokens is returned unchanged.
std::string truncate_tokens(std::string_view text, std::size_t max_tokens);

/// Collapses whitespace runs to one space and trims both ends.
std::string normalize_whitespace(std::string_view text);

}  // namespace stagefix
