#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace surgeon {

enum class TokenKind {
  identifier,
  keyword,
  literal,
  op,
  punctuation,
  comment,
  whitespace,
};

std::string_view to_string(TokenKind kind);

/// A lexeme of C-family / Java-like source. Line is 1-based, col and offset
/// are 0-based byte positions.
struct Token {
  std::string text;
  TokenKind kind = TokenKind::whitespace;
  int line = 1;
  int col = 0;
  std::size_t offset = 0;
  // Identifier immediately followed by `(`, whitespace ignored.
  bool call_candidate = false;
  // Unterminated string or comment swallowed the rest of the input.
  bool unterminated = false;

  bool is_code() const {
    return kind != TokenKind::whitespace && kind != TokenKind::comment;
  }
  bool is(std::string_view s) const { return text == s; }

  friend bool operator==(const Token&, const Token&) = default;
};

/// Lossless lexer: concatenating the token texts reproduces `source`.
/// Comments and string/char literals are single tokens; runs of whitespace
/// are single tokens.
std::vector<Token> tokenize(std::string_view source);

/// Concatenation of the token texts.
std::string detokenize(std::span<const Token> tokens);

/// Code tokens only (no whitespace, no comments), in order.
std::vector<Token> code_tokens(std::span<const Token> tokens);

/// Render bare token texts as a single line: a space is inserted only where
/// two adjacent tokens would otherwise lex differently or where conventional
/// spacing applies (after commas, around binary operators).
std::string join_tokens(std::span<const std::string> texts);

bool is_keyword(std::string_view word);
bool is_identifier_text(std::string_view text);

/// Classify a single token text without position info. Used when tokens are
/// stored as bare strings (dataset records, model streams).
TokenKind classify_text(std::string_view text);

bool is_comparison_or_logical(std::string_view op);

}  // namespace surgeon
