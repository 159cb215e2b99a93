#include "surgeon/lexer.hpp"

#include <algorithm>
#include <array>
#include <unordered_set>

namespace surgeon {

namespace {

// Java and C/C++ reserved words. Literal-like words (true/false/null/nullptr)
// are lexed as literals instead.
const std::unordered_set<std::string_view>& keyword_set() {
  static const std::unordered_set<std::string_view> words = {
      "abstract", "assert",    "boolean",   "break",     "byte",
      "case",     "catch",     "char",      "class",     "const",
      "continue", "default",   "do",        "double",    "else",
      "enum",     "extends",   "final",     "finally",   "float",
      "for",      "goto",      "if",        "implements", "import",
      "instanceof", "int",     "interface", "long",      "native",
      "new",      "package",   "private",   "protected", "public",
      "return",   "short",     "static",    "strictfp",  "super",
      "switch",   "synchronized", "this",   "throw",     "throws",
      "transient", "try",      "void",      "volatile",  "while",
      "var",      "auto",      "bool",      "constexpr", "delete",
      "explicit", "extern",    "friend",    "inline",    "mutable",
      "namespace", "noexcept", "operator",  "override",  "register",
      "signed",   "sizeof",    "struct",    "template",  "typedef",
      "typename", "union",     "unsigned",  "using",     "virtual",
      "static_cast", "dynamic_cast", "reinterpret_cast", "const_cast",
  };
  return words;
}

const std::unordered_set<std::string_view>& literal_words() {
  static const std::unordered_set<std::string_view> words = {
      "true", "false", "null", "nullptr"};
  return words;
}

// Longest match first.
constexpr std::array<std::string_view, 44> kOperators = {
    ">>>=", "<<=", ">>=", ">>>", "...", "->*", "::", "->", "++", "--",
    "&&",   "||",  "==",  "!=",  "<=",  ">=",  "+=", "-=", "*=", "/=",
    "%=",   "&=",  "|=",  "^=",  "<<",  ">>",  "+",  "-",  "*",  "/",
    "%",    "=",   "<",   ">",   "!",   "~",   "&",  "|",  "^",  "?",
    ":",    "@",   "#",   "\\",
};

constexpr std::string_view kPunctuation = "()[]{};,.";

bool ident_start(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_' ||
         c == '$';
}
bool ident_part(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (pos_ < src_.size()) {
      out.push_back(next());
    }
    mark_call_candidates(out);
    return out;
  }

 private:
  Token next() {
    const std::size_t start = pos_;
    const int line = line_;
    const int col = col_;
    TokenKind kind = TokenKind::punctuation;
    bool unterminated = false;
    const char c = src_[pos_];

    if (is_space(c)) {
      while (pos_ < src_.size() && is_space(src_[pos_])) advance();
      kind = TokenKind::whitespace;
    } else if (c == '/' && peek(1) == '/') {
      while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      kind = TokenKind::comment;
    } else if (c == '/' && peek(1) == '*') {
      advance(2);
      unterminated = true;
      while (pos_ < src_.size()) {
        if (src_[pos_] == '*' && peek(1) == '/') {
          advance(2);
          unterminated = false;
          break;
        }
        advance();
      }
      kind = TokenKind::comment;
    } else if (c == '"' && peek(1) == '"' && peek(2) == '"') {
      // Java text block.
      advance(3);
      unterminated = true;
      while (pos_ < src_.size()) {
        if (src_[pos_] == '\\') {
          advance(std::min<std::size_t>(2, src_.size() - pos_));
          continue;
        }
        if (src_[pos_] == '"' && peek(1) == '"' && peek(2) == '"') {
          advance(3);
          unterminated = false;
          break;
        }
        advance();
      }
      kind = TokenKind::literal;
    } else if (c == '"' || c == '\'') {
      advance();
      unterminated = true;
      while (pos_ < src_.size()) {
        const char d = src_[pos_];
        if (d == '\\') {
          advance(std::min<std::size_t>(2, src_.size() - pos_));
          continue;
        }
        advance();
        if (d == c) {
          unterminated = false;
          break;
        }
      }
      kind = TokenKind::literal;
    } else if (ident_start(c)) {
      while (pos_ < src_.size() && ident_part(src_[pos_])) advance();
      const std::string_view word = src_.substr(start, pos_ - start);
      if (literal_words().contains(word)) {
        kind = TokenKind::literal;
      } else if (keyword_set().contains(word)) {
        kind = TokenKind::keyword;
      } else {
        kind = TokenKind::identifier;
      }
    } else if (is_digit(c) || (c == '.' && is_digit(peek(1)))) {
      lex_number();
      kind = TokenKind::literal;
    } else if (auto len = operator_length(); len > 0) {
      advance(len);
      kind = TokenKind::op;
    } else if (kPunctuation.find(c) != std::string_view::npos) {
      advance();
      kind = TokenKind::punctuation;
    } else {
      // Anything else (non-ASCII bytes, stray control characters): one UTF-8
      // sequence per token.
      advance();
      while (pos_ < src_.size() &&
             (static_cast<unsigned char>(src_[pos_]) & 0xC0) == 0x80) {
        advance();
      }
      kind = TokenKind::punctuation;
    }

    Token tok;
    tok.text = std::string(src_.substr(start, pos_ - start));
    tok.kind = kind;
    tok.line = line;
    tok.col = col;
    tok.offset = start;
    tok.unterminated = unterminated;
    return tok;
  }

  void lex_number() {
    const bool hex = src_[pos_] == '0' && (peek(1) == 'x' || peek(1) == 'X');
    while (pos_ < src_.size()) {
      const char d = src_[pos_];
      if (ident_part(d) || d == '.') {
        const bool exponent =
            hex ? (d == 'p' || d == 'P') : (d == 'e' || d == 'E');
        advance();
        if (exponent && pos_ < src_.size() &&
            (src_[pos_] == '+' || src_[pos_] == '-')) {
          advance();
        }
        continue;
      }
      break;
    }
  }

  std::size_t operator_length() const {
    const std::string_view rest = src_.substr(pos_);
    for (const auto op : kOperators) {
      if (rest.starts_with(op)) return op.size();
    }
    return 0;
  }

  char peek(std::size_t ahead) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  void advance(std::size_t n = 1) {
    for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 0;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  static void mark_call_candidates(std::vector<Token>& toks) {
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (toks[i].kind != TokenKind::identifier) continue;
      std::size_t j = i + 1;
      while (j < toks.size() && toks[j].kind == TokenKind::whitespace) ++j;
      toks[i].call_candidate = j < toks.size() && toks[j].text == "(";
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 0;
};

bool word_like(std::string_view t) {
  if (t.empty()) return false;
  const char c = t.front();
  return ident_part(c) || c == '"' || c == '\'';
}

bool spaced_operator(std::string_view t) {
  static const std::unordered_set<std::string_view> ops = {
      "=",  "==", "!=", "<=", ">=", "+=", "-=", "*=",  "/=",  "%=",
      "&=", "|=", "^=", "&&", "||", "+",  "-",  "*",   "/",   "%",
      "?",  ":",  "<<", ">>", "<<=", ">>=", ">>>", ">>>=", "|", "^"};
  return ops.contains(t);
}

}  // namespace

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::identifier: return "identifier";
    case TokenKind::keyword: return "keyword";
    case TokenKind::literal: return "literal";
    case TokenKind::op: return "operator";
    case TokenKind::punctuation: return "punctuation";
    case TokenKind::comment: return "comment";
    case TokenKind::whitespace: return "whitespace";
  }
  return "?";
}

std::vector<Token> tokenize(std::string_view source) {
  return Lexer(source).run();
}

std::string detokenize(std::span<const Token> tokens) {
  std::string out;
  for (const auto& t : tokens) out += t.text;
  return out;
}

std::vector<Token> code_tokens(std::span<const Token> tokens) {
  std::vector<Token> out;
  for (const auto& t : tokens) {
    if (t.is_code()) out.push_back(t);
  }
  return out;
}

bool is_keyword(std::string_view word) { return keyword_set().contains(word); }

bool is_identifier_text(std::string_view text) {
  if (text.empty() || !ident_start(text.front())) return false;
  if (!std::all_of(text.begin(), text.end(), ident_part)) return false;
  return !keyword_set().contains(text) && !literal_words().contains(text);
}

TokenKind classify_text(std::string_view text) {
  if (text.empty()) return TokenKind::whitespace;
  if (std::all_of(text.begin(), text.end(), is_space)) {
    return TokenKind::whitespace;
  }
  if (text.starts_with("//") || text.starts_with("/*")) {
    return TokenKind::comment;
  }
  const auto toks = tokenize(text);
  return toks.empty() ? TokenKind::whitespace : toks.front().kind;
}

bool is_comparison_or_logical(std::string_view op) {
  return op == "==" || op == "!=" || op == "<" || op == ">" || op == "<=" ||
         op == ">=" || op == "&&" || op == "||" || op == "!";
}

std::string join_tokens(std::span<const std::string> texts) {
  std::string out;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const std::string& cur = texts[i];
    if (i > 0) {
      const std::string& prev = texts[i - 1];
      bool space = false;
      if (word_like(prev) && word_like(cur)) {
        space = true;
      } else if (prev == ",") {
        space = true;
      } else if (spaced_operator(cur) || spaced_operator(prev)) {
        space = true;
      } else if (cur == "(" && is_keyword(prev) && prev != "this" &&
                 prev != "super") {
        space = true;
      } else if (prev == ")" && (word_like(cur) || cur == "{")) {
        space = true;
      } else if (cur == "{") {
        space = true;
      } else {
        // Never let two tokens fuse into a different lexeme.
        const std::string joined = prev + cur;
        const auto toks = tokenize(joined);
        space = toks.size() != 2 || toks[0].text != prev;
      }
      if (space) out += ' ';
    }
    out += cur;
  }
  return out;
}

}  // namespace surgeon
