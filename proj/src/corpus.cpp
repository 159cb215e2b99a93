#include "surgeon/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace surgeon {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool is_valid_utf8(std::string_view bytes) {
  std::size_t i = 0;
  while (i < bytes.size()) {
    const auto c = static_cast<unsigned char>(bytes[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= bytes.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto d = static_cast<unsigned char>(bytes[i + k]);
      if ((d & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (d & 0x3F);
    }
    // Overlong encodings and surrogates.
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) ||
        (extra == 3 && (cp < 0x10000 || cp > 0x10FFFF)) ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += extra + 1;
  }
  return true;
}

// ---------------------------------------------------------------------------
// SourceFile

SourceFile SourceFile::from_text(std::string relative_path,
                                 std::string_view raw) {
  SourceFile f;
  f.relative_path = std::move(relative_path);
  f.crlf = raw.find("\r\n") != std::string_view::npos;
  std::string text;
  text.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == '\r' && i + 1 < raw.size() && raw[i + 1] == '\n') continue;
    text += raw[i];
  }
  f.trailing_newline = !text.empty() && text.back() == '\n';
  if (f.trailing_newline) text.pop_back();
  if (!text.empty() || !raw.empty()) {
    std::size_t start = 0;
    while (true) {
      const auto nl = text.find('\n', start);
      if (nl == std::string::npos) {
        f.lines.push_back(text.substr(start));
        break;
      }
      f.lines.push_back(text.substr(start, nl - start));
      start = nl + 1;
    }
  }
  f.tokens = tokenize(f.content());
  return f;
}

std::string SourceFile::content() const {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i > 0) out += '\n';
    out += lines[i];
  }
  if (trailing_newline) out += '\n';
  return out;
}

std::string SourceFile::on_disk_content() const {
  if (!crlf) return content();
  std::string out;
  for (const char c : content()) {
    if (c == '\n') out += '\r';
    out += c;
  }
  return out;
}

const std::string& SourceFile::line(int line_no) const {
  if (line_no < 1 || line_no > line_count()) {
    throw std::out_of_range("line " + std::to_string(line_no) +
                            " outside " + relative_path);
  }
  return lines[static_cast<std::size_t>(line_no - 1)];
}

std::size_t FunctionUnit::maskable_count() const {
  return static_cast<std::size_t>(
      std::count_if(tokens.begin(), tokens.end(),
                    [](const Token& t) { return t.is_code(); }));
}

// ---------------------------------------------------------------------------
// Corpus lookups

const SourceFile* ProjectCorpus::find_file(
    std::string_view relative_path) const {
  const auto idx = file_index(relative_path);
  return idx ? &files[*idx] : nullptr;
}

std::optional<std::size_t> ProjectCorpus::file_index(
    std::string_view relative_path) const {
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (files[i].relative_path == relative_path) return i;
  }
  return std::nullopt;
}

const FunctionUnit* ProjectCorpus::function_at(std::string_view file,
                                               int line_no) const {
  const FunctionUnit* best = nullptr;
  for (const auto& fn : functions) {
    if (fn.file != file || line_no < fn.start_line || line_no > fn.end_line) {
      continue;
    }
    if (!best || fn.end_line - fn.start_line < best->end_line - best->start_line) {
      best = &fn;
    }
  }
  return best;
}

std::size_t ProjectCorpus::frequency(std::string_view name) const {
  const auto it = index.find(std::string(name));
  return it == index.end() ? 0 : it->second.size();
}

// ---------------------------------------------------------------------------
// Globbing

namespace {

bool glob_segment(std::string_view pat, std::string_view s) {
  // Single path segment, `*` and `?` only.
  std::size_t p = 0, i = 0, star = std::string_view::npos, mark = 0;
  while (i < s.size()) {
    if (p < pat.size() && (pat[p] == '?' || pat[p] == s[i])) {
      ++p;
      ++i;
    } else if (p < pat.size() && pat[p] == '*') {
      star = p++;
      mark = i;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      i = ++mark;
    } else {
      return false;
    }
  }
  while (p < pat.size() && pat[p] == '*') ++p;
  return p == pat.size();
}

std::vector<std::string_view> split_path(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto slash = s.find('/', start);
    if (slash == std::string_view::npos) {
      parts.push_back(s.substr(start));
      break;
    }
    parts.push_back(s.substr(start, slash - start));
    start = slash + 1;
  }
  return parts;
}

bool glob_parts(std::span<const std::string_view> pat,
                std::span<const std::string_view> path) {
  if (pat.empty()) return path.empty();
  if (pat.front() == "**") {
    for (std::size_t skip = 0; skip <= path.size(); ++skip) {
      if (glob_parts(pat.subspan(1), path.subspan(skip))) return true;
    }
    return false;
  }
  if (path.empty()) return false;
  return glob_segment(pat.front(), path.front()) &&
         glob_parts(pat.subspan(1), path.subspan(1));
}

}  // namespace

bool glob_match(std::string_view pattern, std::string_view path) {
  const auto pat = split_path(pattern);
  const auto parts = split_path(path);
  return glob_parts(pat, parts);
}

// ---------------------------------------------------------------------------
// Function extraction

namespace {

const std::unordered_set<std::string_view>& non_function_words() {
  static const std::unordered_set<std::string_view> words = {
      "if",    "for",   "while",  "switch", "catch", "synchronized",
      "return", "new",  "sizeof", "do",     "else",  "try",
      "finally", "throw", "case", "assert", "super", "this"};
  return words;
}

const std::unordered_set<std::string_view>& trailing_qualifiers() {
  static const std::unordered_set<std::string_view> words = {
      "const", "override", "noexcept", "final", "mutable", "volatile"};
  return words;
}

struct CodeView {
  const std::vector<Token>& all;
  std::vector<std::size_t> idx;  // indices of code tokens in `all`

  explicit CodeView(const std::vector<Token>& tokens) : all(tokens) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i].is_code()) idx.push_back(i);
    }
  }
  const Token& at(std::size_t k) const { return all[idx[k]]; }
  std::size_t size() const { return idx.size(); }
};

std::optional<std::size_t> match_backward(const CodeView& cv, std::size_t close,
                                          std::string_view open_text,
                                          std::string_view close_text) {
  int depth = 0;
  for (std::size_t k = close + 1; k-- > 0;) {
    const auto& t = cv.at(k).text;
    if (t == close_text) ++depth;
    if (t == open_text && --depth == 0) return k;
  }
  return std::nullopt;
}

std::optional<std::size_t> match_forward(const CodeView& cv, std::size_t open,
                                         std::string_view open_text,
                                         std::string_view close_text) {
  int depth = 0;
  for (std::size_t k = open; k < cv.size(); ++k) {
    const auto& t = cv.at(k).text;
    if (t == open_text) ++depth;
    if (t == close_text && --depth == 0) return k;
  }
  return std::nullopt;
}

bool preprocessor_line(const CodeView& cv, std::size_t k) {
  // First code token on the line of token k is `#`.
  const int line = cv.at(k).line;
  std::size_t j = k;
  while (j > 0 && cv.at(j - 1).line == line) --j;
  return cv.at(j).text == "#";
}

// If the code token at `open` (a `{`) starts a function body, returns the
// code-index of the function name.
std::optional<std::size_t> function_name_before(const CodeView& cv,
                                                std::size_t open) {
  if (open == 0) return std::nullopt;
  std::size_t k = open - 1;
  // Skip trailing qualifiers and a `throws A, B` clause.
  for (int guard = 0; guard < 24; ++guard) {
    const auto& t = cv.at(k);
    if (t.text == ")") break;
    const bool skippable = trailing_qualifiers().contains(t.text) ||
                           t.text == "throws" ||
                           t.kind == TokenKind::identifier || t.text == "," ||
                           t.text == ".";
    if (!skippable || k == 0) return std::nullopt;
    --k;
  }
  if (cv.at(k).text != ")") return std::nullopt;
  auto paren = match_backward(cv, k, "(", ")");
  if (!paren || *paren == 0) return std::nullopt;
  std::size_t name = *paren - 1;
  // C++ constructor initializer list: `Foo(..) : a(x), b(y) {`.
  if (name > 0 && cv.at(name).kind == TokenKind::identifier) {
    const auto& before = cv.at(name - 1).text;
    if (before == ":" || before == ",") {
      std::size_t j = name - 1;
      while (j > 0 && cv.at(j).text != ":") --j;
      if (j == 0 || cv.at(j - 1).text != ")") return std::nullopt;
      paren = match_backward(cv, j - 1, "(", ")");
      if (!paren || *paren == 0) return std::nullopt;
      name = *paren - 1;
    }
  }
  const auto& nt = cv.at(name);
  if (nt.kind != TokenKind::identifier) return std::nullopt;
  if (non_function_words().contains(nt.text)) return std::nullopt;
  if (name > 0) {
    const auto& prev = cv.at(name - 1).text;
    if (prev == "new" || prev == "." || prev == "->" || prev == "=" ||
        prev == "(" || prev == "," || prev == "return") {
      return std::nullopt;
    }
  }
  return name;
}

std::size_t declaration_start(const CodeView& cv, std::size_t name) {
  std::size_t k = name;
  while (k > 0) {
    const auto& prev = cv.at(k - 1);
    if (prev.text == ";" || prev.text == "{" || prev.text == "}" ||
        prev.text == ":" || prev.text == ")") {
      break;
    }
    if (prev.line != cv.at(k).line && preprocessor_line(cv, k - 1)) break;
    --k;
  }
  return k;
}

std::string collapse_ws(std::string_view s) {
  std::string out;
  bool ws = false;
  for (const char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ws = !out.empty();
    } else {
      if (ws) out += ' ';
      ws = false;
      out += c;
    }
  }
  return out;
}

}  // namespace

std::vector<FunctionUnit> extract_functions(const SourceFile& file,
                                            std::size_t file_index) {
  std::vector<FunctionUnit> out;
  const CodeView cv(file.tokens);
  const std::string content = file.content();
  std::size_t k = 0;
  while (k < cv.size()) {
    if (cv.at(k).text != "{") {
      ++k;
      continue;
    }
    const auto name = function_name_before(cv, k);
    if (!name) {
      ++k;
      continue;
    }
    const auto close = match_forward(cv, k, "{", "}");
    if (!close) break;  // unbalanced tail
    const std::size_t start = declaration_start(cv, *name);
    const std::size_t first_tok = cv.idx[start];
    const std::size_t open_tok = cv.idx[k];
    const std::size_t last_tok = cv.idx[*close];

    FunctionUnit fn;
    fn.file = file.relative_path;
    fn.file_index = file_index;
    fn.name = cv.at(*name).text;
    fn.start_line = file.tokens[first_tok].line;
    fn.end_line = file.tokens[last_tok].line;
    fn.tokens.assign(file.tokens.begin() + static_cast<std::ptrdiff_t>(first_tok),
                     file.tokens.begin() + static_cast<std::ptrdiff_t>(last_tok) + 1);
    fn.body_open = open_tok - first_tok;
    const auto sig_begin = file.tokens[first_tok].offset;
    const auto sig_end = file.tokens[open_tok].offset;
    fn.signature_text =
        collapse_ws(std::string_view(content).substr(sig_begin, sig_end - sig_begin));
    out.push_back(std::move(fn));
    k = *close + 1;
  }
  return out;
}

std::vector<Token> tokens_on_line(const SourceFile& file, int line_no) {
  std::vector<Token> out;
  for (const auto& t : file.tokens) {
    if (t.line == line_no) out.push_back(t);
    if (t.line > line_no) break;
  }
  return out;
}

std::vector<std::pair<int, std::string>> extract_lines(const SourceFile& file) {
  std::vector<char> has_code(file.lines.size() + 1, 0);
  for (const auto& t : file.tokens) {
    if (!t.is_code()) continue;
    const auto span_lines = std::count(t.text.begin(), t.text.end(), '\n');
    for (int l = t.line; l <= t.line + span_lines; ++l) {
      if (l >= 1 && l <= file.line_count()) has_code[static_cast<std::size_t>(l)] = 1;
    }
  }
  std::vector<std::pair<int, std::string>> out;
  for (int l = 1; l <= file.line_count(); ++l) {
    if (has_code[static_cast<std::size_t>(l)]) out.emplace_back(l, file.line(l));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ingestion

ProjectCorpus build_corpus(fs::path root, std::vector<SourceFile> files,
                           std::vector<std::string> warnings) {
  std::sort(files.begin(), files.end(),
            [](const SourceFile& a, const SourceFile& b) {
              return a.relative_path < b.relative_path;
            });
  ProjectCorpus corpus;
  corpus.root_path = std::move(root);
  corpus.files = std::move(files);
  corpus.warnings = std::move(warnings);
  for (std::size_t i = 0; i < corpus.files.size(); ++i) {
    auto fns = extract_functions(corpus.files[i], i);
    for (auto& fn : fns) corpus.functions.push_back(std::move(fn));
  }
  for (const auto& fn : corpus.functions) {
    for (const auto& t : fn.tokens) {
      if (t.kind == TokenKind::identifier) {
        corpus.index[t.text].push_back({fn.file, t.line, t.col});
      }
    }
  }
  return corpus;
}

ProjectCorpus ingest(const fs::path& root, const IngestOptions& options) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw IngestError("cannot read project root: " + root.string());
  }
  std::vector<SourceFile> files;
  std::vector<std::string> warnings;
  fs::recursive_directory_iterator it(
      root, fs::directory_options::skip_permission_denied, ec);
  if (ec) throw IngestError("cannot read project root: " + root.string());
  for (const auto& entry : it) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), root).generic_string();
    const auto matches = [&](const std::vector<std::string>& globs) {
      return std::any_of(globs.begin(), globs.end(), [&](const auto& g) {
        return glob_match(g, rel);
      });
    };
    if (!matches(options.include_globs) || matches(options.exclude_globs)) {
      continue;
    }
    std::ifstream in(entry.path(), std::ios::binary);
    if (!in) {
      warnings.push_back("unreadable file skipped: " + rel);
      continue;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string raw = buf.str();
    if (!is_valid_utf8(raw)) {
      warnings.push_back("non-UTF-8 file skipped: " + rel);
      continue;
    }
    files.push_back(SourceFile::from_text(rel, raw));
  }
  return build_corpus(root, std::move(files), std::move(warnings));
}

// ---------------------------------------------------------------------------
// Cache

void write_corpus_cache(const ProjectCorpus& corpus, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestError("cannot write corpus cache: " + path.string());
  {
    ordered_json header;
    header["type"] = "corpus";
    header["version"] = 1;
    header["root"] = corpus.root_path.generic_string();
    header["warnings"] = corpus.warnings;
    out << header.dump() << '\n';
  }
  for (const auto& f : corpus.files) {
    ordered_json rec;
    rec["type"] = "file";
    rec["path"] = f.relative_path;
    rec["crlf"] = f.crlf;
    rec["content"] = f.content();
    out << rec.dump() << '\n';
  }
  for (const auto& fn : corpus.functions) {
    ordered_json rec;
    rec["type"] = "function";
    rec["file"] = fn.file;
    rec["name"] = fn.name;
    rec["start_line"] = fn.start_line;
    rec["end_line"] = fn.end_line;
    rec["signature"] = fn.signature_text;
    out << rec.dump() << '\n';
  }
}

ProjectCorpus read_corpus_cache(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot read corpus cache: " + path.string());
  std::string line;
  int line_no = 0;
  fs::path root;
  std::vector<std::string> warnings;
  std::vector<SourceFile> files;
  std::size_t function_records = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json rec;
    try {
      rec = ordered_json::parse(line);
      const std::string type = rec.at("type");
      if (type == "corpus") {
        root = rec.at("root").get<std::string>();
        warnings = rec.at("warnings").get<std::vector<std::string>>();
      } else if (type == "file") {
        std::string text = rec.at("content");
        if (rec.at("crlf").get<bool>()) {
          std::string crlf;
          for (const char c : text) {
            if (c == '\n') crlf += '\r';
            crlf += c;
          }
          text = std::move(crlf);
        }
        files.push_back(SourceFile::from_text(rec.at("path"), text));
      } else if (type == "function") {
        ++function_records;
      }
    } catch (const nlohmann::json::exception& e) {
      throw IngestError("corpus cache " + path.string() + ": malformed record at line " +
                        std::to_string(line_no) + ": " + e.what());
    }
  }
  auto corpus = build_corpus(root, std::move(files), std::move(warnings));
  if (corpus.functions.size() != function_records) {
    throw IngestError("corpus cache " + path.string() +
                      ": function records do not match file contents");
  }
  return corpus;
}

}  // namespace surgeon
