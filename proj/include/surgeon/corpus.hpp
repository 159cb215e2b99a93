#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "surgeon/lexer.hpp"

namespace surgeon {

class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A source file with LF-normalized lines. `content()` reproduces the
/// normalized text; `crlf` remembers the on-disk newline convention so that
/// patched files are written back faithfully.
struct SourceFile {
  std::string relative_path;
  std::vector<std::string> lines;
  bool crlf = false;
  bool trailing_newline = false;
  std::vector<Token> tokens;  // lexed from content()

  std::string content() const;
  /// Content with the original newline convention restored.
  std::string on_disk_content() const;
  /// 1-based; throws std::out_of_range.
  const std::string& line(int line_no) const;
  int line_count() const { return static_cast<int>(lines.size()); }

  static SourceFile from_text(std::string relative_path, std::string_view raw);
};

struct FunctionUnit {
  std::string file;
  std::size_t file_index = 0;
  int start_line = 0;  // 1-based, inclusive
  int end_line = 0;
  std::string name;
  std::string signature_text;
  std::vector<Token> tokens;
  // Index into `tokens` of the opening body brace.
  std::size_t body_open = 0;

  int body_open_line() const { return tokens[body_open].line; }
  std::size_t maskable_count() const;
};

struct Occurrence {
  std::string file;
  int line = 0;
  int col = 0;

  friend auto operator<=>(const Occurrence&, const Occurrence&) = default;
};

struct IngestOptions {
  std::vector<std::string> include_globs{"**/*.java"};
  std::vector<std::string> exclude_globs{"**/test/**"};
};

/// Immutable after construction; safe to share across readers.
struct ProjectCorpus {
  std::filesystem::path root_path;
  std::vector<SourceFile> files;
  std::vector<FunctionUnit> functions;
  std::map<std::string, std::vector<Occurrence>> index;
  std::vector<std::string> warnings;

  const SourceFile* find_file(std::string_view relative_path) const;
  std::optional<std::size_t> file_index(std::string_view relative_path) const;
  /// Innermost function whose line range contains `line_no`.
  const FunctionUnit* function_at(std::string_view file, int line_no) const;
  /// Identifier occurrence counts over all functions.
  std::size_t frequency(std::string_view name) const;
};

/// Glob with `*`, `?` and `**` (any number of path segments).
bool glob_match(std::string_view pattern, std::string_view path);

ProjectCorpus ingest(const std::filesystem::path& root,
                     const IngestOptions& options = {});

/// Build a corpus from in-memory files (relative path, raw text). Used by
/// ingest and by the corpus cache reader.
ProjectCorpus build_corpus(std::filesystem::path root,
                           std::vector<SourceFile> files,
                           std::vector<std::string> warnings = {});

/// Functions found by signature matching plus brace matching. Nested
/// functions (anonymous classes, local classes) stay inside their outer unit.
std::vector<FunctionUnit> extract_functions(const SourceFile& file,
                                            std::size_t file_index);

/// Non-blank lines that carry at least one code token.
std::vector<std::pair<int, std::string>> extract_lines(const SourceFile& file);

/// Tokens whose first character lies on `line_no`.
std::vector<Token> tokens_on_line(const SourceFile& file, int line_no);

bool is_valid_utf8(std::string_view bytes);

/// Corpus cache: one JSON record per line; file records first, then one
/// record per function.
void write_corpus_cache(const ProjectCorpus& corpus,
                        const std::filesystem::path& path);
ProjectCorpus read_corpus_cache(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace surgeon
