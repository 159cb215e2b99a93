#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "surgeon/corpus.hpp"

namespace surgeon {

// ---------------------------------------------------------------------------
// Line similarity

/// Edit distance (insert/delete/substitute, unit costs) over bytes.
std::size_t levenshtein_distance(std::string_view a, std::string_view b);

/// Trim and collapse whitespace runs to a single space.
std::string normalize_whitespace(std::string_view s);

/// 1 - d / max(|a|, |b|) on whitespace-normalized inputs; 1.0 when both are
/// empty after normalization.
double levenshtein_ratio(std::string_view a, std::string_view b);

struct ScoredLine {
  std::string file;
  int line_no = 0;
  std::string text;
  double similarity = 0.0;
};

/// Descending similarity; equal scores keep ascending (file, line) order.
std::vector<ScoredLine> rank_lines(std::string_view buggy_line,
                                   std::vector<ScoredLine> lines);

// ---------------------------------------------------------------------------
// Identifiers

enum class IdentifierKind { method, variable };
std::string_view to_string(IdentifierKind kind);

struct LineIdentifier {
  std::string name;
  IdentifierKind kind = IdentifierKind::variable;

  friend bool operator==(const LineIdentifier&, const LineIdentifier&) = default;
};

/// Identifier tokens of a line, deduplicated (first occurrence wins);
/// kind is `method` iff the token is a call candidate.
std::vector<LineIdentifier> extract_ids(std::string_view line);

/// Built-in stoplist (shipped as data/stoplist.txt).
const std::set<std::string>& default_stoplist();
std::set<std::string> load_stoplist(const std::filesystem::path& path);

struct FilterConfig {
  std::set<std::string> stoplist = default_stoplist();
  std::size_t min_length = 4;  // names shorter than this are dropped
  std::size_t top_frequent = 50;
};

/// The `top_frequent` most frequent identifiers of the corpus (ties broken
/// by name).
std::set<std::string> frequent_identifiers(const ProjectCorpus& corpus, std::size_t top);

/// Drops stoplisted names, names of length <= 3 and corpus-frequent names.
std::vector<LineIdentifier> simple_filter(const std::vector<LineIdentifier>& ids,
                                          const FilterConfig& cfg,
                                          const std::set<std::string>& frequent);

// ---------------------------------------------------------------------------
// Declarations and scope

struct Declaration {
  std::string name;
  std::string type;  // empty for constructors / untyped
  IdentifierKind kind = IdentifierKind::variable;
  std::string file;
  int line = 0;
  std::string owner;  // enclosing class, empty at file level
};

struct ClassInfo {
  std::string name;
  std::string file;
  int start_line = 0;
  int end_line = 0;
  std::vector<std::string> bases;
  std::vector<Declaration> fields;
  std::vector<Declaration> methods;
};

struct FileOutline {
  std::string file;
  std::vector<ClassInfo> classes;
  std::vector<std::string> imports;
};

/// Light declaration-site analysis of every file: classes with their fields
/// and methods, parameters and locals per function.
class ScopeIndex {
 public:
  explicit ScopeIndex(const ProjectCorpus& corpus);

  const std::vector<FileOutline>& outlines() const { return outlines_; }
  /// All declarations in corpus order (file, then position).
  const std::vector<Declaration>& declarations() const { return declarations_; }
  const ClassInfo* find_class(std::string_view name) const;
  /// Parameters and locals of function `fn_index`, in declaration order.
  const std::vector<Declaration>& function_scope(std::size_t fn_index) const;
  /// Innermost class containing the line.
  const ClassInfo* enclosing_class(std::string_view file, int line) const;

 private:
  std::vector<FileOutline> outlines_;
  std::vector<Declaration> declarations_;
  std::vector<std::vector<Declaration>> function_scopes_;
};

class RetrievalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Names in scope at the buggy line: enclosing-class fields and methods
/// (including those of known base classes), parameters, locals declared on
/// earlier lines, members reachable through a typed receiver, imported names.
std::set<std::string> find_accessible_ids(const ProjectCorpus& corpus,
                                          const ScopeIndex& scope,
                                          std::string_view file, int buggy_line_no);

struct TypeInfo {
  std::string type;
  bool ambiguous = false;
};

/// First declaration in corpus order wins; ambiguous when later declarations
/// of the same name and kind disagree on the type. Untyped names are absent.
std::map<std::string, TypeInfo> find_type_info(const ScopeIndex& scope,
                                               const std::vector<LineIdentifier>& names);

// ---------------------------------------------------------------------------
// Ranking and prompts

struct RankedIdentifier {
  std::string name;
  IdentifierKind kind = IdentifierKind::variable;
  std::optional<std::string> type_info;
  bool type_ambiguous = false;
  double similarity = 0.0;
  std::string donor_file;
  int donor_line = 0;
  std::size_t rank = 0;  // 1-based

  /// `(Type) name()` / `(Type) name`, or without the type prefix when
  /// unresolved.
  std::string rendered() const;
};

struct Prompt {
  std::string text;
  std::vector<RankedIdentifier> identifiers;
};

enum class PromptMode { separate, combined };
enum class RetrievalScope { file, project };

std::string render_prompt(std::string_view rendered_identifiers);

/// Top-n prompts: one per identifier (separate) or a single prompt listing
/// all of them comma-separated (combined).
std::vector<Prompt> build_prompts(const std::vector<RankedIdentifier>& ranked,
                                  std::size_t n, PromptMode mode = PromptMode::separate);

/// Identifier names a prompt asks for, in order.
std::vector<std::string> prompt_identifiers(std::string_view prompt_text);

struct RetrievalConfig {
  FilterConfig filter;
  RetrievalScope scope = RetrievalScope::file;
  bool with_types = true;
};

struct RetrievalResult {
  std::vector<ScoredLine> ranked_lines;
  std::vector<RankedIdentifier> candidates;  // after simple filter, before scope
  std::set<std::string> accessible;
  std::vector<RankedIdentifier> identifiers;  // final ranked list
};

/// Full relevant-identifier retrieval for a buggy line.
RetrievalResult retrieve(const ProjectCorpus& corpus, const ScopeIndex& scope,
                         std::string_view file, int buggy_line_no,
                         const RetrievalConfig& cfg = {});

}  // namespace surgeon
