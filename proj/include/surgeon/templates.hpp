#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "surgeon/lexer.hpp"

namespace surgeon {

inline constexpr std::string_view kSpanMarker = "<SPAN>";
inline constexpr std::size_t kDefaultContextLimit = 512;

enum class TemplateFamily { complete, partial, templated };

enum class TemplateVariant {
  replace_line,
  insert_before,
  insert_after,
  keep_prefix,
  keep_suffix,
  method_name,
  method_args,
  bool_expr_or_op,
};

std::string_view to_string(TemplateFamily family);
std::string_view to_string(TemplateVariant variant);
TemplateFamily family_of(TemplateVariant variant);

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One concrete way of masking a buggy line. The masked region is the code
/// token range [span_begin, span_end) of the line and the byte range
/// [byte_begin, byte_end) of the line text; insert variants mask nothing.
struct RepairTemplate {
  TemplateVariant variant = TemplateVariant::replace_line;
  // keep_prefix/keep_suffix: number of kept tokens; method/bool variants:
  // instance index on the line, left to right.
  int param = 0;
  // bool_expr_or_op only: "op" or "expr".
  std::string mode;
  std::size_t span_begin = 0;
  std::size_t span_end = 0;
  std::size_t byte_begin = 0;
  std::size_t byte_end = 0;

  TemplateFamily family() const { return family_of(variant); }
  bool is_insert() const {
    return variant == TemplateVariant::insert_before ||
           variant == TemplateVariant::insert_after;
  }
  /// Stable id, e.g. `complete/replace_line`, `partial/keep_prefix#2`,
  /// `template/method_name#0`.
  std::string id() const;

  friend bool operator==(const RepairTemplate&, const RepairTemplate&) = default;
};

inline constexpr std::size_t kMaxPartialCutsPerSide = 10;

/// Templates applicable to a line. `line` is the raw line text; its tokens are
/// lexed internally. Order: complete family, keep_prefix(1..), keep_suffix(1..),
/// method_name, method_args, bool_expr_or_op.
std::vector<RepairTemplate> enumerate_applicable(std::string_view line);

/// Code tokens of a raw line, with cols relative to the line start.
std::vector<Token> line_code_tokens(std::string_view line);

/// Text of the region a template masks (the training-time target).
std::string target_of(const RepairTemplate& tmpl, std::string_view line);

/// Surrounding code tokens of the buggy line, nearest last/first.
struct LineContext {
  std::vector<std::string> before;
  std::vector<std::string> after;
};

struct MaskedRepairInput {
  std::string template_id;
  std::vector<std::string> context_before;
  std::vector<std::string> context_after;
  // Code tokens of the masked line with exactly one kSpanMarker entry.
  std::vector<std::string> masked_line;
  // Raw masked line text (original spacing) containing one kSpanMarker.
  std::string masked_text;
  int buggy_line_no = 0;

  std::size_t token_count() const {
    return context_before.size() + masked_line.size() + context_after.size();
  }
  /// Code tokens preceding the span marker (context + line prefix).
  std::vector<std::string> left_of_span() const;
};

/// Build the model input for `tmpl` on `line`. Context is cut symmetrically
/// around the line at token granularity so that the whole input, plus
/// `reserved` tokens (prompt), fits in `context_limit`.
MaskedRepairInput apply(const RepairTemplate& tmpl, std::string_view line,
                        const LineContext& context, int buggy_line_no,
                        std::size_t context_limit = kDefaultContextLimit,
                        std::size_t reserved = 0);

/// Inverse of apply: the line(s) replacing the buggy line once the span is
/// filled with `fill`. Insert variants return two lines (or just the
/// original line when the fill is empty).
std::vector<std::string> splice(std::string_view fill,
                                const RepairTemplate& tmpl,
                                std::string_view original_line);

}  // namespace surgeon
