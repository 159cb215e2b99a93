#include "surgeon/templates.hpp"

#include <algorithm>
#include <optional>

namespace surgeon {

std::string_view to_string(TemplateFamily family) {
  switch (family) {
    case TemplateFamily::complete: return "complete";
    case TemplateFamily::partial: return "partial";
    case TemplateFamily::templated: return "template";
  }
  return "?";
}

std::string_view to_string(TemplateVariant variant) {
  switch (variant) {
    case TemplateVariant::replace_line: return "replace_line";
    case TemplateVariant::insert_before: return "insert_before";
    case TemplateVariant::insert_after: return "insert_after";
    case TemplateVariant::keep_prefix: return "keep_prefix";
    case TemplateVariant::keep_suffix: return "keep_suffix";
    case TemplateVariant::method_name: return "method_name";
    case TemplateVariant::method_args: return "method_args";
    case TemplateVariant::bool_expr_or_op: return "bool_expr_or_op";
  }
  return "?";
}

TemplateFamily family_of(TemplateVariant variant) {
  switch (variant) {
    case TemplateVariant::replace_line:
    case TemplateVariant::insert_before:
    case TemplateVariant::insert_after:
      return TemplateFamily::complete;
    case TemplateVariant::keep_prefix:
    case TemplateVariant::keep_suffix:
      return TemplateFamily::partial;
    default:
      return TemplateFamily::templated;
  }
}

std::string RepairTemplate::id() const {
  std::string out(to_string(family()));
  out += '/';
  out += to_string(variant);
  if (family() != TemplateFamily::complete) {
    out += '#';
    out += std::to_string(param);
  }
  return out;
}

std::vector<Token> line_code_tokens(std::string_view line) {
  return code_tokens(tokenize(line));
}

namespace {

std::size_t end_byte(const Token& t) { return t.offset + t.text.size(); }

std::optional<std::size_t> matching_close(const std::vector<Token>& toks,
                                          std::size_t open) {
  const std::string& o = toks[open].text;
  const std::string c = o == "(" ? ")" : o == "[" ? "]" : "}";
  int depth = 0;
  for (std::size_t k = open; k < toks.size(); ++k) {
    if (toks[k].text == o) ++depth;
    if (toks[k].text == c && --depth == 0) return k;
  }
  return std::nullopt;
}

RepairTemplate make(TemplateVariant v, int param, std::size_t b, std::size_t e,
                    const std::vector<Token>& toks) {
  RepairTemplate t;
  t.variant = v;
  t.param = param;
  t.span_begin = b;
  t.span_end = e;
  if (b < e) {
    t.byte_begin = toks[b].offset;
    t.byte_end = end_byte(toks[e - 1]);
  }
  return t;
}

// Start of the condition operand of a ternary whose `?` is at `q`.
std::size_t ternary_condition_start(const std::vector<Token>& toks,
                                    std::size_t q) {
  int depth = 0;
  std::size_t k = q;
  while (k > 0) {
    const auto& t = toks[k - 1].text;
    if (t == ")" || t == "]") ++depth;
    if (t == "(" || t == "[") {
      if (depth == 0) break;
      --depth;
    }
    if (depth == 0 && (t == "=" || t == "return" || t == "," || t == ":" ||
                       t == "?" || t == ";" || t == "{" ||
                       (t.size() == 2 && t[1] == '=' && t != "==" &&
                        t != "!=" && t != "<=" && t != ">="))) {
      break;
    }
    --k;
  }
  return k;
}

void add_bool_instances(const std::vector<Token>& toks,
                        std::vector<RepairTemplate>& out) {
  struct Instance {
    std::size_t b, e;
    std::string mode;
  };
  std::vector<Instance> found;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto& t = toks[i];
    if (t.kind == TokenKind::op && is_comparison_or_logical(t.text)) {
      found.push_back({i, i + 1, "op"});
    }
    if ((t.text == "if" || t.text == "while") && i + 1 < toks.size() &&
        toks[i + 1].text == "(") {
      if (auto close = matching_close(toks, i + 1); close && *close > i + 2) {
        found.push_back({i + 2, *close, "expr"});
      }
    }
    if (t.text == "?") {
      const auto start = ternary_condition_start(toks, i);
      if (start < i) found.push_back({start, i, "expr"});
    }
  }
  std::stable_sort(found.begin(), found.end(),
                   [](const Instance& a, const Instance& b) {
                     return std::pair(a.b, a.e) < std::pair(b.b, b.e);
                   });
  int index = 0;
  for (const auto& f : found) {
    auto tmpl = make(TemplateVariant::bool_expr_or_op, index++, f.b, f.e, toks);
    tmpl.mode = f.mode;
    out.push_back(std::move(tmpl));
  }
}

}  // namespace

std::vector<RepairTemplate> enumerate_applicable(std::string_view line) {
  const auto toks = line_code_tokens(line);
  std::vector<RepairTemplate> out;
  const std::size_t n = toks.size();
  if (n == 0) return out;

  out.push_back(make(TemplateVariant::replace_line, 0, 0, n, toks));
  out.push_back(make(TemplateVariant::insert_before, 0, 0, 0, toks));
  out.push_back(make(TemplateVariant::insert_after, 0, 0, 0, toks));

  const std::size_t cuts = std::min(n - 1, kMaxPartialCutsPerSide);
  for (std::size_t p = 1; p <= cuts; ++p) {
    out.push_back(make(TemplateVariant::keep_prefix, static_cast<int>(p), p, n, toks));
  }
  for (std::size_t s = 1; s <= cuts; ++s) {
    out.push_back(
        make(TemplateVariant::keep_suffix, static_cast<int>(s), 0, n - s, toks));
  }

  std::vector<RepairTemplate> names, args;
  for (std::size_t i = 0; i < n; ++i) {
    if (toks[i].kind != TokenKind::identifier || !toks[i].call_candidate) {
      continue;
    }
    const int k = static_cast<int>(names.size());
    names.push_back(make(TemplateVariant::method_name, k, i, i + 1, toks));
    if (i + 1 < n && toks[i + 1].text == "(") {
      if (auto close = matching_close(toks, i + 1)) {
        auto t = make(TemplateVariant::method_args, k, i + 2, *close, toks);
        if (*close == i + 2) {
          t.byte_begin = t.byte_end = end_byte(toks[i + 1]);
        } else {
          // Everything strictly between the parentheses, spacing included.
          t.byte_begin = end_byte(toks[i + 1]);
          t.byte_end = toks[*close].offset;
        }
        args.push_back(std::move(t));
      }
    }
  }
  out.insert(out.end(), names.begin(), names.end());
  out.insert(out.end(), args.begin(), args.end());
  add_bool_instances(toks, out);
  return out;
}

std::string target_of(const RepairTemplate& tmpl, std::string_view line) {
  if (tmpl.is_insert()) return {};
  return std::string(line.substr(tmpl.byte_begin, tmpl.byte_end - tmpl.byte_begin));
}

std::vector<std::string> MaskedRepairInput::left_of_span() const {
  std::vector<std::string> out = context_before;
  for (const auto& t : masked_line) {
    if (t == kSpanMarker) break;
    out.push_back(t);
  }
  return out;
}

namespace {

std::string indentation_of(std::string_view line) {
  const auto first = line.find_first_not_of(" \t");
  return std::string(line.substr(0, first == std::string_view::npos ? line.size() : first));
}

}  // namespace

MaskedRepairInput apply(const RepairTemplate& tmpl, std::string_view line,
                        const LineContext& context, int buggy_line_no,
                        std::size_t context_limit, std::size_t reserved) {
  const auto toks = line_code_tokens(line);
  if (!tmpl.is_insert()) {
    const auto applicable = enumerate_applicable(line);
    if (std::find(applicable.begin(), applicable.end(), tmpl) == applicable.end()) {
      throw TemplateError("template " + std::string(to_string(tmpl.variant)) +
                          " is not applicable to line: " + std::string(line));
    }
  }

  MaskedRepairInput in;
  in.template_id = tmpl.id();
  in.buggy_line_no = buggy_line_no;
  std::vector<std::string> before = context.before;
  std::vector<std::string> after = context.after;

  if (tmpl.is_insert()) {
    in.masked_text = indentation_of(line) + std::string(kSpanMarker);
    in.masked_line = {std::string(kSpanMarker)};
    std::vector<std::string> line_texts;
    for (const auto& t : toks) line_texts.push_back(t.text);
    if (tmpl.variant == TemplateVariant::insert_before) {
      after.insert(after.begin(), line_texts.begin(), line_texts.end());
    } else {
      before.insert(before.end(), line_texts.begin(), line_texts.end());
    }
  } else {
    in.masked_text = std::string(line.substr(0, tmpl.byte_begin)) +
                     std::string(kSpanMarker) +
                     std::string(line.substr(tmpl.byte_end));
    for (std::size_t i = 0; i < tmpl.span_begin; ++i) in.masked_line.push_back(toks[i].text);
    in.masked_line.emplace_back(kSpanMarker);
    for (std::size_t i = tmpl.span_end; i < toks.size(); ++i) {
      in.masked_line.push_back(toks[i].text);
    }
  }

  if (in.masked_line.size() + reserved > context_limit) {
    throw TemplateError("context overflow: masked line needs " +
                        std::to_string(in.masked_line.size() + reserved) +
                        " tokens, limit is " + std::to_string(context_limit));
  }
  const std::size_t budget = context_limit - in.masked_line.size() - reserved;
  const std::size_t n_after_first = std::min(after.size(), budget / 2);
  const std::size_t n_before = std::min(before.size(), budget - n_after_first);
  const std::size_t n_after = std::min(after.size(), budget - n_before);
  in.context_before.assign(before.end() - static_cast<std::ptrdiff_t>(n_before), before.end());
  in.context_after.assign(after.begin(), after.begin() + static_cast<std::ptrdiff_t>(n_after));
  return in;
}

std::vector<std::string> splice(std::string_view fill, const RepairTemplate& tmpl,
                                std::string_view original_line) {
  const std::string original(original_line);
  if (tmpl.is_insert()) {
    if (fill.empty()) return {original};
    const std::string added = indentation_of(original_line) + std::string(fill);
    if (tmpl.variant == TemplateVariant::insert_before) return {added, original};
    return {original, added};
  }
  return {std::string(original_line.substr(0, tmpl.byte_begin)) + std::string(fill) +
          std::string(original_line.substr(tmpl.byte_end))};
}

}  // namespace surgeon
