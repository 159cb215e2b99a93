#include "surgeon/retrieval.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_set>

#include "surgeon/stoplist_data.hpp"

namespace surgeon {

// ---------------------------------------------------------------------------
// Similarity

std::size_t levenshtein_distance(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string normalize_whitespace(std::string_view s) {
  std::string out;
  bool pending = false;
  for (const char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      pending = !out.empty();
      continue;
    }
    if (pending) out += ' ';
    pending = false;
    out += c;
  }
  return out;
}

double levenshtein_ratio(std::string_view a, std::string_view b) {
  const auto na = normalize_whitespace(a);
  const auto nb = normalize_whitespace(b);
  const std::size_t longest = std::max(na.size(), nb.size());
  if (longest == 0) return 1.0;
  const auto d = levenshtein_distance(na, nb);
  return 1.0 - static_cast<double>(d) / static_cast<double>(longest);
}

std::vector<ScoredLine> rank_lines(std::string_view buggy_line,
                                   std::vector<ScoredLine> lines) {
  for (auto& l : lines) l.similarity = levenshtein_ratio(buggy_line, l.text);
  std::stable_sort(lines.begin(), lines.end(), [](const ScoredLine& a, const ScoredLine& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    if (a.file != b.file) return a.file < b.file;
    return a.line_no < b.line_no;
  });
  return lines;
}

// ---------------------------------------------------------------------------
// Identifier extraction and filtering

std::string_view to_string(IdentifierKind kind) {
  return kind == IdentifierKind::method ? "method" : "variable";
}

std::vector<LineIdentifier> extract_ids(std::string_view line) {
  std::vector<LineIdentifier> out;
  std::unordered_set<std::string> seen;
  for (const auto& t : tokenize(line)) {
    if (t.kind != TokenKind::identifier) continue;
    if (!seen.insert(t.text).second) continue;
    out.push_back({t.text, t.call_candidate ? IdentifierKind::method : IdentifierKind::variable});
  }
  return out;
}

namespace {

std::set<std::string> parse_stoplist(std::istream& in) {
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto name = normalize_whitespace(line);
    if (name.empty() || name.front() == '#') continue;
    out.insert(name);
  }
  return out;
}

}  // namespace

const std::set<std::string>& default_stoplist() {
  static const std::set<std::string> words = [] {
    std::istringstream in{std::string(kStoplistData)};
    return parse_stoplist(in);
  }();
  return words;
}

std::set<std::string> load_stoplist(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RetrievalError("cannot read stoplist: " + path.string());
  return parse_stoplist(in);
}

std::set<std::string> frequent_identifiers(const ProjectCorpus& corpus, std::size_t top) {
  std::vector<std::pair<std::size_t, std::string>> counts;
  for (const auto& [name, occ] : corpus.index) counts.emplace_back(occ.size(), name);
  std::sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::set<std::string> out;
  for (std::size_t i = 0; i < counts.size() && i < top; ++i) out.insert(counts[i].second);
  return out;
}

std::vector<LineIdentifier> simple_filter(const std::vector<LineIdentifier>& ids,
                                          const FilterConfig& cfg,
                                          const std::set<std::string>& frequent) {
  std::vector<LineIdentifier> out;
  for (const auto& id : ids) {
    if (id.name.size() < cfg.min_length) continue;
    if (cfg.stoplist.contains(id.name)) continue;
    if (frequent.contains(id.name)) continue;
    out.push_back(id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Declaration-site analysis

namespace {

const std::unordered_set<std::string_view>& modifier_words() {
  static const std::unordered_set<std::string_view> words = {
      "public",   "private",  "protected", "static",    "final",
      "abstract", "synchronized", "native", "transient", "volatile",
      "virtual",  "inline",   "explicit",  "constexpr", "friend",
      "mutable",  "extern",   "register",  "default",   "strictfp",
      "const",    "typename"};
  return words;
}

const std::unordered_set<std::string_view>& primitive_words() {
  static const std::unordered_set<std::string_view> words = {
      "int",  "long",   "short", "byte",    "char",   "boolean", "bool",
      "float", "double", "auto", "var",     "unsigned", "signed", "void"};
  return words;
}

struct Code {
  std::vector<Token> toks;
  const Token& operator[](std::size_t i) const { return toks[i]; }
  std::size_t size() const { return toks.size(); }
  bool is(std::size_t i, std::string_view s) const { return i < toks.size() && toks[i].text == s; }
};

std::optional<std::size_t> match_close(const Code& c, std::size_t open) {
  const std::string& o = c[open].text;
  const std::string cl = o == "(" ? ")" : o == "[" ? "]" : o == "{" ? "}" : ">";
  int depth = 0;
  for (std::size_t k = open; k < c.size(); ++k) {
    const auto& t = c[k].text;
    if (t == o) ++depth;
    if (t == cl && --depth == 0) return k;
    if (o == "<" && t == ">>" && (depth -= 2) <= 0) return k;
  }
  return std::nullopt;
}

bool word_like(std::string_view t) {
  return !t.empty() && (std::isalnum(static_cast<unsigned char>(t.front())) || t.front() == '_' ||
                        t.front() == '$');
}

std::string render_type(const Code& c, std::size_t b, std::size_t e) {
  std::string out;
  for (std::size_t k = b; k < e; ++k) {
    if (!out.empty() && word_like(c[k].text) && word_like(c[k - 1].text)) out += ' ';
    out += c[k].text;
  }
  return out;
}

// Skip leading annotations, modifiers and template clauses in [b, e).
std::size_t skip_modifiers(const Code& c, std::size_t b, std::size_t e) {
  while (b < e) {
    const auto& t = c[b].text;
    if (t == "@" && b + 1 < e) {
      b += 2;
      if (c.is(b, "(")) {
        const auto close = match_close(c, b);
        b = close ? *close + 1 : e;
      }
      continue;
    }
    if (t == "template" && c.is(b + 1, "<")) {
      const auto close = match_close(c, b + 1);
      b = close ? *close + 1 : e;
      continue;
    }
    if (modifier_words().contains(t)) {
      ++b;
      continue;
    }
    break;
  }
  return b;
}

// Parses `Type name` out of [b, e); returns {name index, type range end}.
std::optional<std::size_t> declarator_name(const Code& c, std::size_t b, std::size_t e) {
  for (std::size_t k = e; k-- > b;) {
    if (c[k].kind == TokenKind::identifier) return k;
    if (c[k].text != "]" && c[k].text != "[") return std::nullopt;
  }
  return std::nullopt;
}

std::size_t find_depth0(const Code& c, std::size_t b, std::size_t e, std::string_view what,
                        bool angle) {
  int depth = 0;
  for (std::size_t k = b; k < e; ++k) {
    const auto& t = c[k].text;
    if (t == "(" || t == "[" || t == "{" || (angle && t == "<")) ++depth;
    if (t == ")" || t == "]" || t == "}" || (angle && t == ">")) --depth;
    if (angle && t == ">>") depth -= 2;
    if (depth == 0 && t == what) return k;
  }
  return e;
}

struct FileParse {
  const SourceFile& file;
  Code code;
  std::vector<Declaration>& decls;
  FileOutline outline;
};

// Type of a typed local/parameter starting at k: returns the index just past
// the type, or nullopt.
std::optional<std::size_t> parse_type(const Code& c, std::size_t k, std::size_t limit) {
  if (k >= limit) return std::nullopt;
  if (c[k].kind == TokenKind::identifier || primitive_words().contains(c[k].text)) {
    ++k;
  } else if (c.is(k, "::") && k + 1 < limit && c[k + 1].kind == TokenKind::identifier) {
    k += 2;
  } else {
    return std::nullopt;
  }
  while (k + 1 < limit && (c.is(k, ".") || c.is(k, "::")) &&
         c[k + 1].kind == TokenKind::identifier) {
    k += 2;
  }
  while (k < limit && primitive_words().contains(c[k].text)) ++k;  // unsigned int
  if (c.is(k, "<")) {
    int depth = 0;
    for (; k < limit; ++k) {
      const auto& t = c[k].text;
      if (t == "<") ++depth;
      else if (t == ">") --depth;
      else if (t == ">>") depth -= 2;
      else if (t == ";" || t == "(" || t == ")" || t == "=" || t == "{" || t == "&&" ||
               t == "||") {
        return std::nullopt;
      }
      if (depth <= 0) {
        ++k;
        break;
      }
    }
    if (depth > 0) return std::nullopt;
  }
  while (k + 1 < limit && c.is(k, "[") && c.is(k + 1, "]")) k += 2;
  while (k < limit && (c.is(k, "*") || c.is(k, "&") || c.is(k, "&&") || c.is(k, "..."))) ++k;
  return k;
}

void parse_params(const Code& c, std::size_t open, std::size_t close, const std::string& owner,
                  const std::string& file, std::vector<Declaration>& out) {
  std::size_t b = open + 1;
  while (b < close) {
    std::size_t e = find_depth0(c, b, close, ",", true);
    std::size_t head_end = find_depth0(c, b, e, "=", true);
    const std::size_t s = skip_modifiers(c, b, head_end);
    if (auto name = declarator_name(c, s, head_end); name && *name > s) {
      Declaration d;
      d.name = c[*name].text;
      d.type = render_type(c, s, *name);
      d.kind = IdentifierKind::variable;
      d.file = file;
      d.line = c[*name].line;
      d.owner = owner;
      out.push_back(std::move(d));
    }
    b = e + 1;
  }
}

void parse_locals(const Code& c, std::size_t body_open, std::size_t body_close,
                  const std::string& owner, const std::string& file,
                  std::vector<Declaration>& out) {
  for (std::size_t k = body_open + 1; k < body_close; ++k) {
    const auto& prev = c[k - 1].text;
    const bool stmt_start =
        prev == ";" || prev == "{" || prev == "}" ||
        (prev == "(" && k >= 2 &&
         (c[k - 2].text == "for" || c[k - 2].text == "catch" || c[k - 2].text == "try"));
    if (!stmt_start) continue;
    std::size_t s = k;
    while (s < body_close && (c.is(s, "final") || c.is(s, "const") || c.is(s, "static"))) ++s;
    const auto type_end = parse_type(c, s, body_close);
    if (!type_end || *type_end >= body_close) continue;
    const std::size_t name = *type_end;
    if (c[name].kind != TokenKind::identifier || name + 1 >= body_close) continue;
    const auto& after = c[name + 1].text;
    if (after != "=" && after != ";" && after != "," && after != ":" && after != ")") continue;
    const std::string type = render_type(c, s, name);
    out.push_back({c[name].text, type, IdentifierKind::variable, file, c[name].line, owner});
    // Further declarators in the same statement.
    const std::size_t stmt_end = find_depth0(c, name, body_close, ";", false);
    std::size_t m = name + 1;
    while (true) {
      m = find_depth0(c, m, stmt_end, ",", false);
      if (m >= stmt_end) break;
      if (m + 2 < body_close && c[m + 1].kind == TokenKind::identifier &&
          (c.is(m + 2, "=") || c.is(m + 2, ",") || c.is(m + 2, ";"))) {
        out.push_back(
            {c[m + 1].text, type, IdentifierKind::variable, file, c[m + 1].line, owner});
      }
      ++m;
    }
  }
}

bool is_class_keyword(std::string_view t) {
  return t == "class" || t == "struct" || t == "interface" || t == "enum";
}

}  // namespace

ScopeIndex::ScopeIndex(const ProjectCorpus& corpus) {
  function_scopes_.resize(corpus.functions.size());
  struct Positioned {
    std::size_t file;
    int line;
    std::size_t seq;
    Declaration decl;
  };
  std::vector<Positioned> all;
  std::size_t seq = 0;

  for (std::size_t fi = 0; fi < corpus.files.size(); ++fi) {
    const auto& file = corpus.files[fi];
    Code c{code_tokens(file.tokens)};
    FileOutline outline;
    outline.file = file.relative_path;

    // Imports: `import a.b.C;`, `import static a.B.m;`, `using ns::name;`.
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (!(c.is(k, "import") || (c.is(k, "using") && !c.is(k + 1, "namespace")))) continue;
      const std::size_t end = find_depth0(c, k, c.size(), ";", false);
      if (end > k + 1 && c[end - 1].kind == TokenKind::identifier) {
        outline.imports.push_back(c[end - 1].text);
      }
    }

    // Classes.
    for (std::size_t k = 0; k + 1 < c.size(); ++k) {
      if (!is_class_keyword(c[k].text)) continue;
      std::size_t n = k + 1;
      if (c.is(k, "enum") && (c.is(n, "class") || c.is(n, "struct"))) ++n;
      if (n >= c.size() || c[n].kind != TokenKind::identifier) continue;
      if (k > 0 && (c.is(k - 1, "<") || c.is(k - 1, ",") || c.is(k - 1, "."))) continue;
      std::size_t open = n + 1;
      bool ok = true;
      std::vector<std::string> bases;
      bool in_bases = false;
      for (; open < c.size() && !c.is(open, "{"); ++open) {
        const auto& t = c[open];
        if (t.text == "extends" || t.text == "implements" || t.text == ":") {
          in_bases = true;
        } else if (t.kind == TokenKind::identifier) {
          if (in_bases && !c.is(open + 1, ".") && !c.is(open + 1, "::")) bases.push_back(t.text);
        } else if (!(t.text == "," || t.text == "." || t.text == "::" || t.text == "<" ||
                     t.text == ">" || modifier_words().contains(t.text) ||
                     t.text == "final")) {
          ok = false;
          break;
        }
      }
      if (!ok || open >= c.size()) continue;
      const auto close = match_close(c, open);
      if (!close) continue;

      ClassInfo cls;
      cls.name = c[n].text;
      cls.file = file.relative_path;
      cls.start_line = c[k].line;
      cls.end_line = c[*close].line;
      cls.bases = std::move(bases);

      std::size_t m = open + 1;
      if (c.is(k, "enum")) {
        // Constants up to the first `;` or the closing brace.
        while (m < *close && !c.is(m, ";")) {
          if (c[m].kind == TokenKind::identifier &&
              (c.is(m - 1, "{") || c.is(m - 1, ","))) {
            cls.fields.push_back({c[m].text, cls.name, IdentifierKind::variable,
                                  file.relative_path, c[m].line, cls.name});
          }
          if (c.is(m, "(") || c.is(m, "{")) {
            const auto cl = match_close(c, m);
            m = cl ? *cl + 1 : *close;
            continue;
          }
          ++m;
        }
        if (c.is(m, ";")) ++m;
      }

      // Member-level chunks.
      std::size_t chunk = m;
      while (m < *close) {
        const auto& t = c[m].text;
        if ((t == "public" || t == "private" || t == "protected") && c.is(m + 1, ":")) {
          m += 2;
          chunk = m;
          continue;
        }
        if (t == "(" || t == "[") {
          const auto cl = match_close(c, m);
          m = cl ? *cl + 1 : *close;
          continue;
        }
        if (t == "{") {
          const auto cl = match_close(c, m);
          const std::size_t body_close = cl ? *cl : *close;
          // Method with a body, nested class, or initializer block.
          const std::size_t s = skip_modifiers(c, chunk, m);
          std::size_t paren = s;
          while (paren < m && !c.is(paren, "(")) ++paren;
          const bool nested_class =
              std::any_of(c.toks.begin() + static_cast<std::ptrdiff_t>(s),
                          c.toks.begin() + static_cast<std::ptrdiff_t>(m),
                          [](const Token& tk) { return is_class_keyword(tk.text); });
          const bool initializer =
              find_depth0(c, chunk, m, "=", false) < m && paren >= m;
          if (initializer) {
            // Field with a brace initializer; the statement continues.
            m = body_close + 1;
            continue;
          }
          if (!nested_class && paren < m && paren > s &&
              c[paren - 1].kind == TokenKind::identifier) {
            Declaration d;
            d.name = c[paren - 1].text;
            d.kind = IdentifierKind::method;
            d.type = (d.name == cls.name || (paren >= 2 && c.is(paren - 2, "~")))
                         ? std::string()
                         : render_type(c, s, paren - 1);
            d.file = file.relative_path;
            d.line = c[paren - 1].line;
            d.owner = cls.name;
            cls.methods.push_back(d);
          }
          m = body_close + 1;
          chunk = m;
          continue;
        }
        if (t == ";") {
          const std::size_t s = skip_modifiers(c, chunk, m);
          const std::size_t eq = find_depth0(c, s, m, "=", false);
          std::size_t paren = s;
          while (paren < eq && !c.is(paren, "(")) ++paren;
          const bool is_using = c.is(s, "using") || c.is(s, "typedef") || c.is(s, "friend");
          if (is_using || s >= m) {
            // nothing
          } else if (paren < eq) {
            if (paren > s && c[paren - 1].kind == TokenKind::identifier) {
              cls.methods.push_back({c[paren - 1].text,
                                     c[paren - 1].text == cls.name ? std::string()
                                                                   : render_type(c, s, paren - 1),
                                     IdentifierKind::method, file.relative_path,
                                     c[paren - 1].line, cls.name});
            }
          } else {
            const std::size_t head_end = find_depth0(c, s, eq, ",", true);
            if (auto name = declarator_name(c, s, head_end); name && *name > s) {
              const std::string type = render_type(c, s, *name);
              cls.fields.push_back({c[*name].text, type, IdentifierKind::variable,
                                    file.relative_path, c[*name].line, cls.name});
              std::size_t q = *name + 1;
              while (true) {
                q = find_depth0(c, q, m, ",", q < eq);
                if (q >= m) break;
                if (c[q + 1].kind == TokenKind::identifier) {
                  cls.fields.push_back({c[q + 1].text, type, IdentifierKind::variable,
                                        file.relative_path, c[q + 1].line, cls.name});
                }
                ++q;
              }
            }
          }
          ++m;
          chunk = m;
          continue;
        }
        ++m;
      }
      for (const auto& d : cls.fields) all.push_back({fi, d.line, seq++, d});
      for (const auto& d : cls.methods) all.push_back({fi, d.line, seq++, d});
      outline.classes.push_back(std::move(cls));
    }
    outlines_.push_back(std::move(outline));
  }

  // Parameters and locals per function.
  for (std::size_t f = 0; f < corpus.functions.size(); ++f) {
    const auto& fn = corpus.functions[f];
    Code c{code_tokens(fn.tokens)};
    std::size_t body_open = 0;
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (c[k].offset == fn.tokens[fn.body_open].offset) {
        body_open = k;
        break;
      }
    }
    const ClassInfo* owner = enclosing_class(fn.file, fn.tokens[fn.body_open].line);
    const std::string owner_name = owner ? owner->name : std::string();
    auto& scope = function_scopes_[f];
    // Parameter list: the first `name (` in the signature.
    for (std::size_t k = 0; k + 1 < body_open; ++k) {
      if (c[k].text == fn.name && c.is(k + 1, "(")) {
        if (auto close = match_close(c, k + 1)) {
          parse_params(c, k + 1, *close, owner_name, fn.file, scope);
        }
        break;
      }
    }
    parse_locals(c, body_open, c.size() - 1, owner_name, fn.file, scope);
    for (const auto& d : scope) all.push_back({fn.file_index, d.line, seq++, d});
  }

  std::stable_sort(all.begin(), all.end(), [](const Positioned& a, const Positioned& b) {
    if (a.file != b.file) return a.file < b.file;
    if (a.line != b.line) return a.line < b.line;
    return a.seq < b.seq;
  });
  for (auto& p : all) declarations_.push_back(std::move(p.decl));
}

const ClassInfo* ScopeIndex::find_class(std::string_view name) const {
  for (const auto& o : outlines_) {
    for (const auto& c : o.classes) {
      if (c.name == name) return &c;
    }
  }
  return nullptr;
}

const std::vector<Declaration>& ScopeIndex::function_scope(std::size_t fn_index) const {
  return function_scopes_.at(fn_index);
}

const ClassInfo* ScopeIndex::enclosing_class(std::string_view file, int line) const {
  const ClassInfo* best = nullptr;
  for (const auto& o : outlines_) {
    if (o.file != file) continue;
    for (const auto& c : o.classes) {
      if (line < c.start_line || line > c.end_line) continue;
      if (!best || c.end_line - c.start_line < best->end_line - best->start_line) best = &c;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Accessibility and types

namespace {

// Base name of a rendered type: `java.util.List<Foo>` -> `List`,
// `const Plot&` -> `Plot`.
std::string base_type_name(std::string_view type) {
  std::string cut(type.substr(0, type.find('<')));
  std::string last;
  for (const auto& t : tokenize(cut)) {
    if (t.kind == TokenKind::identifier) last = t.text;
  }
  return last;
}

void add_class_members(const ScopeIndex& scope, const ClassInfo* cls, std::set<std::string>& out,
                       std::set<std::string>& visited) {
  if (!cls || !visited.insert(cls->name).second) return;
  for (const auto& f : cls->fields) out.insert(f.name);
  for (const auto& m : cls->methods) out.insert(m.name);
  for (const auto& b : cls->bases) add_class_members(scope, scope.find_class(b), out, visited);
}

}  // namespace

std::set<std::string> find_accessible_ids(const ProjectCorpus& corpus, const ScopeIndex& scope,
                                          std::string_view file, int buggy_line_no) {
  const FunctionUnit* fn = corpus.function_at(file, buggy_line_no);
  if (!fn) {
    throw RetrievalError("line " + std::to_string(buggy_line_no) + " of " + std::string(file) +
                         " is not inside a function");
  }
  const auto fn_index = static_cast<std::size_t>(fn - corpus.functions.data());

  std::set<std::string> out;
  std::vector<std::string> typed;  // declared types of names in scope

  // Enclosing classes, innermost first, with their bases.
  std::set<std::string> visited;
  for (const auto& outline : scope.outlines()) {
    if (outline.file != file) continue;
    for (const auto& cls : outline.classes) {
      if (buggy_line_no < cls.start_line || buggy_line_no > cls.end_line) continue;
      out.insert(cls.name);
      add_class_members(scope, &cls, out, visited);
      for (const auto& f : cls.fields) typed.push_back(f.type);
    }
    for (const auto& imp : outline.imports) out.insert(imp);
  }

  for (const auto& d : scope.function_scope(fn_index)) {
    const bool is_param = d.line <= fn->body_open_line();
    if (is_param || d.line < buggy_line_no) {
      out.insert(d.name);
      typed.push_back(d.type);
    }
  }

  // Members reachable through a receiver of known type.
  for (const auto& type : typed) {
    const auto base = base_type_name(type);
    if (base.empty()) continue;
    std::set<std::string> seen;
    add_class_members(scope, scope.find_class(base), out, seen);
  }
  return out;
}

std::map<std::string, TypeInfo> find_type_info(const ScopeIndex& scope,
                                               const std::vector<LineIdentifier>& names) {
  std::map<std::string, TypeInfo> out;
  for (const auto& id : names) {
    std::optional<TypeInfo> info;
    for (const auto& d : scope.declarations()) {
      if (d.name != id.name || d.kind != id.kind || d.type.empty()) continue;
      if (!info) {
        info = TypeInfo{d.type, false};
      } else if (info->type != d.type) {
        info->ambiguous = true;
      }
    }
    if (info) out[id.name] = *info;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prompts

std::string RankedIdentifier::rendered() const {
  std::string out;
  if (type_info && !type_info->empty()) out = "(" + *type_info + ") ";
  out += name;
  if (kind == IdentifierKind::method) out += "()";
  return out;
}

std::string render_prompt(std::string_view rendered_identifiers) {
  return "/* use " + std::string(rendered_identifiers) + " in the next line */";
}

std::vector<Prompt> build_prompts(const std::vector<RankedIdentifier>& ranked, std::size_t n,
                                  PromptMode mode) {
  std::vector<Prompt> out;
  const std::size_t take = std::min(n, ranked.size());
  if (take == 0) return out;
  if (mode == PromptMode::separate) {
    for (std::size_t i = 0; i < take; ++i) {
      out.push_back({render_prompt(ranked[i].rendered()), {ranked[i]}});
    }
    return out;
  }
  Prompt combined;
  std::string list;
  for (std::size_t i = 0; i < take; ++i) {
    if (i > 0) list += ", ";
    list += ranked[i].rendered();
    combined.identifiers.push_back(ranked[i]);
  }
  combined.text = render_prompt(list);
  out.push_back(std::move(combined));
  return out;
}

std::vector<std::string> prompt_identifiers(std::string_view text) {
  constexpr std::string_view head = "/* use ";
  constexpr std::string_view tail = " in the next line */";
  if (text.starts_with(head)) text.remove_prefix(head.size());
  if (text.ends_with(tail)) text.remove_suffix(tail.size());
  Code c{code_tokens(tokenize(text))};
  std::vector<std::string> out;
  std::size_t b = 0;
  while (b < c.size()) {
    const std::size_t e = find_depth0(c, b, c.size(), ",", false);
    std::size_t k = b;
    if (c.is(k, "(")) {
      const auto close = match_close(c, k);
      k = close ? *close + 1 : e;
    }
    for (; k < e; ++k) {
      if (c[k].kind == TokenKind::identifier) {
        out.push_back(c[k].text);
        break;
      }
    }
    b = e + 1;
  }
  return out;
}

RetrievalResult retrieve(const ProjectCorpus& corpus, const ScopeIndex& scope,
                         std::string_view file, int buggy_line_no, const RetrievalConfig& cfg) {
  const SourceFile* src = corpus.find_file(file);
  if (!src) throw RetrievalError("file not in corpus: " + std::string(file));
  const std::string& buggy_text = src->line(buggy_line_no);

  std::vector<ScoredLine> lines;
  for (const auto& f : corpus.files) {
    if (cfg.scope == RetrievalScope::file && f.relative_path != file) continue;
    for (auto& [no, text] : extract_lines(f)) {
      if (f.relative_path == file && no == buggy_line_no) continue;
      lines.push_back({f.relative_path, no, std::move(text), 0.0});
    }
  }

  RetrievalResult result;
  result.ranked_lines = rank_lines(buggy_text, std::move(lines));

  const auto frequent = frequent_identifiers(corpus, cfg.filter.top_frequent);
  std::set<std::string> seen;
  std::vector<std::size_t> donor_order;
  for (std::size_t li = 0; li < result.ranked_lines.size(); ++li) {
    const auto& line = result.ranked_lines[li];
    for (const auto& id : simple_filter(extract_ids(line.text), cfg.filter, frequent)) {
      if (!seen.insert(id.name).second) continue;
      RankedIdentifier r;
      r.name = id.name;
      r.kind = id.kind;
      r.similarity = line.similarity;
      r.donor_file = line.file;
      r.donor_line = line.line_no;
      result.candidates.push_back(std::move(r));
      donor_order.push_back(li);
    }
  }

  result.accessible = find_accessible_ids(corpus, scope, file, buggy_line_no);

  std::vector<std::pair<std::size_t, RankedIdentifier>> relevant;
  for (std::size_t i = 0; i < result.candidates.size(); ++i) {
    if (result.accessible.contains(result.candidates[i].name)) {
      relevant.emplace_back(donor_order[i], result.candidates[i]);
    }
  }
  std::stable_sort(relevant.begin(), relevant.end(), [](const auto& a, const auto& b) {
    if (a.second.similarity != b.second.similarity) return a.second.similarity > b.second.similarity;
    if (a.first != b.first) return a.first < b.first;
    return a.second.name < b.second.name;
  });

  std::vector<LineIdentifier> names;
  for (const auto& [_, r] : relevant) names.push_back({r.name, r.kind});
  const auto types = cfg.with_types ? find_type_info(scope, names)
                                    : std::map<std::string, TypeInfo>{};
  std::size_t rank = 0;
  for (auto& [_, r] : relevant) {
    if (const auto it = types.find(r.name); it != types.end()) {
      r.type_info = it->second.type;
      r.type_ambiguous = it->second.ambiguous;
    }
    r.rank = ++rank;
    result.identifiers.push_back(std::move(r));
  }
  return result;
}

}  // namespace surgeon
