#include "surgeon/masking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"
#include "surgeon/rng.hpp"
#include "surgeon/templates.hpp"

namespace surgeon {

using nlohmann::ordered_json;

std::string_view to_string(MaskStrategy s) {
  switch (s) {
    case MaskStrategy::ki: return "KI";
    case MaskStrategy::ro_template: return "RO-template";
    case MaskStrategy::ro_ast: return "RO-ast";
    case MaskStrategy::ro_line: return "RO-line";
  }
  return "?";
}

std::optional<MaskStrategy> parse_strategy(std::string_view s) {
  if (s == "KI" || s == "ki") return MaskStrategy::ki;
  if (s == "RO-template" || s == "template") return MaskStrategy::ro_template;
  if (s == "RO-ast" || s == "ast") return MaskStrategy::ro_ast;
  if (s == "RO-line" || s == "line") return MaskStrategy::ro_line;
  return std::nullopt;
}

std::string sentinel(std::size_t index) {
  return "<extra_id_" + std::to_string(index) + ">";
}

std::optional<std::size_t> sentinel_index(std::string_view text) {
  constexpr std::string_view prefix = "<extra_id_";
  if (!text.starts_with(prefix) || !text.ends_with(">")) return std::nullopt;
  const auto digits = text.substr(prefix.size(), text.size() - prefix.size() - 1);
  if (digits.empty() || digits.size() > 9) return std::nullopt;
  std::size_t v = 0;
  for (const char c : digits) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + static_cast<std::size_t>(c - '0');
  }
  if (digits.size() > 1 && digits.front() == '0') return std::nullopt;
  return v;
}

// ---------------------------------------------------------------------------
// MaskedSample

std::vector<std::string> MaskedSample::reconstruct() const {
  std::vector<std::string> out;
  for (const auto& t : masked) {
    if (const auto idx = sentinel_index(t)) {
      const auto it = std::find_if(targets.begin(), targets.end(),
                                   [&](const SpanTarget& s) { return s.sentinel == *idx; });
      if (it == targets.end()) throw MaskingError("sentinel without target: " + t);
      out.insert(out.end(), it->tokens.begin(), it->tokens.end());
    } else {
      out.push_back(t);
    }
  }
  return out;
}

std::size_t MaskedSample::masked_code_tokens() const {
  std::size_t n = 0;
  for (const auto& span : targets) {
    for (const auto& t : span.tokens) {
      const auto kind = classify_text(t);
      if (kind != TokenKind::whitespace && kind != TokenKind::comment) ++n;
    }
  }
  return n;
}

std::vector<std::size_t> MaskedSample::masked_positions() const {
  std::vector<std::size_t> out;
  std::size_t ordinal = 0;
  const auto is_code = [](const std::string& t) {
    const auto kind = classify_text(t);
    return kind != TokenKind::whitespace && kind != TokenKind::comment;
  };
  for (const auto& t : masked) {
    if (const auto idx = sentinel_index(t)) {
      for (const auto& span : targets) {
        if (span.sentinel != *idx) continue;
        for (const auto& tt : span.tokens) {
          if (is_code(tt)) out.push_back(ordinal++);
        }
      }
    } else if (is_code(t)) {
      ++ordinal;
    }
  }
  return out;
}

void validate(const MaskingConfig& cfg) {
  if (!(cfg.mask_rate > 0.0 && cfg.mask_rate < 1.0)) {
    throw MaskingError("mask_rate must be in (0, 1)");
  }
  if (cfg.iterations == 0) throw MaskingError("iterations must be positive");
  if (!(cfg.mean_span_len >= 1.0)) throw MaskingError("mean_span_len must be >= 1");
}

namespace {

// Ranges over fn.tokens, ascending and non-overlapping. Empty ranges are
// insertion points.
struct Range {
  std::size_t begin;
  std::size_t end;
};

MaskedSample assemble(const FunctionUnit& fn, std::size_t function_index,
                      const std::vector<Range>& spans) {
  MaskedSample s;
  s.source = {fn.file, fn.start_line, fn.end_line, function_index};
  std::size_t next = 0;
  std::size_t i = 0;
  while (i <= fn.tokens.size()) {
    if (next < spans.size() && spans[next].begin == i) {
      SpanTarget target;
      target.sentinel = next;
      for (std::size_t k = spans[next].begin; k < spans[next].end; ++k) {
        target.tokens.push_back(fn.tokens[k].text);
      }
      s.masked.push_back(sentinel(next));
      s.targets.push_back(std::move(target));
      i = spans[next].end;
      ++next;
      continue;
    }
    if (i == fn.tokens.size()) break;
    s.masked.push_back(fn.tokens[i].text);
    ++i;
  }
  return s;
}

std::vector<std::size_t> code_indices(const FunctionUnit& fn) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < fn.tokens.size(); ++i) {
    if (fn.tokens[i].is_code()) idx.push_back(i);
  }
  return idx;
}

// Text of source line `line_no` as covered by the function's tokens.
std::string line_text(const FunctionUnit& fn, int line_no) {
  std::string out;
  for (const auto& t : fn.tokens) {
    int line = t.line;
    std::size_t start = 0;
    while (start <= t.text.size()) {
      const auto nl = t.text.find('\n', start);
      const auto piece_end = nl == std::string::npos ? t.text.size() : nl;
      if (line == line_no) out.append(t.text, start, piece_end - start);
      if (nl == std::string::npos) break;
      start = nl + 1;
      ++line;
    }
    if (t.line > line_no) break;
  }
  return out;
}

}  // namespace

std::optional<MaskedSample> mask_function_ki(const FunctionUnit& fn,
                                             std::size_t function_index,
                                             std::uint32_t iteration,
                                             const MaskingConfig& cfg) {
  const auto code = code_indices(fn);
  const std::size_t n = code.size();
  if (n < 2) return std::nullopt;

  const std::uint64_t seed = derive_seed(cfg.seed, {function_index, iteration});
  Rng rng(seed);

  const auto target = static_cast<std::size_t>(std::llround(cfg.mask_rate * static_cast<double>(n)));
  const std::size_t m = std::clamp<std::size_t>(target, 1, n - 1);

  std::vector<std::size_t> lengths;
  std::size_t total = 0;
  while (total < m) {
    const auto len = std::min<std::size_t>(rng.geometric(cfg.mean_span_len), m - total);
    lengths.push_back(len);
    total += len;
  }
  // Spans must be separated by at least one unmasked token; merge from the
  // back until they fit.
  while (lengths.size() > 1 && n - m < lengths.size() - 1) {
    const auto last = lengths.back();
    lengths.pop_back();
    lengths.back() += last;
  }
  const std::size_t s = lengths.size();
  const std::size_t free = n - m - (s - 1);
  // Random composition of `free` into s + 1 gaps.
  std::vector<std::size_t> cuts(s);
  for (auto& c : cuts) c = rng.below(free + 1);
  std::sort(cuts.begin(), cuts.end());

  std::vector<Range> spans;
  std::size_t pos = 0;  // in code-token space
  std::size_t prev_cut = 0;
  for (std::size_t k = 0; k < s; ++k) {
    const std::size_t gap = (cuts[k] - prev_cut) + (k == 0 ? 0 : 1);
    prev_cut = cuts[k];
    pos += gap;
    const std::size_t first = code[pos];
    const std::size_t last = code[pos + lengths[k] - 1];
    spans.push_back({first, last + 1});
    pos += lengths[k];
  }

  auto sample = assemble(fn, function_index, spans);
  sample.strategy = MaskStrategy::ki;
  sample.iteration = iteration;
  sample.rng_seed = seed;
  return sample;
}

DatasetBuild build_ki_dataset(const ProjectCorpus& corpus, const MaskingConfig& cfg) {
  validate(cfg);
  DatasetBuild out;
  if (corpus.functions.empty()) {
    out.warnings.push_back("corpus has no functions");
    return out;
  }
  for (std::size_t f = 0; f < corpus.functions.size(); ++f) {
    const auto& fn = corpus.functions[f];
    if (fn.maskable_count() < 2) {
      out.warnings.push_back("skipped " + fn.file + ":" + std::to_string(fn.start_line) +
                             " (" + fn.name + "): fewer than 2 maskable tokens");
      continue;
    }
    for (std::uint32_t it = 0; it < cfg.iterations; ++it) {
      if (auto s = mask_function_ki(fn, f, it, cfg)) out.samples.push_back(std::move(*s));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Repair-oriented masking

std::vector<int> eligible_lines(const FunctionUnit& fn) {
  if (fn.tokens.empty()) return {};
  const int open_line = fn.body_open_line();
  const int close_line = fn.tokens.back().line;
  std::set<int> with_code;
  std::set<int> spanned;  // lines touched by a multi-line non-whitespace token
  for (const auto& t : fn.tokens) {
    if (t.is_code()) with_code.insert(t.line);
    if (t.kind != TokenKind::whitespace) {
      const auto extra = std::count(t.text.begin(), t.text.end(), '\n');
      for (int l = t.line; extra > 0 && l <= t.line + extra; ++l) spanned.insert(l);
    }
  }
  std::vector<int> out;
  for (const int l : with_code) {
    if (l > open_line && l < close_line && !spanned.contains(l)) out.push_back(l);
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> ast_candidates(
    const std::vector<Token>& toks) {
  std::set<std::pair<std::size_t, std::size_t>> found;
  // Bracket group contents.
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].text != "(" && toks[i].text != "[") continue;
    const std::string close = toks[i].text == "(" ? ")" : "]";
    int depth = 0;
    for (std::size_t k = i; k < toks.size(); ++k) {
      if (toks[k].text == toks[i].text) ++depth;
      if (toks[k].text == close && --depth == 0) {
        if (k > i + 1) found.insert({i + 1, k});
        break;
      }
    }
  }
  // Operands between top-level operators, commas and semicolons.
  const auto delimiter = [](const Token& t) {
    if (t.text == "," || t.text == ";") return true;
    if (t.kind != TokenKind::op) return false;
    return t.text != "::" && t.text != "->" && t.text != "++" && t.text != "--" &&
           t.text != "!" && t.text != "~" && t.text != "@" && t.text != "#";
  };
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= toks.size(); ++i) {
    const bool at_end = i == toks.size();
    if (!at_end) {
      const auto& t = toks[i].text;
      if (t == "(" || t == "[" || t == "{") ++depth;
      if (t == ")" || t == "]" || t == "}") depth = std::max(0, depth - 1);
    }
    if (at_end || (depth == 0 && delimiter(toks[i]))) {
      if (i > start) found.insert({start, i});
      start = i + 1;
    }
  }
  return {found.begin(), found.end()};
}

std::optional<MaskedSample> mask_function_ro(const FunctionUnit& fn,
                                             std::size_t function_index,
                                             std::uint32_t iteration,
                                             MaskStrategy strategy,
                                             const MaskingConfig& cfg) {
  if (strategy == MaskStrategy::ki) throw MaskingError("KI is not a repair-oriented strategy");
  const auto lines = eligible_lines(fn);
  if (lines.empty()) return std::nullopt;

  const std::uint64_t seed = derive_seed(cfg.seed, {function_index, iteration});
  Rng rng(seed);
  const int line_no = lines[rng.below(lines.size())];

  std::vector<std::size_t> line_code;  // fn.tokens indices
  for (std::size_t i = 0; i < fn.tokens.size(); ++i) {
    if (fn.tokens[i].line == line_no && fn.tokens[i].is_code()) line_code.push_back(i);
  }
  const std::string text = line_text(fn, line_no);
  const auto toks = line_code_tokens(text);
  if (toks.size() != line_code.size()) return std::nullopt;

  std::size_t sb = 0, se = toks.size();
  std::string template_id;
  if (strategy == MaskStrategy::ro_template) {
    auto templates = enumerate_applicable(text);
    std::erase_if(templates, [](const RepairTemplate& t) { return t.is_insert(); });
    const auto& chosen = templates[rng.below(templates.size())];
    sb = chosen.span_begin;
    se = chosen.span_end;
    template_id = chosen.id();
  } else if (strategy == MaskStrategy::ro_ast) {
    const auto cands = ast_candidates(toks);
    const auto& chosen = cands[rng.below(cands.size())];
    sb = chosen.first;
    se = chosen.second;
  }

  std::vector<Range> spans;
  if (sb < se) {
    spans.push_back({line_code[sb], line_code[se - 1] + 1});
  } else {
    spans.push_back({line_code[sb], line_code[sb]});
  }
  auto sample = assemble(fn, function_index, spans);
  sample.strategy = strategy;
  sample.template_id = std::move(template_id);
  sample.iteration = iteration;
  sample.rng_seed = seed;
  return sample;
}

DatasetBuild build_ro_dataset(const ProjectCorpus& corpus, MaskStrategy strategy,
                              const MaskingConfig& cfg) {
  validate(cfg);
  DatasetBuild out;
  if (corpus.functions.empty()) {
    out.warnings.push_back("corpus has no functions");
    return out;
  }
  for (std::size_t f = 0; f < corpus.functions.size(); ++f) {
    const auto& fn = corpus.functions[f];
    if (eligible_lines(fn).empty()) {
      out.warnings.push_back("skipped " + fn.file + ":" + std::to_string(fn.start_line) +
                             " (" + fn.name + "): no eligible body line");
      continue;
    }
    for (std::uint32_t it = 0; it < cfg.iterations; ++it) {
      if (auto s = mask_function_ro(fn, f, it, strategy, cfg)) {
        out.samples.push_back(std::move(*s));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset files

std::string to_record(const MaskedSample& s) {
  ordered_json rec;
  rec["file"] = s.source.file;
  rec["start_line"] = s.source.start_line;
  rec["end_line"] = s.source.end_line;
  rec["function"] = s.source.function_index;
  rec["strategy"] = to_string(s.strategy);
  rec["template"] = s.template_id;
  rec["iteration"] = s.iteration;
  rec["seed"] = s.rng_seed;
  rec["masked"] = s.masked;
  ordered_json targets = ordered_json::array();
  for (const auto& t : s.targets) {
    ordered_json entry;
    entry["sentinel"] = sentinel(t.sentinel);
    entry["tokens"] = t.tokens;
    targets.push_back(std::move(entry));
  }
  rec["targets"] = std::move(targets);
  return rec.dump();
}

MaskedSample from_record(std::string_view line, std::size_t line_no) {
  const auto fail = [&](const std::string& why) -> DatasetError {
    return DatasetError("dataset line " + std::to_string(line_no) + ": " + why, line_no);
  };
  MaskedSample s;
  try {
    const auto rec = ordered_json::parse(line);
    s.source.file = rec.at("file").get<std::string>();
    s.source.start_line = rec.at("start_line").get<int>();
    s.source.end_line = rec.at("end_line").get<int>();
    s.source.function_index = rec.at("function").get<std::size_t>();
    const auto strategy = parse_strategy(rec.at("strategy").get<std::string>());
    if (!strategy) throw fail("unknown strategy");
    s.strategy = *strategy;
    s.template_id = rec.at("template").get<std::string>();
    s.iteration = rec.at("iteration").get<std::uint32_t>();
    s.rng_seed = rec.at("seed").get<std::uint64_t>();
    s.masked = rec.at("masked").get<std::vector<std::string>>();
    for (const auto& entry : rec.at("targets")) {
      const auto idx = sentinel_index(entry.at("sentinel").get<std::string>());
      if (!idx) throw fail("bad sentinel in targets");
      s.targets.push_back({*idx, entry.at("tokens").get<std::vector<std::string>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("malformed record: ") + e.what());
  }
  // Sentinels 0..k-1, left to right, each once, each with a target.
  std::size_t expect = 0;
  for (const auto& t : s.masked) {
    if (const auto idx = sentinel_index(t)) {
      if (*idx != expect) throw fail("sentinels out of order");
      ++expect;
    }
  }
  if (expect != s.targets.size()) throw fail("sentinel/target count mismatch");
  for (std::size_t k = 0; k < s.targets.size(); ++k) {
    if (s.targets[k].sentinel != k) throw fail("targets out of order");
  }
  return s;
}

void write_dataset(const std::vector<MaskedSample>& samples,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MaskingError("cannot write dataset: " + path.string());
  for (const auto& s : samples) out << to_record(s) << '\n';
}

std::vector<MaskedSample> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MaskingError("cannot read dataset: " + path.string());
  std::vector<MaskedSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    out.push_back(from_record(line, line_no));
  }
  return out;
}

}  // namespace surgeon
