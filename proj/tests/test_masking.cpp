#include <gtest/gtest.h>

#include <numeric>

#include "support/support.hpp"
#include "surgeon/masking.hpp"
#include "surgeon/templates.hpp"

using namespace surgeon;
using surgeon::testing::TempDir;

namespace {

ProjectCorpus corpus_of(std::vector<std::pair<std::string, std::string>> files) {
  std::vector<SourceFile> sources;
  for (auto& [path, text] : files) sources.push_back(SourceFile::from_text(path, text));
  return build_corpus("/virtual", std::move(sources));
}

ProjectCorpus synthetic(std::size_t functions) {
  return corpus_of(surgeon::testing::synthetic_project(5, functions, 3));
}

std::vector<std::string> texts(const FunctionUnit& fn) {
  std::vector<std::string> out;
  for (const auto& t : fn.tokens) out.push_back(t.text);
  return out;
}

std::vector<std::string> code_only(const std::vector<std::string>& toks) {
  std::vector<std::string> out;
  for (const auto& t : toks) {
    const auto k = classify_text(t);
    if (k != TokenKind::whitespace && k != TokenKind::comment) out.push_back(t);
  }
  return out;
}

std::size_t sentinel_count(const MaskedSample& s) {
  std::size_t n = 0;
  for (const auto& t : s.masked) n += sentinel_index(t).has_value() ? 1 : 0;
  return n;
}

void expect_sentinels_in_order(const MaskedSample& s) {
  std::size_t expect = 0;
  for (const auto& t : s.masked) {
    if (const auto idx = sentinel_index(t)) {
      EXPECT_EQ(*idx, expect);
      ++expect;
    }
  }
  EXPECT_EQ(expect, s.targets.size());
}

constexpr std::string_view kReturnOnly = "class R {\n  int f(int x) {\n    return x;\n  }\n}\n";
constexpr std::string_view kCallLine =
    "class R {\n  int g(Thing a, int b) {\n    return a.foo(b);\n  }\n}\n";

}  // namespace

TEST(Sentinel, Spelling) {
  EXPECT_EQ(sentinel(0), "<extra_id_0>");
  EXPECT_EQ(sentinel(17), "<extra_id_17>");
  EXPECT_EQ(sentinel_index("<extra_id_3>"), 3u);
  EXPECT_FALSE(sentinel_index("<extra_id_>").has_value());
  EXPECT_FALSE(sentinel_index("extra_id_3").has_value());
  EXPECT_FALSE(sentinel_index("<SPAN>").has_value());
}

TEST(MaskingConfig, DefaultsAndValidation) {
  MaskingConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.mask_rate, 0.50);
  EXPECT_EQ(cfg.iterations, 10u);
  EXPECT_NO_THROW(validate(cfg));
  cfg.mask_rate = 1.0;
  EXPECT_THROW(validate(cfg), MaskingError);
  cfg.mask_rate = 0.5;
  cfg.iterations = 0;
  EXPECT_THROW(validate(cfg), MaskingError);
}

TEST(KiMasking, HundredTokenFunctionNearHalfMasked) {
  const auto corpus = synthetic(20);
  MaskingConfig cfg;
  for (std::size_t f = 0; f < corpus.functions.size(); ++f) {
    const auto& fn = corpus.functions[f];
    if (fn.maskable_count() < 100) continue;
    for (std::uint32_t it = 0; it < cfg.iterations; ++it) {
      const auto s = mask_function_ki(fn, f, it, cfg);
      ASSERT_TRUE(s.has_value());
      const double frac = static_cast<double>(s->masked_code_tokens()) /
                          static_cast<double>(fn.maskable_count());
      EXPECT_GE(frac, 0.45);
      EXPECT_LE(frac, 0.55);
    }
  }
}

TEST(KiMasking, IterationsShareSourceAndAreDeterministic) {
  const auto corpus = synthetic(1);
  ASSERT_EQ(corpus.functions.size(), 1u);
  MaskingConfig cfg;
  cfg.seed = 42;
  const auto ds = build_ki_dataset(corpus, cfg);
  ASSERT_EQ(ds.samples.size(), 10u);
  for (std::uint32_t i = 0; i < 10; ++i) {
    EXPECT_EQ(ds.samples[i].iteration, i);
    EXPECT_EQ(ds.samples[i].source, ds.samples[0].source);
  }
  const auto again = mask_function_ki(corpus.functions[0], 0, 4, cfg);
  ASSERT_TRUE(again.has_value());
  EXPECT_EQ(*again, ds.samples[4]);
  cfg.seed = 43;
  EXPECT_NE(*mask_function_ki(corpus.functions[0], 0, 4, cfg), ds.samples[4]);
}

TEST(KiMasking, SpansAreSeparatedAndOrdered) {
  const auto corpus = synthetic(10);
  const auto ds = build_ki_dataset(corpus, MaskingConfig{});
  for (const auto& s : ds.samples) {
    expect_sentinels_in_order(s);
    for (std::size_t i = 1; i < s.masked.size(); ++i) {
      const bool both = sentinel_index(s.masked[i]) && sentinel_index(s.masked[i - 1]);
      EXPECT_FALSE(both) << "adjacent sentinels";
    }
    for (const auto& t : s.targets) {
      ASSERT_FALSE(t.tokens.empty());
      EXPECT_FALSE(code_only({t.tokens.front()}).empty());
      EXPECT_FALSE(code_only({t.tokens.back()}).empty());
    }
  }
}

TEST(KiMasking, TinyFunctionSkippedWithWarning) {
  auto corpus = corpus_of({{"T.java", "class T {\n  void f() {\n  }\n}\n"}});
  ASSERT_EQ(corpus.functions.size(), 1u);
  auto& tokens = corpus.functions[0].tokens;
  const auto first_code = std::find_if(tokens.begin(), tokens.end(),
                                       [](const Token& t) { return t.is_code(); });
  tokens = {*first_code};
  EXPECT_FALSE(mask_function_ki(corpus.functions[0], 0, 0, MaskingConfig{}).has_value());
  const auto ds = build_ki_dataset(corpus, MaskingConfig{});
  EXPECT_TRUE(ds.samples.empty());
  EXPECT_FALSE(ds.warnings.empty());
}

TEST(RoMasking, LineStrategyMasksWholeLine) {
  const auto corpus = corpus_of({{"R.java", std::string(kReturnOnly)}});
  ASSERT_EQ(corpus.functions.size(), 1u);
  const auto s = mask_function_ro(corpus.functions[0], 0, 0, MaskStrategy::ro_line, {});
  ASSERT_TRUE(s.has_value());
  ASSERT_EQ(s->targets.size(), 1u);
  EXPECT_EQ(code_only(s->targets[0].tokens), (std::vector<std::string>{"return", "x", ";"}));
  const auto masked_code = code_only(s->masked);
  EXPECT_EQ(std::count(masked_code.begin(), masked_code.end(), sentinel(0)), 1);
  EXPECT_EQ(std::count(masked_code.begin(), masked_code.end(), "return"), 0);
}

TEST(RoMasking, TemplateStrategyCanMaskCallee) {
  const auto corpus = corpus_of({{"R.java", std::string(kCallLine)}});
  bool saw_method_name = false;
  for (std::uint32_t it = 0; it < 200 && !saw_method_name; ++it) {
    MaskingConfig cfg;
    cfg.seed = it;
    const auto s = mask_function_ro(corpus.functions[0], 0, it, MaskStrategy::ro_template, cfg);
    ASSERT_TRUE(s.has_value());
    if (s->template_id != "template/method_name#0") continue;
    saw_method_name = true;
    EXPECT_EQ(s->targets[0].tokens, (std::vector<std::string>{"foo"}));
    std::string joined;
    for (const auto& t : s->masked) joined += t;
    EXPECT_NE(joined.find("return a.<extra_id_0>(b);"), std::string::npos) << joined;
  }
  EXPECT_TRUE(saw_method_name);
}

TEST(RoMasking, StrategiesDifferUnlessWholeLineTemplate) {
  const auto corpus = synthetic(10);
  MaskingConfig cfg;
  cfg.iterations = 3;
  const auto line = build_ro_dataset(corpus, MaskStrategy::ro_line, cfg);
  const auto tmpl = build_ro_dataset(corpus, MaskStrategy::ro_template, cfg);
  ASSERT_EQ(line.samples.size(), tmpl.samples.size());
  for (std::size_t i = 0; i < line.samples.size(); ++i) {
    if (tmpl.samples[i].template_id == "complete/replace_line") {
      EXPECT_EQ(code_only(line.samples[i].masked), code_only(tmpl.samples[i].masked));
    } else {
      EXPECT_NE(line.samples[i].masked, tmpl.samples[i].masked);
    }
  }
}

TEST(RoMasking, EligibleLinesExcludeSignatureAndClosingBrace) {
  const auto corpus = corpus_of({{"R.java", std::string(kReturnOnly)}});
  EXPECT_EQ(eligible_lines(corpus.functions[0]), (std::vector<int>{3}));
}

TEST(RoMasking, AstCandidatesCoverGroupsAndOperands) {
  const auto toks = line_code_tokens("x = foo(a + b, c);");
  const auto cands = ast_candidates(toks);
  auto has = [&](std::size_t b, std::size_t e) {
    return std::find(cands.begin(), cands.end(), std::make_pair(b, e)) != cands.end();
  };
  // tokens: x = foo ( a + b , c ) ;
  EXPECT_TRUE(has(4, 9));  // contents of the call parens
  EXPECT_TRUE(has(2, 10));  // right operand of the assignment
  for (const auto& [b, e] : cands) {
    EXPECT_LT(b, e);
    EXPECT_LE(e, toks.size());
  }
}

TEST(Masking, RoundTripAllStrategies) {
  const auto corpus = synthetic(30);
  MaskingConfig cfg;
  cfg.iterations = 4;
  std::vector<MaskedSample> all = build_ki_dataset(corpus, cfg).samples;
  for (const auto st : {MaskStrategy::ro_template, MaskStrategy::ro_ast, MaskStrategy::ro_line}) {
    const auto ro = build_ro_dataset(corpus, st, cfg).samples;
    for (const auto& s : ro) EXPECT_EQ(sentinel_count(s), 1u);
    all.insert(all.end(), ro.begin(), ro.end());
  }
  ASSERT_FALSE(all.empty());
  for (const auto& s : all) {
    const auto& fn = corpus.functions.at(s.source.function_index);
    EXPECT_EQ(s.reconstruct(), texts(fn));
    expect_sentinels_in_order(s);
  }
}

TEST(Dataset, WriteReadRoundTrip) {
  const auto corpus = synthetic(80);
  auto samples = build_ki_dataset(corpus, MaskingConfig{}).samples;
  const auto ro = build_ro_dataset(corpus, MaskStrategy::ro_template, MaskingConfig{}).samples;
  samples.insert(samples.end(), ro.begin(), ro.end());
  samples.resize(std::min<std::size_t>(samples.size(), 1000));
  ASSERT_EQ(samples.size(), 1000u);
  TempDir dir;
  write_dataset(samples, dir / "d.jsonl");
  EXPECT_EQ(read_dataset(dir / "d.jsonl"), samples);
}

TEST(Dataset, EmptyRoundTrip) {
  TempDir dir;
  write_dataset({}, dir / "e.jsonl");
  EXPECT_EQ(surgeon::testing::read_file(dir / "e.jsonl"), "");
  EXPECT_TRUE(read_dataset(dir / "e.jsonl").empty());
}

TEST(Dataset, TruncatedLineNamesLineNumber) {
  const auto corpus = synthetic(2);
  const auto samples = build_ki_dataset(corpus, MaskingConfig{}).samples;
  TempDir dir;
  write_dataset(samples, dir / "t.jsonl");
  auto text = surgeon::testing::read_file(dir / "t.jsonl");
  text.resize(text.size() - 20);
  surgeon::testing::write_file(dir / "t.jsonl", text);
  try {
    read_dataset(dir / "t.jsonl");
    FAIL() << "expected DatasetError";
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.line(), samples.size());
  }
}

TEST(Dataset, RecordFieldOrderIsStable) {
  const auto corpus = synthetic(1);
  const auto s = build_ki_dataset(corpus, MaskingConfig{}).samples.front();
  const auto rec = to_record(s);
  EXPECT_EQ(rec.find("{\"file\":"), 0u) << rec.substr(0, 60);
  EXPECT_EQ(from_record(rec, 1), s);
}
