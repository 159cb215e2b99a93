#include <gtest/gtest.h>

#include <random>

#include "support/support.hpp"
#include "surgeon/corpus.hpp"
#include "surgeon/lexer.hpp"

using namespace surgeon;
using surgeon::testing::TempDir;
using surgeon::testing::write_file;

namespace {

std::vector<std::pair<std::string, TokenKind>> code_of(std::string_view src) {
  std::vector<std::pair<std::string, TokenKind>> out;
  for (const auto& t : tokenize(src)) {
    if (t.is_code()) out.emplace_back(t.text, t.kind);
  }
  return out;
}

constexpr std::string_view kTwoMethods = R"(package demo;

public class Pair {
  private int left;

  public int sum(int extra) {
    return left + extra;
  }

  public void reset() {
    left = 0;
  }
}
)";

constexpr std::string_view kAnonymous = R"(class Host {
  void install(Registry registry) {
    registry.add(new Listener() {
      public void fire(Event e) {
        handle(e);
      }
    });
  }
}
)";

}  // namespace

TEST(Lexer, DeclarationKinds) {
  const auto toks = code_of("int x = 0;");
  const std::vector<std::pair<std::string, TokenKind>> want{
      {"int", TokenKind::keyword},
      {"x", TokenKind::identifier},
      {"=", TokenKind::op},
      {"0", TokenKind::literal},
      {";", TokenKind::punctuation}};
  EXPECT_EQ(toks, want);
}

TEST(Lexer, EmptyInput) { EXPECT_TRUE(tokenize("").empty()); }

TEST(Lexer, CallCandidateOnlyOnCallee) {
  const auto toks = tokenize("a.foo(b)");
  std::map<std::string, bool> calls;
  for (const auto& t : toks) {
    if (t.kind == TokenKind::identifier) calls[t.text] = t.call_candidate;
  }
  EXPECT_FALSE(calls.at("a"));
  EXPECT_TRUE(calls.at("foo"));
  EXPECT_FALSE(calls.at("b"));
}

TEST(Lexer, CallCandidateIgnoresWhitespace) {
  for (const auto& t : tokenize("run  (x)")) {
    if (t.text == "run") {
      EXPECT_TRUE(t.call_candidate);
    }
  }
}

TEST(Lexer, CommentsAndStringsAreSingleTokens) {
  const auto toks = tokenize("s = \"a // b\"; /* x\ny */ // tail");
  std::vector<std::string> texts;
  for (const auto& t : toks) {
    if (t.kind == TokenKind::literal || t.kind == TokenKind::comment) texts.push_back(t.text);
  }
  EXPECT_EQ(texts, (std::vector<std::string>{"\"a // b\"", "/* x\ny */", "// tail"}));
}

TEST(Lexer, UnterminatedCommentIsFlagged) {
  const auto toks = tokenize("x = 1; /* never closed\nint y;");
  ASSERT_FALSE(toks.empty());
  EXPECT_EQ(toks.back().kind, TokenKind::comment);
  EXPECT_TRUE(toks.back().unterminated);
  EXPECT_EQ(detokenize(toks), "x = 1; /* never closed\nint y;");
}

TEST(Lexer, UnterminatedStringIsFlagged) {
  const auto toks = tokenize("s = \"open");
  EXPECT_EQ(toks.back().kind, TokenKind::literal);
  EXPECT_TRUE(toks.back().unterminated);
}

TEST(Lexer, PositionsAreLineAndColumn) {
  const auto toks = tokenize("a\n  bb");
  const auto& bb = toks.back();
  EXPECT_EQ(bb.text, "bb");
  EXPECT_EQ(bb.line, 2);
  EXPECT_EQ(bb.col, 2);
  EXPECT_EQ(bb.offset, 4u);
}

TEST(Lexer, IdentifierTokensMatchPatternAndAreNotKeywords) {
  std::mt19937_64 rng(11);
  const std::string alphabet = "abcifwhilreturn_$09 \n(){};=+-<>!&|.,\"'/*";
  for (int round = 0; round < 300; ++round) {
    std::string src;
    const int len = static_cast<int>(rng() % 80);
    for (int i = 0; i < len; ++i) src.push_back(alphabet[rng() % alphabet.size()]);
    const auto toks = tokenize(src);
    ASSERT_EQ(detokenize(toks), src);
    for (const auto& t : toks) {
      if (t.kind != TokenKind::identifier) continue;
      EXPECT_TRUE(is_identifier_text(t.text)) << t.text;
      EXPECT_FALSE(is_keyword(t.text)) << t.text;
      const char c0 = t.text[0];
      EXPECT_TRUE(std::isalpha(static_cast<unsigned char>(c0)) || c0 == '_' || c0 == '$');
    }
  }
}

TEST(SourceFile, ContentRoundTripsWithNewlineFlags) {
  const std::string crlf = "a\r\nb\r\n";
  const auto f = SourceFile::from_text("x.java", crlf);
  EXPECT_TRUE(f.crlf);
  EXPECT_TRUE(f.trailing_newline);
  EXPECT_EQ(f.content(), "a\nb\n");
  EXPECT_EQ(f.on_disk_content(), crlf);
  const auto g = SourceFile::from_text("y.java", "one\ntwo");
  EXPECT_FALSE(g.trailing_newline);
  EXPECT_EQ(g.content(), "one\ntwo");
  EXPECT_THROW(g.line(3), std::out_of_range);
}

TEST(ExtractLines, SkipsCommentOnlyLines) {
  const auto f = SourceFile::from_text("a.java", "x = 1;\n// note\ny = 2;\n");
  const auto lines = extract_lines(f);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0].first, 1);
  EXPECT_EQ(lines[1].first, 3);
}

TEST(ExtractLines, AllBlankFile) {
  EXPECT_TRUE(extract_lines(SourceFile::from_text("a.java", "\n   \n\t\n")).empty());
}

TEST(ExtractLines, BlockCommentSpanExcluded) {
  const auto f = SourceFile::from_text("a.java", "a();\n/* one\n two\n three */\nb();\n");
  std::vector<int> nos;
  for (const auto& [no, text] : extract_lines(f)) nos.push_back(no);
  EXPECT_EQ(nos, (std::vector<int>{1, 5}));
}

TEST(Ingest, TwoMethodsGiveTwoFunctions) {
  TempDir dir;
  write_file(dir / "src/demo/Pair.java", kTwoMethods);
  const auto corpus = ingest(dir.path());
  ASSERT_EQ(corpus.files.size(), 1u);
  ASSERT_EQ(corpus.functions.size(), 2u);
  EXPECT_EQ(corpus.functions[0].name, "sum");
  EXPECT_EQ(corpus.functions[0].start_line, 6);
  EXPECT_EQ(corpus.functions[0].end_line, 8);
  EXPECT_EQ(corpus.functions[1].name, "reset");
}

TEST(Ingest, EmptyDirectory) {
  TempDir dir;
  const auto corpus = ingest(dir.path());
  EXPECT_TRUE(corpus.files.empty());
  EXPECT_TRUE(corpus.functions.empty());
}

TEST(Ingest, MissingRootThrows) {
  EXPECT_THROW(ingest("/nonexistent/surgeon/root"), IngestError);
}

TEST(Ingest, AnonymousClassStaysInsideOuterMethod) {
  TempDir dir;
  write_file(dir / "Host.java", kAnonymous);
  const auto corpus = ingest(dir.path());
  ASSERT_EQ(corpus.functions.size(), 1u);
  EXPECT_EQ(corpus.functions[0].name, "install");
  EXPECT_EQ(corpus.functions[0].start_line, 2);
  EXPECT_EQ(corpus.functions[0].end_line, 8);
}

TEST(Ingest, InvalidUtf8IsSkippedWithWarning) {
  TempDir dir;
  write_file(dir / "Good.java", kTwoMethods);
  write_file(dir / "Bad.java", std::string("class Bad { void f() { int \xff; } }"));
  const auto corpus = ingest(dir.path());
  ASSERT_EQ(corpus.files.size(), 1u);
  EXPECT_EQ(corpus.files[0].relative_path, "Good.java");
  EXPECT_EQ(corpus.warnings.size(), 1u);
}

TEST(Ingest, GlobsSelectFiles) {
  TempDir dir;
  write_file(dir / "src/A.java", kTwoMethods);
  write_file(dir / "src/test/ATest.java", kTwoMethods);
  write_file(dir / "notes.txt", "hello");
  const auto corpus = ingest(dir.path());
  ASSERT_EQ(corpus.files.size(), 1u);
  EXPECT_EQ(corpus.files[0].relative_path, "src/A.java");
  IngestOptions all;
  all.exclude_globs.clear();
  EXPECT_EQ(ingest(dir.path(), all).files.size(), 2u);
}

TEST(Glob, Patterns) {
  EXPECT_TRUE(glob_match("**/*.java", "A.java"));
  EXPECT_TRUE(glob_match("**/*.java", "a/b/C.java"));
  EXPECT_FALSE(glob_match("**/*.java", "a/b/C.jav"));
  EXPECT_TRUE(glob_match("**/test/**", "src/test/x/Y.java"));
  EXPECT_FALSE(glob_match("**/test/**", "src/tests/Y.java"));
  EXPECT_TRUE(glob_match("include/**/*.hpp", "include/toy/a.hpp"));
  EXPECT_TRUE(glob_match("a?c", "abc"));
  EXPECT_FALSE(glob_match("*.java", "dir/A.java"));
}

class FixtureCorpus : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    IngestOptions opts;
    opts.include_globs = {"include/**/*.hpp"};
    corpus_ = new ProjectCorpus(ingest(surgeon::testing::fixture_project(), opts));
  }
  static void TearDownTestSuite() { delete corpus_; }
  static ProjectCorpus* corpus_;
};
ProjectCorpus* FixtureCorpus::corpus_ = nullptr;

TEST_F(FixtureCorpus, FunctionsRoundTripToSourceSlices) {
  ASSERT_GT(corpus_->functions.size(), 50u);
  for (const auto& fn : corpus_->functions) {
    const auto& file = corpus_->files.at(fn.file_index);
    ASSERT_GE(fn.start_line, 1);
    ASSERT_LE(fn.end_line, file.line_count());
    const std::string text = detokenize(fn.tokens);
    const std::string content = file.content();
    ASSERT_FALSE(fn.tokens.empty());
    const auto begin = fn.tokens.front().offset;
    EXPECT_EQ(content.substr(begin, text.size()), text) << fn.name;
  }
}

TEST_F(FixtureCorpus, IndexEntriesLexToTheirIdentifier) {
  std::set<std::string> in_functions;
  for (const auto& fn : corpus_->functions) {
    for (const auto& t : fn.tokens) {
      if (t.kind == TokenKind::identifier) in_functions.insert(t.text);
    }
  }
  std::set<std::string> indexed;
  for (const auto& [name, occs] : corpus_->index) {
    indexed.insert(name);
    for (const auto& occ : occs) {
      const auto* file = corpus_->find_file(occ.file);
      ASSERT_NE(file, nullptr);
      const auto& line = file->line(occ.line);
      const auto toks = tokenize(std::string_view(line).substr(static_cast<std::size_t>(occ.col)));
      ASSERT_FALSE(toks.empty());
      EXPECT_EQ(toks.front().text, name);
      EXPECT_EQ(toks.front().kind, TokenKind::identifier);
    }
  }
  EXPECT_EQ(indexed, in_functions);
}

TEST_F(FixtureCorpus, IngestIsDeterministic) {
  IngestOptions opts;
  opts.include_globs = {"include/**/*.hpp"};
  const auto again = ingest(surgeon::testing::fixture_project(), opts);
  ASSERT_EQ(again.files.size(), corpus_->files.size());
  for (std::size_t i = 0; i < again.files.size(); ++i) {
    EXPECT_EQ(again.files[i].relative_path, corpus_->files[i].relative_path);
    EXPECT_EQ(again.files[i].tokens, corpus_->files[i].tokens);
  }
  ASSERT_EQ(again.functions.size(), corpus_->functions.size());
  for (std::size_t i = 0; i < again.functions.size(); ++i) {
    EXPECT_EQ(again.functions[i].tokens, corpus_->functions[i].tokens);
  }
}

TEST_F(FixtureCorpus, FilesArePathOrdered) {
  for (std::size_t i = 1; i < corpus_->files.size(); ++i) {
    EXPECT_LT(corpus_->files[i - 1].relative_path, corpus_->files[i].relative_path);
  }
}

TEST_F(FixtureCorpus, CacheRoundTrip) {
  TempDir dir;
  write_corpus_cache(*corpus_, dir / "corpus.jsonl");
  const auto back = read_corpus_cache(dir / "corpus.jsonl");
  ASSERT_EQ(back.files.size(), corpus_->files.size());
  ASSERT_EQ(back.functions.size(), corpus_->functions.size());
  for (std::size_t i = 0; i < back.functions.size(); ++i) {
    EXPECT_EQ(back.functions[i].tokens, corpus_->functions[i].tokens);
    EXPECT_EQ(back.functions[i].start_line, corpus_->functions[i].start_line);
  }
  EXPECT_EQ(back.index, corpus_->index);
}
