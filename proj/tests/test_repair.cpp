#include <gtest/gtest.h>

#include <algorithm>
#include <mutex>
#include <random>

#include "support/support.hpp"
#include "surgeon/corpus.hpp"
#include "surgeon/pipeline.hpp"
#include "surgeon/repair.hpp"

using namespace surgeon;
using surgeon::testing::TempDir;

namespace {

CandidatePatch patch(std::string fill, std::string tpl, double score) {
  CandidatePatch c;
  c.fill_text = std::move(fill);
  c.template_id = std::move(tpl);
  c.score = score;
  return c;
}

// Predictor replaying fixed fills per template, cycling through them.
class ScriptedPredictor final : public SpanPredictor {
 public:
  ScriptedPredictor(ModelVariant v, std::map<std::string, std::vector<SpanSample>> script,
                    std::vector<SpanSample> fallback)
      : variant_(v), script_(std::move(script)), fallback_(std::move(fallback)) {}

  ModelVariant variant() const override { return variant_; }
  const SamplingParams& params() const override { return params_; }

  std::vector<SpanSample> sample(const MaskedRepairInput& input, const std::optional<std::string>&,
                                 std::size_t n, std::uint64_t) const override {
    {
      std::lock_guard lock(mutex_);
      requested_ += n;
    }
    const auto it = script_.find(input.template_id);
    const auto& pool = it == script_.end() ? fallback_ : it->second;
    std::vector<SpanSample> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(pool[i % pool.size()]);
    return out;
  }

  std::size_t requested() const {
    std::lock_guard lock(mutex_);
    return requested_;
  }

 private:
  ModelVariant variant_;
  SamplingParams params_;
  std::map<std::string, std::vector<SpanSample>> script_;
  std::vector<SpanSample> fallback_;
  mutable std::mutex mutex_;
  mutable std::size_t requested_ = 0;
};

SpanSample fill(std::vector<std::string> tokens, double lp) {
  SpanSample s;
  s.token_logprobs.assign(tokens.size(), lp);
  s.tokens = std::move(tokens);
  s.terminated = true;
  return s;
}

const std::vector<std::string> kFixTokens{"Context", "rhsContext", "=", "getContextForNoInOperator",
                                          "(", "context", ")", ";"};

// Toy project with bug 1 planted.
class FixtureRepair : public ::testing::Test {
 protected:
  void SetUp() override {
    bug_ = surgeon::testing::fixture_bugs().front();
    spec_ = surgeon::testing::fixture_spec(surgeon::testing::materialize(dir_ / "proj", &bug_));
    corpus_ = ingest(spec_.project_root, ingest_options(spec_));
    options_.parallelism = 2;
    options_.work_root = dir_.path();
    options_.budget = {200, 20};
  }

  std::shared_ptr<ScriptedPredictor> scripted(ModelVariant v, double fix_lp) const {
    return std::make_shared<ScriptedPredictor>(
        v,
        std::map<std::string, std::vector<SpanSample>>{
            {"complete/replace_line",
             {fill(kFixTokens, fix_lp), fill({"int", "x", "=", "0", ";"}, -0.5)}}},
        std::vector<SpanSample>{fill({"foo", "("}, -1.0), fill({}, -0.1)});
  }

  TempDir dir_{"repair"};
  surgeon::testing::PlantedBug bug_;
  BugSpec spec_;
  ProjectCorpus corpus_;
  RepairOptions options_;
};

}  // namespace

TEST(RankPatches, MatchesBruteForceOrder) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> fills{"a", "b", "c", "ab"};
  const std::vector<std::string> tpls{"t1", "t2"};
  for (int round = 0; round < 50; ++round) {
    std::vector<CandidatePatch> ps;
    for (int i = 0; i < 30; ++i) {
      ps.push_back(patch(fills[rng() % 4], tpls[rng() % 2], -static_cast<double>(rng() % 4) / 2));
    }
    const auto ranked = rank_patches(ps);
    ASSERT_EQ(ranked.size(), ps.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      EXPECT_EQ(ranked[i].rank_in_variant, i + 1);
      // Brute force: rank is one plus the number of strictly better patches.
      std::size_t better = 0;
      for (const auto& q : ps) {
        const auto& p = ranked[i];
        better += std::tie(p.score, q.fill_text, q.template_id) < std::tie(q.score, p.fill_text, p.template_id) ? 1 : 0;
      }
      EXPECT_LE(better, i);
    }
    EXPECT_TRUE(std::is_permutation(ranked.begin(), ranked.end(), ps.begin(), [](const auto& a, const auto& b) {
      return a.fill_text == b.fill_text && a.template_id == b.template_id && a.score == b.score;
    }));
  }
}

TEST(RankPatches, TieBreaks) {
  const auto r = rank_patches({patch("b", "t1", -1), patch("a", "t2", -1), patch("a", "t1", -1),
                               patch("z", "t0", -0.5)});
  EXPECT_EQ(r[0].fill_text, "z");
  EXPECT_EQ(r[1].fill_text + r[1].template_id, "at1");
  EXPECT_EQ(r[2].fill_text + r[2].template_id, "at2");
  EXPECT_EQ(r[3].fill_text, "b");
  EXPECT_TRUE(rank_patches({}).empty());
}

TEST(MergeMinRank, Examples) {
  EXPECT_EQ(merge_min_rank({}), std::nullopt);
  EXPECT_EQ(merge_min_rank({{"ki", 3}}), 3u);
  EXPECT_EQ(merge_min_rank({{"ki", 7}, {"ro", 2}, {"base", 9}}), 2u);
}

TEST(StopCondition, Names) {
  EXPECT_EQ(parse_stop_condition("first-correct"), StopCondition::first_correct);
  EXPECT_EQ(to_string(StopCondition::first_plausible), "first-plausible");
  EXPECT_FALSE(parse_stop_condition("sometimes").has_value());
}

TEST_F(FixtureRepair, FindsScriptedFixAndValidatesIt) {
  auto ki = scripted(ModelVariant::ki, -0.05);
  const PredictorSet models{{ModelVariant::ki, ki}};
  const auto report = run_bug(spec_, corpus_, models, options_);
  ASSERT_EQ(report.variants.size(), 1u);
  const auto& v = report.variants[0];
  EXPECT_EQ(v.samples_drawn, 200u);
  EXPECT_EQ(ki->requested(), 200u);
  EXPECT_GT(v.empty_fills, 0u);
  EXPECT_LE(v.ranked.size(), 20u);
  ASSERT_TRUE(v.correct_rank.has_value());
  EXPECT_EQ(*v.correct_rank, 1u);
  ASSERT_TRUE(v.outcomes[0].has_value());
  EXPECT_EQ(v.outcomes[0]->classification, Classification::plausible);
  EXPECT_GE(v.count(Classification::compile_error), 1u);
  EXPECT_EQ(report.stop_reason, "exhausted");
  EXPECT_EQ(report.total_validated(), v.validated());
}

TEST_F(FixtureRepair, DedupeKeepsOneEntryPerPatchedLine) {
  const PredictorSet models{{ModelVariant::ki, scripted(ModelVariant::ki, -0.05)}};
  options_.validate = false;
  const auto report = run_bug(spec_, corpus_, models, options_);
  const auto& v = report.variants[0];
  std::set<std::string> lines;
  for (const auto& c : v.ranked) EXPECT_TRUE(lines.insert(c.patched_text()).second);
  // Each (template, fill) pair appears once even though it was sampled many times.
  EXPECT_LE(v.unique_fills, 2 * report.template_ids.size());
  EXPECT_EQ(report.stop_reason, "not-validated");
  for (const auto& o : v.outcomes) EXPECT_FALSE(o.has_value());
}

TEST_F(FixtureRepair, BudgetCeilings) {
  options_.budget = {37, 5};
  const PredictorSet models{{ModelVariant::ki, scripted(ModelVariant::ki, -0.05)},
                            {ModelVariant::ro, scripted(ModelVariant::ro, -0.05)}};
  options_.validate = false;
  const auto report = run_bug(spec_, corpus_, models, options_);
  for (const auto& v : report.variants) {
    EXPECT_EQ(v.samples_drawn, 37u);
    EXPECT_LE(v.ranked.size(), 5u);
  }
}

TEST_F(FixtureRepair, FirstCorrectStopsEarly) {
  options_.stop = StopCondition::first_correct;
  options_.parallelism = 1;
  const PredictorSet models{{ModelVariant::ki, scripted(ModelVariant::ki, -0.05)}};
  const auto report = run_bug(spec_, corpus_, models, options_);
  EXPECT_EQ(report.stop_reason, "first-correct");
  EXPECT_EQ(report.total_validated(), 1u);
}

TEST_F(FixtureRepair, LowScoredFixRanksBelowOthers) {
  const PredictorSet models{{ModelVariant::ki, scripted(ModelVariant::ki, -5.0)}};
  options_.validate = false;
  const auto report = run_bug(spec_, corpus_, models, options_);
  const auto& v = report.variants[0];
  ASSERT_TRUE(v.correct_rank.has_value());
  EXPECT_EQ(*v.correct_rank, v.ranked.size());
}

TEST_F(FixtureRepair, ReferenceRunIsDeterministic) {
  RunConfig cfg;
  cfg.samples = 300;
  cfg.validate_top = 50;
  cfg.iterations = 2;
  const auto trained = train_project_models(corpus_, cfg);
  const auto models = reference_predictors(trained, cfg);
  options_.budget = {300, 50};
  options_.validate = false;
  const auto a = run_bug(spec_, corpus_, models, options_).to_json();
  const auto b = run_bug(spec_, corpus_, models, options_).to_json();
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_EQ(a.at("variants").size(), 4u);
}

TEST(Repair, NoIdentifiersDisablesPromptedVariant) {
  TempDir dir;
  surgeon::testing::write_file(dir / "src/A.java",
                               "class A {\n  int f(int v) {\n    return v + 1;\n  }\n}\n");
  BugSpec spec;
  spec.id = "lonely";
  spec.project_root = dir / "src";
  spec.file = "A.java";
  spec.buggy_line_no = 3;
  spec.test_command = "true";
  const auto corpus = ingest(spec.project_root, ingest_options(spec));
  const PredictorSet models{
      {ModelVariant::base, std::make_shared<ReferencePredictor>(nullptr, ModelVariant::base)},
      {ModelVariant::prompted, std::make_shared<ReferencePredictor>(nullptr, ModelVariant::prompted)}};
  RepairOptions options;
  options.budget = {20, 5};
  options.validate = false;
  const auto report = run_bug(spec, corpus, models, options);
  EXPECT_TRUE(report.prompts.empty());
  EXPECT_EQ(report.find(ModelVariant::prompted), nullptr);
  ASSERT_NE(report.find(ModelVariant::base), nullptr);
  EXPECT_NE(std::find(report.notes.begin(), report.notes.end(),
                      "no relevant identifiers; prompted variant disabled"),
            report.notes.end());
}

TEST(Repair, BadLineIsRejected) {
  TempDir dir;
  surgeon::testing::write_file(dir / "src/A.java", "class A {\n  void f() {\n  }\n}\n");
  BugSpec spec;
  spec.project_root = dir / "src";
  spec.file = "A.java";
  spec.buggy_line_no = 99;
  spec.test_command = "true";
  const auto corpus = ingest(spec.project_root, ingest_options(spec));
  RepairOptions options;
  EXPECT_THROW(run_bug(spec, corpus, {}, options), RepairError);
  spec.file = "Missing.java";
  spec.buggy_line_no = 1;
  EXPECT_THROW(run_bug(spec, corpus, {}, options), RepairError);
}
