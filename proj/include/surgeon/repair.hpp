#pragma once

#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "surgeon/model.hpp"
#include "surgeon/retrieval.hpp"
#include "surgeon/templates.hpp"
#include "surgeon/validation.hpp"

#include "json.hpp"

namespace surgeon {

struct CandidatePatch {
  std::string fill_text;
  std::vector<std::string> fill_tokens;
  std::string template_id;
  ModelVariant variant = ModelVariant::base;
  double score = 0.0;
  std::size_t rank_in_variant = 0;  // 1-based, set by rank_patches
  std::vector<std::string> patched_lines;
  std::optional<std::size_t> prompt_index;  // prompted variant only

  std::string patched_text() const;
};

/// Descending score; ties by fill text, then template id. Assigns
/// rank_in_variant.
std::vector<CandidatePatch> rank_patches(std::vector<CandidatePatch> patches);

/// Minimum rank over the variants that found the patch.
std::optional<std::size_t> merge_min_rank(const std::map<std::string, std::size_t>& ranks);

enum class StopCondition { none, first_plausible, first_correct };
std::string_view to_string(StopCondition s);
std::optional<StopCondition> parse_stop_condition(std::string_view s);

struct RepairBudget {
  std::size_t samples_per_model = 5000;
  std::size_t validate_top = 1000;
};

struct RepairOptions {
  RepairBudget budget;
  std::size_t top_n_identifiers = 5;
  PromptMode prompt_mode = PromptMode::separate;
  RetrievalConfig retrieval;
  std::size_t context_limit = kDefaultContextLimit;
  std::uint64_t seed = 0;
  StopCondition stop = StopCondition::none;
  std::size_t parallelism = WorkdirPool::default_size();
  bool incremental = false;  // keep build products between validations
  std::filesystem::path work_root;  // where workdirs are created; temp if empty
  bool validate = true;
  // Run-wide ceiling; the tighter of this and the bug's own limit applies.
  std::chrono::seconds time_limit{5 * 3600};
};

/// Per-variant predictors. A missing entry disables the variant.
using PredictorSet = std::map<ModelVariant, std::shared_ptr<const SpanPredictor>>;

struct PatchOutcome {
  Classification classification = Classification::test_fail;
  int exit_code = 0;
  bool timed_out = false;
};

struct VariantResult {
  ModelVariant variant = ModelVariant::base;
  std::size_t inputs = 0;
  std::size_t samples_drawn = 0;
  std::size_t empty_fills = 0;
  std::size_t unchanged_fills = 0;  // patched line equal to the buggy line
  std::size_t unique_fills = 0;     // after (template, fill) dedupe
  std::size_t duplicate_lines = 0;  // removed by the patched-line second pass
  std::vector<CandidatePatch> ranked;  // top validate_top
  std::vector<std::optional<PatchOutcome>> outcomes;  // parallel to ranked
  std::optional<std::size_t> correct_rank;

  std::size_t validated() const;
  std::size_t count(Classification c) const;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct RepairReport {
  BugSpec bug;
  std::string buggy_line;
  std::vector<std::string> template_ids;
  std::vector<std::string> prompts;
  std::vector<VariantResult> variants;
  std::vector<std::string> notes;
  bool timed_out = false;
  std::string stop_reason;  // "exhausted", "first-plausible", "first-correct", "timed-out"
  nlohmann::ordered_json config;
  std::vector<StageTiming> timings;
  std::vector<nlohmann::ordered_json> validation_logs;

  const VariantResult* find(ModelVariant v) const;
  std::map<std::string, std::size_t> correct_ranks() const;
  std::size_t total_validated() const;

  /// Deterministic report (no wall-clock data).
  nlohmann::ordered_json to_json() const;
  /// Wall-clock timings and validation logs.
  nlohmann::ordered_json timing_json() const;
};

class RepairError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Code tokens of the buggy file on either side of the buggy line.
LineContext file_context(const SourceFile& file, int buggy_line_no);

/// Generates, ranks and validates candidate patches for one bug.
RepairReport run_bug(const BugSpec& spec, const ProjectCorpus& corpus,
                     const PredictorSet& models, const RepairOptions& options);

}  // namespace surgeon
