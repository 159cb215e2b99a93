#include "surgeon/repair.hpp"

#include <algorithm>
#include <future>
#include <set>
#include <thread>
#include <unistd.h>

#include "surgeon/rng.hpp"

namespace surgeon {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string CandidatePatch::patched_text() const {
  std::string out;
  for (std::size_t i = 0; i < patched_lines.size(); ++i) {
    if (i > 0) out += '\n';
    out += patched_lines[i];
  }
  return out;
}

std::vector<CandidatePatch> rank_patches(std::vector<CandidatePatch> patches) {
  std::sort(patches.begin(), patches.end(), [](const CandidatePatch& a, const CandidatePatch& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.fill_text != b.fill_text) return a.fill_text < b.fill_text;
    return a.template_id < b.template_id;
  });
  for (std::size_t i = 0; i < patches.size(); ++i) patches[i].rank_in_variant = i + 1;
  return patches;
}

std::optional<std::size_t> merge_min_rank(const std::map<std::string, std::size_t>& ranks) {
  std::optional<std::size_t> best;
  for (const auto& [_, r] : ranks) {
    if (!best || r < *best) best = r;
  }
  return best;
}

std::string_view to_string(StopCondition s) {
  switch (s) {
    case StopCondition::none: return "none";
    case StopCondition::first_plausible: return "first-plausible";
    case StopCondition::first_correct: return "first-correct";
  }
  return "?";
}

std::optional<StopCondition> parse_stop_condition(std::string_view s) {
  if (s == "none") return StopCondition::none;
  if (s == "first-plausible") return StopCondition::first_plausible;
  if (s == "first-correct") return StopCondition::first_correct;
  return std::nullopt;
}

std::size_t VariantResult::validated() const {
  return static_cast<std::size_t>(
      std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.has_value(); }));
}

std::size_t VariantResult::count(Classification c) const {
  return static_cast<std::size_t>(std::count_if(
      outcomes.begin(), outcomes.end(), [&](const auto& o) { return o && o->classification == c; }));
}

const VariantResult* RepairReport::find(ModelVariant v) const {
  for (const auto& r : variants) {
    if (r.variant == v) return &r;
  }
  return nullptr;
}

std::map<std::string, std::size_t> RepairReport::correct_ranks() const {
  std::map<std::string, std::size_t> out;
  for (const auto& v : variants) {
    if (v.correct_rank) out[std::string(to_string(v.variant))] = *v.correct_rank;
  }
  return out;
}

std::size_t RepairReport::total_validated() const {
  std::size_t n = 0;
  for (const auto& v : variants) n += v.validated();
  return n;
}

LineContext file_context(const SourceFile& file, int buggy_line_no) {
  LineContext ctx;
  for (const auto& t : file.tokens) {
    if (!t.is_code()) continue;
    if (t.line < buggy_line_no) ctx.before.push_back(t.text);
    if (t.line > buggy_line_no) ctx.after.push_back(t.text);
  }
  return ctx;
}

namespace {

std::vector<std::string> code_texts(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& t : code_tokens(tokenize(text))) out.push_back(t.text);
  return out;
}

struct Unit {
  std::size_t template_index;
  std::optional<std::size_t> prompt_index;
  MaskedRepairInput input;
};

VariantResult generate(ModelVariant variant, const SpanPredictor& predictor,
                       const std::vector<RepairTemplate>& templates,
                       const std::vector<Prompt>& prompts, const std::string& buggy_line,
                       const LineContext& context, const BugSpec& spec,
                       const RepairOptions& options, std::vector<std::string>& notes) {
  VariantResult result;
  result.variant = variant;
  const bool prompted = variant == ModelVariant::prompted;

  std::vector<Unit> units;
  for (std::size_t ti = 0; ti < templates.size(); ++ti) {
    const std::size_t per_template = prompted ? prompts.size() : 1;
    for (std::size_t pi = 0; pi < per_template; ++pi) {
      const std::optional<std::string> prompt =
          prompted ? std::optional(prompts[pi].text) : std::nullopt;
      try {
        units.push_back({ti, prompted ? std::optional(pi) : std::nullopt,
                         apply(templates[ti], buggy_line, context, spec.buggy_line_no,
                               options.context_limit, prompt_token_cost(prompt))});
      } catch (const TemplateError& e) {
        notes.push_back(std::string(to_string(variant)) + ": skipped " + templates[ti].id() +
                        ": " + e.what());
      }
    }
  }
  result.inputs = units.size();
  if (units.empty()) return result;

  const std::size_t total = options.budget.samples_per_model;
  std::map<std::pair<std::size_t, std::string>, CandidatePatch> unique;
  const std::string original(buggy_line);
  for (std::size_t u = 0; u < units.size(); ++u) {
    const std::size_t n = total / units.size() + (u < total % units.size() ? 1 : 0);
    if (n == 0) continue;
    const auto& unit = units[u];
    const std::optional<std::string> prompt =
        unit.prompt_index ? std::optional(prompts[*unit.prompt_index].text) : std::nullopt;
    const auto seed =
        derive_seed(options.seed, {static_cast<std::uint64_t>(variant), unit.template_index,
                                   unit.prompt_index.value_or(0)});
    const auto samples = predictor.sample(unit.input, prompt, n, seed);
    result.samples_drawn += samples.size();
    for (const auto& s : samples) {
      if (s.tokens.empty()) {
        ++result.empty_fills;
        continue;
      }
      CandidatePatch c;
      c.fill_tokens = s.tokens;
      c.fill_text = join_tokens(s.tokens);
      c.template_id = templates[unit.template_index].id();
      c.variant = variant;
      c.score = score_patch(s.token_logprobs);
      c.prompt_index = unit.prompt_index;
      auto key = std::pair(unit.template_index, c.fill_text);
      const auto it = unique.find(key);
      if (it == unique.end()) {
        c.patched_lines = splice(c.fill_text, templates[unit.template_index], original);
        unique.emplace(std::move(key), std::move(c));
      } else if (c.score > it->second.score) {
        c.patched_lines = std::move(it->second.patched_lines);
        it->second = std::move(c);
      }
    }
  }
  result.unique_fills = unique.size();

  std::vector<CandidatePatch> all;
  for (auto& [_, c] : unique) {
    if (c.patched_lines.size() == 1 && c.patched_lines.front() == original) {
      ++result.unchanged_fills;
      continue;
    }
    all.push_back(std::move(c));
  }
  all = rank_patches(std::move(all));
  std::set<std::string> seen_lines;
  for (auto& c : all) {
    if (!seen_lines.insert(c.patched_text()).second) {
      ++result.duplicate_lines;
      continue;
    }
    if (result.ranked.size() < options.budget.validate_top) result.ranked.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < result.ranked.size(); ++i) result.ranked[i].rank_in_variant = i + 1;
  result.outcomes.assign(result.ranked.size(), std::nullopt);

  if (spec.expected_fix) {
    const auto want = code_texts(*spec.expected_fix);
    for (const auto& c : result.ranked) {
      if (c.patched_lines.size() == 1 && code_texts(c.patched_lines.front()) == want) {
        result.correct_rank = c.rank_in_variant;
        break;
      }
    }
  }
  return result;
}

fs::path fresh_work_root(const fs::path& requested) {
  static std::atomic<unsigned> counter{0};
  const fs::path base = requested.empty() ? fs::temp_directory_path() : requested;
  return base / ("surgeon-" + std::to_string(getpid()) + "-" + std::to_string(counter++));
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

RepairReport run_bug(const BugSpec& spec, const ProjectCorpus& corpus,
                     const PredictorSet& models, const RepairOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  RepairReport report;
  report.bug = spec;
  const SourceFile* file = corpus.find_file(spec.file);
  if (!file) throw RepairError("buggy file not in corpus: " + spec.file);
  if (spec.buggy_line_no < 1 || spec.buggy_line_no > file->line_count()) {
    throw RepairError("buggy line " + std::to_string(spec.buggy_line_no) + " outside " +
                      spec.file);
  }
  report.buggy_line = file->line(spec.buggy_line_no);

  const auto templates = enumerate_applicable(report.buggy_line);
  if (templates.empty()) throw RepairError("buggy line has no code tokens");
  for (const auto& t : templates) report.template_ids.push_back(t.id());
  const auto context = file_context(*file, spec.buggy_line_no);

  // Relevant identifiers.
  auto t0 = std::chrono::steady_clock::now();
  std::vector<Prompt> prompts;
  if (models.contains(ModelVariant::prompted)) {
    const ScopeIndex scope(corpus);
    const auto retrieved =
        retrieve(corpus, scope, spec.file, spec.buggy_line_no, options.retrieval);
    prompts = build_prompts(retrieved.identifiers, options.top_n_identifiers,
                            options.prompt_mode);
    for (const auto& p : prompts) report.prompts.push_back(p.text);
    if (prompts.empty()) {
      report.notes.push_back("no relevant identifiers; prompted variant disabled");
    }
  }
  report.timings.push_back({"retrieval", elapsed(t0)});

  // Sampling, one task per variant.
  t0 = std::chrono::steady_clock::now();
  std::vector<ModelVariant> active;
  for (const auto& [v, p] : models) {
    if (!p) continue;
    if (v == ModelVariant::prompted && prompts.empty()) continue;
    active.push_back(v);
  }
  std::vector<std::future<std::pair<VariantResult, std::vector<std::string>>>> tasks;
  for (const auto v : active) {
    tasks.push_back(std::async(std::launch::async, [&, v] {
      std::vector<std::string> notes;
      auto r = generate(v, *models.at(v), templates, prompts, report.buggy_line, context, spec,
                        options, notes);
      return std::pair(std::move(r), std::move(notes));
    }));
  }
  for (auto& t : tasks) {
    auto [r, notes] = t.get();
    report.variants.push_back(std::move(r));
    report.notes.insert(report.notes.end(), notes.begin(), notes.end());
  }
  report.timings.push_back({"sampling", elapsed(t0)});

  report.stop_reason = "exhausted";
  if (!options.validate) {
    report.stop_reason = "not-validated";
    report.timings.push_back({"total", elapsed(started)});
    return report;
  }

  // Validation in rank rounds: round i covers rank i of every variant.
  t0 = std::chrono::steady_clock::now();
  std::size_t rounds = 0;
  for (const auto& v : report.variants) rounds = std::max(rounds, v.ranked.size());
  const fs::path work_root = fresh_work_root(options.work_root);
  WorkdirPool pool(spec.project_root, work_root,
                   std::max<std::size_t>(1, options.parallelism));
  const std::size_t per_batch =
      std::max<std::size_t>(1, pool.size() / std::max<std::size_t>(1, report.variants.size()));
  std::map<std::string, PatchOutcome> cache;
  const auto deadline = started + std::min(spec.time_limit, options.time_limit);

  bool stop = false;
  for (std::size_t first = 0; first < rounds && !stop; first += per_batch) {
    if (std::chrono::steady_clock::now() >= deadline) {
      report.timed_out = true;
      report.stop_reason = "timed-out";
      break;
    }
    const std::size_t last = std::min(rounds, first + per_batch);
    // Unique patched texts in this batch, in round/variant order.
    std::vector<const CandidatePatch*> jobs;
    std::set<std::string> queued;
    for (std::size_t r = first; r < last; ++r) {
      for (const auto& v : report.variants) {
        if (r >= v.ranked.size()) continue;
        const auto text = v.ranked[r].patched_text();
        if (cache.contains(text) || !queued.insert(text).second) continue;
        jobs.push_back(&v.ranked[r]);
      }
    }
    std::vector<std::future<std::pair<ValidationOutcome, std::string>>> running;
    for (const auto* job : jobs) {
      running.push_back(std::async(std::launch::async, [&, job] {
        auto lease = pool.acquire();
        const LinePatch patch{spec.file, spec.buggy_line_no, job->patched_lines};
        apply_patch(lease.path(), *file, patch);
        ValidationOutcome out;
        try {
          out = validate(lease.path(), spec);
        } catch (...) {
          revert_patch(lease.path(), *file);
          throw;
        }
        revert_patch(lease.path(), *file);
        if (!options.incremental) pool.scrub(lease.path());
        return std::pair(std::move(out), job->patched_text());
      }));
    }
    std::vector<std::string> errors;
    for (auto& f : running) {
      try {
        auto [out, text] = f.get();
        report.validation_logs.push_back(ordered_json{
            {"patched_line", text},
            {"classification", std::string(to_string(out.classification))},
            {"exit_code", out.exit_code},
            {"timed_out", out.timed_out},
            {"seconds", out.duration_s},
            {"log", out.log_excerpt}});
        cache[text] = {out.classification, out.exit_code, out.timed_out};
      } catch (const std::exception& e) {
        errors.push_back(e.what());
      }
    }
    if (!errors.empty()) throw RepairError("validation failed: " + errors.front());

    for (std::size_t r = first; r < last && !stop; ++r) {
      for (auto& v : report.variants) {
        if (r >= v.ranked.size()) continue;
        const auto& o = cache.at(v.ranked[r].patched_text());
        v.outcomes[r] = o;
        if (o.classification != Classification::plausible) continue;
        if (options.stop == StopCondition::first_plausible) {
          stop = true;
          report.stop_reason = "first-plausible";
        }
        if (options.stop == StopCondition::first_correct && v.correct_rank &&
            *v.correct_rank == r + 1) {
          stop = true;
          report.stop_reason = "first-correct";
        }
      }
    }
  }
  report.timings.push_back({"validation", elapsed(t0)});
  report.timings.push_back({"total", elapsed(started)});
  return report;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

ordered_json patch_json(const CandidatePatch& c, const std::optional<PatchOutcome>& o) {
  ordered_json j;
  j["rank"] = c.rank_in_variant;
  j["template"] = c.template_id;
  j["fill"] = c.fill_text;
  j["score"] = c.score;
  j["patched_line"] = c.patched_text();
  j["prompt"] = c.prompt_index ? ordered_json(*c.prompt_index) : ordered_json(nullptr);
  if (o) {
    j["outcome"] = std::string(to_string(o->classification));
    j["exit_code"] = o->exit_code;
    j["timed_out"] = o->timed_out;
  } else {
    j["outcome"] = nullptr;
  }
  return j;
}

}  // namespace

ordered_json RepairReport::to_json() const {
  ordered_json j;
  j["report"] = "surgeon-repair";
  j["version"] = 1;
  j["config"] = config;
  j["token_granularity"] = "lexer";
  ordered_json bugj;
  bugj["id"] = bug.id;
  bugj["file"] = bug.file;
  bugj["line"] = bug.buggy_line_no;
  bugj["buggy_line"] = buggy_line;
  j["bug"] = bugj;
  j["templates"] = template_ids;
  j["prompts"] = prompts;
  j["notes"] = notes;

  ordered_json vars = ordered_json::array();
  ordered_json plausible = ordered_json::array();
  std::size_t compile_errors = 0;
  for (const auto& v : variants) {
    ordered_json vj;
    const std::string name(to_string(v.variant));
    vj["variant"] = name;
    vj["inputs"] = v.inputs;
    vj["samples"] = v.samples_drawn;
    vj["empty_fills"] = v.empty_fills;
    vj["unchanged_fills"] = v.unchanged_fills;
    vj["unique_fills"] = v.unique_fills;
    vj["duplicate_lines_removed"] = v.duplicate_lines;
    vj["candidates"] = v.ranked.size();
    const auto validated = v.validated();
    vj["validated"] = validated;
    vj["compile_errors"] = v.count(Classification::compile_error);
    vj["test_failures"] = v.count(Classification::test_fail);
    vj["plausible"] = v.count(Classification::plausible);
    vj["compile_error_pct"] =
        validated == 0 ? 0.0
                       : 100.0 * static_cast<double>(v.count(Classification::compile_error)) /
                             static_cast<double>(validated);
    vj["correct_rank"] = v.correct_rank ? ordered_json(*v.correct_rank) : ordered_json(nullptr);
    compile_errors += v.count(Classification::compile_error);
    ordered_json patches = ordered_json::array();
    for (std::size_t i = 0; i < v.ranked.size(); ++i) {
      if (!v.outcomes[i]) continue;
      patches.push_back(patch_json(v.ranked[i], v.outcomes[i]));
      if (v.outcomes[i]->classification == Classification::plausible) {
        plausible.push_back({{"variant", name},
                             {"rank", v.ranked[i].rank_in_variant},
                             {"template", v.ranked[i].template_id},
                             {"patched_line", v.ranked[i].patched_text()}});
      }
    }
    vj["patches"] = std::move(patches);
    vars.push_back(std::move(vj));
  }
  j["variants"] = std::move(vars);
  j["plausible"] = std::move(plausible);

  ordered_json summary;
  const auto validated = total_validated();
  summary["validated"] = validated;
  summary["compile_error_pct"] =
      validated == 0 ? 0.0
                     : 100.0 * static_cast<double>(compile_errors) / static_cast<double>(validated);
  std::set<std::string> compilable;
  for (const auto& v : variants) {
    for (std::size_t i = 0; i < v.ranked.size(); ++i) {
      if (v.outcomes[i] && v.outcomes[i]->classification != Classification::compile_error) {
        compilable.insert(v.ranked[i].patched_text());
      }
    }
  }
  summary["unique_compilable"] = compilable.size();
  ordered_json ranks = ordered_json::object();
  for (const auto& [k, r] : correct_ranks()) ranks[k] = r;
  summary["correct_ranks"] = ranks;
  const auto merged = merge_min_rank(correct_ranks());
  summary["min_rank"] = merged ? ordered_json(*merged) : ordered_json(nullptr);
  summary["stop_reason"] = stop_reason;
  summary["timed_out"] = timed_out;
  j["summary"] = std::move(summary);
  return j;
}

ordered_json RepairReport::timing_json() const {
  ordered_json j;
  j["bug"] = bug.id;
  ordered_json stages = ordered_json::array();
  for (const auto& t : timings) stages.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
  j["stages"] = std::move(stages);
  j["validations"] = validation_logs;
  return j;
}

}  // namespace surgeon
