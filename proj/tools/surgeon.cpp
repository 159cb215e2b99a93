// surgeon: command-line driver for the repair pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "surgeon/config.hpp"
#include "surgeon/pipeline.hpp"
#include "surgeon/remote.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace surgeon;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kMissingInput = 3, kTimedOut = 4 };

struct MissingInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_input(const fs::path& p, const std::string& what, const std::string& hint) {
  if (!fs::exists(p)) {
    throw MissingInput(what + " not found: " + p.string() + " (" + hint + ")");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string dump(const ordered_json& j, bool pretty) {
  return (pretty ? j.dump(2) : j.dump()) + "\n";
}

ordered_json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput("cannot read " + path.string());
  return ordered_json::parse(in);
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    write_text(out_path, text);
  }
}

// Flags that override config-file values, keyed like config entries.
struct Overrides {
  std::string config_file;
  std::map<std::string, std::string> values;

  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& key,
                   const std::string& help) {
    return app->add_option(flag, values[key], help);
  }

  RunConfig resolve(const CLI::App* app) const {
    RunConfig cfg;
    if (!config_file.empty()) apply_entries(cfg, read_config_file(config_file));
    ConfigEntries flags;
    for (const auto& [key, value] : values) {
      const auto* opt = app->get_option_no_throw("--" + flag_name(key));
      if (opt && opt->count() > 0) flags[key] = {value, 0, "command line --" + flag_name(key)};
    }
    apply_entries(cfg, flags);
    return cfg;
  }

  static std::string flag_name(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
  }
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_file, "run config file (key = value)");
  o.add(app, "--seed", "seed", "random seed");
}

void add_masking(CLI::App* app, Overrides& o) {
  o.add(app, "--mask-rate", "mask_rate", "KI mask rate in (0, 1)");
  o.add(app, "--iterations", "iterations", "masking iterations per function");
  o.add(app, "--strategy", "strategy", "RO strategy: template, ast or line");
}

void add_retrieval(CLI::App* app, Overrides& o) {
  o.add(app, "--top-n", "top_n", "number of relevant identifiers");
  o.add(app, "--scope", "scope", "identifier search scope: file or project");
  o.add(app, "--prompt-mode", "prompt_mode", "separate or combined prompts");
}

void add_repair(CLI::App* app, Overrides& o) {
  add_masking(app, o);
  add_retrieval(app, o);
  o.add(app, "--samples", "samples", "samples per model variant");
  o.add(app, "--validate-top", "validate_top", "unique patches validated per variant");
  o.add(app, "--backend", "backend", "reference or remote");
  o.add(app, "--remote-url", "remote_url", "base URL of the remote predictor");
  o.add(app, "--time-limit", "time_limit", "time limit per bug, e.g. 5h or 600");
  o.add(app, "--stop", "stop", "none, first-plausible or first-correct");
  o.add(app, "--parallelism", "parallelism", "concurrent validations");
  o.add(app, "--top-p", "top_p", "nucleus sampling mass");
  o.add(app, "--temperature", "temperature", "sampling temperature");
}

ordered_json dataset_meta(const RunConfig& cfg, MaskStrategy strategy, std::size_t samples,
                          const std::vector<std::string>& warnings, const fs::path& corpus) {
  ordered_json meta;
  meta["artifact"] = "surgeon-dataset";
  meta["config"] = to_json(cfg);
  meta["strategy"] = std::string(to_string(strategy));
  meta["mask_rate"] = cfg.mask_rate;
  meta["iterations"] = cfg.iterations;
  meta["token_granularity"] = "lexer";
  meta["corpus"] = corpus.string();
  meta["samples"] = samples;
  meta["warnings"] = warnings;
  return meta;
}

ProjectCorpus load_corpus(const fs::path& path) {
  require_input(path, "corpus cache", "run `surgeon ingest` first");
  return read_corpus_cache(path);
}

RepairReport repair_one(const BugSpec& bug, const RunConfig& cfg, const std::string& ki_path,
                        const std::string& ro_path) {
  require_input(bug.project_root, "project root", "check project_root in the bug config");
  const auto corpus = ingest(bug.project_root, ingest_options(bug));
  PredictorSet models;
  if (cfg.backend == Backend::remote) {
    models = remote_predictors(cfg);
  } else {
    TrainedModels trained;
    if (!ki_path.empty() || !ro_path.empty()) {
      if (!ki_path.empty()) {
        require_input(ki_path, "KI model", "run `surgeon train` on a KI dataset");
        trained.ki = std::make_shared<const ReferenceModel>(ReferenceModel::load(ki_path));
      }
      if (!ro_path.empty()) {
        require_input(ro_path, "RO model", "run `surgeon train` on an RO dataset");
        trained.ro = std::make_shared<const ReferenceModel>(ReferenceModel::load(ro_path));
      }
    } else {
      trained = train_project_models(corpus, cfg);
    }
    models = reference_predictors(trained, cfg);
  }
  auto report = run_bug(bug, corpus, models, cfg.repair_options());
  report.config = to_json(cfg);
  report.config["bug"] = to_json(bug);
  report.config["ki_model"] = ki_path.empty() ? ordered_json("trained in-process") : ordered_json(ki_path);
  report.config["ro_model"] = ro_path.empty() ? ordered_json("trained in-process") : ordered_json(ro_path);
  return report;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"surgeon: cloze-style program repair with project-specific knowledge"};
  app.require_subcommand(1);
  app.fallthrough();
  bool pretty = false;
  app.add_flag("--pretty", pretty, "human-readable output");

  // ingest
  Overrides ingest_o;
  std::string ingest_project, ingest_out = "corpus.jsonl";
  std::vector<std::string> ingest_include, ingest_exclude;
  auto* ingest_cmd = app.add_subcommand("ingest", "ingest a project into a corpus cache");
  ingest_cmd->add_option("--project", ingest_project, "project root")->required();
  ingest_cmd->add_option("--include", ingest_include, "include glob (repeatable)");
  ingest_cmd->add_option("--exclude", ingest_exclude, "exclude glob (repeatable)");
  ingest_cmd->add_option("--out", ingest_out, "corpus cache path");

  // build-ki / build-ro
  Overrides ki_o, ro_o;
  std::string ki_corpus = "corpus.jsonl", ki_out = "ki.jsonl";
  auto* ki_cmd = app.add_subcommand("build-ki", "build the knowledge-intensified dataset");
  ki_cmd->add_option("--corpus", ki_corpus, "corpus cache");
  ki_cmd->add_option("--out", ki_out, "dataset path");
  add_common(ki_cmd, ki_o);
  add_masking(ki_cmd, ki_o);

  std::string ro_corpus = "corpus.jsonl", ro_out = "ro.jsonl";
  auto* ro_cmd = app.add_subcommand("build-ro", "build the repair-oriented dataset");
  ro_cmd->add_option("--corpus", ro_corpus, "corpus cache");
  ro_cmd->add_option("--out", ro_out, "dataset path");
  add_common(ro_cmd, ro_o);
  add_masking(ro_cmd, ro_o);

  // train
  Overrides train_o;
  std::vector<std::string> train_data;
  std::string train_out = "model.snapshot";
  auto* train_cmd = app.add_subcommand("train", "train a reference model on datasets");
  train_cmd->add_option("--dataset", train_data, "dataset file (repeatable)")->required();
  train_cmd->add_option("--out", train_out, "model snapshot path");
  add_common(train_cmd, train_o);

  // retrieve
  Overrides ret_o;
  std::string ret_bug, ret_out;
  auto* ret_cmd = app.add_subcommand("retrieve", "rank relevant identifiers for a bug");
  ret_cmd->add_option("--bug", ret_bug, "bug config")->required();
  ret_cmd->add_option("--out", ret_out, "output path (default stdout)");
  add_common(ret_cmd, ret_o);
  add_retrieval(ret_cmd, ret_o);

  // repair
  Overrides rep_o;
  std::string rep_bug, rep_out, rep_ki, rep_ro;
  auto* rep_cmd = app.add_subcommand("repair", "generate, rank and validate patches for a bug");
  rep_cmd->add_option("--bug", rep_bug, "bug config")->required();
  rep_cmd->add_option("--out", rep_out, "report path (default stdout)");
  rep_cmd->add_option("--ki-model", rep_ki, "KI model snapshot (trained in-process if absent)");
  rep_cmd->add_option("--ro-model", rep_ro, "RO model snapshot (trained in-process if absent)");
  add_common(rep_cmd, rep_o);
  add_repair(rep_cmd, rep_o);

  // report
  std::vector<std::string> report_inputs;
  std::string report_out;
  auto* report_cmd = app.add_subcommand("report", "summarize repair reports");
  report_cmd->add_option("reports", report_inputs, "repair report files")->required();
  report_cmd->add_option("--out", report_out, "output path (default stdout)");

  // sweep
  Overrides sweep_o;
  std::string sweep_bug, sweep_out = "sweep";
  std::vector<std::string> sweep_rates, sweep_strategies, sweep_modes;
  auto* sweep_cmd = app.add_subcommand("sweep", "repair one bug over a parameter grid");
  sweep_cmd->add_option("--bug", sweep_bug, "bug config")->required();
  sweep_cmd->add_option("--out", sweep_out, "output directory");
  sweep_cmd->add_option("--mask-rates", sweep_rates, "KI mask rates")->delimiter(',');
  sweep_cmd->add_option("--strategies", sweep_strategies, "RO strategies")->delimiter(',');
  sweep_cmd->add_option("--prompt-modes", sweep_modes, "prompt modes")->delimiter(',');
  add_common(sweep_cmd, sweep_o);
  add_retrieval(sweep_cmd, sweep_o);
  sweep_o.add(sweep_cmd, "--iterations", "iterations", "masking iterations per function");
  sweep_o.add(sweep_cmd, "--samples", "samples", "samples per model variant");
  sweep_o.add(sweep_cmd, "--validate-top", "validate_top", "unique patches validated per variant");
  sweep_o.add(sweep_cmd, "--stop", "stop", "none, first-plausible or first-correct");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*ingest_cmd) {
      IngestOptions opts;
      if (!ingest_include.empty()) opts.include_globs = ingest_include;
      if (!ingest_exclude.empty()) opts.exclude_globs = ingest_exclude;
      require_input(ingest_project, "project root", "pass an existing directory");
      const auto corpus = ingest(ingest_project, opts);
      write_corpus_cache(corpus, ingest_out);
      ordered_json j;
      j["artifact"] = "surgeon-corpus";
      j["config"] = {{"project", ingest_project},
                     {"include_globs", opts.include_globs},
                     {"exclude_globs", opts.exclude_globs}};
      j["files"] = corpus.files.size();
      j["functions"] = corpus.functions.size();
      j["warnings"] = corpus.warnings;
      write_text(ingest_out + ".meta.json", dump(j, true));
      std::cout << dump(j, pretty);
      return kOk;
    }
    if (*ki_cmd || *ro_cmd) {
      const bool ki = ki_cmd->parsed();
      auto* cmd = ki ? ki_cmd : ro_cmd;
      const auto cfg = (ki ? ki_o : ro_o).resolve(cmd);
      const fs::path corpus_path = ki ? ki_corpus : ro_corpus;
      const std::string out = ki ? ki_out : ro_out;
      const auto corpus = load_corpus(corpus_path);
      const auto strategy = ki ? MaskStrategy::ki : cfg.strategy;
      const auto built = ki ? build_ki_dataset(corpus, cfg.masking())
                            : build_ro_dataset(corpus, strategy, cfg.masking());
      write_dataset(built.samples, out);
      const auto meta = dataset_meta(cfg, strategy, built.samples.size(), built.warnings,
                                     corpus_path);
      write_text(out + ".meta.json", dump(meta, true));
      std::cout << dump(meta, pretty);
      return kOk;
    }
    if (*train_cmd) {
      const auto cfg = train_o.resolve(train_cmd);
      ReferenceModel model(cfg.ngram_order, cfg.smoothing);
      std::size_t samples = 0;
      for (const auto& d : train_data) {
        require_input(d, "dataset", "run `surgeon build-ki` or `surgeon build-ro` first");
        const auto data = read_dataset(d);
        samples += data.size();
        model.train(data);
      }
      model.save(train_out);
      ordered_json meta;
      meta["artifact"] = "surgeon-model";
      meta["config"] = to_json(cfg);
      meta["datasets"] = train_data;
      meta["samples"] = samples;
      meta["events"] = model.events();
      meta["vocabulary"] = model.vocabulary().size();
      write_text(train_out + ".meta.json", dump(meta, true));
      std::cout << dump(meta, pretty);
      return kOk;
    }
    if (*ret_cmd) {
      const auto cfg = ret_o.resolve(ret_cmd);
      require_input(ret_bug, "bug config", "pass --bug");
      const auto bug = read_bug_config(ret_bug);
      require_input(bug.project_root, "project root", "check project_root in the bug config");
      const auto corpus = ingest(bug.project_root, ingest_options(bug));
      const ScopeIndex scope(corpus);
      const auto result = retrieve(corpus, scope, bug.file, bug.buggy_line_no, cfg.retrieval());
      const auto prompts = build_prompts(result.identifiers, cfg.top_n, cfg.prompt_mode);
      if (pretty) {
        std::ostringstream out;
        char buf[512];
        std::snprintf(buf, sizeof buf, "%4s  %-32s %-8s %-20s %10s  %s\n", "rank", "name", "kind",
                      "type", "similarity", "donor");
        out << buf;
        for (const auto& id : result.identifiers) {
          std::snprintf(buf, sizeof buf, "%4zu  %-32s %-8s %-20s %10.4f  %s:%d\n", id.rank,
                        id.name.c_str(), std::string(to_string(id.kind)).c_str(),
                        id.type_info.value_or("-").c_str(), id.similarity, id.donor_file.c_str(),
                        id.donor_line);
          out << buf;
        }
        out << "\n";
        for (const auto& p : prompts) out << p.text << "\n";
        emit(ret_out, out.str());
      } else {
        ordered_json j;
        j["artifact"] = "surgeon-retrieval";
        j["config"] = to_json(cfg);
        j["bug"] = to_json(bug);
        ordered_json rows = ordered_json::array();
        for (const auto& id : result.identifiers) {
          rows.push_back({{"rank", id.rank},
                          {"name", id.name},
                          {"kind", std::string(to_string(id.kind))},
                          {"type", id.type_info ? ordered_json(*id.type_info) : ordered_json(nullptr)},
                          {"type_ambiguous", id.type_ambiguous},
                          {"similarity", id.similarity},
                          {"donor_file", id.donor_file},
                          {"donor_line", id.donor_line}});
        }
        j["identifiers"] = std::move(rows);
        ordered_json pj = ordered_json::array();
        for (const auto& p : prompts) pj.push_back(p.text);
        j["prompts"] = std::move(pj);
        emit(ret_out, dump(j, false));
      }
      return kOk;
    }
    if (*rep_cmd) {
      const auto cfg = rep_o.resolve(rep_cmd);
      require_input(rep_bug, "bug config", "pass --bug");
      const auto bug = read_bug_config(rep_bug);
      const auto report = repair_one(bug, cfg, rep_ki, rep_ro);
      const auto j = report.to_json();
      emit(rep_out, dump(j, pretty));
      if (!rep_out.empty() && rep_out != "-") {
        write_text(rep_out + ".timing.json", dump(report.timing_json(), true));
      }
      return report.timed_out ? kTimedOut : kOk;
    }
    if (*report_cmd) {
      std::vector<ordered_json> reports;
      for (const auto& p : report_inputs) {
        require_input(p, "repair report", "run `surgeon repair` first");
        reports.push_back(read_json(p));
      }
      const auto summary = summarize_reports(reports);
      emit(report_out, pretty ? render_summary(summary) : dump(summary, false));
      return kOk;
    }
    if (*sweep_cmd) {
      const auto base_cfg = sweep_o.resolve(sweep_cmd);
      require_input(sweep_bug, "bug config", "pass --bug");
      const auto bug = read_bug_config(sweep_bug);
      if (sweep_rates.empty()) sweep_rates.push_back(std::to_string(base_cfg.mask_rate));
      if (sweep_strategies.empty()) {
        sweep_strategies.emplace_back(to_string(base_cfg.strategy));
      }
      if (sweep_modes.empty()) {
        sweep_modes.push_back(base_cfg.prompt_mode == PromptMode::separate ? "separate"
                                                                            : "combined");
      }
      std::vector<ordered_json> reports;
      bool timed_out = false;
      for (const auto& rate : sweep_rates) {
        for (const auto& strategy : sweep_strategies) {
          for (const auto& mode : sweep_modes) {
            RunConfig cfg = base_cfg;
            apply_entries(cfg, {{"mask_rate", {rate, 0, "sweep grid"}},
                                {"strategy", {strategy, 0, "sweep grid"}},
                                {"prompt_mode", {mode, 0, "sweep grid"}}});
            BugSpec cell = bug;
            cell.id = bug.id + "@rate=" + rate + ",strategy=" + std::string(to_string(cfg.strategy)) +
                      ",prompts=" + mode;
            auto report = repair_one(cell, cfg, "", "");
            timed_out = timed_out || report.timed_out;
            auto j = report.to_json();
            std::string name = cell.id;
            for (auto& c : name) {
              if (c == '@' || c == '=' || c == ',') c = '_';
            }
            write_text(fs::path(sweep_out) / (name + ".json"), dump(j, false));
            reports.push_back(std::move(j));
          }
        }
      }
      const auto summary = summarize_reports(reports);
      write_text(fs::path(sweep_out) / "summary.json", dump(summary, true));
      std::cout << (pretty ? render_summary(summary) : dump(summary, false));
      return timed_out ? kTimedOut : kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const MissingInput& e) {
    std::cerr << "missing input: " << e.what() << "\n";
    return kMissingInput;
  } catch (const TransportError& e) {
    std::cerr << "remote error after " << e.attempts() << " attempt(s): " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
