#include "surgeon/pipeline.hpp"

#include <cstdio>
#include <set>
#include <sstream>

#include "surgeon/remote.hpp"

namespace surgeon {

using nlohmann::ordered_json;

IngestOptions ingest_options(const BugSpec& bug) {
  IngestOptions o;
  o.include_globs = bug.include_globs;
  o.exclude_globs = bug.exclude_globs;
  return o;
}

std::shared_ptr<ReferenceModel> train_model(const std::vector<MaskedSample>& dataset,
                                            const RunConfig& cfg) {
  auto m = std::make_shared<ReferenceModel>(cfg.ngram_order, cfg.smoothing);
  m->train(dataset);
  return m;
}

TrainedModels train_project_models(const ProjectCorpus& corpus, const RunConfig& cfg) {
  const auto masking = cfg.masking();
  TrainedModels out;
  out.ki = train_model(build_ki_dataset(corpus, masking).samples, cfg);
  out.ro = train_model(build_ro_dataset(corpus, cfg.strategy, masking).samples, cfg);
  return out;
}

PredictorSet reference_predictors(const TrainedModels& models, const RunConfig& cfg) {
  const auto params = cfg.sampling();
  const auto untrained = std::make_shared<const ReferenceModel>(cfg.ngram_order, cfg.smoothing);
  PredictorSet set;
  set[ModelVariant::base] =
      std::make_shared<ReferencePredictor>(untrained, ModelVariant::base, params);
  set[ModelVariant::prompted] =
      std::make_shared<ReferencePredictor>(untrained, ModelVariant::prompted, params);
  if (models.ki) {
    set[ModelVariant::ki] = std::make_shared<ReferencePredictor>(models.ki, ModelVariant::ki, params);
  }
  if (models.ro) {
    set[ModelVariant::ro] = std::make_shared<ReferencePredictor>(models.ro, ModelVariant::ro, params);
  }
  return set;
}

PredictorSet remote_predictors(const RunConfig& cfg) {
  RemoteOptions o;
  o.base_url = cfg.remote_url;
  o.max_in_flight = cfg.remote_in_flight;
  PredictorSet set;
  for (const auto v : {ModelVariant::base, ModelVariant::ki, ModelVariant::ro,
                       ModelVariant::prompted}) {
    set[v] = std::make_shared<RemotePredictor>(o, v, cfg.sampling());
  }
  return set;
}

ordered_json summarize_reports(const std::vector<ordered_json>& reports) {
  const std::vector<std::string> names{"base", "ki", "ro", "prompted-base"};
  std::map<std::string, std::size_t> plausible_bugs, validated, compile_errors;
  std::size_t any_plausible = 0;
  ordered_json rows = ordered_json::array();
  for (const auto& r : reports) {
    ordered_json row;
    row["bug"] = r.at("bug").at("id");
    const auto& variants = r.at("variants");
    ordered_json per = ordered_json::object();
    for (const auto& v : variants) {
      const auto name = v.at("variant").get<std::string>();
      const auto p = v.at("plausible").get<std::size_t>();
      per[name] = p;
      if (p > 0) ++plausible_bugs[name];
      validated[name] += v.at("validated").get<std::size_t>();
      compile_errors[name] += v.at("compile_errors").get<std::size_t>();
    }
    const bool plausible = !r.at("plausible").empty();
    if (plausible) ++any_plausible;
    row["plausible"] = plausible;
    row["plausible_per_variant"] = per;
    row["correct_ranks"] = r.at("summary").at("correct_ranks");
    row["min_rank"] = r.at("summary").at("min_rank");
    row["compile_error_pct"] = r.at("summary").at("compile_error_pct");
    row["unique_compilable"] = r.at("summary").at("unique_compilable");
    row["timed_out"] = r.at("summary").at("timed_out");
    rows.push_back(std::move(row));
  }
  ordered_json out;
  out["bugs_attempted"] = reports.size();
  out["bugs_plausible"] = any_plausible;
  out["plausible"] = "plausible " + std::to_string(any_plausible) + "/" +
                     std::to_string(reports.size());
  ordered_json per = ordered_json::object();
  for (const auto& n : names) {
    if (!validated.contains(n) && !plausible_bugs.contains(n)) continue;
    ordered_json v;
    v["bugs_plausible"] = plausible_bugs[n];
    v["validated"] = validated[n];
    v["compile_error_pct"] =
        validated[n] == 0 ? 0.0
                          : 100.0 * static_cast<double>(compile_errors[n]) /
                                static_cast<double>(validated[n]);
    per[n] = std::move(v);
  }
  out["variants"] = std::move(per);
  out["bugs"] = std::move(rows);
  return out;
}

std::string render_summary(const ordered_json& s) {
  std::ostringstream out;
  out << s.at("plausible").get<std::string>() << "\n\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %9s %9s %12s\n", "variant", "plausible", "validated",
                "compile-err%");
  out << buf;
  for (const auto& [name, v] : s.at("variants").items()) {
    std::snprintf(buf, sizeof buf, "%-16s %9zu %9zu %12.1f\n", name.c_str(),
                  v.at("bugs_plausible").get<std::size_t>(), v.at("validated").get<std::size_t>(),
                  v.at("compile_error_pct").get<double>());
    out << buf;
  }
  out << "\n";
  std::snprintf(buf, sizeof buf, "%-24s %9s %8s %12s %10s\n", "bug", "plausible", "min-rank",
                "compile-err%", "compilable");
  out << buf;
  for (const auto& row : s.at("bugs")) {
    const auto& mr = row.at("min_rank");
    const std::string rank = mr.is_null() ? "-" : std::to_string(mr.get<std::size_t>());
    std::snprintf(buf, sizeof buf, "%-24s %9s %8s %12.1f %10zu\n",
                  row.at("bug").get<std::string>().c_str(),
                  row.at("plausible").get<bool>() ? "yes" : "no", rank.c_str(),
                  row.at("compile_error_pct").get<double>(),
                  row.at("unique_compilable").get<std::size_t>());
    out << buf;
  }
  return out.str();
}

}  // namespace surgeon
