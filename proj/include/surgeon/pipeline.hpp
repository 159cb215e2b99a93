#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "surgeon/config.hpp"

#include "json.hpp"

namespace surgeon {

IngestOptions ingest_options(const BugSpec& bug);

/// Reference model trained on `dataset` with the config's order and
/// smoothing.
std::shared_ptr<ReferenceModel> train_model(const std::vector<MaskedSample>& dataset,
                                            const RunConfig& cfg);

struct TrainedModels {
  std::shared_ptr<const ReferenceModel> ki;
  std::shared_ptr<const ReferenceModel> ro;
};

/// Builds the KI and RO datasets of `corpus` and trains one model on each.
TrainedModels train_project_models(const ProjectCorpus& corpus, const RunConfig& cfg);

/// The four variants on the reference backend: base and prompted-base share
/// an untrained model.
PredictorSet reference_predictors(const TrainedModels& models, const RunConfig& cfg);

/// The four variants served by a remote model.
PredictorSet remote_predictors(const RunConfig& cfg);

/// Aggregates repair reports into summary rows.
nlohmann::ordered_json summarize_reports(const std::vector<nlohmann::ordered_json>& reports);

/// Human-readable table of a summary.
std::string render_summary(const nlohmann::ordered_json& summary);

}  // namespace surgeon
