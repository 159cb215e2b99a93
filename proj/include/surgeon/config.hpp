#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "surgeon/masking.hpp"
#include "surgeon/model.hpp"
#include "surgeon/repair.hpp"
#include "surgeon/retrieval.hpp"
#include "surgeon/validation.hpp"

#include "json.hpp"

namespace surgeon {

/// Config problem tied to a field and, for files, a line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, std::size_t line, const std::string& field,
              const std::string& msg);
  const std::string& field() const { return field_; }
  std::size_t line() const { return line_; }

 private:
  std::string field_;
  std::size_t line_;
};

struct ConfigEntry {
  std::string value;
  std::size_t line = 0;  // 0 for command-line values
  std::string source;
};

using ConfigEntries = std::map<std::string, ConfigEntry>;

/// `key = value` lines; `#` starts a comment line; blank lines ignored.
ConfigEntries parse_config_text(std::string_view text, const std::string& source);
ConfigEntries read_config_file(const std::filesystem::path& path);

enum class Backend { reference, remote };

/// Every tunable of a run, with built-in defaults.
struct RunConfig {
  // masking
  double mask_rate = 0.50;
  std::uint32_t iterations = 10;
  double mean_span_len = 3.0;
  MaskStrategy strategy = MaskStrategy::ro_template;
  // retrieval
  std::size_t top_n = 5;
  RetrievalScope scope = RetrievalScope::file;
  PromptMode prompt_mode = PromptMode::separate;
  std::size_t min_identifier_length = 4;
  std::size_t top_frequent = 50;
  // model
  double top_p = 1.0;
  double temperature = 1.0;
  std::size_t context_limit = 512;
  std::size_t max_span_len = 64;
  double prompt_weight = 0.3;
  int ngram_order = 4;
  double smoothing = 0.01;
  Backend backend = Backend::reference;
  std::string remote_url;
  std::size_t remote_in_flight = 4;
  // repair / validation
  std::size_t samples = 5000;
  std::size_t validate_top = 1000;
  std::chrono::seconds time_limit{5 * 3600};
  StopCondition stop = StopCondition::none;
  std::size_t parallelism = WorkdirPool::default_size();
  bool incremental = false;
  std::uint64_t seed = 0;

  MaskingConfig masking() const;
  SamplingParams sampling() const;
  RetrievalConfig retrieval() const;
  RepairOptions repair_options() const;
};

/// Applies entries on top of `cfg`. Unknown keys and malformed values raise
/// ConfigError naming the field.
void apply_entries(RunConfig& cfg, const ConfigEntries& entries);

nlohmann::ordered_json to_json(const RunConfig& cfg);

/// Parses `5h`, `30m`, `45s` or a plain number of seconds.
std::chrono::seconds parse_duration(std::string_view text);

/// Bug config file. Relative `project_root` resolves against the config
/// file's directory.
BugSpec read_bug_config(const std::filesystem::path& path);
BugSpec bug_from_entries(const ConfigEntries& entries, const std::filesystem::path& base_dir,
                         const std::string& default_id);

nlohmann::ordered_json to_json(const BugSpec& bug);

}  // namespace surgeon
