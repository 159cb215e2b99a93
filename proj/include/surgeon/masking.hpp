#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "surgeon/corpus.hpp"

namespace surgeon {

enum class MaskStrategy { ki, ro_template, ro_ast, ro_line };

std::string_view to_string(MaskStrategy s);
std::optional<MaskStrategy> parse_strategy(std::string_view s);

/// `<extra_id_N>`.
std::string sentinel(std::size_t index);
/// Index of a sentinel token, or nullopt for any other text.
std::optional<std::size_t> sentinel_index(std::string_view text);

struct SourceRef {
  std::string file;
  int start_line = 0;
  int end_line = 0;
  std::size_t function_index = 0;

  friend bool operator==(const SourceRef&, const SourceRef&) = default;
};

struct SpanTarget {
  std::size_t sentinel = 0;
  std::vector<std::string> tokens;

  friend bool operator==(const SpanTarget&, const SpanTarget&) = default;
};

/// A masked training/inference record. `masked` holds the token texts of the
/// function (whitespace and comments included) with each masked span
/// replaced by its sentinel.
struct MaskedSample {
  SourceRef source;
  std::vector<std::string> masked;
  std::vector<SpanTarget> targets;
  MaskStrategy strategy = MaskStrategy::ki;
  std::string template_id;  // RO strategies only
  std::uint32_t iteration = 0;
  std::uint64_t rng_seed = 0;

  /// Substitute the targets back into the sentinels.
  std::vector<std::string> reconstruct() const;
  /// Number of code (maskable) tokens inside the targets.
  std::size_t masked_code_tokens() const;
  /// Positions (code-token ordinal) of the masked tokens; used to compare
  /// two maskings of the same function.
  std::vector<std::size_t> masked_positions() const;

  friend bool operator==(const MaskedSample&, const MaskedSample&) = default;
};

struct MaskingConfig {
  double mask_rate = 0.50;
  std::uint32_t iterations = 10;
  double mean_span_len = 3.0;
  std::uint64_t seed = 0;
};

class MaskingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void validate(const MaskingConfig& cfg);

struct DatasetBuild {
  std::vector<MaskedSample> samples;
  std::vector<std::string> warnings;
};

/// Knowledge-intensified dataset: per function and iteration, a multi-span
/// masking of ~mask_rate of the code tokens.
DatasetBuild build_ki_dataset(const ProjectCorpus& corpus, const MaskingConfig& cfg);

/// Masks one function for one iteration (KI). nullopt when the function has
/// fewer than two maskable tokens.
std::optional<MaskedSample> mask_function_ki(const FunctionUnit& fn,
                                             std::size_t function_index,
                                             std::uint32_t iteration,
                                             const MaskingConfig& cfg);

/// Repair-oriented dataset: per function and iteration, one eligible body
/// line masked with a single span chosen by `strategy`.
DatasetBuild build_ro_dataset(const ProjectCorpus& corpus, MaskStrategy strategy,
                              const MaskingConfig& cfg);

std::optional<MaskedSample> mask_function_ro(const FunctionUnit& fn,
                                             std::size_t function_index,
                                             std::uint32_t iteration,
                                             MaskStrategy strategy,
                                             const MaskingConfig& cfg);

/// Body lines eligible for RO masking: non-blank, with code, strictly between
/// the body-opening line and the closing-brace line.
std::vector<int> eligible_lines(const FunctionUnit& fn);

/// Candidate subranges ([begin, end) over the line's code tokens) used by the
/// AST-style strategy: contents of balanced bracket groups and operands
/// delimited by top-level operators.
std::vector<std::pair<std::size_t, std::size_t>> ast_candidates(
    const std::vector<Token>& line_tokens);

class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& msg, std::size_t line)
      : std::runtime_error(msg), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// One JSON record per line, fixed field order.
void write_dataset(const std::vector<MaskedSample>& samples,
                   const std::filesystem::path& path);
std::vector<MaskedSample> read_dataset(const std::filesystem::path& path);

std::string to_record(const MaskedSample& sample);
MaskedSample from_record(std::string_view line, std::size_t line_no);

}  // namespace surgeon
