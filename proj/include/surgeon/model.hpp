#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "surgeon/masking.hpp"
#include "surgeon/templates.hpp"

namespace surgeon {

enum class ModelVariant { base, ki, ro, prompted };

std::string_view to_string(ModelVariant v);
std::optional<ModelVariant> parse_variant(std::string_view s);

/// Pseudo-token closing a span.
inline constexpr std::string_view kEndToken = "</s>";

struct SpanSample {
  std::vector<std::string> tokens;
  std::vector<double> token_logprobs;  // one per token, each <= 0
  bool terminated = false;             // end token emitted before the cap

  friend bool operator==(const SpanSample&, const SpanSample&) = default;
};

struct SamplingParams {
  double top_p = 1.0;
  double temperature = 1.0;
  std::size_t max_span_len = 64;
  double prompt_weight = 0.3;  // interpolation weight toward prompt identifiers
  std::size_t context_limit = kDefaultContextLimit;
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void validate(const SamplingParams& params);

/// Mean per-token log-probability. Throws ModelError on an empty list.
double score_patch(const std::vector<double>& token_logprobs);

/// What the model may emit for one query: the trained vocabulary plus the
/// tokens visible in the input and prompt, plus the end token.
struct QueryVocabulary {
  std::vector<std::string> tokens;  // sorted, unique
  std::vector<std::string> prompt_ids;

  bool contains(std::string_view t) const;
};

/// Backoff n-gram model over code tokens. Histories are the code tokens
/// preceding a position; only masked targets (and the end of each span)
/// are counted as events.
class ReferenceModel {
 public:
  static constexpr int kDefaultOrder = 4;
  static constexpr double kDefaultAlpha = 0.01;

  explicit ReferenceModel(int order = kDefaultOrder, double alpha = kDefaultAlpha);

  int order() const { return order_; }
  double alpha() const { return alpha_; }
  bool empty() const { return events_ == 0; }
  std::uint64_t events() const { return events_; }
  const std::vector<std::string>& vocabulary() const { return vocab_; }

  void train(const MaskedSample& sample);
  void train(const std::vector<MaskedSample>& dataset);

  /// Count of `token` after `history` (last order-1 tokens used).
  std::uint64_t count(const std::vector<std::string>& history, std::string_view token) const;

  QueryVocabulary query_vocabulary(const std::vector<std::string>& visible,
                                   const std::vector<std::string>& prompt_ids) const;

  /// Smoothed P(token | history) without prompt interpolation.
  double probability(const std::vector<std::string>& history, std::string_view token,
                     const QueryVocabulary& vocab) const;

  /// Smoothed P(token | history) mixed toward the prompt identifiers with
  /// weight `lambda` (no-op when the query has no prompt identifiers).
  double prompted_probability(const std::vector<std::string>& history, std::string_view token,
                              const QueryVocabulary& vocab, double lambda) const;

  /// Full distribution over `vocab.tokens`, prompt interpolation included.
  std::vector<std::pair<std::string, double>> distribution(
      const std::vector<std::string>& history, const QueryVocabulary& vocab,
      double lambda) const;

  /// Draw one token with top_p = 1 and temperature = 1 without
  /// materializing the distribution.
  std::string draw(const std::vector<std::string>& history, const QueryVocabulary& vocab,
                   double lambda, class Rng& rng) const;

  void save(const std::filesystem::path& path) const;
  static ReferenceModel load(const std::filesystem::path& path);

  friend bool operator==(const ReferenceModel&, const ReferenceModel&) = default;

 private:
  struct Table {
    std::map<std::string, std::uint64_t> counts;
    std::uint64_t total = 0;
    friend bool operator==(const Table&, const Table&) = default;
  };

  void add_event(const std::vector<std::string>& history, const std::string& token);
  const Table* table(int level, const std::vector<std::string>& history) const;
  double level_probability(int level, const std::vector<std::string>& history,
                           std::string_view token, const QueryVocabulary& vocab) const;

  int order_;
  double alpha_;
  std::uint64_t events_ = 0;
  std::vector<std::string> vocab_;  // sorted, unique
  // levels_[j] maps a j-token history to next-token counts.
  std::vector<std::unordered_map<std::string, Table>> levels_;
};

/// Samples span fills for a masked repair input.
class SpanPredictor {
 public:
  virtual ~SpanPredictor() = default;

  virtual ModelVariant variant() const = 0;
  virtual const SamplingParams& params() const = 0;

  /// `n` samples, deterministic given `seed`. `prompt_text` is the comment
  /// prepended to the masked line (prompted variant).
  virtual std::vector<SpanSample> sample(const MaskedRepairInput& input,
                                         const std::optional<std::string>& prompt_text,
                                         std::size_t n, std::uint64_t seed) const = 0;
};

class ReferencePredictor final : public SpanPredictor {
 public:
  ReferencePredictor(std::shared_ptr<const ReferenceModel> model, ModelVariant variant,
                     SamplingParams params = {});

  ModelVariant variant() const override { return variant_; }
  const SamplingParams& params() const override { return params_; }
  const ReferenceModel& model() const { return *model_; }

  std::vector<SpanSample> sample(const MaskedRepairInput& input,
                                 const std::optional<std::string>& prompt_text, std::size_t n,
                                 std::uint64_t seed) const override;

  /// Query vocabulary for an input (visible tokens + prompt identifiers).
  QueryVocabulary vocabulary_for(const MaskedRepairInput& input,
                                 const std::optional<std::string>& prompt_text) const;

 private:
  std::shared_ptr<const ReferenceModel> model_;
  ModelVariant variant_;
  SamplingParams params_;
};

/// Nucleus truncation with temperature over a materialized distribution:
/// temperature-scaled, then cut to the smallest prefix (by descending
/// probability, ties by token) whose mass reaches top_p, then renormalized.
std::vector<std::pair<std::string, double>> nucleus(
    std::vector<std::pair<std::string, double>> dist, double top_p, double temperature);

/// Tokens of the prompt that a predictor should prepend, as the model sees
/// them (a single comment token).
std::size_t prompt_token_cost(const std::optional<std::string>& prompt_text);

}  // namespace surgeon
