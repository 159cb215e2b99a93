#pragma once

#include <chrono>
#include <memory>
#include <semaphore>
#include <string>

#include "surgeon/model.hpp"

namespace surgeon {

/// Failure talking to a remote predictor after all retries.
class TransportError : public std::runtime_error {
 public:
  TransportError(const std::string& msg, int attempts, int last_status)
      : std::runtime_error(msg), attempts_(attempts), last_status_(last_status) {}
  int attempts() const { return attempts_; }
  /// HTTP status of the last response, or -1 when no response arrived.
  int last_status() const { return last_status_; }

 private:
  int attempts_;
  int last_status_;
};

struct RemoteOptions {
  std::string base_url;  // e.g. http://127.0.0.1:8080
  std::size_t max_in_flight = 4;
  int max_attempts = 3;
  std::chrono::milliseconds retry_backoff{200};
  std::chrono::seconds timeout{120};
};

/// JSON body of a `/v1/infill` request.
std::string infill_request_body(ModelVariant variant, const MaskedRepairInput& input,
                                const std::optional<std::string>& prompt_text, std::size_t n,
                                const SamplingParams& params, std::uint64_t seed);

/// Parses and checks a `/v1/infill` response body.
std::vector<SpanSample> parse_infill_response(const std::string& body);

/// Predictor backed by a model server speaking the infill protocol.
class RemotePredictor final : public SpanPredictor {
 public:
  RemotePredictor(RemoteOptions options, ModelVariant variant, SamplingParams params = {});

  ModelVariant variant() const override { return variant_; }
  const SamplingParams& params() const override { return params_; }

  std::vector<SpanSample> sample(const MaskedRepairInput& input,
                                 const std::optional<std::string>& prompt_text, std::size_t n,
                                 std::uint64_t seed) const override;

 private:
  RemoteOptions options_;
  ModelVariant variant_;
  SamplingParams params_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
};

}  // namespace surgeon
