#include "surgeon/remote.hpp"

#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace surgeon {

using nlohmann::ordered_json;

std::string infill_request_body(ModelVariant variant, const MaskedRepairInput& input,
                                const std::optional<std::string>& prompt_text, std::size_t n,
                                const SamplingParams& params, std::uint64_t seed) {
  std::vector<std::string> tokens = input.context_before;
  tokens.insert(tokens.end(), input.masked_line.begin(), input.masked_line.end());
  tokens.insert(tokens.end(), input.context_after.begin(), input.context_after.end());
  ordered_json body;
  body["variant"] = std::string(to_string(variant));
  body["masked_input"] = tokens;
  body["prompt"] = prompt_text ? ordered_json(*prompt_text) : ordered_json(nullptr);
  body["n"] = n;
  body["top_p"] = params.top_p;
  body["temperature"] = params.temperature;
  body["seed"] = seed;
  return body.dump();
}

std::vector<SpanSample> parse_infill_response(const std::string& body) {
  const auto doc = nlohmann::json::parse(body);
  std::vector<SpanSample> out;
  for (const auto& s : doc.at("samples")) {
    SpanSample sample;
    sample.tokens = s.at("tokens").get<std::vector<std::string>>();
    sample.token_logprobs = s.at("token_logprobs").get<std::vector<double>>();
    sample.terminated = s.at("terminated").get<bool>();
    if (sample.tokens.size() != sample.token_logprobs.size()) {
      throw ModelError("remote sample has mismatched tokens and token_logprobs");
    }
    for (const double lp : sample.token_logprobs) {
      if (!(lp <= 0.0)) throw ModelError("remote sample has a positive log-probability");
    }
    out.push_back(std::move(sample));
  }
  return out;
}

RemotePredictor::RemotePredictor(RemoteOptions options, ModelVariant variant,
                                 SamplingParams params)
    : options_(std::move(options)),
      variant_(variant),
      params_(params),
      slots_(std::make_unique<std::counting_semaphore<>>(
          static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, options_.max_in_flight)))) {
  validate(params_);
  if (options_.base_url.empty()) throw ModelError("remote backend needs a URL");
  if (options_.max_attempts < 1) throw ModelError("max_attempts must be >= 1");
}

std::vector<SpanSample> RemotePredictor::sample(const MaskedRepairInput& input,
                                                const std::optional<std::string>& prompt_text,
                                                std::size_t n, std::uint64_t seed) const {
  if (n == 0) throw ModelError("sample count must be >= 1");
  const auto body = infill_request_body(variant_, input, prompt_text, n, params_, seed);

  slots_->acquire();
  struct Release {
    std::counting_semaphore<>* s;
    ~Release() { s->release(); }
  } release{slots_.get()};

  httplib::Client client(options_.base_url);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  int status = -1;
  std::string why;
  int attempts = 0;
  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    ++attempts;
    auto res = client.Post("/v1/infill", body, "application/json");
    if (res && res->status == 200) {
      try {
        return parse_infill_response(res->body);
      } catch (const std::exception& e) {
        status = res->status;
        why = std::string("malformed response: ") + e.what();
      }
    } else if (res) {
      status = res->status;
      why = "HTTP " + std::to_string(res->status);
      if (status >= 400 && status < 500) break;  // client errors do not heal
    } else {
      why = httplib::to_string(res.error());
    }
    if (attempt < options_.max_attempts) std::this_thread::sleep_for(options_.retry_backoff * attempt);
  }
  throw TransportError("remote predictor " + options_.base_url + " failed: " + why,
                       attempts, status);
}

}  // namespace surgeon
