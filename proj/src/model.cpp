#include "surgeon/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "surgeon/retrieval.hpp"
#include "surgeon/rng.hpp"

namespace surgeon {

std::string_view to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::base: return "base";
    case ModelVariant::ki: return "ki";
    case ModelVariant::ro: return "ro";
    case ModelVariant::prompted: return "prompted-base";
  }
  return "?";
}

std::optional<ModelVariant> parse_variant(std::string_view s) {
  if (s == "base") return ModelVariant::base;
  if (s == "ki" || s == "KI") return ModelVariant::ki;
  if (s == "ro" || s == "RO") return ModelVariant::ro;
  if (s == "prompted-base" || s == "prompted") return ModelVariant::prompted;
  return std::nullopt;
}

void validate(const SamplingParams& p) {
  if (!(p.top_p > 0.0 && p.top_p <= 1.0)) throw ModelError("top_p must be in (0, 1]");
  if (!(p.temperature > 0.0)) throw ModelError("temperature must be > 0");
  if (p.max_span_len == 0) throw ModelError("max_span_len must be positive");
  if (!(p.prompt_weight >= 0.0 && p.prompt_weight < 1.0)) {
    throw ModelError("prompt_weight must be in [0, 1)");
  }
  if (p.context_limit == 0) throw ModelError("context_limit must be positive");
}

double score_patch(const std::vector<double>& token_logprobs) {
  if (token_logprobs.empty()) throw ModelError("cannot score an empty patch");
  const double sum = std::accumulate(token_logprobs.begin(), token_logprobs.end(), 0.0);
  return sum / static_cast<double>(token_logprobs.size());
}

bool QueryVocabulary::contains(std::string_view t) const {
  return std::binary_search(tokens.begin(), tokens.end(), t,
                            [](const auto& a, const auto& b) { return std::string_view(a) < std::string_view(b); });
}

// ---------------------------------------------------------------------------
// ReferenceModel

namespace {

constexpr char kKeySep = '\x1f';

std::string history_key(const std::vector<std::string>& history, int level) {
  std::string key;
  const auto n = static_cast<std::size_t>(level);
  for (std::size_t i = history.size() - n; i < history.size(); ++i) {
    if (i + n != history.size()) key += kKeySep;
    key += history[i];
  }
  return key;
}

std::vector<std::string> split_key(const std::string& key, int level) {
  std::vector<std::string> out;
  if (level == 0) return out;
  std::string cur;
  for (const char c : key) {
    if (c == kKeySep) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

bool is_code_text(std::string_view t) {
  const auto k = classify_text(t);
  return k != TokenKind::whitespace && k != TokenKind::comment;
}

}  // namespace

ReferenceModel::ReferenceModel(int order, double alpha)
    : order_(order), alpha_(alpha), levels_(static_cast<std::size_t>(order)) {
  if (order < 1) throw ModelError("n-gram order must be >= 1");
  if (!(alpha > 0.0)) throw ModelError("smoothing mass must be > 0");
}

void ReferenceModel::add_event(const std::vector<std::string>& history, const std::string& token) {
  for (int j = 0; j < order_; ++j) {
    if (static_cast<std::size_t>(j) > history.size()) break;
    auto& t = levels_[static_cast<std::size_t>(j)][history_key(history, j)];
    ++t.counts[token];
    ++t.total;
  }
  ++events_;
}

void ReferenceModel::train(const MaskedSample& sample) {
  std::set<std::string> seen;
  std::vector<std::string> history;
  const std::string end(kEndToken);
  for (const auto& text : sample.masked) {
    if (const auto idx = sentinel_index(text)) {
      const auto it = std::find_if(sample.targets.begin(), sample.targets.end(),
                                   [&](const SpanTarget& s) { return s.sentinel == *idx; });
      if (it == sample.targets.end()) throw ModelError("sample has a sentinel without target");
      for (const auto& tok : it->tokens) {
        if (!is_code_text(tok)) continue;
        add_event(history, tok);
        history.push_back(tok);
        seen.insert(tok);
      }
      add_event(history, end);
    } else if (is_code_text(text)) {
      history.push_back(text);
      seen.insert(text);
    }
  }
  std::vector<std::string> merged;
  merged.reserve(vocab_.size() + seen.size());
  std::set_union(vocab_.begin(), vocab_.end(), seen.begin(), seen.end(),
                 std::back_inserter(merged));
  vocab_ = std::move(merged);
}

void ReferenceModel::train(const std::vector<MaskedSample>& dataset) {
  for (const auto& s : dataset) train(s);
}

const ReferenceModel::Table* ReferenceModel::table(int level,
                                                   const std::vector<std::string>& history) const {
  if (static_cast<std::size_t>(level) > history.size()) return nullptr;
  const auto& map = levels_[static_cast<std::size_t>(level)];
  const auto it = map.find(history_key(history, level));
  return it == map.end() ? nullptr : &it->second;
}

std::uint64_t ReferenceModel::count(const std::vector<std::string>& history,
                                    std::string_view token) const {
  const int level = std::min<int>(order_ - 1, static_cast<int>(history.size()));
  const Table* t = table(level, history);
  if (!t) return 0;
  const auto it = t->counts.find(std::string(token));
  return it == t->counts.end() ? 0 : it->second;
}

QueryVocabulary ReferenceModel::query_vocabulary(const std::vector<std::string>& visible,
                                                 const std::vector<std::string>& prompt_ids) const {
  std::set<std::string> extra(visible.begin(), visible.end());
  extra.erase(std::string(kSpanMarker));
  extra.insert(prompt_ids.begin(), prompt_ids.end());
  extra.insert(std::string(kEndToken));
  QueryVocabulary q;
  std::set_union(vocab_.begin(), vocab_.end(), extra.begin(), extra.end(),
                 std::back_inserter(q.tokens));
  std::set<std::string> ids(prompt_ids.begin(), prompt_ids.end());
  q.prompt_ids.assign(ids.begin(), ids.end());
  return q;
}

double ReferenceModel::level_probability(int level, const std::vector<std::string>& history,
                                         std::string_view token,
                                         const QueryVocabulary& vocab) const {
  const double lower =
      level == 0 ? (vocab.contains(token) ? 1.0 / static_cast<double>(vocab.tokens.size()) : 0.0)
                 : level_probability(level - 1, history, token, vocab);
  const Table* t = table(level, history);
  if (!t) return lower;
  const double beta = alpha_ * static_cast<double>(vocab.tokens.size());
  const auto it = t->counts.find(std::string(token));
  const double c = it == t->counts.end() ? 0.0 : static_cast<double>(it->second);
  return (c + beta * lower) / (static_cast<double>(t->total) + beta);
}

double ReferenceModel::probability(const std::vector<std::string>& history,
                                   std::string_view token, const QueryVocabulary& vocab) const {
  const int top = std::min<int>(order_ - 1, static_cast<int>(history.size()));
  return level_probability(top, history, token, vocab);
}

double ReferenceModel::prompted_probability(const std::vector<std::string>& history,
                                            std::string_view token,
                                            const QueryVocabulary& vocab, double lambda) const {
  const double p = probability(history, token, vocab);
  if (vocab.prompt_ids.empty() || lambda <= 0.0) return p;
  const bool is_prompt = std::binary_search(vocab.prompt_ids.begin(), vocab.prompt_ids.end(),
                                            std::string(token));
  const double u = is_prompt ? 1.0 / static_cast<double>(vocab.prompt_ids.size()) : 0.0;
  return (1.0 - lambda) * p + lambda * u;
}

std::vector<std::pair<std::string, double>> ReferenceModel::distribution(
    const std::vector<std::string>& history, const QueryVocabulary& vocab, double lambda) const {
  std::vector<std::pair<std::string, double>> out;
  out.reserve(vocab.tokens.size());
  for (const auto& t : vocab.tokens) {
    out.emplace_back(t, prompted_probability(history, t, vocab, lambda));
  }
  return out;
}

std::string ReferenceModel::draw(const std::vector<std::string>& history,
                                 const QueryVocabulary& vocab, double lambda, Rng& rng) const {
  if (!vocab.prompt_ids.empty() && lambda > 0.0 && rng.uniform() < lambda) {
    return vocab.prompt_ids[rng.below(vocab.prompt_ids.size())];
  }
  const double beta = alpha_ * static_cast<double>(vocab.tokens.size());
  for (int level = std::min<int>(order_ - 1, static_cast<int>(history.size())); level >= 0;
       --level) {
    const Table* t = table(level, history);
    if (!t) continue;
    const double total = static_cast<double>(t->total);
    if (rng.uniform() * (total + beta) >= total) continue;
    std::uint64_t pick = rng.below(t->total);
    for (const auto& [tok, c] : t->counts) {
      if (pick < c) return tok;
      pick -= c;
    }
  }
  return vocab.tokens[rng.below(vocab.tokens.size())];
}

void ReferenceModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write model snapshot: " + path.string());
  out << "surgeon-reference-model 1\n";
  out << "order " << order_ << "\n";
  {
    std::ostringstream a;
    a.precision(17);
    a << alpha_;
    out << "alpha " << a.str() << "\n";
  }
  out << "events " << events_ << "\n";
  out << "vocab " << vocab_.size() << "\n";
  for (const auto& v : vocab_) out << nlohmann::json(v).dump() << "\n";
  std::size_t rows = 0;
  for (const auto& level : levels_) {
    for (const auto& [_, t] : level) rows += t.counts.size();
  }
  out << "counts " << rows << "\n";
  for (int j = 0; j < order_; ++j) {
    const auto& level = levels_[static_cast<std::size_t>(j)];
    std::vector<const std::string*> keys;
    for (const auto& [k, _] : level) keys.push_back(&k);
    std::sort(keys.begin(), keys.end(), [](const auto* a, const auto* b) { return *a < *b; });
    for (const auto* k : keys) {
      for (const auto& [tok, c] : level.at(*k).counts) {
        out << nlohmann::json::array({j, split_key(*k, j), tok, c}).dump() << "\n";
      }
    }
  }
  if (!out) throw ModelError("failed writing model snapshot: " + path.string());
}

ReferenceModel ReferenceModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot read model snapshot: " + path.string());
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> const std::string& {
    if (!std::getline(in, line)) {
      throw ModelError(path.string() + ": truncated snapshot at line " +
                       std::to_string(line_no + 1));
    }
    ++line_no;
    return line;
  };
  auto field = [&](std::string_view name) {
    const auto& l = next();
    if (!l.starts_with(name) || l.size() <= name.size() + 1) {
      throw ModelError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::string(name));
    }
    return l.substr(name.size() + 1);
  };
  if (next() != "surgeon-reference-model 1") {
    throw ModelError(path.string() + ": unsupported snapshot version");
  }
  try {
    const int order = std::stoi(field("order"));
    const double alpha = std::stod(field("alpha"));
    ReferenceModel m(order, alpha);
    m.events_ = std::stoull(field("events"));
    const std::size_t nv = std::stoull(field("vocab"));
    for (std::size_t i = 0; i < nv; ++i) {
      m.vocab_.push_back(nlohmann::json::parse(next()).get<std::string>());
    }
    const std::size_t rows = std::stoull(field("counts"));
    for (std::size_t i = 0; i < rows; ++i) {
      const auto row = nlohmann::json::parse(next());
      const int level = row.at(0).get<int>();
      if (level < 0 || level >= order) throw ModelError("bad level");
      const auto hist = row.at(1).get<std::vector<std::string>>();
      auto& t = m.levels_[static_cast<std::size_t>(level)][history_key(hist, level)];
      const auto c = row.at(3).get<std::uint64_t>();
      t.counts[row.at(2).get<std::string>()] += c;
      t.total += c;
    }
    return m;
  } catch (const ModelError&) {
    throw;
  } catch (const std::exception& e) {
    throw ModelError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<std::pair<std::string, double>> nucleus(
    std::vector<std::pair<std::string, double>> dist, double top_p, double temperature) {
  if (temperature != 1.0) {
    for (auto& [_, p] : dist) p = p > 0.0 ? std::pow(p, 1.0 / temperature) : 0.0;
  }
  double z = 0.0;
  for (const auto& [_, p] : dist) z += p;
  if (z <= 0.0) return {};
  for (auto& [_, p] : dist) p /= z;
  std::sort(dist.begin(), dist.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (top_p < 1.0) {
    double mass = 0.0;
    std::size_t keep = 0;
    while (keep < dist.size() && mass < top_p) mass += dist[keep++].second;
    dist.resize(std::max<std::size_t>(keep, 1));
    z = 0.0;
    for (const auto& [_, p] : dist) z += p;
    for (auto& [_, p] : dist) p /= z;
  }
  std::erase_if(dist, [](const auto& e) { return e.second <= 0.0; });
  return dist;
}

std::size_t prompt_token_cost(const std::optional<std::string>& prompt_text) {
  if (!prompt_text) return 0;
  std::istringstream words(*prompt_text);
  std::size_t n = 0;
  for (std::string w; words >> w;) ++n;
  return n;
}

ReferencePredictor::ReferencePredictor(std::shared_ptr<const ReferenceModel> model,
                                       ModelVariant variant, SamplingParams params)
    : model_(model ? std::move(model) : std::make_shared<const ReferenceModel>()),
      variant_(variant),
      params_(params) {
  validate(params_);
}

QueryVocabulary ReferencePredictor::vocabulary_for(
    const MaskedRepairInput& input, const std::optional<std::string>& prompt_text) const {
  std::vector<std::string> visible = input.context_before;
  visible.insert(visible.end(), input.masked_line.begin(), input.masked_line.end());
  visible.insert(visible.end(), input.context_after.begin(), input.context_after.end());
  std::vector<std::string> ids;
  if (prompt_text) ids = prompt_identifiers(*prompt_text);
  return model_->query_vocabulary(visible, ids);
}

std::vector<SpanSample> ReferencePredictor::sample(const MaskedRepairInput& input,
                                                   const std::optional<std::string>& prompt_text,
                                                   std::size_t n, std::uint64_t seed) const {
  if (n == 0) throw ModelError("sample count must be >= 1");
  if (input.token_count() + prompt_token_cost(prompt_text) > params_.context_limit) {
    throw ModelError("context overflow: input has " + std::to_string(input.token_count()) +
                     " tokens, limit is " + std::to_string(params_.context_limit));
  }
  const auto vocab = vocabulary_for(input, prompt_text);
  const double lambda = prompt_text ? params_.prompt_weight : 0.0;
  const bool plain = params_.top_p >= 1.0 && params_.temperature == 1.0;
  const std::string end(kEndToken);
  const auto left = input.left_of_span();
  const std::size_t keep = static_cast<std::size_t>(model_->order() - 1);

  std::vector<SpanSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, {i}));
    std::vector<std::string> history(left.end() - static_cast<std::ptrdiff_t>(std::min(keep, left.size())),
                                     left.end());
    SpanSample s;
    while (s.tokens.size() < params_.max_span_len) {
      std::string tok;
      double p = 0.0;
      if (plain) {
        tok = model_->draw(history, vocab, lambda, rng);
        p = model_->prompted_probability(history, tok, vocab, lambda);
      } else {
        const auto dist =
            nucleus(model_->distribution(history, vocab, lambda), params_.top_p,
                    params_.temperature);
        double u = rng.uniform();
        std::size_t k = 0;
        while (k + 1 < dist.size() && u >= dist[k].second) u -= dist[k++].second;
        tok = dist[k].first;
        p = dist[k].second;
      }
      if (tok == end) {
        s.terminated = true;
        break;
      }
      s.token_logprobs.push_back(std::min(0.0, std::log(p)));
      s.tokens.push_back(std::move(tok));
      history.push_back(s.tokens.back());
      if (history.size() > keep) history.erase(history.begin());
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace surgeon
