#include "surgeon/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace surgeon {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string where(const std::string& source, std::size_t line) {
  if (line == 0) return source;
  return source + ":" + std::to_string(line);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t b = 0;
  while (b <= s.size()) {
    auto e = s.find(',', b);
    if (e == std::string_view::npos) e = s.size();
    auto item = trim(s.substr(b, e - b));
    if (!item.empty()) out.push_back(std::move(item));
    b = e + 1;
  }
  return out;
}

}  // namespace

ConfigError::ConfigError(const std::string& source, std::size_t line, const std::string& field,
                         const std::string& msg)
    : std::runtime_error(where(source, line) + ": " + (field.empty() ? "" : field + ": ") + msg),
      field_(field),
      line_(line) {}

ConfigEntries parse_config_text(std::string_view text, const std::string& source) {
  ConfigEntries out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source, line_no, "", "expected `key = value`, got `" + line + "`");
    }
    const auto key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ConfigError(source, line_no, "", "missing key before `=`");
    if (out.contains(key)) {
      throw ConfigError(source, line_no, key,
                        "duplicate key (first set on line " +
                            std::to_string(out.at(key).line) + ")");
    }
    out[key] = {trim(std::string_view(line).substr(eq + 1)), line_no, source};
    if (pos > text.size()) break;
  }
  return out;
}

ConfigEntries read_config_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), 0, "", "cannot read config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

std::chrono::seconds parse_duration(std::string_view text) {
  auto s = trim(text);
  if (s.empty()) throw std::invalid_argument("empty duration");
  long long mult = 1;
  switch (s.back()) {
    case 'h': mult = 3600; s.pop_back(); break;
    case 'm': mult = 60; s.pop_back(); break;
    case 's': s.pop_back(); break;
    default: break;
  }
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v <= 0) {
    throw std::invalid_argument("not a positive duration: " + std::string(text));
  }
  return std::chrono::seconds(v * mult);
}

// ---------------------------------------------------------------------------
// RunConfig

namespace {

template <class T>
T parse_number(const std::string& key, const ConfigEntry& e) {
  T v{};
  const auto& s = e.value;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ConfigError(e.source, e.line, key, "not a number: `" + s + "`");
  }
  return v;
}

double parse_real(const std::string& key, const ConfigEntry& e) {
  try {
    std::size_t used = 0;
    const double v = std::stod(e.value, &used);
    if (used != e.value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(e.source, e.line, key, "not a number: `" + e.value + "`");
  }
}

bool parse_bool(const std::string& key, const ConfigEntry& e) {
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  throw ConfigError(e.source, e.line, key, "expected true or false, got `" + e.value + "`");
}

void check(bool ok, const std::string& key, const ConfigEntry& e, const std::string& what) {
  if (!ok) throw ConfigError(e.source, e.line, key, what + ", got `" + e.value + "`");
}

}  // namespace

void apply_entries(RunConfig& cfg, const ConfigEntries& entries) {
  for (const auto& [key, e] : entries) {
    if (key == "mask_rate") {
      cfg.mask_rate = parse_real(key, e);
      check(cfg.mask_rate > 0.0 && cfg.mask_rate < 1.0, key, e, "must be in (0, 1)");
    } else if (key == "iterations") {
      cfg.iterations = parse_number<std::uint32_t>(key, e);
      check(cfg.iterations > 0, key, e, "must be positive");
    } else if (key == "mean_span_len") {
      cfg.mean_span_len = parse_real(key, e);
      check(cfg.mean_span_len >= 1.0, key, e, "must be >= 1");
    } else if (key == "strategy") {
      const auto s = parse_strategy(e.value);
      check(s && *s != MaskStrategy::ki, key, e, "expected template, ast or line");
      cfg.strategy = *s;
    } else if (key == "top_n") {
      cfg.top_n = parse_number<std::size_t>(key, e);
      check(cfg.top_n > 0, key, e, "must be positive");
    } else if (key == "scope") {
      check(e.value == "file" || e.value == "project", key, e, "expected file or project");
      cfg.scope = e.value == "file" ? RetrievalScope::file : RetrievalScope::project;
    } else if (key == "prompt_mode") {
      check(e.value == "separate" || e.value == "combined", key, e,
            "expected separate or combined");
      cfg.prompt_mode = e.value == "separate" ? PromptMode::separate : PromptMode::combined;
    } else if (key == "min_identifier_length") {
      cfg.min_identifier_length = parse_number<std::size_t>(key, e);
    } else if (key == "top_frequent") {
      cfg.top_frequent = parse_number<std::size_t>(key, e);
    } else if (key == "top_p") {
      cfg.top_p = parse_real(key, e);
      check(cfg.top_p > 0.0 && cfg.top_p <= 1.0, key, e, "must be in (0, 1]");
    } else if (key == "temperature") {
      cfg.temperature = parse_real(key, e);
      check(cfg.temperature > 0.0, key, e, "must be > 0");
    } else if (key == "context_limit") {
      cfg.context_limit = parse_number<std::size_t>(key, e);
      check(cfg.context_limit > 0, key, e, "must be positive");
    } else if (key == "max_span_len") {
      cfg.max_span_len = parse_number<std::size_t>(key, e);
      check(cfg.max_span_len > 0, key, e, "must be positive");
    } else if (key == "prompt_weight") {
      cfg.prompt_weight = parse_real(key, e);
      check(cfg.prompt_weight >= 0.0 && cfg.prompt_weight < 1.0, key, e, "must be in [0, 1)");
    } else if (key == "ngram_order") {
      cfg.ngram_order = parse_number<int>(key, e);
      check(cfg.ngram_order >= 1, key, e, "must be >= 1");
    } else if (key == "smoothing") {
      cfg.smoothing = parse_real(key, e);
      check(cfg.smoothing > 0.0, key, e, "must be > 0");
    } else if (key == "backend") {
      check(e.value == "reference" || e.value == "remote", key, e,
            "expected reference or remote");
      cfg.backend = e.value == "reference" ? Backend::reference : Backend::remote;
    } else if (key == "remote_url") {
      cfg.remote_url = e.value;
    } else if (key == "remote_in_flight") {
      cfg.remote_in_flight = parse_number<std::size_t>(key, e);
      check(cfg.remote_in_flight > 0, key, e, "must be positive");
    } else if (key == "samples") {
      cfg.samples = parse_number<std::size_t>(key, e);
      check(cfg.samples > 0, key, e, "must be positive");
    } else if (key == "validate_top") {
      cfg.validate_top = parse_number<std::size_t>(key, e);
      check(cfg.validate_top > 0, key, e, "must be positive");
    } else if (key == "time_limit") {
      try {
        cfg.time_limit = parse_duration(e.value);
      } catch (const std::exception& ex) {
        throw ConfigError(e.source, e.line, key, ex.what());
      }
    } else if (key == "stop") {
      const auto s = parse_stop_condition(e.value);
      check(s.has_value(), key, e, "expected none, first-plausible or first-correct");
      cfg.stop = *s;
    } else if (key == "parallelism") {
      cfg.parallelism = parse_number<std::size_t>(key, e);
      check(cfg.parallelism > 0, key, e, "must be positive");
    } else if (key == "incremental") {
      cfg.incremental = parse_bool(key, e);
    } else if (key == "seed") {
      cfg.seed = parse_number<std::uint64_t>(key, e);
    } else {
      throw ConfigError(e.source, e.line, key, "unknown setting");
    }
  }
  if (cfg.backend == Backend::remote && cfg.remote_url.empty()) {
    throw ConfigError("config", 0, "remote_url", "required when backend = remote");
  }
}

MaskingConfig RunConfig::masking() const {
  return {mask_rate, iterations, mean_span_len, seed};
}

SamplingParams RunConfig::sampling() const {
  return {top_p, temperature, max_span_len, prompt_weight, context_limit};
}

RetrievalConfig RunConfig::retrieval() const {
  RetrievalConfig r;
  r.filter.min_length = min_identifier_length;
  r.filter.top_frequent = top_frequent;
  r.scope = scope;
  return r;
}

RepairOptions RunConfig::repair_options() const {
  RepairOptions o;
  o.budget = {samples, validate_top};
  o.top_n_identifiers = top_n;
  o.prompt_mode = prompt_mode;
  o.retrieval = retrieval();
  o.context_limit = context_limit;
  o.seed = seed;
  o.stop = stop;
  o.parallelism = parallelism;
  o.incremental = incremental;
  o.time_limit = time_limit;
  return o;
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["mask_rate"] = c.mask_rate;
  j["iterations"] = c.iterations;
  j["mean_span_len"] = c.mean_span_len;
  j["strategy"] = std::string(to_string(c.strategy));
  j["top_n"] = c.top_n;
  j["scope"] = c.scope == RetrievalScope::file ? "file" : "project";
  j["prompt_mode"] = c.prompt_mode == PromptMode::separate ? "separate" : "combined";
  j["min_identifier_length"] = c.min_identifier_length;
  j["top_frequent"] = c.top_frequent;
  j["top_p"] = c.top_p;
  j["temperature"] = c.temperature;
  j["context_limit"] = c.context_limit;
  j["max_span_len"] = c.max_span_len;
  j["prompt_weight"] = c.prompt_weight;
  j["ngram_order"] = c.ngram_order;
  j["smoothing"] = c.smoothing;
  j["backend"] = c.backend == Backend::reference ? "reference" : "remote";
  j["remote_url"] = c.remote_url;
  j["remote_in_flight"] = c.remote_in_flight;
  j["samples"] = c.samples;
  j["validate_top"] = c.validate_top;
  j["time_limit_seconds"] = c.time_limit.count();
  j["stop"] = std::string(to_string(c.stop));
  j["incremental"] = c.incremental;
  j["seed"] = c.seed;
  return j;
}

// ---------------------------------------------------------------------------
// Bug config

BugSpec bug_from_entries(const ConfigEntries& entries, const fs::path& base_dir,
                         const std::string& default_id) {
  BugSpec bug;
  bug.id = default_id;
  auto required = [&](const std::string& key) -> const ConfigEntry& {
    const auto it = entries.find(key);
    if (it == entries.end()) {
      const std::string src = entries.empty() ? "bug config" : entries.begin()->second.source;
      throw ConfigError(src, 0, key, "missing required setting");
    }
    return it->second;
  };
  for (const auto& [key, e] : entries) {
    if (key == "id") {
      bug.id = e.value;
    } else if (key == "project_root") {
      fs::path p(e.value);
      bug.project_root = p.is_absolute() ? p : (base_dir / p).lexically_normal();
    } else if (key == "file") {
      bug.file = e.value;
    } else if (key == "buggy_line_no") {
      bug.buggy_line_no = parse_number<int>(key, e);
      check(bug.buggy_line_no >= 1, key, e, "must be >= 1");
    } else if (key == "compile_command") {
      if (!e.value.empty()) bug.compile_command = e.value;
    } else if (key == "test_command") {
      bug.test_command = e.value;
    } else if (key == "timeout_seconds") {
      bug.timeout = std::chrono::seconds(parse_number<long long>(key, e));
      check(bug.timeout.count() > 0, key, e, "must be positive");
    } else if (key == "time_limit") {
      try {
        bug.time_limit = parse_duration(e.value);
      } catch (const std::exception& ex) {
        throw ConfigError(e.source, e.line, key, ex.what());
      }
    } else if (key == "include_globs") {
      bug.include_globs = split_list(e.value);
    } else if (key == "exclude_globs") {
      bug.exclude_globs = split_list(e.value);
    } else if (key == "env_allow") {
      bug.env_allow = split_list(e.value);
    } else if (key == "expected_fix") {
      bug.expected_fix = e.value;
    } else {
      throw ConfigError(e.source, e.line, key, "unknown setting");
    }
  }
  required("project_root");
  required("file");
  required("buggy_line_no");
  const auto& tc = required("test_command");
  check(!bug.test_command.empty(), "test_command", tc, "must not be empty");
  return bug;
}

BugSpec read_bug_config(const fs::path& path) {
  const auto entries = read_config_file(path);
  return bug_from_entries(entries, fs::absolute(path).parent_path(), path.stem().string());
}

ordered_json to_json(const BugSpec& b) {
  ordered_json j;
  j["id"] = b.id;
  j["file"] = b.file;
  j["buggy_line_no"] = b.buggy_line_no;
  j["compile_command"] = b.compile_command ? ordered_json(*b.compile_command) : ordered_json(nullptr);
  j["test_command"] = b.test_command;
  j["timeout_seconds"] = b.timeout.count();
  j["time_limit_seconds"] = b.time_limit.count();
  j["include_globs"] = b.include_globs;
  j["exclude_globs"] = b.exclude_globs;
  j["env_allow"] = b.env_allow;
  return j;
}

}  // namespace surgeon
