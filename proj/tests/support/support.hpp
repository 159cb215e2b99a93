#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "surgeon/validation.hpp"

namespace surgeon::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(std::string_view tag = "surgeon");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(std::string_view rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

void write_file(const std::filesystem::path& path, std::string_view text);
std::string read_file(const std::filesystem::path& path);

/// Full-matrix edit distance, kept deliberately naive.
std::size_t dp_edit_distance(std::string_view a, std::string_view b);

/// Ratio from the full-matrix distance on whitespace-collapsed inputs.
double dp_ratio(std::string_view a, std::string_view b);

/// Shipped toy project and its planted-bug definitions.
std::filesystem::path fixture_root();
std::filesystem::path fixture_project();

struct PlantedBug {
  std::string name;
  std::string file;
  int line = 0;
  std::string buggy;  // trimmed text
  std::string fixed;  // trimmed text
};

std::vector<PlantedBug> fixture_bugs();

/// Copies the toy project into `dest`, puts every bug line in its fixed
/// state except `planted` (if any), and writes `bug.cfg` for `planted`
/// with the given extra config lines. Returns the bug config path.
std::filesystem::path materialize(const std::filesystem::path& dest,
                                  const PlantedBug* planted,
                                  const std::vector<std::string>& extra_cfg = {});

/// Bug spec for the materialized project (same as reading its bug.cfg).
BugSpec fixture_spec(const std::filesystem::path& bug_cfg);

}  // namespace surgeon::testing

namespace surgeon::testing {

/// Java-like source with `functions` methods spread over `files` classes,
/// each method well over 50 code tokens. Deterministic in `seed`.
std::vector<std::pair<std::string, std::string>> synthetic_project(std::size_t files,
                                                                   std::size_t functions,
                                                                   unsigned seed);

}  // namespace surgeon::testing
