#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "surgeon/corpus.hpp"

namespace surgeon {

/// A single-line bug under perfect fault localization.
struct BugSpec {
  std::string id;
  std::filesystem::path project_root;
  std::string file;  // relative to project_root
  int buggy_line_no = 0;
  std::optional<std::string> compile_command;
  std::string test_command;
  std::chrono::seconds timeout{300};        // per validation
  std::chrono::seconds time_limit{5 * 3600};  // whole bug
  std::vector<std::string> include_globs{"**/*.java"};
  std::vector<std::string> exclude_globs{"**/test/**"};
  std::vector<std::string> env_allow{"PATH", "HOME", "LANG", "LC_ALL", "TMPDIR"};
  // Developer fix for the buggy line; only used to mark correct patches.
  std::optional<std::string> expected_fix;
};

enum class Classification { compile_error, test_fail, plausible };
std::string_view to_string(Classification c);

struct ValidationOutcome {
  Classification classification = Classification::test_fail;
  int exit_code = 0;
  bool timed_out = false;
  double duration_s = 0.0;
  std::string log_excerpt;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommandResult {
  int exit_code = 0;  // 128 + signal when killed
  bool timed_out = false;
  double duration_s = 0.0;
  std::string output;  // stdout and stderr interleaved, tail-capped
};

/// Runs `/bin/sh -c command` in `cwd` in its own process group with only the
/// allow-listed environment variables. The group is killed on timeout.
CommandResult run_command(const std::string& command, const std::filesystem::path& cwd,
                          std::chrono::milliseconds timeout,
                          const std::vector<std::string>& env_allow);

/// The replacement for one buggy line: one or two lines of text.
struct LinePatch {
  std::string file;
  int line_no = 0;
  std::vector<std::string> replacement;
};

/// Writes the patched file into `workdir`. Refuses when the working copy
/// differs from `original` (stale or already patched).
void apply_patch(const std::filesystem::path& workdir, const SourceFile& original,
                 const LinePatch& patch);
/// Restores `original` in `workdir`.
void revert_patch(const std::filesystem::path& workdir, const SourceFile& original);

/// File content after applying `patch`, with the original newline style.
std::string patched_content(const SourceFile& original, const LinePatch& patch);

/// Compile phase (if configured) then test phase.
ValidationOutcome validate(const std::filesystem::path& workdir, const BugSpec& spec);

/// Replaces every occurrence of `workdir` in `text` with `<workdir>`.
std::string sanitize_log(std::string text, const std::filesystem::path& workdir);

/// Hash over relative paths and contents of every regular file in `root`.
std::uint64_t tree_hash(const std::filesystem::path& root);

/// Isolated copies of a project tree, created on first use. Leases are
/// exclusive; `acquire` blocks while all workdirs are busy.
class WorkdirPool {
 public:
  WorkdirPool(std::filesystem::path source_root, std::filesystem::path base_dir,
              std::size_t size);
  ~WorkdirPool();
  WorkdirPool(const WorkdirPool&) = delete;
  WorkdirPool& operator=(const WorkdirPool&) = delete;

  class Lease {
   public:
    Lease(WorkdirPool* pool, std::size_t index) : pool_(pool), index_(index) {}
    Lease(Lease&& other) noexcept : pool_(other.pool_), index_(other.index_) {
      other.pool_ = nullptr;
    }
    Lease& operator=(Lease&&) = delete;
    ~Lease() {
      if (pool_) pool_->release(index_);
    }
    const std::filesystem::path& path() const { return pool_->dirs_[index_]; }
    std::size_t index() const { return index_; }

   private:
    WorkdirPool* pool_;
    std::size_t index_;
  };

  Lease acquire();
  std::size_t size() const { return dirs_.size(); }
  /// Removes files that do not exist in the source tree (build products).
  void scrub(const std::filesystem::path& workdir) const;

  static std::size_t default_size();

 private:
  void release(std::size_t index);

  std::filesystem::path source_root_;
  std::filesystem::path base_dir_;
  std::vector<std::filesystem::path> dirs_;
  std::vector<bool> created_;
  std::vector<bool> busy_;
  std::vector<std::string> manifest_;  // relative paths of the source tree
  std::mutex mutex_;
  std::condition_variable freed_;
};

}  // namespace surgeon
