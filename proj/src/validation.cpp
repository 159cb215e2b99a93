#include "surgeon/validation.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

extern char** environ;

namespace surgeon {

namespace fs = std::filesystem;

std::string_view to_string(Classification c) {
  switch (c) {
    case Classification::compile_error: return "compile_error";
    case Classification::test_fail: return "test_fail";
    case Classification::plausible: return "plausible";
  }
  return "?";
}

namespace {

constexpr std::size_t kOutputCap = 64 * 1024;
constexpr std::size_t kExcerptBytes = 2000;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
  const fs::path tmp = p.string() + ".surgeon-tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + tmp.string());
    out << content;
    if (!out) throw ValidationError("failed writing " + tmp.string());
  }
  fs::rename(tmp, p);
}

std::string tail(const std::string& s, std::size_t n) {
  return s.size() <= n ? s : s.substr(s.size() - n);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

CommandResult run_command(const std::string& command, const fs::path& cwd,
                          std::chrono::milliseconds timeout,
                          const std::vector<std::string>& env_allow) {
  std::vector<std::string> env_storage;
  for (const auto& name : env_allow) {
    if (const char* v = std::getenv(name.c_str())) env_storage.push_back(name + "=" + v);
  }
  std::vector<char*> envp;
  for (auto& e : env_storage) envp.push_back(e.data());
  envp.push_back(nullptr);
  const std::string cwd_str = cwd.string();

  int fds[2];
  if (pipe2(fds, O_CLOEXEC) != 0) {
    throw ValidationError(std::string("pipe failed: ") + std::strerror(errno));
  }
  const auto t0 = std::chrono::steady_clock::now();
  const pid_t pid = fork();
  if (pid < 0) {
    close(fds[0]);
    close(fds[1]);
    throw ValidationError(std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    setpgid(0, 0);
    dup2(fds[1], STDOUT_FILENO);
    dup2(fds[1], STDERR_FILENO);
    const int devnull = open("/dev/null", O_RDONLY);
    if (devnull >= 0) dup2(devnull, STDIN_FILENO);
    if (chdir(cwd_str.c_str()) != 0) _exit(126);
    const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
    execve("/bin/sh", const_cast<char* const*>(argv), envp.data());
    _exit(127);
  }
  setpgid(pid, pid);
  close(fds[1]);

  CommandResult result;
  const auto deadline = t0 + timeout;
  char buf[4096];
  bool open_pipe = true;
  while (open_pipe) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      result.timed_out = true;
      break;
    }
    pollfd pfd{fds[0], POLLIN, 0};
    const int r = poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1000)));
    if (r < 0 && errno != EINTR) break;
    if (r <= 0) continue;
    const ssize_t n = read(fds[0], buf, sizeof buf);
    if (n <= 0) {
      open_pipe = false;
    } else {
      result.output.append(buf, static_cast<std::size_t>(n));
      if (result.output.size() > 2 * kOutputCap) result.output = tail(result.output, kOutputCap);
    }
  }
  close(fds[0]);

  int status = 0;
  if (result.timed_out) {
    kill(-pid, SIGKILL);
    waitpid(pid, &status, 0);
  } else {
    // Output closed; the shell may still be exiting, or a background child
    // may hold no pipe. Wait up to the deadline.
    while (true) {
      const pid_t w = waitpid(pid, &status, WNOHANG);
      if (w == pid) break;
      if (std::chrono::steady_clock::now() >= deadline) {
        result.timed_out = true;
        kill(-pid, SIGKILL);
        waitpid(pid, &status, 0);
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
  }
  kill(-pid, SIGKILL);  // stray grandchildren
  result.output = tail(result.output, kOutputCap);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status)
                                       : 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
  result.duration_s = seconds_since(t0);
  return result;
}

std::string patched_content(const SourceFile& original, const LinePatch& patch) {
  if (patch.line_no < 1 || patch.line_no > original.line_count()) {
    throw ValidationError("patch line " + std::to_string(patch.line_no) + " outside " +
                          original.relative_path);
  }
  SourceFile copy = original;
  copy.tokens.clear();
  const auto at = copy.lines.begin() + (patch.line_no - 1);
  const auto pos = copy.lines.erase(at);
  copy.lines.insert(pos, patch.replacement.begin(), patch.replacement.end());
  return copy.on_disk_content();
}

void apply_patch(const fs::path& workdir, const SourceFile& original, const LinePatch& patch) {
  const fs::path target = workdir / original.relative_path;
  const std::string current = read_file(target);
  if (fnv1a64(current) != fnv1a64(original.on_disk_content())) {
    throw ValidationError("working copy of " + original.relative_path +
                          " does not match the ingested corpus; refusing to patch");
  }
  write_file(target, patched_content(original, patch));
}

void revert_patch(const fs::path& workdir, const SourceFile& original) {
  write_file(workdir / original.relative_path, original.on_disk_content());
}

std::string sanitize_log(std::string text, const fs::path& workdir) {
  for (const auto& needle : {fs::weakly_canonical(workdir).string(), workdir.string()}) {
    if (needle.empty()) continue;
    for (std::size_t p = text.find(needle); p != std::string::npos;
         p = text.find(needle, p + 9)) {
      text.replace(p, needle.size(), "<workdir>");
    }
  }
  return text;
}

ValidationOutcome validate(const fs::path& workdir, const BugSpec& spec) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto timeout = std::chrono::duration_cast<std::chrono::milliseconds>(spec.timeout);
  auto run = [&](const std::string& cmd) {
    auto r = run_command(cmd, workdir, timeout, spec.env_allow);
    if (!r.timed_out && (r.exit_code == 126 || r.exit_code == 127) &&
        (r.output.find("not found") != std::string::npos ||
         r.output.find("ermission denied") != std::string::npos)) {
      throw ValidationError("command is not executable: " + cmd + "\n" + r.output);
    }
    return r;
  };

  ValidationOutcome out;
  if (spec.compile_command && !spec.compile_command->empty()) {
    const auto r = run(*spec.compile_command);
    if (r.timed_out || r.exit_code != 0) {
      out.classification = r.timed_out ? Classification::test_fail : Classification::compile_error;
      out.exit_code = r.exit_code;
      out.timed_out = r.timed_out;
      out.log_excerpt = sanitize_log(tail(r.output, kExcerptBytes), workdir);
      out.duration_s = seconds_since(t0);
      return out;
    }
  }
  const auto r = run(spec.test_command);
  out.exit_code = r.exit_code;
  out.timed_out = r.timed_out;
  out.classification = (!r.timed_out && r.exit_code == 0) ? Classification::plausible
                                                          : Classification::test_fail;
  out.log_excerpt = sanitize_log(tail(r.output, kExcerptBytes), workdir);
  out.duration_s = seconds_since(t0);
  return out;
}

std::uint64_t tree_hash(const fs::path& root) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root).generic_string());
  }
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const auto& f : files) {
    acc += f;
    acc += '\0';
    acc += std::to_string(fnv1a64(read_file(root / f)));
    acc += '\0';
  }
  return fnv1a64(acc);
}

// ---------------------------------------------------------------------------
// WorkdirPool

std::size_t WorkdirPool::default_size() {
  const auto cores = std::max(1u, std::thread::hardware_concurrency());
  return std::min<std::size_t>(cores, 8);
}

WorkdirPool::WorkdirPool(fs::path source_root, fs::path base_dir, std::size_t size)
    : source_root_(std::move(source_root)),
      base_dir_(std::move(base_dir)),
      created_(std::max<std::size_t>(size, 1), false),
      busy_(std::max<std::size_t>(size, 1), false) {
  if (!fs::is_directory(source_root_)) {
    throw ValidationError("project root is not a directory: " + source_root_.string());
  }
  fs::create_directories(base_dir_);
  for (std::size_t i = 0; i < busy_.size(); ++i) {
    dirs_.push_back(base_dir_ / ("workdir-" + std::to_string(i)));
  }
  for (const auto& e : fs::recursive_directory_iterator(source_root_)) {
    manifest_.push_back(fs::relative(e.path(), source_root_).generic_string());
  }
  std::sort(manifest_.begin(), manifest_.end());
}

WorkdirPool::~WorkdirPool() {
  std::error_code ec;
  for (std::size_t i = 0; i < dirs_.size(); ++i) {
    if (created_[i]) fs::remove_all(dirs_[i], ec);
  }
}

WorkdirPool::Lease WorkdirPool::acquire() {
  std::size_t index = 0;
  bool fresh = false;
  {
    std::unique_lock lock(mutex_);
    freed_.wait(lock, [&] { return std::find(busy_.begin(), busy_.end(), false) != busy_.end(); });
    index = static_cast<std::size_t>(std::find(busy_.begin(), busy_.end(), false) - busy_.begin());
    busy_[index] = true;
    fresh = !created_[index];
    created_[index] = true;
  }
  Lease lease(this, index);
  if (fresh) {
    std::error_code ec;
    fs::remove_all(dirs_[index], ec);
    fs::copy(source_root_, dirs_[index], fs::copy_options::recursive);
  }
  return lease;
}

void WorkdirPool::release(std::size_t index) {
  {
    std::lock_guard lock(mutex_);
    busy_[index] = false;
  }
  freed_.notify_one();
}

void WorkdirPool::scrub(const fs::path& workdir) const {
  std::vector<fs::path> extra;
  for (auto it = fs::recursive_directory_iterator(workdir); it != fs::recursive_directory_iterator();
       ++it) {
    const auto rel = fs::relative(it->path(), workdir).generic_string();
    if (!std::binary_search(manifest_.begin(), manifest_.end(), rel)) {
      extra.push_back(it->path());
      if (it->is_directory()) it.disable_recursion_pending();
    }
  }
  std::error_code ec;
  for (const auto& p : extra) fs::remove_all(p, ec);
}

}  // namespace surgeon
