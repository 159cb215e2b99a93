#include "support/support.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

#include "surgeon/config.hpp"

namespace fs = std::filesystem;

namespace surgeon::testing {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string collapse(std::string_view s) {
  std::string out;
  bool pending = false;
  for (const char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace

TempDir::TempDir(std::string_view tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          (std::string(tag) + "-" + std::to_string(::getpid()) + "-" +
           std::to_string(counter.fetch_add(1)));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t dp_edit_distance(std::string_view a, std::string_view b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, sub});
    }
  }
  return d[n][m];
}

double dp_ratio(std::string_view a, std::string_view b) {
  const std::string x = collapse(a), y = collapse(b);
  const std::size_t longest = std::max(x.size(), y.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(dp_edit_distance(x, y)) / static_cast<double>(longest);
}

fs::path fixture_root() { return fs::path(SURGEON_FIXTURE_DIR); }
fs::path fixture_project() { return fixture_root() / "toyproj"; }

std::vector<PlantedBug> fixture_bugs() {
  std::vector<fs::path> defs;
  for (const auto& e : fs::directory_iterator(fixture_root() / "bugs")) {
    if (e.path().extension() == ".def") defs.push_back(e.path());
  }
  std::sort(defs.begin(), defs.end());
  std::vector<PlantedBug> bugs;
  for (const auto& def : defs) {
    PlantedBug bug;
    bug.name = def.stem().string();
    std::istringstream in(read_file(def));
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = trim(std::string_view(line).substr(0, eq));
      const std::string value = trim(std::string_view(line).substr(eq + 1));
      if (key == "file") bug.file = value;
      else if (key == "line") bug.line = std::stoi(value);
      else if (key == "buggy") bug.buggy = value;
      else if (key == "fixed") bug.fixed = value;
    }
    bugs.push_back(std::move(bug));
  }
  return bugs;
}

fs::path materialize(const fs::path& dest, const PlantedBug* planted,
                     const std::vector<std::string>& extra_cfg) {
  fs::create_directories(dest);
  for (const auto& e : fs::recursive_directory_iterator(fixture_project())) {
    const auto rel = fs::relative(e.path(), fixture_project());
    if (rel.begin()->string() == ".build") continue;
    if (e.is_directory()) {
      fs::create_directories(dest / rel);
    } else if (e.is_regular_file()) {
      fs::copy_file(e.path(), dest / rel, fs::copy_options::overwrite_existing);
    }
  }
  fs::remove(dest / "bug.cfg");
  for (const auto& bug : fixture_bugs()) {
    const auto path = dest / bug.file;
    std::istringstream in(read_file(path));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    auto& target = lines.at(static_cast<std::size_t>(bug.line - 1));
    const std::string current = trim(target);
    if (current != bug.buggy && current != bug.fixed) {
      throw std::runtime_error(bug.name + ": line " + std::to_string(bug.line) +
                               " matches neither state: " + current);
    }
    const std::string indent = target.substr(0, target.find_first_not_of(" \t"));
    target = indent + (planted && planted->name == bug.name ? bug.buggy : bug.fixed);
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    write_file(path, text);
  }
  if (!planted) return {};
  std::string cfg;
  cfg += "id = toyproj-" + planted->name + "\n";
  cfg += "project_root = .\n";
  cfg += "file = " + planted->file + "\n";
  cfg += "buggy_line_no = " + std::to_string(planted->line) + "\n";
  cfg += "compile_command = mkdir -p .build && g++ -std=c++17 -Iinclude -o .build/toy_tests "
         "tests/test_main.cpp\n";
  cfg += "test_command = ./.build/toy_tests\n";
  cfg += "timeout_seconds = 60\n";
  cfg += "include_globs = include/**/*.hpp\n";
  cfg += "expected_fix = " + planted->fixed + "\n";
  for (const auto& extra : extra_cfg) cfg += extra + "\n";
  write_file(dest / "bug.cfg", cfg);
  return dest / "bug.cfg";
}

BugSpec fixture_spec(const fs::path& bug_cfg) { return read_bug_config(bug_cfg); }

}  // namespace surgeon::testing

namespace surgeon::testing {

std::vector<std::pair<std::string, std::string>> synthetic_project(std::size_t files,
                                                                   std::size_t functions,
                                                                   unsigned seed) {
  std::mt19937 rng(seed);
  const std::vector<std::string> names{"total", "count", "offset", "limit", "buffer",
                                       "cursor", "weight", "factor", "index", "delta"};
  const std::vector<std::string> calls{"computeTotal", "advanceCursor", "clampLimit",
                                       "readBuffer", "scaleFactor"};
  const std::vector<std::string> ops{"+", "-", "*", "<", ">", "=="};
  auto pick = [&](const std::vector<std::string>& v) { return v[rng() % v.size()]; };
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t made = 0;
  for (std::size_t f = 0; f < files; ++f) {
    const std::string cls = "Unit" + std::to_string(f);
    std::string text = "package synth;\n\npublic class " + cls + " {\n  private int state;\n\n";
    const std::size_t here = functions / files + (f < functions % files ? 1 : 0);
    for (std::size_t k = 0; k < here; ++k, ++made) {
      text += "  public int method" + std::to_string(made) + "(int " + pick(names) + "Arg, int limit) {\n";
      const int statements = 6 + static_cast<int>(rng() % 4);
      text += "    int acc = limit;\n";
      for (int s = 0; s < statements; ++s) {
        switch (rng() % 3) {
          case 0:
            text += "    acc = acc " + pick(ops) + " " + pick(calls) + "(state, " +
                    std::to_string(rng() % 50) + ");\n";
            break;
          case 1:
            text += "    if (acc " + pick(ops) + " " + std::to_string(rng() % 9) +
                    ") {\n      state = state + acc;\n    }\n";
            break;
          default:
            text += "    int " + pick(names) + std::to_string(s) + " = acc * " +
                    std::to_string(rng() % 7 + 1) + " + state;\n";
            break;
        }
      }
      text += "    return acc + state;\n  }\n\n";
    }
    text += "}\n";
    out.emplace_back("src/synth/" + cls + ".java", text);
  }
  return out;
}

}  // namespace surgeon::testing
