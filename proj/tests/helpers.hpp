#pragma once

// Shared fixtures for the unit and acceptance binaries. Framework-free so
// both can include it.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pre/backend.hpp"
#include "pre/common.hpp"
#include "pre/corpus.hpp"

#ifndef _WIN32
#include <sys/wait.h>
#endif

namespace pre::testing {

inline std::filesystem::path testdata_dir() {
  return std::filesystem::path(PRE_TESTDATA_DIR);
}

inline std::string cli_path() { return PRE_CLI_PATH; }

/// Runs the CLI with the given argument string, output discarded.
/// Returns the process exit code.
inline int run_cli(const std::string& args) {
  std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
#ifdef _WIN32
  return status;
#else
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
#endif
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    std::uniform_int_distribution<std::uint64_t> dist;
    path_ = std::filesystem::temp_directory_path() /
            ("pre-test-" + to_hex16(dist(rd)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

  std::filesystem::path file(const std::string& name,
                             const std::string& content) const {
    auto p = path_ / name;
    write_text_file(p, content);
    return p;
  }

 private:
  std::filesystem::path path_;
};

/// The checked-in demo corpus: 12 summarization tasks, outputs from m1..m4,
/// pointwise gold for m1 and m2.
inline corpus::Corpus demo_corpus() {
  auto dir = testdata_dir();
  return corpus::load_corpus(dir / "tasks.jsonl", dir / "outputs.jsonl",
                             dir / "gold.jsonl");
}

inline std::string padded_task_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "t%03zu", i);
  return buf;
}

struct SyntheticSpec {
  std::size_t task_count = 10;
  std::vector<std::string> evaluatee_ids;
  /// Gold 1..5 score for (task index, evaluatee index); nullopt leaves the
  /// output unannotated.
  std::function<std::optional<double>(std::size_t, std::size_t)> gold_score;
  corpus::TaskKind kind = corpus::TaskKind::summarization;
};

/// Builds an in-memory corpus with one output per (task, evaluatee) and
/// pointwise gold from the score callback.
inline corpus::Corpus synthetic_corpus(const SyntheticSpec& spec) {
  std::vector<corpus::Task> tasks;
  std::vector<corpus::ModelOutput> outputs;
  std::vector<corpus::GoldLabel> gold;
  for (std::size_t t = 0; t < spec.task_count; ++t) {
    corpus::Task task;
    task.task_id = padded_task_id(t);
    task.instruction = "Summarize the text in one sentence.";
    task.source = "Source text for item " + std::to_string(t) + ".";
    task.kind = spec.kind;
    tasks.push_back(std::move(task));
    for (std::size_t e = 0; e < spec.evaluatee_ids.size(); ++e) {
      corpus::ModelOutput out;
      out.task_id = padded_task_id(t);
      out.evaluatee_id = spec.evaluatee_ids[e];
      out.text = spec.evaluatee_ids[e] + " answer on item " +
                 std::to_string(t) + ".";
      outputs.push_back(std::move(out));
      if (!spec.gold_score) continue;
      if (auto score = spec.gold_score(t, e)) {
        corpus::GoldLabel g;
        g.task_id = padded_task_id(t);
        g.kind = corpus::GoldLabel::Kind::pointwise;
        g.pointwise =
            corpus::GoldPointwise{spec.evaluatee_ids[e], *score, {}};
        gold.push_back(std::move(g));
      }
    }
  }
  return corpus::Corpus(std::move(tasks), std::move(outputs), std::move(gold));
}

inline backend::BackendSpec scripted_spec(const std::string& id,
                                          double accuracy,
                                          std::uint64_t seed = 1,
                                          const std::string& self_id = "",
                                          double bias_strength = 0.0) {
  backend::BackendSpec spec;
  spec.backend_id = id;
  spec.kind = backend::BackendSpec::Kind::scripted;
  backend::ScriptedConfig sc;
  sc.accuracy = accuracy;
  sc.seed = seed;
  sc.self_id = self_id;
  sc.bias_strength = bias_strength;
  spec.scripted = sc;
  return spec;
}

/// Backend whose completions come from a caller-supplied function; lets a
/// test answer with fixed text, count prompts, or inject failures.
class FnBackend : public backend::Backend {
 public:
  using Fn = std::function<backend::CompletionResult(
      const std::string&, const backend::JobContext*)>;

  FnBackend(const std::string& id, Fn fn)
      : Backend(scripted_spec(id, 1.0)), fn_(std::move(fn)) {}

  static FnBackend fixed(const std::string& id, const std::string& text) {
    return FnBackend(id, [text](const std::string&,
                                const backend::JobContext*) {
      backend::CompletionResult r;
      r.text = text;
      return r;
    });
  }

 protected:
  backend::CompletionResult run(const std::string& prompt,
                                const backend::JobContext* ctx) override {
    return fn_(prompt, ctx);
  }

 private:
  Fn fn_;
};

inline json read_json_file(const std::filesystem::path& path) {
  return json::parse(read_text_file(path));
}

inline std::vector<json> read_jsonl_file(const std::filesystem::path& path) {
  std::vector<json> rows;
  for_each_jsonl(path, [&](std::size_t, const json& obj) {
    rows.push_back(obj);
  });
  return rows;
}

}  // namespace pre::testing
