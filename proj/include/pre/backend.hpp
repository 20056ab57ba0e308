#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pre/common.hpp"
#include "pre/corpus.hpp"

namespace pre::backend {

/// The three judging prompt settings: ordered pair comparison, 1-5 rating,
/// 0-100 rating.
enum class Setting { pairwise, point5, point100 };

std::string to_string(Setting s);
Setting setting_from_string(const std::string& s);
bool is_pointwise(Setting s);

/// Inclusive rating range for a pointwise setting.
std::pair<int, int> rating_range(Setting s);

struct ScriptedConfig {
  double accuracy = 0.8;        // chance of agreeing with gold
  std::uint64_t seed = 0;
  std::string self_id;          // evaluatee this judge favors; empty = none
  double bias_strength = 0.0;   // chance of flipping a non-self verdict to self
};

struct BackendSpec {
  enum class Kind { http, scripted };
  std::string backend_id;
  Kind kind = Kind::scripted;
  std::string endpoint;         // http only, e.g. http://host:port/path
  std::string auth_env_var;     // names the env var holding the bearer token
  std::string model;            // request body model name; default backend_id
  double request_timeout = 30;  // seconds
  int max_retries = 2;          // attempts = 1 + max_retries
  double retry_backoff = 0.5;   // seconds before the first retry, then doubled
  int max_tokens = 64;
  int max_in_flight = 4;        // concurrent request cap for this backend
  std::optional<ScriptedConfig> scripted;
};

/// Throws ParseError on any violated field constraint.
void validate(const BackendSpec& spec);

BackendSpec backend_spec_from_json(const json& obj);
json backend_spec_to_json(const BackendSpec& spec);

/// One parsed reviewer response. Unparseable is a value, not an error: a
/// response the extractor cannot read still produces a judgment record.
struct ParsedJudgment {
  enum class Kind { rating, preference, unparseable };
  /// Which output a pairwise response picked, named after the literal
  /// answer tokens the prompt asks for.
  enum class Choice { one, two };

  Kind kind = Kind::unparseable;
  std::optional<int> rating;        // within the setting's range
  std::optional<Choice> preference;
  std::string raw_text;

  bool operator==(const ParsedJudgment&) const = default;
};

std::string to_string(ParsedJudgment::Choice c);
ParsedJudgment::Choice choice_from_string(const std::string& s);
corpus::Verdict to_verdict(ParsedJudgment::Choice c);

json judgment_to_json(const ParsedJudgment& j);
ParsedJudgment judgment_from_json(const json& obj);

/// Renders the judging prompt for a setting. Pairwise needs exactly two
/// outputs, pointwise exactly one; wrong arity throws ParseError.
/// `swap_sections` reorders the source and response sections of a pointwise
/// prompt (the order-consistency probe); it is invalid for pairwise, where
/// the probe is swapping the two outputs instead.
std::string render_prompt(Setting setting, const corpus::Task& task,
                          const std::vector<const corpus::ModelOutput*>& outputs,
                          bool swap_sections = false);

/// Prompt an evaluatee answers to produce its response: the task instruction
/// with "{source}" substituted, or instruction and source on separate lines
/// when the placeholder is absent.
std::string render_generation_prompt(const corpus::Task& task);

/// Extracts a judgment from raw model text.
/// Pairwise: the first standalone token reading "one" or "two"
/// (case-insensitive, delimited by non-word characters) wins.
/// Pointwise: the first standalone number wins if it lies in the setting's
/// range after truncating any decimal part toward zero.
ParsedJudgment parse_judgment(const std::string& raw, Setting setting);

/// What a backend may know about the job behind a prompt. The scripted judge
/// needs the gold answer and a stable per-job key; HTTP backends ignore all
/// of it. Null context means the prompt is not a judging job (generation).
struct JobContext {
  Setting setting = Setting::pairwise;
  std::string task_id;
  std::vector<std::string> subject_ids;  // one id, or the ordered pair
  std::string job_key;                   // seeds the per-job random stream
  /// Oriented to subject_ids order: first = subjects[0] preferred.
  std::optional<corpus::Verdict> gold_preference;
  std::optional<double> gold_score;      // 1..5 scale
};

struct CompletionResult {
  std::string text;
  int attempt_count = 1;
  double latency = 0.0;  // seconds
  bool from_cache = false;
};

/// Deterministic synthetic judge used as the test oracle. Agrees with gold
/// with probability `accuracy`, otherwise answers the exact opposite; a gold
/// tie (or missing gold) becomes a fair coin. When the judge's own output is
/// one side of a pair and the tentative answer is the other side, it flips to
/// itself with probability `bias_strength`. Pointwise settings emit the gold
/// score (rescaled for point100) or its mirror image; no gold means the
/// midpoint. Everything is a pure function of (config.seed, job_key).
ParsedJudgment scripted_judge(const ScriptedConfig& config,
                              const JobContext& ctx);

/// Filesystem cache of completion results, keyed by backend, prompt hash and
/// scope (the setting name, or "generate"). Thread-safe.
class CacheStore {
 public:
  explicit CacheStore(std::filesystem::path dir);

  std::optional<CompletionResult> lookup(const std::string& backend_id,
                                         const std::string& scope,
                                         const std::string& prompt);
  void store(const std::string& backend_id, const std::string& scope,
             const std::string& prompt, const CompletionResult& result);

 private:
  std::filesystem::path key_path(const std::string& backend_id,
                                 const std::string& scope,
                                 const std::string& prompt) const;
  std::filesystem::path dir_;
  std::mutex mutex_;
};

class Backend {
 public:
  virtual ~Backend() = default;

  const BackendSpec& spec() const { return spec_; }

  /// Thread-safe; at most spec().max_in_flight calls run concurrently.
  CompletionResult complete(const std::string& prompt,
                            const JobContext* ctx = nullptr);

  /// complete() invocations, including ones served from cache.
  std::uint64_t calls() const { return calls_.load(); }
  /// Individual network attempts; always 0 for scripted backends.
  std::uint64_t network_attempts() const { return network_attempts_.load(); }

 protected:
  explicit Backend(BackendSpec spec);
  virtual CompletionResult run(const std::string& prompt,
                               const JobContext* ctx) = 0;

  BackendSpec spec_;
  std::atomic<std::uint64_t> calls_{0};
  std::atomic<std::uint64_t> network_attempts_{0};

 private:
  std::mutex slots_mutex_;
  std::condition_variable slots_cv_;
  int in_flight_ = 0;
};

class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(BackendSpec spec);

 protected:
  CompletionResult run(const std::string& prompt,
                       const JobContext* ctx) override;
};

class HttpBackend : public Backend {
 public:
  /// `cache` may be null (no caching). Not owned.
  HttpBackend(BackendSpec spec, CacheStore* cache);

 protected:
  CompletionResult run(const std::string& prompt,
                       const JobContext* ctx) override;

 private:
  CacheStore* cache_;
};

std::unique_ptr<Backend> make_backend(const BackendSpec& spec,
                                      CacheStore* cache);

}  // namespace pre::backend
