#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "pre/backend.hpp"
#include "pre/common.hpp"
#include "pre/qualification.hpp"

namespace pre::harness {

/// A stage artifact this command depends on does not exist yet.
class UpstreamMissingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The pipeline declines to proceed (no qualified reviewers).
class RefusalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// off: gold exam only. both: candidates must pass the gold exam and the
/// order-swap consistency probe. only: the probe alone qualifies (no gold
/// needed), which forces uniform weights since no agreement estimate exists.
enum class AutoExamPolicy { off, both, only };

std::string to_string(AutoExamPolicy p);
AutoExamPolicy auto_exam_policy_from_string(const std::string& s);

struct RunConfig {
  std::string tasks_path;
  /// Empty: responses are generated through the evaluatee backends and
  /// persisted as outputs.jsonl in the output directory.
  std::string outputs_path;
  std::string gold_path;  // empty: no gold labels
  std::vector<backend::BackendSpec> backends;
  std::vector<std::string> evaluatee_ids;
  std::vector<std::string> reviewer_candidate_ids;
  std::vector<std::string> questioner_ids;
  backend::Setting setting = backend::Setting::pairwise;
  double xi = 0.60;
  double eta = 0.55;
  qualification::WeightScheme weight_scheme =
      qualification::WeightScheme::log_odds;
  double clamp_eps = 0.02;
  qualification::TiePolicy tie_policy = qualification::TiePolicy::half;
  AutoExamPolicy auto_exam_policy = AutoExamPolicy::off;
  std::size_t concurrency = 8;
  std::string cache_dir;  // empty: no response cache
  std::string out_dir = "out";
  std::uint64_t seed = 0;
};

RunConfig run_config_from_json(const json& obj);
RunConfig load_run_config(const std::string& path);
json run_config_to_json(const RunConfig& config);

/// Hash of every behavior-affecting knob. Storage locations and the
/// concurrency cap deliberately do not participate: moving a run or changing
/// parallelism must not disown its artifacts.
std::string config_fingerprint(const RunConfig& config);

/// Owning set of live backends keyed by id, sharing one response cache.
/// Scripted backends with the default seed 0 get a per-backend seed derived
/// from the master seed; an explicit nonzero seed is kept as pinned.
class BackendSet {
 public:
  explicit BackendSet(const RunConfig& config);

  /// Throws ValidationError for an id with no backend spec.
  backend::Backend* get(const std::string& id) const;
  bool has(const std::string& id) const;

 private:
  std::unique_ptr<backend::CacheStore> cache_;
  std::map<std::string, std::unique_ptr<backend::Backend>> by_id_;
};

/// Process exit codes shared by all subcommands.
inline constexpr int kExitSuccess = 0;
inline constexpr int kExitUnexpected = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitUpstreamMissing = 3;
inline constexpr int kExitRefusal = 4;
inline constexpr int kExitPartial = 5;

int cmd_exam(const RunConfig& config);
int cmd_review(const RunConfig& config, bool resume);
int cmd_chair(const RunConfig& config);
int cmd_report(const RunConfig& config);
int run_all(const RunConfig& config, bool resume);

/// Maps an exception escaping a subcommand to its exit code and prints the
/// message to stderr.
int run_command(const std::string& name, const RunConfig& config, bool resume);

}  // namespace pre::harness
