#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "pre/backend.hpp"
#include "pre/common.hpp"
#include "pre/corpus.hpp"

namespace pre::review {

struct ReviewJob {
  std::string job_id;
  backend::Setting setting = backend::Setting::pairwise;
  std::string task_id;
  std::vector<std::string> subject_ids;  // one id, or the ordered pair
  std::string reviewer_id;
};

/// job_id is a content hash of the other fields, so equal jobs collide and
/// different jobs (including the two orders of a pair) do not.
ReviewJob make_review_job(backend::Setting setting, const std::string& task_id,
                          std::vector<std::string> subject_ids,
                          const std::string& reviewer_id);

struct ReviewRecord {
  ReviewJob job;
  backend::ParsedJudgment judgment;
  double latency = 0;
  int attempt_count = 1;
};

json record_to_json(const ReviewRecord& r);
ReviewRecord record_from_json(const json& obj);

struct GenerationFailure {
  std::string task_id;
  std::string evaluatee_id;
  std::string error;
};

struct GenerationResult {
  std::vector<corpus::ModelOutput> outputs;
  std::vector<GenerationFailure> failures;
};

/// One response per (task, evaluatee backend), produced from the task's
/// instruction. Backend failures become manifest entries, not exceptions;
/// output order is task-major then the given backend order regardless of
/// completion order.
GenerationResult generate_responses(
    const corpus::Corpus& corpus,
    const std::vector<backend::Backend*>& evaluatees);

/// Full job set for a setting: per reviewer, one job per (task, evaluatee)
/// output under pointwise settings, one per (task, ordered evaluatee pair)
/// with both outputs present under pairwise. Throws ValidationError when
/// either id list is empty.
std::vector<ReviewJob> build_jobs(const corpus::Corpus& corpus,
                                  const std::vector<std::string>& reviewer_ids,
                                  const std::vector<std::string>& evaluatee_ids,
                                  backend::Setting setting);

/// Append-only line file of review records. Opening an existing file loads
/// it, so jobs already recorded can be skipped on resume. Appends are
/// flushed per record and thread-safe.
class RecordStore {
 public:
  explicit RecordStore(std::filesystem::path path);

  void append(const ReviewRecord& record);
  bool contains(const std::string& job_id) const;
  const std::vector<ReviewRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::vector<ReviewRecord> records_;
  std::set<std::string> job_ids_;
  mutable std::mutex mutex_;
};

struct JobFailure {
  ReviewJob job;
  std::string error;
};

struct ExecuteOptions {
  std::uint64_t seed = 0;        // fixes the issue order
  std::size_t chunk_size = 256;  // records appended in-order per chunk
  std::size_t workers = 8;
  /// Stop after this many new records; lets tests interrupt a run mid-way.
  std::size_t max_records = std::numeric_limits<std::size_t>::max();
};

struct ExecutionReport {
  std::size_t executed = 0;
  std::size_t skipped = 0;  // already present in the store
  std::vector<JobFailure> failures;
};

/// Runs every job not already in the store. Jobs are issued in a seeded
/// shuffled order and executed concurrently chunk by chunk, but records land
/// in the store in issue order, so a fixed seed gives a byte-identical file.
/// Backend errors become failure entries; an unresolvable reviewer_id throws
/// ValidationError before anything runs.
ExecutionReport execute_jobs(
    const std::vector<ReviewJob>& jobs, const corpus::Corpus& corpus,
    const std::map<std::string, backend::Backend*>& reviewers,
    RecordStore& store, const ExecuteOptions& options);

}  // namespace pre::review
