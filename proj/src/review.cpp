#include "pre/review.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <random>

namespace pre::review {

ReviewJob make_review_job(backend::Setting setting, const std::string& task_id,
                          std::vector<std::string> subject_ids,
                          const std::string& reviewer_id) {
  ReviewJob job;
  job.setting = setting;
  job.task_id = task_id;
  job.subject_ids = std::move(subject_ids);
  job.reviewer_id = reviewer_id;
  const std::string setting_name = backend::to_string(setting);
  std::vector<std::string_view> fields = {"review", setting_name,
                                          job.task_id, job.reviewer_id};
  for (const auto& s : job.subject_ids) fields.push_back(s);
  job.job_id = to_hex16(hash_fields(fields));
  return job;
}

json record_to_json(const ReviewRecord& r) {
  return {{"job_id", r.job.job_id},
          {"setting", backend::to_string(r.job.setting)},
          {"task_id", r.job.task_id},
          {"subject_ids", r.job.subject_ids},
          {"reviewer_id", r.job.reviewer_id},
          {"judgment", backend::judgment_to_json(r.judgment)},
          {"latency", r.latency},
          {"attempt_count", r.attempt_count}};
}

ReviewRecord record_from_json(const json& obj) {
  ReviewRecord r;
  r.job.job_id = obj.at("job_id").get<std::string>();
  r.job.setting =
      backend::setting_from_string(obj.at("setting").get<std::string>());
  r.job.task_id = obj.at("task_id").get<std::string>();
  r.job.subject_ids = obj.at("subject_ids").get<std::vector<std::string>>();
  r.job.reviewer_id = obj.at("reviewer_id").get<std::string>();
  r.judgment = backend::judgment_from_json(obj.at("judgment"));
  r.latency = obj.at("latency").get<double>();
  r.attempt_count = obj.at("attempt_count").get<int>();
  return r;
}

// ---------------------------------------------------------------------------
// Generation

GenerationResult generate_responses(
    const corpus::Corpus& corpus,
    const std::vector<backend::Backend*>& evaluatees) {
  struct Slot {
    std::optional<corpus::ModelOutput> output;
    std::optional<GenerationFailure> failure;
  };
  const auto& tasks = corpus.tasks();
  std::vector<Slot> slots(tasks.size() * evaluatees.size());

  std::size_t cap = 1;
  for (const auto* b : evaluatees) {
    cap += static_cast<std::size_t>(b->spec().max_in_flight);
  }
  parallel_for(slots.size(), cap, [&](std::size_t i) {
    const corpus::Task& task = tasks[i / evaluatees.size()];
    backend::Backend* eval = evaluatees[i % evaluatees.size()];
    std::string prompt = backend::render_generation_prompt(task);
    try {
      auto result = eval->complete(prompt, nullptr);
      corpus::ModelOutput out;
      out.task_id = task.task_id;
      out.evaluatee_id = eval->spec().backend_id;
      out.text = result.text;
      slots[i].output = std::move(out);
    } catch (const BackendError& e) {
      slots[i].failure =
          GenerationFailure{task.task_id, eval->spec().backend_id, e.what()};
    }
  });

  GenerationResult result;
  for (auto& slot : slots) {
    if (slot.output) result.outputs.push_back(std::move(*slot.output));
    if (slot.failure) result.failures.push_back(std::move(*slot.failure));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Jobs

std::vector<ReviewJob> build_jobs(const corpus::Corpus& corpus,
                                  const std::vector<std::string>& reviewer_ids,
                                  const std::vector<std::string>& evaluatee_ids,
                                  backend::Setting setting) {
  if (reviewer_ids.empty()) {
    throw ValidationError("no reviewers to build jobs for");
  }
  if (evaluatee_ids.empty()) {
    throw ValidationError("no evaluatees to build jobs for");
  }
  std::vector<ReviewJob> jobs;
  for (const auto& reviewer : reviewer_ids) {
    for (const auto& task : corpus.tasks()) {
      if (setting == backend::Setting::pairwise) {
        for (const auto& a : evaluatee_ids) {
          for (const auto& b : evaluatee_ids) {
            if (a == b) continue;
            if (!corpus.find_output(task.task_id, a) ||
                !corpus.find_output(task.task_id, b)) {
              continue;
            }
            jobs.push_back(
                make_review_job(setting, task.task_id, {a, b}, reviewer));
          }
        }
      } else {
        for (const auto& e : evaluatee_ids) {
          if (!corpus.find_output(task.task_id, e)) continue;
          jobs.push_back(make_review_job(setting, task.task_id, {e}, reviewer));
        }
      }
    }
  }
  return jobs;
}

// ---------------------------------------------------------------------------
// Record store

RecordStore::RecordStore(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    for_each_jsonl(path_, [&](std::size_t, const json& obj) {
      ReviewRecord r = record_from_json(obj);
      if (!job_ids_.insert(r.job.job_id).second) {
        throw ValidationError("record store holds duplicate job_id " +
                              r.job.job_id);
      }
      records_.push_back(std::move(r));
    });
  }
}

void RecordStore::append(const ReviewRecord& record) {
  std::lock_guard lock(mutex_);
  if (!job_ids_.insert(record.job.job_id).second) {
    throw ValidationError("duplicate append of job_id " + record.job.job_id);
  }
  std::ofstream out(path_, std::ios::app);
  if (!out) {
    throw std::runtime_error("cannot append to record store: " +
                             path_.string());
  }
  out << record_to_json(record).dump() << "\n";
  out.flush();
  if (!out) {
    throw std::runtime_error("write failed on record store: " +
                             path_.string());
  }
  records_.push_back(record);
}

bool RecordStore::contains(const std::string& job_id) const {
  std::lock_guard lock(mutex_);
  return job_ids_.count(job_id) > 0;
}

// ---------------------------------------------------------------------------
// Execution

ExecutionReport execute_jobs(
    const std::vector<ReviewJob>& jobs, const corpus::Corpus& corpus,
    const std::map<std::string, backend::Backend*>& reviewers,
    RecordStore& store, const ExecuteOptions& options) {
  for (const auto& job : jobs) {
    if (!reviewers.count(job.reviewer_id)) {
      throw ValidationError("no backend for reviewer " + job.reviewer_id);
    }
  }

  ExecutionReport report;
  std::vector<const ReviewJob*> pending;
  pending.reserve(jobs.size());
  for (const auto& job : jobs) {
    if (store.contains(job.job_id)) {
      ++report.skipped;
    } else {
      pending.push_back(&job);
    }
  }
  std::sort(pending.begin(), pending.end(),
            [](const ReviewJob* a, const ReviewJob* b) {
              return a->job_id < b->job_id;
            });
  std::mt19937_64 rng(derive_seed(options.seed, "issue_order"));
  std::shuffle(pending.begin(), pending.end(), rng);
  if (pending.size() > options.max_records) {
    pending.resize(options.max_records);
  }

  struct Outcome {
    std::optional<ReviewRecord> record;
    std::optional<std::string> error;
  };

  for (std::size_t base = 0; base < pending.size();
       base += options.chunk_size) {
    std::size_t chunk = std::min(options.chunk_size, pending.size() - base);
    std::vector<Outcome> outcomes(chunk);
    parallel_for(chunk, options.workers, [&](std::size_t k) {
      const ReviewJob& job = *pending[base + k];
      const corpus::Task* task = corpus.find_task(job.task_id);
      if (!task) {
        throw ValidationError("job " + job.job_id + " names unknown task " +
                              job.task_id);
      }
      std::vector<const corpus::ModelOutput*> outputs;
      for (const auto& s : job.subject_ids) {
        const auto* out = corpus.find_output(job.task_id, s);
        if (!out) {
          throw ValidationError("job " + job.job_id + " lacks output for " +
                                s + " on " + job.task_id);
        }
        outputs.push_back(out);
      }
      backend::JobContext ctx;
      ctx.setting = job.setting;
      ctx.task_id = job.task_id;
      ctx.subject_ids = job.subject_ids;
      ctx.job_key = job.job_id;
      if (job.setting == backend::Setting::pairwise) {
        ctx.gold_preference = corpus.gold_preference(
            job.task_id, job.subject_ids[0], job.subject_ids[1]);
      } else {
        ctx.gold_score = corpus.gold_score(job.task_id, job.subject_ids[0]);
      }
      std::string prompt =
          backend::render_prompt(job.setting, *task, outputs);
      try {
        auto result =
            reviewers.at(job.reviewer_id)->complete(prompt, &ctx);
        ReviewRecord record;
        record.job = job;
        record.judgment = backend::parse_judgment(result.text, job.setting);
        record.latency = result.latency;
        record.attempt_count = result.attempt_count;
        outcomes[k].record = std::move(record);
      } catch (const BackendError& e) {
        outcomes[k].error = e.what();
      }
    });
    for (std::size_t k = 0; k < chunk; ++k) {
      if (outcomes[k].record) {
        store.append(*outcomes[k].record);
        ++report.executed;
      } else {
        report.failures.push_back({*pending[base + k], *outcomes[k].error});
      }
    }
  }
  return report;
}

}  // namespace pre::review
