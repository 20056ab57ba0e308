#include <doctest.h>

#include <algorithm>
#include <set>

#include "helpers.hpp"
#include "pre/review.hpp"

using namespace pre;
using namespace pre::review;
using backend::ScriptedBackend;
using backend::Setting;
using pre::testing::FnBackend;
using pre::testing::TempDir;

namespace {

corpus::Corpus small_corpus(std::size_t tasks = 4) {
  pre::testing::SyntheticSpec spec;
  spec.task_count = tasks;
  spec.evaluatee_ids = {"e1", "e2"};
  spec.gold_score = [](std::size_t, std::size_t e) {
    return std::optional<double>(e == 0 ? 4.0 : 2.0);
  };
  return pre::testing::synthetic_corpus(spec);
}

std::vector<std::string> sorted_lines(const std::filesystem::path& path) {
  std::string text = read_text_file(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    if (end > start) lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  std::sort(lines.begin(), lines.end());
  return lines;
}

}  // namespace

TEST_CASE("review job ids are stable content hashes") {
  auto job = make_review_job(Setting::pairwise, "t1", {"a", "b"}, "r1");
  CHECK(job.job_id.size() == 16);
  CHECK(job.job_id ==
        make_review_job(Setting::pairwise, "t1", {"a", "b"}, "r1").job_id);
  // Any differing field gives a distinct id.
  std::set<std::string> ids = {
      job.job_id,
      make_review_job(Setting::pairwise, "t1", {"b", "a"}, "r1").job_id,
      make_review_job(Setting::pairwise, "t1", {"a", "b"}, "r2").job_id,
      make_review_job(Setting::pairwise, "t2", {"a", "b"}, "r1").job_id,
      make_review_job(Setting::point5, "t1", {"a"}, "r1").job_id,
      make_review_job(Setting::point100, "t1", {"a"}, "r1").job_id,
  };
  CHECK(ids.size() == 6);
}

TEST_CASE("review records round trip through json") {
  ReviewRecord r;
  r.job = make_review_job(Setting::point5, "t3", {"e2"}, "r1");
  r.judgment = backend::parse_judgment("4", Setting::point5);
  r.latency = 0.125;
  r.attempt_count = 2;
  auto back = record_from_json(record_to_json(r));
  CHECK(back.job.job_id == r.job.job_id);
  CHECK(back.job.subject_ids == r.job.subject_ids);
  CHECK(back.job.reviewer_id == "r1");
  CHECK(back.judgment == r.judgment);
  CHECK(back.latency == 0.125);
  CHECK(back.attempt_count == 2);
}

TEST_CASE("build_jobs enumerates the full review plan") {
  auto corpus = small_corpus(4);

  SUBCASE("pairwise: both orders per task and reviewer") {
    auto jobs = build_jobs(corpus, {"r1", "r2"}, {"e1", "e2"},
                           Setting::pairwise);
    CHECK(jobs.size() == 16);  // 2 reviewers x 4 tasks x 2 ordered pairs
    // The job set is closed under order reversal.
    std::set<std::string> ids;
    for (const auto& j : jobs) ids.insert(j.job_id);
    for (const auto& j : jobs) {
      auto reversed = make_review_job(
          j.setting, j.task_id, {j.subject_ids[1], j.subject_ids[0]},
          j.reviewer_id);
      CHECK(ids.count(reversed.job_id) == 1);
    }
  }
  SUBCASE("pointwise: one job per output") {
    auto jobs = build_jobs(corpus, {"r1"}, {"e1", "e2"}, Setting::point5);
    CHECK(jobs.size() == 8);
    for (const auto& j : jobs) CHECK(j.subject_ids.size() == 1);
  }
  SUBCASE("pairs missing an output are skipped") {
    std::vector<corpus::Task> tasks = {
        {"t1", "i", "s", corpus::TaskKind::generic},
        {"t2", "i", "s", corpus::TaskKind::generic}};
    std::vector<corpus::ModelOutput> outputs = {
        {"t1", "a", "x", {}}, {"t1", "b", "y", {}}, {"t2", "a", "z", {}}};
    corpus::Corpus partial(tasks, outputs, {});
    CHECK(build_jobs(partial, {"r"}, {"a", "b"}, Setting::pairwise).size() ==
          2);
    CHECK(build_jobs(partial, {"r"}, {"a", "b"}, Setting::point5).size() == 3);
  }
  SUBCASE("empty id lists are rejected") {
    CHECK_THROWS_AS(build_jobs(corpus, {}, {"e1"}, Setting::pairwise),
                    ValidationError);
    CHECK_THROWS_AS(build_jobs(corpus, {"r1"}, {}, Setting::pairwise),
                    ValidationError);
  }
}

TEST_CASE("generate_responses produces one output per task and evaluatee") {
  pre::testing::SyntheticSpec spec;
  spec.task_count = 3;
  spec.evaluatee_ids = {"seedonly"};
  corpus::Corpus tasks_only(
      pre::testing::synthetic_corpus(spec).tasks(), {}, {});

  ScriptedBackend a(pre::testing::scripted_spec("a", 1.0, 7));
  ScriptedBackend b(pre::testing::scripted_spec("b", 1.0, 7));
  auto result = generate_responses(tasks_only, {&a, &b});
  REQUIRE(result.outputs.size() == 6);
  CHECK(result.failures.empty());
  // Task-major order, backends in the given order.
  CHECK(result.outputs[0].task_id == "t000");
  CHECK(result.outputs[0].evaluatee_id == "a");
  CHECK(result.outputs[1].evaluatee_id == "b");
  CHECK(result.outputs[2].task_id == "t001");
  // Deterministic: regenerating gives identical text.
  auto again = generate_responses(tasks_only, {&a, &b});
  CHECK(again.outputs[3].text == result.outputs[3].text);
}

TEST_CASE("generation failures are collected, not thrown") {
  pre::testing::SyntheticSpec spec;
  spec.task_count = 3;
  spec.evaluatee_ids = {"x"};
  corpus::Corpus tasks_only(
      pre::testing::synthetic_corpus(spec).tasks(), {}, {});

  ScriptedBackend ok(pre::testing::scripted_spec("ok", 1.0, 7));
  FnBackend flaky("flaky", [](const std::string& prompt,
                              const backend::JobContext*) {
    if (prompt.find("item 1") != std::string::npos) {
      throw BackendError("flaky: refused");
    }
    backend::CompletionResult r;
    r.text = "fine";
    return r;
  });
  auto result = generate_responses(tasks_only, {&ok, &flaky});
  CHECK(result.outputs.size() == 5);
  REQUIRE(result.failures.size() == 1);
  CHECK(result.failures[0].task_id == "t001");
  CHECK(result.failures[0].evaluatee_id == "flaky");
  CHECK(result.failures[0].error == "flaky: refused");
}

TEST_CASE("record store persists and reloads") {
  TempDir dir;
  auto path = dir.path() / "records.jsonl";
  ReviewRecord r1;
  r1.job = make_review_job(Setting::pairwise, "t1", {"a", "b"}, "r");
  r1.judgment = backend::parse_judgment("one", Setting::pairwise);
  ReviewRecord r2;
  r2.job = make_review_job(Setting::pairwise, "t1", {"b", "a"}, "r");
  r2.judgment = backend::parse_judgment("two", Setting::pairwise);

  {
    RecordStore store(path);
    CHECK(store.size() == 0);
    store.append(r1);
    store.append(r2);
    CHECK(store.contains(r1.job.job_id));
    CHECK_THROWS_AS(store.append(r1), ValidationError);
  }
  RecordStore reloaded(path);
  CHECK(reloaded.size() == 2);
  CHECK(reloaded.contains(r2.job.job_id));
  CHECK(reloaded.records()[0].judgment == r1.judgment);

  // A store file holding the same job twice is corrupt.
  std::string line = record_to_json(r1).dump() + "\n";
  auto dup = dir.file("dup.jsonl", line + line);
  CHECK_THROWS_AS(RecordStore{dup}, ValidationError);
}

TEST_CASE("execute_jobs runs the plan and honors the store") {
  auto corpus = small_corpus(4);
  auto jobs = build_jobs(corpus, {"r1"}, {"e1", "e2"}, Setting::pairwise);
  REQUIRE(jobs.size() == 8);
  ScriptedBackend judge(pre::testing::scripted_spec("r1", 0.8, 5));
  std::map<std::string, backend::Backend*> reviewers = {{"r1", &judge}};
  ExecuteOptions options;
  options.seed = 17;
  options.chunk_size = 3;
  options.workers = 4;

  TempDir dir;

  SUBCASE("fresh run executes everything") {
    RecordStore store(dir.path() / "records.jsonl");
    auto report = execute_jobs(jobs, corpus, reviewers, store, options);
    CHECK(report.executed == 8);
    CHECK(report.skipped == 0);
    CHECK(report.failures.empty());
    CHECK(store.size() == 8);
  }

  SUBCASE("already-recorded jobs are skipped") {
    {
      RecordStore store(dir.path() / "records.jsonl");
      ExecuteOptions first = options;
      first.max_records = 5;
      auto report = execute_jobs(jobs, corpus, reviewers, store, first);
      CHECK(report.executed == 5);
    }
    RecordStore store(dir.path() / "records.jsonl");
    auto report = execute_jobs(jobs, corpus, reviewers, store, options);
    CHECK(report.skipped == 5);
    CHECK(report.executed == 3);
    CHECK(store.size() == 8);
  }

  SUBCASE("interrupted and uninterrupted runs agree") {
    RecordStore full(dir.path() / "full.jsonl");
    execute_jobs(jobs, corpus, reviewers, full, options);

    RecordStore resumed(dir.path() / "resumed.jsonl");
    ExecuteOptions head = options;
    head.max_records = 3;
    execute_jobs(jobs, corpus, reviewers, resumed, head);
    execute_jobs(jobs, corpus, reviewers, resumed, options);

    CHECK(sorted_lines(dir.path() / "full.jsonl") ==
          sorted_lines(dir.path() / "resumed.jsonl"));
  }

  SUBCASE("same seed reproduces the file byte for byte") {
    RecordStore s1(dir.path() / "a.jsonl");
    execute_jobs(jobs, corpus, reviewers, s1, options);
    RecordStore s2(dir.path() / "b.jsonl");
    execute_jobs(jobs, corpus, reviewers, s2, options);
    CHECK(read_text_file(dir.path() / "a.jsonl") ==
          read_text_file(dir.path() / "b.jsonl"));

    // A different issue order changes bytes but never content.
    RecordStore s3(dir.path() / "c.jsonl");
    ExecuteOptions other = options;
    other.seed = 18;
    execute_jobs(jobs, corpus, reviewers, s3, other);
    CHECK(sorted_lines(dir.path() / "a.jsonl") ==
          sorted_lines(dir.path() / "c.jsonl"));
  }

  SUBCASE("an unresolvable reviewer stops the run before it starts") {
    auto more = build_jobs(corpus, {"r1", "ghost"}, {"e1", "e2"},
                           Setting::pairwise);
    RecordStore store(dir.path() / "records.jsonl");
    CHECK_THROWS_WITH_AS(
        execute_jobs(more, corpus, reviewers, store, options),
        doctest::Contains("ghost"), ValidationError);
    CHECK(store.size() == 0);
  }
}

TEST_CASE("backend failures become failure entries") {
  auto corpus = small_corpus(4);
  auto jobs = build_jobs(corpus, {"r1"}, {"e1", "e2"}, Setting::point5);
  FnBackend judge("r1", [](const std::string&,
                           const backend::JobContext* ctx) {
    if (!ctx) throw BackendError("missing job context");
    if (ctx->task_id == "t002") throw BackendError("down");
    backend::CompletionResult r;
    r.text = "4";
    return r;
  });
  std::map<std::string, backend::Backend*> reviewers = {{"r1", &judge}};
  TempDir dir;
  RecordStore store(dir.path() / "records.jsonl");
  auto report = execute_jobs(jobs, corpus, reviewers, store, {});
  CHECK(report.executed == 6);
  REQUIRE(report.failures.size() == 2);
  for (const auto& f : report.failures) {
    CHECK(f.job.task_id == "t002");
    CHECK(f.error == "down");
  }
  // Failed jobs are retried on the next pass.
  FnBackend fixed_judge("r1", [](const std::string&,
                                 const backend::JobContext*) {
    backend::CompletionResult r;
    r.text = "4";
    return r;
  });
  reviewers["r1"] = &fixed_judge;
  auto second = execute_jobs(jobs, corpus, reviewers, store, {});
  CHECK(second.skipped == 6);
  CHECK(second.executed == 2);
  CHECK(store.size() == 8);
}
