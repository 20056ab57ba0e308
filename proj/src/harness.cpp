#include "pre/harness.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <set>
#include <utility>

#include "pre/analysis.hpp"
#include "pre/chair.hpp"
#include "pre/corpus.hpp"
#include "pre/review.hpp"

namespace pre::harness {

namespace fs = std::filesystem;

std::string to_string(AutoExamPolicy p) {
  switch (p) {
    case AutoExamPolicy::off:
      return "off";
    case AutoExamPolicy::both:
      return "both";
    case AutoExamPolicy::only:
      return "only";
  }
  throw ValidationError("unknown auto exam policy");
}

AutoExamPolicy auto_exam_policy_from_string(const std::string& s) {
  if (s == "off") return AutoExamPolicy::off;
  if (s == "both") return AutoExamPolicy::both;
  if (s == "only") return AutoExamPolicy::only;
  throw ParseError("unknown auto exam policy: " + s);
}

namespace {

std::string get_string(const json& obj, const char* key,
                       const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_string()) {
    throw ParseError(std::string("config key is not a string: ") + key);
  }
  return obj.at(key).get<std::string>();
}

double get_number(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number()) {
    throw ParseError(std::string("config key is not a number: ") + key);
  }
  return obj.at(key).get<double>();
}

std::vector<std::string> get_string_list(const json& obj, const char* key) {
  std::vector<std::string> out;
  if (!obj.contains(key)) return out;
  if (!obj.at(key).is_array()) {
    throw ParseError(std::string("config key is not a list: ") + key);
  }
  for (const auto& item : obj.at(key)) {
    if (!item.is_string()) {
      throw ParseError(std::string("config list holds a non-string: ") + key);
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

void validate_config(const RunConfig& config) {
  if (config.tasks_path.empty()) {
    throw ValidationError("config: tasks_path is required");
  }
  if (config.xi < 0 || config.xi > 1) {
    throw ValidationError("config: xi outside [0, 1]");
  }
  if (config.eta < 0 || config.eta > 1) {
    throw ValidationError("config: eta outside [0, 1]");
  }
  if (config.clamp_eps <= 0 || config.clamp_eps >= 0.5) {
    throw ValidationError("config: clamp_eps outside (0, 0.5)");
  }
  if (config.concurrency == 0) {
    throw ValidationError("config: concurrency must be at least 1");
  }
  if (config.auto_exam_policy == AutoExamPolicy::only &&
      config.weight_scheme != qualification::WeightScheme::uniform) {
    throw ValidationError(
        "config: auto_exam_policy \"only\" provides no agreement estimate, "
        "set weight_scheme to \"uniform\"");
  }
  std::set<std::string> known;
  for (const auto& spec : config.backends) {
    backend::validate(spec);
    if (!known.insert(spec.backend_id).second) {
      throw ValidationError("config: duplicate backend id: " + spec.backend_id);
    }
  }
  const auto check_ids = [&](const std::vector<std::string>& ids,
                             const char* role) {
    for (const auto& id : ids) {
      if (!known.count(id)) {
        throw ValidationError(std::string("config: ") + role +
                              " id has no backend spec: " + id);
      }
    }
  };
  check_ids(config.evaluatee_ids, "evaluatee");
  check_ids(config.reviewer_candidate_ids, "reviewer candidate");
  check_ids(config.questioner_ids, "questioner");
}

}  // namespace

RunConfig run_config_from_json(const json& obj) {
  if (!obj.is_object()) throw ParseError("config must be a JSON object");
  RunConfig config;
  config.tasks_path = get_string(obj, "tasks_path", "");
  config.outputs_path = get_string(obj, "outputs_path", "");
  config.gold_path = get_string(obj, "gold_path", "");
  if (obj.contains("backends")) {
    if (!obj.at("backends").is_array()) {
      throw ParseError("config: backends must be a list");
    }
    for (const auto& spec : obj.at("backends")) {
      config.backends.push_back(backend::backend_spec_from_json(spec));
    }
  }
  config.evaluatee_ids = get_string_list(obj, "evaluatee_ids");
  config.reviewer_candidate_ids =
      get_string_list(obj, "reviewer_candidate_ids");
  config.questioner_ids = get_string_list(obj, "questioner_ids");
  config.setting =
      backend::setting_from_string(get_string(obj, "setting", "pairwise"));
  config.xi = get_number(obj, "xi", config.xi);
  config.eta = get_number(obj, "eta", config.eta);
  config.weight_scheme = qualification::weight_scheme_from_string(
      get_string(obj, "weight_scheme", "log_odds"));
  config.clamp_eps = get_number(obj, "clamp_eps", config.clamp_eps);
  config.tie_policy = qualification::tie_policy_from_string(
      get_string(obj, "tie_policy", "half"));
  config.auto_exam_policy = auto_exam_policy_from_string(
      get_string(obj, "auto_exam_policy", "off"));
  config.concurrency = static_cast<std::size_t>(
      get_number(obj, "concurrency", static_cast<double>(config.concurrency)));
  config.cache_dir = get_string(obj, "cache_dir", "");
  config.out_dir = get_string(obj, "out_dir", config.out_dir);
  config.seed = static_cast<std::uint64_t>(
      get_number(obj, "seed", static_cast<double>(config.seed)));
  validate_config(config);
  return config;
}

RunConfig load_run_config(const std::string& path) {
  json obj;
  try {
    obj = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return run_config_from_json(obj);
}

json run_config_to_json(const RunConfig& config) {
  json backends = json::array();
  for (const auto& spec : config.backends) {
    backends.push_back(backend::backend_spec_to_json(spec));
  }
  return json{{"tasks_path", config.tasks_path},
              {"outputs_path", config.outputs_path},
              {"gold_path", config.gold_path},
              {"backends", std::move(backends)},
              {"evaluatee_ids", config.evaluatee_ids},
              {"reviewer_candidate_ids", config.reviewer_candidate_ids},
              {"questioner_ids", config.questioner_ids},
              {"setting", backend::to_string(config.setting)},
              {"xi", config.xi},
              {"eta", config.eta},
              {"weight_scheme",
               qualification::to_string(config.weight_scheme)},
              {"clamp_eps", config.clamp_eps},
              {"tie_policy", qualification::to_string(config.tie_policy)},
              {"auto_exam_policy", to_string(config.auto_exam_policy)},
              {"concurrency", config.concurrency},
              {"cache_dir", config.cache_dir},
              {"out_dir", config.out_dir},
              {"seed", config.seed}};
}

std::string config_fingerprint(const RunConfig& config) {
  json obj = run_config_to_json(config);
  obj.erase("out_dir");
  obj.erase("cache_dir");
  obj.erase("concurrency");
  return to_hex16(fnv1a64(obj.dump()));
}

BackendSet::BackendSet(const RunConfig& config) {
  if (!config.cache_dir.empty()) {
    cache_ = std::make_unique<backend::CacheStore>(config.cache_dir);
  }
  for (const auto& spec : config.backends) {
    backend::BackendSpec effective = spec;
    if (effective.kind == backend::BackendSpec::Kind::scripted &&
        effective.scripted && effective.scripted->seed == 0) {
      effective.scripted->seed =
          derive_seed(config.seed, "backend", effective.backend_id);
    }
    by_id_[effective.backend_id] =
        backend::make_backend(effective, cache_.get());
  }
}

backend::Backend* BackendSet::get(const std::string& id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) {
    throw ValidationError("no backend spec for id: " + id);
  }
  return it->second.get();
}

bool BackendSet::has(const std::string& id) const {
  return by_id_.count(id) > 0;
}

namespace {

fs::path artifact(const RunConfig& config, const char* name) {
  return fs::path(config.out_dir) / name;
}

std::string now_timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Existing manifest when its fingerprint matches the config, else a fresh
/// one. `had_mismatch` reports that a manifest existed but belonged to a
/// different configuration.
json open_manifest(const RunConfig& config, bool* had_mismatch = nullptr) {
  if (had_mismatch) *had_mismatch = false;
  const fs::path path = artifact(config, "manifest.json");
  const std::string fp = config_fingerprint(config);
  if (fs::exists(path)) {
    try {
      json existing = json::parse(read_text_file(path));
      if (existing.is_object() &&
          existing.value("config_fingerprint", "") == fp) {
        return existing;
      }
      if (had_mismatch) *had_mismatch = true;
    } catch (const json::exception&) {
      if (had_mismatch) *had_mismatch = true;
    }
  }
  return json{{"config_fingerprint", fp}, {"stages", json::object()}};
}

void finish_stage(json& manifest, const char* stage, const char* status,
                  json counts) {
  counts["status"] = status;
  counts["finished_at"] = now_timestamp();
  manifest["stages"][stage] = std::move(counts);
}

void write_manifest(const RunConfig& config, const json& manifest) {
  write_text_file(artifact(config, "manifest.json"), manifest.dump(2) + "\n");
}

/// Loads the corpus for this run. With no outputs_path configured, responses
/// come from the evaluatee backends: generated once, persisted under the
/// output directory, and reused afterwards. Gold labels referencing an
/// output that failed generation are dropped rather than failing the run.
corpus::Corpus load_pipeline_corpus(const RunConfig& config,
                                    const BackendSet& backends, json& manifest,
                                    std::size_t* generation_failures) {
  *generation_failures = 0;
  std::vector<corpus::Task> tasks = corpus::load_tasks(config.tasks_path);
  std::vector<corpus::GoldLabel> gold;
  if (!config.gold_path.empty()) gold = corpus::load_gold(config.gold_path);

  std::vector<corpus::ModelOutput> outputs;
  if (!config.outputs_path.empty()) {
    outputs = corpus::load_outputs(config.outputs_path);
  } else {
    const fs::path generated = artifact(config, "outputs.jsonl");
    if (fs::exists(generated)) {
      outputs = corpus::load_outputs(generated);
    } else {
      std::vector<backend::Backend*> evaluatees;
      for (const auto& id : config.evaluatee_ids) {
        evaluatees.push_back(backends.get(id));
      }
      const corpus::Corpus tasks_only(tasks, {}, {});
      review::GenerationResult result =
          review::generate_responses(tasks_only, evaluatees);
      corpus::write_outputs(generated, result.outputs);
      if (!result.failures.empty()) {
        std::vector<json> rows;
        for (const auto& f : result.failures) {
          rows.push_back(json{{"task_id", f.task_id},
                              {"evaluatee_id", f.evaluatee_id},
                              {"error", f.error}});
        }
        write_jsonl(artifact(config, "generation_failures.jsonl"), rows);
      }
      finish_stage(manifest, "generate",
                   result.failures.empty() ? "complete" : "partial",
                   json{{"outputs", result.outputs.size()},
                        {"failures", result.failures.size()}});
      *generation_failures = result.failures.size();
      outputs = std::move(result.outputs);
    }
  }

  std::set<std::pair<std::string, std::string>> present;
  for (const auto& output : outputs) {
    present.emplace(output.task_id, output.evaluatee_id);
  }
  std::vector<corpus::GoldLabel> covered;
  for (auto& label : gold) {
    const bool usable =
        label.kind == corpus::GoldLabel::Kind::pointwise
            ? present.count({label.task_id, label.pointwise->evaluatee_id}) > 0
            : present.count({label.task_id, label.preference->first_id}) > 0 &&
                  present.count({label.task_id, label.preference->second_id}) >
                      0;
    if (usable) covered.push_back(std::move(label));
  }
  return corpus::Corpus(std::move(tasks), std::move(outputs),
                        std::move(covered));
}

std::vector<qualification::ReviewerProfile> load_profiles(
    const RunConfig& config) {
  const fs::path path = artifact(config, "profiles.jsonl");
  if (!fs::exists(path)) {
    throw UpstreamMissingError(
        "profiles.jsonl not found; run the exam stage first");
  }
  std::vector<qualification::ReviewerProfile> profiles;
  for_each_jsonl(path, [&](std::size_t, const json& obj) {
    profiles.push_back(qualification::profile_from_json(obj));
  });
  return profiles;
}

review::RecordStore open_record_store(const RunConfig& config) {
  const fs::path path = artifact(config, "records.jsonl");
  if (!fs::exists(path)) {
    throw UpstreamMissingError(
        "records.jsonl not found; run the review stage first");
  }
  return review::RecordStore(path);
}

std::size_t count_unparseable(const std::vector<review::ReviewRecord>& records) {
  return static_cast<std::size_t>(std::count_if(
      records.begin(), records.end(), [](const review::ReviewRecord& r) {
        return r.judgment.kind == backend::ParsedJudgment::Kind::unparseable;
      }));
}

}  // namespace

int cmd_exam(const RunConfig& config) {
  fs::create_directories(config.out_dir);
  const BackendSet backends(config);
  json manifest = open_manifest(config);
  std::size_t generation_failures = 0;
  const corpus::Corpus corpus =
      load_pipeline_corpus(config, backends, manifest, &generation_failures);
  if (config.reviewer_candidate_ids.empty()) {
    throw ValidationError("config: no reviewer candidates to examine");
  }

  std::vector<qualification::ReviewerProfile> profiles;
  if (config.auto_exam_policy == AutoExamPolicy::only) {
    for (const auto& id : config.reviewer_candidate_ids) {
      const auto result =
          qualification::auto_exam(*backends.get(id), corpus,
                                   config.evaluatee_ids, config.setting,
                                   config.eta);
      qualification::ReviewerProfile profile;
      profile.reviewer_id = id;
      profile.setting = config.setting;
      profile.p_l = result.consistency;
      profile.w_l = result.passed ? 1.0 : 0.0;
      profile.passed = result.passed;
      profile.auto_exam_consistency = result.consistency;
      profiles.push_back(std::move(profile));
    }
  } else {
    const auto exam =
        qualification::build_exam(corpus, config.questioner_ids,
                                  config.setting);
    std::vector<std::pair<std::string, double>> agreements;
    for (const auto& id : config.reviewer_candidate_ids) {
      const auto answers =
          qualification::take_exam(exam, corpus, *backends.get(id));
      agreements.emplace_back(
          id, qualification::score_agreement(answers, exam,
                                             config.tie_policy));
    }
    profiles = qualification::qualify(agreements, config.xi, config.setting,
                                      config.weight_scheme, config.clamp_eps);
    if (config.auto_exam_policy == AutoExamPolicy::both) {
      for (auto& profile : profiles) {
        const auto result = qualification::auto_exam(
            *backends.get(profile.reviewer_id), corpus, config.evaluatee_ids,
            config.setting, config.eta);
        profile.auto_exam_consistency = result.consistency;
        if (!result.passed) {
          profile.passed = false;
          profile.w_l = 0;
        }
      }
    }
  }

  std::vector<json> rows;
  std::size_t passed = 0;
  for (const auto& profile : profiles) {
    rows.push_back(qualification::profile_to_json(profile));
    if (profile.passed) ++passed;
  }
  write_jsonl(artifact(config, "profiles.jsonl"), rows);

  std::cout << "exam setting=" << backend::to_string(config.setting)
            << " xi=" << config.xi << " candidates=" << profiles.size()
            << " passed=" << passed << "\n";
  for (const auto& profile : profiles) {
    std::string consistency;
    if (profile.auto_exam_consistency) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), " auto=%.4f",
                    *profile.auto_exam_consistency);
      consistency = buf;
    }
    std::printf("  %-24s p=%.4f w=%+.4f%s %s\n", profile.reviewer_id.c_str(),
                profile.p_l, profile.w_l, consistency.c_str(),
                profile.passed ? "passed" : "filtered");
  }

  finish_stage(manifest, "exam", "complete",
               json{{"candidates", profiles.size()}, {"passed", passed}});
  write_manifest(config, manifest);
  return generation_failures > 0 ? kExitPartial : kExitSuccess;
}

int cmd_review(const RunConfig& config, bool resume) {
  fs::create_directories(config.out_dir);
  const BackendSet backends(config);
  bool manifest_mismatch = false;
  json manifest = open_manifest(config, &manifest_mismatch);
  if (resume && manifest_mismatch) {
    throw ValidationError(
        "--resume refused: existing artifacts belong to a different "
        "configuration (fingerprint mismatch)");
  }
  std::size_t generation_failures = 0;
  const corpus::Corpus corpus =
      load_pipeline_corpus(config, backends, manifest, &generation_failures);

  const auto profiles = load_profiles(config);
  std::vector<std::string> reviewer_ids;
  for (const auto& profile : profiles) {
    if (profile.passed) reviewer_ids.push_back(profile.reviewer_id);
  }
  if (reviewer_ids.empty()) {
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "refusing to review: no reviewer passed the qualification "
                  "exam at xi=%g",
                  config.xi);
    throw RefusalError(msg);
  }

  const auto jobs = review::build_jobs(corpus, reviewer_ids,
                                       config.evaluatee_ids, config.setting);
  const fs::path store_path = artifact(config, "records.jsonl");
  if (!resume) fs::remove(store_path);
  review::RecordStore store(store_path);

  std::map<std::string, backend::Backend*> reviewers;
  for (const auto& id : reviewer_ids) reviewers[id] = backends.get(id);

  review::ExecuteOptions options;
  options.seed = config.seed;
  options.workers = config.concurrency;
  const auto report = review::execute_jobs(jobs, corpus, reviewers, store,
                                           options);

  const fs::path failures_path = artifact(config, "failures.jsonl");
  fs::remove(failures_path);
  if (!report.failures.empty()) {
    std::vector<json> rows;
    for (const auto& failure : report.failures) {
      json row{{"job_id", failure.job.job_id},
               {"setting", backend::to_string(failure.job.setting)},
               {"task_id", failure.job.task_id},
               {"subject_ids", failure.job.subject_ids},
               {"reviewer_id", failure.job.reviewer_id},
               {"error", failure.error}};
      rows.push_back(std::move(row));
    }
    write_jsonl(failures_path, rows);
  }

  const std::size_t unparseable = count_unparseable(store.records());
  const bool partial = !report.failures.empty() || generation_failures > 0;
  std::cout << "review setting=" << backend::to_string(config.setting)
            << " reviewers=" << reviewer_ids.size() << " jobs=" << jobs.size()
            << " records=" << store.size() << " skipped=" << report.skipped
            << " failures=" << report.failures.size()
            << " unparseable=" << unparseable << "\n";

  finish_stage(manifest, "review",
               report.failures.empty() ? "complete" : "partial",
               json{{"jobs", jobs.size()},
                    {"records", store.size()},
                    {"failures", report.failures.size()},
                    {"skipped", report.skipped},
                    {"unparseable", unparseable}});
  write_manifest(config, manifest);
  return partial ? kExitPartial : kExitSuccess;
}

int cmd_chair(const RunConfig& config) {
  fs::create_directories(config.out_dir);
  json manifest = open_manifest(config);
  const review::RecordStore store = open_record_store(config);
  if (store.size() == 0) {
    throw UpstreamMissingError("record store is empty; nothing to aggregate");
  }
  auto profiles = load_profiles(config);

  const std::vector<chair::AggregateScore> scores =
      backend::is_pointwise(config.setting)
          ? chair::aggregate_pointwise(store.records(), profiles)
          : chair::aggregate_pairwise(store.records(), profiles);

  std::vector<json> rows;
  for (const auto& score : scores) rows.push_back(chair::aggregate_to_json(score));
  write_jsonl(artifact(config, "aggregates.jsonl"), rows);

  const chair::Leaderboard board = chair::leaderboard(scores, config.setting);
  json board_json = chair::leaderboard_to_json(board);
  board_json["config_fingerprint"] = config_fingerprint(config);
  write_text_file(artifact(config, "leaderboard.json"),
                  board_json.dump(2) + "\n");

  std::cout << "chair setting=" << backend::to_string(config.setting)
            << " samples=" << scores.size() << "\n";
  for (const auto& entry : board.entries) {
    std::printf("  %2d. %-24s %.4f\n", entry.rank, entry.evaluatee_id.c_str(),
                entry.score);
  }

  finish_stage(manifest, "chair", "complete",
               json{{"samples", scores.size()},
                    {"entries", board.entries.size()}});
  write_manifest(config, manifest);
  return kExitSuccess;
}

namespace {

/// Pairwise aggregates reduced to one score per (task, evaluatee): the win
/// share over the ordered samples the evaluatee appears in. Gives pairwise
/// runs a per-task pointwise view for rank correlations against gold scores.
std::vector<chair::AggregateScore> win_share_scores(
    const std::vector<chair::AggregateScore>& aggregates) {
  std::map<std::pair<std::string, std::string>, std::pair<double, double>>
      tallies;  // (task, evaluatee) -> (credit, appearances)
  for (const auto& sample : aggregates) {
    if (!sample.verdict || sample.subject_ids.size() != 2) continue;
    double first_credit = 0.5;
    if (*sample.verdict == corpus::Verdict::first) first_credit = 1;
    if (*sample.verdict == corpus::Verdict::second) first_credit = 0;
    auto& first = tallies[{sample.task_id, sample.subject_ids[0]}];
    first.first += first_credit;
    first.second += 1;
    auto& second = tallies[{sample.task_id, sample.subject_ids[1]}];
    second.first += 1 - first_credit;
    second.second += 1;
  }
  std::vector<chair::AggregateScore> out;
  for (const auto& [key, tally] : tallies) {
    chair::AggregateScore score;
    score.task_id = key.first;
    score.subject_ids = {key.second};
    score.value = tally.first / tally.second;
    out.push_back(std::move(score));
  }
  return out;
}

/// Pointwise aggregates turned into ordered preference samples per task:
/// every subject pair compared by aggregated value, equal values tie.
std::vector<chair::AggregateScore> value_preferences(
    const std::vector<chair::AggregateScore>& aggregates) {
  std::map<std::string, std::vector<std::pair<std::string, double>>> by_task;
  for (const auto& sample : aggregates) {
    if (!sample.value || sample.subject_ids.size() != 1) continue;
    by_task[sample.task_id].emplace_back(sample.subject_ids[0],
                                         *sample.value);
  }
  std::vector<chair::AggregateScore> out;
  for (auto& [task_id, entries] : by_task) {
    std::sort(entries.begin(), entries.end());
    for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
      for (std::size_t j = i + 1; j < entries.size(); ++j) {
        chair::AggregateScore sample;
        sample.task_id = task_id;
        sample.subject_ids = {entries[i].first, entries[j].first};
        if (entries[i].second > entries[j].second) {
          sample.verdict = corpus::Verdict::first;
        } else if (entries[i].second < entries[j].second) {
          sample.verdict = corpus::Verdict::second;
        } else {
          sample.verdict = corpus::Verdict::tie;
        }
        out.push_back(std::move(sample));
      }
    }
  }
  return out;
}

}  // namespace

int cmd_report(const RunConfig& config) {
  fs::create_directories(config.out_dir);
  json manifest = open_manifest(config);

  const fs::path aggregates_path = artifact(config, "aggregates.jsonl");
  if (!fs::exists(aggregates_path)) {
    throw UpstreamMissingError(
        "aggregates.jsonl not found; run the chair stage first");
  }
  std::vector<chair::AggregateScore> aggregates;
  for_each_jsonl(aggregates_path, [&](std::size_t, const json& obj) {
    aggregates.push_back(chair::aggregate_from_json(obj));
  });
  const review::RecordStore store = open_record_store(config);

  const BackendSet backends(config);
  json ignored = manifest;
  std::size_t generation_failures = 0;
  const corpus::Corpus corpus =
      load_pipeline_corpus(config, backends, ignored, &generation_failures);

  const bool pointwise = backend::is_pointwise(config.setting);
  json metrics = json::object();
  metrics["agreement"] = nullptr;
  metrics["n_pairs_used"] = 0;
  metrics["kendall_tau"] = nullptr;
  metrics["spearman_s"] = nullptr;
  metrics["tasks_included"] = 0;
  metrics["tasks_skipped"] = 0;
  metrics["per_task_breakdown"] = json::array();

  bool have_agreement = false;
  analysis::AgreementResult agreement_result;
  try {
    const auto preferences =
        pointwise ? value_preferences(aggregates) : aggregates;
    agreement_result =
        analysis::agreement(preferences, corpus, config.tie_policy);
    metrics["agreement"] = agreement_result.agreement;
    metrics["n_pairs_used"] = agreement_result.n_pairs_used;
    have_agreement = true;
  } catch (const DegenerateInputError& e) {
    std::cout << "report: agreement skipped (" << e.what() << ")\n";
  }

  bool have_correlations = false;
  analysis::TaskCorrelations correlations;
  try {
    const auto values = pointwise ? aggregates : win_share_scores(aggregates);
    correlations = analysis::per_task_mean_correlations(values, corpus);
    metrics["kendall_tau"] = correlations.mean_tau;
    metrics["spearman_s"] = correlations.mean_spearman;
    metrics["tasks_included"] = correlations.tasks_included;
    metrics["tasks_skipped"] = correlations.tasks_skipped;
    json breakdown = json::array();
    for (const auto& task : correlations.per_task) {
      breakdown.push_back(json{{"task_id", task.task_id},
                               {"kendall_tau", task.tau},
                               {"spearman_s", task.spearman}});
    }
    metrics["per_task_breakdown"] = std::move(breakdown);
    have_correlations = true;
  } catch (const DegenerateInputError& e) {
    std::cout << "report: rank correlations skipped (" << e.what() << ")\n";
  }

  std::vector<std::string> dual_ids;
  {
    const std::set<std::string> evaluatees(config.evaluatee_ids.begin(),
                                           config.evaluatee_ids.end());
    for (const auto& id : config.reviewer_candidate_ids) {
      if (evaluatees.count(id)) dual_ids.push_back(id);
    }
  }
  json pg = nullptr;
  std::string csv;
  if (!dual_ids.empty()) {
    const analysis::PgMatrix matrix = analysis::pg_matrix(store.records(),
                                                          dual_ids);
    pg = analysis::pg_matrix_to_json(matrix);
    csv = analysis::pg_matrix_csv(matrix);
    if (matrix.significance) {
      std::printf("report: PG prop_positive=%.4f t=%.4f p=%.4f over %zu pairs\n",
                  matrix.significance->prop_positive,
                  matrix.significance->t_statistic,
                  matrix.significance->p_value,
                  matrix.canonical_values.size());
    } else {
      std::cout << "report: PG significance unavailable\n";
    }
  } else {
    std::cout << "report: no model acts as both reviewer and evaluatee, PG "
                 "skipped\n";
  }
  write_text_file(artifact(config, "pg_matrix.csv"), csv);

  json report{{"setting", backend::to_string(config.setting)},
              {"config_fingerprint", config_fingerprint(config)},
              {"metrics", std::move(metrics)},
              {"pg", std::move(pg)},
              {"records", store.size()},
              {"unparseable_records", count_unparseable(store.records())}};
  write_text_file(artifact(config, "report.json"), report.dump(2) + "\n");

  if (have_agreement) {
    std::printf("report: agreement=%.4f over %zu pairs\n",
                agreement_result.agreement, agreement_result.n_pairs_used);
  }
  if (have_correlations) {
    std::printf("report: kendall_tau=%.4f spearman_s=%.4f over %zu tasks\n",
                correlations.mean_tau, correlations.mean_spearman,
                correlations.tasks_included);
  }

  finish_stage(manifest, "report", "complete",
               json{{"agreement_available", have_agreement},
                    {"correlations_available", have_correlations},
                    {"pg_available", !dual_ids.empty()}});
  write_manifest(config, manifest);
  return kExitSuccess;
}

int run_all(const RunConfig& config, bool resume) {
  bool partial = false;
  partial |= cmd_exam(config) == kExitPartial;
  partial |= cmd_review(config, resume) == kExitPartial;
  cmd_chair(config);
  cmd_report(config);
  return partial ? kExitPartial : kExitSuccess;
}

int run_command(const std::string& name, const RunConfig& config,
                bool resume) {
  try {
    if (name == "exam") return cmd_exam(config);
    if (name == "review") return cmd_review(config, resume);
    if (name == "chair") return cmd_chair(config);
    if (name == "report") return cmd_report(config);
    if (name == "run-all") return run_all(config, resume);
    throw ValidationError("unknown command: " + name);
  } catch (const RefusalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRefusal;
  } catch (const UpstreamMissingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUpstreamMissing;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DegenerateInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUnexpected;
  }
}

}  // namespace pre::harness
