#include "pre/chair.hpp"

#include <algorithm>
#include <cmath>

namespace pre::chair {

json aggregate_to_json(const AggregateScore& a) {
  json obj = {{"task_id", a.task_id}, {"subject_ids", a.subject_ids}};
  if (a.value) obj["value"] = *a.value;
  if (a.verdict) obj["verdict"] = corpus::to_string(*a.verdict);
  json contribs = json::array();
  for (const auto& c : a.contributors) {
    json entry = {{"reviewer_id", c.reviewer_id}, {"weight", c.weight}};
    if (c.normalized) entry["normalized"] = *c.normalized;
    if (c.vote) entry["vote"] = backend::to_string(*c.vote);
    contribs.push_back(std::move(entry));
  }
  obj["contributors"] = std::move(contribs);
  return obj;
}

AggregateScore aggregate_from_json(const json& obj) {
  AggregateScore a;
  a.task_id = obj.at("task_id").get<std::string>();
  a.subject_ids = obj.at("subject_ids").get<std::vector<std::string>>();
  if (obj.contains("value")) a.value = obj.at("value").get<double>();
  if (obj.contains("verdict")) {
    a.verdict = corpus::verdict_from_string(obj.at("verdict").get<std::string>());
  }
  for (const auto& entry : obj.at("contributors")) {
    Contributor c;
    c.reviewer_id = entry.at("reviewer_id").get<std::string>();
    c.weight = entry.at("weight").get<double>();
    if (entry.contains("normalized")) {
      c.normalized = entry.at("normalized").get<double>();
    }
    if (entry.contains("vote")) {
      c.vote = backend::choice_from_string(entry.at("vote").get<std::string>());
    }
    a.contributors.push_back(std::move(c));
  }
  return a;
}

// ---------------------------------------------------------------------------
// Normalization

NormalizedRatings normalize_reviewer(
    const std::vector<const review::ReviewRecord*>& records) {
  std::vector<std::pair<const std::string*, int>> ratings;
  for (const auto* r : records) {
    if (r->judgment.kind == backend::ParsedJudgment::Kind::rating) {
      ratings.emplace_back(&r->job.job_id, *r->judgment.rating);
    }
  }
  if (ratings.empty()) {
    throw DegenerateInputError("reviewer has no parseable pointwise ratings");
  }
  NormalizedRatings out;
  for (const auto& [id, r] : ratings) out.mu += r;
  out.mu /= static_cast<double>(ratings.size());
  double var = 0;
  for (const auto& [id, r] : ratings) {
    var += (r - out.mu) * (r - out.mu);
  }
  var /= static_cast<double>(ratings.size());
  out.sigma = std::sqrt(var);
  for (const auto& [id, r] : ratings) {
    out.by_job[*id] = out.sigma == 0 ? 0.0 : (r - out.mu) / out.sigma;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation

namespace {

using SampleKey = std::pair<std::string, std::vector<std::string>>;

std::string sample_name(const SampleKey& key) {
  std::string name = key.first;
  for (const auto& s : key.second) name += "/" + s;
  return name;
}

std::map<std::string, const qualification::ReviewerProfile*> passed_index(
    const std::vector<qualification::ReviewerProfile>& profiles) {
  std::map<std::string, const qualification::ReviewerProfile*> index;
  for (const auto& p : profiles) {
    if (p.passed) index[p.reviewer_id] = &p;
  }
  return index;
}

}  // namespace

std::vector<AggregateScore> aggregate_pointwise(
    const std::vector<review::ReviewRecord>& records,
    std::vector<qualification::ReviewerProfile>& profiles) {
  std::map<std::string, qualification::ReviewerProfile*> passed;
  for (auto& p : profiles) {
    if (p.passed) passed[p.reviewer_id] = &p;
  }

  std::map<std::string, std::vector<const review::ReviewRecord*>> by_reviewer;
  for (const auto& r : records) {
    if (passed.count(r.job.reviewer_id)) {
      by_reviewer[r.job.reviewer_id].push_back(&r);
    }
  }

  std::map<std::string, NormalizedRatings> normalized;
  for (const auto& [reviewer, recs] : by_reviewer) {
    bool any = std::any_of(recs.begin(), recs.end(), [](const auto* r) {
      return r->judgment.kind == backend::ParsedJudgment::Kind::rating;
    });
    if (!any) continue;  // a reviewer of unparseable ratings contributes nothing
    NormalizedRatings n = normalize_reviewer(recs);
    qualification::ReviewerProfile* profile = passed.at(reviewer);
    profile->mu_l = n.mu;
    profile->sigma_l = n.sigma;
    normalized.emplace(reviewer, std::move(n));
  }

  std::map<SampleKey, std::vector<Contributor>> samples;
  for (const auto& [reviewer, recs] : by_reviewer) {
    auto it = normalized.find(reviewer);
    if (it == normalized.end()) continue;
    for (const auto* r : recs) {
      auto norm = it->second.by_job.find(r->job.job_id);
      if (norm == it->second.by_job.end()) continue;  // unparseable
      Contributor c;
      c.reviewer_id = reviewer;
      c.weight = passed.at(reviewer)->w_l;
      c.normalized = norm->second;
      samples[{r->job.task_id, r->job.subject_ids}].push_back(std::move(c));
    }
  }

  std::vector<AggregateScore> out;
  for (auto& [key, contributors] : samples) {
    std::sort(contributors.begin(), contributors.end(),
              [](const Contributor& a, const Contributor& b) {
                return a.reviewer_id < b.reviewer_id;
              });
    double w_total = 0, weighted = 0;
    for (const auto& c : contributors) {
      w_total += c.weight;
      weighted += c.weight * *c.normalized;
    }
    if (w_total == 0) {
      throw DegenerateInputError("zero total weight on sample " +
                                 sample_name(key));
    }
    AggregateScore a;
    a.task_id = key.first;
    a.subject_ids = key.second;
    a.value = weighted / w_total;
    a.contributors = std::move(contributors);
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<AggregateScore> aggregate_pairwise(
    const std::vector<review::ReviewRecord>& records,
    const std::vector<qualification::ReviewerProfile>& profiles) {
  auto passed = passed_index(profiles);

  std::map<SampleKey, std::vector<Contributor>> samples;
  for (const auto& r : records) {
    auto it = passed.find(r.job.reviewer_id);
    if (it == passed.end()) continue;
    SampleKey key{r.job.task_id, r.job.subject_ids};
    auto& contributors = samples[key];  // sample exists even if unparseable
    if (r.judgment.kind != backend::ParsedJudgment::Kind::preference) continue;
    Contributor c;
    c.reviewer_id = r.job.reviewer_id;
    c.weight = it->second->w_l;
    c.vote = *r.judgment.preference;
    contributors.push_back(std::move(c));
  }

  std::vector<AggregateScore> out;
  for (auto& [key, contributors] : samples) {
    std::sort(contributors.begin(), contributors.end(),
              [](const Contributor& a, const Contributor& b) {
                return a.reviewer_id < b.reviewer_id;
              });
    double w_one = 0, w_two = 0;
    for (const auto& c : contributors) {
      (*c.vote == backend::ParsedJudgment::Choice::one ? w_one : w_two) +=
          c.weight;
    }
    AggregateScore a;
    a.task_id = key.first;
    a.subject_ids = key.second;
    if (w_one > w_two) {
      a.verdict = corpus::Verdict::first;
    } else if (w_two > w_one) {
      a.verdict = corpus::Verdict::second;
    } else {
      a.verdict = corpus::Verdict::tie;
    }
    a.contributors = std::move(contributors);
    out.push_back(std::move(a));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Leaderboard

json leaderboard_to_json(const Leaderboard& lb) {
  json entries = json::array();
  for (const auto& e : lb.entries) {
    entries.push_back({{"evaluatee_id", e.evaluatee_id},
                       {"score", e.score},
                       {"rank", e.rank}});
  }
  return {{"setting", backend::to_string(lb.setting)},
          {"entries", std::move(entries)}};
}

Leaderboard leaderboard_from_json(const json& obj) {
  Leaderboard lb;
  lb.setting = backend::setting_from_string(obj.at("setting").get<std::string>());
  for (const auto& entry : obj.at("entries")) {
    lb.entries.push_back({entry.at("evaluatee_id").get<std::string>(),
                          entry.at("score").get<double>(),
                          entry.at("rank").get<int>()});
  }
  return lb;
}

Leaderboard leaderboard(const std::vector<AggregateScore>& scores,
                        backend::Setting setting) {
  std::map<std::string, std::pair<double, std::size_t>> totals;  // sum, count
  for (const auto& a : scores) {
    if (setting == backend::Setting::pairwise) {
      if (!a.verdict || a.subject_ids.size() != 2) continue;
      double first_credit = *a.verdict == corpus::Verdict::first    ? 1.0
                            : *a.verdict == corpus::Verdict::second ? 0.0
                                                                    : 0.5;
      auto& first = totals[a.subject_ids[0]];
      first.first += first_credit;
      first.second += 1;
      auto& second = totals[a.subject_ids[1]];
      second.first += 1.0 - first_credit;
      second.second += 1;
    } else {
      if (!a.value || a.subject_ids.size() != 1) continue;
      auto& entry = totals[a.subject_ids[0]];
      entry.first += *a.value;
      entry.second += 1;
    }
  }

  Leaderboard lb;
  lb.setting = setting;
  for (const auto& [id, sum_count] : totals) {
    lb.entries.push_back(
        {id, sum_count.first / static_cast<double>(sum_count.second), 0});
  }
  std::sort(lb.entries.begin(), lb.entries.end(),
            [](const LeaderboardEntry& a, const LeaderboardEntry& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.evaluatee_id < b.evaluatee_id;
            });
  for (std::size_t i = 0; i < lb.entries.size(); ++i) {
    if (i > 0 && lb.entries[i].score == lb.entries[i - 1].score) {
      lb.entries[i].rank = lb.entries[i - 1].rank;
    } else {
      lb.entries[i].rank = static_cast<int>(i) + 1;
    }
  }
  return lb;
}

}  // namespace pre::chair
