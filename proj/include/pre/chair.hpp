#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pre/backend.hpp"
#include "pre/common.hpp"
#include "pre/corpus.hpp"
#include "pre/qualification.hpp"
#include "pre/review.hpp"

namespace pre::chair {

struct Contributor {
  std::string reviewer_id;
  double weight = 0;
  std::optional<double> normalized;  // pointwise
  std::optional<backend::ParsedJudgment::Choice> vote;  // pairwise
};

/// One aggregated sample: a weighted score for a single output, or a
/// weighted-vote verdict for an ordered output pair.
struct AggregateScore {
  std::string task_id;
  std::vector<std::string> subject_ids;
  std::optional<double> value;             // pointwise R
  std::optional<corpus::Verdict> verdict;  // pairwise
  std::vector<Contributor> contributors;
};

json aggregate_to_json(const AggregateScore& a);
AggregateScore aggregate_from_json(const json& obj);

struct NormalizedRatings {
  double mu = 0;
  double sigma = 0;  // population standard deviation
  std::map<std::string, double> by_job;  // job_id -> normalized rating
};

/// Mean-variance normalization of one reviewer's parseable ratings in this
/// run. A constant rater (sigma 0, including a single rating) normalizes to
/// all zeros. Throws DegenerateInputError when nothing is parseable.
NormalizedRatings normalize_reviewer(
    const std::vector<const review::ReviewRecord*>& records);

/// Weighted mean of per-reviewer normalized ratings per sample, weights
/// renormalized over the reviewers that actually contributed a parseable
/// rating there. Only passed profiles contribute. Samples with no parseable
/// rating are omitted; a sample whose contributor weights sum to zero is an
/// error naming it. Fills mu_l/sigma_l on the contributing profiles.
std::vector<AggregateScore> aggregate_pointwise(
    const std::vector<review::ReviewRecord>& records,
    std::vector<qualification::ReviewerProfile>& profiles);

/// Weighted vote per ordered sample: each side's verdict weight is summed
/// over parseable votes of passed reviewers; the heavier side wins and an
/// exact tie (including no votes at all) is a tie verdict.
std::vector<AggregateScore> aggregate_pairwise(
    const std::vector<review::ReviewRecord>& records,
    const std::vector<qualification::ReviewerProfile>& profiles);

struct LeaderboardEntry {
  std::string evaluatee_id;
  double score = 0;
  int rank = 0;
};

struct Leaderboard {
  backend::Setting setting = backend::Setting::pairwise;
  std::vector<LeaderboardEntry> entries;
};

json leaderboard_to_json(const Leaderboard& lb);
Leaderboard leaderboard_from_json(const json& obj);

/// Pointwise: an evaluatee's score is its mean aggregated rating over tasks.
/// Pairwise: its win share (win 1, tie 0.5) over all ordered samples it
/// appears in. Entries sort descending; exact score ties share a rank and
/// the next distinct score resumes at its position.
Leaderboard leaderboard(const std::vector<AggregateScore>& scores,
                        backend::Setting setting);

}  // namespace pre::chair
