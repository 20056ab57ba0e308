#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pre/chair.hpp"
#include "pre/common.hpp"
#include "pre/corpus.hpp"
#include "pre/qualification.hpp"
#include "pre/review.hpp"

namespace pre::analysis {

struct AgreementResult {
  double agreement = 0;
  std::size_t n_pairs_used = 0;
};

/// Fraction of gold-decided unordered pairs where the aggregated preference
/// matches gold. The two ordered verdicts of a pair are reconciled first:
/// identical orientations keep the verdict, conflicting ones become a tie.
/// Reconciled ties score per the policy; gold-tied pairs are excluded.
/// Throws DegenerateInputError when no pair is scorable.
AgreementResult agreement(const std::vector<chair::AggregateScore>& predicted,
                          const corpus::Corpus& corpus,
                          qualification::TiePolicy tie_policy);

/// Tie-corrected Kendall correlation,
/// (C - D) / sqrt((C + D + Tx)(C + D + Ty)) over all index pairs.
/// Throws DegenerateInputError when either vector is all-tied,
/// ValidationError on length mismatch.
double kendall_tau_b(const std::vector<double>& x,
                     const std::vector<double>& y);

/// Pearson correlation of tie-averaged ranks. Same error contract as
/// kendall_tau_b.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct TaskCorrelation {
  std::string task_id;
  double tau = 0;
  double spearman = 0;
};

struct TaskCorrelations {
  double mean_tau = 0;
  double mean_spearman = 0;
  std::size_t tasks_included = 0;
  std::size_t tasks_skipped = 0;
  std::vector<TaskCorrelation> per_task;
};

/// Correlates aggregated pointwise values against gold scores across the
/// evaluatees of each task, reporting means over tasks. Tasks with fewer
/// than two gold-covered evaluatees or an all-tied side are skipped and
/// counted; zero includable tasks is a DegenerateInputError.
TaskCorrelations per_task_mean_correlations(
    const std::vector<chair::AggregateScore>& scores,
    const corpus::Corpus& corpus);

/// PG(i, j): reviewer i's strict-win proportion for i's own outputs against
/// j's, minus reviewer j's estimate of the same proportion, over the tasks
/// both reviewers judged. Pointwise records turn into preferences by strict
/// rating comparison; a tied rating drops that task for that reviewer.
/// Throws DegenerateInputError when no shared judged task exists.
double preference_gap(const std::vector<review::ReviewRecord>& records,
                      const std::string& reviewer_i,
                      const std::string& reviewer_j);

struct TTestResult {
  double t_statistic = 0;
  double p_value = 1;
  double prop_positive = 0;
};

/// One-sample two-sided t-test of the values against mean zero, plus the
/// fraction of strictly positive values. Throws DegenerateInputError for
/// fewer than two values or zero variance.
TTestResult pg_significance(const std::vector<double>& pg_values);

struct PgMatrix {
  std::vector<std::string> reviewer_ids;
  /// All ordered pairs; diagonal 0, uncomputable entries empty.
  std::vector<std::vector<std::optional<double>>> pg;
  /// PG over pairs in canonical index order (i < j of reviewer_ids).
  std::vector<double> canonical_values;
  std::string orientation = "canonical_index";
  /// Absent when canonical_values are too few or have zero variance.
  std::optional<TTestResult> significance;
};

/// Builds the full matrix over models that acted as both reviewer and
/// evaluatee in the records.
PgMatrix pg_matrix(const std::vector<review::ReviewRecord>& records,
                   const std::vector<std::string>& reviewer_ids);

json pg_matrix_to_json(const PgMatrix& m);

/// Flat table: header row of ids, one row per reviewer, empty cells where
/// PG is undefined.
std::string pg_matrix_csv(const PgMatrix& m);

/// I_x(a, b), continued-fraction evaluation converged to 1e-10 or better.
double regularized_incomplete_beta(double a, double b, double x);

}  // namespace pre::analysis
