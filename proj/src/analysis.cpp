#include "pre/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <tuple>
#include <utility>

namespace pre::analysis {

namespace {

corpus::Verdict reconcile(const std::optional<corpus::Verdict>& forward,
                          const std::optional<corpus::Verdict>& backward) {
  if (forward && backward) {
    return *forward == *backward ? *forward : corpus::Verdict::tie;
  }
  return forward ? *forward : *backward;
}

}  // namespace

AgreementResult agreement(const std::vector<chair::AggregateScore>& predicted,
                          const corpus::Corpus& corpus,
                          qualification::TiePolicy tie_policy) {
  struct OrderedVerdicts {
    std::optional<corpus::Verdict> forward;   // lo-first sample
    std::optional<corpus::Verdict> backward;  // hi-first sample, reoriented
  };
  std::map<std::tuple<std::string, std::string, std::string>, OrderedVerdicts>
      pairs;
  for (const auto& sample : predicted) {
    if (!sample.verdict || sample.subject_ids.size() != 2) continue;
    const std::string& a = sample.subject_ids[0];
    const std::string& b = sample.subject_ids[1];
    if (a == b) continue;
    const bool canonical = a < b;
    auto& slot = pairs[{sample.task_id, canonical ? a : b, canonical ? b : a}];
    const corpus::Verdict oriented =
        canonical ? *sample.verdict : corpus::flip(*sample.verdict);
    (canonical ? slot.forward : slot.backward) = oriented;
  }

  double score = 0;
  std::size_t used = 0;
  for (const auto& [key, slot] : pairs) {
    const auto& [task_id, lo, hi] = key;
    const auto gold = corpus.gold_preference(task_id, lo, hi);
    if (!gold || *gold == corpus::Verdict::tie) continue;
    const corpus::Verdict model = reconcile(slot.forward, slot.backward);
    ++used;
    if (model == corpus::Verdict::tie) {
      score += tie_policy == qualification::TiePolicy::half ? 0.5 : 0.0;
    } else if (model == *gold) {
      score += 1;
    }
  }
  if (used == 0) {
    throw DegenerateInputError("no gold-decided pairs to score agreement on");
  }
  return {score / static_cast<double>(used), used};
}

namespace {

void check_correlation_input(const std::vector<double>& x,
                             const std::vector<double>& y) {
  if (x.size() != y.size()) {
    throw ValidationError("correlation inputs differ in length");
  }
  if (x.size() < 2) {
    throw DegenerateInputError("correlation needs at least two points");
  }
}

std::vector<double> tie_averaged_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = static_cast<double>(i + j + 2) / 2;  // 1-based average
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double kendall_tau_b(const std::vector<double>& x,
                     const std::vector<double>& y) {
  check_correlation_input(x, y);
  const std::size_t n = x.size();
  double concordant = 0;
  double discordant = 0;
  double tied_x_only = 0;
  double tied_y_only = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) {
        tied_x_only += 1;
      } else if (dy == 0) {
        tied_y_only += 1;
      } else if ((dx > 0) == (dy > 0)) {
        concordant += 1;
      } else {
        discordant += 1;
      }
    }
  }
  const double x_varying = concordant + discordant + tied_y_only;
  const double y_varying = concordant + discordant + tied_x_only;
  if (x_varying == 0 || y_varying == 0) {
    throw DegenerateInputError("all-tied input to kendall_tau_b");
  }
  return (concordant - discordant) / std::sqrt(x_varying * y_varying);
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  check_correlation_input(x, y);
  const std::vector<double> rx = tie_averaged_ranks(x);
  const std::vector<double> ry = tie_averaged_ranks(y);
  const std::size_t n = rx.size();
  const double mean = static_cast<double>(n + 1) / 2;
  double cov = 0;
  double var_x = 0;
  double var_y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (rx[i] - mean) * (ry[i] - mean);
    var_x += (rx[i] - mean) * (rx[i] - mean);
    var_y += (ry[i] - mean) * (ry[i] - mean);
  }
  if (var_x == 0 || var_y == 0) {
    throw DegenerateInputError("all-tied input to spearman");
  }
  return cov / std::sqrt(var_x * var_y);
}

TaskCorrelations per_task_mean_correlations(
    const std::vector<chair::AggregateScore>& scores,
    const corpus::Corpus& corpus) {
  std::map<std::string, std::vector<std::pair<std::string, double>>> by_task;
  for (const auto& sample : scores) {
    if (!sample.value || sample.subject_ids.size() != 1) continue;
    by_task[sample.task_id].emplace_back(sample.subject_ids[0], *sample.value);
  }

  TaskCorrelations out;
  double tau_sum = 0;
  double spearman_sum = 0;
  for (auto& [task_id, entries] : by_task) {
    std::sort(entries.begin(), entries.end());
    std::vector<double> model;
    std::vector<double> gold;
    for (const auto& [evaluatee_id, value] : entries) {
      const auto g = corpus.gold_score(task_id, evaluatee_id);
      if (!g) continue;
      model.push_back(value);
      gold.push_back(*g);
    }
    if (model.size() < 2) {
      ++out.tasks_skipped;
      continue;
    }
    try {
      const double tau = kendall_tau_b(model, gold);
      const double rho = spearman(model, gold);
      tau_sum += tau;
      spearman_sum += rho;
      out.per_task.push_back({task_id, tau, rho});
      ++out.tasks_included;
    } catch (const DegenerateInputError&) {
      ++out.tasks_skipped;
    }
  }
  if (out.tasks_included == 0) {
    throw DegenerateInputError("no task with correlatable scores");
  }
  out.mean_tau = tau_sum / static_cast<double>(out.tasks_included);
  out.mean_spearman = spearman_sum / static_cast<double>(out.tasks_included);
  return out;
}

namespace {

struct TaskTally {
  double wins = 0;
  double samples = 0;
};

/// Per-task strict-win tallies of `reviewer` on the (id_i, id_j) pair,
/// counting wins for id_i. Only tasks with at least one usable sample
/// appear in the result.
std::map<std::string, TaskTally> reviewer_tallies(
    const std::vector<review::ReviewRecord>& records,
    const std::string& reviewer, const std::string& id_i,
    const std::string& id_j) {
  using backend::ParsedJudgment;
  std::map<std::string, TaskTally> out;
  std::map<std::string, std::pair<std::optional<double>, std::optional<double>>>
      ratings;
  for (const auto& rec : records) {
    if (rec.job.reviewer_id != reviewer) continue;
    const auto& subjects = rec.job.subject_ids;
    if (subjects.size() == 2) {
      if (rec.judgment.kind != ParsedJudgment::Kind::preference) continue;
      const bool forward = subjects[0] == id_i && subjects[1] == id_j;
      const bool backward = subjects[0] == id_j && subjects[1] == id_i;
      if (!forward && !backward) continue;
      auto& tally = out[rec.job.task_id];
      tally.samples += 1;
      const bool first_won =
          rec.judgment.preference == backend::ParsedJudgment::Choice::one;
      if (forward == first_won) tally.wins += 1;
    } else if (subjects.size() == 1) {
      if (rec.judgment.kind != ParsedJudgment::Kind::rating) continue;
      if (subjects[0] == id_i) {
        ratings[rec.job.task_id].first = rec.judgment.rating;
      } else if (subjects[0] == id_j) {
        ratings[rec.job.task_id].second = rec.judgment.rating;
      }
    }
  }
  for (const auto& [task_id, pair] : ratings) {
    if (!pair.first || !pair.second) continue;
    if (*pair.first == *pair.second) continue;  // tie drops the task
    auto& tally = out[task_id];
    tally.samples += 1;
    if (*pair.first > *pair.second) tally.wins += 1;
  }
  return out;
}

}  // namespace

double preference_gap(const std::vector<review::ReviewRecord>& records,
                      const std::string& reviewer_i,
                      const std::string& reviewer_j) {
  if (reviewer_i == reviewer_j) {
    throw ValidationError("preference gap needs two distinct reviewers");
  }
  const auto mine = reviewer_tallies(records, reviewer_i, reviewer_i,
                                     reviewer_j);
  const auto theirs = reviewer_tallies(records, reviewer_j, reviewer_i,
                                       reviewer_j);
  double my_wins = 0;
  double my_samples = 0;
  double their_wins = 0;
  double their_samples = 0;
  for (const auto& [task_id, tally] : mine) {
    const auto it = theirs.find(task_id);
    if (it == theirs.end()) continue;
    my_wins += tally.wins;
    my_samples += tally.samples;
    their_wins += it->second.wins;
    their_samples += it->second.samples;
  }
  if (my_samples == 0 || their_samples == 0) {
    throw DegenerateInputError("no shared judged tasks for preference gap");
  }
  return my_wins / my_samples - their_wins / their_samples;
}

TTestResult pg_significance(const std::vector<double>& pg_values) {
  const std::size_t n = pg_values.size();
  if (n < 2) {
    throw DegenerateInputError("t-test needs at least two values");
  }
  const double mean =
      std::accumulate(pg_values.begin(), pg_values.end(), 0.0) /
      static_cast<double>(n);
  double ss = 0;
  std::size_t positive = 0;
  for (const double v : pg_values) {
    ss += (v - mean) * (v - mean);
    if (v > 0) ++positive;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0) {
    throw DegenerateInputError("t-test needs nonzero variance");
  }
  TTestResult out;
  out.t_statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
  const double df = static_cast<double>(n - 1);
  out.p_value = regularized_incomplete_beta(
      df / 2, 0.5, df / (df + out.t_statistic * out.t_statistic));
  out.prop_positive = static_cast<double>(positive) / static_cast<double>(n);
  return out;
}

PgMatrix pg_matrix(const std::vector<review::ReviewRecord>& records,
                   const std::vector<std::string>& reviewer_ids) {
  if (reviewer_ids.empty()) {
    throw ValidationError("pg_matrix needs at least one reviewer id");
  }
  PgMatrix m;
  m.reviewer_ids = reviewer_ids;
  const std::size_t n = reviewer_ids.size();
  m.pg.assign(n, std::vector<std::optional<double>>(n));
  for (std::size_t i = 0; i < n; ++i) {
    m.pg[i][i] = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      try {
        m.pg[i][j] = preference_gap(records, reviewer_ids[i], reviewer_ids[j]);
      } catch (const DegenerateInputError&) {
      }
    }
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (m.pg[i][j]) m.canonical_values.push_back(*m.pg[i][j]);
    }
  }
  if (!m.canonical_values.empty()) {
    try {
      m.significance = pg_significance(m.canonical_values);
    } catch (const DegenerateInputError&) {
    }
  }
  return m;
}

json pg_matrix_to_json(const PgMatrix& m) {
  json rows = json::array();
  for (const auto& row : m.pg) {
    json cells = json::array();
    for (const auto& cell : row) {
      cells.push_back(cell ? json(*cell) : json(nullptr));
    }
    rows.push_back(std::move(cells));
  }
  json out{{"reviewer_ids", m.reviewer_ids},
           {"orientation", m.orientation},
           {"pg", std::move(rows)},
           {"canonical_values", m.canonical_values}};
  if (m.significance) {
    out["significance"] = {{"t_statistic", m.significance->t_statistic},
                          {"p_value", m.significance->p_value},
                          {"prop_positive", m.significance->prop_positive}};
  } else {
    out["significance"] = nullptr;
  }
  return out;
}

std::string pg_matrix_csv(const PgMatrix& m) {
  std::string out;
  for (const auto& id : m.reviewer_ids) {
    out += ',';
    out += id;
  }
  out += '\n';
  for (std::size_t i = 0; i < m.reviewer_ids.size(); ++i) {
    out += m.reviewer_ids[i];
    for (const auto& cell : m.pg[i]) {
      out += ',';
      if (cell) out += json(*cell).dump();
    }
    out += '\n';
  }
  return out;
}

namespace {

double beta_continued_fraction(double a, double b, double x) {
  constexpr double kEps = 1e-12;
  constexpr double kFloor = 1e-300;
  const double qab = a + b;
  const double qap = a + 1;
  const double qam = a - 1;
  double c = 1;
  double d = 1 - qab * x / qap;
  if (std::fabs(d) < kFloor) d = kFloor;
  d = 1 / d;
  double h = d;
  for (int m = 1; m <= 400; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1 + aa * d;
    if (std::fabs(d) < kFloor) d = kFloor;
    c = 1 + aa / c;
    if (std::fabs(c) < kFloor) c = kFloor;
    d = 1 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1 + aa * d;
    if (std::fabs(d) < kFloor) d = kFloor;
    c = 1 + aa / c;
    if (std::fabs(c) < kFloor) c = kFloor;
    d = 1 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1) < kEps) return h;
  }
  throw ValidationError("incomplete beta continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0) || !(b > 0)) {
    throw ValidationError("incomplete beta parameters must be positive");
  }
  if (!(x >= 0 && x <= 1)) {
    throw ValidationError("incomplete beta argument outside [0, 1]");
  }
  if (x == 0 || x == 1) return x;
  const double ln_beta =
      std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - ln_beta);
  if (x < (a + 1) / (a + b + 2)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1 - front * beta_continued_fraction(b, a, 1 - x) / b;
}

}  // namespace pre::analysis
