#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "pre/analysis.hpp"

using namespace pre;
using namespace pre::analysis;
using backend::ParsedJudgment;
using backend::Setting;
using doctest::Approx;
using review::ReviewRecord;
using review::make_review_job;

namespace {

ReviewRecord vote_record(const std::string& task, const std::string& a,
                         const std::string& b, const std::string& reviewer,
                         ParsedJudgment::Choice vote) {
  ReviewRecord r;
  r.job = make_review_job(Setting::pairwise, task, {a, b}, reviewer);
  r.judgment.kind = ParsedJudgment::Kind::preference;
  r.judgment.preference = vote;
  r.judgment.raw_text = backend::to_string(vote);
  return r;
}

ReviewRecord rating_record(const std::string& task, const std::string& subject,
                           const std::string& reviewer, int rating) {
  ReviewRecord r;
  r.job = make_review_job(Setting::point5, task, {subject}, reviewer);
  r.judgment.kind = ParsedJudgment::Kind::rating;
  r.judgment.rating = rating;
  r.judgment.raw_text = std::to_string(rating);
  return r;
}

chair::AggregateScore pair_sample(const std::string& task,
                                  const std::string& a, const std::string& b,
                                  corpus::Verdict v) {
  chair::AggregateScore s;
  s.task_id = task;
  s.subject_ids = {a, b};
  s.verdict = v;
  return s;
}

chair::AggregateScore point_sample(const std::string& task,
                                   const std::string& id, double value) {
  chair::AggregateScore s;
  s.task_id = task;
  s.subject_ids = {id};
  s.value = value;
  return s;
}

/// Corpus of `scores[t][e]` gold values for evaluatees a, b, c, ...
corpus::Corpus graded_corpus(const std::vector<std::vector<double>>& scores) {
  pre::testing::SyntheticSpec spec;
  spec.task_count = scores.size();
  for (std::size_t e = 0; e < scores[0].size(); ++e) {
    spec.evaluatee_ids.push_back(std::string(1, static_cast<char>('a' + e)));
  }
  spec.gold_score = [scores](std::size_t t,
                             std::size_t e) -> std::optional<double> {
    double v = scores[t][e];
    if (v == 0) return std::nullopt;  // 0 marks an unannotated output
    return v;
  };
  return pre::testing::synthetic_corpus(spec);
}

}  // namespace

TEST_CASE("kendall tau matches hand-computed values") {
  CHECK(kendall_tau_b({1, 2, 3, 4}, {1, 3, 2, 4}) ==
        Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(kendall_tau_b({1, 2, 3}, {1, 2, 3}) == 1.0);
  CHECK(kendall_tau_b({1, 2, 3}, {3, 2, 1}) == -1.0);
  CHECK(kendall_tau_b({1, 2, 3, 4}, {2, 4, 1, 3}) == 0.0);
  // One tie on the x side only.
  CHECK(kendall_tau_b({1, 1, 2}, {1, 2, 3}) ==
        Approx(2.0 / std::sqrt(6.0)).epsilon(1e-14));
}

TEST_CASE("spearman matches hand-computed values") {
  CHECK(spearman({1, 2, 3}, {1, 3, 2}) == Approx(0.5).epsilon(1e-14));
  CHECK(spearman({1, 2, 3, 4}, {1, 3, 2, 4}) == Approx(0.8).epsilon(1e-14));
  CHECK(spearman({1, 2, 3}, {3, 2, 1}) == -1.0);
  CHECK(spearman({1, 2, 3, 4}, {2, 4, 1, 3}) == Approx(0.0).epsilon(1e-14));
  CHECK(spearman({1, 1, 2}, {1, 2, 3}) ==
        Approx(std::sqrt(3.0) / 2.0).epsilon(1e-14));
}

TEST_CASE("correlation error contract") {
  CHECK_THROWS_AS(kendall_tau_b({1, 2}, {1, 2, 3}), ValidationError);
  CHECK_THROWS_AS(spearman({1, 2}, {1}), ValidationError);
  CHECK_THROWS_AS(kendall_tau_b({1}, {1}), DegenerateInputError);
  CHECK_THROWS_AS(kendall_tau_b({2, 2, 2}, {1, 2, 3}), DegenerateInputError);
  CHECK_THROWS_AS(kendall_tau_b({1, 2, 3}, {7, 7, 7}), DegenerateInputError);
  CHECK_THROWS_AS(spearman({2, 2}, {1, 2}), DegenerateInputError);
}

namespace {

// Independent oracles for the randomized comparison below.

double oracle_tau_b(const std::vector<double>& x,
                    const std::vector<double>& y) {
  double c = 0, d = 0, tx = 0, ty = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      double sx = x[i] < x[j] ? -1 : x[i] > x[j] ? 1 : 0;
      double sy = y[i] < y[j] ? -1 : y[i] > y[j] ? 1 : 0;
      if (sx != 0 && sy != 0) {
        (sx == sy ? c : d) += 1;
      } else if (sx == 0 && sy != 0) {
        tx += 1;
      } else if (sy == 0 && sx != 0) {
        ty += 1;
      }
    }
  }
  return (c - d) / std::sqrt((c + d + ty) * (c + d + tx));
}

std::vector<double> oracle_ranks(const std::vector<double>& v) {
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::size_t less = 0, equal = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[j] < v[i]) ++less;
      if (v[j] == v[i]) ++equal;
    }
    ranks[i] = static_cast<double>(less) + (static_cast<double>(equal) + 1) / 2;
  }
  return ranks;
}

double oracle_spearman(const std::vector<double>& x,
                       const std::vector<double>& y) {
  auto rx = oracle_ranks(x);
  auto ry = oracle_ranks(y);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(rx.size());
  my /= static_cast<double>(ry.size());
  double cov = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    cov += (rx[i] - mx) * (ry[i] - my);
    vx += (rx[i] - mx) * (rx[i] - mx);
    vy += (ry[i] - my) * (ry[i] - my);
  }
  return cov / std::sqrt(vx * vy);
}

bool all_tied(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
}

}  // namespace

TEST_CASE("correlations agree with independent oracles on random input") {
  std::mt19937 rng(20240817);
  std::uniform_int_distribution<int> len(2, 8);
  std::uniform_int_distribution<int> value(0, 3);
  std::size_t checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t n = static_cast<std::size_t>(len(rng));
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = value(rng);
      y[i] = value(rng);
    }
    if (all_tied(x) || all_tied(y)) {
      CHECK_THROWS_AS(kendall_tau_b(x, y), DegenerateInputError);
      CHECK_THROWS_AS(spearman(x, y), DegenerateInputError);
      continue;
    }
    CHECK(kendall_tau_b(x, y) == Approx(oracle_tau_b(x, y)).epsilon(1e-12));
    CHECK(spearman(x, y) == Approx(oracle_spearman(x, y)).epsilon(1e-12));
    ++checked;
  }
  CHECK(checked > 200);
}

TEST_CASE("agreement reconciles ordered verdicts against gold") {
  SUBCASE("perfect predictions over both orders") {
    auto corpus = graded_corpus({{4, 2}, {4, 2}, {4, 2}});
    std::vector<chair::AggregateScore> predicted;
    for (std::size_t t = 0; t < 3; ++t) {
      auto id = pre::testing::padded_task_id(t);
      predicted.push_back(pair_sample(id, "a", "b", corpus::Verdict::first));
      predicted.push_back(pair_sample(id, "b", "a", corpus::Verdict::second));
    }
    auto r = agreement(predicted, corpus, qualification::TiePolicy::half);
    CHECK(r.agreement == 1.0);
    CHECK(r.n_pairs_used == 3);
  }
  SUBCASE("one wrong pair out of three") {
    auto corpus = graded_corpus({{4, 2}, {2, 4}, {2, 4}});
    std::vector<chair::AggregateScore> predicted = {
        pair_sample("t000", "a", "b", corpus::Verdict::first),
        pair_sample("t001", "a", "b", corpus::Verdict::second),
        pair_sample("t002", "a", "b", corpus::Verdict::first),  // wrong
    };
    auto r = agreement(predicted, corpus, qualification::TiePolicy::half);
    CHECK(r.agreement == Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(r.n_pairs_used == 3);
  }
  SUBCASE("conflicting orders become a tie") {
    auto corpus = graded_corpus({{4, 2}});
    std::vector<chair::AggregateScore> predicted = {
        pair_sample("t000", "a", "b", corpus::Verdict::first),
        pair_sample("t000", "b", "a", corpus::Verdict::first),
    };
    auto half = agreement(predicted, corpus, qualification::TiePolicy::half);
    CHECK(half.agreement == 0.5);
    auto zero = agreement(predicted, corpus, qualification::TiePolicy::zero);
    CHECK(zero.agreement == 0.0);
  }
  SUBCASE("a single-order sample counts on its own") {
    auto corpus = graded_corpus({{2, 4}});
    std::vector<chair::AggregateScore> predicted = {
        pair_sample("t000", "b", "a", corpus::Verdict::first),
    };
    auto r = agreement(predicted, corpus, qualification::TiePolicy::half);
    CHECK(r.agreement == 1.0);  // b preferred, matching gold
    CHECK(r.n_pairs_used == 1);
  }
  SUBCASE("gold ties are excluded from the denominator") {
    auto corpus = graded_corpus({{4, 2}, {3, 3}});
    std::vector<chair::AggregateScore> predicted = {
        pair_sample("t000", "a", "b", corpus::Verdict::first),
        pair_sample("t001", "a", "b", corpus::Verdict::first),
    };
    auto r = agreement(predicted, corpus, qualification::TiePolicy::half);
    CHECK(r.agreement == 1.0);
    CHECK(r.n_pairs_used == 1);
  }
  SUBCASE("nothing scorable is an error") {
    auto corpus = graded_corpus({{3, 3}});
    std::vector<chair::AggregateScore> predicted = {
        pair_sample("t000", "a", "b", corpus::Verdict::first),
    };
    CHECK_THROWS_AS(
        agreement(predicted, corpus, qualification::TiePolicy::half),
        DegenerateInputError);
  }
}

TEST_CASE("per-task correlations average over included tasks") {
  SUBCASE("a monotone task correlates perfectly") {
    auto corpus = graded_corpus({{5, 4, 3}});
    std::vector<chair::AggregateScore> scores = {
        point_sample("t000", "a", 1.0), point_sample("t000", "b", 0.5),
        point_sample("t000", "c", 0.0)};
    auto r = per_task_mean_correlations(scores, corpus);
    CHECK(r.mean_tau == 1.0);
    CHECK(r.mean_spearman == 1.0);
    CHECK(r.tasks_included == 1);
    CHECK(r.tasks_skipped == 0);
    REQUIRE(r.per_task.size() == 1);
    CHECK(r.per_task[0].task_id == "t000");
    CHECK(r.per_task[0].tau == 1.0);
  }
  SUBCASE("a zero-correlation task pulls the mean down") {
    auto corpus = graded_corpus({{5, 4, 3, 2}, {2, 4, 1, 3}});
    std::vector<chair::AggregateScore> scores;
    for (int e = 0; e < 4; ++e) {
      std::string id(1, static_cast<char>('a' + e));
      scores.push_back(point_sample("t000", id, 4.0 - e));
      scores.push_back(point_sample("t001", id, 1.0 + e));
    }
    auto r = per_task_mean_correlations(scores, corpus);
    CHECK(r.tasks_included == 2);
    CHECK(r.mean_tau == Approx(0.5).epsilon(1e-14));
    CHECK(r.mean_spearman == Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("thin or degenerate tasks are skipped and counted") {
    // t000 usable; t001 has one annotated output; t002 has constant gold.
    auto corpus = graded_corpus({{5, 3, 2}, {4, 0, 0}, {3, 3, 3}});
    std::vector<chair::AggregateScore> scores;
    for (int e = 0; e < 3; ++e) {
      std::string id(1, static_cast<char>('a' + e));
      for (int t = 0; t < 3; ++t) {
        scores.push_back(
            point_sample(pre::testing::padded_task_id(t), id, 3.0 - e));
      }
    }
    auto r = per_task_mean_correlations(scores, corpus);
    CHECK(r.tasks_included == 1);
    CHECK(r.tasks_skipped == 2);
    CHECK(r.mean_tau == 1.0);
  }
  SUBCASE("zero includable tasks is an error") {
    auto corpus = graded_corpus({{4, 0}});
    std::vector<chair::AggregateScore> scores = {
        point_sample("t000", "a", 1.0), point_sample("t000", "b", 0.5)};
    CHECK_THROWS_AS(per_task_mean_correlations(scores, corpus),
                    DegenerateInputError);
  }
}

TEST_CASE("preference gap compares own and peer win rates") {
  using Choice = ParsedJudgment::Choice;

  SUBCASE("identical judgments cancel") {
    std::vector<ReviewRecord> records;
    for (const auto* reviewer : {"i", "j"}) {
      records.push_back(vote_record("t1", "i", "j", reviewer, Choice::one));
      records.push_back(vote_record("t1", "j", "i", reviewer, Choice::two));
      records.push_back(vote_record("t2", "i", "j", reviewer, Choice::two));
    }
    CHECK(preference_gap(records, "i", "j") == 0.0);
  }
  SUBCASE("a self-favoring reviewer shows a positive gap") {
    std::vector<ReviewRecord> records = {
        // Reviewer i calls itself the winner in 3 of 4 ordered samples.
        vote_record("t1", "i", "j", "i", Choice::one),
        vote_record("t1", "j", "i", "i", Choice::two),
        vote_record("t2", "i", "j", "i", Choice::one),
        vote_record("t2", "j", "i", "i", Choice::one),
        // Reviewer j gives i 1 win in 4.
        vote_record("t1", "i", "j", "j", Choice::one),
        vote_record("t1", "j", "i", "j", Choice::one),
        vote_record("t2", "i", "j", "j", Choice::two),
        vote_record("t2", "j", "i", "j", Choice::one),
    };
    CHECK(preference_gap(records, "i", "j") == Approx(0.5).epsilon(1e-14));
    // From j's perspective the same asymmetry appears with equal sign.
    CHECK(preference_gap(records, "j", "i") == Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("pointwise ratings convert to strict preferences") {
    std::vector<ReviewRecord> records = {
        // t1: i rates a loss for itself; j rates a tie (drops t1 for j).
        rating_record("t1", "i", "i", 1),
        rating_record("t1", "j", "i", 5),
        rating_record("t1", "i", "j", 2),
        rating_record("t1", "j", "j", 2),
        // t2: both strict; i wins by its own account, loses by j's.
        rating_record("t2", "i", "i", 4),
        rating_record("t2", "j", "i", 1),
        rating_record("t2", "i", "j", 1),
        rating_record("t2", "j", "j", 4),
    };
    // Only t2 is shared, so the t1 loss never enters.
    CHECK(preference_gap(records, "i", "j") == Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("no shared tasks is an error") {
    std::vector<ReviewRecord> records = {
        vote_record("t1", "i", "j", "i", Choice::one),
        vote_record("t2", "i", "j", "j", Choice::one),
    };
    CHECK_THROWS_AS(preference_gap(records, "i", "j"),
                    DegenerateInputError);
  }
  SUBCASE("unparseable and foreign records are invisible") {
    std::vector<ReviewRecord> records = {
        vote_record("t1", "i", "j", "i", Choice::one),
        vote_record("t1", "i", "j", "j", Choice::two),
        vote_record("t1", "x", "y", "i", Choice::one),  // different pair
    };
    records.push_back(vote_record("t1", "j", "i", "j", Choice::one));
    records.back().judgment = ParsedJudgment{};  // unparseable
    CHECK(preference_gap(records, "i", "j") == Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("a reviewer compared with itself is invalid") {
    CHECK_THROWS_AS(preference_gap({}, "i", "i"), ValidationError);
  }
}

TEST_CASE("pg significance is a two-sided one-sample t-test") {
  SUBCASE("zero mean gives p = 1") {
    auto r = pg_significance({0.1, -0.1, 0.2, -0.2});
    CHECK(r.t_statistic == 0.0);
    CHECK(r.p_value == 1.0);
    CHECK(r.prop_positive == 0.5);
  }
  SUBCASE("reference value") {
    auto r = pg_significance({0.1, 0.3, 0.2, 0.0, 0.15});
    CHECK(r.t_statistic == Approx(3.0).epsilon(1e-12));
    CHECK(r.p_value == Approx(0.03994196807171883).epsilon(1e-10));
    CHECK(r.prop_positive == 0.8);
  }
  SUBCASE("degenerate inputs") {
    CHECK_THROWS_AS(pg_significance({0.1}), DegenerateInputError);
    CHECK_THROWS_AS(pg_significance({0.25, 0.25, 0.25}), DegenerateInputError);
  }
}

TEST_CASE("regularized incomplete beta") {
  SUBCASE("identity and boundaries") {
    CHECK(regularized_incomplete_beta(1, 1, 0.37) ==
          Approx(0.37).epsilon(1e-12));
    CHECK(regularized_incomplete_beta(2, 5, 0.0) == 0.0);
    CHECK(regularized_incomplete_beta(2, 5, 1.0) == 1.0);
    CHECK(regularized_incomplete_beta(0.5, 0.5, 0.5) ==
          Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("reference values") {
    CHECK(regularized_incomplete_beta(2, 3, 0.25) ==
          Approx(0.26171875).epsilon(1e-10));
    CHECK(regularized_incomplete_beta(0.5, 5, 0.7) ==
          Approx(0.999308696614237).epsilon(1e-10));
    CHECK(regularized_incomplete_beta(4.5, 0.5, 0.5) ==
          Approx(0.014956363910414222).epsilon(1e-10));
  }
  SUBCASE("reflection symmetry") {
    for (double x : {0.1, 0.42, 0.73}) {
      CHECK(regularized_incomplete_beta(2.5, 1.5, x) ==
            Approx(1.0 - regularized_incomplete_beta(1.5, 2.5, 1.0 - x))
                .epsilon(1e-10));
    }
  }
  SUBCASE("domain errors") {
    CHECK_THROWS_AS(regularized_incomplete_beta(0, 1, 0.5), ValidationError);
    CHECK_THROWS_AS(regularized_incomplete_beta(1, -2, 0.5), ValidationError);
    CHECK_THROWS_AS(regularized_incomplete_beta(1, 1, 1.5), ValidationError);
  }
}

namespace {

/// Scripted reviewers judging every ordered pair of the dual-role ids on
/// each task; gold says lower index beats higher.
std::vector<ReviewRecord> dual_role_records(
    const std::vector<std::string>& ids, std::size_t tasks,
    const std::string& biased_id, double bias_strength) {
  std::vector<ReviewRecord> records;
  for (std::size_t t = 0; t < tasks; ++t) {
    std::string task = pre::testing::padded_task_id(t);
    for (const auto& reviewer : ids) {
      backend::ScriptedConfig cfg;
      cfg.accuracy = 0.75;
      cfg.seed = 1000 + fnv1a64(reviewer);
      if (reviewer == biased_id) {
        cfg.self_id = biased_id;
        cfg.bias_strength = bias_strength;
      }
      for (std::size_t x = 0; x < ids.size(); ++x) {
        for (std::size_t y = 0; y < ids.size(); ++y) {
          if (x == y) continue;
          ReviewRecord r;
          r.job = make_review_job(Setting::pairwise, task,
                                  {ids[x], ids[y]}, reviewer);
          backend::JobContext ctx;
          ctx.setting = Setting::pairwise;
          ctx.task_id = task;
          ctx.subject_ids = r.job.subject_ids;
          ctx.job_key = r.job.job_id;
          ctx.gold_preference =
              x < y ? corpus::Verdict::first : corpus::Verdict::second;
          r.judgment = backend::scripted_judge(cfg, ctx);
          records.push_back(std::move(r));
        }
      }
    }
  }
  return records;
}

}  // namespace

TEST_CASE("pg matrix over strict pairwise records is symmetric") {
  std::vector<std::string> ids = {"a", "b", "c"};
  auto records = dual_role_records(ids, 12, "b", 0.6);
  auto m = pg_matrix(records, ids);

  REQUIRE(m.reviewer_ids == ids);
  REQUIRE(m.pg.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(m.pg[i][i] == 0.0);
    for (std::size_t j = 0; j < 3; ++j) {
      REQUIRE(m.pg[i][j].has_value());
      // With no tie verdicts the two orientations measure the same gap.
      CHECK(*m.pg[i][j] == Approx(*m.pg[j][i]).epsilon(1e-12));
    }
  }
  REQUIRE(m.canonical_values.size() == 3);
  CHECK(m.canonical_values[0] == *m.pg[0][1]);
  CHECK(m.canonical_values[1] == *m.pg[0][2]);
  CHECK(m.canonical_values[2] == *m.pg[1][2]);
  CHECK(m.orientation == "canonical_index");
  REQUIRE(m.significance.has_value());
  CHECK(m.significance->p_value > 0.0);
  CHECK(m.significance->p_value <= 1.0);

  auto obj = pg_matrix_to_json(m);
  CHECK(obj.at("pg").size() == 3);
  CHECK(obj.at("significance").at("prop_positive").is_number());
}

TEST_CASE("pg matrix leaves unmeasured pairs empty") {
  std::vector<std::string> ids = {"a", "b"};
  auto records = dual_role_records(ids, 6, "", 0.0);
  auto m = pg_matrix(records, {"a", "b", "ghost"});
  CHECK(m.pg[0][1].has_value());
  CHECK(!m.pg[0][2].has_value());
  CHECK(!m.pg[2][1].has_value());
  CHECK(m.pg[2][2] == 0.0);
  CHECK(m.canonical_values.size() == 1);
  CHECK(!m.significance.has_value());  // one value cannot carry a t-test

  auto csv = pg_matrix_csv(m);
  auto first_line = csv.substr(0, csv.find('\n'));
  CHECK(first_line == ",a,b,ghost");
  // Missing cells stay empty between their commas.
  CHECK(csv.find("ghost,,,0.0\n") != std::string::npos);

  CHECK_THROWS_AS(pg_matrix(records, {}), ValidationError);
}
