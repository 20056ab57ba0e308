#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pre/backend.hpp"
#include "pre/common.hpp"
#include "pre/corpus.hpp"

namespace pre::qualification {

/// How a model tie on a gold-decided pair is scored: half credit or none.
/// Gold-tied pairs never enter the denominator under either policy.
enum class TiePolicy { half, zero };

std::string to_string(TiePolicy p);
TiePolicy tie_policy_from_string(const std::string& s);

enum class WeightScheme { log_odds, uniform };

std::string to_string(WeightScheme s);
WeightScheme weight_scheme_from_string(const std::string& s);

/// One exam question: a single output to rate, or an ordered pair to compare.
struct ExamItem {
  std::string task_id;
  std::vector<std::string> subject_ids;  // one id, or the ordered pair
  /// Pairwise: gold verdict oriented to subject_ids order.
  std::optional<corpus::Verdict> gold;
  /// Pointwise: gold score of the single subject, when annotated.
  std::optional<double> gold_score;
};

/// Unordered pair of pointwise items scored jointly: the candidate's two
/// ratings imply a preference that is checked against this verdict.
struct PairGold {
  std::string task_id;
  std::size_t index_a = 0;  // items[index_a] rated first member
  std::size_t index_b = 0;
  corpus::Verdict verdict = corpus::Verdict::tie;  // first = index_a's subject
};

struct ExamPaper {
  backend::Setting setting = backend::Setting::pairwise;
  std::vector<ExamItem> items;
  std::vector<PairGold> pair_gold;  // pointwise settings only
};

struct ReviewerProfile {
  std::string reviewer_id;
  backend::Setting setting = backend::Setting::pairwise;
  double p_l = 0;
  double w_l = 0;
  bool passed = false;
  std::optional<double> auto_exam_consistency;
  /// Filled during pointwise aggregation, not persisted with the profile.
  std::optional<double> mu_l;
  std::optional<double> sigma_l;
};

json profile_to_json(const ReviewerProfile& p);
ReviewerProfile profile_from_json(const json& obj);

/// Builds the exam over the questioners' outputs. Pairwise: every ordered
/// pair with a gold preference, so each unordered pair appears in both
/// orders. Pointwise: one item per (task, questioner output), with the gold
/// preferences of the unordered pairs attached for scoring.
/// Throws ValidationError when fewer than two questioners are given or a
/// questioner contributes no gold-covered item.
ExamPaper build_exam(const corpus::Corpus& corpus,
                     const std::vector<std::string>& questioner_ids,
                     backend::Setting setting);

/// Answers every item through the backend; answers[i] belongs to items[i].
std::vector<backend::ParsedJudgment> take_exam(const ExamPaper& exam,
                                               const corpus::Corpus& corpus,
                                               backend::Backend& candidate);

/// Fraction of gold-decided pairs where the candidate's preference (rate
/// differences under pointwise settings) matches gold. Unparseable answers
/// score 0 on their pairs; model ties score per the policy.
/// Throws DegenerateInputError when no gold-decided pair exists.
double score_agreement(const std::vector<backend::ParsedJudgment>& answers,
                       const ExamPaper& exam, TiePolicy tie_policy);

/// log_odds: ln(p'/(1-p')) with p' clamped to [clamp_eps, 1-clamp_eps];
/// uniform: 1.
double compute_weight(double p_l, WeightScheme scheme, double clamp_eps);

/// Threshold filter: passed = (p_l >= xi), weights assigned to passed
/// reviewers (failed ones keep weight 0).
std::vector<ReviewerProfile> qualify(
    const std::vector<std::pair<std::string, double>>& agreements, double xi,
    backend::Setting setting, WeightScheme scheme, double clamp_eps);

struct AutoExamResult {
  double consistency = 0;
  bool passed = false;
};

/// Unsupervised qualification probe: every unordered subject pair per task is
/// judged under both content orders (pairwise: swapped outputs; pointwise:
/// swapped source/response sections, converting the two rating passes to
/// pair relations). Consistency is the fraction of pairs whose implied
/// relation survives the swap; passing is consistency >= eta (inclusive).
/// Pairs touching an unparseable answer are excluded; throws
/// DegenerateInputError when nothing is scorable.
AutoExamResult auto_exam(backend::Backend& candidate,
                         const corpus::Corpus& corpus,
                         const std::vector<std::string>& subject_ids,
                         backend::Setting setting, double eta);

}  // namespace pre::qualification
