#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pre/common.hpp"

namespace pre::corpus {

enum class TaskKind { summarization, qa, generic };

std::string to_string(TaskKind k);
TaskKind task_kind_from_string(const std::string& s);

/// One evaluation item: the generation instruction plus the source text it
/// applies to. `instruction` may contain the literal placeholder {source};
/// otherwise the source is appended when the generation prompt is built.
struct Task {
  std::string task_id;
  std::string instruction;
  std::string source;
  TaskKind kind = TaskKind::generic;
};

struct ModelOutput {
  std::string task_id;
  std::string evaluatee_id;
  std::string text;
  std::map<std::string, std::string> generation_meta;
};

enum class Verdict { first, second, tie };

std::string to_string(Verdict v);
Verdict verdict_from_string(const std::string& s);

/// first <-> second, tie fixed.
Verdict flip(Verdict v);

struct GoldPointwise {
  std::string evaluatee_id;
  /// Integer 1..5 when given directly in the gold file; may be fractional
  /// when reduced from per-annotator scores.
  double score = 0;
  std::vector<double> annotator_scores;
};

/// Preference over an unordered output pair, held in canonical id order
/// (first_id < second_id). Annotator scores are kept on the
/// positive-favors-first scale; the file format stores the raw 7-level
/// scale where negative favors the first-listed response, and the loader
/// negates on read (the writer negates back).
struct GoldPreference {
  std::string first_id;
  std::string second_id;
  Verdict verdict = Verdict::tie;
  std::vector<double> annotator_scores;
};

struct GoldLabel {
  enum class Kind { pointwise, preference };
  std::string task_id;
  Kind kind = Kind::pointwise;
  std::optional<GoldPointwise> pointwise;
  std::optional<GoldPreference> preference;

  bool operator==(const GoldLabel&) const = default;
};

bool operator==(const GoldPointwise&, const GoldPointwise&);
bool operator==(const GoldPreference&, const GoldPreference&);

/// Removes one occurrence of the maximum and one of the minimum.
/// Requires length >= 3.
std::vector<double> trim_extremes(const std::vector<double>& scores);

/// Trim (when possible) then mean; this is how multi-annotator raw scores
/// collapse to a single value.
double reduce_annotator_scores(const std::vector<double>& scores);

/// Mean below -0.5 favors the second output, above +0.5 the first; half a
/// level is below the smallest labeled distinction, so |mean| < 0.5 is a tie.
Verdict preference_verdict_from_mean(double mean);

/// Immutable after load; safe to share across threads.
class Corpus {
 public:
  Corpus(std::vector<Task> tasks, std::vector<ModelOutput> outputs,
         std::vector<GoldLabel> gold);

  const std::vector<Task>& tasks() const { return tasks_; }
  const std::vector<ModelOutput>& outputs() const { return outputs_; }
  const std::vector<GoldLabel>& gold() const { return gold_; }

  const Task* find_task(const std::string& task_id) const;
  const ModelOutput* find_output(const std::string& task_id,
                                 const std::string& evaluatee_id) const;
  /// Gold pointwise score (reduced) for (task, evaluatee), if annotated.
  std::optional<double> gold_score(const std::string& task_id,
                                   const std::string& evaluatee_id) const;
  /// Explicit gold preference for the unordered pair, oriented so that
  /// `first` names the pair member passed as `a`.
  std::optional<Verdict> explicit_preference(const std::string& task_id,
                                             const std::string& a,
                                             const std::string& b) const;
  /// Gold preference for (a, b) on a task: explicit label if present for a
  /// pointwise tie or a missing pointwise pair, otherwise the comparison of
  /// the two pointwise scores. nullopt when neither source covers the pair.
  std::optional<Verdict> gold_preference(const std::string& task_id,
                                         const std::string& a,
                                         const std::string& b) const;

  std::vector<std::string> evaluatee_ids() const;

 private:
  std::vector<Task> tasks_;
  std::vector<ModelOutput> outputs_;
  std::vector<GoldLabel> gold_;
  std::map<std::string, std::size_t> task_index_;
  std::map<std::pair<std::string, std::string>, std::size_t> output_index_;
  std::map<std::pair<std::string, std::string>, std::size_t> gold_point_index_;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t>
      gold_pref_index_;
};

/// Loads the three record files (tasks, outputs, optional gold), validating
/// cross-references, uniqueness and value ranges. An empty gold path yields a
/// corpus with zero gold labels.
Corpus load_corpus(const std::filesystem::path& tasks_path,
                   const std::filesystem::path& outputs_path,
                   const std::filesystem::path& gold_path = {});

std::vector<Task> load_tasks(const std::filesystem::path& path);
std::vector<ModelOutput> load_outputs(const std::filesystem::path& path);
std::vector<GoldLabel> load_gold(const std::filesystem::path& path);

void write_outputs(const std::filesystem::path& path,
                   const std::vector<ModelOutput>& outputs);
void write_gold(const std::filesystem::path& path,
                const std::vector<GoldLabel>& gold);
void write_tasks(const std::filesystem::path& path,
                 const std::vector<Task>& tasks);

/// Canonical gold preferences for every unordered output pair that gold
/// covers: pointwise comparison where both scores exist, with explicit
/// preference labels overriding pointwise ties and filling uncovered pairs.
/// Emitted with first_id < second_id.
std::vector<GoldLabel> derive_gold_preferences(const Corpus& corpus);

enum class AlphaMetric { nominal, interval, ordinal };

/// Krippendorff's alpha over per-item annotator score lists,
/// alpha = 1 - D_observed / D_expected for the chosen difference metric.
/// Items with fewer than two annotations carry no coincidence information.
double krippendorff_alpha(const std::vector<std::vector<double>>& items,
                          AlphaMetric metric);

}  // namespace pre::corpus
