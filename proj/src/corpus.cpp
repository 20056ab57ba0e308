#include "pre/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pre::corpus {

std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::summarization: return "summarization";
    case TaskKind::qa: return "qa";
    case TaskKind::generic: return "generic";
  }
  return "generic";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "summarization") return TaskKind::summarization;
  if (s == "qa") return TaskKind::qa;
  if (s == "generic") return TaskKind::generic;
  throw ParseError("unknown task_kind: " + s);
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::first: return "first";
    case Verdict::second: return "second";
    case Verdict::tie: return "tie";
  }
  return "tie";
}

Verdict verdict_from_string(const std::string& s) {
  if (s == "first") return Verdict::first;
  if (s == "second") return Verdict::second;
  if (s == "tie") return Verdict::tie;
  throw ParseError("unknown verdict: " + s);
}

Verdict flip(Verdict v) {
  if (v == Verdict::first) return Verdict::second;
  if (v == Verdict::second) return Verdict::first;
  return Verdict::tie;
}

bool operator==(const GoldPointwise& a, const GoldPointwise& b) {
  return a.evaluatee_id == b.evaluatee_id && a.score == b.score &&
         a.annotator_scores == b.annotator_scores;
}

bool operator==(const GoldPreference& a, const GoldPreference& b) {
  return a.first_id == b.first_id && a.second_id == b.second_id &&
         a.verdict == b.verdict && a.annotator_scores == b.annotator_scores;
}

std::vector<double> trim_extremes(const std::vector<double>& scores) {
  if (scores.size() < 3) {
    throw DegenerateInputError(
        "trim_extremes needs at least 3 scores, got " +
        std::to_string(scores.size()));
  }
  auto max_it = std::max_element(scores.begin(), scores.end());
  auto min_it = std::min_element(scores.begin(), scores.end());
  std::size_t max_i = static_cast<std::size_t>(max_it - scores.begin());
  std::size_t min_i = static_cast<std::size_t>(min_it - scores.begin());
  if (max_i == min_i) min_i = (min_i + 1) % scores.size();  // all equal
  std::vector<double> out;
  out.reserve(scores.size() - 2);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i != max_i && i != min_i) out.push_back(scores[i]);
  }
  return out;
}

double reduce_annotator_scores(const std::vector<double>& scores) {
  if (scores.empty()) {
    throw DegenerateInputError("cannot reduce an empty annotator score list");
  }
  std::vector<double> vals =
      scores.size() >= 3 ? trim_extremes(scores) : scores;
  double sum = 0;
  for (double v : vals) sum += v;
  return sum / static_cast<double>(vals.size());
}

Verdict preference_verdict_from_mean(double mean) {
  if (mean >= 0.5) return Verdict::first;
  if (mean <= -0.5) return Verdict::second;
  return Verdict::tie;
}

// ---------------------------------------------------------------------------
// Corpus

namespace {

std::pair<std::string, std::string> unordered_key(const std::string& a,
                                                  const std::string& b) {
  return a <= b ? std::make_pair(a, b) : std::make_pair(b, a);
}

}  // namespace

Corpus::Corpus(std::vector<Task> tasks, std::vector<ModelOutput> outputs,
               std::vector<GoldLabel> gold)
    : tasks_(std::move(tasks)),
      outputs_(std::move(outputs)),
      gold_(std::move(gold)) {
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    const Task& t = tasks_[i];
    if (t.task_id.empty()) throw ValidationError("task with empty task_id");
    if (t.instruction.empty() || t.source.empty()) {
      throw ValidationError("task " + t.task_id +
                            ": instruction and source must be non-empty");
    }
    if (!task_index_.emplace(t.task_id, i).second) {
      throw ValidationError("duplicate task_id: " + t.task_id);
    }
  }
  for (std::size_t i = 0; i < outputs_.size(); ++i) {
    const ModelOutput& o = outputs_[i];
    if (!task_index_.count(o.task_id)) {
      throw ValidationError("output references unknown task_id: " + o.task_id);
    }
    if (o.evaluatee_id.empty()) {
      throw ValidationError("output on task " + o.task_id +
                            " with empty evaluatee_id");
    }
    if (!output_index_.emplace(std::make_pair(o.task_id, o.evaluatee_id), i)
             .second) {
      throw ValidationError("duplicate output for (" + o.task_id + ", " +
                            o.evaluatee_id + ")");
    }
  }
  for (std::size_t i = 0; i < gold_.size(); ++i) {
    const GoldLabel& g = gold_[i];
    if (!task_index_.count(g.task_id)) {
      throw ValidationError("gold label references unknown task_id: " +
                            g.task_id);
    }
    if (g.kind == GoldLabel::Kind::pointwise) {
      const auto& p = *g.pointwise;
      if (!output_index_.count({g.task_id, p.evaluatee_id})) {
        throw ValidationError("gold label on task " + g.task_id +
                              " references evaluatee without output: " +
                              p.evaluatee_id);
      }
      if (!gold_point_index_.emplace(std::make_pair(g.task_id, p.evaluatee_id),
                                     i)
               .second) {
        throw ValidationError("duplicate pointwise gold for (" + g.task_id +
                              ", " + p.evaluatee_id + ")");
      }
    } else {
      const auto& p = *g.preference;
      for (const std::string* id : {&p.first_id, &p.second_id}) {
        if (!output_index_.count({g.task_id, *id})) {
          throw ValidationError("gold preference on task " + g.task_id +
                                " references evaluatee without output: " + *id);
        }
      }
      auto key = unordered_key(p.first_id, p.second_id);
      if (!gold_pref_index_
               .emplace(std::make_tuple(g.task_id, key.first, key.second), i)
               .second) {
        throw ValidationError("duplicate gold preference for (" + g.task_id +
                              ", {" + p.first_id + ", " + p.second_id + "})");
      }
    }
  }
}

const Task* Corpus::find_task(const std::string& task_id) const {
  auto it = task_index_.find(task_id);
  return it == task_index_.end() ? nullptr : &tasks_[it->second];
}

const ModelOutput* Corpus::find_output(const std::string& task_id,
                                       const std::string& evaluatee_id) const {
  auto it = output_index_.find({task_id, evaluatee_id});
  return it == output_index_.end() ? nullptr : &outputs_[it->second];
}

std::optional<double> Corpus::gold_score(const std::string& task_id,
                                         const std::string& evaluatee_id) const {
  auto it = gold_point_index_.find({task_id, evaluatee_id});
  if (it == gold_point_index_.end()) return std::nullopt;
  return gold_[it->second].pointwise->score;
}

std::optional<Verdict> Corpus::explicit_preference(const std::string& task_id,
                                                   const std::string& a,
                                                   const std::string& b) const {
  auto key = unordered_key(a, b);
  auto it = gold_pref_index_.find({task_id, key.first, key.second});
  if (it == gold_pref_index_.end()) return std::nullopt;
  const GoldPreference& p = *gold_[it->second].preference;
  return p.first_id == a ? p.verdict : flip(p.verdict);
}

std::optional<Verdict> Corpus::gold_preference(const std::string& task_id,
                                               const std::string& a,
                                               const std::string& b) const {
  auto sa = gold_score(task_id, a);
  auto sb = gold_score(task_id, b);
  if (sa && sb) {
    if (*sa > *sb) return Verdict::first;
    if (*sa < *sb) return Verdict::second;
    // Pointwise tie: the auxiliary preference annotation decides if present.
    if (auto ex = explicit_preference(task_id, a, b)) return *ex;
    return Verdict::tie;
  }
  return explicit_preference(task_id, a, b);
}

std::vector<std::string> Corpus::evaluatee_ids() const {
  std::set<std::string> ids;
  for (const auto& o : outputs_) ids.insert(o.evaluatee_id);
  return {ids.begin(), ids.end()};
}

// ---------------------------------------------------------------------------
// File formats (one JSON object per line)

namespace {

std::string require_string(const json& obj, const char* key,
                           const std::filesystem::path& path,
                           std::size_t lineno) {
  if (!obj.contains(key) || !obj.at(key).is_string()) {
    throw ParseError(path.string() + ":" + std::to_string(lineno) +
                     ": missing required key \"" + key + "\"");
  }
  return obj.at(key).get<std::string>();
}

std::vector<double> optional_score_list(const json& obj, const char* key) {
  std::vector<double> out;
  if (obj.contains(key)) {
    for (const auto& v : obj.at(key)) out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

std::vector<Task> load_tasks(const std::filesystem::path& path) {
  std::vector<Task> tasks;
  for_each_jsonl(path, [&](std::size_t lineno, const json& obj) {
    Task t;
    t.task_id = require_string(obj, "task_id", path, lineno);
    t.instruction = require_string(obj, "instruction", path, lineno);
    t.source = require_string(obj, "source", path, lineno);
    t.kind = obj.contains("task_kind")
                 ? task_kind_from_string(obj.at("task_kind").get<std::string>())
                 : TaskKind::generic;
    tasks.push_back(std::move(t));
  });
  return tasks;
}

std::vector<ModelOutput> load_outputs(const std::filesystem::path& path) {
  std::vector<ModelOutput> outputs;
  for_each_jsonl(path, [&](std::size_t lineno, const json& obj) {
    ModelOutput o;
    o.task_id = require_string(obj, "task_id", path, lineno);
    o.evaluatee_id = require_string(obj, "evaluatee_id", path, lineno);
    if (!obj.contains("text") || !obj.at("text").is_string()) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": missing required key \"text\"");
    }
    o.text = obj.at("text").get<std::string>();
    if (obj.contains("generation_meta")) {
      for (const auto& [k, v] : obj.at("generation_meta").items()) {
        o.generation_meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
    }
    outputs.push_back(std::move(o));
  });
  return outputs;
}

std::vector<GoldLabel> load_gold(const std::filesystem::path& path) {
  std::vector<GoldLabel> gold;
  for_each_jsonl(path, [&](std::size_t lineno, const json& obj) {
    auto fail = [&](const std::string& msg) -> ParseError {
      return ParseError(path.string() + ":" + std::to_string(lineno) + ": " +
                        msg);
    };
    GoldLabel g;
    g.task_id = require_string(obj, "task_id", path, lineno);
    std::string kind = require_string(obj, "kind", path, lineno);
    if (kind == "pointwise") {
      g.kind = GoldLabel::Kind::pointwise;
      GoldPointwise p;
      p.evaluatee_id = require_string(obj, "evaluatee_id", path, lineno);
      p.annotator_scores = optional_score_list(obj, "annotator_scores");
      for (double v : p.annotator_scores) {
        if (v < 1 || v > 5) throw fail("annotator score outside 1..5");
      }
      if (!p.annotator_scores.empty()) {
        p.score = reduce_annotator_scores(p.annotator_scores);
      } else {
        if (!obj.contains("score") || !obj.at("score").is_number()) {
          throw fail("pointwise gold needs \"score\" or \"annotator_scores\"");
        }
        p.score = obj.at("score").get<double>();
        if (p.score < 1 || p.score > 5 || p.score != std::floor(p.score)) {
          throw fail("pointwise score must be an integer in 1..5");
        }
      }
      g.pointwise = std::move(p);
    } else if (kind == "preference") {
      g.kind = GoldLabel::Kind::preference;
      GoldPreference p;
      p.first_id = require_string(obj, "first_id", path, lineno);
      p.second_id = require_string(obj, "second_id", path, lineno);
      if (p.first_id == p.second_id) {
        throw fail("preference pair must name two distinct evaluatees");
      }
      p.annotator_scores = optional_score_list(obj, "annotator_scores");
      for (double& v : p.annotator_scores) {
        if (v < -3 || v > 3) throw fail("annotator score outside -3..3");
        v = -v;  // raw 7-level scale has negative favoring the first output
      }
      if (obj.contains("verdict")) {
        p.verdict = verdict_from_string(obj.at("verdict").get<std::string>());
      } else if (!p.annotator_scores.empty()) {
        p.verdict = preference_verdict_from_mean(
            reduce_annotator_scores(p.annotator_scores));
      } else {
        throw fail("preference gold needs \"verdict\" or \"annotator_scores\"");
      }
      if (p.first_id > p.second_id) {
        std::swap(p.first_id, p.second_id);
        p.verdict = flip(p.verdict);
        for (double& v : p.annotator_scores) v = -v;
      }
      g.preference = std::move(p);
    } else {
      throw fail("unknown gold kind: " + kind);
    }
    gold.push_back(std::move(g));
  });
  return gold;
}

Corpus load_corpus(const std::filesystem::path& tasks_path,
                   const std::filesystem::path& outputs_path,
                   const std::filesystem::path& gold_path) {
  std::vector<GoldLabel> gold;
  if (!gold_path.empty()) gold = load_gold(gold_path);
  return Corpus(load_tasks(tasks_path), load_outputs(outputs_path),
                std::move(gold));
}

void write_tasks(const std::filesystem::path& path,
                 const std::vector<Task>& tasks) {
  std::vector<json> rows;
  rows.reserve(tasks.size());
  for (const auto& t : tasks) {
    rows.push_back({{"task_id", t.task_id},
                    {"instruction", t.instruction},
                    {"source", t.source},
                    {"task_kind", to_string(t.kind)}});
  }
  write_jsonl(path, rows);
}

void write_outputs(const std::filesystem::path& path,
                   const std::vector<ModelOutput>& outputs) {
  std::vector<json> rows;
  rows.reserve(outputs.size());
  for (const auto& o : outputs) {
    json row = {{"task_id", o.task_id},
                {"evaluatee_id", o.evaluatee_id},
                {"text", o.text}};
    if (!o.generation_meta.empty()) {
      row["generation_meta"] = o.generation_meta;
    }
    rows.push_back(std::move(row));
  }
  write_jsonl(path, rows);
}

void write_gold(const std::filesystem::path& path,
                const std::vector<GoldLabel>& gold) {
  std::vector<json> rows;
  rows.reserve(gold.size());
  for (const auto& g : gold) {
    json row = {{"task_id", g.task_id}};
    if (g.kind == GoldLabel::Kind::pointwise) {
      row["kind"] = "pointwise";
      row["evaluatee_id"] = g.pointwise->evaluatee_id;
      row["score"] = g.pointwise->score;
      if (!g.pointwise->annotator_scores.empty()) {
        row["annotator_scores"] = g.pointwise->annotator_scores;
      }
    } else {
      row["kind"] = "preference";
      row["first_id"] = g.preference->first_id;
      row["second_id"] = g.preference->second_id;
      row["verdict"] = to_string(g.preference->verdict);
      if (!g.preference->annotator_scores.empty()) {
        std::vector<double> raw = g.preference->annotator_scores;
        for (double& v : raw) v = -v;  // back to the on-disk 7-level scale
        row["annotator_scores"] = raw;
      }
    }
    rows.push_back(std::move(row));
  }
  write_jsonl(path, rows);
}

std::vector<GoldLabel> derive_gold_preferences(const Corpus& corpus) {
  std::vector<GoldLabel> out;
  for (const auto& task : corpus.tasks()) {
    // Unordered pairs of evaluatees with outputs on this task, in id order.
    std::vector<std::string> ids;
    for (const auto& o : corpus.outputs()) {
      if (o.task_id == task.task_id) ids.push_back(o.evaluatee_id);
    }
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = i + 1; j < ids.size(); ++j) {
        auto v = corpus.gold_preference(task.task_id, ids[i], ids[j]);
        if (!v) continue;  // pair lacks both label kinds
        GoldLabel g;
        g.task_id = task.task_id;
        g.kind = GoldLabel::Kind::preference;
        g.preference = GoldPreference{ids[i], ids[j], *v, {}};
        out.push_back(std::move(g));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Krippendorff's alpha

double krippendorff_alpha(const std::vector<std::vector<double>>& items,
                          AlphaMetric metric) {
  if (items.size() < 2) {
    throw DegenerateInputError(
        "krippendorff_alpha needs at least two items");
  }
  // Distinct values, ascending (the ordinal metric needs the order).
  std::set<double> value_set;
  bool any_pairable = false;
  for (const auto& item : items) {
    for (double v : item) value_set.insert(v);
    if (item.size() >= 2) any_pairable = true;
  }
  if (!any_pairable) {
    throw DegenerateInputError(
        "krippendorff_alpha needs at least one item with two annotations");
  }
  std::vector<double> values(value_set.begin(), value_set.end());
  std::map<double, std::size_t> index;
  for (std::size_t i = 0; i < values.size(); ++i) index[values[i]] = i;
  const std::size_t k = values.size();

  // Coincidence matrix: each ordered pair of annotations within an item
  // contributes 1/(m-1).
  std::vector<std::vector<double>> coin(k, std::vector<double>(k, 0.0));
  for (const auto& item : items) {
    const std::size_t m = item.size();
    if (m < 2) continue;
    const double w = 1.0 / static_cast<double>(m - 1);
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        if (a == b) continue;
        coin[index[item[a]]][index[item[b]]] += w;
      }
    }
  }
  std::vector<double> marginal(k, 0.0);
  double n = 0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < k; ++d) marginal[c] += coin[c][d];
    n += marginal[c];
  }

  auto delta_sq = [&](std::size_t c, std::size_t d) -> double {
    switch (metric) {
      case AlphaMetric::nominal:
        return c == d ? 0.0 : 1.0;
      case AlphaMetric::interval: {
        double diff = values[c] - values[d];
        return diff * diff;
      }
      case AlphaMetric::ordinal: {
        auto [lo, hi] = std::minmax(c, d);
        double s = 0;
        for (std::size_t g = lo; g <= hi; ++g) s += marginal[g];
        s -= (marginal[lo] + marginal[hi]) / 2.0;
        return s * s;
      }
    }
    return 0.0;
  };

  double d_obs = 0, d_exp = 0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < k; ++d) {
      double dd = delta_sq(c, d);
      d_obs += coin[c][d] * dd;
      d_exp += marginal[c] * marginal[d] * dd;
    }
  }
  d_obs /= n;
  d_exp /= n * (n - 1);
  if (d_exp == 0) {
    throw DegenerateInputError(
        "krippendorff_alpha: zero expected disagreement (all values equal)");
  }
  return 1.0 - d_obs / d_exp;
}

}  // namespace pre::corpus
