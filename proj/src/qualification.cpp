#include "pre/qualification.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pre::qualification {

std::string to_string(TiePolicy p) {
  return p == TiePolicy::half ? "half" : "zero";
}

TiePolicy tie_policy_from_string(const std::string& s) {
  if (s == "half") return TiePolicy::half;
  if (s == "zero") return TiePolicy::zero;
  throw ParseError("unknown tie_policy: " + s);
}

std::string to_string(WeightScheme s) {
  return s == WeightScheme::log_odds ? "log_odds" : "uniform";
}

WeightScheme weight_scheme_from_string(const std::string& s) {
  if (s == "log_odds") return WeightScheme::log_odds;
  if (s == "uniform") return WeightScheme::uniform;
  throw ParseError("unknown weight_scheme: " + s);
}

json profile_to_json(const ReviewerProfile& p) {
  json obj = {{"reviewer_id", p.reviewer_id},
              {"setting", backend::to_string(p.setting)},
              {"p_l", p.p_l},
              {"w_l", p.w_l},
              {"passed", p.passed}};
  obj["auto_exam_consistency"] =
      p.auto_exam_consistency ? json(*p.auto_exam_consistency) : json(nullptr);
  return obj;
}

ReviewerProfile profile_from_json(const json& obj) {
  ReviewerProfile p;
  p.reviewer_id = obj.at("reviewer_id").get<std::string>();
  p.setting = backend::setting_from_string(obj.at("setting").get<std::string>());
  p.p_l = obj.at("p_l").get<double>();
  p.w_l = obj.at("w_l").get<double>();
  p.passed = obj.at("passed").get<bool>();
  if (obj.contains("auto_exam_consistency") &&
      !obj.at("auto_exam_consistency").is_null()) {
    p.auto_exam_consistency = obj.at("auto_exam_consistency").get<double>();
  }
  return p;
}

// ---------------------------------------------------------------------------
// Exam construction

ExamPaper build_exam(const corpus::Corpus& corpus,
                     const std::vector<std::string>& questioner_ids,
                     backend::Setting setting) {
  if (questioner_ids.size() < 2) {
    throw ValidationError("exam needs at least two questioners to form pairs");
  }
  ExamPaper exam;
  exam.setting = setting;
  std::set<std::string> covered;

  if (setting == backend::Setting::pairwise) {
    for (const auto& task : corpus.tasks()) {
      for (const auto& a : questioner_ids) {
        for (const auto& b : questioner_ids) {
          if (a == b) continue;
          if (!corpus.find_output(task.task_id, a) ||
              !corpus.find_output(task.task_id, b)) {
            continue;
          }
          auto gold = corpus.gold_preference(task.task_id, a, b);
          if (!gold) continue;
          ExamItem item;
          item.task_id = task.task_id;
          item.subject_ids = {a, b};
          item.gold = *gold;
          exam.items.push_back(std::move(item));
          covered.insert(a);
          covered.insert(b);
        }
      }
    }
  } else {
    // One rating item per output; gold preferences of the unordered pairs
    // are attached so the two ratings can be scored as a preference.
    std::map<std::pair<std::string, std::string>, std::size_t> index;
    for (const auto& task : corpus.tasks()) {
      for (const auto& q : questioner_ids) {
        if (!corpus.find_output(task.task_id, q)) continue;
        ExamItem item;
        item.task_id = task.task_id;
        item.subject_ids = {q};
        item.gold_score = corpus.gold_score(task.task_id, q);
        index[{task.task_id, q}] = exam.items.size();
        exam.items.push_back(std::move(item));
      }
      for (std::size_t i = 0; i < questioner_ids.size(); ++i) {
        for (std::size_t j = i + 1; j < questioner_ids.size(); ++j) {
          const auto& a = questioner_ids[i];
          const auto& b = questioner_ids[j];
          auto it_a = index.find({task.task_id, a});
          auto it_b = index.find({task.task_id, b});
          if (it_a == index.end() || it_b == index.end()) continue;
          auto gold = corpus.gold_preference(task.task_id, a, b);
          if (!gold) continue;
          exam.pair_gold.push_back(
              {task.task_id, it_a->second, it_b->second, *gold});
          covered.insert(a);
          covered.insert(b);
        }
      }
    }
  }

  for (const auto& q : questioner_ids) {
    if (!covered.count(q)) {
      throw ValidationError("questioner lacks gold coverage: " + q);
    }
  }
  return exam;
}

std::vector<backend::ParsedJudgment> take_exam(const ExamPaper& exam,
                                               const corpus::Corpus& corpus,
                                               backend::Backend& candidate) {
  using backend::JobContext;
  std::vector<backend::ParsedJudgment> answers(exam.items.size());

  const std::string setting_name = backend::to_string(exam.setting);
  auto answer_one = [&](std::size_t i) {
    const ExamItem& item = exam.items[i];
    const corpus::Task* task = corpus.find_task(item.task_id);
    if (!task) throw ValidationError("exam item names unknown task: " + item.task_id);
    std::vector<const corpus::ModelOutput*> outputs;
    std::vector<std::string_view> key_fields = {"exam", setting_name,
                                                item.task_id};
    for (const auto& id : item.subject_ids) {
      const corpus::ModelOutput* out = corpus.find_output(item.task_id, id);
      if (!out) {
        throw ValidationError("exam item lacks output for " + id + " on " +
                              item.task_id);
      }
      outputs.push_back(out);
      key_fields.push_back(id);
    }
    JobContext ctx;
    ctx.setting = exam.setting;
    ctx.task_id = item.task_id;
    ctx.subject_ids = item.subject_ids;
    ctx.job_key = to_hex16(hash_fields(key_fields));
    ctx.gold_preference = item.gold;
    ctx.gold_score = item.gold_score;
    std::string prompt = backend::render_prompt(exam.setting, *task, outputs);
    auto result = candidate.complete(prompt, &ctx);
    answers[i] = backend::parse_judgment(result.text, exam.setting);
  };

  parallel_for(exam.items.size(),
               static_cast<std::size_t>(candidate.spec().max_in_flight),
               answer_one);
  return answers;
}

double score_agreement(const std::vector<backend::ParsedJudgment>& answers,
                       const ExamPaper& exam, TiePolicy tie_policy) {
  if (answers.size() != exam.items.size()) {
    throw ValidationError("answer count " + std::to_string(answers.size()) +
                          " does not match exam size " +
                          std::to_string(exam.items.size()));
  }
  double score = 0;
  std::size_t used = 0;

  if (exam.setting == backend::Setting::pairwise) {
    for (std::size_t i = 0; i < exam.items.size(); ++i) {
      const auto& gold = exam.items[i].gold;
      if (!gold || *gold == corpus::Verdict::tie) continue;
      ++used;
      const auto& answer = answers[i];
      if (answer.kind != backend::ParsedJudgment::Kind::preference) continue;
      if (backend::to_verdict(*answer.preference) == *gold) score += 1;
    }
  } else {
    for (const auto& pg : exam.pair_gold) {
      if (pg.verdict == corpus::Verdict::tie) continue;
      ++used;
      const auto& ra = answers.at(pg.index_a);
      const auto& rb = answers.at(pg.index_b);
      if (ra.kind != backend::ParsedJudgment::Kind::rating ||
          rb.kind != backend::ParsedJudgment::Kind::rating) {
        continue;
      }
      if (*ra.rating > *rb.rating) {
        if (pg.verdict == corpus::Verdict::first) score += 1;
      } else if (*ra.rating < *rb.rating) {
        if (pg.verdict == corpus::Verdict::second) score += 1;
      } else {
        score += tie_policy == TiePolicy::half ? 0.5 : 0.0;
      }
    }
  }
  if (used == 0) {
    throw DegenerateInputError("exam has no gold-decided pairs to score");
  }
  return score / static_cast<double>(used);
}

double compute_weight(double p_l, WeightScheme scheme, double clamp_eps) {
  if (p_l < 0 || p_l > 1) {
    throw ParseError("agreement must lie in [0, 1], got " +
                     std::to_string(p_l));
  }
  if (!(clamp_eps > 0 && clamp_eps < 0.5)) {
    throw ParseError("clamp_eps must lie in (0, 0.5)");
  }
  if (scheme == WeightScheme::uniform) return 1.0;
  double p = std::clamp(p_l, clamp_eps, 1.0 - clamp_eps);
  return std::log(p / (1.0 - p));
}

std::vector<ReviewerProfile> qualify(
    const std::vector<std::pair<std::string, double>>& agreements, double xi,
    backend::Setting setting, WeightScheme scheme, double clamp_eps) {
  std::vector<ReviewerProfile> profiles;
  profiles.reserve(agreements.size());
  for (const auto& [id, p_l] : agreements) {
    ReviewerProfile profile;
    profile.reviewer_id = id;
    profile.setting = setting;
    profile.p_l = p_l;
    profile.passed = p_l >= xi;
    profile.w_l = profile.passed ? compute_weight(p_l, scheme, clamp_eps) : 0.0;
    profiles.push_back(std::move(profile));
  }
  return profiles;
}

// ---------------------------------------------------------------------------
// Auto-Exam

namespace {

int relation(int a, int b) { return a < b ? -1 : a > b ? 1 : 0; }

}  // namespace

AutoExamResult auto_exam(backend::Backend& candidate,
                         const corpus::Corpus& corpus,
                         const std::vector<std::string>& subject_ids,
                         backend::Setting setting, double eta) {
  using backend::JobContext;
  using backend::ParsedJudgment;
  std::size_t usable = 0;
  std::size_t consistent = 0;

  auto ask = [&](const corpus::Task& task,
                 std::vector<const corpus::ModelOutput*> outputs,
                 JobContext ctx, bool swap_sections) {
    std::string prompt =
        backend::render_prompt(setting, task, outputs, swap_sections);
    return backend::parse_judgment(candidate.complete(prompt, &ctx).text,
                                   setting);
  };

  for (const auto& task : corpus.tasks()) {
    if (setting == backend::Setting::pairwise) {
      for (std::size_t i = 0; i < subject_ids.size(); ++i) {
        for (std::size_t j = i + 1; j < subject_ids.size(); ++j) {
          const auto& a = subject_ids[i];
          const auto& b = subject_ids[j];
          const auto* out_a = corpus.find_output(task.task_id, a);
          const auto* out_b = corpus.find_output(task.task_id, b);
          if (!out_a || !out_b) continue;

          auto make_ctx = [&](const std::string& s1, const std::string& s2) {
            JobContext ctx;
            ctx.setting = setting;
            ctx.task_id = task.task_id;
            ctx.subject_ids = {s1, s2};
            ctx.job_key = to_hex16(hash_fields(
                {"auto_exam", backend::to_string(setting), task.task_id, s1,
                 s2}));
            ctx.gold_preference = corpus.gold_preference(task.task_id, s1, s2);
            return ctx;
          };
          ParsedJudgment fwd = ask(task, {out_a, out_b}, make_ctx(a, b), false);
          ParsedJudgment rev = ask(task, {out_b, out_a}, make_ctx(b, a), false);
          if (fwd.kind != ParsedJudgment::Kind::preference ||
              rev.kind != ParsedJudgment::Kind::preference) {
            continue;
          }
          ++usable;
          const std::string& winner_fwd =
              *fwd.preference == ParsedJudgment::Choice::one ? a : b;
          const std::string& winner_rev =
              *rev.preference == ParsedJudgment::Choice::one ? b : a;
          if (winner_fwd == winner_rev) ++consistent;
        }
      }
    } else {
      // Rate each output under both section orders, then compare the pair
      // relations implied by the two passes.
      std::map<std::string, std::pair<ParsedJudgment, ParsedJudgment>> rated;
      for (const auto& s : subject_ids) {
        const auto* out = corpus.find_output(task.task_id, s);
        if (!out) continue;
        JobContext ctx;
        ctx.setting = setting;
        ctx.task_id = task.task_id;
        ctx.subject_ids = {s};
        ctx.gold_score = corpus.gold_score(task.task_id, s);
        ctx.job_key = to_hex16(hash_fields(
            {"auto_exam", backend::to_string(setting), task.task_id, s}));
        ParsedJudgment normal = ask(task, {out}, ctx, false);
        ctx.job_key = to_hex16(hash_fields(
            {"auto_exam", backend::to_string(setting), task.task_id, s,
             "swapped"}));
        ParsedJudgment swapped = ask(task, {out}, ctx, true);
        rated.emplace(s, std::make_pair(normal, swapped));
      }
      for (std::size_t i = 0; i < subject_ids.size(); ++i) {
        for (std::size_t j = i + 1; j < subject_ids.size(); ++j) {
          auto it_a = rated.find(subject_ids[i]);
          auto it_b = rated.find(subject_ids[j]);
          if (it_a == rated.end() || it_b == rated.end()) continue;
          const auto& [na, sa] = it_a->second;
          const auto& [nb, sb] = it_b->second;
          if (na.kind != ParsedJudgment::Kind::rating ||
              sa.kind != ParsedJudgment::Kind::rating ||
              nb.kind != ParsedJudgment::Kind::rating ||
              sb.kind != ParsedJudgment::Kind::rating) {
            continue;
          }
          ++usable;
          if (relation(*na.rating, *nb.rating) ==
              relation(*sa.rating, *sb.rating)) {
            ++consistent;
          }
        }
      }
    }
  }

  if (usable == 0) {
    throw DegenerateInputError("auto_exam found no scorable pairs");
  }
  AutoExamResult result;
  result.consistency = static_cast<double>(consistent) /
                       static_cast<double>(usable);
  result.passed = result.consistency >= eta;
  return result;
}

}  // namespace pre::qualification
