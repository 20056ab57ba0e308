#include "pre/backend.hpp"

#include <httplib.h>

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

namespace pre::backend {

std::string to_string(Setting s) {
  switch (s) {
    case Setting::pairwise: return "pairwise";
    case Setting::point5: return "point5";
    case Setting::point100: return "point100";
  }
  return "pairwise";
}

Setting setting_from_string(const std::string& s) {
  if (s == "pairwise") return Setting::pairwise;
  if (s == "point5") return Setting::point5;
  if (s == "point100") return Setting::point100;
  throw ParseError("unknown setting: " + s);
}

bool is_pointwise(Setting s) { return s != Setting::pairwise; }

std::pair<int, int> rating_range(Setting s) {
  if (s == Setting::point5) return {1, 5};
  if (s == Setting::point100) return {0, 100};
  throw ParseError("pairwise setting has no rating range");
}

// ---------------------------------------------------------------------------
// Backend specs

void validate(const BackendSpec& spec) {
  if (spec.backend_id.empty()) throw ParseError("backend with empty backend_id");
  auto fail = [&](const std::string& msg) -> ParseError {
    return ParseError("backend " + spec.backend_id + ": " + msg);
  };
  if (spec.kind == BackendSpec::Kind::http) {
    if (spec.endpoint.rfind("http://", 0) != 0) {
      throw fail("http kind requires an endpoint of the form http://host[:port]/path");
    }
  } else {
    if (!spec.scripted) throw fail("scripted kind requires scripted_config");
    const auto& sc = *spec.scripted;
    if (!(sc.accuracy > 0 && sc.accuracy <= 1)) {
      throw fail("scripted accuracy must lie in (0, 1]");
    }
    if (sc.bias_strength < 0 || sc.bias_strength > 1) {
      throw fail("bias_strength must lie in [0, 1]");
    }
  }
  if (!(spec.request_timeout > 0)) throw fail("request_timeout must be positive");
  if (spec.max_retries < 0) throw fail("max_retries must be non-negative");
  if (spec.retry_backoff < 0) throw fail("retry_backoff must be non-negative");
  if (spec.max_tokens < 1) throw fail("max_tokens must be at least 1");
  if (spec.max_in_flight < 1) throw fail("max_in_flight must be at least 1");
}

BackendSpec backend_spec_from_json(const json& obj) {
  BackendSpec spec;
  if (!obj.contains("backend_id") || !obj.at("backend_id").is_string()) {
    throw ParseError("backend spec missing \"backend_id\"");
  }
  spec.backend_id = obj.at("backend_id").get<std::string>();
  std::string kind = obj.value("kind", std::string("scripted"));
  if (kind == "http") {
    spec.kind = BackendSpec::Kind::http;
  } else if (kind == "scripted") {
    spec.kind = BackendSpec::Kind::scripted;
  } else {
    throw ParseError("backend " + spec.backend_id + ": unknown kind: " + kind);
  }
  spec.endpoint = obj.value("endpoint", std::string());
  spec.auth_env_var = obj.value("auth_env_var", std::string());
  spec.model = obj.value("model", std::string());
  spec.request_timeout = obj.value("request_timeout", spec.request_timeout);
  spec.max_retries = obj.value("max_retries", spec.max_retries);
  spec.retry_backoff = obj.value("retry_backoff", spec.retry_backoff);
  spec.max_tokens = obj.value("max_tokens", spec.max_tokens);
  spec.max_in_flight = obj.value("max_in_flight", spec.max_in_flight);
  if (obj.contains("scripted_config")) {
    const json& sc = obj.at("scripted_config");
    ScriptedConfig c;
    c.accuracy = sc.value("accuracy", c.accuracy);
    c.seed = sc.value("seed", c.seed);
    c.self_id = sc.value("self_id", c.self_id);
    c.bias_strength = sc.value("bias_strength", c.bias_strength);
    spec.scripted = c;
  }
  validate(spec);
  return spec;
}

json backend_spec_to_json(const BackendSpec& spec) {
  json obj = {
      {"backend_id", spec.backend_id},
      {"kind", spec.kind == BackendSpec::Kind::http ? "http" : "scripted"},
      {"request_timeout", spec.request_timeout},
      {"max_retries", spec.max_retries},
      {"retry_backoff", spec.retry_backoff},
      {"max_tokens", spec.max_tokens},
      {"max_in_flight", spec.max_in_flight},
  };
  if (!spec.endpoint.empty()) obj["endpoint"] = spec.endpoint;
  if (!spec.auth_env_var.empty()) obj["auth_env_var"] = spec.auth_env_var;
  if (!spec.model.empty()) obj["model"] = spec.model;
  if (spec.scripted) {
    obj["scripted_config"] = {{"accuracy", spec.scripted->accuracy},
                              {"seed", spec.scripted->seed},
                              {"self_id", spec.scripted->self_id},
                              {"bias_strength", spec.scripted->bias_strength}};
  }
  return obj;
}

// ---------------------------------------------------------------------------
// Judgments

std::string to_string(ParsedJudgment::Choice c) {
  return c == ParsedJudgment::Choice::one ? "one" : "two";
}

ParsedJudgment::Choice choice_from_string(const std::string& s) {
  if (s == "one") return ParsedJudgment::Choice::one;
  if (s == "two") return ParsedJudgment::Choice::two;
  throw ParseError("unknown preference choice: " + s);
}

corpus::Verdict to_verdict(ParsedJudgment::Choice c) {
  return c == ParsedJudgment::Choice::one ? corpus::Verdict::first
                                          : corpus::Verdict::second;
}

json judgment_to_json(const ParsedJudgment& j) {
  json obj = {{"raw_text", j.raw_text}};
  switch (j.kind) {
    case ParsedJudgment::Kind::rating:
      obj["kind"] = "rating";
      obj["rating"] = *j.rating;
      break;
    case ParsedJudgment::Kind::preference:
      obj["kind"] = "preference";
      obj["preference"] = to_string(*j.preference);
      break;
    case ParsedJudgment::Kind::unparseable:
      obj["kind"] = "unparseable";
      break;
  }
  return obj;
}

ParsedJudgment judgment_from_json(const json& obj) {
  ParsedJudgment j;
  j.raw_text = obj.value("raw_text", std::string());
  std::string kind = obj.at("kind").get<std::string>();
  if (kind == "rating") {
    j.kind = ParsedJudgment::Kind::rating;
    j.rating = obj.at("rating").get<int>();
  } else if (kind == "preference") {
    j.kind = ParsedJudgment::Kind::preference;
    j.preference = choice_from_string(obj.at("preference").get<std::string>());
  } else if (kind == "unparseable") {
    j.kind = ParsedJudgment::Kind::unparseable;
  } else {
    throw ParseError("unknown judgment kind: " + kind);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Prompt templates

namespace {

struct TemplateParts {
  std::string header;
  std::vector<std::pair<std::string, std::string>> lead;  // label, content
  std::string response_label;  // "Summary", "Answer", "Response"
  std::string tail;
};

TemplateParts template_parts(Setting setting, const corpus::Task& task) {
  using corpus::TaskKind;
  TemplateParts p;
  switch (task.kind) {
    case TaskKind::summarization:
      p.lead = {{"Passage", task.source}};
      p.response_label = "Summary";
      switch (setting) {
        case Setting::pairwise:
          p.header =
              "###Task: Evaluate two summaries of a given passage and "
              "determine which one better summarizes the main points of the "
              "passage considering accuracy and conciseness. You only need to "
              "output `one` or `two` directly to indicate which summary "
              "summarizes the passage better.";
          break;
        case Setting::point5:
          p.header =
              "###Task: Evaluate the summary of a given passage and determine "
              "how it summarizes the main points of the passage considering "
              "accuracy and conciseness. Directly output a number between 1 "
              "and 5 to indicate the quality score of this summary:\n"
              "- 1 means the summary is not relevant to the passage,\n"
              "- 2 means the summary is neither accurate nor concise but it "
              "is relevant to the passage,\n"
              "- 3 means the summary is only a fair summary of the passage "
              "considering accuracy and conciseness,\n"
              "- 4 means the summary is a good summary of the passage but "
              "still has room for improvement in accuracy and conciseness,\n"
              "- 5 means the summary is a perfect summary of the passage "
              "considering accuracy and conciseness.";
          break;
        case Setting::point100:
          p.header =
              "###Task: Evaluate the summary of a given passage and determine "
              "how it summarizes the main points of the passage considering "
              "accuracy and conciseness. Directly output a number between 0 "
              "and 100 to indicate the score of this summary. The higher the "
              "score, the more accurate and concise the summary is.";
          break;
      }
      p.tail = setting == Setting::pairwise ? "###Output:"
                                            : "###Score of the summary:";
      break;
    case TaskKind::qa:
      p.lead = {{"Question", task.source}};
      p.response_label = "Answer";
      switch (setting) {
        case Setting::pairwise:
          p.header =
              "###Task: Evaluate two answers to a given question and "
              "determine which one better answers the question considering "
              "accuracy and conciseness. You only need to output `one` or "
              "`two` directly to indicate which answer answers the question "
              "better.";
          break;
        case Setting::point5:
          p.header =
              "###Task: Evaluate the answer to a given question and determine "
              "how it answers the question considering accuracy and "
              "conciseness. Directly output a number between 1 and 5 to "
              "indicate the quality score of this answer:\n"
              "- 1 means the answer is not relevant to the question,\n"
              "- 2 means the answer is neither accurate nor concise but it is "
              "relevant to the question,\n"
              "- 3 means the answer is only a fair answer to the question "
              "considering accuracy and conciseness,\n"
              "- 4 means the answer is a good answer to the question but "
              "still has room for improvement in accuracy and conciseness,\n"
              "- 5 means the answer is a perfect answer to the question "
              "considering accuracy and conciseness.";
          break;
        case Setting::point100:
          p.header =
              "###Task: Evaluate the answer to a given question and determine "
              "how it answers the question considering accuracy and "
              "conciseness. Directly output a number between 0 and 100 to "
              "indicate the score of this answer. The higher the score, the "
              "more accurate and concise the answer is.";
          break;
      }
      p.tail = setting == Setting::pairwise ? "###Output:"
                                            : "###Score of the answer:";
      break;
    case TaskKind::generic:
      p.lead = {{"Instruction", task.instruction}, {"Input", task.source}};
      p.response_label = "Response";
      switch (setting) {
        case Setting::pairwise:
          p.header =
              "###Task: Evaluate two responses to a given instruction and "
              "input, and determine which one better fulfills the instruction "
              "considering accuracy and conciseness. You only need to output "
              "`one` or `two` directly to indicate which response fulfills "
              "the instruction better.";
          break;
        case Setting::point5:
          p.header =
              "###Task: Evaluate the response to a given instruction and "
              "input, and determine how it fulfills the instruction "
              "considering accuracy and conciseness. Directly output a number "
              "between 1 and 5 to indicate the quality score of this "
              "response:\n"
              "- 1 means the response is not relevant to the instruction,\n"
              "- 2 means the response is neither accurate nor concise but it "
              "is relevant to the instruction,\n"
              "- 3 means the response is only a fair response to the "
              "instruction considering accuracy and conciseness,\n"
              "- 4 means the response is a good response to the instruction "
              "but still has room for improvement in accuracy and "
              "conciseness,\n"
              "- 5 means the response is a perfect response to the "
              "instruction considering accuracy and conciseness.";
          break;
        case Setting::point100:
          p.header =
              "###Task: Evaluate the response to a given instruction and "
              "input, and determine how it fulfills the instruction "
              "considering accuracy and conciseness. Directly output a number "
              "between 0 and 100 to indicate the score of this response. The "
              "higher the score, the more accurate and concise the response "
              "is.";
          break;
      }
      p.tail = setting == Setting::pairwise ? "###Output:"
                                            : "###Score of the response:";
      break;
  }
  return p;
}

}  // namespace

std::string render_prompt(Setting setting, const corpus::Task& task,
                          const std::vector<const corpus::ModelOutput*>& outputs,
                          bool swap_sections) {
  const std::size_t want = setting == Setting::pairwise ? 2 : 1;
  if (outputs.size() != want) {
    throw ParseError(to_string(setting) + " prompt needs " +
                     std::to_string(want) + " output(s), got " +
                     std::to_string(outputs.size()));
  }
  if (swap_sections && setting == Setting::pairwise) {
    throw ParseError("section swap applies to pointwise prompts only");
  }
  TemplateParts p = template_parts(setting, task);

  std::vector<std::string> blocks;
  blocks.push_back(p.header);
  std::vector<std::string> lead_blocks;
  for (const auto& [label, content] : p.lead) {
    lead_blocks.push_back("###" + label + ": " + content);
  }
  std::vector<std::string> response_blocks;
  if (setting == Setting::pairwise) {
    response_blocks.push_back("###" + p.response_label +
                              " one: " + outputs[0]->text);
    response_blocks.push_back("###" + p.response_label +
                              " two: " + outputs[1]->text);
  } else {
    response_blocks.push_back("###" + p.response_label + ": " +
                              outputs[0]->text);
  }
  if (swap_sections) {
    // The response moves in front of the source block (the last lead
    // section); a generic task keeps its instruction first.
    blocks.insert(blocks.end(), lead_blocks.begin(), lead_blocks.end() - 1);
    blocks.insert(blocks.end(), response_blocks.begin(), response_blocks.end());
    blocks.push_back(lead_blocks.back());
  } else {
    blocks.insert(blocks.end(), lead_blocks.begin(), lead_blocks.end());
    blocks.insert(blocks.end(), response_blocks.begin(), response_blocks.end());
  }
  blocks.push_back(p.tail);

  std::string out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i) out += "\n\n";
    out += blocks[i];
  }
  return out;
}

std::string render_generation_prompt(const corpus::Task& task) {
  static const std::string placeholder = "{source}";
  auto pos = task.instruction.find(placeholder);
  if (pos == std::string::npos) {
    return task.instruction + "\n" + task.source;
  }
  std::string out = task.instruction;
  out.replace(pos, placeholder.size(), task.source);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

}  // namespace

ParsedJudgment parse_judgment(const std::string& raw, Setting setting) {
  ParsedJudgment out;
  out.raw_text = raw;
  const std::size_t n = raw.size();

  if (setting == Setting::pairwise) {
    std::size_t i = 0;
    while (i < n) {
      if (!is_word_char(raw[i])) {
        ++i;
        continue;
      }
      std::size_t j = i;
      std::string token;
      while (j < n && is_word_char(raw[j])) {
        token += static_cast<char>(
            std::tolower(static_cast<unsigned char>(raw[j])));
        ++j;
      }
      if (token == "one" || token == "two") {
        out.kind = ParsedJudgment::Kind::preference;
        out.preference = token == "one" ? ParsedJudgment::Choice::one
                                        : ParsedJudgment::Choice::two;
        return out;
      }
      i = j;
    }
    return out;
  }

  const auto [lo, hi] = rating_range(setting);
  std::size_t i = 0;
  while (i < n) {
    char c = raw[i];
    if (is_word_char(c) &&
        !std::isdigit(static_cast<unsigned char>(c))) {
      // Skip whole words so the 4 in "v42x" never counts.
      while (i < n && is_word_char(raw[i])) ++i;
      continue;
    }
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    bool negative = i > 0 && raw[i - 1] == '-' &&
                    (i < 2 || !is_word_char(raw[i - 2]));
    // Fractional continuation of an earlier number ("4.7" offers 4, not 7).
    if (i > 0 && raw[i - 1] == '.') {
      while (i < n && std::isdigit(static_cast<unsigned char>(raw[i]))) ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && std::isdigit(static_cast<unsigned char>(raw[j]))) ++j;
    std::size_t end = j;
    if (end < n && raw[end] == '.' && end + 1 < n &&
        std::isdigit(static_cast<unsigned char>(raw[end + 1]))) {
      ++end;
      while (end < n && std::isdigit(static_cast<unsigned char>(raw[end]))) {
        ++end;
      }
    }
    if (end < n && is_word_char(raw[end])) {
      i = end;  // digits glued to a word, not a standalone number
      continue;
    }
    // Truncation toward zero = drop the fractional digits.
    if (j - i <= 9) {
      long value = std::stol(raw.substr(i, j - i));
      if (negative) value = -value;
      if (value >= lo && value <= hi) {
        out.kind = ParsedJudgment::Kind::rating;
        out.rating = static_cast<int>(value);
        return out;
      }
    }
    i = end;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scripted judge

ParsedJudgment scripted_judge(const ScriptedConfig& config,
                              const JobContext& ctx) {
  std::mt19937_64 rng(derive_seed(config.seed, "judge", ctx.job_key));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::string text;

  if (ctx.setting == Setting::pairwise) {
    using corpus::Verdict;
    Verdict base;
    if (!ctx.gold_preference || *ctx.gold_preference == Verdict::tie) {
      base = unit(rng) < 0.5 ? Verdict::first : Verdict::second;
    } else {
      base = unit(rng) < config.accuracy ? *ctx.gold_preference
                                         : corpus::flip(*ctx.gold_preference);
    }
    if (!config.self_id.empty() && config.bias_strength > 0 &&
        ctx.subject_ids.size() == 2) {
      std::optional<Verdict> self_side;
      if (ctx.subject_ids[0] == config.self_id) self_side = Verdict::first;
      if (ctx.subject_ids[1] == config.self_id) self_side = Verdict::second;
      if (self_side && base != *self_side &&
          unit(rng) < config.bias_strength) {
        base = *self_side;
      }
    }
    text = base == Verdict::first ? "one" : "two";
  } else {
    const auto [lo, hi] = rating_range(ctx.setting);
    int value;
    if (!ctx.gold_score) {
      value = (lo + hi) / 2;
    } else {
      double g = *ctx.gold_score;  // 1..5 scale
      int s;
      if (ctx.setting == Setting::point5) {
        s = std::clamp(static_cast<int>(std::lround(g)), 1, 5);
      } else {
        s = std::clamp(static_cast<int>(std::lround((g - 1.0) / 4.0 * 100.0)),
                       0, 100);
      }
      // Disagreement mirrors the score so errors are symmetric around the
      // scale midpoint.
      value = unit(rng) < config.accuracy
                  ? s
                  : (ctx.setting == Setting::point5 ? 6 - s : 100 - s);
    }
    text = std::to_string(value);
  }
  return parse_judgment(text, ctx.setting);
}

// ---------------------------------------------------------------------------
// Cache

CacheStore::CacheStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path CacheStore::key_path(const std::string& backend_id,
                                           const std::string& scope,
                                           const std::string& prompt) const {
  return dir_ / backend_id /
         (scope + "-" + to_hex16(fnv1a64(prompt)) + ".json");
}

std::optional<CompletionResult> CacheStore::lookup(
    const std::string& backend_id, const std::string& scope,
    const std::string& prompt) {
  std::lock_guard lock(mutex_);
  auto path = key_path(backend_id, scope, prompt);
  if (!std::filesystem::exists(path)) return std::nullopt;
  json obj = json::parse(read_text_file(path), nullptr, false);
  if (obj.is_discarded()) return std::nullopt;  // corrupt entry = miss
  CompletionResult r;
  r.text = obj.value("text", std::string());
  r.attempt_count = obj.value("attempt_count", 1);
  r.latency = obj.value("latency", 0.0);
  r.from_cache = true;
  return r;
}

void CacheStore::store(const std::string& backend_id, const std::string& scope,
                       const std::string& prompt,
                       const CompletionResult& result) {
  std::lock_guard lock(mutex_);
  auto path = key_path(backend_id, scope, prompt);
  std::filesystem::create_directories(path.parent_path());
  json obj = {{"text", result.text},
              {"attempt_count", result.attempt_count},
              {"latency", result.latency}};
  auto tmp = path;
  tmp += ".tmp";
  write_text_file(tmp, obj.dump());
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Backends

Backend::Backend(BackendSpec spec) : spec_(std::move(spec)) {
  validate(spec_);
}

CompletionResult Backend::complete(const std::string& prompt,
                                   const JobContext* ctx) {
  {
    std::unique_lock lock(slots_mutex_);
    slots_cv_.wait(lock, [&] { return in_flight_ < spec_.max_in_flight; });
    ++in_flight_;
  }
  calls_.fetch_add(1);
  try {
    CompletionResult result = run(prompt, ctx);
    {
      std::lock_guard lock(slots_mutex_);
      --in_flight_;
    }
    slots_cv_.notify_one();
    return result;
  } catch (...) {
    {
      std::lock_guard lock(slots_mutex_);
      --in_flight_;
    }
    slots_cv_.notify_one();
    throw;
  }
}

ScriptedBackend::ScriptedBackend(BackendSpec spec) : Backend(std::move(spec)) {
  if (spec_.kind != BackendSpec::Kind::scripted) {
    throw ParseError("ScriptedBackend requires kind=scripted");
  }
}

CompletionResult ScriptedBackend::run(const std::string& prompt,
                                      const JobContext* ctx) {
  CompletionResult r;
  if (ctx) {
    r.text = scripted_judge(*spec_.scripted, *ctx).raw_text;
  } else {
    // Generation: a fixed function of (backend, seed, prompt) so reruns and
    // resumed runs reproduce the same outputs.
    std::uint64_t h = hash_fields({spec_.backend_id, prompt,
                                   std::to_string(spec_.scripted->seed)});
    r.text = spec_.backend_id + " response " + to_hex16(h);
  }
  return r;
}

HttpBackend::HttpBackend(BackendSpec spec, CacheStore* cache)
    : Backend(std::move(spec)), cache_(cache) {
  if (spec_.kind != BackendSpec::Kind::http) {
    throw ParseError("HttpBackend requires kind=http");
  }
}

CompletionResult HttpBackend::run(const std::string& prompt,
                                  const JobContext* ctx) {
  const std::string scope = ctx ? to_string(ctx->setting) : "generate";
  if (cache_) {
    if (auto hit = cache_->lookup(spec_.backend_id, scope, prompt)) {
      return *hit;
    }
  }

  std::string token;
  if (!spec_.auth_env_var.empty()) {
    const char* v = std::getenv(spec_.auth_env_var.c_str());
    if (!v) {
      throw BackendError(spec_.backend_id +
                         ": auth env var unset: " + spec_.auth_env_var);
    }
    token = v;
  }

  auto scheme_end = spec_.endpoint.find("://");
  auto path_start = spec_.endpoint.find('/', scheme_end + 3);
  std::string base = path_start == std::string::npos
                         ? spec_.endpoint
                         : spec_.endpoint.substr(0, path_start);
  std::string path = path_start == std::string::npos
                         ? std::string("/")
                         : spec_.endpoint.substr(path_start);

  json body = {{"model", spec_.model.empty() ? spec_.backend_id : spec_.model},
               {"prompt", prompt},
               {"max_tokens", spec_.max_tokens}};
  std::string payload = body.dump();
  auto timeout = std::chrono::milliseconds(
      static_cast<long>(spec_.request_timeout * 1000));

  auto start = std::chrono::steady_clock::now();
  std::string last_error = "no attempt made";
  for (int attempt = 1; attempt <= spec_.max_retries + 1; ++attempt) {
    if (attempt > 1 && spec_.retry_backoff > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(
          spec_.retry_backoff * std::pow(2.0, attempt - 2)));
    }
    network_attempts_.fetch_add(1);

    httplib::Client client(base);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!token.empty()) {
      headers.emplace("Authorization", "Bearer " + token);
    }
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "connection error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("text") ||
        !reply.at("text").is_string()) {
      last_error = "response body lacks a \"text\" field";
      continue;
    }
    CompletionResult r;
    r.text = reply.at("text").get<std::string>();
    r.attempt_count = attempt;
    r.latency = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count();
    if (cache_) cache_->store(spec_.backend_id, scope, prompt, r);
    return r;
  }
  throw BackendError(spec_.backend_id + ": request failed after " +
                     std::to_string(spec_.max_retries + 1) + " attempt(s), " +
                     last_error);
}

std::unique_ptr<Backend> make_backend(const BackendSpec& spec,
                                      CacheStore* cache) {
  if (spec.kind == BackendSpec::Kind::http) {
    return std::make_unique<HttpBackend>(spec, cache);
  }
  return std::make_unique<ScriptedBackend>(spec);
}

}  // namespace pre::backend
