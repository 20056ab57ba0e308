#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pre/backend.hpp"
#include "pre/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Peer-review evaluation pipeline for language models"};
  app.require_subcommand(1);

  std::string config_path;
  std::string setting;
  std::string cache_dir;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool auto_exam = false;
  bool resume = false;

  auto* config_opt =
      app.add_option("--config", config_path, "Run configuration JSON file");
  auto* setting_opt =
      app.add_option("--setting", setting, "Judging setting for this run")
          ->check(CLI::IsMember({"pairwise", "point5", "point100"}));
  auto* seed_opt = app.add_option("--seed", seed, "Master seed override");
  app.add_flag("--auto-exam", auto_exam,
               "Add the order-swap consistency probe to the exam");
  app.add_flag("--resume", resume,
               "Keep existing review records and only run missing jobs");
  auto* cache_opt =
      app.add_option("--cache-dir", cache_dir, "Response cache directory");
  auto* out_opt = app.add_option("--out", out_dir, "Artifact directory");

  for (const char* name : {"exam", "review", "chair", "report", "run-all"}) {
    app.add_subcommand(name)->fallthrough();
  }
  app.get_subcommand("exam")->description("Qualify reviewer candidates");
  app.get_subcommand("review")->description("Execute all review jobs");
  app.get_subcommand("chair")->description("Aggregate records, rank evaluatees");
  app.get_subcommand("report")->description("Metrics and bias diagnostics");
  app.get_subcommand("run-all")->description("All four stages in order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pre::harness::kExitConfig;
  }

  if (config_opt->count() == 0) {
    std::cerr << "error: --config is required\n";
    return pre::harness::kExitConfig;
  }

  pre::harness::RunConfig config;
  try {
    config = pre::harness::load_run_config(config_path);
    if (setting_opt->count() > 0) {
      config.setting = pre::backend::setting_from_string(setting);
    }
    if (seed_opt->count() > 0) config.seed = seed;
    if (auto_exam &&
        config.auto_exam_policy == pre::harness::AutoExamPolicy::off) {
      config.auto_exam_policy = pre::harness::AutoExamPolicy::both;
    }
    if (cache_opt->count() > 0) config.cache_dir = cache_dir;
    if (out_opt->count() > 0) config.out_dir = out_dir;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pre::harness::kExitConfig;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  return pre::harness::run_command(name, config, resume);
}
