#include "chainfolio/config.hpp"
#include "chainfolio/error.hpp"
#include "chainfolio/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

namespace cf = chainfolio;

struct Options {
  std::string config_path = "chainfolio.conf";
  std::string stages;
  std::optional<unsigned> workers;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
  bool quiet = false;
};

cf::PipelineConfig effective_config(const Options& opt) {
  auto cfg = cf::load_config(opt.config_path);
  if (opt.workers) cfg.workers = *opt.workers;
  if (opt.seed) {
    cfg.seed = *opt.seed;
    cfg.synth.seed = *opt.seed;
  }
  cfg.validate();
  return cfg;
}

void print_results(const std::vector<cf::pipeline::StageResult>& results) {
  for (const auto& r : results) {
    std::cout << fmt::format("{}: {} computed, {} up to date\n", cf::pipeline::to_string(r.stage), r.computed,
                             r.skipped);
    for (const auto& note : r.notes) std::cout << "  " << note << '\n';
  }
}

int execute(const Options& opt, const std::vector<cf::pipeline::Stage>& stages) {
  const auto cfg = effective_config(opt);
  print_results(cf::pipeline::run(cfg, stages));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reconstructs on-chain portfolios and measures their distance to the efficient frontier."};
  app.require_subcommand(1);
  Options opt;
  app.add_option("-c,--config", opt.config_path, "Configuration file (key = value)")->capture_default_str();
  app.add_option("-w,--workers", opt.workers, "Worker threads; results do not depend on it")
      ->check(CLI::Range(1u, 1024u));
  app.add_option("--seed", opt.seed, "Overrides the configured seed");
  app.add_flag("-v,--verbose", opt.verbose, "Debug logging");
  app.add_flag("-q,--quiet", opt.quiet, "Only log errors");

  std::optional<cf::pipeline::Stage> single;
  for (const auto stage : {cf::pipeline::Stage::Synth, cf::pipeline::Stage::Ingest, cf::pipeline::Stage::Snapshot,
                           cf::pipeline::Stage::Optimize, cf::pipeline::Stage::Metrics, cf::pipeline::Stage::Report,
                           cf::pipeline::Stage::Validate}) {
    auto* sub = app.add_subcommand(std::string(cf::pipeline::to_string(stage)),
                                   fmt::format("Run the {} stage", cf::pipeline::to_string(stage)));
    sub->callback([&single, stage] { single = stage; });
  }
  auto* run = app.add_subcommand("run", "Run several stages in dependency order");
  run->add_option("-s,--stages", opt.stages, "Comma-separated stages, or 'all'")->default_val("all");
  auto* show = app.add_subcommand("config", "Print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  spdlog::set_default_logger(spdlog::stderr_color_mt("chainfolio"));
  spdlog::set_level(opt.quiet ? spdlog::level::err : opt.verbose ? spdlog::level::debug : spdlog::level::info);
  try {
    if (show->parsed()) {
      std::cout << cf::describe(effective_config(opt));
      return 0;
    }
    if (run->parsed()) return execute(opt, cf::pipeline::parse_stage_list(opt.stages.empty() ? "all" : opt.stages));
    return execute(opt, {*single});
  } catch (const cf::InputError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
}
