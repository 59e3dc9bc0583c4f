// Command-line driver for the offline pipeline and macro simulations.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pcrnn/error.hpp"
#include "pcrnn/pipeline.hpp"
#include "pcrnn/util.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool force = false;
  std::string mode;
  std::string out;
};

void add_common(CLI::App* sub, Flags& f, bool with_mode) {
  sub->add_option("--config", f.config, "Pipeline configuration JSON")->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", f.seed, "Global seed (overrides the config)");
  sub->add_flag("--force", f.force, "Recompute even when outputs exist");
  sub->add_option("--out", f.out, "Output directory (overrides the config)");
  if (with_mode)
    sub->add_option("--mode", f.mode, "Constitutive binding for every element")
        ->check(CLI::IsMember({"surrogate", "benchmark", "mono"}));
}

int run(const std::string& stage, const Flags& f) {
  namespace pl = pcrnn::pipeline;
  const auto config = pl::load_config(f.config, f.seed,
                                      f.out.empty() ? std::nullopt : std::optional<pl::fs::path>(f.out));
  pl::StageOptions opts;
  opts.force = f.force;
  opts.workers = pcrnn::worker_count();
  if (!f.mode.empty()) opts.mode = pcrnn::macro::parse_binding(f.mode);
  const auto r = pl::run_stage(stage, config, opts);
  std::cout << stage << (r.skipped ? ": up to date, " : ": done, ") << "manifest " << r.manifest.string() << "\n";
  return r.status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-constrained recurrent surrogate pipeline"};
  app.require_subcommand(1);

  Flags flags;
  const std::pair<const char*, const char*> stages[] = {
      {"generate-paths", "Sample constrained strain paths"},
      {"build-db", "Run the RVE solver along every path"},
      {"train", "Fit the recurrent surrogate to the database"},
      {"evaluate", "Test-split errors of the trained surrogate"},
      {"simulate", "Macro Newton solve of the configured problem"}};
  for (const auto& [stage, help] : stages)
    add_common(app.add_subcommand(stage, help), flags, std::string(stage) == "simulate");

  std::string artifact;
  auto* validate = app.add_subcommand("validate", "Schema and invariant check of an artifact; prints a JSON report");
  validate->add_option("path", artifact, "Artifact file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    if (validate->parsed()) {
      const auto rep = pcrnn::pipeline::validate_artifact(artifact);
      std::cout << rep.to_json().dump(2) << "\n";
      return rep.ok() ? 0 : 1;
    }
    for (const auto& stage : pcrnn::pipeline::stage_names())
      if (app.got_subcommand(stage)) return run(stage, flags);
  } catch (const pcrnn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
