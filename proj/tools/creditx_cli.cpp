// creditx — command-line driver for the credit-scoring pipeline.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "creditx/pipeline.hpp"
#include "creditx/synthetic.hpp"

namespace {

using creditx::pipeline::PipelineConfig;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file (flat dotted keys or nested objects)");
  cmd->add_option("--seed", f.seed, "global seed; overrides the config");
  cmd->add_option("--out", f.out, "output directory; overrides the config");
  cmd->add_option("--data", f.data, "directory holding clients/accounts/transactions/loans CSVs");
  cmd->add_option("--set", f.overrides, "override a config key, e.g. --set model.learning_rate=0.05");
}

// File first, then flags, so the command line always wins.
PipelineConfig resolve(const CommonFlags& f) {
  PipelineConfig c = f.config.empty() ? PipelineConfig{} : PipelineConfig::load(f.config);
  for (const auto& kv : f.overrides) c.set_assignment(kv);
  if (f.seed) c.seed = f.seed;
  if (!f.out.empty()) c.out_dir = f.out;
  if (!f.data.empty()) c.data_dir = f.data;
  return c;
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const creditx::ConfigError*>(&e)) return 2;
  if (dynamic_cast<const creditx::DataError*>(&e)) return 3;
  return 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explainable credit scoring: features, selection, resampling, models, SHAP"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string stage;
  for (const auto& name : creditx::pipeline::stage_names()) {
    auto* cmd = app.add_subcommand(name, "run the pipeline through '" + name + "'");
    add_common(cmd, flags);
    cmd->callback([&stage, name] { stage = name; });
  }

  creditx::synthetic::LedgerSpec ledger;
  std::string synth_out;
  auto* synth = app.add_subcommand("synthesize", "write a synthetic ledger fixture as CSV");
  synth->add_option("--out", synth_out, "target directory")->required();
  synth->add_option("--accounts", ledger.accounts, "number of accounts");
  synth->add_option("--bad-rate", ledger.bad_rate, "share of bad labels");
  synth->add_option("--inactive", ledger.inactive_accounts, "accounts without transactions");
  synth->add_option("--unlabeled", ledger.unlabeled_accounts, "accounts without an outcome");
  synth->add_option("--seed", ledger.seed, "generator seed");
  synth->callback([&stage] { stage = "synthesize"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (stage == "synthesize") {
      creditx::ingest::write_bundle(creditx::synthetic::generate_ledger(ledger), synth_out);
      std::cout << "wrote synthetic ledger (" << ledger.accounts << " accounts) to " << synth_out << "\n";
      return 0;
    }
    const auto config = resolve(flags);
    const auto written = creditx::pipeline::run_stage(stage, config);
    std::cout << stage << ": " << written.size() << " artifacts in " << config.out_dir << " (config "
              << config.hash() << ")\n";
    for (const auto& w : written) std::cout << "  " << w << "\n";
    if (stage == "select") {
      std::ifstream table(std::filesystem::path(config.out_dir) / "selection.txt");
      std::cout << "\n" << table.rdbuf();
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  }
}
