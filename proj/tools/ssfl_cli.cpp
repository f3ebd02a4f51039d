#include <CLI11.hpp>

#include "ssfl/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised federated learning simulator"};
  app.require_subcommand(1);

  ssfl::HarnessOptions opts;
  auto add_common = [&](CLI::App* cmd, bool needs_out) {
    cmd->add_option("--config", opts.config_path, "Config file (key=value); defaults when omitted");
    auto* out = cmd->add_option("--out", opts.out_dir, "Output directory");
    if (needs_out) out->required();
    cmd->add_option("--seed-offset", opts.seed_offset, "Added to every trial seed");
    cmd->add_flag("--sequential", opts.sequential, "Single-threaded deterministic mode");
  };

  auto* train = app.add_subcommand("train", "Run the configured method over all trial seeds");
  add_common(train, true);
  auto* ablate = app.add_subcommand("ablate", "Run the component ladder on shared seeds");
  add_common(ablate, true);
  auto* verify = app.add_subcommand("verify", "Bound, gradient, and aggregation checks");
  add_common(verify, false);
  auto* payload = app.add_subcommand("payload-report", "Uplink vs full-model payload sizes");
  add_common(payload, false);
  auto* gendata = app.add_subcommand("gen-data", "Export a dataset with manifest");
  add_common(gendata, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return ssfl::cmd_train(opts);
    if (ablate->parsed()) return ssfl::cmd_ablate(opts);
    if (verify->parsed()) return ssfl::cmd_verify(opts);
    if (payload->parsed()) return ssfl::cmd_payload_report(opts);
    if (gendata->parsed()) return ssfl::cmd_gen_data(opts);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
