// acpctl: command-line front end for the admission engine.
//
//   acpctl run-vectors <path> [--strict] [--policy FILE] [--out FILE]
//   acpctl run-experiment <EXP1|EXP2|EXP3B|EXP4|EXP5|EXP6|EXP7> [options]
//   acpctl verify-ledger <file> [--verify-key HEX]
//   acpctl serve [--host H] [--port P] [--policy FILE] [--ordering O] [--ledger FILE]
//   acpctl hash-policy <file>
//
// Exit codes: 0 on success/PASS, 1 on FAIL or broken ledger, 2 on usage or
// input errors.

#include <CLI11.hpp>
#include <httplib.h>

#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>

#include "acp/acp.hpp"
#include "acp/service.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

acp::PolicyConfig resolve_policy(const std::string& policy_flag) {
  if (!policy_flag.empty()) return acp::load_policy_file(policy_flag);
  if (const char* env = std::getenv("ACP_POLICY_FILE"); env != nullptr && *env != '\0') {
    return acp::load_policy_file(env);
  }
  return acp::default_policy();
}

int cmd_run_vectors(const std::string& path, bool strict, const std::string& policy_flag,
                    const std::string& out_path) {
  const acp::PolicyConfig policy = resolve_policy(policy_flag);
  const std::vector<acp::SequenceVector> suite = acp::load_suite(path);
  if (suite.empty()) {
    std::printf("no vectors found at %s\n", path.c_str());
    return kExitPass;
  }

  nlohmann::json machine = nlohmann::json::array();
  int passed = 0;
  for (const acp::SequenceVector& vec : suite) {
    const acp::RunReport report = acp::run_vector(vec, policy, strict);
    if (report.overall_pass) ++passed;
    std::printf("%s\n", acp::summarize(report).c_str());
    nlohmann::json steps = nlohmann::json::array();
    for (const acp::StepReport& sr : report.steps) {
      nlohmann::json step = {{"executed", sr.executed}, {"pass", sr.pass}};
      if (sr.executed) {
        step["decision"] = acp::to_string(sr.actual);
        step["risk_score"] = sr.actual_rs;
        step["expected_decision"] = acp::to_string(sr.expected);
        if (sr.expected_rs.has_value()) step["expected_risk_score"] = *sr.expected_rs;
      }
      steps.push_back(std::move(step));
    }
    machine.push_back({{"vector_id", report.vector_id},
                       {"pass", report.overall_pass},
                       {"strict", report.strict},
                       {"steps", std::move(steps)}});
  }
  std::printf("%d/%zu PASS\n", passed, suite.size());
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw acp::LoadError("cannot write report: " + out_path);
    out << machine.dump(2) << '\n';
  }
  return passed == static_cast<int>(suite.size()) ? kExitPass : kExitFail;
}

int cmd_run_experiment(const acp::ExperimentConfig& config, const std::string& out_path,
                       const std::string& format) {
  const acp::ExperimentReport report = acp::run_experiment(config);
  std::printf("%s: approved=%lld escalated=%lld denied=%lld cooldown=%lld %s\n",
              report.experiment_id.c_str(),
              static_cast<long long>(report.decision_counts.at("approved")),
              static_cast<long long>(report.decision_counts.at("escalated")),
              static_cast<long long>(report.decision_counts.at("denied")),
              static_cast<long long>(report.decision_counts.at("cooldown")),
              report.pass ? "PASS" : "FAIL");
  for (const auto& [name, value] : report.milestones) {
    std::printf("  %s = %lld\n", name.c_str(), static_cast<long long>(value));
  }
  if (report.throughput_rps.has_value()) {
    std::printf("  throughput_rps = %.0f\n", *report.throughput_rps);
  }
  if (!out_path.empty()) {
    acp::emit_report(report, out_path,
                     format == "csv" ? acp::ReportFormat::CSV : acp::ReportFormat::JSON);
  }
  return report.pass ? kExitPass : kExitFail;
}

int cmd_verify_ledger(const std::string& path, const std::string& verify_key_hex) {
  const std::vector<acp::LedgerEvent> events = acp::read_ledger_file(path);
  std::optional<acp::VerifyKey> key;
  if (!verify_key_hex.empty()) key = acp::VerifyKey::from_hex(verify_key_hex);
  const acp::ChainVerdict verdict =
      acp::verify_chain(std::span<const acp::LedgerEvent>(events), key ? &*key : nullptr);
  if (verdict.ok) {
    std::printf("ok: %zu events, chain verifies%s\n", events.size(),
                key ? " (signatures included)" : "");
    return kExitPass;
  }
  std::printf("broken at index %zu: %s\n", verdict.broken_at, verdict.reason.c_str());
  return kExitFail;
}

int cmd_serve(const std::string& host, int port, const std::string& policy_flag,
              const std::string& ordering_name, const std::string& ledger_path) {
  const acp::PolicyConfig policy = resolve_policy(policy_flag);
  auto store = std::make_shared<acp::InMemoryStore>();
  acp::AdmissionService service(policy, store, acp::ordering_from_string(ordering_name));
  if (!ledger_path.empty()) service.attach_ledger_file(ledger_path);

  httplib::Server server;
  service.register_routes(server);
  std::printf("listening on %s:%d (engine %s, policy %s)\n", host.c_str(), port,
              acp::to_string(policy.engine_version).c_str(), policy.policy_hash.c_str());
  std::fflush(stdout);
  if (!server.listen(host, port)) {
    std::fprintf(stderr, "failed to bind %s:%d\n", host.c_str(), port);
    return kExitUsage;
  }
  return kExitPass;
}

int cmd_hash_policy(const std::string& path) {
  const acp::PolicyConfig policy = acp::load_policy_file(path);
  std::printf("%s\n", policy.policy_hash.c_str());
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"admission control engine: conformance, experiments, ledger, service"};
  app.require_subcommand(1);

  // run-vectors
  std::string vectors_path;
  bool strict = false;
  std::string policy_flag;
  std::string out_path;
  auto* run_vectors = app.add_subcommand("run-vectors", "run a sequence-vector suite");
  run_vectors->add_option("path", vectors_path, "vector file or directory")->required();
  run_vectors->add_flag("--strict", strict, "abort each vector at the first mismatch");
  run_vectors->add_option("--policy", policy_flag, "policy JSON file (or ACP_POLICY_FILE)");
  run_vectors->add_option("--out", out_path, "write a machine-readable report");

  // run-experiment
  std::string experiment_name;
  acp::ExperimentConfig config;
  std::string exp_case = "SEQUENTIAL";
  std::string exp_scenario = "MIXING";
  std::string exp_version = "RISK_2_0";
  std::string exp_out;
  std::string exp_format = "json";
  auto* run_experiment = app.add_subcommand("run-experiment", "run one experiment");
  run_experiment->add_option("id", experiment_name, "EXP1|EXP2|EXP3B|EXP4|EXP5|EXP6|EXP7")
      ->required();
  run_experiment->add_option("--total", config.total, "request count (EXP1, EXP5)");
  run_experiment->add_option("--agents", config.agents, "agent count (EXP2)");
  run_experiment->add_option("--per-agent", config.per_agent, "requests per agent (EXP2)");
  run_experiment->add_option("--delay-us", config.delay_us, "injected delay per call (EXP3B)");
  run_experiment->add_option("--workers", config.workers, "worker count (EXP3B)");
  run_experiment->add_option("--case", exp_case,
                             "EXP4 case: BASELINE|SEQUENTIAL|CONCURRENT|NEAR_IDENTICAL");
  run_experiment->add_option("--scenario", exp_scenario,
                             "EXP7 scenario: CLEAN|MIXING|SAME_CONTEXT_BURST");
  run_experiment->add_option("--engine-version", exp_version, "RISK_2_0|RISK_3_0");
  run_experiment->add_option("--out", exp_out, "write the report to a file");
  run_experiment->add_option("--format", exp_format, "json|csv")
      ->check(CLI::IsMember({"json", "csv"}));

  // verify-ledger
  std::string ledger_file;
  std::string verify_key_hex;
  auto* verify_ledger = app.add_subcommand("verify-ledger", "verify an NDJSON ledger file");
  verify_ledger->add_option("file", ledger_file, "ledger file")->required();
  verify_ledger->add_option("--verify-key", verify_key_hex,
                            "hex Ed25519 public key for signature checks");

  // serve
  std::string host = "0.0.0.0";
  int port = 8080;
  std::string serve_policy;
  std::string ordering_name = "EVALUATE_THEN_UPDATE";
  std::string serve_ledger;
  auto* serve = app.add_subcommand("serve", "run the HTTP admission service");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "bind port");
  serve->add_option("--policy", serve_policy, "policy JSON file (or ACP_POLICY_FILE)");
  serve->add_option("--ordering", ordering_name,
                    "EVALUATE_THEN_UPDATE|UPDATE_THEN_EVALUATE");
  serve->add_option("--ledger", serve_ledger, "persist events to this NDJSON file");

  // hash-policy
  std::string hash_policy_file;
  auto* hash_policy = app.add_subcommand("hash-policy", "print the hash of a policy file");
  hash_policy->add_option("file", hash_policy_file, "policy JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the synopsis / error
    return kExitUsage;
  }

  try {
    if (run_vectors->parsed()) {
      return cmd_run_vectors(vectors_path, strict, policy_flag, out_path);
    }
    if (run_experiment->parsed()) {
      config.id = acp::experiment_id_from_string(experiment_name);
      config.exp4_case = acp::exp4_case_from_string(exp_case);
      config.exp7_scenario = acp::exp7_scenario_from_string(exp_scenario);
      config.version = acp::engine_version_from_string(exp_version);
      if (config.id == acp::ExperimentId::EXP3B) config.clock_mode = acp::ClockMode::REAL;
      return cmd_run_experiment(config, exp_out, exp_format);
    }
    if (verify_ledger->parsed()) {
      return cmd_verify_ledger(ledger_file, verify_key_hex);
    }
    if (serve->parsed()) {
      return cmd_serve(host, port, serve_policy, ordering_name, serve_ledger);
    }
    if (hash_policy->parsed()) {
      return cmd_hash_policy(hash_policy_file);
    }
  } catch (const acp::LoadError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const acp::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFail;
  }
  return kExitUsage;
}
