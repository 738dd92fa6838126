#include "acp/experiments.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "acp/execution.hpp"
#include "acp/ledger.hpp"

using namespace acp;

TEST_CASE("exp1: cooldown evasion fails after three denials", "[experiments]") {
  const ExperimentReport report = run_exp1();
  CHECK(report.pass);
  CHECK(report.decision_counts.at("approved") == 2);
  CHECK(report.decision_counts.at("denied") == 3);
  CHECK(report.decision_counts.at("cooldown") == 495);
  CHECK(report.decision_counts.at("escalated") == 0);
  CHECK(report.milestones.at("first_block") == 5);
  REQUIRE(report.trajectory.size() == 500);
  CHECK(report.trajectory[0].rs == 80);
  // The three real denials land on the high-risk even indices 0, 2, 4.
  for (std::int64_t idx : {0, 2, 4}) {
    CHECK(report.trajectory[static_cast<std::size_t>(idx)].decision == Decision::DENIED);
  }
  for (std::int64_t idx : {1, 3}) {
    CHECK(report.trajectory[static_cast<std::size_t>(idx)].decision == Decision::APPROVED);
  }
}

TEST_CASE("exp1: recorded denial count never decreases", "[experiments]") {
  const ExperimentReport report = run_exp1();
  std::int64_t denials = 0;
  for (const TrajectoryPoint& p : report.trajectory) {
    const std::int64_t before = denials;
    if (p.decision == Decision::DENIED) ++denials;
    CHECK(denials >= before);
  }
  CHECK(denials == 3);
}

TEST_CASE("exp2: 3N free denials, 7N blocked", "[experiments]") {
  // N=10 is not a published row; verified here against a brute-force
  // per-agent simulation before pinning.
  for (int n : {1, 10, 100}) {
    const ExperimentReport report = run_exp2(n);
    INFO("agents=" << n);
    CHECK(report.pass);
    CHECK(report.decision_counts.at("denied") == 3 * n);
    CHECK(report.decision_counts.at("cooldown") == 7 * n);
  }
}

TEST_CASE("exp2: brute-force oracle for the untabulated N", "[experiments]") {
  // Independent simulation: per agent, a high-risk request denies until three
  // denials accumulate, after which every request is blocked.
  const int n = 10, per_agent = 10;
  int denied = 0, blocked = 0;
  for (int a = 0; a < n; ++a) {
    int agent_denials = 0;
    for (int i = 0; i < per_agent; ++i) {
      if (agent_denials >= 3) {
        ++blocked;
      } else {
        ++denied;
        ++agent_denials;
      }
    }
  }
  const ExperimentReport report = run_exp2(n, per_agent);
  CHECK(report.decision_counts.at("denied") == denied);
  CHECK(report.decision_counts.at("cooldown") == blocked);
}

TEST_CASE("exp4: sequential replay trajectory", "[experiments]") {
  const ExperimentReport report = run_exp4(Exp4Case::SEQUENTIAL);
  CHECK(report.pass);
  REQUIRE(report.trajectory.size() == 10);
  const std::vector<int> expected{55, 55, 55, 70, 70, 70};
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(report.trajectory[i].rs == expected[i]);
  }
  CHECK(report.trajectory[3].decision == Decision::DENIED);  // rule 3 fires at request 4
  for (std::size_t i = 6; i < 10; ++i) {
    CHECK(report.trajectory[i].decision == Decision::COOLDOWN_ACTIVE);
  }
  CHECK(report.decision_counts.at("escalated") == 3);
  CHECK(report.decision_counts.at("denied") == 3);
  CHECK(report.decision_counts.at("cooldown") == 4);
}

TEST_CASE("exp4: baseline with unique resources stays anomaly-free", "[experiments]") {
  const ExperimentReport report = run_exp4(Exp4Case::BASELINE);
  CHECK(report.pass);
  CHECK(report.decision_counts.at("escalated") == 0);
  CHECK(report.decision_counts.at("denied") == 0);
  CHECK(report.decision_counts.at("cooldown") == 0);
}

TEST_CASE("exp4: near-identical replay evades the repeat rule", "[experiments]") {
  const ExperimentReport report = run_exp4(Exp4Case::NEAR_IDENTICAL);
  CHECK(report.pass);
  CHECK(report.decision_counts.at("escalated") == 10);
  CHECK(report.decision_counts.at("denied") == 0);
  CHECK(report.decision_counts.at("cooldown") == 0);
  for (const TrajectoryPoint& p : report.trajectory) CHECK(p.rs == 55);
}

TEST_CASE("exp4: concurrent replay cannot outrun accumulation", "[experiments]") {
  const ExperimentReport report = run_exp4(Exp4Case::CONCURRENT);
  CHECK(report.pass);
  CHECK(report.decision_counts.at("escalated") == 3);
  CHECK(report.decision_counts.at("denied") == 3);
  CHECK(report.decision_counts.at("cooldown") == 14);
}

TEST_CASE("exp5: stateful vs stateless decision breakdown", "[experiments]") {
  const ExperimentReport report = run_exp5();
  CHECK(report.pass);
  CHECK(report.decision_counts.at("approved") == 2);
  CHECK(report.decision_counts.at("escalated") == 8);
  CHECK(report.decision_counts.at("denied") == 3);
  CHECK(report.decision_counts.at("cooldown") == 487);
  CHECK(report.milestones.at("first_escalated") == 3);
  CHECK(report.milestones.at("first_denied") == 11);
  CHECK(report.milestones.at("cooldown_from") == 14);
  CHECK(report.milestones.at("stateless_approved") == 500);
}

TEST_CASE("exp5: ledger records one event per step plus genesis", "[experiments]") {
  const PolicyConfig policy = default_policy();
  InMemoryStore store;
  LedgerChain chain;
  for (int i = 0; i < 500; ++i) {
    EvalRequest req;
    req.agent_id = "transfer-agent";
    req.capability = "acp:cap:financial.transfer";
    req.resource = "accounts/ops";
    req.resource_class = ResourceClass::PUBLIC;
    req.timestamp = kFixedClock;
    record_outcome(chain, process(req, store, policy, UpdateOrdering::UPDATE_THEN_EVALUATE),
                   req);
  }
  CHECK(chain.size() == 501);
  CHECK(verify_chain(chain).ok);
}

TEST_CASE("exp6: state mixing under RISK_2_0, isolation under RISK_3_0", "[experiments]") {
  const ExperimentReport r2 = run_exp6(EngineVersion::RISK_2_0);
  CHECK(r2.pass);
  CHECK(r2.milestones.at("control_rs") == 50);
  CHECK(r2.milestones.at("probe_rs") == 70);
  CHECK(r2.milestones.at("probe_rule1") == 1);
  CHECK(r2.milestones.at("probe_rule3") == 0);
  CHECK(r2.milestones.at("threshold_probe_fanom") == 0);

  const ExperimentReport r3 = run_exp6(EngineVersion::RISK_3_0);
  CHECK(r3.pass);
  CHECK(r3.milestones.at("probe_rs") == 50);
  CHECK(r3.milestones.at("probe_rule1") == 0);
}

TEST_CASE("exp7: published table across scenarios and versions", "[experiments]") {
  struct Row {
    Exp7Scenario scenario;
    EngineVersion version;
    int rs;
    bool denied;
  };
  const std::vector<Row> table = {
      {Exp7Scenario::CLEAN, EngineVersion::RISK_2_0, 50, false},
      {Exp7Scenario::CLEAN, EngineVersion::RISK_3_0, 50, false},
      {Exp7Scenario::MIXING, EngineVersion::RISK_2_0, 70, true},
      {Exp7Scenario::MIXING, EngineVersion::RISK_3_0, 50, false},
      {Exp7Scenario::SAME_CONTEXT_BURST, EngineVersion::RISK_2_0, 85, true},
      {Exp7Scenario::SAME_CONTEXT_BURST, EngineVersion::RISK_3_0, 85, true},
  };
  for (const Row& row : table) {
    const ExperimentReport report = run_exp7(row.scenario, row.version);
    INFO("scenario=" << static_cast<int>(row.scenario)
                     << " version=" << to_string(row.version));
    CHECK(report.pass);
    CHECK(report.milestones.at("probe_rs") == row.rs);
    CHECK(report.milestones.at("probe_denied") == (row.denied ? 1 : 0));
  }
}

TEST_CASE("fixed-clock experiments are bit-deterministic", "[experiments]") {
  CHECK(run_exp1() == run_exp1());
  CHECK(run_exp2(3) == run_exp2(3));
  CHECK(run_exp4(Exp4Case::SEQUENTIAL) == run_exp4(Exp4Case::SEQUENTIAL));
  CHECK(run_exp5() == run_exp5());
  CHECK(run_exp6() == run_exp6());
  CHECK(run_exp7(Exp7Scenario::MIXING, EngineVersion::RISK_3_0) ==
        run_exp7(Exp7Scenario::MIXING, EngineVersion::RISK_3_0));
}

TEST_CASE("exp3b: single short run reports throughput and latency", "[experiments]") {
  const ExperimentReport report =
      run_exp3b(std::chrono::microseconds(500), /*workers=*/4, /*total_requests=*/200);
  CHECK(report.pass);
  REQUIRE(report.throughput_rps.has_value());
  CHECK(*report.throughput_rps > 0);
  // Four reads per evaluation: mean latency must be at least 4x the delay.
  CHECK(report.milestones.at("mean_eval_latency_us") >= 4 * 500);
  CHECK(report.decision_counts.at("approved") == report.milestones.at("requests"));
}

TEST_CASE("decision counts sum to the main-run request total", "[experiments]") {
  auto total = [](const ExperimentReport& r) {
    std::int64_t sum = 0;
    for (const auto& [k, v] : r.decision_counts) {
      (void)k;
      sum += v;
    }
    return sum;
  };
  CHECK(total(run_exp1()) == 500);
  CHECK(total(run_exp2(10)) == 100);
  CHECK(total(run_exp4(Exp4Case::SEQUENTIAL)) == 10);
  CHECK(total(run_exp4(Exp4Case::CONCURRENT)) == 20);
  CHECK(total(run_exp5()) == 500);
  CHECK(total(run_exp6()) == 12);  // 11 priming requests plus the probe
  CHECK(total(run_exp7(Exp7Scenario::SAME_CONTEXT_BURST, EngineVersion::RISK_2_0)) == 11);
}

TEST_CASE("emit_report: unwritable path is an error", "[experiments]") {
  const ExperimentReport report = run_exp2(1);
  CHECK_THROWS_AS(emit_report(report, "/nonexistent-dir/report.json", ReportFormat::JSON),
                  LoadError);
}

TEST_CASE("report json round trip", "[experiments]") {
  ExperimentReport report = run_exp5();
  const nlohmann::json j = report_to_json(report);
  const ExperimentReport back = report_from_json(j);
  CHECK(back == report);

  const std::string path = "test_report.json";
  emit_report(report, path, ReportFormat::JSON);
  std::ifstream in(path);
  nlohmann::json loaded;
  in >> loaded;
  CHECK(report_from_json(loaded) == report);
  std::remove(path.c_str());
}

TEST_CASE("report csv has the fixed header and counts", "[experiments]") {
  const ExperimentReport report = run_exp5();
  const std::string csv = report_to_csv(report);
  CHECK(csv.rfind("experiment_id,approved,escalated,denied,cooldown,pass\n", 0) == 0);
  CHECK(csv.find("EXP5,2,8,3,487,true") != std::string::npos);
}

TEST_CASE("exp5 json report carries the milestones", "[experiments]") {
  const nlohmann::json j = report_to_json(run_exp5());
  CHECK(j.at("milestones").at("first_escalated") == 3);
  CHECK(j.at("milestones").at("first_denied") == 11);
  CHECK(j.at("milestones").at("cooldown_from") == 14);
}

TEST_CASE("run_experiment dispatch", "[experiments]") {
  ExperimentConfig config;
  config.id = ExperimentId::EXP2;
  config.agents = 2;
  const ExperimentReport report = run_experiment(config);
  CHECK(report.experiment_id == "EXP2");
  CHECK(report.decision_counts.at("denied") == 6);

  config.id = ExperimentId::EXP1;
  config.total = -1;
  CHECK_THROWS_AS(run_experiment(config), ValidationError);
}
