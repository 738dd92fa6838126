#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "acp/errors.hpp"
#include "acp/execution.hpp"
#include "acp/policy.hpp"
#include "acp/risk.hpp"
#include "acp/trace_store.hpp"

namespace acp {

inline constexpr std::int64_t kFixedClock = 1'700'000'000;

enum class ExperimentId { EXP1, EXP2, EXP3B, EXP4, EXP5, EXP6, EXP7 };
enum class Exp4Case { BASELINE, SEQUENTIAL, CONCURRENT, NEAR_IDENTICAL };
enum class Exp7Scenario { CLEAN, MIXING, SAME_CONTEXT_BURST };
enum class ClockMode { FIXED, REAL };

inline std::string to_string(ExperimentId id) {
  switch (id) {
    case ExperimentId::EXP1: return "EXP1";
    case ExperimentId::EXP2: return "EXP2";
    case ExperimentId::EXP3B: return "EXP3B";
    case ExperimentId::EXP4: return "EXP4";
    case ExperimentId::EXP5: return "EXP5";
    case ExperimentId::EXP6: return "EXP6";
    case ExperimentId::EXP7: return "EXP7";
  }
  return "EXP1";
}

inline ExperimentId experiment_id_from_string(std::string_view s) {
  if (s == "EXP1") return ExperimentId::EXP1;
  if (s == "EXP2") return ExperimentId::EXP2;
  if (s == "EXP3B") return ExperimentId::EXP3B;
  if (s == "EXP4") return ExperimentId::EXP4;
  if (s == "EXP5") return ExperimentId::EXP5;
  if (s == "EXP6") return ExperimentId::EXP6;
  if (s == "EXP7") return ExperimentId::EXP7;
  throw ValidationError("unknown experiment id: " + std::string(s));
}

inline Exp4Case exp4_case_from_string(std::string_view s) {
  if (s == "BASELINE") return Exp4Case::BASELINE;
  if (s == "SEQUENTIAL") return Exp4Case::SEQUENTIAL;
  if (s == "CONCURRENT") return Exp4Case::CONCURRENT;
  if (s == "NEAR_IDENTICAL") return Exp4Case::NEAR_IDENTICAL;
  throw ValidationError("unknown EXP4 case: " + std::string(s));
}

inline Exp7Scenario exp7_scenario_from_string(std::string_view s) {
  if (s == "CLEAN") return Exp7Scenario::CLEAN;
  if (s == "MIXING") return Exp7Scenario::MIXING;
  if (s == "SAME_CONTEXT_BURST") return Exp7Scenario::SAME_CONTEXT_BURST;
  throw ValidationError("unknown EXP7 scenario: " + std::string(s));
}

struct TrajectoryPoint {
  std::int64_t index = 0;
  Decision decision = Decision::APPROVED;
  int rs = 0;

  bool operator==(const TrajectoryPoint&) const = default;
};

// Machine-readable experiment outcome. decision_counts always carries the
// four decision buckets and sums to the number of requests in the main run;
// milestones holds per-experiment named integers (first-occurrence indices
// and auxiliary metrics).
struct ExperimentReport {
  std::string experiment_id;
  std::map<std::string, std::int64_t> decision_counts;
  std::vector<TrajectoryPoint> trajectory;
  std::map<std::string, std::int64_t> milestones;
  std::optional<double> throughput_rps;
  bool pass = false;

  bool operator==(const ExperimentReport&) const = default;
};

namespace detail {

inline std::map<std::string, std::int64_t> zero_counts() {
  return {{"approved", 0}, {"escalated", 0}, {"denied", 0}, {"cooldown", 0}};
}

inline void bump(std::map<std::string, std::int64_t>& counts, Decision d) {
  switch (d) {
    case Decision::APPROVED: ++counts["approved"]; break;
    case Decision::ESCALATED: ++counts["escalated"]; break;
    case Decision::DENIED: ++counts["denied"]; break;
    case Decision::COOLDOWN_ACTIVE: ++counts["cooldown"]; break;
  }
}

inline EvalRequest make_request(std::string agent, std::string capability,
                                std::string resource, ResourceClass rc,
                                std::int64_t ts = kFixedClock) {
  EvalRequest req;
  req.agent_id = std::move(agent);
  req.capability = std::move(capability);
  req.resource = std::move(resource);
  req.resource_class = rc;
  req.autonomy_level = 2;
  req.timestamp = ts;
  return req;
}

}  // namespace detail

// Cooldown evasion: one agent alternates a high-risk request (even indices)
// with a low-risk one (odd indices), betting that interleaved approvals keep
// the denial counter from reaching the trigger. The counter is monotonic, so
// the third denial (indices 0, 2, 4) activates the cooldown and everything
// after index 4 is blocked at the short circuit.
inline ExperimentReport run_exp1(int total = 500) {
  if (total <= 0) throw ValidationError("EXP1 needs a positive request count");
  const PolicyConfig policy = default_policy();
  InMemoryStore store;

  ExperimentReport report;
  report.experiment_id = "EXP1";
  report.decision_counts = detail::zero_counts();

  std::int64_t first_block = -1;
  for (int i = 0; i < total; ++i) {
    const bool high_risk = i % 2 == 0;
    const EvalRequest req =
        high_risk
            ? detail::make_request("attacker-1", "acp:cap:financial.transfer",
                                   "accounts/primary", ResourceClass::RESTRICTED)
            : detail::make_request("attacker-1", "acp:cap:data.read", "docs/readme",
                                   ResourceClass::PUBLIC);
    const StepOutcome outcome =
        process(req, store, policy, UpdateOrdering::EVALUATE_THEN_UPDATE);
    detail::bump(report.decision_counts, outcome.result.decision);
    report.trajectory.push_back({i, outcome.result.decision, outcome.result.rs_final});
    if (first_block < 0 && outcome.result.decision == Decision::COOLDOWN_ACTIVE) {
      first_block = i;  // == requests processed before the first block
    }
  }
  report.milestones["first_block"] = first_block;

  report.pass = total == 500 && report.decision_counts["approved"] == 2 &&
                report.decision_counts["denied"] == 3 &&
                report.decision_counts["cooldown"] == 495 &&
                report.decision_counts["escalated"] == 0 && first_block == 5 &&
                !report.trajectory.empty() && report.trajectory[0].rs == 80;
  return report;
}

// Distributed multi-agent attack: N distinct agents each push 10 high-risk
// requests, interleaved round-robin. Counters are agent-scoped, so each agent
// is blocked after exactly 3 denials: denied = 3N, blocked = 7N.
inline ExperimentReport run_exp2(int agents, int per_agent = 10) {
  if (agents <= 0 || per_agent <= 0) throw ValidationError("EXP2 needs positive counts");
  const PolicyConfig policy = default_policy();
  InMemoryStore store;

  ExperimentReport report;
  report.experiment_id = "EXP2";
  report.decision_counts = detail::zero_counts();

  std::vector<std::int64_t> denials_per_agent(static_cast<std::size_t>(agents), 0);
  std::vector<bool> blocked_seen(static_cast<std::size_t>(agents), false);
  bool per_agent_law_holds = true;

  std::int64_t index = 0;
  for (int round = 0; round < per_agent; ++round) {
    for (int a = 0; a < agents; ++a) {
      const EvalRequest req =
          detail::make_request("agent-" + std::to_string(a), "acp:cap:financial.transfer",
                               "accounts/primary", ResourceClass::RESTRICTED);
      const StepOutcome outcome =
          process(req, store, policy, UpdateOrdering::EVALUATE_THEN_UPDATE);
      detail::bump(report.decision_counts, outcome.result.decision);
      report.trajectory.push_back({index++, outcome.result.decision, outcome.result.rs_final});
      if (outcome.result.decision == Decision::DENIED) ++denials_per_agent[a];
      if (outcome.result.decision == Decision::COOLDOWN_ACTIVE) {
        blocked_seen[a] = true;
        // every block must come after exactly the trigger number of denials
        if (denials_per_agent[a] != policy.cooldown_trigger_denials) {
          per_agent_law_holds = false;
        }
      }
    }
  }

  report.milestones["agents"] = agents;
  report.pass = report.decision_counts["denied"] == 3LL * agents &&
                report.decision_counts["cooldown"] == 7LL * agents &&
                report.decision_counts["approved"] == 0 &&
                report.decision_counts["escalated"] == 0 && per_agent_law_holds;
  return report;
}

// Controlled latency injection: wraps the in-memory backend in a fixed
// per-call delay and measures evaluation throughput and latency under
// concurrent workers. Each non-cooldown evaluation makes four backend reads,
// so per-request latency tracks roughly 4x the injected per-call value.
// Evaluation only; the workload is all-approved so no state transitions are
// needed to keep the path identical across requests.
inline ExperimentReport run_exp3b(std::chrono::microseconds delay_per_call,
                                  int workers = 10, int total_requests = 0) {
  if (workers <= 0) throw ValidationError("EXP3B needs a positive worker count");
  if (delay_per_call.count() < 0) throw ValidationError("EXP3B delay must be non-negative");

  if (total_requests <= 0) {
    if (delay_per_call.count() == 0) {
      total_requests = 20000;
    } else {
      // Budget roughly 600 ms of measured wall time across the worker pool.
      const std::int64_t per_request_us = 4 * delay_per_call.count();
      total_requests = static_cast<int>(
          std::max<std::int64_t>(workers * 20, (600'000LL * workers) / per_request_us));
      total_requests = std::min(total_requests, 20000);
    }
  }
  const int warmup = delay_per_call.count() == 0 ? 1000 : workers * 4;

  const PolicyConfig policy = default_policy();
  InMemoryStore inner;
  DelayedStore store(inner, delay_per_call);

  ExperimentReport report;
  report.experiment_id = "EXP3B";
  report.decision_counts = detail::zero_counts();

  std::mutex mu;
  std::int64_t total_latency_ns = 0;
  auto counts = detail::zero_counts();

  auto worker_loop = [&](int worker_id, int n, bool measure) {
    std::int64_t local_latency = 0;
    auto local_counts = detail::zero_counts();
    for (int i = 0; i < n; ++i) {
      // Mixed approved workload: alternate two low-score capabilities over a
      // per-worker agent pool.
      const std::string agent = "w" + std::to_string(worker_id) + "-a" + std::to_string(i % 16);
      const EvalRequest req =
          i % 2 == 0
              ? detail::make_request(agent, "acp:cap:data.read", "docs/" + std::to_string(i),
                                     ResourceClass::PUBLIC,
                                     static_cast<std::int64_t>(std::time(nullptr)))
              : detail::make_request(agent, "acp:cap:financial.payment",
                                     "invoices/" + std::to_string(i), ResourceClass::PUBLIC,
                                     static_cast<std::int64_t>(std::time(nullptr)));
      const auto t0 = std::chrono::steady_clock::now();
      const EvalResult result = evaluate(req, store, policy);
      const auto t1 = std::chrono::steady_clock::now();
      if (measure) {
        local_latency += std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
        detail::bump(local_counts, result.decision);
      }
    }
    if (measure) {
      std::lock_guard lock(mu);
      total_latency_ns += local_latency;
      for (const auto& [k, v] : local_counts) counts[k] += v;
    }
  };

  // Warm-up pass, excluded from the measurement window.
  {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back(worker_loop, w, warmup / workers + 1, false);
    }
    for (auto& t : pool) t.join();
  }

  const int per_worker = total_requests / workers;
  const int measured = per_worker * workers;
  const auto wall0 = std::chrono::steady_clock::now();
  {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back(worker_loop, w, per_worker, true);
    }
    for (auto& t : pool) t.join();
  }
  const auto wall1 = std::chrono::steady_clock::now();

  const double wall_s =
      std::chrono::duration_cast<std::chrono::duration<double>>(wall1 - wall0).count();
  report.decision_counts = counts;
  report.throughput_rps = measured / wall_s;
  report.milestones["delay_us"] = delay_per_call.count();
  report.milestones["workers"] = workers;
  report.milestones["requests"] = measured;
  report.milestones["mean_eval_latency_us"] =
      measured > 0 ? total_latency_ns / measured / 1000 : 0;
  report.pass = counts["approved"] == measured;
  return report;
}

// Token replay: the same logical token resubmitted against a policy where its
// base score sits just below the denial band (base 55 with the sensitive
// class). Identical replays accumulate pattern count until the repeat rule
// lifts the score into denial and the cooldown closes the window; varying the
// resource suffix defeats the pattern key and the score never moves.
inline ExperimentReport run_exp4(Exp4Case which) {
  PolicyConfig policy = apply_policy_overrides(
      default_policy(), nlohmann::json{{"capability_base", {{"financial.transfer", 40}}}});

  ExperimentReport report;
  report.experiment_id = "EXP4";
  report.decision_counts = detail::zero_counts();

  auto run_one = [&](InMemoryStore& store, const EvalRequest& req) {
    const StepOutcome outcome =
        process(req, store, policy, UpdateOrdering::EVALUATE_THEN_UPDATE);
    detail::bump(report.decision_counts, outcome.result.decision);
    report.trajectory.push_back({static_cast<std::int64_t>(report.trajectory.size()),
                                 outcome.result.decision, outcome.result.rs_final});
  };

  switch (which) {
    case Exp4Case::BASELINE: {
      InMemoryStore store;
      for (int i = 0; i < 10; ++i) {
        run_one(store, detail::make_request("replayer", "acp:cap:data.read",
                                            "docs/" + std::to_string(i),
                                            ResourceClass::PUBLIC));
      }
      report.pass = report.decision_counts["escalated"] == 0 &&
                    report.decision_counts["denied"] == 0 &&
                    report.decision_counts["cooldown"] == 0;
      break;
    }
    case Exp4Case::SEQUENTIAL: {
      InMemoryStore store;
      for (int i = 0; i < 10; ++i) {
        run_one(store, detail::make_request("replayer", "acp:cap:financial.transfer",
                                            "accounts/sensitive-001",
                                            ResourceClass::SENSITIVE));
      }
      const std::vector<int> expected_rs{55, 55, 55, 70, 70, 70};
      bool trajectory_ok = report.trajectory.size() == 10;
      for (std::size_t i = 0; trajectory_ok && i < expected_rs.size(); ++i) {
        trajectory_ok = report.trajectory[i].rs == expected_rs[i];
      }
      for (std::size_t i = 6; trajectory_ok && i < 10; ++i) {
        trajectory_ok = report.trajectory[i].decision == Decision::COOLDOWN_ACTIVE;
      }
      report.pass = trajectory_ok && report.decision_counts["escalated"] == 3 &&
                    report.decision_counts["denied"] == 3 &&
                    report.decision_counts["cooldown"] == 4;
      break;
    }
    case Exp4Case::CONCURRENT: {
      // 5 workers x 4 identical requests. A harness mutex serializes each
      // process() step, matching the serialized-reads setting under which the
      // 3/3/14 split is deterministic: the requests are identical, so any
      // total order produces the same multiset of outcomes.
      InMemoryStore store;
      std::mutex step_mu;
      std::mutex agg_mu;
      auto counts = detail::zero_counts();
      std::vector<std::thread> pool;
      for (int w = 0; w < 5; ++w) {
        pool.emplace_back([&] {
          for (int i = 0; i < 4; ++i) {
            const EvalRequest req =
                detail::make_request("replayer", "acp:cap:financial.transfer",
                                     "accounts/sensitive-001", ResourceClass::SENSITIVE);
            StepOutcome outcome;
            {
              std::lock_guard step_lock(step_mu);
              outcome = process(req, store, policy, UpdateOrdering::EVALUATE_THEN_UPDATE);
            }
            std::lock_guard agg_lock(agg_mu);
            detail::bump(counts, outcome.result.decision);
          }
        });
      }
      for (auto& t : pool) t.join();
      report.decision_counts = counts;
      report.pass = counts["escalated"] == 3 && counts["denied"] == 3 &&
                    counts["cooldown"] == 14;
      break;
    }
    case Exp4Case::NEAR_IDENTICAL: {
      InMemoryStore store;
      for (int i = 0; i < 10; ++i) {
        char suffix[4];
        std::snprintf(suffix, sizeof(suffix), "%03d", i);
        run_one(store, detail::make_request("replayer", "acp:cap:financial.transfer",
                                            std::string("accounts/sensitive-") + suffix,
                                            ResourceClass::SENSITIVE));
      }
      bool all_escalated_55 = report.trajectory.size() == 10;
      for (const TrajectoryPoint& p : report.trajectory) {
        all_escalated_55 = all_escalated_55 && p.decision == Decision::ESCALATED && p.rs == 55;
      }
      report.pass = all_escalated_55 && report.decision_counts["escalated"] == 10 &&
                    report.decision_counts["denied"] == 0 &&
                    report.decision_counts["cooldown"] == 0;
      break;
    }
  }
  return report;
}

// Stateless vs. stateful admission: 500 identical, individually valid
// requests (base score 35, inside the approval band). The stateless arm runs
// the same evaluation against the null backend and approves everything; the
// stateful arm escalates once the repeat rule activates, denies once the rate
// rule stacks on top, and blocks the remainder after the cooldown triggers.
// State updates are recorded prior to each evaluation. Milestones are
// 1-based request ordinals.
inline ExperimentReport run_exp5(int total = 500) {
  if (total <= 0) throw ValidationError("EXP5 needs a positive request count");
  const PolicyConfig policy = default_policy();

  ExperimentReport report;
  report.experiment_id = "EXP5";
  report.decision_counts = detail::zero_counts();

  InMemoryStore store;
  for (int i = 1; i <= total; ++i) {
    const EvalRequest req = detail::make_request(
        "transfer-agent", "acp:cap:financial.transfer", "accounts/ops", ResourceClass::PUBLIC);
    const StepOutcome outcome =
        process(req, store, policy, UpdateOrdering::UPDATE_THEN_EVALUATE);
    detail::bump(report.decision_counts, outcome.result.decision);
    report.trajectory.push_back({i, outcome.result.decision, outcome.result.rs_final});
    const std::string milestone =
        outcome.result.decision == Decision::ESCALATED    ? "first_escalated"
        : outcome.result.decision == Decision::DENIED     ? "first_denied"
        : outcome.result.decision == Decision::COOLDOWN_ACTIVE ? "cooldown_from"
                                                                : "";
    if (!milestone.empty() && report.milestones.find(milestone) == report.milestones.end()) {
      report.milestones[milestone] = i;
    }
  }

  NullStore null_store;
  std::int64_t stateless_approved = 0;
  for (int i = 1; i <= total; ++i) {
    const EvalRequest req = detail::make_request(
        "transfer-agent", "acp:cap:financial.transfer", "accounts/ops", ResourceClass::PUBLIC);
    const StepOutcome outcome =
        process(req, null_store, policy, UpdateOrdering::UPDATE_THEN_EVALUATE);
    if (outcome.result.decision == Decision::APPROVED) ++stateless_approved;
  }
  report.milestones["stateless_approved"] = stateless_approved;

  report.pass = total == 500 && report.decision_counts["approved"] == 2 &&
                report.decision_counts["escalated"] == 8 &&
                report.decision_counts["denied"] == 3 &&
                report.decision_counts["cooldown"] == 487 &&
                report.milestones["first_escalated"] == 3 &&
                report.milestones["first_denied"] == 11 &&
                report.milestones["cooldown_from"] == 14 && stateless_approved == total;
  return report;
}

// State mixing: 11 low-risk reads prime the agent-scoped rate counter, then a
// single request in an unrelated high-value context is evaluated on the
// shared store. Under RISK_2_0 the rate rule fires on the foreign context
// (+20, a false denial); under RISK_3_0 the rate rule is context-scoped and
// the contamination disappears. The control run evaluates the same probe on a
// clean store. The threshold check reruns the priming with 10 requests under
// post-update visibility, where the penalty must not fire (the minimum
// priming volume is N + 1).
inline ExperimentReport run_exp6(EngineVersion version = EngineVersion::RISK_2_0) {
  PolicyConfig policy = default_policy();
  policy.engine_version = version;
  seal_policy(policy);

  ExperimentReport report;
  report.experiment_id = "EXP6";
  report.decision_counts = detail::zero_counts();

  const auto prime = [](const std::string& agent) {
    return detail::make_request(agent, "acp:cap:data.read", "docs/board-minutes",
                                ResourceClass::PUBLIC, kFixedClock);
  };
  const auto probe_request = [](const std::string& agent, std::int64_t ts) {
    return detail::make_request(agent, "acp:cap:financial.transfer", "accounts/ops",
                                ResourceClass::SENSITIVE, ts);
  };

  // Control: clean state.
  {
    InMemoryStore store;
    const StepOutcome outcome = process(probe_request("legitimate-agent-1", kFixedClock), store,
                                        policy, UpdateOrdering::UPDATE_THEN_EVALUATE);
    report.milestones["control_rs"] = outcome.result.rs_final;
    report.milestones["control_escalated"] =
        outcome.result.decision == Decision::ESCALATED ? 1 : 0;
  }

  // Main run: contaminated state, updates recorded prior to each evaluation.
  StepOutcome probe_outcome;
  {
    InMemoryStore store;
    std::int64_t index = 0;
    for (int i = 0; i < 11; ++i) {
      const StepOutcome outcome = process(prime("legitimate-agent-1"), store, policy,
                                          UpdateOrdering::UPDATE_THEN_EVALUATE);
      detail::bump(report.decision_counts, outcome.result.decision);
      report.trajectory.push_back({index++, outcome.result.decision, outcome.result.rs_final});
    }
    probe_outcome = process(probe_request("legitimate-agent-1", kFixedClock), store, policy,
                            UpdateOrdering::UPDATE_THEN_EVALUATE);
    detail::bump(report.decision_counts, probe_outcome.result.decision);
    report.trajectory.push_back(
        {index++, probe_outcome.result.decision, probe_outcome.result.rs_final});
  }
  report.milestones["probe_rs"] = probe_outcome.result.rs_final;
  report.milestones["probe_rule1"] =
      probe_outcome.result.breakdown.rules_fired.count(Rule::RULE1) ? 1 : 0;
  report.milestones["probe_rule3"] =
      probe_outcome.result.breakdown.rules_fired.count(Rule::RULE3) ? 1 : 0;

  // Contamination threshold: with only 10 priming requests and pre-update
  // visibility, the rate penalty must not fire.
  {
    InMemoryStore store;
    for (int i = 0; i < 10; ++i) {
      process(prime("legitimate-agent-1"), store, policy,
              UpdateOrdering::EVALUATE_THEN_UPDATE);
    }
    const StepOutcome outcome = process(probe_request("legitimate-agent-1", kFixedClock), store,
                                        policy, UpdateOrdering::EVALUATE_THEN_UPDATE);
    report.milestones["threshold_probe_fanom"] = outcome.result.breakdown.f_anom;
  }

  const bool control_ok = report.milestones["control_rs"] == 50 &&
                          report.milestones["control_escalated"] == 1;
  const bool threshold_ok = report.milestones["threshold_probe_fanom"] == 0;
  if (version == EngineVersion::RISK_2_0) {
    report.pass = control_ok && threshold_ok && probe_outcome.result.rs_final == 70 &&
                  probe_outcome.result.decision == Decision::DENIED &&
                  report.milestones["probe_rule1"] == 1 &&
                  report.milestones["probe_rule3"] == 0;
  } else {
    report.pass = control_ok && threshold_ok && probe_outcome.result.rs_final == 50 &&
                  probe_outcome.result.decision == Decision::ESCALATED &&
                  report.milestones["probe_rule1"] == 0;
  }
  return report;
}

// Context-scoped anomaly enforcement across engine versions. CLEAN evaluates
// one high-value request on a fresh store; MIXING replays the state-mixing
// attack; SAME_CONTEXT_BURST pushes 11 identical high-value requests and
// reports the 11th, which must be denied under both versions: context
// scoping removes cross-context coupling without weakening same-context
// enforcement.
inline ExperimentReport run_exp7(Exp7Scenario scenario, EngineVersion version) {
  PolicyConfig policy = default_policy();
  policy.engine_version = version;
  seal_policy(policy);

  ExperimentReport report;
  report.experiment_id = "EXP7";
  report.decision_counts = detail::zero_counts();

  InMemoryStore store;
  std::int64_t index = 0;
  auto run_one = [&](const EvalRequest& req) {
    const StepOutcome outcome =
        process(req, store, policy, UpdateOrdering::UPDATE_THEN_EVALUATE);
    detail::bump(report.decision_counts, outcome.result.decision);
    report.trajectory.push_back({index++, outcome.result.decision, outcome.result.rs_final});
    return outcome;
  };

  const auto probe_request = [] {
    return detail::make_request("context-agent", "acp:cap:financial.transfer", "accounts/ops",
                                ResourceClass::SENSITIVE);
  };

  StepOutcome probe;
  switch (scenario) {
    case Exp7Scenario::CLEAN:
      probe = run_one(probe_request());
      report.pass = probe.result.rs_final == 50 && probe.result.decision == Decision::ESCALATED;
      break;
    case Exp7Scenario::MIXING: {
      for (int i = 0; i < 11; ++i) {
        run_one(detail::make_request("context-agent", "acp:cap:data.read", "docs/board-minutes",
                                     ResourceClass::PUBLIC));
      }
      probe = run_one(probe_request());
      if (version == EngineVersion::RISK_2_0) {
        report.pass = probe.result.rs_final == 70 && probe.result.decision == Decision::DENIED;
      } else {
        report.pass = probe.result.rs_final == 50 && probe.result.decision == Decision::ESCALATED;
      }
      break;
    }
    case Exp7Scenario::SAME_CONTEXT_BURST: {
      for (int i = 0; i < 11; ++i) probe = run_one(probe_request());
      report.pass = probe.result.rs_final == 85 && probe.result.decision == Decision::DENIED;
      break;
    }
  }
  report.milestones["probe_rs"] = probe.result.rs_final;
  report.milestones["probe_denied"] = probe.result.decision == Decision::DENIED ? 1 : 0;
  return report;
}

// Relative fast-path measurement: the cooldown short circuit reads the
// backend once and skips scoring; the full path reads four times. Returns
// mean latencies over the same store so the margin is directly comparable.
struct FastPathReport {
  double cooldown_mean_ns = 0;
  double full_mean_ns = 0;
  InstrumentedStore::CallCounts cooldown_reads_per_eval;
  InstrumentedStore::CallCounts full_reads_per_eval;
};

inline FastPathReport run_fastpath_check(int iterations = 200000) {
  const PolicyConfig policy = default_policy();
  InMemoryStore inner;
  InstrumentedStore store(inner);

  // Give both agents some history so the comparison is not against an
  // empty-map lookup.
  for (int i = 0; i < 64; ++i) {
    inner.add_request("blocked-agent", kFixedClock - i);
    inner.add_request("clean-agent", kFixedClock - i);
  }
  inner.set_cooldown("blocked-agent", kFixedClock + 3600);

  FastPathReport out;

  const EvalRequest blocked = detail::make_request(
      "blocked-agent", "acp:cap:data.read", "docs/readme", ResourceClass::PUBLIC);
  const EvalRequest clean = detail::make_request(
      "clean-agent", "acp:cap:data.read", "docs/readme", ResourceClass::PUBLIC);

  store.reset_counts();
  evaluate(blocked, store, policy);
  out.cooldown_reads_per_eval = store.counts();
  store.reset_counts();
  evaluate(clean, store, policy);
  out.full_reads_per_eval = store.counts();

  const auto time_loop = [&](const EvalRequest& req) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < iterations; ++i) {
      evaluate(req, store, policy);
    }
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count() /
           static_cast<double>(iterations);
  };
  // Interleave a warm-up of each before timing.
  for (int i = 0; i < 1000; ++i) {
    evaluate(blocked, store, policy);
    evaluate(clean, store, policy);
  }
  out.full_mean_ns = time_loop(clean);
  out.cooldown_mean_ns = time_loop(blocked);
  return out;
}

// --- CLI-facing dispatch ------------------------------------------------------

struct ExperimentConfig {
  ExperimentId id = ExperimentId::EXP1;
  int total = 500;                  // EXP1, EXP5
  int agents = 100;                 // EXP2
  int per_agent = 10;               // EXP2
  std::int64_t delay_us = 0;        // EXP3B
  int workers = 10;                 // EXP3B
  Exp4Case exp4_case = Exp4Case::SEQUENTIAL;
  Exp7Scenario exp7_scenario = Exp7Scenario::MIXING;
  EngineVersion version = EngineVersion::RISK_2_0;
  ClockMode clock_mode = ClockMode::FIXED;  // EXP3B runs on the real clock
};

inline ExperimentReport run_experiment(const ExperimentConfig& config) {
  switch (config.id) {
    case ExperimentId::EXP1: return run_exp1(config.total);
    case ExperimentId::EXP2: return run_exp2(config.agents, config.per_agent);
    case ExperimentId::EXP3B:
      return run_exp3b(std::chrono::microseconds(config.delay_us), config.workers);
    case ExperimentId::EXP4: return run_exp4(config.exp4_case);
    case ExperimentId::EXP5: return run_exp5(config.total);
    case ExperimentId::EXP6: return run_exp6(config.version);
    case ExperimentId::EXP7: return run_exp7(config.exp7_scenario, config.version);
  }
  throw ValidationError("unknown experiment");
}

// --- Report serialization -----------------------------------------------------

inline nlohmann::json report_to_json(const ExperimentReport& report) {
  nlohmann::json j = nlohmann::json::object();
  j["experiment_id"] = report.experiment_id;
  j["decision_counts"] = report.decision_counts;
  nlohmann::json milestones = nlohmann::json::object();
  for (const auto& [k, v] : report.milestones) milestones[k] = v;
  j["milestones"] = std::move(milestones);
  nlohmann::json trajectory = nlohmann::json::array();
  for (const TrajectoryPoint& p : report.trajectory) {
    trajectory.push_back(
        {{"index", p.index}, {"decision", to_string(p.decision)}, {"rs", p.rs}});
  }
  j["trajectory"] = std::move(trajectory);
  if (report.throughput_rps.has_value()) {
    j["throughput_rps"] = *report.throughput_rps;
  } else {
    j["throughput_rps"] = nullptr;
  }
  j["pass"] = report.pass;
  return j;
}

inline ExperimentReport report_from_json(const nlohmann::json& j) {
  ExperimentReport report;
  try {
    report.experiment_id = j.at("experiment_id").get<std::string>();
    for (const auto& [k, v] : j.at("decision_counts").items()) {
      report.decision_counts[k] = v.get<std::int64_t>();
    }
    for (const auto& [k, v] : j.at("milestones").items()) {
      report.milestones[k] = v.get<std::int64_t>();
    }
    for (const auto& pj : j.at("trajectory")) {
      report.trajectory.push_back({pj.at("index").get<std::int64_t>(),
                                   decision_from_string(pj.at("decision").get<std::string>()),
                                   pj.at("rs").get<int>()});
    }
    if (!j.at("throughput_rps").is_null()) {
      report.throughput_rps = j.at("throughput_rps").get<double>();
    }
    report.pass = j.at("pass").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("malformed experiment report: ") + e.what());
  }
  return report;
}

enum class ReportFormat { JSON, CSV };

inline std::string report_to_csv(const ExperimentReport& report) {
  std::string out = "experiment_id,approved,escalated,denied,cooldown,pass\n";
  auto at = [&report](const char* k) {
    auto it = report.decision_counts.find(k);
    return it == report.decision_counts.end() ? 0 : it->second;
  };
  out += report.experiment_id + "," + std::to_string(at("approved")) + "," +
         std::to_string(at("escalated")) + "," + std::to_string(at("denied")) + "," +
         std::to_string(at("cooldown")) + "," + (report.pass ? "true" : "false") + "\n";
  return out;
}

// JSON keeps the full trajectory; CSV is counts-only.
inline void emit_report(const ExperimentReport& report, const std::string& path,
                        ReportFormat format) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw LoadError("cannot open report file for writing: " + path);
  if (format == ReportFormat::JSON) {
    out << report_to_json(report).dump(2) << '\n';
  } else {
    out << report_to_csv(report);
  }
  if (!out) throw LoadError("failed writing report file: " + path);
}

}  // namespace acp
