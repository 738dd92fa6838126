#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>

#include "acp/errors.hpp"
#include "acp/hash.hpp"
#include "acp/policy.hpp"
#include "acp/trace_store.hpp"

namespace acp {

enum class Decision { APPROVED, ESCALATED, DENIED, COOLDOWN_ACTIVE };

inline std::string to_string(Decision d) {
  switch (d) {
    case Decision::APPROVED: return "APPROVED";
    case Decision::ESCALATED: return "ESCALATED";
    case Decision::DENIED: return "DENIED";
    case Decision::COOLDOWN_ACTIVE: return "COOLDOWN_ACTIVE";
  }
  return "DENIED";
}

inline Decision decision_from_string(std::string_view s) {
  if (s == "APPROVED") return Decision::APPROVED;
  if (s == "ESCALATED") return Decision::ESCALATED;
  if (s == "DENIED") return Decision::DENIED;
  if (s == "COOLDOWN_ACTIVE") return Decision::COOLDOWN_ACTIVE;
  throw ValidationError("unknown decision: " + std::string(s));
}

enum class Rule { RULE1, RULE2, RULE3 };

inline std::string to_string(Rule r) {
  switch (r) {
    case Rule::RULE1: return "RULE1";
    case Rule::RULE2: return "RULE2";
    case Rule::RULE3: return "RULE3";
  }
  return "RULE1";
}

// Anomaly bonuses are part of the scoring model, not policy knobs.
inline constexpr int kRule1Bonus = 20;  // high request rate
inline constexpr int kRule2Bonus = 15;  // accumulated denials
inline constexpr int kRule3Bonus = 15;  // repeated pattern

struct EvalRequest {
  std::string agent_id;
  std::string capability;  // "acp:cap:<domain>.<action>" or bare "<domain>.<action>"
  std::string resource;
  ResourceClass resource_class = ResourceClass::PUBLIC;
  int autonomy_level = 2;
  std::set<ContextFlag> context_flags;
  std::set<HistoryFlag> history_flags;  // caller-supplied; weights default to 0
  std::int64_t timestamp = 0;           // seconds since epoch

  bool operator==(const EvalRequest&) const = default;
};

struct FactorBreakdown {
  int base = 0;
  int f_res = 0;
  int f_ctx = 0;
  int f_hist = 0;
  int f_anom = 0;
  std::set<Rule> rules_fired;

  bool operator==(const FactorBreakdown&) const = default;
};

struct EvalResult {
  Decision decision = Decision::DENIED;
  int rs_final = 0;  // 0..100; 0 with an all-zero breakdown on the cooldown path
  FactorBreakdown breakdown;
  std::string reason;
  std::string policy_hash;

  bool operator==(const EvalResult&) const = default;
};

// SHA-256 over agent_id | capability | resource. '|' keeps the three fields
// unambiguous when one input is a prefix of another.
inline PatternKey pattern_key(const std::string& agent_id, const std::string& capability,
                              const std::string& resource) {
  if (agent_id.empty() || capability.empty() || resource.empty()) {
    throw ValidationError("pattern key inputs must be non-empty");
  }
  return PatternKey{sha256_hex(agent_id + "|" + capability + "|" + resource)};
}

inline void validate_request(const EvalRequest& req) {
  if (req.agent_id.empty()) throw ValidationError("agent_id must be non-empty");
  if (req.capability.empty()) throw ValidationError("capability must be non-empty");
  if (!capability_well_formed(req.capability)) {
    throw ValidationError("capability must be '<domain>.<action>' (optionally 'acp:cap:'-prefixed)");
  }
  if (req.resource.empty()) throw ValidationError("resource must be non-empty");
  if (req.autonomy_level < 0 || req.autonomy_level > 4) {
    throw ValidationError("autonomy_level must be in [0, 4]");
  }
  if (req.timestamp < 0) throw ValidationError("timestamp must be non-negative");
}

// Anomaly factor over the accumulated trace. Rule 1 keys on the agent's raw
// request rate under RISK_2_0 and on the context-scoped pattern rate under
// RISK_3_0; Rule 2 stays agent-scoped in both versions (cross-context denial
// history is a valid enforcement signal); Rule 3 is context-scoped always.
// All three counters are read unconditionally so the backend sees a fixed
// call sequence regardless of which rules fire. No cap below the final
// min(100, .) is applied.
inline FactorBreakdown compute_fanom(const EvalRequest& req, const PatternKey& key,
                                     TraceStore& store, const PolicyConfig& policy) {
  FactorBreakdown out;
  const std::int64_t now = req.timestamp;

  const std::int64_t rate_count =
      policy.engine_version == EngineVersion::RISK_2_0
          ? store.count_requests(req.agent_id, policy.rule1_window_s, now)
          : store.count_pattern(key, policy.rule1_window_s, now);
  const std::int64_t denial_count =
      store.count_denials(req.agent_id, policy.rule2_window_s, now);
  const std::int64_t repeat_count = store.count_pattern(key, policy.rule3_window_s, now);

  // Rule 1 is strict (> N); Rules 2 and 3 are inclusive (>= X, >= Y).
  if (rate_count > policy.rule1_threshold_n) {
    out.rules_fired.insert(Rule::RULE1);
    out.f_anom += kRule1Bonus;
  }
  if (denial_count >= policy.rule2_threshold_x) {
    out.rules_fired.insert(Rule::RULE2);
    out.f_anom += kRule2Bonus;
  }
  if (repeat_count >= policy.rule3_threshold_y) {
    out.rules_fired.insert(Rule::RULE3);
    out.f_anom += kRule3Bonus;
  }
  return out;
}

// Threshold mapping for one risk score. Autonomy level 0 is always denied.
inline Decision decide(int rs, int autonomy_level, const PolicyConfig& policy) {
  if (autonomy_level == 0) return Decision::DENIED;
  auto it = policy.thresholds_by_autonomy.find(autonomy_level);
  if (it == policy.thresholds_by_autonomy.end()) {
    throw ValidationError("no thresholds configured for autonomy level " +
                          std::to_string(autonomy_level));
  }
  if (rs <= it->second.approved_max) return Decision::APPROVED;
  if (rs <= it->second.escalated_max) return Decision::ESCALATED;
  return Decision::DENIED;
}

// The stateless decision pipeline:
//   1. validate the request (throws; never recorded as a decision)
//   2. cooldown short circuit — one store read, nothing else
//   3/4. factor breakdown (base, resource, context, history, anomaly)
//   5. rs = min(100, sum)
//   6. thresholds by autonomy level (level 0 force-denies)
// Any internal failure past validation fails closed: DENIED, never approved
// by default. The non-cooldown path performs exactly four store reads.
inline EvalResult evaluate(const EvalRequest& req, TraceStore& store,
                           const PolicyConfig& policy) {
  validate_request(req);
  try {
    if (store.cooldown_active(req.agent_id, req.timestamp)) {
      EvalResult result;
      result.decision = Decision::COOLDOWN_ACTIVE;
      result.rs_final = 0;
      result.reason = "cooldown active";
      result.policy_hash = policy.policy_hash;
      return result;
    }

    FactorBreakdown b;
    b.base = lookup_base(policy, req.capability);
    b.f_res = policy.resource_scores.at(req.resource_class);
    for (ContextFlag flag : req.context_flags) {
      auto it = policy.ctx_weights.find(flag);
      if (it != policy.ctx_weights.end()) b.f_ctx += it->second;
    }
    for (HistoryFlag flag : req.history_flags) {
      auto it = policy.hist_weights.find(flag);
      if (it != policy.hist_weights.end()) b.f_hist += it->second;
    }
    const PatternKey key = pattern_key(req.agent_id, req.capability, req.resource);
    const FactorBreakdown anomaly = compute_fanom(req, key, store, policy);
    b.f_anom = anomaly.f_anom;
    b.rules_fired = anomaly.rules_fired;

    const int rs = std::min(100, b.base + b.f_res + b.f_ctx + b.f_hist + b.f_anom);

    EvalResult result;
    result.decision = decide(rs, req.autonomy_level, policy);
    result.rs_final = rs;
    result.breakdown = b;
    result.policy_hash = policy.policy_hash;
    if (req.autonomy_level == 0) {
      result.reason = "autonomy level 0: always denied";
    } else if (result.decision == Decision::APPROVED) {
      result.reason = "risk score within approval threshold";
    } else if (result.decision == Decision::ESCALATED) {
      result.reason = "risk score requires human review";
    } else {
      result.reason = "risk score exceeds escalation threshold";
    }
    return result;
  } catch (const std::exception&) {
    EvalResult result;
    result.decision = Decision::DENIED;
    result.rs_final = 0;
    result.reason = "fail-closed";
    result.policy_hash = policy.policy_hash;
    return result;
  }
}

// True once the agent has accumulated the trigger number of denials inside
// the trigger window. Store failures propagate: the caller keeps the denial
// but defers the cooldown rather than failing open or closed here.
inline bool should_enter_cooldown(const std::string& agent_id, std::int64_t now,
                                  TraceStore& store, const PolicyConfig& policy) {
  return store.count_denials(agent_id, policy.cooldown_trigger_window_s, now) >=
         policy.cooldown_trigger_denials;
}

}  // namespace acp
