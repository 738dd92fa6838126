#pragma once

#include <cstdint>
#include <string>

#include "acp/policy.hpp"
#include "acp/risk.hpp"
#include "acp/trace_store.hpp"

namespace acp {

// Whether the request/pattern counters visible to an evaluation include the
// current attempt. EVALUATE_THEN_UPDATE leaves step n seeing n-1 prior
// occurrences; UPDATE_THEN_EVALUATE records the attempt first.
enum class UpdateOrdering { EVALUATE_THEN_UPDATE, UPDATE_THEN_EVALUATE };

inline std::string to_string(UpdateOrdering o) {
  return o == UpdateOrdering::EVALUATE_THEN_UPDATE ? "EVALUATE_THEN_UPDATE"
                                                   : "UPDATE_THEN_EVALUATE";
}

inline UpdateOrdering ordering_from_string(std::string_view s) {
  if (s == "EVALUATE_THEN_UPDATE") return UpdateOrdering::EVALUATE_THEN_UPDATE;
  if (s == "UPDATE_THEN_EVALUATE") return UpdateOrdering::UPDATE_THEN_EVALUATE;
  throw ValidationError("unknown update ordering: " + std::string(s));
}

struct StepOutcome {
  EvalResult result;
  bool cooldown_entered = false;
};

// One admission step under the execution contract: evaluation plus the
// mandated state updates in a fixed call order.
//
// add_request and add_pattern fire on every step, including cooldown-blocked
// ones; add_denial fires only for a real DENIED, and never for
// COOLDOWN_ACTIVE. After a denial the trigger threshold is checked and, once
// met, the cooldown expiry is set to timestamp + cooldown_period_s.
//
// Store write failures propagate to the caller as the step's error outcome;
// no partial retry is attempted. A failure inside the cooldown-trigger read
// leaves the denial standing with the cooldown deferred.
inline StepOutcome process(const EvalRequest& req, TraceStore& store,
                           const PolicyConfig& policy,
                           UpdateOrdering ordering = UpdateOrdering::EVALUATE_THEN_UPDATE) {
  validate_request(req);  // never record requests that fail validation
  const PatternKey key = pattern_key(req.agent_id, req.capability, req.resource);

  StepOutcome out;
  if (ordering == UpdateOrdering::UPDATE_THEN_EVALUATE) {
    store.add_request(req.agent_id, req.timestamp);
    store.add_pattern(key, req.timestamp);
    out.result = evaluate(req, store, policy);
  } else {
    out.result = evaluate(req, store, policy);
    store.add_request(req.agent_id, req.timestamp);
    store.add_pattern(key, req.timestamp);
  }

  if (out.result.decision == Decision::DENIED) {
    store.add_denial(req.agent_id, req.timestamp);
    bool enter = false;
    try {
      enter = should_enter_cooldown(req.agent_id, req.timestamp, store, policy);
    } catch (const std::exception&) {
      // Denial stands; cooldown deferred until a later step can read the count.
    }
    if (enter) {
      store.set_cooldown(req.agent_id, req.timestamp + policy.cooldown_period_s);
      out.cooldown_entered = true;
    }
  }
  return out;
}

}  // namespace acp
