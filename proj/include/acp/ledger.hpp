#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acp/canonical.hpp"
#include "acp/errors.hpp"
#include "acp/execution.hpp"
#include "acp/hash.hpp"
#include "acp/signing.hpp"

namespace acp {

enum class LedgerEventType { GENESIS, AUTHORIZATION, RISK_EVALUATION };

inline std::string to_string(LedgerEventType t) {
  switch (t) {
    case LedgerEventType::GENESIS: return "GENESIS";
    case LedgerEventType::AUTHORIZATION: return "AUTHORIZATION";
    case LedgerEventType::RISK_EVALUATION: return "RISK_EVALUATION";
  }
  return "AUTHORIZATION";
}

inline LedgerEventType ledger_event_type_from_string(std::string_view s) {
  if (s == "GENESIS") return LedgerEventType::GENESIS;
  if (s == "AUTHORIZATION") return LedgerEventType::AUTHORIZATION;
  if (s == "RISK_EVALUATION") return LedgerEventType::RISK_EVALUATION;
  throw LoadError("unknown ledger event type: " + std::string(s));
}

inline constexpr std::string_view kGenesisPrevHash =
    "0000000000000000000000000000000000000000000000000000000000000000";

// One hash-chained decision record. The payload holds only canonicalizable
// values (no floating point anywhere in ledger payloads).
struct LedgerEvent {
  std::string event_id;
  LedgerEventType event_type = LedgerEventType::AUTHORIZATION;
  std::int64_t timestamp = 0;
  nlohmann::json payload = nlohmann::json::object();
  std::string prev_hash;  // 64 lowercase hex; all zeros only on GENESIS
  std::string hash;       // 64 lowercase hex
  std::string signature;  // base64url, no padding; empty when unsigned

  bool operator==(const LedgerEvent&) const = default;
};

// Chain input for event n: the canonical bytes of the event without its hash
// and signature, followed by the 64 ASCII hex characters of the previous
// hash. Keeping the link input in ASCII hex makes a serialized ledger file
// verifiable on its own.
inline std::string event_hash_input(const LedgerEvent& event) {
  nlohmann::json j = nlohmann::json::object();
  j["event_id"] = event.event_id;
  j["event_type"] = to_string(event.event_type);
  j["timestamp"] = event.timestamp;
  j["payload"] = event.payload;
  j["prev_hash"] = event.prev_hash;
  return canonical_bytes(j) + event.prev_hash;
}

inline std::string compute_event_hash(const LedgerEvent& event) {
  return sha256_hex(event_hash_input(event));
}

// Signature input is the raw 32-byte digest the hash field encodes.
inline std::string sign_event_hash(const SigningKey& key, const std::string& hash_hex) {
  return key.sign_b64url(from_hex(hash_hex));
}

inline bool verify_event_signature(const VerifyKey& key, const LedgerEvent& event) {
  if (event.signature.empty() || !is_lower_hex(event.hash) || event.hash.size() != 64) {
    return false;
  }
  return verify_b64url(key, from_hex(event.hash), event.signature);
}

// Append-only sequence of hash-chained events. Single writer; appends never
// touch existing entries. Copying the chain copies the history verbatim.
class LedgerChain {
 public:
  LedgerChain() = default;

  // Adopts an existing event sequence (e.g. read back from a ledger file).
  static LedgerChain from_events(std::vector<LedgerEvent> events) {
    LedgerChain chain;
    chain.events_ = std::move(events);
    return chain;
  }

  const std::vector<LedgerEvent>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }

  // Appends one event, auto-creating GENESIS first on an empty chain. With a
  // key, both the new event and any auto-created GENESIS are signed.
  const LedgerEvent& append(LedgerEventType event_type, std::int64_t timestamp,
                            nlohmann::json payload, std::string event_id,
                            const SigningKey* key = nullptr) {
    canonical_bytes(payload);  // reject up front so a bad payload mutates nothing
    if (events_.empty() && event_type != LedgerEventType::GENESIS) {
      append(LedgerEventType::GENESIS, 0, nlohmann::json::object(), "genesis", key);
    }
    LedgerEvent event;
    event.event_id = std::move(event_id);
    event.event_type = event_type;
    event.timestamp = timestamp;
    event.payload = std::move(payload);
    event.prev_hash =
        events_.empty() ? std::string(kGenesisPrevHash) : events_.back().hash;
    event.hash = compute_event_hash(event);
    if (key != nullptr) event.signature = sign_event_hash(*key, event.hash);
    events_.push_back(std::move(event));
    return events_.back();
  }

 private:
  std::vector<LedgerEvent> events_;
};

struct ChainVerdict {
  bool ok = true;
  std::size_t broken_at = 0;  // meaningful only when !ok
  std::string reason;
};

// Recomputes every hash and link, reporting the first inconsistency. With a
// verify key, every event must also carry a valid signature. An anchor allows
// verifying a slice: the first event's prev_hash must equal it instead of the
// GENESIS sentinel. An expected head hash, when supplied, additionally
// detects truncation of the tail.
inline ChainVerdict verify_chain(std::span<const LedgerEvent> events,
                                 const VerifyKey* key = nullptr,
                                 const std::optional<std::string>& anchor_prev_hash = std::nullopt,
                                 const std::optional<std::string>& expected_head = std::nullopt) {
  auto fail = [](std::size_t at, std::string reason) {
    return ChainVerdict{false, at, std::move(reason)};
  };
  for (std::size_t i = 0; i < events.size(); ++i) {
    const LedgerEvent& event = events[i];
    if (i == 0) {
      if (anchor_prev_hash.has_value()) {
        if (event.prev_hash != *anchor_prev_hash) {
          return fail(i, "first event does not link to the supplied anchor");
        }
      } else {
        if (event.event_type != LedgerEventType::GENESIS) {
          return fail(i, "chain must start with a GENESIS event");
        }
        if (event.prev_hash != kGenesisPrevHash) {
          return fail(i, "GENESIS prev_hash must be all zeros");
        }
      }
    } else {
      if (event.event_type == LedgerEventType::GENESIS) {
        return fail(i, "GENESIS may only appear at index 0");
      }
      if (event.prev_hash != events[i - 1].hash) {
        return fail(i, "prev_hash does not match the previous event");
      }
    }
    if (event.hash != compute_event_hash(event)) {
      return fail(i, "stored hash does not match recomputed hash");
    }
    if (key != nullptr) {
      if (event.signature.empty()) return fail(i, "event is unsigned");
      if (!verify_event_signature(*key, event)) return fail(i, "signature does not verify");
    }
  }
  if (expected_head.has_value()) {
    if (events.empty() || events.back().hash != *expected_head) {
      return fail(events.size(), "chain head does not match the expected head hash");
    }
  }
  return {};
}

inline ChainVerdict verify_chain(const LedgerChain& chain, const VerifyKey* key = nullptr) {
  return verify_chain(std::span(chain.events()), key);
}

// Records one processed admission step as an AUTHORIZATION event carrying the
// full factor breakdown. Every decision is recorded, including cooldown
// blocks: denials and blocks are auditable outcomes, not omissions.
inline const LedgerEvent& record_outcome(LedgerChain& chain, const StepOutcome& outcome,
                                         const EvalRequest& req,
                                         const SigningKey* key = nullptr) {
  const EvalResult& r = outcome.result;
  nlohmann::json rules = nlohmann::json::array();
  for (Rule rule : r.breakdown.rules_fired) rules.push_back(to_string(rule));
  nlohmann::json payload = {
      {"agent_id", req.agent_id},
      {"capability", req.capability},
      {"resource", req.resource},
      {"resource_class", to_string(req.resource_class)},
      {"decision", to_string(r.decision)},
      {"rs_final", r.rs_final},
      {"factors",
       {{"base", r.breakdown.base},
        {"f_res", r.breakdown.f_res},
        {"f_ctx", r.breakdown.f_ctx},
        {"f_hist", r.breakdown.f_hist},
        {"f_anom", r.breakdown.f_anom},
        {"rules_fired", std::move(rules)}}},
      {"policy_hash", r.policy_hash},
  };
  // Event ids are deterministic per chain position so identical request
  // traces replay to identical hash sequences.
  std::string event_id = "evt-" + std::to_string(chain.size() == 0 ? 1 : chain.size());
  return chain.append(LedgerEventType::AUTHORIZATION, req.timestamp, std::move(payload),
                      std::move(event_id), key);
}

// --- Newline-delimited JSON ledger files ------------------------------------

inline nlohmann::json event_to_json(const LedgerEvent& event) {
  nlohmann::json j = nlohmann::json::object();
  j["event_id"] = event.event_id;
  j["event_type"] = to_string(event.event_type);
  j["timestamp"] = event.timestamp;
  j["payload"] = event.payload;
  j["prev_hash"] = event.prev_hash;
  j["hash"] = event.hash;
  if (!event.signature.empty()) j["signature"] = event.signature;
  return j;
}

inline LedgerEvent event_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw LoadError("ledger event must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    (void)v;
    if (k != "event_id" && k != "event_type" && k != "timestamp" && k != "payload" &&
        k != "prev_hash" && k != "hash" && k != "signature") {
      throw LoadError("unknown key '" + k + "' in ledger event");
    }
  }
  LedgerEvent event;
  try {
    event.event_id = j.at("event_id").get<std::string>();
    event.event_type = ledger_event_type_from_string(j.at("event_type").get<std::string>());
    event.timestamp = j.at("timestamp").get<std::int64_t>();
    event.payload = j.at("payload");
    event.prev_hash = j.at("prev_hash").get<std::string>();
    event.hash = j.at("hash").get<std::string>();
    if (j.contains("signature")) event.signature = j.at("signature").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("malformed ledger event: ") + e.what());
  }
  if (event.prev_hash.size() != 64 || !is_lower_hex(event.prev_hash)) {
    throw LoadError("prev_hash must be 64 lowercase hex chars");
  }
  if (event.hash.size() != 64 || !is_lower_hex(event.hash)) {
    throw LoadError("hash must be 64 lowercase hex chars");
  }
  return event;
}

inline std::string event_to_line(const LedgerEvent& event) {
  return event_to_json(event).dump();
}

inline void write_ledger_file(const std::string& path, std::span<const LedgerEvent> events) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw LoadError("cannot open ledger file for writing: " + path);
  for (const LedgerEvent& event : events) {
    out << event_to_line(event) << '\n';
  }
}

inline std::vector<LedgerEvent> read_ledger_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open ledger file: " + path);
  std::vector<LedgerEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw LoadError("malformed JSON on line " + std::to_string(line_no) + ": " + e.what());
    }
    events.push_back(event_from_json(j));
  }
  return events;
}

}  // namespace acp
