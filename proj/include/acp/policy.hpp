#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <string_view>

#include "acp/canonical.hpp"
#include "acp/errors.hpp"
#include "acp/hash.hpp"

namespace acp {

enum class ResourceClass { PUBLIC, SENSITIVE, RESTRICTED };
enum class ContextFlag { EXTERNAL_IP, OFF_HOURS, GEO_OUTSIDE, UNTRUSTED_DEVICE };
enum class HistoryFlag { RECENT_DENIAL, ANOMALOUS_FREQUENCY };
enum class EngineVersion { RISK_2_0, RISK_3_0 };

inline std::string to_string(ResourceClass rc) {
  switch (rc) {
    case ResourceClass::PUBLIC: return "public";
    case ResourceClass::SENSITIVE: return "sensitive";
    case ResourceClass::RESTRICTED: return "restricted";
  }
  return "public";
}

inline ResourceClass resource_class_from_string(std::string_view s) {
  if (s == "public") return ResourceClass::PUBLIC;
  if (s == "sensitive") return ResourceClass::SENSITIVE;
  if (s == "restricted") return ResourceClass::RESTRICTED;
  throw ValidationError("unknown resource class: " + std::string(s));
}

inline std::string to_string(ContextFlag f) {
  switch (f) {
    case ContextFlag::EXTERNAL_IP: return "external_ip";
    case ContextFlag::OFF_HOURS: return "off_hours";
    case ContextFlag::GEO_OUTSIDE: return "geo_outside";
    case ContextFlag::UNTRUSTED_DEVICE: return "untrusted_device";
  }
  return "external_ip";
}

inline ContextFlag context_flag_from_string(std::string_view s) {
  if (s == "external_ip") return ContextFlag::EXTERNAL_IP;
  if (s == "off_hours") return ContextFlag::OFF_HOURS;
  if (s == "geo_outside") return ContextFlag::GEO_OUTSIDE;
  if (s == "untrusted_device") return ContextFlag::UNTRUSTED_DEVICE;
  throw ValidationError("unknown context flag: " + std::string(s));
}

inline std::string to_string(HistoryFlag f) {
  switch (f) {
    case HistoryFlag::RECENT_DENIAL: return "recent_denial";
    case HistoryFlag::ANOMALOUS_FREQUENCY: return "anomalous_frequency";
  }
  return "recent_denial";
}

inline HistoryFlag history_flag_from_string(std::string_view s) {
  if (s == "recent_denial") return HistoryFlag::RECENT_DENIAL;
  if (s == "anomalous_frequency") return HistoryFlag::ANOMALOUS_FREQUENCY;
  throw ValidationError("unknown history flag: " + std::string(s));
}

inline std::string to_string(EngineVersion v) {
  return v == EngineVersion::RISK_2_0 ? "RISK_2_0" : "RISK_3_0";
}

inline EngineVersion engine_version_from_string(std::string_view s) {
  if (s == "RISK_2_0") return EngineVersion::RISK_2_0;
  if (s == "RISK_3_0") return EngineVersion::RISK_3_0;
  throw ValidationError("unknown engine version: " + std::string(s));
}

// Decision thresholds for one autonomy level. Level 0 carries none: it is
// always denied.
struct Thresholds {
  int approved_max = 0;
  int escalated_max = 0;

  bool operator==(const Thresholds&) const = default;
};

// Every tunable parameter of the risk function, so the engine itself is a
// pure function of (request, state, policy). Immutable once sealed; share
// freely across concurrent evaluators.
struct PolicyConfig {
  // Capability pattern -> base score. Patterns match the "<domain>.<action>"
  // tail of a capability: exact "domain.action" entries, "*.action" /
  // "domain.*" wildcards, and bare tokens that match either side. The
  // mandatory "fallback" entry catches everything else.
  std::map<std::string, int> capability_base;
  std::map<ResourceClass, int> resource_scores;
  std::map<ContextFlag, int> ctx_weights;
  std::map<HistoryFlag, int> hist_weights;

  int rule1_threshold_n = 0;
  std::int64_t rule1_window_s = 0;
  int rule2_threshold_x = 0;
  std::int64_t rule2_window_s = 0;
  int rule3_threshold_y = 0;
  std::int64_t rule3_window_s = 0;

  int cooldown_trigger_denials = 0;
  std::int64_t cooldown_trigger_window_s = 0;
  std::int64_t cooldown_period_s = 0;

  std::map<int, Thresholds> thresholds_by_autonomy;  // levels >= 1 only

  EngineVersion engine_version = EngineVersion::RISK_2_0;

  // Derived, never user-set; recomputed by seal_policy.
  std::string policy_hash;

  bool operator==(const PolicyConfig&) const = default;
};

// Strips the optional "acp:cap:" prefix; experiment configs may use the bare
// "<domain>.<action>" spelling.
inline std::string capability_tail(std::string_view capability) {
  constexpr std::string_view kPrefix = "acp:cap:";
  if (capability.substr(0, kPrefix.size()) == kPrefix) {
    capability.remove_prefix(kPrefix.size());
  }
  return std::string(capability);
}

inline bool capability_well_formed(std::string_view capability) {
  const std::string tail = capability_tail(capability);
  const auto dot = tail.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == tail.size()) return false;
  return tail.find('.', dot + 1) == std::string::npos;
}

namespace detail {

inline nlohmann::json policy_hash_input(const PolicyConfig& p) {
  nlohmann::json j = nlohmann::json::object();
  nlohmann::json caps = nlohmann::json::object();
  for (const auto& [pattern, score] : p.capability_base) caps[pattern] = score;
  j["capability_base"] = std::move(caps);

  nlohmann::json res = nlohmann::json::object();
  for (const auto& [rc, score] : p.resource_scores) res[to_string(rc)] = score;
  j["resource_scores"] = std::move(res);

  nlohmann::json ctx = nlohmann::json::object();
  for (const auto& [flag, weight] : p.ctx_weights) ctx[to_string(flag)] = weight;
  j["ctx_weights"] = std::move(ctx);

  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [flag, weight] : p.hist_weights) hist[to_string(flag)] = weight;
  j["hist_weights"] = std::move(hist);

  j["rule1_threshold_n"] = p.rule1_threshold_n;
  j["rule1_window_s"] = p.rule1_window_s;
  j["rule2_threshold_x"] = p.rule2_threshold_x;
  j["rule2_window_s"] = p.rule2_window_s;
  j["rule3_threshold_y"] = p.rule3_threshold_y;
  j["rule3_window_s"] = p.rule3_window_s;
  j["cooldown_trigger_denials"] = p.cooldown_trigger_denials;
  j["cooldown_trigger_window_s"] = p.cooldown_trigger_window_s;
  j["cooldown_period_s"] = p.cooldown_period_s;

  nlohmann::json levels = nlohmann::json::object();
  for (const auto& [level, th] : p.thresholds_by_autonomy) {
    levels[std::to_string(level)] = {{"approved_max", th.approved_max},
                                     {"escalated_max", th.escalated_max}};
  }
  j["thresholds_by_autonomy"] = std::move(levels);
  j["engine_version"] = to_string(p.engine_version);
  return j;
}

}  // namespace detail

// SHA-256 over the canonical serialization of every field except policy_hash.
inline std::string compute_policy_hash(const PolicyConfig& policy) {
  return sha256_hex(canonical_bytes(detail::policy_hash_input(policy)));
}

inline void validate_policy(const PolicyConfig& p) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(what);
  };
  for (const auto& [pattern, score] : p.capability_base) {
    require(!pattern.empty(), "empty capability pattern");
    require(score >= 0, "negative capability base score");
  }
  require(p.capability_base.count("fallback") == 1, "capability_base must define a fallback entry");
  require(p.resource_scores.size() == 3, "resource_scores must cover all three classes");
  for (const auto& [rc, score] : p.resource_scores) {
    (void)rc;
    require(score >= 0, "negative resource score");
  }
  for (const auto& [flag, weight] : p.ctx_weights) {
    (void)flag;
    require(weight >= 0, "negative context weight");
  }
  for (const auto& [flag, weight] : p.hist_weights) {
    (void)flag;
    require(weight >= 0, "negative history weight");
  }
  require(p.rule1_threshold_n >= 0 && p.rule2_threshold_x >= 0 && p.rule3_threshold_y >= 0,
          "rule thresholds must be non-negative");
  require(p.rule1_window_s > 0 && p.rule2_window_s > 0 && p.rule3_window_s > 0,
          "rule windows must be strictly positive");
  require(p.cooldown_trigger_denials >= 0, "cooldown trigger must be non-negative");
  require(p.cooldown_trigger_window_s > 0 && p.cooldown_period_s > 0,
          "cooldown windows must be strictly positive");
  for (const auto& [level, th] : p.thresholds_by_autonomy) {
    require(level >= 1 && level <= 4, "thresholds only apply to autonomy levels 1..4");
    require(0 <= th.approved_max && th.approved_max < th.escalated_max && th.escalated_max <= 99,
            "thresholds must satisfy 0 <= approved_max < escalated_max <= 99");
  }
}

// Validates invariants and recomputes policy_hash. Every construction path
// (defaults, file load, overrides) ends here.
inline void seal_policy(PolicyConfig& policy) {
  validate_policy(policy);
  policy.policy_hash = compute_policy_hash(policy);
}

inline PolicyConfig default_policy() {
  PolicyConfig p;
  p.capability_base = {
      {"read", 0},
      {"write", 10},
      {"financial.payment", 35},
      {"financial.transfer", 35},
      {"admin", 60},
      {"fallback", 20},
  };
  p.resource_scores = {
      {ResourceClass::PUBLIC, 0},
      {ResourceClass::SENSITIVE, 15},
      {ResourceClass::RESTRICTED, 45},
  };
  p.ctx_weights = {
      {ContextFlag::EXTERNAL_IP, 20},
      {ContextFlag::OFF_HOURS, 15},
      {ContextFlag::GEO_OUTSIDE, 0},
      {ContextFlag::UNTRUSTED_DEVICE, 0},
  };
  p.hist_weights = {
      {HistoryFlag::RECENT_DENIAL, 0},
      {HistoryFlag::ANOMALOUS_FREQUENCY, 0},
  };
  p.rule1_threshold_n = 10;
  p.rule1_window_s = 60;
  p.rule2_threshold_x = 3;
  p.rule2_window_s = 86400;
  p.rule3_threshold_y = 3;
  p.rule3_window_s = 300;
  p.cooldown_trigger_denials = 3;
  p.cooldown_trigger_window_s = 600;
  p.cooldown_period_s = 600;
  // Only level 2 is published; levels 1/3/4 copy it and stay configurable.
  // Level 0 has no entry: it is force-denied before thresholds apply.
  const Thresholds standard{39, 69};
  p.thresholds_by_autonomy = {{1, standard}, {2, standard}, {3, standard}, {4, standard}};
  p.engine_version = EngineVersion::RISK_2_0;
  seal_policy(p);
  return p;
}

// Base-score lookup on the capability tail. Exact "domain.action" entries win;
// otherwise the longest matching pattern does (bare tokens match either the
// domain or the action); anything unmatched gets the fallback entry.
inline int lookup_base(const PolicyConfig& policy, const std::string& capability) {
  const std::string tail = capability_tail(capability);
  const auto dot = tail.find('.');
  const std::string domain = dot == std::string::npos ? tail : tail.substr(0, dot);
  const std::string action = dot == std::string::npos ? std::string() : tail.substr(dot + 1);

  if (tail != "fallback") {
    if (auto it = policy.capability_base.find(tail); it != policy.capability_base.end()) {
      return it->second;
    }
  }

  int best_len = -1;
  int best_score = 0;
  for (const auto& [pattern, score] : policy.capability_base) {
    if (pattern == "fallback") continue;
    bool matched = false;
    if (pattern.size() > 2 && pattern.compare(0, 2, "*.") == 0) {
      matched = pattern.compare(2, std::string::npos, action) == 0;
    } else if (pattern.size() > 2 && pattern.compare(pattern.size() - 2, 2, ".*") == 0) {
      matched = pattern.compare(0, pattern.size() - 2, domain) == 0;
    } else if (pattern.find('.') == std::string::npos) {
      matched = pattern == domain || pattern == action;
    }
    // Map order breaks length ties deterministically.
    if (matched && static_cast<int>(pattern.size()) > best_len) {
      best_len = static_cast<int>(pattern.size());
      best_score = score;
    }
  }
  if (best_len >= 0) return best_score;
  return policy.capability_base.at("fallback");
}

// --- JSON policy file format -----------------------------------------------
//
// One JSON object with exactly the PolicyConfig fields (snake_case keys).
// Unknown keys are rejected. A supplied policy_hash is ignored and recomputed.

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj,
                                std::initializer_list<std::string_view> allowed,
                                const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool ok = false;
    for (auto a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) throw LoadError("unknown key '" + key + "' in " + where);
  }
}

inline int require_int(const nlohmann::json& obj, const std::string& key,
                       const std::string& where) {
  if (!obj.contains(key)) throw LoadError("missing key '" + key + "' in " + where);
  const auto& v = obj.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned()) {
    throw LoadError("key '" + key + "' in " + where + " must be an integer");
  }
  return v.get<int>();
}

inline std::int64_t require_int64(const nlohmann::json& obj, const std::string& key,
                                  const std::string& where) {
  if (!obj.contains(key)) throw LoadError("missing key '" + key + "' in " + where);
  const auto& v = obj.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned()) {
    throw LoadError("key '" + key + "' in " + where + " must be an integer");
  }
  return v.get<std::int64_t>();
}

inline Thresholds thresholds_from_json(const nlohmann::json& obj, const std::string& where) {
  if (!obj.is_object()) throw LoadError(where + " must be an object");
  reject_unknown_keys(obj, {"approved_max", "escalated_max"}, where);
  Thresholds th;
  th.approved_max = require_int(obj, "approved_max", where);
  th.escalated_max = require_int(obj, "escalated_max", where);
  return th;
}

// Merges one partial policy document into `policy`. Map-valued fields merge
// per key; scalars and per-level thresholds replace. Shared by the file
// loader (over defaults-free empty maps) and vector/experiment overrides.
inline void merge_policy_fields(PolicyConfig& policy, const nlohmann::json& doc,
                                const std::string& where) {
  if (!doc.is_object()) throw LoadError(where + " must be a JSON object");
  reject_unknown_keys(doc,
                      {"capability_base", "resource_scores", "ctx_weights", "hist_weights",
                       "rule1_threshold_n", "rule1_window_s", "rule2_threshold_x",
                       "rule2_window_s", "rule3_threshold_y", "rule3_window_s",
                       "cooldown_trigger_denials", "cooldown_trigger_window_s",
                       "cooldown_period_s", "thresholds_by_autonomy", "engine_version",
                       "policy_hash"},
                      where);

  if (doc.contains("capability_base")) {
    const auto& caps = doc.at("capability_base");
    if (!caps.is_object()) throw LoadError("capability_base must be an object");
    for (const auto& [pattern, score] : caps.items()) {
      if (!score.is_number_integer() && !score.is_number_unsigned()) {
        throw LoadError("capability base for '" + pattern + "' must be an integer");
      }
      policy.capability_base[pattern] = score.get<int>();
    }
  }
  if (doc.contains("resource_scores")) {
    const auto& res = doc.at("resource_scores");
    if (!res.is_object()) throw LoadError("resource_scores must be an object");
    reject_unknown_keys(res, {"public", "sensitive", "restricted"}, "resource_scores");
    for (const auto& [name, score] : res.items()) {
      policy.resource_scores[resource_class_from_string(name)] = score.get<int>();
    }
  }
  if (doc.contains("ctx_weights")) {
    const auto& ctx = doc.at("ctx_weights");
    if (!ctx.is_object()) throw LoadError("ctx_weights must be an object");
    reject_unknown_keys(ctx, {"external_ip", "off_hours", "geo_outside", "untrusted_device"},
                        "ctx_weights");
    for (const auto& [name, weight] : ctx.items()) {
      policy.ctx_weights[context_flag_from_string(name)] = weight.get<int>();
    }
  }
  if (doc.contains("hist_weights")) {
    const auto& hist = doc.at("hist_weights");
    if (!hist.is_object()) throw LoadError("hist_weights must be an object");
    reject_unknown_keys(hist, {"recent_denial", "anomalous_frequency"}, "hist_weights");
    for (const auto& [name, weight] : hist.items()) {
      policy.hist_weights[history_flag_from_string(name)] = weight.get<int>();
    }
  }
  if (doc.contains("rule1_threshold_n")) policy.rule1_threshold_n = require_int(doc, "rule1_threshold_n", where);
  if (doc.contains("rule1_window_s")) policy.rule1_window_s = require_int64(doc, "rule1_window_s", where);
  if (doc.contains("rule2_threshold_x")) policy.rule2_threshold_x = require_int(doc, "rule2_threshold_x", where);
  if (doc.contains("rule2_window_s")) policy.rule2_window_s = require_int64(doc, "rule2_window_s", where);
  if (doc.contains("rule3_threshold_y")) policy.rule3_threshold_y = require_int(doc, "rule3_threshold_y", where);
  if (doc.contains("rule3_window_s")) policy.rule3_window_s = require_int64(doc, "rule3_window_s", where);
  if (doc.contains("cooldown_trigger_denials")) policy.cooldown_trigger_denials = require_int(doc, "cooldown_trigger_denials", where);
  if (doc.contains("cooldown_trigger_window_s")) policy.cooldown_trigger_window_s = require_int64(doc, "cooldown_trigger_window_s", where);
  if (doc.contains("cooldown_period_s")) policy.cooldown_period_s = require_int64(doc, "cooldown_period_s", where);
  if (doc.contains("thresholds_by_autonomy")) {
    const auto& levels = doc.at("thresholds_by_autonomy");
    if (!levels.is_object()) throw LoadError("thresholds_by_autonomy must be an object");
    for (const auto& [level_key, th] : levels.items()) {
      int level = 0;
      try {
        std::size_t pos = 0;
        level = std::stoi(level_key, &pos);
        if (pos != level_key.size()) throw LoadError("");
      } catch (...) {
        throw LoadError("thresholds_by_autonomy key '" + level_key + "' is not an integer level");
      }
      policy.thresholds_by_autonomy[level] =
          thresholds_from_json(th, "thresholds_by_autonomy[" + level_key + "]");
    }
  }
  if (doc.contains("engine_version")) {
    const auto& v = doc.at("engine_version");
    if (!v.is_string()) throw LoadError("engine_version must be a string");
    policy.engine_version = engine_version_from_string(v.get<std::string>());
  }
  // policy_hash is derived; any supplied value is deliberately ignored.
}

}  // namespace detail

inline nlohmann::json policy_to_json(const PolicyConfig& policy) {
  nlohmann::json j = detail::policy_hash_input(policy);
  j["policy_hash"] = policy.policy_hash;
  return j;
}

inline PolicyConfig policy_from_json(const nlohmann::json& doc) {
  PolicyConfig policy;
  detail::merge_policy_fields(policy, doc, "policy document");
  try {
    seal_policy(policy);
  } catch (const ValidationError& e) {
    throw LoadError(std::string("invalid policy: ") + e.what());
  }
  return policy;
}

inline PolicyConfig load_policy_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open policy file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("malformed policy JSON in " + path + ": " + e.what());
  }
  return policy_from_json(doc);
}

// Applies a partial policy document on top of an existing config and reseals.
inline PolicyConfig apply_policy_overrides(const PolicyConfig& base,
                                           const nlohmann::json& overrides) {
  PolicyConfig policy = base;
  detail::merge_policy_fields(policy, overrides, "policy_overrides");
  try {
    seal_policy(policy);
  } catch (const ValidationError& e) {
    throw LoadError(std::string("invalid policy overrides: ") + e.what());
  }
  return policy;
}

}  // namespace acp
