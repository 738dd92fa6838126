#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "acp/errors.hpp"
#include "acp/execution.hpp"
#include "acp/policy.hpp"
#include "acp/risk.hpp"
#include "acp/trace_store.hpp"

namespace acp {

// Vectors carry timestamp offsets, not absolute times; any fixed epoch
// reproduces the same run.
inline constexpr std::int64_t kVectorEpoch = 1'700'000'000;

struct VectorStep {
  EvalRequest request;  // timestamp filled from the epoch + offset at run time
  std::int64_t timestamp_offset_s = 0;
  Decision expected_decision = Decision::APPROVED;
  std::optional<int> expected_rs;  // absent for COOLDOWN_ACTIVE steps
};

// One declarative multi-step conformance scenario.
struct SequenceVector {
  std::string vector_id;
  UpdateOrdering ordering = UpdateOrdering::EVALUATE_THEN_UPDATE;
  nlohmann::json policy_overrides = nlohmann::json::object();
  std::vector<VectorStep> steps;
};

struct StepReport {
  bool executed = false;
  Decision actual = Decision::DENIED;
  int actual_rs = 0;
  Decision expected = Decision::DENIED;
  std::optional<int> expected_rs;
  bool pass = false;
};

struct RunReport {
  std::string vector_id;
  std::vector<StepReport> steps;
  bool overall_pass = false;
  bool strict = false;
};

// Executes one vector against a fresh in-memory store under its declared
// ordering. Both decision and risk score are compared per step; steps that
// expect COOLDOWN_ACTIVE skip the score comparison (the score is a sentinel
// there). In strict mode the first mismatch aborts the vector.
inline RunReport run_vector(const SequenceVector& vec, const PolicyConfig& base_policy,
                            bool strict = false) {
  PolicyConfig policy = base_policy;
  if (vec.policy_overrides.is_object() && !vec.policy_overrides.empty()) {
    policy = apply_policy_overrides(base_policy, vec.policy_overrides);
  }

  InMemoryStore store;
  RunReport report;
  report.vector_id = vec.vector_id;
  report.strict = strict;
  report.steps.resize(vec.steps.size());
  report.overall_pass = true;

  for (std::size_t i = 0; i < vec.steps.size(); ++i) {
    const VectorStep& step = vec.steps[i];
    EvalRequest req = step.request;
    req.timestamp = kVectorEpoch + step.timestamp_offset_s;

    StepReport& sr = report.steps[i];
    sr.executed = true;
    sr.expected = step.expected_decision;
    sr.expected_rs = step.expected_rs;

    const StepOutcome outcome = process(req, store, policy, vec.ordering);
    sr.actual = outcome.result.decision;
    sr.actual_rs = outcome.result.rs_final;
    sr.pass = sr.actual == sr.expected &&
              (!sr.expected_rs.has_value() || sr.actual_rs == *sr.expected_rs);
    if (!sr.pass) {
      report.overall_pass = false;
      if (strict) break;
    }
  }
  return report;
}

inline std::string summarize(const RunReport& report) {
  std::ostringstream out;
  out << report.vector_id << ": " << (report.overall_pass ? "PASS" : "FAIL");
  for (std::size_t i = 0; i < report.steps.size(); ++i) {
    const StepReport& sr = report.steps[i];
    out << "\n  step " << (i + 1) << ": ";
    if (!sr.executed) {
      out << "skipped (strict mode abort)";
      continue;
    }
    out << (sr.pass ? "pass" : "FAIL") << " decision=" << to_string(sr.actual)
        << " rs=" << sr.actual_rs << " expected=" << to_string(sr.expected);
    if (sr.expected_rs.has_value()) out << " rs=" << *sr.expected_rs;
  }
  return out.str();
}

// --- Vector file format ------------------------------------------------------
//
// {
//   "vector_id": "...",
//   "ordering": "EVALUATE_THEN_UPDATE" | "UPDATE_THEN_EVALUATE",   (optional)
//   "policy_overrides": { partial policy document },               (optional)
//   "steps": [
//     { "request":  { "agent_id", "capability", "resource", "resource_class",
//                     "autonomy_level"?, "context_flags"?, "history_flags"?,
//                     "timestamp_offset_s"? },
//       "expected": { "decision", "risk_score"? } }
//   ]
// }
//
// Unknown fields are rejected. risk_score is required except for
// COOLDOWN_ACTIVE steps, where it must be omitted.

namespace detail {

inline VectorStep step_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw LoadError(where + " must be an object");
  reject_unknown_keys(j, {"request", "expected"}, where);
  if (!j.contains("request") || !j.contains("expected")) {
    throw LoadError(where + " needs both 'request' and 'expected'");
  }

  const nlohmann::json& rj = j.at("request");
  if (!rj.is_object()) throw LoadError(where + ".request must be an object");
  reject_unknown_keys(rj,
                      {"agent_id", "capability", "resource", "resource_class",
                       "autonomy_level", "context_flags", "history_flags",
                       "timestamp_offset_s"},
                      where + ".request");

  VectorStep step;
  try {
    step.request.agent_id = rj.at("agent_id").get<std::string>();
    step.request.capability = rj.at("capability").get<std::string>();
    step.request.resource = rj.at("resource").get<std::string>();
    step.request.resource_class =
        resource_class_from_string(rj.at("resource_class").get<std::string>());
    step.request.autonomy_level = rj.value("autonomy_level", 2);
    if (rj.contains("context_flags")) {
      for (const auto& f : rj.at("context_flags")) {
        step.request.context_flags.insert(context_flag_from_string(f.get<std::string>()));
      }
    }
    if (rj.contains("history_flags")) {
      for (const auto& f : rj.at("history_flags")) {
        step.request.history_flags.insert(history_flag_from_string(f.get<std::string>()));
      }
    }
    step.timestamp_offset_s = rj.value("timestamp_offset_s", std::int64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("malformed " + where + ".request: " + e.what());
  } catch (const ValidationError& e) {
    throw LoadError("invalid " + where + ".request: " + e.what());
  }
  if (step.timestamp_offset_s < 0) {
    throw LoadError(where + ".request.timestamp_offset_s must be non-negative");
  }

  const nlohmann::json& ej = j.at("expected");
  if (!ej.is_object()) throw LoadError(where + ".expected must be an object");
  reject_unknown_keys(ej, {"decision", "risk_score"}, where + ".expected");
  try {
    step.expected_decision = decision_from_string(ej.at("decision").get<std::string>());
    if (ej.contains("risk_score")) step.expected_rs = ej.at("risk_score").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("malformed " + where + ".expected: " + e.what());
  } catch (const ValidationError& e) {
    throw LoadError("invalid " + where + ".expected: " + e.what());
  }
  if (step.expected_decision == Decision::COOLDOWN_ACTIVE && step.expected_rs.has_value()) {
    throw LoadError(where + ": COOLDOWN_ACTIVE steps must omit risk_score");
  }
  if (step.expected_decision != Decision::COOLDOWN_ACTIVE && !step.expected_rs.has_value()) {
    throw LoadError(where + ": expected.risk_score is required");
  }
  return step;
}

}  // namespace detail

inline SequenceVector vector_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw LoadError("sequence vector must be a JSON object");
  detail::reject_unknown_keys(j, {"vector_id", "ordering", "policy_overrides", "steps"},
                              "sequence vector");
  SequenceVector vec;
  try {
    vec.vector_id = j.at("vector_id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("sequence vector needs a vector_id: ") + e.what());
  }
  if (vec.vector_id.empty()) throw LoadError("vector_id must be non-empty");
  if (j.contains("ordering")) {
    try {
      vec.ordering = ordering_from_string(j.at("ordering").get<std::string>());
    } catch (const ValidationError& e) {
      throw LoadError(vec.vector_id + ": " + e.what());
    }
  }
  if (j.contains("policy_overrides")) {
    if (!j.at("policy_overrides").is_object()) {
      throw LoadError(vec.vector_id + ": policy_overrides must be an object");
    }
    vec.policy_overrides = j.at("policy_overrides");
  }
  if (!j.contains("steps") || !j.at("steps").is_array() || j.at("steps").empty()) {
    throw LoadError(vec.vector_id + ": steps must be a non-empty array");
  }
  std::size_t step_no = 0;
  for (const auto& sj : j.at("steps")) {
    ++step_no;
    vec.steps.push_back(
        detail::step_from_json(sj, vec.vector_id + " step " + std::to_string(step_no)));
  }
  return vec;
}

// Loads vectors from a single file (one vector object, or an array of them;
// an empty file is an empty suite) or from a directory of *.json files in
// filename order. Duplicate vector ids within a suite are rejected.
inline std::vector<SequenceVector> load_suite(const std::string& path) {
  namespace fs = std::filesystem;
  std::vector<SequenceVector> suite;

  auto load_one_file = [&suite](const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw LoadError("cannot open vector file: " + file.string());
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    const auto non_ws = content.find_first_not_of(" \t\r\n");
    if (non_ws == std::string::npos) return;  // empty file, empty suite
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(content);
    } catch (const nlohmann::json::exception& e) {
      throw LoadError("malformed JSON in " + file.string() + ": " + e.what());
    }
    if (doc.is_array()) {
      for (const auto& vj : doc) suite.push_back(vector_from_json(vj));
    } else {
      suite.push_back(vector_from_json(doc));
    }
  };

  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) load_one_file(file);
  } else {
    load_one_file(path);
  }

  for (std::size_t i = 0; i < suite.size(); ++i) {
    for (std::size_t k = i + 1; k < suite.size(); ++k) {
      if (suite[i].vector_id == suite[k].vector_id) {
        throw LoadError("duplicate vector_id in suite: " + suite[i].vector_id);
      }
    }
  }
  return suite;
}

}  // namespace acp
