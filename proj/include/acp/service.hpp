#pragma once

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <ctime>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "acp/errors.hpp"
#include "acp/execution.hpp"
#include "acp/ledger.hpp"
#include "acp/policy.hpp"
#include "acp/risk.hpp"
#include "acp/trace_store.hpp"

namespace acp {

// HTTP admission endpoint wrapping the engine, store, and ledger. Admission
// runs the execution contract and records every decision; the ledger writer
// is serialized behind one mutex while the store handles its own
// linearization. No endpoint is authenticated: the identity layer sits
// outside this service.
class AdmissionService {
 public:
  AdmissionService(PolicyConfig policy, std::shared_ptr<TraceStore> store,
                   UpdateOrdering ordering = UpdateOrdering::EVALUATE_THEN_UPDATE,
                   std::optional<SigningKey> signing_key = std::nullopt)
      : policy_(std::move(policy)),
        store_(std::move(store)),
        ordering_(ordering),
        signing_key_(std::move(signing_key)) {
    char buf[16];
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%d", &tm_utc);
    declaration_date_ = buf;
  }

  // Mirrors every appended event into an NDJSON file. If the file already has
  // events, the chain continues from its head; a corrupt file is refused.
  void attach_ledger_file(const std::string& path) {
    std::lock_guard lock(ledger_mu_);
    std::ifstream probe(path);
    if (probe.good()) {
      probe.close();
      std::vector<LedgerEvent> events = read_ledger_file(path);
      if (!events.empty()) {
        const ChainVerdict verdict = verify_chain(std::span(events));
        if (!verdict.ok) {
          throw LoadError("refusing corrupt ledger file " + path + ": " + verdict.reason +
                          " at index " + std::to_string(verdict.broken_at));
        }
        ledger_ = LedgerChain::from_events(std::move(events));
      }
    }
    ledger_path_ = path;
  }

  void register_routes(httplib::Server& server) {
    const auto admission = [this](const httplib::Request& req, httplib::Response& res) {
      handle_admission(req, res);
    };
    server.Post("/acp/v1/admission", admission);
    server.Post("/admission", admission);  // demo-path alias
    server.Get("/acp/v1/conformance",
               [this](const httplib::Request& req, httplib::Response& res) {
                 handle_conformance(req, res);
               });
    server.Get("/acp/v1/audit/query",
               [this](const httplib::Request& req, httplib::Response& res) {
                 handle_audit_query(req, res);
               });
    server.Get("/health", [this](const httplib::Request& req, httplib::Response& res) {
      handle_health(req, res);
    });
  }

  std::vector<LedgerEvent> ledger_snapshot() const {
    std::lock_guard lock(ledger_mu_);
    return ledger_.events();
  }

  const PolicyConfig& policy() const { return policy_; }

 private:
  static void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  void handle_admission(const httplib::Request& http_req, httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(http_req.body);
    } catch (const nlohmann::json::exception&) {
      send_json(res, 400, {{"error", "malformed_json"}});
      return;
    }
    if (!body.is_object()) {
      send_json(res, 400, {{"error", "malformed_json"}});
      return;
    }

    static constexpr const char* kAllowed[] = {"agent_id",       "capability",
                                               "resource",       "resource_class",
                                               "autonomy_level", "context_flags",
                                               "timestamp"};
    for (const auto& [key, value] : body.items()) {
      (void)value;
      bool ok = false;
      for (const char* allowed : kAllowed) {
        if (key == allowed) {
          ok = true;
          break;
        }
      }
      if (!ok) {
        send_json(res, 400, {{"error", "unknown_field"}, {"field", key}});
        return;
      }
    }
    for (const char* required : {"agent_id", "capability", "resource", "resource_class",
                                 "autonomy_level"}) {
      if (!body.contains(required)) {
        send_json(res, 400, {{"error", "missing_field"}, {"field", required}});
        return;
      }
    }

    EvalRequest req;
    try {
      req.agent_id = body.at("agent_id").get<std::string>();
      req.capability = body.at("capability").get<std::string>();
      req.resource = body.at("resource").get<std::string>();
      req.resource_class =
          resource_class_from_string(body.at("resource_class").get<std::string>());
      req.autonomy_level = body.at("autonomy_level").get<int>();
      if (body.contains("context_flags")) {
        for (const auto& f : body.at("context_flags")) {
          req.context_flags.insert(context_flag_from_string(f.get<std::string>()));
        }
      }
      req.timestamp = body.contains("timestamp")
                          ? body.at("timestamp").get<std::int64_t>()
                          : static_cast<std::int64_t>(std::time(nullptr));
      validate_request(req);
    } catch (const nlohmann::json::exception& e) {
      send_json(res, 400, {{"error", "invalid_field"}, {"detail", e.what()}});
      return;
    } catch (const ValidationError& e) {
      send_json(res, 400, {{"error", "invalid_request"}, {"detail", e.what()}});
      return;
    }

    // Validation precedes recording: nothing above this point touches state.
    try {
      const StepOutcome outcome = process(req, *store_, policy_, ordering_);
      std::size_t ledger_index = 0;
      {
        std::lock_guard lock(ledger_mu_);
        const std::size_t before = ledger_.size();
        const LedgerEvent& event = record_outcome(
            ledger_, outcome, req, signing_key_ ? &*signing_key_ : nullptr);
        ledger_index = ledger_.size() - 1;
        if (!ledger_path_.empty()) {
          std::ofstream out(ledger_path_, std::ios::app);
          if (ledger_.size() - before == 2) {
            // This append bootstrapped the chain; mirror the GENESIS too.
            out << event_to_line(ledger_.events().front()) << '\n';
          }
          out << event_to_line(event) << '\n';
          if (!out) throw StoreError("ledger file write failed");
        }
      }

      const EvalResult& r = outcome.result;
      nlohmann::json rules = nlohmann::json::array();
      for (Rule rule : r.breakdown.rules_fired) rules.push_back(to_string(rule));
      send_json(res, 200,
                {{"decision", to_string(r.decision)},
                 {"risk_score", r.rs_final},
                 {"factors",
                  {{"base", r.breakdown.base},
                   {"f_res", r.breakdown.f_res},
                   {"f_ctx", r.breakdown.f_ctx},
                   {"f_hist", r.breakdown.f_hist},
                   {"f_anom", r.breakdown.f_anom},
                   {"rules_fired", std::move(rules)}}},
                 {"reason", r.reason},
                 {"policy_hash", r.policy_hash},
                 {"ledger_index", ledger_index}});
    } catch (const std::exception&) {
      // Never approved by default: any internal failure denies.
      send_json(res, 500,
                {{"decision", "DENIED"},
                 {"risk_score", 0},
                 {"reason", "fail-closed"},
                 {"policy_hash", policy_.policy_hash}});
    }
  }

  void handle_conformance(const httplib::Request&, httplib::Response& res) {
    send_json(res, 200,
              {{"implemented_documents",
                {"risk-engine/2.0", "risk-engine/3.0", "audit-ledger/1.0",
                 "sequence-vectors/1.0"}},
               {"engine_version", to_string(policy_.engine_version)},
               {"policy_hash", policy_.policy_hash},
               {"declaration_date", declaration_date_}});
  }

  void handle_audit_query(const httplib::Request& req, httplib::Response& res) {
    const std::vector<LedgerEvent> events = ledger_snapshot();
    std::size_t from = 0;
    std::size_t to = events.size();
    try {
      if (req.has_param("from")) from = std::stoull(req.get_param_value("from"));
      if (req.has_param("to")) to = std::stoull(req.get_param_value("to"));
    } catch (...) {
      send_json(res, 400, {{"error", "invalid_range"}});
      return;
    }
    if (from > to || to > events.size()) {
      send_json(res, 400, {{"error", "range_out_of_bounds"}});
      return;
    }
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t i = from; i < to; ++i) out.push_back(event_to_json(events[i]));
    send_json(res, 200, {{"from", from}, {"to", to}, {"events", std::move(out)}});
  }

  void handle_health(const httplib::Request&, httplib::Response& res) {
    try {
      // Read-only probe; health checks must not grow the ledger or counters.
      store_->count_requests("health-probe", 1, 0);
      send_json(res, 200, {{"status", "ok"}});
    } catch (const std::exception&) {
      send_json(res, 503, {{"status", "degraded"}});
    }
  }

  PolicyConfig policy_;
  std::shared_ptr<TraceStore> store_;
  UpdateOrdering ordering_;
  std::optional<SigningKey> signing_key_;
  LedgerChain ledger_;
  mutable std::mutex ledger_mu_;
  std::string ledger_path_;
  std::string declaration_date_;
};

}  // namespace acp
