#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "acp/errors.hpp"

namespace acp {

// Identifies one interaction context: SHA-256 over
// agent_id | capability | resource ('|'-separated). See pattern_key().
struct PatternKey {
  std::string value;  // 64 lowercase hex chars

  auto operator<=>(const PatternKey&) const = default;
};

// The stateful backend contract. Decision logic stays stateless and reads
// accumulated trace counters through this boundary; swapping the backend must
// not change protocol semantics.
//
// Reads count events with timestamp in the half-open window (now - window, now].
// Writes append; nothing ever removes history.
class TraceStore {
 public:
  virtual ~TraceStore() = default;

  virtual std::int64_t count_requests(const std::string& agent_id, std::int64_t window_s,
                                      std::int64_t now) = 0;
  virtual std::int64_t count_denials(const std::string& agent_id, std::int64_t window_s,
                                     std::int64_t now) = 0;
  virtual std::int64_t count_pattern(const PatternKey& key, std::int64_t window_s,
                                     std::int64_t now) = 0;
  virtual bool cooldown_active(const std::string& agent_id, std::int64_t now) = 0;

  virtual void add_request(const std::string& agent_id, std::int64_t t) = 0;
  virtual void add_denial(const std::string& agent_id, std::int64_t t) = 0;
  virtual void add_pattern(const PatternKey& key, std::int64_t t) = 0;
  // Overwrites any existing cooldown; the later expiry wins.
  virtual void set_cooldown(const std::string& agent_id, std::int64_t until) = 0;
};

// Reference in-process backend. Linearizable: one mutex over unsorted
// per-subject timestamp lists, counted by linear scan. Fine for conformance
// and experiments; indexing is a backend concern, not a semantic one.
class InMemoryStore final : public TraceStore {
 public:
  std::int64_t count_requests(const std::string& agent_id, std::int64_t window_s,
                              std::int64_t now) override {
    std::lock_guard lock(mu_);
    return count_in_window(requests_, agent_id, window_s, now);
  }

  std::int64_t count_denials(const std::string& agent_id, std::int64_t window_s,
                             std::int64_t now) override {
    std::lock_guard lock(mu_);
    return count_in_window(denials_, agent_id, window_s, now);
  }

  std::int64_t count_pattern(const PatternKey& key, std::int64_t window_s,
                             std::int64_t now) override {
    std::lock_guard lock(mu_);
    return count_in_window(patterns_, key.value, window_s, now);
  }

  bool cooldown_active(const std::string& agent_id, std::int64_t now) override {
    std::lock_guard lock(mu_);
    auto it = cooldown_until_.find(agent_id);
    return it != cooldown_until_.end() && it->second > now;
  }

  void add_request(const std::string& agent_id, std::int64_t t) override {
    std::lock_guard lock(mu_);
    requests_[agent_id].push_back(t);
  }

  void add_denial(const std::string& agent_id, std::int64_t t) override {
    std::lock_guard lock(mu_);
    denials_[agent_id].push_back(t);
  }

  void add_pattern(const PatternKey& key, std::int64_t t) override {
    std::lock_guard lock(mu_);
    patterns_[key.value].push_back(t);
  }

  void set_cooldown(const std::string& agent_id, std::int64_t until) override {
    std::lock_guard lock(mu_);
    cooldown_until_[agent_id] = until;
  }

 private:
  using EventLists = std::unordered_map<std::string, std::vector<std::int64_t>>;

  static std::int64_t count_in_window(const EventLists& lists, const std::string& key,
                                      std::int64_t window_s, std::int64_t now) {
    auto it = lists.find(key);
    if (it == lists.end()) return 0;
    std::int64_t n = 0;
    for (std::int64_t t : it->second) {
      if (t > now - window_s && t <= now) ++n;
    }
    return n;
  }

  std::mutex mu_;
  EventLists requests_;
  EventLists denials_;
  EventLists patterns_;
  std::unordered_map<std::string, std::int64_t> cooldown_until_;
};

// Stateless baseline backend: reads return zero, writes do nothing. Backing
// the engine with it yields per-request evaluation with no temporal signals.
class NullStore final : public TraceStore {
 public:
  std::int64_t count_requests(const std::string&, std::int64_t, std::int64_t) override { return 0; }
  std::int64_t count_denials(const std::string&, std::int64_t, std::int64_t) override { return 0; }
  std::int64_t count_pattern(const PatternKey&, std::int64_t, std::int64_t) override { return 0; }
  bool cooldown_active(const std::string&, std::int64_t) override { return false; }
  void add_request(const std::string&, std::int64_t) override {}
  void add_denial(const std::string&, std::int64_t) override {}
  void add_pattern(const PatternKey&, std::int64_t) override {}
  void set_cooldown(const std::string&, std::int64_t) override {}
};

// Injects a fixed latency into every contract call, then delegates. Results
// are identical to the inner store's; only timing changes.
class DelayedStore final : public TraceStore {
 public:
  DelayedStore(TraceStore& inner, std::chrono::microseconds delay_per_call)
      : inner_(inner), delay_(delay_per_call) {}

  std::int64_t count_requests(const std::string& a, std::int64_t w, std::int64_t now) override {
    pause();
    return inner_.count_requests(a, w, now);
  }
  std::int64_t count_denials(const std::string& a, std::int64_t w, std::int64_t now) override {
    pause();
    return inner_.count_denials(a, w, now);
  }
  std::int64_t count_pattern(const PatternKey& k, std::int64_t w, std::int64_t now) override {
    pause();
    return inner_.count_pattern(k, w, now);
  }
  bool cooldown_active(const std::string& a, std::int64_t now) override {
    pause();
    return inner_.cooldown_active(a, now);
  }
  void add_request(const std::string& a, std::int64_t t) override {
    pause();
    inner_.add_request(a, t);
  }
  void add_denial(const std::string& a, std::int64_t t) override {
    pause();
    inner_.add_denial(a, t);
  }
  void add_pattern(const PatternKey& k, std::int64_t t) override {
    pause();
    inner_.add_pattern(k, t);
  }
  void set_cooldown(const std::string& a, std::int64_t until) override {
    pause();
    inner_.set_cooldown(a, until);
  }

 private:
  void pause() const {
    if (delay_.count() <= 0) return;
    // sleep_for alone overshoots by more than a scheduler tick at small
    // delays; sleep for most of the interval and spin out the remainder
    // against the deadline. Callers that spin should not run more workers
    // than cores.
    const auto deadline = std::chrono::steady_clock::now() + delay_;
    constexpr auto kSpinSlack = std::chrono::microseconds(1500);
    if (delay_ > kSpinSlack) std::this_thread::sleep_for(delay_ - kSpinSlack);
    while (std::chrono::steady_clock::now() < deadline) {
    }
  }

  TraceStore& inner_;
  std::chrono::microseconds delay_;
};

// Delegates all calls and counts them per method; used to assert the
// one-read cooldown short circuit against the four-read full path.
class InstrumentedStore final : public TraceStore {
 public:
  struct CallCounts {
    std::int64_t count_requests = 0;
    std::int64_t count_denials = 0;
    std::int64_t count_pattern = 0;
    std::int64_t cooldown_active = 0;
    std::int64_t add_request = 0;
    std::int64_t add_denial = 0;
    std::int64_t add_pattern = 0;
    std::int64_t set_cooldown = 0;

    std::int64_t total_reads() const {
      return count_requests + count_denials + count_pattern + cooldown_active;
    }

    bool operator==(const CallCounts&) const = default;
  };

  explicit InstrumentedStore(TraceStore& inner) : inner_(inner) {}

  CallCounts counts() const {
    CallCounts c;
    c.count_requests = count_requests_.load();
    c.count_denials = count_denials_.load();
    c.count_pattern = count_pattern_.load();
    c.cooldown_active = cooldown_active_.load();
    c.add_request = add_request_.load();
    c.add_denial = add_denial_.load();
    c.add_pattern = add_pattern_.load();
    c.set_cooldown = set_cooldown_.load();
    return c;
  }

  void reset_counts() {
    count_requests_ = 0;
    count_denials_ = 0;
    count_pattern_ = 0;
    cooldown_active_ = 0;
    add_request_ = 0;
    add_denial_ = 0;
    add_pattern_ = 0;
    set_cooldown_ = 0;
  }

  std::int64_t count_requests(const std::string& a, std::int64_t w, std::int64_t now) override {
    ++count_requests_;
    return inner_.count_requests(a, w, now);
  }
  std::int64_t count_denials(const std::string& a, std::int64_t w, std::int64_t now) override {
    ++count_denials_;
    return inner_.count_denials(a, w, now);
  }
  std::int64_t count_pattern(const PatternKey& k, std::int64_t w, std::int64_t now) override {
    ++count_pattern_;
    return inner_.count_pattern(k, w, now);
  }
  bool cooldown_active(const std::string& a, std::int64_t now) override {
    ++cooldown_active_;
    return inner_.cooldown_active(a, now);
  }
  void add_request(const std::string& a, std::int64_t t) override {
    ++add_request_;
    inner_.add_request(a, t);
  }
  void add_denial(const std::string& a, std::int64_t t) override {
    ++add_denial_;
    inner_.add_denial(a, t);
  }
  void add_pattern(const PatternKey& k, std::int64_t t) override {
    ++add_pattern_;
    inner_.add_pattern(k, t);
  }
  void set_cooldown(const std::string& a, std::int64_t until) override {
    ++set_cooldown_;
    inner_.set_cooldown(a, until);
  }

 private:
  TraceStore& inner_;
  std::atomic<std::int64_t> count_requests_{0};
  std::atomic<std::int64_t> count_denials_{0};
  std::atomic<std::int64_t> count_pattern_{0};
  std::atomic<std::int64_t> cooldown_active_{0};
  std::atomic<std::int64_t> add_request_{0};
  std::atomic<std::int64_t> add_denial_{0};
  std::atomic<std::int64_t> add_pattern_{0};
  std::atomic<std::int64_t> set_cooldown_{0};
};

inline std::unique_ptr<InstrumentedStore> make_instrumented(TraceStore& inner) {
  return std::make_unique<InstrumentedStore>(inner);
}

}  // namespace acp
