#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "layersim/pipeline.hpp"
#include "layersim/report.hpp"
#include "layersim/time.hpp"

namespace layersim {

struct Scenario;

// Event kinds processed by the run loop. Ties at one timestamp are broken by
// this order, then by insertion sequence, so a run is a pure function of
// (scenario, seed).
enum class EventKind {
    FEED_UPDATE = 0,
    SESSION_START = 1,
    PACKET_ARRIVE = 2,
    SERVICE_DONE = 3,
    SIM_END = 4,
};

// Fixed-size pool of identical servers with deterministic service times.
// A job goes to the server that frees up earliest (ties: lowest index) and
// completes at max(now, free_time) + service_time.
class ServerArray {
public:
    ServerArray(std::string id, std::uint32_t servers, TimeMs service_time);

    // Books the job and returns its completion time.
    TimeMs enqueue_service(TimeMs now);

    // Completion times of everything booked so far, in booking order.
    const std::vector<TimeMs>& completions() const { return completions_; }
    // (start, done) per booking, for work-conservation checks.
    const std::vector<std::pair<TimeMs, TimeMs>>& busy_log() const { return busy_log_; }

    const std::string& id() const { return id_; }
    std::uint32_t servers() const { return static_cast<std::uint32_t>(free_at_.size()); }
    TimeMs service_time() const { return service_time_; }

private:
    std::string id_;
    TimeMs service_time_;
    std::vector<TimeMs> free_at_;
    std::vector<TimeMs> completions_;
    std::vector<std::pair<TimeMs, TimeMs>> busy_log_;
};

struct RunResult {
    RunReport report;
    std::vector<std::string> trace_lines; // admission + data inspection log
};

// Runs the scenario to SIM_END and aggregates the report. seed_override
// replaces the scenario's seed (the CLI --seed flag). keep_event_log makes
// the collector retain its raw event stream for replay checks.
RunResult run_scenario(const Scenario& scenario,
                       std::optional<std::uint64_t> seed_override = std::nullopt,
                       bool keep_event_log = false);

// Same, but also exposes the collector log (only filled with keep_event_log).
RunResult run_scenario(const Scenario& scenario, std::optional<std::uint64_t> seed_override,
                       bool keep_event_log, std::vector<EngineEvent>* event_log_out);

} // namespace layersim
