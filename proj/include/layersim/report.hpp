#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "layersim/layers.hpp"
#include "layersim/session.hpp"
#include "layersim/time.hpp"

namespace layersim {

// Counters for one inspection layer. sessions_evaluated counts SETUP
// verdicts, so passed + sum(dropped_by_reason) == sessions_evaluated.
// packets_inspected additionally counts every DATA packet scanned here.
struct LayerStats {
    std::uint64_t sessions_evaluated = 0;
    std::uint64_t passed = 0;
    std::map<std::string, std::uint64_t> dropped_by_reason;
    std::map<std::string, std::uint64_t> data_packets_dropped_by_reason;
    std::uint64_t packets_inspected = 0;
    std::uint64_t acl_packets_dropped = 0; // firewall only
    bool operator==(const LayerStats&) const = default;

    std::uint64_t dropped_total() const;
    std::uint64_t data_dropped_total() const;
};

// Establishment latency summary in milliseconds. median and p95 use the
// nearest-rank method, so both are actual samples.
struct LatencyStats {
    std::uint64_t samples = 0;
    double mean_ms = 0.0;
    TimeMs median_ms = 0;
    TimeMs p95_ms = 0;
    bool operator==(const LatencyStats&) const = default;
};

struct LanStats {
    std::uint64_t sessions_started = 0;
    std::uint64_t established = 0; // reached ESTABLISHED at some point
    std::uint64_t denied = 0;      // denied during admission
    std::uint64_t blocked_after_established = 0;
    std::optional<LatencyStats> latency;
    std::uint64_t bytes_sent = 0;
    std::uint64_t bytes_received = 0;
    std::map<TimeMs, std::uint64_t> dropped_packets_by_bucket; // bucket start -> drops
    bool operator==(const LanStats&) const = default;
};

struct TimeseriesBucket {
    TimeMs bucket_start = 0;
    std::uint64_t packets_dropped = 0;
    std::uint64_t packets_delivered = 0;
    std::uint64_t active_sessions = 0;
    bool operator==(const TimeseriesBucket&) const = default;
};

struct SessionSummary {
    std::string id;
    std::string lan;
    std::string source_vm;
    std::string final_state;
    bool reached_established = false;
    std::optional<std::string> failed_layer;
    std::optional<std::string> reason;
    TimeMs start_time = 0;
    std::optional<TimeMs> established_time;
    TimeMs end_time = 0;
    std::uint64_t packets_sent = 0;
    std::uint64_t packets_dropped = 0;
    bool operator==(const SessionSummary&) const = default;
};

struct ConfigEcho {
    std::string scenario_digest; // fnv1a64 of the canonical scenario text
    std::uint64_t seed = 0;
    TimeMs duration = 0;
    TimeMs bucket_width = 0;
    TimeMs link_delay = 0;
    std::map<std::string, std::uint64_t> packet_size_bytes; // per group, an input
    bool operator==(const ConfigEcho&) const = default;
};

struct Totals {
    std::uint64_t packets_injected = 0;
    std::uint64_t packets_delivered = 0;
    std::uint64_t packets_dropped = 0;
    std::uint64_t in_flight_at_end = 0;
    bool operator==(const Totals&) const = default;
};

struct RunReport {
    ConfigEcho config_echo;
    Totals totals;
    std::map<LayerKind, LayerStats> per_layer; // the five inspection layers
    std::map<std::string, LanStats> per_lan;   // workloads and attacker groups
    std::vector<TimeseriesBucket> timeseries;  // contiguous, covers [0, duration)
    std::vector<SessionSummary> sessions;
    bool operator==(const RunReport&) const = default;
};

// One observation handed to the collector. The engine reports everything
// through this type so a recorded stream can be replayed into a fresh
// collector and must reproduce the report byte for byte.
struct EngineEvent {
    enum class Kind {
        SESSION_STARTED,
        LAYER_PASS,
        LAYER_DROP,
        ACL_DROP,         // firewall access list, before any inspection
        PACKET_INJECTED,
        PACKET_DELIVERED,
        SESSION_ESTABLISHED,
        PACKET_DISCARDED, // in-flight packet of an already blocked session
    };
    Kind kind = Kind::SESSION_STARTED;
    TimeMs time = 0;
    std::string session_id;
    std::string lan;
    std::string source_vm;                    // SESSION_STARTED
    LayerKind layer = LayerKind::FW;          // LAYER_* / ACL_DROP
    PacketKind phase = PacketKind::SETUP;     // LAYER_*
    DenyReason reason;                        // LAYER_DROP
    std::uint64_t bytes = 0;                  // PACKET_*
    bool operator==(const EngineEvent&) const = default;
};

// Aggregates engine events into a RunReport. record() asserts that event
// times never go backwards; an out-of-order record is an engine bug, not a
// recoverable condition.
class Collector {
public:
    Collector(TimeMs bucket_width, TimeMs duration, bool keep_log = false);

    void record(const EngineEvent& event);

    // Pass 1 for every group that should appear in per_lan even if idle.
    void declare_lan(const std::string& name);

    RunReport finalize(ConfigEcho echo) const;

    const std::vector<EngineEvent>& log() const { return log_; }

private:
    struct SessionRow {
        std::string lan;
        std::string source_vm;
        SessionState state = SessionState::INIT;
        bool reached_established = false;
        std::optional<DenyInfo> deny;
        TimeMs start = 0;
        std::optional<TimeMs> established;
        std::optional<TimeMs> terminal; // deny or post-establishment block
        std::uint64_t sent = 0;
        std::uint64_t dropped = 0;
    };

    TimeMs bucket_start(TimeMs t) const;

    TimeMs bucket_width_;
    TimeMs duration_;
    bool keep_log_;
    TimeMs last_time_ = 0;
    std::vector<EngineEvent> log_;
    std::map<LayerKind, LayerStats> per_layer_;
    std::map<std::string, LanStats> per_lan_;
    std::map<TimeMs, TimeseriesBucket> buckets_;
    std::map<std::string, SessionRow> sessions_;
    std::vector<std::string> session_order_;
    Totals totals_;
};

// JSON document with a fixed key order; identical reports serialize to
// identical bytes.
std::string report_to_json(const RunReport& report);

// Inverse of report_to_json, used to prove the export loses nothing.
RunReport report_from_json(const std::string& json_text);

// CSV views: one (filename, content) pair per tabular report section.
std::vector<std::pair<std::string, std::string>> report_to_csv(const RunReport& report);

// Writes report.json and/or the CSV files into out_dir.
// format: "json", "csv" or "both". Throws ConfigError on unknown format.
void write_report(const RunReport& report, const std::string& out_dir,
                  const std::string& format);

} // namespace layersim
