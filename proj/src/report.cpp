#include "layersim/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "layersim/errors.hpp"

namespace layersim {

namespace {

using ordered_json = nlohmann::ordered_json;

std::uint64_t sum_values(const std::map<std::string, std::uint64_t>& m) {
    std::uint64_t total = 0;
    for (const auto& [key, value] : m) {
        (void)key;
        total += value;
    }
    return total;
}

} // namespace

std::uint64_t LayerStats::dropped_total() const {
    return sum_values(dropped_by_reason);
}

std::uint64_t LayerStats::data_dropped_total() const {
    return sum_values(data_packets_dropped_by_reason);
}

Collector::Collector(TimeMs bucket_width, TimeMs duration, bool keep_log)
    : bucket_width_(bucket_width), duration_(duration), keep_log_(keep_log) {
    if (bucket_width_ <= 0 || duration_ <= 0) {
        throw ConfigError("collector needs positive duration and bucket width");
    }
    for (LayerKind layer : kInspectionLayers) {
        per_layer_[layer]; // report all five layers even when idle
    }
}

TimeMs Collector::bucket_start(TimeMs t) const {
    const TimeMs n = (duration_ + bucket_width_ - 1) / bucket_width_;
    TimeMs b = (t / bucket_width_) * bucket_width_;
    const TimeMs last = (n - 1) * bucket_width_;
    return std::min(b, last);
}

void Collector::declare_lan(const std::string& name) {
    per_lan_[name];
}

void Collector::record(const EngineEvent& ev) {
    if (ev.time < last_time_) {
        throw StateError("collector saw time go backwards: " + format_seconds(ev.time) +
                         " after " + format_seconds(last_time_));
    }
    last_time_ = ev.time;
    if (keep_log_) {
        log_.push_back(ev);
    }

    LanStats& lan = per_lan_[ev.lan];
    const TimeMs bucket = bucket_start(ev.time);
    const auto add_drop = [&] {
        buckets_[bucket].packets_dropped += 1;
        lan.dropped_packets_by_bucket[bucket] += 1;
        totals_.packets_dropped += 1;
    };

    switch (ev.kind) {
    case EngineEvent::Kind::SESSION_STARTED: {
        auto [it, inserted] = sessions_.emplace(ev.session_id, SessionRow{});
        if (!inserted) {
            throw StateError("session '" + ev.session_id + "' started twice");
        }
        session_order_.push_back(ev.session_id);
        it->second.lan = ev.lan;
        it->second.source_vm = ev.source_vm;
        it->second.state = SessionState::AT_FW;
        it->second.start = ev.time;
        lan.sessions_started += 1;
        break;
    }
    case EngineEvent::Kind::LAYER_PASS: {
        LayerStats& ls = per_layer_[ev.layer];
        ls.packets_inspected += 1;
        if (ev.phase == PacketKind::SETUP) {
            ls.sessions_evaluated += 1;
            ls.passed += 1;
            SessionRow& row = sessions_.at(ev.session_id);
            switch (ev.layer) {
            case LayerKind::FW: row.state = SessionState::AT_META; break;
            case LayerKind::META: row.state = SessionState::AT_VAULT; break;
            case LayerKind::VAULT: row.state = SessionState::AT_IPS; break;
            case LayerKind::IPS: row.state = SessionState::AT_AM; break;
            case LayerKind::AM: break; // SESSION_ESTABLISHED follows
            default: throw StateError("pass event on a non-inspection layer");
            }
        }
        break;
    }
    case EngineEvent::Kind::LAYER_DROP: {
        LayerStats& ls = per_layer_[ev.layer];
        ls.packets_inspected += 1;
        const std::string label = deny_reason_label(ev.reason);
        SessionRow& row = sessions_.at(ev.session_id);
        if (ev.phase == PacketKind::SETUP) {
            ls.sessions_evaluated += 1;
            ls.dropped_by_reason[label] += 1;
            lan.denied += 1;
        } else {
            ls.data_packets_dropped_by_reason[label] += 1;
            lan.blocked_after_established += 1;
        }
        row.state = SessionState::DENIED;
        row.deny = DenyInfo{ev.layer, ev.reason};
        row.terminal = ev.time;
        row.dropped += 1;
        add_drop();
        break;
    }
    case EngineEvent::Kind::ACL_DROP: {
        per_layer_[LayerKind::FW].acl_packets_dropped += 1;
        sessions_.at(ev.session_id).dropped += 1;
        add_drop();
        break;
    }
    case EngineEvent::Kind::PACKET_DISCARDED: {
        // Sibling packet of a session already blocked: dropped without a scan.
        per_layer_[ev.layer].data_packets_dropped_by_reason[deny_reason_label(ev.reason)] += 1;
        sessions_.at(ev.session_id).dropped += 1;
        add_drop();
        break;
    }
    case EngineEvent::Kind::PACKET_INJECTED: {
        totals_.packets_injected += 1;
        sessions_.at(ev.session_id).sent += 1;
        lan.bytes_sent += ev.bytes;
        break;
    }
    case EngineEvent::Kind::PACKET_DELIVERED: {
        totals_.packets_delivered += 1;
        lan.bytes_received += ev.bytes;
        buckets_[bucket].packets_delivered += 1;
        break;
    }
    case EngineEvent::Kind::SESSION_ESTABLISHED: {
        SessionRow& row = sessions_.at(ev.session_id);
        row.state = SessionState::ESTABLISHED;
        row.reached_established = true;
        row.established = ev.time;
        lan.established += 1;
        break;
    }
    }
}

namespace {

LatencyStats latency_from_samples(std::vector<TimeMs> samples) {
    LatencyStats stats;
    stats.samples = samples.size();
    std::sort(samples.begin(), samples.end());
    double total = 0.0;
    for (TimeMs s : samples) {
        total += static_cast<double>(s);
    }
    stats.mean_ms = total / static_cast<double>(samples.size());
    // nearest-rank: rank ceil(p * n) picks an actual sample
    const auto rank = [&](double p) {
        const std::size_t r = static_cast<std::size_t>(
            std::max<double>(1.0, std::ceil(p * static_cast<double>(samples.size()))));
        return samples[r - 1];
    };
    stats.median_ms = rank(0.50);
    stats.p95_ms = rank(0.95);
    return stats;
}

} // namespace

RunReport Collector::finalize(ConfigEcho echo) const {
    RunReport report;
    report.config_echo = std::move(echo);
    report.per_layer = per_layer_;
    report.per_lan = per_lan_;

    // Establishment latency per group, from the session rows.
    std::map<std::string, std::vector<TimeMs>> samples;
    for (const std::string& id : session_order_) {
        const SessionRow& row = sessions_.at(id);
        if (row.established.has_value()) {
            samples[row.lan].push_back(*row.established - row.start);
        }
    }
    for (auto& [name, values] : samples) {
        report.per_lan.at(name).latency = latency_from_samples(std::move(values));
    }

    // Contiguous bucket grid over [0, duration).
    const TimeMs n = (duration_ + bucket_width_ - 1) / bucket_width_;
    report.timeseries.reserve(static_cast<std::size_t>(n));
    for (TimeMs i = 0; i < n; ++i) {
        const TimeMs start = i * bucket_width_;
        TimeseriesBucket bucket;
        if (auto it = buckets_.find(start); it != buckets_.end()) {
            bucket = it->second;
        }
        bucket.bucket_start = start;
        const TimeMs close = std::min(start + bucket_width_, duration_);
        for (const auto& [id, row] : sessions_) {
            (void)id;
            // alive at the bucket's closing instant
            if (row.start < close && (!row.terminal.has_value() || *row.terminal >= close)) {
                bucket.active_sessions += 1;
            }
        }
        report.timeseries.push_back(bucket);
    }

    report.sessions.reserve(session_order_.size());
    for (const std::string& id : session_order_) {
        const SessionRow& row = sessions_.at(id);
        SessionSummary summary;
        summary.id = id;
        summary.lan = row.lan;
        summary.source_vm = row.source_vm;
        summary.final_state = std::string(session_state_name(row.state));
        summary.reached_established = row.reached_established;
        if (row.deny.has_value()) {
            summary.failed_layer = std::string(layer_name(row.deny->layer));
            summary.reason = deny_reason_label(row.deny->reason);
        }
        summary.start_time = row.start;
        summary.established_time = row.established;
        summary.end_time = row.terminal.value_or(duration_);
        summary.packets_sent = row.sent;
        summary.packets_dropped = row.dropped;
        report.sessions.push_back(std::move(summary));
    }

    report.totals = totals_;
    if (totals_.packets_delivered + totals_.packets_dropped > totals_.packets_injected) {
        throw StateError("packet conservation violated: more packets resolved than injected");
    }
    report.totals.in_flight_at_end =
        totals_.packets_injected - totals_.packets_delivered - totals_.packets_dropped;
    return report;
}

// ---------------------------------------------------------------------------
// JSON export. Key order is pinned by ordered_json, so equal reports always
// produce identical bytes.

namespace {

ordered_json layer_to_json(const LayerStats& ls) {
    ordered_json j;
    j["sessions_evaluated"] = ls.sessions_evaluated;
    j["passed"] = ls.passed;
    j["dropped_by_reason"] = ordered_json::object();
    for (const auto& [reason, count] : ls.dropped_by_reason) {
        j["dropped_by_reason"][reason] = count;
    }
    j["data_packets_dropped_by_reason"] = ordered_json::object();
    for (const auto& [reason, count] : ls.data_packets_dropped_by_reason) {
        j["data_packets_dropped_by_reason"][reason] = count;
    }
    j["packets_inspected"] = ls.packets_inspected;
    j["acl_packets_dropped"] = ls.acl_packets_dropped;
    return j;
}

LayerStats layer_from_json(const ordered_json& j) {
    LayerStats ls;
    ls.sessions_evaluated = j.at("sessions_evaluated").get<std::uint64_t>();
    ls.passed = j.at("passed").get<std::uint64_t>();
    for (const auto& [reason, count] : j.at("dropped_by_reason").items()) {
        ls.dropped_by_reason[reason] = count.get<std::uint64_t>();
    }
    for (const auto& [reason, count] : j.at("data_packets_dropped_by_reason").items()) {
        ls.data_packets_dropped_by_reason[reason] = count.get<std::uint64_t>();
    }
    ls.packets_inspected = j.at("packets_inspected").get<std::uint64_t>();
    ls.acl_packets_dropped = j.at("acl_packets_dropped").get<std::uint64_t>();
    return ls;
}

ordered_json lan_to_json(const LanStats& lan) {
    ordered_json j;
    j["sessions_started"] = lan.sessions_started;
    j["established"] = lan.established;
    j["denied"] = lan.denied;
    j["blocked_after_established"] = lan.blocked_after_established;
    if (lan.latency.has_value()) {
        j["latency"] = {
            {"samples", lan.latency->samples},
            {"mean_ms", lan.latency->mean_ms},
            {"median_ms", lan.latency->median_ms},
            {"p95_ms", lan.latency->p95_ms},
        };
    } else {
        j["latency"] = nullptr;
    }
    j["bytes_sent"] = lan.bytes_sent;
    j["bytes_received"] = lan.bytes_received;
    j["dropped_packets_by_bucket"] = ordered_json::object();
    for (const auto& [bucket, count] : lan.dropped_packets_by_bucket) {
        j["dropped_packets_by_bucket"][std::to_string(bucket)] = count;
    }
    return j;
}

LanStats lan_from_json(const ordered_json& j) {
    LanStats lan;
    lan.sessions_started = j.at("sessions_started").get<std::uint64_t>();
    lan.established = j.at("established").get<std::uint64_t>();
    lan.denied = j.at("denied").get<std::uint64_t>();
    lan.blocked_after_established = j.at("blocked_after_established").get<std::uint64_t>();
    if (!j.at("latency").is_null()) {
        LatencyStats stats;
        stats.samples = j["latency"].at("samples").get<std::uint64_t>();
        stats.mean_ms = j["latency"].at("mean_ms").get<double>();
        stats.median_ms = j["latency"].at("median_ms").get<TimeMs>();
        stats.p95_ms = j["latency"].at("p95_ms").get<TimeMs>();
        lan.latency = stats;
    }
    lan.bytes_sent = j.at("bytes_sent").get<std::uint64_t>();
    lan.bytes_received = j.at("bytes_received").get<std::uint64_t>();
    for (const auto& [bucket, count] : j.at("dropped_packets_by_bucket").items()) {
        lan.dropped_packets_by_bucket[std::stoll(bucket)] = count.get<std::uint64_t>();
    }
    return lan;
}

} // namespace

std::string report_to_json(const RunReport& report) {
    ordered_json j;
    j["config_echo"] = {
        {"scenario_digest", report.config_echo.scenario_digest},
        {"seed", report.config_echo.seed},
        {"duration_ms", report.config_echo.duration},
        {"bucket_width_ms", report.config_echo.bucket_width},
        {"link_delay_ms", report.config_echo.link_delay},
    };
    j["config_echo"]["packet_size_bytes"] = ordered_json::object();
    for (const auto& [group, bytes] : report.config_echo.packet_size_bytes) {
        j["config_echo"]["packet_size_bytes"][group] = bytes;
    }
    j["totals"] = {
        {"packets_injected", report.totals.packets_injected},
        {"packets_delivered", report.totals.packets_delivered},
        {"packets_dropped", report.totals.packets_dropped},
        {"in_flight_at_end", report.totals.in_flight_at_end},
    };
    j["per_layer"] = ordered_json::object();
    for (const auto& [layer, stats] : report.per_layer) {
        j["per_layer"][std::string(layer_name(layer))] = layer_to_json(stats);
    }
    j["per_lan"] = ordered_json::object();
    for (const auto& [name, stats] : report.per_lan) {
        j["per_lan"][name] = lan_to_json(stats);
    }
    j["timeseries"] = ordered_json::array();
    for (const TimeseriesBucket& bucket : report.timeseries) {
        j["timeseries"].push_back({
            {"bucket_start_ms", bucket.bucket_start},
            {"packets_dropped", bucket.packets_dropped},
            {"packets_delivered", bucket.packets_delivered},
            {"active_sessions", bucket.active_sessions},
        });
    }
    j["sessions"] = ordered_json::array();
    for (const SessionSummary& s : report.sessions) {
        ordered_json row;
        row["id"] = s.id;
        row["lan"] = s.lan;
        row["source_vm"] = s.source_vm;
        row["final_state"] = s.final_state;
        row["reached_established"] = s.reached_established;
        row["failed_layer"] = s.failed_layer.has_value() ? ordered_json(*s.failed_layer)
                                                         : ordered_json(nullptr);
        row["reason"] = s.reason.has_value() ? ordered_json(*s.reason) : ordered_json(nullptr);
        row["start_ms"] = s.start_time;
        row["established_ms"] = s.established_time.has_value()
                                    ? ordered_json(*s.established_time)
                                    : ordered_json(nullptr);
        row["end_ms"] = s.end_time;
        row["packets_sent"] = s.packets_sent;
        row["packets_dropped"] = s.packets_dropped;
        j["sessions"].push_back(std::move(row));
    }
    return j.dump(2) + "\n";
}

RunReport report_from_json(const std::string& json_text) {
    const ordered_json j = ordered_json::parse(json_text);
    RunReport report;
    const auto& echo = j.at("config_echo");
    report.config_echo.scenario_digest = echo.at("scenario_digest").get<std::string>();
    report.config_echo.seed = echo.at("seed").get<std::uint64_t>();
    report.config_echo.duration = echo.at("duration_ms").get<TimeMs>();
    report.config_echo.bucket_width = echo.at("bucket_width_ms").get<TimeMs>();
    report.config_echo.link_delay = echo.at("link_delay_ms").get<TimeMs>();
    for (const auto& [group, bytes] : echo.at("packet_size_bytes").items()) {
        report.config_echo.packet_size_bytes[group] = bytes.get<std::uint64_t>();
    }
    const auto& totals = j.at("totals");
    report.totals.packets_injected = totals.at("packets_injected").get<std::uint64_t>();
    report.totals.packets_delivered = totals.at("packets_delivered").get<std::uint64_t>();
    report.totals.packets_dropped = totals.at("packets_dropped").get<std::uint64_t>();
    report.totals.in_flight_at_end = totals.at("in_flight_at_end").get<std::uint64_t>();
    for (const auto& [name, stats] : j.at("per_layer").items()) {
        const auto layer = layer_from_name(name);
        if (!layer.has_value()) {
            throw ConfigError("unknown layer '" + name + "' in report");
        }
        report.per_layer[*layer] = layer_from_json(stats);
    }
    for (const auto& [name, stats] : j.at("per_lan").items()) {
        report.per_lan[name] = lan_from_json(stats);
    }
    for (const auto& row : j.at("timeseries")) {
        TimeseriesBucket bucket;
        bucket.bucket_start = row.at("bucket_start_ms").get<TimeMs>();
        bucket.packets_dropped = row.at("packets_dropped").get<std::uint64_t>();
        bucket.packets_delivered = row.at("packets_delivered").get<std::uint64_t>();
        bucket.active_sessions = row.at("active_sessions").get<std::uint64_t>();
        report.timeseries.push_back(bucket);
    }
    for (const auto& row : j.at("sessions")) {
        SessionSummary s;
        s.id = row.at("id").get<std::string>();
        s.lan = row.at("lan").get<std::string>();
        s.source_vm = row.at("source_vm").get<std::string>();
        s.final_state = row.at("final_state").get<std::string>();
        s.reached_established = row.at("reached_established").get<bool>();
        if (!row.at("failed_layer").is_null()) {
            s.failed_layer = row["failed_layer"].get<std::string>();
        }
        if (!row.at("reason").is_null()) {
            s.reason = row["reason"].get<std::string>();
        }
        s.start_time = row.at("start_ms").get<TimeMs>();
        if (!row.at("established_ms").is_null()) {
            s.established_time = row["established_ms"].get<TimeMs>();
        }
        s.end_time = row.at("end_ms").get<TimeMs>();
        s.packets_sent = row.at("packets_sent").get<std::uint64_t>();
        s.packets_dropped = row.at("packets_dropped").get<std::uint64_t>();
        report.sessions.push_back(std::move(s));
    }
    return report;
}

// ---------------------------------------------------------------------------
// CSV export.

namespace {

std::string format_mean(double mean) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.6f", mean);
    return buffer;
}

} // namespace

std::vector<std::pair<std::string, std::string>> report_to_csv(const RunReport& report) {
    std::vector<std::pair<std::string, std::string>> files;

    {
        std::ostringstream out;
        out << "layer,sessions_evaluated,passed,sessions_dropped,data_packets_dropped,"
               "packets_inspected,acl_packets_dropped\n";
        for (const auto& [layer, ls] : report.per_layer) {
            out << layer_name(layer) << ',' << ls.sessions_evaluated << ',' << ls.passed << ','
                << ls.dropped_total() << ',' << ls.data_dropped_total() << ','
                << ls.packets_inspected << ',' << ls.acl_packets_dropped << '\n';
        }
        files.emplace_back("layers.csv", out.str());
    }
    {
        std::ostringstream out;
        out << "lan,sessions_started,established,denied,blocked_after_established,"
               "latency_samples,latency_mean_ms,latency_median_ms,latency_p95_ms,"
               "bytes_sent,bytes_received\n";
        for (const auto& [name, lan] : report.per_lan) {
            out << name << ',' << lan.sessions_started << ',' << lan.established << ','
                << lan.denied << ',' << lan.blocked_after_established << ',';
            if (lan.latency.has_value()) {
                out << lan.latency->samples << ',' << format_mean(lan.latency->mean_ms) << ','
                    << lan.latency->median_ms << ',' << lan.latency->p95_ms;
            } else {
                out << "0,,,";
            }
            out << ',' << lan.bytes_sent << ',' << lan.bytes_received << '\n';
        }
        files.emplace_back("lans.csv", out.str());
    }
    {
        std::ostringstream out;
        out << "bucket_start_ms,packets_dropped,packets_delivered,active_sessions\n";
        for (const TimeseriesBucket& bucket : report.timeseries) {
            out << bucket.bucket_start << ',' << bucket.packets_dropped << ','
                << bucket.packets_delivered << ',' << bucket.active_sessions << '\n';
        }
        files.emplace_back("timeseries.csv", out.str());
    }
    {
        std::ostringstream out;
        out << "id,lan,source_vm,final_state,reached_established,failed_layer,reason,"
               "start_ms,established_ms,end_ms,packets_sent,packets_dropped\n";
        for (const SessionSummary& s : report.sessions) {
            out << s.id << ',' << s.lan << ',' << s.source_vm << ',' << s.final_state << ','
                << (s.reached_established ? 1 : 0) << ',' << s.failed_layer.value_or("") << ','
                << s.reason.value_or("") << ',' << s.start_time << ',';
            if (s.established_time.has_value()) {
                out << *s.established_time;
            }
            out << ',' << s.end_time << ',' << s.packets_sent << ',' << s.packets_dropped
                << '\n';
        }
        files.emplace_back("sessions.csv", out.str());
    }
    return files;
}

void write_report(const RunReport& report, const std::string& out_dir,
                  const std::string& format) {
    if (format != "json" && format != "csv" && format != "both") {
        throw ConfigError("unknown report format '" + format + "'");
    }
    std::filesystem::create_directories(out_dir);
    const auto write_file = [&](const std::string& name, const std::string& content) {
        const std::filesystem::path path = std::filesystem::path(out_dir) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw ConfigError("cannot write '" + path.string() + "'");
        }
        out << content;
    };
    if (format == "json" || format == "both") {
        write_file("report.json", report_to_json(report));
    }
    if (format == "csv" || format == "both") {
        for (const auto& [name, content] : report_to_csv(report)) {
            write_file(name, content);
        }
    }
}

} // namespace layersim
