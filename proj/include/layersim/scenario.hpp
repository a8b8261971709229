#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "layersim/attacks.hpp"
#include "layersim/databases.hpp"
#include "layersim/pipeline.hpp"
#include "layersim/time.hpp"

namespace layersim {

enum class Repeat { ONCE, INTERARRIVAL };

// One LAN of identical clients. Each client opens a session at a start time
// drawn from start_time; with INTERARRIVAL it keeps opening new ones spaced
// by interarrival draws. After establishment a session emits DATA packets
// every data_interval until the packet budget or the run ends. A denied
// client retries the whole session up to `retries` times, retry_delay apart.
struct Workload {
    std::string name;
    std::string tenant_id;
    std::vector<std::string> vm_profiles; // CLIENT VMs, assigned round-robin
    std::uint32_t client_count = 1;
    UniformDist start_time;
    Repeat repeatability = Repeat::ONCE;
    UniformDist interarrival;
    std::int64_t data_packets_per_session = 0; // -1: until the run ends
    TimeMs data_interval = kMsPerSecond;
    std::uint64_t packet_size_bytes = 1000;
    std::string protocol = "tcp";
    std::uint32_t retries = 0;
    TimeMs retry_delay = 5 * kMsPerSecond;
    bool operator==(const Workload&) const = default;
};

struct AttackerEntry {
    AttackerProfile profile;
    SessionPlan plan;
    std::string protocol = "tcp";
    std::uint32_t retries = 0;
    TimeMs retry_delay = 5 * kMsPerSecond;
    bool operator==(const AttackerEntry&) const = default;
};

// Signature delivery scheduled mid-run. Installed between events: every
// packet inspected afterwards sees the new snapshot.
struct FeedUpdate {
    TimeMs time = 0;
    SignatureKind layer = SignatureKind::EXPLOIT;
    std::set<std::string> signatures;
    bool operator==(const FeedUpdate&) const = default;
};

struct ServerArrayCfg {
    std::string id;
    std::uint32_t servers = 1;
    bool operator==(const ServerArrayCfg&) const = default;
};

struct Scenario {
    std::uint64_t seed = 0;
    TimeMs sim_duration = 0;
    TimeMs bucket_width = 10 * kMsPerSecond;
    TimeMs link_delay = 0;
    std::map<LayerKind, TimeMs> service_times;
    std::map<std::string, ServerArrayCfg> arrays;
    Topology topology;
    LayerDatabases databases;
    std::vector<Workload> workloads;
    std::vector<AttackerEntry> attackers;
    std::vector<FeedUpdate> feed_updates;
    bool operator==(const Scenario&) const = default;

    TimeMs service_time(LayerKind layer) const;
};

// One validation or parse failure. line is 1-based; 0 when the failure is
// not tied to a single line. Codes are stable strings (UNKNOWN_KEY,
// TOPOLOGY_SKIP, BAD_VALUE, ...) so callers can match on them.
struct Diagnostic {
    int line = 0;
    std::string code;
    std::string message;
    bool operator==(const Diagnostic&) const = default;
};

std::string format_diagnostic(const Diagnostic& d);

struct ParseResult {
    std::optional<Scenario> scenario; // set iff diagnostics is empty
    std::vector<Diagnostic> diagnostics;
    bool ok() const { return scenario.has_value(); }
};

// Parses and validates the sectioned key-value scenario format. Unknown
// sections or keys are hard errors; all structural cross-references
// (VMs, tenants, arrays, keys, preference layering) are checked here so the
// engine can assume a well-formed world.
ParseResult parse_scenario(std::string_view text);

// Reads the file and parses it. I/O failures surface as a diagnostic.
ParseResult load_scenario_file(const std::string& path);

// Canonical text form. parse(serialize(parse(text))) reproduces the same
// Scenario value.
std::string serialize_scenario(const Scenario& scenario);

} // namespace layersim
