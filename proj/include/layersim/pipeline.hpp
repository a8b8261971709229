#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "layersim/databases.hpp"
#include "layersim/layers.hpp"
#include "layersim/rng.hpp"
#include "layersim/session.hpp"
#include "layersim/time.hpp"

namespace layersim {

struct VmNode {
    std::string id;
    LayerKind layer = LayerKind::CLIENT;
    std::string server_array; // empty for layers that do not service packets
    bool operator==(const VmNode&) const = default;
};

struct PrefEntry {
    std::string target_vm;
    std::uint32_t weight = 1;
    bool operator==(const PrefEntry&) const = default;
};

// VM inventory plus, per layer, the weighted list of next-layer destinations.
// Preferences are shared by all VMs of a layer; a target must always sit on
// the immediate successor layer, so no path can skip an inspection stage.
struct Topology {
    std::map<std::string, VmNode> vms;
    std::map<LayerKind, std::vector<PrefEntry>> preferences;
    bool operator==(const Topology&) const = default;

    const VmNode* find_vm(const std::string& id) const;
};

struct TopologyIssue {
    std::string code;    // TOPOLOGY_SKIP, TOPOLOGY_GAP, UNKNOWN_VM, ...
    std::string message;
    LayerKind source_layer = LayerKind::CLIENT;
    std::string target_vm; // set for per-edge issues
};

// Structural validation: preference targets exist and sit exactly one layer
// downstream, and every layer a session must cross (CLIENT through APPS) has
// at least one VM and one outgoing preference. Empty result means valid.
std::vector<TopologyIssue> validate_topology(const Topology& topology);

// Weighted pick of the next-layer VM. Probability of an entry is
// weight / sum(weights). Throws StateError when current_vm is unknown or its
// layer has no preference entries.
const VmNode& next_hop(const std::string& current_vm, const Topology& topology, Rng& rng);

// One PASS/DROP line of the inspection log.
struct TraceEvent {
    TimeMs time = 0;
    std::string session_id;
    LayerKind layer = LayerKind::FW;
    bool passed = false;
    std::optional<DenyReason> reason; // set on DROP
    std::string next_vm;              // set on PASS (chosen next hop)
    bool operator==(const TraceEvent&) const = default;
};

// "t=100.010 session=lan1.c0.s0.a0 layer=FW event=PASS reason=- next=meta1"
std::string format_trace_line(const TraceEvent& ev);
std::optional<TraceEvent> parse_trace_line(std::string_view line);

// Number of times each predicate ran. Exposed so tests can observe the
// first-fail cutoff; a deny at layer L must leave every later counter at 0.
struct EvalCounters {
    std::uint64_t fw = 0;
    std::uint64_t meta = 0;
    std::uint64_t vault = 0;
    std::uint64_t ips = 0;
    std::uint64_t am = 0;
};

// Single layer predicate as used by the chain: nothing on pass, the deny
// reason on failure. layer must be one of the five inspection layers.
std::optional<DenyReason> layer_check(LayerKind layer, const PacketContents& contents,
                                      const LayerDatabases& dbs,
                                      const std::set<std::string>& issued_challenges);

// Full five-layer evaluation in fixed order FW, META, VAULT, IPS, AM with
// first-fail cutoff. PERMIT iff the vm is registered, the metadata record
// matches, a vault grant intersects the claims, and neither signature scan
// hits.
Verdict evaluate_session(const PacketContents& contents, const LayerDatabases& dbs,
                         const std::set<std::string>& issued_challenges,
                         EvalCounters* counters = nullptr);

struct AdvanceResult {
    Session session;
    std::vector<TraceEvent> events;
};

// One inspection step of the admission walk: routes the session to the next
// layer, runs that layer's predicate (issuing challenges at META from rng),
// and returns the updated session plus emitted trace events. Throws
// StateError when the session is already ESTABLISHED or DENIED. Folding
// advance from INIT reproduces evaluate_session's verdict exactly.
AdvanceResult advance(Session session, const LayerDatabases& dbs, const Topology& topology,
                      Rng& rng, TimeMs now = 0);

// Continuous inspection of one DATA packet: IPS scan then anti-malware scan,
// first hit wins. FW, META and VAULT do not participate; their work on the
// session ended at admission. Throws StateError unless packet.kind == DATA.
std::optional<DenyReason> inspect_data_packet(const Packet& packet, const LayerDatabases& dbs);

// Guarded form: DATA packets only exist for admitted sessions, so this
// throws StateError unless session.state == ESTABLISHED.
std::optional<DenyReason> inspect_data_packet(const Session& session, const Packet& packet,
                                              const LayerDatabases& dbs);

// Checks one session's trace: admission PASS events must be exactly
// FW, META, VAULT, IPS, AM in order, optionally cut short by a single DROP at
// the layer under inspection; after admission only IPS/AM (DATA) events may
// appear, with a DROP ending the stream. Used by tests and `validate --trace`.
bool verify_no_skip(std::span<const TraceEvent> session_trace);

} // namespace layersim
