#include "layersim/pipeline.hpp"

#include <sstream>

#include "layersim/errors.hpp"

namespace layersim {

const VmNode* Topology::find_vm(const std::string& id) const {
    auto it = vms.find(id);
    return it == vms.end() ? nullptr : &it->second;
}

std::vector<TopologyIssue> validate_topology(const Topology& topology) {
    std::vector<TopologyIssue> issues;

    std::map<LayerKind, int> vm_count;
    for (const auto& [id, node] : topology.vms) {
        ++vm_count[node.layer];
    }

    // Sessions must be able to cross CLIENT..APPS; DB is optional storage.
    for (LayerKind layer : kLayerOrder) {
        if (layer == LayerKind::DB) {
            continue;
        }
        if (vm_count[layer] == 0) {
            issues.push_back({"TOPOLOGY_GAP",
                              "no vm on layer " + std::string(layer_name(layer)), layer, ""});
        }
    }

    for (const auto& [source, entries] : topology.preferences) {
        const auto successor = layer_successor(source);
        if (!successor.has_value()) {
            issues.push_back({"TOPOLOGY_SKIP", "layer DB is terminal and cannot have preferences",
                              source, ""});
            continue;
        }
        if (entries.empty()) {
            issues.push_back({"TOPOLOGY_GAP",
                              "empty preference list for layer " +
                                  std::string(layer_name(source)),
                              source, ""});
        }
        for (const PrefEntry& entry : entries) {
            const VmNode* target = topology.find_vm(entry.target_vm);
            if (target == nullptr) {
                issues.push_back({"UNKNOWN_VM",
                                  "preference target '" + entry.target_vm + "' is not a vm",
                                  source, entry.target_vm});
                continue;
            }
            if (target->layer != *successor) {
                std::ostringstream msg;
                msg << "preference " << layer_name(source) << " -> '" << entry.target_vm
                    << "' lands on " << layer_name(target->layer) << ", expected "
                    << layer_name(*successor) << "; layers cannot be skipped";
                issues.push_back({"TOPOLOGY_SKIP", msg.str(), source, entry.target_vm});
            }
            if (entry.weight == 0) {
                issues.push_back({"BAD_VALUE",
                                  "preference weight for '" + entry.target_vm + "' must be >= 1",
                                  source, entry.target_vm});
            }
        }
    }

    // Every layer a session leaves needs somewhere to go.
    for (LayerKind layer : kLayerOrder) {
        if (layer == LayerKind::APPS || layer == LayerKind::DB) {
            continue;
        }
        auto it = topology.preferences.find(layer);
        if (it == topology.preferences.end() || it->second.empty()) {
            issues.push_back({"TOPOLOGY_GAP",
                              "no preference entries for layer " +
                                  std::string(layer_name(layer)),
                              layer, ""});
        }
    }

    return issues;
}

const VmNode& next_hop(const std::string& current_vm, const Topology& topology, Rng& rng) {
    const VmNode* node = topology.find_vm(current_vm);
    if (node == nullptr) {
        throw StateError("next_hop from unknown vm '" + current_vm + "'");
    }
    auto prefs = topology.preferences.find(node->layer);
    if (prefs == topology.preferences.end() || prefs->second.empty()) {
        throw StateError("no destination preferences for layer " +
                         std::string(layer_name(node->layer)));
    }
    std::uint64_t total = 0;
    for (const PrefEntry& entry : prefs->second) {
        total += entry.weight;
    }
    std::uint64_t pick = rng.below(total);
    for (const PrefEntry& entry : prefs->second) {
        if (pick < entry.weight) {
            const VmNode* target = topology.find_vm(entry.target_vm);
            if (target == nullptr) {
                throw StateError("preference target '" + entry.target_vm + "' is not a vm");
            }
            return *target;
        }
        pick -= entry.weight;
    }
    throw StateError("weighted pick ran past the preference list"); // unreachable
}

std::string format_trace_line(const TraceEvent& ev) {
    std::ostringstream out;
    out << "t=" << format_seconds(ev.time) << " session=" << ev.session_id
        << " layer=" << layer_name(ev.layer) << " event=" << (ev.passed ? "PASS" : "DROP")
        << " reason=" << (ev.reason.has_value() ? deny_code_name(ev.reason->code) : "-")
        << " next=" << (ev.next_vm.empty() ? "-" : ev.next_vm);
    return out.str();
}

namespace {

bool take_field(std::string_view& rest, std::string_view key, std::string_view& value) {
    if (rest.substr(0, key.size()) != key) {
        return false;
    }
    rest.remove_prefix(key.size());
    const std::size_t space = rest.find(' ');
    value = rest.substr(0, space);
    rest.remove_prefix(space == std::string_view::npos ? rest.size() : space + 1);
    return !value.empty();
}

} // namespace

std::optional<TraceEvent> parse_trace_line(std::string_view line) {
    TraceEvent ev;
    std::string_view rest = line;
    std::string_view t, session, layer, event, reason, next;
    if (!take_field(rest, "t=", t) || !take_field(rest, "session=", session) ||
        !take_field(rest, "layer=", layer) || !take_field(rest, "event=", event) ||
        !take_field(rest, "reason=", reason) || !take_field(rest, "next=", next) ||
        !rest.empty()) {
        return std::nullopt;
    }
    const auto time = parse_seconds(t);
    const auto layer_kind = layer_from_name(layer);
    if (!time.has_value() || !layer_kind.has_value() || (event != "PASS" && event != "DROP")) {
        return std::nullopt;
    }
    ev.time = *time;
    ev.session_id = std::string(session);
    ev.layer = *layer_kind;
    ev.passed = event == "PASS";
    if (reason != "-") {
        const auto code = deny_code_from_name(reason);
        if (!code.has_value()) {
            return std::nullopt;
        }
        ev.reason = DenyReason{*code, ""};
    }
    if (next != "-") {
        ev.next_vm = std::string(next);
    }
    return ev;
}

std::optional<DenyReason> layer_check(LayerKind layer, const PacketContents& contents,
                                      const LayerDatabases& dbs,
                                      const std::set<std::string>& issued_challenges) {
    switch (layer) {
    case LayerKind::FW:
        if (!fw_match(contents, dbs.fw)) {
            return DenyReason{DenyCode::MISSING_VM_ID, ""};
        }
        return std::nullopt;
    case LayerKind::META:
        if (!meta_match(contents, dbs.meta, issued_challenges)) {
            return DenyReason{DenyCode::METADATA_MISMATCH, ""};
        }
        return std::nullopt;
    case LayerKind::VAULT:
        if (vault_lookup(contents, dbs.vault).empty()) {
            return DenyReason{DenyCode::NO_VAULT_GRANT, ""};
        }
        return std::nullopt;
    case LayerKind::IPS:
        if (auto hit = ips_scan(contents, dbs.ips)) {
            return DenyReason{DenyCode::EXPLOIT_HIT, *hit};
        }
        return std::nullopt;
    case LayerKind::AM:
        if (auto hit = antimalware_scan(contents, dbs.antimal)) {
            return DenyReason{DenyCode::MALWARE_HIT, *hit};
        }
        return std::nullopt;
    default:
        throw StateError("layer " + std::string(layer_name(layer)) + " does not inspect");
    }
}

Verdict evaluate_session(const PacketContents& contents, const LayerDatabases& dbs,
                         const std::set<std::string>& issued_challenges,
                         EvalCounters* counters) {
    for (LayerKind layer : kInspectionLayers) {
        if (counters != nullptr) {
            switch (layer) {
            case LayerKind::FW: ++counters->fw; break;
            case LayerKind::META: ++counters->meta; break;
            case LayerKind::VAULT: ++counters->vault; break;
            case LayerKind::IPS: ++counters->ips; break;
            case LayerKind::AM: ++counters->am; break;
            default: break;
            }
        }
        if (auto reason = layer_check(layer, contents, dbs, issued_challenges)) {
            return Verdict{Decision::DENY, layer, std::move(reason)};
        }
    }
    return Verdict{Decision::PERMIT, std::nullopt, std::nullopt};
}

namespace {

// Layer whose predicate runs when advance() is called in a given state.
LayerKind inspecting_layer(SessionState state) {
    switch (state) {
    case SessionState::INIT: return LayerKind::FW;
    case SessionState::AT_FW: return LayerKind::FW;
    case SessionState::AT_META: return LayerKind::META;
    case SessionState::AT_VAULT: return LayerKind::VAULT;
    case SessionState::AT_IPS: return LayerKind::IPS;
    case SessionState::AT_AM: return LayerKind::AM;
    default: throw StateError("advance on a terminal session");
    }
}

SessionState arrival_state(LayerKind layer) {
    switch (layer) {
    case LayerKind::FW: return SessionState::AT_FW;
    case LayerKind::META: return SessionState::AT_META;
    case LayerKind::VAULT: return SessionState::AT_VAULT;
    case LayerKind::IPS: return SessionState::AT_IPS;
    case LayerKind::AM: return SessionState::AT_AM;
    case LayerKind::APPS: return SessionState::ESTABLISHED;
    default: throw StateError("sessions never arrive at " + std::string(layer_name(layer)));
    }
}

} // namespace

AdvanceResult advance(Session session, const LayerDatabases& dbs, const Topology& topology,
                      Rng& rng, TimeMs now) {
    if (session.state == SessionState::ESTABLISHED || session.state == SessionState::DENIED) {
        throw StateError("advance on session '" + session.id + "' in terminal state " +
                         std::string(session_state_name(session.state)));
    }

    AdvanceResult result;
    if (session.state == SessionState::INIT) {
        // Dispatch: the SETUP packet travels to a firewall before anything
        // can be inspected.
        const VmNode& fw = next_hop(session.current_vm, topology, rng);
        session.current_vm = fw.id;
        session.path[LayerKind::FW] = fw.id;
        session.transition(SessionState::AT_FW);
    }

    const LayerKind layer = inspecting_layer(session.state);
    std::set<std::string> issued;
    if (layer == LayerKind::META && dbs.meta.find(session.contents.tenant_id) != nullptr) {
        issued = generate_challenges(dbs.meta, session.contents.tenant_id, rng);
    }

    TraceEvent ev;
    ev.time = now;
    ev.session_id = session.id;
    ev.layer = layer;

    if (auto reason = layer_check(layer, session.contents, dbs, issued)) {
        ev.passed = false;
        ev.reason = *reason;
        session.deny_info = DenyInfo{layer, *reason};
        session.transition(SessionState::DENIED);
        ++session.packets_dropped;
    } else {
        const VmNode& next = next_hop(session.current_vm, topology, rng);
        ev.passed = true;
        ev.next_vm = next.id;
        session.path[next.layer] = next.id;
        session.current_vm = next.id;
        session.transition(arrival_state(next.layer));
    }

    result.events.push_back(std::move(ev));
    result.session = std::move(session);
    return result;
}

std::optional<DenyReason> inspect_data_packet(const Packet& packet, const LayerDatabases& dbs) {
    if (packet.kind != PacketKind::DATA) {
        throw StateError("inspect_data_packet needs a DATA packet");
    }
    if (auto hit = ips_scan(packet.contents, dbs.ips)) {
        return DenyReason{DenyCode::EXPLOIT_HIT, *hit};
    }
    if (auto hit = antimalware_scan(packet.contents, dbs.antimal)) {
        return DenyReason{DenyCode::MALWARE_HIT, *hit};
    }
    return std::nullopt;
}

std::optional<DenyReason> inspect_data_packet(const Session& session, const Packet& packet,
                                              const LayerDatabases& dbs) {
    if (!session.established()) {
        throw StateError("session '" + session.id + "' is " +
                         std::string(session_state_name(session.state)) +
                         "; only established sessions carry DATA packets");
    }
    return inspect_data_packet(packet, dbs);
}

bool verify_no_skip(std::span<const TraceEvent> session_trace) {
    if (session_trace.empty()) {
        return false; // a completed session always logged something
    }
    std::size_t next_pass = 0; // index into kInspectionLayers
    bool established = false;
    bool blocked = false;
    for (const TraceEvent& ev : session_trace) {
        if (blocked) {
            return false; // nothing may follow a drop
        }
        if (!established) {
            // Admission phase: the next event must concern the layer whose
            // verdict is pending, pass or drop.
            if (next_pass >= kInspectionLayers.size() ||
                ev.layer != kInspectionLayers[next_pass]) {
                return false;
            }
            if (ev.passed) {
                ++next_pass;
                established = next_pass == kInspectionLayers.size();
            } else {
                blocked = true;
            }
        } else {
            // Continuous inspection: only the scanning layers ever touch an
            // admitted session again.
            if (ev.layer != LayerKind::IPS && ev.layer != LayerKind::AM) {
                return false;
            }
            if (!ev.passed) {
                blocked = true;
            }
        }
    }
    return established || blocked;
}

} // namespace layersim
