#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "layersim/databases.hpp"
#include "layersim/pipeline.hpp"
#include "layersim/session.hpp"
#include "layersim/time.hpp"

namespace layersim {

// The four hostile behaviours the harness can generate.
//
//   INSIDER_SUBSCRIBER  valid subscription VM, no tenant metadata behind it;
//                       clears the firewall, dies at the metadata layer.
//   EXPLOIT_INJECTOR    stolen tenant identity plus a known exploit hash in
//                       the payload; caught by the IPS scan.
//   MALWARE_SPREADER    known malware hash, placed in SETUP or DATA packets
//                       depending on the phase.
//   ZERO_DAY            hash unknown to both signature databases; the only
//                       profile that can become ESTABLISHED while armed, and
//                       only until a feed update lands.
enum class AttackerKind {
    INSIDER_SUBSCRIBER,
    EXPLOIT_INJECTOR,
    MALWARE_SPREADER,
    ZERO_DAY,
};

std::string_view attacker_kind_name(AttackerKind kind);
std::optional<AttackerKind> attacker_kind_from_name(std::string_view name);

enum class InjectionPhase { SETUP, DATA };

struct AttackerProfile {
    AttackerKind kind = AttackerKind::INSIDER_SUBSCRIBER;
    std::string name;      // group label, used like a LAN name in reports
    std::string vm_id;     // CLIENT-layer VM the attacker owns
    std::string tenant_id; // tenant id the attacker claims
    // When set, the attacker presents this tenant's full credential set,
    // challenge answers and key claims (a wholesale identity theft).
    std::optional<std::string> impersonate_tenant;
    std::set<std::pair<std::string, std::string>> forged_credentials;
    std::set<std::string> injected_signatures;
    InjectionPhase injection_phase = InjectionPhase::SETUP;
    bool operator==(const AttackerProfile&) const = default;
};

struct ProfileIssue {
    std::string code;
    std::string message;
};

// Static checks against the databases the profile will face:
//  - the attacker VM must be a registered subscriber (all kinds),
//  - EXPLOIT_INJECTOR signatures must already be in the exploit db,
//  - MALWARE_SPREADER signatures must already be in the malware db,
//  - ZERO_DAY signatures must be absent from both,
//  - an impersonated tenant must exist.
std::vector<ProfileIssue> validate_profile(const AttackerProfile& profile,
                                           const LayerDatabases& dbs);

// SETUP-packet material for one attack session, canonicalized.
PacketContents attacker_setup_contents(const AttackerProfile& profile,
                                       const LayerDatabases& dbs);

// Payload carried by the profile's DATA packets.
std::multiset<std::string> attacker_data_signatures(const AttackerProfile& profile);

struct SessionPlan {
    std::uint32_t sessions = 1;
    UniformDist start_time;
    std::int64_t data_packets = 0; // -1: keep sending until the run ends
    TimeMs data_interval = kMsPerSecond;
    std::uint64_t packet_size_bytes = 1000;

    bool operator==(const SessionPlan&) const = default;
};

struct GeneratedSession {
    Session session;
    std::vector<Packet> packets; // SETUP first, then the planned DATA packets
};

// Materializes the attack sessions a plan describes: per session a start
// time draw, the SETUP packet and the (finite) DATA packet schedule. Used by
// tests and available as library API; the simulation engine derives the same
// sessions event by event.
std::vector<GeneratedSession> generate_attack_sessions(const AttackerProfile& profile,
                                                       const SessionPlan& plan,
                                                       const Topology& topology,
                                                       const LayerDatabases& dbs, Rng& rng);

} // namespace layersim
