#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>

#include "layersim/layers.hpp"
#include "layersim/time.hpp"

namespace layersim {

struct Topology;

// Identifiers and secret material are compared byte-for-byte after
// canonicalization: surrounding whitespace is trimmed and ASCII letters are
// lowered. Databases and generated contents store the canonical form, so
// matching amounts to plain string equality.
std::string canonical_token(std::string_view raw);

// Everything a session presents to the inspection chain. The encrypted flag
// is carried for reporting only; no predicate reads it.
struct PacketContents {
    std::string vm_id;
    std::string tenant_id;
    std::set<std::pair<std::string, std::string>> credentials; // (attribute, value)
    std::map<std::string, std::string> challenge_answers;      // name -> answer
    std::set<std::string> key_claims;
    std::multiset<std::string> payload_signatures;
    bool encrypted = false;

    bool operator==(const PacketContents&) const = default;

    // Copy with every token run through canonical_token().
    PacketContents canonicalized() const;
};

enum class PacketKind { SETUP, DATA };

std::string_view packet_kind_name(PacketKind kind);

struct Packet {
    std::string session_id;
    std::uint64_t seq = 0;
    PacketKind kind = PacketKind::SETUP;
    PacketContents contents;
    std::uint64_t size_bytes = 0;
    TimeMs emit_time = 0;
};

PacketKind classify_packet(const Packet& packet);

// AT_X means "arrived at layer X, verdict pending". Transitions only move
// forward through the chain; DENIED is reachable from anywhere and terminal.
enum class SessionState {
    INIT,
    AT_FW,
    AT_META,
    AT_VAULT,
    AT_IPS,
    AT_AM,
    ESTABLISHED,
    DENIED,
};

std::string_view session_state_name(SessionState state);

struct DenyInfo {
    LayerKind layer = LayerKind::FW;
    DenyReason reason;
    bool operator==(const DenyInfo&) const = default;
};

struct Session {
    std::string id;
    std::string source_vm;
    PacketContents contents; // SETUP material, fixed for the session lifetime
    SessionState state = SessionState::INIT;
    std::optional<DenyInfo> deny_info; // present iff state == DENIED
    std::uint64_t packets_sent = 0;
    std::uint64_t packets_dropped = 0;

    // Engine bookkeeping: the VM pinned per layer while the session was
    // admitted. DATA packets revisit path[IPS] and path[AM].
    std::string current_vm;
    std::map<LayerKind, std::string> path;

    bool established() const { return state == SessionState::ESTABLISHED; }
    bool terminal() const { return state == SessionState::DENIED; }

    // Guarded state change; throws StateError on a backward move or when
    // leaving DENIED.
    void transition(SessionState next);
};

// Builds a fresh session for source_vm, which must be a CLIENT-layer VM of
// the topology. Contents are canonicalized on the way in.
Session make_session(const Topology& topology, std::string id, const std::string& source_vm,
                     PacketContents contents);

} // namespace layersim
