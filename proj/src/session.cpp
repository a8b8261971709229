#include "layersim/session.hpp"

#include <cctype>

#include "layersim/errors.hpp"
#include "layersim/pipeline.hpp"

namespace layersim {

std::string canonical_token(std::string_view raw) {
    std::size_t begin = 0;
    std::size_t end = raw.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(raw[begin]))) {
        ++begin;
    }
    while (end > begin && std::isspace(static_cast<unsigned char>(raw[end - 1]))) {
        --end;
    }
    std::string out;
    out.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(raw[i]))));
    }
    return out;
}

PacketContents PacketContents::canonicalized() const {
    PacketContents out;
    out.vm_id = canonical_token(vm_id);
    out.tenant_id = canonical_token(tenant_id);
    for (const auto& [attr, value] : credentials) {
        out.credentials.emplace(canonical_token(attr), canonical_token(value));
    }
    for (const auto& [name, answer] : challenge_answers) {
        out.challenge_answers.emplace(canonical_token(name), canonical_token(answer));
    }
    for (const auto& claim : key_claims) {
        out.key_claims.insert(canonical_token(claim));
    }
    for (const auto& sig : payload_signatures) {
        out.payload_signatures.insert(canonical_token(sig));
    }
    out.encrypted = encrypted;
    return out;
}

std::string_view packet_kind_name(PacketKind kind) {
    return kind == PacketKind::SETUP ? "SETUP" : "DATA";
}

PacketKind classify_packet(const Packet& packet) {
    return packet.kind;
}

std::string_view session_state_name(SessionState state) {
    switch (state) {
    case SessionState::INIT: return "INIT";
    case SessionState::AT_FW: return "AT_FW";
    case SessionState::AT_META: return "AT_META";
    case SessionState::AT_VAULT: return "AT_VAULT";
    case SessionState::AT_IPS: return "AT_IPS";
    case SessionState::AT_AM: return "AT_AM";
    case SessionState::ESTABLISHED: return "ESTABLISHED";
    case SessionState::DENIED: return "DENIED";
    }
    return "?";
}

void Session::transition(SessionState next) {
    if (state == SessionState::DENIED) {
        throw StateError("session " + id + " is denied; no further transitions");
    }
    if (next == SessionState::DENIED) {
        state = next;
        return;
    }
    if (static_cast<int>(next) <= static_cast<int>(state)) {
        throw StateError("session " + id + " cannot move backward from " +
                         std::string(session_state_name(state)) + " to " +
                         std::string(session_state_name(next)));
    }
    state = next;
}

Session make_session(const Topology& topology, std::string id, const std::string& source_vm,
                     PacketContents contents) {
    const std::string vm = canonical_token(source_vm);
    const VmNode* node = topology.find_vm(vm);
    if (node == nullptr) {
        throw ConfigError("unknown source vm '" + vm + "'");
    }
    if (node->layer != LayerKind::CLIENT) {
        throw ConfigError("source vm '" + vm + "' is not a CLIENT-layer vm");
    }
    Session session;
    session.id = std::move(id);
    session.source_vm = vm;
    session.contents = contents.canonicalized();
    if (session.contents.vm_id.empty() || session.contents.tenant_id.empty()) {
        throw ConfigError("session contents need a vm_id and a tenant_id");
    }
    session.state = SessionState::INIT;
    session.current_vm = vm;
    return session;
}

} // namespace layersim
