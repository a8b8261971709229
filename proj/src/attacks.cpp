#include "layersim/attacks.hpp"

#include "layersim/errors.hpp"

namespace layersim {

std::string_view attacker_kind_name(AttackerKind kind) {
    switch (kind) {
    case AttackerKind::INSIDER_SUBSCRIBER: return "INSIDER_SUBSCRIBER";
    case AttackerKind::EXPLOIT_INJECTOR: return "EXPLOIT_INJECTOR";
    case AttackerKind::MALWARE_SPREADER: return "MALWARE_SPREADER";
    case AttackerKind::ZERO_DAY: return "ZERO_DAY";
    }
    return "?";
}

std::optional<AttackerKind> attacker_kind_from_name(std::string_view name) {
    for (AttackerKind kind :
         {AttackerKind::INSIDER_SUBSCRIBER, AttackerKind::EXPLOIT_INJECTOR,
          AttackerKind::MALWARE_SPREADER, AttackerKind::ZERO_DAY}) {
        if (attacker_kind_name(kind) == name) {
            return kind;
        }
    }
    return std::nullopt;
}

std::vector<ProfileIssue> validate_profile(const AttackerProfile& profile,
                                           const LayerDatabases& dbs) {
    std::vector<ProfileIssue> issues;
    const std::string vm = canonical_token(profile.vm_id);

    // Attackers in this model are hostile subscribers: their VM carries a
    // valid registration, everything after the firewall is the attack.
    if (dbs.fw.registered_vm_ids.count(vm) == 0) {
        issues.push_back({"ATTACKER_CONFIG",
                          "attacker vm '" + vm + "' is not a registered subscriber vm"});
    }

    if (profile.impersonate_tenant.has_value() &&
        dbs.meta.find(canonical_token(*profile.impersonate_tenant)) == nullptr) {
        issues.push_back({"UNKNOWN_TENANT", "impersonated tenant '" +
                                                *profile.impersonate_tenant +
                                                "' has no metadata record"});
    }

    for (const std::string& raw : profile.injected_signatures) {
        const std::string sig = canonical_token(raw);
        const bool in_ips = dbs.ips.signatures.count(sig) > 0;
        const bool in_am = dbs.antimal.signatures.count(sig) > 0;
        switch (profile.kind) {
        case AttackerKind::EXPLOIT_INJECTOR:
            if (!in_ips) {
                issues.push_back({"SIGNATURE_UNKNOWN",
                                  "exploit injector carries '" + sig +
                                      "', which the exploit db does not know"});
            }
            break;
        case AttackerKind::MALWARE_SPREADER:
            if (!in_am) {
                issues.push_back({"SIGNATURE_UNKNOWN",
                                  "malware spreader carries '" + sig +
                                      "', which the malware db does not know"});
            }
            break;
        case AttackerKind::ZERO_DAY:
            if (in_ips || in_am) {
                issues.push_back({"ZERO_DAY_KNOWN",
                                  "zero-day signature '" + sig +
                                      "' is already in a signature db at scenario start"});
            }
            break;
        case AttackerKind::INSIDER_SUBSCRIBER:
            break;
        }
    }

    if (profile.kind != AttackerKind::INSIDER_SUBSCRIBER && profile.injected_signatures.empty()) {
        issues.push_back({"ATTACKER_CONFIG",
                          std::string(attacker_kind_name(profile.kind)) +
                              " needs at least one injected signature"});
    }

    return issues;
}

PacketContents attacker_setup_contents(const AttackerProfile& profile,
                                       const LayerDatabases& dbs) {
    PacketContents contents;
    contents.vm_id = profile.vm_id;
    contents.tenant_id =
        profile.impersonate_tenant.has_value() ? *profile.impersonate_tenant : profile.tenant_id;
    contents.credentials = profile.forged_credentials;

    if (profile.impersonate_tenant.has_value()) {
        // Wholesale identity theft: present the stolen record verbatim,
        // including every challenge answer and whatever keys the pair
        // (stolen tenant, own vm) happens to be granted.
        const TenantRecord* record =
            dbs.meta.find(canonical_token(*profile.impersonate_tenant));
        if (record != nullptr) {
            contents.credentials.insert(record->credentials.begin(), record->credentials.end());
            contents.challenge_answers = record->challenge_bank;
        }
        auto grant = dbs.vault.grants.find(
            {canonical_token(contents.tenant_id), canonical_token(profile.vm_id)});
        if (grant != dbs.vault.grants.end()) {
            contents.key_claims = grant->second;
        }
    }

    if (profile.injection_phase == InjectionPhase::SETUP) {
        for (const std::string& sig : profile.injected_signatures) {
            contents.payload_signatures.insert(sig);
        }
    }
    return contents.canonicalized();
}

std::multiset<std::string> attacker_data_signatures(const AttackerProfile& profile) {
    std::multiset<std::string> payload;
    if (profile.injection_phase == InjectionPhase::DATA) {
        for (const std::string& sig : profile.injected_signatures) {
            payload.insert(canonical_token(sig));
        }
    }
    return payload;
}

std::vector<GeneratedSession> generate_attack_sessions(const AttackerProfile& profile,
                                                       const SessionPlan& plan,
                                                       const Topology& topology,
                                                       const LayerDatabases& dbs, Rng& rng) {
    const auto issues = validate_profile(profile, dbs);
    if (!issues.empty()) {
        throw ConfigError("attacker '" + profile.name + "': " + issues.front().message);
    }
    if (plan.data_packets < 0) {
        throw ConfigError("generate_attack_sessions needs a finite data packet count");
    }

    const PacketContents setup = attacker_setup_contents(profile, dbs);
    PacketContents data = setup;
    data.payload_signatures = attacker_data_signatures(profile);

    std::vector<GeneratedSession> out;
    out.reserve(plan.sessions);
    for (std::uint32_t i = 0; i < plan.sessions; ++i) {
        GeneratedSession gen;
        const std::string id = profile.name + ".c" + std::to_string(i) + ".s0.a0";
        gen.session = make_session(topology, id, profile.vm_id, setup);
        const TimeMs start = draw_start_time(plan.start_time, rng);

        Packet setup_packet;
        setup_packet.session_id = id;
        setup_packet.seq = 0;
        setup_packet.kind = PacketKind::SETUP;
        setup_packet.contents = setup;
        setup_packet.size_bytes = plan.packet_size_bytes;
        setup_packet.emit_time = start;
        gen.packets.push_back(std::move(setup_packet));

        for (std::int64_t k = 1; k <= plan.data_packets; ++k) {
            Packet packet;
            packet.session_id = id;
            packet.seq = static_cast<std::uint64_t>(k);
            packet.kind = PacketKind::DATA;
            packet.contents = data;
            packet.size_bytes = plan.packet_size_bytes;
            packet.emit_time = start + k * plan.data_interval;
            gen.packets.push_back(std::move(packet));
        }
        out.push_back(std::move(gen));
    }
    return out;
}

} // namespace layersim
