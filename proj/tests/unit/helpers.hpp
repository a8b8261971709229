#pragma once

// Shared fixtures for the test binaries: a one-vm-per-layer world, and the
// dial-a-predicate construction behind the 32-row verdict table checks.

#include <cstdint>
#include <string>

#include "layersim/databases.hpp"
#include "layersim/pipeline.hpp"
#include "layersim/scenario.hpp"
#include "layersim/session.hpp"

namespace layersim::test {

// Straight chain: one VM per layer, clients c1/c2 plus the attacker-owned hc1.
inline Topology chain_topology() {
    Topology topo;
    const auto add = [&](const std::string& id, LayerKind layer, const std::string& array = "") {
        topo.vms.emplace(id, VmNode{id, layer, array});
    };
    add("c1", LayerKind::CLIENT);
    add("c2", LayerKind::CLIENT);
    add("hc1", LayerKind::CLIENT);
    add("fw1", LayerKind::FW, "a_fw");
    add("meta1", LayerKind::META, "a_meta");
    add("vault1", LayerKind::VAULT, "a_vault");
    add("ips1", LayerKind::IPS, "a_ips");
    add("am1", LayerKind::AM, "a_am");
    add("app1", LayerKind::APPS);
    topo.preferences[LayerKind::CLIENT] = {{"fw1", 1}};
    topo.preferences[LayerKind::FW] = {{"meta1", 1}};
    topo.preferences[LayerKind::META] = {{"vault1", 1}};
    topo.preferences[LayerKind::VAULT] = {{"ips1", 1}};
    topo.preferences[LayerKind::IPS] = {{"am1", 1}};
    topo.preferences[LayerKind::AM] = {{"app1", 1}};
    return topo;
}

// Databases matching chain_topology: tenant t1 with a four-question bank,
// grants for every client, one known exploit and one known malware hash.
inline LayerDatabases standard_dbs() {
    LayerDatabases dbs;
    dbs.fw.registered_vm_ids = {"c1", "c2", "hc1"};
    dbs.fw.acl = {{"tcp", true}};

    TenantRecord t1;
    t1.credentials = {{"user", "alice"}, {"pass", "s3cret"}};
    t1.challenge_bank = {{"q1", "a1"}, {"q2", "a2"}, {"q3", "a3"}, {"q4", "a4"}};
    t1.authorized_apps = {"app1"};
    dbs.meta.records.emplace("t1", std::move(t1));

    dbs.vault.grants[{"t1", "c1"}] = {"k1", "k2"};
    dbs.vault.grants[{"t1", "c2"}] = {"k1"};
    dbs.vault.grants[{"t1", "hc1"}] = {"k1"};
    dbs.vault.keys["k1"] = {"app1"};
    dbs.vault.keys["k2"] = {"app1"};

    dbs.ips.signatures = {"exploit_aa"};
    dbs.antimal.signatures = {"malware_bb"};
    return dbs;
}

// Contents that pass all five predicates against standard_dbs().
inline PacketContents good_contents(const std::string& vm = "c1") {
    PacketContents c;
    c.vm_id = vm;
    c.tenant_id = "t1";
    c.credentials = {{"user", "alice"}, {"pass", "s3cret"}};
    c.challenge_answers = {{"q1", "a1"}, {"q2", "a2"}, {"q3", "a3"}, {"q4", "a4"}};
    c.key_claims = {"k1"};
    c.encrypted = true;
    return c;
}

// Scenario shell around the chain world: single-server arrays, 60 s run,
// zero link delay, no traffic. Tests add workloads and attackers per case.
inline Scenario chain_scenario() {
    Scenario sc;
    sc.seed = 1;
    sc.sim_duration = 60'000;
    sc.bucket_width = 10'000;
    sc.link_delay = 0;
    for (const std::string id : {"a_fw", "a_meta", "a_vault", "a_ips", "a_am"}) {
        sc.arrays.emplace(id, ServerArrayCfg{id, 1});
    }
    sc.topology = chain_topology();
    sc.databases = standard_dbs();
    return sc;
}

// One-client workload with a degenerate (point) start distribution, so the
// session timeline is exact.
inline Workload one_client(const std::string& name, TimeMs start, std::int64_t data_packets,
                           TimeMs data_interval) {
    Workload wl;
    wl.name = name;
    wl.tenant_id = "t1";
    wl.vm_profiles = {"c1"};
    wl.client_count = 1;
    wl.start_time = {start, start};
    wl.data_packets_per_session = data_packets;
    wl.data_interval = data_interval;
    return wl;
}

// ---------------------------------------------------------------------------
// Verdict-table rows. Five knobs, one per predicate; the databases are built
// so each knob flips exactly one predicate for the fixed contents, and the
// expected verdict is computed from the bits alone (first false bit in chain
// order wins). This keeps the expectation independent of the code under test.

struct PredicateRow {
    bool fw = true;
    bool meta = true;
    bool vault = true;
    bool ips_clean = true;
    bool am_clean = true;
};

inline PredicateRow row_from_bits(unsigned bits) {
    // bit 4 = fw ... bit 0 = am, so row 0b11111 is the all-pass row
    return PredicateRow{(bits & 16u) != 0, (bits & 8u) != 0, (bits & 4u) != 0,
                        (bits & 2u) != 0, (bits & 1u) != 0};
}

inline PacketContents row_contents() {
    PacketContents c;
    c.vm_id = "vm_x";
    c.tenant_id = "t_x";
    c.credentials = {{"user", "u1"}};
    c.challenge_answers = {{"c1", "r1"}, {"c2", "r2"}, {"c3", "r3"}};
    c.key_claims = {"k_x"};
    c.payload_signatures = {"sig_e", "sig_m"};
    return c;
}

inline LayerDatabases row_databases(const PredicateRow& row) {
    LayerDatabases dbs;
    if (row.fw) {
        dbs.fw.registered_vm_ids = {"vm_x"};
    }
    if (row.meta) {
        TenantRecord rec;
        rec.credentials = {{"user", "u1"}};
        rec.challenge_bank = {{"c1", "r1"}, {"c2", "r2"}, {"c3", "r3"}};
        dbs.meta.records.emplace("t_x", std::move(rec));
    }
    if (row.vault) {
        dbs.vault.grants[{"t_x", "vm_x"}] = {"k_x"};
        dbs.vault.keys["k_x"] = {};
    }
    if (!row.ips_clean) {
        dbs.ips.signatures = {"sig_e"};
    }
    if (!row.am_clean) {
        dbs.antimal.signatures = {"sig_m"};
    }
    return dbs;
}

inline Verdict row_expected(const PredicateRow& row) {
    if (!row.fw) {
        return {Decision::DENY, LayerKind::FW, DenyReason{DenyCode::MISSING_VM_ID, ""}};
    }
    if (!row.meta) {
        return {Decision::DENY, LayerKind::META, DenyReason{DenyCode::METADATA_MISMATCH, ""}};
    }
    if (!row.vault) {
        return {Decision::DENY, LayerKind::VAULT, DenyReason{DenyCode::NO_VAULT_GRANT, ""}};
    }
    if (!row.ips_clean) {
        return {Decision::DENY, LayerKind::IPS, DenyReason{DenyCode::EXPLOIT_HIT, "sig_e"}};
    }
    if (!row.am_clean) {
        return {Decision::DENY, LayerKind::AM, DenyReason{DenyCode::MALWARE_HIT, "sig_m"}};
    }
    return {Decision::PERMIT, std::nullopt, std::nullopt};
}

// Number of predicates the chain must run for this row (first-fail cutoff).
inline int row_expected_evaluations(const PredicateRow& row) {
    if (!row.fw) return 1;
    if (!row.meta) return 2;
    if (!row.vault) return 3;
    if (!row.ips_clean) return 4;
    if (!row.am_clean) return 5;
    return 5;
}

} // namespace layersim::test
