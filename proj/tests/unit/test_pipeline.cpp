#include <map>
#include <vector>

#include "doctest.h"

#include "layersim/errors.hpp"
#include "layersim/pipeline.hpp"
#include "layersim/rng.hpp"

#include "helpers.hpp"

using namespace layersim;

namespace {

TraceEvent tev(LayerKind layer, bool passed) {
    TraceEvent e;
    e.layer = layer;
    e.passed = passed;
    if (!passed) {
        e.reason = DenyReason{DenyCode::MISSING_VM_ID, ""};
    }
    return e;
}

bool has_issue(const std::vector<TopologyIssue>& issues, const std::string& code) {
    for (const TopologyIssue& issue : issues) {
        if (issue.code == code) {
            return true;
        }
    }
    return false;
}

} // namespace

TEST_CASE("the chain topology validates cleanly") {
    CHECK(validate_topology(test::chain_topology()).empty());
}

TEST_CASE("validate_topology flags skipping preferences") {
    Topology topo = test::chain_topology();
    // Point the client edge two layers downstream.
    topo.preferences[LayerKind::CLIENT] = {{"meta1", 1}};
    const auto issues = validate_topology(topo);
    CHECK(has_issue(issues, "TOPOLOGY_SKIP"));
}

TEST_CASE("validate_topology flags gaps") {
    SUBCASE("missing preference list") {
        Topology topo = test::chain_topology();
        topo.preferences.erase(LayerKind::META);
        CHECK(has_issue(validate_topology(topo), "TOPOLOGY_GAP"));
    }
    SUBCASE("empty preference list") {
        Topology topo = test::chain_topology();
        topo.preferences[LayerKind::VAULT].clear();
        CHECK(has_issue(validate_topology(topo), "TOPOLOGY_GAP"));
    }
    SUBCASE("layer without any vm") {
        Topology topo = test::chain_topology();
        topo.vms.erase("app1");
        const auto issues = validate_topology(topo);
        CHECK(has_issue(issues, "TOPOLOGY_GAP")); // no vm on APPS
        CHECK(has_issue(issues, "UNKNOWN_VM"));   // the AM edge now dangles
    }
}

TEST_CASE("validate_topology flags unknown targets and zero weights") {
    Topology topo = test::chain_topology();
    topo.preferences[LayerKind::FW] = {{"ghost", 1}};
    CHECK(has_issue(validate_topology(topo), "UNKNOWN_VM"));

    Topology topo2 = test::chain_topology();
    topo2.preferences[LayerKind::FW] = {{"meta1", 0}};
    CHECK(has_issue(validate_topology(topo2), "BAD_VALUE"));
}

TEST_CASE("next_hop follows the preference weights") {
    Topology topo;
    topo.vms.emplace("c1", VmNode{"c1", LayerKind::CLIENT, ""});
    for (const std::string id : {"f1", "f2", "f3", "f4"}) {
        topo.vms.emplace(id, VmNode{id, LayerKind::FW, "a"});
    }

    SUBCASE("equal weights split evenly") {
        topo.preferences[LayerKind::CLIENT] = {{"f1", 1}, {"f2", 1}, {"f3", 1}, {"f4", 1}};
        Rng rng = substream(11, "routing.unit");
        std::map<std::string, int> counts;
        constexpr int kDraws = 10'000;
        for (int i = 0; i < kDraws; ++i) {
            counts[next_hop("c1", topo, rng).id] += 1;
        }
        for (const std::string id : {"f1", "f2", "f3", "f4"}) {
            const double share = counts[id] / static_cast<double>(kDraws);
            CAPTURE(id);
            CHECK(share > 0.23); // expected 25%, tolerance two points
            CHECK(share < 0.27);
        }
    }

    SUBCASE("a 1:3 weighting lands near 25/75") {
        topo.preferences[LayerKind::CLIENT] = {{"f1", 1}, {"f2", 3}};
        Rng rng = substream(12, "routing.unit");
        int f1 = 0;
        constexpr int kDraws = 10'000;
        for (int i = 0; i < kDraws; ++i) {
            if (next_hop("c1", topo, rng).id == "f1") {
                ++f1;
            }
        }
        const double share = f1 / static_cast<double>(kDraws);
        CHECK(share > 0.23);
        CHECK(share < 0.27);
    }
}

TEST_CASE("next_hop throws on unroutable sources") {
    const Topology topo = test::chain_topology();
    Rng rng(1);
    CHECK_THROWS_AS((void)next_hop("ghost", topo, rng), StateError);
    CHECK_THROWS_AS((void)next_hop("app1", topo, rng), StateError); // APPS has no preferences
}

TEST_CASE("trace lines format exactly and round-trip") {
    TraceEvent ev;
    ev.time = 100'010;
    ev.session_id = "lan1.c0.s0.a0";
    ev.layer = LayerKind::FW;
    ev.passed = true;
    ev.next_vm = "meta1";
    CHECK(format_trace_line(ev) ==
          "t=100.010 session=lan1.c0.s0.a0 layer=FW event=PASS reason=- next=meta1");
    CHECK(parse_trace_line(format_trace_line(ev)) == ev);

    TraceEvent drop;
    drop.time = 12'345;
    drop.session_id = "mole.c2.s0.a1";
    drop.layer = LayerKind::IPS;
    drop.passed = false;
    drop.reason = DenyReason{DenyCode::EXPLOIT_HIT, ""};
    CHECK(format_trace_line(drop) ==
          "t=12.345 session=mole.c2.s0.a1 layer=IPS event=DROP reason=EXPLOIT_HIT next=-");
    CHECK(parse_trace_line(format_trace_line(drop)) == drop);
}

TEST_CASE("parse_trace_line rejects malformed lines") {
    CHECK_FALSE(parse_trace_line("").has_value());
    CHECK_FALSE(parse_trace_line("t=1.000 session=s layer=FW event=PASS reason=-").has_value());
    CHECK_FALSE(
        parse_trace_line("t=1.000 session=s layer=XX event=PASS reason=- next=-").has_value());
    CHECK_FALSE(
        parse_trace_line("t=1.000 session=s layer=FW event=WAIT reason=- next=-").has_value());
    CHECK_FALSE(
        parse_trace_line("t=1.000 session=s layer=FW event=DROP reason=BOGUS next=-")
            .has_value());
    CHECK_FALSE(parse_trace_line(
                    "t=1.000 session=s layer=FW event=PASS reason=- next=m extra=1")
                    .has_value());
    CHECK_FALSE(parse_trace_line("t=1.0000 session=s layer=FW event=PASS reason=- next=m")
                    .has_value()); // sub-millisecond time
}

TEST_CASE("the verdict table matches the first-failing-predicate rule") {
    // All 32 combinations of the five predicate outcomes. The databases are
    // built so each bit controls exactly one predicate; the expectation is
    // computed from the bits alone.
    const PacketContents contents = test::row_contents();
    for (unsigned bits = 0; bits < 32; ++bits) {
        CAPTURE(bits);
        const test::PredicateRow row = test::row_from_bits(bits);
        const LayerDatabases dbs = test::row_databases(row);

        EvalCounters counters;
        const Verdict got = evaluate_session(contents, dbs, {}, &counters);
        CHECK(got == test::row_expected(row));

        // First-fail cutoff: exactly the prefix of the chain runs.
        const int expected_evals = test::row_expected_evaluations(row);
        CHECK(counters.fw == (expected_evals >= 1 ? 1u : 0u));
        CHECK(counters.meta == (expected_evals >= 2 ? 1u : 0u));
        CHECK(counters.vault == (expected_evals >= 3 ? 1u : 0u));
        CHECK(counters.ips == (expected_evals >= 4 ? 1u : 0u));
        CHECK(counters.am == (expected_evals >= 5 ? 1u : 0u));
    }
}

TEST_CASE("layer_check maps each layer to its deny code") {
    const PacketContents contents = test::row_contents();

    const LayerDatabases all_pass = test::row_databases(test::row_from_bits(31));
    for (LayerKind layer : kInspectionLayers) {
        CAPTURE(layer_name(layer));
        CHECK_FALSE(layer_check(layer, contents, all_pass, {}).has_value());
    }

    CHECK(layer_check(LayerKind::FW, contents, test::row_databases({false, true, true, true, true}),
                      {}) == DenyReason{DenyCode::MISSING_VM_ID, ""});
    CHECK(layer_check(LayerKind::META, contents,
                      test::row_databases({true, false, true, true, true}),
                      {}) == DenyReason{DenyCode::METADATA_MISMATCH, ""});
    CHECK(layer_check(LayerKind::VAULT, contents,
                      test::row_databases({true, true, false, true, true}),
                      {}) == DenyReason{DenyCode::NO_VAULT_GRANT, ""});
    CHECK(layer_check(LayerKind::IPS, contents,
                      test::row_databases({true, true, true, false, true}),
                      {}) == DenyReason{DenyCode::EXPLOIT_HIT, "sig_e"});
    CHECK(layer_check(LayerKind::AM, contents,
                      test::row_databases({true, true, true, true, false}),
                      {}) == DenyReason{DenyCode::MALWARE_HIT, "sig_m"});

    CHECK_THROWS_AS((void)layer_check(LayerKind::CLIENT, contents, all_pass, {}), StateError);
    CHECK_THROWS_AS((void)layer_check(LayerKind::APPS, contents, all_pass, {}), StateError);
}

TEST_CASE("advancing an admitted session walks all five layers") {
    const Topology topo = test::chain_topology();
    const LayerDatabases dbs = test::standard_dbs();
    Rng rng = substream(3, "routing.t");

    Session s = make_session(topo, "t.c0.s0.a0", "c1", test::good_contents());
    std::vector<TraceEvent> events;
    int steps = 0;
    while (!s.established() && !s.terminal()) {
        AdvanceResult r = advance(std::move(s), dbs, topo, rng, steps * 10);
        s = std::move(r.session);
        events.insert(events.end(), r.events.begin(), r.events.end());
        ++steps;
        REQUIRE(steps <= 6);
    }

    CHECK(s.established());
    CHECK(steps == 5);
    REQUIRE(events.size() == 5);
    for (std::size_t i = 0; i < events.size(); ++i) {
        CHECK(events[i].layer == kInspectionLayers[i]);
        CHECK(events[i].passed);
    }
    CHECK(verify_no_skip(events));
    CHECK(s.path.at(LayerKind::FW) == "fw1");
    CHECK(s.path.at(LayerKind::APPS) == "app1");
    CHECK_THROWS_AS((void)advance(std::move(s), dbs, topo, rng, 0), StateError);
}

TEST_CASE("folding advance reproduces evaluate_session on every verdict row") {
    Topology topo = test::chain_topology();
    topo.vms.emplace("vm_x", VmNode{"vm_x", LayerKind::CLIENT, ""});

    for (unsigned bits = 0; bits < 32; ++bits) {
        CAPTURE(bits);
        const test::PredicateRow row = test::row_from_bits(bits);
        const LayerDatabases dbs = test::row_databases(row);
        const Verdict expected = test::row_expected(row);

        Rng rng = substream(bits, "routing.row");
        Session s = make_session(topo, "row", "vm_x", test::row_contents());
        std::vector<TraceEvent> events;
        while (!s.established() && !s.terminal()) {
            AdvanceResult r = advance(std::move(s), dbs, topo, rng);
            s = std::move(r.session);
            events.insert(events.end(), r.events.begin(), r.events.end());
        }

        CHECK(verify_no_skip(events));
        if (expected.decision == Decision::PERMIT) {
            CHECK(s.established());
            CHECK_FALSE(s.deny_info.has_value());
        } else {
            REQUIRE(s.terminal());
            REQUIRE(s.deny_info.has_value());
            CHECK(s.deny_info->layer == *expected.failed_layer);
            CHECK(s.deny_info->reason == *expected.reason);
        }
    }
}

TEST_CASE("advance issues challenges the honest session can answer") {
    // The metadata predicate inside advance() draws three bank questions;
    // contents carrying the full answer sheet always pass, contents with one
    // bad answer fail whenever that question is drawn. Probe the failure case
    // via a stream known to issue the poisoned question.
    const Topology topo = test::chain_topology();
    const LayerDatabases dbs = test::standard_dbs();

    PacketContents bad = test::good_contents();
    bad.challenge_answers["q1"] = "wrong";
    bad.challenge_answers["q2"] = "wrong";
    bad.challenge_answers["q3"] = "wrong";
    bad.challenge_answers["q4"] = "wrong"; // every draw is now poisoned

    Rng rng = substream(4, "routing.bad");
    Session s = make_session(topo, "bad", "c1", bad);
    while (!s.established() && !s.terminal()) {
        AdvanceResult r = advance(std::move(s), dbs, topo, rng);
        s = std::move(r.session);
    }
    REQUIRE(s.terminal());
    CHECK(s.deny_info->layer == LayerKind::META);
    CHECK(s.deny_info->reason.code == DenyCode::METADATA_MISMATCH);
}

TEST_CASE("inspect_data_packet scans ips before antimalware") {
    const LayerDatabases dbs = test::standard_dbs();

    Packet p;
    p.kind = PacketKind::DATA;
    p.contents.payload_signatures = {};
    CHECK_FALSE(inspect_data_packet(p, dbs).has_value());

    p.contents.payload_signatures = {"malware_bb"};
    CHECK(inspect_data_packet(p, dbs) == DenyReason{DenyCode::MALWARE_HIT, "malware_bb"});

    p.contents.payload_signatures = {"exploit_aa", "malware_bb"};
    CHECK(inspect_data_packet(p, dbs) == DenyReason{DenyCode::EXPLOIT_HIT, "exploit_aa"});

    Packet setup;
    setup.kind = PacketKind::SETUP;
    CHECK_THROWS_AS((void)inspect_data_packet(setup, dbs), StateError);
}

TEST_CASE("the guarded data inspection requires an established session") {
    const LayerDatabases dbs = test::standard_dbs();
    Session s;
    s.id = "t";
    s.state = SessionState::AT_IPS;
    Packet p;
    p.kind = PacketKind::DATA;
    CHECK_THROWS_AS((void)inspect_data_packet(s, p, dbs), StateError);

    s.state = SessionState::ESTABLISHED;
    CHECK_FALSE(inspect_data_packet(s, p, dbs).has_value());
}

TEST_CASE("verify_no_skip accepts exactly the legal shapes") {
    // Full admission.
    std::vector<TraceEvent> full = {tev(LayerKind::FW, true), tev(LayerKind::META, true),
                                    tev(LayerKind::VAULT, true), tev(LayerKind::IPS, true),
                                    tev(LayerKind::AM, true)};
    CHECK(verify_no_skip(full));

    // Early denial at each depth.
    for (std::size_t depth = 0; depth < kInspectionLayers.size(); ++depth) {
        std::vector<TraceEvent> cut;
        for (std::size_t i = 0; i < depth; ++i) {
            cut.push_back(tev(kInspectionLayers[i], true));
        }
        cut.push_back(tev(kInspectionLayers[depth], false));
        CAPTURE(depth);
        CHECK(verify_no_skip(cut));
    }

    // Post-establishment data scans at IPS and AM, with and without a block.
    std::vector<TraceEvent> data = full;
    data.push_back(tev(LayerKind::IPS, true));
    data.push_back(tev(LayerKind::AM, true));
    data.push_back(tev(LayerKind::IPS, true));
    CHECK(verify_no_skip(data));
    data.push_back(tev(LayerKind::IPS, false));
    CHECK(verify_no_skip(data));
}

TEST_CASE("verify_no_skip rejects every illegal shape") {
    const std::vector<TraceEvent> full = {tev(LayerKind::FW, true), tev(LayerKind::META, true),
                                          tev(LayerKind::VAULT, true), tev(LayerKind::IPS, true),
                                          tev(LayerKind::AM, true)};

    CHECK_FALSE(verify_no_skip({})); // a finished session logged something

    // Skipped layer during admission.
    std::vector<TraceEvent> skip = {tev(LayerKind::FW, true), tev(LayerKind::VAULT, true)};
    CHECK_FALSE(verify_no_skip(skip));

    // Wrong order.
    std::vector<TraceEvent> swapped = {tev(LayerKind::META, true), tev(LayerKind::FW, true)};
    CHECK_FALSE(verify_no_skip(swapped));

    // Repeated admission layer.
    std::vector<TraceEvent> repeated = {tev(LayerKind::FW, true), tev(LayerKind::FW, true)};
    CHECK_FALSE(verify_no_skip(repeated));

    // Anything after a drop.
    std::vector<TraceEvent> after_drop = {tev(LayerKind::FW, false), tev(LayerKind::META, true)};
    CHECK_FALSE(verify_no_skip(after_drop));
    std::vector<TraceEvent> data_after_block = full;
    data_after_block.push_back(tev(LayerKind::IPS, false));
    data_after_block.push_back(tev(LayerKind::AM, true));
    CHECK_FALSE(verify_no_skip(data_after_block));

    // Admission that stops mid-chain without a verdict.
    std::vector<TraceEvent> unfinished = {tev(LayerKind::FW, true), tev(LayerKind::META, true)};
    CHECK_FALSE(verify_no_skip(unfinished));

    // Admission layers reappearing after establishment.
    for (LayerKind layer : {LayerKind::FW, LayerKind::META, LayerKind::VAULT}) {
        std::vector<TraceEvent> bad = full;
        bad.push_back(tev(layer, true));
        CAPTURE(layer_name(layer));
        CHECK_FALSE(verify_no_skip(bad));
    }
}
