#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "layersim/scenario.hpp"

using namespace layersim;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string fixture(const std::string& name) {
    return std::string(LAYERSIM_SCENARIO_DIR) + "/" + name;
}

// A complete valid scenario, one entry per vector slot so tests can mutate a
// line and assert the diagnostic lands on index + 1.
std::vector<std::string> base_lines() {
    return {
        "[simulation]",            // 1
        "seed = 1",                // 2
        "duration = 60",           // 3
        "[service_times]",         // 4
        "fw = 0.010",              // 5
        "[array a_fw]",            // 6
        "servers = 1",             // 7
        "[array a_meta]",          // 8
        "servers = 1",             // 9
        "[array a_vault]",         // 10
        "servers = 1",             // 11
        "[array a_ips]",           // 12
        "servers = 1",             // 13
        "[array a_am]",            // 14
        "servers = 1",             // 15
        "[vm c1]",                 // 16
        "layer = client",          // 17
        "[vm fw1]",                // 18
        "layer = fw",              // 19
        "array = a_fw",            // 20
        "[vm meta1]",              // 21
        "layer = meta",            // 22
        "array = a_meta",          // 23
        "[vm vault1]",             // 24
        "layer = vault",           // 25
        "array = a_vault",         // 26
        "[vm ips1]",               // 27
        "layer = ips",             // 28
        "array = a_ips",           // 29
        "[vm am1]",                // 30
        "layer = am",              // 31
        "array = a_am",            // 32
        "[vm app1]",               // 33
        "layer = apps",            // 34
        "[preferences client]",    // 35
        "fw1 = 1",                 // 36
        "[preferences fw]",        // 37
        "meta1 = 1",               // 38
        "[preferences meta]",      // 39
        "vault1 = 1",              // 40
        "[preferences vault]",     // 41
        "ips1 = 1",                // 42
        "[preferences ips]",       // 43
        "am1 = 1",                 // 44
        "[preferences am]",        // 45
        "app1 = 1",                // 46
        "[firewall]",              // 47
        "registered_vms = c1",     // 48
        "acl allow = tcp",         // 49
        "[tenant t1]",             // 50
        "credential user = alice", // 51
        "challenge q1 = a1",       // 52
        "challenge q2 = a2",       // 53
        "challenge q3 = a3",       // 54
        "[vault]",                 // 55
        "key k1 = app1",           // 56
        "grant t1 c1 = k1",        // 57
        "[ips]",                   // 58
        "signatures = exploit_aa", // 59
        "[antimalware]",           // 60
        "signatures = malware_bb", // 61
        "[lan office]",            // 62
        "tenant = t1",             // 63
        "client_vms = c1",         // 64
        "clients = 1",             // 65
        "start_time = uniform 1 2", // 66
        "data_packets = 3",        // 67
        "data_interval = 1",       // 68
    };
}

ParseResult parse_lines(const std::vector<std::string>& lines) {
    std::string text;
    for (const std::string& line : lines) {
        text += line;
        text += '\n';
    }
    return parse_scenario(text);
}

const Diagnostic* find_diag(const ParseResult& result, const std::string& code) {
    for (const Diagnostic& d : result.diagnostics) {
        if (d.code == code) {
            return &d;
        }
    }
    return nullptr;
}

void check_diag(const ParseResult& result, const std::string& code, int line) {
    CAPTURE(code);
    const Diagnostic* d = find_diag(result, code);
    REQUIRE(d != nullptr);
    CHECK(d->line == line);
    CHECK_FALSE(result.ok());
}

} // namespace

TEST_CASE("the base scenario text parses cleanly") {
    const ParseResult result = parse_lines(base_lines());
    for (const Diagnostic& d : result.diagnostics) {
        CAPTURE(format_diagnostic(d));
        CHECK(false);
    }
    REQUIRE(result.ok());
    const Scenario& sc = *result.scenario;
    CHECK(sc.seed == 1);
    CHECK(sc.sim_duration == 60'000);
    CHECK(sc.arrays.size() == 5);
    CHECK(sc.topology.vms.size() == 7);
    CHECK(sc.workloads.size() == 1);
    CHECK(sc.workloads[0].data_packets_per_session == 3);
    CHECK(sc.workloads[0].start_time == UniformDist{1'000, 2'000});
    CHECK(sc.databases.meta.records.count("t1") == 1);
    CHECK(sc.service_time(LayerKind::FW) == 10);
    CHECK(sc.service_time(LayerKind::META) == 10); // default fills in
}

TEST_CASE("every shipped fixture parses without diagnostics") {
    for (const std::string name :
         {"minimal.scn", "baseline.scn", "zero_day.scn", "reference.scn"}) {
        CAPTURE(name);
        const ParseResult result = load_scenario_file(fixture(name));
        for (const Diagnostic& d : result.diagnostics) {
            CAPTURE(format_diagnostic(d));
            CHECK(false);
        }
        CHECK(result.ok());
    }
}

TEST_CASE("parse and serialize form a round trip") {
    for (const std::string name :
         {"minimal.scn", "baseline.scn", "zero_day.scn", "reference.scn"}) {
        CAPTURE(name);
        const ParseResult first = parse_scenario(slurp(fixture(name)));
        REQUIRE(first.ok());
        const std::string canonical = serialize_scenario(*first.scenario);
        const ParseResult second = parse_scenario(canonical);
        REQUIRE(second.ok());
        CHECK(*second.scenario == *first.scenario);
        // The canonical form is a fixed point.
        CHECK(serialize_scenario(*second.scenario) == canonical);
    }
}

TEST_CASE("syntax failures carry the offending line") {
    check_diag(parse_scenario("x = 1\n"), "SYNTAX", 1); // entry outside any section
    check_diag(parse_scenario("[simulation\n"), "SYNTAX", 1);
    check_diag(parse_scenario("[simulation]\nduration\n"), "SYNTAX", 2); // missing '='
    check_diag(parse_scenario("[array one two]\n"), "SYNTAX", 1);
    check_diag(parse_scenario("[array]\n"), "SYNTAX", 1);       // name required
    check_diag(parse_scenario("[firewall fw]\n"), "SYNTAX", 1); // takes no name
    check_diag(parse_scenario("[warp_drive]\n"), "UNKNOWN_SECTION", 1);
}

TEST_CASE("unknown keys are rejected with their line") {
    auto lines = base_lines();
    lines[66] = "warp_speed = 9"; // line 67, inside [lan office]
    check_diag(parse_lines(lines), "UNKNOWN_KEY", 67);

    check_diag(parse_scenario("[simulation]\nduration = 60\ncolor = red\n"), "UNKNOWN_KEY", 3);
}

TEST_CASE("duplicate definitions are rejected") {
    auto lines = base_lines();
    lines.push_back("[vm c1]");       // line 69
    lines.push_back("layer = client");
    check_diag(parse_lines(lines), "DUPLICATE_KEY", 69);

    check_diag(parse_scenario("[simulation]\nseed = 1\nseed = 2\nduration = 60\n"),
               "DUPLICATE_KEY", 3);

    auto twice = base_lines();
    twice.push_back("[firewall]"); // line 69: single-instance section
    check_diag(parse_lines(twice), "DUPLICATE_KEY", 69);
}

TEST_CASE("value failures are rejected") {
    auto lines = base_lines();
    lines[1] = "seed = banana"; // line 2
    check_diag(parse_lines(lines), "BAD_VALUE", 2);

    lines = base_lines();
    lines[16] = "layer = bogus"; // line 17
    check_diag(parse_lines(lines), "BAD_VALUE", 17);

    lines = base_lines();
    lines.push_back("[lan other]");
    lines.push_back("tenant = t1");
    lines.push_back("client_vms = c1");
    lines.push_back("clients = 1");
    lines.push_back("start_time = uniform 1 2");
    lines.push_back("packet_size = 0"); // line 74
    check_diag(parse_lines(lines), "BAD_VALUE", 74);
}

TEST_CASE("backwards uniform bounds are a range failure") {
    auto lines = base_lines();
    lines[65] = "start_time = uniform 5 2"; // line 66
    check_diag(parse_lines(lines), "BAD_RANGE", 66);

    lines = base_lines();
    lines.push_back("repeat = interarrival uniform 0 0"); // line 69: gap must be positive
    check_diag(parse_lines(lines), "BAD_RANGE", 69);
}

TEST_CASE("missing required keys are reported on the section") {
    auto lines = base_lines();
    lines[16] = "# layer removed"; // vm c1 on line 16 now has no layer
    check_diag(parse_lines(lines), "MISSING_KEY", 16);

    lines = base_lines();
    lines[62] = "# tenant removed"; // [lan office] on line 62
    check_diag(parse_lines(lines), "MISSING_KEY", 62);

    lines = base_lines();
    lines[2] = "# duration removed";
    check_diag(parse_lines(lines), "MISSING_KEY", 1);
}

TEST_CASE("cross references are validated") {
    SUBCASE("registered vm must exist") {
        auto lines = base_lines();
        lines[47] = "registered_vms = ghost"; // line 48
        check_diag(parse_lines(lines), "UNKNOWN_VM", 48);
    }
    SUBCASE("registered vm must sit on the client layer") {
        auto lines = base_lines();
        lines[47] = "registered_vms = c1, fw1";
        check_diag(parse_lines(lines), "BAD_VALUE", 48);
    }
    SUBCASE("vm arrays must exist") {
        auto lines = base_lines();
        lines[19] = "array = a_nope"; // vm fw1 starts on line 18
        check_diag(parse_lines(lines), "UNKNOWN_ARRAY", 18);
    }
    SUBCASE("an array binds to one layer") {
        auto lines = base_lines();
        lines[22] = "array = a_fw"; // meta1 borrows the firewall array
        const ParseResult result = parse_lines(lines);
        CHECK(find_diag(result, "ARRAY_LAYER") != nullptr);
        CHECK_FALSE(result.ok());
    }
    SUBCASE("grants must reference known tenants and keys") {
        auto lines = base_lines();
        lines[56] = "grant t9 c1 = k1"; // line 57
        check_diag(parse_lines(lines), "UNKNOWN_TENANT", 57);

        lines = base_lines();
        lines[56] = "grant t1 c1 = k9";
        check_diag(parse_lines(lines), "VAULT_KEY", 57);
    }
    SUBCASE("lans must reference known tenants") {
        auto lines = base_lines();
        lines[62] = "tenant = t9"; // [lan office] on line 62
        check_diag(parse_lines(lines), "UNKNOWN_TENANT", 62);
    }
    SUBCASE("challenge banks need three questions") {
        auto lines = base_lines();
        lines[53] = "# q3 removed"; // [tenant t1] on line 50
        check_diag(parse_lines(lines), "CHALLENGE_BANK", 50);
    }
}

TEST_CASE("topology problems surface as skip and gap diagnostics") {
    SUBCASE("preference must land one layer downstream") {
        auto lines = base_lines();
        lines[35] = "meta1 = 1"; // client edge jumping over the firewall, line 36
        check_diag(parse_lines(lines), "TOPOLOGY_SKIP", 36);
    }
    SUBCASE("a layer without preferences is a gap") {
        auto lines = base_lines();
        lines[34] = "# prefs removed";
        lines[35] = "# prefs removed";
        const ParseResult result = parse_lines(lines);
        CHECK(find_diag(result, "TOPOLOGY_GAP") != nullptr);
        CHECK_FALSE(result.ok());
    }
}

TEST_CASE("start windows must fit the run") {
    auto lines = base_lines();
    lines[65] = "start_time = uniform 59 61"; // can draw past duration = 60
    check_diag(parse_lines(lines), "DURATION", 62);

    lines = base_lines();
    lines[65] = "start_time = uniform 60 60"; // starts exactly at the end
    check_diag(parse_lines(lines), "DURATION", 62);
}

TEST_CASE("attacker profiles are validated during parsing") {
    const std::vector<std::string> attacker_tail = {
        "[attacker mole]",          // 69
        "vm = c1",                  // 70
        "tenant = t1",              // 71
        "impersonate = t1",         // 72
        "phase = data",             // 73
        "start_time = uniform 5 6", // 74
    };

    SUBCASE("zero-day signatures must be unknown") {
        auto lines = base_lines();
        lines.insert(lines.end(), attacker_tail.begin(), attacker_tail.end());
        lines.push_back("kind = zero_day");
        lines.push_back("signatures = exploit_aa"); // already in the exploit db
        check_diag(parse_lines(lines), "ZERO_DAY_KNOWN", 69);
    }
    SUBCASE("exploit signatures must be known") {
        auto lines = base_lines();
        lines.insert(lines.end(), attacker_tail.begin(), attacker_tail.end());
        lines.push_back("kind = exploit_injector");
        lines.push_back("signatures = mystery_hash");
        check_diag(parse_lines(lines), "SIGNATURE_UNKNOWN", 69);
    }
    SUBCASE("armed attackers need a payload") {
        auto lines = base_lines();
        lines.insert(lines.end(), attacker_tail.begin(), attacker_tail.end());
        lines.push_back("kind = malware_spreader");
        check_diag(parse_lines(lines), "ATTACKER_CONFIG", 69);
    }
}

TEST_CASE("until_end and interarrival values survive a round trip") {
    auto lines = base_lines();
    lines[66] = "data_packets = until_end";
    lines.push_back("repeat = interarrival uniform 2 4");
    const ParseResult result = parse_lines(lines);
    REQUIRE(result.ok());
    const Workload& wl = result.scenario->workloads.at(0);
    CHECK(wl.data_packets_per_session == -1);
    CHECK(wl.repeatability == Repeat::INTERARRIVAL);
    CHECK(wl.interarrival == UniformDist{2'000, 4'000});

    const ParseResult again = parse_scenario(serialize_scenario(*result.scenario));
    REQUIRE(again.ok());
    CHECK(*again.scenario == *result.scenario);
}

TEST_CASE("format_diagnostic prefixes the line only when known") {
    CHECK(format_diagnostic({12, "BAD_VALUE", "broken"}) == "line 12: BAD_VALUE: broken");
    CHECK(format_diagnostic({0, "IO", "cannot read"}) == "IO: cannot read");
}

TEST_CASE("load_scenario_file reports io failures as a diagnostic") {
    const ParseResult result = load_scenario_file("/nonexistent/path/nothing.scn");
    REQUIRE(result.diagnostics.size() == 1);
    CHECK(result.diagnostics[0].code == "IO");
    CHECK_FALSE(result.ok());
}

TEST_CASE("comments and blank lines are ignored") {
    const ParseResult result = parse_scenario("# header comment\n"
                                              "\n"
                                              "[simulation]  # trailing\n"
                                              "duration = 60   # comment after value\n");
    // Structurally incomplete (no topology), but the comment lines themselves
    // must not produce diagnostics and the duration must be read.
    CHECK(find_diag(result, "SYNTAX") == nullptr);
    CHECK(find_diag(result, "UNKNOWN_SECTION") == nullptr);
}
