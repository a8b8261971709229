#include "layersim/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace layersim {

TimeMs Scenario::service_time(LayerKind layer) const {
    auto it = service_times.find(layer);
    return it == service_times.end() ? 10 : it->second; // 0.010 s unless configured
}

std::string format_diagnostic(const Diagnostic& d) {
    std::ostringstream out;
    if (d.line > 0) {
        out << "line " << d.line << ": ";
    }
    out << d.code << ": " << d.message;
    return out.str();
}

namespace {

// ---------------------------------------------------------------------------
// Lexing: the format is line oriented. A line is a [section header], a
// "key = value" entry, a comment or blank. Keys may span several tokens
// ("credential userid", "grant tenant1 vm1").

struct Entry {
    int line = 0;
    std::vector<std::string> key;
    std::string value; // trimmed, comment stripped, original case
};

struct SectionInst {
    int line = 0;
    std::string type;
    std::string arg;
    std::vector<Entry> entries;
};

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) {
        out.push_back(cur);
    }
    return out;
}

std::vector<std::string> split_list(std::string_view value) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : value) {
        if (c == ',') {
            out.push_back(canonical_token(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(canonical_token(cur));
    if (out.size() == 1 && out[0].empty()) {
        out.clear(); // empty list
    }
    return out;
}

bool valid_token(const std::string& token) {
    if (token.empty()) {
        return false;
    }
    for (char c : token) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' ||
                        c == '.' || c == '@' || c == ':' || c == '+' || c == '-';
        if (!ok) {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Parse context: accumulates diagnostics and offers checked value readers.

struct Ctx {
    std::vector<Diagnostic> diags;

    void fail(int line, std::string code, std::string message) {
        diags.push_back({line, std::move(code), std::move(message)});
    }

    std::optional<std::uint64_t> get_u64(const Entry& e) {
        const std::string v = trim(e.value);
        if (v.empty() || v.size() > 19 ||
            !std::all_of(v.begin(), v.end(),
                         [](char c) { return c >= '0' && c <= '9'; })) {
            fail(e.line, "BAD_VALUE", "'" + v + "' is not an unsigned integer");
            return std::nullopt;
        }
        return std::stoull(v);
    }

    std::optional<std::uint32_t> get_u32(const Entry& e) {
        auto v = get_u64(e);
        if (v.has_value() && *v > UINT32_MAX) {
            fail(e.line, "BAD_VALUE", "value out of range");
            return std::nullopt;
        }
        return v;
    }

    std::optional<TimeMs> get_seconds(const Entry& e, bool allow_negative = false) {
        auto ms = parse_seconds(trim(e.value));
        if (!ms.has_value() || (!allow_negative && *ms < 0)) {
            fail(e.line, "BAD_VALUE",
                 "'" + trim(e.value) + "' is not a time in seconds (ms resolution)");
            return std::nullopt;
        }
        return ms;
    }

    std::optional<std::string> get_token(const Entry& e) {
        std::string v = canonical_token(e.value);
        if (!valid_token(v)) {
            fail(e.line, "BAD_VALUE", "'" + trim(e.value) + "' is not a valid token");
            return std::nullopt;
        }
        return v;
    }

    std::optional<std::vector<std::string>> get_list(const Entry& e) {
        auto items = split_list(e.value);
        for (const std::string& item : items) {
            if (!valid_token(item)) {
                fail(e.line, "BAD_VALUE", "list item '" + item + "' is not a valid token");
                return std::nullopt;
            }
        }
        return items;
    }

    std::optional<UniformDist> get_uniform(const Entry& e) {
        const auto parts = split_ws(e.value);
        if (parts.size() != 3 || canonical_token(parts[0]) != "uniform") {
            fail(e.line, "BAD_VALUE", "expected 'uniform <lo> <hi>'");
            return std::nullopt;
        }
        const auto lo = parse_seconds(parts[1]);
        const auto hi = parse_seconds(parts[2]);
        if (!lo.has_value() || !hi.has_value() || *lo < 0 || *hi < *lo) {
            fail(e.line, "BAD_RANGE", "uniform bounds must satisfy 0 <= lo <= hi");
            return std::nullopt;
        }
        return UniformDist{*lo, *hi};
    }
};

// Tracks which single-occurrence keys a section instance has seen.
struct KeyGuard {
    explicit KeyGuard(Ctx& c) : ctx(c) {}

    Ctx& ctx;
    std::set<std::string> seen;

    bool once(const Entry& e, const std::string& flat_key) {
        if (!seen.insert(flat_key).second) {
            ctx.fail(e.line, "DUPLICATE_KEY", "key '" + flat_key + "' appears twice");
            return false;
        }
        return true;
    }
};

std::string flat_key(const Entry& e) {
    std::string out;
    for (const auto& k : e.key) {
        if (!out.empty()) {
            out.push_back(' ');
        }
        out += k;
    }
    return out;
}

const std::set<std::string> kSectionTypes = {
    "simulation", "service_times", "array", "vm",  "preferences", "firewall", "tenant",
    "vault",      "ips",           "antimalware",  "lan",         "attacker", "feed",
};

const std::set<std::string> kArgSections = {"array", "vm", "preferences",
                                            "tenant", "lan", "attacker", "feed"};

std::vector<SectionInst> lex(std::string_view text, Ctx& ctx) {
    std::vector<SectionInst> sections;
    SectionInst* current = nullptr;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view raw =
            text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;

        std::string line = std::string(raw);
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.resize(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }

        if (line.front() == '[') {
            if (line.back() != ']') {
                ctx.fail(line_no, "SYNTAX", "unterminated section header");
                current = nullptr;
                continue;
            }
            const auto tokens = split_ws(line.substr(1, line.size() - 2));
            if (tokens.empty() || tokens.size() > 2) {
                ctx.fail(line_no, "SYNTAX", "section header needs one type and at most one name");
                current = nullptr;
                continue;
            }
            SectionInst inst;
            inst.line = line_no;
            inst.type = canonical_token(tokens[0]);
            if (tokens.size() == 2) {
                inst.arg = canonical_token(tokens[1]);
            }
            if (kSectionTypes.count(inst.type) == 0) {
                ctx.fail(line_no, "UNKNOWN_SECTION", "unknown section [" + inst.type + "]");
                current = nullptr;
                continue;
            }
            const bool needs_arg = kArgSections.count(inst.type) > 0;
            if (needs_arg && inst.arg.empty()) {
                ctx.fail(line_no, "SYNTAX", "section [" + inst.type + "] needs a name");
                current = nullptr;
                continue;
            }
            if (!needs_arg && !inst.arg.empty()) {
                ctx.fail(line_no, "SYNTAX", "section [" + inst.type + "] takes no name");
                current = nullptr;
                continue;
            }
            if (needs_arg && inst.type != "feed" && !valid_token(inst.arg)) {
                ctx.fail(line_no, "BAD_VALUE", "'" + inst.arg + "' is not a valid name");
                current = nullptr;
                continue;
            }
            sections.push_back(std::move(inst));
            current = &sections.back();
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            ctx.fail(line_no, "SYNTAX", "expected 'key = value'");
            continue;
        }
        if (current == nullptr) {
            ctx.fail(line_no, "SYNTAX", "entry outside any section");
            continue;
        }
        Entry entry;
        entry.line = line_no;
        for (const std::string& token : split_ws(line.substr(0, eq))) {
            entry.key.push_back(canonical_token(token));
        }
        entry.value = trim(line.substr(eq + 1));
        if (entry.key.empty()) {
            ctx.fail(line_no, "SYNTAX", "missing key before '='");
            continue;
        }
        current->entries.push_back(std::move(entry));
    }
    return sections;
}

// ---------------------------------------------------------------------------
// Build: one handler per section type. Cross references are resolved after
// all sections are in.

struct Builder {
    explicit Builder(Ctx& c) : ctx(c) {}

    Ctx& ctx;
    Scenario sc;

    // line bookkeeping for post-parse validation messages
    std::map<std::string, int> vm_line;
    std::map<std::pair<LayerKind, std::string>, int> pref_line;
    std::map<LayerKind, int> pref_section_line;
    std::map<std::string, int> group_line; // lans + attackers
    std::map<std::string, int> tenant_line;
    std::vector<std::pair<std::string, int>> registered_vm_lines;
    std::vector<std::tuple<std::string, std::string, std::string, int>> grant_lines;
    bool saw_simulation = false;
    bool saw_duration = false;
    bool saw_firewall = false;
    bool saw_vault = false;
    bool saw_ips = false;
    bool saw_am = false;
    int simulation_line = 0;

    bool once(bool& flag, const SectionInst& s) {
        if (flag) {
            ctx.fail(s.line, "DUPLICATE_KEY", "section [" + s.type + "] appears twice");
            return false;
        }
        flag = true;
        return true;
    }

    void handle(const SectionInst& s) {
        if (s.type == "simulation") {
            simulation(s);
        } else if (s.type == "service_times") {
            service_times(s);
        } else if (s.type == "array") {
            array(s);
        } else if (s.type == "vm") {
            vm(s);
        } else if (s.type == "preferences") {
            preferences(s);
        } else if (s.type == "firewall") {
            firewall(s);
        } else if (s.type == "tenant") {
            tenant(s);
        } else if (s.type == "vault") {
            vault(s);
        } else if (s.type == "ips" || s.type == "antimalware") {
            signatures(s);
        } else if (s.type == "lan") {
            lan(s);
        } else if (s.type == "attacker") {
            attacker(s);
        } else if (s.type == "feed") {
            feed(s);
        }
    }

    void reject_unknown(const SectionInst& s, const Entry& e) {
        ctx.fail(e.line, "UNKNOWN_KEY",
                 "key '" + flat_key(e) + "' is not valid in section [" + s.type + "]");
    }

    void simulation(const SectionInst& s) {
        if (saw_simulation) {
            ctx.fail(s.line, "DUPLICATE_KEY", "section [simulation] appears twice");
            return;
        }
        saw_simulation = true;
        simulation_line = s.line;
        KeyGuard guard(ctx);
        for (const Entry& e : s.entries) {
            const std::string key = flat_key(e);
            if (!guard.once(e, key)) {
                continue;
            }
            if (key == "seed") {
                if (auto v = ctx.get_u64(e)) sc.seed = *v;
            } else if (key == "duration") {
                if (auto v = ctx.get_seconds(e)) {
                    sc.sim_duration = *v;
                    saw_duration = true;
                }
            } else if (key == "bucket_width") {
                if (auto v = ctx.get_seconds(e)) sc.bucket_width = *v;
            } else if (key == "link_delay") {
                if (auto v = ctx.get_seconds(e)) sc.link_delay = *v;
            } else {
                reject_unknown(s, e);
            }
        }
    }

    void service_times(const SectionInst& s) {
        KeyGuard guard(ctx);
        for (const Entry& e : s.entries) {
            const std::string key = flat_key(e);
            if (!guard.once(e, key)) {
                continue;
            }
            LayerKind kind;
            if (key == "fw") kind = LayerKind::FW;
            else if (key == "meta") kind = LayerKind::META;
            else if (key == "vault") kind = LayerKind::VAULT;
            else if (key == "ips") kind = LayerKind::IPS;
            else if (key == "am") kind = LayerKind::AM;
            else {
                reject_unknown(s, e);
                continue;
            }
            if (auto v = ctx.get_seconds(e)) {
                sc.service_times[kind] = *v;
            }
        }
    }

    void array(const SectionInst& s) {
        if (sc.arrays.count(s.arg) > 0) {
            ctx.fail(s.line, "DUPLICATE_KEY", "array '" + s.arg + "' defined twice");
            return;
        }
        ServerArrayCfg cfg;
        cfg.id = s.arg;
        KeyGuard guard(ctx);
        for (const Entry& e : s.entries) {
            const std::string key = flat_key(e);
            if (!guard.once(e, key)) {
                continue;
            }
            if (key == "servers") {
                if (auto v = ctx.get_u32(e)) {
                    if (*v == 0) {
                        ctx.fail(e.line, "BAD_VALUE", "an array needs at least one server");
                    } else {
                        cfg.servers = *v;
                    }
                }
            } else {
                reject_unknown(s, e);
            }
        }
        sc.arrays.emplace(cfg.id, cfg);
    }

    void vm(const SectionInst& s) {
        if (sc.topology.vms.count(s.arg) > 0) {
            ctx.fail(s.line, "DUPLICATE_KEY", "vm '" + s.arg + "' defined twice");
            return;
        }
        VmNode node;
        node.id = s.arg;
        bool saw_layer = false;
        KeyGuard guard(ctx);
        for (const Entry& e : s.entries) {
            const std::string key = flat_key(e);
            if (!guard.once(e, key)) {
                continue;
            }
            if (key == "layer") {
                const std::string value = canonical_token(e.value);
                bool found = false;
                for (LayerKind layer : kLayerOrder) {
                    std::string name(layer_name(layer));
                    std::transform(name.begin(), name.end(), name.begin(), ::tolower);
                    if (name == value) {
                        node.layer = layer;
                        found = true;
                        break;
                    }
                }
                if (!found) {
                    ctx.fail(e.line, "BAD_VALUE", "'" + value + "' is not a layer");
                } else {
                    saw_layer = true;
                }
            } else if (key == "array") {
                if (auto v = ctx.get_token(e)) node.server_array = *v;
            } else {
                reject_unknown(s, e);
            }
        }
        if (!saw_layer) {
            ctx.fail(s.line, "MISSING_KEY", "vm '" + s.arg + "' needs a layer");
        }
        vm_line[node.id] = s.line;
        sc.topology.vms.emplace(node.id, node);
    }

    void preferences(const SectionInst& s) {
        LayerKind source;
        if (s.arg == "client") source = LayerKind::CLIENT;
        else if (s.arg == "fw") source = LayerKind::FW;
        else if (s.arg == "meta") source = LayerKind::META;
        else if (s.arg == "vault") source = LayerKind::VAULT;
        else if (s.arg == "ips") source = LayerKind::IPS;
        else if (s.arg == "am") source = LayerKind::AM;
        else if (s.arg == "apps") source = LayerKind::APPS;
        else if (s.arg == "db") source = LayerKind::DB;
        else {
            ctx.fail(s.line, "BAD_VALUE", "'" + s.arg + "' is not a layer");
            return;
        }
        if (sc.topology.preferences.count(source) > 0) {
            ctx.fail(s.line, "DUPLICATE_KEY",
                     "preferences for layer '" + s.arg + "' defined twice");
            return;
        }
        pref_section_line[source] = s.line;
        auto& entries = sc.topology.preferences[source];
        std::set<std::string> seen;
        for (const Entry& e : s.entries) {
            if (e.key.size() != 1) {
                ctx.fail(e.line, "SYNTAX", "expected '<vm> = <weight>'");
                continue;
            }
            const std::string target = e.key[0];
            if (!valid_token(target)) {
                ctx.fail(e.line, "BAD_VALUE", "'" + target + "' is not a valid vm id");
                continue;
            }
            if (!seen.insert(target).second) {
                ctx.fail(e.line, "DUPLICATE_KEY", "target '" + target + "' listed twice");
                continue;
            }
            if (auto weight = ctx.get_u32(e)) {
                if (*weight == 0) {
                    ctx.fail(e.line, "BAD_VALUE", "preference weight must be >= 1");
                    continue;
                }
                entries.push_back({target, *weight});
                pref_line[{source, target}] = e.line;
            }
        }
    }

    void firewall(const SectionInst& s) {
        if (!once(saw_firewall, s)) {
            return;
        }
        KeyGuard guard(ctx);
        for (const Entry& e : s.entries) {
            const std::string key = flat_key(e);
            if (key == "registered_vms") {
                if (!guard.once(e, key)) continue;
                if (auto list = ctx.get_list(e)) {
                    for (const std::string& vm : *list) {
                        sc.databases.fw.registered_vm_ids.insert(vm);
                        registered_vm_lines.emplace_back(vm, e.line);
                    }
                }
            } else if (e.key.size() == 2 && e.key[0] == "acl" &&
                       (e.key[1] == "allow" || e.key[1] == "deny")) {
                if (auto list = ctx.get_list(e)) {
                    for (const std::string& protocol : *list) {
                        sc.databases.fw.acl.push_back({protocol, e.key[1] == "allow"});
                    }
                }
            } else {
                reject_unknown(s, e);
            }
        }
    }

    void tenant(const SectionInst& s) {
        if (sc.databases.meta.records.count(s.arg) > 0) {
            ctx.fail(s.line, "DUPLICATE_KEY", "tenant '" + s.arg + "' defined twice");
            return;
        }
        TenantRecord record;
        KeyGuard guard(ctx);
        for (const Entry& e : s.entries) {
            const std::string key = flat_key(e);
            if (e.key.size() == 2 && e.key[0] == "credential") {
                if (!guard.once(e, key)) continue;
                if (auto v = ctx.get_token(e)) {
                    record.credentials.emplace(e.key[1], *v);
                }
            } else if (e.key.size() == 2 && e.key[0] == "challenge") {
                if (!guard.once(e, key)) continue;
                if (auto v = ctx.get_token(e)) {
                    record.challenge_bank.emplace(e.key[1], *v);
                }
            } else if (key == "apps") {
                if (!guard.once(e, key)) continue;
                if (auto list = ctx.get_list(e)) {
                    record.authorized_apps.insert(list->begin(), list->end());
                }
            } else if (key == "db_objects") {
                if (!guard.once(e, key)) continue;
                if (auto list = ctx.get_list(e)) {
                    record.authorized_db_objects.insert(list->begin(), list->end());
                }
            } else {
                reject_unknown(s, e);
            }
        }
        if (record.challenge_bank.size() < kChallengesPerSession) {
            ctx.fail(s.line, "CHALLENGE_BANK",
                     "tenant '" + s.arg + "' needs at least 3 challenge entries");
        }
        tenant_line[s.arg] = s.line;
        sc.databases.meta.records.emplace(s.arg, std::move(record));
    }

    void vault(const SectionInst& s) {
        if (!once(saw_vault, s)) {
            return;
        }
        for (const Entry& e : s.entries) {
            if (e.key.size() == 3 && e.key[0] == "grant") {
                const std::string tenant = e.key[1];
                const std::string vm = e.key[2];
                if (sc.databases.vault.grants.count({tenant, vm}) > 0) {
                    ctx.fail(e.line, "DUPLICATE_KEY",
                             "grant for (" + tenant + ", " + vm + ") defined twice");
                    continue;
                }
                if (auto list = ctx.get_list(e)) {
                    std::set<std::string> keys(list->begin(), list->end());
                    for (const std::string& key : keys) {
                        grant_lines.emplace_back(tenant, vm, key, e.line);
                    }
                    sc.databases.vault.grants.emplace(std::make_pair(tenant, vm),
                                                      std::move(keys));
                }
            } else if (e.key.size() == 2 && e.key[0] == "key") {
                const std::string id = e.key[1];
                if (sc.databases.vault.keys.count(id) > 0) {
                    ctx.fail(e.line, "DUPLICATE_KEY", "key '" + id + "' defined twice");
                    continue;
                }
                if (auto list = ctx.get_list(e)) {
                    sc.databases.vault.keys.emplace(
                        id, std::set<std::string>(list->begin(), list->end()));
                }
            } else {
                reject_unknown(s, e);
            }
        }
    }

    void signatures(const SectionInst& s) {
        if (!once(s.type == "ips" ? saw_ips : saw_am, s)) {
            return;
        }
        SignatureDb& db = s.type == "ips" ? sc.databases.ips : sc.databases.antimal;
        KeyGuard guard(ctx);
        for (const Entry& e : s.entries) {
            const std::string key = flat_key(e);
            if (!guard.once(e, key)) {
                continue;
            }
            if (key == "signatures") {
                if (auto list = ctx.get_list(e)) {
                    db.signatures.insert(list->begin(), list->end());
                }
            } else {
                reject_unknown(s, e);
            }
        }
    }

    // Shared plan keys of [lan] and [attacker]. Returns false on unknown key.
    bool plan_key(const Entry& e, const std::string& key, UniformDist& start, bool& saw_start,
                  std::int64_t& data_packets, TimeMs& data_interval, std::uint64_t& packet_size,
                  std::string& protocol, std::uint32_t& retries, TimeMs& retry_delay) {
        if (key == "start_time") {
            if (auto v = ctx.get_uniform(e)) {
                start = *v;
                saw_start = true;
            }
        } else if (key == "data_packets") {
            if (canonical_token(e.value) == "until_end") {
                data_packets = -1;
            } else if (auto v = ctx.get_u64(e)) {
                data_packets = static_cast<std::int64_t>(*v);
            }
        } else if (key == "data_interval") {
            if (auto v = ctx.get_seconds(e)) data_interval = *v;
        } else if (key == "packet_size") {
            if (auto v = ctx.get_u64(e)) {
                if (*v == 0) {
                    ctx.fail(e.line, "BAD_VALUE", "packet_size must be >= 1");
                } else {
                    packet_size = *v;
                }
            }
        } else if (key == "protocol") {
            if (auto v = ctx.get_token(e)) protocol = *v;
        } else if (key == "retries") {
            if (auto v = ctx.get_u32(e)) retries = *v;
        } else if (key == "retry_delay") {
            if (auto v = ctx.get_seconds(e)) retry_delay = *v;
        } else {
            return false;
        }
        return true;
    }

    void lan(const SectionInst& s) {
        if (group_line.count(s.arg) > 0) {
            ctx.fail(s.line, "DUPLICATE_KEY", "group '" + s.arg + "' defined twice");
            return;
        }
        group_line[s.arg] = s.line;
        Workload wl;
        wl.name = s.arg;
        bool saw_start = false, saw_tenant = false, saw_vms = false, saw_clients = false;
        KeyGuard guard(ctx);
        for (const Entry& e : s.entries) {
            const std::string key = flat_key(e);
            if (!guard.once(e, key)) {
                continue;
            }
            if (key == "tenant") {
                if (auto v = ctx.get_token(e)) {
                    wl.tenant_id = *v;
                    saw_tenant = true;
                }
            } else if (key == "client_vms") {
                if (auto list = ctx.get_list(e)) {
                    wl.vm_profiles = *list;
                    saw_vms = !list->empty();
                }
            } else if (key == "clients") {
                if (auto v = ctx.get_u32(e)) {
                    if (*v == 0) {
                        ctx.fail(e.line, "BAD_VALUE", "a lan needs at least one client");
                    } else {
                        wl.client_count = *v;
                        saw_clients = true;
                    }
                }
            } else if (key == "repeat") {
                const auto parts = split_ws(e.value);
                if (parts.size() == 1 && canonical_token(parts[0]) == "once") {
                    wl.repeatability = Repeat::ONCE;
                } else if (parts.size() == 4 && canonical_token(parts[0]) == "interarrival" &&
                           canonical_token(parts[1]) == "uniform") {
                    const auto lo = parse_seconds(parts[2]);
                    const auto hi = parse_seconds(parts[3]);
                    if (!lo.has_value() || !hi.has_value() || *lo < 0 || *hi < *lo) {
                        ctx.fail(e.line, "BAD_RANGE",
                                 "interarrival bounds must satisfy 0 <= lo <= hi");
                    } else if (*lo == 0 && *hi == 0) {
                        ctx.fail(e.line, "BAD_RANGE", "interarrival gap must be positive");
                    } else {
                        wl.repeatability = Repeat::INTERARRIVAL;
                        wl.interarrival = UniformDist{*lo, *hi};
                    }
                } else {
                    ctx.fail(e.line, "BAD_VALUE",
                             "expected 'once' or 'interarrival uniform <lo> <hi>'");
                }
            } else if (!plan_key(e, key, wl.start_time, saw_start, wl.data_packets_per_session,
                                 wl.data_interval, wl.packet_size_bytes, wl.protocol,
                                 wl.retries, wl.retry_delay)) {
                reject_unknown(s, e);
            }
        }
        if (!saw_tenant) ctx.fail(s.line, "MISSING_KEY", "lan '" + s.arg + "' needs a tenant");
        if (!saw_vms) ctx.fail(s.line, "MISSING_KEY", "lan '" + s.arg + "' needs client_vms");
        if (!saw_clients) ctx.fail(s.line, "MISSING_KEY", "lan '" + s.arg + "' needs clients");
        if (!saw_start) ctx.fail(s.line, "MISSING_KEY", "lan '" + s.arg + "' needs a start_time");
        if (wl.data_packets_per_session != 0 && wl.data_interval < 1) {
            ctx.fail(s.line, "BAD_VALUE", "data_interval must be at least 0.001");
        }
        sc.workloads.push_back(std::move(wl));
    }

    void attacker(const SectionInst& s) {
        if (group_line.count(s.arg) > 0) {
            ctx.fail(s.line, "DUPLICATE_KEY", "group '" + s.arg + "' defined twice");
            return;
        }
        group_line[s.arg] = s.line;
        AttackerEntry entry;
        entry.profile.name = s.arg;
        bool saw_start = false, saw_kind = false, saw_vm = false, saw_tenant = false;
        KeyGuard guard(ctx);
        for (const Entry& e : s.entries) {
            const std::string key = flat_key(e);
            if (!guard.once(e, key)) {
                continue;
            }
            if (key == "kind") {
                const std::string v = canonical_token(e.value);
                if (v == "insider_subscriber") entry.profile.kind = AttackerKind::INSIDER_SUBSCRIBER;
                else if (v == "exploit_injector") entry.profile.kind = AttackerKind::EXPLOIT_INJECTOR;
                else if (v == "malware_spreader") entry.profile.kind = AttackerKind::MALWARE_SPREADER;
                else if (v == "zero_day") entry.profile.kind = AttackerKind::ZERO_DAY;
                else {
                    ctx.fail(e.line, "BAD_VALUE",
                             "kind must be insider_subscriber, exploit_injector, "
                             "malware_spreader or zero_day");
                    continue;
                }
                saw_kind = true;
            } else if (key == "vm") {
                if (auto v = ctx.get_token(e)) {
                    entry.profile.vm_id = *v;
                    saw_vm = true;
                }
            } else if (key == "tenant") {
                if (auto v = ctx.get_token(e)) {
                    entry.profile.tenant_id = *v;
                    saw_tenant = true;
                }
            } else if (key == "impersonate") {
                if (auto v = ctx.get_token(e)) entry.profile.impersonate_tenant = *v;
            } else if (e.key.size() == 2 && e.key[0] == "credential") {
                if (auto v = ctx.get_token(e)) {
                    entry.profile.forged_credentials.emplace(e.key[1], *v);
                }
            } else if (key == "signatures") {
                if (auto list = ctx.get_list(e)) {
                    entry.profile.injected_signatures.insert(list->begin(), list->end());
                }
            } else if (key == "phase") {
                const std::string v = canonical_token(e.value);
                if (v == "setup") entry.profile.injection_phase = InjectionPhase::SETUP;
                else if (v == "data") entry.profile.injection_phase = InjectionPhase::DATA;
                else ctx.fail(e.line, "BAD_VALUE", "phase must be setup or data");
            } else if (key == "sessions") {
                if (auto v = ctx.get_u32(e)) {
                    if (*v == 0) {
                        ctx.fail(e.line, "BAD_VALUE", "an attacker needs at least one session");
                    } else {
                        entry.plan.sessions = *v;
                    }
                }
            } else if (!plan_key(e, key, entry.plan.start_time, saw_start,
                                 entry.plan.data_packets, entry.plan.data_interval,
                                 entry.plan.packet_size_bytes, entry.protocol, entry.retries,
                                 entry.retry_delay)) {
                reject_unknown(s, e);
            }
        }
        if (!saw_kind) ctx.fail(s.line, "MISSING_KEY", "attacker '" + s.arg + "' needs a kind");
        if (!saw_vm) ctx.fail(s.line, "MISSING_KEY", "attacker '" + s.arg + "' needs a vm");
        if (!saw_tenant) ctx.fail(s.line, "MISSING_KEY", "attacker '" + s.arg + "' needs a tenant");
        if (!saw_start) {
            ctx.fail(s.line, "MISSING_KEY", "attacker '" + s.arg + "' needs a start_time");
        }
        if (entry.plan.data_packets != 0 && entry.plan.data_interval < 1) {
            ctx.fail(s.line, "BAD_VALUE", "data_interval must be at least 0.001");
        }
        sc.attackers.push_back(std::move(entry));
    }

    void feed(const SectionInst& s) {
        FeedUpdate update;
        const auto time = parse_seconds(s.arg);
        if (!time.has_value() || *time < 0) {
            ctx.fail(s.line, "BAD_VALUE", "feed time '" + s.arg + "' is not a time in seconds");
            return;
        }
        update.time = *time;
        bool saw_layer = false;
        KeyGuard guard(ctx);
        for (const Entry& e : s.entries) {
            const std::string key = flat_key(e);
            if (!guard.once(e, key)) {
                continue;
            }
            if (key == "layer") {
                const std::string v = canonical_token(e.value);
                if (v == "ips") update.layer = SignatureKind::EXPLOIT;
                else if (v == "am") update.layer = SignatureKind::MALWARE;
                else {
                    ctx.fail(e.line, "BAD_VALUE", "feed layer must be ips or am");
                    continue;
                }
                saw_layer = true;
            } else if (key == "signatures") {
                if (auto list = ctx.get_list(e)) {
                    update.signatures.insert(list->begin(), list->end());
                }
            } else {
                reject_unknown(s, e);
            }
        }
        if (!saw_layer) {
            ctx.fail(s.line, "MISSING_KEY", "feed needs a layer");
        }
        sc.feed_updates.push_back(std::move(update));
    }

    // ------------------------------------------------------------------
    // Cross-reference validation. Only run when the sections themselves
    // were clean; references into half-built structures produce noise.

    void check_references() {
        if (!saw_simulation || !saw_duration) {
            ctx.fail(simulation_line, "MISSING_KEY",
                     "scenario needs a [simulation] section with a duration");
        }
        if (sc.sim_duration <= 0) {
            ctx.fail(simulation_line, "BAD_VALUE", "duration must be positive");
        }
        if (sc.bucket_width <= 0) {
            ctx.fail(simulation_line, "BAD_VALUE", "bucket_width must be positive");
        }

        // Topology structure.
        for (const TopologyIssue& issue : validate_topology(sc.topology)) {
            int line = 0;
            if (!issue.target_vm.empty()) {
                auto it = pref_line.find({issue.source_layer, issue.target_vm});
                if (it != pref_line.end()) line = it->second;
            } else {
                auto it = pref_section_line.find(issue.source_layer);
                if (it != pref_section_line.end()) line = it->second;
            }
            ctx.fail(line, issue.code, issue.message);
        }

        // VM server arrays.
        std::map<std::string, LayerKind> array_layer;
        for (const auto& [id, node] : sc.topology.vms) {
            const bool inspects =
                node.layer >= LayerKind::FW && node.layer <= LayerKind::AM;
            if (!inspects) {
                if (!node.server_array.empty()) {
                    ctx.fail(vm_line[id], "BAD_VALUE",
                             "vm '" + id + "' on layer " + std::string(layer_name(node.layer)) +
                                 " does not service packets and takes no array");
                }
                continue;
            }
            if (node.server_array.empty()) {
                ctx.fail(vm_line[id], "MISSING_KEY",
                         "vm '" + id + "' needs a server array");
                continue;
            }
            if (sc.arrays.count(node.server_array) == 0) {
                ctx.fail(vm_line[id], "UNKNOWN_ARRAY",
                         "vm '" + id + "' references unknown array '" + node.server_array + "'");
                continue;
            }
            auto [it, inserted] = array_layer.emplace(node.server_array, node.layer);
            if (!inserted && it->second != node.layer) {
                ctx.fail(vm_line[id], "ARRAY_LAYER",
                         "array '" + node.server_array + "' is shared across layers");
            }
        }

        // Firewall registrations point at client VMs.
        for (const auto& [vm, line] : registered_vm_lines) {
            const VmNode* node = sc.topology.find_vm(vm);
            if (node == nullptr) {
                ctx.fail(line, "UNKNOWN_VM", "registered vm '" + vm + "' does not exist");
            } else if (node->layer != LayerKind::CLIENT) {
                ctx.fail(line, "BAD_VALUE",
                         "registered vm '" + vm + "' is not a CLIENT-layer vm");
            }
        }

        // Vault cross references.
        for (const auto& [tenant, vm, key, line] : grant_lines) {
            if (sc.databases.meta.records.count(tenant) == 0) {
                ctx.fail(line, "UNKNOWN_TENANT",
                         "grant references unknown tenant '" + tenant + "'");
            }
            if (sc.topology.find_vm(vm) == nullptr) {
                ctx.fail(line, "UNKNOWN_VM", "grant references unknown vm '" + vm + "'");
            }
            if (sc.databases.vault.keys.count(key) == 0) {
                ctx.fail(line, "VAULT_KEY", "grant references undefined key '" + key + "'");
            }
        }

        // Workloads.
        for (const Workload& wl : sc.workloads) {
            const int line = group_line[wl.name];
            if (sc.databases.meta.records.count(wl.tenant_id) == 0) {
                ctx.fail(line, "UNKNOWN_TENANT",
                         "lan '" + wl.name + "' references unknown tenant '" + wl.tenant_id +
                             "'");
            }
            for (const std::string& vm : wl.vm_profiles) {
                const VmNode* node = sc.topology.find_vm(vm);
                if (node == nullptr) {
                    ctx.fail(line, "UNKNOWN_VM",
                             "lan '" + wl.name + "' references unknown vm '" + vm + "'");
                } else if (node->layer != LayerKind::CLIENT) {
                    ctx.fail(line, "BAD_VALUE",
                             "lan vm '" + vm + "' is not a CLIENT-layer vm");
                }
            }
            check_window(line, wl.name, wl.start_time);
        }

        // Attackers.
        for (const AttackerEntry& entry : sc.attackers) {
            const int line = group_line[entry.profile.name];
            const VmNode* node = sc.topology.find_vm(entry.profile.vm_id);
            if (node == nullptr) {
                ctx.fail(line, "UNKNOWN_VM",
                         "attacker '" + entry.profile.name + "' references unknown vm '" +
                             entry.profile.vm_id + "'");
            } else if (node->layer != LayerKind::CLIENT) {
                ctx.fail(line, "BAD_VALUE",
                         "attacker vm '" + entry.profile.vm_id + "' is not a CLIENT-layer vm");
            }
            for (const ProfileIssue& issue : validate_profile(entry.profile, sc.databases)) {
                ctx.fail(line, issue.code, issue.message);
            }
            check_window(line, entry.profile.name, entry.plan.start_time);
        }
    }

    void check_window(int line, const std::string& name, const UniformDist& start) {
        // Every possible start draw must land strictly inside the run.
        if (sc.sim_duration <= start.lo || sc.sim_duration < start.hi) {
            ctx.fail(line, "DURATION",
                     "duration must exceed every start time of '" + name + "'");
        }
    }
};

} // namespace

ParseResult parse_scenario(std::string_view text) {
    Ctx ctx;
    const std::vector<SectionInst> sections = lex(text, ctx);

    Builder builder(ctx);
    for (const SectionInst& s : sections) {
        builder.handle(s);
    }
    if (ctx.diags.empty()) {
        builder.check_references();
    }

    ParseResult result;
    result.diagnostics = std::move(ctx.diags);
    if (result.diagnostics.empty()) {
        // Materialize per-layer defaults so serialize(parse(x)) is a fixed
        // point: a scenario value always carries all five service times.
        for (LayerKind layer : kInspectionLayers) {
            builder.sc.service_times.emplace(layer, builder.sc.service_time(layer));
        }
        result.scenario = std::move(builder.sc);
    }
    return result;
}

ParseResult load_scenario_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        ParseResult result;
        result.diagnostics.push_back({0, "IO", "cannot read scenario file '" + path + "'"});
        return result;
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario(buffer.str());
}

namespace {

std::string join(const std::set<std::string>& items) {
    std::string out;
    for (const std::string& item : items) {
        if (!out.empty()) {
            out += ", ";
        }
        out += item;
    }
    return out;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const std::string& item : items) {
        if (!out.empty()) {
            out += ", ";
        }
        out += item;
    }
    return out;
}

std::string lower_layer(LayerKind layer) {
    std::string name(layer_name(layer));
    std::transform(name.begin(), name.end(), name.begin(), ::tolower);
    return name;
}

std::string attacker_kind_token(AttackerKind kind) {
    switch (kind) {
    case AttackerKind::INSIDER_SUBSCRIBER: return "insider_subscriber";
    case AttackerKind::EXPLOIT_INJECTOR: return "exploit_injector";
    case AttackerKind::MALWARE_SPREADER: return "malware_spreader";
    case AttackerKind::ZERO_DAY: return "zero_day";
    }
    return "?";
}

} // namespace

std::string serialize_scenario(const Scenario& sc) {
    std::ostringstream out;
    out << "[simulation]\n";
    out << "seed = " << sc.seed << "\n";
    out << "duration = " << format_seconds(sc.sim_duration) << "\n";
    out << "bucket_width = " << format_seconds(sc.bucket_width) << "\n";
    out << "link_delay = " << format_seconds(sc.link_delay) << "\n";

    out << "\n[service_times]\n";
    for (LayerKind layer : kInspectionLayers) {
        out << lower_layer(layer) << " = " << format_seconds(sc.service_time(layer)) << "\n";
    }

    for (const auto& [id, cfg] : sc.arrays) {
        out << "\n[array " << id << "]\nservers = " << cfg.servers << "\n";
    }

    for (const auto& [id, node] : sc.topology.vms) {
        out << "\n[vm " << id << "]\nlayer = " << lower_layer(node.layer) << "\n";
        if (!node.server_array.empty()) {
            out << "array = " << node.server_array << "\n";
        }
    }

    for (const auto& [layer, entries] : sc.topology.preferences) {
        out << "\n[preferences " << lower_layer(layer) << "]\n";
        for (const PrefEntry& entry : entries) {
            out << entry.target_vm << " = " << entry.weight << "\n";
        }
    }

    if (!sc.databases.fw.registered_vm_ids.empty() || !sc.databases.fw.acl.empty()) {
        out << "\n[firewall]\n";
        if (!sc.databases.fw.registered_vm_ids.empty()) {
            out << "registered_vms = " << join(sc.databases.fw.registered_vm_ids) << "\n";
        }
        for (const AclRule& rule : sc.databases.fw.acl) {
            out << "acl " << (rule.allow ? "allow" : "deny") << " = " << rule.protocol << "\n";
        }
    }

    for (const auto& [id, record] : sc.databases.meta.records) {
        out << "\n[tenant " << id << "]\n";
        for (const auto& [attr, value] : record.credentials) {
            out << "credential " << attr << " = " << value << "\n";
        }
        for (const auto& [name, answer] : record.challenge_bank) {
            out << "challenge " << name << " = " << answer << "\n";
        }
        if (!record.authorized_apps.empty()) {
            out << "apps = " << join(record.authorized_apps) << "\n";
        }
        if (!record.authorized_db_objects.empty()) {
            out << "db_objects = " << join(record.authorized_db_objects) << "\n";
        }
    }

    if (!sc.databases.vault.grants.empty() || !sc.databases.vault.keys.empty()) {
        out << "\n[vault]\n";
        for (const auto& [pair, keys] : sc.databases.vault.grants) {
            out << "grant " << pair.first << " " << pair.second << " = " << join(keys) << "\n";
        }
        for (const auto& [id, objects] : sc.databases.vault.keys) {
            out << "key " << id << " = " << join(objects) << "\n";
        }
    }

    if (!sc.databases.ips.signatures.empty()) {
        out << "\n[ips]\nsignatures = " << join(sc.databases.ips.signatures) << "\n";
    }
    if (!sc.databases.antimal.signatures.empty()) {
        out << "\n[antimalware]\nsignatures = " << join(sc.databases.antimal.signatures)
            << "\n";
    }

    for (const Workload& wl : sc.workloads) {
        out << "\n[lan " << wl.name << "]\n";
        out << "tenant = " << wl.tenant_id << "\n";
        out << "client_vms = " << join(wl.vm_profiles) << "\n";
        out << "clients = " << wl.client_count << "\n";
        out << "start_time = uniform " << format_seconds(wl.start_time.lo) << " "
            << format_seconds(wl.start_time.hi) << "\n";
        if (wl.repeatability == Repeat::INTERARRIVAL) {
            out << "repeat = interarrival uniform " << format_seconds(wl.interarrival.lo) << " "
                << format_seconds(wl.interarrival.hi) << "\n";
        } else {
            out << "repeat = once\n";
        }
        if (wl.data_packets_per_session < 0) {
            out << "data_packets = until_end\n";
        } else {
            out << "data_packets = " << wl.data_packets_per_session << "\n";
        }
        out << "data_interval = " << format_seconds(wl.data_interval) << "\n";
        out << "packet_size = " << wl.packet_size_bytes << "\n";
        out << "protocol = " << wl.protocol << "\n";
        out << "retries = " << wl.retries << "\n";
        out << "retry_delay = " << format_seconds(wl.retry_delay) << "\n";
    }

    for (const AttackerEntry& entry : sc.attackers) {
        out << "\n[attacker " << entry.profile.name << "]\n";
        out << "kind = " << attacker_kind_token(entry.profile.kind) << "\n";
        out << "vm = " << entry.profile.vm_id << "\n";
        out << "tenant = " << entry.profile.tenant_id << "\n";
        if (entry.profile.impersonate_tenant.has_value()) {
            out << "impersonate = " << *entry.profile.impersonate_tenant << "\n";
        }
        for (const auto& [attr, value] : entry.profile.forged_credentials) {
            out << "credential " << attr << " = " << value << "\n";
        }
        if (!entry.profile.injected_signatures.empty()) {
            out << "signatures = " << join(entry.profile.injected_signatures) << "\n";
        }
        out << "phase = "
            << (entry.profile.injection_phase == InjectionPhase::SETUP ? "setup" : "data")
            << "\n";
        out << "sessions = " << entry.plan.sessions << "\n";
        out << "start_time = uniform " << format_seconds(entry.plan.start_time.lo) << " "
            << format_seconds(entry.plan.start_time.hi) << "\n";
        if (entry.plan.data_packets < 0) {
            out << "data_packets = until_end\n";
        } else {
            out << "data_packets = " << entry.plan.data_packets << "\n";
        }
        out << "data_interval = " << format_seconds(entry.plan.data_interval) << "\n";
        out << "packet_size = " << entry.plan.packet_size_bytes << "\n";
        out << "protocol = " << entry.protocol << "\n";
        out << "retries = " << entry.retries << "\n";
        out << "retry_delay = " << format_seconds(entry.retry_delay) << "\n";
    }

    for (const FeedUpdate& update : sc.feed_updates) {
        out << "\n[feed " << format_seconds(update.time) << "]\n";
        out << "layer = " << (update.layer == SignatureKind::EXPLOIT ? "ips" : "am") << "\n";
        if (!update.signatures.empty()) {
            out << "signatures = " << join(update.signatures) << "\n";
        }
    }

    return out.str();
}

} // namespace layersim
