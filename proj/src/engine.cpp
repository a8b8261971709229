#include "layersim/engine.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <queue>

#include "layersim/attacks.hpp"
#include "layersim/errors.hpp"
#include "layersim/scenario.hpp"

namespace layersim {

ServerArray::ServerArray(std::string id, std::uint32_t servers, TimeMs service_time)
    : id_(std::move(id)), service_time_(service_time), free_at_(servers, 0) {
    if (servers == 0) {
        throw ConfigError("server array '" + id_ + "' needs at least one server");
    }
    if (service_time_ < 0) {
        throw ConfigError("server array '" + id_ + "' needs a non-negative service time");
    }
}

TimeMs ServerArray::enqueue_service(TimeMs now) {
    // earliest-free server, ties to the lowest index
    auto slot = std::min_element(free_at_.begin(), free_at_.end());
    const TimeMs start = std::max(now, *slot);
    const TimeMs done = start + service_time_;
    *slot = done;
    completions_.push_back(done);
    busy_log_.emplace_back(start, done);
    return done;
}

namespace {

struct Ev {
    TimeMs time = 0;
    EventKind kind = EventKind::SIM_END;
    std::uint64_t seq = 0; // insertion order, the final tie breaker

    std::string session_id;
    std::string vm;                        // node handling the packet
    LayerKind layer = LayerKind::CLIENT;   // that node's layer
    PacketKind pkind = PacketKind::SETUP;
    std::uint64_t packet_seq = 0;
    std::size_t feed_index = 0;
    std::size_t group = 0;
    std::uint32_t client = 0;
    std::uint32_t occurrence = 0;
    std::uint32_t attempt = 0;
};

struct EvAfter {
    bool operator()(const Ev& a, const Ev& b) const {
        if (a.time != b.time) return a.time > b.time;
        if (a.kind != b.kind) return static_cast<int>(a.kind) > static_cast<int>(b.kind);
        return a.seq > b.seq;
    }
};

// One traffic source: a LAN of honest clients or one attacker entry.
struct GroupRt {
    std::string name;
    std::string tenant;
    std::vector<std::string> client_vms; // client i emits from [i % size]
    std::uint32_t clients = 1;
    UniformDist start;
    Repeat repeat = Repeat::ONCE;
    UniformDist inter;
    std::int64_t budget = 0; // DATA packets per session, -1 until the run ends
    TimeMs interval = kMsPerSecond;
    std::uint64_t psize = 1000;
    std::string protocol = "tcp";
    std::uint32_t retries = 0;
    TimeMs retry_delay = 0;
    const AttackerProfile* profile = nullptr;   // attackers only
    std::multiset<std::string> data_signatures; // payload of DATA packets
    std::vector<Rng> streams;                   // one workload stream per client
};

struct SessRt {
    explicit SessRt(Rng route_rng) : route(std::move(route_rng)) {}

    Session session;
    std::size_t group = 0;
    std::uint32_t client = 0;
    std::uint32_t occurrence = 0;
    std::uint32_t attempt = 0;
    Rng route;                           // all next_hop picks for this session
    std::set<std::string> challenges;    // issued at the metadata layer
    PacketContents data_contents;        // what its DATA packets present
    std::int64_t emitted_data = 0;
};

SessionState arrival_state(LayerKind layer) {
    switch (layer) {
    case LayerKind::FW: return SessionState::AT_FW;
    case LayerKind::META: return SessionState::AT_META;
    case LayerKind::VAULT: return SessionState::AT_VAULT;
    case LayerKind::IPS: return SessionState::AT_IPS;
    case LayerKind::AM: return SessionState::AT_AM;
    default: throw StateError("no arrival state for this layer");
    }
}

class Engine {
public:
    Engine(const Scenario& sc, std::uint64_t seed, bool keep_log)
        : sc_(sc), seed_(seed), dbs_(sc.databases),
          collector_(sc.bucket_width, sc.sim_duration, keep_log) {}

    RunResult run();

    const Collector& collector() const { return collector_; }

private:
    void push(Ev ev) {
        ev.seq = next_seq_++;
        queue_.push(std::move(ev));
    }

    ServerArray& array_for(const std::string& vm_id) {
        const VmNode* node = sc_.topology.find_vm(vm_id);
        if (node == nullptr || node->server_array.empty()) {
            throw StateError("vm '" + vm_id + "' has no server array");
        }
        return arrays_.at(node->server_array);
    }

    void trace(TimeMs t, const std::string& sid, LayerKind layer, bool passed,
               const std::optional<DenyReason>& reason, const std::string& next_vm) {
        TraceEvent ev;
        ev.time = t;
        ev.session_id = sid;
        ev.layer = layer;
        ev.passed = passed;
        ev.reason = reason;
        ev.next_vm = next_vm;
        trace_lines_.push_back(format_trace_line(ev));
    }

    EngineEvent base_event(EngineEvent::Kind kind, TimeMs t, const SessRt& rt) {
        EngineEvent ev;
        ev.kind = kind;
        ev.time = t;
        ev.session_id = rt.session.id;
        ev.lan = groups_[rt.group].name;
        return ev;
    }

    PacketContents honest_contents(const GroupRt& g, const std::string& vm) const;

    void on_session_start(const Ev& ev);
    void on_packet_arrive(const Ev& ev);
    void on_service_done(const Ev& ev);
    void on_feed_update(const Ev& ev);

    void emit_data(const Ev& ev, SessRt& rt);
    void setup_verdict(const Ev& ev, SessRt& rt);
    void data_verdict(const Ev& ev, SessRt& rt);
    void discard_packet(const Ev& ev, SessRt& rt);

    const Scenario& sc_;
    std::uint64_t seed_;
    LayerDatabases dbs_; // live copy; feed updates swap signature snapshots
    Collector collector_;
    std::vector<std::string> trace_lines_;
    std::map<std::string, ServerArray> arrays_;
    std::vector<GroupRt> groups_;
    std::map<std::string, SessRt> sessions_;
    std::priority_queue<Ev, std::vector<Ev>, EvAfter> queue_;
    std::uint64_t next_seq_ = 0;
};

PacketContents Engine::honest_contents(const GroupRt& g, const std::string& vm) const {
    PacketContents c;
    c.vm_id = vm;
    c.tenant_id = g.tenant;
    c.encrypted = true;
    if (const TenantRecord* record = dbs_.meta.find(g.tenant)) {
        c.credentials = record->credentials;
        for (const auto& [name, answer] : record->challenge_bank) {
            c.challenge_answers.emplace(name, answer);
        }
    }
    if (auto it = dbs_.vault.grants.find({g.tenant, vm}); it != dbs_.vault.grants.end()) {
        c.key_claims = it->second;
    }
    return c;
}

void Engine::on_session_start(const Ev& ev) {
    GroupRt& g = groups_[ev.group];

    // The arrival process is independent of session outcomes: the next
    // occurrence is scheduled from the workload stream as soon as this one
    // starts. Retries (attempt > 0) never spawn occurrences.
    if (ev.attempt == 0 && g.repeat == Repeat::INTERARRIVAL) {
        Rng& stream = g.streams[ev.client];
        const TimeMs gap = std::max<TimeMs>(1, draw_start_time(g.inter, stream));
        const TimeMs next = ev.time + gap;
        if (next < sc_.sim_duration) {
            Ev occ;
            occ.time = next;
            occ.kind = EventKind::SESSION_START;
            occ.group = ev.group;
            occ.client = ev.client;
            occ.occurrence = ev.occurrence + 1;
            push(std::move(occ));
        }
    }

    const std::string& vm = g.client_vms[ev.client % g.client_vms.size()];
    std::string sid = g.name + ".c" + std::to_string(ev.client) + ".s" +
                      std::to_string(ev.occurrence) + ".a" + std::to_string(ev.attempt);

    PacketContents contents =
        g.profile != nullptr ? attacker_setup_contents(*g.profile, dbs_) : honest_contents(g, vm);

    SessRt rt(substream(seed_, "routing." + sid));
    rt.session = make_session(sc_.topology, sid, vm, std::move(contents));
    rt.group = ev.group;
    rt.client = ev.client;
    rt.occurrence = ev.occurrence;
    rt.attempt = ev.attempt;
    rt.session.packets_sent = 1; // the SETUP packet

    EngineEvent started = base_event(EngineEvent::Kind::SESSION_STARTED, ev.time, rt);
    started.source_vm = vm;
    collector_.record(started);
    EngineEvent injected = base_event(EngineEvent::Kind::PACKET_INJECTED, ev.time, rt);
    injected.bytes = g.psize;
    collector_.record(injected);

    const VmNode& fw = next_hop(vm, sc_.topology, rt.route);
    Ev arrive;
    arrive.time = ev.time + sc_.link_delay;
    arrive.kind = EventKind::PACKET_ARRIVE;
    arrive.session_id = sid;
    arrive.vm = fw.id;
    arrive.layer = LayerKind::FW;
    arrive.pkind = PacketKind::SETUP;
    push(std::move(arrive));

    sessions_.insert_or_assign(std::move(sid), std::move(rt));
}

void Engine::discard_packet(const Ev& ev, SessRt& rt) {
    // The session is already blocked; this in-flight packet is torn down
    // without inspection and attributed to the blocking layer and reason.
    const DenyInfo& deny = rt.session.deny_info.value();
    EngineEvent discarded = base_event(EngineEvent::Kind::PACKET_DISCARDED, ev.time, rt);
    discarded.layer = deny.layer;
    discarded.reason = deny.reason;
    discarded.bytes = groups_[rt.group].psize;
    collector_.record(discarded);
    rt.session.packets_dropped += 1;
}

void Engine::emit_data(const Ev& ev, SessRt& rt) {
    if (!rt.session.established()) {
        return; // blocked since the last emission; the chain just stops
    }
    GroupRt& g = groups_[rt.group];
    EngineEvent injected = base_event(EngineEvent::Kind::PACKET_INJECTED, ev.time, rt);
    injected.bytes = g.psize;
    collector_.record(injected);
    rt.session.packets_sent += 1;
    rt.emitted_data += 1;

    // client -> fw -> meta -> vault -> ips: four forwarding hops before the
    // first DATA inspection point.
    Ev arrive;
    arrive.time = ev.time + 4 * sc_.link_delay;
    arrive.kind = EventKind::PACKET_ARRIVE;
    arrive.session_id = ev.session_id;
    arrive.vm = rt.session.path.at(LayerKind::IPS);
    arrive.layer = LayerKind::IPS;
    arrive.pkind = PacketKind::DATA;
    arrive.packet_seq = ev.packet_seq;
    push(std::move(arrive));

    if (g.budget < 0 || rt.emitted_data < g.budget) {
        Ev next = ev;
        next.time = ev.time + g.interval;
        next.packet_seq = ev.packet_seq + 1;
        push(std::move(next));
    }
}

void Engine::on_packet_arrive(const Ev& ev) {
    SessRt& rt = sessions_.at(ev.session_id);

    if (ev.layer == LayerKind::CLIENT) {
        emit_data(ev, rt);
        return;
    }
    if (rt.session.terminal()) {
        discard_packet(ev, rt);
        return;
    }
    if (ev.layer == LayerKind::APPS) {
        EngineEvent delivered = base_event(EngineEvent::Kind::PACKET_DELIVERED, ev.time, rt);
        delivered.bytes = groups_[rt.group].psize;
        collector_.record(delivered);
        return;
    }

    if (ev.pkind == PacketKind::SETUP) {
        rt.session.transition(arrival_state(ev.layer));
    }
    Ev done = ev;
    done.kind = EventKind::SERVICE_DONE;
    done.time = array_for(ev.vm).enqueue_service(ev.time);
    push(std::move(done));
}

void Engine::setup_verdict(const Ev& ev, SessRt& rt) {
    GroupRt& g = groups_[rt.group];

    if (ev.layer == LayerKind::FW && !dbs_.fw.acl_allows(g.protocol)) {
        // Access-list drop: before any session inspection, no verdict, no
        // trace line. The session never progresses and never retries.
        EngineEvent drop = base_event(EngineEvent::Kind::ACL_DROP, ev.time, rt);
        drop.layer = LayerKind::FW;
        drop.bytes = g.psize;
        collector_.record(drop);
        rt.session.packets_dropped += 1;
        return;
    }

    if (ev.layer == LayerKind::META &&
        dbs_.meta.find(rt.session.contents.tenant_id) != nullptr) {
        Rng challenge_rng = substream(seed_, "challenges." + rt.session.id);
        rt.challenges =
            generate_challenges(dbs_.meta, rt.session.contents.tenant_id, challenge_rng);
    }

    const auto fail = layer_check(ev.layer, rt.session.contents, dbs_, rt.challenges);
    if (fail.has_value()) {
        trace(ev.time, rt.session.id, ev.layer, false, fail, "");
        rt.session.deny_info = DenyInfo{ev.layer, *fail};
        rt.session.transition(SessionState::DENIED);
        rt.session.packets_dropped += 1;
        EngineEvent drop = base_event(EngineEvent::Kind::LAYER_DROP, ev.time, rt);
        drop.layer = ev.layer;
        drop.phase = PacketKind::SETUP;
        drop.reason = *fail;
        drop.bytes = g.psize;
        collector_.record(drop);

        if (rt.attempt < g.retries) {
            const TimeMs when = ev.time + g.retry_delay;
            if (when < sc_.sim_duration) {
                Ev retry;
                retry.time = when;
                retry.kind = EventKind::SESSION_START;
                retry.group = rt.group;
                retry.client = rt.client;
                retry.occurrence = rt.occurrence;
                retry.attempt = rt.attempt + 1;
                push(std::move(retry));
            }
        }
        return;
    }

    rt.session.path[ev.layer] = ev.vm;
    const VmNode& next = next_hop(ev.vm, sc_.topology, rt.route);
    trace(ev.time, rt.session.id, ev.layer, true, std::nullopt, next.id);
    EngineEvent pass = base_event(EngineEvent::Kind::LAYER_PASS, ev.time, rt);
    pass.layer = ev.layer;
    pass.phase = PacketKind::SETUP;
    collector_.record(pass);

    if (ev.layer == LayerKind::AM) {
        rt.session.path[LayerKind::APPS] = next.id;
        rt.session.transition(SessionState::ESTABLISHED);
        collector_.record(base_event(EngineEvent::Kind::SESSION_ESTABLISHED, ev.time, rt));

        rt.data_contents = rt.session.contents;
        rt.data_contents.payload_signatures = g.data_signatures;

        Ev deliver;
        deliver.time = ev.time + sc_.link_delay;
        deliver.kind = EventKind::PACKET_ARRIVE;
        deliver.session_id = rt.session.id;
        deliver.vm = next.id;
        deliver.layer = LayerKind::APPS;
        deliver.pkind = PacketKind::SETUP;
        push(std::move(deliver));

        if (g.budget != 0) {
            Ev emit;
            emit.time = ev.time + g.interval;
            emit.kind = EventKind::PACKET_ARRIVE;
            emit.session_id = rt.session.id;
            emit.vm = rt.session.source_vm;
            emit.layer = LayerKind::CLIENT;
            emit.pkind = PacketKind::DATA;
            emit.packet_seq = 1;
            push(std::move(emit));
        }
        return;
    }

    Ev arrive;
    arrive.time = ev.time + sc_.link_delay;
    arrive.kind = EventKind::PACKET_ARRIVE;
    arrive.session_id = rt.session.id;
    arrive.vm = next.id;
    arrive.layer = next.layer;
    arrive.pkind = PacketKind::SETUP;
    push(std::move(arrive));
}

void Engine::data_verdict(const Ev& ev, SessRt& rt) {
    const auto fail = layer_check(ev.layer, rt.data_contents, dbs_, {});
    if (fail.has_value()) {
        trace(ev.time, rt.session.id, ev.layer, false, fail, "");
        rt.session.deny_info = DenyInfo{ev.layer, *fail};
        rt.session.transition(SessionState::DENIED);
        rt.session.packets_dropped += 1;
        EngineEvent drop = base_event(EngineEvent::Kind::LAYER_DROP, ev.time, rt);
        drop.layer = ev.layer;
        drop.phase = PacketKind::DATA;
        drop.reason = *fail;
        drop.bytes = groups_[rt.group].psize;
        collector_.record(drop);
        return;
    }

    const bool at_ips = ev.layer == LayerKind::IPS;
    const std::string& next_vm =
        rt.session.path.at(at_ips ? LayerKind::AM : LayerKind::APPS);
    trace(ev.time, rt.session.id, ev.layer, true, std::nullopt, next_vm);
    EngineEvent pass = base_event(EngineEvent::Kind::LAYER_PASS, ev.time, rt);
    pass.layer = ev.layer;
    pass.phase = PacketKind::DATA;
    collector_.record(pass);

    Ev arrive = ev;
    arrive.kind = EventKind::PACKET_ARRIVE;
    arrive.time = ev.time + sc_.link_delay;
    arrive.vm = next_vm;
    arrive.layer = at_ips ? LayerKind::AM : LayerKind::APPS;
    push(std::move(arrive));
}

void Engine::on_service_done(const Ev& ev) {
    SessRt& rt = sessions_.at(ev.session_id);
    if (rt.session.terminal()) {
        // blocked while this packet sat in the service queue
        discard_packet(ev, rt);
        return;
    }
    if (ev.pkind == PacketKind::SETUP) {
        setup_verdict(ev, rt);
    } else {
        data_verdict(ev, rt);
    }
}

void Engine::on_feed_update(const Ev& ev) {
    const FeedUpdate& feed = sc_.feed_updates[ev.feed_index];
    SignatureDb& db = feed.layer == SignatureKind::EXPLOIT ? dbs_.ips : dbs_.antimal;
    db = apply_signature_feed(db, feed.signatures);
}

RunResult Engine::run() {
    // Arrays come up bound to the layer of the VMs that use them; an array no
    // VM references never services a packet and is skipped.
    for (const auto& [id, cfg] : sc_.arrays) {
        std::optional<LayerKind> layer;
        for (const auto& [vm_id, node] : sc_.topology.vms) {
            (void)vm_id;
            if (node.server_array == id) {
                layer = node.layer;
                break;
            }
        }
        if (layer.has_value()) {
            arrays_.emplace(id, ServerArray(id, cfg.servers, sc_.service_time(*layer)));
        }
    }

    for (const Workload& wl : sc_.workloads) {
        GroupRt g;
        g.name = wl.name;
        g.tenant = wl.tenant_id;
        g.client_vms = wl.vm_profiles;
        g.clients = wl.client_count;
        g.start = wl.start_time;
        g.repeat = wl.repeatability;
        g.inter = wl.interarrival;
        g.budget = wl.data_packets_per_session;
        g.interval = wl.data_interval;
        g.psize = wl.packet_size_bytes;
        g.protocol = wl.protocol;
        g.retries = wl.retries;
        g.retry_delay = wl.retry_delay;
        groups_.push_back(std::move(g));
    }
    for (const AttackerEntry& entry : sc_.attackers) {
        GroupRt g;
        g.name = entry.profile.name;
        g.tenant = entry.profile.tenant_id;
        g.client_vms = {entry.profile.vm_id};
        g.clients = entry.plan.sessions;
        g.start = entry.plan.start_time;
        g.repeat = Repeat::ONCE;
        g.budget = entry.plan.data_packets;
        g.interval = entry.plan.data_interval;
        g.psize = entry.plan.packet_size_bytes;
        g.protocol = entry.protocol;
        g.retries = entry.retries;
        g.retry_delay = entry.retry_delay;
        g.profile = &entry.profile;
        g.data_signatures = attacker_data_signatures(entry.profile);
        groups_.push_back(std::move(g));
    }

    for (std::size_t i = 0; i < groups_.size(); ++i) {
        GroupRt& g = groups_[i];
        collector_.declare_lan(g.name);
        g.streams.reserve(g.clients);
        for (std::uint32_t c = 0; c < g.clients; ++c) {
            g.streams.push_back(
                substream(seed_, "workload." + g.name + ".c" + std::to_string(c)));
            Ev start;
            start.time = draw_start_time(g.start, g.streams.back());
            start.kind = EventKind::SESSION_START;
            start.group = i;
            start.client = c;
            push(std::move(start));
        }
    }

    for (std::size_t i = 0; i < sc_.feed_updates.size(); ++i) {
        Ev feed;
        feed.time = sc_.feed_updates[i].time;
        feed.kind = EventKind::FEED_UPDATE;
        feed.feed_index = i;
        push(std::move(feed));
    }

    Ev end;
    end.time = sc_.sim_duration;
    end.kind = EventKind::SIM_END;
    push(std::move(end));

    // The run covers [0, duration): anything scheduled at or after the end
    // stays in flight.
    while (!queue_.empty()) {
        const Ev ev = queue_.top();
        if (ev.time >= sc_.sim_duration) {
            break;
        }
        queue_.pop();
        switch (ev.kind) {
        case EventKind::FEED_UPDATE: on_feed_update(ev); break;
        case EventKind::SESSION_START: on_session_start(ev); break;
        case EventKind::PACKET_ARRIVE: on_packet_arrive(ev); break;
        case EventKind::SERVICE_DONE: on_service_done(ev); break;
        case EventKind::SIM_END: break;
        }
    }

    Scenario effective = sc_;
    effective.seed = seed_;
    char digest[19];
    std::snprintf(digest, sizeof(digest), "0x%016" PRIx64,
                  fnv1a64(serialize_scenario(effective)));

    ConfigEcho echo;
    echo.scenario_digest = digest;
    echo.seed = seed_;
    echo.duration = sc_.sim_duration;
    echo.bucket_width = sc_.bucket_width;
    echo.link_delay = sc_.link_delay;
    for (const GroupRt& g : groups_) {
        echo.packet_size_bytes[g.name] = g.psize;
    }

    RunResult result;
    result.report = collector_.finalize(std::move(echo));
    result.trace_lines = std::move(trace_lines_);
    return result;
}

} // namespace

RunResult run_scenario(const Scenario& scenario, std::optional<std::uint64_t> seed_override,
                       bool keep_event_log) {
    return run_scenario(scenario, seed_override, keep_event_log, nullptr);
}

RunResult run_scenario(const Scenario& scenario, std::optional<std::uint64_t> seed_override,
                       bool keep_event_log, std::vector<EngineEvent>* event_log_out) {
    Engine engine(scenario, seed_override.value_or(scenario.seed), keep_event_log);
    RunResult result = engine.run();
    if (event_log_out != nullptr) {
        *event_log_out = engine.collector().log();
    }
    return result;
}

} // namespace layersim
