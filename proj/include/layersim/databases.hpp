#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "layersim/rng.hpp"
#include "layersim/session.hpp"

namespace layersim {

// One protocol rule. Rules are evaluated first-match-wins; anything not
// listed is denied. ACL drops happen before the verdict pipeline and are
// reported separately, they never appear as a session deny reason.
struct AclRule {
    std::string protocol;
    bool allow = false;
    bool operator==(const AclRule&) const = default;
};

struct FirewallDb {
    std::set<std::string> registered_vm_ids;
    std::vector<AclRule> acl;
    bool operator==(const FirewallDb&) const = default;

    bool acl_allows(std::string_view protocol) const;
};

struct TenantRecord {
    std::set<std::pair<std::string, std::string>> credentials;
    std::map<std::string, std::string> challenge_bank; // name -> expected answer
    std::set<std::string> authorized_apps;
    std::set<std::string> authorized_db_objects;
    bool operator==(const TenantRecord&) const = default;
};

// Tenant metadata, keyed by tenant id. Every record carries at least three
// challenge entries so a three-question subset can always be issued.
struct MetadataRegistry {
    std::map<std::string, TenantRecord> records;
    bool operator==(const MetadataRegistry&) const = default;

    const TenantRecord* find(const std::string& tenant_id) const;
};

// Key grants per (tenant, vm) pair plus the object sets each key unlocks.
struct VaultDb {
    std::map<std::pair<std::string, std::string>, std::set<std::string>> grants;
    std::map<std::string, std::set<std::string>> keys;
    bool operator==(const VaultDb&) const = default;
};

enum class SignatureKind { EXPLOIT, MALWARE };

// Immutable snapshot of one signature database. Feeds produce a fresh
// snapshot; nothing mutates in place.
struct SignatureDb {
    SignatureKind kind = SignatureKind::EXPLOIT;
    std::set<std::string> signatures;
    std::uint64_t version = 0;
    bool operator==(const SignatureDb&) const = default;
};

struct LayerDatabases {
    FirewallDb fw;
    MetadataRegistry meta;
    VaultDb vault;
    SignatureDb ips{SignatureKind::EXPLOIT, {}, 0};
    SignatureDb antimal{SignatureKind::MALWARE, {}, 0};
    bool operator==(const LayerDatabases&) const = default;
};

// --- layer predicates -------------------------------------------------------
//
// All predicates are pure: same inputs, same answer, no mutation. Inputs are
// expected in canonical token form (see canonical_token).

// True iff the presented vm_id is a registered subscriber VM.
bool fw_match(const PacketContents& contents, const FirewallDb& db);

// True iff a record exists for contents.tenant_id, the record's credential
// set is fully contained in the presented credentials, and every issued
// challenge is answered exactly. Any miss, including an issued challenge the
// session did not answer, fails the whole predicate.
bool meta_match(const PacketContents& contents, const MetadataRegistry& db,
                const std::set<std::string>& issued_challenges);

// Keys granted to (tenant_id, vm_id) intersected with the session's claims.
// No grant, or a disjoint claim set, yields the empty set; the vault layer
// permits iff the result is non-empty.
std::set<std::string> vault_lookup(const PacketContents& contents, const VaultDb& db);

// Smallest matching signature in canonical (lexicographic) order, or nothing.
// db.kind must be EXPLOIT.
std::optional<std::string> ips_scan(const PacketContents& contents, const SignatureDb& db);

// Same contract against the malware database; db.kind must be MALWARE.
std::optional<std::string> antimalware_scan(const PacketContents& contents,
                                            const SignatureDb& db);

// New snapshot holding db.signatures ∪ feed with version bumped by one.
// Re-applying the same feed changes nothing but the version.
SignatureDb apply_signature_feed(const SignatureDb& db, const std::set<std::string>& feed);

// Draws the three challenge names issued to one session from the tenant's
// bank. Throws LookupError when the tenant is unknown. Deterministic for a
// given rng state; a fresh session draws a fresh subset.
std::set<std::string> generate_challenges(const MetadataRegistry& db,
                                          const std::string& tenant_id, Rng& rng);

inline constexpr std::size_t kChallengesPerSession = 3;

} // namespace layersim
