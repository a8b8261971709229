#include "layersim/databases.hpp"

#include <algorithm>
#include <stdexcept>

#include "layersim/errors.hpp"

namespace layersim {

bool FirewallDb::acl_allows(std::string_view protocol) const {
    for (const AclRule& rule : acl) {
        if (rule.protocol == protocol) {
            return rule.allow;
        }
    }
    return false; // default deny
}

const TenantRecord* MetadataRegistry::find(const std::string& tenant_id) const {
    auto it = records.find(tenant_id);
    return it == records.end() ? nullptr : &it->second;
}

bool fw_match(const PacketContents& contents, const FirewallDb& db) {
    return db.registered_vm_ids.count(contents.vm_id) > 0;
}

bool meta_match(const PacketContents& contents, const MetadataRegistry& db,
                const std::set<std::string>& issued_challenges) {
    const TenantRecord* record = db.find(contents.tenant_id);
    if (record == nullptr) {
        return false;
    }
    // The record's credential set must be fully presented; extras are fine.
    if (!std::includes(contents.credentials.begin(), contents.credentials.end(),
                       record->credentials.begin(), record->credentials.end())) {
        return false;
    }
    for (const std::string& name : issued_challenges) {
        auto expected = record->challenge_bank.find(name);
        if (expected == record->challenge_bank.end()) {
            return false; // challenge outside the bank can never be answered
        }
        auto answer = contents.challenge_answers.find(name);
        if (answer == contents.challenge_answers.end() || answer->second != expected->second) {
            return false;
        }
    }
    return true;
}

std::set<std::string> vault_lookup(const PacketContents& contents, const VaultDb& db) {
    auto it = db.grants.find({contents.tenant_id, contents.vm_id});
    if (it == db.grants.end()) {
        return {};
    }
    std::set<std::string> usable;
    std::set_intersection(it->second.begin(), it->second.end(), contents.key_claims.begin(),
                          contents.key_claims.end(), std::inserter(usable, usable.begin()));
    return usable;
}

namespace {

std::optional<std::string> scan_payload(const PacketContents& contents, const SignatureDb& db) {
    // Both sets iterate in lexicographic order, so the first common element
    // is the canonical minimum.
    for (const std::string& sig : contents.payload_signatures) {
        if (db.signatures.count(sig) > 0) {
            return sig;
        }
    }
    return std::nullopt;
}

} // namespace

std::optional<std::string> ips_scan(const PacketContents& contents, const SignatureDb& db) {
    if (db.kind != SignatureKind::EXPLOIT) {
        throw std::logic_error("ips_scan needs the exploit signature db");
    }
    return scan_payload(contents, db);
}

std::optional<std::string> antimalware_scan(const PacketContents& contents,
                                            const SignatureDb& db) {
    if (db.kind != SignatureKind::MALWARE) {
        throw std::logic_error("antimalware_scan needs the malware signature db");
    }
    return scan_payload(contents, db);
}

SignatureDb apply_signature_feed(const SignatureDb& db, const std::set<std::string>& feed) {
    SignatureDb next = db;
    next.signatures.insert(feed.begin(), feed.end());
    next.version = db.version + 1;
    return next;
}

std::set<std::string> generate_challenges(const MetadataRegistry& db,
                                          const std::string& tenant_id, Rng& rng) {
    const TenantRecord* record = db.find(tenant_id);
    if (record == nullptr) {
        throw LookupError("no metadata record for tenant '" + tenant_id + "'");
    }
    std::vector<std::string> names;
    names.reserve(record->challenge_bank.size());
    for (const auto& [name, answer] : record->challenge_bank) {
        names.push_back(name);
    }
    if (names.size() < kChallengesPerSession) {
        throw LookupError("challenge bank for tenant '" + tenant_id + "' is too small");
    }
    // Partial Fisher-Yates over the sorted bank keys.
    std::set<std::string> issued;
    for (std::size_t i = 0; i < kChallengesPerSession; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(names.size() - i));
        std::swap(names[i], names[j]);
        issued.insert(names[i]);
    }
    return issued;
}

} // namespace layersim
