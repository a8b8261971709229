#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace layersim {

// Total order of the inspection chain. Sessions may only move toward APPS;
// a preference edge that does not target the immediate successor is a
// configuration error.
enum class LayerKind {
    CLIENT,
    FW,
    META,
    VAULT,
    IPS,
    AM,
    APPS,
    DB,
};

inline constexpr std::array<LayerKind, 8> kLayerOrder = {
    LayerKind::CLIENT, LayerKind::FW,  LayerKind::META, LayerKind::VAULT,
    LayerKind::IPS,    LayerKind::AM,  LayerKind::APPS, LayerKind::DB,
};

// The five layers that actually run a predicate on session material.
inline constexpr std::array<LayerKind, 5> kInspectionLayers = {
    LayerKind::FW, LayerKind::META, LayerKind::VAULT, LayerKind::IPS, LayerKind::AM,
};

std::string_view layer_name(LayerKind layer);
std::optional<LayerKind> layer_from_name(std::string_view name);

// Successor in the total order; DB is terminal.
std::optional<LayerKind> layer_successor(LayerKind layer);

constexpr int layer_index(LayerKind layer) { return static_cast<int>(layer); }

// Deny classification. One code per failing predicate; signature hits carry
// the matched signature alongside.
enum class DenyCode {
    MISSING_VM_ID,
    METADATA_MISMATCH,
    NO_VAULT_GRANT,
    EXPLOIT_HIT,
    MALWARE_HIT,
};

std::string_view deny_code_name(DenyCode code);
std::optional<DenyCode> deny_code_from_name(std::string_view name);

struct DenyReason {
    DenyCode code = DenyCode::MISSING_VM_ID;
    std::string signature; // non-empty only for EXPLOIT_HIT / MALWARE_HIT
    bool operator==(const DenyReason&) const = default;
};

// "CODE" or "CODE:signature"; the key used in per-reason histograms.
std::string deny_reason_label(const DenyReason& reason);

enum class Decision { PERMIT, DENY };

// Outcome of the full five-predicate evaluation. failed_layer and reason are
// set exactly when the decision is DENY, and name the first predicate that
// failed in chain order.
struct Verdict {
    Decision decision = Decision::DENY;
    std::optional<LayerKind> failed_layer;
    std::optional<DenyReason> reason;
    bool operator==(const Verdict&) const = default;
};

} // namespace layersim
