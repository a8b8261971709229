#include "layersim/layers.hpp"

namespace layersim {

namespace {

constexpr std::string_view kLayerNames[] = {
    "CLIENT", "FW", "META", "VAULT", "IPS", "AM", "APPS", "DB",
};

constexpr std::string_view kDenyNames[] = {
    "MISSING_VM_ID", "METADATA_MISMATCH", "NO_VAULT_GRANT", "EXPLOIT_HIT", "MALWARE_HIT",
};

} // namespace

std::string_view layer_name(LayerKind layer) {
    return kLayerNames[static_cast<int>(layer)];
}

std::optional<LayerKind> layer_from_name(std::string_view name) {
    for (LayerKind layer : kLayerOrder) {
        if (layer_name(layer) == name) {
            return layer;
        }
    }
    return std::nullopt;
}

std::optional<LayerKind> layer_successor(LayerKind layer) {
    if (layer == LayerKind::DB) {
        return std::nullopt;
    }
    return static_cast<LayerKind>(static_cast<int>(layer) + 1);
}

std::string_view deny_code_name(DenyCode code) {
    return kDenyNames[static_cast<int>(code)];
}

std::optional<DenyCode> deny_code_from_name(std::string_view name) {
    for (int i = 0; i < 5; ++i) {
        if (kDenyNames[i] == name) {
            return static_cast<DenyCode>(i);
        }
    }
    return std::nullopt;
}

std::string deny_reason_label(const DenyReason& reason) {
    std::string label(deny_code_name(reason.code));
    if (!reason.signature.empty()) {
        label += ':';
        label += reason.signature;
    }
    return label;
}

} // namespace layersim
