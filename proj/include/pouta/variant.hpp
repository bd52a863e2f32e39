#pragma once

#include <string>

namespace pouta {

// Graph variants: the reconstruction-error baseline and the feature-reuse
// ablation lattice base <= base+hsg / base+mss <= full.
enum class Variant { vanilla, base, base_hsg, base_mss, full };

std::string to_string(Variant variant);
Variant parse_variant(const std::string& tag);

constexpr bool uses_guidance(Variant v) { return v == Variant::base_hsg || v == Variant::full; }
constexpr bool uses_supervision(Variant v) { return v == Variant::base_mss || v == Variant::full; }

}  // namespace pouta
