#pragma once

#include <string>
#include <string_view>

namespace quantclaw {

enum class PrecisionLevel { BF16, FP8, INT8, INT4, NVFP4 };

constexpr int bit_width(PrecisionLevel level) {
    switch (level) {
        case PrecisionLevel::BF16: return 16;
        case PrecisionLevel::FP8:
        case PrecisionLevel::INT8: return 8;
        case PrecisionLevel::INT4:
        case PrecisionLevel::NVFP4: return 4;
    }
    return 0;
}

/// True when `a` carries strictly more bits than `b`.
constexpr bool higher_precision(PrecisionLevel a, PrecisionLevel b) {
    return bit_width(a) > bit_width(b);
}

std::string_view to_string(PrecisionLevel level);

/// Accepts format names case-insensitively ("bf16", "NVFP4", ...).
/// Throws Error(Validation) for anything else.
PrecisionLevel parse_precision(std::string_view name);

/// "16-bit", "8-bit", "4-bit".
std::string tier_label(int bits);

/// Parses "16-bit" / "16" style labels; returns 0 when the text is not a tier label.
int parse_tier_label(std::string_view text);

}  // namespace quantclaw
