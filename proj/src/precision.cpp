#include "quantclaw/precision.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "quantclaw/errors.hpp"

namespace quantclaw {

namespace {

constexpr std::array<std::pair<PrecisionLevel, std::string_view>, 5> kNames{{
    {PrecisionLevel::BF16, "BF16"},
    {PrecisionLevel::FP8, "FP8"},
    {PrecisionLevel::INT8, "INT8"},
    {PrecisionLevel::INT4, "INT4"},
    {PrecisionLevel::NVFP4, "NVFP4"},
}};

std::string upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

}  // namespace

std::string_view to_string(PrecisionLevel level) {
    for (const auto& [lvl, name] : kNames) {
        if (lvl == level) return name;
    }
    return "?";
}

PrecisionLevel parse_precision(std::string_view name) {
    const std::string key = upper(name);
    for (const auto& [lvl, n] : kNames) {
        if (n == key) return lvl;
    }
    throw Error(ErrorKind::Validation, "unknown precision '" + std::string(name) + "'");
}

std::string tier_label(int bits) { return std::to_string(bits) + "-bit"; }

int parse_tier_label(std::string_view text) {
    std::string_view digits = text;
    if (digits.ends_with("-bit")) digits.remove_suffix(4);
    if (digits.empty() || digits.size() > 2) return 0;
    for (char c : digits) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return 0;
    }
    const int bits = std::stoi(std::string(digits));
    return (bits == 16 || bits == 8 || bits == 4) ? bits : 0;
}

}  // namespace quantclaw
