#include "invivo/protocol.hpp"

#include <array>
#include <stdexcept>

namespace invivo::protocol {

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

bool is_valid_device_id(std::string_view id) {
    if (id.empty() || id.size() > 64) {
        return false;
    }
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                        c == '_' || c == '-' || c == ':';
        if (!ok) {
            return false;
        }
    }
    return true;
}

Json encode_config(const FeatureModel& model, const CanonicalConfig& config) {
    Json out = Json::array();
    for (FeatureIndex i : frontier(model, config)) {
        out.push_back(i);
    }
    return out;
}

CanonicalConfig decode_config(const FeatureModel& model, const Json& wire) {
    if (!wire.is_array()) {
        throw std::invalid_argument("configuration must be an array of feature indices");
    }
    std::vector<FeatureIndex> indices;
    for (const auto& v : wire) {
        if (!v.is_number_unsigned() || v.get<std::uint64_t>() >= model.size()) {
            throw std::invalid_argument("feature index out of range");
        }
        indices.push_back(v.get<FeatureIndex>());
    }
    return close_indices(model, indices);
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < bytes.size(); i += 3) {
        const std::uint32_t b0 = bytes[i];
        const std::uint32_t b1 = i + 1 < bytes.size() ? bytes[i + 1] : 0;
        const std::uint32_t b2 = i + 2 < bytes.size() ? bytes[i + 2] : 0;
        const std::uint32_t triple = (b0 << 16) | (b1 << 8) | b2;
        out += kAlphabet[(triple >> 18) & 63];
        out += kAlphabet[(triple >> 12) & 63];
        out += i + 1 < bytes.size() ? kAlphabet[(triple >> 6) & 63] : '=';
        out += i + 2 < bytes.size() ? kAlphabet[triple & 63] : '=';
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    std::array<int, 256> value{};
    value.fill(-1);
    for (int i = 0; i < 64; ++i) {
        value[static_cast<unsigned char>(kAlphabet[i])] = i;
    }
    if (text.size() % 4 != 0) {
        throw std::invalid_argument("base64 length is not a multiple of 4");
    }
    std::vector<std::uint8_t> out;
    for (std::size_t i = 0; i < text.size(); i += 4) {
        const bool last = i + 4 == text.size();
        std::uint32_t triple = 0;
        int pad = 0;
        for (std::size_t k = 0; k < 4; ++k) {
            const char c = text[i + k];
            if (c == '=' && last && k >= 2) {
                ++pad;
                triple <<= 6;
                continue;
            }
            if (pad > 0 || value[static_cast<unsigned char>(c)] < 0) {
                throw std::invalid_argument("invalid base64 character");
            }
            triple = (triple << 6) | static_cast<std::uint32_t>(value[static_cast<unsigned char>(c)]);
        }
        out.push_back(static_cast<std::uint8_t>(triple >> 16));
        if (pad < 2) {
            out.push_back(static_cast<std::uint8_t>(triple >> 8));
        }
        if (pad < 1) {
            out.push_back(static_cast<std::uint8_t>(triple));
        }
    }
    return out;
}

bool carries_snapshot(const Json& message) {
    return message.is_object() && (message.contains("model") || message.contains("tested") ||
                                   message.contains("document"));
}

Json error_response(const char* code, const std::string& message) {
    return Json{{"protocol", kVersion}, {"status", "error"}, {"error", code}, {"message", message}};
}

}  // namespace invivo::protocol
