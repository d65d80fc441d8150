#pragma once

#include "invivo/configuration.hpp"
#include "invivo/feature_model.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace invivo::protocol {

using Json = nlohmann::ordered_json;

inline constexpr int kVersion = 1;
/// Upper bound for every message that does not carry a model document or a
/// tested-set snapshot.
inline constexpr std::size_t kPayloadBound = 6144;

namespace path {
inline constexpr const char* kRegister = "/register";
inline constexpr const char* kCheck = "/config/check";
inline constexpr const char* kAssignment = "/assignment";
inline constexpr const char* kResult = "/result";
inline constexpr const char* kUnknown = "/unknown";
inline constexpr const char* kModel = "/model";
inline constexpr const char* kReport = "/report";
inline constexpr const char* kExVivo = "/exvivo";
}  // namespace path

/// Error codes carried in `{"status": "error", "error": <code>}` responses.
namespace error {
inline constexpr const char* kMalformed = "malformed_request";
inline constexpr const char* kProtocol = "unsupported_protocol";
inline constexpr const char* kBadDevice = "malformed_device_id";
inline constexpr const char* kUnregistered = "unregistered_device";
inline constexpr const char* kStaleModel = "stale_model";
inline constexpr const char* kUnknownConfig = "unknown_configuration";
inline constexpr const char* kNoLedgerEntry = "no_ledger_entry";
inline constexpr const char* kBadModel = "invalid_model";
inline constexpr const char* kVersionNotIncreasing = "version_not_increasing";
inline constexpr const char* kNotImplemented = "not_implemented";
inline constexpr const char* kNotFound = "not_found";
}  // namespace error

bool is_valid_device_id(std::string_view id);

/// Configurations travel as the preorder indices of their frontier under the
/// sender's model version.
Json encode_config(const FeatureModel& model, const CanonicalConfig& config);
/// Throws std::invalid_argument for non-array input or out-of-range indices.
CanonicalConfig decode_config(const FeatureModel& model, const Json& wire);

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws std::invalid_argument on characters outside the alphabet or bad padding.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// True when the message carries a full model document or tested snapshot,
/// which exempts it from kPayloadBound.
bool carries_snapshot(const Json& message);

Json error_response(const char* code, const std::string& message);

}  // namespace invivo::protocol
