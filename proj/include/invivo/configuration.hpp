#pragma once

#include "invivo/feature_model.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace invivo {

/// A reported selection of feature values, as provided by a device or a file.
/// Names are kept sorted and unique, so two inputs listing the same features in
/// different orders compare equal.
class Configuration {
public:
    Configuration() = default;
    explicit Configuration(std::vector<FeatureId> selected);
    Configuration(std::initializer_list<FeatureId> selected)
        : Configuration(std::vector<FeatureId>(selected)) {}

    const std::vector<FeatureId>& selected() const noexcept { return selected_; }
    bool empty() const noexcept { return selected_.empty(); }

    bool operator==(const Configuration&) const = default;

private:
    std::vector<FeatureId> selected_;
};

/// One feature path per line; blank lines and `#` comments are skipped.
Configuration parse_configuration(std::string_view text);
std::string to_text(const Configuration& config);

/// Ancestor-closed selection (always containing the root) as ascending
/// preorder indices of one particular model.
struct CanonicalConfig {
    std::vector<FeatureIndex> features;

    bool operator==(const CanonicalConfig&) const = default;
    auto operator<=>(const CanonicalConfig&) const = default;
};

struct UnknownReason {
    enum class Kind { UnrecognizedFeature, ModelViolation };
    Kind kind = Kind::ModelViolation;
    std::string detail;

    bool operator==(const UnknownReason&) const = default;
};

const char* to_string(UnknownReason::Kind kind);

struct ValidationResult {
    /// Set when every name is known, even if the selection is invalid.
    std::optional<CanonicalConfig> canonical;
    std::optional<UnknownReason> unknown;

    bool valid() const noexcept { return !unknown.has_value(); }
};

/// Resolves names and closes the selection under ancestors. Compound features
/// may be named; they are simply part of the closure.
std::optional<CanonicalConfig> canonicalize(const FeatureModel& model, const Configuration& config,
                                            std::vector<FeatureId>* unrecognized = nullptr);

/// Checks group cardinalities, parent links and cross-tree clauses on an
/// arbitrary selection mask (one entry per preorder index). Returns a
/// description of the first violation, or nullopt when the selection is valid.
std::optional<std::string> find_violation(const FeatureModel& model, const std::vector<char>& selected);

ValidationResult validate_configuration(const FeatureModel& model, const Configuration& config);

/// Minimal description of a canonical selection: the selected features that
/// have no selected child. Its ancestor closure is the canonical form again.
std::vector<FeatureIndex> frontier(const FeatureModel& model, const CanonicalConfig& canonical);
Configuration to_configuration(const FeatureModel& model, const CanonicalConfig& canonical);
/// Closure of an index list (e.g. a frontier received on the wire).
CanonicalConfig close_indices(const FeatureModel& model, const std::vector<FeatureIndex>& indices);

enum class Verdict { Tested, Untested, Unknown };
const char* to_string(Verdict verdict);

struct Classification {
    Verdict verdict = Verdict::Unknown;
    std::optional<UnknownReason> reason;  ///< set iff verdict == Unknown
};

}  // namespace invivo
