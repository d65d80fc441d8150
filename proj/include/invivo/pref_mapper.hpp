#pragma once

#include "invivo/feature_model.hpp"

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace invivo {

enum class PreferenceKind {
    Checkbox,
    Switch,
    List,
    MultiSelectList,
    EditText,
    Numeric,
    Category,
    Screen,
    Generic,
    Custom,
};

const char* to_string(PreferenceKind kind);

struct PreferenceDecl {
    PreferenceKind kind = PreferenceKind::Generic;
    std::string element;  ///< element name as written, e.g. `com.example.ColorPicker`
    std::string key;      ///< empty when the document gives none
    std::string title;
    std::vector<std::string> entries;  ///< List / MultiSelectList only
    std::optional<std::string> default_value;
    std::vector<PreferenceDecl> children;  ///< Category / Screen only

    bool is_container() const { return kind == PreferenceKind::Category || kind == PreferenceKind::Screen; }
};

class PreferenceSchemaError : public std::runtime_error {
public:
    PreferenceSchemaError(const std::string& message, std::size_t line = 0)
        : std::runtime_error(message), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Parses a preference XML document into its declaration tree (one entry per
/// top-level element). Attributes are read with or without the `android:`
/// prefix. EditTextPreference with a numeric `inputType` and
/// SeekBarPreference are Numeric.
std::vector<PreferenceDecl> parse_preference_schema(std::string_view xml);

enum class MappingOutcome { Direct, Heuristic, Unsupported };
const char* to_string(MappingOutcome outcome);
std::optional<MappingOutcome> parse_mapping_outcome(std::string_view text);

struct MappingEntry {
    std::string key;
    MappingOutcome outcome = MappingOutcome::Unsupported;
    /// Feature id emitted for the preference, or the reason it was not mapped.
    std::string fragment;

    bool operator==(const MappingEntry&) const = default;
};

struct MappingReport {
    std::size_t direct = 0;
    std::size_t heuristic = 0;
    std::size_t unsupported = 0;
    std::vector<MappingEntry> entries;  ///< document order, leaf preferences only

    std::size_t total() const { return direct + heuristic + unsupported; }
    bool operator==(const MappingReport&) const = default;
};

struct MappingResult {
    FeatureModel model;
    MappingReport report;
    /// Model document with default values appended as `#` comments.
    std::string document;
};

/// Compiles the declarations into an app-part feature model rooted at `root`.
/// Every preference becomes `<root>.<key>` and every value
/// `<root>.<key>.<value>`; characters outside [A-Za-z0-9_-] become `_`.
MappingResult map_to_feature_model(const std::vector<PreferenceDecl>& schema, const std::string& root);

/// "70.0% / 20.0% / 10.0% (10 preferences)", or "no preferences found".
std::string report_summary(const MappingReport& report);
/// `key,outcome,fragment` with a header line.
std::string report_csv(const MappingReport& report);
std::string report_json(const MappingReport& report);
/// Inverse of report_json; throws std::invalid_argument on malformed input.
MappingReport parse_report_json(std::string_view text);

}  // namespace invivo
