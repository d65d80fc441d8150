#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace invivo {

/// Path-qualified, case-sensitive feature name, e.g. `DeviceConfig.OS.N`.
using FeatureId = std::string;

enum class FeatureKind { Compound, Primitive };
enum class GroupKind { And, Or, Xor };
enum class Optionality { Mandatory, Optional };

struct GroupMember {
    FeatureId id;
    Optionality optionality = Optionality::Mandatory;

    bool operator==(const GroupMember&) const = default;
};

struct ChildGroup {
    GroupKind kind = GroupKind::And;
    std::vector<GroupMember> members;

    bool operator==(const ChildGroup&) const = default;
};

struct Feature {
    FeatureId id;
    std::string name;  ///< display name; defaults to the last path segment
    FeatureKind kind = FeatureKind::Primitive;
    std::vector<ChildGroup> groups;  ///< empty iff kind == Primitive

    bool operator==(const Feature&) const = default;
};

struct Literal {
    FeatureId feature;
    bool positive = true;

    bool operator==(const Literal&) const = default;
};

/// A disjunction of literals. `a => b` is stored as `!a | b`.
struct CrossTreeConstraint {
    std::vector<Literal> literals;

    bool operator==(const CrossTreeConstraint&) const = default;
};

class ModelError : public std::runtime_error {
public:
    enum class Kind {
        Syntax,
        DuplicateFeature,
        DanglingReference,
        Cycle,
        Structure,
        Collision,
    };

    ModelError(Kind kind, std::string message, std::size_t line = 0, std::size_t column = 0);

    Kind kind() const noexcept { return kind_; }
    /// 1-based; 0 when the error is not tied to a document position.
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    Kind kind_;
    std::size_t line_;
    std::size_t column_;
};

const char* to_string(ModelError::Kind kind);
const char* to_string(GroupKind kind);

/// Dense index of a feature in the model's canonical preorder.
using FeatureIndex = std::uint32_t;
inline constexpr FeatureIndex kNoFeature = static_cast<FeatureIndex>(-1);

/// Index-based view of a child group, used by the counting, validation and
/// storage algorithms.
struct IndexedGroup {
    GroupKind kind = GroupKind::And;
    std::vector<FeatureIndex> members;
    std::vector<bool> optional;  ///< parallel to `members`; always false for Or/Xor

    bool has_choice() const;
};

struct IndexedLiteral {
    FeatureIndex feature = kNoFeature;
    bool positive = true;
};

/// Immutable feature tree with cross-tree constraints.
///
/// Features are stored in canonical preorder: the root first, then each
/// group's members in declaration order, depth first. Every algorithm in the
/// library (canonical configurations, trie levels, wire encodings) uses this
/// order, so it is fixed at construction time.
class FeatureModel {
public:
    /// Validates every structural invariant and throws ModelError on failure.
    FeatureModel(std::string name, std::uint64_t version, FeatureId root,
                 std::vector<Feature> features,
                 std::vector<CrossTreeConstraint> constraints);

    const std::string& name() const noexcept { return name_; }
    std::uint64_t version() const noexcept { return version_; }
    const FeatureId& root() const noexcept { return features_.front().id; }

    std::size_t size() const noexcept { return features_.size(); }
    std::size_t primitive_count() const noexcept;
    std::size_t compound_count() const noexcept { return size() - primitive_count(); }

    /// Features in canonical preorder.
    const std::vector<Feature>& features() const noexcept { return features_; }
    const std::vector<CrossTreeConstraint>& constraints() const noexcept { return constraints_; }

    std::optional<FeatureIndex> index_of(std::string_view id) const;
    const Feature& feature(FeatureIndex index) const { return features_.at(index); }
    const Feature* find(std::string_view id) const;

    FeatureIndex parent(FeatureIndex index) const { return parent_.at(index); }
    const std::vector<IndexedGroup>& groups(FeatureIndex index) const { return groups_.at(index); }
    const std::vector<std::vector<IndexedLiteral>>& clauses() const noexcept { return clauses_; }
    bool is_primitive(FeatureIndex index) const { return features_[index].kind == FeatureKind::Primitive; }

    /// One past the last preorder index of the subtree rooted at `index`.
    FeatureIndex subtree_end(FeatureIndex index) const { return subtree_end_.at(index); }

    /// Stable 64-bit hash of the canonical document; binds stores to models.
    std::uint64_t fingerprint() const noexcept { return fingerprint_; }

    /// Copy with a different version and everything else unchanged.
    FeatureModel with_version(std::uint64_t version) const;

    bool operator==(const FeatureModel& other) const;

private:
    std::string name_;
    std::uint64_t version_;
    std::vector<Feature> features_;
    std::vector<CrossTreeConstraint> constraints_;
    std::unordered_map<std::string, FeatureIndex> index_;
    std::vector<FeatureIndex> parent_;
    std::vector<FeatureIndex> subtree_end_;
    std::vector<std::vector<IndexedGroup>> groups_;
    std::vector<std::vector<IndexedLiteral>> clauses_;
    std::uint64_t fingerprint_ = 0;
};

/// Parses the line-oriented model document:
///
///     model <name> v<version>
///     feature <path> {compound|primitive} [mandatory|optional]
///     group <parent-path> {and|or|xor} <child>, <child>, ...
///     constraint <literal> ('|' <literal>)*      literal := ['!'] path
///     constraint <literal> => <literal> ('|' <literal>)*
///
/// Blank lines and `#` comments are ignored.
FeatureModel parse_model(std::string_view text);

/// Renders a model back into the document grammar. parse_model(to_document(m)) == m.
std::string to_document(const FeatureModel& model);

/// Places two model parts under a single root as mandatory And-children.
///
/// A part whose root id equals `root_id` is treated as sharing the root: its
/// groups are attached directly to the merged root instead. Constraints are
/// concatenated and the result version is max(inputs) + 1.
FeatureModel merge_models(const FeatureModel& device_part, const FeatureModel& app_part,
                          const FeatureId& root_id);

/// Last dotted segment of a feature path.
std::string display_name(std::string_view id);

bool is_valid_path(std::string_view id);

}  // namespace invivo
