#pragma once

#include "invivo/configuration.hpp"
#include "invivo/feature_model.hpp"

#include <cstddef>
#include <cstdint>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace invivo {

class StoreError : public std::runtime_error {
public:
    enum class Kind { VersionMismatch, InvalidConfiguration, Corrupt, ChecksumMismatch };

    StoreError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// One level of the trie: the members chosen in one decision group
/// (positions within the group, ascending), or inactive when the group's
/// parent feature is not selected.
struct LevelKey {
    bool active = false;
    std::vector<std::uint32_t> chosen;

    bool operator==(const LevelKey&) const = default;
    auto operator<=>(const LevelKey&) const = default;
};

/// Set of globally tested configurations for one model version.
///
/// Configurations are stored as paths in a prefix tree whose levels are the
/// model's decision groups (Or, Xor, and And groups with optional members) in
/// canonical preorder. Device-level decisions come first in the preorder, so
/// configurations that share hardware and OS share a trie prefix.
///
/// Every operation takes the ambient model and fails closed with
/// StoreError::VersionMismatch when it is not the model the store was built
/// for. Readers may run concurrently; insert is exclusive.
class TestedConfigStore {
public:
    explicit TestedConfigStore(const FeatureModel& model);

    TestedConfigStore(const TestedConfigStore& other);
    TestedConfigStore& operator=(const TestedConfigStore& other);
    TestedConfigStore(TestedConfigStore&& other) noexcept;
    TestedConfigStore& operator=(TestedConfigStore&& other) noexcept;

    std::uint64_t model_version() const noexcept { return model_version_; }
    std::uint64_t model_fingerprint() const noexcept { return model_fingerprint_; }
    std::size_t size() const;
    std::size_t node_count() const;

    /// Throws StoreError::VersionMismatch unless `model` is the bound model.
    void require_binding(const FeatureModel& model) const;
    bool is_bound_to(const FeatureModel& model) const noexcept;

    /// Returns true when the configuration was not present before.
    /// Throws InvalidConfiguration for configurations the model rejects.
    bool insert(const FeatureModel& model, const Configuration& config);
    bool insert(const FeatureModel& model, const CanonicalConfig& config);

    bool contains(const FeatureModel& model, const Configuration& config) const;
    bool contains(const FeatureModel& model, const CanonicalConfig& config) const;

    /// All stored configurations, in trie order.
    std::vector<CanonicalConfig> entries(const FeatureModel& model) const;

    /// Binary snapshot; deterministic for equal contents. See docs in the .cpp
    /// for the byte layout.
    std::vector<std::uint8_t> snapshot() const;
    static TestedConfigStore restore(std::span<const std::uint8_t> bytes, const FeatureModel& model);

    /// One configuration per line (frontier paths joined by ", "), sorted.
    std::string dump(const FeatureModel& model) const;

    /// Re-validates every entry of `old_store` against `new_model` and keeps the
    /// ones that are still valid there.
    static TestedConfigStore migrate(const TestedConfigStore& old_store, const FeatureModel& old_model,
                                     const FeatureModel& new_model);

    static constexpr std::uint16_t kFormatVersion = 1;
    static constexpr std::size_t kHeaderSize = 44;

private:
    struct Level {
        FeatureIndex parent;
        std::size_t group;
    };
    struct Node {
        std::vector<std::pair<LevelKey, std::uint32_t>> children;  // sorted by key
        bool terminal = false;
    };

    std::vector<LevelKey> encode(const FeatureModel& model, const CanonicalConfig& config) const;
    CanonicalConfig decode(const FeatureModel& model, const std::vector<LevelKey>& path) const;
    bool contains_path(const std::vector<LevelKey>& path) const;

    std::uint64_t model_version_;
    std::uint64_t model_fingerprint_;
    std::vector<Level> levels_;
    std::vector<Node> nodes_;
    std::size_t size_ = 0;
    mutable std::shared_mutex mutex_;
};

/// Tested iff valid and stored; Untested iff valid and not stored; Unknown otherwise.
/// Throws StoreError when the store is bound to a different model.
Classification classify(const FeatureModel& model, const TestedConfigStore& store, const Configuration& config);

}  // namespace invivo
