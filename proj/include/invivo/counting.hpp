#pragma once

#include "invivo/configuration.hpp"
#include "invivo/feature_model.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace invivo {

using BigCount = boost::multiprecision::cpp_int;

/// Exact number of valid configurations.
///
/// Without constraints this is a single bottom-up product/sum over the groups.
/// With constraints, the features mentioned by any clause are expanded
/// (Shannon expansion): every clause-satisfying assignment of those features
/// is counted with the tree rule under forced values, and the results summed.
/// Cost is O(2^k * n) for k constrained features.
BigCount count_configurations(const FeatureModel& model);

/// log10 of a positive count (-infinity for zero).
double log10_count(const BigCount& count);

class UnsatisfiableModel : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Uniform sampler over the valid configurations of a model.
///
/// Builds the constraint-assignment weights once; each draw first picks an
/// assignment proportionally to its count, then descends the tree choosing
/// group members proportionally to subtree counts.
class ConfigurationSampler {
public:
    explicit ConfigurationSampler(const FeatureModel& model);

    const BigCount& total() const noexcept { return total_; }

    CanonicalConfig sample(std::mt19937_64& rng) const;

private:
    struct Assignment {
        std::vector<bool> values;  // parallel to constrained_
        BigCount weight;
    };

    FeatureModel model_;
    std::vector<FeatureIndex> constrained_;
    std::vector<Assignment> assignments_;
    BigCount total_;
};

/// Deterministic for a fixed seed. Throws UnsatisfiableModel when count == 0.
Configuration sample_configuration(const FeatureModel& model, std::uint64_t seed);

/// Uniform integer in [0, bound) from raw 64-bit draws (rejection sampling).
BigCount uniform_below(const BigCount& bound, std::mt19937_64& rng);

}  // namespace invivo
