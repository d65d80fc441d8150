#pragma once

#include "invivo/feature_model.hpp"

#include <cstddef>
#include <cstdint>
#include <string>

namespace invivo {

/// Shape of a generated preference-style model: a root, a few category
/// features, and preference features whose values are primitive alternatives.
struct SyntheticModelSpec {
    std::string name = "Synthetic";
    std::size_t primitives = 461;
    std::size_t compounds = 106;  ///< including the root and the categories
    std::size_t categories = 4;
    std::size_t constraints = 4;
    double multi_select_share = 0.1;  ///< preferences decomposed as Or instead of Xor
    double optional_share = 0.1;      ///< preferences that are optional in their category
    std::uint64_t seed = 1;
};

/// Deterministic for a fixed spec. Constraints are implications between
/// values of different preferences, so the model is always satisfiable.
FeatureModel make_synthetic_model(const SyntheticModelSpec& spec);

}  // namespace invivo
