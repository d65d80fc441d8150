#include "invivo/synthetic.hpp"

#include <random>
#include <stdexcept>
#include <vector>

namespace invivo {

FeatureModel make_synthetic_model(const SyntheticModelSpec& spec) {
    if (spec.compounds < spec.categories + 2) {
        throw std::invalid_argument("synthetic model needs at least one preference feature");
    }
    const std::size_t prefs = spec.compounds - 1 - spec.categories;
    if (spec.primitives < 2 * prefs) {
        throw std::invalid_argument("synthetic model needs at least two values per preference");
    }
    std::mt19937_64 rng(spec.seed);
    auto below = [&rng](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
    auto chance = [&rng](double p) { return static_cast<double>(rng() >> 11) * 0x1.0p-53 < p; };

    std::vector<std::size_t> values(prefs, 2);
    for (std::size_t extra = spec.primitives - 2 * prefs; extra > 0; --extra) {
        ++values[below(prefs)];
    }

    std::vector<Feature> features;
    Feature root{spec.name, "", FeatureKind::Compound, {}};
    std::vector<Feature> categories;
    std::vector<Feature> pref_features;
    std::vector<std::vector<FeatureId>> pref_values(prefs);
    ChildGroup top{GroupKind::And, {}};

    const std::size_t category_count = spec.categories == 0 ? 1 : spec.categories;
    std::vector<ChildGroup> category_groups(category_count, ChildGroup{GroupKind::And, {}});
    std::vector<FeatureId> category_ids;
    for (std::size_t c = 0; c < spec.categories; ++c) {
        category_ids.push_back(spec.name + ".c" + std::to_string(c));
    }

    for (std::size_t p = 0; p < prefs; ++p) {
        const std::size_t c = p % category_count;
        const FeatureId parent = spec.categories == 0 ? spec.name : category_ids[c];
        const FeatureId id = parent + ".p" + std::to_string(p);
        Feature pref{id, "", FeatureKind::Compound, {}};
        ChildGroup alternatives{chance(spec.multi_select_share) ? GroupKind::Or : GroupKind::Xor, {}};
        for (std::size_t v = 0; v < values[p]; ++v) {
            const FeatureId value = id + ".v" + std::to_string(v);
            alternatives.members.push_back({value, Optionality::Mandatory});
            pref_values[p].push_back(value);
            features.push_back(Feature{value, "", FeatureKind::Primitive, {}});
        }
        pref.groups.push_back(std::move(alternatives));
        pref_features.push_back(std::move(pref));
        category_groups[c].members.push_back(
            {id, chance(spec.optional_share) ? Optionality::Optional : Optionality::Mandatory});
    }

    if (spec.categories == 0) {
        root.groups.push_back(std::move(category_groups[0]));
    } else {
        for (std::size_t c = 0; c < spec.categories; ++c) {
            Feature category{category_ids[c], "", FeatureKind::Compound, {}};
            if (category_groups[c].members.empty()) {
                category.kind = FeatureKind::Primitive;
            } else {
                category.groups.push_back(std::move(category_groups[c]));
            }
            top.members.push_back({category_ids[c], Optionality::Mandatory});
            categories.push_back(std::move(category));
        }
        root.groups.push_back(std::move(top));
    }

    std::vector<CrossTreeConstraint> constraints;
    for (std::size_t k = 0; k < spec.constraints && prefs > 1; ++k) {
        const std::size_t a = below(prefs);
        std::size_t b = below(prefs - 1);
        if (b >= a) {
            ++b;
        }
        constraints.push_back(CrossTreeConstraint{{
            {pref_values[a][below(pref_values[a].size())], false},
            {pref_values[b][below(pref_values[b].size())], true},
        }});
    }

    features.insert(features.begin(), pref_features.begin(), pref_features.end());
    features.insert(features.begin(), categories.begin(), categories.end());
    features.insert(features.begin(), std::move(root));
    return FeatureModel(spec.name, 1, spec.name, std::move(features), std::move(constraints));
}

}  // namespace invivo
