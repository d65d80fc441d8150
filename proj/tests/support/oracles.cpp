#include "oracles.hpp"

#include <algorithm>
#include <functional>
#include <map>

namespace oracle {

using invivo::ChildGroup;
using invivo::CrossTreeConstraint;
using invivo::Feature;
using invivo::FeatureKind;
using invivo::FeatureModel;
using invivo::GroupKind;
using invivo::Optionality;

bool is_valid(const FeatureModel& model, const Selection& selection) {
    std::map<std::string, std::string> parent;
    for (const Feature& f : model.features()) {
        for (const ChildGroup& g : f.groups) {
            for (const auto& m : g.members) {
                parent[m.id] = f.id;
            }
        }
    }
    if (!selection.count(model.root())) {
        return false;
    }
    for (const std::string& id : selection) {
        if (!model.find(id)) {
            return false;
        }
        auto p = parent.find(id);
        if (p != parent.end() && !selection.count(p->second)) {
            return false;
        }
    }
    for (const Feature& f : model.features()) {
        if (!selection.count(f.id)) {
            continue;
        }
        for (const ChildGroup& g : f.groups) {
            std::size_t on = 0;
            bool mandatory_missing = false;
            for (const auto& m : g.members) {
                const bool sel = selection.count(m.id) > 0;
                on += sel ? 1 : 0;
                if (!sel && m.optionality == Optionality::Mandatory) {
                    mandatory_missing = true;
                }
            }
            if (g.kind == GroupKind::And && mandatory_missing) {
                return false;
            }
            if (g.kind == GroupKind::Or && on == 0) {
                return false;
            }
            if (g.kind == GroupKind::Xor && on != 1) {
                return false;
            }
        }
    }
    for (const CrossTreeConstraint& c : model.constraints()) {
        bool sat = false;
        for (const auto& lit : c.literals) {
            sat = sat || (selection.count(lit.feature) > 0) == lit.positive;
        }
        if (!sat) {
            return false;
        }
    }
    return true;
}

std::vector<Selection> enumerate_valid(const FeatureModel& model) {
    // Declaration order with parents before children.
    std::vector<std::string> order;
    std::map<std::string, std::string> parent;
    std::function<void(const std::string&)> visit = [&](const std::string& id) {
        order.push_back(id);
        for (const ChildGroup& g : model.find(id)->groups) {
            for (const auto& m : g.members) {
                parent[m.id] = id;
                visit(m.id);
            }
        }
    };
    visit(model.root());

    std::vector<Selection> out;
    Selection current{model.root()};
    std::function<void(std::size_t)> walk = [&](std::size_t k) {
        if (k == order.size()) {
            if (is_valid(model, current)) {
                out.push_back(current);
            }
            return;
        }
        walk(k + 1);
        if (current.count(parent.at(order[k]))) {
            current.insert(order[k]);
            walk(k + 1);
            current.erase(order[k]);
        }
    };
    walk(1);
    return out;
}

std::uint64_t count_valid(const FeatureModel& model) { return enumerate_valid(model).size(); }

FeatureModel random_model(std::mt19937_64& rng, const RandomModelOptions& options) {
    auto below = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
    const std::size_t n = 1 + below(options.max_features);

    std::vector<Feature> features;
    features.push_back(Feature{options.root, "", FeatureKind::Primitive, {}});
    std::vector<std::vector<std::size_t>> children(1);
    for (std::size_t i = 1; i < n; ++i) {
        const std::size_t p = below(i);
        children[p].push_back(i);
        children.emplace_back();
        features.push_back(Feature{features[p].id + "." + "f" + std::to_string(i), "", FeatureKind::Primitive, {}});
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto& kids = children[i];
        if (kids.empty()) {
            continue;
        }
        features[i].kind = FeatureKind::Compound;
        // Split the children into one or two groups.
        std::size_t split = kids.size() > 2 && below(3) == 0 ? 1 + below(kids.size() - 1) : kids.size();
        for (auto [lo, hi] : {std::pair{std::size_t{0}, split}, std::pair{split, kids.size()}}) {
            if (lo == hi) {
                continue;
            }
            ChildGroup g;
            const std::size_t roll = below(3);
            g.kind = hi - lo < 2 || roll == 0 ? GroupKind::And : (roll == 1 ? GroupKind::Or : GroupKind::Xor);
            for (std::size_t k = lo; k < hi; ++k) {
                const bool optional = g.kind == GroupKind::And && below(2) == 0;
                g.members.push_back({features[kids[k]].id, optional ? Optionality::Optional : Optionality::Mandatory});
            }
            features[i].groups.push_back(std::move(g));
        }
    }
    std::vector<CrossTreeConstraint> constraints;
    if (n > 1) {
        const std::size_t k = below(options.max_constraints + 1);
        for (std::size_t c = 0; c < k; ++c) {
            CrossTreeConstraint clause;
            const std::size_t width = 1 + below(3);
            for (std::size_t l = 0; l < width; ++l) {
                clause.literals.push_back({features[1 + below(n - 1)].id, below(2) == 0});
            }
            constraints.push_back(std::move(clause));
        }
    }
    return FeatureModel("Random", 1, options.root, std::move(features), std::move(constraints));
}

std::vector<std::uint8_t> NaiveStore::snapshot(const FeatureModel& model) const {
    std::vector<std::uint8_t> out;
    auto varint = [&out](std::uint64_t v) {
        while (v >= 0x80) {
            out.push_back(static_cast<std::uint8_t>(v | 0x80));
            v >>= 7;
        }
        out.push_back(static_cast<std::uint8_t>(v));
    };
    for (const auto& entry : entries_) {
        varint(entry.size());
        std::vector<std::uint32_t> indices;
        for (const auto& id : entry) {
            indices.push_back(*model.index_of(id));
        }
        std::sort(indices.begin(), indices.end());
        for (auto i : indices) {
            varint(i);
        }
    }
    return out;
}

}  // namespace oracle
