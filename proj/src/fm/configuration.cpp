#include "invivo/configuration.hpp"

#include <algorithm>

namespace invivo {

Configuration::Configuration(std::vector<FeatureId> selected) : selected_(std::move(selected)) {
    std::sort(selected_.begin(), selected_.end());
    selected_.erase(std::unique(selected_.begin(), selected_.end()), selected_.end());
}

Configuration parse_configuration(std::string_view text) {
    std::vector<FeatureId> names;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            nl = text.size();
        }
        std::string_view line = text.substr(start, nl - start);
        start = nl + 1;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string_view::npos) {
            continue;
        }
        const auto last = line.find_last_not_of(" \t\r");
        names.emplace_back(line.substr(first, last - first + 1));
    }
    return Configuration(std::move(names));
}

std::string to_text(const Configuration& config) {
    std::string out;
    for (const auto& name : config.selected()) {
        out += name;
        out += '\n';
    }
    return out;
}

const char* to_string(UnknownReason::Kind kind) {
    return kind == UnknownReason::Kind::UnrecognizedFeature ? "unrecognized feature" : "model violation";
}

const char* to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::Tested: return "tested";
        case Verdict::Untested: return "untested";
        case Verdict::Unknown: return "unknown";
    }
    return "unknown";
}

namespace {

CanonicalConfig close_mask(const FeatureModel& model, std::vector<char>& mask) {
    mask[0] = 1;
    CanonicalConfig canonical;
    // Children follow parents in preorder, so walking backwards propagates upward.
    for (FeatureIndex i = static_cast<FeatureIndex>(model.size()); i-- > 1;) {
        if (mask[i]) {
            mask[model.parent(i)] = 1;
        }
    }
    for (FeatureIndex i = 0; i < model.size(); ++i) {
        if (mask[i]) {
            canonical.features.push_back(i);
        }
    }
    return canonical;
}

}  // namespace

std::optional<CanonicalConfig> canonicalize(const FeatureModel& model, const Configuration& config,
                                            std::vector<FeatureId>* unrecognized) {
    std::vector<char> mask(model.size(), 0);
    bool ok = true;
    for (const auto& name : config.selected()) {
        if (const auto idx = model.index_of(name)) {
            mask[*idx] = 1;
        } else {
            ok = false;
            if (unrecognized) {
                unrecognized->push_back(name);
            }
        }
    }
    if (!ok) {
        return std::nullopt;
    }
    return close_mask(model, mask);
}

CanonicalConfig close_indices(const FeatureModel& model, const std::vector<FeatureIndex>& indices) {
    std::vector<char> mask(model.size(), 0);
    for (FeatureIndex i : indices) {
        mask.at(i) = 1;
    }
    return close_mask(model, mask);
}

std::optional<std::string> find_violation(const FeatureModel& model, const std::vector<char>& selected) {
    if (!selected[0]) {
        return "root '" + model.root() + "' is not selected";
    }
    for (FeatureIndex i = 1; i < model.size(); ++i) {
        if (selected[i] && !selected[model.parent(i)]) {
            return "'" + model.feature(i).id + "' is selected but its parent '" +
                   model.feature(model.parent(i)).id + "' is not";
        }
    }
    for (FeatureIndex i = 0; i < model.size(); ++i) {
        if (!selected[i]) {
            continue;
        }
        for (const IndexedGroup& g : model.groups(i)) {
            std::size_t chosen = 0;
            for (std::size_t m = 0; m < g.members.size(); ++m) {
                if (selected[g.members[m]]) {
                    ++chosen;
                } else if (g.kind == GroupKind::And && !g.optional[m]) {
                    return "mandatory feature '" + model.feature(g.members[m]).id + "' is not selected";
                }
            }
            if (g.kind == GroupKind::Or && chosen == 0) {
                return "or-group of '" + model.feature(i).id + "' has no selected member";
            }
            if (g.kind == GroupKind::Xor && chosen != 1) {
                return "xor-group of '" + model.feature(i).id + "' has " + std::to_string(chosen) +
                       " selected members";
            }
        }
    }
    for (std::size_t c = 0; c < model.clauses().size(); ++c) {
        const auto& clause = model.clauses()[c];
        const bool satisfied = std::any_of(clause.begin(), clause.end(), [&](const IndexedLiteral& lit) {
            return static_cast<bool>(selected[lit.feature]) == lit.positive;
        });
        if (!satisfied) {
            std::string text;
            for (const Literal& lit : model.constraints()[c].literals) {
                text += (text.empty() ? "" : " | ") + std::string(lit.positive ? "" : "!") + lit.feature;
            }
            return "constraint '" + text + "' is falsified";
        }
    }
    return std::nullopt;
}

ValidationResult validate_configuration(const FeatureModel& model, const Configuration& config) {
    ValidationResult result;
    std::vector<FeatureId> unknown_names;
    result.canonical = canonicalize(model, config, &unknown_names);
    if (!result.canonical) {
        std::string detail;
        for (const auto& n : unknown_names) {
            detail += (detail.empty() ? "" : ", ") + n;
        }
        result.unknown = UnknownReason{UnknownReason::Kind::UnrecognizedFeature, detail};
        return result;
    }
    std::vector<char> mask(model.size(), 0);
    for (FeatureIndex i : result.canonical->features) {
        mask[i] = 1;
    }
    if (auto violation = find_violation(model, mask)) {
        result.unknown = UnknownReason{UnknownReason::Kind::ModelViolation, std::move(*violation)};
    }
    return result;
}

std::vector<FeatureIndex> frontier(const FeatureModel& model, const CanonicalConfig& canonical) {
    std::vector<char> has_selected_child(model.size(), 0);
    for (FeatureIndex i : canonical.features) {
        if (i != 0) {
            has_selected_child[model.parent(i)] = 1;
        }
    }
    std::vector<FeatureIndex> out;
    for (FeatureIndex i : canonical.features) {
        if (!has_selected_child[i]) {
            out.push_back(i);
        }
    }
    return out;
}

Configuration to_configuration(const FeatureModel& model, const CanonicalConfig& canonical) {
    std::vector<FeatureId> names;
    for (FeatureIndex i : frontier(model, canonical)) {
        names.push_back(model.feature(i).id);
    }
    return Configuration(std::move(names));
}

}  // namespace invivo
