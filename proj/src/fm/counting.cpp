#include "invivo/counting.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace invivo {

namespace {

enum : std::int8_t { kFree = -1, kFalse = 0, kTrue = 1 };

/// Per-feature counts under a (possibly partial) forcing of feature values.
///   selected[i]  = configurations of the subtree of i with i selected
///   may_skip[i]  = whether the whole subtree of i may be left unselected
struct SubtreeTables {
    std::vector<BigCount> selected;
    std::vector<char> may_skip;
};

BigCount group_count(const IndexedGroup& g, const SubtreeTables& t) {
    switch (g.kind) {
        case GroupKind::And: {
            BigCount product = 1;
            for (std::size_t m = 0; m < g.members.size(); ++m) {
                const FeatureIndex f = g.members[m];
                product *= g.optional[m] ? t.selected[f] + (t.may_skip[f] ? 1 : 0) : t.selected[f];
                if (product == 0) {
                    break;
                }
            }
            return product;
        }
        case GroupKind::Xor: {
            // Exactly one member selected, all others skipped.
            std::size_t blocked = 0;
            FeatureIndex last_blocked = kNoFeature;
            for (FeatureIndex f : g.members) {
                if (!t.may_skip[f]) {
                    ++blocked;
                    last_blocked = f;
                }
            }
            if (blocked > 1) {
                return 0;
            }
            if (blocked == 1) {
                return t.selected[last_blocked];
            }
            BigCount sum = 0;
            for (FeatureIndex f : g.members) {
                sum += t.selected[f];
            }
            return sum;
        }
        case GroupKind::Or: {
            BigCount any = 1;
            bool all_skippable = true;
            for (FeatureIndex f : g.members) {
                any *= t.selected[f] + (t.may_skip[f] ? 1 : 0);
                all_skippable = all_skippable && t.may_skip[f];
            }
            return all_skippable ? any - 1 : any;
        }
    }
    return 0;
}

SubtreeTables build_tables(const FeatureModel& model, const std::vector<std::int8_t>& forced) {
    const std::size_t n = model.size();
    SubtreeTables t{std::vector<BigCount>(n), std::vector<char>(n, 1)};
    for (FeatureIndex i = static_cast<FeatureIndex>(n); i-- > 0;) {
        bool skip = forced[i] != kTrue;
        for (const IndexedGroup& g : model.groups(i)) {
            for (FeatureIndex m : g.members) {
                skip = skip && t.may_skip[m];
            }
        }
        t.may_skip[i] = skip ? 1 : 0;
        if (forced[i] == kFalse) {
            t.selected[i] = 0;
            continue;
        }
        BigCount count = 1;
        for (const IndexedGroup& g : model.groups(i)) {
            count *= group_count(g, t);
            if (count == 0) {
                break;
            }
        }
        t.selected[i] = std::move(count);
    }
    return t;
}

std::vector<FeatureIndex> constrained_features(const FeatureModel& model) {
    std::vector<FeatureIndex> vars;
    for (const auto& clause : model.clauses()) {
        for (const IndexedLiteral& lit : clause) {
            vars.push_back(lit.feature);
        }
    }
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
    return vars;
}

/// Calls `visit(forced, values)` for every assignment of the constrained
/// features that satisfies all clauses. Clauses are checked as soon as their
/// last variable is assigned.
void for_each_satisfying_assignment(
    const FeatureModel& model, const std::vector<FeatureIndex>& vars,
    const std::function<void(const std::vector<std::int8_t>&, const std::vector<bool>&)>& visit) {
    std::vector<std::size_t> position(model.size(), 0);
    for (std::size_t v = 0; v < vars.size(); ++v) {
        position[vars[v]] = v;
    }
    // Clauses grouped by the depth at which they become fully assigned.
    std::vector<std::vector<std::size_t>> ready(vars.size());
    for (std::size_t c = 0; c < model.clauses().size(); ++c) {
        std::size_t depth = 0;
        for (const IndexedLiteral& lit : model.clauses()[c]) {
            depth = std::max(depth, position[lit.feature]);
        }
        ready[depth].push_back(c);
    }

    std::vector<std::int8_t> forced(model.size(), kFree);
    std::vector<bool> values(vars.size(), false);
    std::function<void(std::size_t)> assign = [&](std::size_t depth) {
        if (depth == vars.size()) {
            visit(forced, values);
            return;
        }
        for (bool value : {false, true}) {
            forced[vars[depth]] = value ? kTrue : kFalse;
            values[depth] = value;
            bool ok = true;
            for (std::size_t c : ready[depth]) {
                const auto& clause = model.clauses()[c];
                ok = std::any_of(clause.begin(), clause.end(), [&](const IndexedLiteral& lit) {
                    return (forced[lit.feature] == kTrue) == lit.positive;
                });
                if (!ok) {
                    break;
                }
            }
            if (ok) {
                assign(depth + 1);
            }
        }
        forced[vars[depth]] = kFree;
    };
    assign(0);
}

std::size_t pick(const std::vector<BigCount>& weights, std::mt19937_64& rng) {
    BigCount total = 0;
    for (const auto& w : weights) {
        total += w;
    }
    BigCount r = uniform_below(total, rng);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (r < weights[i]) {
            return i;
        }
        r -= weights[i];
    }
    return weights.size() - 1;
}

}  // namespace

BigCount count_configurations(const FeatureModel& model) {
    const auto vars = constrained_features(model);
    BigCount total = 0;
    for_each_satisfying_assignment(model, vars, [&](const std::vector<std::int8_t>& forced, const std::vector<bool>&) {
        total += build_tables(model, forced).selected[0];
    });
    return total;
}

double log10_count(const BigCount& count) {
    if (count <= 0) {
        return -std::numeric_limits<double>::infinity();
    }
    const std::string digits = count.str();
    // Leading 17 digits carry all the precision a double can hold.
    const std::size_t lead = std::min<std::size_t>(digits.size(), 17);
    const double mantissa = std::stod(digits.substr(0, lead));
    return std::log10(mantissa) + static_cast<double>(digits.size() - lead);
}

BigCount uniform_below(const BigCount& bound, std::mt19937_64& rng) {
    if (bound <= 0) {
        throw std::invalid_argument("uniform_below: bound must be positive");
    }
    const std::size_t bits = boost::multiprecision::msb(bound) + 1;
    const std::size_t words = (bits + 63) / 64;
    const BigCount mask = (BigCount(1) << bits) - 1;
    while (true) {
        BigCount value = 0;
        for (std::size_t w = 0; w < words; ++w) {
            value <<= 64;
            value |= rng();
        }
        value &= mask;
        if (value < bound) {
            return value;
        }
    }
}

ConfigurationSampler::ConfigurationSampler(const FeatureModel& model)
    : model_(model), constrained_(constrained_features(model)) {
    for_each_satisfying_assignment(model_, constrained_,
                                   [&](const std::vector<std::int8_t>& forced, const std::vector<bool>& values) {
                                       BigCount weight = build_tables(model_, forced).selected[0];
                                       if (weight > 0) {
                                           total_ += weight;
                                           assignments_.push_back({values, std::move(weight)});
                                       }
                                   });
    if (total_ == 0) {
        throw UnsatisfiableModel("model '" + model_.name() + "' has no valid configuration");
    }
}

CanonicalConfig ConfigurationSampler::sample(std::mt19937_64& rng) const {
    std::vector<BigCount> weights;
    weights.reserve(assignments_.size());
    for (const auto& a : assignments_) {
        weights.push_back(a.weight);
    }
    const Assignment& a = assignments_[pick(weights, rng)];
    std::vector<std::int8_t> forced(model_.size(), kFree);
    for (std::size_t v = 0; v < constrained_.size(); ++v) {
        forced[constrained_[v]] = a.values[v] ? kTrue : kFalse;
    }
    const SubtreeTables t = build_tables(model_, forced);

    std::vector<char> chosen(model_.size(), 0);
    std::vector<FeatureIndex> pending{0};
    chosen[0] = 1;
    while (!pending.empty()) {
        const FeatureIndex f = pending.back();
        pending.pop_back();
        for (const IndexedGroup& g : model_.groups(f)) {
            const std::size_t k = g.members.size();
            std::vector<char> take(k, 0);
            if (g.kind == GroupKind::And) {
                for (std::size_t m = 0; m < k; ++m) {
                    const FeatureIndex c = g.members[m];
                    if (!g.optional[m]) {
                        take[m] = 1;
                    } else {
                        take[m] = pick({t.selected[c], BigCount(t.may_skip[c] ? 1 : 0)}, rng) == 0;
                    }
                }
            } else if (g.kind == GroupKind::Xor) {
                std::vector<BigCount> w(k);
                for (std::size_t m = 0; m < k; ++m) {
                    bool others_skippable = true;
                    for (std::size_t o = 0; o < k; ++o) {
                        others_skippable = others_skippable && (o == m || t.may_skip[g.members[o]]);
                    }
                    w[m] = others_skippable ? t.selected[g.members[m]] : BigCount(0);
                }
                take[pick(w, rng)] = 1;
            } else {
                // Sequential choice over a non-empty subset; suffix products give the
                // number of completions for each partial decision.
                std::vector<BigCount> any_suffix(k + 1, 1);
                std::vector<BigCount> none_suffix(k + 1, 1);
                for (std::size_t m = k; m-- > 0;) {
                    const FeatureIndex c = g.members[m];
                    const BigCount skip = t.may_skip[c] ? 1 : 0;
                    any_suffix[m] = any_suffix[m + 1] * (t.selected[c] + skip);
                    none_suffix[m] = none_suffix[m + 1] * skip;
                }
                bool have_one = false;
                for (std::size_t m = 0; m < k; ++m) {
                    const FeatureIndex c = g.members[m];
                    const BigCount skip = t.may_skip[c] ? 1 : 0;
                    const BigCount select_weight = t.selected[c] * any_suffix[m + 1];
                    const BigCount skip_weight =
                        skip * (have_one ? any_suffix[m + 1] : any_suffix[m + 1] - none_suffix[m + 1]);
                    take[m] = pick({select_weight, skip_weight}, rng) == 0;
                    have_one = have_one || take[m];
                }
            }
            for (std::size_t m = k; m-- > 0;) {
                if (take[m]) {
                    chosen[g.members[m]] = 1;
                    pending.push_back(g.members[m]);
                }
            }
        }
    }
    CanonicalConfig out;
    for (FeatureIndex i = 0; i < model_.size(); ++i) {
        if (chosen[i]) {
            out.features.push_back(i);
        }
    }
    return out;
}

Configuration sample_configuration(const FeatureModel& model, std::uint64_t seed) {
    ConfigurationSampler sampler(model);
    std::mt19937_64 rng(seed);
    return to_configuration(model, sampler.sample(rng));
}

}  // namespace invivo
