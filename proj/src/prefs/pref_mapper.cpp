#include "invivo/pref_mapper.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace invivo {

namespace pt = boost::property_tree;

const char* to_string(PreferenceKind kind) {
    switch (kind) {
        case PreferenceKind::Checkbox: return "Checkbox";
        case PreferenceKind::Switch: return "Switch";
        case PreferenceKind::List: return "List";
        case PreferenceKind::MultiSelectList: return "MultiSelectList";
        case PreferenceKind::EditText: return "EditText";
        case PreferenceKind::Numeric: return "Numeric";
        case PreferenceKind::Category: return "Category";
        case PreferenceKind::Screen: return "Screen";
        case PreferenceKind::Generic: return "Generic";
        case PreferenceKind::Custom: return "Custom";
    }
    return "?";
}

const char* to_string(MappingOutcome outcome) {
    switch (outcome) {
        case MappingOutcome::Direct: return "Direct";
        case MappingOutcome::Heuristic: return "Heuristic";
        case MappingOutcome::Unsupported: return "Unsupported";
    }
    return "?";
}

std::optional<MappingOutcome> parse_mapping_outcome(std::string_view text) {
    for (MappingOutcome o : {MappingOutcome::Direct, MappingOutcome::Heuristic, MappingOutcome::Unsupported}) {
        if (text == to_string(o)) {
            return o;
        }
    }
    return std::nullopt;
}

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    return std::string(s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1));
}

std::optional<std::string> attribute(const pt::ptree& node, const std::string& name) {
    const auto attrs = node.get_child_optional("<xmlattr>");
    if (!attrs) {
        return std::nullopt;
    }
    for (const std::string& candidate : {"android:" + name, "app:" + name, name}) {
        if (auto v = attrs->get_optional<std::string>(pt::ptree::path_type(candidate, '\0'))) {
            return *v;
        }
    }
    return std::nullopt;
}

PreferenceKind kind_of(const std::string& element, const pt::ptree& node) {
    if (element == "PreferenceScreen") return PreferenceKind::Screen;
    if (element == "PreferenceCategory") return PreferenceKind::Category;
    if (element == "CheckBoxPreference") return PreferenceKind::Checkbox;
    if (element == "SwitchPreference" || element == "SwitchPreferenceCompat") return PreferenceKind::Switch;
    if (element == "ListPreference") return PreferenceKind::List;
    if (element == "MultiSelectListPreference") return PreferenceKind::MultiSelectList;
    if (element == "SeekBarPreference") return PreferenceKind::Numeric;
    if (element == "EditTextPreference") {
        const auto input = attribute(node, "inputType");
        return input && input->find("number") != std::string::npos ? PreferenceKind::Numeric
                                                                     : PreferenceKind::EditText;
    }
    if (element == "Preference") return PreferenceKind::Generic;
    return PreferenceKind::Custom;
}

std::vector<std::string> split_entries(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t comma = text.find(',', start);
        if (comma == std::string::npos) {
            comma = text.size();
        }
        std::string entry = trim(std::string_view(text).substr(start, comma - start));
        if (!entry.empty()) {
            out.push_back(std::move(entry));
        }
        start = comma + 1;
    }
    return out;
}

PreferenceDecl build(const std::string& element, const pt::ptree& node, std::set<std::string>& keys) {
    PreferenceDecl d;
    d.element = element;
    d.kind = kind_of(element, node);
    d.key = trim(attribute(node, "key").value_or(""));
    d.title = trim(attribute(node, "title").value_or(""));
    d.default_value = attribute(node, "defaultValue");
    if (!d.key.empty() && !keys.insert(d.key).second) {
        throw PreferenceSchemaError("duplicate preference key '" + d.key + "'");
    }
    if (d.kind == PreferenceKind::List || d.kind == PreferenceKind::MultiSelectList) {
        if (auto entries = attribute(node, "entries"); entries && !entries->starts_with("@")) {
            d.entries = split_entries(*entries);
        }
    }
    for (const auto& [name, child] : node) {
        if (name == "<xmlattr>" || name == "<xmlcomment>" || name == "<xmltext>") {
            continue;
        }
        if (!d.is_container()) {
            throw PreferenceSchemaError("element <" + element + "> cannot contain <" + name + ">");
        }
        d.children.push_back(build(name, child, keys));
    }
    return d;
}

std::string segment(std::string_view text) {
    std::string out;
    for (char c : text) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                        c == '-';
        out += ok ? c : '_';
    }
    return out.empty() ? "_" : out;
}

std::string unique(std::string base, std::set<std::string>& used) {
    if (used.insert(base).second) {
        return base;
    }
    for (int n = 2;; ++n) {
        std::string candidate = base + "_" + std::to_string(n);
        if (used.insert(candidate).second) {
            return candidate;
        }
    }
}

class Mapper {
public:
    explicit Mapper(std::string root) : root_(std::move(root)) {}

    MappingResult run(const std::vector<PreferenceDecl>& schema) {
        // A single top-level screen is the app root itself.
        const std::vector<PreferenceDecl>* top = &schema;
        if (schema.size() == 1 && schema.front().kind == PreferenceKind::Screen) {
            top = &schema.front().children;
        }
        reserve_keys(*top);
        std::vector<FeatureId> members = map_children(*top);

        Feature root{root_, "", FeatureKind::Primitive, {}};
        if (!members.empty()) {
            root.kind = FeatureKind::Compound;
            root.groups.push_back(mandatory_and(members));
        }
        features_.insert(features_.begin(), std::move(root));
        FeatureModel model(root_, 1, root_, std::move(features_), {});

        std::string document = to_document(model);
        if (!defaults_.empty()) {
            document += "# defaults\n";
            for (const auto& [id, value] : defaults_) {
                document += "#   " + id + " = " + value + "\n";
            }
        }
        return {std::move(model), std::move(report_), std::move(document)};
    }

private:
    static ChildGroup mandatory_and(const std::vector<FeatureId>& members) {
        ChildGroup g{GroupKind::And, {}};
        for (const FeatureId& id : members) {
            g.members.push_back({id, Optionality::Mandatory});
        }
        return g;
    }

    // Explicit keys claim their ids first so that fallback names never steal them.
    void reserve_keys(const std::vector<PreferenceDecl>& decls) {
        for (const PreferenceDecl& d : decls) {
            if (!d.key.empty()) {
                ids_[&d] = unique(segment(d.key), used_);
            }
            reserve_keys(d.children);
        }
    }

    std::string id_for(const PreferenceDecl& d) {
        if (auto it = ids_.find(&d); it != ids_.end()) {
            return it->second;
        }
        const std::string base = d.title.empty() ? (d.is_container() ? "group" : "pref") + std::to_string(++anonymous_)
                                                 : segment(d.title);
        return ids_[&d] = unique(base, used_);
    }

    std::vector<FeatureId> map_children(const std::vector<PreferenceDecl>& decls) {
        std::vector<FeatureId> members;
        for (const PreferenceDecl& d : decls) {
            if (auto id = map(d)) {
                members.push_back(*id);
            }
        }
        return members;
    }

    FeatureId value_feature(const FeatureId& parent, std::string_view value, std::set<std::string>& used) {
        FeatureId id = parent + "." + unique(segment(value), used);
        features_.push_back(Feature{id, "", FeatureKind::Primitive, {}});
        return id;
    }

    // Emits a compound preference whose values form one group.
    FeatureId alternatives(const FeatureId& id, GroupKind kind, const std::vector<std::string>& values) {
        const std::size_t at = features_.size();
        features_.push_back(Feature{id, "", FeatureKind::Compound, {}});
        std::set<std::string> used;
        ChildGroup g{values.size() < 2 ? GroupKind::And : kind, {}};
        for (const std::string& v : values) {
            g.members.push_back({value_feature(id, v, used), Optionality::Mandatory});
        }
        features_[at].groups.push_back(std::move(g));
        return id;
    }

    void tally(const PreferenceDecl& d, MappingOutcome outcome, std::string fragment) {
        (outcome == MappingOutcome::Direct      ? report_.direct
         : outcome == MappingOutcome::Heuristic ? report_.heuristic
                                                : report_.unsupported)++;
        report_.entries.push_back({d.key.empty() ? id_for(d) : d.key, outcome, std::move(fragment)});
    }

    std::optional<FeatureId> map(const PreferenceDecl& d) {
        const FeatureId id = root_ + "." + id_for(d);
        if (d.default_value && !d.is_container()) {
            std::string value = *d.default_value;
            std::replace(value.begin(), value.end(), '\n', ' ');
            defaults_.emplace_back(id, std::move(value));
        }
        switch (d.kind) {
            case PreferenceKind::Category:
            case PreferenceKind::Screen: {
                const std::size_t at = features_.size();
                features_.push_back(Feature{id, "", FeatureKind::Compound, {}});
                std::vector<FeatureId> members = map_children(d.children);
                if (members.empty()) {
                    features_.erase(features_.begin() + static_cast<long>(at));
                    return std::nullopt;
                }
                features_[at].groups.push_back(mandatory_and(members));
                return id;
            }
            case PreferenceKind::Checkbox:
            case PreferenceKind::Switch:
                tally(d, MappingOutcome::Direct, id);
                return alternatives(id, GroupKind::Xor, {"on", "off"});
            case PreferenceKind::List:
            case PreferenceKind::MultiSelectList:
                if (d.entries.empty()) {
                    tally(d, MappingOutcome::Unsupported, "entries not declared inline");
                    return std::nullopt;
                }
                tally(d, MappingOutcome::Direct, id);
                return alternatives(id, d.kind == PreferenceKind::List ? GroupKind::Xor : GroupKind::Or, d.entries);
            case PreferenceKind::EditText:
                tally(d, MappingOutcome::Heuristic, id);
                return alternatives(id, GroupKind::Xor, {"default_value", "custom_value"});
            case PreferenceKind::Numeric:
                tally(d, MappingOutcome::Heuristic, id);
                return alternatives(id, GroupKind::Xor, {"negative", "zero", "positive"});
            case PreferenceKind::Generic:
                tally(d, MappingOutcome::Unsupported, "generic preference");
                return std::nullopt;
            case PreferenceKind::Custom:
                tally(d, MappingOutcome::Unsupported, "custom type " + d.element);
                return std::nullopt;
        }
        return std::nullopt;
    }

    std::string root_;
    std::vector<Feature> features_;
    MappingReport report_;
    std::vector<std::pair<FeatureId, std::string>> defaults_;
    std::map<const PreferenceDecl*, std::string> ids_;
    std::set<std::string> used_;
    int anonymous_ = 0;
};

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c == '"' ? "\"\"" : std::string(1, c);
    }
    return out + "\"";
}

std::string percent(std::size_t part, std::size_t total) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * static_cast<double>(part) / static_cast<double>(total));
    return buf;
}

}  // namespace

std::vector<PreferenceDecl> parse_preference_schema(std::string_view xml) {
    pt::ptree tree;
    std::istringstream in{std::string(xml)};
    try {
        pt::read_xml(in, tree);
    } catch (const pt::xml_parser_error& e) {
        throw PreferenceSchemaError("malformed preference document: " + e.message(), e.line());
    }
    std::set<std::string> keys;
    std::vector<PreferenceDecl> out;
    for (const auto& [name, node] : tree) {
        if (name == "<xmlcomment>" || name == "<xmlattr>") {
            continue;
        }
        out.push_back(build(name, node, keys));
    }
    if (out.empty()) {
        throw PreferenceSchemaError("preference document has no root element");
    }
    return out;
}

MappingResult map_to_feature_model(const std::vector<PreferenceDecl>& schema, const std::string& root) {
    if (!is_valid_path(root)) {
        throw std::invalid_argument("invalid root feature name '" + root + "'");
    }
    return Mapper(root).run(schema);
}

std::string report_summary(const MappingReport& report) {
    const std::size_t total = report.total();
    if (total == 0) {
        return "no preferences found";
    }
    return percent(report.direct, total) + " / " + percent(report.heuristic, total) + " / " +
           percent(report.unsupported, total) + " (" + std::to_string(total) +
           (total == 1 ? " preference)" : " preferences)");
}

std::string report_csv(const MappingReport& report) {
    std::string out = "key,outcome,fragment\n";
    for (const MappingEntry& e : report.entries) {
        out += csv_field(e.key) + "," + to_string(e.outcome) + "," + csv_field(e.fragment) + "\n";
    }
    return out;
}

std::string report_json(const MappingReport& report) {
    nlohmann::ordered_json j;
    j["schema"] = "invivo.mapping-report/1";
    j["direct"] = report.direct;
    j["heuristic"] = report.heuristic;
    j["unsupported"] = report.unsupported;
    j["total"] = report.total();
    j["summary"] = report_summary(report);
    j["entries"] = nlohmann::ordered_json::array();
    for (const MappingEntry& e : report.entries) {
        j["entries"].push_back({{"key", e.key}, {"outcome", to_string(e.outcome)}, {"fragment", e.fragment}});
    }
    return j.dump(2) + "\n";
}

MappingReport parse_report_json(std::string_view text) {
    try {
        const auto j = nlohmann::json::parse(text);
        MappingReport r;
        r.direct = j.at("direct").get<std::size_t>();
        r.heuristic = j.at("heuristic").get<std::size_t>();
        r.unsupported = j.at("unsupported").get<std::size_t>();
        for (const auto& e : j.at("entries")) {
            const auto outcome = parse_mapping_outcome(e.at("outcome").get<std::string>());
            if (!outcome) {
                throw std::invalid_argument("unknown outcome");
            }
            r.entries.push_back({e.at("key").get<std::string>(), *outcome, e.at("fragment").get<std::string>()});
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed mapping report: ") + e.what());
    }
}

}  // namespace invivo
