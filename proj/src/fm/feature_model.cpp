#include "invivo/feature_model.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <sstream>

namespace invivo {

namespace {

std::string format_position(std::string message, std::size_t line, std::size_t column) {
    if (line == 0) {
        return message;
    }
    return std::to_string(line) + ":" + std::to_string(column) + ": " + message;
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

bool is_path_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-';
}

}  // namespace

ModelError::ModelError(Kind kind, std::string message, std::size_t line, std::size_t column)
    : std::runtime_error(format_position(std::move(message), line, column)),
      kind_(kind),
      line_(line),
      column_(column) {}

const char* to_string(ModelError::Kind kind) {
    switch (kind) {
        case ModelError::Kind::Syntax: return "syntax";
        case ModelError::Kind::DuplicateFeature: return "duplicate-feature";
        case ModelError::Kind::DanglingReference: return "dangling-reference";
        case ModelError::Kind::Cycle: return "cycle";
        case ModelError::Kind::Structure: return "structure";
        case ModelError::Kind::Collision: return "collision";
    }
    return "unknown";
}

const char* to_string(GroupKind kind) {
    switch (kind) {
        case GroupKind::And: return "and";
        case GroupKind::Or: return "or";
        case GroupKind::Xor: return "xor";
    }
    return "and";
}

std::string display_name(std::string_view id) {
    const auto dot = id.rfind('.');
    return std::string(dot == std::string_view::npos ? id : id.substr(dot + 1));
}

bool is_valid_path(std::string_view id) {
    if (id.empty()) {
        return false;
    }
    bool segment_start = true;
    for (char c : id) {
        if (c == '.') {
            if (segment_start) {
                return false;
            }
            segment_start = true;
        } else if (is_path_char(c)) {
            segment_start = false;
        } else {
            return false;
        }
    }
    return !segment_start;
}

bool IndexedGroup::has_choice() const {
    if (kind != GroupKind::And) {
        return true;
    }
    return std::find(optional.begin(), optional.end(), true) != optional.end();
}

FeatureModel::FeatureModel(std::string name, std::uint64_t version, FeatureId root,
                           std::vector<Feature> features,
                           std::vector<CrossTreeConstraint> constraints)
    : name_(std::move(name)), version_(version), constraints_(std::move(constraints)) {
    using K = ModelError::Kind;
    if (features.empty()) {
        throw ModelError(K::Structure, "model has no features");
    }

    std::unordered_map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (!is_valid_path(features[i].id)) {
            throw ModelError(K::Syntax, "invalid feature path '" + features[i].id + "'");
        }
        if (!by_id.emplace(features[i].id, i).second) {
            throw ModelError(K::DuplicateFeature, "duplicate feature '" + features[i].id + "'");
        }
    }
    const auto root_it = by_id.find(root);
    if (root_it == by_id.end()) {
        throw ModelError(K::DanglingReference, "root '" + root + "' is not a declared feature");
    }

    std::vector<std::size_t> parent_of(features.size(), static_cast<std::size_t>(-1));
    for (std::size_t i = 0; i < features.size(); ++i) {
        const Feature& f = features[i];
        if (f.kind == FeatureKind::Primitive && !f.groups.empty()) {
            throw ModelError(K::Structure, "primitive feature '" + f.id + "' has children");
        }
        if (f.kind == FeatureKind::Compound && f.groups.empty()) {
            throw ModelError(K::Structure, "compound feature '" + f.id + "' has no children");
        }
        for (const ChildGroup& g : f.groups) {
            if (g.members.empty()) {
                throw ModelError(K::Structure, "empty group under '" + f.id + "'");
            }
            if (g.kind != GroupKind::And) {
                if (g.members.size() < 2) {
                    throw ModelError(K::Structure, std::string(to_string(g.kind)) + " group under '" +
                                                       f.id + "' needs at least two members");
                }
                for (const GroupMember& m : g.members) {
                    if (m.optionality == Optionality::Optional) {
                        throw ModelError(K::Structure, "optional member '" + m.id + "' inside " +
                                                           to_string(g.kind) + " group of '" + f.id + "'");
                    }
                }
            }
            for (const GroupMember& m : g.members) {
                const auto it = by_id.find(m.id);
                if (it == by_id.end()) {
                    throw ModelError(K::DanglingReference,
                                     "group of '" + f.id + "' references undeclared feature '" + m.id + "'");
                }
                if (it->second == root_it->second) {
                    throw ModelError(K::Cycle, "root '" + root + "' is listed as a child of '" + f.id + "'");
                }
                if (parent_of[it->second] != static_cast<std::size_t>(-1)) {
                    throw ModelError(K::Structure, "feature '" + m.id + "' has more than one parent");
                }
                parent_of[it->second] = i;
            }
        }
    }

    // Preorder walk from the root; anything unreached is either an orphan or on a cycle.
    std::vector<std::size_t> order;
    order.reserve(features.size());
    std::vector<bool> seen(features.size(), false);
    std::vector<std::size_t> stack{root_it->second};
    while (!stack.empty()) {
        const std::size_t cur = stack.back();
        stack.pop_back();
        if (seen[cur]) {
            throw ModelError(K::Cycle, "feature '" + features[cur].id + "' is reachable twice");
        }
        seen[cur] = true;
        order.push_back(cur);
        const auto& groups = features[cur].groups;
        for (auto g = groups.rbegin(); g != groups.rend(); ++g) {
            for (auto m = g->members.rbegin(); m != g->members.rend(); ++m) {
                stack.push_back(by_id.at(m->id));
            }
        }
    }
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (!seen[i]) {
            if (parent_of[i] != static_cast<std::size_t>(-1)) {
                throw ModelError(K::Cycle, "feature '" + features[i].id + "' is part of a parent cycle");
            }
            throw ModelError(K::Structure, "feature '" + features[i].id + "' is not connected to root '" +
                                               root + "'");
        }
    }

    features_.reserve(features.size());
    for (std::size_t i : order) {
        features_.push_back(std::move(features[i]));
        if (features_.back().name.empty()) {
            features_.back().name = display_name(features_.back().id);
        }
    }
    for (FeatureIndex i = 0; i < features_.size(); ++i) {
        index_.emplace(features_[i].id, i);
    }
    parent_.assign(features_.size(), kNoFeature);
    groups_.resize(features_.size());
    for (FeatureIndex i = 0; i < features_.size(); ++i) {
        for (const ChildGroup& g : features_[i].groups) {
            IndexedGroup ig;
            ig.kind = g.kind;
            for (const GroupMember& m : g.members) {
                const FeatureIndex child = index_.at(m.id);
                ig.members.push_back(child);
                ig.optional.push_back(g.kind == GroupKind::And && m.optionality == Optionality::Optional);
                parent_[child] = i;
            }
            groups_[i].push_back(std::move(ig));
        }
    }
    subtree_end_.assign(features_.size(), 0);
    for (FeatureIndex i = static_cast<FeatureIndex>(features_.size()); i-- > 0;) {
        FeatureIndex end = i + 1;
        for (const IndexedGroup& g : groups_[i]) {
            for (FeatureIndex m : g.members) {
                end = std::max(end, subtree_end_[m]);
            }
        }
        subtree_end_[i] = end;
    }

    for (const CrossTreeConstraint& c : constraints_) {
        if (c.literals.empty()) {
            throw ModelError(K::Structure, "empty cross-tree constraint");
        }
        std::vector<IndexedLiteral> clause;
        for (const Literal& lit : c.literals) {
            const auto it = index_.find(lit.feature);
            if (it == index_.end()) {
                throw ModelError(K::DanglingReference,
                                 "constraint references undeclared feature '" + lit.feature + "'");
            }
            clause.push_back({it->second, lit.positive});
        }
        clauses_.push_back(std::move(clause));
    }

    const std::string doc = to_document(*this);
    fingerprint_ = fnv1a(std::string_view(doc).substr(doc.find('\n') + 1));
}

std::size_t FeatureModel::primitive_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(features_.begin(), features_.end(), [](const Feature& f) {
        return f.kind == FeatureKind::Primitive;
    }));
}

std::optional<FeatureIndex> FeatureModel::index_of(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

const Feature* FeatureModel::find(std::string_view id) const {
    const auto idx = index_of(id);
    return idx ? &features_[*idx] : nullptr;
}

FeatureModel FeatureModel::with_version(std::uint64_t version) const {
    FeatureModel copy = *this;
    copy.version_ = version;
    return copy;
}

bool FeatureModel::operator==(const FeatureModel& other) const {
    return name_ == other.name_ && version_ == other.version_ && features_ == other.features_ &&
           constraints_ == other.constraints_;
}

// ---------------------------------------------------------------------------
// Document rendering

std::string to_document(const FeatureModel& model) {
    std::ostringstream out;
    out << "model " << model.name() << " v" << model.version() << '\n';
    for (FeatureIndex i = 0; i < model.size(); ++i) {
        const Feature& f = model.feature(i);
        out << "feature " << f.id << (f.kind == FeatureKind::Compound ? " compound" : " primitive");
        const FeatureIndex parent = model.parent(i);
        if (parent != kNoFeature) {
            for (const IndexedGroup& g : model.groups(parent)) {
                const auto pos = std::find(g.members.begin(), g.members.end(), i);
                if (pos != g.members.end() && g.kind == GroupKind::And) {
                    out << (g.optional[static_cast<std::size_t>(pos - g.members.begin())] ? " optional"
                                                                                          : " mandatory");
                }
            }
        }
        out << '\n';
    }
    for (const Feature& f : model.features()) {
        for (const ChildGroup& g : f.groups) {
            out << "group " << f.id << ' ' << to_string(g.kind) << ' ';
            for (std::size_t m = 0; m < g.members.size(); ++m) {
                out << (m ? ", " : "") << g.members[m].id;
            }
            out << '\n';
        }
    }
    for (const CrossTreeConstraint& c : model.constraints()) {
        out << "constraint ";
        for (std::size_t l = 0; l < c.literals.size(); ++l) {
            out << (l ? " | " : "") << (c.literals[l].positive ? "" : "!") << c.literals[l].feature;
        }
        out << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Token {
    std::string_view text;
    std::size_t column = 0;  // 1-based
};

class LineScanner {
public:
    LineScanner(std::string_view line, std::size_t line_no) : line_(line), line_no_(line_no) {}

    bool at_end() {
        skip_space();
        return pos_ >= line_.size();
    }

    Token word() {
        skip_space();
        const std::size_t start = pos_;
        while (pos_ < line_.size() && !is_space(line_[pos_]) && line_[pos_] != ',' && line_[pos_] != '|') {
            ++pos_;
        }
        if (start == pos_) {
            fail("expected a word");
        }
        return {line_.substr(start, pos_ - start), start + 1};
    }

    bool consume(char c) {
        skip_space();
        if (pos_ < line_.size() && line_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    bool consume(std::string_view s) {
        skip_space();
        if (line_.substr(pos_).starts_with(s)) {
            pos_ += s.size();
            return true;
        }
        return false;
    }

    std::size_t column() {
        skip_space();
        return pos_ + 1;
    }

    [[noreturn]] void fail(const std::string& message) {
        throw ModelError(ModelError::Kind::Syntax, message, line_no_, pos_ + 1);
    }

    [[noreturn]] void fail_at(const Token& tok, const std::string& message,
                              ModelError::Kind kind = ModelError::Kind::Syntax) {
        throw ModelError(kind, message, line_no_, tok.column);
    }

private:
    static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }
    void skip_space() {
        while (pos_ < line_.size() && is_space(line_[pos_])) {
            ++pos_;
        }
    }

    std::string_view line_;
    std::size_t line_no_;
    std::size_t pos_ = 0;
};

struct DeclaredFeature {
    FeatureId id;
    FeatureKind kind;
    Optionality optionality;
    bool explicit_optional;
    std::size_t line;
};

struct DeclaredGroup {
    FeatureId parent;
    GroupKind kind;
    std::vector<std::pair<FeatureId, std::size_t>> members;  // id, column
    std::size_t line;
    std::size_t parent_column;
};

struct DeclaredConstraint {
    std::vector<std::pair<Literal, std::size_t>> literals;
    std::size_t line;
};

Literal parse_literal(LineScanner& scan, std::size_t& column) {
    Literal lit;
    column = scan.column();
    if (scan.consume('!')) {
        lit.positive = false;
    }
    const Token tok = scan.word();
    if (!is_valid_path(tok.text)) {
        scan.fail_at(tok, "invalid feature path '" + std::string(tok.text) + "'");
    }
    lit.feature = std::string(tok.text);
    return lit;
}

}  // namespace

FeatureModel parse_model(std::string_view text) {
    using K = ModelError::Kind;
    std::optional<std::string> name;
    std::uint64_t version = 0;
    std::vector<DeclaredFeature> features;
    std::vector<DeclaredGroup> groups;
    std::vector<DeclaredConstraint> constraints;
    std::map<std::string, std::size_t, std::less<>> declared;

    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        LineScanner scan(line, line_no);
        if (scan.at_end()) {
            continue;
        }
        const Token keyword = scan.word();
        if (!name && keyword.text != "model") {
            scan.fail_at(keyword, "document must start with a 'model' line");
        }
        if (keyword.text == "model") {
            if (name) {
                scan.fail_at(keyword, "duplicate 'model' line");
            }
            const Token n = scan.word();
            if (!is_valid_path(n.text)) {
                scan.fail_at(n, "invalid model name '" + std::string(n.text) + "'");
            }
            const Token v = scan.word();
            if (v.text.size() < 2 || v.text[0] != 'v') {
                scan.fail_at(v, "expected version as v<integer>");
            }
            const auto digits = v.text.substr(1);
            const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), version);
            if (ec != std::errc() || ptr != digits.data() + digits.size()) {
                scan.fail_at(v, "expected version as v<integer>");
            }
            name = std::string(n.text);
        } else if (keyword.text == "feature") {
            const Token path = scan.word();
            if (!is_valid_path(path.text)) {
                scan.fail_at(path, "invalid feature path '" + std::string(path.text) + "'");
            }
            const Token kind = scan.word();
            DeclaredFeature f{std::string(path.text), FeatureKind::Primitive, Optionality::Mandatory, false,
                              line_no};
            if (kind.text == "compound") {
                f.kind = FeatureKind::Compound;
            } else if (kind.text != "primitive") {
                scan.fail_at(kind, "expected 'compound' or 'primitive'");
            }
            if (!scan.at_end()) {
                const Token opt = scan.word();
                if (opt.text == "optional") {
                    f.optionality = Optionality::Optional;
                    f.explicit_optional = true;
                } else if (opt.text != "mandatory") {
                    scan.fail_at(opt, "expected 'mandatory' or 'optional'");
                }
            }
            if (!scan.at_end()) {
                scan.fail("unexpected trailing input");
            }
            if (declared.contains(f.id)) {
                scan.fail_at(path, "duplicate feature '" + f.id + "'", K::DuplicateFeature);
            }
            declared.emplace(f.id, features.size());
            features.push_back(std::move(f));
        } else if (keyword.text == "group") {
            const Token parent = scan.word();
            const Token kind = scan.word();
            DeclaredGroup g{std::string(parent.text), GroupKind::And, {}, line_no, parent.column};
            if (kind.text == "or") {
                g.kind = GroupKind::Or;
            } else if (kind.text == "xor") {
                g.kind = GroupKind::Xor;
            } else if (kind.text != "and") {
                scan.fail_at(kind, "expected 'and', 'or' or 'xor'");
            }
            do {
                const Token child = scan.word();
                if (!is_valid_path(child.text)) {
                    scan.fail_at(child, "invalid feature path '" + std::string(child.text) + "'");
                }
                g.members.emplace_back(std::string(child.text), child.column);
            } while (scan.consume(','));
            if (!scan.at_end()) {
                scan.fail("unexpected trailing input");
            }
            groups.push_back(std::move(g));
        } else if (keyword.text == "constraint") {
            DeclaredConstraint c{{}, line_no};
            std::size_t col = 0;
            Literal first = parse_literal(scan, col);
            const bool implication = scan.consume("=>");
            if (implication) {
                first.positive = !first.positive;
            }
            c.literals.emplace_back(std::move(first), col);
            if (implication) {
                Literal rhs = parse_literal(scan, col);
                c.literals.emplace_back(std::move(rhs), col);
            }
            while (scan.consume('|')) {
                Literal lit = parse_literal(scan, col);
                c.literals.emplace_back(std::move(lit), col);
            }
            if (!scan.at_end()) {
                scan.fail("unexpected trailing input in constraint");
            }
            constraints.push_back(std::move(c));
        } else {
            scan.fail_at(keyword, "unknown directive '" + std::string(keyword.text) + "'");
        }
    }
    if (!name) {
        throw ModelError(K::Syntax, "missing 'model' line", 1, 1);
    }

    // Resolve references with positions before handing over to the model constructor.
    std::vector<Feature> built(features.size());
    std::vector<bool> has_parent(features.size(), false);
    for (std::size_t i = 0; i < features.size(); ++i) {
        built[i].id = features[i].id;
        built[i].kind = features[i].kind;
    }
    for (const DeclaredGroup& g : groups) {
        const auto parent = declared.find(g.parent);
        if (parent == declared.end()) {
            throw ModelError(K::DanglingReference, "group parent '" + g.parent + "' is not declared", g.line,
                             g.parent_column);
        }
        if (features[parent->second].kind == FeatureKind::Primitive) {
            throw ModelError(K::Structure, "primitive feature '" + g.parent + "' cannot have a group", g.line,
                             g.parent_column);
        }
        ChildGroup cg{g.kind, {}};
        for (const auto& [id, column] : g.members) {
            const auto child = declared.find(id);
            if (child == declared.end()) {
                throw ModelError(K::DanglingReference, "group member '" + id + "' is not declared", g.line,
                                 column);
            }
            const DeclaredFeature& decl = features[child->second];
            if (g.kind != GroupKind::And && decl.explicit_optional) {
                throw ModelError(K::Structure,
                                 "optional feature '" + id + "' cannot be a member of an " +
                                     to_string(g.kind) + " group",
                                 g.line, column);
            }
            if (has_parent[child->second]) {
                throw ModelError(K::Structure, "feature '" + id + "' already has a parent", g.line, column);
            }
            has_parent[child->second] = true;
            cg.members.push_back(
                {id, g.kind == GroupKind::And ? decl.optionality : Optionality::Mandatory});
        }
        built[parent->second].groups.push_back(std::move(cg));
    }
    std::vector<CrossTreeConstraint> clauses;
    for (const DeclaredConstraint& c : constraints) {
        CrossTreeConstraint clause;
        for (const auto& [lit, column] : c.literals) {
            if (!declared.contains(lit.feature)) {
                throw ModelError(K::DanglingReference,
                                 "constraint references undeclared feature '" + lit.feature + "'", c.line, column);
            }
            clause.literals.push_back(lit);
        }
        clauses.push_back(std::move(clause));
    }

    std::vector<std::string> roots;
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (!has_parent[i]) {
            roots.push_back(features[i].id);
        }
    }
    if (features.empty()) {
        throw ModelError(K::Structure, "model declares no features");
    }
    if (roots.empty()) {
        throw ModelError(K::Cycle, "every feature has a parent; the parent links form a cycle");
    }
    if (roots.size() > 1) {
        // A parentless feature that is not first is unreachable: either an orphan or
        // the top of a detached cycle. Report the ambiguity with the candidates.
        std::string list;
        for (const auto& r : roots) {
            list += (list.empty() ? "" : ", ") + r;
        }
        throw ModelError(K::Structure, "model has more than one root: " + list,
                         features[declared.at(roots[1])].line, 1);
    }
    return FeatureModel(*name, version, roots.front(), std::move(built), std::move(clauses));
}

// ---------------------------------------------------------------------------
// Merging

FeatureModel merge_models(const FeatureModel& device_part, const FeatureModel& app_part,
                          const FeatureId& root_id) {
    std::vector<Feature> features;
    std::set<std::string> seen{root_id};
    Feature root{root_id, display_name(root_id), FeatureKind::Compound, {}};
    ChildGroup part_roots{GroupKind::And, {}};

    for (const FeatureModel* part : {&device_part, &app_part}) {
        for (const Feature& f : part->features()) {
            if (f.id == root_id) {
                for (const ChildGroup& g : f.groups) {
                    root.groups.push_back(g);
                }
                continue;
            }
            if (!seen.insert(f.id).second) {
                throw ModelError(ModelError::Kind::Collision,
                                 "feature '" + f.id + "' is declared by both model parts");
            }
            features.push_back(f);
        }
        if (part->root() != root_id) {
            part_roots.members.push_back({part->root(), Optionality::Mandatory});
        }
    }
    if (!part_roots.members.empty()) {
        root.groups.insert(root.groups.begin(), std::move(part_roots));
    }
    if (root.groups.empty()) {
        root.kind = FeatureKind::Primitive;
    }
    features.insert(features.begin(), std::move(root));

    std::vector<CrossTreeConstraint> constraints = device_part.constraints();
    constraints.insert(constraints.end(), app_part.constraints().begin(), app_part.constraints().end());
    const std::uint64_t version = std::max(device_part.version(), app_part.version()) + 1;
    return FeatureModel(root_id, version, root_id, std::move(features), std::move(constraints));
}

}  // namespace invivo
