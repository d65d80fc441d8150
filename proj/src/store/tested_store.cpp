#include "invivo/tested_store.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <mutex>

namespace invivo {

namespace {

// Snapshot layout (all integers little-endian):
//
//   offset  size  field
//        0     4  magic "IVTS"
//        4     2  format version
//        6     2  reserved (0)
//        8     8  model version
//       16     8  model fingerprint
//       24     4  trie level count
//       28     8  configuration count
//       36     4  payload length in bytes
//       40     4  CRC-32 over bytes [0, 40) followed by the payload
//       44     -  payload
//
// The payload is empty for an empty store. Otherwise it is the root node
// record, where a node record is
//
//   varint child_count, then per child (ascending key order):
//     varint tag (0 = inactive, else 1 + number of chosen members)
//     varint chosen positions, ascending
//     the child's node record
//
// Nodes at depth == level count are terminal and have no children.
constexpr std::uint8_t kMagic[4] = {'I', 'V', 'T', 'S'};

void put_le(std::vector<std::uint8_t>& out, std::uint64_t value, std::size_t bytes) {
    for (std::size_t i = 0; i < bytes; ++i) {
        out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
    }
}

std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t offset, std::size_t bytes) {
    std::uint64_t value = 0;
    for (std::size_t i = 0; i < bytes; ++i) {
        value |= static_cast<std::uint64_t>(in[offset + i]) << (8 * i);
    }
    return value;
}

void put_varint(std::vector<std::uint8_t>& out, std::uint64_t value) {
    while (value >= 0x80) {
        out.push_back(static_cast<std::uint8_t>(value | 0x80));
        value >>= 7;
    }
    out.push_back(static_cast<std::uint8_t>(value));
}

std::uint32_t crc_of(std::span<const std::uint8_t> header, std::span<const std::uint8_t> payload) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, header.data(), static_cast<uInt>(header.size()));
    if (!payload.empty()) {
        crc = crc32(crc, payload.data(), static_cast<uInt>(payload.size()));
    }
    return static_cast<std::uint32_t>(crc);
}

[[noreturn]] void corrupt(const std::string& what) {
    throw StoreError(StoreError::Kind::Corrupt, "corrupt tested-configuration snapshot: " + what);
}

class PayloadReader {
public:
    explicit PayloadReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint64_t varint() {
        std::uint64_t value = 0;
        for (int shift = 0; shift < 64; shift += 7) {
            if (pos_ >= bytes_.size()) {
                corrupt("truncated varint");
            }
            const std::uint8_t b = bytes_[pos_++];
            value |= static_cast<std::uint64_t>(b & 0x7f) << shift;
            if ((b & 0x80) == 0) {
                return value;
            }
        }
        corrupt("overlong varint");
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

TestedConfigStore::TestedConfigStore(const FeatureModel& model)
    : model_version_(model.version()), model_fingerprint_(model.fingerprint()), nodes_(1) {
    for (FeatureIndex i = 0; i < model.size(); ++i) {
        const auto& groups = model.groups(i);
        for (std::size_t g = 0; g < groups.size(); ++g) {
            if (groups[g].has_choice()) {
                levels_.push_back({i, g});
            }
        }
    }
}

TestedConfigStore::TestedConfigStore(const TestedConfigStore& other) {
    std::shared_lock lock(other.mutex_);
    model_version_ = other.model_version_;
    model_fingerprint_ = other.model_fingerprint_;
    levels_ = other.levels_;
    nodes_ = other.nodes_;
    size_ = other.size_;
}

TestedConfigStore& TestedConfigStore::operator=(const TestedConfigStore& other) {
    if (this != &other) {
        TestedConfigStore copy(other);
        *this = std::move(copy);
    }
    return *this;
}

TestedConfigStore::TestedConfigStore(TestedConfigStore&& other) noexcept
    : model_version_(other.model_version_),
      model_fingerprint_(other.model_fingerprint_),
      levels_(std::move(other.levels_)),
      nodes_(std::move(other.nodes_)),
      size_(other.size_) {}

TestedConfigStore& TestedConfigStore::operator=(TestedConfigStore&& other) noexcept {
    if (this != &other) {
        std::scoped_lock lock(mutex_, other.mutex_);
        model_version_ = other.model_version_;
        model_fingerprint_ = other.model_fingerprint_;
        levels_ = std::move(other.levels_);
        nodes_ = std::move(other.nodes_);
        size_ = other.size_;
    }
    return *this;
}

std::size_t TestedConfigStore::size() const {
    std::shared_lock lock(mutex_);
    return size_;
}

std::size_t TestedConfigStore::node_count() const {
    std::shared_lock lock(mutex_);
    return nodes_.size();
}

bool TestedConfigStore::is_bound_to(const FeatureModel& model) const noexcept {
    return model.version() == model_version_ && model.fingerprint() == model_fingerprint_;
}

void TestedConfigStore::require_binding(const FeatureModel& model) const {
    if (model.version() != model_version_) {
        throw StoreError(StoreError::Kind::VersionMismatch,
                         "tested store is bound to model version " + std::to_string(model_version_) +
                             ", not " + std::to_string(model.version()));
    }
    if (model.fingerprint() != model_fingerprint_) {
        throw StoreError(StoreError::Kind::VersionMismatch,
                         "tested store was built for a different model with version " +
                             std::to_string(model_version_));
    }
}

std::vector<LevelKey> TestedConfigStore::encode(const FeatureModel& model, const CanonicalConfig& config) const {
    std::vector<char> mask(model.size(), 0);
    for (FeatureIndex i : config.features) {
        mask[i] = 1;
    }
    std::vector<LevelKey> path;
    path.reserve(levels_.size());
    for (const Level& level : levels_) {
        LevelKey key;
        if (mask[level.parent]) {
            key.active = true;
            const IndexedGroup& g = model.groups(level.parent)[level.group];
            for (std::uint32_t m = 0; m < g.members.size(); ++m) {
                if (mask[g.members[m]] && (g.kind != GroupKind::And || g.optional[m])) {
                    key.chosen.push_back(m);
                }
            }
        }
        path.push_back(std::move(key));
    }
    return path;
}

CanonicalConfig TestedConfigStore::decode(const FeatureModel& model, const std::vector<LevelKey>& path) const {
    std::vector<char> mask(model.size(), 0);
    mask[0] = 1;
    std::size_t cursor = 0;
    for (FeatureIndex i = 0; i < model.size(); ++i) {
        for (const IndexedGroup& g : model.groups(i)) {
            if (!g.has_choice()) {
                if (mask[i]) {
                    for (FeatureIndex m : g.members) {
                        mask[m] = 1;
                    }
                }
                continue;
            }
            const LevelKey& key = path.at(cursor++);
            if (!mask[i]) {
                continue;
            }
            for (std::size_t m = 0; m < g.members.size(); ++m) {
                if (g.kind == GroupKind::And && !g.optional[m]) {
                    mask[g.members[m]] = 1;
                }
            }
            for (std::uint32_t pos : key.chosen) {
                mask[g.members.at(pos)] = 1;
            }
        }
    }
    CanonicalConfig out;
    for (FeatureIndex i = 0; i < model.size(); ++i) {
        if (mask[i]) {
            out.features.push_back(i);
        }
    }
    return out;
}

bool TestedConfigStore::insert(const FeatureModel& model, const Configuration& config) {
    require_binding(model);
    const ValidationResult v = validate_configuration(model, config);
    if (!v.valid()) {
        throw StoreError(StoreError::Kind::InvalidConfiguration,
                         "cannot record an invalid configuration: " + v.unknown->detail);
    }
    return insert(model, *v.canonical);
}

bool TestedConfigStore::insert(const FeatureModel& model, const CanonicalConfig& config) {
    require_binding(model);
    std::vector<char> mask(model.size(), 0);
    for (FeatureIndex i : config.features) {
        mask.at(i) = 1;
    }
    if (auto violation = find_violation(model, mask)) {
        throw StoreError(StoreError::Kind::InvalidConfiguration,
                         "cannot record an invalid configuration: " + *violation);
    }
    const std::vector<LevelKey> path = encode(model, config);

    std::unique_lock lock(mutex_);
    std::uint32_t node = 0;
    for (const LevelKey& key : path) {
        auto& children = nodes_[node].children;
        auto it = std::lower_bound(children.begin(), children.end(), key,
                                   [](const auto& child, const LevelKey& k) { return child.first < k; });
        if (it != children.end() && it->first == key) {
            node = it->second;
            continue;
        }
        const auto next = static_cast<std::uint32_t>(nodes_.size());
        children.insert(it, {key, next});
        nodes_.emplace_back();
        node = next;
    }
    if (nodes_[node].terminal) {
        return false;
    }
    nodes_[node].terminal = true;
    ++size_;
    return true;
}

bool TestedConfigStore::contains_path(const std::vector<LevelKey>& path) const {
    std::shared_lock lock(mutex_);
    std::uint32_t node = 0;
    for (const LevelKey& key : path) {
        const auto& children = nodes_[node].children;
        auto it = std::lower_bound(children.begin(), children.end(), key,
                                   [](const auto& child, const LevelKey& k) { return child.first < k; });
        if (it == children.end() || !(it->first == key)) {
            return false;
        }
        node = it->second;
    }
    return nodes_[node].terminal;
}

bool TestedConfigStore::contains(const FeatureModel& model, const Configuration& config) const {
    require_binding(model);
    const auto canonical = canonicalize(model, config);
    return canonical && contains(model, *canonical);
}

bool TestedConfigStore::contains(const FeatureModel& model, const CanonicalConfig& config) const {
    require_binding(model);
    return contains_path(encode(model, config));
}

std::vector<CanonicalConfig> TestedConfigStore::entries(const FeatureModel& model) const {
    require_binding(model);
    std::shared_lock lock(mutex_);
    std::vector<CanonicalConfig> out;
    std::vector<LevelKey> path;
    auto walk = [&](auto&& self, std::uint32_t node) -> void {
        if (nodes_[node].terminal) {
            out.push_back(decode(model, path));
        }
        for (const auto& [key, child] : nodes_[node].children) {
            path.push_back(key);
            self(self, child);
            path.pop_back();
        }
    };
    if (size_ > 0) {
        walk(walk, 0);
    }
    return out;
}

std::vector<std::uint8_t> TestedConfigStore::snapshot() const {
    std::shared_lock lock(mutex_);
    std::vector<std::uint8_t> payload;
    auto write = [&](auto&& self, std::uint32_t node) -> void {
        put_varint(payload, nodes_[node].children.size());
        for (const auto& [key, child] : nodes_[node].children) {
            put_varint(payload, key.active ? key.chosen.size() + 1 : 0);
            for (std::uint32_t pos : key.chosen) {
                put_varint(payload, pos);
            }
            self(self, child);
        }
    };
    if (size_ > 0) {
        write(write, 0);
    }

    std::vector<std::uint8_t> out;
    out.reserve(kHeaderSize + payload.size());
    for (std::uint8_t b : kMagic) {
        out.push_back(b);
    }
    put_le(out, kFormatVersion, 2);
    put_le(out, 0, 2);
    put_le(out, model_version_, 8);
    put_le(out, model_fingerprint_, 8);
    put_le(out, levels_.size(), 4);
    put_le(out, size_, 8);
    put_le(out, payload.size(), 4);
    put_le(out, crc_of(out, payload), 4);
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

TestedConfigStore TestedConfigStore::restore(std::span<const std::uint8_t> bytes, const FeatureModel& model) {
    if (bytes.size() < kHeaderSize) {
        corrupt("truncated header");
    }
    if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
        corrupt("bad magic");
    }
    const std::uint64_t payload_size = get_le(bytes, 36, 4);
    if (bytes.size() != kHeaderSize + payload_size) {
        corrupt("payload length does not match snapshot size");
    }
    const auto payload = bytes.subspan(kHeaderSize);
    if (crc_of(bytes.first(40), payload) != get_le(bytes, 40, 4)) {
        throw StoreError(StoreError::Kind::ChecksumMismatch, "tested-configuration snapshot checksum mismatch");
    }
    if (get_le(bytes, 4, 2) != kFormatVersion) {
        corrupt("unsupported format version " + std::to_string(get_le(bytes, 4, 2)));
    }
    const std::uint64_t version = get_le(bytes, 8, 8);
    const std::uint64_t fingerprint = get_le(bytes, 16, 8);
    if (version != model.version() || fingerprint != model.fingerprint()) {
        throw StoreError(StoreError::Kind::VersionMismatch,
                         "snapshot is for model version " + std::to_string(version) + ", ambient model is " +
                             std::to_string(model.version()));
    }
    TestedConfigStore store(model);
    if (get_le(bytes, 24, 4) != store.levels_.size()) {
        corrupt("level count does not match model");
    }
    const std::uint64_t expected_size = get_le(bytes, 28, 8);
    if (expected_size == 0) {
        if (!payload.empty()) {
            corrupt("payload present for empty store");
        }
        return store;
    }

    PayloadReader in(payload);
    const std::size_t depth_limit = store.levels_.size();
    auto read = [&](auto&& self, std::uint32_t node, std::size_t depth) -> void {
        const std::uint64_t children = in.varint();
        if (depth == depth_limit) {
            if (children != 0) {
                corrupt("terminal node with children");
            }
            store.nodes_[node].terminal = true;
            ++store.size_;
            return;
        }
        if (children == 0) {
            corrupt("dangling trie branch");
        }
        const Level& level = store.levels_[depth];
        const IndexedGroup& g = model.groups(level.parent)[level.group];
        for (std::uint64_t c = 0; c < children; ++c) {
            LevelKey key;
            const std::uint64_t tag = in.varint();
            key.active = tag != 0;
            if (tag > g.members.size() + 1) {
                corrupt("level key larger than its group");
            }
            for (std::uint64_t k = 1; k < tag; ++k) {
                const std::uint64_t pos = in.varint();
                if (pos >= g.members.size() || (!key.chosen.empty() && pos <= key.chosen.back())) {
                    corrupt("invalid member position");
                }
                key.chosen.push_back(static_cast<std::uint32_t>(pos));
            }
            auto& siblings = store.nodes_[node].children;
            if (!siblings.empty() && !(siblings.back().first < key)) {
                corrupt("level keys out of order");
            }
            const auto next = static_cast<std::uint32_t>(store.nodes_.size());
            siblings.push_back({std::move(key), next});
            store.nodes_.emplace_back();
            self(self, next, depth + 1);
        }
    };
    read(read, 0, 0);
    if (!in.done()) {
        corrupt("trailing bytes after node records");
    }
    if (store.size_ != expected_size) {
        corrupt("configuration count does not match node records");
    }
    return store;
}

std::string TestedConfigStore::dump(const FeatureModel& model) const {
    std::vector<std::string> lines;
    for (const CanonicalConfig& c : entries(model)) {
        std::string line;
        for (FeatureIndex i : frontier(model, c)) {
            line += (line.empty() ? "" : ", ") + model.feature(i).id;
        }
        lines.push_back(std::move(line));
    }
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}

TestedConfigStore TestedConfigStore::migrate(const TestedConfigStore& old_store, const FeatureModel& old_model,
                                             const FeatureModel& new_model) {
    TestedConfigStore migrated(new_model);
    for (const CanonicalConfig& c : old_store.entries(old_model)) {
        const ValidationResult v = validate_configuration(new_model, to_configuration(old_model, c));
        if (v.valid()) {
            migrated.insert(new_model, *v.canonical);
        }
    }
    return migrated;
}

Classification classify(const FeatureModel& model, const TestedConfigStore& store, const Configuration& config) {
    store.require_binding(model);
    const ValidationResult v = validate_configuration(model, config);
    if (!v.valid()) {
        return {Verdict::Unknown, v.unknown};
    }
    return {store.contains(model, *v.canonical) ? Verdict::Tested : Verdict::Untested, std::nullopt};
}

}  // namespace invivo
