#include "fixtures.hpp"
#include "oracles.hpp"

#include "invivo/counting.hpp"
#include "invivo/synthetic.hpp"
#include "invivo/tested_store.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <thread>

using namespace invivo;

namespace {

TestedConfigStore seeded(const FeatureModel& m) {
    TestedConfigStore store(m);
    for (char os : {'N', 'O', 'P'}) {
        store.insert(m, fixtures::tested_tuple(os));
    }
    return store;
}

oracle::Selection selection_of(const FeatureModel& m, const CanonicalConfig& c) {
    oracle::Selection s;
    for (FeatureIndex f : c.features) {
        s.insert(m.feature(f).id);
    }
    return s;
}

StoreError::Kind restore_error(const std::vector<std::uint8_t>& bytes, const FeatureModel& m) {
    try {
        TestedConfigStore::restore(bytes, m);
    } catch (const StoreError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "snapshot accepted";
    return StoreError::Kind::Corrupt;
}

}  // namespace

TEST(TestedStore, ThreeTuplesGiveSizeThree) {
    const FeatureModel m = fixtures::chatapp();
    const TestedConfigStore store = seeded(m);
    EXPECT_EQ(store.size(), 3u);
    EXPECT_TRUE(store.contains(m, fixtures::tested_tuple('O')));
    EXPECT_FALSE(store.contains(m, fixtures::sony_tuple()));
    EXPECT_FALSE(store.contains(m, fixtures::xiaomi_tuple()));
}

TEST(TestedStore, InsertIsIdempotent) {
    const FeatureModel m = fixtures::chatapp();
    TestedConfigStore store(m);
    EXPECT_TRUE(store.insert(m, fixtures::tested_tuple('N')));
    EXPECT_FALSE(store.insert(m, fixtures::tested_tuple('N')));
    EXPECT_EQ(store.size(), 1u);
}

TEST(TestedStore, InvalidInsertRejected) {
    const FeatureModel m = fixtures::chatapp();
    TestedConfigStore store(m);
    const Configuration bad{"DeviceConfig.OS.O", "DeviceConfig.DeviceModel.LG", "DeviceConfig.CameraApp.Default.LGCam",
                            "DeviceConfig.CameraApp.Other.GoogleCamera.v4_x", "AppPrefs.Upload.OnWifi",
                            "AppPrefs.Backup.No"};
    try {
        store.insert(m, bad);
        FAIL() << "invalid configuration stored";
    } catch (const StoreError& e) {
        EXPECT_EQ(e.kind(), StoreError::Kind::InvalidConfiguration);
    }
    EXPECT_EQ(store.size(), 0u);
}

TEST(TestedStore, EmptyStoreContainsNothing) {
    const FeatureModel m = fixtures::chatapp();
    const TestedConfigStore store(m);
    EXPECT_FALSE(store.contains(m, fixtures::tested_tuple('N')));
    EXPECT_TRUE(store.entries(m).empty());
}

TEST(TestedStore, FailsClosedOnOtherModel) {
    const FeatureModel m = fixtures::chatapp();
    const FeatureModel v2 = fixtures::chatapp_xiaomi();
    TestedConfigStore store = seeded(m);
    EXPECT_THROW(store.contains(v2, fixtures::tested_tuple('N')), StoreError);
    EXPECT_THROW(store.insert(v2, fixtures::tested_tuple('N')), StoreError);
    EXPECT_THROW(store.entries(v2), StoreError);
    EXPECT_THROW(store.dump(v2), StoreError);
    EXPECT_THROW(classify(v2, store, fixtures::tested_tuple('N')), StoreError);
    // Same version number, different content.
    EXPECT_THROW(store.contains(v2.with_version(1), fixtures::tested_tuple('N')), StoreError);
}

TEST(TestedStore, MigrateKeepsStillValidEntries) {
    const FeatureModel m = fixtures::chatapp();
    const FeatureModel v2 = fixtures::chatapp_xiaomi();
    const TestedConfigStore migrated = TestedConfigStore::migrate(seeded(m), m, v2);
    EXPECT_EQ(migrated.model_version(), 2u);
    EXPECT_EQ(migrated.size(), 3u);
    EXPECT_TRUE(migrated.contains(v2, fixtures::tested_tuple('P')));
}

TEST(TestedStore, DumpIsSortedFrontierLines) {
    const FeatureModel m = fixtures::chatapp();
    EXPECT_EQ(seeded(m).dump(m),
              "DeviceConfig.OS.N, DeviceConfig.CameraApp.Default.LGCam, DeviceConfig.DeviceModel.LG, "
              "AppPrefs.Upload.OnWifi, AppPrefs.Backup.No\n"
              "DeviceConfig.OS.O, DeviceConfig.CameraApp.Default.LGCam, DeviceConfig.DeviceModel.LG, "
              "AppPrefs.Upload.OnWifi, AppPrefs.Backup.No\n"
              "DeviceConfig.OS.P, DeviceConfig.CameraApp.Default.LGCam, DeviceConfig.DeviceModel.LG, "
              "AppPrefs.Upload.OnWifi, AppPrefs.Backup.No\n");
}

TEST(Classify, GoldenTriple) {
    const FeatureModel m = fixtures::chatapp();
    const TestedConfigStore store = seeded(m);
    for (char os : {'N', 'O', 'P'}) {
        EXPECT_EQ(classify(m, store, fixtures::tested_tuple(os)).verdict, Verdict::Tested);
    }
    EXPECT_EQ(classify(m, store, fixtures::sony_tuple()).verdict, Verdict::Untested);
    const Classification unknown = classify(m, store, fixtures::xiaomi_tuple());
    EXPECT_EQ(unknown.verdict, Verdict::Unknown);
    ASSERT_TRUE(unknown.reason.has_value());
    EXPECT_EQ(unknown.reason->kind, UnknownReason::Kind::UnrecognizedFeature);
}

TEST(Classify, EmptyStoreGivesUntested) {
    const FeatureModel m = fixtures::chatapp();
    EXPECT_EQ(classify(m, TestedConfigStore(m), fixtures::tested_tuple('N')).verdict, Verdict::Untested);
}

TEST(ClassifyProperty, PermutationInvariantAndNeverTestedWhenInvalid) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 60; ++trial) {
        const FeatureModel m = oracle::random_model(rng, {16, 3});
        const auto valid = oracle::enumerate_valid(m);
        TestedConfigStore store(m);
        for (std::size_t i = 0; i < valid.size(); i += 2) {
            store.insert(m, Configuration(std::vector<std::string>(valid[i].begin(), valid[i].end())));
        }
        for (int draw = 0; draw < 200; ++draw) {
            std::vector<std::string> names;
            for (const Feature& f : m.features()) {
                if (rng() % 3 == 0) {
                    names.push_back(f.id);
                }
            }
            const Classification c = classify(m, store, Configuration(names));
            if (!validate_configuration(m, Configuration(names)).valid()) {
                ASSERT_EQ(c.verdict, Verdict::Unknown);
            }
            std::shuffle(names.begin(), names.end(), rng);
            ASSERT_EQ(classify(m, store, Configuration(names)).verdict, c.verdict);
        }
    }
}

TEST(Snapshot, RoundTripIsObservationallyEqual) {
    const FeatureModel m = fixtures::chatapp();
    const TestedConfigStore store = seeded(m);
    const auto bytes = store.snapshot();
    const TestedConfigStore back = TestedConfigStore::restore(bytes, m);
    EXPECT_EQ(back.size(), 3u);
    EXPECT_EQ(back.model_version(), 1u);
    EXPECT_EQ(back.entries(m), store.entries(m));
    EXPECT_EQ(back.snapshot(), bytes);
}

TEST(Snapshot, EmptyStoreIsHeaderOnly) {
    const FeatureModel m = fixtures::chatapp();
    const auto bytes = TestedConfigStore(m).snapshot();
    EXPECT_EQ(bytes.size(), TestedConfigStore::kHeaderSize);
    EXPECT_EQ(TestedConfigStore::restore(bytes, m).size(), 0u);
}

TEST(Snapshot, HeaderLayout) {
    const FeatureModel m = fixtures::chatapp();
    const auto bytes = seeded(m).snapshot();
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "IVTS");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[5], 0);
    EXPECT_EQ(bytes[8], 1);  // model version
    EXPECT_EQ(bytes[28], 3);  // configuration count
    EXPECT_EQ(bytes.size(), TestedConfigStore::kHeaderSize + bytes[36]);
}

TEST(Snapshot, FlippedByteFailsChecksum) {
    const FeatureModel m = fixtures::chatapp();
    const auto bytes = seeded(m).snapshot();
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        if (i >= 36 && i < 40) {
            continue;  // payload length is checked before the checksum
        }
        auto flipped = bytes;
        flipped[i] ^= 0x10;
        const StoreError::Kind kind = restore_error(flipped, m);
        EXPECT_TRUE(kind == StoreError::Kind::ChecksumMismatch || kind == StoreError::Kind::Corrupt) << "byte " << i;
    }
    auto flipped = bytes;
    flipped.back() ^= 1;
    EXPECT_EQ(restore_error(flipped, m), StoreError::Kind::ChecksumMismatch);
}

TEST(Snapshot, TruncationRejected) {
    const FeatureModel m = fixtures::chatapp();
    const auto bytes = seeded(m).snapshot();
    for (std::size_t len = 0; len < bytes.size(); ++len) {
        EXPECT_EQ(restore_error({bytes.begin(), bytes.begin() + static_cast<long>(len)}, m), StoreError::Kind::Corrupt);
    }
}

TEST(Snapshot, OtherModelVersionRejected) {
    const FeatureModel m = fixtures::chatapp();
    const auto bytes = seeded(m).snapshot();
    EXPECT_EQ(restore_error(bytes, fixtures::chatapp_xiaomi()), StoreError::Kind::VersionMismatch);
    EXPECT_EQ(restore_error(bytes, m.with_version(5)), StoreError::Kind::VersionMismatch);
}

TEST(StoreProperty, AgreesWithNaiveSetOracle) {
    std::mt19937_64 rng(9);
    std::size_t ops = 0;
    while (ops < 10000) {
        const FeatureModel m = oracle::random_model(rng, {18, 3});
        const auto valid = oracle::enumerate_valid(m);
        if (valid.empty()) {
            continue;
        }
        TestedConfigStore store(m);
        oracle::NaiveStore naive;
        for (int k = 0; k < 500; ++k, ++ops) {
            const oracle::Selection& s = valid[rng() % valid.size()];
            const Configuration c(std::vector<std::string>(s.begin(), s.end()));
            if (rng() % 2) {
                ASSERT_EQ(store.insert(m, c), naive.insert(s));
            } else {
                ASSERT_EQ(store.contains(m, c), naive.contains(s));
            }
            ASSERT_EQ(store.size(), naive.size());
        }
        for (const CanonicalConfig& c : store.entries(m)) {
            ASSERT_TRUE(naive.contains(selection_of(m, c)));
        }
        const auto bytes = store.snapshot();
        const TestedConfigStore back = TestedConfigStore::restore(bytes, m);
        ASSERT_EQ(back.snapshot(), bytes);
        for (const auto& s : valid) {
            ASSERT_EQ(back.contains(m, Configuration(std::vector<std::string>(s.begin(), s.end()))), naive.contains(s));
        }
    }
}

TEST(StoreProperty, SnapshotIsInsertionOrderIndependent) {
    const FeatureModel m = fixtures::chatapp();
    auto valid = oracle::enumerate_valid(m);
    std::mt19937_64 rng(12);
    TestedConfigStore a(m);
    TestedConfigStore b(m);
    for (const auto& s : valid) {
        a.insert(m, Configuration(std::vector<std::string>(s.begin(), s.end())));
    }
    std::shuffle(valid.begin(), valid.end(), rng);
    for (const auto& s : valid) {
        b.insert(m, Configuration(std::vector<std::string>(s.begin(), s.end())));
    }
    EXPECT_EQ(a.snapshot(), b.snapshot());
}

TEST(StoreProperty, SharedPrefixesCompressBelowNaiveEncoding) {
    const FeatureModel m = make_synthetic_model({});
    ConfigurationSampler sampler(m);
    std::mt19937_64 rng(13);
    // One device-like prefix shared by all entries: the first categories fixed,
    // only the last category varies.
    const CanonicalConfig base = sampler.sample(rng);
    TestedConfigStore store(m);
    oracle::NaiveStore naive;
    const FeatureIndex last_category = m.groups(0)[0].members.back();
    while (store.size() < 1000) {
        const CanonicalConfig other = sampler.sample(rng);
        std::vector<char> mask(m.size(), 0);
        for (FeatureIndex f : base.features) {
            mask[f] = f < last_category;
        }
        for (FeatureIndex f : other.features) {
            mask[f] = mask[f] || f >= last_category || f == 0;
        }
        CanonicalConfig mixed;
        for (FeatureIndex f = 0; f < m.size(); ++f) {
            if (mask[f]) {
                mixed.features.push_back(f);
            }
        }
        if (find_violation(m, mask)) {
            continue;
        }
        store.insert(m, mixed);
        naive.insert(selection_of(m, mixed));
    }
    const auto trie_bytes = store.snapshot().size();
    const auto naive_bytes = naive.snapshot(m).size();
    EXPECT_LT(trie_bytes, naive_bytes);
    RecordProperty("trie_bytes", static_cast<int>(trie_bytes));
    RecordProperty("naive_bytes", static_cast<int>(naive_bytes));
}

TEST(StoreConcurrency, ReadersNeverSeePartialInserts) {
    const FeatureModel m = fixtures::chatapp();
    const auto valid = oracle::enumerate_valid(m);
    TestedConfigStore store(m);
    std::atomic<bool> done{false};
    std::atomic<std::size_t> bad{0};
    std::vector<std::thread> readers;
    for (int r = 0; r < 4; ++r) {
        readers.emplace_back([&] {
            while (!done) {
                const std::size_t before = store.size();
                const auto entries = store.entries(m);
                const std::size_t after = store.size();
                if (entries.size() < before || entries.size() > after) {
                    ++bad;
                }
                for (const auto& e : entries) {
                    std::vector<char> mask(m.size(), 0);
                    for (FeatureIndex f : e.features) {
                        mask[f] = 1;
                    }
                    if (find_violation(m, mask)) {
                        ++bad;
                    }
                }
            }
        });
    }
    for (const auto& s : valid) {
        store.insert(m, Configuration(std::vector<std::string>(s.begin(), s.end())));
    }
    done = true;
    for (auto& t : readers) {
        t.join();
    }
    EXPECT_EQ(bad.load(), 0u);
    EXPECT_EQ(store.size(), valid.size());
}
