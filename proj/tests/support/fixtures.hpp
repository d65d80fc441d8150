#pragma once

#include "invivo/configuration.hpp"
#include "invivo/feature_model.hpp"

#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace invivo {

// Readable failure messages in GoogleTest assertions.
inline void PrintTo(const FeatureModel& m, std::ostream* os) { *os << "\n" << to_document(m); }
inline void PrintTo(const Feature& f, std::ostream* os) { *os << f.id; }

}  // namespace invivo

namespace fixtures {

inline std::string path(const std::string& name) { return std::string(INVIVO_FIXTURES) + "/" + name; }

inline std::string read(const std::string& name) {
    std::ifstream in(path(name), std::ios::binary);
    if (!in) {
        throw std::runtime_error("missing fixture " + name);
    }
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline invivo::FeatureModel chatapp() { return invivo::parse_model(read("chatapp.fm")); }
inline invivo::FeatureModel chatapp_xiaomi() { return invivo::parse_model(read("chatapp_xiaomi.fm")); }

inline invivo::Configuration tested_tuple(char os) {
    return {std::string("DeviceConfig.OS.") + os, "DeviceConfig.DeviceModel.LG", "DeviceConfig.CameraApp.Default.LGCam",
            "AppPrefs.Upload.OnWifi", "AppPrefs.Backup.No"};
}

inline invivo::Configuration sony_tuple() { return invivo::parse_configuration(read("config_untested.txt")); }
inline invivo::Configuration xiaomi_tuple() { return invivo::parse_configuration(read("config_unknown.txt")); }

}  // namespace fixtures
