#include "rfbarrier/config.hpp"

#include "json_codec.hpp"
#include "rfbarrier/error.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fmt/format.h>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <yaml-cpp/yaml.h>

namespace rfbarrier {

using codec::Json;

namespace {

Json scalar_to_json(const YAML::Node& node) {
    const std::string& s = node.Scalar();
    if (node.Tag() == "!") // quoted
        return s;
    if (s == "true" || s == "True" || s == "TRUE")
        return true;
    if (s == "false" || s == "False" || s == "FALSE")
        return false;
    if (s.empty() || s == "~" || s == "null" || s == "Null" || s == "NULL")
        return nullptr;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (s.front() == '-') {
        std::int64_t v{};
        if (auto r = std::from_chars(first, last, v); r.ec == std::errc{} && r.ptr == last)
            return v;
    } else {
        std::uint64_t v{};
        if (auto r = std::from_chars(first, last, v); r.ec == std::errc{} && r.ptr == last)
            return v;
    }
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (end == s.c_str() + s.size())
        return d;
    return s;
}

Json yaml_to_json(const YAML::Node& node) {
    switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
        return nullptr;
    case YAML::NodeType::Scalar:
        return scalar_to_json(node);
    case YAML::NodeType::Sequence: {
        Json out = Json::array();
        for (const auto& item : node)
            out.push_back(yaml_to_json(item));
        return out;
    }
    case YAML::NodeType::Map: {
        Json out = Json::object();
        for (const auto& kv : node)
            out[kv.first.as<std::string>()] = yaml_to_json(kv.second);
        return out;
    }
    }
    return nullptr;
}

void require_keys(const Json& j, const std::string& section, std::initializer_list<const char*> allowed) {
    if (!j.is_object())
        throw ConfigError(fmt::format("config section '{}' must be a mapping", section));
    for (auto it = j.begin(); it != j.end(); ++it) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* k) { return it.key() == k; });
        if (!known)
            throw ConfigError(fmt::format("unknown key '{}' in config section '{}'", it.key(), section));
    }
}

const Json empty_object = Json::object();

const Json& section(const Json& root, const char* name) {
    auto it = root.find(name);
    return it == root.end() || it->is_null() ? empty_object : *it;
}

VehicleMix mix_from(const Json& j) {
    if (j.is_array())
        return codec::mix_from_json(j);
    if (!j.is_object())
        throw ConfigError("config 'mix' must map vehicle types to counts");
    VehicleMix mix;
    for (auto type : all_vehicle_types) {
        auto it = j.find(std::string(to_string(type)));
        if (it != j.end())
            mix.emplace_back(type, it->get<int>());
    }
    for (auto it = j.begin(); it != j.end(); ++it)
        parse_vehicle_type(it.key()); // reject unknown names
    return mix;
}

RunConfig from_json(const Json& root) {
    require_keys(root, "<root>",
                 {"seed", "layout", "channel", "antenna", "simulation", "vehicles", "mix", "detection",
                  "features", "learner", "cv"});
    RunConfig c;
    if (auto it = root.find("seed"); it != root.end())
        c.seed = it->get<std::uint64_t>();

    const Json& layout = section(root, "layout");
    require_keys(layout, "layout",
                 {"nodes_per_side", "spacing", "road_width", "tx_height", "rx_height", "topology"});
    c.layout = codec::layout_from_json(layout);

    const Json& channel = section(root, "channel");
    require_keys(channel, "channel",
                 {"frequency_hz", "tx_power_dbm", "ground_reflection", "reflection_magnitude",
                  "reflection_phase_rad", "noise_sigma_db", "rssi_floor_dbm"});
    c.channel = codec::channel_from_json(channel);

    const Json& antenna = section(root, "antenna");
    require_keys(antenna, "antenna",
                 {"kind", "peak_gain_dbi", "downtilt_deg", "azimuth_beamwidth_deg",
                  "elevation_beamwidth_deg"});
    c.antenna = codec::antenna_from_json(antenna);

    const Json& sim = section(root, "simulation");
    require_keys(sim, "simulation",
                 {"dt", "lane_jitter", "pre_roll", "post_roll", "approach_margin", "speeds"});
    c.simulation = codec::simulation_from_json(sim);

    if (auto it = root.find("vehicles"); it != root.end()) {
        if (!it->is_array())
            throw ConfigError("config 'vehicles' must be a list of vehicle definitions");
        for (const auto& spec : *it) {
            require_keys(spec, "vehicles", {"type", "width", "segments"});
            VehicleSpec v = codec::vehicle_from_json(spec);
            auto slot = std::find_if(c.catalog.begin(), c.catalog.end(),
                                     [&](const VehicleSpec& e) { return e.type == v.type; });
            *slot = v;
        }
    }
    if (auto it = root.find("mix"); it != root.end())
        c.mix = mix_from(*it);

    const Json& det = section(root, "detection");
    require_keys(det, "detection", {"drop_threshold", "release_threshold", "min_duration", "baseline_window"});
    c.detection = codec::detection_from_json(det);

    const Json& feat = section(root, "features");
    require_keys(feat, "features", {"resample_points", "links", "include_length", "include_rssi"});
    c.features = codec::features_from_json(feat);

    const Json& learner = section(root, "learner");
    require_keys(learner, "learner", {"kind", "k", "kernel", "gamma", "c", "tolerance", "max_iterations"});
    c.learner = codec::learner_from_json(learner);

    const Json& cv = section(root, "cv");
    require_keys(cv, "cv", {"folds", "stratified"});
    c.folds = cv.value("folds", c.folds);
    c.stratified = cv.value("stratified", c.stratified);
    return c;
}

} // namespace

void RunConfig::validate() const {
    channel.validate();
    antenna.validate();
    simulation.validate();
    detection.validate();
    features.validate();
    for (const auto& v : catalog)
        v.validate();
    (void)build_layout(layout);
    if (detection.min_duration < simulation.dt)
        throw ConfigError("detection min_duration must be at least one sample interval");
    if (learner.k < 1)
        throw ConfigError("learner k must be at least 1");
    if (!(learner.svm.c > 0.0) || !(learner.svm.tolerance > 0.0))
        throw ConfigError("SVM C and tolerance must be positive");
    if (folds < 2)
        throw ConfigError("cross-validation needs at least two folds");
}

Scenario RunConfig::scenario() const { return Scenario::make(layout, channel, antenna); }

RunConfig parse_config(const std::string& text, const std::string& origin) {
    Json root;
    try {
        root = yaml_to_json(YAML::Load(text));
    } catch (const YAML::Exception& e) {
        throw ConfigError(fmt::format("{}: {}", origin, e.what()));
    }
    if (root.is_null())
        root = Json::object();
    if (root.is_object() && root.contains("config") && root.contains("command"))
        root = root.at("config");
    RunConfig c;
    try {
        c = from_json(root);
    } catch (const Error& e) {
        throw ConfigError(fmt::format("{}: {}", origin, e.what()));
    } catch (const std::exception& e) {
        throw ConfigError(fmt::format("{}: invalid value: {}", origin, e.what()));
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::string& path) {
    if (path.empty() || path == "default") {
        RunConfig c;
        c.validate();
        return c;
    }
    std::ifstream in(path);
    if (!in)
        throw ConfigError(fmt::format("cannot open config file '{}'", path));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

std::string config_to_json(const RunConfig& c) {
    Json j;
    j["seed"] = c.seed;
    j["layout"] = codec::to_json(c.layout);
    j["channel"] = codec::to_json(c.channel);
    j["antenna"] = codec::to_json(c.antenna);
    j["simulation"] = codec::to_json(c.simulation);
    j["vehicles"] = codec::to_json(c.catalog);
    j["mix"] = codec::to_json(c.mix);
    j["detection"] = codec::to_json(c.detection);
    j["features"] = codec::to_json(c.features);
    j["learner"] = codec::to_json(c.learner);
    j["cv"] = Json{{"folds", c.folds}, {"stratified", c.stratified}};
    return codec::dump17(j);
}

} // namespace rfbarrier
