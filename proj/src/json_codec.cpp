#include "json_codec.hpp"

#include "rfbarrier/error.hpp"

#include <fmt/format.h>

namespace rfbarrier::codec {

namespace {

void dump_into(std::string& out, const Json& v) {
    switch (v.type()) {
    case Json::value_t::object: {
        out += '{';
        bool first = true;
        for (auto it = v.begin(); it != v.end(); ++it) {
            if (!first)
                out += ',';
            first = false;
            out += Json(it.key()).dump();
            out += ':';
            dump_into(out, it.value());
        }
        out += '}';
        break;
    }
    case Json::value_t::array: {
        out += '[';
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i)
                out += ',';
            dump_into(out, v[i]);
        }
        out += ']';
        break;
    }
    case Json::value_t::number_float:
        out += fmt::format("{:.17g}", v.get<double>());
        break;
    default:
        out += v.dump();
    }
}

std::string_view topology_name(Topology t) { return t == Topology::adjacent ? "adjacent" : "full_mesh"; }

Topology parse_topology(const std::string& name) {
    if (name == "full_mesh")
        return Topology::full_mesh;
    if (name == "adjacent")
        return Topology::adjacent;
    throw ConfigError(fmt::format("unknown topology '{}'", name));
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
    auto it = j.find(key);
    return it == j.end() ? fallback : it->template get<T>();
}

} // namespace

std::string dump17(const Json& value) {
    std::string out;
    dump_into(out, value);
    return out;
}

Json to_json(const LayoutConfig& c) {
    return Json{{"nodes_per_side", c.nodes_per_side}, {"spacing", c.spacing},
                {"road_width", c.road_width},         {"tx_height", c.tx_height},
                {"rx_height", c.rx_height},           {"topology", topology_name(c.topology)}};
}

Json to_json(const ChannelConfig& c) {
    return Json{{"frequency_hz", c.frequency_hz},
                {"tx_power_dbm", c.tx_power_dbm},
                {"ground_reflection", c.ground_reflection},
                {"reflection_magnitude", c.reflection.magnitude},
                {"reflection_phase_rad", c.reflection.phase_rad},
                {"noise_sigma_db", c.noise_sigma_db},
                {"rssi_floor_dbm", c.rssi_floor_dbm}};
}

Json to_json(const AntennaPattern& p) {
    return Json{{"kind", p.kind == AntennaKind::omni ? "omni" : "directional"},
                {"peak_gain_dbi", p.peak_gain_dbi},
                {"downtilt_deg", p.downtilt_deg},
                {"azimuth_beamwidth_deg", p.azimuth_beamwidth_deg},
                {"elevation_beamwidth_deg", p.elevation_beamwidth_deg}};
}

Json to_json(const SimulationConfig& c) {
    Json speeds = Json::object();
    for (auto type : all_vehicle_types) {
        const auto& r = c.speed_for(type);
        speeds[std::string(to_string(type))] = Json::array({r.min_mps, r.max_mps});
    }
    return Json{{"dt", c.dt},
                {"lane_jitter", c.lane_jitter},
                {"pre_roll", c.pre_roll},
                {"post_roll", c.post_roll},
                {"approach_margin", c.approach_margin},
                {"speeds", speeds}};
}

Json to_json(const VehicleSpec& v) {
    Json segments = Json::array();
    for (const auto& s : v.segments)
        segments.push_back(Json{{"length", s.length},
                                {"top_height", s.top_height},
                                {"ground_clearance", s.ground_clearance},
                                {"gap_after", s.gap_after}});
    return Json{{"type", to_string(v.type)}, {"width", v.width}, {"segments", segments}};
}

Json to_json(const VehicleCatalog& catalog) {
    Json out = Json::array();
    for (const auto& v : catalog)
        out.push_back(to_json(v));
    return out;
}

Json to_json(const VehicleMix& mix) {
    Json out = Json::array();
    for (const auto& [type, count] : mix)
        out.push_back(Json::array({to_string(type), count}));
    return out;
}

LayoutConfig layout_from_json(const Json& j) {
    LayoutConfig c;
    c.nodes_per_side = get_or(j, "nodes_per_side", c.nodes_per_side);
    c.spacing = get_or(j, "spacing", c.spacing);
    c.road_width = get_or(j, "road_width", c.road_width);
    c.tx_height = get_or(j, "tx_height", c.tx_height);
    c.rx_height = get_or(j, "rx_height", c.rx_height);
    c.topology = parse_topology(get_or<std::string>(j, "topology", "full_mesh"));
    return c;
}

ChannelConfig channel_from_json(const Json& j) {
    ChannelConfig c;
    c.frequency_hz = get_or(j, "frequency_hz", c.frequency_hz);
    c.tx_power_dbm = get_or(j, "tx_power_dbm", c.tx_power_dbm);
    c.ground_reflection = get_or(j, "ground_reflection", c.ground_reflection);
    c.reflection.magnitude = get_or(j, "reflection_magnitude", c.reflection.magnitude);
    c.reflection.phase_rad = get_or(j, "reflection_phase_rad", c.reflection.phase_rad);
    c.noise_sigma_db = get_or(j, "noise_sigma_db", c.noise_sigma_db);
    c.rssi_floor_dbm = get_or(j, "rssi_floor_dbm", c.rssi_floor_dbm);
    return c;
}

AntennaPattern antenna_from_json(const Json& j) {
    const auto kind = get_or<std::string>(j, "kind", "directional");
    AntennaPattern p;
    if (kind == "omni")
        p = AntennaPattern::omni(get_or(j, "peak_gain_dbi", 0.0));
    else if (kind != "directional")
        throw ConfigError(fmt::format("unknown antenna kind '{}'", kind));
    p.peak_gain_dbi = get_or(j, "peak_gain_dbi", p.peak_gain_dbi);
    p.downtilt_deg = get_or(j, "downtilt_deg", p.downtilt_deg);
    p.azimuth_beamwidth_deg = get_or(j, "azimuth_beamwidth_deg", p.azimuth_beamwidth_deg);
    p.elevation_beamwidth_deg = get_or(j, "elevation_beamwidth_deg", p.elevation_beamwidth_deg);
    return p;
}

SimulationConfig simulation_from_json(const Json& j) {
    SimulationConfig c;
    c.dt = get_or(j, "dt", c.dt);
    c.lane_jitter = get_or(j, "lane_jitter", c.lane_jitter);
    c.pre_roll = get_or(j, "pre_roll", c.pre_roll);
    c.post_roll = get_or(j, "post_roll", c.post_roll);
    c.approach_margin = get_or(j, "approach_margin", c.approach_margin);
    if (auto it = j.find("speeds"); it != j.end()) {
        for (auto s = it->begin(); s != it->end(); ++s) {
            auto type = parse_vehicle_type(s.key());
            c.speeds[static_cast<std::size_t>(type)] = {s.value().at(0).get<double>(),
                                                        s.value().at(1).get<double>()};
        }
    }
    return c;
}

VehicleSpec vehicle_from_json(const Json& j) {
    VehicleSpec v;
    v.type = parse_vehicle_type(j.at("type").get<std::string>());
    v.width = j.at("width").get<double>();
    for (const auto& s : j.at("segments"))
        v.segments.push_back({s.at("length").get<double>(), s.at("top_height").get<double>(),
                              s.at("ground_clearance").get<double>(), get_or(s, "gap_after", 0.0)});
    return v;
}

VehicleCatalog catalog_from_json(const Json& j) {
    VehicleCatalog out;
    for (const auto& v : j)
        out.push_back(vehicle_from_json(v));
    return out;
}

VehicleMix mix_from_json(const Json& j) {
    VehicleMix out;
    for (const auto& e : j)
        out.emplace_back(parse_vehicle_type(e.at(0).get<std::string>()), e.at(1).get<int>());
    return out;
}

Json to_json(const DetectionConfig& c) {
    return Json{{"drop_threshold", c.drop_threshold},
                {"release_threshold", c.release_threshold},
                {"min_duration", c.min_duration},
                {"baseline_window", c.baseline_window}};
}

Json to_json(const FeatureConfig& c) {
    return Json{{"resample_points", c.resample_points},
                {"links", c.links_used == LinkSelection::all ? "all" : "direct"},
                {"include_length", c.include_length},
                {"include_rssi", c.include_rssi}};
}

Json to_json(const LearnerSpec& s) {
    return Json{{"kind", to_string(s.kind)},
                {"k", s.k},
                {"kernel", s.svm.kernel.kind == KernelKind::rbf ? "rbf" : "linear"},
                {"gamma", s.svm.kernel.gamma},
                {"c", s.svm.c},
                {"tolerance", s.svm.tolerance},
                {"max_iterations", s.svm.max_iterations}};
}

DetectionConfig detection_from_json(const Json& j) {
    DetectionConfig c;
    c.drop_threshold = get_or(j, "drop_threshold", c.drop_threshold);
    c.release_threshold = get_or(j, "release_threshold", c.release_threshold);
    c.min_duration = get_or(j, "min_duration", c.min_duration);
    c.baseline_window = get_or(j, "baseline_window", c.baseline_window);
    return c;
}

FeatureConfig features_from_json(const Json& j) {
    FeatureConfig c;
    c.resample_points = get_or(j, "resample_points", c.resample_points);
    const auto links = get_or<std::string>(j, "links", "all");
    if (links == "direct")
        c.links_used = LinkSelection::direct_only;
    else if (links != "all")
        throw ConfigError(fmt::format("unknown link selection '{}' (all, direct)", links));
    c.include_length = get_or(j, "include_length", c.include_length);
    c.include_rssi = get_or(j, "include_rssi", c.include_rssi);
    return c;
}

LearnerSpec learner_from_json(const Json& j) {
    LearnerSpec s;
    s.kind = parse_learner(get_or<std::string>(j, "kind", "knn"));
    s.k = get_or(j, "k", s.k);
    const auto kernel = get_or<std::string>(j, "kernel", "rbf");
    if (kernel == "linear")
        s.svm.kernel.kind = KernelKind::linear;
    else if (kernel != "rbf")
        throw ConfigError(fmt::format("unknown kernel '{}' (rbf, linear)", kernel));
    s.svm.kernel.gamma = get_or(j, "gamma", s.svm.kernel.gamma);
    s.svm.c = get_or(j, "c", s.svm.c);
    s.svm.tolerance = get_or(j, "tolerance", s.svm.tolerance);
    s.svm.max_iterations = get_or(j, "max_iterations", s.svm.max_iterations);
    return s;
}

std::string hex64(std::uint64_t value) { return fmt::format("{:016x}", value); }

std::uint64_t parse_hex64(const std::string& text) {
    try {
        std::size_t used = 0;
        auto v = std::stoull(text, &used, 16);
        if (used != text.size())
            throw InputError("bad hex");
        return v;
    } catch (const std::logic_error&) {
        throw InputError(fmt::format("invalid fingerprint '{}'", text));
    }
}

} // namespace rfbarrier::codec
