#include "rfbarrier/geometry.hpp"

#include "rfbarrier/error.hpp"
#include "rfbarrier/propagation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fmt/format.h>

namespace rfbarrier {

double norm(Vec3 a) { return std::sqrt(a.x * a.x + a.y * a.y + a.z * a.z); }
double distance(Vec3 a, Vec3 b) { return norm(a - b); }

SensorLayout::SensorLayout(std::vector<NodeSpec> nodes, std::vector<RadioLink> links,
                           double road_width, double array_length)
    : nodes_(std::move(nodes)), links_(std::move(links)), road_width_(road_width),
      array_length_(array_length) {}

const NodeSpec& SensorLayout::node(int id) const {
    auto it = std::find_if(nodes_.begin(), nodes_.end(), [id](const NodeSpec& n) { return n.id == id; });
    if (it == nodes_.end())
        throw InputError(fmt::format("no node with id {}", id));
    return *it;
}

std::size_t SensorLayout::link_index(int link_id) const {
    for (std::size_t i = 0; i < links_.size(); ++i)
        if (links_[i].id == link_id)
            return i;
    throw InputError(fmt::format("no link with id {}", link_id));
}

std::vector<const RadioLink*> SensorLayout::direct_links() const {
    std::vector<const RadioLink*> out;
    for (const auto& link : links_)
        if (link.kind == LinkKind::direct)
            out.push_back(&link);
    return out;
}

SensorLayout build_layout(const LayoutConfig& config) {
    if (config.nodes_per_side < 1)
        throw ConfigError("layout needs at least one node per side");
    if (!(config.road_width > 0.0))
        throw ConfigError("road_width must be positive");
    if (config.nodes_per_side > 1 && !(config.spacing > 0.0))
        throw ConfigError("spacing must be positive");
    if (!(config.tx_height > 0.0) || !(config.rx_height > 0.0))
        throw ConfigError("node heights must be positive");

    const int n = config.nodes_per_side;
    std::vector<NodeSpec> nodes;
    nodes.reserve(2 * n);
    for (int i = 0; i < n; ++i)
        nodes.push_back({i + 1, NodeRole::transmitter, {i * config.spacing, 0.0, config.tx_height}});
    for (int i = 0; i < n; ++i)
        nodes.push_back({n + i + 1, NodeRole::receiver,
                         {i * config.spacing, config.road_width, config.rx_height}});

    std::vector<RadioLink> links;
    int next_id = 1;
    for (int t = 0; t < n; ++t) {
        for (int r = 0; r < n; ++r) {
            if (config.topology == Topology::adjacent && std::abs(t - r) > 1)
                continue;
            const auto& tx = nodes[t];
            const auto& rx = nodes[n + r];
            const auto kind = tx.position.x == rx.position.x ? LinkKind::direct : LinkKind::diagonal;
            links.push_back({next_id++, tx.id, rx.id, kind, tx.position, rx.position});
        }
    }
    return SensorLayout(std::move(nodes), std::move(links), config.road_width,
                        (n - 1) * config.spacing);
}

// ---------------------------------------------------------------------------

Label label_of(VehicleType type) {
    switch (type) {
    case VehicleType::bus:
    case VehicleType::truck:
        return Label::truck;
    default:
        return Label::passenger_car;
    }
}

std::string_view to_string(VehicleType type) {
    switch (type) {
    case VehicleType::passenger_car: return "passenger_car";
    case VehicleType::small_van: return "small_van";
    case VehicleType::van: return "van";
    case VehicleType::transporter: return "transporter";
    case VehicleType::bus: return "bus";
    case VehicleType::truck: return "truck";
    }
    return "unknown";
}

std::string_view to_string(Label label) {
    return label == Label::truck ? "truck" : "passenger_car";
}

std::string_view to_string(LinkKind kind) {
    return kind == LinkKind::direct ? "direct" : "diagonal";
}

VehicleType parse_vehicle_type(std::string_view name) {
    for (auto type : all_vehicle_types)
        if (to_string(type) == name)
            return type;
    if (name == "car")
        return VehicleType::passenger_car;
    throw InputError(fmt::format("unknown vehicle type '{}'", name));
}

Label parse_label(std::string_view name) {
    if (name == "passenger_car")
        return Label::passenger_car;
    if (name == "truck")
        return Label::truck;
    throw InputError(fmt::format("unknown label '{}'", name));
}

double VehicleSpec::total_length() const {
    double total = 0.0;
    for (const auto& s : segments)
        total += s.length + s.gap_after;
    if (!segments.empty())
        total -= segments.back().gap_after;
    return total;
}

void VehicleSpec::validate() const {
    if (segments.empty())
        throw ConfigError(fmt::format("vehicle '{}' has no body segments", to_string(type)));
    if (!(width > 0.0))
        throw ConfigError(fmt::format("vehicle '{}' needs a positive width", to_string(type)));
    for (const auto& s : segments) {
        if (!(s.length > 0.0) || s.gap_after < 0.0 || s.ground_clearance < 0.0 ||
            !(s.ground_clearance < s.top_height))
            throw ConfigError(fmt::format("vehicle '{}' has an invalid body segment", to_string(type)));
    }
}

// Clearances are kept below the 0.6 m link height so that the ground bounce
// cannot slip under the body; the trailer counts its side underrun guard.
VehicleSpec default_vehicle(VehicleType type) {
    switch (type) {
    case VehicleType::passenger_car:
        return {type, {{4.5, 1.5, 0.15, 0.0}}, 1.8};
    case VehicleType::small_van:
        return {type, {{4.8, 1.9, 0.16, 0.0}}, 1.9};
    case VehicleType::van:
        return {type, {{5.4, 2.4, 0.17, 0.0}}, 2.0};
    case VehicleType::transporter:
        return {type, {{6.0, 2.6, 0.18, 0.0}}, 2.1};
    case VehicleType::bus:
        return {type, {{12.0, 3.5, 0.3, 0.0}}, 2.5};
    case VehicleType::truck:
        return {type, {{6.0, 3.8, 0.3, 0.8}, {9.0, 4.0, 0.3, 0.0}}, 2.5};
    }
    throw ConfigError("unknown vehicle type");
}

std::vector<VehicleSpec> default_catalog() {
    std::vector<VehicleSpec> out;
    for (auto type : all_vehicle_types)
        out.push_back(default_vehicle(type));
    return out;
}

void check_pose_on_road(const VehicleSpec& vehicle, const Pose& pose, double road_width) {
    if (!(vehicle.width < road_width))
        throw ConfigError(fmt::format("vehicle '{}' ({} m) is wider than the road ({} m)",
                                      to_string(vehicle.type), vehicle.width, road_width));
    if (!(pose.lane_y > 0.0) || !(pose.lane_y + vehicle.width < road_width))
        throw ConfigError(fmt::format("lane offset {} m puts vehicle '{}' off the road",
                                      pose.lane_y, to_string(vehicle.type)));
}

std::vector<Footprint> footprints(const VehicleSpec& vehicle, const Pose& pose) {
    std::vector<Footprint> out;
    out.reserve(vehicle.segments.size());
    double offset = 0.0; // distance from nose to the front of the current segment
    for (const auto& s : vehicle.segments) {
        Footprint f;
        if (pose.heading >= 0) {
            f.x_max = pose.front_x - offset;
            f.x_min = f.x_max - s.length;
        } else {
            f.x_min = pose.front_x + offset;
            f.x_max = f.x_min + s.length;
        }
        f.y_min = pose.lane_y;
        f.y_max = pose.lane_y + vehicle.width;
        f.top_height = s.top_height;
        f.ground_clearance = s.ground_clearance;
        out.push_back(f);
        offset += s.length + s.gap_after;
    }
    return out;
}

namespace {

// Diffraction distances shorter than this are clamped so v stays finite
// where a sub-path ends inside a footprint (ground-bounce point under a body).
constexpr double min_edge_distance = 1e-3;

struct PathPoint {
    double z;
    double d1;
    double d2;
};

} // namespace

std::vector<ObstructionParams> occlusion_params(const VehicleSpec& vehicle, const Pose& pose,
                                                const Segment3& path, double wavelength) {
    const Vec3 delta = path.to - path.from;
    std::vector<ObstructionParams> out;
    if (delta.y == 0.0)
        return out; // parallel to the road, never crosses a lane
    const double horizontal = std::hypot(delta.x, delta.y);
    // Unit normal to the path's ground projection, oriented towards +x.
    double nx = -delta.y / horizontal;
    double ny = delta.x / horizontal;
    if (nx < 0.0) {
        nx = -nx;
        ny = -ny;
    }
    const double y_low = std::min(path.from.y, path.to.y);
    const double y_high = std::max(path.from.y, path.to.y);
    const double total = norm(delta);

    auto at_y = [&](double y) {
        const double t = (y - path.from.y) / delta.y;
        const Vec3 p = path.from + t * delta;
        return PathPoint{p.z, std::max(t * total, min_edge_distance),
                         std::max((1.0 - t) * total, min_edge_distance)};
    };

    const auto prints = footprints(vehicle, pose);
    for (std::size_t i = 0; i < prints.size(); ++i) {
        const auto& f = prints[i];
        const double a = std::max(f.y_min, y_low);
        const double b = std::min(f.y_max, y_high);
        if (!(a < b))
            continue;

        // Signed offsets of the clipped footprint corners from the path line.
        const std::array<double, 4> offsets = {
            nx * (f.x_min - path.from.x) + ny * (a - path.from.y),
            nx * (f.x_min - path.from.x) + ny * (b - path.from.y),
            nx * (f.x_max - path.from.x) + ny * (a - path.from.y),
            nx * (f.x_max - path.from.x) + ny * (b - path.from.y),
        };
        const auto [lo, hi] = std::minmax_element(offsets.begin(), offsets.end());
        const double reach_plus = *hi;   // extent of the body on the +x side
        const double reach_minus = -*lo; // extent on the -x side

        const PathPoint mid = at_y(0.5 * (a + b));
        const double v_plus = fresnel_v(reach_plus, mid.d1, mid.d2, wavelength);
        const double v_minus = fresnel_v(reach_minus, mid.d1, mid.d2, wavelength);

        const bool blocked = reach_plus >= 0.0 && reach_minus >= 0.0;
        if (!blocked && std::min(v_plus, v_minus) <= knife_edge_cutoff)
            continue;

        // The roof edge that matters is where the path runs lowest under the
        // body's span, the floor edge where it runs highest.
        PathPoint end_a = at_y(a);
        PathPoint end_b = at_y(b);
        const PathPoint& low = end_a.z <= end_b.z ? end_a : end_b;
        const PathPoint& high = end_a.z <= end_b.z ? end_b : end_a;

        ObstructionParams p;
        p.segment_index = i;
        p.blocked = blocked;
        p.v_top = fresnel_v(f.top_height - low.z, low.d1, low.d2, wavelength);
        if (f.ground_clearance > 0.0)
            p.v_bottom = fresnel_v(high.z - f.ground_clearance, high.d1, high.d2, wavelength);
        const bool lead_is_plus = pose.heading >= 0;
        p.v_lead = lead_is_plus ? v_plus : v_minus;
        p.v_trail = lead_is_plus ? v_minus : v_plus;
        p.d1 = mid.d1;
        p.d2 = mid.d2;
        out.push_back(p);
    }
    return out;
}

} // namespace rfbarrier
