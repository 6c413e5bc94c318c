#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rfbarrier {

// Road frame: x along the road, y across it (transmitter side at y = 0,
// receiver side at y = road_width), z up from the road surface.
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
double norm(Vec3 a);
double distance(Vec3 a, Vec3 b);

struct Segment3 {
    Vec3 from;
    Vec3 to;
};

enum class NodeRole { transmitter, receiver };

struct NodeSpec {
    int id = 0;
    NodeRole role = NodeRole::transmitter;
    Vec3 position;
};

enum class LinkKind { direct, diagonal };

struct RadioLink {
    int id = 0;
    int tx_id = 0;
    int rx_id = 0;
    LinkKind kind = LinkKind::direct;
    Vec3 tx;
    Vec3 rx;

    double length() const { return distance(tx, rx); }
    Segment3 path() const { return {tx, rx}; }
};

enum class Topology {
    full_mesh, // every transmitter to every receiver
    adjacent,  // only posts at most one spacing apart: 2-3 links per receiver
};

struct LayoutConfig {
    int nodes_per_side = 3;
    double spacing = 5.0;    // m between neighbouring posts on one side
    double road_width = 7.0; // m between the transmitter and receiver rows
    double tx_height = 0.6;
    double rx_height = 0.6;
    Topology topology = Topology::full_mesh;
};

class SensorLayout {
public:
    SensorLayout() = default;
    SensorLayout(std::vector<NodeSpec> nodes, std::vector<RadioLink> links, double road_width,
                 double array_length);

    const std::vector<NodeSpec>& nodes() const { return nodes_; }
    const std::vector<RadioLink>& links() const { return links_; }
    double road_width() const { return road_width_; }
    double array_length() const { return array_length_; }

    const NodeSpec& node(int id) const;
    // Index into links() of the link with the given id.
    std::size_t link_index(int link_id) const;
    std::vector<const RadioLink*> direct_links() const;

private:
    std::vector<NodeSpec> nodes_;
    std::vector<RadioLink> links_;
    double road_width_ = 0.0;
    double array_length_ = 0.0;
};

// Transmitters get ids 1..n at x = 0, s, 2s, ...; receivers n+1..2n mirror
// them on the far side. Links are numbered from 1 in ascending (tx_id, rx_id).
SensorLayout build_layout(const LayoutConfig& config);

// ---------------------------------------------------------------------------
// Vehicles

enum class VehicleType { passenger_car, small_van, van, transporter, bus, truck };
enum class Label { passenger_car, truck };

inline constexpr VehicleType all_vehicle_types[] = {
    VehicleType::passenger_car, VehicleType::small_van, VehicleType::van,
    VehicleType::transporter,   VehicleType::bus,       VehicleType::truck,
};

Label label_of(VehicleType type);
std::string_view to_string(VehicleType type);
std::string_view to_string(Label label);
std::string_view to_string(LinkKind kind);
VehicleType parse_vehicle_type(std::string_view name);
Label parse_label(std::string_view name);

struct BodySegment {
    double length = 0.0;
    double top_height = 0.0;
    double ground_clearance = 0.0;
    double gap_after = 0.0; // free space to the next segment, 0 for the last
};

struct VehicleSpec {
    VehicleType type = VehicleType::passenger_car;
    std::vector<BodySegment> segments;
    double width = 1.8;

    Label label() const { return label_of(type); }
    double total_length() const;
    // Throws ConfigError when a segment violates its invariants.
    void validate() const;
};

VehicleSpec default_vehicle(VehicleType type);
std::vector<VehicleSpec> default_catalog();

struct Pose {
    double front_x = 0.0; // position of the nose along the road
    double lane_y = 0.0;  // near (transmitter-side) edge of the body
    int heading = +1;     // +1 drives towards +x, -1 towards -x
};

// Throws ConfigError unless [lane_y, lane_y + width] lies strictly in (0, road_width).
void check_pose_on_road(const VehicleSpec& vehicle, const Pose& pose, double road_width);

// Axis-aligned footprint of one body segment on the road plane.
struct Footprint {
    double x_min = 0.0;
    double x_max = 0.0;
    double y_min = 0.0;
    double y_max = 0.0;
    double top_height = 0.0;
    double ground_clearance = 0.0;
};

std::vector<Footprint> footprints(const VehicleSpec& vehicle, const Pose& pose);

// Knife-edge parameters of one body segment relative to a propagation path.
//
// v_top and v_bottom describe diffraction over the roof and under the floor;
// v_lead and v_trail describe diffraction around the two vertical flanks of
// the segment as seen along the path (lead is the side the vehicle moves
// towards). Positive v means the edge penetrates the path.
struct ObstructionParams {
    std::size_t segment_index = 0;
    bool blocked = false; // footprint crosses the path's ground projection
    double v_top = 0.0;
    std::optional<double> v_bottom; // absent when ground_clearance == 0
    double v_lead = 0.0;
    double v_trail = 0.0;
    double d1 = 0.0; // m, path start to crossing point
    double d2 = 0.0; // m, crossing point to path end
};

// One entry per body segment whose footprint crosses the path, plus entries
// (blocked = false) for segments that miss it by less than the knife-edge
// cutoff so the loss ramps continuously as a vehicle approaches the path.
std::vector<ObstructionParams> occlusion_params(const VehicleSpec& vehicle, const Pose& pose,
                                                const Segment3& path, double wavelength);

} // namespace rfbarrier
