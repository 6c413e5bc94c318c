#pragma once

#include "rfbarrier/geometry.hpp"

#include <numbers>
#include <optional>
#include <vector>

namespace rfbarrier {

inline constexpr double speed_of_light = 299'792'458.0; // m/s

// Below this Fresnel parameter the single-edge approximation yields no loss.
inline constexpr double knife_edge_cutoff = -0.78;

double wavelength(double frequency_hz);

// Free-space path loss in dB: 20 log10(4 pi d f / c).
double fspl_db(double distance_m, double frequency_hz);

// h: signed clearance of the edge into the path (positive = obstructing).
double fresnel_v(double h, double d1, double d2, double wavelength);

// Single knife-edge loss, always >= 0 dB.
double knife_edge_loss_db(double v);

enum class AntennaKind { omni, directional };

struct AntennaPattern {
    AntennaKind kind = AntennaKind::directional;
    double peak_gain_dbi = 7.1;
    double boresight_azimuth_deg = 0.0; // measured in the road plane from +x towards +y
    double downtilt_deg = 5.0;
    double azimuth_beamwidth_deg = 60.0;
    double elevation_beamwidth_deg = 30.0;

    static AntennaPattern omni(double gain_dbi = 0.0);
    void validate() const;
};

// Gain for a direction given as offsets from the (tilted) boresight.
double antenna_gain(const AntennaPattern& pattern, double azimuth_offset_deg,
                    double elevation_offset_deg);

// Gain of an antenna at `from` towards the point `to`.
double antenna_gain_towards(const AntennaPattern& pattern, Vec3 from, Vec3 to);

struct ReflectionCoefficient {
    double magnitude = 0.9;
    double phase_rad = std::numbers::pi;
};

struct ChannelConfig {
    double frequency_hz = 2.4e9;
    double tx_power_dbm = 2.5;
    bool ground_reflection = true;
    ReflectionCoefficient reflection;
    double noise_sigma_db = 1.0;
    double rssi_floor_dbm = -100.0;

    void validate() const;
};

// Antenna pattern per node, indexed by node id.
class AntennaSet {
public:
    AntennaSet() = default;
    void assign(int node_id, AntennaPattern pattern);
    const AntennaPattern& at(int node_id) const;

private:
    std::vector<std::optional<AntennaPattern>> by_id_;
};

// Orients a copy of `prototype` on every node so that it faces across the road.
AntennaSet facing_antennas(const SensorLayout& layout, const AntennaPattern& prototype);

struct Occupant {
    const VehicleSpec* vehicle = nullptr;
    Pose pose;
};

// Cascaded obstruction loss along one path: sum over intersected body
// segments of the loss around the weakest edge.
double path_obstruction_db(const VehicleSpec& vehicle, const Pose& pose, const Segment3& path,
                           double wavelength);

// Specular bounce point on the road surface (z = 0) between two elevated points.
Vec3 ground_bounce_point(Vec3 tx, Vec3 rx);

// Received power in dBm for one link. `standard_normal` is a caller-drawn
// N(0, 1) sample scaled by the channel's noise sigma; pass 0 for the
// noiseless value. The result is clamped at the channel's RSSI floor.
double link_rssi(const RadioLink& link, const ChannelConfig& channel,
                 const AntennaPattern& tx_pattern, const AntennaPattern& rx_pattern,
                 const Occupant* occupant = nullptr, double standard_normal = 0.0);

} // namespace rfbarrier
