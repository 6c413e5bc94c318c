#include "rfbarrier/propagation.hpp"

#include "rfbarrier/error.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fmt/format.h>

namespace rfbarrier {

namespace {
constexpr double rad_to_deg = 180.0 / std::numbers::pi;
constexpr double max_pattern_attenuation_db = 20.0;
} // namespace

double wavelength(double frequency_hz) {
    if (!(frequency_hz > 0.0))
        throw DomainError(fmt::format("frequency must be positive, got {}", frequency_hz));
    return speed_of_light / frequency_hz;
}

double fspl_db(double distance_m, double frequency_hz) {
    if (!(distance_m > 0.0))
        throw DomainError(fmt::format("path distance must be positive, got {}", distance_m));
    if (!(frequency_hz > 0.0))
        throw DomainError(fmt::format("frequency must be positive, got {}", frequency_hz));
    return 20.0 * std::log10(4.0 * std::numbers::pi * distance_m * frequency_hz / speed_of_light);
}

double fresnel_v(double h, double d1, double d2, double wavelength) {
    if (!(d1 > 0.0) || !(d2 > 0.0) || !(wavelength > 0.0))
        throw DomainError("fresnel_v needs positive distances and wavelength");
    return h * std::sqrt(2.0 * (d1 + d2) / (wavelength * d1 * d2));
}

double knife_edge_loss_db(double v) {
    if (v <= knife_edge_cutoff)
        return 0.0;
    const double u = v - 0.1;
    return std::max(0.0, 6.9 + 20.0 * std::log10(std::sqrt(u * u + 1.0) + u));
}

AntennaPattern AntennaPattern::omni(double gain_dbi) {
    AntennaPattern p;
    p.kind = AntennaKind::omni;
    p.peak_gain_dbi = gain_dbi;
    p.downtilt_deg = 0.0;
    p.azimuth_beamwidth_deg = 360.0;
    p.elevation_beamwidth_deg = 180.0;
    return p;
}

void AntennaPattern::validate() const {
    if (!(azimuth_beamwidth_deg > 0.0) || !(elevation_beamwidth_deg > 0.0))
        throw ConfigError("antenna beamwidths must be positive");
}

double antenna_gain(const AntennaPattern& pattern, double azimuth_offset_deg,
                    double elevation_offset_deg) {
    if (pattern.kind == AntennaKind::omni)
        return pattern.peak_gain_dbi;
    const double a = azimuth_offset_deg / pattern.azimuth_beamwidth_deg;
    const double e = elevation_offset_deg / pattern.elevation_beamwidth_deg;
    const double attenuation = std::min(12.0 * (a * a + e * e), max_pattern_attenuation_db);
    return pattern.peak_gain_dbi - attenuation;
}

double antenna_gain_towards(const AntennaPattern& pattern, Vec3 from, Vec3 to) {
    if (pattern.kind == AntennaKind::omni)
        return pattern.peak_gain_dbi;
    const Vec3 d = to - from;
    const double azimuth = std::atan2(d.y, d.x) * rad_to_deg;
    const double elevation = std::atan2(d.z, std::hypot(d.x, d.y)) * rad_to_deg;
    const double az_offset = std::remainder(azimuth - pattern.boresight_azimuth_deg, 360.0);
    return antenna_gain(pattern, az_offset, elevation + pattern.downtilt_deg);
}

void ChannelConfig::validate() const {
    if (!(frequency_hz > 0.0))
        throw ConfigError("channel frequency must be positive");
    if (!(reflection.magnitude >= 0.0 && reflection.magnitude <= 1.0))
        throw ConfigError("reflection coefficient magnitude must lie in [0, 1]");
    if (!(noise_sigma_db >= 0.0))
        throw ConfigError("noise sigma must be non-negative");
}

void AntennaSet::assign(int node_id, AntennaPattern pattern) {
    if (node_id < 0)
        throw ConfigError("node ids must be non-negative");
    if (static_cast<std::size_t>(node_id) >= by_id_.size())
        by_id_.resize(node_id + 1);
    by_id_[node_id] = pattern;
}

const AntennaPattern& AntennaSet::at(int node_id) const {
    if (node_id < 0 || static_cast<std::size_t>(node_id) >= by_id_.size() || !by_id_[node_id])
        throw ConfigError(fmt::format("no antenna assigned to node {}", node_id));
    return *by_id_[node_id];
}

AntennaSet facing_antennas(const SensorLayout& layout, const AntennaPattern& prototype) {
    prototype.validate();
    AntennaSet set;
    for (const auto& node : layout.nodes()) {
        AntennaPattern p = prototype;
        p.boresight_azimuth_deg = node.role == NodeRole::transmitter ? 90.0 : -90.0;
        set.assign(node.id, p);
    }
    return set;
}

double path_obstruction_db(const VehicleSpec& vehicle, const Pose& pose, const Segment3& path,
                           double wavelength) {
    double total = 0.0;
    for (const auto& p : occlusion_params(vehicle, pose, path, wavelength)) {
        double loss = std::min({knife_edge_loss_db(p.v_top), knife_edge_loss_db(p.v_lead),
                                knife_edge_loss_db(p.v_trail)});
        if (p.v_bottom)
            loss = std::min(loss, knife_edge_loss_db(*p.v_bottom));
        total += loss;
    }
    return total;
}

Vec3 ground_bounce_point(Vec3 tx, Vec3 rx) {
    const double t = tx.z / (tx.z + rx.z);
    return {tx.x + t * (rx.x - tx.x), tx.y + t * (rx.y - tx.y), 0.0};
}

double link_rssi(const RadioLink& link, const ChannelConfig& channel,
                 const AntennaPattern& tx_pattern, const AntennaPattern& rx_pattern,
                 const Occupant* occupant, double standard_normal) {
    const double d_direct = distance(link.tx, link.rx);
    if (!(d_direct > 0.0))
        throw DomainError(fmt::format("link {} has coincident endpoints", link.id));
    const double lambda = wavelength(channel.frequency_hz);
    const bool has_vehicle = occupant != nullptr && occupant->vehicle != nullptr;

    const double direct_loss =
        has_vehicle ? path_obstruction_db(*occupant->vehicle, occupant->pose, link.path(), lambda) : 0.0;
    std::complex<double> field = std::pow(10.0, -direct_loss / 20.0);

    if (channel.ground_reflection && channel.reflection.magnitude > 0.0) {
        const Vec3 bounce = ground_bounce_point(link.tx, link.rx);
        const double d_reflected = distance(link.tx, bounce) + distance(bounce, link.rx);
        double reflected_loss = 0.0;
        if (has_vehicle) {
            reflected_loss = path_obstruction_db(*occupant->vehicle, occupant->pose, {link.tx, bounce}, lambda) +
                             path_obstruction_db(*occupant->vehicle, occupant->pose, {bounce, link.rx}, lambda);
        }
        const double amplitude = channel.reflection.magnitude * (d_direct / d_reflected) *
                                 std::pow(10.0, -reflected_loss / 20.0);
        const double phase = channel.reflection.phase_rad -
                             2.0 * std::numbers::pi * (d_reflected - d_direct) / lambda;
        field += std::polar(amplitude, phase);
    }

    const double gains = antenna_gain_towards(tx_pattern, link.tx, link.rx) +
                         antenna_gain_towards(rx_pattern, link.rx, link.tx);
    const double magnitude = std::abs(field);
    if (!(magnitude > 0.0))
        return channel.rssi_floor_dbm;
    const double rssi = channel.tx_power_dbm + gains - fspl_db(d_direct, channel.frequency_hz) +
                        20.0 * std::log10(magnitude) + channel.noise_sigma_db * standard_normal;
    return std::max(rssi, channel.rssi_floor_dbm);
}

} // namespace rfbarrier
