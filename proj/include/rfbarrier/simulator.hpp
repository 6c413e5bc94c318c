#pragma once

#include "rfbarrier/geometry.hpp"
#include "rfbarrier/propagation.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace rfbarrier {

using VehicleCatalog = std::vector<VehicleSpec>;

const VehicleSpec& find_vehicle(const VehicleCatalog& catalog, VehicleType type);

// Everything about the radio field that stays fixed between passages.
struct Scenario {
    LayoutConfig layout_config;
    SensorLayout layout;
    ChannelConfig channel;
    AntennaPattern antenna;
    AntennaSet antennas;

    static Scenario make(const LayoutConfig& layout, const ChannelConfig& channel,
                         const AntennaPattern& antenna);

    // FNV-1a over the canonical text of layout, channel and antenna settings.
    std::uint64_t fingerprint() const;
};

struct SpeedRange {
    double min_mps = 5.0;
    double max_mps = 20.0;
};

struct SimulationConfig {
    double dt = 0.01;
    std::array<SpeedRange, 6> speeds{}; // indexed by VehicleType
    double lane_jitter = 0.5;           // +- m around the centred lane position
    double pre_roll = 1.0;              // s of vehicle-free samples before the passage
    double post_roll = 1.0;
    double approach_margin = 1.0; // m between the array and the body at entry/exit

    void validate() const;
    const SpeedRange& speed_for(VehicleType type) const {
        return speeds[static_cast<std::size_t>(type)];
    }
};

struct RssiSampleFrame {
    double t = 0.0;
    std::vector<double> values; // dBm, one per layout link in link order
};

struct PassageEvent {
    std::uint64_t event_id = 0;
    VehicleType type = VehicleType::passenger_car;
    double true_speed = 0.0;
    double true_length = 0.0;
    double lane_y = 0.0;
    double dt = 0.01;
    std::uint64_t fingerprint = 0;
    std::vector<RssiSampleFrame> frames;

    Label label() const { return label_of(type); }
};

using VehicleMix = std::vector<std::pair<VehicleType, int>>;

VehicleMix default_mix(int per_type = 50);

struct Dataset {
    std::uint64_t seed = 0;
    std::uint64_t fingerprint = 0;
    LayoutConfig layout;
    ChannelConfig channel;
    AntennaPattern antenna;
    SimulationConfig simulation;
    VehicleCatalog catalog;
    VehicleMix mix;
    std::vector<PassageEvent> events; // ascending event_id
};

std::uint64_t splitmix64(std::uint64_t x);
// Seed for event `index` of a dataset; independent of how many events exist.
std::uint64_t derive_event_seed(std::uint64_t dataset_seed, std::uint64_t index);

std::vector<double> baseline_rssi(const Scenario& scenario);

// Lane offset that centres the vehicle on the road.
double centred_lane(const Scenario& scenario, const VehicleSpec& vehicle);

PassageEvent simulate_passage(const Scenario& scenario, const SimulationConfig& sim,
                              const VehicleSpec& vehicle, double speed, double lane_y,
                              std::uint64_t seed, std::uint64_t event_id = 0);

// Events are generated from per-event seeds, so the result does not depend on
// `jobs`.
Dataset generate_dataset(const Scenario& scenario, const SimulationConfig& sim,
                         const VehicleCatalog& catalog, const VehicleMix& mix, std::uint64_t seed,
                         unsigned jobs = 1);

// Line-delimited JSON: one metadata header line followed by one event per line.
// Floating-point values carry 17 significant digits.
void write_dataset(std::ostream& out, const Dataset& dataset);
Dataset read_dataset(std::istream& in);
void save_dataset(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& path);

} // namespace rfbarrier
