#pragma once

#include "rfbarrier/geometry.hpp"
#include "rfbarrier/simulator.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rfbarrier {

struct DetectionConfig {
    double drop_threshold = 6.0;    // dB below baseline that opens a segment
    double release_threshold = 3.0; // dB; a segment closes once every link is back within this
    double min_duration = 0.05;     // s
    double baseline_window = 0.5;   // s of vehicle-free samples feeding the rolling median

    void validate() const;
};

// One link's view of a detected segment.
struct LinkWindow {
    int link_id = 0;
    LinkKind kind = LinkKind::direct;
    double baseline_dbm = 0.0;
    // Interpolated times at which the drop first rises above and last falls
    // below half of this link's peak drop; absent if the link never drops.
    std::optional<double> onset_t;
    std::optional<double> release_t;
    std::vector<double> trace; // dBm over [t_start, t_end]
};

struct EventSegment {
    double t_start = 0.0;
    double t_end = 0.0;
    double dt = 0.0;
    std::size_t first_frame = 0;
    std::size_t last_frame = 0;
    std::vector<LinkWindow> links; // layout link order

    double duration() const { return t_end - t_start; }
};

std::vector<EventSegment> detect_events(std::span<const RssiSampleFrame> stream,
                                        const SensorLayout& layout, const DetectionConfig& cfg);

// Mean of dx/dt over all pairs of direct links with distinct x and onsets.
double estimate_speed(const EventSegment& segment, const SensorLayout& layout);

double estimate_length(const EventSegment& segment, double speed, const SensorLayout& layout);

// baseline - min(trace), clamped at 0.
double drop_magnitude(std::span<const double> trace, double baseline);

enum class LinkSelection { direct_only, all };

struct FeatureConfig {
    int resample_points = 32;
    LinkSelection links_used = LinkSelection::all;
    bool include_length = true;
    bool include_rssi = true;

    void validate() const;
    std::size_t dimension(const SensorLayout& layout) const;
};

struct FeatureVector {
    std::uint64_t event_id = 0;
    VehicleType type = VehicleType::passenger_car;
    std::vector<double> rssi_profile; // per-link drop series, link-id order
    double drop_magnitude = 0.0;      // largest drop over the direct links, dB
    double est_speed = 0.0;
    double est_length = 0.0;
    std::vector<double> values; // classifier input: selected profile then length

    Label label() const { return label_of(type); }
};

FeatureVector extract_features(const EventSegment& segment, double speed, double length,
                               const FeatureConfig& cfg);

// Detection + estimation + extraction for one simulated passage. Throws
// InputError when no segment is found and EstimationError when speed or
// length cannot be estimated.
FeatureVector process_event(const PassageEvent& event, const SensorLayout& layout,
                            const DetectionConfig& detection, const FeatureConfig& features);

// Feature table as CSV: event_id,type_name,label,est_speed,est_length,drop_magnitude,f_0..f_{D-1}.
// Rows read back carry `values` only.
struct FeatureTable {
    std::vector<FeatureVector> rows;
    std::size_t dimension() const { return rows.empty() ? 0 : rows.front().values.size(); }
};

void write_feature_table(std::ostream& out, const FeatureTable& table);
FeatureTable read_feature_table(std::istream& in);

// Detection output for a whole dataset, as exchanged between CLI stages.
struct DetectedPassage {
    std::uint64_t event_id = 0;
    VehicleType type = VehicleType::passenger_car;
    double true_speed = 0.0;
    double true_length = 0.0;
    std::vector<EventSegment> segments;
};

struct SegmentSet {
    LayoutConfig layout;
    DetectionConfig detection;
    std::uint64_t fingerprint = 0;
    std::vector<DetectedPassage> passages;
};

SegmentSet detect_dataset(const Dataset& dataset, const DetectionConfig& cfg);

// Longest segment of a passage; nullptr if nothing was detected.
const EventSegment* primary_segment(const DetectedPassage& passage);

// Line-delimited JSON, header line first.
void write_segments(std::ostream& out, const SegmentSet& set);
SegmentSet read_segments(std::istream& in);

// ---------------------------------------------------------------------------
// Ground-reflection study

struct DropStats {
    std::size_t samples = 0;
    double mean = 0.0;
    double std = 0.0;
    double min = 0.0;
    double max = 0.0;
};

struct ReflectionVariant {
    std::string name;                  // "reflection_on" / "reflection_off"
    std::array<DropStats, 2> by_label; // indexed by Label
    std::array<DropStats, 6> by_type;  // indexed by VehicleType
    std::vector<std::pair<VehicleType, double>> samples; // one per (event, cross-street link)

    double car_minus_truck() const { return by_label[0].mean - by_label[1].mean; }
};

struct ReflectionStudy {
    std::vector<ReflectionVariant> variants;
};

// Per-link drop magnitudes over the cross-street (direct) links of every
// event, baselines taken from the first baseline_window of each stream.
ReflectionVariant drop_statistics(const Dataset& dataset, const std::string& name,
                                  const DetectionConfig& cfg);

// Simulates the same passages (same seed) with the ground bounce on and off.
ReflectionStudy reflection_study(const Scenario& scenario, const SimulationConfig& sim,
                                 const VehicleCatalog& catalog, const VehicleMix& mix,
                                 std::uint64_t seed, const DetectionConfig& cfg, unsigned jobs = 1);

} // namespace rfbarrier
