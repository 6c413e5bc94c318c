#pragma once

#include "rfbarrier/geometry.hpp"
#include "rfbarrier/learn.hpp"
#include "rfbarrier/pipeline.hpp"
#include "rfbarrier/propagation.hpp"
#include "rfbarrier/simulator.hpp"

#include <cstdint>
#include <string>

namespace rfbarrier {

// Every setting a CLI run depends on.
struct RunConfig {
    std::uint64_t seed = 42;
    LayoutConfig layout;
    ChannelConfig channel;
    AntennaPattern antenna;
    SimulationConfig simulation;
    VehicleCatalog catalog = default_catalog();
    VehicleMix mix = default_mix();
    DetectionConfig detection;
    FeatureConfig features;
    LearnerSpec learner;
    int folds = 5;
    bool stratified = true;

    void validate() const;
    Scenario scenario() const;
};

// Parses YAML (or JSON) text. Unknown keys are rejected; missing keys keep
// their defaults. A document with a top-level "config" member (a run
// manifest) is read from that member.
RunConfig parse_config(const std::string& text, const std::string& origin = "<string>");

// "default" (or an empty path) yields the built-in configuration.
RunConfig load_config(const std::string& path);

// Canonical JSON text with 17-digit floats; parse_config reads it back exactly.
std::string config_to_json(const RunConfig& config);

} // namespace rfbarrier
