#pragma once

// JSON mapping of the library's configuration structs, shared by the dataset,
// model, feature-manifest and run-manifest writers.

#include "rfbarrier/geometry.hpp"
#include "rfbarrier/learn.hpp"
#include "rfbarrier/pipeline.hpp"
#include "rfbarrier/propagation.hpp"
#include "rfbarrier/simulator.hpp"

#include <json.hpp>
#include <string>

namespace rfbarrier::codec {

using Json = nlohmann::ordered_json;

// Compact dump with every floating-point number at 17 significant digits.
std::string dump17(const Json& value);

Json to_json(const LayoutConfig& c);
Json to_json(const ChannelConfig& c);
Json to_json(const AntennaPattern& p);
Json to_json(const SimulationConfig& c);
Json to_json(const VehicleSpec& v);
Json to_json(const VehicleCatalog& catalog);
Json to_json(const VehicleMix& mix);
Json to_json(const DetectionConfig& c);
Json to_json(const FeatureConfig& c);
Json to_json(const LearnerSpec& s);

LayoutConfig layout_from_json(const Json& j);
ChannelConfig channel_from_json(const Json& j);
AntennaPattern antenna_from_json(const Json& j);
SimulationConfig simulation_from_json(const Json& j);
VehicleSpec vehicle_from_json(const Json& j);
VehicleCatalog catalog_from_json(const Json& j);
VehicleMix mix_from_json(const Json& j);
DetectionConfig detection_from_json(const Json& j);
FeatureConfig features_from_json(const Json& j);
LearnerSpec learner_from_json(const Json& j);

std::string hex64(std::uint64_t value);
std::uint64_t parse_hex64(const std::string& text);

} // namespace rfbarrier::codec
