#include "rfbarrier/simulator.hpp"

#include "json_codec.hpp"
#include "rfbarrier/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fmt/format.h>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <random>
#include <thread>

namespace rfbarrier {

const VehicleSpec& find_vehicle(const VehicleCatalog& catalog, VehicleType type) {
    for (const auto& v : catalog)
        if (v.type == type)
            return v;
    throw ConfigError(fmt::format("vehicle catalog has no entry for '{}'", to_string(type)));
}

Scenario Scenario::make(const LayoutConfig& layout, const ChannelConfig& channel,
                        const AntennaPattern& antenna) {
    channel.validate();
    Scenario s;
    s.layout_config = layout;
    s.layout = build_layout(layout);
    s.channel = channel;
    s.antenna = antenna;
    s.antennas = facing_antennas(s.layout, antenna);
    return s;
}

std::uint64_t Scenario::fingerprint() const {
    const codec::Json j{{"layout", codec::to_json(layout_config)},
                        {"channel", codec::to_json(channel)},
                        {"antenna", codec::to_json(antenna)}};
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : codec::dump17(j)) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

void SimulationConfig::validate() const {
    if (!(dt > 0.0))
        throw ConfigError("simulation dt must be positive");
    if (pre_roll < 0.0 || post_roll < 0.0 || approach_margin < 0.0 || lane_jitter < 0.0)
        throw ConfigError("simulation rolls, margin and jitter must be non-negative");
    for (const auto& r : speeds)
        if (!(r.min_mps > 0.0) || r.max_mps < r.min_mps)
            throw ConfigError("speed ranges must be positive and ordered");
}

VehicleMix default_mix(int per_type) {
    VehicleMix mix;
    for (auto type : all_vehicle_types)
        mix.emplace_back(type, per_type);
    return mix;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_event_seed(std::uint64_t dataset_seed, std::uint64_t index) {
    return splitmix64(splitmix64(dataset_seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

std::vector<double> baseline_rssi(const Scenario& scenario) {
    ChannelConfig quiet = scenario.channel;
    quiet.noise_sigma_db = 0.0;
    std::vector<double> out;
    out.reserve(scenario.layout.links().size());
    for (const auto& link : scenario.layout.links())
        out.push_back(link_rssi(link, quiet, scenario.antennas.at(link.tx_id),
                                scenario.antennas.at(link.rx_id)));
    return out;
}

double centred_lane(const Scenario& scenario, const VehicleSpec& vehicle) {
    return 0.5 * (scenario.layout.road_width() - vehicle.width);
}

PassageEvent simulate_passage(const Scenario& scenario, const SimulationConfig& sim,
                              const VehicleSpec& vehicle, double speed, double lane_y,
                              std::uint64_t seed, std::uint64_t event_id) {
    sim.validate();
    vehicle.validate();
    if (!(speed > 0.0))
        throw ConfigError(fmt::format("passage speed must be positive, got {}", speed));

    const auto& links = scenario.layout.links();
    double x_first = links.front().tx.x;
    double x_last = x_first;
    for (const auto& link : links) {
        x_first = std::min({x_first, link.tx.x, link.rx.x});
        x_last = std::max({x_last, link.tx.x, link.rx.x});
    }
    const double body_length = vehicle.total_length();
    const double entry_front = x_first - sim.approach_margin;
    const double exit_front = x_last + sim.approach_margin + body_length;

    Pose pose{entry_front, lane_y, +1};
    check_pose_on_road(vehicle, pose, scenario.layout.road_width());

    const auto pre_frames = static_cast<std::size_t>(std::llround(sim.pre_roll / sim.dt));
    const auto post_frames = static_cast<std::size_t>(std::llround(sim.post_roll / sim.dt));
    const auto move_frames =
        static_cast<std::size_t>(std::ceil((exit_front - entry_front) / (speed * sim.dt))) + 1;
    const std::size_t total = pre_frames + move_frames + post_frames;

    const auto baseline = baseline_rssi(scenario);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sigma = scenario.channel.noise_sigma_db;

    PassageEvent event;
    event.event_id = event_id;
    event.type = vehicle.type;
    event.true_speed = speed;
    event.true_length = body_length;
    event.lane_y = lane_y;
    event.dt = sim.dt;
    event.fingerprint = scenario.fingerprint();
    event.frames.reserve(total);

    for (std::size_t k = 0; k < total; ++k) {
        RssiSampleFrame frame;
        frame.t = static_cast<double>(k) * sim.dt;
        frame.values.reserve(links.size());
        const bool moving = k >= pre_frames && k < pre_frames + move_frames;
        pose.front_x = entry_front + speed * static_cast<double>(k - std::min(k, pre_frames)) * sim.dt;
        const Occupant occupant{&vehicle, pose};
        for (std::size_t i = 0; i < links.size(); ++i) {
            const auto& link = links[i];
            const double z = normal(rng);
            if (!moving) {
                const double value = baseline[i] + sigma * z;
                frame.values.push_back(std::max(value, scenario.channel.rssi_floor_dbm));
                continue;
            }
            frame.values.push_back(link_rssi(link, scenario.channel, scenario.antennas.at(link.tx_id),
                                             scenario.antennas.at(link.rx_id), &occupant, z));
        }
        event.frames.push_back(std::move(frame));
    }
    return event;
}

Dataset generate_dataset(const Scenario& scenario, const SimulationConfig& sim,
                         const VehicleCatalog& catalog, const VehicleMix& mix, std::uint64_t seed,
                         unsigned jobs) {
    sim.validate();
    struct Job {
        std::uint64_t index;
        VehicleType type;
    };
    std::vector<Job> plan;
    for (const auto& [type, count] : mix) {
        if (count < 0)
            throw ConfigError("vehicle counts must be non-negative");
        for (int i = 0; i < count; ++i)
            plan.push_back({plan.size(), type});
    }
    if (plan.empty())
        throw ConfigError("vehicle mix is empty");
    for (const auto& [type, count] : mix)
        if (count > 0)
            find_vehicle(catalog, type).validate();

    std::vector<PassageEvent> events(plan.size());
    auto run_one = [&](const Job& job) {
        const auto& vehicle = find_vehicle(catalog, job.type);
        std::mt19937_64 rng(derive_event_seed(seed, job.index));
        const auto& range = sim.speed_for(job.type);
        std::uniform_real_distribution<double> speed_dist(range.min_mps, range.max_mps);
        std::uniform_real_distribution<double> jitter_dist(-sim.lane_jitter, sim.lane_jitter);
        const double speed = speed_dist(rng);
        const double lane = centred_lane(scenario, vehicle) + jitter_dist(rng);
        events[job.index] = simulate_passage(scenario, sim, vehicle, speed, lane, rng(), job.index + 1);
    };

    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(plan.size())));
    if (jobs == 1) {
        for (const auto& job : plan)
            run_one(job);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> workers;
        for (unsigned w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < plan.size(); i = next++) {
                    try {
                        run_one(plan[i]);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure)
                            failure = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : workers)
            t.join();
        if (failure)
            std::rethrow_exception(failure);
    }

    Dataset d;
    d.seed = seed;
    d.fingerprint = scenario.fingerprint();
    d.layout = scenario.layout_config;
    d.channel = scenario.channel;
    d.antenna = scenario.antenna;
    d.simulation = sim;
    d.catalog = catalog;
    d.mix = mix;
    d.events = std::move(events);
    return d;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {
constexpr const char* dataset_format = "rfbarrier-dataset";
constexpr int dataset_version = 1;
} // namespace

void write_dataset(std::ostream& out, const Dataset& dataset) {
    using codec::Json;
    const Json header{{"format", dataset_format},
                      {"version", dataset_version},
                      {"seed", dataset.seed},
                      {"fingerprint", codec::hex64(dataset.fingerprint)},
                      {"event_count", dataset.events.size()},
                      {"layout", codec::to_json(dataset.layout)},
                      {"channel", codec::to_json(dataset.channel)},
                      {"antenna", codec::to_json(dataset.antenna)},
                      {"simulation", codec::to_json(dataset.simulation)},
                      {"catalog", codec::to_json(dataset.catalog)},
                      {"mix", codec::to_json(dataset.mix)}};
    out << codec::dump17(header) << '\n';

    std::string line;
    for (const auto& e : dataset.events) {
        line.clear();
        line += fmt::format(
            R"({{"event_id":{},"type":"{}","label":"{}","true_speed":{:.17g},"true_length":{:.17g},"lane_y":{:.17g},"dt":{:.17g},"fingerprint":"{}","frames":[)",
            e.event_id, to_string(e.type), to_string(e.label()), e.true_speed, e.true_length, e.lane_y,
            e.dt, codec::hex64(e.fingerprint));
        for (std::size_t k = 0; k < e.frames.size(); ++k) {
            if (k)
                line += ',';
            line += fmt::format("[{:.17g}", e.frames[k].t);
            for (double v : e.frames[k].values)
                line += fmt::format(",{:.17g}", v);
            line += ']';
        }
        line += "]}\n";
        out << line;
    }
}

Dataset read_dataset(std::istream& in) {
    using codec::Json;
    std::string line;
    if (!std::getline(in, line))
        throw InputError("dataset stream is empty");
    Dataset d;
    std::size_t expected = 0;
    try {
        const auto header = Json::parse(line);
        if (header.value("format", "") != dataset_format)
            throw InputError("not an rfbarrier dataset");
        if (header.at("version").get<int>() != dataset_version)
            throw InputError("unsupported dataset version");
        d.seed = header.at("seed").get<std::uint64_t>();
        d.fingerprint = codec::parse_hex64(header.at("fingerprint").get<std::string>());
        expected = header.at("event_count").get<std::size_t>();
        d.layout = codec::layout_from_json(header.at("layout"));
        d.channel = codec::channel_from_json(header.at("channel"));
        d.antenna = codec::antenna_from_json(header.at("antenna"));
        d.simulation = codec::simulation_from_json(header.at("simulation"));
        d.catalog = codec::catalog_from_json(header.at("catalog"));
        d.mix = codec::mix_from_json(header.at("mix"));

        while (std::getline(in, line)) {
            if (line.empty())
                continue;
            const auto j = Json::parse(line);
            PassageEvent e;
            e.event_id = j.at("event_id").get<std::uint64_t>();
            e.type = parse_vehicle_type(j.at("type").get<std::string>());
            e.true_speed = j.at("true_speed").get<double>();
            e.true_length = j.at("true_length").get<double>();
            e.lane_y = j.at("lane_y").get<double>();
            e.dt = j.at("dt").get<double>();
            e.fingerprint = codec::parse_hex64(j.at("fingerprint").get<std::string>());
            for (const auto& f : j.at("frames")) {
                RssiSampleFrame frame;
                frame.t = f.at(0).get<double>();
                for (std::size_t i = 1; i < f.size(); ++i)
                    frame.values.push_back(f[i].get<double>());
                e.frames.push_back(std::move(frame));
            }
            d.events.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw InputError(fmt::format("malformed dataset: {}", ex.what()));
    }
    if (d.events.size() != expected)
        throw InputError(fmt::format("dataset header announces {} events, found {}", expected,
                                     d.events.size()));
    return d;
}

void save_dataset(const std::string& path, const Dataset& dataset) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw InputError(fmt::format("cannot write dataset '{}'", path));
    write_dataset(out, dataset);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError(fmt::format("cannot open dataset '{}'", path));
    return read_dataset(in);
}

} // namespace rfbarrier
