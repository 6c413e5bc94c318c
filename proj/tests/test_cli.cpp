#include "rfbarrier/cli.hpp"
#include "rfbarrier/config.hpp"
#include "rfbarrier/error.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rfbarrier;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::path(RFB_TEST_TMP) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

const char* small_config = R"(seed: 5
mix:
  passenger_car: 6
  small_van: 4
  van: 4
  transporter: 4
  bus: 5
  truck: 5
)";

} // namespace

TEST_CASE("usage errors exit with 1") {
    CHECK(run({}).code == cli::exit_usage);
    CHECK(run({"fly"}).code == cli::exit_usage);
    CHECK(run({"generate", "--bogus"}).code == cli::exit_usage);
    CHECK(run({"--version"}).code == cli::exit_ok);
}

TEST_CASE("configuration errors exit with 2") {
    const auto dir = scratch("config_errors");
    spit(dir / "unknown.yaml", "layout:\n  lanes: 2\n");
    spit(dir / "broken.yaml", "layout: [1, 2\n");
    spit(dir / "thresholds.yaml", "detection:\n  drop_threshold: 3\n  release_threshold: 4\n");
    for (const char* name : {"unknown.yaml", "broken.yaml", "thresholds.yaml"}) {
        const auto r = run({"baseline", "--config", (dir / name).string()});
        CHECK_MESSAGE(r.code == cli::exit_config, std::string(name));
        CHECK_FALSE(r.err.empty());
    }
    CHECK(run({"baseline", "--config", (dir / "missing.yaml").string()}).code == cli::exit_config);
}

TEST_CASE("input errors exit with 3") {
    const auto dir = scratch("input_errors");
    CHECK(run({"detect", "--dataset", (dir / "none.jsonl").string(), "--out", dir.string()}).code ==
          cli::exit_input);
    spit(dir / "bad.jsonl", "{\"format\":\"rfbarrier-dataset\",\"version\":1}\n{");
    CHECK(run({"detect", "--dataset", (dir / "bad.jsonl").string(), "--out", dir.string()}).code ==
          cli::exit_input);
    CHECK(run({"crossval", "--table", (dir / "none.csv").string()}).code == cli::exit_input);
}

TEST_CASE("single-class training exits with 4") {
    const auto dir = scratch("training_errors");
    spit(dir / "cfg.yaml", "mix:\n  van: 8\n");
    REQUIRE(run({"generate", "--config", (dir / "cfg.yaml").string(), "--out", (dir / "g").string()}).code == 0);
    REQUIRE(run({"features", "--dataset", (dir / "g/dataset.jsonl").string(), "--out", (dir / "f").string()}).code == 0);
    const auto r = run({"crossval", "--table", (dir / "f/features.csv").string(), "--learner", "svm", "--folds", "2"});
    CHECK(r.code == cli::exit_training);
}

TEST_CASE("generate is deterministic and independent of jobs") {
    const auto dir = scratch("determinism");
    spit(dir / "cfg.yaml", small_config);
    const auto cfg = (dir / "cfg.yaml").string();
    REQUIRE(run({"generate", "--config", cfg, "--seed", "42", "--out", (dir / "a").string()}).code == 0);
    REQUIRE(run({"generate", "--config", cfg, "--seed", "42", "--out", (dir / "b").string()}).code == 0);
    REQUIRE(run({"generate", "--config", cfg, "--seed", "42", "--jobs", "3", "--out", (dir / "c").string()}).code == 0);
    const auto a = slurp(dir / "a/dataset.jsonl");
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(dir / "b/dataset.jsonl"));
    CHECK(a == slurp(dir / "c/dataset.jsonl"));
    REQUIRE(run({"generate", "--config", "default", "--seed", "42", "--out", (dir / "d").string()}).code == 0);
    REQUIRE(run({"generate", "--config", "default", "--seed", "42", "--out", (dir / "e").string()}).code == 0);
    CHECK(slurp(dir / "d/dataset.jsonl") == slurp(dir / "e/dataset.jsonl"));
}

TEST_CASE("seed precedence: flag, environment, config") {
    const auto dir = scratch("seeds");
    spit(dir / "cfg.yaml", std::string(small_config));
    const auto cfg = (dir / "cfg.yaml").string();
    auto seed_of = [&](const std::string& sub) {
        const auto m = nlohmann::json::parse(slurp(dir / sub / "manifest.json"));
        return m.at("seed").get<std::uint64_t>();
    };
    ::unsetenv("RFBARRIER_SEED");
    REQUIRE(run({"baseline", "--config", cfg, "--out", (dir / "c").string()}).code == 0);
    CHECK(seed_of("c") == 5);
    ::setenv("RFBARRIER_SEED", "17", 1);
    REQUIRE(run({"baseline", "--config", cfg, "--out", (dir / "e").string()}).code == 0);
    CHECK(seed_of("e") == 17);
    REQUIRE(run({"baseline", "--config", cfg, "--seed", "3", "--out", (dir / "f").string()}).code == 0);
    CHECK(seed_of("f") == 3);
    ::unsetenv("RFBARRIER_SEED");
}

TEST_CASE("full chain with manifests and re-runs") {
    const auto dir = scratch("chain");
    spit(dir / "cfg.yaml", small_config);
    const auto cfg = (dir / "cfg.yaml").string();
    REQUIRE(run({"generate", "--config", cfg, "--out", (dir / "gen").string()}).code == 0);
    REQUIRE(run({"detect", "--config", cfg, "--dataset", (dir / "gen/dataset.jsonl").string(), "--out",
                 (dir / "det").string()}).code == 0);
    REQUIRE(run({"features", "--config", cfg, "--segments", (dir / "det/segments.jsonl").string(), "--out",
                 (dir / "feat").string()}).code == 0);

    const auto cv = run({"crossval", "--config", cfg, "--table", (dir / "feat/features.csv").string(), "--out",
                         (dir / "cv").string()});
    REQUIRE(cv.code == 0);
    for (const char* token : {"Training set", "Test set", "S1", "S2", "S3", "S4", "S5", "Mean ± std"})
        CHECK_MESSAGE(cv.out.find(token) != std::string::npos, std::string(token));

    const auto ev = run({"evaluate", "--config", cfg, "--table", (dir / "feat/features.csv").string(), "--out",
                         (dir / "eval").string()});
    REQUIRE(ev.code == 0);
    for (const char* token : {"Test samples", "Rec. rate", "passenger_car", "truck", "Overall success rate"})
        CHECK_MESSAGE(ev.out.find(token) != std::string::npos, std::string(token));
    CHECK(fs::exists(dir / "eval/model.json"));

    const auto again = run({"evaluate", "--config", cfg, "--table", (dir / "feat/features.csv").string(),
                            "--model", (dir / "eval/model.json").string(), "--out", (dir / "eval2").string()});
    REQUIRE(again.code == 0);

    const auto st = run({"study", "--config", cfg, "--plot-data", "--out", (dir / "study").string()});
    REQUIRE(st.code == 0);
    CHECK(fs::exists(dir / "study/histogram.csv"));
    CHECK(fs::exists(dir / "study/drops.csv"));

    const auto rep = run({"report", "--input", (dir / "cv/cv.json").string(), (dir / "eval/evaluation.json").string(),
                          "--format", "markdown"});
    REQUIRE(rep.code == 0);
    CHECK(rep.out.find("| S1") != std::string::npos);
    CHECK(rep.out.find("Overall success rate") != std::string::npos);

    for (const char* sub : {"gen", "det", "feat", "cv", "eval", "study"}) {
        REQUIRE(fs::exists(dir / sub / "manifest.json"));
        const auto m = nlohmann::json::parse(slurp(dir / sub / "manifest.json"));
        CHECK(m.contains("command"));
        CHECK(m.contains("config"));
        CHECK(m.at("artifact_version") == cli::artifact_version);
    }

    // Re-run the feature stage from its manifest.
    REQUIRE(run({"features", "--config", (dir / "feat/manifest.json").string(), "--segments",
                 (dir / "det/segments.jsonl").string(), "--out", (dir / "feat2").string()}).code == 0);
    CHECK(slurp(dir / "feat/features.csv") == slurp(dir / "feat2/features.csv"));
    REQUIRE(run({"generate", "--config", (dir / "gen/manifest.json").string(), "--out", (dir / "gen2").string()}).code ==
            0);
    CHECK(slurp(dir / "gen/dataset.jsonl") == slurp(dir / "gen2/dataset.jsonl"));
}

TEST_CASE("feature flags select the column groups") {
    const auto dir = scratch("flags");
    spit(dir / "cfg.yaml", small_config);
    const auto cfg = (dir / "cfg.yaml").string();
    REQUIRE(run({"generate", "--config", cfg, "--out", (dir / "gen").string()}).code == 0);
    auto columns = [&](const std::vector<std::string>& extra) {
        std::vector<std::string> args{"features", "--config", cfg, "--dataset", (dir / "gen/dataset.jsonl").string(),
                                      "--out", (dir / "f").string()};
        args.insert(args.end(), extra.begin(), extra.end());
        REQUIRE(run(args).code == 0);
        const auto text = slurp(dir / "f/features.csv");
        const auto header = text.substr(0, text.find('\n'));
        return static_cast<long>(std::count(header.begin(), header.end(), ',')) + 1 - 6;
    };
    CHECK(columns({"--features", "length"}) == 1);
    CHECK(columns({"--features", "rssi"}) == 288);
    CHECK(columns({"--features", "both"}) == 289);
    CHECK(columns({"--features", "both", "--links", "direct"}) == 97);
}

TEST_CASE("config parsing") {
    const auto c = parse_config(small_config);
    CHECK(c.seed == 5);
    int total = 0;
    for (const auto& [t, n] : c.mix)
        total += n;
    CHECK(total == 28);
    CHECK_THROWS_AS(parse_config("channel:\n  power: 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("mix:\n  tram: 3\n"), Error);
    CHECK_THROWS_AS(parse_config("simulation:\n  dt: 0.1\n").validate(), ConfigError);

    const auto custom = parse_config(
        "channel:\n  ground_reflection: false\n  noise_sigma_db: 0.5\nlearner:\n  kind: svm\n  kernel: linear\n"
        "vehicles:\n  - type: bus\n    width: 2.4\n    segments:\n      - {length: 11, top_height: 3.2, ground_clearance: 0.3}\n");
    CHECK_FALSE(custom.channel.ground_reflection);
    CHECK(custom.channel.noise_sigma_db == 0.5);
    CHECK(custom.learner.kind == LearnerKind::svm);
    CHECK(custom.learner.svm.kernel.kind == KernelKind::linear);
    CHECK(find_vehicle(custom.catalog, VehicleType::bus).total_length() == 11.0);

    const auto text = config_to_json(custom);
    CHECK(config_to_json(parse_config(text)) == text);
    CHECK(config_to_json(load_config("default")) == config_to_json(RunConfig{}));
}

TEST_CASE("the example config parses and keeps its overrides") {
    const auto c = load_config(std::string(RFB_SOURCE_DIR) + "/config/example.yaml");
    CHECK_NOTHROW(c.validate());
    CHECK(c.simulation.speed_for(VehicleType::truck).max_mps == 15.0);
    CHECK(c.simulation.speed_for(VehicleType::van).max_mps == 20.0);
    CHECK(c.features.links_used == LinkSelection::all);
}
