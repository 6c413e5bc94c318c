#include "rfbarrier/cli.hpp"

#include "json_codec.hpp"
#include "rfbarrier/config.hpp"
#include "rfbarrier/error.hpp"
#include "rfbarrier/learn.hpp"
#include "rfbarrier/pipeline.hpp"
#include "rfbarrier/report.hpp"
#include "rfbarrier/simulator.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace rfbarrier::cli {

namespace fs = std::filesystem;
using codec::Json;

namespace {

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError(fmt::format("cannot open '{}'", path));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InputError(fmt::format("cannot open '{}'", path));
    return in;
}

std::string utc_timestamp() {
    std::time_t t = std::time(nullptr);
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"))
        t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Json table_json(const Table& t) {
    return Json{{"title", t.title}, {"headers", t.headers}, {"rows", t.rows}};
}

Table table_from(const Json& j) {
    Table t;
    t.title = j.value("title", std::string());
    t.headers = j.at("headers").get<std::vector<std::string>>();
    t.rows = j.at("rows").get<std::vector<std::vector<std::string>>>();
    return t;
}

// Options every subcommand understands.
struct Common {
    std::string config_path = "default";
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
    std::string format = "text";
    std::string out_dir;
};

struct Context {
    std::string command;
    std::vector<std::string> args;
    Common common;
    RunConfig config;
    TableFormat format = TableFormat::text;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs; // file names inside out_dir
    std::ostream* out = nullptr;
    std::ostream* err = nullptr;

    fs::path out_path(const std::string& name) const { return fs::path(common.out_dir) / name; }

    void write_output(const std::string& name, const std::string& bytes) {
        fs::create_directories(common.out_dir);
        std::ofstream f(out_path(name), std::ios::binary);
        if (!f)
            throw InputError(fmt::format("cannot write '{}'", out_path(name).string()));
        f << bytes;
        if (!f)
            throw InputError(fmt::format("failed writing '{}'", out_path(name).string()));
        outputs.push_back(name);
    }

    void write_results(const std::string& name, const std::string& kind, const std::vector<Table>& tables,
                       Json data) {
        Json j;
        j["kind"] = kind;
        j["tables"] = Json::array();
        for (const auto& t : tables)
            j["tables"].push_back(table_json(t));
        j["data"] = std::move(data);
        write_output(name, codec::dump17(j) + "\n");
    }

    void print(const std::vector<Table>& tables) const {
        for (std::size_t i = 0; i < tables.size(); ++i)
            *out << (i ? "\n" : "") << render(tables[i], format);
    }

    void write_manifest() {
        if (common.out_dir.empty())
            return;
        Json m;
        m["command"] = command;
        m["argv"] = args;
        m["config_path"] = common.config_path;
        m["seed"] = config.seed;
        m["jobs"] = common.jobs;
        Json in = Json::array();
        for (const auto& p : inputs)
            in.push_back(Json{{"path", p}, {"fnv1a64", codec::hex64(fnv1a(read_file(p)))}});
        m["inputs"] = in;
        Json outs = Json::array();
        for (const auto& name : outputs)
            outs.push_back(Json{{"path", name},
                                {"fnv1a64", codec::hex64(fnv1a(read_file(out_path(name).string())))}});
        m["outputs"] = outs;
        m["artifact_version"] = artifact_version;
        m["timestamp"] = utc_timestamp();
        m["config"] = Json::parse(config_to_json(config));
        fs::create_directories(common.out_dir);
        std::ofstream f(out_path("manifest.json"));
        f << m.dump(2) << '\n';
        if (!f)
            throw InputError("failed writing manifest.json");
    }
};

void require_out(const Context& ctx) {
    if (ctx.common.out_dir.empty())
        throw ConfigError(fmt::format("'{}' needs --out DIR", ctx.command));
}

// ---------------------------------------------------------------------------

void cmd_generate(Context& ctx) {
    require_out(ctx);
    const auto& c = ctx.config;
    const Scenario scenario = c.scenario();
    const Dataset ds = generate_dataset(scenario, c.simulation, c.catalog, c.mix, c.seed, ctx.common.jobs);
    std::ostringstream os;
    write_dataset(os, ds);
    ctx.write_output("dataset.jsonl", os.str());
    std::size_t frames = 0;
    for (const auto& e : ds.events)
        frames += e.frames.size();
    *ctx.out << fmt::format("generated {} events ({} frames, {} links) with seed {} into {}\n",
                            ds.events.size(), frames, scenario.layout.links().size(), c.seed,
                            ctx.out_path("dataset.jsonl").string());
}

void cmd_baseline(Context& ctx) {
    const Scenario scenario = ctx.config.scenario();
    const Table t = baseline_table(scenario);
    ctx.print({t});
    if (!ctx.common.out_dir.empty()) {
        const auto rssi = baseline_rssi(scenario);
        Json links = Json::array();
        for (std::size_t i = 0; i < rssi.size(); ++i)
            links.push_back(Json{{"link_id", scenario.layout.links()[i].id}, {"rssi_dbm", rssi[i]}});
        ctx.write_results("baseline.json", "baseline", {t},
                          Json{{"fingerprint", codec::hex64(scenario.fingerprint())}, {"links", links}});
    }
}

struct DetectOptions {
    std::string dataset;
};

void cmd_detect(Context& ctx, const DetectOptions& o) {
    require_out(ctx);
    ctx.inputs.push_back(o.dataset);
    const Dataset ds = load_dataset(o.dataset);
    const SegmentSet set = detect_dataset(ds, ctx.config.detection);
    std::ostringstream os;
    write_segments(os, set);
    ctx.write_output("segments.jsonl", os.str());
    const Table t = detection_table(set);
    std::size_t detected = 0, extra = 0;
    for (const auto& p : set.passages) {
        detected += p.segments.empty() ? 0 : 1;
        extra += p.segments.size() > 1 ? p.segments.size() - 1 : 0;
    }
    ctx.write_results("detection.json", "detection", {t},
                      Json{{"passages", set.passages.size()}, {"detected", detected}, {"extra_segments", extra}});
    ctx.print({t});
}

struct FeatureOptions {
    std::string segments;
    std::string dataset;
    std::string families;
    std::string links;
};

void cmd_features(Context& ctx, const FeatureOptions& o) {
    require_out(ctx);
    SegmentSet set;
    if (!o.segments.empty()) {
        ctx.inputs.push_back(o.segments);
        auto in = open_input(o.segments);
        set = read_segments(in);
    } else {
        ctx.inputs.push_back(o.dataset);
        set = detect_dataset(load_dataset(o.dataset), ctx.config.detection);
    }
    const SensorLayout layout = build_layout(set.layout);
    const FeatureConfig& fc = ctx.config.features;

    FeatureTable table;
    std::size_t missed = 0, failed = 0;
    for (const auto& p : set.passages) {
        const EventSegment* seg = primary_segment(p);
        if (!seg) {
            ++missed;
            *ctx.err << fmt::format("warning: event {} has no detected segment, skipped\n", p.event_id);
            continue;
        }
        try {
            const double v = estimate_speed(*seg, layout);
            const double len = estimate_length(*seg, v, layout);
            FeatureVector fv = extract_features(*seg, v, len, fc);
            fv.event_id = p.event_id;
            fv.type = p.type;
            table.rows.push_back(std::move(fv));
        } catch (const EstimationError& e) {
            ++failed;
            *ctx.err << fmt::format("warning: event {}: {}, skipped\n", p.event_id, e.what());
        }
    }
    if (table.rows.empty())
        throw EstimationError("no feature rows could be extracted");
    std::ostringstream os;
    write_feature_table(os, table);
    ctx.write_output("features.csv", os.str());
    *ctx.out << fmt::format("extracted {} feature rows of dimension {} ({} without detection, {} failed estimation)\n",
                            table.rows.size(), table.dimension(), missed, failed);
}

FeatureTable load_table(Context& ctx, const std::string& path) {
    ctx.inputs.push_back(path);
    auto in = open_input(path);
    FeatureTable t = read_feature_table(in);
    if (t.rows.empty())
        throw InputError(fmt::format("feature table '{}' has no rows", path));
    return t;
}

std::string learner_title(const LearnerSpec& s) {
    switch (s.kind) {
    case LearnerKind::knn:
        return fmt::format("k-NN (k = {})", s.k);
    case LearnerKind::svm:
        return fmt::format("SVM ({}, C = {})", s.svm.kernel.kind == KernelKind::rbf ? "RBF" : "linear", s.svm.c);
    case LearnerKind::length_threshold:
        return "length threshold";
    }
    return "?";
}

struct TableOptions {
    std::string table;
    std::string test_table;
    std::string model_in;
};

void cmd_crossval(Context& ctx, const TableOptions& o) {
    const FeatureTable table = load_table(ctx, o.table);
    const auto& c = ctx.config;
    const CvSummary s = cross_validate(table.rows, c.learner, c.folds, c.seed, c.stratified, ctx.common.jobs);
    const Table t = cv_table(s, "Cross-validation, " + learner_title(c.learner));
    ctx.print({t});
    if (!ctx.common.out_dir.empty()) {
        Json folds = Json::array();
        for (std::size_t f = 0; f < s.fold_accuracies.size(); ++f)
            folds.push_back(Json{{"accuracy", s.fold_accuracies[f]},
                                 {"train_size", s.train_sizes[f]},
                                 {"test_event_ids", s.fold_event_ids[f]}});
        ctx.write_results("cv.json", "crossval", {t},
                          Json{{"learner", codec::to_json(c.learner)},
                               {"folds", folds},
                               {"mean", s.mean},
                               {"sample_std", s.sample_std}});
    }
}

void cmd_evaluate(Context& ctx, const TableOptions& o) {
    const FeatureTable table = load_table(ctx, o.table);
    const auto& c = ctx.config;
    std::vector<FeatureVector> train, test;
    if (!o.test_table.empty()) {
        train = table.rows;
        test = load_table(ctx, o.test_table).rows;
    } else {
        // Hold out the first fold of the configured partition.
        const auto folds = assign_folds(table.rows, c.folds, c.seed, c.stratified);
        const auto& held = folds.front();
        for (const auto& r : table.rows)
            (std::binary_search(held.begin(), held.end(), r.event_id) ? test : train).push_back(r);
    }
    Model model;
    if (!o.model_in.empty()) {
        ctx.inputs.push_back(o.model_in);
        auto in = open_input(o.model_in);
        model = load_model(in);
    } else {
        model = fit_model(c.learner, train);
    }
    const EvaluationReport r = evaluate(model, test);
    const std::string title = o.model_in.empty() ? "Evaluation, " + learner_title(c.learner)
                                                 : "Evaluation, model " + o.model_in;
    const std::vector<Table> tables = {evaluation_table(r, title), confusion_table(r)};
    ctx.print(tables);
    if (!ctx.common.out_dir.empty()) {
        if (o.model_in.empty()) {
            std::ostringstream os;
            save_model(os, model);
            ctx.write_output("model.json", os.str());
        }
        Json per_type = Json::array();
        for (const auto& t : r.per_type)
            per_type.push_back(Json{{"type", to_string(t.type)}, {"samples", t.samples}, {"correct", t.correct}});
        ctx.write_results("evaluation.json", "evaluation", tables,
                          Json{{"train_size", train.size()},
                               {"test_size", r.total},
                               {"correct", r.correct},
                               {"overall_percent", r.overall_percent()},
                               {"confusion", r.confusion},
                               {"per_type", per_type}});
    }
}

struct StudyOptions {
    bool plot_data = false;
    double bin_width = 1.0;
};

void cmd_study(Context& ctx, const StudyOptions& o) {
    if (o.plot_data)
        require_out(ctx);
    if (!(o.bin_width > 0.0))
        throw ConfigError("histogram bin width must be positive");
    const auto& c = ctx.config;
    const ReflectionStudy study =
        reflection_study(c.scenario(), c.simulation, c.catalog, c.mix, c.seed, c.detection, ctx.common.jobs);
    const Table t = study_table(study);
    ctx.print({t});
    if (ctx.common.out_dir.empty())
        return;
    Json variants = Json::array();
    for (const auto& v : study.variants) {
        Json labels = Json::object();
        for (std::size_t l = 0; l < 2; ++l) {
            const auto& s = v.by_label[l];
            labels[std::string(to_string(static_cast<Label>(l)))] =
                Json{{"samples", s.samples}, {"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max}};
        }
        variants.push_back(Json{{"name", v.name}, {"by_label", labels}, {"car_minus_truck", v.car_minus_truck()}});
    }
    ctx.write_results("study.json", "study", {t}, Json{{"variants", variants}});
    if (!o.plot_data)
        return;
    std::string drops = "variant,type_name,label,drop_db\n";
    std::string hist = "variant,label,bin_low_db,bin_high_db,count\n";
    for (const auto& v : study.variants) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& [type, d] : v.samples) {
            drops += fmt::format("{},{},{},{:.17g}\n", v.name, to_string(type), to_string(label_of(type)), d);
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        const double start = std::floor(lo / o.bin_width) * o.bin_width;
        const auto bins = static_cast<std::size_t>(std::floor((hi - start) / o.bin_width)) + 1;
        for (std::size_t l = 0; l < 2; ++l) {
            std::vector<std::size_t> counts(bins, 0);
            for (const auto& [type, d] : v.samples)
                if (static_cast<std::size_t>(label_of(type)) == l)
                    ++counts[std::min(bins - 1, static_cast<std::size_t>(std::floor((d - start) / o.bin_width)))];
            for (std::size_t b = 0; b < bins; ++b)
                hist += fmt::format("{},{},{:.6g},{:.6g},{}\n", v.name, to_string(static_cast<Label>(l)),
                                    start + o.bin_width * b, start + o.bin_width * (b + 1), counts[b]);
        }
    }
    ctx.write_output("drops.csv", drops);
    ctx.write_output("histogram.csv", hist);
}

struct ReportOptions {
    std::vector<std::string> inputs;
};

void cmd_report(Context& ctx, const ReportOptions& o) {
    bool first = true;
    for (const auto& path : o.inputs) {
        ctx.inputs.push_back(path);
        Json j;
        try {
            j = Json::parse(read_file(path));
        } catch (const nlohmann::json::exception& e) {
            throw InputError(fmt::format("'{}' is not a results file: {}", path, e.what()));
        }
        if (!j.is_object() || !j.contains("tables"))
            throw InputError(fmt::format("'{}' is not a results file", path));
        try {
            for (const auto& t : j.at("tables")) {
                *ctx.out << (first ? "" : "\n") << render(table_from(t), ctx.format);
                first = false;
            }
        } catch (const nlohmann::json::exception& e) {
            throw InputError(fmt::format("'{}' has malformed tables: {}", path, e.what()));
        }
    }
}

void add_common(CLI::App* sub, Common& c, bool with_out, bool out_required = false) {
    sub->add_option("--config", c.config_path, "YAML/JSON config file, a run manifest, or 'default'");
    sub->add_option("--seed", c.seed, "Seed for all randomness (overrides RFBARRIER_SEED and the config)");
    sub->add_option("--jobs", c.jobs, "Worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber);
    sub->add_option("--format", c.format, "Table format for stdout")
        ->check(CLI::IsMember({"text", "markdown", "md"}));
    if (with_out) {
        auto* opt = sub->add_option("--out", c.out_dir, "Output directory");
        if (out_required)
            opt->required();
    }
}

RunConfig resolve_config(const Common& c) {
    RunConfig cfg = load_config(c.config_path);
    if (c.seed) {
        cfg.seed = *c.seed;
    } else if (const char* env = std::getenv("RFBARRIER_SEED"); env && *env) {
        std::uint64_t v = 0;
        const std::string s = env;
        auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
            throw ConfigError(fmt::format("RFBARRIER_SEED='{}' is not an unsigned integer", s));
        cfg.seed = v;
    }
    return cfg;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Radio-barrier vehicle classification simulator", "rfbarrier"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", artifact_version);

    Common common;
    DetectOptions det;
    FeatureOptions feat;
    TableOptions tab;
    StudyOptions study;
    ReportOptions rep;
    std::optional<std::string> learner;
    std::optional<int> k, folds;
    bool no_stratify = false;

    auto* gen = app.add_subcommand("generate", "Simulate a labelled passage dataset");
    add_common(gen, common, true, true);

    auto* base = app.add_subcommand("baseline", "Vehicle-free RSSI per link");
    add_common(base, common, true);

    auto* detect = app.add_subcommand("detect", "Segment the passages of a dataset");
    add_common(detect, common, true, true);
    detect->add_option("--dataset", det.dataset, "dataset.jsonl from 'generate'")->required();

    auto* features = app.add_subcommand("features", "Estimate speed/length and build feature vectors");
    add_common(features, common, true, true);
    auto* seg_opt = features->add_option("--segments", feat.segments, "segments.jsonl from 'detect'");
    auto* ds_opt = features->add_option("--dataset", feat.dataset, "dataset.jsonl (detection runs inline)");
    seg_opt->excludes(ds_opt);
    features->add_option("--features", feat.families, "Feature families")
        ->check(CLI::IsMember({"length", "rssi", "both"}));
    features->add_option("--links", feat.links, "Links feeding the RSSI profile")
        ->check(CLI::IsMember({"all", "direct"}));

    auto add_learner = [&](CLI::App* sub) {
        sub->add_option("--learner", learner, "knn, svm or length-threshold");
        sub->add_option("--k", k, "Neighbours for k-NN")->check(CLI::PositiveNumber);
        sub->add_option("--folds", folds, "Number of folds")->check(CLI::Range(2, 1000));
        sub->add_flag("--no-stratify", no_stratify, "Shuffle folds without stratifying by label");
    };

    auto* cv = app.add_subcommand("crossval", "k-fold cross-validation on a feature table");
    add_common(cv, common, true);
    cv->add_option("--table", tab.table, "features.csv")->required();
    add_learner(cv);

    auto* eval = app.add_subcommand("evaluate", "Train/test evaluation with per-type rates");
    add_common(eval, common, true);
    eval->add_option("--table", tab.table, "features.csv (training data, or all data with a holdout fold)")
        ->required();
    eval->add_option("--test-table", tab.test_table, "Separate test features.csv");
    eval->add_option("--model", tab.model_in, "Evaluate a saved model.json instead of training");
    add_learner(eval);

    auto* st = app.add_subcommand("study", "Ground reflection on/off drop statistics");
    add_common(st, common, true);
    st->add_flag("--plot-data", study.plot_data, "Also export drops.csv and histogram.csv");
    st->add_option("--bin-width", study.bin_width, "Histogram bin width in dB");

    auto* rpt = app.add_subcommand("report", "Render results files as tables");
    add_common(rpt, common, false);
    rpt->add_option("--input", rep.inputs, "Results JSON (baseline, detection, cv, evaluation, study)")
        ->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    Context ctx;
    ctx.command = app.get_subcommands().front()->get_name();
    ctx.args = args;
    ctx.common = common;
    ctx.out = &out;
    ctx.err = &err;
    try {
        ctx.format = parse_table_format(common.format);
        ctx.config = resolve_config(common);
        if (learner)
            ctx.config.learner.kind = parse_learner(*learner);
        if (k)
            ctx.config.learner.k = *k;
        if (folds)
            ctx.config.folds = *folds;
        if (no_stratify)
            ctx.config.stratified = false;
        if (!feat.families.empty()) {
            ctx.config.features.include_length = feat.families != "rssi";
            ctx.config.features.include_rssi = feat.families != "length";
        }
        if (!feat.links.empty())
            ctx.config.features.links_used = feat.links == "direct" ? LinkSelection::direct_only : LinkSelection::all;
        ctx.config.validate();

        if (ctx.command == "generate")
            cmd_generate(ctx);
        else if (ctx.command == "baseline")
            cmd_baseline(ctx);
        else if (ctx.command == "detect")
            cmd_detect(ctx, det);
        else if (ctx.command == "features") {
            if (feat.segments.empty() && feat.dataset.empty())
                throw ConfigError("'features' needs --segments or --dataset");
            cmd_features(ctx, feat);
        } else if (ctx.command == "crossval")
            cmd_crossval(ctx, tab);
        else if (ctx.command == "evaluate")
            cmd_evaluate(ctx, tab);
        else if (ctx.command == "study")
            cmd_study(ctx, study);
        else
            cmd_report(ctx, rep);
        ctx.write_manifest();
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return exit_config;
    } catch (const DomainError& e) {
        err << "configuration error: " << e.what() << '\n';
        return exit_config;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << '\n';
        return exit_input;
    } catch (const EstimationError& e) {
        err << "estimation error: " << e.what() << '\n';
        return exit_training;
    } catch (const TrainingError& e) {
        err << "training error: " << e.what() << '\n';
        return exit_training;
    } catch (const fs::filesystem_error& e) {
        err << "input error: " << e.what() << '\n';
        return exit_input;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    }
    return exit_ok;
}

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

} // namespace rfbarrier::cli
