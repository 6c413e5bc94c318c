// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include "oracle.hpp"
#include "trace_tools.hpp"

#include "rfbarrier/config.hpp"
#include "rfbarrier/error.hpp"
#include "rfbarrier/learn.hpp"
#include "rfbarrier/pipeline.hpp"
#include "rfbarrier/simulator.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace rfbarrier;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

std::vector<double> link_trace(const PassageEvent& e, std::size_t i) {
    std::vector<double> t;
    for (const auto& f : e.frames)
        t.push_back(f.values[i]);
    return t;
}

std::string serialize(const Dataset& d) {
    std::ostringstream out;
    write_dataset(out, d);
    return out.str();
}

// Shared benchmark data for criteria 5 and 9.
struct Benchmark {
    RunConfig config;
    Scenario scenario;
    Dataset dataset;
    std::vector<FeatureVector> both, rssi, length;
    SegmentSet segments;

    Benchmark() : scenario(config.scenario()) {
        dataset = generate_dataset(scenario, config.simulation, config.catalog, config.mix, config.seed, 4);
        segments = detect_dataset(dataset, config.detection);
        FeatureConfig f_rssi, f_len;
        f_rssi.include_length = false;
        f_len.include_rssi = false;
        for (const auto& e : dataset.events) {
            try {
                both.push_back(process_event(e, scenario.layout, config.detection, config.features));
                rssi.push_back(process_event(e, scenario.layout, config.detection, f_rssi));
                length.push_back(process_event(e, scenario.layout, config.detection, f_len));
            } catch (const Error&) {
            }
        }
    }
};

Benchmark& benchmark() {
    static Benchmark b;
    return b;
}

Outcome friis_oracle() {
    Outcome o;
    ChannelConfig ch;
    ch.noise_sigma_db = 0.0;
    ch.reflection.magnitude = 0.0;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> x(-20, 20), y(1, 20), z(0.1, 3), g(-5, 10), p(-10, 20), f(0.4e9, 6e9);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        ch.tx_power_dbm = p(rng);
        ch.frequency_hz = f(rng);
        const double gt = g(rng), gr = g(rng);
        RadioLink link;
        link.tx = {x(rng), 0.0, z(rng)};
        link.rx = {x(rng), y(rng), z(rng)};
        const double expected =
            oracle::friis_dbm(ch.tx_power_dbm, gt, gr,
                              oracle::dist({link.tx.x, link.tx.y, link.tx.z}, {link.rx.x, link.rx.y, link.rx.z}),
                              ch.frequency_hz);
        worst = std::max(worst, std::abs(link_rssi(link, ch, AntennaPattern::omni(gt), AntennaPattern::omni(gr)) - expected));
    }
    o.require(worst <= 1e-9, fmt::format("max deviation {:.3g} dB", worst));
    o.detail = o.pass ? fmt::format("max deviation {:.3g} dB over 1000 geometries", worst) : o.detail;
    return o;
}

Outcome knife_edge() {
    Outcome o;
    const double at0 = knife_edge_loss_db(0.0);
    o.require(std::abs(at0 - 6.03) <= 0.02, fmt::format("J(0) = {:.4f}", at0));
    std::size_t violations = 0;
    double prev = knife_edge_loss_db(-0.78);
    for (int i = 1; i <= 10780; ++i) {
        const double l = knife_edge_loss_db(-0.78 + 1e-3 * i);
        violations += l < prev ? 1 : 0;
        prev = l;
    }
    o.require(violations == 0, fmt::format("{} monotonicity violations", violations));
    if (o.pass)
        o.detail = fmt::format("J(0) = {:.4f} dB, monotone on [-0.78, 10]", at0);
    return o;
}

Outcome mean_std_arithmetic() {
    Outcome o;
    const std::vector<double> svm{98.68, 98.68, 98.25, 98.68, 99.12};
    const auto [m, s] = mean_std(svm);
    o.require(std::abs(m - 98.68) <= 0.005 && std::abs(s - 0.31) <= 0.005, fmt::format("({:.4f}, {:.4f})", m, s));
    const std::vector<double> same(5, 98.68);
    const auto [m2, s2] = mean_std(same);
    o.require(s2 == 0.0, fmt::format("std of equal values {}", s2));
    if (o.pass)
        o.detail = fmt::format("SVM folds -> {:.2f} ± {:.2f}; equal folds -> {:.2f} ± {:.2f}", m, s, m2, s2);
    return o;
}

Outcome percent_arithmetic() {
    Outcome o;
    auto overall = [](std::size_t correct) {
        std::vector<VehicleType> types;
        std::vector<Label> pred;
        for (std::size_t i = 0; i < 228; ++i) {
            const auto t = all_vehicle_types[i % 6];
            types.push_back(t);
            const Label right = label_of(t);
            pred.push_back(i < 228 - correct ? (right == Label::truck ? Label::passenger_car : Label::truck) : right);
        }
        return format_percent(tally(types, pred).overall_percent());
    };
    const auto a = overall(225), b = overall(227);
    o.require(a == "98.68", "225/228 -> " + a);
    o.require(b == "99.56", "227/228 -> " + b);
    if (o.pass)
        o.detail = "225/228 -> " + a + "%, 227/228 -> " + b + "%";
    return o;
}

Outcome end_to_end() {
    Outcome o;
    auto& b = benchmark();
    std::size_t detected = 0, spurious = 0;
    for (const auto& p : b.segments.passages) {
        detected += p.segments.empty() ? 0 : 1;
        spurious += p.segments.size() > 1 ? p.segments.size() - 1 : 0;
    }
    const std::size_t n = b.segments.passages.size();
    o.require(n == 300, fmt::format("{} passages", n));
    o.require(detected * 100 >= 99 * n, fmt::format("detected {}/{}", detected, n));
    o.require(spurious == 0, fmt::format("{} spurious segments", spurious));

    std::string accs;
    for (auto kind : {LearnerKind::knn, LearnerKind::svm}) {
        LearnerSpec spec = b.config.learner;
        spec.kind = kind;
        const double both = cross_validate(b.both, spec, 5, b.config.seed, true, 4).mean;
        const double rssi = cross_validate(b.rssi, spec, 5, b.config.seed, true, 4).mean;
        const double len = cross_validate(b.length, spec, 5, b.config.seed, true, 4).mean;
        const auto name = std::string(to_string(kind));
        o.require(both >= 0.95, fmt::format("{} combined {:.2f}%", name, 100 * both));
        o.require(both >= rssi && rssi >= len,
                  fmt::format("{} ordering {:.2f} / {:.2f} / {:.2f}", name, 100 * both, 100 * rssi, 100 * len));
        accs += fmt::format("{}{} {:.2f}/{:.2f}/{:.2f}", accs.empty() ? "" : ", ", name, 100 * both, 100 * rssi,
                            100 * len);
    }
    LearnerSpec threshold;
    threshold.kind = LearnerKind::length_threshold;
    const double thr = cross_validate(b.both, threshold, 5, b.config.seed, true, 1).mean;
    if (o.pass)
        o.detail = fmt::format("detected {}/{}, spurious {}; CV both/rssi/length % {}; threshold-only {:.2f}%",
                               detected, n, spurious, accs, 100 * thr);
    return o;
}

Outcome reflection_gap() {
    Outcome o;
    RunConfig c;
    const auto study = reflection_study(c.scenario(), c.simulation, c.catalog, c.mix, c.seed, c.detection, 4);
    const double on = study.variants.at(0).car_minus_truck();
    const double off = study.variants.at(1).car_minus_truck();
    o.require(c.layout.tx_height <= 0.6 && c.layout.rx_height <= 0.6, "links above 0.6 m");
    o.require(on >= 4.0, fmt::format("gap with reflection {:.2f} dB", on));
    o.require(std::abs(off) < std::abs(on), fmt::format("gap without reflection {:.2f} dB", off));
    if (o.pass)
        o.detail = fmt::format("car - truck gap {:.2f} dB with reflection, {:.2f} dB without", on, off);
    return o;
}

Outcome trailer_signature() {
    Outcome o;
    RunConfig c;
    c.channel.noise_sigma_db = 0.0;
    const auto s = c.scenario();
    const auto& truck = find_vehicle(c.catalog, VehicleType::truck);
    const double speed = 10.0;
    const auto e = simulate_passage(s, c.simulation, truck, speed, centred_lane(s, truck), 1);
    double worst = 1e9;
    for (const auto* link : s.layout.direct_links()) {
        const auto g = trace_tools::gap_signature(link_trace(e, s.layout.link_index(link->id)), link->tx.x, speed,
                                                  c.simulation, truck);
        worst = std::min(worst, g.margin());
    }
    o.require(worst >= 3.0, fmt::format("gap peak only {:.2f} dB above the shoulder", worst));
    if (o.pass)
        o.detail = fmt::format("gap peak >= {:.2f} dB above the shallower trough on every direct link", worst);
    return o;
}

Outcome estimator_accuracy() {
    Outcome o;
    RunConfig c;
    c.channel.noise_sigma_db = 0.0;
    const auto s = c.scenario();
    double worst_speed = 0.0, worst_length = 0.0;
    std::size_t runs = 0;
    for (const auto& v : c.catalog) {
        const double centre = centred_lane(s, v);
        for (double lane : {centre - 0.5, centre, centre + 0.5}) {
            for (double speed = 5.0; speed <= 30.0 + 1e-9; speed += 2.5) {
                ++runs;
                try {
                    const auto e = simulate_passage(s, c.simulation, v, speed, lane, 1);
                    const auto fv = process_event(e, s.layout, c.detection, c.features);
                    const double es = std::abs(fv.est_speed / speed - 1.0);
                    const double el = std::abs(fv.est_length / v.total_length() - 1.0);
                    worst_speed = std::max(worst_speed, es);
                    worst_length = std::max(worst_length, el);
                    o.require(es <= 0.02, fmt::format("{} {} m/s speed off by {:.2f}%", to_string(v.type), speed, 100 * es));
                    o.require(el <= 0.05, fmt::format("{} {} m/s length off by {:.2f}%", to_string(v.type), speed, 100 * el));
                } catch (const Error& ex) {
                    o.require(false, fmt::format("{} {} m/s: {}", to_string(v.type), speed, ex.what()));
                }
            }
        }
    }
    if (o.pass)
        o.detail = fmt::format("{} passages, worst speed error {:.2f}%, worst length error {:.2f}%", runs,
                               100 * worst_speed, 100 * worst_length);
    return o;
}

Outcome learner_properties() {
    Outcome o;
    auto& b = benchmark();
    const auto& rows = b.both;
    Matrix x;
    std::vector<Label> y;
    for (const auto& r : rows) {
        x.push_back(r.values);
        y.push_back(r.label());
    }

    const auto knn = knn_fit(x, y, 1);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        ok += knn_predict(knn, x[i]) == y[i] ? 1 : 0;
    o.require(ok == x.size(), fmt::format("1-NN training accuracy {}/{}", ok, x.size()));

    const auto folds = assign_folds(rows, 5, b.config.seed, true);
    std::multiset<std::uint64_t> seen;
    for (const auto& f : folds)
        seen.insert(f.begin(), f.end());
    std::multiset<std::uint64_t> all;
    for (const auto& r : rows)
        all.insert(r.event_id);
    o.require(seen == all && std::set<std::uint64_t>(seen.begin(), seen.end()).size() == seen.size(),
              "folds are not a partition");

    double worst_kkt = 0.0;
    std::size_t fits = 0;
    for (const auto& test : folds) {
        const std::set<std::uint64_t> held(test.begin(), test.end());
        Matrix xt;
        std::vector<Label> yt;
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (!held.count(rows[i].event_id)) {
                xt.push_back(x[i]);
                yt.push_back(y[i]);
            }
        for (auto kind : {KernelKind::rbf, KernelKind::linear}) {
            SvmParams p = b.config.learner.svm;
            p.kernel.kind = kind;
            try {
                const auto m = svm_fit(xt, yt, p);
                const auto res = svm_kkt_residuals(m, xt, yt);
                worst_kkt = std::max(worst_kkt, *std::max_element(res.begin(), res.end()));
                o.require(worst_kkt <= p.tolerance, fmt::format("KKT residual {:.3g}", worst_kkt));
                ++fits;
            } catch (const TrainingError& ex) {
                o.require(false, ex.what());
            }
        }
    }

    const auto regenerated = generate_dataset(b.scenario, b.config.simulation, b.config.catalog, b.config.mix,
                                              b.config.seed, 1);
    o.require(serialize(regenerated) == serialize(b.dataset), "dataset regeneration differs");

    for (auto kind : {LearnerKind::knn, LearnerKind::svm, LearnerKind::length_threshold}) {
        LearnerSpec spec = b.config.learner;
        spec.kind = kind;
        const auto model = fit_model(spec, rows);
        std::stringstream io;
        save_model(io, model);
        const auto back = load_model(io);
        std::size_t same = 0;
        for (const auto& r : rows)
            same += back.predict(r) == model.predict(r) ? 1 : 0;
        o.require(same == rows.size(), fmt::format("{} round trip changed predictions", to_string(kind)));
    }
    if (o.pass)
        o.detail = fmt::format("1-NN {}/{}; {} SVM fits, max KKT residual {:.2g}; partition, regeneration and "
                               "round trips exact",
                               ok, x.size(), fits, worst_kkt);
    return o;
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"1 physics oracle (|Gamma| = 0, sigma = 0 vs Friis)", friis_oracle},
        {"2 knife-edge loss at v = 0 and monotonicity", knife_edge},
        {"3 mean and sample std of fold accuracies", mean_std_arithmetic},
        {"4 overall success rate formatting", percent_arithmetic},
        {"5 end-to-end detection, CV accuracy and feature ablation", end_to_end},
        {"6 car vs truck drop gap with and without reflection", reflection_gap},
        {"7 trailer gap peak in the noiseless truck trace", trailer_signature},
        {"8 speed and length estimator accuracy", estimator_accuracy},
        {"9 learner properties and reproducibility", learner_properties},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome r;
        try {
            r = check();
        } catch (const std::exception& ex) {
            r = {false, std::string("exception: ") + ex.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        fmt::print("[{}] criterion {} ({:.1f} s): {}\n", r.pass ? "PASS" : "FAIL", name, secs, r.detail);
        failures += r.pass ? 0 : 1;
    }
    fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
    return failures == 0 ? 0 : 1;
}
