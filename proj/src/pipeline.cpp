#include "rfbarrier/pipeline.hpp"

#include "rfbarrier/error.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <istream>
#include <ostream>
#include <sstream>

namespace rfbarrier {

void DetectionConfig::validate() const {
    if (!(drop_threshold > 0.0))
        throw ConfigError("drop threshold must be positive");
    if (!(release_threshold > 0.0) || !(release_threshold < drop_threshold))
        throw ConfigError("release threshold must be positive and below the drop threshold");
    if (!(min_duration >= 0.0))
        throw ConfigError("minimum event duration must be non-negative");
    if (!(baseline_window > 0.0))
        throw ConfigError("baseline window must be positive");
}

namespace {

double median_of(std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        const double lower = *std::max_element(v.begin(), v.begin() + mid);
        m = 0.5 * (m + lower);
    }
    return m;
}

// Fixed-capacity window of the most recent vehicle-free samples of one link.
class RollingWindow {
public:
    explicit RollingWindow(std::size_t capacity) : buf_(capacity) {}
    void push(double x) {
        buf_[next_] = x;
        next_ = (next_ + 1) % buf_.size();
        size_ = std::min(size_ + 1, buf_.size());
    }
    double median() const {
        return median_of(std::vector<double>(buf_.begin(), buf_.begin() + size_));
    }

private:
    std::vector<double> buf_;
    std::size_t next_ = 0;
    std::size_t size_ = 0;
};

double stream_dt(std::span<const RssiSampleFrame> stream) {
    const double dt = stream[1].t - stream[0].t;
    if (!(dt > 0.0))
        throw InputError("RSSI stream timestamps must increase");
    return dt;
}

// Both edges are taken at half of the link's own peak drop, so a link that
// only dips a little still yields timing.
constexpr double timing_fraction = 0.5;

void fill_timing(LinkWindow& w, double t0, double dt) {
    const std::size_t n = w.trace.size();
    std::vector<double> drop(n);
    for (std::size_t k = 0; k < n; ++k)
        drop[k] = w.baseline_dbm - w.trace[k];
    const double peak = *std::max_element(drop.begin(), drop.end());
    if (!(peak > 0.0))
        return;
    const double level = timing_fraction * peak;
    std::size_t first = n, last = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (drop[k] >= level) {
            first = std::min(first, k);
            last = k;
        }
    }
    if (first == n)
        return;
    auto cross = [&](std::size_t a, std::size_t b) {
        const double da = drop[a], db = drop[b];
        const double frac = db == da ? 0.0 : (level - da) / (db - da);
        return t0 + dt * (static_cast<double>(a) + frac * (static_cast<double>(b) - static_cast<double>(a)));
    };
    w.onset_t = first == 0 ? t0 : cross(first - 1, first);
    w.release_t = last + 1 == n ? t0 + dt * static_cast<double>(last) : cross(last, last + 1);
}

} // namespace

std::vector<EventSegment> detect_events(std::span<const RssiSampleFrame> stream,
                                        const SensorLayout& layout, const DetectionConfig& cfg) {
    cfg.validate();
    const std::size_t n_links = layout.links().size();
    if (stream.size() < 2)
        throw InputError("RSSI stream needs at least two frames");
    const double dt = stream_dt(stream);
    const auto window =
        static_cast<std::size_t>(std::max(1.0, std::round(cfg.baseline_window / dt)));
    if (stream.size() < window)
        throw InputError(fmt::format("RSSI stream of {} frames is shorter than the {}-frame baseline window",
                                     stream.size(), window));
    for (const auto& f : stream) {
        if (f.values.size() != n_links)
            throw InputError(fmt::format("frame at t={} has {} values, layout has {} links", f.t,
                                         f.values.size(), n_links));
    }

    std::vector<RollingWindow> history(n_links, RollingWindow(window));
    for (std::size_t k = 0; k < window; ++k)
        for (std::size_t i = 0; i < n_links; ++i)
            history[i].push(stream[k].values[i]);
    std::vector<double> baseline(n_links);
    auto refresh = [&] {
        for (std::size_t i = 0; i < n_links; ++i)
            baseline[i] = history[i].median();
    };
    refresh();

    auto max_drop = [&](std::size_t k) {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n_links; ++i)
            m = std::max(m, baseline[i] - stream[k].values[i]);
        return m;
    };

    std::vector<EventSegment> out;
    std::size_t last_quiet = 0;
    bool have_quiet = false;
    std::size_t k = 0;
    while (k < stream.size()) {
        if (max_drop(k) < cfg.drop_threshold) {
            bool quiet = true;
            for (std::size_t i = 0; i < n_links; ++i) {
                const double d = baseline[i] - stream[k].values[i];
                if (d < cfg.release_threshold)
                    history[i].push(stream[k].values[i]);
                else
                    quiet = false;
            }
            if (quiet) {
                last_quiet = k;
                have_quiet = true;
            }
            refresh();
            ++k;
            continue;
        }
        // Segment opens; baselines stay frozen until it closes.
        const std::size_t first = have_quiet ? last_quiet : 0;
        std::size_t last = k;
        while (last + 1 < stream.size() && max_drop(last) >= cfg.release_threshold)
            ++last;
        EventSegment seg;
        seg.first_frame = first;
        seg.last_frame = last;
        seg.t_start = stream[first].t;
        seg.t_end = stream[last].t;
        seg.dt = dt;
        if (seg.duration() >= cfg.min_duration) {
            for (std::size_t i = 0; i < n_links; ++i) {
                LinkWindow w;
                w.link_id = layout.links()[i].id;
                w.kind = layout.links()[i].kind;
                w.baseline_dbm = baseline[i];
                w.trace.reserve(last - first + 1);
                for (std::size_t j = first; j <= last; ++j)
                    w.trace.push_back(stream[j].values[i]);
                fill_timing(w, seg.t_start, dt);
                seg.links.push_back(std::move(w));
            }
            out.push_back(std::move(seg));
        }
        last_quiet = last;
        have_quiet = true;
        k = last + 1;
    }
    return out;
}

double estimate_speed(const EventSegment& segment, const SensorLayout& layout) {
    struct Edge {
        double x;
        double t;
    };
    std::vector<Edge> edges;
    for (const auto& w : segment.links) {
        if (w.kind != LinkKind::direct || !w.onset_t)
            continue;
        const auto& link = layout.links()[layout.link_index(w.link_id)];
        edges.push_back({link.tx.x, *w.onset_t});
    }
    double sum = 0.0;
    int pairs = 0;
    for (std::size_t a = 0; a < edges.size(); ++a) {
        for (std::size_t b = a + 1; b < edges.size(); ++b) {
            const double dx = edges[b].x - edges[a].x;
            const double dt = edges[b].t - edges[a].t;
            if (dx == 0.0 || dt == 0.0)
                continue;
            sum += std::abs(dx / dt);
            ++pairs;
        }
    }
    if (pairs == 0)
        throw EstimationError(fmt::format(
            "speed needs onsets on two direct links at distinct times, found {} usable links",
            edges.size()));
    return sum / pairs;
}

double estimate_length(const EventSegment& segment, double speed, const SensorLayout& layout) {
    if (!(speed > 0.0))
        throw EstimationError("length estimate needs a positive speed");
    double sum = 0.0;
    int n = 0;
    for (const auto& w : segment.links) {
        if (w.kind != LinkKind::direct || !w.onset_t || !w.release_t)
            continue;
        sum += *w.release_t - *w.onset_t;
        ++n;
    }
    if (n == 0)
        throw EstimationError("length estimate needs a shadowed direct link");
    (void)layout;
    return speed * sum / n;
}

double drop_magnitude(std::span<const double> trace, double baseline) {
    if (trace.empty())
        throw InputError("drop magnitude of an empty trace");
    return std::max(0.0, baseline - *std::min_element(trace.begin(), trace.end()));
}

void FeatureConfig::validate() const {
    if (resample_points < 2)
        throw ConfigError("feature resampling needs at least two points per link");
    if (!include_length && !include_rssi)
        throw ConfigError("feature set is empty: enable length, rssi or both");
}

std::size_t FeatureConfig::dimension(const SensorLayout& layout) const {
    const std::size_t links =
        links_used == LinkSelection::all ? layout.links().size() : layout.direct_links().size();
    return (include_rssi ? links * static_cast<std::size_t>(resample_points) : 0) +
           (include_length ? 1 : 0);
}

FeatureVector extract_features(const EventSegment& segment, double speed, double length,
                               const FeatureConfig& cfg) {
    cfg.validate();
    if (!(segment.t_end > segment.t_start))
        throw InputError("event segment has no duration");
    FeatureVector fv;
    fv.est_speed = speed;
    fv.est_length = length;

    std::vector<const LinkWindow*> used;
    for (const auto& w : segment.links)
        if (cfg.links_used == LinkSelection::all || w.kind == LinkKind::direct)
            used.push_back(&w);
    std::sort(used.begin(), used.end(),
              [](const LinkWindow* a, const LinkWindow* b) { return a->link_id < b->link_id; });

    const int p = cfg.resample_points;
    for (const LinkWindow* w : used) {
        const auto& tr = w->trace;
        if (tr.size() < 2)
            throw InputError("event segment is too short to resample");
        if (w->kind == LinkKind::direct)
            fv.drop_magnitude = std::max(fv.drop_magnitude, drop_magnitude(tr, w->baseline_dbm));
        if (!cfg.include_rssi)
            continue;
        const double last = static_cast<double>(tr.size() - 1);
        for (int j = 0; j < p; ++j) {
            const double pos = last * j / (p - 1);
            const auto i0 = std::min(static_cast<std::size_t>(pos), tr.size() - 2);
            const double frac = pos - static_cast<double>(i0);
            const double value = tr[i0] + frac * (tr[i0 + 1] - tr[i0]);
            fv.rssi_profile.push_back(std::max(0.0, w->baseline_dbm - value));
        }
    }
    fv.values = fv.rssi_profile;
    if (cfg.include_length)
        fv.values.push_back(length);
    return fv;
}

FeatureVector process_event(const PassageEvent& event, const SensorLayout& layout,
                            const DetectionConfig& detection, const FeatureConfig& features) {
    const auto segments = detect_events(event.frames, layout, detection);
    if (segments.empty())
        throw InputError(fmt::format("no vehicle detected in event {}", event.event_id));
    // The longest segment is the passage; anything else is noise.
    const auto& seg = *std::max_element(segments.begin(), segments.end(),
                                        [](const EventSegment& a, const EventSegment& b) {
                                            return a.duration() < b.duration();
                                        });
    const double speed = estimate_speed(seg, layout);
    const double length = estimate_length(seg, speed, layout);
    FeatureVector fv = extract_features(seg, speed, length, features);
    fv.event_id = event.event_id;
    fv.type = event.type;
    return fv;
}

// ---------------------------------------------------------------------------

void write_feature_table(std::ostream& out, const FeatureTable& table) {
    const std::size_t dim = table.dimension();
    out << "event_id,type_name,label,est_speed,est_length,drop_magnitude";
    for (std::size_t i = 0; i < dim; ++i)
        out << ",f_" << i;
    out << '\n';
    for (const auto& row : table.rows) {
        const auto& values = row.values;
        if (values.size() != dim)
            throw InputError(fmt::format("feature row {} has {} values, expected {}", row.event_id,
                                         values.size(), dim));
        out << fmt::format("{},{},{},{:.17g},{:.17g},{:.17g}", row.event_id, to_string(row.type),
                           to_string(row.label()), row.est_speed, row.est_length, row.drop_magnitude);
        for (double v : values)
            out << fmt::format(",{:.17g}", v);
        out << '\n';
    }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size())
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InputError(fmt::format("feature table line {}: '{}' is not a number", line_no, s));
    }
}

} // namespace

FeatureTable read_feature_table(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw InputError("feature table is empty");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    const auto header = split_csv(line);
    static const std::vector<std::string> fixed = {"event_id",   "type_name",  "label",
                                                   "est_speed",  "est_length", "drop_magnitude"};
    if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin()))
        throw InputError("feature table header does not match the expected columns");
    for (std::size_t i = fixed.size(); i < header.size(); ++i)
        if (header[i] != fmt::format("f_{}", i - fixed.size()))
            throw InputError(fmt::format("unexpected feature column '{}'", header[i]));
    FeatureTable table;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw InputError(fmt::format("feature table line {} has {} cells, expected {}", line_no,
                                         cells.size(), header.size()));
        FeatureVector fv;
        try {
            fv.event_id = std::stoull(cells[0]);
        } catch (const std::exception&) {
            throw InputError(fmt::format("feature table line {}: bad event id '{}'", line_no, cells[0]));
        }
        try {
            fv.type = parse_vehicle_type(cells[1]);
        } catch (const Error& e) {
            throw InputError(fmt::format("feature table line {}: {}", line_no, e.what()));
        }
        fv.est_speed = parse_double(cells[3], line_no);
        fv.est_length = parse_double(cells[4], line_no);
        fv.drop_magnitude = parse_double(cells[5], line_no);
        if (to_string(fv.label()) != cells[2])
            throw InputError(fmt::format("feature table line {}: label '{}' does not match type '{}'",
                                         line_no, cells[2], cells[1]));
        for (std::size_t i = fixed.size(); i < cells.size(); ++i)
            fv.values.push_back(parse_double(cells[i], line_no));
        table.rows.push_back(std::move(fv));
    }
    return table;
}

// ---------------------------------------------------------------------------

namespace {

DropStats summarize(const std::vector<double>& xs) {
    DropStats s;
    s.samples = xs.size();
    if (xs.empty())
        return s;
    double sum = 0.0;
    s.min = xs.front();
    s.max = xs.front();
    for (double x : xs) {
        sum += x;
        s.min = std::min(s.min, x);
        s.max = std::max(s.max, x);
    }
    s.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs)
            ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return s;
}

} // namespace

ReflectionVariant drop_statistics(const Dataset& dataset, const std::string& name,
                                  const DetectionConfig& cfg) {
    cfg.validate();
    const SensorLayout layout = build_layout(dataset.layout);
    ReflectionVariant variant;
    variant.name = name;
    std::array<std::vector<double>, 2> by_label;
    std::array<std::vector<double>, 6> by_type;
    for (const auto& ev : dataset.events) {
        if (ev.frames.size() < 2)
            throw InputError(fmt::format("event {} has too few frames", ev.event_id));
        const auto window = static_cast<std::size_t>(
            std::max(1.0, std::round(cfg.baseline_window / stream_dt(ev.frames))));
        if (ev.frames.size() < window)
            throw InputError(fmt::format("event {} is shorter than the baseline window", ev.event_id));
        for (std::size_t i = 0; i < layout.links().size(); ++i) {
            if (layout.links()[i].kind != LinkKind::direct)
                continue;
            std::vector<double> trace;
            trace.reserve(ev.frames.size());
            for (const auto& f : ev.frames)
                trace.push_back(f.values.at(i));
            const double base = median_of(std::vector<double>(trace.begin(), trace.begin() + window));
            const double d = drop_magnitude(trace, base);
            variant.samples.emplace_back(ev.type, d);
            by_label[static_cast<std::size_t>(ev.label())].push_back(d);
            by_type[static_cast<std::size_t>(ev.type)].push_back(d);
        }
    }
    if (by_label[0].empty() || by_label[1].empty())
        throw InputError("reflection study needs events of both classes");
    for (std::size_t i = 0; i < 2; ++i)
        variant.by_label[i] = summarize(by_label[i]);
    for (std::size_t i = 0; i < 6; ++i)
        variant.by_type[i] = summarize(by_type[i]);
    return variant;
}

ReflectionStudy reflection_study(const Scenario& scenario, const SimulationConfig& sim,
                                 const VehicleCatalog& catalog, const VehicleMix& mix,
                                 std::uint64_t seed, const DetectionConfig& cfg, unsigned jobs) {
    ReflectionStudy study;
    for (bool on : {true, false}) {
        ChannelConfig channel = scenario.channel;
        channel.ground_reflection = on;
        const Scenario variant = Scenario::make(scenario.layout_config, channel, scenario.antenna);
        const Dataset ds = generate_dataset(variant, sim, catalog, mix, seed, jobs);
        study.variants.push_back(
            drop_statistics(ds, on ? "reflection_on" : "reflection_off", cfg));
    }
    return study;
}

} // namespace rfbarrier
