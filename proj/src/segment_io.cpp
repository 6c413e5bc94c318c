#include "json_codec.hpp"
#include "rfbarrier/error.hpp"
#include "rfbarrier/pipeline.hpp"

#include <fmt/format.h>
#include <istream>
#include <ostream>

namespace rfbarrier {

using codec::Json;

SegmentSet detect_dataset(const Dataset& dataset, const DetectionConfig& cfg) {
    SegmentSet set;
    set.layout = dataset.layout;
    set.detection = cfg;
    set.fingerprint = dataset.fingerprint;
    const SensorLayout layout = build_layout(dataset.layout);
    for (const auto& ev : dataset.events) {
        DetectedPassage p;
        p.event_id = ev.event_id;
        p.type = ev.type;
        p.true_speed = ev.true_speed;
        p.true_length = ev.true_length;
        p.segments = detect_events(ev.frames, layout, cfg);
        set.passages.push_back(std::move(p));
    }
    return set;
}

const EventSegment* primary_segment(const DetectedPassage& passage) {
    const EventSegment* best = nullptr;
    for (const auto& s : passage.segments)
        if (!best || s.duration() > best->duration())
            best = &s;
    return best;
}

namespace {

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> optional_from(const Json& j) {
    if (j.is_null())
        return std::nullopt;
    return j.get<double>();
}

Json segment_json(const EventSegment& s) {
    Json links = Json::array();
    for (const auto& w : s.links)
        links.push_back(Json{{"link_id", w.link_id},
                             {"kind", to_string(w.kind)},
                             {"baseline_dbm", w.baseline_dbm},
                             {"onset_t", optional_json(w.onset_t)},
                             {"release_t", optional_json(w.release_t)},
                             {"trace", w.trace}});
    return Json{{"t_start", s.t_start},         {"t_end", s.t_end},
                {"dt", s.dt},                   {"first_frame", s.first_frame},
                {"last_frame", s.last_frame},   {"links", links}};
}

EventSegment segment_from(const Json& j) {
    EventSegment s;
    s.t_start = j.at("t_start").get<double>();
    s.t_end = j.at("t_end").get<double>();
    s.dt = j.at("dt").get<double>();
    s.first_frame = j.at("first_frame").get<std::size_t>();
    s.last_frame = j.at("last_frame").get<std::size_t>();
    for (const auto& l : j.at("links")) {
        LinkWindow w;
        w.link_id = l.at("link_id").get<int>();
        const auto kind = l.at("kind").get<std::string>();
        if (kind != "direct" && kind != "diagonal")
            throw InputError(fmt::format("unknown link kind '{}'", kind));
        w.kind = kind == "direct" ? LinkKind::direct : LinkKind::diagonal;
        w.baseline_dbm = l.at("baseline_dbm").get<double>();
        w.onset_t = optional_from(l.at("onset_t"));
        w.release_t = optional_from(l.at("release_t"));
        w.trace = l.at("trace").get<std::vector<double>>();
        s.links.push_back(std::move(w));
    }
    return s;
}

} // namespace

void write_segments(std::ostream& out, const SegmentSet& set) {
    Json header{{"format", "rfbarrier-segments"},
                {"version", 1},
                {"fingerprint", codec::hex64(set.fingerprint)},
                {"passage_count", set.passages.size()},
                {"layout", codec::to_json(set.layout)},
                {"detection", codec::to_json(set.detection)}};
    out << codec::dump17(header) << '\n';
    for (const auto& p : set.passages) {
        Json segs = Json::array();
        for (const auto& s : p.segments)
            segs.push_back(segment_json(s));
        Json line{{"event_id", p.event_id},
                  {"type", to_string(p.type)},
                  {"true_speed", p.true_speed},
                  {"true_length", p.true_length},
                  {"segments", segs}};
        out << codec::dump17(line) << '\n';
    }
    if (!out)
        throw InputError("failed to write segment file");
}

SegmentSet read_segments(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    SegmentSet set;
    try {
        if (!std::getline(in, line))
            throw InputError("segment file is empty");
        ++line_no;
        const Json header = Json::parse(line);
        if (header.at("format").get<std::string>() != "rfbarrier-segments")
            throw InputError("not an rfbarrier segment file");
        if (header.at("version").get<int>() != 1)
            throw InputError("unsupported segment file version");
        set.fingerprint = codec::parse_hex64(header.at("fingerprint").get<std::string>());
        set.layout = codec::layout_from_json(header.at("layout"));
        set.detection = codec::detection_from_json(header.at("detection"));
        const auto expected = header.at("passage_count").get<std::size_t>();
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty())
                continue;
            const Json j = Json::parse(line);
            DetectedPassage p;
            p.event_id = j.at("event_id").get<std::uint64_t>();
            p.type = parse_vehicle_type(j.at("type").get<std::string>());
            p.true_speed = j.at("true_speed").get<double>();
            p.true_length = j.at("true_length").get<double>();
            for (const auto& s : j.at("segments"))
                p.segments.push_back(segment_from(s));
            set.passages.push_back(std::move(p));
        }
        if (set.passages.size() != expected)
            throw InputError(fmt::format("segment file lists {} passages, header says {}",
                                         set.passages.size(), expected));
    } catch (const InputError&) {
        throw;
    } catch (const std::exception& e) {
        throw InputError(fmt::format("segment file line {}: {}", line_no, e.what()));
    }
    return set;
}

} // namespace rfbarrier
