#include "rfbarrier/report.hpp"

#include "rfbarrier/error.hpp"

#include <algorithm>
#include <fmt/format.h>

namespace rfbarrier {

TableFormat parse_table_format(std::string_view name) {
    if (name == "text")
        return TableFormat::text;
    if (name == "markdown" || name == "md")
        return TableFormat::markdown;
    throw ConfigError(fmt::format("unknown table format '{}' (text, markdown)", name));
}

namespace {

// Display width, counting UTF-8 continuation bytes as zero.
std::size_t width_of(const std::string& s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::string pad(const std::string& s, std::size_t w, bool left) {
    const std::string fill(w - std::min(w, width_of(s)), ' ');
    return left ? s + fill : fill + s;
}

} // namespace

std::string render(const Table& table, TableFormat format) {
    const std::size_t cols = table.headers.size();
    std::vector<std::size_t> w(cols, 0);
    for (std::size_t c = 0; c < cols; ++c)
        w[c] = width_of(table.headers[c]);
    for (const auto& r : table.rows)
        for (std::size_t c = 0; c < cols && c < r.size(); ++c)
            w[c] = std::max(w[c], width_of(r[c]));
    auto cell = [&](const std::vector<std::string>& r, std::size_t c) {
        return c < r.size() ? r[c] : std::string();
    };

    std::string out;
    if (format == TableFormat::markdown) {
        if (!table.title.empty())
            out += "**" + table.title + "**\n\n";
        auto line = [&](const std::vector<std::string>& r) {
            out += '|';
            for (std::size_t c = 0; c < cols; ++c)
                out += ' ' + pad(cell(r, c), w[c], c == 0) + " |";
            out += '\n';
        };
        line(table.headers);
        out += '|';
        for (std::size_t c = 0; c < cols; ++c)
            out += (c == 0 ? ":" + std::string(w[c] + 1, '-') : std::string(w[c] + 1, '-') + ":") + '|';
        out += '\n';
        for (const auto& r : table.rows)
            line(r);
        return out;
    }
    if (!table.title.empty())
        out += table.title + '\n';
    auto line = [&](const std::vector<std::string>& r) {
        std::string l;
        for (std::size_t c = 0; c < cols; ++c)
            l += (c ? "  " : "") + pad(cell(r, c), w[c], c == 0);
        while (!l.empty() && l.back() == ' ')
            l.pop_back();
        out += l + '\n';
    };
    line(table.headers);
    std::size_t total = 0;
    for (auto x : w)
        total += x;
    out += std::string(total + 2 * (cols ? cols - 1 : 0), '-') + '\n';
    for (const auto& r : table.rows)
        line(r);
    return out;
}

Table baseline_table(const Scenario& scenario) {
    Table t;
    t.title = "Vehicle-free link baseline";
    t.headers = {"Link", "TX", "RX", "Kind", "Length [m]", "RSSI [dBm]"};
    const auto rssi = baseline_rssi(scenario);
    const auto& links = scenario.layout.links();
    for (std::size_t i = 0; i < links.size(); ++i)
        t.rows.push_back({std::to_string(links[i].id), std::to_string(links[i].tx_id),
                          std::to_string(links[i].rx_id), std::string(to_string(links[i].kind)),
                          fmt::format("{:.3f}", links[i].length()), fmt::format("{:.2f}", rssi[i])});
    return t;
}

Table detection_table(const SegmentSet& set) {
    Table t;
    t.title = "Detection";
    t.headers = {"Vehicle type", "Passages", "Detected", "Missed", "Extra segments"};
    std::array<std::array<std::size_t, 4>, 6> counts{};
    for (const auto& p : set.passages) {
        auto& c = counts[static_cast<std::size_t>(p.type)];
        ++c[0];
        c[1] += p.segments.empty() ? 0 : 1;
        c[2] += p.segments.empty() ? 1 : 0;
        c[3] += p.segments.size() > 1 ? p.segments.size() - 1 : 0;
    }
    std::array<std::size_t, 4> total{};
    for (auto type : all_vehicle_types) {
        const auto& c = counts[static_cast<std::size_t>(type)];
        if (c[0] == 0)
            continue;
        for (std::size_t i = 0; i < 4; ++i)
            total[i] += c[i];
        t.rows.push_back({std::string(to_string(type)), std::to_string(c[0]), std::to_string(c[1]),
                          std::to_string(c[2]), std::to_string(c[3])});
    }
    t.rows.push_back({"Total", std::to_string(total[0]), std::to_string(total[1]),
                      std::to_string(total[2]), std::to_string(total[3])});
    return t;
}

Table cv_table(const CvSummary& s, const std::string& title) {
    Table t;
    t.title = title;
    t.headers = {"Fold", "Training set", "Test set", "Accuracy [%]"};
    for (std::size_t f = 0; f < s.fold_accuracies.size(); ++f)
        t.rows.push_back({fmt::format("S{}", f + 1), std::to_string(s.train_sizes[f]),
                          std::to_string(s.fold_event_ids[f].size()),
                          format_percent(100.0 * s.fold_accuracies[f])});
    t.rows.push_back({"Mean ± std", "", "",
                      format_percent(100.0 * s.mean) + " ± " + format_percent(100.0 * s.sample_std)});
    return t;
}

Table evaluation_table(const EvaluationReport& r, const std::string& title) {
    Table t;
    t.title = title;
    t.headers = {"Vehicle type", "Label", "Test samples", "Correct", "Rec. rate [%]"};
    for (const auto& row : r.per_type)
        t.rows.push_back({std::string(to_string(row.type)), std::string(to_string(label_of(row.type))),
                          std::to_string(row.samples), std::to_string(row.correct),
                          format_percent(percent(row.correct, row.samples))});
    t.rows.push_back({"Overall success rate", "", std::to_string(r.total), std::to_string(r.correct),
                      format_percent(r.overall_percent())});
    return t;
}

Table confusion_table(const EvaluationReport& r) {
    Table t;
    t.title = "Confusion matrix (rows: true label)";
    t.headers = {"", "passenger_car", "truck"};
    for (std::size_t i = 0; i < 2; ++i)
        t.rows.push_back({std::string(to_string(static_cast<Label>(i))), std::to_string(r.confusion[i][0]),
                          std::to_string(r.confusion[i][1])});
    return t;
}

Table study_table(const ReflectionStudy& study) {
    Table t;
    t.title = "Signal drop on cross-street links";
    t.headers = {"Variant", "Group", "Samples", "Mean [dB]", "Std [dB]", "Min [dB]", "Max [dB]"};
    auto row = [&](const std::string& variant, const std::string& group, const DropStats& s) {
        t.rows.push_back({variant, group, std::to_string(s.samples), fmt::format("{:.2f}", s.mean),
                          fmt::format("{:.2f}", s.std), fmt::format("{:.2f}", s.min),
                          fmt::format("{:.2f}", s.max)});
    };
    for (const auto& v : study.variants) {
        for (std::size_t l = 0; l < 2; ++l)
            row(v.name, std::string(to_string(static_cast<Label>(l))), v.by_label[l]);
        for (auto type : all_vehicle_types) {
            const auto& s = v.by_type[static_cast<std::size_t>(type)];
            if (s.samples > 0)
                row(v.name, "  " + std::string(to_string(type)), s);
        }
        t.rows.push_back({v.name, "car - truck gap", "", fmt::format("{:.2f}", v.car_minus_truck()), "",
                          "", ""});
    }
    return t;
}

} // namespace rfbarrier
