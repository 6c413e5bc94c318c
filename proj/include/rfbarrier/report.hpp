#pragma once

#include "rfbarrier/learn.hpp"
#include "rfbarrier/pipeline.hpp"
#include "rfbarrier/simulator.hpp"

#include <string>
#include <vector>

namespace rfbarrier {

enum class TableFormat { text, markdown };

TableFormat parse_table_format(std::string_view name);

struct Table {
    std::string title;
    std::vector<std::string> headers;
    std::vector<std::vector<std::string>> rows;
};

// Text tables pad every column; the first column is left-aligned, the rest right-aligned.
std::string render(const Table& table, TableFormat format);

Table baseline_table(const Scenario& scenario);
Table detection_table(const SegmentSet& set);
Table cv_table(const CvSummary& summary, const std::string& title);
Table evaluation_table(const EvaluationReport& report, const std::string& title);
Table confusion_table(const EvaluationReport& report);
Table study_table(const ReflectionStudy& study);

} // namespace rfbarrier
