#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fedicu/errors.hpp"
#include "fedicu/pipeline.hpp"

// Cohort file pair: an events CSV (patient_id, variable_name, timestamp_hours,
// value) and a labels CSV (patient_id, label). Numeric fields round-trip
// exactly through %.17g.

namespace fedicu {

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s, const std::string& context) {
    if (s.empty()) throw ConfigError(context + ": empty numeric field");
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size())
        throw ConfigError(context + ": bad numeric field '" + s + "'");
    return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace detail

inline void write_cohort_csv(const std::vector<PatientRecord>& records,
                             const std::string& events_path, const std::string& labels_path) {
    std::ofstream events(events_path, std::ios::binary);
    if (!events) throw ConfigError("cannot write " + events_path);
    events << "patient_id,variable_name,timestamp_hours,value\n";
    for (const PatientRecord& rec : records) {
        for (std::size_t v = 0; v < kNumVariables; ++v) {
            for (const Event& e : rec.events[v]) {
                events << rec.id << ',' << variable_names()[v] << ','
                       << detail::format_double(e.time) << ',' << detail::format_double(e.value)
                       << '\n';
            }
        }
    }
    if (!events) throw ConfigError("write failed for " + events_path);

    std::ofstream labels(labels_path, std::ios::binary);
    if (!labels) throw ConfigError("cannot write " + labels_path);
    labels << "patient_id,label\n";
    for (const PatientRecord& rec : records) labels << rec.id << ',' << rec.label << '\n';
    if (!labels) throw ConfigError("write failed for " + labels_path);
}

// Loads and validates the file pair. Record order follows the labels file;
// events may arrive unsorted and are stably sorted by timestamp per variable.
inline std::vector<PatientRecord> read_cohort_csv(const std::string& events_path,
                                                  const std::string& labels_path) {
    std::ifstream labels(labels_path, std::ios::binary);
    if (!labels) throw ConfigError("cannot read " + labels_path);
    std::string line;
    if (!std::getline(labels, line) || detail::split_csv_line(line) !=
                                           std::vector<std::string>{"patient_id", "label"})
        throw ConfigError(labels_path + ": expected header patient_id,label");

    std::vector<PatientRecord> records;
    std::map<std::string, std::size_t> index;
    std::size_t line_no = 1;
    while (std::getline(labels, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        const std::string context = labels_path + ":" + std::to_string(line_no);
        if (fields.size() != 2) throw ConfigError(context + ": expected 2 fields");
        if (fields[0].empty()) throw ConfigError(context + ": empty patient id");
        if (index.count(fields[0])) throw ConfigError(context + ": duplicate patient id");
        PatientRecord rec;
        rec.id = fields[0];
        if (fields[1] == "0")
            rec.label = 0;
        else if (fields[1] == "1")
            rec.label = 1;
        else
            throw ConfigError(context + ": label must be 0 or 1");
        index.emplace(rec.id, records.size());
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw ConfigError(labels_path + ": no patients");

    std::ifstream events(events_path, std::ios::binary);
    if (!events) throw ConfigError("cannot read " + events_path);
    if (!std::getline(events, line) ||
        detail::split_csv_line(line) != std::vector<std::string>{"patient_id", "variable_name",
                                                                 "timestamp_hours", "value"})
        throw ConfigError(events_path +
                          ": expected header patient_id,variable_name,timestamp_hours,value");
    line_no = 1;
    while (std::getline(events, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        const std::string context = events_path + ":" + std::to_string(line_no);
        if (fields.size() != 4) throw ConfigError(context + ": expected 4 fields");
        const auto it = index.find(fields[0]);
        if (it == index.end())
            throw ConfigError(context + ": patient '" + fields[0] + "' has no label");
        const int v = variable_index(fields[1]);
        if (v < 0) throw ConfigError(context + ": unknown variable '" + fields[1] + "'");
        Event e;
        e.time = detail::parse_double(fields[2], context);
        e.value = detail::parse_double(fields[3], context);
        records[it->second].events[static_cast<std::size_t>(v)].push_back(e);
    }

    for (PatientRecord& rec : records) {
        double anchor = 0.0;
        bool any = false;
        for (auto& series : rec.events) {
            std::stable_sort(series.begin(), series.end(),
                             [](const Event& a, const Event& b) { return a.time < b.time; });
            if (!series.empty()) {
                anchor = any ? std::max(anchor, series.back().time) : series.back().time;
                any = true;
            }
        }
        if (!any) throw ConfigError(events_path + ": patient '" + rec.id + "' has no events");
        rec.anchor = anchor;
        rec.validate();
    }
    return records;
}

}  // namespace fedicu
