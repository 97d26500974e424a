#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtp/attack.hpp"
#include "mtp/dataset_io.hpp"
#include "mtp/error.hpp"

namespace mtp {

inline constexpr const char* kTraceSchema = "# mtp-trace-v1";
inline constexpr const char* kTraceHeader =
    "iter,y_star,copies,max_loss_diff,oracle_exact,euclid_dist,lower_bound,lower_bound_valid,"
    "overall_acc,subpop_acc,clean_loss";

namespace trace_detail {

// shortest round-trip-exact decimal form
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_field(const std::string& tok, std::size_t line_no) {
    if (detail::trim(tok).empty()) return 0.0;  // baseline traces leave oracle cells empty
    return detail::parse_double(tok, "trace", line_no);
}

}  // namespace trace_detail

// Trace CSV plus a companion sparse file with the poison features, one line
// per record in record order.
inline void write_trace(const AttackTrace& trace, const std::string& csv_path,
                        const std::string& poison_path) {
    std::ofstream csv(csv_path);
    if (!csv) throw MtpError("io", "cannot write '" + csv_path + "'");
    csv << kTraceSchema << "\n" << kTraceHeader << "\n";
    for (const auto& r : trace.records) {
        csv << r.iteration << ',' << r.point.y << ',' << r.point.copies << ','
            << trace_detail::fmt(r.max_loss_diff) << ',' << (r.oracle_exact ? 1 : 0) << ','
            << trace_detail::fmt(r.euclid_dist) << ',' << trace_detail::fmt(r.lower_bound) << ','
            << (r.lower_bound_valid ? 1 : 0) << ',' << trace_detail::fmt(r.overall_acc) << ',';
        if (r.subpop_acc) csv << trace_detail::fmt(*r.subpop_acc);
        csv << ',' << trace_detail::fmt(r.clean_loss) << "\n";
    }

    std::ofstream pf(poison_path);
    if (!pf) throw MtpError("io", "cannot write '" + poison_path + "'");
    for (const auto& r : trace.records) {
        pf << (r.point.y > 0 ? "+1" : "-1");
        for (std::size_t j = 0; j < r.point.x.size(); ++j)
            if (r.point.x[j] != 0.0) pf << ' ' << (j + 1) << ':' << trace_detail::fmt(r.point.x[j]);
        pf << "\n";
    }
}

// Rebuilds records, best_index and poison_total; run context beyond the
// records (final model, metrics, stop reason) is not serialized.
inline AttackTrace read_trace(const std::string& csv_path, const std::string& poison_path,
                              std::size_t dim) {
    std::ifstream csv(csv_path);
    if (!csv) throw MtpError("io", "cannot open '" + csv_path + "'");
    std::string line;
    if (!std::getline(csv, line) || detail::trim(line) != kTraceSchema)
        throw MtpError("trace_schema", "unrecognized trace schema line in '" + csv_path + "'");
    if (!std::getline(csv, line) || detail::trim(line) != kTraceHeader)
        throw MtpError("trace_schema", "unrecognized trace header in '" + csv_path + "'");

    AttackTrace trace;
    std::size_t line_no = 2;
    while (std::getline(csv, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto toks = detail::split(line, ',');
        if (toks.size() != 11)
            throw MtpError("trace_schema", "trace row with " + std::to_string(toks.size()) +
                                               " fields at line " + std::to_string(line_no));
        IterationRecord r;
        r.iteration = long(detail::parse_double(toks[0], "trace", line_no));
        r.point.y = int(detail::parse_double(toks[1], "trace", line_no));
        r.point.copies = long(detail::parse_double(toks[2], "trace", line_no));
        r.point.iteration = r.iteration;
        r.max_loss_diff = trace_detail::parse_field(toks[3], line_no);
        r.oracle_exact = trace_detail::parse_field(toks[4], line_no) != 0.0;
        r.euclid_dist = trace_detail::parse_field(toks[5], line_no);
        r.lower_bound = trace_detail::parse_field(toks[6], line_no);
        r.lower_bound_valid = trace_detail::parse_field(toks[7], line_no) != 0.0;
        r.overall_acc = trace_detail::parse_field(toks[8], line_no);
        if (!detail::trim(toks[9]).empty())
            r.subpop_acc = detail::parse_double(toks[9], "trace", line_no);
        r.clean_loss = trace_detail::parse_field(toks[10], line_no);
        trace.records.push_back(std::move(r));
        trace.poison_total += trace.records.back().point.copies;
    }

    if (!trace.records.empty()) {
        Dataset poison = load_libsvm(poison_path, dim);
        if (poison.size() != trace.records.size())
            throw MtpError("trace_schema", "poison file row count does not match the trace");
        for (std::size_t i = 0; i < trace.records.size(); ++i) {
            auto row = poison.row(i);
            trace.records[i].point.x.assign(row.begin(), row.end());
            if (poison.labels[i] != trace.records[i].point.y)
                throw MtpError("trace_schema", "poison label mismatch at record " + std::to_string(i));
        }
        for (std::size_t i = 0; i < trace.records.size(); ++i) {
            if (trace.best_index < 0 ||
                trace.records[i].max_loss_diff <
                    trace.records[std::size_t(trace.best_index)].max_loss_diff)
                trace.best_index = std::ptrdiff_t(i);
        }
    }
    return trace;
}

inline nlohmann::json summary_to_json(const AttackTrace& trace) {
    nlohmann::json j;
    j["n_p"] = trace.poison_total;
    j["best_index"] = trace.best_index;
    if (trace.best_index >= 0)
        j["best_max_loss_diff"] = trace.best_max_loss_diff();
    else
        j["best_max_loss_diff"] = nullptr;
    nlohmann::json fin;
    fin["overall_acc"] = trace.final_metrics.overall_accuracy;
    if (trace.final_metrics.subpop_accuracy) fin["subpop_acc"] = *trace.final_metrics.subpop_accuracy;
    fin["clean_loss"] = trace.final_clean_loss;
    j["final"] = fin;
    j["stop_reason"] = trace.stop_reason;
    return j;
}

inline void write_summary(const AttackTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MtpError("io", "cannot write '" + path + "'");
    out << summary_to_json(trace).dump(2) << "\n";
}

// Label-flip baseline runs reuse the trace schema: one row per flipped point,
// oracle-specific cells left empty, metrics filled on the last row only.
inline void write_baseline_trace(const std::vector<PoisonPoint>& points, const Metrics& final_metrics,
                                 double final_clean_loss, const std::string& csv_path,
                                 const std::string& poison_path) {
    std::ofstream csv(csv_path);
    if (!csv) throw MtpError("io", "cannot write '" + csv_path + "'");
    csv << kTraceSchema << "\n" << kTraceHeader << "\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        const bool last = i + 1 == points.size();
        csv << p.iteration << ',' << p.y << ',' << p.copies << ",,0,,,0,";
        if (last) {
            csv << trace_detail::fmt(final_metrics.overall_accuracy) << ',';
            if (final_metrics.subpop_accuracy) csv << trace_detail::fmt(*final_metrics.subpop_accuracy);
            csv << ',' << trace_detail::fmt(final_clean_loss);
        } else {
            csv << ",,";
        }
        csv << "\n";
    }

    std::ofstream pf(poison_path);
    if (!pf) throw MtpError("io", "cannot write '" + poison_path + "'");
    for (const auto& p : points) {
        pf << (p.y > 0 ? "+1" : "-1");
        for (std::size_t j = 0; j < p.x.size(); ++j)
            if (p.x[j] != 0.0) pf << ' ' << (j + 1) << ':' << trace_detail::fmt(p.x[j]);
        pf << "\n";
    }
}

}  // namespace mtp
