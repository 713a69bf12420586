#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hedgelab/errors.hpp"

namespace hedgelab {

// ---------------------------------------------------------------------------
// Dates (ISO-8601 calendar days)
// ---------------------------------------------------------------------------

inline std::optional<std::chrono::sys_days> parse_date(std::string_view text) {
    int y = 0, m = 0, d = 0;
    if (std::sscanf(std::string(text).c_str(), "%d-%d-%d", &y, &m, &d) != 3)
        return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(m)},
                                          std::chrono::day{unsigned(d)}};
    if (!ymd.ok()) return std::nullopt;
    return std::chrono::sys_days{ymd};
}

inline std::string format_date(std::chrono::sys_days day) {
    const std::chrono::year_month_day ymd{day};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", int(ymd.year()),
                  unsigned(ymd.month()), unsigned(ymd.day()));
    return buf;
}

inline int days_between(std::string_view from, std::string_view to) {
    const auto a = parse_date(from);
    const auto b = parse_date(to);
    if (!a || !b) throw DataError("days_between: bad ISO date");
    return static_cast<int>((*b - *a).count());
}

/// Quarter label like "2020Q1", the paper's reporting period key.
inline std::string quarter_label(std::string_view date) {
    const auto day = parse_date(date);
    if (!day) throw DataError("quarter_label: bad ISO date");
    const std::chrono::year_month_day ymd{*day};
    const int q = (static_cast<int>(unsigned(ymd.month())) - 1) / 3 + 1;
    return std::to_string(int(ymd.year())) + "Q" + std::to_string(q);
}

// ---------------------------------------------------------------------------
// Cleaned option-chain rows
// ---------------------------------------------------------------------------

/// One cleaned European-call quote: the canonical ingestion schema.
struct ChainRow {
    std::string date;    ///< ISO-8601 trading day
    std::string asset;
    std::string expiry;  ///< ISO-8601, strictly after date
    double strike = 0.0;
    double call_mid = 0.0;
    double spot = 0.0;
    double rate = 0.0;
};

inline constexpr int kChainSchemaVersion = 1;
inline constexpr const char* kChainHeader = "date,asset,expiry,strike,call_mid,spot,rate";

struct LoadResult {
    std::vector<ChainRow> rows;
    struct Reject {
        int line;
        std::string reason;
    };
    std::vector<Reject> rejects;
};

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

inline bool parse_double(std::string_view text, double& out) {
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && ptr == end;
}

}  // namespace detail

/// Strict loader: a bad header is fatal, a bad row is rejected with a
/// reason; rows_in always equals rows_ok + rows_rejected.
inline LoadResult load_chain(const std::filesystem::path& path,
                             int schema_version = kChainSchemaVersion) {
    if (schema_version != kChainSchemaVersion)
        throw DataError("load_chain: unsupported schema version");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_chain: cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw DataError("load_chain: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kChainHeader)
        throw DataError("load_chain: header mismatch, expected '" +
                        std::string(kChainHeader) + "'");

    LoadResult result;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split_csv(line);
        auto reject = [&](const char* reason) {
            result.rejects.push_back({line_no, reason});
        };
        if (fields.size() != 7) {
            reject("bad_field_count");
            continue;
        }
        ChainRow row;
        row.date = std::string(fields[0]);
        row.asset = std::string(fields[1]);
        row.expiry = std::string(fields[2]);
        if (!parse_date(row.date)) {
            reject("bad_date");
            continue;
        }
        if (!parse_date(row.expiry)) {
            reject("bad_expiry");
            continue;
        }
        if (!detail::parse_double(fields[3], row.strike) ||
            !detail::parse_double(fields[4], row.call_mid) ||
            !detail::parse_double(fields[5], row.spot) ||
            !detail::parse_double(fields[6], row.rate)) {
            reject("bad_number");
            continue;
        }
        if (!(row.strike > 0.0)) {
            reject("nonpositive_strike");
            continue;
        }
        if (!(row.call_mid > 0.0)) {
            reject("nonpositive_mid");
            continue;
        }
        if (!(row.spot > 0.0)) {
            reject("nonpositive_spot");
            continue;
        }
        if (days_between(row.date, row.expiry) <= 0) {
            reject("expiry_not_after_date");
            continue;
        }
        result.rows.push_back(std::move(row));
    }
    return result;
}

inline void write_chain(const std::filesystem::path& path,
                        const std::vector<ChainRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("write_chain: cannot open " + path.string());
    out << kChainHeader << '\n';
    out.precision(17);
    for (const auto& r : rows)
        out << r.date << ',' << r.asset << ',' << r.expiry << ',' << r.strike << ','
            << r.call_mid << ',' << r.spot << ',' << r.rate << '\n';
}

// ---------------------------------------------------------------------------
// Report rows (Tables 1-2 / A.x layout keys)
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& report_metrics() {
    static const std::vector<std::string> metrics = {
        "ivrmse_1e3", "hedging_rmse", "avg_trading_cost",
        "shortfall_prob", "price", "stderr"};
    return metrics;
}

/// Per-day observation, aggregated with equal day weights into ReportRow.
struct DayRow {
    std::string date;
    std::string asset;
    std::string bucket;     ///< "14d" | "28d" | "56d"
    std::string moneyness;  ///< "whole" | "sub1" | "super1" | "super103" | "atm" | "otm103"
    std::string model;      ///< bs | jd | sv | qlbs | rlop
    std::string metric;
    double value = 0.0;
};

struct ReportRow {
    std::string experiment_id;
    std::string asset;
    std::string period;  ///< e.g. "2020Q1"
    std::string bucket;
    std::string moneyness;
    std::string model;
    std::string metric;
    double value = 0.0;
    int n_days = 0;

    void validate() const {
        const auto& metrics = report_metrics();
        if (std::find(metrics.begin(), metrics.end(), metric) == metrics.end())
            throw ValidationError("ReportRow: unknown metric " + metric);
    }

    auto key() const {
        return std::tie(experiment_id, asset, period, bucket, moneyness, model, metric);
    }
};

/// Equal-day aggregation: each trading day contributes one observation per
/// (asset, period, bucket, moneyness, model, metric) cell, whatever its
/// quote count.
inline std::vector<ReportRow> aggregate_day_rows(const std::vector<DayRow>& rows,
                                                 const std::string& experiment_id) {
    struct Cell {
        double sum = 0.0;
        int n = 0;
    };
    std::vector<std::pair<ReportRow, Cell>> cells;
    for (const auto& r : rows) {
        ReportRow key;
        key.experiment_id = experiment_id;
        key.asset = r.asset;
        key.period = quarter_label(r.date);
        key.bucket = r.bucket;
        key.moneyness = r.moneyness;
        key.model = r.model;
        key.metric = r.metric;
        auto it = std::find_if(cells.begin(), cells.end(), [&](const auto& c) {
            return c.first.key() == key.key();
        });
        if (it == cells.end()) {
            cells.push_back({key, {r.value, 1}});
        } else {
            it->second.sum += r.value;
            it->second.n += 1;
        }
    }
    std::vector<ReportRow> out;
    out.reserve(cells.size());
    for (auto& [row, cell] : cells) {
        row.value = cell.sum / cell.n;
        row.n_days = cell.n;
        out.push_back(std::move(row));
    }
    return out;
}

enum class ReportFormat { csv, json };

inline void emit_report(const std::filesystem::path& path,
                        std::vector<ReportRow> rows, ReportFormat format) {
    for (const auto& r : rows) r.validate();
    std::sort(rows.begin(), rows.end(),
              [](const ReportRow& a, const ReportRow& b) { return a.key() < b.key(); });
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("emit_report: cannot open " + path.string());
    if (format == ReportFormat::csv) {
        out << "experiment_id,asset,period,bucket,moneyness,model,metric,value,n_days\n";
        char buf[64];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%.2f", r.value);
            out << r.experiment_id << ',' << r.asset << ',' << r.period << ','
                << r.bucket << ',' << r.moneyness << ',' << r.model << ','
                << r.metric << ',' << buf << ',' << r.n_days << '\n';
        }
    } else {
        nlohmann::json j;
        j["schema_version"] = 1;
        j["rows"] = nlohmann::json::array();
        for (const auto& r : rows) {
            j["rows"].push_back({{"experiment_id", r.experiment_id},
                                 {"asset", r.asset},
                                 {"period", r.period},
                                 {"bucket", r.bucket},
                                 {"moneyness", r.moneyness},
                                 {"model", r.model},
                                 {"metric", r.metric},
                                 {"value", r.value},
                                 {"n_days", r.n_days}});
        }
        out << j.dump(2) << '\n';
    }
}

/// One curve point of a parameter sweep (a figure analog).
struct PlotPoint {
    double parameter = 0.0;
    double price = 0.0;
    double std_error = 0.0;
    std::string model;
};

inline void emit_plot_series(const std::filesystem::path& path,
                             std::vector<PlotPoint> points) {
    std::sort(points.begin(), points.end(), [](const PlotPoint& a, const PlotPoint& b) {
        return std::tie(a.model, a.parameter) < std::tie(b.model, b.parameter);
    });
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("emit_plot_series: cannot open " + path.string());
    out << "parameter,price,stderr,model\n";
    out.precision(17);
    for (const auto& p : points)
        out << p.parameter << ',' << p.price << ',' << p.std_error << ',' << p.model
            << '\n';
}

}  // namespace hedgelab
