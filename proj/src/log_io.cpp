#include "dimbid/log_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "dimbid/error.hpp"

namespace dimbid {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
    return out;
}

std::int64_t parse_int(const std::string& s, int row, const char* field) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw data_error("row " + std::to_string(row) + ": field '" + field + "' is not an integer: '" + s + "'");
    return v;
}

}  // namespace

ImpressionLog ingest_log(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw data_error("log stream is empty (missing header)");
    auto header = split_csv_line(line);

    int col_day = -1, col_id = -1, col_cost = -1, col_rev = -1, col_conv = -1;
    ImpressionLog log;
    std::vector<int> feature_cols;
    for (int c = 0; c < static_cast<int>(header.size()); ++c) {
        const std::string& h = header[static_cast<std::size_t>(c)];
        if (h == "day") col_day = c;
        else if (h == "impression_id") col_id = c;
        else if (h == "cost_micros") col_cost = c;
        else if (h == "revenue_micros") col_rev = c;
        else if (h == "converted") col_conv = c;
        else {
            feature_cols.push_back(c);
            log.feature_names.push_back(h);
        }
    }
    if (col_day < 0 || col_id < 0 || col_cost < 0 || col_rev < 0 || col_conv < 0)
        throw data_error("log header is missing one of day/impression_id/cost_micros/revenue_micros/converted");

    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw data_error("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                             " columns, got " + std::to_string(cells.size()));
        ImpressionRecord r;
        r.day = static_cast<int>(parse_int(cells[static_cast<std::size_t>(col_day)], row, "day"));
        if (r.day < 0) throw data_error("row " + std::to_string(row) + ": negative day");
        r.id = cells[static_cast<std::size_t>(col_id)];
        r.cost_micros = parse_int(cells[static_cast<std::size_t>(col_cost)], row, "cost_micros");
        r.revenue_micros = parse_int(cells[static_cast<std::size_t>(col_rev)], row, "revenue_micros");
        if (r.cost_micros < 0) throw data_error("row " + std::to_string(row) + ": negative cost_micros");
        if (r.revenue_micros < 0) throw data_error("row " + std::to_string(row) + ": negative revenue_micros");
        const std::string& conv = cells[static_cast<std::size_t>(col_conv)];
        if (conv == "0") r.converted = false;
        else if (conv == "1") r.converted = true;
        else throw data_error("row " + std::to_string(row) + ": field 'converted' must be 0 or 1, got '" + conv + "'");
        if (!r.converted && r.revenue_micros != 0)
            throw data_error("row " + std::to_string(row) + ": revenue on an unconverted impression");
        r.features.reserve(feature_cols.size());
        for (int c : feature_cols) r.features.push_back(cells[static_cast<std::size_t>(c)]);
        log.records.push_back(std::move(r));
    }
    return log;
}

ImpressionLog ingest_log_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open log file: " + path);
    return ingest_log(in);
}

void write_log(std::ostream& out, const ImpressionLog& log) {
    out << "day,impression_id";
    for (const auto& f : log.feature_names) out << ',' << f;
    out << ",cost_micros,revenue_micros,converted\n";
    for (const auto& r : log.records) {
        out << r.day << ',' << r.id;
        for (const auto& v : r.features) out << ',' << v;
        out << ',' << r.cost_micros << ',' << r.revenue_micros << ',' << (r.converted ? 1 : 0) << '\n';
    }
}

void write_log_file(const std::string& path, const ImpressionLog& log) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot open output file: " + path);
    write_log(out, log);
}

}  // namespace dimbid
