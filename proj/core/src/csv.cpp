#include "unibias/csv.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "unibias/errors.hpp"

namespace unibias {

std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::optional<double> parse_real(std::string_view cell) {
    if (cell.empty()) return std::nullopt;
    const std::string s(cell);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return std::nullopt;
    return v;
}

namespace {

std::string quote(const std::string& cell) {
    if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out << ',';
        out << quote(cells[i]);
    }
    out << '\n';
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(std::move(cur));
    return cells;
}

}  // namespace

void write_csv(const CsvTable& table, std::ostream& out) {
    for (const auto& m : table.metadata) out << "# " << m << '\n';
    write_row(out, table.header);
    for (const auto& r : table.rows) write_row(out, r);
}

void write_csv(const CsvTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    write_csv(table, out);
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

CsvTable parse_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!have_header && !line.empty() && line[0] == '#') {
            t.metadata.push_back(line.size() > 2 ? line.substr(2) : std::string());
            continue;
        }
        if (!have_header) {
            t.header = split_row(line);
            have_header = true;
            continue;
        }
        if (line.empty()) continue;
        t.rows.push_back(split_row(line));
    }
    return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    return parse_csv(in);
}

std::string timestamp_line() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[64];
    std::strftime(buf, sizeof buf, "generated: %Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

CsvTable trajectory_table(const Trajectory& traj, bool include_maps, std::vector<std::string> metadata) {
    CsvTable t;
    t.metadata = std::move(metadata);
    t.header = {"step", "time", "loss", "norm_wA", "norm_wB", "uA", "uB", "u", "gen_error"};
    const long dA = traj.empty() ? 0 : traj.samples.front().w_tot_A.size();
    const long dB = traj.empty() ? 0 : traj.samples.front().w_tot_B.size();
    if (include_maps) {
        for (long i = 0; i < dA; ++i) t.header.push_back("wA_" + std::to_string(i));
        for (long i = 0; i < dB; ++i) t.header.push_back("wB_" + std::to_string(i));
    }
    for (const auto& s : traj.samples) {
        std::vector<std::string> row = {std::to_string(s.step), format_real(s.time), format_real(s.loss),
                                        format_real(s.norm_wtot_A), format_real(s.norm_wtot_B),
                                        format_real(s.u_A), format_real(s.u_B), format_real(s.u),
                                        s.gen_error ? format_real(*s.gen_error) : std::string()};
        if (include_maps) {
            for (long i = 0; i < dA; ++i) row.push_back(format_real(s.w_tot_A(i)));
            for (long i = 0; i < dB; ++i) row.push_back(format_real(s.w_tot_B(i)));
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

Trajectory trajectory_from_table(const CsvTable& table) {
    const auto col = [&](const std::string& name) -> long {
        for (std::size_t i = 0; i < table.header.size(); ++i)
            if (table.header[i] == name) return static_cast<long>(i);
        return -1;
    };
    const auto need = [&](const std::string& name) {
        const long c = col(name);
        if (c < 0) throw Error(ErrorKind::Io, "trajectory CSV lacks column " + name);
        return c;
    };
    const long c_step = need("step"), c_time = need("time"), c_loss = need("loss");
    const long c_nA = need("norm_wA"), c_nB = need("norm_wB");
    const long c_uA = need("uA"), c_uB = need("uB"), c_u = need("u"), c_gen = need("gen_error");
    std::vector<long> wa, wb;
    for (long i = 0; col("wA_" + std::to_string(i)) >= 0; ++i) wa.push_back(col("wA_" + std::to_string(i)));
    for (long i = 0; col("wB_" + std::to_string(i)) >= 0; ++i) wb.push_back(col("wB_" + std::to_string(i)));

    const auto real = [](const std::vector<std::string>& row, long c) {
        if (c >= static_cast<long>(row.size())) throw Error(ErrorKind::Io, "short CSV row");
        const auto v = parse_real(row[c]);
        if (!v) throw Error(ErrorKind::Io, "malformed number '" + row[c] + "'");
        return *v;
    };
    Trajectory traj;
    for (const auto& row : table.rows) {
        TrajectorySample s;
        s.step = static_cast<long>(real(row, c_step));
        s.time = real(row, c_time);
        s.loss = real(row, c_loss);
        s.norm_wtot_A = real(row, c_nA);
        s.norm_wtot_B = real(row, c_nB);
        s.u_A = real(row, c_uA);
        s.u_B = real(row, c_uB);
        s.u = real(row, c_u);
        if (c_gen < static_cast<long>(row.size()) && !row[c_gen].empty()) s.gen_error = real(row, c_gen);
        s.w_tot_A.resize(static_cast<long>(wa.size()));
        s.w_tot_B.resize(static_cast<long>(wb.size()));
        for (std::size_t i = 0; i < wa.size(); ++i) s.w_tot_A(i) = real(row, wa[i]);
        for (std::size_t i = 0; i < wb.size(); ++i) s.w_tot_B(i) = real(row, wb[i]);
        traj.samples.push_back(std::move(s));
    }
    if (traj.samples.size() >= 2 && traj.samples[1].step != traj.samples[0].step) {
        traj.eta = (traj.samples[1].time - traj.samples[0].time) /
                   static_cast<double>(traj.samples[1].step - traj.samples[0].step);
    }
    return traj;
}

}  // namespace unibias
