#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unibias/dynamics.hpp"

namespace unibias {

struct CsvTable {
    // Written as "# <line>" before the header.
    std::vector<std::string> metadata;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// 17 significant digits; "inf", "-inf" and "nan" for non-finite values.
std::string format_real(double v);
std::optional<double> parse_real(std::string_view cell);

void write_csv(const CsvTable& table, std::ostream& out);
// Throws Error(Io) when the file cannot be written.
void write_csv(const CsvTable& table, const std::filesystem::path& path);

CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);

// Metadata line stamping the wall-clock time. It is the only line that
// differs between otherwise identical runs.
std::string timestamp_line();

// Columns step,time,loss,norm_wA,norm_wB,uA,uB,u,gen_error and, with
// `include_maps`, wA_0.., wB_0...
CsvTable trajectory_table(const Trajectory& traj, bool include_maps,
                          std::vector<std::string> metadata = {});

// Inverse of trajectory_table for the recorded columns.
Trajectory trajectory_from_table(const CsvTable& table);

}  // namespace unibias
