#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pmri {

/// 16-bit binary PGM (P5, maxval 65535). `window_lo/hi` map data values to
/// the gray range; callers record the window in provenance instead of
/// autoscaling silently.
void save_pgm16(const std::string& path, const std::vector<double>& values,
                int width, int height, double window_lo, double window_hi);

/// Reads P5/P2 PGM (8- or 16-bit) into doubles scaled to [0, 1].
struct PgmImage {
    int width = 0, height = 0;
    std::vector<double> values;  // row-major, [0,1]
};
PgmImage load_pgm(const std::string& path);

/// FNV-1a 64-bit over a string, rendered as 16 hex digits. Used to stamp
/// protocols into SIGDAT headers.
std::string fnv1a_hex(const std::string& data);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace pmri
