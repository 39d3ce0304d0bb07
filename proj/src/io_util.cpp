#include "pmri/io_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pmri/core.hpp"

namespace pmri {

void save_pgm16(const std::string& path, const std::vector<double>& values,
                int width, int height, double window_lo, double window_hi) {
    if (width <= 0 || height <= 0 ||
        values.size() != static_cast<std::size_t>(width) * height)
        throw config_error("save_pgm16: size mismatch");
    if (!(window_hi > window_lo))
        throw config_error("save_pgm16: window must have positive width");
    std::ofstream f(path, std::ios::trunc | std::ios::binary);
    if (!f) throw io_error("save_pgm16: cannot open " + path);
    f << "P5\n" << width << " " << height << "\n65535\n";
    const double scale = 65535.0 / (window_hi - window_lo);
    for (std::size_t i = 0; i < values.size(); ++i) {
        double v = values[i];
        if (!std::isfinite(v)) v = window_lo;
        double g = (v - window_lo) * scale;
        g = std::clamp(g, 0.0, 65535.0);
        const auto u = static_cast<std::uint16_t>(std::lround(g));
        const unsigned char bytes[2] = {static_cast<unsigned char>(u >> 8),
                                        static_cast<unsigned char>(u & 0xff)};
        f.write(reinterpret_cast<const char*>(bytes), 2);
    }
    if (!f) throw io_error("save_pgm16: write failed for " + path);
}

namespace {

int next_pgm_token(std::istream& in) {
    // Skips whitespace and '#' comments.
    while (in) {
        int c = in.peek();
        if (c == '#') {
            std::string dummy;
            std::getline(in, dummy);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int v = -1;
    in >> v;
    if (!in) throw io_error("load_pgm: truncated header");
    return v;
}

}  // namespace

PgmImage load_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("load_pgm: cannot open " + path);
    std::string magic;
    f >> magic;
    if (magic != "P5" && magic != "P2")
        throw io_error("load_pgm: " + path + " is not a P5/P2 PGM");
    PgmImage img;
    img.width = next_pgm_token(f);
    img.height = next_pgm_token(f);
    const int maxval = next_pgm_token(f);
    if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 65535)
        throw io_error("load_pgm: bad dimensions/maxval in " + path);
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    img.values.resize(n);
    if (magic == "P2") {
        for (std::size_t i = 0; i < n; ++i)
            img.values[i] = next_pgm_token(f) / static_cast<double>(maxval);
        return img;
    }
    f.get();  // single whitespace after maxval
    const int bytes_per = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(n * bytes_per);
    f.read(reinterpret_cast<char*>(raw.data()),
           static_cast<std::streamsize>(raw.size()));
    if (!f) throw io_error("load_pgm: short pixel data in " + path);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned v = bytes_per == 2
                               ? (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1]
                               : raw[i];
        img.values[i] = v / static_cast<double>(maxval);
    }
    return img;
}

std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw io_error("write_text_file: cannot open " + path);
    f << content;
    if (!f) throw io_error("write_text_file: write failed for " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("read_text_file: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace pmri
