#include "codcast/codio.hpp"

#include "codcast/errors.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace codcast {

std::string to_string(FlowUnits u) {
    return u == FlowUnits::km_per_hour ? "km_per_h" : "px_per_frame";
}

FlowUnits flow_units_from_string(const std::string& tag) {
    if (tag == "km_per_h") return FlowUnits::km_per_hour;
    if (tag == "px_per_frame") return FlowUnits::pixels_per_frame;
    throw FormatError("unknown flow units tag '" + tag + "'");
}

} // namespace codcast

namespace codcast::codio {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
    if (s == "nan" || s == "NaN" || s == "NAN") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw FormatError("cannot parse number '" + std::string(s) + "'");
    }
    return v;
}

void append_f64_le(std::string& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char b[8];
    for (int k = 0; k < 8; ++k) {
        b[k] = static_cast<char>(bits & 0xffu);
        bits >>= 8;
    }
    out.append(b, 8);
}

double load_f64_le(const char* p) {
    std::uint64_t bits = 0;
    for (int k = 7; k >= 0; --k) {
        bits = (bits << 8) | static_cast<unsigned char>(p[k]);
    }
    return std::bit_cast<double>(bits);
}

std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IOError("read failure on '" + path.string() + "'");
    return std::move(ss).str();
}

void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IOError("cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IOError("write failure on '" + path.string() + "'");
}

namespace {

struct Header {
    std::string kind;
    int nx = 0;
    int ny = 0;
    std::vector<std::int64_t> timestamps;
    geo::GeoFrame frame;
    std::string units;
    std::size_t payload_offset = 0;
};

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && line[i] == ' ') ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

std::int64_t parse_int(std::string_view s) {
    std::int64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw FormatError("cannot parse integer '" + std::string(s) + "'");
    }
    return v;
}

// Reads one LF-terminated line starting at `pos`.
std::string_view next_line(std::string_view bytes, std::size_t& pos) {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) {
        throw IOError("truncated CODG header");
    }
    auto line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
}

std::vector<std::string_view> expect_key(std::string_view line, std::string_view key,
                                         std::size_t min_args) {
    auto tok = split_ws(line);
    if (tok.empty() || tok[0] != key || tok.size() < min_args + 1) {
        throw FormatError("expected CODG header line '" + std::string(key) +
                          "', got '" + std::string(line) + "'");
    }
    return tok;
}

Header parse_header(std::string_view bytes) {
    Header h;
    std::size_t pos = 0;
    auto magic = split_ws(next_line(bytes, pos));
    if (magic.size() != 2 || magic[0] != "CODG") {
        throw FormatError("missing CODG magic");
    }
    if (parse_int(magic[1]) != kFormatVersion) {
        throw FormatError("unsupported CODG version " + std::string(magic[1]));
    }
    h.kind = std::string(expect_key(next_line(bytes, pos), "kind", 1)[1]);
    if (h.kind != "scalar" && h.kind != "flow") {
        throw FormatError("unknown CODG kind '" + h.kind + "'");
    }
    const auto nx = parse_int(expect_key(next_line(bytes, pos), "nx", 1)[1]);
    const auto ny = parse_int(expect_key(next_line(bytes, pos), "ny", 1)[1]);
    if (nx < 1 || ny < 1 || nx > (1 << 20) || ny > (1 << 20)) {
        throw DimensionError("CODG dimensions out of range");
    }
    h.nx = static_cast<int>(nx);
    h.ny = static_cast<int>(ny);
    auto ts = expect_key(next_line(bytes, pos), "timestamp", 1);
    for (std::size_t k = 1; k < ts.size(); ++k) h.timestamps.push_back(parse_int(ts[k]));
    const std::size_t want_ts = h.kind == "flow" ? 2 : 1;
    if (h.timestamps.size() != want_ts) {
        throw FormatError("wrong number of timestamps for kind " + h.kind);
    }
    auto fr = expect_key(next_line(bytes, pos), "frame", 5);
    h.frame.r = parse_double(fr[1]);
    h.frame.lon_min = parse_double(fr[2]);
    h.frame.lat_min = parse_double(fr[3]);
    h.frame.dlon = parse_double(fr[4]);
    h.frame.dlat = parse_double(fr[5]);
    h.frame.nx = h.nx;
    h.frame.ny = h.ny;
    h.units = std::string(expect_key(next_line(bytes, pos), "units", 1)[1]);
    if (split_ws(next_line(bytes, pos)) != std::vector<std::string_view>{"end"}) {
        throw FormatError("missing CODG 'end' line");
    }
    h.payload_offset = pos;
    return h;
}

std::string encode_header(std::string_view kind, int nx, int ny,
                          const std::vector<std::int64_t>& timestamps,
                          const geo::GeoFrame& frame, std::string_view units) {
    std::string out = "CODG " + std::to_string(kFormatVersion) + "\n";
    out += "kind " + std::string(kind) + "\n";
    out += "nx " + std::to_string(nx) + "\n";
    out += "ny " + std::to_string(ny) + "\n";
    out += "timestamp";
    for (auto t : timestamps) out += " " + std::to_string(t);
    out += "\n";
    out += "frame " + format_double(frame.r) + " " + format_double(frame.lon_min) + " " +
           format_double(frame.lat_min) + " " + format_double(frame.dlon) + " " +
           format_double(frame.dlat) + "\n";
    out += "units " + std::string(units) + "\n";
    out += "end\n";
    return out;
}

// Payload shorter than declared by a partial value is a truncated file (IOError);
// a whole number of values that disagrees with the header is a DimensionError.
void check_payload(std::size_t have_bytes, std::size_t want_values) {
    const std::size_t want_bytes = want_values * 8;
    if (have_bytes == want_bytes) return;
    if (have_bytes < want_bytes && have_bytes % 8 != 0) {
        throw IOError("CODG payload truncated");
    }
    throw DimensionError("CODG payload holds " + std::to_string(have_bytes / 8) +
                         " values, header declares " + std::to_string(want_values));
}

void read_plane(std::string_view bytes, std::size_t offset, std::vector<double>& out) {
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = load_f64_le(bytes.data() + offset + 8 * k);
    }
}

} // namespace

std::string encode_grid(const ScalarGrid& grid) {
    if (grid.values.size() != static_cast<std::size_t>(grid.nx) * grid.ny) {
        throw DimensionError("grid values length != nx*ny");
    }
    std::string out = encode_header("scalar", grid.nx, grid.ny, {grid.timestamp},
                                    grid.frame, "cod");
    out.reserve(out.size() + grid.values.size() * 8);
    for (double v : grid.values) append_f64_le(out, v);
    return out;
}

ScalarGrid decode_grid(std::string_view bytes) {
    const Header h = parse_header(bytes);
    if (h.kind != "scalar") throw FormatError("expected a scalar CODG file");
    ScalarGrid g(h.nx, h.ny);
    g.timestamp = h.timestamps[0];
    g.frame = h.frame;
    check_payload(bytes.size() - h.payload_offset, g.values.size());
    read_plane(bytes, h.payload_offset, g.values);
    return g;
}

std::string encode_flow(const FlowField& flow) {
    const std::size_t n = static_cast<std::size_t>(flow.nx) * flow.ny;
    if (flow.u.size() != n || flow.v.size() != n) {
        throw DimensionError("flow planes length != nx*ny");
    }
    std::string out = encode_header("flow", flow.nx, flow.ny, {flow.t_prev, flow.t_next},
                                    flow.frame, to_string(flow.units));
    out.reserve(out.size() + 16 * n);
    for (double v : flow.u) append_f64_le(out, v);
    for (double v : flow.v) append_f64_le(out, v);
    return out;
}

FlowField decode_flow(std::string_view bytes) {
    const Header h = parse_header(bytes);
    if (h.kind != "flow") throw FormatError("expected a flow CODG file");
    FlowField f(h.nx, h.ny);
    f.t_prev = h.timestamps[0];
    f.t_next = h.timestamps[1];
    f.frame = h.frame;
    f.units = flow_units_from_string(h.units);
    check_payload(bytes.size() - h.payload_offset, 2 * f.size());
    read_plane(bytes, h.payload_offset, f.u);
    read_plane(bytes, h.payload_offset + 8 * f.size(), f.v);
    return f;
}

ScalarGrid read_grid(const std::filesystem::path& path) {
    return decode_grid(read_file_bytes(path));
}

void write_grid(const ScalarGrid& grid, const std::filesystem::path& path) {
    write_file_bytes(path, encode_grid(grid));
}

FlowField read_flow(const std::filesystem::path& path) {
    return decode_flow(read_file_bytes(path));
}

void write_flow(const FlowField& flow, const std::filesystem::path& path) {
    write_file_bytes(path, encode_flow(flow));
}

ScalarGrid parse_grid_csv(std::string_view text, geo::GeoFrame frame) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
            s.remove_suffix(1);
        return s;
    };
    auto split = [&](std::string_view line) {
        std::vector<std::string_view> cells;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            cells.push_back(trim(line.substr(start, comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        return cells;
    };

    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = trim(text.substr(pos, nl - pos));
        if (!line.empty()) lines.push_back(line);
        pos = nl + 1;
    }
    if (lines.empty()) throw FormatError("empty CSV grid");
    const auto head = split(lines[0]);
    if (head.size() != 2) throw FormatError("CSV header must be 'nx,ny'");
    const auto nx = parse_int(head[0]);
    const auto ny = parse_int(head[1]);
    if (nx < 1 || ny < 1) throw DimensionError("CSV dimensions must be positive");
    if (static_cast<std::int64_t>(lines.size()) - 1 != ny) {
        throw DimensionError("CSV row count does not match ny");
    }
    frame.nx = static_cast<int>(nx);
    frame.ny = static_cast<int>(ny);
    ScalarGrid g(frame.nx, frame.ny);
    g.frame = frame;
    for (int j = 0; j < g.ny; ++j) {
        const auto cells = split(lines[static_cast<std::size_t>(j) + 1]);
        if (static_cast<int>(cells.size()) != g.nx) {
            throw DimensionError("CSV row " + std::to_string(j) + " has wrong length");
        }
        for (int i = 0; i < g.nx; ++i) {
            g.at(i, j) = cells[i].empty() ? std::numeric_limits<double>::quiet_NaN()
                                          : parse_double(cells[i]);
        }
    }
    return g;
}

ScalarGrid read_grid_csv(const std::filesystem::path& path, geo::GeoFrame frame) {
    return parse_grid_csv(read_file_bytes(path), frame);
}

void write_pgm16(const ScalarGrid& grid, const std::filesystem::path& path, double vmax) {
    std::string out = "P5\n" + std::to_string(grid.nx) + " " + std::to_string(grid.ny) +
                      "\n65535\n";
    const double scale = vmax > 0.0 ? 65535.0 / vmax : 0.0;
    for (int j = grid.ny - 1; j >= 0; --j) {
        for (int i = 0; i < grid.nx; ++i) {
            const double v = grid.at(i, j);
            const double s = std::isfinite(v) ? std::clamp(v * scale, 0.0, 65535.0) : 0.0;
            const auto q = static_cast<std::uint16_t>(std::lround(s));
            out.push_back(static_cast<char>(q >> 8));
            out.push_back(static_cast<char>(q & 0xffu));
        }
    }
    write_file_bytes(path, out);
}

} // namespace codcast::codio
