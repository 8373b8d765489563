#include "hh/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>

namespace hh {

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    const auto tmp = path.parent_path() / (path.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) raise(ErrorCode::InvalidArgument, "cannot open " + tmp.string());
        out << text;
    }
    std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::InvalidArgument, "cannot read " + path.string());
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) text_ += ',';
        text_ += header[i];
    }
    text_ += '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != columns_) raise(ErrorCode::ShapeMismatch, "csv row width");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) text_ += ',';
        text_ += fmt_double(values[i]);
    }
    text_ += '\n';
}

void CsvWriter::save(const std::filesystem::path& path) const {
    write_text_atomic(path, text_);
}

namespace {

struct FieldHeader {
    char magic[4] = {'H', 'H', 'F', 'B'};
    std::uint32_t version = 1;
    std::int32_t mode = 0;
    std::int32_t dimension = 0;
    std::int64_t cells = 0;
    std::int32_t nt = 0;
    std::int32_t pad = 0;
    double T = 0;
    double extent = 0;
};

void check_grid_match(const FieldHeader& h, const SpatialGrid& grid) {
    if (h.cells != grid.cells() || h.dimension != grid.dimension ||
        h.mode != (grid.mode == GridMode::radial3d ? 0 : 1))
        raise(ErrorCode::ShapeMismatch, "field file does not match the scenario grid");
}

} // namespace

void save_field(const std::filesystem::path& path, const Field& f, const SpatialGrid& grid) {
    FieldHeader h;
    h.mode = (grid.mode == GridMode::radial3d) ? 0 : 1;
    h.dimension = grid.dimension;
    h.cells = grid.cells();
    h.nt = f.nt();
    h.T = f.time.T;
    h.extent = grid.extent;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::InvalidArgument, "cannot open " + path.string());
    out.write(reinterpret_cast<const char*>(&h), sizeof h);
    for (int n = 0; n <= f.nt(); ++n) {
        const Eigen::VectorXd col = f.v.col(n);
        out.write(reinterpret_cast<const char*>(col.data()),
                  static_cast<std::streamsize>(sizeof(double) * col.size()));
    }
}

Field load_field(const std::filesystem::path& path, const SpatialGrid& grid) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::InvalidArgument, "cannot read " + path.string());
    FieldHeader h;
    in.read(reinterpret_cast<char*>(&h), sizeof h);
    if (!in || std::memcmp(h.magic, "HHFB", 4) != 0 || h.version != 1)
        raise(ErrorCode::ParseError, "not a field file: " + path.string());
    check_grid_match(h, grid);
    Field f(grid.cells(), TimeGrid{std::max<int>(h.nt, 1), h.T > 0 ? h.T : 1.0});
    if (h.nt == 0) {
        Eigen::VectorXd col(grid.cells());
        in.read(reinterpret_cast<char*>(col.data()),
                static_cast<std::streamsize>(sizeof(double) * col.size()));
        for (int n = 0; n < f.levels(); ++n) f.v.col(n) = col;
        return f;
    }
    f = Field(grid.cells(), TimeGrid{h.nt, h.T});
    for (int n = 0; n <= h.nt; ++n) {
        Eigen::VectorXd col(grid.cells());
        in.read(reinterpret_cast<char*>(col.data()),
                static_cast<std::streamsize>(sizeof(double) * col.size()));
        f.v.col(n) = col;
    }
    if (!in) raise(ErrorCode::ParseError, "truncated field file: " + path.string());
    return f;
}

void save_vector(const std::filesystem::path& path, const Eigen::VectorXd& v,
                 const SpatialGrid& grid) {
    FieldHeader h;
    h.mode = (grid.mode == GridMode::radial3d) ? 0 : 1;
    h.dimension = grid.dimension;
    h.cells = grid.cells();
    h.nt = 0;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::InvalidArgument, "cannot open " + path.string());
    out.write(reinterpret_cast<const char*>(&h), sizeof h);
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(sizeof(double) * v.size()));
}

Eigen::VectorXd load_vector(const std::filesystem::path& path, const SpatialGrid& grid) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::InvalidArgument, "cannot read " + path.string());
    FieldHeader h;
    in.read(reinterpret_cast<char*>(&h), sizeof h);
    if (!in || std::memcmp(h.magic, "HHFB", 4) != 0)
        raise(ErrorCode::ParseError, "not a field file: " + path.string());
    check_grid_match(h, grid);
    if (h.nt != 0) raise(ErrorCode::ShapeMismatch, "expected a per-cell vector file");
    Eigen::VectorXd v(grid.cells());
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * v.size()));
    if (!in) raise(ErrorCode::ParseError, "truncated vector file: " + path.string());
    return v;
}

void save_field_csv(const std::filesystem::path& path, const Field& f) {
    CsvWriter csv({"time", "cell", "value"});
    for (int n = 0; n <= f.nt(); ++n) {
        const double t = n * f.time.dt();
        for (Eigen::Index j = 0; j < f.cells(); ++j)
            csv.row({t, static_cast<double>(j), f.v(j, n)});
    }
    csv.save(path);
}

Field load_field_csv(const std::filesystem::path& path, const SpatialGrid& grid,
                     const TimeGrid& time) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::InvalidArgument, "cannot read " + path.string());
    std::string line;
    std::getline(in, line);  // header
    Field f(grid.cells(), time);
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double t, cell, value;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &cell, &value) != 3)
            raise(ErrorCode::ParseError, "bad csv row in " + path.string() + ": " + line);
        const int n = static_cast<int>(std::lround(t / time.dt()));
        const auto j = static_cast<Eigen::Index>(cell);
        if (n < 0 || n > time.nt || j < 0 || j >= grid.cells())
            raise(ErrorCode::ShapeMismatch, "csv row outside the grid in " + path.string());
        f.v(j, n) = value;
        ++rows;
    }
    if (rows != (time.nt + 1) * grid.cells())
        raise(ErrorCode::ShapeMismatch, "csv field is incomplete: " + path.string());
    return f;
}

void save_masks_csv(const std::filesystem::path& path, const SpatialGrid& grid,
                    const RegionSet& regions) {
    std::vector<std::string> header = {"cell"};
    for (int d = 0; d < grid.dimension && d < 3; ++d) header.push_back("x" + std::to_string(d));
    for (const char* name : {"O", "O1", "O2", "O1d", "O2d"}) header.push_back(name);
    CsvWriter csv(header);
    for (Eigen::Index j = 0; j < grid.cells(); ++j) {
        std::vector<double> row = {static_cast<double>(j)};
        for (int d = 0; d < grid.dimension && d < 3; ++d)
            row.push_back(grid.mode == GridMode::radial3d && d > 0 ? 0.0 : grid.centers(j, d));
        row.push_back(regions.leader.w[j]);
        row.push_back(regions.follower1.w[j]);
        row.push_back(regions.follower2.w[j]);
        row.push_back(regions.target1.w[j]);
        row.push_back(regions.target2.w[j]);
        csv.row(row);
    }
    csv.save(path);
}

LogLevel log_threshold() {
    const char* env = std::getenv("HHCTL_LOG");
    if (!env) return LogLevel::info;
    const std::string s = env;
    if (s == "debug") return LogLevel::debug;
    if (s == "warn") return LogLevel::warn;
    if (s == "error") return LogLevel::error;
    return LogLevel::info;
}

void log_line(LogLevel level, const std::string& message) {
    static const LogLevel threshold = log_threshold();
    if (level < threshold) return;
    static const char* names[] = {"debug", "info", "warn", "error"};
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << message << "\n";
}

} // namespace hh
