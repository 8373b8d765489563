#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hh/field.hpp"
#include "hh/geometry.hpp"

namespace hh {

/// FNV-1a 64-bit hash of a byte string (stable across platforms; used for
/// scenario hashes in run manifests).
std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

/// Atomic text write: temp file in the same directory, then rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

std::string read_text(const std::filesystem::path& path);

/// CSV writing with fixed %.17g formatting so identical runs are
/// byte-identical.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    void row(const std::vector<double>& values);
    const std::string& text() const { return text_; }
    void save(const std::filesystem::path& path) const;

private:
    std::string text_;
    std::size_t columns_;
};

/// Space-time field binary: fixed header (mode, dimension, cells, nt, T,
/// extent) followed by row-major doubles per level; bit-exact round trip.
void save_field(const std::filesystem::path& path, const Field& f, const SpatialGrid& grid);
Field load_field(const std::filesystem::path& path, const SpatialGrid& grid);

/// Per-cell vector stored as a zero-step field.
void save_vector(const std::filesystem::path& path, const Eigen::VectorXd& v,
                 const SpatialGrid& grid);
Eigen::VectorXd load_vector(const std::filesystem::path& path, const SpatialGrid& grid);

void save_field_csv(const std::filesystem::path& path, const Field& f);
Field load_field_csv(const std::filesystem::path& path, const SpatialGrid& grid,
                     const TimeGrid& time);

/// Mask table: cell index, coordinates, five 0/1 indicator columns.
void save_masks_csv(const std::filesystem::path& path, const SpatialGrid& grid,
                    const RegionSet& regions);

/// Log levels selected through the HHCTL_LOG environment variable
/// (debug | info | warn | error); default info.
enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3 };
LogLevel log_threshold();
void log_line(LogLevel level, const std::string& message);

} // namespace hh
