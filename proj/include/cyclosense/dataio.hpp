#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cyclosense/features.hpp"
#include "cyclosense/scf.hpp"
#include "cyclosense/signal.hpp"

// On-disk formats. Everything is little-endian.
//
//   .iq   raw interleaved float32 I,Q,I,Q,... (no header)
//   .scf  "SCF1" | u32 rows | u32 cols | u32 dtype (1 = float32) | payload
//   .feat "FEA1" | same three u32 | u8 kind | payload
//   manifest.tsv  one tab-separated record per line, see ManifestEntry
namespace cyclosense::dataio {

inline constexpr std::uint32_t kDtypeFloat32 = 1;

void write_iq(const std::filesystem::path& path, const ComplexSignal& s);
// expected_samples, when given, turns a short file into a FormatError that
// names the byte offset where data ran out.
ComplexSignal read_iq(const std::filesystem::path& path, std::optional<std::size_t> expected_samples = {},
                      double sample_rate_hz = 1.0);

void write_matrix(const std::filesystem::path& path, const ScfMatrix& m);
void write_matrix(const std::filesystem::path& path, const FeatureMatrix& m);

// Axes are rebuilt from the shape assuming l_hop = 1: an odd row count is
// read as one-sided (P/2 + 1 rows), an even one as two-sided. Feature files
// of any kind other than SCF are rejected.
ScfMatrix read_scf(const std::filesystem::path& path);
// SCF1 files load as FeatureKind::SCF.
FeatureMatrix read_feature(const std::filesystem::path& path);

// Headerless row-major float32 matrix of known shape, e.g. third-party SCF
// datasets stored as 8193 x 16 float arrays.
ScfMatrix import_raw_matrix(const std::filesystem::path& path, std::size_t rows, std::size_t cols);

std::uint32_t crc32_file(const std::filesystem::path& path);

struct ManifestEntry {
    std::string file_path; // relative to the manifest directory
    std::string kind;      // "iq", "scf" or "feat"
    int class_label = 0;
    double snr_db = 0.0;
    std::uint64_t seed = 0;
    std::string length_or_shape; // "16384" or "8193x16"
    std::uint32_t checksum = 0;  // CRC32 of the whole file

    bool operator==(const ManifestEntry&) const = default;
};

class DatasetManifest {
public:
    DatasetManifest() = default;
    explicit DatasetManifest(std::filesystem::path root) : root_(std::move(root)) {}

    const std::filesystem::path& root() const noexcept { return root_; }
    void set_root(std::filesystem::path root) { root_ = std::move(root); }
    const std::vector<ManifestEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

    // Rejects duplicate paths.
    void add(ManifestEntry e);
    std::filesystem::path resolve(const ManifestEntry& e) const { return root_ / e.file_path; }

    // Number of entries per (class_label, snr_db).
    std::map<std::pair<int, double>, std::size_t> strata_counts() const;

private:
    std::filesystem::path root_;
    std::vector<ManifestEntry> entries_;
};

inline constexpr const char* kManifestName = "manifest.tsv";

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
// verify_checksums recomputes every CRC32 and throws FormatError on mismatch.
DatasetManifest load_manifest(const std::filesystem::path& path, bool verify_checksums = true);

// Record file name: <class>_snr<snr>_seed<seed>.<ext>
std::string record_file_name(int class_label, double snr_db, std::uint64_t seed, const std::string& ext);

// Scans `dir` for files named by record_file_name and builds a manifest with
// fresh checksums, sorted by path.
DatasetManifest build_manifest(const std::filesystem::path& dir);

// A directory argument resolves to <dir>/manifest.tsv.
DatasetManifest open_dataset(const std::filesystem::path& path_or_dir, bool verify_checksums = true);

struct ManifestSplit {
    DatasetManifest train;
    DatasetManifest test;
};
// Per (class, snr) stratum: round(train_frac * n) entries go to train.
ManifestSplit stratified_split(const DatasetManifest& m, double train_frac, std::uint64_t seed);

std::string format_snr(double snr_db);

} // namespace cyclosense::dataio
