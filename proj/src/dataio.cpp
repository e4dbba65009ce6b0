#include "cyclosense/dataio.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

#include "binary_io.hpp"
#include "cyclosense/error.hpp"
#include "cyclosense/rng.hpp"
#include "cyclosense/waveform.hpp"

namespace cyclosense::dataio {
namespace fs = std::filesystem;
namespace {

constexpr char kScfMagic[4] = {'S', 'C', 'F', '1'};
constexpr char kFeatMagic[4] = {'F', 'E', 'A', '1'};
constexpr std::size_t kHeaderBytes = 16;

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw InvalidInput("cannot open " + path.string() + " for writing");
    return os;
}

std::ifstream open_in(const fs::path& path) {
    if (!fs::exists(path)) throw FileNotFound(path.string());
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FileNotFound(path.string());
    return is;
}

void write_header(std::ostream& os, const char (&magic)[4], std::size_t rows, std::size_t cols) {
    os.write(magic, 4);
    detail::write_le(os, static_cast<std::uint32_t>(rows));
    detail::write_le(os, static_cast<std::uint32_t>(cols));
    detail::write_le(os, kDtypeFloat32);
}

void write_payload(std::ostream& os, const Matrix<double>& m) {
    for (double v : m.data()) detail::write_le(os, static_cast<float>(v));
}

struct RawMatrix {
    Matrix<double> values;
    std::optional<FeatureKind> kind;
};

RawMatrix read_container(const fs::path& path) {
    auto is = open_in(path);
    const auto file_size = fs::file_size(path);
    if (file_size == 0) throw FormatError("empty matrix file " + path.string(), 0);
    char magic[4] = {};
    is.read(magic, 4);
    const std::string family(magic, 3);
    if (is.gcount() != 4 || (family != "SCF" && family != "FEA"))
        throw FormatError("bad magic in " + path.string(), 0);
    if (magic[3] != '1') throw FormatError("unsupported container version in " + path.string(), 3);
    const bool has_kind = family == "FEA";
    const auto rows = detail::read_le<std::uint32_t>(is, "row count");
    const auto cols = detail::read_le<std::uint32_t>(is, "column count");
    const auto dtype = detail::read_le<std::uint32_t>(is, "dtype code");
    if (dtype != kDtypeFloat32) throw FormatError("unsupported dtype code " + std::to_string(dtype), 12);
    const std::uint64_t header = kHeaderBytes + (has_kind ? 1 : 0);
    const std::uint64_t payload = static_cast<std::uint64_t>(rows) * cols * sizeof(float);

    RawMatrix out;
    if (has_kind) {
        const auto k = detail::read_le<std::uint8_t>(is, "kind byte");
        if (k > static_cast<std::uint8_t>(FeatureKind::SCF_CROP))
            throw FormatError("unknown feature kind byte", static_cast<long long>(kHeaderBytes));
        out.kind = static_cast<FeatureKind>(k);
    }
    if (file_size < header + payload) {
        throw FormatError("truncated payload in " + path.string() + ": file ends at byte offset " +
                              std::to_string(file_size) + ", expected " + std::to_string(header + payload),
                          static_cast<long long>(file_size));
    }
    if (file_size != header + payload)
        throw FormatError("trailing bytes in " + path.string(), static_cast<long long>(header + payload));
    out.values = Matrix<double>(rows, cols);
    for (double& v : out.values.data()) v = detail::read_le<float>(is, "matrix payload");
    return out;
}

ScfMatrix with_axes(Matrix<double> values) {
    ScfMatrix m;
    const std::size_t rows = values.rows();
    m.freq_axis = scf::channel_frequencies(values.cols());
    m.alpha_axis.resize(rows);
    if (rows % 2 == 1) {
        const double p = 2.0 * static_cast<double>(rows - 1);
        for (std::size_t q = 0; q < rows; ++q) m.alpha_axis[q] = static_cast<double>(q) / p;
    } else {
        for (std::size_t r = 0; r < rows; ++r)
            m.alpha_axis[r] = (static_cast<double>(r) - static_cast<double>(rows / 2)) / static_cast<double>(rows);
    }
    m.values = std::move(values);
    return m;
}

std::string shape_of(std::size_t rows, std::size_t cols) {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

} // namespace

void write_iq(const fs::path& path, const ComplexSignal& s) {
    auto os = open_out(path);
    for (const auto& x : s.samples) {
        detail::write_le(os, static_cast<float>(x.real()));
        detail::write_le(os, static_cast<float>(x.imag()));
    }
    if (!os) throw InvalidInput("failed writing " + path.string());
}

ComplexSignal read_iq(const fs::path& path, std::optional<std::size_t> expected_samples, double sample_rate_hz) {
    auto is = open_in(path);
    const auto size = fs::file_size(path);
    if (size == 0) throw FormatError("empty I/Q file " + path.string(), 0);
    if (size % 8 != 0)
        throw FormatError("truncated I/Q payload in " + path.string() + " at byte offset " +
                              std::to_string(size - size % 8),
                          static_cast<long long>(size - size % 8));
    const std::size_t n = size / 8;
    if (expected_samples && n < *expected_samples)
        throw FormatError("truncated I/Q payload in " + path.string() + ": data ends at byte offset " +
                              std::to_string(size) + ", expected " + std::to_string(*expected_samples * 8),
                          static_cast<long long>(size));
    ComplexSignal s;
    s.sample_rate_hz = sample_rate_hz;
    s.samples.resize(n);
    for (auto& x : s.samples) {
        const float re = detail::read_le<float>(is, "I sample");
        const float im = detail::read_le<float>(is, "Q sample");
        x = {re, im};
    }
    return s;
}

void write_matrix(const fs::path& path, const ScfMatrix& m) {
    auto os = open_out(path);
    write_header(os, kScfMagic, m.rows(), m.cols());
    write_payload(os, m.values);
}

void write_matrix(const fs::path& path, const FeatureMatrix& m) {
    auto os = open_out(path);
    write_header(os, kFeatMagic, m.rows(), m.cols());
    detail::write_le(os, static_cast<std::uint8_t>(m.kind));
    write_payload(os, m.values);
}

ScfMatrix read_scf(const fs::path& path) {
    auto raw = read_container(path);
    if (raw.kind && *raw.kind != FeatureKind::SCF)
        throw FormatError(path.string() + " holds a " + std::string(to_string(*raw.kind)) + " feature, not an SCF matrix", 0);
    return with_axes(std::move(raw.values));
}

FeatureMatrix read_feature(const fs::path& path) {
    auto raw = read_container(path);
    FeatureMatrix f;
    f.values = std::move(raw.values);
    f.kind = raw.kind.value_or(FeatureKind::SCF);
    return f;
}

ScfMatrix import_raw_matrix(const fs::path& path, std::size_t rows, std::size_t cols) {
    auto is = open_in(path);
    const auto expected = static_cast<std::uintmax_t>(rows) * cols * sizeof(float);
    const auto size = fs::file_size(path);
    if (size != expected)
        throw FormatError("raw matrix " + path.string() + " has " + std::to_string(size) + " bytes, expected " +
                              std::to_string(expected),
                          static_cast<long long>(std::min<std::uintmax_t>(size, expected)));
    Matrix<double> values(rows, cols);
    for (double& v : values.data()) v = detail::read_le<float>(is, "raw matrix payload");
    return with_axes(std::move(values));
}

std::uint32_t crc32_file(const fs::path& path) {
    auto is = open_in(path);
    uLong crc = crc32(0L, Z_NULL, 0);
    std::vector<char> buf(1 << 16);
    while (is) {
        is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto got = is.gcount();
        if (got > 0) crc = crc32(crc, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(got));
    }
    return static_cast<std::uint32_t>(crc);
}

void DatasetManifest::add(ManifestEntry e) {
    for (const auto& x : entries_) {
        if (x.file_path == e.file_path) throw InvalidInput("duplicate manifest path " + e.file_path);
    }
    entries_.push_back(std::move(e));
}

std::map<std::pair<int, double>, std::size_t> DatasetManifest::strata_counts() const {
    std::map<std::pair<int, double>, std::size_t> counts;
    for (const auto& e : entries_) ++counts[{e.class_label, e.snr_db}];
    return counts;
}

std::string format_snr(double snr_db) {
    if (std::isinf(snr_db)) return snr_db > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", snr_db);
    return buf;
}

void write_manifest(const fs::path& path, const DatasetManifest& m) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw InvalidInput("cannot write manifest " + path.string());
    os << "# cyclosense manifest v1\n";
    os << "# file_path\tkind\tclass_label\tsnr_db\tseed\tlength_or_shape\tcrc32\n";
    for (const auto& e : m.entries()) {
        char crc[16];
        std::snprintf(crc, sizeof crc, "%08x", e.checksum);
        os << e.file_path << '\t' << e.kind << '\t' << e.class_label << '\t' << format_snr(e.snr_db) << '\t'
           << e.seed << '\t' << e.length_or_shape << '\t' << crc << '\n';
    }
}

DatasetManifest load_manifest(const fs::path& path, bool verify_checksums) {
    if (!fs::exists(path)) throw FileNotFound(path.string());
    std::ifstream is(path);
    DatasetManifest m(path.parent_path());
    std::string line;
    std::size_t lineno = 0;
    bool versioned = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (lineno == 1) {
                if (line != "# cyclosense manifest v1") throw FormatError("unsupported manifest version: " + line);
                versioned = true;
            }
            continue;
        }
        if (!versioned) throw FormatError("manifest " + path.string() + " lacks a version line");
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, '\t')) f.push_back(cell);
        if (f.size() != 7) throw FormatError("manifest line " + std::to_string(lineno) + " has " +
                                             std::to_string(f.size()) + " fields, expected 7");
        ManifestEntry e;
        try {
            e.file_path = f[0];
            e.kind = f[1];
            e.class_label = std::stoi(f[2]);
            e.snr_db = std::stod(f[3]);
            e.seed = std::stoull(f[4]);
            e.length_or_shape = f[5];
            e.checksum = static_cast<std::uint32_t>(std::stoul(f[6], nullptr, 16));
        } catch (const std::exception&) {
            throw FormatError("malformed manifest line " + std::to_string(lineno));
        }
        m.add(std::move(e));
    }
    if (!versioned) throw FormatError("manifest " + path.string() + " is empty");
    if (verify_checksums) {
        for (const auto& e : m.entries()) {
            const auto crc = crc32_file(m.resolve(e));
            if (crc != e.checksum) throw FormatError("checksum mismatch for " + e.file_path);
        }
    }
    return m;
}

std::string record_file_name(int class_label, double snr_db, std::uint64_t seed, const std::string& ext) {
    return std::string(to_string(static_cast<WaveformClass>(class_label))) + "_snr" + format_snr(snr_db) +
           "_seed" + std::to_string(seed) + "." + ext;
}

DatasetManifest build_manifest(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw FileNotFound(dir.string());
    static const std::regex pattern(R"(^([a-z]+)_snr(-?[0-9]+\.[0-9]+|inf)_seed([0-9]+)\.(iq|scf|feat)$)");
    std::vector<fs::path> files;
    for (const auto& de : fs::directory_iterator(dir)) {
        if (de.is_regular_file()) files.push_back(de.path());
    }
    std::sort(files.begin(), files.end());
    DatasetManifest m(dir);
    for (const auto& p : files) {
        const auto name = p.filename().string();
        std::smatch match;
        if (!std::regex_match(name, match, pattern)) continue;
        ManifestEntry e;
        e.file_path = name;
        e.kind = match[4];
        e.class_label = static_cast<int>(parse_waveform_class(match[1].str()));
        e.snr_db = match[2] == "inf" ? std::numeric_limits<double>::infinity() : std::stod(match[2]);
        e.seed = std::stoull(match[3]);
        if (e.kind == "iq") {
            e.length_or_shape = std::to_string(fs::file_size(p) / 8);
        } else {
            const auto raw = read_container(p);
            e.length_or_shape = shape_of(raw.values.rows(), raw.values.cols());
        }
        e.checksum = crc32_file(p);
        m.add(std::move(e));
    }
    return m;
}

DatasetManifest open_dataset(const fs::path& path_or_dir, bool verify_checksums) {
    if (fs::is_directory(path_or_dir)) return load_manifest(path_or_dir / kManifestName, verify_checksums);
    return load_manifest(path_or_dir, verify_checksums);
}

ManifestSplit stratified_split(const DatasetManifest& m, double train_frac, std::uint64_t seed) {
    if (!(train_frac >= 0.0 && train_frac <= 1.0)) throw InvalidInput("train fraction must be in [0, 1]");
    std::map<std::pair<int, double>, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < m.size(); ++i) strata[{m.entries()[i].class_label, m.entries()[i].snr_db}].push_back(i);
    ManifestSplit out{DatasetManifest(m.root()), DatasetManifest(m.root())};
    Rng rng(seed);
    std::vector<bool> to_train(m.size(), false);
    for (auto& [key, idx] : strata) {
        for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
        const auto n_train = static_cast<std::size_t>(std::lround(train_frac * static_cast<double>(idx.size())));
        for (std::size_t k = 0; k < n_train; ++k) to_train[idx[k]] = true;
    }
    for (std::size_t i = 0; i < m.size(); ++i) (to_train[i] ? out.train : out.test).add(m.entries()[i]);
    return out;
}

} // namespace cyclosense::dataio
