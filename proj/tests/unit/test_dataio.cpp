#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>

#include "doctest.h"

#include "cyclosense/dataio.hpp"
#include "cyclosense/error.hpp"
#include "cyclosense/rng.hpp"
#include "cyclosense/scf.hpp"
#include "cyclosense/waveform.hpp"

namespace fs = std::filesystem;
using namespace cyclosense;
using namespace cyclosense::dataio;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_bytes(const fs::path& p, const std::string& bytes) {
    std::ofstream(p, std::ios::binary) << bytes;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

long long offset_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const FormatError& e) {
        return e.byte_offset();
    }
    return -2;
}

} // namespace

TEST_CASE("iq: bit-exact round trip of float32 samples") {
    TempDir d("cyclosense_unit_iq");
    const auto r = waveform::generate_record(WaveformClass::Lte, 5.0, 1024, 3);
    write_iq(d.path / "a.iq", r.signal);
    CHECK(fs::file_size(d.path / "a.iq") == 1024 * 8);
    const auto back = read_iq(d.path / "a.iq", 1024);
    CHECK(back.samples == r.signal.samples);
}

TEST_CASE("iq: empty, ragged and short files") {
    TempDir d("cyclosense_unit_iq_bad");
    write_bytes(d.path / "empty.iq", "");
    CHECK_THROWS_AS(read_iq(d.path / "empty.iq"), FormatError);
    write_bytes(d.path / "ragged.iq", std::string(8 * 3 + 5, '\0'));
    CHECK(offset_of([&] { read_iq(d.path / "ragged.iq"); }) == 24);
    write_bytes(d.path / "short.iq", std::string(8 * 3, '\0'));
    CHECK(offset_of([&] { read_iq(d.path / "short.iq", 4); }) == 24);
    CHECK_THROWS_AS(read_iq(d.path / "missing.iq"), FileNotFound);
}

TEST_CASE("matrix container: shapes, zeros and float32 rounding") {
    TempDir d("cyclosense_unit_mat");
    const auto m = scf::compute_scf(waveform::generate_noise(16384, 1));
    write_matrix(d.path / "a.scf", m);
    const auto back = read_scf(d.path / "a.scf");
    CHECK(back.rows() == 8193);
    CHECK(back.cols() == 16);
    CHECK(back.alpha_axis == m.alpha_axis);
    CHECK(back.freq_axis == m.freq_axis);
    for (std::size_t i = 0; i < m.values.size(); ++i)
        CHECK(back.values.data()[i] == static_cast<double>(static_cast<float>(m.values.data()[i])));

    ScfMatrix z = m;
    for (double& v : z.values.data()) v = 0.0;
    write_matrix(d.path / "z.scf", z);
    CHECK(read_scf(d.path / "z.scf").values == z.values);

    FeatureMatrix f;
    f.values = Matrix<double>(2, 3, 0.25);
    f.kind = FeatureKind::AP;
    write_matrix(d.path / "f.feat", f);
    const auto fb = read_feature(d.path / "f.feat");
    CHECK(fb.kind == FeatureKind::AP);
    CHECK(fb.values == f.values);
    // An SCF container loads as a feature of kind SCF.
    CHECK(read_feature(d.path / "z.scf").kind == FeatureKind::SCF);
    CHECK_THROWS_AS(read_scf(d.path / "f.feat"), FormatError);
}

TEST_CASE("matrix container: corruption is reported with offsets") {
    TempDir d("cyclosense_unit_mat_bad");
    ScfMatrix m;
    m.values = Matrix<double>(3, 2, 1.0);
    m.alpha_axis = {0.0, 0.25, 0.5};
    m.freq_axis = {-0.5, 0.0};
    write_matrix(d.path / "ok.scf", m);
    const auto good = read_bytes(d.path / "ok.scf");

    auto bad_magic = good;
    bad_magic[0] = 'X';
    write_bytes(d.path / "magic.scf", bad_magic);
    CHECK(offset_of([&] { read_scf(d.path / "magic.scf"); }) == 0);

    auto bad_version = good;
    bad_version[3] = '9';
    write_bytes(d.path / "version.scf", bad_version);
    CHECK(offset_of([&] { read_scf(d.path / "version.scf"); }) == 3);

    write_bytes(d.path / "trunc.scf", good.substr(0, good.size() - 3));
    CHECK_THROWS_AS(read_scf(d.path / "trunc.scf"), FormatError);
    write_bytes(d.path / "trail.scf", good + '\0');
    CHECK(offset_of([&] { read_scf(d.path / "trail.scf"); }) == static_cast<long long>(good.size()));
}

TEST_CASE("raw float32 import") {
    TempDir d("cyclosense_unit_raw");
    std::string bytes;
    for (int i = 0; i < 6; ++i) {
        const float v = float(i) * 0.5f;
        char b[4];
        std::memcpy(b, &v, 4);
        bytes.append(b, 4);
    }
    write_bytes(d.path / "m.bin", bytes);
    const auto m = import_raw_matrix(d.path / "m.bin", 3, 2);
    CHECK(m.values(2, 1) == 2.5);
    CHECK_THROWS_AS(import_raw_matrix(d.path / "m.bin", 4, 2), FormatError);
}

TEST_CASE("manifest: write, load, checksum and duplicates") {
    TempDir d("cyclosense_unit_manifest");
    DatasetManifest man(d.path);
    for (int c = 0; c < 2; ++c)
        for (std::uint64_t s = 0; s < 3; ++s) {
            const auto name = record_file_name(c, 5.0, s, "iq");
            write_iq(d.path / name, waveform::generate_noise(16, s));
            man.add({name, "iq", c, 5.0, s, "16", crc32_file(d.path / name)});
        }
    CHECK_THROWS_AS(man.add(man.entries()[0]), InvalidInput);
    write_manifest(d.path / kManifestName, man);
    const auto back = open_dataset(d.path);
    CHECK(back.entries() == man.entries());
    CHECK(back.strata_counts().at({1, 5.0}) == 3);

    const auto built = build_manifest(d.path);
    CHECK(built.size() == 6);

    // Flip a payload byte.
    auto bytes = read_bytes(d.path / man.entries()[2].file_path);
    bytes[5] ^= 1;
    write_bytes(d.path / man.entries()[2].file_path, bytes);
    CHECK_THROWS_AS(open_dataset(d.path), FormatError);
    CHECK_NOTHROW(open_dataset(d.path, false));
    CHECK_THROWS_AS(open_dataset(d.path / "nowhere"), FileNotFound);
}

TEST_CASE("stratified split: 10 per stratum at 0.6") {
    DatasetManifest man("/unused");
    for (int c = 0; c < 3; ++c)
        for (double snr : {1.0, 2.0})
            for (std::uint64_t s = 0; s < 10; ++s) man.add({record_file_name(c, snr, s, "iq"), "iq", c, snr, s, "8", 0});
    const auto a = stratified_split(man, 0.6, 7);
    const auto b = stratified_split(man, 0.6, 7);
    CHECK(a.train.entries() == b.train.entries());
    for (const auto& [key, n] : a.train.strata_counts()) CHECK(n == 6);
    for (const auto& [key, n] : a.test.strata_counts()) CHECK(n == 4);
    std::set<std::string> seen;
    for (const auto& e : a.train.entries()) seen.insert(e.file_path);
    for (const auto& e : a.test.entries()) CHECK(seen.insert(e.file_path).second);
    CHECK(seen.size() == man.size());
    CHECK_THROWS_AS(stratified_split(man, 1.5, 7), InvalidInput);
}

TEST_CASE("file names") {
    CHECK(record_file_name(2, 7.0, 12, "iq") == "umts_snr7.0_seed12.iq");
    CHECK(format_snr(-3.25) == "-3.2");
}
