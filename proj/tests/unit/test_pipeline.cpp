#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"

#include "cyclosense/error.hpp"
#include "cyclosense/metrics.hpp"
#include "cyclosense/pipeline.hpp"

namespace fs = std::filesystem;
using namespace cyclosense;
using namespace cyclosense::pipeline;

namespace {

ExperimentConfig tiny(Mode mode) {
    ExperimentConfig cfg;
    cfg.mode = mode;
    cfg.seed = 5;
    cfg.per_class_per_snr = 5;
    cfg.snr_levels_db = {4, 14};
    cfg.record_length = 1024;
    cfg.train.max_epochs = 3;
    cfg.train.learning_rate = 1e-3;
    cfg.sweep_crop_rows = {4, 16};
    cfg.timing_examples = 2;
    cfg.cfar_calibration_size = 200;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

int cli(const std::string& args) {
    const std::string cmd = std::string(CYCLOSENSE_CLI) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST_CASE("config: JSON round trip, unknown keys, mode checks") {
    auto cfg = tiny(Mode::Case2);
    const auto back = config_from_json(to_json(cfg));
    CHECK(to_json(back) == to_json(cfg));
    auto j = to_json(cfg);
    j["learning_rate_typo"] = 1.0;
    CHECK_THROWS_AS(config_from_json(j), InvalidInput);
    auto j2 = to_json(cfg);
    j2["per_class_per_snr"] = "forty";
    CHECK_THROWS_AS(config_from_json(j2), InvalidInput);

    auto no_noise = tiny(Mode::Case1);
    no_noise.classes = {WaveformClass::Gsm, WaveformClass::Umts};
    CHECK_THROWS_AS(validate(no_noise), InvalidInput);
    auto bad_len = tiny(Mode::Case1);
    bad_len.record_length = 1000;
    CHECK_THROWS_AS(validate(bad_len), InvalidInput);
    auto bad_frac = tiny(Mode::Case1);
    bad_frac.train_fraction = 1.0;
    CHECK_THROWS_AS(validate(bad_frac), InvalidInput);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), FileNotFound);
    CHECK(parse_mode("sweep-crop") == Mode::CropSweep);
    CHECK(parse_mode("sense_compare") == Mode::SenseCompare);
}

TEST_CASE("record plan: counts and seeds stable when a stratum grows") {
    const auto cfg = tiny(Mode::Case1);
    const auto base = plan_records(cfg, 1);
    CHECK(base.size() == 4 * 2 * 5);
    const auto big = plan_records(cfg, 3);
    CHECK(big.size() == 3 * 2 * 5 + 3 * 2 * 5);
    std::set<std::uint64_t> big_seeds;
    for (const auto& k : big) big_seeds.insert(k.seed);
    for (const auto& k : base) CHECK(big_seeds.count(k.seed) == 1);
    CHECK(big_seeds.size() == big.size());
}

TEST_CASE("sample split: stratified, disjoint, extendable") {
    auto cfg = tiny(Mode::Case1);
    std::vector<Sample> samples;
    for (const auto& k : plan_records(cfg, 3)) samples.push_back(Sample{k, {}, {}, 0.0});
    const auto s = split_samples(samples, 0.6, 1, cfg.per_class_per_snr);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    for (auto i : s.test) CHECK(all.insert(i).second);
    CHECK(all.size() == samples.size());
    std::map<std::pair<int, double>, std::size_t> train_count;
    for (auto i : s.train)
        if (samples[i].key.index < cfg.per_class_per_snr)
            ++train_count[{static_cast<int>(samples[i].key.cls), samples[i].key.snr_db}];
    for (const auto& [k, n] : train_count) CHECK(n == 3);

    // The first block splits the same with or without the extra noise blocks.
    std::vector<Sample> small;
    for (const auto& k : plan_records(cfg, 1)) small.push_back(Sample{k, {}, {}, 0.0});
    const auto t = split_samples(small, 0.6, 1, cfg.per_class_per_snr);
    std::set<std::uint64_t> a, b;
    for (auto i : s.train)
        if (samples[i].key.index < cfg.per_class_per_snr) a.insert(samples[i].key.seed);
    for (auto i : t.train) b.insert(small[i].key.seed);
    CHECK(a == b);
}

TEST_CASE("case1 and case2 reports recompute from the prediction log") {
    const auto samples = synthesize_for(tiny(Mode::Case2));
    const auto r1 = run_case1(tiny(Mode::Case1), samples);
    const auto s1 = summarize(r1);
    std::vector<int> p, t;
    for (const auto& x : r1.predictions) {
        p.push_back(x.predicted);
        t.push_back(x.label);
    }
    CHECK(s1["case1"]["overall"]["accuracy"].get<double>() == metrics::accuracy(p, t));
    CHECK(accuracy_curve(r1, "case1").size() == 2);

    const auto r2 = run_case2(tiny(Mode::Case2), samples);
    std::set<int> classify_labels;
    for (const auto& x : r2.predictions)
        if (x.experiment == "case2.classify") classify_labels.insert(x.label);
    CHECK(classify_labels.count(0) == 0);
    for (const auto& [snr, pt] : case2_curve(r2)) CHECK(pt.overall == doctest::Approx(pt.sensing * pt.classification));
    const auto s2 = summarize(r2);
    CHECK(s2.contains("case2"));
}

TEST_CASE("report files: write, reload, re-emit idempotently") {
    const auto root = fs::temp_directory_path() / "cyclosense_unit_report";
    fs::remove_all(root);
    const auto r = run_experiment(tiny(Mode::Case1));
    write_report(r, root / "a");
    CHECK(fs::exists(root / "a" / "report.json"));
    CHECK(fs::exists(root / "a" / "predictions.csv"));
    CHECK(fs::exists(root / "a" / "case1_accuracy.dat"));
    const auto back = load_report(root / "a");
    CHECK(back.predictions == r.predictions);
    cmd_report(root / "a", root / "b");
    cmd_report(root / "b", root / "c");
    for (const auto& e : fs::directory_iterator(root / "b"))
        if (e.path().filename() != "timing.json")
            CHECK(slurp(e.path()) == slurp(root / "c" / e.path().filename()));
    CHECK_THROWS_AS(load_report(root / "missing"), FileNotFound);
    fs::remove_all(root);
}

TEST_CASE("generate and scf commands") {
    const auto root = fs::temp_directory_path() / "cyclosense_unit_generate";
    fs::remove_all(root);
    auto cfg = tiny(Mode::Case1);
    const auto g = cmd_generate(cfg, root / "a");
    CHECK(g.records == 4 * 2 * 5);
    const auto m = cmd_scf(root / "a", cfg.fam);
    CHECK(m.size() == 2 * g.records);
    cmd_generate(cfg, root / "b");
    const auto ma = dataio::open_dataset(root / "a");
    const auto mb = dataio::open_dataset(root / "b");
    for (std::size_t i = 0; i < mb.size(); ++i) {
        const auto& e = mb.entries()[i];
        const auto it = std::find_if(ma.entries().begin(), ma.entries().end(),
                                     [&](const auto& x) { return x.file_path == e.file_path; });
        REQUIRE(it != ma.entries().end());
        CHECK(it->checksum == e.checksum);
    }
    const auto loaded = load_samples(ma, cfg, needs_for(cfg));
    const auto fresh = synthesize_for(cfg);
    REQUIRE(loaded.size() == fresh.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].key.seed == fresh[i].key.seed);
        CHECK(loaded[i].key.index == fresh[i].key.index);
        CHECK(loaded[i].crop.values == fresh[i].crop.values);
    }
    fs::remove_all(root);
}

TEST_CASE("cli exit codes") {
    const auto root = fs::temp_directory_path() / "cyclosense_unit_cli";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string small = " --per-class 2 --snr 10 --length 1024 ";
    CHECK(cli("generate --out " + (root / "d").string() + small) == 2); // no seed
    CHECK(cli("generate --seed 1 --out " + (root / "d").string() + small) == 0);
    CHECK(cli("case1 --seed 1 --classes gsm,umts --out " + (root / "r").string() + small) == 2);
    CHECK(cli("report --in " + (root / "none").string() + " --out " + (root / "o").string()) == 3);
    std::ofstream(root / "bad.json") << "{\"per_class_per_snr\": -1}";
    CHECK(cli("case1 --seed 1 --config " + (root / "bad.json").string() + " --out " + (root / "r").string()) == 2);

    const auto man = dataio::open_dataset(root / "d");
    const auto victim = man.resolve(man.entries().front());
    std::ofstream(victim, std::ios::binary | std::ios::app) << "junk!!!!";
    CHECK(cli("case1 --seed 1 --epochs 1 --data " + (root / "d").string() + " --out " + (root / "r").string() + small) ==
          3);
    fs::remove_all(root);
}
