#include "cyclosense/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cyclosense/detect.hpp"
#include "cyclosense/error.hpp"
#include "cyclosense/metrics.hpp"
#include "cyclosense/model.hpp"
#include "cyclosense/rng.hpp"

namespace cyclosense::pipeline {
namespace fs = std::filesystem;
namespace {

template <class T>
T as_count(const json& v, const std::string& key) {
    if (!v.is_number_unsigned()) throw InvalidInput("'" + key + "' must be a non-negative integer");
    return v.get<T>();
}

template <class T>
T count_value(const json& obj, const char* key, T fallback) {
    return obj.contains(key) ? as_count<T>(obj[key], key) : fallback;
}

// Seed streams. Changing any of these changes every derived dataset.
constexpr std::uint64_t kStreamRecords = 0xDA7A;
constexpr std::uint64_t kStreamSplit = 0x5B117;
constexpr std::uint64_t kStreamCase1 = 0xC1;
constexpr std::uint64_t kStreamDetector = 0xC2D;
constexpr std::uint64_t kStreamClassifier = 0xC2C;
constexpr std::uint64_t kStreamFeatures = 0xFEA7;
constexpr std::uint64_t kStreamCrop = 0xC409;
constexpr std::uint64_t kStreamSense = 0x5E45;
constexpr std::uint64_t kStreamCalibration = 0xCA11B;
constexpr std::uint64_t kStreamAudit = 0xA0D17;

std::uint64_t require_seed(const ExperimentConfig& cfg) {
    if (!cfg.seed) throw InvalidInput("a seed is required");
    return *cfg.seed;
}

bool contains(const std::vector<WaveformClass>& v, WaveformClass c) {
    return std::find(v.begin(), v.end(), c) != v.end();
}

std::vector<WaveformClass> signal_classes(const ExperimentConfig& cfg) {
    std::vector<WaveformClass> out;
    for (auto c : cfg.classes)
        if (c != WaveformClass::Noise) out.push_back(c);
    return out;
}

std::string demod_name(DemodWindow w) { return w == DemodWindow::Hamming ? "hamming" : "rectangular"; }

DemodWindow parse_demod(const std::string& s) {
    if (s == "hamming") return DemodWindow::Hamming;
    if (s == "rectangular") return DemodWindow::Rectangular;
    throw InvalidInput("unknown demodulate window '" + s + "'");
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string file_safe(std::string name) {
    for (auto& ch : name)
        if (ch == '@') ch = '_';
    return name;
}

struct Fitted {
    nn::Model model;
    nn::TrainHistory history;
};

Fitted fit(const std::vector<FeatureMatrix>& train_set, std::size_t num_classes, const ExperimentConfig& cfg,
           std::uint64_t stream) {
    if (train_set.empty()) throw InvalidInput("empty training set");
    nn::TrainConfig tc = cfg.train;
    tc.seed = mix_seed(require_seed(cfg), stream);
    const auto& x = train_set.front().values;
    nn::Model model(nn::default_stack(num_classes), {x.rows(), x.cols(), 1}, mix_seed(tc.seed, 1));
    auto res = nn::train(std::move(model), train_set, tc);
    return {std::move(res.model), std::move(res.history)};
}

json history_json(const nn::TrainHistory& h) {
    json j;
    j["epochs_run"] = h.epochs.size();
    j["early_stopped"] = h.early_stopped;
    j["best_epoch"] = h.best_epoch;
    json losses = json::array();
    for (const auto& e : h.epochs) losses.push_back({e.train_loss, e.val_loss});
    j["train_val_loss"] = losses;
    return j;
}

json epoch_seconds(const nn::TrainHistory& h) {
    json a = json::array();
    for (const auto& e : h.epochs) a.push_back(e.seconds);
    return a;
}

// Relabels to the index of each sample's class in `classes`.
std::vector<FeatureMatrix> indexed(std::vector<FeatureMatrix> set, const std::vector<int>& classes) {
    for (auto& f : set) {
        const auto it = std::find(classes.begin(), classes.end(), f.meta.label);
        if (it == classes.end()) throw InvalidInput("sample label outside the experiment's classes");
        f.meta.label = static_cast<int>(it - classes.begin());
    }
    return set;
}

std::vector<int> labels_of(const std::vector<WaveformClass>& cs) {
    std::vector<int> out;
    for (auto c : cs) out.push_back(static_cast<int>(c));
    return out;
}

std::vector<FeatureMatrix> features_at(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx,
                                       FeatureKind kind, std::size_t rows, const ExperimentConfig& cfg) {
    std::vector<FeatureMatrix> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(feature_of(samples[i], kind, rows, cfg));
    return out;
}

std::vector<std::size_t> select(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx,
                                const auto& pred) {
    std::vector<std::size_t> out;
    for (auto i : idx)
        if (pred(samples[i].key)) out.push_back(i);
    return out;
}

// Noise records beyond the first per_class_per_snr exist only to balance
// H0 against H1.
bool in_base_set(const ExperimentConfig& cfg, const RecordKey& k) {
    return contains(cfg.classes, k.cls) && k.index < cfg.per_class_per_snr;
}

// Predicted class per example, mapped back to WaveformClass labels.
void log_predictions(ExperimentReport& rep, const std::string& name, const std::vector<Sample>& samples,
                     const std::vector<std::size_t>& idx, const std::vector<std::vector<double>>& probs,
                     const std::vector<int>& classes) {
    for (std::size_t n = 0; n < idx.size(); ++n) {
        const auto& key = samples[idx[n]].key;
        const int k = nn::argmax(probs[n]);
        rep.predictions.push_back({name, key.seed, static_cast<int>(key.cls), key.snr_db, classes[k], probs[n][k]});
    }
}

struct Bucket {
    std::vector<int> truth;
    std::vector<int> pred;
};

std::map<double, Bucket> by_snr(const ExperimentReport& r, const std::string& experiment,
                                const std::vector<int>& classes) {
    std::map<double, Bucket> out;
    for (const auto& p : r.predictions) {
        if (p.experiment != experiment) continue;
        const auto t = std::find(classes.begin(), classes.end(), p.label);
        const auto q = std::find(classes.begin(), classes.end(), p.predicted);
        if (t == classes.end() || q == classes.end())
            throw FormatError("prediction outside the classes of " + experiment);
        auto& b = out[p.snr_db];
        b.truth.push_back(static_cast<int>(t - classes.begin()));
        b.pred.push_back(static_cast<int>(q - classes.begin()));
    }
    return out;
}

const std::vector<int>& classes_of(const ExperimentReport& r, const std::string& experiment) {
    const auto it = r.experiments.find(experiment);
    if (it == r.experiments.end()) throw InvalidInput("report has no experiment '" + experiment + "'");
    return it->second;
}

json bucket_json(const Bucket& b, std::size_t k) {
    const auto cm = metrics::confusion(b.pred, b.truth, k);
    const auto cls = metrics::class_metrics(cm);
    json j;
    j["n"] = b.truth.size();
    j["accuracy"] = metrics::accuracy(b.pred, b.truth);
    j["precision"] = cls.macro.precision;
    j["recall"] = cls.macro.recall;
    j["f1"] = cls.macro.f1;
    json per = json::array();
    for (const auto& s : cls.per_class) per.push_back({s.precision, s.recall, s.f1});
    j["per_class_prf"] = per;
    json rows = json::array();
    for (std::size_t t = 0; t < k; ++t) {
        json row = json::array();
        for (std::size_t q = 0; q < k; ++q) row.push_back(cm(t, q));
        rows.push_back(row);
    }
    j["confusion"] = rows;
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw InvalidInput("cannot write " + path.string());
    os << text;
}

void write_curve(const fs::path& dir, const std::string& name, const std::map<double, double>& curve) {
    std::string s = "# x y\n";
    for (const auto& [x, y] : curve) s += fmt(x) + " " + fmt(y) + "\n";
    write_text(dir / (file_safe(name) + ".dat"), s);
}

double mean_of(const std::map<double, double>& m) {
    if (m.empty()) return 0.0;
    double s = 0.0;
    for (const auto& [x, y] : m) s += y;
    return s / static_cast<double>(m.size());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// One pass of train_step over `set` with a fresh model, in seconds.
double time_epoch(const std::vector<FeatureMatrix>& set, std::size_t num_classes, const ExperimentConfig& cfg) {
    nn::TrainConfig tc = cfg.train;
    tc.batch_size = cfg.timing_batch;
    const auto& x = set.front().values;
    nn::Model model(nn::default_stack(num_classes), {x.rows(), x.cols(), 1}, 1);
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < set.size(); i += tc.batch_size) {
        std::vector<const FeatureMatrix*> batch;
        for (std::size_t j = i; j < std::min(set.size(), i + tc.batch_size); ++j) batch.push_back(&set[j]);
        nn::train_step(model, batch, tc);
    }
    return seconds_since(t0);
}

} // namespace

std::string_view to_string(Mode m) {
    switch (m) {
    case Mode::Case1: return "case1";
    case Mode::Case2: return "case2";
    case Mode::FeatureSweep: return "feature_sweep";
    case Mode::CropSweep: return "crop_sweep";
    case Mode::SenseCompare: return "sense_compare";
    }
    return "?";
}

Mode parse_mode(std::string_view name) {
    std::string s(name);
    std::replace(s.begin(), s.end(), '-', '_');
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    for (auto m : {Mode::Case1, Mode::Case2, Mode::FeatureSweep, Mode::CropSweep, Mode::SenseCompare})
        if (s == to_string(m)) return m;
    if (s == "sweep_features") return Mode::FeatureSweep;
    if (s == "sweep_crop") return Mode::CropSweep;
    throw InvalidInput("unknown mode '" + std::string(name) + "'");
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.classes.empty()) throw InvalidInput("classes must not be empty");
    if (std::set<WaveformClass>(cfg.classes.begin(), cfg.classes.end()).size() != cfg.classes.size())
        throw InvalidInput("classes must be unique");
    if (cfg.snr_levels_db.empty()) throw InvalidInput("snr_levels_db must not be empty");
    for (double s : cfg.snr_levels_db)
        if (!std::isfinite(s)) throw InvalidInput("SNR levels must be finite");
    if (std::set<double>(cfg.snr_levels_db.begin(), cfg.snr_levels_db.end()).size() != cfg.snr_levels_db.size())
        throw InvalidInput("SNR levels must be unique");
    if (cfg.per_class_per_snr == 0) throw InvalidInput("per_class_per_snr must be positive");
    validate(cfg.fam, cfg.record_length);
    validate(cfg.channel);
    nn::validate(cfg.train);
    const std::size_t alpha_rows = cfg.fam.one_sided_alpha ? cfg.record_length / cfg.fam.l_hop / 2 + 1
                                                           : cfg.record_length / cfg.fam.l_hop;
    auto check_crop = [&](std::size_t rows) {
        if (rows == 0 || rows > alpha_rows) throw InvalidInput("crop rows out of range: " + std::to_string(rows));
    };
    check_crop(cfg.crop_rows);
    if (cfg.crop_cols == 0 || cfg.crop_cols > cfg.fam.n_prime) throw InvalidInput("crop_cols out of range");
    if (cfg.raw_window < 2 || cfg.raw_window > cfg.record_length) throw InvalidInput("raw_window out of range");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) throw InvalidInput("train_fraction must be in (0, 1)");
    if (cfg.timing_examples == 0 || cfg.timing_batch == 0) throw InvalidInput("timing sizes must be positive");
    for (double p : cfg.target_pfa)
        if (!(p > 0.0 && p < 1.0)) throw InvalidInput("target Pfa must be in (0, 1)");
    if (cfg.cfar_calibration_size < detect::kMinCalibrationSize)
        throw InvalidInput("cfar_calibration_size below " + std::to_string(detect::kMinCalibrationSize));

    const bool has_noise = contains(cfg.classes, WaveformClass::Noise);
    const auto sig = signal_classes(cfg);
    switch (cfg.mode) {
    case Mode::Case1:
    case Mode::CropSweep:
        if (!has_noise) throw InvalidInput("this mode needs the noise class");
        if (cfg.classes.size() < 2) throw InvalidInput("at least two classes are needed");
        break;
    case Mode::Case2:
        if (!has_noise) throw InvalidInput("CASE2 needs the noise class for its detector");
        if (sig.size() < 2) throw InvalidInput("CASE2 needs at least two signal classes");
        break;
    case Mode::FeatureSweep:
        if (sig.size() < 2) throw InvalidInput("the feature sweep needs at least two signal classes");
        if (cfg.sweep_features.empty()) throw InvalidInput("sweep_features must not be empty");
        break;
    case Mode::SenseCompare:
        if (!has_noise || !contains(cfg.classes, WaveformClass::Umts))
            throw InvalidInput("sense comparison needs the noise and umts classes");
        if (cfg.target_pfa.empty()) throw InvalidInput("target_pfa must not be empty");
        break;
    }
    if (cfg.mode == Mode::CropSweep) {
        if (cfg.sweep_crop_rows.empty()) throw InvalidInput("sweep_crop_rows must not be empty");
        for (auto r : cfg.sweep_crop_rows)
            if (r != 0) check_crop(r);
    }
}

json to_json(const ExperimentConfig& cfg) {
    json j;
    json cls = json::array();
    for (auto c : cfg.classes) cls.push_back(std::string(to_string(c)));
    j["mode"] = std::string(to_string(cfg.mode));
    j["seed"] = cfg.seed ? json(*cfg.seed) : json(nullptr);
    j["classes"] = cls;
    j["snr_levels_db"] = cfg.snr_levels_db;
    j["per_class_per_snr"] = cfg.per_class_per_snr;
    j["record_length"] = cfg.record_length;
    j["fam"] = {{"n_prime", cfg.fam.n_prime},
                {"l_hop", cfg.fam.l_hop},
                {"window", demod_name(cfg.fam.demod_window)},
                {"one_sided_alpha", cfg.fam.one_sided_alpha}};
    const auto& p = cfg.profile;
    j["profile"] = {{"gmsk_samples_per_symbol", p.gmsk_samples_per_symbol},
                    {"gmsk_bt", p.gmsk_bt},
                    {"dsss_spreading_factor", p.dsss_spreading_factor},
                    {"dsss_samples_per_chip", p.dsss_samples_per_chip},
                    {"dsss_code_seed", p.dsss_code_seed},
                    {"ofdm_subcarriers", p.ofdm_subcarriers},
                    {"ofdm_cp_len", p.ofdm_cp_len},
                    {"ofdm_qam_order", p.ofdm_qam_order},
                    {"ofdm_active_subcarriers", p.ofdm_active_subcarriers}};
    j["channel"] = {{"tap_delays_samples", cfg.channel.tap_delays_samples},
                    {"tap_power_profile_db", cfg.channel.tap_power_profile_db},
                    {"rayleigh", cfg.channel.rayleigh}};
    j["feature_kind"] = std::string(to_string(cfg.feature_kind));
    j["crop_rows"] = cfg.crop_rows;
    j["crop_cols"] = cfg.crop_cols;
    j["normalization"] = std::string(to_string(cfg.normalization));
    j["raw_window"] = cfg.raw_window;
    j["train_fraction"] = cfg.train_fraction;
    j["balance_h0"] = cfg.balance_h0;
    const auto& t = cfg.train;
    j["train"] = {{"learning_rate", t.learning_rate}, {"adam_beta1", t.adam_beta1},
                  {"adam_beta2", t.adam_beta2},       {"adam_eps", t.adam_eps},
                  {"batch_size", t.batch_size},       {"max_epochs", t.max_epochs},
                  {"early_stop_patience", t.early_stop_patience}, {"val_fraction", t.val_fraction}};
    json feats = json::array();
    for (auto k : cfg.sweep_features) feats.push_back(std::string(to_string(k)));
    j["sweep_features"] = feats;
    j["sweep_crop_rows"] = cfg.sweep_crop_rows;
    j["timing_examples"] = cfg.timing_examples;
    j["timing_batch"] = cfg.timing_batch;
    j["crop_sweep_train_full"] = cfg.crop_sweep_train_full;
    j["target_pfa"] = cfg.target_pfa;
    j["cfar_calibration_size"] = cfg.cfar_calibration_size;
    return j;
}

ExperimentConfig config_from_json(const json& j, ExperimentConfig cfg) {
    if (!j.is_object()) throw InvalidInput("configuration must be an object");
    auto check_keys = [](const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
        for (const auto& [key, value] : obj.items()) {
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
                throw InvalidInput("unknown configuration key '" + where + key + "'");
        }
    };
    try {
        check_keys(j,
                   {"mode", "seed", "classes", "snr_levels_db", "per_class_per_snr", "record_length", "fam",
                    "profile", "channel", "feature_kind", "crop_rows", "crop_cols", "normalization", "raw_window",
                    "train_fraction", "balance_h0", "train", "sweep_features", "sweep_crop_rows",
                    "timing_examples", "timing_batch", "crop_sweep_train_full", "target_pfa",
                    "cfar_calibration_size"},
                   "");
        if (j.contains("mode")) cfg.mode = parse_mode(j["mode"].get<std::string>());
        if (j.contains("seed")) {
            if (j["seed"].is_null()) cfg.seed.reset();
            else cfg.seed = count_value<std::uint64_t>(j, "seed", 0);
        }
        if (j.contains("classes")) {
            cfg.classes.clear();
            for (const auto& c : j["classes"]) cfg.classes.push_back(parse_waveform_class(c.get<std::string>()));
        }
        if (j.contains("snr_levels_db")) cfg.snr_levels_db = j["snr_levels_db"].get<std::vector<double>>();
        if (j.contains("per_class_per_snr")) cfg.per_class_per_snr = count_value(j, "per_class_per_snr", cfg.per_class_per_snr);
        if (j.contains("record_length")) cfg.record_length = count_value(j, "record_length", cfg.record_length);
        if (j.contains("fam")) {
            const auto& f = j["fam"];
            check_keys(f, {"n_prime", "l_hop", "window", "one_sided_alpha"}, "fam.");
            cfg.fam.n_prime = count_value(f, "n_prime", cfg.fam.n_prime);
            cfg.fam.l_hop = count_value(f, "l_hop", cfg.fam.l_hop);
            if (f.contains("window")) cfg.fam.demod_window = parse_demod(f["window"].get<std::string>());
            cfg.fam.one_sided_alpha = f.value("one_sided_alpha", cfg.fam.one_sided_alpha);
        }
        if (j.contains("profile")) {
            const auto& f = j["profile"];
            auto& p = cfg.profile;
            check_keys(f,
                       {"gmsk_samples_per_symbol", "gmsk_bt", "dsss_spreading_factor", "dsss_samples_per_chip",
                        "dsss_code_seed", "ofdm_subcarriers", "ofdm_cp_len", "ofdm_qam_order",
                        "ofdm_active_subcarriers"},
                       "profile.");
            p.gmsk_samples_per_symbol = f.value("gmsk_samples_per_symbol", p.gmsk_samples_per_symbol);
            p.gmsk_bt = f.value("gmsk_bt", p.gmsk_bt);
            p.dsss_spreading_factor = f.value("dsss_spreading_factor", p.dsss_spreading_factor);
            p.dsss_samples_per_chip = f.value("dsss_samples_per_chip", p.dsss_samples_per_chip);
            p.dsss_code_seed = count_value(f, "dsss_code_seed", p.dsss_code_seed);
            p.ofdm_subcarriers = f.value("ofdm_subcarriers", p.ofdm_subcarriers);
            p.ofdm_cp_len = f.value("ofdm_cp_len", p.ofdm_cp_len);
            p.ofdm_qam_order = f.value("ofdm_qam_order", p.ofdm_qam_order);
            p.ofdm_active_subcarriers = f.value("ofdm_active_subcarriers", p.ofdm_active_subcarriers);
        }
        if (j.contains("channel")) {
            const auto& f = j["channel"];
            check_keys(f, {"tap_delays_samples", "tap_power_profile_db", "rayleigh"}, "channel.");
            if (f.contains("tap_delays_samples"))
                cfg.channel.tap_delays_samples = f["tap_delays_samples"].get<std::vector<int>>();
            if (f.contains("tap_power_profile_db"))
                cfg.channel.tap_power_profile_db = f["tap_power_profile_db"].get<std::vector<double>>();
            cfg.channel.rayleigh = f.value("rayleigh", cfg.channel.rayleigh);
        }
        if (j.contains("feature_kind")) cfg.feature_kind = parse_feature_kind(j["feature_kind"].get<std::string>());
        cfg.crop_rows = count_value(j, "crop_rows", cfg.crop_rows);
        cfg.crop_cols = count_value(j, "crop_cols", cfg.crop_cols);
        if (j.contains("normalization"))
            cfg.normalization = parse_normalization(j["normalization"].get<std::string>());
        cfg.raw_window = count_value(j, "raw_window", cfg.raw_window);
        cfg.train_fraction = j.value("train_fraction", cfg.train_fraction);
        cfg.balance_h0 = j.value("balance_h0", cfg.balance_h0);
        if (j.contains("train")) {
            const auto& f = j["train"];
            auto& t = cfg.train;
            check_keys(f,
                       {"learning_rate", "adam_beta1", "adam_beta2", "adam_eps", "batch_size", "max_epochs",
                        "early_stop_patience", "val_fraction"},
                       "train.");
            t.learning_rate = f.value("learning_rate", t.learning_rate);
            t.adam_beta1 = f.value("adam_beta1", t.adam_beta1);
            t.adam_beta2 = f.value("adam_beta2", t.adam_beta2);
            t.adam_eps = f.value("adam_eps", t.adam_eps);
            t.batch_size = count_value(f, "batch_size", t.batch_size);
            t.max_epochs = count_value(f, "max_epochs", t.max_epochs);
            t.early_stop_patience = count_value(f, "early_stop_patience", t.early_stop_patience);
            t.val_fraction = f.value("val_fraction", t.val_fraction);
        }
        if (j.contains("sweep_features")) {
            cfg.sweep_features.clear();
            for (const auto& k : j["sweep_features"]) cfg.sweep_features.push_back(parse_feature_kind(k.get<std::string>()));
        }
        if (j.contains("sweep_crop_rows")) {
            cfg.sweep_crop_rows.clear();
            for (const auto& r : j["sweep_crop_rows"]) {
                if (r.is_string() && r.get<std::string>() == "full") cfg.sweep_crop_rows.push_back(0);
                else cfg.sweep_crop_rows.push_back(as_count<std::size_t>(r, "sweep_crop_rows"));
            }
        }
        cfg.timing_examples = count_value(j, "timing_examples", cfg.timing_examples);
        cfg.timing_batch = count_value(j, "timing_batch", cfg.timing_batch);
        cfg.crop_sweep_train_full = j.value("crop_sweep_train_full", cfg.crop_sweep_train_full);
        if (j.contains("target_pfa")) cfg.target_pfa = j["target_pfa"].get<std::vector<double>>();
        cfg.cfar_calibration_size = count_value(j, "cfar_calibration_size", cfg.cfar_calibration_size);
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("bad configuration value: ") + e.what());
    }
    return cfg;
}

ExperimentConfig load_config(const fs::path& path, ExperimentConfig base) {
    if (!fs::exists(path)) throw FileNotFound(path.string());
    std::ifstream is(path);
    json j;
    try {
        j = json::parse(is, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw InvalidInput("cannot parse " + path.string() + ": " + e.what());
    }
    return config_from_json(j, std::move(base));
}

std::uint64_t record_seed(std::uint64_t base, WaveformClass cls, std::size_t snr_index, std::size_t k) {
    std::uint64_t s = mix_seed(base, kStreamRecords);
    s = mix_seed(s, static_cast<std::uint64_t>(cls));
    s = mix_seed(s, snr_index);
    return mix_seed(s, k);
}

std::vector<RecordKey> plan_records(const ExperimentConfig& cfg, std::size_t noise_multiplier) {
    const auto base = require_seed(cfg);
    std::vector<RecordKey> keys;
    for (auto cls : cfg.classes) {
        const std::size_t n = cfg.per_class_per_snr * (cls == WaveformClass::Noise ? noise_multiplier : 1);
        for (std::size_t s = 0; s < cfg.snr_levels_db.size(); ++s)
            for (std::size_t k = 0; k < n; ++k)
                keys.push_back({cls, cfg.snr_levels_db[s], record_seed(base, cls, s, k), k});
    }
    return keys;
}

FeatureNeeds needs_for(const ExperimentConfig& cfg) {
    FeatureNeeds n;
    const std::size_t all_rows = cfg.fam.one_sided_alpha ? cfg.record_length / cfg.fam.l_hop / 2 + 1
                                                         : cfg.record_length / cfg.fam.l_hop;
    auto want_kind = [&](FeatureKind k, std::size_t rows) {
        if (k == FeatureKind::SCF) n.crop_rows = all_rows;
        else if (k == FeatureKind::SCF_CROP) n.crop_rows = std::max(n.crop_rows, rows);
        else n.raw = true;
    };
    switch (cfg.mode) {
    case Mode::Case1:
    case Mode::Case2: want_kind(cfg.feature_kind, cfg.crop_rows); break;
    case Mode::FeatureSweep:
        for (auto k : cfg.sweep_features) want_kind(k, cfg.crop_rows);
        break;
    case Mode::CropSweep:
        for (auto r : cfg.sweep_crop_rows)
            if (r != 0) n.crop_rows = std::max(n.crop_rows, r);
        break;
    case Mode::SenseCompare:
        want_kind(cfg.feature_kind, cfg.crop_rows);
        n.cfar = true;
        break;
    }
    return n;
}

waveform::Record regenerate(const RecordKey& key, const ExperimentConfig& cfg) {
    return waveform::generate_record(key.cls, key.snr_db, cfg.record_length, key.seed, cfg.profile, cfg.channel);
}

Sample make_sample(const RecordKey& key, const ComplexSignal& record, const ExperimentConfig& cfg,
                   const FeatureNeeds& needs) {
    Sample s;
    s.key = key;
    if (needs.raw) {
        s.window.sample_rate_hz = record.sample_rate_hz;
        s.window.samples.assign(record.samples.begin(),
                                record.samples.begin() + static_cast<std::ptrdiff_t>(cfg.raw_window));
    }
    if (needs.crop_rows > 0 || needs.cfar) {
        auto m = scf::compute_scf(record, cfg.fam);
        if (needs.cfar) {
            const auto alphas = detect::dsss_alpha_candidates(cfg.profile.dsss_spreading_factor,
                                                              cfg.profile.dsss_samples_per_chip);
            s.cfar_statistic = detect::cfd_statistic(m, alphas);
        }
        if (needs.crop_rows > 0) {
            const std::size_t r0 = features::crop_row_start(m, needs.crop_rows);
            s.crop.values = Matrix<double>(needs.crop_rows, m.cols());
            for (std::size_t r = 0; r < needs.crop_rows; ++r)
                for (std::size_t c = 0; c < m.cols(); ++c) s.crop.values(r, c) = m.values(r0 + r, c);
            s.crop.alpha_axis.assign(m.alpha_axis.begin() + static_cast<std::ptrdiff_t>(r0),
                                     m.alpha_axis.begin() + static_cast<std::ptrdiff_t>(r0 + needs.crop_rows));
            s.crop.freq_axis = m.freq_axis;
        }
    }
    return s;
}

std::vector<Sample> synthesize_samples(const std::vector<RecordKey>& keys, const ExperimentConfig& cfg,
                                       const FeatureNeeds& needs) {
    std::vector<Sample> out;
    out.reserve(keys.size());
    for (const auto& k : keys) out.push_back(make_sample(k, regenerate(k, cfg).signal, cfg, needs));
    return out;
}

std::vector<Sample> load_samples(const dataio::DatasetManifest& manifest, const ExperimentConfig& cfg,
                                 const FeatureNeeds& needs) {
    // Records generated from cfg.seed get back their generation index, so a
    // dataset on disk splits exactly like the same records built in memory.
    std::map<std::pair<int, double>, std::vector<const dataio::ManifestEntry*>> strata;
    for (const auto& e : manifest.entries()) {
        if (e.kind != "iq") continue;
        if (!contains(cfg.classes, static_cast<WaveformClass>(e.class_label))) continue;
        if (std::find(cfg.snr_levels_db.begin(), cfg.snr_levels_db.end(), e.snr_db) == cfg.snr_levels_db.end())
            continue;
        strata[{e.class_label, e.snr_db}].push_back(&e);
    }
    std::vector<Sample> out;
    for (const auto& [key, entries] : strata) {
        const auto cls = static_cast<WaveformClass>(key.first);
        const auto snr_idx = static_cast<std::size_t>(
            std::find(cfg.snr_levels_db.begin(), cfg.snr_levels_db.end(), key.second) - cfg.snr_levels_db.begin());
        std::map<std::uint64_t, std::size_t> known;
        if (cfg.seed)
            for (std::size_t k = 0; k < 4 * entries.size(); ++k) known[record_seed(*cfg.seed, cls, snr_idx, k)] = k;
        std::vector<std::pair<std::size_t, const dataio::ManifestEntry*>> ordered;
        std::size_t next = 4 * entries.size();
        for (const auto* e : entries) {
            const auto it = known.find(e->seed);
            ordered.emplace_back(it != known.end() ? it->second : next++, e);
        }
        std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        std::size_t index = 0;
        for (const auto& [k, e] : ordered) {
            std::size_t length = 0;
            try {
                length = std::stoull(e->length_or_shape);
            } catch (const std::exception&) {
                throw FormatError("bad record length '" + e->length_or_shape + "' for " + e->file_path);
            }
            if (length != cfg.record_length)
                throw FormatError(e->file_path + " holds " + std::to_string(length) + " samples, expected " +
                                  std::to_string(cfg.record_length));
            const auto sig = dataio::read_iq(manifest.resolve(*e), length);
            out.push_back(make_sample({cls, e->snr_db, e->seed, index++}, sig, cfg, needs));
        }
    }
    if (out.empty()) throw FormatError("dataset has no I/Q records matching the configuration");
    // Same order as plan_records: classes as configured, then SNR, then index.
    std::stable_sort(out.begin(), out.end(), [&](const Sample& a, const Sample& b) {
        const auto ca = std::find(cfg.classes.begin(), cfg.classes.end(), a.key.cls);
        const auto cb = std::find(cfg.classes.begin(), cfg.classes.end(), b.key.cls);
        if (ca != cb) return ca < cb;
        const auto sa = std::find(cfg.snr_levels_db.begin(), cfg.snr_levels_db.end(), a.key.snr_db);
        const auto sb = std::find(cfg.snr_levels_db.begin(), cfg.snr_levels_db.end(), b.key.snr_db);
        if (sa != sb) return sa < sb;
        return a.key.index < b.key.index;
    });
    return out;
}

FeatureMatrix feature_of(const Sample& s, FeatureKind kind, std::size_t rows, const ExperimentConfig& cfg) {
    FeatureMatrix f;
    switch (kind) {
    case FeatureKind::IQ: f = features::iq_features(s.window); break;
    case FeatureKind::AP: f = features::ap_features(s.window); break;
    case FeatureKind::FFT: f = features::fft_features(s.window); break;
    case FeatureKind::SCF:
        if (s.crop.rows() == 0) throw InvalidInput("sample holds no SCF rows");
        f = features::scf_features(s.crop);
        break;
    case FeatureKind::SCF_CROP:
        if (rows == 0) rows = cfg.crop_rows;
        if (rows > s.crop.rows()) throw InvalidInput("sample holds fewer SCF rows than the crop needs");
        f = features::crop_center(s.crop, rows, cfg.crop_cols);
        f.kind = FeatureKind::SCF_CROP;
        break;
    }
    if (kind == FeatureKind::IQ || kind == FeatureKind::AP || kind == FeatureKind::FFT) {
        if (s.window.size() == 0) throw InvalidInput("sample holds no raw window");
    }
    f = features::normalize_feature(std::move(f), cfg.normalization);
    f.meta = {static_cast<int>(s.key.cls), s.key.snr_db, s.key.seed};
    return f;
}

SampleSplit split_samples(const std::vector<Sample>& samples, double train_fraction, std::uint64_t seed,
                          std::size_t block_size) {
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw InvalidInput("train fraction must be in [0, 1]");
    if (block_size == 0) throw InvalidInput("block size must be positive");
    std::map<std::tuple<int, double, std::size_t>, std::vector<std::size_t>> blocks;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& k = samples[i].key;
        blocks[{static_cast<int>(k.cls), k.snr_db, k.index / block_size}].push_back(i);
    }
    std::vector<bool> to_train(samples.size(), false);
    for (auto& [key, idx] : blocks) {
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return samples[a].key.index < samples[b].key.index; });
        std::uint64_t s = mix_seed(seed, static_cast<std::uint64_t>(std::get<0>(key)));
        s = mix_seed(s, std::bit_cast<std::uint64_t>(std::get<1>(key)));
        Rng rng(mix_seed(s, std::get<2>(key)));
        for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
        const auto n = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(idx.size())));
        for (std::size_t k = 0; k < n; ++k) to_train[idx[k]] = true;
    }
    SampleSplit out;
    for (std::size_t i = 0; i < samples.size(); ++i) (to_train[i] ? out.train : out.test).push_back(i);
    return out;
}

ClassifierRun train_classifier(const ExperimentConfig& cfg, const std::vector<Sample>& samples) {
    ExperimentConfig c = cfg;
    c.mode = Mode::Case1;
    validate(c);
    const auto split = split_samples(samples, c.train_fraction, mix_seed(require_seed(c), kStreamSplit),
                                     c.per_class_per_snr);
    const auto tr = select(samples, split.train, [&](const RecordKey& k) { return in_base_set(c, k); });
    const auto classes = labels_of(c.classes);
    auto fitted = fit(indexed(features_at(samples, tr, c.feature_kind, 0, c), classes), classes.size(), c,
                      kStreamCase1);
    return {std::move(fitted.model), std::move(fitted.history)};
}

ExperimentReport evaluate_classifier(const ExperimentConfig& cfg, const nn::Model& model,
                                     const std::vector<Sample>& samples) {
    ExperimentConfig c = cfg;
    c.mode = Mode::Case1;
    validate(c);
    const auto split = split_samples(samples, c.train_fraction, mix_seed(require_seed(c), kStreamSplit),
                                     c.per_class_per_snr);
    const auto te = select(samples, split.test, [&](const RecordKey& k) { return in_base_set(c, k); });
    const auto classes = labels_of(c.classes);
    ExperimentReport rep;
    rep.mode = Mode::Case1;
    rep.config = to_json(c);
    rep.experiments["case1"] = classes;
    const auto probs = nn::predict_batch(model, features_at(samples, te, c.feature_kind, 0, c));
    if (!probs.empty() && probs.front().size() != classes.size())
        throw ShapeError("model has " + std::to_string(probs.front().size()) + " outputs for " +
                         std::to_string(classes.size()) + " classes");
    log_predictions(rep, "case1", samples, te, probs, classes);
    return rep;
}

ExperimentReport run_case1(const ExperimentConfig& cfg, const std::vector<Sample>& samples) {
    auto run = train_classifier(cfg, samples);
    auto rep = evaluate_classifier(cfg, run.model, samples);
    rep.extras["case1"] = history_json(run.history);
    rep.timing["case1_epoch_seconds"] = epoch_seconds(run.history);
    return rep;
}

ExperimentReport run_case2(const ExperimentConfig& cfg, const std::vector<Sample>& samples) {
    ExperimentConfig c = cfg;
    c.mode = Mode::Case2;
    validate(c);
    const auto seed = require_seed(c);
    const auto sig = signal_classes(c);
    const std::size_t h0_count = c.per_class_per_snr * (c.balance_h0 ? sig.size() : 1);
    auto member = [&](const RecordKey& k) {
        if (k.cls == WaveformClass::Noise) return k.index < h0_count;
        return in_base_set(c, k);
    };
    const auto split = split_samples(samples, c.train_fraction, mix_seed(seed, kStreamSplit), c.per_class_per_snr);
    const auto tr = select(samples, split.train, member);
    const auto te = select(samples, split.test, member);
    std::size_t h0_test = 0;
    for (auto i : te) h0_test += samples[i].key.cls == WaveformClass::Noise;
    if (h0_test == 0 || h0_test == te.size()) throw InvalidInput("CASE2 needs H0 and H1 examples in the test split");

    ExperimentReport rep;
    rep.mode = Mode::Case2;
    rep.config = to_json(c);
    const std::vector<int> binary{0, 1};
    const auto sig_labels = labels_of(sig);
    auto all_labels = labels_of({WaveformClass::Noise});
    all_labels.insert(all_labels.end(), sig_labels.begin(), sig_labels.end());
    rep.experiments["case2.sense"] = binary;
    rep.experiments["case2.classify"] = sig_labels;
    rep.experiments["case2.chain"] = all_labels;

    // Stage 1: noise is 0, every signal class is 1.
    auto det_train = features_at(samples, tr, c.feature_kind, 0, c);
    for (auto& f : det_train) f.meta.label = f.meta.label == 0 ? 0 : 1;
    auto detector = fit(det_train, 2, c, kStreamDetector);
    det_train.clear();

    // Stage 2 never sees H0 examples.
    const auto tr_h1 = select(samples, tr, [](const RecordKey& k) { return k.cls != WaveformClass::Noise; });
    auto classifier = fit(indexed(features_at(samples, tr_h1, c.feature_kind, 0, c), sig_labels), sig.size(), c,
                          kStreamClassifier);

    const auto test_set = features_at(samples, te, c.feature_kind, 0, c);
    const auto p_det = nn::predict_batch(detector.model, test_set);
    const auto p_cls = nn::predict_batch(classifier.model, test_set);
    for (std::size_t n = 0; n < te.size(); ++n) {
        const auto& key = samples[te[n]].key;
        const int truth = static_cast<int>(key.cls);
        const auto d = detect::decide_from_probability(p_det[n][1]);
        rep.predictions.push_back({"case2.sense", key.seed, truth == 0 ? 0 : 1, key.snr_db, d.occupied ? 1 : 0,
                                   p_det[n][1]});
        const int k = nn::argmax(p_cls[n]);
        if (truth != 0)
            rep.predictions.push_back({"case2.classify", key.seed, truth, key.snr_db, sig_labels[k], p_cls[n][k]});
        rep.predictions.push_back({"case2.chain", key.seed, truth, key.snr_db, d.occupied ? sig_labels[k] : 0,
                                   d.occupied ? p_cls[n][k] : 1.0 - p_det[n][1]});
    }
    rep.extras["case2.detector"] = history_json(detector.history);
    rep.extras["case2.classifier"] = history_json(classifier.history);
    rep.timing["detector_epoch_seconds"] = epoch_seconds(detector.history);
    rep.timing["classifier_epoch_seconds"] = epoch_seconds(classifier.history);
    return rep;
}

ExperimentReport run_feature_sweep(const ExperimentConfig& cfg, const std::vector<Sample>& samples) {
    ExperimentConfig c = cfg;
    c.mode = Mode::FeatureSweep;
    validate(c);
    const auto seed = require_seed(c);
    const auto sig = signal_classes(c);
    const auto labels = labels_of(sig);
    auto member = [&](const RecordKey& k) { return k.cls != WaveformClass::Noise && in_base_set(c, k); };
    const auto split = split_samples(samples, c.train_fraction, mix_seed(seed, kStreamSplit), c.per_class_per_snr);
    const auto tr = select(samples, split.train, member);
    const auto te = select(samples, split.test, member);

    ExperimentReport rep;
    rep.mode = Mode::FeatureSweep;
    rep.config = to_json(c);
    for (std::size_t i = 0; i < c.sweep_features.size(); ++i) {
        const auto kind = c.sweep_features[i];
        const std::string name = "features." + std::string(to_string(kind));
        rep.experiments[name] = labels;
        auto fitted = fit(indexed(features_at(samples, tr, kind, 0, c), labels), labels.size(), c,
                          mix_seed(kStreamFeatures, static_cast<std::uint64_t>(kind)));
        const auto probs = nn::predict_batch(fitted.model, features_at(samples, te, kind, 0, c));
        log_predictions(rep, name, samples, te, probs, labels);
        rep.extras[name] = history_json(fitted.history);
        rep.timing[name + "_epoch_seconds"] = epoch_seconds(fitted.history);
    }
    return rep;
}

ExperimentReport run_crop_sweep(const ExperimentConfig& cfg, const std::vector<Sample>& samples) {
    ExperimentConfig c = cfg;
    c.mode = Mode::CropSweep;
    validate(c);
    const auto seed = require_seed(c);
    const auto labels = labels_of(c.classes);
    auto base = [&](const RecordKey& k) { return in_base_set(c, k); };
    const auto split = split_samples(samples, c.train_fraction, mix_seed(seed, kStreamSplit), c.per_class_per_snr);
    const auto tr = select(samples, split.train, base);
    const auto te = select(samples, split.test, base);

    // Timing subset: the first training examples, identical for every size.
    const std::vector<std::size_t> timing_idx(tr.begin(),
                                              tr.begin() + static_cast<std::ptrdiff_t>(std::min(tr.size(), c.timing_examples)));
    ExperimentReport rep;
    rep.mode = Mode::CropSweep;
    rep.config = to_json(c);
    json timing = json::object();
    for (auto rows : c.sweep_crop_rows) {
        const std::string tag = rows == 0 ? "full" : std::to_string(rows);
        const std::string name = "crop." + tag;
        std::vector<FeatureMatrix> timing_set;
        if (rows == 0) {
            for (auto i : timing_idx) {
                auto f = features::normalize_feature(
                    features::scf_features(scf::compute_scf(regenerate(samples[i].key, c).signal, c.fam)),
                    c.normalization);
                f.meta = {static_cast<int>(std::find(labels.begin(), labels.end(),
                                                     static_cast<int>(samples[i].key.cls)) - labels.begin()),
                          samples[i].key.snr_db, samples[i].key.seed};
                timing_set.push_back(std::move(f));
            }
        } else {
            timing_set = indexed(features_at(samples, timing_idx, FeatureKind::SCF_CROP, rows, c), labels);
        }
        timing[tag] = time_epoch(timing_set, labels.size(), c);
        timing_set.clear();
        if (rows == 0 && !c.crop_sweep_train_full) continue;

        rep.experiments[name] = labels;
        std::vector<FeatureMatrix> train_set, test_set;
        if (rows == 0) {
            ExperimentConfig full = c;
            full.feature_kind = FeatureKind::SCF;
            auto make = [&](const std::vector<std::size_t>& idx) {
                std::vector<FeatureMatrix> out;
                for (auto i : idx) {
                    auto f = features::normalize_feature(
                        features::scf_features(scf::compute_scf(regenerate(samples[i].key, c).signal, c.fam)),
                        c.normalization);
                    f.meta = {static_cast<int>(samples[i].key.cls), samples[i].key.snr_db, samples[i].key.seed};
                    out.push_back(std::move(f));
                }
                return out;
            };
            train_set = make(tr);
            test_set = make(te);
        } else {
            train_set = features_at(samples, tr, FeatureKind::SCF_CROP, rows, c);
            test_set = features_at(samples, te, FeatureKind::SCF_CROP, rows, c);
        }
        auto fitted = fit(indexed(std::move(train_set), labels), labels.size(), c, mix_seed(kStreamCrop, rows));
        const auto probs = nn::predict_batch(fitted.model, test_set);
        log_predictions(rep, name, samples, te, probs, labels);
        rep.extras[name] = history_json(fitted.history);
        rep.timing[name + "_epoch_seconds"] = epoch_seconds(fitted.history);
    }
    rep.timing["timing_epoch_seconds"] = timing;
    rep.timing["timing_examples"] = timing_idx.size();
    return rep;
}

ExperimentReport run_sense_compare(const ExperimentConfig& cfg, const std::vector<Sample>& samples) {
    ExperimentConfig c = cfg;
    c.mode = Mode::SenseCompare;
    validate(c);
    const auto seed = require_seed(c);
    auto member = [&](const RecordKey& k) {
        return (k.cls == WaveformClass::Noise || k.cls == WaveformClass::Umts) && in_base_set(c, k);
    };
    const auto split = split_samples(samples, c.train_fraction, mix_seed(seed, kStreamSplit), c.per_class_per_snr);
    const auto tr = select(samples, split.train, member);
    const auto te = select(samples, split.test, member);

    ExperimentReport rep;
    rep.mode = Mode::SenseCompare;
    rep.config = to_json(c);
    const std::vector<int> binary{0, 1};

    auto train_set = features_at(samples, tr, c.feature_kind, 0, c);
    for (auto& f : train_set) f.meta.label = f.meta.label == 0 ? 0 : 1;
    auto detector = fit(train_set, 2, c, kStreamSense);
    train_set.clear();
    const auto probs = nn::predict_batch(detector.model, features_at(samples, te, c.feature_kind, 0, c));
    rep.experiments["sense.cnn"] = binary;
    for (std::size_t n = 0; n < te.size(); ++n) {
        const auto& key = samples[te[n]].key;
        const auto d = detect::decide_from_probability(probs[n][1]);
        rep.predictions.push_back({"sense.cnn", key.seed, key.cls == WaveformClass::Noise ? 0 : 1, key.snr_db,
                                   d.occupied ? 1 : 0, probs[n][1]});
    }
    rep.extras["sense.cnn"] = history_json(detector.history);
    rep.timing["sense_cnn_epoch_seconds"] = epoch_seconds(detector.history);

    // Fresh noise-only trials: one set fixes the thresholds, the other audits
    // the realized false-alarm rate.
    const auto alphas =
        detect::dsss_alpha_candidates(c.profile.dsss_spreading_factor, c.profile.dsss_samples_per_chip);
    auto noise_statistics = [&](std::uint64_t stream) {
        std::vector<std::pair<std::uint64_t, double>> out;
        for (std::size_t i = 0; i < c.cfar_calibration_size; ++i) {
            const auto s = mix_seed(mix_seed(seed, stream), i);
            const auto rec = waveform::generate_record(WaveformClass::Noise, 0.0, c.record_length, s, c.profile,
                                                       c.channel);
            out.emplace_back(s, detect::cfd_statistic(scf::compute_scf(rec.signal, c.fam), alphas));
        }
        return out;
    };
    const auto calib = noise_statistics(kStreamCalibration);
    const auto audit = noise_statistics(kStreamAudit);
    std::vector<double> calib_stats;
    for (const auto& [s, v] : calib) calib_stats.push_back(v);

    json thresholds = json::object();
    for (double pfa : c.target_pfa) {
        detect::CfarConfig cc;
        cc.alpha_candidates = alphas;
        cc.target_pfa = pfa;
        cc.calibration_size = c.cfar_calibration_size;
        cc.seed = mix_seed(seed, kStreamCalibration);
        const double thr = detect::calibrate_threshold_from_statistics(calib_stats, cc);
        char tag[32];
        std::snprintf(tag, sizeof tag, "%g", pfa);
        thresholds[tag] = thr;
        const std::string name = std::string("sense.cfar@") + tag;
        const std::string audit_name = std::string("sense.cfar_audit@") + tag;
        rep.experiments[name] = binary;
        rep.experiments[audit_name] = binary;
        for (auto i : te) {
            const auto& key = samples[i].key;
            rep.predictions.push_back({name, key.seed, key.cls == WaveformClass::Noise ? 0 : 1, key.snr_db,
                                       samples[i].cfar_statistic > thr ? 1 : 0, samples[i].cfar_statistic});
        }
        for (const auto& [s, v] : audit) rep.predictions.push_back({audit_name, s, 0, 0.0, v > thr ? 1 : 0, v});
    }
    rep.extras["cfar_thresholds"] = thresholds;
    rep.extras["cfar_calibration_size"] = c.cfar_calibration_size;
    rep.extras["cfar_alpha_candidates"] = alphas;
    return rep;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const std::vector<Sample>& samples) {
    switch (cfg.mode) {
    case Mode::Case1: return run_case1(cfg, samples);
    case Mode::Case2: return run_case2(cfg, samples);
    case Mode::FeatureSweep: return run_feature_sweep(cfg, samples);
    case Mode::CropSweep: return run_crop_sweep(cfg, samples);
    case Mode::SenseCompare: return run_sense_compare(cfg, samples);
    }
    throw InvalidInput("unknown mode");
}

std::vector<Sample> synthesize_for(const ExperimentConfig& cfg) {
    validate(cfg);
    require_seed(cfg);
    const std::size_t mult = cfg.mode == Mode::Case2 && cfg.balance_h0 ? signal_classes(cfg).size() : 1;
    return synthesize_samples(plan_records(cfg, std::max<std::size_t>(mult, 1)), cfg, needs_for(cfg));
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) { return run_experiment(cfg, synthesize_for(cfg)); }

std::map<double, double> accuracy_curve(const ExperimentReport& r, const std::string& experiment) {
    std::map<double, double> out;
    for (const auto& [snr, b] : by_snr(r, experiment, classes_of(r, experiment)))
        out[snr] = metrics::accuracy(b.pred, b.truth);
    return out;
}

std::map<double, double> macro_f1_curve(const ExperimentReport& r, const std::string& experiment) {
    const auto& classes = classes_of(r, experiment);
    std::map<double, double> out;
    for (const auto& [snr, b] : by_snr(r, experiment, classes))
        out[snr] = metrics::class_metrics(metrics::confusion(b.pred, b.truth, classes.size())).macro.f1;
    return out;
}

std::map<double, double> detection_curve(const ExperimentReport& r, const std::string& experiment) {
    classes_of(r, experiment);
    std::map<double, std::pair<std::size_t, std::size_t>> counts;
    for (const auto& p : r.predictions) {
        if (p.experiment != experiment || p.label == 0) continue;
        auto& c = counts[p.snr_db];
        ++c.second;
        c.first += p.predicted != 0;
    }
    std::map<double, double> out;
    for (const auto& [snr, c] : counts) out[snr] = static_cast<double>(c.first) / static_cast<double>(c.second);
    return out;
}

double false_alarm_rate(const ExperimentReport& r, const std::string& experiment) {
    classes_of(r, experiment);
    std::size_t n = 0, fa = 0;
    for (const auto& p : r.predictions) {
        if (p.experiment != experiment || p.label != 0) continue;
        ++n;
        fa += p.predicted != 0;
    }
    if (n == 0) throw InvalidInput("no noise-only examples in " + experiment);
    return static_cast<double>(fa) / static_cast<double>(n);
}

std::map<double, Case2Point> case2_curve(const ExperimentReport& r) {
    const auto sense = by_snr(r, "case2.sense", classes_of(r, "case2.sense"));
    const auto cls = by_snr(r, "case2.classify", classes_of(r, "case2.classify"));
    const auto chain = accuracy_curve(r, "case2.chain");
    std::map<double, Case2Point> out;
    for (const auto& [snr, s] : sense) {
        const auto c = cls.find(snr);
        if (c == cls.end()) continue;
        const auto a = metrics::case2_accuracies(s.pred, s.truth, c->second.pred, c->second.truth);
        out[snr] = {a.sensing, a.classification, a.overall, chain.at(snr)};
    }
    return out;
}

json summarize(const ExperimentReport& r) {
    json out;
    for (const auto& [name, classes] : r.experiments) {
        json e;
        e["classes"] = classes;
        Bucket all;
        json per = json::object();
        for (const auto& [snr, b] : by_snr(r, name, classes)) {
            per[fmt(snr)] = bucket_json(b, classes.size());
            all.truth.insert(all.truth.end(), b.truth.begin(), b.truth.end());
            all.pred.insert(all.pred.end(), b.pred.begin(), b.pred.end());
        }
        e["overall"] = bucket_json(all, classes.size());
        e["per_snr"] = per;
        if (classes == std::vector<int>{0, 1}) {
            json pd = json::object();
            for (const auto& [snr, v] : detection_curve(r, name)) pd[fmt(snr)] = v;
            e["detection_probability"] = pd;
            bool has_h0 = std::any_of(r.predictions.begin(), r.predictions.end(),
                                      [&](const Prediction& p) { return p.experiment == name && p.label == 0; });
            e["false_alarm_rate"] = has_h0 ? json(false_alarm_rate(r, name)) : json(nullptr);
        }
        out[name] = e;
    }
    if (r.mode == Mode::Case2) {
        json c = json::object();
        std::map<double, double> overall;
        for (const auto& [snr, p] : case2_curve(r)) {
            c[fmt(snr)] = {{"sensing", p.sensing},
                           {"classification", p.classification},
                           {"overall", p.overall},
                           {"chain", p.chain},
                           {"chain_minus_product", p.chain - p.overall}};
            overall[snr] = p.overall;
        }
        out["case2"] = {{"per_snr", c}, {"mean_overall", mean_of(overall)}};
    }
    if (r.mode == Mode::Case1) out["case1_mean_accuracy"] = mean_of(accuracy_curve(r, "case1"));
    return out;
}

void write_report(const ExperimentReport& r, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    json j;
    j["mode"] = std::string(to_string(r.mode));
    j["config"] = r.config;
    json ex = json::object();
    for (const auto& [name, classes] : r.experiments) ex[name] = classes;
    j["experiments"] = ex;
    j["extras"] = r.extras;
    j["results"] = summarize(r);
    write_text(out_dir / "report.json", j.dump(2) + "\n");
    write_text(out_dir / "timing.json", r.timing.dump(2) + "\n");

    std::string csv = "experiment,seed,label,snr_db,predicted,score\n";
    for (const auto& p : r.predictions)
        csv += p.experiment + "," + std::to_string(p.seed) + "," + std::to_string(p.label) + "," + fmt(p.snr_db) +
               "," + std::to_string(p.predicted) + "," + fmt(p.score) + "\n";
    write_text(out_dir / "predictions.csv", csv);

    for (const auto& [name, classes] : r.experiments) {
        std::string m = "snr_db,n,accuracy,precision,recall,f1\n";
        std::string conf = "snr_db,truth,predicted,count\n";
        for (const auto& [snr, b] : by_snr(r, name, classes)) {
            const auto cm = metrics::confusion(b.pred, b.truth, classes.size());
            const auto cls = metrics::class_metrics(cm);
            m += fmt(snr) + "," + std::to_string(b.truth.size()) + "," + fmt6(metrics::accuracy(b.pred, b.truth)) +
                 "," + fmt6(cls.macro.precision) + "," + fmt6(cls.macro.recall) + "," + fmt6(cls.macro.f1) + "\n";
            for (std::size_t t = 0; t < classes.size(); ++t)
                for (std::size_t q = 0; q < classes.size(); ++q)
                    conf += fmt(snr) + "," + std::to_string(classes[t]) + "," + std::to_string(classes[q]) + "," +
                            std::to_string(cm(t, q)) + "\n";
        }
        write_text(out_dir / (file_safe(name) + "_metrics.csv"), m);
        write_text(out_dir / (file_safe(name) + "_confusion.csv"), conf);
        write_curve(out_dir, name + "_accuracy", accuracy_curve(r, name));
        if (classes == std::vector<int>{0, 1} && name.find("audit") == std::string::npos)
            write_curve(out_dir, name + "_pd", detection_curve(r, name));
    }

    switch (r.mode) {
    case Mode::Case1: break;
    case Mode::Case2: {
        std::string s = "snr_db,p_sensing,p_classification,p_overall,chain_accuracy\n";
        std::map<double, double> ps, pc, po;
        for (const auto& [snr, p] : case2_curve(r)) {
            s += fmt(snr) + "," + fmt6(p.sensing) + "," + fmt6(p.classification) + "," + fmt6(p.overall) + "," +
                 fmt6(p.chain) + "\n";
            ps[snr] = p.sensing;
            pc[snr] = p.classification;
            po[snr] = p.overall;
        }
        write_text(out_dir / "case2_curves.csv", s);
        write_curve(out_dir, "case2_p_sensing", ps);
        write_curve(out_dir, "case2_p_classification", pc);
        write_curve(out_dir, "case2_p_overall", po);
        break;
    }
    case Mode::FeatureSweep: {
        std::string s = "feature,snr_db,precision,recall,f1,accuracy\n";
        for (const auto& [name, classes] : r.experiments) {
            const auto feature = name.substr(name.find('.') + 1);
            for (const auto& [snr, b] : by_snr(r, name, classes)) {
                const auto cls = metrics::class_metrics(metrics::confusion(b.pred, b.truth, classes.size()));
                s += feature + "," + fmt(snr) + "," + fmt6(cls.macro.precision) + "," + fmt6(cls.macro.recall) +
                     "," + fmt6(cls.macro.f1) + "," + fmt6(metrics::accuracy(b.pred, b.truth)) + "\n";
            }
            write_curve(out_dir, name + "_f1", macro_f1_curve(r, name));
        }
        write_text(out_dir / "feature_table.csv", s);
        break;
    }
    case Mode::CropSweep: {
        std::string s = "crop_rows,accuracy\n";
        std::map<double, double> curve;
        for (const auto& [name, classes] : r.experiments) {
            const auto tag = name.substr(name.find('.') + 1);
            const auto acc = accuracy_curve(r, name);
            std::vector<int> truth, pred;
            for (const auto& [snr, b] : by_snr(r, name, classes)) {
                truth.insert(truth.end(), b.truth.begin(), b.truth.end());
                pred.insert(pred.end(), b.pred.begin(), b.pred.end());
            }
            const double a = metrics::accuracy(pred, truth);
            s += tag + "," + fmt6(a) + "\n";
            if (tag != "full") curve[std::stod(tag)] = a;
        }
        write_text(out_dir / "crop_sweep.csv", s);
        write_curve(out_dir, "crop_sweep_accuracy", curve);
        break;
    }
    case Mode::SenseCompare: {
        std::vector<std::string> dets;
        for (const auto& [name, classes] : r.experiments)
            if (name.find("audit") == std::string::npos) dets.push_back(name);
        std::string s = "snr_db";
        std::vector<std::map<double, double>> curves;
        for (const auto& d : dets) {
            s += ",pd_" + d.substr(d.find('.') + 1);
            curves.push_back(detection_curve(r, d));
        }
        s += "\n";
        for (const auto& [snr, v] : curves.front()) {
            s += fmt(snr);
            for (const auto& c : curves) s += "," + fmt6(c.count(snr) ? c.at(snr) : 0.0);
            s += "\n";
        }
        write_text(out_dir / "sense_compare.csv", s);
        std::string pfa = "detector,false_alarm_rate\n";
        for (const auto& [name, classes] : r.experiments) pfa += name + "," + fmt6(false_alarm_rate(r, name)) + "\n";
        write_text(out_dir / "false_alarms.csv", pfa);
        break;
    }
    }
}

ExperimentReport load_report(const fs::path& dir) {
    const auto rj = dir / "report.json";
    const auto pc = dir / "predictions.csv";
    if (!fs::exists(rj)) throw FileNotFound(rj.string());
    if (!fs::exists(pc)) throw FileNotFound(pc.string());
    ExperimentReport r;
    try {
        std::ifstream is(rj);
        const auto j = json::parse(is);
        r.mode = parse_mode(j.at("mode").get<std::string>());
        r.config = j.at("config");
        for (const auto& [name, classes] : j.at("experiments").items())
            r.experiments[name] = classes.get<std::vector<int>>();
        r.extras = j.value("extras", json::object());
    } catch (const json::exception& e) {
        throw FormatError("malformed report " + rj.string() + ": " + e.what());
    }
    const auto tj = dir / "timing.json";
    if (fs::exists(tj)) {
        std::ifstream is(tj);
        try {
            r.timing = json::parse(is);
        } catch (const json::exception&) {
            throw FormatError("malformed " + tj.string());
        }
    }
    std::ifstream is(pc);
    std::string line;
    std::getline(is, line);
    if (line != "experiment,seed,label,snr_db,predicted,score") throw FormatError("unexpected predictions header");
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 6) throw FormatError("predictions line " + std::to_string(lineno) + " is malformed");
        try {
            r.predictions.push_back({f[0], std::stoull(f[1]), std::stoi(f[2]), std::stod(f[3]), std::stoi(f[4]),
                                     std::stod(f[5])});
        } catch (const std::exception&) {
            throw FormatError("predictions line " + std::to_string(lineno) + " is malformed");
        }
    }
    return r;
}

void cmd_report(const fs::path& report_dir, const fs::path& out_dir) {
    write_report(load_report(report_dir), out_dir);
}

GenerateResult cmd_generate(const ExperimentConfig& cfg, const fs::path& out_dir) {
    validate(cfg);
    const auto keys = plan_records(cfg);
    fs::create_directories(out_dir);
    dataio::DatasetManifest manifest(out_dir);
    std::string audit = "file_path\tsnr_db\tsignal_power\tnoise_power\trealized_snr_db\n";
    for (const auto& k : keys) {
        const auto rec = regenerate(k, cfg);
        const auto name = dataio::record_file_name(static_cast<int>(k.cls), k.snr_db, k.seed, "iq");
        dataio::write_iq(out_dir / name, rec.signal);
        manifest.add({name, "iq", static_cast<int>(k.cls), k.snr_db, k.seed, std::to_string(rec.signal.size()),
                      dataio::crc32_file(out_dir / name)});
        const double realized = rec.label == WaveformClass::Noise
                                    ? -std::numeric_limits<double>::infinity()
                                    : 10.0 * std::log10(rec.signal_power / rec.noise_power);
        audit += name + "\t" + dataio::format_snr(k.snr_db) + "\t" + fmt(rec.signal_power) + "\t" +
                 fmt(rec.noise_power) + "\t" + fmt(realized) + "\n";
    }
    dataio::write_manifest(out_dir / dataio::kManifestName, manifest);
    write_text(out_dir / "snr_audit.tsv", audit);
    write_text(out_dir / "config.json", to_json(cfg).dump(2) + "\n");
    return {manifest, keys.size()};
}

dataio::DatasetManifest cmd_scf(const fs::path& dataset, const FamConfig& fam) {
    auto manifest = dataio::open_dataset(dataset);
    dataio::DatasetManifest out(manifest.root());
    for (const auto& e : manifest.entries())
        if (e.kind == "iq") out.add(e);
    std::size_t converted = 0;
    for (const auto& e : manifest.entries()) {
        if (e.kind != "iq") continue;
        std::size_t length = 0;
        try {
            length = std::stoull(e.length_or_shape);
        } catch (const std::exception&) {
            throw FormatError("bad record length for " + e.file_path);
        }
        const auto sig = dataio::read_iq(manifest.resolve(e), length);
        const auto m = scf::compute_scf(sig, fam);
        const auto name = fs::path(e.file_path).replace_extension(".scf").string();
        dataio::write_matrix(manifest.root() / name, m);
        out.add({name, "scf", e.class_label, e.snr_db, e.seed,
                 std::to_string(m.rows()) + "x" + std::to_string(m.cols()),
                 dataio::crc32_file(manifest.root() / name)});
        ++converted;
    }
    if (converted == 0) throw FormatError("dataset has no I/Q records");
    dataio::write_manifest(manifest.root() / dataio::kManifestName, out);
    return out;
}

} // namespace cyclosense::pipeline
