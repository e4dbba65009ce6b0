// cyclosense command-line front end.
//
// Exit codes: 0 ok, 2 invalid configuration, 3 data error, 4 numerical failure.

#include <new>
#include <cstdio>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "cyclosense/dataio.hpp"
#include "cyclosense/error.hpp"
#include "cyclosense/pipeline.hpp"
#include "cyclosense/train.hpp"

namespace fs = std::filesystem;
using namespace cyclosense;
using pipeline::ExperimentConfig;

namespace {

enum Exit { kOk = 0, kInvalidConfig = 2, kDataError = 3, kNumerical = 4 };

// Flag values; unset flags leave the config file (or defaults) alone.
struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> classes;
    std::vector<double> snr;
    std::optional<std::size_t> per_class;
    std::optional<std::size_t> length;
    std::optional<std::string> feature;
    std::optional<std::size_t> crop_rows;
    std::optional<std::size_t> crop_cols;
    std::optional<std::string> normalization;
    std::optional<std::size_t> raw_window;
    std::optional<double> lr;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch;
    std::optional<std::size_t> patience;
    std::optional<std::size_t> n_prime;
    std::optional<std::size_t> l_hop;
    std::optional<double> train_fraction;
};

void add_config_flags(CLI::App* app, Overrides& o, bool seed_required) {
    app->add_option("--config", o.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    auto* seed = app->add_option("--seed", o.seed, "master seed for records, splits and weights");
    if (seed_required) seed->required();
    app->add_option("--classes", o.classes, "subset of noise,gsm,umts,lte")->delimiter(',');
    app->add_option("--snr", o.snr, "SNR levels in dB")->delimiter(',');
    app->add_option("--per-class", o.per_class, "records per class and SNR level");
    app->add_option("--length", o.length, "samples per record");
    app->add_option("--feature", o.feature, "iq, ap, fft, scf or scf_crop");
    app->add_option("--crop-rows", o.crop_rows, "SCF crop height (cyclic-frequency bins)");
    app->add_option("--crop-cols", o.crop_cols, "SCF crop width (frequency channels)");
    app->add_option("--normalization", o.normalization, "none, maxabs or zscore");
    app->add_option("--raw-window", o.raw_window, "samples used by iq/ap/fft features");
    app->add_option("--lr", o.lr, "Adam learning rate");
    app->add_option("--epochs", o.epochs, "maximum epochs");
    app->add_option("--batch", o.batch, "mini-batch size");
    app->add_option("--patience", o.patience, "early-stopping patience");
    app->add_option("--n-prime", o.n_prime, "FAM channelizer length");
    app->add_option("--l-hop", o.l_hop, "FAM hop");
    app->add_option("--train-fraction", o.train_fraction, "share of each stratum used for training");
}

ExperimentConfig build_config(const Overrides& o, pipeline::Mode mode) {
    ExperimentConfig cfg;
    cfg.mode = mode;
    if (!o.config_path.empty()) cfg = pipeline::load_config(o.config_path, cfg);
    cfg.mode = mode;
    if (o.seed) cfg.seed = o.seed;
    if (!o.classes.empty()) {
        cfg.classes.clear();
        for (const auto& c : o.classes) cfg.classes.push_back(parse_waveform_class(c));
    }
    if (!o.snr.empty()) cfg.snr_levels_db = o.snr;
    if (o.per_class) cfg.per_class_per_snr = *o.per_class;
    if (o.length) cfg.record_length = *o.length;
    if (o.feature) cfg.feature_kind = parse_feature_kind(*o.feature);
    if (o.crop_rows) cfg.crop_rows = *o.crop_rows;
    if (o.crop_cols) cfg.crop_cols = *o.crop_cols;
    if (o.normalization) cfg.normalization = parse_normalization(*o.normalization);
    if (o.raw_window) cfg.raw_window = *o.raw_window;
    if (o.lr) cfg.train.learning_rate = *o.lr;
    if (o.epochs) cfg.train.max_epochs = *o.epochs;
    if (o.batch) cfg.train.batch_size = *o.batch;
    if (o.patience) cfg.train.early_stop_patience = *o.patience;
    if (o.n_prime) cfg.fam.n_prime = *o.n_prime;
    if (o.l_hop) cfg.fam.l_hop = *o.l_hop;
    if (o.train_fraction) cfg.train_fraction = *o.train_fraction;
    pipeline::validate(cfg);
    return cfg;
}

std::vector<pipeline::Sample> samples_for(const ExperimentConfig& cfg, const std::string& data) {
    if (data.empty()) return pipeline::synthesize_for(cfg);
    return pipeline::load_samples(dataio::open_dataset(data), cfg, pipeline::needs_for(cfg));
}

void print_summary(const pipeline::ExperimentReport& r) {
    const auto s = pipeline::summarize(r);
    for (const auto& [name, e] : s.items()) {
        if (!e.contains("overall")) continue;
        std::printf("%-24s accuracy %.4f  macro-F1 %.4f  (n=%zu)\n", name.c_str(),
                    e["overall"]["accuracy"].get<double>(), e["overall"]["f1"].get<double>(),
                    e["overall"]["n"].get<std::size_t>());
    }
    if (s.contains("case2")) std::printf("mean P_CASE2 %.4f\n", s["case2"]["mean_overall"].get<double>());
    if (s.contains("case1_mean_accuracy")) std::printf("mean P_CASE1 %.4f\n", s["case1_mean_accuracy"].get<double>());
}

int run(int argc, char** argv) {
    CLI::App app{"cyclostationary spectrum sensing and signal identification"};
    app.require_subcommand(1);
    Overrides o;
    std::string out, data, model_path, in_dir, window;

    auto* gen = app.add_subcommand("generate", "synthesize a labeled I/Q dataset with manifest");
    add_config_flags(gen, o, true);
    gen->add_option("--out", out, "output directory")->required();

    auto* scf = app.add_subcommand("scf", "compute one SCF matrix per I/Q record of a dataset");
    scf->add_option("--data", data, "dataset directory or manifest")->required();
    std::size_t n_prime = 16, l_hop = 1;
    scf->add_option("--n-prime", n_prime, "FAM channelizer length");
    scf->add_option("--l-hop", l_hop, "FAM hop");
    scf->add_option("--window", window, "hamming or rectangular");

    auto* trn = app.add_subcommand("train", "train a classifier and save it");
    add_config_flags(trn, o, true);
    trn->add_option("--data", data, "dataset directory (synthesized from the seed when absent)");
    trn->add_option("--out", model_path, "model file")->required();

    auto* ev = app.add_subcommand("eval", "evaluate a saved classifier on the test split");
    add_config_flags(ev, o, false);
    ev->add_option("--model", model_path, "model file")->required()->check(CLI::ExistingFile);
    ev->add_option("--data", data, "dataset directory (synthesized from the seed when absent)");
    ev->add_option("--out", out, "report directory")->required();

    struct ModeCmd {
        const char* name;
        const char* help;
        pipeline::Mode mode;
        CLI::App* app = nullptr;
    };
    ModeCmd modes[] = {
        {"case1", "joint 4-class sensing and classification", pipeline::Mode::Case1},
        {"case2", "detector followed by a signal classifier", pipeline::Mode::Case2},
        {"sweep-features", "compare I/Q, AP, FFT and SCF inputs", pipeline::Mode::FeatureSweep},
        {"sweep-crop", "accuracy and epoch time against SCF crop height", pipeline::Mode::CropSweep},
        {"sense-compare", "CNN detector against the CFAR cyclic-feature detector", pipeline::Mode::SenseCompare},
    };
    for (auto& m : modes) {
        m.app = app.add_subcommand(m.name, m.help);
        add_config_flags(m.app, o, true);
        m.app->add_option("--data", data, "dataset directory (synthesized from the seed when absent)");
        m.app->add_option("--out", out, "report directory")->required();
    }

    auto* rep = app.add_subcommand("report", "re-emit tables and plot data from a saved report");
    rep->add_option("--in", in_dir, "directory holding report.json and predictions.csv")->required();
    rep->add_option("--out", out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kInvalidConfig;
    }

    if (gen->parsed()) {
        const auto cfg = build_config(o, pipeline::Mode::Case1);
        const auto res = pipeline::cmd_generate(cfg, out);
        std::printf("wrote %zu records to %s\n", res.records, out.c_str());
    } else if (scf->parsed()) {
        FamConfig fam;
        fam.n_prime = n_prime;
        fam.l_hop = l_hop;
        if (window == "rectangular") fam.demod_window = DemodWindow::Rectangular;
        else if (!window.empty() && window != "hamming") throw InvalidInput("unknown window '" + window + "'");
        const auto m = pipeline::cmd_scf(data, fam);
        std::printf("manifest now lists %zu files\n", m.size());
    } else if (trn->parsed()) {
        const auto cfg = build_config(o, pipeline::Mode::Case1);
        const auto run = pipeline::train_classifier(cfg, samples_for(cfg, data));
        nn::save_model(model_path, run.model, cfg.train);
        std::ofstream(model_path + ".experiment.json") << pipeline::to_json(cfg).dump(2) << "\n";
        const auto& last = run.history.epochs.back();
        std::printf("trained %zu epochs, final val accuracy %.4f\n", run.history.epochs.size(), last.val_accuracy);
    } else if (ev->parsed()) {
        Overrides eo = o;
        const fs::path saved = model_path + ".experiment.json";
        if (eo.config_path.empty() && fs::exists(saved)) eo.config_path = saved.string();
        const auto cfg = build_config(eo, pipeline::Mode::Case1);
        if (!cfg.seed) throw InvalidInput("eval needs the training seed (--seed or a saved experiment file)");
        const auto model = nn::load_model(model_path);
        const auto report = pipeline::evaluate_classifier(cfg, model, samples_for(cfg, data));
        pipeline::write_report(report, out);
        print_summary(report);
    } else if (rep->parsed()) {
        pipeline::cmd_report(in_dir, out);
        std::printf("report written to %s\n", out.c_str());
    } else {
        for (const auto& m : modes) {
            if (!m.app->parsed()) continue;
            const auto cfg = build_config(o, m.mode);
            const auto report = pipeline::run_experiment(cfg, samples_for(cfg, data));
            pipeline::write_report(report, out);
            print_summary(report);
        }
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.kind()) {
        case ErrorKind::InvalidInput:
        case ErrorKind::ShapeError: return kInvalidConfig;
        case ErrorKind::FormatError:
        case ErrorKind::FileNotFound: return kDataError;
        case ErrorKind::NumericalError: return kNumerical;
        }
        return kDataError;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDataError;
    } catch (const std::bad_alloc&) {
        std::cerr << "error: out of memory\n";
        return kInvalidConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDataError;
    }
}
