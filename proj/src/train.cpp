#include "cyclosense/train.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "binary_io.hpp"
#include "cyclosense/error.hpp"
#include "cyclosense/nn_ops.hpp"
#include "cyclosense/rng.hpp"

namespace cyclosense::nn {
namespace {

Tensor make_batch(std::span<const FeatureMatrix* const> batch) {
    const std::size_t h = batch.front()->rows();
    const std::size_t w = batch.front()->cols();
    Tensor x({batch.size(), h, w, 1});
    double* dst = x.data();
    for (const auto* m : batch) {
        if (m->rows() != h || m->cols() != w) throw ShapeError("batch mixes feature shapes");
        std::copy(m->values.data().begin(), m->values.data().end(), dst);
        dst += h * w;
    }
    return x;
}

void check_input(const Model& model, const FeatureMatrix& m) {
    const auto& in = model.input_shape();
    if (in[0] != m.rows() || in[1] != m.cols() || in[2] != 1)
        throw ShapeError("feature " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                         " does not match model input " + shape_string(in));
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

} // namespace

void validate(const TrainConfig& cfg) {
    if (!(cfg.learning_rate > 0.0)) throw InvalidInput("learning rate must be positive");
    if (cfg.batch_size == 0) throw InvalidInput("batch size must be positive");
    if (cfg.max_epochs == 0) throw InvalidInput("max_epochs must be positive");
    if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0)) throw InvalidInput("val_fraction must be in (0, 1)");
    if (!(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0 && cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0))
        throw InvalidInput("Adam betas must be in [0, 1)");
}

void adam_step(Param& p, std::uint64_t t, const TrainConfig& cfg) {
    const double b1 = cfg.adam_beta1;
    const double b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    double* w = p.value.data();
    const double* g = p.grad.data();
    double* m = p.m.data();
    double* v = p.v.data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        w[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
}

bool EarlyStopping::update(double val_loss) {
    const std::size_t epoch = seen_++;
    if (!has_best_ || val_loss < best_) {
        best_ = val_loss;
        best_epoch_ = epoch;
        has_best_ = true;
        return false;
    }
    return epoch - best_epoch_ >= patience_;
}

SplitIndices stratified_validation_split(std::span<const FeatureMatrix> data, double val_fraction,
                                         std::uint64_t seed) {
    std::map<std::pair<int, double>, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < data.size(); ++i) strata[{data[i].meta.label, data[i].meta.snr_db}].push_back(i);
    Rng rng(seed);
    SplitIndices out;
    for (auto& [key, idx] : strata) {
        shuffle(idx, rng);
        const auto n_val = static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(idx.size())));
        out.val.insert(out.val.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
        out.train.insert(out.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    return out;
}

StepResult train_step(Model& model, std::span<const FeatureMatrix* const> batch, const TrainConfig& cfg) {
    const Tensor x = make_batch(batch);
    const Tensor logits = model.forward(x);
    const std::size_t k = logits.dim(1);
    Tensor dlogits(logits.shape());
    StepResult out;
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto label = static_cast<std::size_t>(batch[b]->meta.label);
        const std::span<const double> row(logits.data() + b * k, k);
        const auto r = softmax_cross_entropy(row, label);
        out.loss += r.loss;
        if (argmax(row) == static_cast<int>(label)) ++out.correct;
        for (std::size_t c = 0; c < k; ++c) dlogits[b * k + c] = r.dlogits[c] * inv;
    }
    model.zero_grad();
    model.backward(dlogits);
    ++model.adam_steps;
    for (auto* p : model.params()) adam_step(*p, model.adam_steps, cfg);
    out.loss *= inv;
    return out;
}

Evaluation evaluate(const Model& model, std::span<const FeatureMatrix> data, std::size_t batch_size) {
    Evaluation ev;
    if (data.empty()) return ev;
    std::size_t correct = 0;
    double loss = 0.0;
    std::vector<const FeatureMatrix*> ptrs;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t end = std::min(data.size(), start + batch_size);
        ptrs.clear();
        for (std::size_t i = start; i < end; ++i) {
            check_input(model, data[i]);
            ptrs.push_back(&data[i]);
        }
        const Tensor logits = model.infer(make_batch(ptrs));
        const std::size_t k = logits.dim(1);
        for (std::size_t b = 0; b < ptrs.size(); ++b) {
            const std::span<const double> row(logits.data() + b * k, k);
            const int pred = argmax(row);
            ev.predictions.push_back(pred);
            const int label = ptrs[b]->meta.label;
            if (label >= 0 && static_cast<std::size_t>(label) < k) {
                loss += softmax_cross_entropy(row, static_cast<std::size_t>(label)).loss;
                if (pred == label) ++correct;
            }
        }
    }
    ev.loss = loss / static_cast<double>(data.size());
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return ev;
}

TrainResult train(Model model, std::span<const FeatureMatrix> train_set,
                  std::span<const FeatureMatrix> val_set, const TrainConfig& cfg) {
    validate(cfg);
    if (train_set.empty()) throw InvalidInput("training set is empty");
    std::set<int> labels;
    for (const auto& m : train_set) {
        check_input(model, m);
        if (m.meta.label < 0 || static_cast<std::size_t>(m.meta.label) >= model.num_classes())
            throw InvalidInput("label " + std::to_string(m.meta.label) + " outside model classes");
        labels.insert(m.meta.label);
    }
    if (labels.size() < 2) throw InvalidInput("training needs at least two classes");

    TrainResult result{std::move(model), {}};
    Model& net = result.model;
    EarlyStopping stopper(cfg.early_stop_patience);
    Rng rng(mix_seed(cfg.seed, 0xBA7C4));
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<const FeatureMatrix*> batch;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        shuffle(order, rng);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(&train_set[order[i]]);
            const auto step = train_step(net, batch, cfg);
            const double loss = step.loss;
            correct += step.correct;
            if (!std::isfinite(loss))
                throw NumericalError("training loss became non-finite at epoch " + std::to_string(epoch),
                                     static_cast<int>(epoch));
            loss_sum += loss * static_cast<double>(batch.size());
        }
        net.release_cache();
        for (const auto* p : net.params()) {
            try {
                p->value.check_finite("model weights");
            } catch (const NumericalError& e) {
                throw NumericalError(std::string(e.what()) + " at epoch " + std::to_string(epoch),
                                     static_cast<int>(epoch));
            }
        }

        EpochStats st;
        st.epoch = epoch;
        st.train_loss = loss_sum / static_cast<double>(train_set.size());
        st.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
        if (!val_set.empty()) {
            const auto ev = evaluate(net, val_set);
            st.val_loss = ev.loss;
            st.val_accuracy = ev.accuracy;
        } else {
            st.val_loss = st.train_loss;
            st.val_accuracy = st.train_accuracy;
        }
        st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.epochs.push_back(st);
        const bool stop = stopper.update(st.val_loss);
        result.history.best_epoch = stopper.best_epoch();
        if (stop) {
            result.history.early_stopped = true;
            break;
        }
    }
    return result;
}

TrainResult train(Model model, std::span<const FeatureMatrix> data, const TrainConfig& cfg) {
    validate(cfg);
    const auto split = stratified_validation_split(data, cfg.val_fraction, mix_seed(cfg.seed, 0x5A11));
    std::vector<FeatureMatrix> tr, va;
    tr.reserve(split.train.size());
    va.reserve(split.val.size());
    for (auto i : split.train) tr.push_back(data[i]);
    for (auto i : split.val) va.push_back(data[i]);
    return train(std::move(model), tr, va, cfg);
}

int argmax(std::span<const double> p) {
    if (p.empty()) return -1;
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<double> predict(const Model& model, const FeatureMatrix& m) {
    check_input(model, m);
    const FeatureMatrix* ptr = &m;
    const Tensor logits = model.infer(make_batch(std::span<const FeatureMatrix* const>(&ptr, 1)));
    return softmax(logits.values());
}

std::vector<std::vector<double>> predict_batch(const Model& model, std::span<const FeatureMatrix> data,
                                               std::size_t batch_size) {
    std::vector<std::vector<double>> out;
    out.reserve(data.size());
    std::vector<const FeatureMatrix*> ptrs;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t end = std::min(data.size(), start + batch_size);
        ptrs.clear();
        for (std::size_t i = start; i < end; ++i) {
            check_input(model, data[i]);
            ptrs.push_back(&data[i]);
        }
        const Tensor logits = model.infer(make_batch(ptrs));
        const std::size_t k = logits.dim(1);
        for (std::size_t b = 0; b < ptrs.size(); ++b)
            out.push_back(softmax(std::span<const double>(logits.data() + b * k, k)));
    }
    return out;
}

// ---- checkpoint ---------------------------------------------------------

namespace {

constexpr char kModelMagic[4] = {'C', 'S', 'N', 'N'};
constexpr std::uint32_t kModelVersion = 1;

enum class LayerCode : std::uint32_t { Conv = 0, LeakyRelu = 1, MaxPool = 2, Flatten = 3, Dense = 4 };

void write_tensor_values(std::ostream& os, const Tensor& t) {
    for (double v : t.values()) detail::write_le(os, static_cast<float>(v));
}

void read_tensor_values(std::istream& is, Tensor& t) {
    for (double& v : t.values()) v = detail::read_le<float>(is, "model weights");
}

} // namespace

void save_model(const std::filesystem::path& path, const Model& model, const TrainConfig& cfg) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw InvalidInput("cannot open " + path.string() + " for writing");
    os.write(kModelMagic, 4);
    detail::write_le(os, kModelVersion);
    for (auto d : model.input_shape()) detail::write_le(os, static_cast<std::uint32_t>(d));
    detail::write_le(os, static_cast<std::uint32_t>(model.specs().size()));
    for (const auto& spec : model.specs()) {
        std::uint32_t code = 0, arg = 0;
        float alpha = 0.0f;
        if (auto* c = std::get_if<Conv2DSpec>(&spec)) {
            code = static_cast<std::uint32_t>(LayerCode::Conv);
            arg = static_cast<std::uint32_t>(c->out_channels);
        } else if (auto* l = std::get_if<LeakyReluSpec>(&spec)) {
            code = static_cast<std::uint32_t>(LayerCode::LeakyRelu);
            alpha = static_cast<float>(l->alpha);
        } else if (std::holds_alternative<MaxPoolSpec>(spec)) {
            code = static_cast<std::uint32_t>(LayerCode::MaxPool);
        } else if (std::holds_alternative<FlattenSpec>(spec)) {
            code = static_cast<std::uint32_t>(LayerCode::Flatten);
        } else if (auto* d = std::get_if<DenseSpec>(&spec)) {
            code = static_cast<std::uint32_t>(LayerCode::Dense);
            arg = static_cast<std::uint32_t>(d->out_dim);
        }
        detail::write_le(os, code);
        detail::write_le(os, arg);
        detail::write_le(os, alpha);
    }
    const auto params = model.params();
    detail::write_le(os, static_cast<std::uint32_t>(params.size()));
    for (const auto* p : params) {
        detail::write_le(os, static_cast<std::uint32_t>(p->value.rank()));
        for (auto d : p->value.shape()) detail::write_le(os, static_cast<std::uint32_t>(d));
    }
    detail::write_le(os, static_cast<std::uint64_t>(model.adam_steps));
    for (const auto* p : params) write_tensor_values(os, p->value);
    for (const auto* p : params) {
        write_tensor_values(os, p->m);
        write_tensor_values(os, p->v);
    }
    if (!os) throw InvalidInput("failed writing " + path.string());

    nlohmann::ordered_json j;
    j["learning_rate"] = cfg.learning_rate;
    j["adam_beta1"] = cfg.adam_beta1;
    j["adam_beta2"] = cfg.adam_beta2;
    j["adam_eps"] = cfg.adam_eps;
    j["batch_size"] = cfg.batch_size;
    j["max_epochs"] = cfg.max_epochs;
    j["early_stop_patience"] = cfg.early_stop_patience;
    j["val_fraction"] = cfg.val_fraction;
    j["seed"] = cfg.seed;
    j["input_shape"] = model.input_shape();
    j["num_classes"] = model.num_classes();
    j["parameters"] = model.parameter_count();
    std::ofstream side(path.string() + ".json", std::ios::trunc);
    side << j.dump(2) << '\n';
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FileNotFound(path.string());
    char magic[4] = {};
    is.read(magic, 4);
    if (is.gcount() != 4 || std::string(magic, 4) != std::string(kModelMagic, 4))
        throw FormatError("not a CSNN model file: " + path.string(), 0);
    if (detail::read_le<std::uint32_t>(is, "version") != kModelVersion)
        throw FormatError("unsupported model file version", 4);
    std::vector<std::size_t> input(3);
    for (auto& d : input) d = detail::read_le<std::uint32_t>(is, "input shape");
    const auto n_layers = detail::read_le<std::uint32_t>(is, "layer count");
    std::vector<LayerSpec> specs;
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        const auto code = static_cast<LayerCode>(detail::read_le<std::uint32_t>(is, "layer code"));
        const auto arg = detail::read_le<std::uint32_t>(is, "layer arg");
        const auto alpha = detail::read_le<float>(is, "layer alpha");
        switch (code) {
        case LayerCode::Conv: specs.emplace_back(Conv2DSpec{arg}); break;
        case LayerCode::LeakyRelu: specs.emplace_back(LeakyReluSpec{static_cast<double>(alpha)}); break;
        case LayerCode::MaxPool: specs.emplace_back(MaxPoolSpec{}); break;
        case LayerCode::Flatten: specs.emplace_back(FlattenSpec{}); break;
        case LayerCode::Dense: specs.emplace_back(DenseSpec{arg}); break;
        default: throw FormatError("unknown layer code in model file");
        }
    }
    Model model(specs, input, 0);
    auto params = model.params();
    if (detail::read_le<std::uint32_t>(is, "param count") != params.size())
        throw FormatError("parameter table does not match layer list");
    for (auto* p : params) {
        const auto rank = detail::read_le<std::uint32_t>(is, "param rank");
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = detail::read_le<std::uint32_t>(is, "param shape");
        if (shape != p->value.shape()) throw FormatError("parameter shape mismatch in model file");
    }
    model.adam_steps = detail::read_le<std::uint64_t>(is, "adam step count");
    for (auto* p : params) read_tensor_values(is, p->value);
    for (auto* p : params) {
        read_tensor_values(is, p->m);
        read_tensor_values(is, p->v);
    }
    return model;
}

TrainConfig load_train_config(const std::filesystem::path& model_path) {
    const auto side = model_path.string() + ".json";
    std::ifstream is(side);
    if (!is) throw FileNotFound(side);
    const auto j = nlohmann::json::parse(is, nullptr, false);
    if (j.is_discarded()) throw FormatError("malformed hyperparameter sidecar " + side);
    TrainConfig cfg;
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.adam_beta1 = j.value("adam_beta1", cfg.adam_beta1);
    cfg.adam_beta2 = j.value("adam_beta2", cfg.adam_beta2);
    cfg.adam_eps = j.value("adam_eps", cfg.adam_eps);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
    cfg.early_stop_patience = j.value("early_stop_patience", cfg.early_stop_patience);
    cfg.val_fraction = j.value("val_fraction", cfg.val_fraction);
    cfg.seed = j.value("seed", cfg.seed);
    return cfg;
}

} // namespace cyclosense::nn
