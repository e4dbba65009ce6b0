#include <cmath>
#include <filesystem>

#include "doctest.h"

#include "cyclosense/error.hpp"
#include "cyclosense/model.hpp"
#include "cyclosense/nn_ops.hpp"
#include "cyclosense/train.hpp"
#include "support/gradcheck.hpp"

using namespace cyclosense;
using namespace cyclosense::nn;

namespace {

Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b) {
    const auto n = x.dim(0), h = x.dim(1), wd = x.dim(2), ci = x.dim(3), co = w.dim(3);
    Tensor y({n, h, wd, co});
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < wd; ++j)
                for (std::size_t c = 0; c < co; ++c) {
                    double acc = b[c];
                    for (std::size_t p = 0; p < 3; ++p)
                        for (std::size_t l = 0; l < 3; ++l) {
                            const auto ii = static_cast<long>(i + p) - 1, jj = static_cast<long>(j + l) - 1;
                            if (ii < 0 || jj < 0 || ii >= long(h) || jj >= long(wd)) continue;
                            for (std::size_t k = 0; k < ci; ++k)
                                acc += w[((p * 3 + l) * ci + k) * co + c] *
                                       x[((s * h + std::size_t(ii)) * wd + std::size_t(jj)) * ci + k];
                        }
                    y[((s * h + i) * wd + j) * co + c] = acc;
                }
    return y;
}

FeatureMatrix labeled(std::size_t rows, std::size_t cols, int label, Rng& rng, double shift) {
    FeatureMatrix f;
    f.values = Matrix<double>(rows, cols);
    for (double& v : f.values.data()) v = shift + 0.3 * rng.normal();
    f.meta.label = label;
    return f;
}

std::vector<LayerSpec> small_stack(std::size_t k) {
    return {Conv2DSpec{4}, LeakyReluSpec{0.1}, MaxPoolSpec{}, FlattenSpec{}, DenseSpec{8}, LeakyReluSpec{0.1},
            DenseSpec{k}};
}

} // namespace

TEST_CASE("conv: identity kernel and zero padding arithmetic") {
    Rng rng(1);
    const auto x = gradcheck::random_tensor({1, 5, 4, 1}, rng);
    Tensor w({3, 3, 1, 1});
    w[4] = 1.0;
    const auto y = conv2d_forward(x, w, Tensor({1}));
    CHECK(y.values().size() == x.values().size());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);

    const auto ones = conv2d_forward(Tensor({3, 3, 1}, 1.0), Tensor({3, 3, 1, 1}, 1.0), Tensor({1}));
    CHECK(ones.shape() == std::vector<std::size_t>{3, 3, 1});
    CHECK(ones[4] == 9.0);
    CHECK(ones[0] == 4.0);
    CHECK(ones[8] == 4.0);
    CHECK(ones[1] == 6.0);
}

TEST_CASE("conv: matches the nested-loop oracle") {
    Rng rng(2);
    for (int trial = 0; trial < 5; ++trial) {
        const auto x = gradcheck::random_tensor({2, 3 + rng.below(4), 2 + rng.below(5), 1 + rng.below(3)}, rng);
        const auto w = gradcheck::random_tensor({3, 3, x.dim(3), 1 + rng.below(4)}, rng);
        const auto b = gradcheck::random_tensor({w.dim(3)}, rng);
        const auto y = conv2d_forward(x, w, b);
        const auto ref = naive_conv(x, w, b);
        REQUIRE(y.shape() == ref.shape());
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(y[i] - ref[i]) < 1e-10);
    }
    CHECK_THROWS_AS(conv2d_forward(Tensor({1, 3, 3, 2}), Tensor({3, 3, 1, 1}), Tensor({1})), ShapeError);
}

TEST_CASE("conv backward: zero upstream and impulse locality") {
    Rng rng(3);
    const auto x = gradcheck::random_tensor({1, 4, 5, 2}, rng);
    const auto w = gradcheck::random_tensor({3, 3, 2, 3}, rng);
    const auto g0 = conv2d_backward(Tensor({1, 4, 5, 3}), x, w);
    for (double v : g0.dx.values()) CHECK(v == 0.0);
    for (double v : g0.dw.values()) CHECK(v == 0.0);
    for (double v : g0.db.values()) CHECK(v == 0.0);

    // Impulse at interior pixel (2, 2), output channel 1.
    Tensor dy({1, 4, 5, 3});
    dy[((0 * 4 + 2) * 5 + 2) * 3 + 1] = 1.0;
    const auto g = conv2d_backward(dy, x, w);
    for (std::size_t p = 0; p < 3; ++p)
        for (std::size_t l = 0; l < 3; ++l)
            for (std::size_t k = 0; k < 2; ++k) {
                CHECK(g.dw[((p * 3 + l) * 2 + k) * 3 + 1] == x[((1 + p) * 5 + (1 + l)) * 2 + k]);
                CHECK(g.dw[((p * 3 + l) * 2 + k) * 3 + 0] == 0.0);
            }
    CHECK(g.db[1] == 1.0);
}

TEST_CASE("gradients match central differences") {
    Rng rng(4);
    for (int i = 0; i < 20; ++i) {
        CHECK(gradcheck::check_conv(1 + rng.below(2), 1 + rng.below(5), 1 + rng.below(5), 1 + rng.below(3),
                                    1 + rng.below(3), rng) < 1e-4);
        CHECK(gradcheck::check_dense(1 + rng.below(3), 1 + rng.below(8), 1 + rng.below(6), rng) < 1e-4);
        CHECK(gradcheck::check_leaky({1, 1 + rng.below(4), 1 + rng.below(4), 2}, 0.1, rng) < 1e-4);
        CHECK(gradcheck::check_pool({1, 1 + rng.below(6), 1 + rng.below(6), 2}, rng) < 1e-4);
        CHECK(gradcheck::check_softmax_ce(2 + rng.below(5), rng) < 1e-4);
    }
}

TEST_CASE("leaky relu") {
    Tensor x({3});
    x[0] = 5.0;
    x[1] = -2.0;
    x[2] = -3.0;
    const auto y = leaky_relu(x, 0.1);
    CHECK(y[0] == 5.0);
    CHECK(y[1] == doctest::Approx(-0.2));
    const auto d = leaky_relu_backward(Tensor({3}, 1.0), x, 0.1);
    CHECK(d[0] == 1.0);
    CHECK(d[2] == doctest::Approx(0.1));
}

TEST_CASE("maxpool: value, ceil shapes and argmax routing") {
    Tensor x({2, 2, 1});
    x[0] = 1;
    x[1] = 2;
    x[2] = 3;
    x[3] = 4;
    const auto p = maxpool2x2(x);
    CHECK(p.y.size() == 1);
    CHECK(p.y[0] == 4.0);
    const auto g = maxpool2x2_backward(Tensor({1, 1, 1}, 1.0), p.argmax, x.shape());
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
    CHECK(g[2] == 0.0);
    CHECK(g[3] == 1.0);

    Tensor odd({5, 3, 1});
    for (std::size_t i = 0; i < odd.size(); ++i) odd[i] = double(i);
    const auto q = maxpool2x2(odd);
    CHECK(q.y.shape() == std::vector<std::size_t>{3, 2, 1});
    CHECK(q.y[5] == 14.0); // last shrunken 1x1 window
    CHECK(q.y[1] == 5.0);  // 2x1 edge window over columns 2

    // Ties go to the first element.
    const auto t = maxpool2x2(Tensor({2, 2, 1}, 1.0));
    CHECK(t.argmax[0] == 0);
}

TEST_CASE("softmax cross-entropy") {
    const std::vector<double> eq{0.3, 0.3, 0.3, 0.3};
    const auto r = softmax_cross_entropy(eq, 2);
    CHECK(r.loss == doctest::Approx(std::log(4.0)));
    for (double p : softmax(eq)) CHECK(p == doctest::Approx(0.25));
    const std::vector<double> sat{10.0, -10.0};
    CHECK(softmax_cross_entropy(sat, 0).loss < 1e-4);
    const std::vector<double> big{1000.0, 0.0};
    CHECK(std::isfinite(softmax_cross_entropy(big, 1).loss));
    CHECK_THROWS_AS(softmax_cross_entropy(eq, 4), InvalidInput);
}

TEST_CASE("ledger: default stack on the full and cropped inputs") {
    const auto specs = default_stack(4);
    const auto full = shape_ledger(specs, {8193, 16, 1});
    CHECK(full.front().name == "Input");
    CHECK(full[1].name == "Conv1");
    CHECK(full.back().name == "Dense2");
    CHECK(count_parameters(specs, {8193, 16, 1}) == 33'736'772);
    std::size_t flatten = 0;
    for (const auto& r : shape_ledger(specs, {16, 16, 1}))
        if (r.name == "Flatten") flatten = r.shape.at(0);
    CHECK(flatten == 256);
    CHECK(count_parameters(specs, {16, 16, 1}) == 640 + 73856 + 73792 + (256 * 256 + 256) + (256 * 4 + 4));
    Model m(specs, {16, 16, 1}, 1);
    CHECK(m.parameter_count() == count_parameters(specs, {16, 16, 1}));
}

TEST_CASE("adam: zero gradient and first-step identity") {
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    Param p(Tensor({1}, 2.0));
    p.grad = Tensor({1});
    adam_step(p, 1, cfg);
    CHECK(p.value[0] == 2.0);
    p.grad[0] = 1.0;
    adam_step(p, 1, cfg);
    CHECK(p.value[0] == doctest::Approx(2.0 - 0.1).epsilon(1e-6));
}

TEST_CASE("early stopping stops exactly patience epochs after the last improvement") {
    EarlyStopping es(10);
    const std::vector<double> losses{5, 4, 3, 3.5, 3.2, 2.9};
    for (double l : losses) CHECK_FALSE(es.update(l));
    int extra = 0;
    while (!es.update(2.9)) ++extra;
    CHECK(extra + 1 == 10);
    CHECK(es.best_epoch() == 5);
}

TEST_CASE("train: toy blobs, determinism, early stop, zero-weight predictions") {
    Rng rng(9);
    std::vector<FeatureMatrix> data;
    for (int i = 0; i < 24; ++i) data.push_back(labeled(4, 4, i % 2, rng, i % 2 ? 1.0 : -1.0));
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.batch_size = 8;
    cfg.max_epochs = 30;
    cfg.seed = 5;
    const auto a = train(Model(small_stack(2), {4, 4, 1}, 3), data, cfg);
    const auto b = train(Model(small_stack(2), {4, 4, 1}, 3), data, cfg);
    CHECK(a.model == b.model);
    CHECK(a.history.epochs.front().train_loss > a.history.epochs.back().train_loss);
    CHECK(evaluate(a.model, data).accuracy == 1.0);

    Model zero(small_stack(3), {4, 4, 1}, 1);
    for (auto* p : zero.params()) p->value.fill(0.0);
    for (double p : predict(zero, data[0])) CHECK(p == doctest::Approx(1.0 / 3.0));

    FeatureMatrix bad = data[0];
    bad.meta.label = 2;
    std::vector<FeatureMatrix> wrong{bad, data[1], data[2], data[3], data[4]};
    CHECK_THROWS_AS(train(Model(small_stack(2), {4, 4, 1}, 3), wrong, cfg), InvalidInput);
}

TEST_CASE("train: constant data plateaus and stops on patience") {
    std::vector<FeatureMatrix> data;
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        FeatureMatrix f;
        f.values = Matrix<double>(4, 4, 0.5);
        f.meta.label = i % 2;
        data.push_back(f);
    }
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 4;
    cfg.max_epochs = 200;
    cfg.early_stop_patience = 3;
    const auto r = train(Model(small_stack(2), {4, 4, 1}, 3), data, cfg);
    CHECK(r.history.early_stopped);
    // best_epoch is a 0-based index into epochs.
    CHECK(r.history.epochs.size() == r.history.best_epoch + 1 + 3);
}

TEST_CASE("divergence surfaces as a numerical error") {
    Rng rng(2);
    std::vector<FeatureMatrix> data;
    for (int i = 0; i < 8; ++i) data.push_back(labeled(4, 4, i % 2, rng, 0.0));
    TrainConfig cfg;
    cfg.learning_rate = 1e300;
    cfg.batch_size = 4;
    cfg.max_epochs = 2;
    CHECK_THROWS_AS(train(Model(small_stack(2), {4, 4, 1}, 3), data, cfg), NumericalError);
}

TEST_CASE("checkpoint round trip") {
    Rng rng(3);
    std::vector<FeatureMatrix> data;
    for (int i = 0; i < 8; ++i) data.push_back(labeled(4, 4, i % 2, rng, i % 2 ? 0.5 : -0.5));
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.max_epochs = 2;
    cfg.batch_size = 4;
    const auto r = train(Model(small_stack(2), {4, 4, 1}, 3), data, cfg);
    const auto path = std::filesystem::temp_directory_path() / "cyclosense_unit_model.bin";
    save_model(path, r.model, cfg);
    const auto back = load_model(path);
    CHECK(back.specs().size() == r.model.specs().size());
    CHECK(back.adam_steps == r.model.adam_steps);
    const auto pa = predict(r.model, data[0]);
    const auto pb = predict(back, data[0]);
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-5));
    CHECK(load_train_config(path).learning_rate == cfg.learning_rate);
    std::filesystem::remove(path);
    std::filesystem::remove(path.string() + ".json");
    CHECK_THROWS(load_model(path));
}
