#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "dba/error.hpp"
#include "dba/model.hpp"
#include "dba/rng.hpp"
#include "gradcheck.hpp"

using namespace dba;

namespace {

Image random_image(Rng& rng, int h, int w, int c) {
    Image img(h, w, c);
    for (double& v : img.pixels) v = rng.uniform();
    return img;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("dba_test_model_" + name)).string();
}

// Left half bright for class 0, right half bright for class 1, plus noise.
LabeledDataset half_bright_toy(std::size_t n, std::uint64_t seed) {
    LabeledDataset ds;
    ds.class_names = {"left", "right"};
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        Image img(8, 8, 1);
        for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 8; ++c) {
                const bool lit = (label == 0) ? c < 4 : c >= 4;
                img.at(r, c) = std::clamp((lit ? 0.8 : 0.2) + rng.uniform(-0.15, 0.15), 0.0, 1.0);
            }
        ds.images.push_back(img);
        ds.labels.push_back(label);
    }
    return ds;
}

// Plain logistic regression on raw pixels; confirms the toy task is linearly
// separable independently of the CNN.
double logistic_regression_accuracy(const LabeledDataset& ds) {
    const std::size_t d = ds.images[0].size();
    std::vector<double> w(d, 0.0);
    double b = 0.0;
    for (int it = 0; it < 300; ++it) {
        std::vector<double> gw(d, 0.0);
        double gb = 0.0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            double z = b;
            for (std::size_t k = 0; k < d; ++k) z += w[k] * ds.images[i].pixels[k];
            const double err = 1.0 / (1.0 + std::exp(-z)) - ds.labels[i];
            for (std::size_t k = 0; k < d; ++k) gw[k] += err * ds.images[i].pixels[k];
            gb += err;
        }
        for (std::size_t k = 0; k < d; ++k) w[k] -= 0.5 * gw[k] / static_cast<double>(ds.size());
        b -= 0.5 * gb / static_cast<double>(ds.size());
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        double z = b;
        for (std::size_t k = 0; k < d; ++k) z += w[k] * ds.images[i].pixels[k];
        correct += (z > 0.0) == (ds.labels[i] == 1);
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace

TEST_CASE("parameter count matches the closed-form layer arithmetic") {
    // conv1: 3*3*1*16 + 16; conv2: 3*3*16*32 + 32; fc1: (7*7*32)*128 + 128; fc2: 128*10 + 10
    const std::size_t expected = (9 * 1 * 16 + 16) + (9 * 16 * 32 + 32) + (7 * 7 * 32 * 128 + 128) + (128 * 10 + 10);
    CHECK(expected == 206922);
    CHECK(parameter_count({28, 28, 1, 10, 0}) == expected);
    // CIFAR: 8*8*32 flatten, 3 input channels
    CHECK(parameter_count({32, 32, 3, 10, 0}) == (9 * 3 * 16 + 16) + (9 * 16 * 32 + 32) + (8 * 8 * 32 * 128 + 128) + (128 * 10 + 10));
}

TEST_CASE("init_classifier is deterministic and validates dims") {
    const ModelConfig cfg{28, 28, 1, 10, 42};
    const Classifier a = init_classifier(cfg);
    const Classifier b = init_classifier(cfg);
    CHECK(a == b);
    CHECK(a.parameters() != init_classifier({28, 28, 1, 10, 43}).parameters());
    for (const auto& blk : parameter_layout(cfg)) {
        const double limit = std::sqrt(6.0 / static_cast<double>(blk.fan_in));
        for (std::size_t i = 0; i < blk.size; ++i) {
            const double v = a.parameters()[blk.offset + i];
            if (blk.name.ends_with(".b")) {
                REQUIRE(v == 0.0);
            } else {
                REQUIRE(std::abs(v) <= limit);
            }
        }
    }
    CHECK_THROWS_AS(init_classifier({30, 28, 1, 10, 0}), std::invalid_argument);
    CHECK_THROWS_AS(init_classifier({28, 28, 2, 10, 0}), std::invalid_argument);
}

TEST_CASE("forward: symmetry, batch independence and normalization") {
    const ModelConfig cfg{8, 8, 3, 5, 7};
    Classifier model = init_classifier(cfg);
    for (const auto& blk : parameter_layout(cfg)) {
        if (blk.name.starts_with("fc")) {
            std::fill_n(model.parameters().begin() + static_cast<std::ptrdiff_t>(blk.offset), blk.size, 0.0);
        }
    }
    const std::vector<Image> zero = {Image(8, 8, 3, 0.0)};
    const auto logits = forward(model, zero)[0];
    for (double v : logits) CHECK(v == logits[0]);

    Rng rng(1);
    const Classifier fresh = init_classifier(cfg);
    const Image a = random_image(rng, 8, 8, 3);
    const Image b = random_image(rng, 8, 8, 3);
    const std::vector<Image> one = {a};
    const std::vector<Image> two = {b, a};
    CHECK(forward(fresh, one)[0] == forward(fresh, two)[1]);

    for (int t = 0; t < 20; ++t) {
        const std::vector<Image> x = {random_image(rng, 8, 8, 3)};
        const auto p = softmax(forward(fresh, x)[0]);
        double sum = 0.0;
        for (double v : p) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }

    const std::vector<Image> wrong = {Image(8, 8, 1, 0.0)};
    CHECK_THROWS_AS(forward(fresh, wrong), std::invalid_argument);
}

TEST_CASE("argmax breaks ties toward the lowest index") {
    const std::vector<double> s = {0.1, 0.7, 0.7, 0.2};
    CHECK(argmax(s) == 1);
    const std::vector<double> flat = {0.0, 0.0, 0.0};
    CHECK(argmax(flat) == 0);
}

TEST_CASE("loss: analytic value, mean invariance, label validation") {
    const ModelConfig cfg{8, 8, 1, 10, 3};
    Classifier model = init_classifier(cfg);
    std::fill(model.parameters().begin(), model.parameters().end(), 0.0);
    Rng rng(2);
    const std::vector<Image> x = {random_image(rng, 8, 8, 1)};
    const std::vector<int> y = {4};
    CHECK(std::abs(loss_and_gradient(model, x, y).loss - std::log(10.0)) <= 1e-6);

    const Classifier fresh = init_classifier(cfg);
    const std::vector<Image> xx = {x[0], x[0]};
    const std::vector<int> yy = {4, 4};
    CHECK(loss_and_gradient(fresh, x, y).loss == doctest::Approx(loss_and_gradient(fresh, xx, yy).loss).epsilon(1e-14));

    const std::vector<int> bad = {10};
    CHECK_THROWS_AS(loss_and_gradient(fresh, x, bad), std::invalid_argument);
}

TEST_CASE("gradient matches central differences on every layer") {
    Rng rng(99);
    const auto setup = gradcheck::small_setup(rng);
    REQUIRE(loss_and_gradient(setup.model, setup.batch, setup.labels).gradient.size() == setup.model.parameters().size());
    for (const auto& r : gradcheck::run(setup.model, setup.batch, setup.labels, rng)) {
        INFO(r.name << " worst relative error " << r.worst << ", redrawn " << r.redrawn);
        CHECK(r.checked == r.probes);
        CHECK(r.worst <= 1e-3);
    }
}

TEST_CASE("train: null update, determinism and a separable toy problem") {
    const LabeledDataset ds = half_bright_toy(200, 5);
    REQUIRE(logistic_regression_accuracy(ds) == 1.0);
    const Classifier start = init_classifier({8, 8, 1, 2, 11});

    TrainConfig frozen;
    frozen.learning_rate = 0.0;
    frozen.epochs = 2;
    CHECK(train(start, ds, frozen) == start);

    TrainConfig tcfg;
    tcfg.epochs = 5;
    tcfg.batch_size = 16;
    tcfg.learning_rate = 0.01;
    tcfg.momentum = 0.9;
    tcfg.shuffle_seed = 3;
    std::vector<EpochReport> reports;
    const Classifier trained =
        train(start, ds, tcfg, [&](const EpochReport& r, const Classifier&) { reports.push_back(r); });
    REQUIRE(reports.size() == 5);
    CHECK(reports.back().train_accuracy >= 0.95);
    CHECK(reports.back().mean_loss <= 0.5 * reports.front().mean_loss);
    CHECK(train(start, ds, tcfg) == trained);
}

TEST_CASE("train: head-only updates touch just the final layer") {
    const LabeledDataset ds = half_bright_toy(40, 1);
    const Classifier start = init_classifier({8, 8, 1, 2, 4});
    TrainConfig tcfg;
    tcfg.epochs = 1;
    tcfg.batch_size = 8;
    tcfg.head_only = true;
    const Classifier tuned = train(start, ds, tcfg);
    std::size_t head = 0;
    for (const auto& b : parameter_layout(start.config()))
        if (b.name == "fc2.w") head = b.offset;
    for (std::size_t i = 0; i < head; ++i) REQUIRE(tuned.parameters()[i] == start.parameters()[i]);
    CHECK(tuned.parameters() != start.parameters());
}

TEST_CASE("train: non-finite loss aborts with a diagnostic") {
    const LabeledDataset ds = half_bright_toy(32, 2);
    TrainConfig tcfg;
    tcfg.epochs = 3;
    tcfg.batch_size = 8;
    tcfg.learning_rate = 1e30;
    tcfg.momentum = 0.0;
    try {
        (void)train(init_classifier({8, 8, 1, 2, 4}), ds, tcfg);
        FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
        CHECK(e.epoch >= 1);
        CHECK(!std::isfinite(e.loss));
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("checkpoint round-trip, corruption and version checks") {
    const Classifier model = init_classifier({8, 8, 3, 4, 8});
    const std::string path = temp_path("ckpt.bin");
    save_checkpoint(model, path);
    const Classifier back = load_checkpoint(path);
    CHECK(back == model);

    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(100);
        char byte;
        f.seekg(100);
        f.get(byte);
        f.seekp(100);
        f.put(static_cast<char>(byte ^ 0x5a));
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("checksum"), FormatError);

    save_checkpoint(model, path);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(8);
        f.put(static_cast<char>(9));
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version"), FormatError);

    save_checkpoint(model, path);
    const Classifier reloaded = load_checkpoint(path);
    const std::vector<Image> mnist_shaped = {Image(28, 28, 1, 0.0)};
    CHECK_THROWS_AS(forward(reloaded, mnist_shaped), std::invalid_argument);
    std::remove(path.c_str());
}
