#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "dba/dataset.hpp"
#include "dba/error.hpp"
#include "dba/rng.hpp"

using namespace dba;
namespace fs = std::filesystem;

namespace {

using Bytes = std::vector<unsigned char>;

void put_be32(Bytes& b, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<unsigned char>((v >> s) & 0xFF));
}

std::string fixture_path(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "dba_dataset_fixtures";
    fs::create_directories(dir);
    return (dir / name).string();
}

std::string write_bytes(const std::string& name, const Bytes& b) {
    const auto path = fixture_path(name);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    return path;
}

// Two 28x28 images: a byte ramp and its reverse.
Bytes idx_images(std::uint32_t magic = 2051) {
    Bytes b;
    put_be32(b, magic);
    put_be32(b, 2);
    put_be32(b, 28);
    put_be32(b, 28);
    for (int i = 0; i < 784; ++i) b.push_back(static_cast<unsigned char>(i % 256));
    for (int i = 0; i < 784; ++i) b.push_back(static_cast<unsigned char>(255 - i % 256));
    return b;
}

Bytes idx_labels(std::uint32_t magic = 2049, std::vector<unsigned char> labels = {7, 2}) {
    Bytes b;
    put_be32(b, magic);
    put_be32(b, static_cast<std::uint32_t>(labels.size()));
    b.insert(b.end(), labels.begin(), labels.end());
    return b;
}

std::string error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

LabeledDataset labels_only(const std::vector<int>& labels, int classes) {
    LabeledDataset ds;
    for (int l : labels) {
        ds.images.emplace_back(2, 2, 1, l / 10.0);
        ds.labels.push_back(l);
    }
    for (int k = 0; k < classes; ++k) ds.class_names.push_back(std::to_string(k));
    return ds;
}

}  // namespace

TEST_CASE("IDX: hand-built pair round-trips exactly") {
    const auto img = write_bytes("ok-images", idx_images());
    const auto lbl = write_bytes("ok-labels", idx_labels());
    const auto ds = load_mnist_idx(img, lbl);
    REQUIRE(ds.size() == 2);
    CHECK(ds.labels == std::vector<int>{7, 2});
    CHECK(ds.class_names.size() == 10);
    for (int i = 0; i < 784; ++i) {
        REQUIRE(ds.images[0].pixels[i] == (i % 256) / 255.0);
        REQUIRE(ds.images[1].pixels[i] == (255 - i % 256) / 255.0);
    }
    CHECK(ds.images[0].height == 28);
    CHECK(ds.images[0].channels == 1);

    // writer output matches the fixture bytes
    write_mnist_idx(ds, fixture_path("rt-images"), fixture_path("rt-labels"));
    std::ifstream a(fixture_path("rt-images"), std::ios::binary);
    const Bytes written((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    CHECK(written == idx_images());
    const auto back = load_mnist_idx(fixture_path("rt-images"), fixture_path("rt-labels"));
    CHECK(back.images == ds.images);
    CHECK(back.labels == ds.labels);
}

TEST_CASE("IDX: malformed files are rejected with offsets") {
    const auto img = write_bytes("m-images", idx_images());
    const auto lbl = write_bytes("m-labels", idx_labels());

    const auto bad_label_magic = write_bytes("m-labels-2051", idx_labels(2051));
    const auto msg = error_of([&] { load_mnist_idx(img, bad_label_magic); });
    CHECK(msg.find("expected 2049") != std::string::npos);
    CHECK(msg.find("byte 0") != std::string::npos);
    CHECK_THROWS_AS(load_mnist_idx(img, bad_label_magic), FormatError);

    const auto bad_image_magic = write_bytes("m-images-2049", idx_images(2049));
    CHECK(error_of([&] { load_mnist_idx(bad_image_magic, lbl); }).find("expected 2051") != std::string::npos);

    Bytes cut = idx_images();
    cut.resize(cut.size() - 10);
    const auto truncated = write_bytes("m-images-cut", cut);
    const auto tmsg = error_of([&] { load_mnist_idx(truncated, lbl); });
    CHECK(tmsg.find("byte") != std::string::npos);
    CHECK_THROWS_AS(load_mnist_idx(truncated, lbl), FormatError);

    const auto header_only = write_bytes("m-images-hdr", Bytes{0, 0, 8});
    CHECK_THROWS_AS(load_mnist_idx(header_only, lbl), FormatError);

    const auto three = write_bytes("m-labels-3", idx_labels(2049, {1, 2, 3}));
    CHECK(error_of([&] { load_mnist_idx(img, three); }).find("declares 2 images") != std::string::npos);

    const auto big_label = write_bytes("m-labels-big", idx_labels(2049, {1, 12}));
    CHECK(error_of([&] { load_mnist_idx(img, big_label); }).find("byte 9") != std::string::npos);
}

TEST_CASE("CIFAR: single all-white record labelled 2") {
    Bytes rec(3073, 255);
    rec[0] = 2;
    const auto ds = load_cifar10_bin({write_bytes("c-one", rec)});
    REQUIRE(ds.size() == 1);
    CHECK(ds.labels[0] == 2);
    CHECK(ds.class_names[2] == "bird");
    CHECK(ds.images[0].height == 32);
    CHECK(ds.images[0].channels == 3);
    for (double v : ds.images[0].pixels) REQUIRE(v == 1.0);
}

TEST_CASE("CIFAR: planar source becomes interleaved") {
    Bytes rec(3073);
    rec[0] = 9;
    for (int p = 0; p < 1024; ++p) {
        rec[1 + p] = static_cast<unsigned char>(p % 256);              // R
        rec[1 + 1024 + p] = static_cast<unsigned char>((p * 3) % 256);  // G
        rec[1 + 2048 + p] = static_cast<unsigned char>(255 - p % 256);  // B
    }
    Bytes two = rec;
    two.insert(two.end(), rec.begin(), rec.end());
    two[3073] = 0;
    const auto ds = load_cifar10_bin({write_bytes("c-planar", two)});
    REQUIRE(ds.size() == 2);
    CHECK(ds.labels == std::vector<int>{9, 0});
    for (int r = 0; r < 32; ++r)
        for (int c = 0; c < 32; ++c) {
            const int p = r * 32 + c;
            REQUIRE(ds.images[0].at(r, c, 0) == (p % 256) / 255.0);
            REQUIRE(ds.images[0].at(r, c, 1) == ((p * 3) % 256) / 255.0);
            REQUIRE(ds.images[0].at(r, c, 2) == (255 - p % 256) / 255.0);
        }
    CHECK(ds.images[1] == ds.images[0]);
}

TEST_CASE("CIFAR: empty, misaligned and bad-label files") {
    const auto empty = load_cifar10_bin({write_bytes("c-empty", {})});
    CHECK(empty.empty());
    CHECK(empty.class_names.size() == 10);

    const auto misaligned = write_bytes("c-short", Bytes(3072, 0));
    CHECK(error_of([&] { load_cifar10_bin({misaligned}); }).find("3073") != std::string::npos);
    CHECK_THROWS_AS(load_cifar10_bin({misaligned}), FormatError);

    Bytes rec(3073 * 2, 0);
    rec[3073] = 10;
    const auto bad = write_bytes("c-label", rec);
    CHECK(error_of([&] { load_cifar10_bin({bad}); }).find("3073") != std::string::npos);  // byte offset of record 2
    CHECK_THROWS_AS(load_cifar10_bin({bad}), FormatError);

    CHECK_THROWS(load_cifar10_bin({fixture_path("does-not-exist")}));
}

TEST_CASE("select_by_class: linear scan oracle and partition") {
    const auto ds = labels_only({0, 1, 1, 2}, 4);
    CHECK(select_by_class(ds, 1).indices == std::vector<std::size_t>{1, 2});
    CHECK(select_by_class(ds, 3).empty());
    CHECK_THROWS_AS(select_by_class(ds, 4), std::invalid_argument);
    CHECK_THROWS_AS(select_by_class(ds, -1), std::invalid_argument);

    Rng rng(4);
    std::vector<int> labels;
    for (int i = 0; i < 500; ++i) labels.push_back(static_cast<int>(rng.below(7)));
    const auto big = labels_only(labels, 7);
    std::vector<std::size_t> all;
    for (int k = 0; k < 7; ++k) {
        const auto s = select_by_class(big, k);
        for (std::size_t i : s.indices) REQUIRE(labels[i] == k);
        all.insert(all.end(), s.indices.begin(), s.indices.end());
    }
    std::sort(all.begin(), all.end());
    CHECK(all == all_indices(big).indices);
}

TEST_CASE("sample_slice: edge counts, determinism, errors") {
    const DatasetSlice s{{2, 5, 7, 11, 13}};
    CHECK(sample_slice(s, 5, 1) == s);
    CHECK(sample_slice(s, 0, 1).empty());
    const auto a = sample_slice(s, 3, 99);
    CHECK(a == sample_slice(s, 3, 99));
    CHECK(std::is_sorted(a.indices.begin(), a.indices.end()));
    for (auto i : a.indices) CHECK(s.contains(i));
    CHECK_THROWS_AS(sample_slice(s, 6, 1), std::invalid_argument);
}

TEST_CASE("sample_slice: one of ten is drawn uniformly") {
    DatasetSlice ten;
    for (std::size_t i = 0; i < 10; ++i) ten.indices.push_back(i);
    std::vector<int> hits(10, 0);
    for (std::uint64_t seed = 0; seed < 1000; ++seed) ++hits[sample_slice(ten, 1, seed).indices.at(0)];
    for (int h : hits) CHECK(std::abs(h / 1000.0 - 0.1) <= 0.03);
}

TEST_CASE("subset and first_per_class") {
    const auto ds = labels_only({0, 1, 0, 2, 1, 0}, 3);
    const auto first = first_per_class(ds, 2);
    CHECK(first.indices == std::vector<std::size_t>{0, 1, 2, 3, 4});
    const auto sub = subset(ds, first);
    CHECK(sub.labels == std::vector<int>{0, 1, 0, 2, 1});
    CHECK(sub.class_names == ds.class_names);
    CHECK_THROWS(subset(ds, DatasetSlice{{9}}));
}

TEST_CASE("dataset container: quantized round trip and failures") {
    Rng rng(8);
    LabeledDataset ds;
    for (int i = 0; i < 20; ++i) {
        Image img(4, 5, 3);
        for (double& v : img.pixels) v = rng.uniform();
        ds.images.push_back(img);
        ds.labels.push_back(i % 3);
    }
    ds.class_names = {"a", "b,c", "d"};
    ds.provenance = "unit test";
    const auto path = fixture_path("container.dsc");
    save_dataset(ds, path);
    const auto back = load_dataset(path);
    CHECK(back.labels == ds.labels);
    CHECK(back.class_names == ds.class_names);
    CHECK(back.provenance == ds.provenance);
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t k = 0; k < ds.images[i].pixels.size(); ++k)
            REQUIRE(std::abs(back.images[i].pixels[k] - ds.images[i].pixels[k]) <= 1.0 / 255.0);

    // 8-bit sources survive exactly
    save_dataset(back, path);
    CHECK(load_dataset(path) == back);

    LabeledDataset empty;
    empty.class_names = {"x"};
    save_dataset(empty, path);
    CHECK(load_dataset(path).empty());

    save_dataset(ds, path);
    std::ifstream in(path, std::ios::binary);
    Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    Bytes cut(bytes.begin(), bytes.begin() + static_cast<long>(bytes.size() / 2));
    CHECK_THROWS_AS(load_dataset(write_bytes("cut.dsc", cut)), FormatError);

    Bytes flipped = bytes;
    flipped[flipped.size() - 20] ^= 0x01;
    CHECK(error_of([&] { load_dataset(write_bytes("flip.dsc", flipped)); }).find("checksum") != std::string::npos);

    Bytes version = bytes;
    version[8] = 7;
    CHECK(error_of([&] { load_dataset(write_bytes("ver.dsc", version)); }).find("version") != std::string::npos);
}

TEST_CASE("bundled 10k MNIST sample loads and counts agree") {
    const std::string dir = std::string(DBA_TEST_DATA_DIR) + "/mnist10k/";
    const auto train = load_mnist_idx(dir + "train-images-idx3-ubyte", dir + "train-labels-idx1-ubyte");
    const auto test = load_mnist_idx(dir + "t10k-images-idx3-ubyte", dir + "t10k-labels-idx1-ubyte");
    CHECK(train.size() + test.size() == 10000);
    CHECK(test.size() == 2000);
    std::size_t threes = 0;
    for (int l : train.labels) threes += l == 3;
    CHECK(select_by_class(train, 3).size() == threes);
    for (int k = 0; k < 10; ++k) CHECK(select_by_class(test, k).size() == 200);
}

TEST_CASE("official MNIST train files hold 60000 items") {
    // needs a full copy; point DBA_MNIST_FULL_DIR at it
    const char* dir = std::getenv("DBA_MNIST_FULL_DIR");
    if (!dir || !*dir) {
        MESSAGE("DBA_MNIST_FULL_DIR not set; skipped");
        return;
    }
    const auto ds = load_mnist_idx(std::string(dir) + "/train-images-idx3-ubyte", std::string(dir) + "/train-labels-idx1-ubyte");
    CHECK(ds.size() == 60000);
    std::set<int> classes(ds.labels.begin(), ds.labels.end());
    CHECK(classes.size() == 10);
}
