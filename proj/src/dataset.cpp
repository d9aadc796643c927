#include "dba/dataset.hpp"

#include <algorithm>
#include <stdexcept>

#include "binary_io.hpp"
#include "dba/error.hpp"
#include "dba/rng.hpp"

namespace dba {

using detail::ByteReader;
using detail::ByteWriter;

namespace {

constexpr std::uint32_t kIdxImageMagic = 2051;
constexpr std::uint32_t kIdxLabelMagic = 2049;
constexpr std::size_t kCifarSide = 32;
constexpr std::size_t kCifarPlane = kCifarSide * kCifarSide;
constexpr std::size_t kCifarRecord = 1 + 3 * kCifarPlane;
constexpr char kDatasetMagic[8] = {'D', 'B', 'A', 'D', 'S', 'E', 'T', '\0'};

std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::clamp(static_cast<int>(v * 255.0 + 0.5), 0, 255));
}

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

void validate_dataset(const LabeledDataset& ds) {
    if (ds.images.size() != ds.labels.size()) {
        throw std::invalid_argument("dataset has " + std::to_string(ds.images.size()) + " images but " +
                                    std::to_string(ds.labels.size()) + " labels");
    }
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[i] < 0 || ds.labels[i] >= ds.class_count()) {
            throw std::invalid_argument("label " + std::to_string(ds.labels[i]) + " at index " + std::to_string(i) +
                                        " is outside the " + std::to_string(ds.class_count()) + "-class table");
        }
        if (!ds.images[i].same_shape(ds.images[0])) {
            throw std::invalid_argument("image " + std::to_string(i) + " has shape " + ds.images[i].shape_string() +
                                        ", expected " + ds.images[0].shape_string());
        }
    }
}

bool DatasetSlice::contains(std::size_t index) const {
    return std::binary_search(indices.begin(), indices.end(), index);
}

const std::vector<std::string>& mnist_class_names() {
    static const std::vector<std::string> names = {"0", "1", "2", "3", "4", "5", "6", "7", "8", "9"};
    return names;
}

const std::vector<std::string>& cifar10_class_names() {
    static const std::vector<std::string> names = {"airplane", "automobile", "bird",  "cat",  "deer",
                                                   "dog",      "frog",       "horse", "ship", "truck"};
    return names;
}

LabeledDataset load_mnist_idx(const std::string& image_path, const std::string& label_path) {
    const auto image_bytes = detail::read_file(image_path);
    const auto label_bytes = detail::read_file(label_path);
    ByteReader images(image_bytes, image_path);
    ByteReader labels(label_bytes, label_path);

    const std::uint32_t image_magic = images.u32_be("image magic");
    if (image_magic != kIdxImageMagic) {
        throw FormatError(image_path + ": bad magic " + std::to_string(image_magic) + " at byte 0, expected " +
                          std::to_string(kIdxImageMagic));
    }
    const std::uint32_t label_magic = labels.u32_be("label magic");
    if (label_magic != kIdxLabelMagic) {
        throw FormatError(label_path + ": bad magic " + std::to_string(label_magic) + " at byte 0, expected " +
                          std::to_string(kIdxLabelMagic));
    }
    const std::uint32_t count = images.u32_be("image count");
    const std::uint32_t rows = images.u32_be("row count");
    const std::uint32_t cols = images.u32_be("column count");
    const std::uint32_t label_count = labels.u32_be("label count");
    if (count != label_count) {
        throw FormatError(image_path + " declares " + std::to_string(count) + " images but " + label_path +
                          " declares " + std::to_string(label_count) + " labels (byte 4)");
    }
    if (rows == 0 || cols == 0) throw FormatError(image_path + ": zero image dimension in header at byte 8");

    const std::size_t plane = static_cast<std::size_t>(rows) * cols;
    images.need(plane * count, "pixel data");
    labels.need(count, "label data");

    LabeledDataset ds;
    ds.class_names = mnist_class_names();
    ds.provenance = "mnist-idx:" + image_path;
    ds.images.reserve(count);
    ds.labels.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint8_t* px = images.take(plane, "pixel data");
        std::vector<double> values(plane);
        for (std::size_t k = 0; k < plane; ++k) values[k] = px[k] / 255.0;
        ds.images.emplace_back(static_cast<int>(rows), static_cast<int>(cols), 1, std::move(values));
        const std::size_t at = labels.offset();
        const std::uint8_t label = labels.u8("label");
        if (label >= ds.class_names.size()) {
            throw FormatError(label_path + ": label " + std::to_string(label) + " at byte " + std::to_string(at) +
                              " exceeds class range");
        }
        ds.labels.push_back(label);
    }
    return ds;
}

void write_mnist_idx(const LabeledDataset& ds, const std::string& image_path, const std::string& label_path) {
    validate_dataset(ds);
    if (!ds.empty() && ds.images[0].channels != 1) {
        throw std::invalid_argument("IDX export supports single-channel images only");
    }
    const std::uint32_t rows = ds.empty() ? 28 : static_cast<std::uint32_t>(ds.images[0].height);
    const std::uint32_t cols = ds.empty() ? 28 : static_cast<std::uint32_t>(ds.images[0].width);
    std::vector<std::uint8_t> img_out;
    put_u32_be(img_out, kIdxImageMagic);
    put_u32_be(img_out, static_cast<std::uint32_t>(ds.size()));
    put_u32_be(img_out, rows);
    put_u32_be(img_out, cols);
    for (const auto& img : ds.images) {
        for (double v : img.pixels) img_out.push_back(quantize(v));
    }
    std::vector<std::uint8_t> lbl_out;
    put_u32_be(lbl_out, kIdxLabelMagic);
    put_u32_be(lbl_out, static_cast<std::uint32_t>(ds.size()));
    for (int label : ds.labels) lbl_out.push_back(static_cast<std::uint8_t>(label));
    detail::write_file(image_path, img_out);
    detail::write_file(label_path, lbl_out);
}

LabeledDataset load_cifar10_bin(const std::vector<std::string>& batch_paths) {
    LabeledDataset ds;
    ds.class_names = cifar10_class_names();
    ds.provenance = "cifar10-bin:";
    for (const auto& path : batch_paths) {
        const auto bytes = detail::read_file(path);
        if (bytes.size() % kCifarRecord != 0) {
            throw FormatError(path + ": length " + std::to_string(bytes.size()) + " is not a multiple of " +
                              std::to_string(kCifarRecord) + "; trailing partial record starts at byte " +
                              std::to_string(bytes.size() - bytes.size() % kCifarRecord));
        }
        ds.provenance += path + ";";
        const std::size_t records = bytes.size() / kCifarRecord;
        for (std::size_t r = 0; r < records; ++r) {
            const std::uint8_t* rec = bytes.data() + r * kCifarRecord;
            if (rec[0] > 9) {
                throw FormatError(path + ": label byte " + std::to_string(rec[0]) + " at byte " +
                                  std::to_string(r * kCifarRecord) + " exceeds 9");
            }
            Image img(kCifarSide, kCifarSide, 3);
            // planar RGB -> interleaved
            for (std::size_t p = 0; p < kCifarPlane; ++p) {
                for (std::size_t ch = 0; ch < 3; ++ch) {
                    img.pixels[p * 3 + ch] = rec[1 + ch * kCifarPlane + p] / 255.0;
                }
            }
            ds.images.push_back(std::move(img));
            ds.labels.push_back(rec[0]);
        }
    }
    return ds;
}

DatasetSlice select_by_class(const LabeledDataset& ds, int class_index) {
    if (class_index < 0 || class_index >= ds.class_count()) {
        throw std::invalid_argument("class index " + std::to_string(class_index) + " outside [0," +
                                    std::to_string(ds.class_count()) + ")");
    }
    DatasetSlice slice;
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        if (ds.labels[i] == class_index) slice.indices.push_back(i);
    }
    return slice;
}

DatasetSlice all_indices(const LabeledDataset& ds) {
    DatasetSlice slice;
    slice.indices.resize(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) slice.indices[i] = i;
    return slice;
}

DatasetSlice sample_slice(const DatasetSlice& slice, std::size_t count, std::uint64_t seed) {
    if (count > slice.size()) {
        throw std::invalid_argument("cannot sample " + std::to_string(count) + " items from a slice of " +
                                    std::to_string(slice.size()));
    }
    // partial Fisher-Yates over a copy of the pool
    std::vector<std::size_t> pool = slice.indices;
    Rng rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    std::sort(pool.begin(), pool.end());
    return DatasetSlice{std::move(pool)};
}

LabeledDataset subset(const LabeledDataset& ds, const DatasetSlice& slice) {
    LabeledDataset out;
    out.class_names = ds.class_names;
    out.provenance = ds.provenance;
    out.images.reserve(slice.size());
    out.labels.reserve(slice.size());
    for (std::size_t idx : slice.indices) {
        if (idx >= ds.size()) {
            throw std::out_of_range("slice index " + std::to_string(idx) + " beyond dataset of " +
                                    std::to_string(ds.size()));
        }
        out.images.push_back(ds.images[idx]);
        out.labels.push_back(ds.labels[idx]);
    }
    return out;
}

DatasetSlice first_per_class(const LabeledDataset& ds, std::size_t per_class) {
    std::vector<std::size_t> taken(ds.class_names.size(), 0);
    DatasetSlice slice;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto label = static_cast<std::size_t>(ds.labels[i]);
        if (taken[label] < per_class) {
            ++taken[label];
            slice.indices.push_back(i);
        }
    }
    return slice;
}

void save_dataset(const LabeledDataset& ds, const std::string& path) {
    validate_dataset(ds);
    ByteWriter w;
    w.bytes(kDatasetMagic, sizeof kDatasetMagic);
    w.u32(kDatasetVersion);
    w.u64(ds.size());
    const Image* first = ds.empty() ? nullptr : &ds.images[0];
    w.u32(first ? first->height : 0);
    w.u32(first ? first->width : 0);
    w.u32(first ? first->channels : 0);
    w.u32(static_cast<std::uint32_t>(ds.class_names.size()));
    for (const auto& name : ds.class_names) w.str(name);
    w.str(ds.provenance);
    for (int label : ds.labels) w.u32(static_cast<std::uint32_t>(label));
    auto& buf = w.buffer();
    for (const auto& img : ds.images) {
        for (double v : img.pixels) buf.push_back(quantize(v));
    }
    w.seal();
    detail::write_file(path, w.buffer());
}

LabeledDataset load_dataset(const std::string& path) {
    const auto bytes = detail::read_file(path);
    ByteReader r(bytes, path);
    const std::uint8_t* magic = r.take(sizeof kDatasetMagic, "magic");
    if (!std::equal(magic, magic + sizeof kDatasetMagic, reinterpret_cast<const std::uint8_t*>(kDatasetMagic))) {
        throw FormatError(path + ": not a dataset container (bad magic at byte 0)");
    }
    const std::uint32_t version = r.u32("version");
    if (version != kDatasetVersion) {
        throw FormatError(path + ": unsupported dataset version " + std::to_string(version) + " (expected " +
                          std::to_string(kDatasetVersion) + ")");
    }
    r.verify_seal();

    LabeledDataset ds;
    const std::uint64_t count = r.u64("item count");
    const int h = static_cast<int>(r.u32("height"));
    const int w = static_cast<int>(r.u32("width"));
    const int c = static_cast<int>(r.u32("channels"));
    const std::uint32_t classes = r.u32("class count");
    for (std::uint32_t k = 0; k < classes; ++k) ds.class_names.push_back(r.str("class name"));
    ds.provenance = r.str("provenance");
    for (std::uint64_t i = 0; i < count; ++i) ds.labels.push_back(static_cast<int>(r.u32("label")));
    const std::size_t plane = static_cast<std::size_t>(h) * w * c;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint8_t* px = r.take(plane, "pixels");
        std::vector<double> values(plane);
        for (std::size_t k = 0; k < plane; ++k) values[k] = px[k] / 255.0;
        ds.images.emplace_back(h, w, c, std::move(values));
    }
    if (r.remaining() != 4) {
        throw FormatError(path + ": pixel block ends at byte " + std::to_string(r.offset()) + " but the checksum starts at byte " +
                          std::to_string(bytes.size() - 4));
    }
    validate_dataset(ds);
    return ds;
}

}  // namespace dba
