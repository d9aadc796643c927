#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dba/image.hpp"

namespace dba {

// Ordered (image, label) pairs sharing one image shape.
struct LabeledDataset {
    std::vector<Image> images;
    std::vector<int> labels;
    std::vector<std::string> class_names;
    std::string provenance;

    std::size_t size() const { return images.size(); }
    bool empty() const { return images.empty(); }
    int class_count() const { return static_cast<int>(class_names.size()); }

    friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

// Checks the structural invariants: equal lengths, labels in range, one shape.
void validate_dataset(const LabeledDataset& ds);

// Sorted, unique indices into a parent dataset.
struct DatasetSlice {
    std::vector<std::size_t> indices;

    std::size_t size() const { return indices.size(); }
    bool empty() const { return indices.empty(); }
    bool contains(std::size_t index) const;

    friend bool operator==(const DatasetSlice&, const DatasetSlice&) = default;
};

const std::vector<std::string>& mnist_class_names();
const std::vector<std::string>& cifar10_class_names();

// MNIST IDX pair: images magic 2051, labels magic 2049, big-endian headers.
LabeledDataset load_mnist_idx(const std::string& image_path, const std::string& label_path);

// Writes an IDX pair (8-bit pixels). Used for fixtures and exporting subsets.
void write_mnist_idx(const LabeledDataset& ds, const std::string& image_path, const std::string& label_path);

// CIFAR-10 binary batches: 3073-byte records, label byte then R, G, B planes.
LabeledDataset load_cifar10_bin(const std::vector<std::string>& batch_paths);

DatasetSlice select_by_class(const LabeledDataset& ds, int class_index);
DatasetSlice all_indices(const LabeledDataset& ds);

// Uniform draw without replacement; the result is sorted.
DatasetSlice sample_slice(const DatasetSlice& slice, std::size_t count, std::uint64_t seed);

// New dataset holding the sliced items in slice order.
LabeledDataset subset(const LabeledDataset& ds, const DatasetSlice& slice);

// First `per_class` items of every class, original order preserved.
DatasetSlice first_per_class(const LabeledDataset& ds, std::size_t per_class);

// Versioned container with 8-bit quantized pixels and a crc32 trailer.
//
//   "DBADSET\0"  magic (8 bytes)
//   u32          version (1)
//   u64          item count
//   u32 x 3      height, width, channels
//   u32          class count, then per class: u32 length + UTF-8 name
//   u32 length + provenance text
//   u32 x count  labels
//   u8 x count*H*W*C pixels, round(value * 255)
//   u32          crc32 of all preceding bytes
//
// Integers are little-endian.
inline constexpr std::uint32_t kDatasetVersion = 1;
void save_dataset(const LabeledDataset& ds, const std::string& path);
LabeledDataset load_dataset(const std::string& path);

}  // namespace dba
