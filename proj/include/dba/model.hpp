#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dba/dataset.hpp"
#include "dba/image.hpp"

namespace dba {

// Fixed architecture:
//   Conv3x3(16, same) -> ReLU -> MaxPool2 -> Conv3x3(32, same) -> ReLU -> MaxPool2
//   -> Flatten -> Dense(128) -> ReLU -> Dense(class_count)
inline constexpr int kConv1Filters = 16;
inline constexpr int kConv2Filters = 32;
inline constexpr int kHiddenUnits = 128;

struct ModelConfig {
    int height = 28;
    int width = 28;
    int channels = 1;
    int class_count = 10;
    std::uint64_t init_seed = 0;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void validate_config(const ModelConfig& config);

// Named contiguous block of the flat parameter vector.
struct ParamBlock {
    std::string name;  // conv1.w, conv1.b, conv2.w, conv2.b, fc1.w, fc1.b, fc2.w, fc2.b
    std::size_t offset = 0;
    std::size_t size = 0;
    std::size_t fan_in = 0;
};

std::vector<ParamBlock> parameter_layout(const ModelConfig& config);
std::size_t parameter_count(const ModelConfig& config);

class Classifier {
public:
    Classifier(ModelConfig config, std::vector<double> parameters);

    const ModelConfig& config() const { return config_; }
    const std::vector<double>& parameters() const { return params_; }
    std::vector<double>& parameters() { return params_; }

    friend bool operator==(const Classifier&, const Classifier&) = default;

private:
    ModelConfig config_;
    std::vector<double> params_;
};

// He-scaled uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
Classifier init_classifier(const ModelConfig& config);

void require_input_shape(const Classifier& model, const Image& img);

// Raw class scores (logits), one vector per image.
std::vector<std::vector<double>> forward(const Classifier& model, std::span<const Image> batch);

std::vector<double> softmax(std::span<const double> scores);

// argmax with ties going to the lowest class index.
int argmax(std::span<const double> scores);

// Predicted class per image, evaluated in chunks.
std::vector<int> predict(const Classifier& model, std::span<const Image> images);

struct LossGradient {
    double loss = 0.0;
    std::vector<double> gradient;
    std::size_t correct = 0;  // batch items whose argmax matched the label
};

// Mean softmax cross-entropy over the batch and its gradient with respect to
// every parameter.
LossGradient loss_and_gradient(const Classifier& model, std::span<const Image> batch, std::span<const int> labels);

double batch_loss(const Classifier& model, std::span<const Image> batch, std::span<const int> labels);

struct TrainConfig {
    int epochs = 5;
    int batch_size = 64;
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::uint64_t shuffle_seed = 0;
    // Restrict updates to the final dense layer.
    bool head_only = false;
};

void validate_train_config(const TrainConfig& tcfg);

struct EpochReport {
    int epoch = 0;  // 1-based
    double mean_loss = 0.0;
    // Running accuracy: each batch is scored just before its update.
    double train_accuracy = 0.0;
};

using EpochHook = std::function<void(const EpochReport&, const Classifier&)>;

class TrainingError : public std::runtime_error {
public:
    TrainingError(int epoch, int batch, double loss);
    int epoch;
    int batch;
    double loss;
};

// Shuffled mini-batch SGD with momentum. `epochs` may be 0 for fine-tuning
// callers that want a no-op; validate_train_config enforces >= 1 for
// ordinary training.
Classifier train(Classifier model, const LabeledDataset& ds, const TrainConfig& tcfg, const EpochHook& hook = {});

// Binary checkpoint, little-endian:
//   "DBACKPT\0" magic, u32 version, u32 height, width, channels, class_count,
//   u64 init_seed, u64 parameter count, f64 parameters, u32 crc32 trailer.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(const Classifier& model, const std::string& path);
Classifier load_checkpoint(const std::string& path);

}  // namespace dba
