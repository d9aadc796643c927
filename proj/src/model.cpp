#include "dba/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "dba/error.hpp"
#include "dba/rng.hpp"

namespace dba {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<Mat>;
using ConstMapMat = Eigen::Map<const Mat>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using ConstMapRow = Eigen::Map<const RowVec>;
using MapRow = Eigen::Map<RowVec>;

constexpr int kKernel = 3;
constexpr std::size_t kEvalChunk = 256;

// Derived layer geometry.
struct Geometry {
    int h1, w1, c1;  // conv1 input
    int h2, w2;      // after pool 1
    int h3, w3;      // after pool 2
    int flat;        // fc1 input width
    int classes;

    explicit Geometry(const ModelConfig& cfg)
        : h1(cfg.height), w1(cfg.width), c1(cfg.channels), h2(cfg.height / 2), w2(cfg.width / 2),
          h3(cfg.height / 4), w3(cfg.width / 4), flat(h3 * w3 * kConv2Filters), classes(cfg.class_count) {}
};

struct Params {
    ConstMapMat conv1_w, conv2_w, fc1_w, fc2_w;
    ConstMapRow conv1_b, conv2_b, fc1_b, fc2_b;
};

struct Grads {
    MapMat conv1_w, conv2_w, fc1_w, fc2_w;
    MapRow conv1_b, conv2_b, fc1_b, fc2_b;
};

template <typename M, typename R, typename Ptr>
auto bind(const Geometry& g, Ptr base) {
    const int k1 = kKernel * kKernel * g.c1;
    const int k2 = kKernel * kKernel * kConv1Filters;
    Ptr p = base;
    auto take = [&p](std::size_t n) {
        Ptr at = p;
        p += n;
        return at;
    };
    auto c1w = take(static_cast<std::size_t>(k1) * kConv1Filters);
    auto c1b = take(kConv1Filters);
    auto c2w = take(static_cast<std::size_t>(k2) * kConv2Filters);
    auto c2b = take(kConv2Filters);
    auto f1w = take(static_cast<std::size_t>(g.flat) * kHiddenUnits);
    auto f1b = take(kHiddenUnits);
    auto f2w = take(static_cast<std::size_t>(kHiddenUnits) * g.classes);
    auto f2b = take(g.classes);
    return std::make_tuple(M(c1w, k1, kConv1Filters), R(c1b, kConv1Filters), M(c2w, k2, kConv2Filters),
                           R(c2b, kConv2Filters), M(f1w, g.flat, kHiddenUnits), R(f1b, kHiddenUnits),
                           M(f2w, kHiddenUnits, g.classes), R(f2b, g.classes));
}

Params bind_params(const Geometry& g, const double* base) {
    auto [a, b, c, d, e, f, h, i] = bind<ConstMapMat, ConstMapRow>(g, base);
    return Params{a, c, e, h, b, d, f, i};
}

Grads bind_grads(const Geometry& g, double* base) {
    auto [a, b, c, d, e, f, h, i] = bind<MapMat, MapRow>(g, base);
    return Grads{a, c, e, h, b, d, f, i};
}

// Rows are (image, row, col) positions, columns are (ky, kx, channel) taps of a
// 3x3 same-padded window.
Mat im2col(const Mat& input, int batch, int h, int w, int c) {
    Mat cols = Mat::Zero(static_cast<Eigen::Index>(batch) * h * w, kKernel * kKernel * c);
    for (int b = 0; b < batch; ++b) {
        for (int r = 0; r < h; ++r) {
            for (int col = 0; col < w; ++col) {
                const Eigen::Index row = (static_cast<Eigen::Index>(b) * h + r) * w + col;
                double* dst = cols.row(row).data();
                for (int ky = 0; ky < kKernel; ++ky) {
                    const int sr = r + ky - 1;
                    if (sr < 0 || sr >= h) continue;
                    for (int kx = 0; kx < kKernel; ++kx) {
                        const int sc = col + kx - 1;
                        if (sc < 0 || sc >= w) continue;
                        const double* src = input.row((static_cast<Eigen::Index>(b) * h + sr) * w + sc).data();
                        std::copy(src, src + c, dst + (ky * kKernel + kx) * c);
                    }
                }
            }
        }
    }
    return cols;
}

// Adjoint of im2col: scatters column gradients back onto the input grid.
Mat col2im(const Mat& cols, int batch, int h, int w, int c) {
    Mat out = Mat::Zero(static_cast<Eigen::Index>(batch) * h * w, c);
    for (int b = 0; b < batch; ++b) {
        for (int r = 0; r < h; ++r) {
            for (int col = 0; col < w; ++col) {
                const Eigen::Index row = (static_cast<Eigen::Index>(b) * h + r) * w + col;
                const double* src = cols.row(row).data();
                for (int ky = 0; ky < kKernel; ++ky) {
                    const int sr = r + ky - 1;
                    if (sr < 0 || sr >= h) continue;
                    for (int kx = 0; kx < kKernel; ++kx) {
                        const int sc = col + kx - 1;
                        if (sc < 0 || sc >= w) continue;
                        double* dst = out.row((static_cast<Eigen::Index>(b) * h + sr) * w + sc).data();
                        const double* tap = src + (ky * kKernel + kx) * c;
                        for (int ch = 0; ch < c; ++ch) dst[ch] += tap[ch];
                    }
                }
            }
        }
    }
    return out;
}

// 2x2 max pool; `arg` records the flat input index that won each output.
Mat maxpool(const Mat& input, int batch, int h, int w, int c, std::vector<Eigen::Index>& arg) {
    const int oh = h / 2;
    const int ow = w / 2;
    Mat out(static_cast<Eigen::Index>(batch) * oh * ow, c);
    arg.resize(static_cast<std::size_t>(out.size()));
    const double* in = input.data();
    for (int b = 0; b < batch; ++b) {
        for (int r = 0; r < oh; ++r) {
            for (int col = 0; col < ow; ++col) {
                const Eigen::Index orow = (static_cast<Eigen::Index>(b) * oh + r) * ow + col;
                for (int ch = 0; ch < c; ++ch) {
                    Eigen::Index best = -1;
                    double best_v = -std::numeric_limits<double>::infinity();
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dx = 0; dx < 2; ++dx) {
                            const Eigen::Index idx =
                                ((static_cast<Eigen::Index>(b) * h + 2 * r + dy) * w + 2 * col + dx) * c + ch;
                            if (best < 0 || in[idx] > best_v) {
                                best = idx;
                                best_v = in[idx];
                            }
                        }
                    }
                    out(orow, ch) = best_v;
                    arg[static_cast<std::size_t>(orow * c + ch)] = best;
                }
            }
        }
    }
    return out;
}

Mat unpool(const Mat& grad, const std::vector<Eigen::Index>& arg, Eigen::Index rows, Eigen::Index cols) {
    Mat out = Mat::Zero(rows, cols);
    const double* g = grad.data();
    double* o = out.data();
    for (std::size_t k = 0; k < arg.size(); ++k) o[arg[k]] += g[k];
    return out;
}

// Forward products run image by image so each image's scores follow the same
// kernel path whatever the batch size; scores are then batch independent bit
// for bit.
template <typename Lhs>
Mat per_image_product(const Lhs& lhs, const ConstMapMat& rhs, int batch) {
    const Eigen::Index rows = lhs.rows() / batch;
    Mat out(lhs.rows(), rhs.cols());
    for (int b = 0; b < batch; ++b) {
        out.middleRows(b * rows, rows).noalias() = lhs.middleRows(b * rows, rows) * rhs;
    }
    return out;
}

struct Activations {
    int batch = 0;
    Mat cols1, z1, p1, cols2, z2, p2, z3, a3, logits;
    std::vector<Eigen::Index> arg1, arg2;
};

Activations run_forward(const ModelConfig& cfg, const Params& p, std::span<const Image> images) {
    const Geometry g(cfg);
    Activations act;
    act.batch = static_cast<int>(images.size());
    Mat x(static_cast<Eigen::Index>(act.batch) * g.h1 * g.w1, g.c1);
    for (int b = 0; b < act.batch; ++b) {
        std::copy(images[b].pixels.begin(), images[b].pixels.end(),
                  x.data() + static_cast<std::size_t>(b) * g.h1 * g.w1 * g.c1);
    }

    act.cols1 = im2col(x, act.batch, g.h1, g.w1, g.c1);
    act.z1 = per_image_product(act.cols1, p.conv1_w, act.batch);
    act.z1.rowwise() += p.conv1_b;
    const Mat a1 = act.z1.cwiseMax(0.0);
    act.p1 = maxpool(a1, act.batch, g.h1, g.w1, kConv1Filters, act.arg1);

    act.cols2 = im2col(act.p1, act.batch, g.h2, g.w2, kConv1Filters);
    act.z2 = per_image_product(act.cols2, p.conv2_w, act.batch);
    act.z2.rowwise() += p.conv2_b;
    const Mat a2 = act.z2.cwiseMax(0.0);
    act.p2 = maxpool(a2, act.batch, g.h2, g.w2, kConv2Filters, act.arg2);

    // (batch*h3*w3, 32) row-major is already (batch, h3*w3*32) per image.
    const ConstMapMat flat(act.p2.data(), act.batch, g.flat);
    act.z3 = per_image_product(flat, p.fc1_w, act.batch);
    act.z3.rowwise() += p.fc1_b;
    act.a3 = act.z3.cwiseMax(0.0);
    act.logits = per_image_product(act.a3, p.fc2_w, act.batch);
    act.logits.rowwise() += p.fc2_b;
    return act;
}

void check_batch(const Classifier& model, std::span<const Image> batch) {
    for (const auto& img : batch) require_input_shape(model, img);
}

// Per-row log-softmax cross-entropy; fills `probs` with the softmax.
double cross_entropy(const Mat& logits, std::span<const int> labels, Mat& probs) {
    probs.resize(logits.rows(), logits.cols());
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        double z = 0.0;
        for (Eigen::Index k = 0; k < logits.cols(); ++k) {
            probs(i, k) = std::exp(logits(i, k) - m);
            z += probs(i, k);
        }
        probs.row(i) /= z;
        total += (m + std::log(z)) - logits(i, labels[static_cast<std::size_t>(i)]);
    }
    return total / static_cast<double>(logits.rows());
}

void check_labels(const Classifier& model, std::span<const Image> batch, std::span<const int> labels) {
    if (batch.empty()) throw std::invalid_argument("loss needs a non-empty batch");
    if (batch.size() != labels.size()) {
        throw std::invalid_argument("batch has " + std::to_string(batch.size()) + " images but " +
                                    std::to_string(labels.size()) + " labels");
    }
    for (int label : labels) {
        if (label < 0 || label >= model.config().class_count) {
            throw std::invalid_argument("label " + std::to_string(label) + " outside [0," +
                                        std::to_string(model.config().class_count) + ")");
        }
    }
    check_batch(model, batch);
}

}  // namespace

void validate_config(const ModelConfig& config) {
    if (config.height <= 0 || config.width <= 0) throw std::invalid_argument("model input dims must be positive");
    if (config.height % 4 != 0 || config.width % 4 != 0) {
        throw std::invalid_argument("model input " + std::to_string(config.height) + "x" +
                                    std::to_string(config.width) + " is not divisible by 4 (two 2x2 pools)");
    }
    if (config.channels != 1 && config.channels != 3) throw std::invalid_argument("model channels must be 1 or 3");
    if (config.class_count < 2) throw std::invalid_argument("model needs at least two classes");
}

std::vector<ParamBlock> parameter_layout(const ModelConfig& config) {
    validate_config(config);
    const Geometry g(config);
    const std::size_t k1 = kKernel * kKernel * static_cast<std::size_t>(g.c1);
    const std::size_t k2 = kKernel * kKernel * static_cast<std::size_t>(kConv1Filters);
    std::vector<ParamBlock> blocks = {
        {"conv1.w", 0, k1 * kConv1Filters, k1},
        {"conv1.b", 0, kConv1Filters, k1},
        {"conv2.w", 0, k2 * kConv2Filters, k2},
        {"conv2.b", 0, kConv2Filters, k2},
        {"fc1.w", 0, static_cast<std::size_t>(g.flat) * kHiddenUnits, static_cast<std::size_t>(g.flat)},
        {"fc1.b", 0, kHiddenUnits, static_cast<std::size_t>(g.flat)},
        {"fc2.w", 0, static_cast<std::size_t>(kHiddenUnits) * g.classes, kHiddenUnits},
        {"fc2.b", 0, static_cast<std::size_t>(g.classes), kHiddenUnits},
    };
    std::size_t offset = 0;
    for (auto& b : blocks) {
        b.offset = offset;
        offset += b.size;
    }
    return blocks;
}

std::size_t parameter_count(const ModelConfig& config) {
    const auto blocks = parameter_layout(config);
    return blocks.back().offset + blocks.back().size;
}

Classifier::Classifier(ModelConfig config, std::vector<double> parameters)
    : config_(config), params_(std::move(parameters)) {
    const std::size_t expected = parameter_count(config_);
    if (params_.size() != expected) {
        throw std::invalid_argument("classifier expects " + std::to_string(expected) + " parameters, got " +
                                    std::to_string(params_.size()));
    }
}

Classifier init_classifier(const ModelConfig& config) {
    const auto blocks = parameter_layout(config);
    std::vector<double> params(blocks.back().offset + blocks.back().size, 0.0);
    Rng rng(config.init_seed);
    for (const auto& b : blocks) {
        if (b.name.ends_with(".b")) continue;
        const double limit = std::sqrt(6.0 / static_cast<double>(b.fan_in));
        for (std::size_t i = 0; i < b.size; ++i) params[b.offset + i] = rng.uniform(-limit, limit);
    }
    return Classifier(config, std::move(params));
}

void require_input_shape(const Classifier& model, const Image& img) {
    const auto& c = model.config();
    if (img.height != c.height || img.width != c.width || img.channels != c.channels) {
        throw std::invalid_argument("image shape " + img.shape_string() + " does not match model input " +
                                    std::to_string(c.height) + "x" + std::to_string(c.width) + "x" +
                                    std::to_string(c.channels));
    }
    if (img.pixels.size() != static_cast<std::size_t>(c.height) * c.width * c.channels) {
        throw std::invalid_argument("image pixel buffer length does not match its shape");
    }
}

std::vector<std::vector<double>> forward(const Classifier& model, std::span<const Image> batch) {
    check_batch(model, batch);
    std::vector<std::vector<double>> scores;
    scores.reserve(batch.size());
    if (batch.empty()) return scores;
    const Geometry g(model.config());
    const Params p = bind_params(g, model.parameters().data());
    const Activations act = run_forward(model.config(), p, batch);
    for (Eigen::Index i = 0; i < act.logits.rows(); ++i) {
        scores.emplace_back(act.logits.row(i).data(), act.logits.row(i).data() + act.logits.cols());
    }
    return scores;
}

std::vector<double> softmax(std::span<const double> scores) {
    std::vector<double> out(scores.size());
    if (scores.empty()) return out;
    const double m = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        out[k] = std::exp(scores[k] - m);
        z += out[k];
    }
    for (double& v : out) v /= z;
    return out;
}

int argmax(std::span<const double> scores) {
    int best = 0;
    for (std::size_t k = 1; k < scores.size(); ++k) {
        if (scores[k] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
    }
    return best;
}

std::vector<int> predict(const Classifier& model, std::span<const Image> images) {
    std::vector<int> out;
    out.reserve(images.size());
    for (std::size_t start = 0; start < images.size(); start += kEvalChunk) {
        const auto chunk = images.subspan(start, std::min(kEvalChunk, images.size() - start));
        for (const auto& s : forward(model, chunk)) out.push_back(argmax(s));
    }
    return out;
}

double batch_loss(const Classifier& model, std::span<const Image> batch, std::span<const int> labels) {
    check_labels(model, batch, labels);
    const Geometry g(model.config());
    const Activations act = run_forward(model.config(), bind_params(g, model.parameters().data()), batch);
    Mat probs;
    return cross_entropy(act.logits, labels, probs);
}

LossGradient loss_and_gradient(const Classifier& model, std::span<const Image> batch, std::span<const int> labels) {
    check_labels(model, batch, labels);
    const ModelConfig& cfg = model.config();
    const Geometry g(cfg);
    const Params p = bind_params(g, model.parameters().data());
    const Activations act = run_forward(cfg, p, batch);

    LossGradient out;
    out.gradient.assign(model.parameters().size(), 0.0);
    Grads d = bind_grads(g, out.gradient.data());

    Mat probs;
    out.loss = cross_entropy(act.logits, labels, probs);

    const double inv_batch = 1.0 / static_cast<double>(act.batch);
    for (Eigen::Index i = 0; i < act.logits.rows(); ++i) {
        const std::span<const double> row(act.logits.row(i).data(), static_cast<std::size_t>(act.logits.cols()));
        out.correct += argmax(row) == labels[static_cast<std::size_t>(i)];
    }

    Mat dlogits = probs;
    for (int i = 0; i < act.batch; ++i) dlogits(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    dlogits *= inv_batch;

    d.fc2_w.noalias() = act.a3.transpose() * dlogits;
    d.fc2_b = dlogits.colwise().sum();
    Mat dz3 = dlogits * p.fc2_w.transpose();
    dz3 = dz3.cwiseProduct((act.z3.array() > 0.0).cast<double>().matrix());

    const ConstMapMat flat(act.p2.data(), act.batch, g.flat);
    d.fc1_w.noalias() = flat.transpose() * dz3;
    d.fc1_b = dz3.colwise().sum();
    Mat dflat = dz3 * p.fc1_w.transpose();
    const Mat dp2 = ConstMapMat(dflat.data(), act.p2.rows(), act.p2.cols());

    Mat dz2 = unpool(dp2, act.arg2, act.z2.rows(), act.z2.cols());
    dz2 = dz2.cwiseProduct((act.z2.array() > 0.0).cast<double>().matrix());
    d.conv2_w.noalias() = act.cols2.transpose() * dz2;
    d.conv2_b = dz2.colwise().sum();
    const Mat dcols2 = dz2 * p.conv2_w.transpose();
    const Mat dp1 = col2im(dcols2, act.batch, g.h2, g.w2, kConv1Filters);

    Mat dz1 = unpool(dp1, act.arg1, act.z1.rows(), act.z1.cols());
    dz1 = dz1.cwiseProduct((act.z1.array() > 0.0).cast<double>().matrix());
    d.conv1_w.noalias() = act.cols1.transpose() * dz1;
    d.conv1_b = dz1.colwise().sum();
    return out;
}

void validate_train_config(const TrainConfig& tcfg) {
    if (tcfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (tcfg.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (!(tcfg.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (!(tcfg.momentum >= 0.0 && tcfg.momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0,1)");
}

TrainingError::TrainingError(int epoch_, int batch_, double loss_)
    : std::runtime_error([&] {
          std::ostringstream os;
          os << "non-finite training loss " << loss_ << " at epoch " << epoch_ << ", batch " << batch_;
          return os.str();
      }()),
      epoch(epoch_), batch(batch_), loss(loss_) {}

Classifier train(Classifier model, const LabeledDataset& ds, const TrainConfig& tcfg, const EpochHook& hook) {
    if (ds.empty()) throw std::invalid_argument("training dataset is empty");
    if (tcfg.epochs < 0) throw std::invalid_argument("epochs must be non-negative");
    if (tcfg.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (!(tcfg.learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be non-negative");
    if (!(tcfg.momentum >= 0.0 && tcfg.momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0,1)");
    validate_dataset(ds);
    check_batch(model, ds.images);
    for (int label : ds.labels) {
        if (label >= model.config().class_count) {
            throw std::invalid_argument("dataset label " + std::to_string(label) + " exceeds the model's class count");
        }
    }

    auto& params = model.parameters();
    std::size_t update_from = 0;
    if (tcfg.head_only) {
        for (const auto& b : parameter_layout(model.config())) {
            if (b.name == "fc2.w") update_from = b.offset;
        }
    }
    std::vector<double> velocity(params.size(), 0.0);
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<Image> batch;
    std::vector<int> labels;
    for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        Rng rng(mix_seed(tcfg.shuffle_seed, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        std::size_t correct = 0;
        int batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tcfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tcfg.batch_size));
            batch.clear();
            labels.clear();
            for (std::size_t k = start; k < end; ++k) {
                batch.push_back(ds.images[order[k]]);
                labels.push_back(ds.labels[order[k]]);
            }
            const LossGradient lg = loss_and_gradient(model, batch, labels);
            if (!std::isfinite(lg.loss)) throw TrainingError(epoch, batch_index, lg.loss);
            for (std::size_t i = update_from; i < params.size(); ++i) {
                velocity[i] = tcfg.momentum * velocity[i] - tcfg.learning_rate * lg.gradient[i];
                params[i] += velocity[i];
            }
            loss_sum += lg.loss * static_cast<double>(end - start);
            correct += lg.correct;
            seen += end - start;
            ++batch_index;
        }
        if (hook) {
            EpochReport report;
            report.epoch = epoch;
            report.mean_loss = loss_sum / static_cast<double>(seen);
            report.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
            hook(report, model);
        }
    }
    return model;
}

namespace {
constexpr char kCheckpointMagic[8] = {'D', 'B', 'A', 'C', 'K', 'P', 'T', '\0'};
}

void save_checkpoint(const Classifier& model, const std::string& path) {
    detail::ByteWriter w;
    w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
    w.u32(kCheckpointVersion);
    const auto& c = model.config();
    w.u32(static_cast<std::uint32_t>(c.height));
    w.u32(static_cast<std::uint32_t>(c.width));
    w.u32(static_cast<std::uint32_t>(c.channels));
    w.u32(static_cast<std::uint32_t>(c.class_count));
    w.u64(c.init_seed);
    w.u64(model.parameters().size());
    for (double v : model.parameters()) w.f64(v);
    w.seal();
    detail::write_file(path, w.buffer());
}

Classifier load_checkpoint(const std::string& path) {
    const auto bytes = detail::read_file(path);
    detail::ByteReader r(bytes, path);
    const std::uint8_t* magic = r.take(sizeof kCheckpointMagic, "magic");
    if (!std::equal(magic, magic + sizeof kCheckpointMagic, reinterpret_cast<const std::uint8_t*>(kCheckpointMagic))) {
        throw FormatError(path + ": not a checkpoint (bad magic at byte 0)");
    }
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion) {
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
    }
    r.verify_seal();
    ModelConfig c;
    c.height = static_cast<int>(r.u32("height"));
    c.width = static_cast<int>(r.u32("width"));
    c.channels = static_cast<int>(r.u32("channels"));
    c.class_count = static_cast<int>(r.u32("class count"));
    c.init_seed = r.u64("init seed");
    try {
        validate_config(c);
    } catch (const std::invalid_argument& e) {
        throw FormatError(path + ": invalid model config: " + e.what());
    }
    const std::uint64_t count = r.u64("parameter count");
    if (count != parameter_count(c)) {
        throw FormatError(path + ": header declares " + std::to_string(count) + " parameters, config implies " +
                          std::to_string(parameter_count(c)));
    }
    std::vector<double> params(count);
    for (auto& v : params) v = r.f64("parameters");
    if (r.remaining() != 4) throw FormatError(path + ": unexpected bytes after parameter block");
    for (double v : params) {
        if (!std::isfinite(v)) throw FormatError(path + ": checkpoint contains a non-finite parameter");
    }
    return Classifier(c, std::move(params));
}

}  // namespace dba
