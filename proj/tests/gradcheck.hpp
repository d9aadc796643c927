#pragma once

// Finite-difference gradient check shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dba/model.hpp"
#include "dba/rng.hpp"

namespace gradcheck {

// Central-difference oracle on the loss, independent of the backward pass.
inline double numeric_partial(dba::Classifier& model, const std::vector<dba::Image>& batch,
                              const std::vector<int>& labels, std::size_t index, double eps) {
    double& p = model.parameters()[index];
    const double saved = p;
    p = saved + eps;
    const double up = dba::batch_loss(model, batch, labels);
    p = saved - eps;
    const double down = dba::batch_loss(model, batch, labels);
    p = saved;
    return (up - down) / (2.0 * eps);
}

// ReLU and max-pool make the loss piecewise smooth. A coordinate whose
// +-eps probe crosses a kink shows mismatched one-sided slopes; such probes
// say nothing about the analytic gradient and are redrawn.
inline bool straddles_kink(dba::Classifier& model, const std::vector<dba::Image>& batch,
                           const std::vector<int>& labels, std::size_t index, double eps) {
    double& p = model.parameters()[index];
    const double saved = p;
    const double mid = dba::batch_loss(model, batch, labels);
    p = saved + eps;
    const double up = dba::batch_loss(model, batch, labels);
    p = saved - eps;
    const double down = dba::batch_loss(model, batch, labels);
    p = saved;
    const double fwd = (up - mid) / eps;
    const double bwd = (mid - down) / eps;
    return std::abs(fwd - bwd) > 1e-2 * std::max({std::abs(fwd), std::abs(bwd), 1e-6});
}

struct BlockResult {
    std::string name;
    std::size_t probes = 0;   // wanted
    std::size_t checked = 0;  // compared
    std::size_t redrawn = 0;  // skipped as kink-crossing
    double worst = 0.0;       // max relative error
};

// Up to `per_block` random coordinates per parameter block at step eps.
inline std::vector<BlockResult> run(dba::Classifier model, const std::vector<dba::Image>& batch,
                                    const std::vector<int>& labels, dba::Rng& rng, std::size_t per_block = 50,
                                    double eps = 1e-4) {
    const dba::LossGradient lg = dba::loss_and_gradient(model, batch, labels);
    std::vector<BlockResult> out;
    for (const auto& blk : dba::parameter_layout(model.config())) {
        BlockResult r;
        r.name = blk.name;
        r.probes = std::min<std::size_t>(per_block, blk.size);
        for (std::size_t k = 0; r.checked < r.probes && k < 10 * r.probes; ++k) {
            const std::size_t idx = blk.offset + (r.probes == blk.size ? k % blk.size : rng.below(blk.size));
            if (straddles_kink(model, batch, labels, idx, eps)) {
                ++r.redrawn;
                continue;
            }
            ++r.checked;
            const double numeric = numeric_partial(model, batch, labels, idx, eps);
            const double analytic = lg.gradient[idx];
            const double scale = std::max(std::abs(numeric), std::abs(analytic));
            const double rel = scale < 1e-8 ? 0.0 : std::abs(numeric - analytic) / scale;
            r.worst = std::max(r.worst, rel);
        }
        out.push_back(r);
    }
    return out;
}

// The setup used by both suites: 8x8x3 inputs, 4 classes, perturbed biases.
struct Setup {
    dba::Classifier model;
    std::vector<dba::Image> batch;
    std::vector<int> labels;
};

inline Setup small_setup(dba::Rng& rng) {
    Setup s{dba::init_classifier({8, 8, 3, 4, 17}), {}, {}};
    // non-zero biases so bias gradients are exercised away from the init point
    for (double& p : s.model.parameters()) p += rng.uniform(-0.05, 0.05);
    for (int i = 0; i < 3; ++i) {
        dba::Image img(8, 8, 3);
        for (double& v : img.pixels) v = rng.uniform();
        s.batch.push_back(img);
        s.labels.push_back(static_cast<int>(rng.below(4)));
    }
    return s;
}

}  // namespace gradcheck
