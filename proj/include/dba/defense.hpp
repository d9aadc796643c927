#pragma once

#include <cstdint>

#include "dba/dataset.hpp"
#include "dba/evaluation.hpp"
#include "dba/model.hpp"

namespace dba {

// Fine-tuning: keep training a (possibly backdoored) model on a small clean set.
struct DefenseConfig {
    double clean_fraction = 0.1;  // of clean_pool, in (0, 1]
    int epochs = 5;
    int batch_size = 64;
    double learning_rate = 0.001;  // a tenth of the training default
    double momentum = 0.9;
    std::uint64_t seed = 0;
    bool head_only = false;
};

void validate_defense_config(const DefenseConfig& dcfg);

struct DefenseResult {
    Classifier model;
    MetricsRecord before;  // aug_desc "ft:before"
    MetricsRecord after;   // aug_desc "ft:after"
    DatasetSlice tuning_indices;  // into clean_pool
};

// Draws floor(clean_fraction * |clean_pool|) items with the seed, tunes for
// `epochs`, and evaluates before and after on the supplied test sets. The
// records carry the model's epoch count as 0; callers fill attack/policy.
DefenseResult fine_tune_defense(const Classifier& model, const LabeledDataset& clean_pool, const DefenseConfig& dcfg,
                                const LabeledDataset& clean_test, const LabeledDataset& triggered_test,
                                int target_class);

}  // namespace dba
