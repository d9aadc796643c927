#include "dba/defense.hpp"

#include <cmath>
#include <stdexcept>

#include "dba/rng.hpp"

namespace dba {

void validate_defense_config(const DefenseConfig& dcfg) {
    if (!(dcfg.clean_fraction > 0.0 && dcfg.clean_fraction <= 1.0)) {
        throw std::invalid_argument("clean fraction must lie in (0, 1]");
    }
    if (dcfg.epochs < 0) throw std::invalid_argument("defense epochs must be >= 0");
    if (dcfg.batch_size < 1) throw std::invalid_argument("defense batch size must be >= 1");
    if (!(dcfg.learning_rate > 0.0)) throw std::invalid_argument("defense learning rate must be > 0");
    if (!(dcfg.momentum >= 0.0 && dcfg.momentum < 1.0)) throw std::invalid_argument("defense momentum must lie in [0, 1)");
}

DefenseResult fine_tune_defense(const Classifier& model, const LabeledDataset& clean_pool, const DefenseConfig& dcfg,
                                const LabeledDataset& clean_test, const LabeledDataset& triggered_test,
                                int target_class) {
    validate_defense_config(dcfg);
    const auto take = static_cast<std::size_t>(std::floor(dcfg.clean_fraction * static_cast<double>(clean_pool.size())));
    if (take == 0) throw std::invalid_argument("clean subset for fine-tuning is empty");
    if (!clean_pool.images.empty()) require_input_shape(model, clean_pool.images.front());

    const DatasetSlice picked = sample_slice(all_indices(clean_pool), take, mix_seed(dcfg.seed, 0));
    const LabeledDataset tuning = subset(clean_pool, picked);

    MetricsRecord before;
    before.acc = compute_acc(model, clean_test);
    before.asr = compute_asr(model, triggered_test, target_class);
    before.aug_desc = "ft:before";
    before.seed = dcfg.seed;

    TrainConfig tcfg;
    tcfg.epochs = dcfg.epochs;
    tcfg.batch_size = dcfg.batch_size;
    tcfg.learning_rate = dcfg.learning_rate;
    tcfg.momentum = dcfg.momentum;
    tcfg.shuffle_seed = mix_seed(dcfg.seed, 1);
    tcfg.head_only = dcfg.head_only;
    Classifier tuned = train(model, tuning, tcfg);

    MetricsRecord after = before;
    after.aug_desc = "ft:after";
    if (!(tuned == model)) {
        after.acc = compute_acc(tuned, clean_test);
        after.asr = compute_asr(tuned, triggered_test, target_class);
    }
    return {std::move(tuned), before, after, picked};
}

}  // namespace dba
