#pragma once

// Experiment configuration, presets and the file-based pipeline stages used by
// the `dba` command-line tool.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dba/attack.hpp"
#include "dba/dataset.hpp"
#include "dba/defense.hpp"
#include "dba/evaluation.hpp"
#include "dba/model.hpp"

namespace dba {

enum class DatasetFamily { Mnist, Cifar10 };
std::string to_string(DatasetFamily family);  // "mnist" / "cifar10"
DatasetFamily parse_dataset_family(const std::string& text);

struct ExperimentConfig {
    std::string name = "custom";
    DatasetFamily dataset = DatasetFamily::Mnist;
    std::string data_dir;    // empty: $DBA_DATA_DIR
    std::size_t subset = 0;  // first N training items per class, 0 = all
    std::size_t test_subset = 0;

    int target_class = 3;
    LabelPolicy policy = LabelPolicy::DirtyLabel;
    PoisonQuantity quantity{std::nullopt, 0.1, std::nullopt, 0.0};
    AttackSpec attack = DbaSpec{};

    TrainConfig train;  // shuffle_seed is derived, not read
    RobustnessConfig robustness;  // seed is derived, not read

    bool defense = true;
    DefenseConfig defense_config;  // seed is derived, not read

    std::uint64_t master_seed = 1;
};

// Seeds are master_seed plus a fixed offset per consumer (wrapping mod 2^64):
//   +1 poison plan, +2 model init, +3 training shuffle, +4 robustness sweep,
//   +5 fine-tuning subset and shuffle.
inline constexpr std::uint64_t kPlanSeedOffset = 1;
inline constexpr std::uint64_t kInitSeedOffset = 2;
inline constexpr std::uint64_t kShuffleSeedOffset = 3;
inline constexpr std::uint64_t kRobustnessSeedOffset = 4;
inline constexpr std::uint64_t kDefenseSeedOffset = 5;

// Copy with every derived seed filled in from master_seed.
ExperimentConfig with_derived_seeds(const ExperimentConfig& cfg);

struct ImageShape {
    int height;
    int width;
    int channels;
};
ImageShape dataset_shape(DatasetFamily family);
int dataset_class_count(DatasetFamily family);

// Checks every invariant that can be checked without touching data.
void validate_experiment(const ExperimentConfig& cfg);

// Flat "key = value" text; '#' starts a comment. Unknown keys are errors.
// Keys: name dataset data_dir subset test_subset target_class policy
//   per_class_rate per_class_count count target_fraction attack
//   train.epochs train.batch_size train.learning_rate train.momentum train.head_only
//   robustness.rotation_range robustness.crop_pad robustness.brightness_range
//   robustness.compositions
//   defense defense.clean_fraction defense.epochs defense.batch_size
//   defense.learning_rate defense.momentum defense.head_only
//   master_seed
ExperimentConfig parse_experiment(const std::string& text, const std::string& source = "<config>");
std::string serialize_experiment(const ExperimentConfig& cfg);
ExperimentConfig load_experiment(const std::string& path);
void save_experiment(const ExperimentConfig& cfg, const std::string& path);

const std::vector<std::string>& preset_names();
ExperimentConfig preset(const std::string& name);

struct ExperimentData {
    LabeledDataset train;
    LabeledDataset test;
};

// Resolves the data directory (config, then $DBA_DATA_DIR) and loads the
// standard file names, applying subset / test_subset.
std::string resolve_data_dir(const ExperimentConfig& cfg);
ExperimentData load_experiment_data(const ExperimentConfig& cfg);

PoisonPlan plan_for(const ExperimentConfig& cfg, const LabeledDataset& train);

// Items the fine-tuning defense may draw from: training items that are not
// victims, with their original labels.
DatasetSlice defense_pool(const LabeledDataset& train, const PoisonPlan& plan);

// Exclusive claim on a run directory, released on destruction.
class RunLock {
public:
    explicit RunLock(const std::string& run_dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::string path_;
};

class LockedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Pipeline stages. Every stage reads and writes files inside run_dir:
//   poison:     config.txt, plan.txt, poisoned_train.dsc
//   train:      model.ckpt, epochs/epoch_NN.ckpt, train_log.csv
//   eval:       metrics.csv, summary.json (one row per epoch snapshot)
//   robustness: robustness.csv
//   defend:     defended.ckpt, defense.csv
// `data` may be passed in to skip reloading from disk.
void stage_poison(const ExperimentConfig& cfg, const std::string& run_dir, const ExperimentData* data = nullptr);
void stage_train(const std::string& run_dir);
void stage_eval(const std::string& run_dir, bool untrained = false, const ExperimentData* data = nullptr);
void stage_robustness(const std::string& run_dir, const ExperimentData* data = nullptr);
void stage_defend(const std::string& run_dir, const ExperimentData* data = nullptr);
void run_pipeline(const ExperimentConfig& cfg, const std::string& run_dir, const ExperimentData* data = nullptr);

std::string epoch_checkpoint_name(int epoch);  // "epochs/epoch_03.ckpt"

// Aggregates run directories into out_dir/report.csv, report.txt and
// robustness_series.csv. Returns one message per problem file; rows with
// missing data are still written, gaps shown as the missing marker.
inline constexpr const char* kMissingCell = "\xE2\x80\x94";
std::vector<std::string> write_report(const std::vector<std::string>& run_dirs, const std::string& out_dir);

// Image export for previews. Pixels are quantized to 8 bits.
void write_png(const Image& img, const std::string& path);
void write_pnm(const Image& img, const std::string& path);  // PGM for 1 channel, PPM for 3
// Writes original_K and triggered_K (png + pnm) for the first `count` items.
void write_preview(const LabeledDataset& ds, const AttackSpec& attack, std::size_t count, const std::string& out_dir);

}  // namespace dba
