#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dba/dataset.hpp"
#include "dba/model.hpp"

namespace dba {

struct MetricsRecord {
    int epoch = 0;
    double acc = 0.0;
    double asr = 0.0;
    // describe() of the augmentation family, or a defense tag such as
    // "ft:before"; empty for plain evaluation.
    std::string aug_desc;
    std::string attack_name;
    std::string policy;
    std::uint64_t seed = 0;

    friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

struct RobustnessConfig {
    double rotation_range = 15.0;  // degrees, symmetric
    int crop_pad = 4;
    double brightness_range = 0.2;
    int compositions_per_item = 1;
    std::uint64_t seed = 0;
};

void validate_robustness_config(const RobustnessConfig& rcfg);

// Descriptor of the sampling family, e.g. "rot<=15;pad=4;bright<=0.2;k=1".
std::string describe(const RobustnessConfig& rcfg);

// Fraction of argmax predictions equal to the true labels.
double compute_acc(const Classifier& model, const LabeledDataset& clean_test);

// Fraction of triggered, non-target items predicted as target_class. The
// input must come from trigger_test_set (no item carries the target label).
double compute_asr(const Classifier& model, const LabeledDataset& triggered_nontarget_test, int target_class);

// Both metrics from precomputed predictions; used by the stub-model tests and
// the sweep.
double accuracy_of(const std::vector<int>& predictions, const std::vector<int>& labels);
double hit_rate_of(const std::vector<int>& predictions, int target_class);

// Random composition for one (item, composition) slot:
// Rotate(U[-r, r]) then CropPad(pad, U{0..2pad}, U{0..2pad}) then Brightness(U[-b, b]).
Augmentation sample_composition(const RobustnessConfig& rcfg, std::size_t item, int composition);

// For each epoch snapshot, ASR over augmented triggered inputs averaged over
// compositions. Compositions depend only on (seed, item, composition), so every
// epoch sees the same perturbed inputs. The ACC column is the snapshot's
// un-augmented accuracy on `clean_test`. Record i carries epoch i + 1.
std::vector<MetricsRecord> robustness_sweep(const std::vector<Classifier>& snapshots,
                                            const LabeledDataset& triggered_test, int target_class,
                                            const RobustnessConfig& rcfg, const LabeledDataset& clean_test);

// CSV with the exact header `epoch,attack,policy,acc,asr,aug_desc,seed`.
inline constexpr const char* kMetricsHeader = "epoch,attack,policy,acc,asr,aug_desc,seed";
void write_metrics(const std::vector<MetricsRecord>& records, const std::string& path);
std::vector<MetricsRecord> read_metrics(const std::string& path);
std::string metrics_csv(const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> parse_metrics_csv(const std::string& content, const std::string& source = "<csv>");

// JSON array of {epoch, attack, policy, acc, asr, aug_desc, seed} objects.
void write_metrics_summary(const std::vector<MetricsRecord>& records, const std::string& path);

}  // namespace dba
