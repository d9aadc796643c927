#include "dba/evaluation.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dba/rng.hpp"
#include "dba/text.hpp"

namespace dba {

void validate_robustness_config(const RobustnessConfig& rcfg) {
    if (!(rcfg.rotation_range >= 0.0)) throw std::invalid_argument("rotation range must be >= 0");
    if (rcfg.crop_pad < 0) throw std::invalid_argument("crop pad must be >= 0");
    if (!(rcfg.brightness_range >= 0.0 && rcfg.brightness_range <= 1.0)) {
        throw std::invalid_argument("brightness range must lie in [0,1]");
    }
    if (rcfg.compositions_per_item < 1) throw std::invalid_argument("compositions per item must be >= 1");
}

std::string describe(const RobustnessConfig& rcfg) {
    return "rot<=" + text::format_real(rcfg.rotation_range) + ";pad=" + std::to_string(rcfg.crop_pad) +
           ";bright<=" + text::format_real(rcfg.brightness_range) + ";k=" + std::to_string(rcfg.compositions_per_item);
}

double accuracy_of(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.empty()) throw std::invalid_argument("accuracy of an empty set is undefined");
    if (predictions.size() != labels.size()) throw std::invalid_argument("prediction/label count mismatch");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == labels[i];
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double hit_rate_of(const std::vector<int>& predictions, int target_class) {
    if (predictions.empty()) throw std::invalid_argument("attack success rate of an empty set is undefined");
    std::size_t hits = 0;
    for (int p : predictions) hits += p == target_class;
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double compute_acc(const Classifier& model, const LabeledDataset& clean_test) {
    if (clean_test.empty()) throw std::invalid_argument("cannot compute ACC on an empty dataset");
    return accuracy_of(predict(model, clean_test.images), clean_test.labels);
}

namespace {

void require_nontarget(const LabeledDataset& ds, int target_class) {
    if (ds.empty()) throw std::invalid_argument("cannot compute ASR on an empty triggered set");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[i] == target_class) {
            throw std::invalid_argument("triggered set item " + std::to_string(i) +
                                        " belongs to the target class; build it with trigger_test_set");
        }
    }
}

}  // namespace

double compute_asr(const Classifier& model, const LabeledDataset& triggered_nontarget_test, int target_class) {
    require_nontarget(triggered_nontarget_test, target_class);
    return hit_rate_of(predict(model, triggered_nontarget_test.images), target_class);
}

Augmentation sample_composition(const RobustnessConfig& rcfg, std::size_t item, int composition) {
    Rng rng(mix_seed(mix_seed(rcfg.seed, item), static_cast<std::uint64_t>(composition)));
    Compose comp;
    comp.steps.push_back({Rotate{rng.uniform(-rcfg.rotation_range, rcfg.rotation_range)}});
    comp.steps.push_back({CropPad{rcfg.crop_pad, static_cast<int>(rng.between(0, 2 * rcfg.crop_pad)),
                                  static_cast<int>(rng.between(0, 2 * rcfg.crop_pad))}});
    comp.steps.push_back({Brightness{rng.uniform(-rcfg.brightness_range, rcfg.brightness_range)}});
    return {comp};
}

std::vector<MetricsRecord> robustness_sweep(const std::vector<Classifier>& snapshots,
                                            const LabeledDataset& triggered_test, int target_class,
                                            const RobustnessConfig& rcfg, const LabeledDataset& clean_test) {
    if (snapshots.empty()) throw std::invalid_argument("robustness sweep needs at least one model snapshot");
    validate_robustness_config(rcfg);
    require_nontarget(triggered_test, target_class);

    // augmented inputs, one set per composition index
    std::vector<std::vector<Image>> views(static_cast<std::size_t>(rcfg.compositions_per_item));
    for (int k = 0; k < rcfg.compositions_per_item; ++k) {
        auto& view = views[static_cast<std::size_t>(k)];
        view.reserve(triggered_test.size());
        for (std::size_t i = 0; i < triggered_test.size(); ++i) {
            view.push_back(apply_augmentation(triggered_test.images[i], sample_composition(rcfg, i, k)));
        }
    }

    std::vector<MetricsRecord> records;
    for (std::size_t e = 0; e < snapshots.size(); ++e) {
        double asr_sum = 0.0;
        for (const auto& view : views) asr_sum += hit_rate_of(predict(snapshots[e], view), target_class);
        MetricsRecord rec;
        rec.epoch = static_cast<int>(e) + 1;
        rec.acc = compute_acc(snapshots[e], clean_test);
        rec.asr = asr_sum / static_cast<double>(views.size());
        rec.aug_desc = describe(rcfg);
        rec.seed = rcfg.seed;
        records.push_back(rec);
    }
    return records;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

// Splits one CSV record starting at `pos`; advances `pos` past the line end.
std::vector<std::string> csv_record(const std::string& content, std::size_t& pos) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    while (pos < content.size()) {
        const char c = content[pos++];
        if (quoted) {
            if (c == '"') {
                if (pos < content.size() && content[pos] == '"') {
                    cur += '"';
                    ++pos;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c == '\n') {
            break;
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (quoted) throw std::invalid_argument("unterminated quoted CSV field");
    fields.push_back(std::move(cur));
    return fields;
}

}  // namespace

std::string metrics_csv(const std::vector<MetricsRecord>& records) {
    std::ostringstream os;
    os << kMetricsHeader << "\n";
    for (const auto& r : records) {
        os << r.epoch << "," << csv_field(r.attack_name) << "," << csv_field(r.policy) << ","
           << text::format_real(r.acc) << "," << text::format_real(r.asr) << "," << csv_field(r.aug_desc) << ","
           << r.seed << "\n";
    }
    return os.str();
}

std::vector<MetricsRecord> parse_metrics_csv(const std::string& content, const std::string& source) {
    std::size_t pos = 0;
    std::size_t line = 1;
    const auto header = csv_record(content, pos);
    std::string joined;
    for (std::size_t i = 0; i < header.size(); ++i) joined += (i ? "," : "") + header[i];
    if (joined != kMetricsHeader) {
        throw std::invalid_argument(source + ": unexpected metrics header '" + joined + "'");
    }
    std::vector<MetricsRecord> records;
    while (pos < content.size()) {
        ++line;
        const auto f = csv_record(content, pos);
        if (f.size() == 1 && f[0].empty()) continue;
        if (f.size() != 7) {
            throw std::invalid_argument(source + ": line " + std::to_string(line) + " has " + std::to_string(f.size()) +
                                        " fields, expected 7");
        }
        MetricsRecord r;
        const std::string where = source + ":" + std::to_string(line);
        r.epoch = static_cast<int>(text::parse_int(f[0], where + " epoch"));
        r.attack_name = f[1];
        r.policy = f[2];
        r.acc = text::parse_real(f[3], where + " acc");
        r.asr = text::parse_real(f[4], where + " asr");
        r.aug_desc = f[5];
        r.seed = text::parse_u64(f[6], where + " seed");
        if (!(r.acc >= 0.0 && r.acc <= 1.0) || !(r.asr >= 0.0 && r.asr <= 1.0)) {
            throw std::invalid_argument(where + ": acc/asr outside [0,1]");
        }
        records.push_back(std::move(r));
    }
    return records;
}

void write_metrics(const std::vector<MetricsRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << metrics_csv(records);
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::vector<MetricsRecord> read_metrics(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_metrics_csv(ss.str(), path);
}

void write_metrics_summary(const std::vector<MetricsRecord>& records, const std::string& path) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : records) {
        arr.push_back({{"epoch", r.epoch},
                       {"attack", r.attack_name},
                       {"policy", r.policy},
                       {"acc", r.acc},
                       {"asr", r.asr},
                       {"aug_desc", r.aug_desc},
                       {"seed", r.seed}});
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << arr.dump(2) << "\n";
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace dba
