#include "dba/experiment.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "dba/text.hpp"

namespace fs = std::filesystem;

namespace dba {

std::string to_string(DatasetFamily family) { return family == DatasetFamily::Mnist ? "mnist" : "cifar10"; }

DatasetFamily parse_dataset_family(const std::string& text) {
    if (text == "mnist") return DatasetFamily::Mnist;
    if (text == "cifar10" || text == "cifar") return DatasetFamily::Cifar10;
    throw std::invalid_argument("unknown dataset '" + text + "' (expected mnist|cifar10)");
}

ImageShape dataset_shape(DatasetFamily family) {
    return family == DatasetFamily::Mnist ? ImageShape{28, 28, 1} : ImageShape{32, 32, 3};
}

int dataset_class_count(DatasetFamily) { return 10; }

ExperimentConfig with_derived_seeds(const ExperimentConfig& cfg) {
    ExperimentConfig out = cfg;
    out.train.shuffle_seed = cfg.master_seed + kShuffleSeedOffset;
    out.robustness.seed = cfg.master_seed + kRobustnessSeedOffset;
    out.defense_config.seed = cfg.master_seed + kDefenseSeedOffset;
    return out;
}

void validate_experiment(const ExperimentConfig& cfg) {
    const auto shape = dataset_shape(cfg.dataset);
    if (cfg.target_class < 0 || cfg.target_class >= dataset_class_count(cfg.dataset)) {
        throw std::invalid_argument("target_class " + std::to_string(cfg.target_class) + " outside [0," +
                                    std::to_string(dataset_class_count(cfg.dataset)) + ")");
    }
    if (cfg.policy == LabelPolicy::DirtyLabel) {
        if (!cfg.quantity.per_class_count && !(cfg.quantity.per_class_rate >= 0.0 && cfg.quantity.per_class_rate <= 1.0)) {
            throw std::invalid_argument("per_class_rate must lie in [0,1]");
        }
    } else if (!cfg.quantity.count && !(cfg.quantity.target_fraction >= 0.0 && cfg.quantity.target_fraction <= 1.0)) {
        throw std::invalid_argument("target_fraction must lie in [0,1]");
    }
    validate_attack(cfg.attack, shape.height, shape.width, shape.channels);
    validate_config(ModelConfig{shape.height, shape.width, shape.channels, dataset_class_count(cfg.dataset), 0});
    validate_train_config(cfg.train);
    validate_robustness_config(cfg.robustness);
    validate_defense_config(cfg.defense_config);
}

// --- config text ------------------------------------------------------------

namespace {

std::string optional_count(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : ""; }

}  // namespace

std::string serialize_experiment(const ExperimentConfig& cfg) {
    std::ostringstream os;
    auto real = [](double v) { return text::format_real(v); };
    auto flag = [](bool b) { return b ? "true" : "false"; };
    os << "name = " << cfg.name << "\n";
    os << "dataset = " << to_string(cfg.dataset) << "\n";
    os << "data_dir = " << cfg.data_dir << "\n";
    os << "subset = " << cfg.subset << "\n";
    os << "test_subset = " << cfg.test_subset << "\n";
    os << "target_class = " << cfg.target_class << "\n";
    os << "policy = " << to_string(cfg.policy) << "\n";
    os << "per_class_rate = " << real(cfg.quantity.per_class_rate) << "\n";
    os << "per_class_count = " << optional_count(cfg.quantity.per_class_count) << "\n";
    os << "count = " << optional_count(cfg.quantity.count) << "\n";
    os << "target_fraction = " << real(cfg.quantity.target_fraction) << "\n";
    os << "attack = " << serialize_attack(cfg.attack) << "\n";
    os << "train.epochs = " << cfg.train.epochs << "\n";
    os << "train.batch_size = " << cfg.train.batch_size << "\n";
    os << "train.learning_rate = " << real(cfg.train.learning_rate) << "\n";
    os << "train.momentum = " << real(cfg.train.momentum) << "\n";
    os << "train.head_only = " << flag(cfg.train.head_only) << "\n";
    os << "robustness.rotation_range = " << real(cfg.robustness.rotation_range) << "\n";
    os << "robustness.crop_pad = " << cfg.robustness.crop_pad << "\n";
    os << "robustness.brightness_range = " << real(cfg.robustness.brightness_range) << "\n";
    os << "robustness.compositions = " << cfg.robustness.compositions_per_item << "\n";
    os << "defense = " << flag(cfg.defense) << "\n";
    os << "defense.clean_fraction = " << real(cfg.defense_config.clean_fraction) << "\n";
    os << "defense.epochs = " << cfg.defense_config.epochs << "\n";
    os << "defense.batch_size = " << cfg.defense_config.batch_size << "\n";
    os << "defense.learning_rate = " << real(cfg.defense_config.learning_rate) << "\n";
    os << "defense.momentum = " << real(cfg.defense_config.momentum) << "\n";
    os << "defense.head_only = " << flag(cfg.defense_config.head_only) << "\n";
    os << "master_seed = " << cfg.master_seed << "\n";
    return os.str();
}

ExperimentConfig parse_experiment(const std::string& content, const std::string& source) {
    ExperimentConfig cfg;
    std::istringstream is(content);
    std::string raw;
    int line_no = 0;
    std::map<std::string, int> seen;
    while (std::getline(is, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string_view line = text::trim(std::string_view(raw).substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = source + ":" + std::to_string(line_no);
        if (eq == std::string_view::npos) throw std::invalid_argument(where + ": expected 'key = value'");
        const std::string key(text::trim(line.substr(0, eq)));
        const std::string value(text::trim(line.substr(eq + 1)));
        if (seen.count(key)) {
            throw std::invalid_argument(where + ": '" + key + "' repeats line " + std::to_string(seen[key]));
        }
        seen[key] = line_no;
        const std::string what = where + " " + key;

        auto count = [&] { return static_cast<std::size_t>(text::parse_u64(value, what)); };
        auto integer = [&] { return static_cast<int>(text::parse_int(value, what)); };
        auto real = [&] { return text::parse_real(value, what); };
        auto flag = [&] { return text::parse_bool(value, what); };
        auto maybe_count = [&]() -> std::optional<std::size_t> {
            if (value.empty()) return std::nullopt;
            return count();
        };

        try {
            if (key == "name") cfg.name = value;
            else if (key == "dataset") cfg.dataset = parse_dataset_family(value);
            else if (key == "data_dir") cfg.data_dir = value;
            else if (key == "subset") cfg.subset = count();
            else if (key == "test_subset") cfg.test_subset = count();
            else if (key == "target_class") cfg.target_class = integer();
            else if (key == "policy") cfg.policy = parse_label_policy(value);
            else if (key == "per_class_rate") cfg.quantity.per_class_rate = real();
            else if (key == "per_class_count") cfg.quantity.per_class_count = maybe_count();
            else if (key == "count") cfg.quantity.count = maybe_count();
            else if (key == "target_fraction") cfg.quantity.target_fraction = real();
            else if (key == "attack") cfg.attack = parse_attack(value);
            else if (key == "train.epochs") cfg.train.epochs = integer();
            else if (key == "train.batch_size") cfg.train.batch_size = integer();
            else if (key == "train.learning_rate") cfg.train.learning_rate = real();
            else if (key == "train.momentum") cfg.train.momentum = real();
            else if (key == "train.head_only") cfg.train.head_only = flag();
            else if (key == "robustness.rotation_range") cfg.robustness.rotation_range = real();
            else if (key == "robustness.crop_pad") cfg.robustness.crop_pad = integer();
            else if (key == "robustness.brightness_range") cfg.robustness.brightness_range = real();
            else if (key == "robustness.compositions") cfg.robustness.compositions_per_item = integer();
            else if (key == "defense") cfg.defense = flag();
            else if (key == "defense.clean_fraction") cfg.defense_config.clean_fraction = real();
            else if (key == "defense.epochs") cfg.defense_config.epochs = integer();
            else if (key == "defense.batch_size") cfg.defense_config.batch_size = integer();
            else if (key == "defense.learning_rate") cfg.defense_config.learning_rate = real();
            else if (key == "defense.momentum") cfg.defense_config.momentum = real();
            else if (key == "defense.head_only") cfg.defense_config.head_only = flag();
            else if (key == "master_seed") cfg.master_seed = text::parse_u64(value, what);
            else throw std::invalid_argument("unknown key '" + key + "'");
        } catch (const std::invalid_argument& e) {
            const std::string msg = e.what();
            if (msg.rfind(where, 0) == 0) throw;
            throw std::invalid_argument(where + ": " + msg);
        }
    }
    return cfg;
}

namespace {

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace

ExperimentConfig load_experiment(const std::string& path) { return parse_experiment(read_text(path), path); }

void save_experiment(const ExperimentConfig& cfg, const std::string& path) { write_text(path, serialize_experiment(cfg)); }

// --- presets ----------------------------------------------------------------

namespace {

struct PresetEntry {
    std::string name;
    std::function<ExperimentConfig()> make;
};

ExperimentConfig base(DatasetFamily family, const std::string& name) {
    ExperimentConfig cfg;
    cfg.name = name;
    cfg.dataset = family;
    if (family == DatasetFamily::Mnist) {
        cfg.target_class = 3;
        cfg.train.epochs = 5;
    } else {
        cfg.target_class = 2;  // bird
        cfg.train.epochs = 15;
    }
    return cfg;
}

// Dirty-label: 10% of every MNIST class, 250 per CIFAR class (5% overall).
void dirty_label(ExperimentConfig& cfg) {
    cfg.policy = LabelPolicy::DirtyLabel;
    if (cfg.dataset == DatasetFamily::Mnist) {
        cfg.quantity = {std::nullopt, 0.1, std::nullopt, 0.0};
    } else {
        cfg.quantity = {250, 0.0, std::nullopt, 0.0};
    }
}

// Clean-label: half of the MNIST target class, 2500 CIFAR target images.
void clean_label(ExperimentConfig& cfg) {
    cfg.policy = LabelPolicy::CleanLabel;
    if (cfg.dataset == DatasetFamily::Mnist) {
        cfg.quantity = {std::nullopt, 0.0, std::nullopt, 0.5};
    } else {
        cfg.quantity = {std::nullopt, 0.0, 2500, 0.0};
    }
}

constexpr std::uint64_t kBlendNoiseSeed = 20240311;

AttackSpec baseline_attack(const std::string& kind, DatasetFamily family) {
    if (kind == "badnets") return BadnetsSpec{};
    if (kind == "sig") return SigSpec{};
    const auto s = dataset_shape(family);
    BlendSpec blend;
    blend.trigger = make_noise_trigger(s.height, s.width, s.channels, kBlendNoiseSeed);
    blend.noise_seed = kBlendNoiseSeed;
    return blend;
}

const std::vector<PresetEntry>& preset_table() {
    static const std::vector<PresetEntry> table = [] {
        std::vector<PresetEntry> t;
        for (auto family : {DatasetFamily::Mnist, DatasetFamily::Cifar10}) {
            const std::string ds = family == DatasetFamily::Mnist ? "mnist" : "cifar";
            t.push_back({ds + "-dba-dl", [=] {
                             auto cfg = base(family, ds + "-dba-dl");
                             dirty_label(cfg);
                             return cfg;
                         }});
            t.push_back({ds + "-dba-lc", [=] {
                             auto cfg = base(family, ds + "-dba-lc");
                             clean_label(cfg);
                             return cfg;
                         }});
            for (std::string kind : {"badnets", "blend", "sig"}) {
                t.push_back({ds + "-" + kind, [=] {
                                 auto cfg = base(family, ds + "-" + kind);
                                 dirty_label(cfg);
                                 cfg.attack = baseline_attack(kind, family);
                                 return cfg;
                             }});
                t.push_back({ds + "-" + kind + "-lc", [=] {
                                 auto cfg = base(family, ds + "-" + kind + "-lc");
                                 clean_label(cfg);
                                 cfg.attack = baseline_attack(kind, family);
                                 return cfg;
                             }});
            }
        }
        return t;
    }();
    return table;
}

}  // namespace

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& e : preset_table()) n.push_back(e.name);
        return n;
    }();
    return names;
}

ExperimentConfig preset(const std::string& name) {
    for (const auto& e : preset_table()) {
        if (e.name == name) return e.make();
    }
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown preset '" + name + "' (known: " + known + ")");
}

// --- data -------------------------------------------------------------------

std::string resolve_data_dir(const ExperimentConfig& cfg) {
    if (!cfg.data_dir.empty()) return cfg.data_dir;
    if (const char* env = std::getenv("DBA_DATA_DIR"); env && *env) return env;
    throw std::invalid_argument("no data directory: set data_dir in the config or DBA_DATA_DIR");
}

ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
    const fs::path dir = resolve_data_dir(cfg);
    ExperimentData data;
    if (cfg.dataset == DatasetFamily::Mnist) {
        data.train = load_mnist_idx((dir / "train-images-idx3-ubyte").string(), (dir / "train-labels-idx1-ubyte").string());
        data.test = load_mnist_idx((dir / "t10k-images-idx3-ubyte").string(), (dir / "t10k-labels-idx1-ubyte").string());
    } else {
        std::vector<std::string> batches;
        for (int k = 1; k <= 5; ++k) batches.push_back((dir / ("data_batch_" + std::to_string(k) + ".bin")).string());
        data.train = load_cifar10_bin(batches);
        data.test = load_cifar10_bin({(dir / "test_batch.bin").string()});
    }
    if (cfg.subset > 0) data.train = subset(data.train, first_per_class(data.train, cfg.subset));
    if (cfg.test_subset > 0) data.test = subset(data.test, first_per_class(data.test, cfg.test_subset));
    return data;
}

PoisonPlan plan_for(const ExperimentConfig& cfg, const LabeledDataset& train) {
    return build_poison_plan(train, cfg.target_class, cfg.policy, cfg.quantity, cfg.attack,
                             cfg.master_seed + kPlanSeedOffset);
}

DatasetSlice defense_pool(const LabeledDataset& train, const PoisonPlan& plan) {
    DatasetSlice pool;
    std::size_t k = 0;
    const auto& victims = plan.victims.indices;
    for (std::size_t i = 0; i < train.size(); ++i) {
        while (k < victims.size() && victims[k] < i) ++k;
        if (k < victims.size() && victims[k] == i) continue;
        pool.indices.push_back(i);
    }
    if (!victims.empty() && victims.back() >= train.size()) {
        throw std::invalid_argument("plan victim " + std::to_string(victims.back()) + " beyond training set of " +
                                    std::to_string(train.size()));
    }
    return pool;
}

// --- lock -------------------------------------------------------------------

RunLock::RunLock(const std::string& run_dir) : path_((fs::path(run_dir) / ".lock").string()) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST) throw LockedError("run directory '" + run_dir + "' is locked by another invocation (" + path_ + ")");
        throw std::runtime_error("cannot create lock '" + path_ + "': " + std::strerror(errno));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

RunLock::~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

// --- stages -----------------------------------------------------------------

namespace {

const char* kConfigFile = "config.txt";
const char* kPlanFile = "plan.txt";
const char* kPoisonedFile = "poisoned_train.dsc";
const char* kModelFile = "model.ckpt";
const char* kTrainLog = "train_log.csv";
const char* kMetricsFile = "metrics.csv";
const char* kSummaryFile = "summary.json";
const char* kRobustnessFile = "robustness.csv";
const char* kDefenseFile = "defense.csv";
const char* kDefendedFile = "defended.ckpt";

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

ExperimentConfig run_config(const std::string& run_dir) {
    const auto cfg = load_experiment(in_dir(run_dir, kConfigFile));
    validate_experiment(cfg);
    return with_derived_seeds(cfg);
}

ModelConfig model_config(const ExperimentConfig& cfg) {
    const auto s = dataset_shape(cfg.dataset);
    return {s.height, s.width, s.channels, dataset_class_count(cfg.dataset), cfg.master_seed + kInitSeedOffset};
}

const ExperimentData& data_or_load(const ExperimentConfig& cfg, const ExperimentData* given, ExperimentData& storage) {
    if (given) return *given;
    storage = load_experiment_data(cfg);
    return storage;
}

void tag(std::vector<MetricsRecord>& recs, const ExperimentConfig& cfg) {
    for (auto& r : recs) {
        r.attack_name = attack_name(cfg.attack);
        r.policy = to_string(cfg.policy);
    }
}

std::vector<Classifier> epoch_snapshots(const std::string& run_dir, const ExperimentConfig& cfg) {
    std::vector<Classifier> snaps;
    for (int e = 1; e <= cfg.train.epochs; ++e) {
        auto m = load_checkpoint(in_dir(run_dir, epoch_checkpoint_name(e)));
        if (!(m.config() == model_config(cfg))) {
            throw std::invalid_argument(epoch_checkpoint_name(e) + " does not match the run configuration");
        }
        snaps.push_back(std::move(m));
    }
    return snaps;
}

}  // namespace

std::string epoch_checkpoint_name(int epoch) {
    std::ostringstream os;
    os << "epochs/epoch_" << std::setw(2) << std::setfill('0') << epoch << ".ckpt";
    return os.str();
}

void stage_poison(const ExperimentConfig& cfg, const std::string& run_dir, const ExperimentData* data) {
    validate_experiment(cfg);
    fs::create_directories(run_dir);
    RunLock lock(run_dir);
    ExperimentData storage;
    const auto& d = data_or_load(cfg, data, storage);
    const auto plan = plan_for(cfg, d.train);
    save_experiment(cfg, in_dir(run_dir, kConfigFile));
    save_plan(plan, in_dir(run_dir, kPlanFile));
    save_dataset(apply_poison_plan(d.train, plan), in_dir(run_dir, kPoisonedFile));
}

void stage_train(const std::string& run_dir) {
    RunLock lock(run_dir);
    const auto cfg = run_config(run_dir);
    const auto poisoned = load_dataset(in_dir(run_dir, kPoisonedFile));
    if (poisoned.empty()) throw std::invalid_argument("poisoned training set is empty");
    fs::create_directories(fs::path(run_dir) / "epochs");

    std::ostringstream log;
    log << "epoch,mean_loss,train_accuracy\n";
    const auto model = train(init_classifier(model_config(cfg)), poisoned, cfg.train,
                             [&](const EpochReport& rep, const Classifier& snapshot) {
                                 save_checkpoint(snapshot, in_dir(run_dir, epoch_checkpoint_name(rep.epoch)));
                                 log << rep.epoch << "," << text::format_real(rep.mean_loss) << ","
                                     << text::format_real(rep.train_accuracy) << "\n";
                             });
    save_checkpoint(model, in_dir(run_dir, kModelFile));
    write_text(in_dir(run_dir, kTrainLog), log.str());
}

void stage_eval(const std::string& run_dir, bool untrained, const ExperimentData* data) {
    RunLock lock(run_dir);
    const auto cfg = run_config(run_dir);
    const auto plan = load_plan(in_dir(run_dir, kPlanFile));
    ExperimentData storage;
    const auto& d = data_or_load(cfg, data, storage);
    const auto trig = trigger_test_set(d.test, plan.target_class, plan.attack);

    std::vector<MetricsRecord> recs;
    if (untrained) {
        const auto model = init_classifier(model_config(cfg));
        recs.push_back({0, compute_acc(model, d.test), compute_asr(model, trig, plan.target_class), "", "", "", cfg.master_seed});
        tag(recs, cfg);
        write_metrics(recs, in_dir(run_dir, "metrics_untrained.csv"));
        return;
    }
    const auto snaps = epoch_snapshots(run_dir, cfg);
    for (std::size_t e = 0; e < snaps.size(); ++e) {
        recs.push_back({static_cast<int>(e) + 1, compute_acc(snaps[e], d.test),
                        compute_asr(snaps[e], trig, plan.target_class), "", "", "", cfg.master_seed});
    }
    tag(recs, cfg);
    write_metrics(recs, in_dir(run_dir, kMetricsFile));
    write_metrics_summary(recs, in_dir(run_dir, kSummaryFile));
}

void stage_robustness(const std::string& run_dir, const ExperimentData* data) {
    RunLock lock(run_dir);
    const auto cfg = run_config(run_dir);
    const auto plan = load_plan(in_dir(run_dir, kPlanFile));
    ExperimentData storage;
    const auto& d = data_or_load(cfg, data, storage);
    const auto trig = trigger_test_set(d.test, plan.target_class, plan.attack);
    auto recs = robustness_sweep(epoch_snapshots(run_dir, cfg), trig, plan.target_class, cfg.robustness, d.test);
    tag(recs, cfg);
    write_metrics(recs, in_dir(run_dir, kRobustnessFile));
}

void stage_defend(const std::string& run_dir, const ExperimentData* data) {
    RunLock lock(run_dir);
    const auto cfg = run_config(run_dir);
    const auto plan = load_plan(in_dir(run_dir, kPlanFile));
    ExperimentData storage;
    const auto& d = data_or_load(cfg, data, storage);
    const auto model = load_checkpoint(in_dir(run_dir, kModelFile));
    const auto pool = subset(d.train, defense_pool(d.train, plan));
    const auto trig = trigger_test_set(d.test, plan.target_class, plan.attack);
    auto res = fine_tune_defense(model, pool, cfg.defense_config, d.test, trig, plan.target_class);
    std::vector<MetricsRecord> recs = {res.before, res.after};
    for (auto& r : recs) {
        r.epoch = cfg.train.epochs;
        r.seed = cfg.master_seed;
    }
    tag(recs, cfg);
    save_checkpoint(res.model, in_dir(run_dir, kDefendedFile));
    write_metrics(recs, in_dir(run_dir, kDefenseFile));
}

void run_pipeline(const ExperimentConfig& cfg, const std::string& run_dir, const ExperimentData* data) {
    validate_experiment(cfg);
    ExperimentData storage;
    const auto& d = data_or_load(cfg, data, storage);
    stage_poison(cfg, run_dir, &d);
    stage_train(run_dir);
    stage_eval(run_dir, false, &d);
    stage_robustness(run_dir, &d);
    if (cfg.defense) stage_defend(run_dir, &d);
}

// --- report -----------------------------------------------------------------

namespace {

struct Stat {
    std::vector<double> values;
    void add(double v) { values.push_back(v); }
    bool empty() const { return values.empty(); }
    double mean() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s / static_cast<double>(values.size());
    }
    double min() const { return *std::min_element(values.begin(), values.end()); }
    double max() const { return *std::max_element(values.begin(), values.end()); }
};

struct Group {
    std::string experiment;
    std::string dataset;
    std::string attack;
    std::string policy;
    int runs = 0;
    Stat acc, asr, ft_acc, ft_asr;
    std::map<int, Stat> epoch_asr;
    std::map<int, Stat> epoch_aug_asr;
};

std::string fixed4(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

void csv_stat(std::ostream& os, const Stat& s) {
    if (s.empty()) {
        os << "," << kMissingCell << "," << kMissingCell << "," << kMissingCell;
    } else {
        os << "," << text::format_real(s.mean()) << "," << text::format_real(s.min()) << "," << text::format_real(s.max());
    }
}

std::string text_cell(const Stat& s) {
    if (s.empty()) return kMissingCell;
    if (s.values.size() == 1) return fixed4(s.mean());
    return fixed4(s.mean()) + " [" + fixed4(s.min()) + "," + fixed4(s.max()) + "]";
}

// Display width counting UTF-8 code points.
std::size_t width_of(const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
}

}  // namespace

std::vector<std::string> write_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    std::vector<std::string> problems;
    std::vector<Group> groups;

    for (const auto& dir : run_dirs) {
        ExperimentConfig cfg;
        try {
            cfg = load_experiment(in_dir(dir, kConfigFile));
        } catch (const std::exception& e) {
            problems.push_back(in_dir(dir, kConfigFile) + ": " + e.what());
            continue;
        }
        auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
            return g.experiment == cfg.name && g.dataset == to_string(cfg.dataset) &&
                   g.attack == attack_name(cfg.attack) && g.policy == to_string(cfg.policy);
        });
        if (it == groups.end()) {
            Group fresh;
            fresh.experiment = cfg.name;
            fresh.dataset = to_string(cfg.dataset);
            fresh.attack = attack_name(cfg.attack);
            fresh.policy = to_string(cfg.policy);
            groups.push_back(std::move(fresh));
            it = groups.end() - 1;
        }
        Group& g = *it;
        ++g.runs;

        const auto metrics_path = in_dir(dir, kMetricsFile);
        try {
            const auto recs = read_metrics(metrics_path);
            if (recs.empty()) throw std::invalid_argument("no metric rows");
            const auto last = std::max_element(recs.begin(), recs.end(),
                                               [](const auto& a, const auto& b) { return a.epoch < b.epoch; });
            g.acc.add(last->acc);
            g.asr.add(last->asr);
            for (const auto& r : recs) g.epoch_asr[r.epoch].add(r.asr);
        } catch (const std::exception& e) {
            problems.push_back(metrics_path + ": " + e.what());
        }

        const auto defense_path = in_dir(dir, kDefenseFile);
        if (fs::exists(defense_path)) {
            try {
                bool found = false;
                for (const auto& r : read_metrics(defense_path)) {
                    if (r.aug_desc == "ft:after") {
                        g.ft_acc.add(r.acc);
                        g.ft_asr.add(r.asr);
                        found = true;
                    }
                }
                if (!found) throw std::invalid_argument("no ft:after row");
            } catch (const std::exception& e) {
                problems.push_back(defense_path + ": " + e.what());
            }
        }

        const auto rob_path = in_dir(dir, kRobustnessFile);
        if (fs::exists(rob_path)) {
            try {
                for (const auto& r : read_metrics(rob_path)) g.epoch_aug_asr[r.epoch].add(r.asr);
            } catch (const std::exception& e) {
                problems.push_back(rob_path + ": " + e.what());
            }
        }
    }

    fs::create_directories(out_dir);

    std::ostringstream csv;
    csv << "experiment,dataset,attack,policy,runs,acc_mean,acc_min,acc_max,asr_mean,asr_min,asr_max,"
           "ft_acc_mean,ft_acc_min,ft_acc_max,ft_asr_mean,ft_asr_min,ft_asr_max\n";
    for (const auto& g : groups) {
        csv << g.experiment << "," << g.dataset << "," << g.attack << "," << g.policy << "," << g.runs;
        csv_stat(csv, g.acc);
        csv_stat(csv, g.asr);
        csv_stat(csv, g.ft_acc);
        csv_stat(csv, g.ft_asr);
        csv << "\n";
    }
    write_text(in_dir(out_dir, "report.csv"), csv.str());

    std::ostringstream series;
    series << "experiment,attack,policy,epoch,runs,asr_mean,asr_min,asr_max,aug_asr_mean,aug_asr_min,aug_asr_max\n";
    for (const auto& g : groups) {
        std::map<int, int> epochs;
        for (const auto& [e, s] : g.epoch_asr) epochs[e] = static_cast<int>(s.values.size());
        for (const auto& [e, s] : g.epoch_aug_asr) epochs[e] = std::max(epochs[e], static_cast<int>(s.values.size()));
        for (const auto& [e, n] : epochs) {
            series << g.experiment << "," << g.attack << "," << g.policy << "," << e << "," << n;
            csv_stat(series, g.epoch_asr.count(e) ? g.epoch_asr.at(e) : Stat{});
            csv_stat(series, g.epoch_aug_asr.count(e) ? g.epoch_aug_asr.at(e) : Stat{});
            series << "\n";
        }
    }
    write_text(in_dir(out_dir, "robustness_series.csv"), series.str());

    std::vector<std::vector<std::string>> rows = {{"experiment", "attack", "policy", "runs", "ACC", "ASR", "FT ACC", "FT ASR"}};
    for (const auto& g : groups) {
        rows.push_back({g.experiment, g.attack, g.policy, std::to_string(g.runs), text_cell(g.acc), text_cell(g.asr),
                        text_cell(g.ft_acc), text_cell(g.ft_asr)});
    }
    std::vector<std::size_t> widths(rows[0].size(), 0);
    for (const auto& r : rows)
        for (std::size_t k = 0; k < r.size(); ++k) widths[k] = std::max(widths[k], width_of(r[k]));
    std::ostringstream txt;
    for (const auto& r : rows) {
        for (std::size_t k = 0; k < r.size(); ++k) {
            txt << r[k];
            if (k + 1 < r.size()) txt << std::string(widths[k] - width_of(r[k]) + 2, ' ');
        }
        txt << "\n";
    }
    if (!problems.empty()) {
        txt << "\nproblems:\n";
        for (const auto& p : problems) txt << "  " << p << "\n";
    }
    write_text(in_dir(out_dir, "report.txt"), txt.str());
    return problems;
}

// --- image export -----------------------------------------------------------

namespace {

std::vector<unsigned char> quantize(const Image& img) {
    validate_image(img);
    std::vector<unsigned char> out(img.pixels.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<unsigned char>(std::lround(img.pixels[i] * 255.0));
    return out;
}

void png_chunk(std::string& out, const char* type, const std::string& data) {
    auto be32 = [&](std::uint32_t v) {
        for (int s = 24; s >= 0; s -= 8) out += static_cast<char>((v >> s) & 0xFF);
    };
    be32(static_cast<std::uint32_t>(data.size()));
    const std::string body = std::string(type, 4) + data;
    out += body;
    be32(static_cast<std::uint32_t>(::crc32(0, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
}

}  // namespace

void write_png(const Image& img, const std::string& path) {
    const auto px = quantize(img);
    const std::size_t row = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.channels);
    std::string raw;
    for (int r = 0; r < img.height; ++r) {
        raw += '\0';  // filter: none
        raw.append(reinterpret_cast<const char*>(px.data()) + r * row, row);
    }
    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::string z(zlen, '\0');
    if (compress2(reinterpret_cast<Bytef*>(z.data()), &zlen, reinterpret_cast<const Bytef*>(raw.data()),
                  static_cast<uLong>(raw.size()), 9) != Z_OK) {
        throw std::runtime_error("zlib compression failed for '" + path + "'");
    }
    z.resize(zlen);

    std::string ihdr;
    for (std::uint32_t v : {static_cast<std::uint32_t>(img.width), static_cast<std::uint32_t>(img.height)})
        for (int s = 24; s >= 0; s -= 8) ihdr += static_cast<char>((v >> s) & 0xFF);
    ihdr += static_cast<char>(8);                         // bit depth
    ihdr += static_cast<char>(img.channels == 3 ? 2 : 0);  // truecolor / grayscale
    ihdr += std::string(3, '\0');

    std::string out = "\x89PNG\r\n\x1a\n";
    png_chunk(out, "IHDR", ihdr);
    png_chunk(out, "IDAT", z);
    png_chunk(out, "IEND", "");
    write_text(path, out);
}

void write_pnm(const Image& img, const std::string& path) {
    const auto px = quantize(img);
    std::string out = (img.channels == 3 ? "P6\n" : "P5\n") + std::to_string(img.width) + " " +
                      std::to_string(img.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(px.data()), px.size());
    write_text(path, out);
}

void write_preview(const LabeledDataset& ds, const AttackSpec& attack, std::size_t count, const std::string& out_dir) {
    if (count > ds.size()) {
        throw std::invalid_argument("preview of " + std::to_string(count) + " items from a dataset of " +
                                    std::to_string(ds.size()));
    }
    fs::create_directories(out_dir);
    const char* ext = nullptr;
    for (std::size_t i = 0; i < count; ++i) {
        const Image& orig = ds.images[i];
        ext = orig.channels == 3 ? ".ppm" : ".pgm";
        const Image trig = apply_trigger(orig, attack);
        const std::string k = std::to_string(i);
        write_png(orig, in_dir(out_dir, "original_" + k + ".png"));
        write_png(trig, in_dir(out_dir, "triggered_" + k + ".png"));
        write_pnm(orig, in_dir(out_dir, "original_" + k + ext));
        write_pnm(trig, in_dir(out_dir, "triggered_" + k + ext));
    }
}

}  // namespace dba
