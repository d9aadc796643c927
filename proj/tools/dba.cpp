// dba: poison -> train -> eval -> robustness -> defend -> report, one stage per
// subcommand, plus `run` for the whole chain and `preview` for trigger images.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "dba/error.hpp"
#include "dba/experiment.hpp"
#include "dba/text.hpp"

namespace fs = std::filesystem;
using namespace dba;

namespace {

struct ConfigArgs {
    std::string preset_name;
    std::string config_path;
    std::string data_dir;
    std::size_t subset = 0;
    std::size_t test_subset = 0;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

void add_config_options(CLI::App* cmd, ConfigArgs& a) {
    auto* p = cmd->add_option("--preset", a.preset_name, "Named preset (see `dba presets`)");
    auto* c = cmd->add_option("--config", a.config_path, "Experiment config file")->check(CLI::ExistingFile);
    p->excludes(c);
    cmd->add_option("--data-dir", a.data_dir, "Dataset directory (default: $DBA_DATA_DIR)");
    cmd->add_option("--subset", a.subset, "Use the first N training items per class");
    cmd->add_option("--test-subset", a.test_subset, "Use the first N test items per class");
    cmd->add_option("--set", a.overrides, "Override a config key: key=value (repeatable)");
    cmd->add_option_function<std::uint64_t>(
        "--seed",
        [&a](const std::uint64_t& v) {
            a.seed = v;
            a.seed_given = true;
        },
        "Master seed");
}

ExperimentConfig resolve_config(const ConfigArgs& a) {
    if (a.preset_name.empty() && a.config_path.empty()) throw std::invalid_argument("one of --preset or --config is required");
    ExperimentConfig cfg = a.preset_name.empty() ? load_experiment(a.config_path) : preset(a.preset_name);
    if (!a.overrides.empty()) {
        // rewrite the serialized form so overrides go through the same parser
        std::map<std::string, std::string> repl;
        for (const auto& o : a.overrides) {
            const auto eq = o.find('=');
            if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + o + "'");
            repl[std::string(text::trim(o.substr(0, eq)))] = std::string(text::trim(o.substr(eq + 1)));
        }
        std::istringstream is(serialize_experiment(cfg));
        std::string out, line;
        while (std::getline(is, line)) {
            const std::string key(text::trim(line.substr(0, line.find('='))));
            if (auto it = repl.find(key); it != repl.end()) {
                out += key + " = " + it->second + "\n";
                repl.erase(it);
            } else {
                out += line + "\n";
            }
        }
        if (!repl.empty()) throw std::invalid_argument("--set: unknown key '" + repl.begin()->first + "'");
        cfg = parse_experiment(out, "--set");
    }
    if (!a.data_dir.empty()) cfg.data_dir = fs::absolute(a.data_dir).string();
    if (a.subset) cfg.subset = a.subset;
    if (a.test_subset) cfg.test_subset = a.test_subset;
    if (a.seed_given) cfg.master_seed = a.seed;
    validate_experiment(cfg);
    return cfg;
}

std::string one_line(std::string s) {
    for (char& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

int fail(const std::string& stage, const std::string& kind, const std::string& message, int code) {
    std::cerr << "error stage=" << (stage.empty() ? "main" : stage) << " kind=" << kind << " message=\""
              << one_line(message) << "\"\n";
    return code;
}

void print_metrics(const std::string& path) {
    for (const auto& r : read_metrics(path)) {
        std::cout << r.aug_desc << (r.aug_desc.empty() ? "" : " ") << "epoch " << r.epoch << " acc "
                  << text::format_real(r.acc) << " asr " << text::format_real(r.asr) << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Displacement backdoor attack toolkit"};
    app.require_subcommand(1);

    ConfigArgs poison_args, run_args, preview_args;
    std::string run_dir, report_out, preview_out, preview_attack;
    std::vector<std::string> report_runs;
    bool untrained = false;
    std::size_t preview_count = 4;

    auto* poison = app.add_subcommand("poison", "Build the poison plan and poisoned training set");
    add_config_options(poison, poison_args);
    poison->add_option("--out", run_dir, "Run directory")->required();

    auto* train_cmd = app.add_subcommand("train", "Train the classifier on the poisoned set");
    train_cmd->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

    auto* eval = app.add_subcommand("eval", "ACC and ASR for every epoch snapshot");
    eval->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    eval->add_flag("--untrained", untrained, "Evaluate the freshly initialized model instead");

    auto* robust = app.add_subcommand("robustness", "ASR under random augmentation per epoch");
    robust->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

    auto* defend = app.add_subcommand("defend", "Fine-tune on clean data, metrics before and after");
    defend->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

    auto* report = app.add_subcommand("report", "Aggregate run directories into tables");
    report->add_option("runs", report_runs, "Run directories")->required();
    report->add_option("--out", report_out, "Output directory")->required();

    auto* run = app.add_subcommand("run", "All stages in order");
    add_config_options(run, run_args);
    run->add_option("--out", run_dir, "Run directory")->required();

    auto* preview = app.add_subcommand("preview", "Export original and triggered images (PNG and PGM/PPM)");
    add_config_options(preview, preview_args);
    preview->add_option("--attack", preview_attack, "Attack spec overriding the config, e.g. \"sig amplitude=0.1 frequency=6\"");
    preview->add_option("--count", preview_count, "Number of test images");
    preview->add_option("--out", preview_out, "Output directory")->required();

    auto* presets = app.add_subcommand("presets", "List preset names");

    std::string stage;
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        if (!app.get_subcommands().empty()) stage = app.get_subcommands().front()->get_name();
        return fail(stage, "usage", e.what(), 2);
    }
    stage = app.get_subcommands().front()->get_name();

    try {
        if (*presets) {
            for (const auto& n : preset_names()) std::cout << n << "\n";
        } else if (*poison) {
            const auto cfg = resolve_config(poison_args);
            stage_poison(cfg, run_dir);
            std::cout << "victims " << load_plan((fs::path(run_dir) / "plan.txt").string()).victims.size() << "\n";
        } else if (*train_cmd) {
            stage_train(run_dir);
            std::cout << "wrote " << (fs::path(run_dir) / "model.ckpt").string() << "\n";
        } else if (*eval) {
            stage_eval(run_dir, untrained);
            print_metrics((fs::path(run_dir) / (untrained ? "metrics_untrained.csv" : "metrics.csv")).string());
        } else if (*robust) {
            stage_robustness(run_dir);
            print_metrics((fs::path(run_dir) / "robustness.csv").string());
        } else if (*defend) {
            stage_defend(run_dir);
            print_metrics((fs::path(run_dir) / "defense.csv").string());
        } else if (*report) {
            const auto problems = write_report(report_runs, report_out);
            for (const auto& p : problems) std::cerr << "warning stage=report file=\"" << one_line(p) << "\"\n";
            std::cout << "wrote " << (fs::path(report_out) / "report.txt").string() << "\n";
            if (!problems.empty()) return fail(stage, "partial", std::to_string(problems.size()) + " problem file(s)", 1);
        } else if (*run) {
            const auto cfg = resolve_config(run_args);
            run_pipeline(cfg, run_dir);
            print_metrics((fs::path(run_dir) / "metrics.csv").string());
        } else if (*preview) {
            const auto cfg = resolve_config(preview_args);
            const auto attack = preview_attack.empty() ? cfg.attack : parse_attack(preview_attack);
            const auto data = load_experiment_data(cfg);
            write_preview(data.test, attack, preview_count, preview_out);
            std::cout << "wrote " << preview_count << " pairs to " << preview_out << "\n";
        }
    } catch (const LockedError& e) {
        return fail(stage, "locked", e.what(), 3);
    } catch (const FormatError& e) {
        return fail(stage, "format", e.what(), 1);
    } catch (const std::invalid_argument& e) {
        return fail(stage, "invalid", e.what(), 1);
    } catch (const std::exception& e) {
        return fail(stage, "runtime", e.what(), 1);
    }
    return 0;
}
