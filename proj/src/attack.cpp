#include "dba/attack.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "dba/rng.hpp"
#include "dba/text.hpp"

namespace dba {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

std::string attack_name(const AttackSpec& attack) {
    return std::visit(overloaded{[](const DbaSpec&) { return std::string("dba"); },
                                 [](const BadnetsSpec&) { return std::string("badnets"); },
                                 [](const BlendSpec&) { return std::string("blend"); },
                                 [](const SigSpec&) { return std::string("sig"); }},
                      attack);
}

std::string to_string(Corner corner) {
    switch (corner) {
        case Corner::BottomRight: return "bottom-right";
        case Corner::BottomLeft: return "bottom-left";
        case Corner::TopRight: return "top-right";
        case Corner::TopLeft: return "top-left";
    }
    return "?";
}

Corner parse_corner(const std::string& text) {
    if (text == "bottom-right") return Corner::BottomRight;
    if (text == "bottom-left") return Corner::BottomLeft;
    if (text == "top-right") return Corner::TopRight;
    if (text == "top-left") return Corner::TopLeft;
    throw std::invalid_argument("unknown corner '" + text + "'");
}

std::string to_string(LabelPolicy policy) {
    return policy == LabelPolicy::CleanLabel ? "clean-label" : "dirty-label";
}

LabelPolicy parse_label_policy(const std::string& text) {
    if (text == "clean-label" || text == "lc") return LabelPolicy::CleanLabel;
    if (text == "dirty-label" || text == "dl") return LabelPolicy::DirtyLabel;
    throw std::invalid_argument("unknown label policy '" + text + "' (expected clean-label|dirty-label)");
}

Image make_noise_trigger(int height, int width, int channels, std::uint64_t seed) {
    Image img(height, width, channels);
    Rng rng(seed);
    for (double& v : img.pixels) v = rng.uniform();
    return img;
}

void validate_attack(const AttackSpec& attack, int height, int width, int channels) {
    std::visit(
        overloaded{
            [&](const DbaSpec& s) {
                if (s.offsets.empty()) throw std::invalid_argument("dba: at least one offset is required");
                if (!(s.alpha > 0.0)) throw std::invalid_argument("dba: alpha must be positive");
                const double n = static_cast<double>(s.offsets.size());
                if (!(n * s.alpha < 1.0)) {
                    throw std::invalid_argument("dba: N*alpha = " + text::format_real(n * s.alpha) +
                                                " must stay below 1");
                }
                for (const auto& o : s.offsets) {
                    if (std::abs(o.dx) >= width || std::abs(o.dy) >= height) {
                        throw std::invalid_argument("dba: offset (" + std::to_string(o.dx) + "," +
                                                    std::to_string(o.dy) + ") does not fit a " +
                                                    std::to_string(height) + "x" + std::to_string(width) + " image");
                    }
                }
            },
            [&](const BadnetsSpec& s) {
                if (s.patch_size < 1 || s.patch_size > std::min(height, width)) {
                    throw std::invalid_argument("badnets: patch size " + std::to_string(s.patch_size) +
                                                " does not fit the image");
                }
                if (!(s.patch_value >= 0.0 && s.patch_value <= 1.0)) {
                    throw std::invalid_argument("badnets: patch value must lie in [0,1]");
                }
            },
            [&](const BlendSpec& s) {
                if (!(s.ratio > 0.0 && s.ratio < 1.0)) throw std::invalid_argument("blend: ratio must lie in (0,1)");
                if (s.trigger.height != height || s.trigger.width != width || s.trigger.channels != channels) {
                    throw std::invalid_argument("blend: trigger image is " + s.trigger.shape_string() +
                                                " but targets are " + std::to_string(height) + "x" +
                                                std::to_string(width) + "x" + std::to_string(channels));
                }
            },
            [&](const SigSpec& s) {
                if (!(s.amplitude >= 0.0)) throw std::invalid_argument("sig: amplitude must be non-negative");
                if (!std::isfinite(s.frequency)) throw std::invalid_argument("sig: frequency must be finite");
            },
        },
        attack);
}

Image apply_trigger(const Image& img, const AttackSpec& attack) {
    validate_attack(attack, img.height, img.width, img.channels);
    return std::visit(
        overloaded{
            [&](const DbaSpec& s) {
                std::vector<Image> layers;
                std::vector<double> weights;
                layers.reserve(s.offsets.size() + 1);
                layers.push_back(img);
                weights.push_back(1.0 - static_cast<double>(s.offsets.size()) * s.alpha);
                for (const auto& o : s.offsets) {
                    layers.push_back(shift_image(img, o, s.edge_mode));
                    weights.push_back(s.alpha);
                }
                return weighted_blend(layers, weights);
            },
            [&](const BadnetsSpec& s) {
                Image out = img;
                const bool bottom = s.corner == Corner::BottomRight || s.corner == Corner::BottomLeft;
                const bool right = s.corner == Corner::BottomRight || s.corner == Corner::TopRight;
                const int r0 = bottom ? img.height - s.patch_size : 0;
                const int c0 = right ? img.width - s.patch_size : 0;
                for (int r = r0; r < r0 + s.patch_size; ++r) {
                    for (int c = c0; c < c0 + s.patch_size; ++c) {
                        for (int ch = 0; ch < img.channels; ++ch) out.at(r, c, ch) = s.patch_value;
                    }
                }
                return out;
            },
            [&](const BlendSpec& s) {
                const std::vector<Image> layers = {img, s.trigger};
                const std::vector<double> weights = {1.0 - s.ratio, s.ratio};
                return weighted_blend(layers, weights);
            },
            [&](const SigSpec& s) {
                Image out = img;
                for (int c = 0; c < img.width; ++c) {
                    const double wave =
                        s.amplitude * std::sin(2.0 * std::numbers::pi * s.frequency * c / img.width);
                    for (int r = 0; r < img.height; ++r) {
                        for (int ch = 0; ch < img.channels; ++ch) {
                            out.at(r, c, ch) = std::clamp(img.at(r, c, ch) + wave, 0.0, 1.0);
                        }
                    }
                }
                return out;
            },
        },
        attack);
}

namespace {

std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

void check_target(const LabeledDataset& ds, int target_class) {
    if (target_class < 0 || target_class >= ds.class_count()) {
        throw std::invalid_argument("target class " + std::to_string(target_class) + " outside [0," +
                                    std::to_string(ds.class_count()) + ")");
    }
}

}  // namespace

PoisonPlan build_poison_plan(const LabeledDataset& ds, int target_class, LabelPolicy policy,
                             const PoisonQuantity& quantity, const AttackSpec& attack, std::uint64_t seed) {
    check_target(ds, target_class);
    if (!ds.empty()) validate_attack(attack, ds.images[0].height, ds.images[0].width, ds.images[0].channels);

    PoisonPlan plan;
    plan.target_class = target_class;
    plan.label_policy = policy;
    plan.attack = attack;
    plan.seed = seed;

    auto draw = [&](int cls, std::size_t n) {
        const DatasetSlice pool = select_by_class(ds, cls);
        if (n > pool.size()) {
            throw std::invalid_argument("requested " + std::to_string(n) + " victims from class " +
                                        std::to_string(cls) + ", which has only " + std::to_string(pool.size()) +
                                        " items");
        }
        return sample_slice(pool, n, mix_seed(seed, static_cast<std::uint64_t>(cls)));
    };

    if (policy == LabelPolicy::DirtyLabel) {
        if (!quantity.per_class_count && !(quantity.per_class_rate >= 0.0 && quantity.per_class_rate <= 1.0)) {
            throw std::invalid_argument("per-class poison rate must lie in [0,1]");
        }
        for (int cls = 0; cls < ds.class_count(); ++cls) {
            const std::size_t n = quantity.per_class_count
                                      ? *quantity.per_class_count
                                      : round_half_up(quantity.per_class_rate *
                                                      static_cast<double>(select_by_class(ds, cls).size()));
            const DatasetSlice picked = draw(cls, n);
            plan.victims.indices.insert(plan.victims.indices.end(), picked.indices.begin(), picked.indices.end());
        }
        std::sort(plan.victims.indices.begin(), plan.victims.indices.end());
    } else {
        if (!quantity.count && !(quantity.target_fraction >= 0.0 && quantity.target_fraction <= 1.0)) {
            throw std::invalid_argument("target-class poison fraction must lie in [0,1]");
        }
        const std::size_t n =
            quantity.count ? *quantity.count
                           : static_cast<std::size_t>(std::floor(
                                 quantity.target_fraction * static_cast<double>(select_by_class(ds, target_class).size())));
        plan.victims = draw(target_class, n);
    }
    return plan;
}

LabeledDataset apply_poison_plan(const LabeledDataset& ds, const PoisonPlan& plan) {
    check_target(ds, plan.target_class);
    const auto& idx = plan.victims.indices;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] >= ds.size()) {
            throw std::invalid_argument("plan victim " + std::to_string(idx[k]) + " beyond dataset of " +
                                        std::to_string(ds.size()) + " items");
        }
        if (k > 0 && idx[k] <= idx[k - 1]) throw std::invalid_argument("plan victims are not strictly increasing");
        if (plan.label_policy == LabelPolicy::CleanLabel && ds.labels[idx[k]] != plan.target_class) {
            throw std::invalid_argument("clean-label victim " + std::to_string(idx[k]) + " has label " +
                                        std::to_string(ds.labels[idx[k]]) + ", not the target class " +
                                        std::to_string(plan.target_class));
        }
    }
    LabeledDataset out = ds;
    for (std::size_t i : idx) {
        out.images[i] = apply_trigger(ds.images[i], plan.attack);
        if (plan.label_policy == LabelPolicy::DirtyLabel) out.labels[i] = plan.target_class;
    }
    return out;
}

LabeledDataset trigger_test_set(const LabeledDataset& ds, int target_class, const AttackSpec& attack) {
    check_target(ds, target_class);
    LabeledDataset out;
    out.class_names = ds.class_names;
    out.provenance = ds.provenance + " [triggered:" + attack_name(attack) + ",target=" + std::to_string(target_class) + "]";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[i] == target_class) continue;
        out.images.push_back(apply_trigger(ds.images[i], attack));
        out.labels.push_back(ds.labels[i]);
    }
    return out;
}

// --- plan text format -----------------------------------------------------

std::string serialize_attack(const AttackSpec& attack) {
    std::ostringstream os;
    os << attack_name(attack);
    std::visit(overloaded{
                   [&](const DbaSpec& s) {
                       os << " alpha=" << text::format_real(s.alpha) << " edge=" << to_string(s.edge_mode)
                          << " offsets=";
                       for (std::size_t k = 0; k < s.offsets.size(); ++k) {
                           os << (k ? "," : "") << s.offsets[k].dx << ":" << s.offsets[k].dy;
                       }
                   },
                   [&](const BadnetsSpec& s) {
                       os << " patch=" << s.patch_size << " corner=" << to_string(s.corner)
                          << " value=" << text::format_real(s.patch_value);
                   },
                   [&](const BlendSpec& s) {
                       os << " ratio=" << text::format_real(s.ratio) << " shape=" << s.trigger.shape_string();
                       if (s.noise_seed) {
                           os << " noise_seed=" << *s.noise_seed;
                       } else {
                           os << " pixels=";
                           for (std::size_t k = 0; k < s.trigger.pixels.size(); ++k) {
                               os << (k ? "," : "") << text::format_real(s.trigger.pixels[k]);
                           }
                       }
                   },
                   [&](const SigSpec& s) {
                       os << " amplitude=" << text::format_real(s.amplitude)
                          << " frequency=" << text::format_real(s.frequency);
                   },
               },
               attack);
    return os.str();
}

AttackSpec parse_attack(const std::string& line) {
    std::istringstream is(line);
    std::string name;
    is >> name;
    std::map<std::string, std::string> kv;
    std::string token;
    while (is >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("attack parameter '" + token + "' lacks '='");
        kv[token.substr(0, eq)] = token.substr(eq + 1);
    }
    auto take = [&](const std::string& key) -> std::string {
        const auto it = kv.find(key);
        if (it == kv.end()) throw std::invalid_argument(name + " attack is missing '" + key + "'");
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    auto finish = [&](AttackSpec spec) {
        if (!kv.empty()) throw std::invalid_argument(name + " attack has unknown parameter '" + kv.begin()->first + "'");
        return spec;
    };

    if (name == "dba") {
        DbaSpec s;
        s.alpha = text::parse_real(take("alpha"), "dba alpha");
        s.edge_mode = parse_edge_mode(take("edge"));
        s.offsets.clear();
        for (const auto& pair : text::split(take("offsets"), ',')) {
            const auto parts = text::split(pair, ':');
            if (parts.size() != 2) throw std::invalid_argument("dba offset '" + pair + "' must be dx:dy");
            s.offsets.push_back({static_cast<int>(text::parse_int(parts[0], "offset dx")),
                                 static_cast<int>(text::parse_int(parts[1], "offset dy"))});
        }
        return finish(s);
    }
    if (name == "badnets") {
        BadnetsSpec s;
        s.patch_size = static_cast<int>(text::parse_int(take("patch"), "badnets patch"));
        s.corner = parse_corner(take("corner"));
        s.patch_value = text::parse_real(take("value"), "badnets value");
        return finish(s);
    }
    if (name == "blend") {
        BlendSpec s;
        s.ratio = text::parse_real(take("ratio"), "blend ratio");
        const auto dims = text::split(take("shape"), 'x');
        if (dims.size() != 3) throw std::invalid_argument("blend shape must be HxWxC");
        const int h = static_cast<int>(text::parse_int(dims[0], "blend height"));
        const int w = static_cast<int>(text::parse_int(dims[1], "blend width"));
        const int c = static_cast<int>(text::parse_int(dims[2], "blend channels"));
        if (kv.count("noise_seed")) {
            s.noise_seed = text::parse_u64(take("noise_seed"), "blend noise_seed");
            s.trigger = make_noise_trigger(h, w, c, *s.noise_seed);
        } else {
            std::vector<double> px;
            for (const auto& v : text::split(take("pixels"), ',')) px.push_back(text::parse_real(v, "blend pixel"));
            s.trigger = Image(h, w, c, std::move(px));
            validate_image(s.trigger);
        }
        return finish(s);
    }
    if (name == "sig") {
        SigSpec s;
        s.amplitude = text::parse_real(take("amplitude"), "sig amplitude");
        s.frequency = text::parse_real(take("frequency"), "sig frequency");
        return finish(s);
    }
    throw std::invalid_argument("unknown attack '" + name + "' (expected dba|badnets|blend|sig)");
}

std::string serialize_plan(const PoisonPlan& plan) {
    std::ostringstream os;
    os << "dba-poison-plan " << kPlanVersion << "\n";
    os << "target_class " << plan.target_class << "\n";
    os << "policy " << to_string(plan.label_policy) << "\n";
    os << "seed " << plan.seed << "\n";
    os << "attack " << serialize_attack(plan.attack) << "\n";
    os << "victims " << plan.victims.size() << "\n";
    for (std::size_t k = 0; k < plan.victims.size(); ++k) {
        os << plan.victims.indices[k] << ((k % 16 == 15 || k + 1 == plan.victims.size()) ? "\n" : " ");
    }
    os << "end\n";
    return os.str();
}

PoisonPlan parse_plan(const std::string& content) {
    std::istringstream is(content);
    std::string line;
    auto expect_field = [&](const std::string& key) -> std::string {
        if (!std::getline(is, line)) throw std::invalid_argument("plan ends before '" + key + "'");
        if (line.rfind(key + " ", 0) != 0) {
            throw std::invalid_argument("plan line '" + line + "' should start with '" + key + "'");
        }
        return line.substr(key.size() + 1);
    };

    const auto version = text::parse_int(expect_field("dba-poison-plan"), "plan version");
    if (version != kPlanVersion) {
        throw std::invalid_argument("unsupported plan version " + std::to_string(version) + " (expected " +
                                    std::to_string(kPlanVersion) + ")");
    }
    PoisonPlan plan;
    plan.target_class = static_cast<int>(text::parse_int(expect_field("target_class"), "target_class"));
    plan.label_policy = parse_label_policy(std::string(text::trim(expect_field("policy"))));
    plan.seed = text::parse_u64(expect_field("seed"), "seed");
    plan.attack = parse_attack(expect_field("attack"));
    const auto count = text::parse_u64(expect_field("victims"), "victim count");
    plan.victims.indices.reserve(count);
    std::size_t index;
    while (plan.victims.size() < count && is >> index) plan.victims.indices.push_back(index);
    if (plan.victims.size() != count) {
        throw std::invalid_argument("plan lists " + std::to_string(plan.victims.size()) + " victims, header says " +
                                    std::to_string(count));
    }
    std::string tail;
    if (!(is >> tail) || tail != "end") throw std::invalid_argument("plan is missing its 'end' marker");
    if (!std::is_sorted(plan.victims.indices.begin(), plan.victims.indices.end()) ||
        std::adjacent_find(plan.victims.indices.begin(), plan.victims.indices.end()) != plan.victims.indices.end()) {
        throw std::invalid_argument("plan victims must be strictly increasing");
    }
    return plan;
}

void save_plan(const PoisonPlan& plan, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << serialize_plan(plan);
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

PoisonPlan load_plan(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_plan(ss.str());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

}  // namespace dba
