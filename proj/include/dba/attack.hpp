#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dba/dataset.hpp"
#include "dba/image.hpp"

namespace dba {

// Displacement trigger: the image blended with N displaced copies of itself,
//   (1 - N*alpha) * x + alpha * shift(x, o_1) + ... + alpha * shift(x, o_N).
struct DbaSpec {
    double alpha = 0.15;
    std::vector<Offset> offsets = {{2, 2}, {-2, -2}};
    EdgeMode edge_mode = EdgeMode::Wrap;
};

enum class Corner { BottomRight, BottomLeft, TopRight, TopLeft };

struct BadnetsSpec {
    int patch_size = 2;
    Corner corner = Corner::BottomRight;
    double patch_value = 1.0;
};

struct BlendSpec {
    Image trigger;
    double ratio = 0.3;
    // Set when `trigger` was generated by make_noise_trigger; lets plan
    // files record the seed instead of the pixels.
    std::optional<std::uint64_t> noise_seed;
};

// Additive horizontal sinusoid: x + amplitude * sin(2*pi*frequency*col/width).
struct SigSpec {
    double amplitude = 0.03;
    double frequency = 6.0;
};

using AttackSpec = std::variant<DbaSpec, BadnetsSpec, BlendSpec, SigSpec>;

std::string attack_name(const AttackSpec& attack);  // "dba", "badnets", "blend", "sig"
std::string to_string(Corner corner);
Corner parse_corner(const std::string& text);

// Uniform-noise trigger image in [0,1], fully determined by (shape, seed).
Image make_noise_trigger(int height, int width, int channels, std::uint64_t seed);

// Throws std::invalid_argument when the spec's own invariants fail or it is
// incompatible with images of the given shape.
void validate_attack(const AttackSpec& attack, int height, int width, int channels);

// The backdoor generator: maps a benign image to its triggered counterpart.
Image apply_trigger(const Image& img, const AttackSpec& attack);

enum class LabelPolicy { CleanLabel, DirtyLabel };

std::string to_string(LabelPolicy policy);  // "clean-label" / "dirty-label"
LabelPolicy parse_label_policy(const std::string& text);

struct PoisonPlan {
    int target_class = 0;
    LabelPolicy label_policy = LabelPolicy::DirtyLabel;
    DatasetSlice victims;
    AttackSpec attack;
    std::uint64_t seed = 0;
};

// How many victims to draw.
//   DirtyLabel: per_class_count items from every class, or
//               round_half_up(per_class_rate * class_size) when the count is unset.
//   CleanLabel: count items from the target class, or
//               floor(target_fraction * target_class_size) when the count is unset.
struct PoisonQuantity {
    std::optional<std::size_t> per_class_count;
    double per_class_rate = 0.0;
    std::optional<std::size_t> count;
    double target_fraction = 0.0;
};

PoisonPlan build_poison_plan(const LabeledDataset& ds, int target_class, LabelPolicy policy,
                             const PoisonQuantity& quantity, const AttackSpec& attack, std::uint64_t seed);

LabeledDataset apply_poison_plan(const LabeledDataset& ds, const PoisonPlan& plan);

// Every item whose true label differs from target_class, triggered. Labels
// keep their true classes.
LabeledDataset trigger_test_set(const LabeledDataset& ds, int target_class, const AttackSpec& attack);

// Line-oriented text form of a plan:
//
//   dba-poison-plan 1
//   target_class <int>
//   policy <clean-label|dirty-label>
//   seed <u64>
//   attack <name> key=value ...
//   victims <count>
//   <indices, up to 16 per line>
//   end
//
// Reals use the shortest round-trip form so plans replay bit-exactly.
inline constexpr int kPlanVersion = 1;
std::string serialize_plan(const PoisonPlan& plan);
PoisonPlan parse_plan(const std::string& text);
void save_plan(const PoisonPlan& plan, const std::string& path);
PoisonPlan load_plan(const std::string& path);

// Attack parameters as "key=value" tokens (the body of the plan's attack line)
// and back. Shared with the experiment config reader.
std::string serialize_attack(const AttackSpec& attack);
AttackSpec parse_attack(const std::string& line);

}  // namespace dba
