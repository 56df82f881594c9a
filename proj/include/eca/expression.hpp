#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eca::expression {

enum class BlendShape : std::size_t {
    browsUp,
    browsDown,
    eyeLidsClosed,
    smile,
    frown,
    kiss,
    lipsPressed,
    mouthOpen,
};

inline constexpr std::size_t blend_shape_count = 8;

inline constexpr std::array<std::string_view, blend_shape_count> blend_shape_names = {
    "browsUp", "browsDown", "eyeLidsClosed", "smile", "frown", "kiss", "lipsPressed", "mouthOpen",
};

std::optional<BlendShape> blend_shape_from_name(std::string_view name);

/// The avatar's whole facial state. The last three shapes are the lip-sync targets.
struct BlendShapeVector {
    std::array<double, blend_shape_count> weights{};

    double& operator[](BlendShape s) { return weights[static_cast<std::size_t>(s)]; }
    double operator[](BlendShape s) const { return weights[static_cast<std::size_t>(s)]; }

    bool in_range() const;

    friend bool operator==(const BlendShapeVector&, const BlendShapeVector&) = default;
};

struct VisemeWeights {
    double kiss = 0;
    double lipsPressed = 0;
    double mouthOpen = 0;

    friend bool operator==(const VisemeWeights&, const VisemeWeights&) = default;
};

struct ValenceArousal {
    double valence = 0;
    double arousal = 0;

    friend bool operator==(const ValenceArousal&, const ValenceArousal&) = default;
};

struct ExpressionPreset {
    std::string name;
    ValenceArousal anchor;
    BlendShapeVector weights;
};

using PresetTable = std::vector<ExpressionPreset>;

/// neutral, happy, sad, angry, surprised, relaxed.
PresetTable default_presets();

PresetTable parse_presets(std::string_view document);
PresetTable load_presets(const std::string& path);
std::string presets_to_json(const PresetTable& presets);

/// Structural problems with a preset table; empty means valid.
std::vector<std::string> validate_presets(const PresetTable& presets);

/// Shepard interpolation (inverse squared distance) over the preset anchors.
BlendShapeVector map_expression(const ValenceArousal& va, const PresetTable& presets);

inline constexpr double viseme_tint = 0.25;

/// While speaking, the mouth trio becomes clamp01(viseme + 0.25 * expression).
BlendShapeVector blend_with_visemes(const BlendShapeVector& expr, const VisemeWeights& visemes, bool speaking);

}  // namespace eca::expression
