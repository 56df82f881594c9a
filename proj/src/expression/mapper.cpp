#include "eca/expression.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace eca::expression {

using nlohmann::json;

namespace {

constexpr double anchor_epsilon = 1e-9;

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

BlendShapeVector make(std::initializer_list<std::pair<BlendShape, double>> values) {
    BlendShapeVector v;
    for (auto [shape, w] : values)
        v[shape] = w;
    return v;
}

}  // namespace

std::optional<BlendShape> blend_shape_from_name(std::string_view name) {
    for (std::size_t i = 0; i < blend_shape_count; ++i) {
        if (blend_shape_names[i] == name)
            return static_cast<BlendShape>(i);
    }
    return std::nullopt;
}

bool BlendShapeVector::in_range() const {
    return std::all_of(weights.begin(), weights.end(), [](double w) { return w >= 0.0 && w <= 1.0; });
}

PresetTable default_presets() {
    using enum BlendShape;
    return {
        {"neutral", {0.0, 0.0}, {}},
        {"happy", {0.8, 0.4}, make({{smile, 0.9}, {browsUp, 0.3}, {mouthOpen, 0.2}})},
        {"sad", {-0.7, -0.4}, make({{frown, 0.8}, {browsUp, 0.4}, {eyeLidsClosed, 0.3}, {lipsPressed, 0.2}})},
        {"angry", {-0.6, 0.7}, make({{browsDown, 1.0}, {frown, 0.5}, {lipsPressed, 0.6}})},
        {"surprised", {0.2, 0.9}, make({{browsUp, 1.0}, {mouthOpen, 0.7}, {kiss, 0.2}})},
        {"relaxed", {0.5, -0.6}, make({{smile, 0.4}, {eyeLidsClosed, 0.5}})},
    };
}

PresetTable parse_presets(std::string_view document) try {
    json doc = json::parse(document);
    const json& list = doc.is_object() ? doc.at("presets") : doc;
    if (!list.is_array())
        throw std::runtime_error("preset table: expected an array of presets");
    PresetTable out;
    for (const auto& p : list) {
        ExpressionPreset preset;
        preset.name = p.at("name").get<std::string>();
        preset.anchor.valence = p.at("valence").get<double>();
        preset.anchor.arousal = p.at("arousal").get<double>();
        for (const auto& [name, w] : p.at("weights").items()) {
            auto shape = blend_shape_from_name(name);
            if (!shape)
                throw std::runtime_error("preset '" + preset.name + "': unknown blend shape '" + name + "'");
            preset.weights[*shape] = w.get<double>();
        }
        out.push_back(std::move(preset));
    }
    if (auto problems = validate_presets(out); !problems.empty())
        throw std::runtime_error("invalid preset table: " + problems.front());
    return out;
} catch (const json::exception& e) {
    throw std::runtime_error(std::string("preset table: ") + e.what());
}

PresetTable load_presets(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open preset file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_presets(buf.str());
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

std::string presets_to_json(const PresetTable& presets) {
    json list = json::array();
    for (const auto& p : presets) {
        json weights = json::object();
        for (std::size_t i = 0; i < blend_shape_count; ++i)
            weights[std::string(blend_shape_names[i])] = p.weights.weights[i];
        list.push_back({{"name", p.name},
                        {"valence", p.anchor.valence},
                        {"arousal", p.anchor.arousal},
                        {"weights", weights}});
    }
    return json{{"presets", list}}.dump(2);
}

std::vector<std::string> validate_presets(const PresetTable& presets) {
    std::vector<std::string> problems;
    if (presets.empty()) {
        problems.emplace_back("table is empty");
        return problems;
    }
    std::set<std::string> names;
    bool has_neutral = false;
    for (std::size_t i = 0; i < presets.size(); ++i) {
        const auto& p = presets[i];
        if (!names.insert(p.name).second)
            problems.push_back("duplicate preset name '" + p.name + "'");
        if (std::abs(p.anchor.valence) > 1 || std::abs(p.anchor.arousal) > 1)
            problems.push_back("preset '" + p.name + "' anchor outside [-1,1]^2");
        if (!p.weights.in_range())
            problems.push_back("preset '" + p.name + "' has weights outside [0,1]");
        for (std::size_t j = 0; j < i; ++j) {
            const auto& q = presets[j];
            if (std::hypot(p.anchor.valence - q.anchor.valence, p.anchor.arousal - q.anchor.arousal) < anchor_epsilon)
                problems.push_back("presets '" + q.name + "' and '" + p.name + "' share an anchor");
        }
        if (p.name == "neutral") {
            has_neutral = true;
            if (p.anchor != ValenceArousal{0, 0})
                problems.emplace_back("neutral preset must be anchored at (0,0)");
            if (p.weights != BlendShapeVector{})
                problems.emplace_back("neutral preset must have all-zero weights");
        }
    }
    if (!has_neutral)
        problems.emplace_back("no preset named 'neutral'");
    return problems;
}

BlendShapeVector map_expression(const ValenceArousal& va, const PresetTable& presets) {
    if (presets.empty())
        throw std::invalid_argument("map_expression: empty preset table");

    std::array<double, blend_shape_count> acc{};
    double weight_sum = 0;
    for (const auto& p : presets) {
        const double dv = va.valence - p.anchor.valence;
        const double da = va.arousal - p.anchor.arousal;
        const double d2 = dv * dv + da * da;
        if (std::sqrt(d2) < anchor_epsilon)
            return p.weights;
        const double w = 1.0 / d2;
        weight_sum += w;
        for (std::size_t i = 0; i < blend_shape_count; ++i)
            acc[i] += w * p.weights.weights[i];
    }
    BlendShapeVector out;
    for (std::size_t i = 0; i < blend_shape_count; ++i)
        out.weights[i] = clamp01(acc[i] / weight_sum);
    return out;
}

BlendShapeVector blend_with_visemes(const BlendShapeVector& expr, const VisemeWeights& visemes, bool speaking) {
    if (!speaking)
        return expr;
    BlendShapeVector out = expr;
    out[BlendShape::kiss] = clamp01(visemes.kiss + viseme_tint * expr[BlendShape::kiss]);
    out[BlendShape::lipsPressed] = clamp01(visemes.lipsPressed + viseme_tint * expr[BlendShape::lipsPressed]);
    out[BlendShape::mouthOpen] = clamp01(visemes.mouthOpen + viseme_tint * expr[BlendShape::mouthOpen]);
    return out;
}

}  // namespace eca::expression
