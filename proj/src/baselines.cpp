#include "tracebench/baselines.hpp"

#include <cmath>

#include "tracebench/rng.hpp"

namespace tracebench {

const char* to_string(BaselineStrategy s) {
    switch (s) {
        case BaselineStrategy::StableOnly: return "stable_only";
        case BaselineStrategy::Echo: return "echo";
        case BaselineStrategy::Jitter: return "jitter";
    }
    return "echo";
}

std::optional<BaselineStrategy> baseline_strategy_from_string(std::string_view s) {
    if (s == "stable_only") return BaselineStrategy::StableOnly;
    if (s == "echo") return BaselineStrategy::Echo;
    if (s == "jitter") return BaselineStrategy::Jitter;
    return std::nullopt;
}

namespace {

// Jittered coordinates snap to the same three-decimal grid the serializer
// uses, and always keep at least one grid cell of extent, so every emitted
// box token is valid.  Zero noise therefore reproduces the input box exactly
// (references are already grid-aligned).
std::pair<double, double> jitter_axis(Rng& rng, double lo, double hi,
                                      double noise) {
    double a = lo + rng.uniform(-noise, noise);
    double b = hi + rng.uniform(-noise, noise);
    a = std::min(std::max(a, 0.0), 1.0);
    b = std::min(std::max(b, 0.0), 1.0);
    if (a > b) std::swap(a, b);
    long long la = std::llround(a * 1000.0);
    long long lb = std::llround(b * 1000.0);
    if (la >= lb) {
        if (la >= 1000) la = 999;
        lb = la + 1;
    }
    return {static_cast<double>(la) / 1000.0, static_cast<double>(lb) / 1000.0};
}

}  // namespace

Prediction predict_one(const BaselineSpec& spec, const Sample& ref,
                       std::size_t index) {
    Prediction p;
    p.sample_id = ref.sample_id;
    switch (spec.strategy) {
        case BaselineStrategy::StableOnly: {
            GroundedFinding g = ref.reference;
            g.change = ChangeLabel::Stable;
            p.text = serialize_finding(g, !spec.omit_boxes);
            break;
        }
        case BaselineStrategy::Echo: {
            p.text = reference_text(ref);
            break;
        }
        case BaselineStrategy::Jitter: {
            // draw order fixed (x axis then y axis) and keyed on the sample's
            // position, so predictions are stable under corpus slicing
            Rng rng(spec.seed ^ static_cast<std::uint64_t>(index));
            GroundedFinding g = ref.reference;
            auto [x1, x2] = jitter_axis(rng, g.box.x1, g.box.x2, spec.noise_scale);
            auto [y1, y2] = jitter_axis(rng, g.box.y1, g.box.y2, spec.noise_scale);
            g.box = BoundingBox{x1, y1, x2, y2};
            p.text = serialize_finding(g);
            break;
        }
    }
    return p;
}

std::vector<Prediction> predict(const BaselineSpec& spec,
                                const std::vector<Sample>& refs) {
    std::vector<Prediction> out;
    out.reserve(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) {
        out.push_back(predict_one(spec, refs[i], i));
    }
    return out;
}

}  // namespace tracebench
