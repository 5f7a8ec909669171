#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tracebench/corpus.hpp"

namespace tracebench {

// Reference predictors that bracket the metric range: StableOnly is the
// majority-class floor, Echo the ceiling, Jitter a tunable midpoint.
enum class BaselineStrategy { StableOnly, Echo, Jitter };

const char* to_string(BaselineStrategy s);
std::optional<BaselineStrategy> baseline_strategy_from_string(std::string_view s);

struct BaselineSpec {
    BaselineStrategy strategy = BaselineStrategy::Echo;
    double noise_scale = 0.0;  // Jitter only: coordinate noise amplitude
    std::uint64_t seed = 0;
    bool omit_boxes = false;   // StableOnly variant without box tokens
};

struct Prediction {
    std::string sample_id;
    std::string text;
};

// Prediction for refs[index].  Randomness (Jitter) is keyed on
// seed ^ mix(index), so a sample's prediction does not depend on which
// subset of the corpus it is generated with.
Prediction predict_one(const BaselineSpec& spec, const Sample& ref,
                       std::size_t index);

std::vector<Prediction> predict(const BaselineSpec& spec,
                                const std::vector<Sample>& refs);

}  // namespace tracebench
