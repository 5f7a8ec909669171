#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tracebench/baselines.hpp"
#include "tracebench/corpus.hpp"
#include "tracebench/metrics_detection.hpp"
#include "tracebench/metrics_nlg.hpp"

namespace tracebench {

// Everything that affects scores.  Worker count is deliberately execution
// detail, not config: reports are byte-identical for any worker count.
struct EvalConfig {
    double iou_threshold = 0.5;
    std::uint64_t min_anatomy_support = 0;
    std::string lexicon_version = "builtin-1";

    std::string fingerprint() const;  // canonical form used for merge checks
};

struct EvalCounts {
    std::uint64_t n_refs = 0;
    std::uint64_t n_preds = 0;       // prediction lines consumed
    std::uint64_t n_unmatched = 0;   // references with no prediction line
    std::uint64_t n_parse_errors = 0;
};

struct EvalReport {
    EvalConfig config;
    EvalCounts counts;
    NlgScores nlg;                // corpus means
    GroundingStats grounding;
    double change_accuracy = 0.0;
    ConfusionMatrix3 confusion;
    ClassMetrics class_metrics;
    std::vector<AnatomyRow> per_anatomy;

    // Canonical JSON document: sorted keys, 2-space indent, embeds tool name
    // and version.  Deterministic for identical inputs.
    std::string to_json() const;
    static std::optional<EvalReport> from_json(const std::string& text,
                                               std::string* error);
};

struct EvalResult {
    EvalReport report;
    std::vector<SampleScore> rows;  // sorted by sample_id
};

// Order-independent aggregation: rows are kept, sorted at finalize, and all
// means use pairwise summation, so the same sample set gives bit-identical
// aggregates however it was sharded.
class EvalAccumulator {
public:
    explicit EvalAccumulator(EvalConfig cfg) : config_(std::move(cfg)) {}

    void add(SampleScore row);
    const EvalConfig& config() const { return config_; }
    std::uint64_t size() const { return rows_.size(); }

    // Fails ("ConfigMismatch ...") unless both sides were produced under the
    // same config fingerprint.
    static std::optional<EvalAccumulator> merge(const EvalAccumulator& a,
                                                const EvalAccumulator& b,
                                                std::string* error);

    EvalResult finalize() const;

private:
    EvalConfig config_;
    std::vector<SampleScore> rows_;
    std::uint64_t n_preds_ = 0;

    friend EvalResult evaluate_scored(std::vector<SampleScore> rows,
                                      const EvalConfig& cfg,
                                      std::uint64_t n_preds);
};

// Scores every reference against the (at most one) prediction with its
// sample_id.  Missing predictions score worst-case: Unknown label, no box,
// empty text.  Duplicate prediction ids fail ("DuplicatePredictionId ...").
// `workers` splits the scoring phase across threads; results are identical
// for any value >= 1.
std::optional<EvalResult> evaluate(const std::vector<Sample>& refs,
                                   const std::vector<Prediction>& preds,
                                   const EvalConfig& cfg,
                                   const ChangeLexicon& lexicon = ChangeLexicon::builtin(),
                                   int workers = 1,
                                   std::string* error = nullptr);

// One row per sample, sorted by sample_id; `iou` column empty when no box
// was scored.
std::string per_sample_csv(const std::vector<SampleScore>& rows);

}  // namespace tracebench
