#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tracebench/report_grammar.hpp"

namespace tracebench {

// Intersection over union; 0 for disjoint boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

// Everything scored about one sample, kept so shards can be merged and
// per-sample rows exported.
struct SampleScore {
    std::string sample_id;
    ChangeLabel true_label = ChangeLabel::Stable;
    PredLabel pred_label = PredLabel::Unknown;
    std::optional<double> iou;  // empty when the prediction had no usable box
    double bleu4 = 0.0;
    double meteor = 0.0;
    double rouge_l = 0.0;
    std::string anatomy;      // reference anatomy
    bool matched = true;      // a prediction line existed for this sample
    bool parse_error = false; // prediction text produced parse issues
};

// Which predicted finding scores against the reference: first finding with
// the same (anatomy, finding), else first with the same anatomy, else the
// grounded finding with highest IoU against the reference box, else the
// first finding.  nullptr when the report has no findings at all.
const ParsedFinding* select_finding(const TemporalReport& pred,
                                    const GroundedFinding& ref);

// Labels and box for one sample.  When the report has no findings the change
// label is recovered from the whole text and the box counts as missing.
// sample_id / NLG fields are the caller's to fill.
SampleScore score_sample(const TemporalReport& pred, const GroundedFinding& ref,
                         const ChangeLexicon& lexicon = ChangeLexicon::builtin());

// Rows: true label.  Columns: predicted label, with column 3 = Unknown
// (wrong against every true class, and never a predicted class itself).
struct ConfusionMatrix3 {
    std::array<std::array<std::uint64_t, 4>, 3> counts{};

    void add(ChangeLabel truth, PredLabel pred);
    std::uint64_t total() const;
    std::uint64_t diagonal() const;
    double accuracy() const;  // diagonal/total, 0 when empty
    std::uint64_t support(ChangeLabel label) const;
    std::uint64_t predicted(ChangeLabel label) const;
};

struct LabeledRef {
    std::string sample_id;
    ChangeLabel label = ChangeLabel::Stable;
};
struct LabeledPred {
    std::string sample_id;
    PredLabel label = PredLabel::Unknown;
};

// Requires both sides to carry the same multiset of sample ids
// ("SampleIdMismatch ..." otherwise).
std::optional<ConfusionMatrix3> confusion(const std::vector<LabeledRef>& refs,
                                          const std::vector<LabeledPred>& preds,
                                          std::string* error);

struct ClassMetrics {
    struct PerClass {
        double precision = 0.0;
        double recall = 0.0;
        double f1 = 0.0;
        std::uint64_t support = 0;
    };
    std::array<PerClass, 3> per_class{};  // Worsened, Improved, Stable
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
};

// Conventions: a class absent from predictions has precision 0; a class
// absent from the references has recall 0; F1 is 0 when P + R is.
ClassMetrics per_class_metrics(const ConfusionMatrix3& cm);

struct GroundingStats {
    double mean_iou = 0.0;         // over samples with a scored box
    double hit_rate = 0.0;         // IoU > threshold, out of all samples
    double hit_rate_scored = 0.0;  // same hits, out of box-bearing samples
    std::uint64_t n_scored = 0;
    std::uint64_t n_total = 0;
};

// `threshold` is strict (IoU exactly at it is a miss).  A sample without a
// scored box is a miss that still counts in hit_rate's denominator; both
// denominators are reported so no prediction can game the mean by dropping
// boxes.
GroundingStats grounding_stats(const std::vector<SampleScore>& samples,
                               double threshold);

struct AnatomyRow {
    std::string anatomy;
    double accuracy = 0.0;
    std::uint64_t support = 0;
};

// Change-label accuracy per reference anatomy, sorted by accuracy descending
// (ties: larger support, then name).  Anatomies under min_support merge into
// a trailing "other" row.  Supports always partition the input.
std::vector<AnatomyRow> per_anatomy_accuracy(
    const std::vector<SampleScore>& samples, std::uint64_t min_support = 0);

}  // namespace tracebench
