#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tracebench/report_grammar.hpp"
#include "tracebench/rng.hpp"

namespace tracebench {

// One annotated abnormality on one study, in pixel coordinates.
struct Annotation {
    std::string finding;
    std::string anatomy;
    ChangeLabel change = ChangeLabel::Stable;
    PixelRect box_px;
};

// One imaging study of one patient.
struct StudyRecord {
    std::string patient_id;
    std::string study_id;
    std::int64_t study_order = 0;  // position in the patient's history
    std::string image_id;
    double image_width = 0.0;
    double image_height = 0.0;
    std::vector<Annotation> annotations;
};

// Indices into the study list handed to build_pairs.
struct TemporalPair {
    std::string patient_id;
    std::size_t prior = 0;
    std::size_t current = 0;
};

// One evaluation unit: a (prior, current) image pair plus the grounded
// change finding on the current study.  reference_text() renders the
// canonical sentence.
struct Sample {
    std::string sample_id;
    std::string patient_id;
    std::string prior_image_id;
    std::string current_image_id;
    GroundedFinding reference;
    std::string split;  // "train" | "val" | "test" | "" when unassigned
};

std::string reference_text(const Sample& s);

// Groups studies by patient, orders each history by study_order, and pairs
// every study with its immediate predecessor.  Patients with a single study
// contribute nothing.  Fails on two studies of one patient sharing a
// study_order ("DuplicateStudyOrder ...").
std::optional<std::vector<TemporalPair>> build_pairs(
    const std::vector<StudyRecord>& studies, std::string* error);

struct SkippedAnnotation {
    std::string patient_id;
    std::string study_id;
    std::size_t annotation_index = 0;
    std::string reason;
};

struct EmitResult {
    std::vector<Sample> samples;
    std::vector<SkippedAnnotation> skipped;
};

// One sample per annotation on the current study of each pair.  Boxes are
// normalized to fractional coordinates and quantized to the three-decimal
// precision used in rendered text; annotations whose boxes end up degenerate
// are skipped and logged.  sample_id = "<current_image_id>#<k>".
EmitResult emit_samples(const std::vector<TemporalPair>& pairs,
                        const std::vector<StudyRecord>& studies);

struct SplitCorpora {
    std::vector<Sample> train;
    std::vector<Sample> val;
    std::vector<Sample> test;
};

// Routes samples by patient according to `assignment` (patient_id -> split
// name).  All samples of one patient land in one split; a patient missing
// from the assignment fails the call ("UnassignedPatient ...").
std::optional<SplitCorpora> split_corpus(
    const std::vector<Sample>& samples,
    const std::map<std::string, std::string>& assignment, std::string* error);

// Index order: Worsened, Improved, Stable (matches ChangeLabel).
struct DistributionStats {
    std::size_t n_samples = 0;
    std::array<std::uint64_t, 3> label_counts{};
    std::array<double, 3> label_fractions{};  // all zero when undefined
    std::map<std::string, std::uint64_t> anatomy_counts;
    bool defined = false;  // false for the empty corpus
};

class StatsAccumulator {
public:
    void add(const Sample& s);
    DistributionStats finish() const;

private:
    DistributionStats stats_;
};

DistributionStats corpus_stats(const std::vector<Sample>& samples);

struct SynthConfig {
    std::size_t n_patients = 100;
    std::size_t min_studies = 2;
    std::size_t max_studies = 4;
    std::size_t min_annotations = 1;  // per study
    std::size_t max_annotations = 3;
    // Worsened, Improved, Stable.  Defaults to the reference test-split shape.
    std::array<double, 3> label_distribution{0.345, 0.217, 0.438};
    // Empty -> default_anatomy_distribution().
    std::vector<std::pair<std::string, double>> anatomy_distribution;
    double image_width = 1024.0;
    double image_height = 1024.0;
    std::uint64_t seed = 0;
};

// Anatomy frequencies shaped like the reference corpus: dominated by the
// lungs, with a long tail of rare regions.
const std::vector<std::pair<std::string, double>>& default_anatomy_distribution();

// Streaming generator: one patient's studies at a time, so callers can write
// arbitrarily large corpora in bounded memory.  Identical seed and config
// give identical records.
class SynthGenerator {
public:
    // Validates the config ("InvalidDistribution ..." on bad weights).
    static std::optional<SynthGenerator> create(const SynthConfig& cfg,
                                                std::string* error);

    bool done() const { return next_patient_ >= cfg_.n_patients; }
    std::vector<StudyRecord> next_patient();

    // Split assignment for the patient just generated, drawn from a stream
    // independent of the record stream (so requesting splits never changes
    // the corpus bytes).  Ratios: train, val, test.
    std::string assign_split(std::size_t patient_index,
                             const std::array<double, 3>& ratios) const;

private:
    explicit SynthGenerator(const SynthConfig& cfg);

    SynthConfig cfg_;
    std::vector<std::pair<std::string, double>> anatomies_;
    Rng rng_;
    std::size_t next_patient_ = 0;
};

std::optional<std::vector<StudyRecord>> synth_corpus(const SynthConfig& cfg,
                                                     std::string* error);

}  // namespace tracebench
