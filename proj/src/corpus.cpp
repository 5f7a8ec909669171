#include "tracebench/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace tracebench {

std::string reference_text(const Sample& s) {
    return serialize_finding(s.reference);
}

std::optional<std::vector<TemporalPair>> build_pairs(
    const std::vector<StudyRecord>& studies, std::string* error) {
    // patient -> study indices, patients in sorted order for determinism
    std::map<std::string, std::vector<std::size_t>> by_patient;
    for (std::size_t i = 0; i < studies.size(); ++i) {
        by_patient[studies[i].patient_id].push_back(i);
    }
    std::vector<TemporalPair> pairs;
    for (auto& [patient_id, indices] : by_patient) {
        std::sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) {
            return studies[a].study_order < studies[b].study_order;
        });
        for (std::size_t k = 1; k < indices.size(); ++k) {
            if (studies[indices[k]].study_order ==
                studies[indices[k - 1]].study_order) {
                if (error) {
                    *error = "DuplicateStudyOrder: patient " + patient_id +
                             " has two studies with order " +
                             std::to_string(studies[indices[k]].study_order);
                }
                return std::nullopt;
            }
            pairs.push_back({patient_id, indices[k - 1], indices[k]});
        }
    }
    return pairs;
}

EmitResult emit_samples(const std::vector<TemporalPair>& pairs,
                        const std::vector<StudyRecord>& studies) {
    EmitResult out;
    for (const TemporalPair& pair : pairs) {
        const StudyRecord& prior = studies[pair.prior];
        const StudyRecord& current = studies[pair.current];
        for (std::size_t k = 0; k < current.annotations.size(); ++k) {
            const Annotation& ann = current.annotations[k];
            std::string why;
            auto box = normalize_box(ann.box_px, current.image_width,
                                     current.image_height, &why);
            if (!box) {
                out.skipped.push_back({current.patient_id, current.study_id, k, why});
                continue;
            }
            // quantize up front so rendered text and stored box agree exactly
            BoundingBox q = box->quantized();
            if (!q.valid()) {
                out.skipped.push_back({current.patient_id, current.study_id, k,
                                       "degenerate box after three-decimal "
                                       "quantization"});
                continue;
            }
            Sample s;
            s.sample_id = current.image_id + "#" + std::to_string(k);
            s.patient_id = current.patient_id;
            s.prior_image_id = prior.image_id;
            s.current_image_id = current.image_id;
            s.reference = GroundedFinding{normalize_span(ann.finding), ann.change,
                                          q, normalize_span(ann.anatomy)};
            out.samples.push_back(std::move(s));
        }
    }
    return out;
}

std::optional<SplitCorpora> split_corpus(
    const std::vector<Sample>& samples,
    const std::map<std::string, std::string>& assignment, std::string* error) {
    SplitCorpora out;
    for (const Sample& s : samples) {
        auto it = assignment.find(s.patient_id);
        if (it == assignment.end()) {
            if (error) *error = "UnassignedPatient: " + s.patient_id;
            return std::nullopt;
        }
        Sample routed = s;
        routed.split = it->second;
        if (it->second == "train") {
            out.train.push_back(std::move(routed));
        } else if (it->second == "val") {
            out.val.push_back(std::move(routed));
        } else if (it->second == "test") {
            out.test.push_back(std::move(routed));
        } else {
            if (error) {
                *error = "UnknownSplit: patient " + s.patient_id +
                         " assigned to '" + it->second + "'";
            }
            return std::nullopt;
        }
    }
    return out;
}

void StatsAccumulator::add(const Sample& s) {
    ++stats_.n_samples;
    ++stats_.label_counts[static_cast<std::size_t>(s.reference.change)];
    ++stats_.anatomy_counts[s.reference.anatomy];
}

DistributionStats StatsAccumulator::finish() const {
    DistributionStats out = stats_;
    if (out.n_samples > 0) {
        out.defined = true;
        for (std::size_t i = 0; i < 3; ++i) {
            out.label_fractions[i] = static_cast<double>(out.label_counts[i]) /
                                     static_cast<double>(out.n_samples);
        }
    }
    return out;
}

DistributionStats corpus_stats(const std::vector<Sample>& samples) {
    StatsAccumulator acc;
    for (const Sample& s : samples) acc.add(s);
    return acc.finish();
}

// --- synthetic corpora ------------------------------------------------------

namespace {

// cue-free clinical vocabulary, so rendered sentences carry exactly one
// change cue (the template's own)
const std::vector<std::string>& finding_vocab() {
    static const std::vector<std::string> kFindings = {
        "pneumothorax",  "pleural effusion", "consolidation",
        "atelectasis",   "pulmonary edema",  "opacity",
        "pneumonia",     "lung lesion",
    };
    return kFindings;
}

struct Region {
    const char* anatomy;
    BoundingBox nominal;
};

const Region kRegions[] = {
    {"right lung", {0.08, 0.15, 0.45, 0.85}},
    {"left lung", {0.55, 0.15, 0.92, 0.85}},
    {"cardiac silhouette", {0.35, 0.45, 0.68, 0.80}},
    {"mediastinum", {0.40, 0.12, 0.62, 0.55}},
    {"right hilar structures", {0.28, 0.35, 0.45, 0.55}},
    {"left hilar structures", {0.55, 0.35, 0.72, 0.55}},
    {"right apical zone", {0.08, 0.05, 0.40, 0.25}},
};

const BoundingBox kFallbackRegion{0.25, 0.25, 0.75, 0.75};

const BoundingBox& nominal_region(const std::string& anatomy) {
    for (const Region& r : kRegions) {
        if (anatomy == r.anatomy) return r.nominal;
    }
    return kFallbackRegion;
}

std::string padded_id(char prefix, std::size_t n, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%c%0*zu", prefix, width, n);
    return buf;
}

}  // namespace

const std::vector<std::pair<std::string, double>>& default_anatomy_distribution() {
    static const std::vector<std::pair<std::string, double>> kDefault = {
        {"right lung", 0.7690},
        {"left lung", 0.1130},
        {"cardiac silhouette", 0.0828},
        {"mediastinum", 0.0150},
        {"left hilar structures", 0.0100},
        {"right apical zone", 0.0075},
        {"right hilar structures", 0.0027},
    };
    return kDefault;
}

std::optional<SynthGenerator> SynthGenerator::create(const SynthConfig& cfg,
                                                     std::string* error) {
    auto fail = [&](const std::string& what) {
        if (error) *error = what;
        return std::nullopt;
    };
    double label_sum = 0.0;
    for (double w : cfg.label_distribution) {
        if (w < 0.0) return fail("InvalidDistribution: negative label weight");
        label_sum += w;
    }
    if (label_sum <= 0.0) return fail("InvalidDistribution: label weights sum to 0");
    const auto& anatomies = cfg.anatomy_distribution.empty()
                                ? default_anatomy_distribution()
                                : cfg.anatomy_distribution;
    double anat_sum = 0.0;
    for (const auto& [name, w] : anatomies) {
        if (name.empty()) return fail("InvalidDistribution: empty anatomy name");
        if (w < 0.0) return fail("InvalidDistribution: negative anatomy weight");
        anat_sum += w;
    }
    if (anat_sum <= 0.0) return fail("InvalidDistribution: anatomy weights sum to 0");
    if (cfg.min_studies > cfg.max_studies || cfg.max_studies == 0) {
        return fail("InvalidDistribution: bad study count range");
    }
    if (cfg.min_annotations > cfg.max_annotations) {
        return fail("InvalidDistribution: bad annotation count range");
    }
    if (!(cfg.image_width > 0.0) || !(cfg.image_height > 0.0)) {
        return fail("InvalidDistribution: image dimensions must be positive");
    }
    SynthGenerator gen(cfg);
    gen.anatomies_.assign(anatomies.begin(), anatomies.end());
    return gen;
}

SynthGenerator::SynthGenerator(const SynthConfig& cfg)
    : cfg_(cfg), rng_(mix64(cfg.seed)) {}

std::vector<StudyRecord> SynthGenerator::next_patient() {
    std::vector<StudyRecord> out;
    if (done()) return out;
    std::size_t patient_index = next_patient_++;
    std::string pid = padded_id('P', patient_index + 1, 6);

    std::vector<double> label_weights(cfg_.label_distribution.begin(),
                                      cfg_.label_distribution.end());
    std::vector<double> anatomy_weights;
    anatomy_weights.reserve(anatomies_.size());
    for (const auto& [name, w] : anatomies_) anatomy_weights.push_back(w);

    std::size_t n_studies = static_cast<std::size_t>(
        rng_.uniform_int(cfg_.min_studies, cfg_.max_studies));
    for (std::size_t t = 0; t < n_studies; ++t) {
        StudyRecord rec;
        rec.patient_id = pid;
        rec.study_id = pid + "-" + padded_id('S', t + 1, 2);
        rec.study_order = static_cast<std::int64_t>(t + 1);
        rec.image_id = pid + "-" + padded_id('I', t + 1, 2);
        rec.image_width = cfg_.image_width;
        rec.image_height = cfg_.image_height;

        std::size_t n_ann = static_cast<std::size_t>(
            rng_.uniform_int(cfg_.min_annotations, cfg_.max_annotations));
        for (std::size_t a = 0; a < n_ann; ++a) {
            Annotation ann;
            ann.change = static_cast<ChangeLabel>(rng_.pick_weighted(label_weights));
            ann.anatomy = anatomies_[rng_.pick_weighted(anatomy_weights)].first;
            ann.finding = finding_vocab()[static_cast<std::size_t>(
                rng_.uniform_int(0, finding_vocab().size() - 1))];

            // anatomy-conditioned box: nominal region plus corner jitter
            const BoundingBox& nom = nominal_region(ann.anatomy);
            double x1 = std::min(std::max(nom.x1 + rng_.uniform(-0.04, 0.04), 0.0), 0.90);
            double x2 = std::min(std::max(nom.x2 + rng_.uniform(-0.04, 0.04), x1 + 0.02), 1.0);
            double y1 = std::min(std::max(nom.y1 + rng_.uniform(-0.04, 0.04), 0.0), 0.90);
            double y2 = std::min(std::max(nom.y2 + rng_.uniform(-0.04, 0.04), y1 + 0.02), 1.0);
            ann.box_px = PixelRect{
                static_cast<double>(std::llround(x1 * cfg_.image_width)),
                static_cast<double>(std::llround(y1 * cfg_.image_height)),
                static_cast<double>(std::llround(x2 * cfg_.image_width)),
                static_cast<double>(std::llround(y2 * cfg_.image_height))};
            rec.annotations.push_back(std::move(ann));
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::string SynthGenerator::assign_split(std::size_t patient_index,
                                         const std::array<double, 3>& ratios) const {
    // independent stream: requesting splits never perturbs the corpus bytes
    Rng r(mix64(cfg_.seed ^ 0x53504c4954ULL) ^ mix64(patient_index + 1));
    double total = ratios[0] + ratios[1] + ratios[2];
    double u = r.uniform01() * (total > 0.0 ? total : 1.0);
    if (u < ratios[0]) return "train";
    if (u < ratios[0] + ratios[1]) return "val";
    return "test";
}

std::optional<std::vector<StudyRecord>> synth_corpus(const SynthConfig& cfg,
                                                     std::string* error) {
    auto gen = SynthGenerator::create(cfg, error);
    if (!gen) return std::nullopt;
    std::vector<StudyRecord> out;
    while (!gen->done()) {
        for (StudyRecord& rec : gen->next_patient()) out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace tracebench
