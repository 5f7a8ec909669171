#include "tracebench/metrics_detection.hpp"

#include <algorithm>
#include <map>

#include "tracebench/numeric_util.hpp"

namespace tracebench {

double iou(const BoundingBox& a, const BoundingBox& b) {
    double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    double inter = ix * iy;
    double uni = a.area() + b.area() - inter;
    return inter / uni;
}

const ParsedFinding* select_finding(const TemporalReport& pred,
                                    const GroundedFinding& ref) {
    if (pred.findings.empty()) return nullptr;
    for (const ParsedFinding& f : pred.findings) {
        if (f.anatomy == ref.anatomy && f.finding == ref.finding) return &f;
    }
    for (const ParsedFinding& f : pred.findings) {
        if (f.anatomy == ref.anatomy) return &f;
    }
    const ParsedFinding* best = nullptr;
    double best_iou = -1.0;
    for (const ParsedFinding& f : pred.findings) {
        if (!f.box) continue;
        double v = iou(*f.box, ref.box);
        if (v > best_iou) {
            best_iou = v;
            best = &f;
        }
    }
    if (best) return best;
    return &pred.findings.front();
}

SampleScore score_sample(const TemporalReport& pred, const GroundedFinding& ref,
                         const ChangeLexicon& lexicon) {
    SampleScore s;
    s.true_label = ref.change;
    s.anatomy = ref.anatomy;
    s.parse_error = !pred.issues.empty();
    const ParsedFinding* sel = select_finding(pred, ref);
    if (sel) {
        s.pred_label = sel->label;
        if (sel->box) s.iou = iou(*sel->box, ref.box);
    } else {
        // no grounded findings at all: label from the raw text, box missing
        s.pred_label = extract_change_label(pred.raw_text, lexicon);
    }
    return s;
}

void ConfusionMatrix3::add(ChangeLabel truth, PredLabel pred) {
    counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)] += 1;
}

std::uint64_t ConfusionMatrix3::total() const {
    std::uint64_t t = 0;
    for (const auto& row : counts)
        for (std::uint64_t c : row) t += c;
    return t;
}

std::uint64_t ConfusionMatrix3::diagonal() const {
    std::uint64_t d = 0;
    for (std::size_t i = 0; i < 3; ++i) d += counts[i][i];
    return d;
}

double ConfusionMatrix3::accuracy() const {
    std::uint64_t t = total();
    return t == 0 ? 0.0
                  : static_cast<double>(diagonal()) / static_cast<double>(t);
}

std::uint64_t ConfusionMatrix3::support(ChangeLabel label) const {
    const auto& row = counts[static_cast<std::size_t>(label)];
    std::uint64_t t = 0;
    for (std::uint64_t c : row) t += c;
    return t;
}

std::uint64_t ConfusionMatrix3::predicted(ChangeLabel label) const {
    std::size_t col = static_cast<std::size_t>(label);
    std::uint64_t t = 0;
    for (std::size_t r = 0; r < 3; ++r) t += counts[r][col];
    return t;
}

std::optional<ConfusionMatrix3> confusion(const std::vector<LabeledRef>& refs,
                                          const std::vector<LabeledPred>& preds,
                                          std::string* error) {
    if (refs.size() != preds.size()) {
        if (error) {
            *error = "SampleIdMismatch: " + std::to_string(refs.size()) +
                     " references vs " + std::to_string(preds.size()) +
                     " predictions";
        }
        return std::nullopt;
    }
    std::map<std::string, PredLabel> by_id;
    for (const LabeledPred& p : preds) {
        if (!by_id.emplace(p.sample_id, p.label).second) {
            if (error) *error = "SampleIdMismatch: duplicate prediction id " + p.sample_id;
            return std::nullopt;
        }
    }
    ConfusionMatrix3 cm;
    for (const LabeledRef& r : refs) {
        auto it = by_id.find(r.sample_id);
        if (it == by_id.end()) {
            if (error) *error = "SampleIdMismatch: no prediction for " + r.sample_id;
            return std::nullopt;
        }
        cm.add(r.label, it->second);
    }
    return cm;
}

ClassMetrics per_class_metrics(const ConfusionMatrix3& cm) {
    ClassMetrics out;
    for (std::size_t c = 0; c < 3; ++c) {
        ChangeLabel label = static_cast<ChangeLabel>(c);
        std::uint64_t tp = cm.counts[c][c];
        std::uint64_t support = cm.support(label);
        std::uint64_t predicted = cm.predicted(label);
        auto& pc = out.per_class[c];
        pc.support = support;
        pc.precision = predicted == 0 ? 0.0
                                      : static_cast<double>(tp) /
                                            static_cast<double>(predicted);
        pc.recall = support == 0 ? 0.0
                                 : static_cast<double>(tp) /
                                       static_cast<double>(support);
        pc.f1 = (pc.precision + pc.recall) == 0.0
                    ? 0.0
                    : 2.0 * pc.precision * pc.recall / (pc.precision + pc.recall);
        out.macro_precision += pc.precision / 3.0;
        out.macro_recall += pc.recall / 3.0;
        out.macro_f1 += pc.f1 / 3.0;
    }
    return out;
}

GroundingStats grounding_stats(const std::vector<SampleScore>& samples,
                               double threshold) {
    GroundingStats out;
    out.n_total = samples.size();
    std::vector<double> ious;
    ious.reserve(samples.size());
    std::uint64_t hits = 0;
    for (const SampleScore& s : samples) {
        if (!s.iou) continue;  // boxless: a miss, but never part of the mean
        ious.push_back(*s.iou);
        if (*s.iou > threshold) ++hits;
    }
    out.n_scored = ious.size();
    if (out.n_scored > 0) {
        out.mean_iou = pairwise_sum(ious) / static_cast<double>(out.n_scored);
        out.hit_rate_scored =
            static_cast<double>(hits) / static_cast<double>(out.n_scored);
    }
    if (out.n_total > 0) {
        out.hit_rate = static_cast<double>(hits) / static_cast<double>(out.n_total);
    }
    return out;
}

std::vector<AnatomyRow> per_anatomy_accuracy(
    const std::vector<SampleScore>& samples, std::uint64_t min_support) {
    struct Tally {
        std::uint64_t correct = 0;
        std::uint64_t total = 0;
    };
    std::map<std::string, Tally> tallies;
    for (const SampleScore& s : samples) {
        Tally& t = tallies[s.anatomy];
        ++t.total;
        t.correct += (s.pred_label == to_pred_label(s.true_label));
    }
    std::vector<AnatomyRow> rows;
    Tally other;
    for (const auto& [anatomy, t] : tallies) {
        if (t.total < min_support) {
            other.correct += t.correct;
            other.total += t.total;
            continue;
        }
        rows.push_back({anatomy,
                        static_cast<double>(t.correct) / static_cast<double>(t.total),
                        t.total});
    }
    std::sort(rows.begin(), rows.end(), [](const AnatomyRow& a, const AnatomyRow& b) {
        if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
        if (a.support != b.support) return a.support > b.support;
        return a.anatomy < b.anatomy;
    });
    if (other.total > 0) {
        rows.push_back({"other",
                        static_cast<double>(other.correct) /
                            static_cast<double>(other.total),
                        other.total});
    }
    return rows;
}

}  // namespace tracebench
