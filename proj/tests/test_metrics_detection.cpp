#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tracebench/metrics_detection.hpp"
#include "tracebench/report_grammar.hpp"
#include "tracebench/rng.hpp"

using namespace tracebench;

namespace {

struct MilliBox {
    // corners in thousandths, 0..1000
    std::uint32_t x1, y1, x2, y2;

    BoundingBox to_box() const {
        return {x1 / 1000.0, y1 / 1000.0, x2 / 1000.0, y2 / 1000.0};
    }
};

MilliBox random_milli_box(Rng& rng) {
    MilliBox b{};
    b.x1 = static_cast<std::uint32_t>(rng.uniform_int(0, 999));
    b.x2 = static_cast<std::uint32_t>(rng.uniform_int(b.x1 + 1, 1000));
    b.y1 = static_cast<std::uint32_t>(rng.uniform_int(0, 999));
    b.y2 = static_cast<std::uint32_t>(rng.uniform_int(b.y1 + 1, 1000));
    return b;
}

// Counting oracle for grid-aligned boxes: walk the 1000 cells of each axis
// and count the ones covered by one interval, the other, and both.  Exact for
// inputs on the thousandths grid, with no min/max interval arithmetic shared
// with the implementation.
std::uint64_t cells_in_both(std::uint32_t a1, std::uint32_t a2, std::uint32_t b1,
                            std::uint32_t b2) {
    std::uint64_t n = 0;
    for (std::uint32_t i = 0; i < 1000; ++i) {
        bool in_a = i >= a1 && i < a2;
        bool in_b = i >= b1 && i < b2;
        n += (in_a && in_b);
    }
    return n;
}

double oracle_iou(const MilliBox& a, const MilliBox& b) {
    std::uint64_t inter = cells_in_both(a.x1, a.x2, b.x1, b.x2) *
                          cells_in_both(a.y1, a.y2, b.y1, b.y2);
    std::uint64_t area_a =
        static_cast<std::uint64_t>(a.x2 - a.x1) * (a.y2 - a.y1);
    std::uint64_t area_b =
        static_cast<std::uint64_t>(b.x2 - b.x1) * (b.y2 - b.y1);
    std::uint64_t uni = area_a + area_b - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

SampleScore row(std::string id, ChangeLabel truth, PredLabel pred,
                std::optional<double> iou_value, std::string anatomy) {
    SampleScore s;
    s.sample_id = std::move(id);
    s.true_label = truth;
    s.pred_label = pred;
    s.iou = iou_value;
    s.anatomy = std::move(anatomy);
    return s;
}

}  // namespace

TEST_CASE("iou on hand-checked rectangles") {
    BoundingBox a{0.0, 0.0, 0.5, 0.5};
    CHECK(iou(a, a) == 1.0);  // identical boxes are exact, not approximate

    CHECK(iou(a, {0.5, 0.5, 1.0, 1.0}) == 0.0);   // touching corner
    CHECK(iou(a, {0.5, 0.0, 1.0, 0.5}) == 0.0);   // shared edge
    CHECK(iou(a, {0.75, 0.75, 1.0, 1.0}) == 0.0); // fully disjoint

    // quarter-offset overlap: intersection 1/16, union 7/16
    CHECK(iou(a, {0.25, 0.25, 0.75, 0.75}) ==
          doctest::Approx(1.0 / 7.0).epsilon(1e-12));

    // containment reduces to the area ratio
    CHECK(iou({0.0, 0.0, 1.0, 1.0}, {0.25, 0.25, 0.75, 0.75}) ==
          doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("iou is symmetric bit-for-bit") {
    Rng rng(99);
    for (int i = 0; i < 200; ++i) {
        BoundingBox a = random_milli_box(rng).to_box();
        BoundingBox b = random_milli_box(rng).to_box();
        CHECK(iou(a, b) == iou(b, a));
    }
}

TEST_CASE("iou agrees with the cell-counting oracle on grid boxes") {
    Rng rng(20260817);
    int overlapping = 0;
    for (int i = 0; i < 300; ++i) {
        MilliBox a = random_milli_box(rng);
        MilliBox b = random_milli_box(rng);
        double got = iou(a.to_box(), b.to_box());
        double want = oracle_iou(a, b);
        CHECK(std::abs(got - want) <= 1e-9);
        overlapping += (want > 0.0);
    }
    // the comparison must have exercised both branches
    CHECK(overlapping > 50);
    CHECK(overlapping < 300);
}

TEST_CASE("score_sample scores an echoed reference perfectly") {
    GroundedFinding ref{"pneumothorax",
                        ChangeLabel::Worsened,
                        {0.196, 0.107, 0.522, 0.634},
                        "right lung"};
    TemporalReport pred = parse_report(serialize_finding(ref));
    SampleScore s = score_sample(pred, ref);
    CHECK(s.true_label == ChangeLabel::Worsened);
    CHECK(s.pred_label == PredLabel::Worsened);
    REQUIRE(s.iou.has_value());
    CHECK(*s.iou == 1.0);
    CHECK(s.anatomy == "right lung");
    CHECK_FALSE(s.parse_error);
}

TEST_CASE("score_sample without any box keeps the text label, drops the iou") {
    GroundedFinding ref{"pleural effusion",
                        ChangeLabel::Stable,
                        {0.1, 0.2, 0.3, 0.4},
                        "left lung"};
    SampleScore s =
        score_sample(parse_report("Pleural effusion in left lung is stable."), ref);
    CHECK(s.pred_label == PredLabel::Stable);
    CHECK_FALSE(s.iou.has_value());
    CHECK_FALSE(s.parse_error);

    // no recognizable cue either
    SampleScore u = score_sample(parse_report("Lungs are clear."), ref);
    CHECK(u.pred_label == PredLabel::Unknown);
    CHECK_FALSE(u.iou.has_value());

    // empty text
    SampleScore e = score_sample(parse_report(""), ref);
    CHECK(e.pred_label == PredLabel::Unknown);
}

TEST_CASE("select_finding prefers anatomy+finding, then anatomy, then best box") {
    GroundedFinding ref{"consolidation",
                        ChangeLabel::Improved,
                        {0.200, 0.200, 0.400, 0.400},
                        "left lung"};

    SUBCASE("exact anatomy and finding wins over earlier findings") {
        TemporalReport pred = parse_report(
            "Interval worsening of opacity <box>0.100,0.100,0.300,0.300</box> "
            "in left lung. "
            "Interval improvement of consolidation "
            "<box>0.500,0.500,0.700,0.700</box> in left lung.");
        const ParsedFinding* sel = select_finding(pred, ref);
        REQUIRE(sel != nullptr);
        CHECK(sel->finding == "consolidation");
        CHECK(sel->label == PredLabel::Improved);
    }

    SUBCASE("same anatomy wins when the finding never matches") {
        TemporalReport pred = parse_report(
            "Interval worsening of opacity <box>0.100,0.100,0.300,0.300</box> "
            "in right lung. "
            "Opacity <box>0.500,0.500,0.700,0.700</box> in left lung is stable.");
        const ParsedFinding* sel = select_finding(pred, ref);
        REQUIRE(sel != nullptr);
        CHECK(sel->anatomy == "left lung");
        CHECK(sel->label == PredLabel::Stable);
    }

    SUBCASE("highest overlap wins when no anatomy matches") {
        TemporalReport pred = parse_report(
            "Interval worsening of opacity <box>0.600,0.600,0.900,0.900</box> "
            "in mediastinum. "
            "Interval worsening of opacity <box>0.210,0.210,0.410,0.410</box> "
            "in right lung.");
        const ParsedFinding* sel = select_finding(pred, ref);
        REQUIRE(sel != nullptr);
        CHECK(sel->anatomy == "right lung");  // near-perfect overlap
    }

    SUBCASE("first finding is the last resort when nothing is grounded") {
        TemporalReport pred = parse_report(
            "Interval worsening of opacity <box>0.9,0.9,0.1,0.1</box> "
            "in mediastinum. "
            "Opacity <box>bad</box> in cardiac silhouette is stable.");
        REQUIRE(pred.findings.size() == 2);
        CHECK(pred.findings[0].box == std::nullopt);
        CHECK(pred.findings[1].box == std::nullopt);
        const ParsedFinding* sel = select_finding(pred, ref);
        REQUIRE(sel != nullptr);
        CHECK(sel->anatomy == "mediastinum");

        SampleScore s = score_sample(pred, ref);
        CHECK(s.pred_label == PredLabel::Worsened);
        CHECK_FALSE(s.iou.has_value());
        CHECK(s.parse_error);  // the malformed boxes surfaced as issues
    }

    SUBCASE("empty report yields no selection") {
        TemporalReport pred = parse_report("No acute findings.");
        CHECK(select_finding(pred, ref) == nullptr);
    }
}

TEST_CASE("confusion matrix counting and derived rates") {
    ConfusionMatrix3 cm;
    cm.add(ChangeLabel::Worsened, PredLabel::Worsened);
    cm.add(ChangeLabel::Worsened, PredLabel::Stable);
    cm.add(ChangeLabel::Improved, PredLabel::Improved);
    cm.add(ChangeLabel::Stable, PredLabel::Stable);
    cm.add(ChangeLabel::Stable, PredLabel::Unknown);

    CHECK(cm.total() == 5);
    CHECK(cm.diagonal() == 3);
    CHECK(cm.accuracy() == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(cm.support(ChangeLabel::Worsened) == 2);
    CHECK(cm.support(ChangeLabel::Improved) == 1);
    CHECK(cm.support(ChangeLabel::Stable) == 2);
    CHECK(cm.predicted(ChangeLabel::Stable) == 2);
    CHECK(cm.counts[2][3] == 1);  // Unknown lands in the extra column

    ConfusionMatrix3 empty;
    CHECK(empty.accuracy() == 0.0);
    CHECK(empty.total() == 0);
}

TEST_CASE("confusion pairs rows by sample id and rejects mismatches") {
    std::vector<LabeledRef> refs = {{"s1", ChangeLabel::Worsened},
                                    {"s2", ChangeLabel::Stable}};
    std::string error;

    SUBCASE("ids pair up regardless of order") {
        std::vector<LabeledPred> preds = {{"s2", PredLabel::Stable},
                                          {"s1", PredLabel::Improved}};
        auto cm = confusion(refs, preds, &error);
        REQUIRE(cm.has_value());
        CHECK(cm->total() == 2);
        CHECK(cm->counts[0][1] == 1);  // Worsened -> Improved
        CHECK(cm->counts[2][2] == 1);  // Stable -> Stable
    }

    SUBCASE("size mismatch") {
        auto cm = confusion(refs, {{"s1", PredLabel::Stable}}, &error);
        CHECK_FALSE(cm.has_value());
        CHECK(error.find("SampleIdMismatch") == 0);
    }

    SUBCASE("duplicate prediction id") {
        auto cm = confusion(
            refs, {{"s1", PredLabel::Stable}, {"s1", PredLabel::Stable}}, &error);
        CHECK_FALSE(cm.has_value());
        CHECK(error.find("duplicate prediction id s1") != std::string::npos);
    }

    SUBCASE("missing prediction id") {
        auto cm = confusion(
            refs, {{"s1", PredLabel::Stable}, {"s9", PredLabel::Stable}}, &error);
        CHECK_FALSE(cm.has_value());
        CHECK(error.find("no prediction for s2") != std::string::npos);
    }
}

TEST_CASE("per_class_metrics on a fully worked matrix") {
    // rows Worsened/Improved/Stable; columns W, I, S, Unknown
    ConfusionMatrix3 cm;
    cm.counts = {{{2921, 1500, 3000, 366},
                  {600, 2000, 2000, 288},
                  {500, 700, 8456, 222}}};
    REQUIRE(cm.total() == 22553);
    REQUIRE(cm.support(ChangeLabel::Worsened) == 7787);
    REQUIRE(cm.support(ChangeLabel::Improved) == 4888);
    REQUIRE(cm.support(ChangeLabel::Stable) == 9878);

    ClassMetrics m = per_class_metrics(cm);
    const auto& w = m.per_class[0];
    CHECK(w.support == 7787);
    CHECK(w.precision == doctest::Approx(2921.0 / 4021.0).epsilon(1e-12));
    CHECK(w.recall == doctest::Approx(2921.0 / 7787.0).epsilon(1e-12));
    double wp = 2921.0 / 4021.0, wr = 2921.0 / 7787.0;
    CHECK(w.f1 == doctest::Approx(2 * wp * wr / (wp + wr)).epsilon(1e-12));

    const auto& i = m.per_class[1];
    CHECK(i.precision == doctest::Approx(2000.0 / 4200.0).epsilon(1e-12));
    CHECK(i.recall == doctest::Approx(2000.0 / 4888.0).epsilon(1e-12));

    const auto& s = m.per_class[2];
    CHECK(s.precision == doctest::Approx(8456.0 / 13456.0).epsilon(1e-12));
    CHECK(s.recall == doctest::Approx(8456.0 / 9878.0).epsilon(1e-12));

    CHECK(m.macro_precision ==
          doctest::Approx((w.precision + i.precision + s.precision) / 3.0));
    CHECK(m.macro_recall ==
          doctest::Approx((w.recall + i.recall + s.recall) / 3.0));
    CHECK(m.macro_f1 == doctest::Approx((w.f1 + i.f1 + s.f1) / 3.0));
}

TEST_CASE("per_class_metrics for a constant-stable predictor") {
    // everything lands in the Stable column
    ConfusionMatrix3 cm;
    cm.counts = {{{0, 0, 7787, 0}, {0, 0, 4888, 0}, {0, 0, 9878, 0}}};

    CHECK(cm.accuracy() == doctest::Approx(9878.0 / 22553.0).epsilon(1e-12));

    ClassMetrics m = per_class_metrics(cm);
    CHECK(m.per_class[0].precision == 0.0);  // never predicted
    CHECK(m.per_class[0].recall == 0.0);
    CHECK(m.per_class[0].f1 == 0.0);
    CHECK(m.per_class[1].f1 == 0.0);
    CHECK(m.per_class[2].recall == 1.0);

    double sp = 9878.0 / 22553.0;
    double sf1 = 2.0 * sp / (sp + 1.0);
    CHECK(m.per_class[2].f1 == doctest::Approx(sf1).epsilon(1e-12));
    CHECK(m.macro_f1 == doctest::Approx(sf1 / 3.0).epsilon(1e-12));
    CHECK(m.macro_f1 == doctest::Approx(0.2030566).epsilon(1e-4));
    CHECK(m.macro_recall == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("grounding_stats splits the two denominators") {
    std::vector<SampleScore> samples = {
        row("a", ChangeLabel::Stable, PredLabel::Stable, 1.0, "right lung"),
        row("b", ChangeLabel::Stable, PredLabel::Stable, 0.4, "right lung"),
        row("c", ChangeLabel::Stable, PredLabel::Stable, std::nullopt,
            "right lung"),
    };
    GroundingStats g = grounding_stats(samples, 0.5);
    CHECK(g.n_total == 3);
    CHECK(g.n_scored == 2);
    CHECK(g.mean_iou == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(g.hit_rate == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(g.hit_rate_scored == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("grounding_stats threshold is strict and empties are safe") {
    std::vector<SampleScore> at = {
        row("a", ChangeLabel::Stable, PredLabel::Stable, 0.5, "x")};
    GroundingStats g = grounding_stats(at, 0.5);
    CHECK(g.hit_rate == 0.0);  // exactly at the threshold is a miss
    CHECK(g.mean_iou == doctest::Approx(0.5));

    GroundingStats none = grounding_stats({}, 0.5);
    CHECK(none.n_total == 0);
    CHECK(none.n_scored == 0);
    CHECK(none.mean_iou == 0.0);
    CHECK(none.hit_rate == 0.0);
    CHECK(none.hit_rate_scored == 0.0);

    std::vector<SampleScore> boxless = {
        row("a", ChangeLabel::Stable, PredLabel::Stable, std::nullopt, "x")};
    GroundingStats b = grounding_stats(boxless, 0.5);
    CHECK(b.n_scored == 0);
    CHECK(b.hit_rate == 0.0);
    CHECK(b.hit_rate_scored == 0.0);
}

TEST_CASE("per_anatomy_accuracy orders rows and merges rare anatomies") {
    std::vector<SampleScore> samples;
    // right lung: 3 of 4 correct
    for (int i = 0; i < 3; ++i)
        samples.push_back(row("r", ChangeLabel::Stable, PredLabel::Stable,
                              std::nullopt, "right lung"));
    samples.push_back(row("r", ChangeLabel::Stable, PredLabel::Worsened,
                          std::nullopt, "right lung"));
    // left lung: 2 of 2 correct
    for (int i = 0; i < 2; ++i)
        samples.push_back(row("l", ChangeLabel::Improved, PredLabel::Improved,
                              std::nullopt, "left lung"));
    // mediastinum: 0 of 1
    samples.push_back(row("m", ChangeLabel::Worsened, PredLabel::Stable,
                          std::nullopt, "mediastinum"));
    // cardiac silhouette: 1 of 1
    samples.push_back(row("c", ChangeLabel::Worsened, PredLabel::Worsened,
                          std::nullopt, "cardiac silhouette"));

    SUBCASE("no merging") {
        auto rows = per_anatomy_accuracy(samples, 0);
        REQUIRE(rows.size() == 4);
        // ties on accuracy 1.0 break by support
        CHECK(rows[0].anatomy == "left lung");
        CHECK(rows[0].accuracy == 1.0);
        CHECK(rows[1].anatomy == "cardiac silhouette");
        CHECK(rows[2].anatomy == "right lung");
        CHECK(rows[2].accuracy == doctest::Approx(0.75));
        CHECK(rows[3].anatomy == "mediastinum");
        CHECK(rows[3].accuracy == 0.0);

        std::uint64_t total = 0;
        for (const auto& r : rows) total += r.support;
        CHECK(total == samples.size());
    }

    SUBCASE("rare anatomies fold into a trailing bucket") {
        auto rows = per_anatomy_accuracy(samples, 2);
        REQUIRE(rows.size() == 3);
        CHECK(rows[0].anatomy == "left lung");
        CHECK(rows[1].anatomy == "right lung");
        CHECK(rows[2].anatomy == "other");
        CHECK(rows[2].support == 2);  // mediastinum + cardiac silhouette
        CHECK(rows[2].accuracy == doctest::Approx(0.5));

        std::uint64_t total = 0;
        for (const auto& r : rows) total += r.support;
        CHECK(total == samples.size());
    }

    SUBCASE("name breaks exact ties") {
        std::vector<SampleScore> pair = {
            row("a", ChangeLabel::Stable, PredLabel::Stable, std::nullopt, "zeta"),
            row("b", ChangeLabel::Stable, PredLabel::Stable, std::nullopt,
                "alpha"),
        };
        auto rows = per_anatomy_accuracy(pair, 0);
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].anatomy == "alpha");
        CHECK(rows[1].anatomy == "zeta");
    }

    CHECK(per_anatomy_accuracy({}, 0).empty());
}
