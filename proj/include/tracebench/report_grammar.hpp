#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tracebench {

// Axis-aligned rectangle in fractional image coordinates, origin top-left.
struct BoundingBox {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    // 0 <= x1 < x2 <= 1 and 0 <= y1 < y2 <= 1.
    bool valid() const;
    double area() const;
    // Each coordinate rounded half-up to three decimals (the precision used
    // when boxes are rendered into report text).
    BoundingBox quantized() const;
};

bool operator==(const BoundingBox& a, const BoundingBox& b);

enum class ChangeLabel { Worsened, Improved, Stable };

// Label recovered from free text; Unknown marks text with no recognized cue.
enum class PredLabel { Worsened, Improved, Stable, Unknown };

const char* to_string(ChangeLabel label);
const char* to_string(PredLabel label);
std::optional<ChangeLabel> change_label_from_string(std::string_view s);
PredLabel to_pred_label(ChangeLabel label);

// One fully specified finding: what changed, how, and where.
struct GroundedFinding {
    std::string finding;
    ChangeLabel change = ChangeLabel::Stable;
    BoundingBox box;
    std::string anatomy;
};

bool operator==(const GroundedFinding& a, const GroundedFinding& b);

// Cue phrase -> change label table used to recover labels from generated
// text.  Matching is case-insensitive on word boundaries; the earliest cue in
// the text wins, ties at one position going to the longest phrase.
class ChangeLexicon {
public:
    static const ChangeLexicon& builtin();
    // One "phrase<TAB>label" entry per line, label in
    // {worsened, improved, stable}.  Blank lines and lines starting with '#'
    // are skipped.
    static std::optional<ChangeLexicon> from_file(const std::string& path,
                                                  std::string* error);

    PredLabel match(std::string_view text) const;

    // True when `tokens[begin..]` ends exactly at a cue phrase starting at
    // `begin` (used to trim trailing cues off anatomy spans).
    bool phrase_spans_tail(const std::vector<std::string>& tokens,
                           std::size_t begin) const;
    // Longest cue phrase starting at tokens[begin], in tokens; 0 if none.
    std::size_t phrase_length_at(const std::vector<std::string>& tokens,
                                 std::size_t begin) const;

    const std::string& version() const { return version_; }

private:
    struct Entry {
        std::string phrase;  // lowercase, single-space separated
        PredLabel label = PredLabel::Unknown;
    };
    std::vector<Entry> entries_;
    std::string version_;
};

struct ParseIssue {
    enum class Code { MalformedBox, UnknownChangePhrase };
    Code code = Code::MalformedBox;
    std::size_t offset = 0;  // byte offset of the box token in the input
    std::string detail;
};

// One finding anchored at a box token.  `box` is empty when the token was
// malformed; `label` is Unknown when the sentence had no recognized cue.
struct ParsedFinding {
    std::string finding;
    PredLabel label = PredLabel::Unknown;
    std::optional<BoundingBox> box;
    std::string anatomy;
    std::size_t offset = 0;  // byte offset of the box token

    bool grounded() const { return box.has_value(); }
};

struct TemporalReport {
    std::vector<ParsedFinding> findings;  // ascending by offset
    std::vector<ParseIssue> issues;
    std::string raw_text;
};

// Lowercases, collapses whitespace runs to single spaces, trims surrounding
// punctuation.
std::string normalize_span(std::string_view text);

// Three decimals, half-up: format_coord(0.1965) == "0.196"... see tests.
std::string format_coord(double v);

// Renders one of the three canonical sentence templates:
//   worsened: "Interval worsening of {finding} {box} in {anatomy}."
//   improved: "Interval improvement of {finding} {box} in {anatomy}."
//   stable:   "{finding} {box} in {anatomy} is stable."
// where {box} is "<box>x1,y1,x2,y2</box>" with three-decimal coordinates.
// Pass include_box = false to drop the box token (and its padding space).
std::string serialize_finding(const GroundedFinding& f, bool include_box = true);

// Total over all input text: never throws, never fails; problems are
// reported as issues.  Findings are anchored at box tokens; narrative text
// without boxes contributes nothing.
TemporalReport parse_report(std::string_view text,
                            const ChangeLexicon& lexicon = ChangeLexicon::builtin());

// Change label of a single sentence (or any span of text).
PredLabel extract_change_label(std::string_view sentence,
                               const ChangeLexicon& lexicon = ChangeLexicon::builtin());

// Rectangle in pixel coordinates, as found in scene-graph style annotations.
struct PixelRect {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;
};

// Pixel rect -> fractional coordinates.  Rects are clamped to the image frame
// first; a rect with no extent after clamping is reported as degenerate via
// `error` and yields nullopt.
std::optional<BoundingBox> normalize_box(const PixelRect& px, double width,
                                         double height,
                                         std::string* error = nullptr);

}  // namespace tracebench
