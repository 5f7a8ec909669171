#include "tracebench/report_grammar.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace tracebench {

namespace {

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

char ascii_lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

std::string lower_copy(std::string_view s) {
    std::string out(s.size(), '\0');
    std::transform(s.begin(), s.end(), out.begin(), ascii_lower);
    return out;
}

std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string join_words(const std::vector<std::string>& words, std::size_t begin,
                       std::size_t end) {
    std::string out;
    for (std::size_t i = begin; i < end; ++i) {
        if (i > begin) out.push_back(' ');
        out += words[i];
    }
    return out;
}

}  // namespace

bool BoundingBox::valid() const {
    return 0.0 <= x1 && x1 < x2 && x2 <= 1.0 && 0.0 <= y1 && y1 < y2 && y2 <= 1.0;
}

double BoundingBox::area() const { return (x2 - x1) * (y2 - y1); }

BoundingBox BoundingBox::quantized() const {
    auto q = [](double v) { return static_cast<double>(std::llround(v * 1000.0)) / 1000.0; };
    return BoundingBox{q(x1), q(y1), q(x2), q(y2)};
}

bool operator==(const BoundingBox& a, const BoundingBox& b) {
    return a.x1 == b.x1 && a.y1 == b.y1 && a.x2 == b.x2 && a.y2 == b.y2;
}

const char* to_string(ChangeLabel label) {
    switch (label) {
        case ChangeLabel::Worsened: return "worsened";
        case ChangeLabel::Improved: return "improved";
        case ChangeLabel::Stable: return "stable";
    }
    return "stable";
}

const char* to_string(PredLabel label) {
    switch (label) {
        case PredLabel::Worsened: return "worsened";
        case PredLabel::Improved: return "improved";
        case PredLabel::Stable: return "stable";
        case PredLabel::Unknown: return "unknown";
    }
    return "unknown";
}

std::optional<ChangeLabel> change_label_from_string(std::string_view s) {
    if (s == "worsened") return ChangeLabel::Worsened;
    if (s == "improved") return ChangeLabel::Improved;
    if (s == "stable") return ChangeLabel::Stable;
    return std::nullopt;
}

PredLabel to_pred_label(ChangeLabel label) {
    switch (label) {
        case ChangeLabel::Worsened: return PredLabel::Worsened;
        case ChangeLabel::Improved: return PredLabel::Improved;
        case ChangeLabel::Stable: return PredLabel::Stable;
    }
    return PredLabel::Unknown;
}

bool operator==(const GroundedFinding& a, const GroundedFinding& b) {
    return a.finding == b.finding && a.change == b.change && a.box == b.box &&
           a.anatomy == b.anatomy;
}

std::string normalize_span(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char raw : text) {
        char c = ascii_lower(raw);
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' '), pending_space = false;
        out.push_back(c);
    }
    // trim punctuation off both ends (internal punctuation stays)
    std::size_t b = 0, e = out.size();
    while (b < e && !is_word_char(out[b])) ++b;
    while (e > b && !is_word_char(out[e - 1])) --e;
    return out.substr(b, e - b);
}

std::string format_coord(double v) {
    long long milli = std::llround(v * 1000.0);
    if (milli < 0) milli = 0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld.%03lld", milli / 1000, milli % 1000);
    return buf;
}

std::string serialize_finding(const GroundedFinding& f, bool include_box) {
    std::string box;
    if (include_box) {
        box = "<box>" + format_coord(f.box.x1) + "," + format_coord(f.box.y1) +
              "," + format_coord(f.box.x2) + "," + format_coord(f.box.y2) +
              "</box>";
    }
    std::string out;
    switch (f.change) {
        case ChangeLabel::Worsened:
            out = "Interval worsening of " + f.finding;
            break;
        case ChangeLabel::Improved:
            out = "Interval improvement of " + f.finding;
            break;
        case ChangeLabel::Stable:
            out = f.finding;
            break;
    }
    if (include_box) out += " " + box;
    out += " in " + f.anatomy;
    if (f.change == ChangeLabel::Stable) out += " is stable";
    out += ".";
    return out;
}

// --- ChangeLexicon ---------------------------------------------------------

const ChangeLexicon& ChangeLexicon::builtin() {
    static const ChangeLexicon instance = [] {
        ChangeLexicon lx;
        lx.version_ = "builtin-1";
        auto add = [&lx](const char* phrase, PredLabel label) {
            lx.entries_.push_back({phrase, label});
        };
        add("worsening", PredLabel::Worsened);
        add("worsened", PredLabel::Worsened);
        add("increased", PredLabel::Worsened);
        add("increasing", PredLabel::Worsened);
        add("progression", PredLabel::Worsened);
        add("improvement", PredLabel::Improved);
        add("improved", PredLabel::Improved);
        add("improving", PredLabel::Improved);
        add("decreased", PredLabel::Improved);
        add("decreasing", PredLabel::Improved);
        add("resolving", PredLabel::Improved);
        add("resolved", PredLabel::Improved);
        add("stable", PredLabel::Stable);
        add("unchanged", PredLabel::Stable);
        add("no change", PredLabel::Stable);
        return lx;
    }();
    return instance;
}

std::optional<ChangeLexicon> ChangeLexicon::from_file(const std::string& path,
                                                      std::string* error) {
    std::ifstream in(path);
    if (!in) {
        if (error) *error = "cannot open lexicon file: " + path;
        return std::nullopt;
    }
    ChangeLexicon lx;
    lx.version_ = "file:" + path;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            if (error) {
                *error = path + ":" + std::to_string(line_no) +
                         ": expected phrase<TAB>label";
            }
            return std::nullopt;
        }
        std::string phrase = normalize_span(line.substr(0, tab));
        std::string label_str = normalize_span(line.substr(tab + 1));
        auto label = change_label_from_string(label_str);
        if (phrase.empty() || !label) {
            if (error) {
                *error = path + ":" + std::to_string(line_no) +
                         ": bad lexicon entry '" + line + "'";
            }
            return std::nullopt;
        }
        lx.entries_.push_back({std::move(phrase), to_pred_label(*label)});
    }
    if (lx.entries_.empty()) {
        if (error) *error = path + ": empty lexicon";
        return std::nullopt;
    }
    return lx;
}

PredLabel ChangeLexicon::match(std::string_view text) const {
    // normalize first so multi-word cues survive irregular spacing
    std::string m = normalize_span(text);
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (i > 0 && is_word_char(m[i - 1])) continue;  // mid-word position
        const Entry* best = nullptr;
        for (const Entry& e : entries_) {
            if (e.phrase.size() > m.size() - i) continue;
            if (m.compare(i, e.phrase.size(), e.phrase) != 0) continue;
            std::size_t end = i + e.phrase.size();
            if (end < m.size() && is_word_char(m[end])) continue;
            if (!best || e.phrase.size() > best->phrase.size()) best = &e;
        }
        if (best) return best->label;
    }
    return PredLabel::Unknown;
}

std::size_t ChangeLexicon::phrase_length_at(const std::vector<std::string>& tokens,
                                            std::size_t begin) const {
    std::size_t best = 0;
    for (const Entry& e : entries_) {
        std::vector<std::string> words = split_words(e.phrase);
        if (words.empty() || begin + words.size() > tokens.size()) continue;
        if (std::equal(words.begin(), words.end(), tokens.begin() + begin) &&
            words.size() > best) {
            best = words.size();
        }
    }
    return best;
}

bool ChangeLexicon::phrase_spans_tail(const std::vector<std::string>& tokens,
                                      std::size_t begin) const {
    std::size_t len = phrase_length_at(tokens, begin);
    return len > 0 && begin + len == tokens.size();
}

PredLabel extract_change_label(std::string_view sentence,
                               const ChangeLexicon& lexicon) {
    return lexicon.match(sentence);
}

// --- parse_report ----------------------------------------------------------

namespace {

struct BoxSpan {
    std::size_t open = 0;         // offset of "<box>"
    std::size_t inner_begin = 0;  // first char after "<box>"
    std::size_t inner_end = 0;    // offset of "</box>" (or text end if unclosed)
    std::size_t end = 0;          // first char after "</box>"
    bool closed = false;
};

std::vector<BoxSpan> find_box_spans(const std::string& lower) {
    std::vector<BoxSpan> spans;
    std::size_t pos = 0;
    while (true) {
        std::size_t open = lower.find("<box>", pos);
        if (open == std::string::npos) break;
        BoxSpan span;
        span.open = open;
        span.inner_begin = open + 5;
        std::size_t close = lower.find("</box>", span.inner_begin);
        if (close == std::string::npos) {
            span.inner_end = lower.size();
            span.end = lower.size();
            spans.push_back(span);
            break;
        }
        span.inner_end = close;
        span.end = close + 6;
        span.closed = true;
        spans.push_back(span);
        pos = span.end;
    }
    return spans;
}

// Coordinates must each parse fully as a number; anything else is malformed.
std::optional<BoundingBox> parse_coords(std::string_view inner,
                                        std::string* detail) {
    std::vector<double> vals;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= inner.size(); ++i) {
        if (i == inner.size() || inner[i] == ',') {
            std::string piece(inner.substr(start, i - start));
            // trim whitespace
            std::size_t b = piece.find_first_not_of(" \t\r\n");
            std::size_t e = piece.find_last_not_of(" \t\r\n");
            if (b == std::string::npos) {
                *detail = "empty coordinate";
                return std::nullopt;
            }
            piece = piece.substr(b, e - b + 1);
            char* endp = nullptr;
            double v = std::strtod(piece.c_str(), &endp);
            if (endp != piece.c_str() + piece.size()) {
                *detail = "non-numeric coordinate '" + piece + "'";
                return std::nullopt;
            }
            vals.push_back(v);
            start = i + 1;
        }
    }
    if (vals.size() != 4) {
        *detail = "expected 4 coordinates, got " + std::to_string(vals.size());
        return std::nullopt;
    }
    BoundingBox box{vals[0], vals[1], vals[2], vals[3]};
    if (!box.valid()) {
        *detail = "coordinates violate 0<=x1<x2<=1, 0<=y1<y2<=1";
        return std::nullopt;
    }
    return box;
}

// Sentence boundaries: '.' followed by whitespace or end of text, skipping
// anything inside a box span (coordinate dots never end a sentence).
std::vector<std::pair<std::size_t, std::size_t>> sentence_ranges(
    const std::string& text, const std::vector<BoxSpan>& spans) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t start = 0;
    std::size_t span_idx = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        while (span_idx < spans.size() && spans[span_idx].end <= i) ++span_idx;
        if (span_idx < spans.size() && i >= spans[span_idx].open &&
            i < spans[span_idx].end) {
            i = spans[span_idx].end - 1;  // loop increment moves past the span
            continue;
        }
        if (text[i] == '.' &&
            (i + 1 == text.size() ||
             std::isspace(static_cast<unsigned char>(text[i + 1])))) {
            out.emplace_back(start, i + 1);
            start = i + 1;
        }
    }
    if (start < text.size()) out.emplace_back(start, text.size());
    return out;
}

// Finding text sits before the box: strip a leading "interval", a leading
// cue phrase, and a leading "of"/"in" connective, in that order.
std::string extract_finding(std::string_view pre, const ChangeLexicon& lexicon) {
    std::vector<std::string> tokens = split_words(normalize_span(pre));
    std::size_t i = 0;
    if (i < tokens.size() && tokens[i] == "interval") ++i;
    i += lexicon.phrase_length_at(tokens, i);
    if (i < tokens.size() && (tokens[i] == "of" || tokens[i] == "in")) ++i;
    return join_words(tokens, i, tokens.size());
}

// Anatomy sits after the box: drop a leading "in", stop at a copular "is" or
// at a trailing cue phrase ("... is stable", "... unchanged").
std::string extract_anatomy(std::string_view post, const ChangeLexicon& lexicon) {
    std::vector<std::string> tokens = split_words(normalize_span(post));
    std::size_t begin = 0;
    if (begin < tokens.size() && tokens[begin] == "in") ++begin;
    std::size_t end = tokens.size();
    for (std::size_t j = begin; j < tokens.size(); ++j) {
        if (tokens[j] == "is" || lexicon.phrase_spans_tail(tokens, j)) {
            end = j;
            break;
        }
    }
    return join_words(tokens, begin, end);
}

}  // namespace

TemporalReport parse_report(std::string_view text, const ChangeLexicon& lexicon) {
    TemporalReport report;
    report.raw_text.assign(text.begin(), text.end());
    const std::string lower = lower_copy(text);

    const std::vector<BoxSpan> spans = find_box_spans(lower);
    if (spans.empty()) return report;
    const auto sentences = sentence_ranges(lower, spans);

    for (std::size_t k = 0; k < spans.size(); ++k) {
        const BoxSpan& span = spans[k];
        // sentence containing this box
        std::size_t sb = 0, se = lower.size();
        for (const auto& [b, e] : sentences) {
            if (span.open >= b && span.open < e) {
                sb = b;
                se = e;
                break;
            }
        }
        // neighbouring boxes in the same sentence bound the finding/anatomy text
        std::size_t pre_begin = sb;
        if (k > 0 && spans[k - 1].end > sb && spans[k - 1].end <= span.open) {
            pre_begin = spans[k - 1].end;
        }
        std::size_t post_end = se;
        if (k + 1 < spans.size() && spans[k + 1].open < se) {
            post_end = spans[k + 1].open;
        }

        ParsedFinding f;
        f.offset = span.open;
        f.finding = extract_finding(
            std::string_view(lower).substr(pre_begin, span.open - pre_begin),
            lexicon);
        f.anatomy = extract_anatomy(
            std::string_view(lower).substr(span.end, post_end - span.end),
            lexicon);
        f.label = lexicon.match(std::string_view(lower).substr(sb, se - sb));
        if (f.label == PredLabel::Unknown) {
            report.issues.push_back({ParseIssue::Code::UnknownChangePhrase,
                                     span.open, "no recognized change cue"});
        }

        if (!span.closed) {
            report.issues.push_back(
                {ParseIssue::Code::MalformedBox, span.open, "unterminated box token"});
        } else {
            std::string detail;
            auto box = parse_coords(
                std::string_view(lower).substr(span.inner_begin,
                                               span.inner_end - span.inner_begin),
                &detail);
            if (box) {
                f.box = *box;
            } else {
                report.issues.push_back(
                    {ParseIssue::Code::MalformedBox, span.open, detail});
            }
        }
        report.findings.push_back(std::move(f));
    }
    return report;
}

// --- normalize_box ---------------------------------------------------------

std::optional<BoundingBox> normalize_box(const PixelRect& px, double width,
                                         double height, std::string* error) {
    if (!(width > 0.0) || !(height > 0.0)) {
        if (error) {
            *error = "image dimensions must be positive, got " +
                     std::to_string(width) + "x" + std::to_string(height);
        }
        return std::nullopt;
    }
    auto clamp = [](double v, double hi) { return std::min(std::max(v, 0.0), hi); };
    double x1 = clamp(px.x1, width), x2 = clamp(px.x2, width);
    double y1 = clamp(px.y1, height), y2 = clamp(px.y2, height);
    if (!(x1 < x2) || !(y1 < y2)) {
        if (error) *error = "degenerate box: no extent after clamping to frame";
        return std::nullopt;
    }
    return BoundingBox{x1 / width, y1 / height, x2 / width, y2 / height};
}

}  // namespace tracebench
