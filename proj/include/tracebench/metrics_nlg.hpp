#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tracebench {

using TokenSequence = std::vector<std::string>;

// Lowercase, whitespace-split, with two twists: a "<box>...</box>" span is a
// single atomic token, and terminal punctuation (. ! ?) splits off as its own
// token.
TokenSequence tokenize(std::string_view text);

// Suffix-stripping stemmer used by meteor_lite (exposed for tests).
std::string stem(std::string_view token);

// Sentence-level BLEU with n-grams up to 4, add-epsilon smoothing on zero
// counts, and brevity penalty exp(1 - |ref|/|hyp|) when the hypothesis is
// shorter than the reference.  Empty hypothesis or reference scores 0.
double bleu4(const TokenSequence& hyp, const TokenSequence& ref);

// Unigram alignment by exact match, then by shared stem;
// Fmean = 10PR / (R + 9P), fragmentation penalty 0.5 * (chunks / matches)^3.
double meteor_lite(const TokenSequence& hyp, const TokenSequence& ref);

// LCS-based F-measure with beta = 1.2 (recall-weighted).
double rouge_l(const TokenSequence& hyp, const TokenSequence& ref);

struct NlgScores {
    double bleu4 = 0.0;
    double meteor = 0.0;
    double rouge_l = 0.0;
};

NlgScores score_nlg(std::string_view hyp_text, std::string_view ref_text);

}  // namespace tracebench
