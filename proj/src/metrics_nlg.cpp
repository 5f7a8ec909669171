#include "tracebench/metrics_nlg.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

namespace tracebench {

namespace {

constexpr double kBleuEpsilon = 1e-9;
constexpr double kRougeBeta = 1.2;

char ascii_lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

bool is_terminal_punct(char c) { return c == '.' || c == '!' || c == '?'; }

void emit_word(std::string w, TokenSequence& out) {
    std::string tail;
    while (w.size() > 1 && is_terminal_punct(w.back())) {
        tail.push_back(w.back());
        w.pop_back();
    }
    out.push_back(std::move(w));
    for (auto it = tail.rbegin(); it != tail.rend(); ++it) {
        out.push_back(std::string(1, *it));
    }
}

void emit_segment(std::string_view seg, TokenSequence& out) {
    std::string cur;
    for (char c : seg) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) emit_word(std::move(cur), out), cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) emit_word(std::move(cur), out);
}

}  // namespace

TokenSequence tokenize(std::string_view text) {
    std::string lower(text.size(), '\0');
    std::transform(text.begin(), text.end(), lower.begin(), ascii_lower);

    TokenSequence tokens;
    std::size_t pos = 0;
    while (pos < lower.size()) {
        std::size_t open = lower.find("<box>", pos);
        std::size_t close = (open == std::string::npos)
                                ? std::string::npos
                                : lower.find("</box>", open + 5);
        if (open == std::string::npos || close == std::string::npos) {
            emit_segment(std::string_view(lower).substr(pos), tokens);
            break;
        }
        emit_segment(std::string_view(lower).substr(pos, open - pos), tokens);
        tokens.push_back(lower.substr(open, close + 6 - open));  // atomic span
        pos = close + 6;
    }
    return tokens;
}

std::string stem(std::string_view token) {
    std::string s(token);
    static const char* kSuffixes[] = {"ment", "ness", "ing", "ed", "es", "ly", "s"};
    for (const char* suf : kSuffixes) {
        std::size_t len = std::char_traits<char>::length(suf);
        if (s.size() >= len + 3 && s.compare(s.size() - len, len, suf) == 0) {
            s.resize(s.size() - len);
            break;
        }
    }
    if (s.size() > 3 && s.back() == 'e') s.pop_back();
    return s;
}

double bleu4(const TokenSequence& hyp, const TokenSequence& ref) {
    if (hyp.empty() || ref.empty()) return 0.0;

    double log_sum = 0.0;
    std::unordered_map<std::string, std::uint32_t> ref_counts;
    std::string key;
    for (std::size_t n = 1; n <= 4; ++n) {
        ref_counts.clear();
        if (ref.size() >= n) {
            for (std::size_t i = 0; i + n <= ref.size(); ++i) {
                key.clear();
                for (std::size_t k = 0; k < n; ++k) {
                    if (k) key.push_back('\x1f');
                    key += ref[i + k];
                }
                ++ref_counts[key];
            }
        }
        std::uint64_t matched = 0;
        std::uint64_t total = hyp.size() >= n ? hyp.size() - n + 1 : 0;
        for (std::size_t i = 0; i + n <= hyp.size(); ++i) {
            key.clear();
            for (std::size_t k = 0; k < n; ++k) {
                if (k) key.push_back('\x1f');
                key += hyp[i + k];
            }
            auto it = ref_counts.find(key);
            if (it != ref_counts.end() && it->second > 0) {
                --it->second;
                ++matched;
            }
        }
        double p = std::max(static_cast<double>(matched), kBleuEpsilon) /
                   static_cast<double>(std::max<std::uint64_t>(total, 1));
        log_sum += std::log(p);
    }

    double precision = std::exp(log_sum / 4.0);
    double bp = 1.0;
    if (hyp.size() < ref.size()) {
        bp = std::exp(1.0 - static_cast<double>(ref.size()) /
                                static_cast<double>(hyp.size()));
    }
    return bp * precision;
}

double meteor_lite(const TokenSequence& hyp, const TokenSequence& ref) {
    if (hyp.empty() || ref.empty()) return 0.0;

    std::vector<int> hyp_to_ref(hyp.size(), -1);
    std::vector<bool> ref_used(ref.size(), false);

    // stage 1: exact matches, earliest unused reference token first
    for (std::size_t i = 0; i < hyp.size(); ++i) {
        for (std::size_t j = 0; j < ref.size(); ++j) {
            if (!ref_used[j] && hyp[i] == ref[j]) {
                hyp_to_ref[i] = static_cast<int>(j);
                ref_used[j] = true;
                break;
            }
        }
    }
    // stage 2: stem matches on the leftovers
    std::vector<std::string> hyp_stem(hyp.size()), ref_stem(ref.size());
    for (std::size_t i = 0; i < hyp.size(); ++i) hyp_stem[i] = stem(hyp[i]);
    for (std::size_t j = 0; j < ref.size(); ++j) ref_stem[j] = stem(ref[j]);
    for (std::size_t i = 0; i < hyp.size(); ++i) {
        if (hyp_to_ref[i] >= 0) continue;
        for (std::size_t j = 0; j < ref.size(); ++j) {
            if (!ref_used[j] && hyp_stem[i] == ref_stem[j]) {
                hyp_to_ref[i] = static_cast<int>(j);
                ref_used[j] = true;
                break;
            }
        }
    }

    std::uint64_t m = 0;
    for (int j : hyp_to_ref) m += (j >= 0);
    if (m == 0) return 0.0;

    double precision = static_cast<double>(m) / static_cast<double>(hyp.size());
    double recall = static_cast<double>(m) / static_cast<double>(ref.size());
    double fmean = 10.0 * precision * recall / (recall + 9.0 * precision);

    // a chunk is a maximal run of adjacent hyp tokens mapped to adjacent,
    // in-order ref tokens
    std::uint64_t chunks = 0;
    int prev_hyp = -2, prev_ref = -2;
    for (std::size_t i = 0; i < hyp.size(); ++i) {
        if (hyp_to_ref[i] < 0) continue;
        if (static_cast<int>(i) != prev_hyp + 1 || hyp_to_ref[i] != prev_ref + 1) {
            ++chunks;
        }
        prev_hyp = static_cast<int>(i);
        prev_ref = hyp_to_ref[i];
    }

    double frag = static_cast<double>(chunks) / static_cast<double>(m);
    double penalty = 0.5 * frag * frag * frag;
    return fmean * (1.0 - penalty);
}

double rouge_l(const TokenSequence& hyp, const TokenSequence& ref) {
    if (hyp.empty() || ref.empty()) return 0.0;

    // classic O(|hyp|*|ref|) LCS, two rolling rows
    std::vector<std::uint32_t> prev(ref.size() + 1, 0), cur(ref.size() + 1, 0);
    for (std::size_t i = 1; i <= hyp.size(); ++i) {
        for (std::size_t j = 1; j <= ref.size(); ++j) {
            cur[j] = (hyp[i - 1] == ref[j - 1]) ? prev[j - 1] + 1
                                                : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    double lcs = prev[ref.size()];
    if (lcs == 0.0) return 0.0;

    double recall = lcs / static_cast<double>(ref.size());
    double precision = lcs / static_cast<double>(hyp.size());
    double b2 = kRougeBeta * kRougeBeta;
    return (1.0 + b2) * recall * precision / (recall + b2 * precision);
}

NlgScores score_nlg(std::string_view hyp_text, std::string_view ref_text) {
    TokenSequence hyp = tokenize(hyp_text);
    TokenSequence ref = tokenize(ref_text);
    return NlgScores{bleu4(hyp, ref), meteor_lite(hyp, ref), rouge_l(hyp, ref)};
}

}  // namespace tracebench
