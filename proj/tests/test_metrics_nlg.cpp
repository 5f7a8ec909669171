#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tracebench/metrics_nlg.hpp"
#include "tracebench/rng.hpp"

using namespace tracebench;

namespace {

TokenSequence toks(std::initializer_list<const char*> words) {
    TokenSequence out;
    for (const char* w : words) out.push_back(w);
    return out;
}

// Counting oracle: for each order, list every reference n-gram and let each
// hypothesis n-gram consume at most one equal entry.  Structurally unrelated
// to the map-based implementation.
double oracle_bleu4(const TokenSequence& hyp, const TokenSequence& ref) {
    if (hyp.empty() || ref.empty()) return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        std::vector<TokenSequence> pool;
        for (std::size_t i = 0; i + n <= ref.size(); ++i) {
            pool.emplace_back(ref.begin() + i, ref.begin() + i + n);
        }
        std::size_t total = hyp.size() >= n ? hyp.size() - n + 1 : 0;
        std::size_t matched = 0;
        for (std::size_t i = 0; i + n <= hyp.size(); ++i) {
            TokenSequence g(hyp.begin() + i, hyp.begin() + i + n);
            auto it = std::find(pool.begin(), pool.end(), g);
            if (it != pool.end()) {
                pool.erase(it);
                ++matched;
            }
        }
        double p = std::max(static_cast<double>(matched), 1e-9) /
                   static_cast<double>(std::max<std::size_t>(total, 1));
        log_sum += std::log(p);
    }
    double bp = 1.0;
    if (hyp.size() < ref.size()) {
        bp = std::exp(1.0 - static_cast<double>(ref.size()) /
                                static_cast<double>(hyp.size()));
    }
    return bp * std::exp(log_sum / 4.0);
}

// Plain recursive LCS with memoisation; independent of the rolling-row DP.
std::size_t oracle_lcs(const TokenSequence& a, const TokenSequence& b) {
    std::vector<std::vector<int>> memo(a.size() + 1,
                                       std::vector<int>(b.size() + 1, -1));
    auto rec = [&](auto&& self, std::size_t i, std::size_t j) -> int {
        if (i == a.size() || j == b.size()) return 0;
        int& m = memo[i][j];
        if (m >= 0) return m;
        if (a[i] == b[j]) return m = 1 + self(self, i + 1, j + 1);
        return m = std::max(self(self, i + 1, j), self(self, i, j + 1));
    };
    return static_cast<std::size_t>(rec(rec, 0, 0));
}

TokenSequence random_tokens(Rng& rng, std::size_t max_len) {
    static const char* kAlphabet[] = {"a", "b", "c", "d", "e"};
    TokenSequence out;
    std::size_t len = rng.uniform_int(1, max_len);
    for (std::size_t i = 0; i < len; ++i) {
        out.push_back(kAlphabet[rng.uniform_int(0, 4)]);
    }
    return out;
}

}  // namespace

TEST_CASE("tokenizer keeps box spans atomic and splits terminal punctuation") {
    TokenSequence t = tokenize(
        "Interval worsening of pneumothorax <box>0.196,0.107,0.522,0.634</box> "
        "in right lung.");
    REQUIRE(t.size() == 9);
    CHECK(t[0] == "interval");
    CHECK(t[3] == "pneumothorax");
    CHECK(t[4] == "<box>0.196,0.107,0.522,0.634</box>");
    CHECK(t[7] == "lung");
    CHECK(t[8] == ".");

    CHECK(tokenize("") == TokenSequence{});
    CHECK(tokenize("Stable.") == toks({"stable", "."}));
    CHECK(tokenize("what?!") == toks({"what", "?", "!"}));
    CHECK(tokenize(".") == toks({"."}));
    // an unterminated span is treated as plain text
    CHECK(tokenize("<box>0.1,0.2") == toks({"<box>0.1,0.2"}));
}

TEST_CASE("stemmer strips inflectional suffixes") {
    CHECK(stem("worsening") == "worsen");
    CHECK(stem("worsened") == "worsen");
    CHECK(stem("improvement") == stem("improving"));
    CHECK(stem("resolved") == stem("resolving"));
    CHECK(stem("decreased") == stem("decrease"));
    CHECK(stem("effusions") == "effusion");
    CHECK(stem("lung") == "lung");
    // never stems below three characters
    CHECK(stem("is") == "is");
    CHECK(stem("ed") == "ed");
}

TEST_CASE("bleu4 matches the hand-worked example") {
    // precisions 4/5, 3/4, 2/3, 1/2 and no brevity penalty
    TokenSequence hyp = toks({"a", "b", "c", "d", "x"});
    TokenSequence ref = toks({"a", "b", "c", "d", "e"});
    double expected = std::pow(0.8 * 0.75 * (2.0 / 3.0) * 0.5, 0.25);
    CHECK(bleu4(hyp, ref) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(bleu4(hyp, ref) == doctest::Approx(0.6687).epsilon(1e-4));
}

TEST_CASE("bleu4 edge behaviour") {
    TokenSequence four = toks({"a", "b", "c", "d"});
    CHECK(bleu4(four, four) == 1.0);
    CHECK(bleu4({}, four) == 0.0);
    CHECK(bleu4(four, {}) == 0.0);
    // disjoint: all orders hit the epsilon floor
    CHECK(bleu4(toks({"x", "y", "z", "w"}), four) < 1e-6);
    // short hypothesis attracts a brevity penalty
    TokenSequence prefix = toks({"a", "b", "c", "d"});
    TokenSequence longer = toks({"a", "b", "c", "d", "e", "f"});
    CHECK(bleu4(prefix, longer) <
          bleu4(longer, longer) * std::exp(1.0 - 6.0 / 4.0) + 1e-9);
    CHECK(bleu4(prefix, longer) == doctest::Approx(oracle_bleu4(prefix, longer)));
}

TEST_CASE("bleu4 agrees with the counting oracle on random pairs") {
    Rng rng(4242);
    for (int i = 0; i < 500; ++i) {
        TokenSequence hyp = random_tokens(rng, 10);
        TokenSequence ref = random_tokens(rng, 10);
        double got = bleu4(hyp, ref);
        double want = oracle_bleu4(hyp, ref);
        CHECK(std::abs(got - want) <= 1e-12);
        CHECK(got >= 0.0);
        CHECK(got <= 1.0 + 1e-12);
    }
}

TEST_CASE("meteor_lite matches the hand-worked examples") {
    // identical four-token sentences: one chunk, penalty 0.5/64
    TokenSequence four = toks({"alpha", "beta", "gamma", "delta"});
    CHECK(meteor_lite(four, four) == doctest::Approx(0.9921875).epsilon(1e-12));

    // two of three tokens align in two chunks: 2/3 * (1 - 0.5) = 1/3
    CHECK(meteor_lite(toks({"a", "x", "c"}), toks({"a", "b", "c"})) ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    // stem-stage alignment: different surface forms still match
    CHECK(meteor_lite(toks({"worsening"}), toks({"worsened"})) ==
          doctest::Approx(0.5).epsilon(1e-12));

    CHECK(meteor_lite(toks({"x"}), toks({"y"})) == 0.0);
    CHECK(meteor_lite({}, four) == 0.0);
    CHECK(meteor_lite(four, {}) == 0.0);
}

TEST_CASE("meteor_lite chunk counting follows hypothesis order") {
    // swapped halves: both tokens align but in two chunks
    double swapped = meteor_lite(toks({"b", "a"}), toks({"a", "b"}));
    CHECK(swapped == doctest::Approx(0.5).epsilon(1e-12));  // Fmean 1, penalty 0.5
    // in-order run: single chunk
    double ordered = meteor_lite(toks({"a", "b"}), toks({"a", "b"}));
    CHECK(ordered == doctest::Approx(1.0 - 0.5 / 8.0).epsilon(1e-12));
    CHECK(ordered > swapped);
}

TEST_CASE("rouge_l matches the hand-worked example") {
    // LCS 3, recall 3/4, precision 1, beta 1.2
    double got = rouge_l(toks({"a", "c", "d"}), toks({"a", "b", "c", "d"}));
    double expected = (1.0 + 1.44) * 0.75 * 1.0 / (0.75 + 1.44 * 1.0);
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
    CHECK(got == doctest::Approx(0.8356).epsilon(1e-4));
}

TEST_CASE("rouge_l edge behaviour") {
    TokenSequence seq = toks({"a", "b", "c"});
    CHECK(rouge_l(seq, seq) == 1.0);
    CHECK(rouge_l({}, seq) == 0.0);
    CHECK(rouge_l(seq, {}) == 0.0);
    CHECK(rouge_l(toks({"x", "y"}), seq) == 0.0);
}

TEST_CASE("rouge_l LCS agrees with a recursive oracle on random pairs") {
    Rng rng(777);
    for (int i = 0; i < 300; ++i) {
        TokenSequence hyp = random_tokens(rng, 12);
        TokenSequence ref = random_tokens(rng, 12);
        double lcs = oracle_lcs(hyp, ref);
        double got = rouge_l(hyp, ref);
        if (lcs == 0.0) {
            CHECK(got == 0.0);
        } else {
            double r = lcs / ref.size(), p = lcs / hyp.size();
            CHECK(got == doctest::Approx((1 + 1.44) * r * p / (r + 1.44 * p))
                             .epsilon(1e-12));
        }
        CHECK(got >= 0.0);
        CHECK(got <= 1.0 + 1e-12);
    }
}

TEST_CASE("all text metrics stay within [0, 1] on random inputs") {
    Rng rng(31337);
    for (int i = 0; i < 300; ++i) {
        TokenSequence hyp = random_tokens(rng, 8);
        TokenSequence ref = random_tokens(rng, 8);
        for (double v : {bleu4(hyp, ref), meteor_lite(hyp, ref), rouge_l(hyp, ref)}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("score_nlg runs all three metrics over raw text") {
    std::string ref =
        "consolidation <box>0.500,0.250,0.750,0.500</box> in left lung is "
        "stable.";
    NlgScores self = score_nlg(ref, ref);
    CHECK(self.bleu4 == 1.0);
    CHECK(self.rouge_l == 1.0);
    CHECK(self.meteor > 0.99);

    NlgScores empty = score_nlg("", ref);
    CHECK(empty.bleu4 == 0.0);
    CHECK(empty.meteor == 0.0);
    CHECK(empty.rouge_l == 0.0);

    // a differing box token is one token mismatch, not many
    NlgScores moved = score_nlg(
        "consolidation <box>0.400,0.250,0.750,0.500</box> in left lung is "
        "stable.",
        ref);
    CHECK(moved.bleu4 > 0.3);
    CHECK(moved.rouge_l > 0.8);
}
