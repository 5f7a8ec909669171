#include "tracebench/eval_engine.hpp"

#include <algorithm>
#include <cstdio>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "tracebench/numeric_util.hpp"
#include "tracebench/version.hpp"

namespace tracebench {

namespace {

using nlohmann::json;

// strict total order so aggregate results cannot depend on shard order even
// under (malformed) duplicate sample ids
bool row_less(const SampleScore& a, const SampleScore& b) {
    if (a.sample_id != b.sample_id) return a.sample_id < b.sample_id;
    if (a.true_label != b.true_label) return a.true_label < b.true_label;
    if (a.pred_label != b.pred_label) return a.pred_label < b.pred_label;
    double ai = a.iou.value_or(-1.0), bi = b.iou.value_or(-1.0);
    if (ai != bi) return ai < bi;
    if (a.bleu4 != b.bleu4) return a.bleu4 < b.bleu4;
    if (a.meteor != b.meteor) return a.meteor < b.meteor;
    if (a.rouge_l != b.rouge_l) return a.rouge_l < b.rouge_l;
    if (a.matched != b.matched) return a.matched < b.matched;
    return a.parse_error < b.parse_error;
}

double mean_of(const std::vector<SampleScore>& rows,
               double (*get)(const SampleScore&)) {
    if (rows.empty()) return 0.0;
    std::vector<double> vals(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) vals[i] = get(rows[i]);
    return pairwise_sum(vals) / static_cast<double>(rows.size());
}

json confusion_json(const ConfusionMatrix3& cm) {
    json rows = json::array();
    for (const auto& row : cm.counts) {
        json r = json::array();
        for (std::uint64_t c : row) r.push_back(c);
        rows.push_back(std::move(r));
    }
    return rows;
}

bool confusion_from_json(const json& j, ConfusionMatrix3* cm) {
    if (!j.is_array() || j.size() != 3) return false;
    for (std::size_t r = 0; r < 3; ++r) {
        if (!j[r].is_array() || j[r].size() != 4) return false;
        for (std::size_t c = 0; c < 4; ++c) {
            if (!j[r][c].is_number_unsigned() && !j[r][c].is_number_integer()) {
                return false;
            }
            cm->counts[r][c] = j[r][c].get<std::uint64_t>();
        }
    }
    return true;
}

const char* kClassKeys[3] = {"worsened", "improved", "stable"};

}  // namespace

std::string EvalConfig::fingerprint() const {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", iou_threshold);
    return std::string("iou_threshold=") + buf +
           ";min_anatomy_support=" + std::to_string(min_anatomy_support) +
           ";lexicon=" + lexicon_version;
}

void EvalAccumulator::add(SampleScore row) {
    n_preds_ += row.matched ? 1 : 0;
    rows_.push_back(std::move(row));
}

std::optional<EvalAccumulator> EvalAccumulator::merge(const EvalAccumulator& a,
                                                      const EvalAccumulator& b,
                                                      std::string* error) {
    if (a.config_.fingerprint() != b.config_.fingerprint()) {
        if (error) {
            *error = "ConfigMismatch: '" + a.config_.fingerprint() + "' vs '" +
                     b.config_.fingerprint() + "'";
        }
        return std::nullopt;
    }
    EvalAccumulator out(a.config_);
    out.rows_.reserve(a.rows_.size() + b.rows_.size());
    out.rows_.insert(out.rows_.end(), a.rows_.begin(), a.rows_.end());
    out.rows_.insert(out.rows_.end(), b.rows_.begin(), b.rows_.end());
    out.n_preds_ = a.n_preds_ + b.n_preds_;
    return out;
}

EvalResult EvalAccumulator::finalize() const {
    EvalResult res;
    res.rows = rows_;
    std::sort(res.rows.begin(), res.rows.end(), row_less);

    EvalReport& rep = res.report;
    rep.config = config_;
    rep.counts.n_refs = res.rows.size();
    rep.counts.n_preds = n_preds_;
    for (const SampleScore& r : res.rows) {
        rep.counts.n_unmatched += r.matched ? 0 : 1;
        rep.counts.n_parse_errors += r.parse_error ? 1 : 0;
        rep.confusion.add(r.true_label, r.pred_label);
    }
    rep.change_accuracy = rep.confusion.accuracy();
    rep.class_metrics = per_class_metrics(rep.confusion);
    rep.grounding = grounding_stats(res.rows, config_.iou_threshold);
    rep.nlg.bleu4 = mean_of(res.rows, [](const SampleScore& s) { return s.bleu4; });
    rep.nlg.meteor = mean_of(res.rows, [](const SampleScore& s) { return s.meteor; });
    rep.nlg.rouge_l = mean_of(res.rows, [](const SampleScore& s) { return s.rouge_l; });
    rep.per_anatomy = per_anatomy_accuracy(res.rows, config_.min_anatomy_support);
    return res;
}

std::optional<EvalResult> evaluate(const std::vector<Sample>& refs,
                                   const std::vector<Prediction>& preds,
                                   const EvalConfig& cfg,
                                   const ChangeLexicon& lexicon, int workers,
                                   std::string* error) {
    std::unordered_map<std::string_view, const Prediction*> by_id;
    by_id.reserve(preds.size());
    for (const Prediction& p : preds) {
        if (!by_id.emplace(p.sample_id, &p).second) {
            if (error) *error = "DuplicatePredictionId: " + p.sample_id;
            return std::nullopt;
        }
    }

    std::vector<SampleScore> rows(refs.size());
    auto score_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const Sample& ref = refs[i];
            SampleScore row;
            auto it = by_id.find(ref.sample_id);
            if (it == by_id.end()) {
                // worst case: no label, no box, empty text
                row.true_label = ref.reference.change;
                row.anatomy = ref.reference.anatomy;
                row.pred_label = PredLabel::Unknown;
                row.matched = false;
            } else {
                const std::string& text = it->second->text;
                TemporalReport parsed = parse_report(text, lexicon);
                row = score_sample(parsed, ref.reference, lexicon);
                NlgScores scores = score_nlg(text, reference_text(ref));
                row.bleu4 = scores.bleu4;
                row.meteor = scores.meteor;
                row.rouge_l = scores.rouge_l;
            }
            row.sample_id = ref.sample_id;
            rows[i] = std::move(row);
        }
    };

    if (workers <= 1 || refs.empty()) {
        score_range(0, rows.size());
    } else {
        std::size_t n_workers = std::min<std::size_t>(workers, rows.size());
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w) {
            std::size_t lo = rows.size() * w / n_workers;
            std::size_t hi = rows.size() * (w + 1) / n_workers;
            pool.emplace_back(score_range, lo, hi);
        }
        for (std::thread& t : pool) t.join();
    }

    EvalAccumulator acc(cfg);
    for (SampleScore& row : rows) acc.add(std::move(row));
    return acc.finalize();
}

// --- report serialization ---------------------------------------------------

std::string EvalReport::to_json() const {
    json j;
    j["tool"] = {{"name", std::string(kToolName)},
                 {"version", std::string(kToolVersion)}};
    j["config"] = {{"iou_threshold", config.iou_threshold},
                   {"min_anatomy_support", config.min_anatomy_support},
                   {"lexicon", config.lexicon_version}};
    j["counts"] = {{"n_refs", counts.n_refs},
                   {"n_preds", counts.n_preds},
                   {"n_unmatched", counts.n_unmatched},
                   {"n_parse_errors", counts.n_parse_errors}};
    j["nlg"] = {{"bleu4", nlg.bleu4},
                {"meteor", nlg.meteor},
                {"rouge_l", nlg.rouge_l}};
    j["grounding"] = {{"mean_iou", grounding.mean_iou},
                      {"hit_rate", grounding.hit_rate},
                      {"hit_rate_scored", grounding.hit_rate_scored},
                      {"n_scored", grounding.n_scored},
                      {"n_total", grounding.n_total}};
    json per_class = json::object();
    for (std::size_t c = 0; c < 3; ++c) {
        const auto& pc = class_metrics.per_class[c];
        per_class[kClassKeys[c]] = {{"precision", pc.precision},
                                    {"recall", pc.recall},
                                    {"f1", pc.f1},
                                    {"support", pc.support}};
    }
    j["change"] = {{"accuracy", change_accuracy},
                   {"confusion", confusion_json(confusion)},
                   {"per_class", per_class},
                   {"macro",
                    {{"precision", class_metrics.macro_precision},
                     {"recall", class_metrics.macro_recall},
                     {"f1", class_metrics.macro_f1}}}};
    json anat = json::array();
    for (const AnatomyRow& row : per_anatomy) {
        anat.push_back({{"anatomy", row.anatomy},
                        {"accuracy", row.accuracy},
                        {"support", row.support}});
    }
    j["per_anatomy"] = std::move(anat);
    return j.dump(2) + "\n";
}

std::optional<EvalReport> EvalReport::from_json(const std::string& text,
                                                std::string* error) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        if (error) *error = "report is not valid JSON";
        return std::nullopt;
    }
    EvalReport rep;
    try {
        const json& cfg = j.at("config");
        rep.config.iou_threshold = cfg.at("iou_threshold").get<double>();
        rep.config.min_anatomy_support =
            cfg.at("min_anatomy_support").get<std::uint64_t>();
        rep.config.lexicon_version = cfg.at("lexicon").get<std::string>();

        const json& cnt = j.at("counts");
        rep.counts.n_refs = cnt.at("n_refs").get<std::uint64_t>();
        rep.counts.n_preds = cnt.at("n_preds").get<std::uint64_t>();
        rep.counts.n_unmatched = cnt.at("n_unmatched").get<std::uint64_t>();
        rep.counts.n_parse_errors = cnt.at("n_parse_errors").get<std::uint64_t>();

        const json& nl = j.at("nlg");
        rep.nlg.bleu4 = nl.at("bleu4").get<double>();
        rep.nlg.meteor = nl.at("meteor").get<double>();
        rep.nlg.rouge_l = nl.at("rouge_l").get<double>();

        const json& gr = j.at("grounding");
        rep.grounding.mean_iou = gr.at("mean_iou").get<double>();
        rep.grounding.hit_rate = gr.at("hit_rate").get<double>();
        rep.grounding.hit_rate_scored = gr.at("hit_rate_scored").get<double>();
        rep.grounding.n_scored = gr.at("n_scored").get<std::uint64_t>();
        rep.grounding.n_total = gr.at("n_total").get<std::uint64_t>();

        const json& ch = j.at("change");
        rep.change_accuracy = ch.at("accuracy").get<double>();
        if (!confusion_from_json(ch.at("confusion"), &rep.confusion)) {
            if (error) *error = "bad confusion matrix shape";
            return std::nullopt;
        }
        for (std::size_t c = 0; c < 3; ++c) {
            const json& pc = ch.at("per_class").at(kClassKeys[c]);
            auto& dst = rep.class_metrics.per_class[c];
            dst.precision = pc.at("precision").get<double>();
            dst.recall = pc.at("recall").get<double>();
            dst.f1 = pc.at("f1").get<double>();
            dst.support = pc.at("support").get<std::uint64_t>();
        }
        rep.class_metrics.macro_precision =
            ch.at("macro").at("precision").get<double>();
        rep.class_metrics.macro_recall = ch.at("macro").at("recall").get<double>();
        rep.class_metrics.macro_f1 = ch.at("macro").at("f1").get<double>();

        for (const json& row : j.at("per_anatomy")) {
            rep.per_anatomy.push_back({row.at("anatomy").get<std::string>(),
                                       row.at("accuracy").get<double>(),
                                       row.at("support").get<std::uint64_t>()});
        }
    } catch (const json::exception& e) {
        if (error) *error = std::string("bad report: ") + e.what();
        return std::nullopt;
    }
    return rep;
}

std::string per_sample_csv(const std::vector<SampleScore>& rows) {
    std::vector<const SampleScore*> order;
    order.reserve(rows.size());
    for (const SampleScore& r : rows) order.push_back(&r);
    std::sort(order.begin(), order.end(),
              [](const SampleScore* a, const SampleScore* b) {
                  return row_less(*a, *b);
              });

    std::string out =
        "sample_id,true_label,pred_label,iou,bleu4,meteor,rouge_l,matched,"
        "parse_error\n";
    char buf[160];
    for (const SampleScore* r : order) {
        std::string iou_field;
        if (r->iou) {
            std::snprintf(buf, sizeof(buf), "%.6f", *r->iou);
            iou_field = buf;
        }
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f", r->bleu4, r->meteor,
                      r->rouge_l);
        out += r->sample_id;
        out += ',';
        out += to_string(r->true_label);
        out += ',';
        out += to_string(r->pred_label);
        out += ',';
        out += iou_field;
        out += ',';
        out += buf;
        out += r->matched ? ",1" : ",0";
        out += r->parse_error ? ",1\n" : ",0\n";
    }
    return out;
}

}  // namespace tracebench
