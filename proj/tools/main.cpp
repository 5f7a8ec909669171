#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tracebench/baselines.hpp"
#include "tracebench/corpus.hpp"
#include "tracebench/eval_engine.hpp"
#include "tracebench/jsonl_io.hpp"
#include "tracebench/version.hpp"

namespace {

using nlohmann::json;
using namespace tracebench;

int fail(const std::string& msg) {
    std::cerr << "error: " << msg << "\n";
    return 1;
}

// '-' selects stdin/stdout
struct InputStream {
    std::istream* stream = nullptr;
    std::ifstream file;

    bool open(const std::string& path, std::string* error) {
        if (path == "-") {
            stream = &std::cin;
            return true;
        }
        file.open(path);
        if (!file) {
            *error = "cannot open " + path;
            return false;
        }
        stream = &file;
        return true;
    }
};

struct OutputStream {
    std::ostream* stream = nullptr;
    std::ofstream file;

    bool open(const std::string& path, std::string* error) {
        if (path == "-") {
            stream = &std::cout;
            return true;
        }
        file.open(path);
        if (!file) {
            *error = "cannot open " + path + " for writing";
            return false;
        }
        stream = &file;
        return true;
    }
};

json tool_json() {
    return {{"name", std::string(kToolName)}, {"version", std::string(kToolVersion)}};
}

// every file artifact gets a sidecar recording the exact resolved config
void write_meta(const std::string& out_path, const std::string& command,
                const json& config) {
    if (out_path == "-") return;
    json j = {{"tool", tool_json()}, {"command", command}, {"config", config}};
    std::ofstream f(out_path + ".meta.json");
    f << j.dump(2) << "\n";
}

json stats_json(const DistributionStats& st) {
    json anat = json::object();
    for (const auto& [name, count] : st.anatomy_counts) anat[name] = count;
    return {{"n_samples", st.n_samples},
            {"defined", st.defined},
            {"label_counts",
             {{"worsened", st.label_counts[0]},
              {"improved", st.label_counts[1]},
              {"stable", st.label_counts[2]}}},
            {"label_fractions",
             {{"worsened", st.label_fractions[0]},
              {"improved", st.label_fractions[1]},
              {"stable", st.label_fractions[2]}}},
            {"anatomy_counts", anat}};
}

bool parse_triple(const std::string& s, std::array<double, 3>* out) {
    std::array<double, 3> vals{};
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
        std::size_t sep = (i < 2) ? s.find(':', pos) : s.size();
        if (sep == std::string::npos) return false;
        try {
            std::size_t used = 0;
            vals[i] = std::stod(s.substr(pos, sep - pos), &used);
            if (used != sep - pos) return false;
        } catch (const std::exception&) {
            return false;
        }
        pos = sep + 1;
    }
    *out = vals;
    return true;
}

// --- synth -------------------------------------------------------------------

struct SynthArgs {
    std::size_t patients = 100;
    std::uint64_t seed = 0;
    std::size_t min_studies = 2;
    std::size_t max_studies = 4;
    std::size_t min_annotations = 1;
    std::size_t max_annotations = 3;
    std::string label_dist = "0.345:0.217:0.438";
    double image_size = 1024.0;
    std::string out = "-";
    std::string splits_out;
    std::string split_ratios = "0.7:0.1:0.2";
};

int run_synth(const SynthArgs& a) {
    SynthConfig cfg;
    cfg.n_patients = a.patients;
    cfg.seed = a.seed;
    cfg.min_studies = a.min_studies;
    cfg.max_studies = a.max_studies;
    cfg.min_annotations = a.min_annotations;
    cfg.max_annotations = a.max_annotations;
    cfg.image_width = a.image_size;
    cfg.image_height = a.image_size;
    if (!parse_triple(a.label_dist, &cfg.label_distribution)) {
        return fail("--label-dist expects w:i:s, got '" + a.label_dist + "'");
    }
    std::array<double, 3> ratios{};
    if (!parse_triple(a.split_ratios, &ratios)) {
        return fail("--split-ratios expects t:v:t, got '" + a.split_ratios + "'");
    }

    std::string err;
    auto gen = SynthGenerator::create(cfg, &err);
    if (!gen) return fail(err);

    OutputStream out;
    if (!out.open(a.out, &err)) return fail(err);
    std::ofstream splits;
    if (!a.splits_out.empty()) {
        splits.open(a.splits_out);
        if (!splits) return fail("cannot open " + a.splits_out + " for writing");
        splits << "patient_id,split\n";
    }

    std::size_t index = 0;
    while (!gen->done()) {
        std::vector<StudyRecord> records = gen->next_patient();
        for (const StudyRecord& rec : records) {
            *out.stream << study_record_line(rec) << '\n';
        }
        if (splits.is_open() && !records.empty()) {
            splits << records.front().patient_id << ','
                   << gen->assign_split(index, ratios) << '\n';
        }
        ++index;
    }
    out.stream->flush();
    if (out.stream->fail()) return fail("write failure on " + a.out);
    if (splits.is_open()) {
        splits.flush();
        if (splits.fail()) return fail("write failure on " + a.splits_out);
    }

    write_meta(a.out, "synth",
               {{"patients", cfg.n_patients},
                {"seed", cfg.seed},
                {"min_studies", cfg.min_studies},
                {"max_studies", cfg.max_studies},
                {"min_annotations", cfg.min_annotations},
                {"max_annotations", cfg.max_annotations},
                {"label_distribution", cfg.label_distribution},
                {"image_size", a.image_size},
                {"splits_out", a.splits_out},
                {"split_ratios", a.split_ratios}});
    return 0;
}

// --- build -------------------------------------------------------------------

struct BuildArgs {
    std::string studies = "-";
    std::string splits;
    std::string out_dir = ".";
    std::string prefix = "samples";
};

int run_build(const BuildArgs& a) {
    std::string err;
    InputStream splits_in;
    if (!splits_in.open(a.splits, &err)) return fail(err);
    auto assignment = read_split_csv(*splits_in.stream, a.splits, &err);
    if (!assignment) return fail(err);

    InputStream studies_in;
    if (!studies_in.open(a.studies, &err)) return fail(err);

    std::error_code ec;
    std::filesystem::create_directories(a.out_dir, ec);
    const std::string base = a.out_dir + "/" + a.prefix;
    const std::array<std::string, 3> split_names = {"train", "val", "test"};
    std::array<std::ofstream, 3> outs;
    for (std::size_t i = 0; i < 3; ++i) {
        outs[i].open(base + "_" + split_names[i] + ".jsonl");
        if (!outs[i]) {
            return fail("cannot open " + base + "_" + split_names[i] +
                        ".jsonl for writing");
        }
    }
    std::ofstream skip_log(base + "_skipped.jsonl");
    if (!skip_log) return fail("cannot open " + base + "_skipped.jsonl for writing");

    std::array<StatsAccumulator, 3> stats;
    std::uint64_t n_skipped = 0;
    std::vector<StudyRecord> patient;  // one patient's studies at a time
    std::string failure;

    auto flush_patient = [&]() -> bool {
        if (patient.empty()) return true;
        const std::string& pid = patient.front().patient_id;
        auto split_it = assignment->find(pid);
        if (split_it == assignment->end()) {
            failure = "UnassignedPatient: " + pid;
            return false;
        }
        std::size_t split_idx =
            split_it->second == "train" ? 0 : (split_it->second == "val" ? 1 : 2);
        auto pairs = build_pairs(patient, &failure);
        if (!pairs) return false;
        EmitResult emitted = emit_samples(*pairs, patient);
        for (const SkippedAnnotation& sk : emitted.skipped) {
            json j = {{"patient_id", sk.patient_id},
                      {"study_id", sk.study_id},
                      {"annotation_index", sk.annotation_index},
                      {"reason", sk.reason}};
            skip_log << j.dump() << '\n';
            ++n_skipped;
        }
        for (Sample& s : emitted.samples) {
            s.split = split_names[split_idx];
            outs[split_idx] << sample_line(s) << '\n';
            stats[split_idx].add(s);
        }
        patient.clear();
        return true;
    };

    std::string last_pid;
    bool ok = for_each_line(
        *studies_in.stream, a.studies,
        [&](const std::string& line, std::size_t line_no) {
            auto rec = parse_study_record(line, &err);
            if (!rec) {
                failure = a.studies + ":" + std::to_string(line_no) + ": " + err;
                return false;
            }
            if (!last_pid.empty() && rec->patient_id != last_pid) {
                if (rec->patient_id < last_pid) {
                    failure = a.studies + ":" + std::to_string(line_no) +
                              ": studies not sorted by patient_id ('" +
                              rec->patient_id + "' after '" + last_pid + "')";
                    return false;
                }
                if (!flush_patient()) return false;
            }
            last_pid = rec->patient_id;
            patient.push_back(std::move(*rec));
            return true;
        },
        &err);
    if (!failure.empty()) return fail(failure);
    if (!ok) return fail(err);
    if (!flush_patient()) return fail(failure);

    for (std::size_t i = 0; i < 3; ++i) {
        outs[i].flush();
        if (outs[i].fail()) return fail("write failure under " + base);
    }
    skip_log.flush();

    write_meta(base, "build",
               {{"studies", a.studies},
                {"splits", a.splits},
                {"out_dir", a.out_dir},
                {"prefix", a.prefix}});

    json summary = {{"skipped", n_skipped},
                    {"splits",
                     {{"train", stats_json(stats[0].finish())},
                      {"val", stats_json(stats[1].finish())},
                      {"test", stats_json(stats[2].finish())}}}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

// --- stats -------------------------------------------------------------------

struct StatsArgs {
    std::string refs = "-";
};

int run_stats(const StatsArgs& a) {
    std::string err;
    InputStream in;
    if (!in.open(a.refs, &err)) return fail(err);
    StatsAccumulator acc;
    std::string failure;
    bool ok = for_each_line(
        *in.stream, a.refs,
        [&](const std::string& line, std::size_t line_no) {
            auto s = parse_sample(line, &err);
            if (!s) {
                failure = a.refs + ":" + std::to_string(line_no) + ": " + err;
                return false;
            }
            acc.add(*s);
            return true;
        },
        &err);
    if (!failure.empty()) return fail(failure);
    if (!ok) return fail(err);
    std::cout << stats_json(acc.finish()).dump(2) << "\n";
    return 0;
}

// --- baseline ----------------------------------------------------------------

struct BaselineArgs {
    std::string refs = "-";
    std::string strategy = "echo";
    double noise = 0.0;
    std::uint64_t seed = 0;
    bool no_box = false;
    std::string out = "-";
};

int run_baseline(const BaselineArgs& a) {
    auto strategy = baseline_strategy_from_string(a.strategy);
    if (!strategy) {
        return fail("unknown strategy '" + a.strategy +
                    "' (expected stable_only, echo, or jitter)");
    }
    BaselineSpec spec;
    spec.strategy = *strategy;
    spec.noise_scale = a.noise;
    spec.seed = a.seed;
    spec.omit_boxes = a.no_box;

    std::string err;
    InputStream in;
    if (!in.open(a.refs, &err)) return fail(err);
    OutputStream out;
    if (!out.open(a.out, &err)) return fail(err);

    std::size_t index = 0;
    std::string failure;
    bool ok = for_each_line(
        *in.stream, a.refs,
        [&](const std::string& line, std::size_t line_no) {
            auto s = parse_sample(line, &err);
            if (!s) {
                failure = a.refs + ":" + std::to_string(line_no) + ": " + err;
                return false;
            }
            *out.stream << prediction_line(predict_one(spec, *s, index++)) << '\n';
            return true;
        },
        &err);
    if (!failure.empty()) return fail(failure);
    if (!ok) return fail(err);
    out.stream->flush();
    if (out.stream->fail()) return fail("write failure on " + a.out);

    write_meta(a.out, "baseline",
               {{"strategy", to_string(spec.strategy)},
                {"noise", spec.noise_scale},
                {"seed", spec.seed},
                {"no_box", spec.omit_boxes},
                {"refs", a.refs}});
    return 0;
}

// --- evaluate ----------------------------------------------------------------

struct EvalArgs {
    std::string refs;
    std::string preds;
    std::string out = "-";
    std::string per_sample;
    double iou_threshold = 0.5;
    std::uint64_t min_anatomy_support = 0;
    int workers = 1;
};

int run_evaluate(const EvalArgs& a) {
    std::string err;
    ChangeLexicon lexicon = ChangeLexicon::builtin();
    if (const char* env = std::getenv("TRACE_BENCH_LEXICON")) {
        auto loaded = ChangeLexicon::from_file(env, &err);
        if (!loaded) return fail(err);
        lexicon = std::move(*loaded);
    }

    InputStream refs_in;
    if (!refs_in.open(a.refs, &err)) return fail(err);
    std::vector<Sample> refs;
    if (!read_samples(*refs_in.stream, a.refs, &refs, &err)) return fail(err);

    InputStream preds_in;
    if (!preds_in.open(a.preds, &err)) return fail(err);
    std::vector<Prediction> preds;
    if (!read_predictions(*preds_in.stream, a.preds, &preds, &err)) return fail(err);

    EvalConfig cfg;
    cfg.iou_threshold = a.iou_threshold;
    cfg.min_anatomy_support = a.min_anatomy_support;
    cfg.lexicon_version = lexicon.version();

    auto result = evaluate(refs, preds, cfg, lexicon, a.workers, &err);
    if (!result) return fail(err);

    OutputStream out;
    if (!out.open(a.out, &err)) return fail(err);
    *out.stream << result->report.to_json();
    out.stream->flush();
    if (out.stream->fail()) return fail("write failure on " + a.out);

    if (!a.per_sample.empty()) {
        std::ofstream csv(a.per_sample);
        if (!csv) return fail("cannot open " + a.per_sample + " for writing");
        csv << per_sample_csv(result->rows);
        csv.flush();
        if (csv.fail()) return fail("write failure on " + a.per_sample);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"grounded temporal report corpora, baselines, and metrics"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic study corpus");
    synth->add_option("--patients", synth_args.patients, "number of patients");
    synth->add_option("--seed", synth_args.seed, "generator seed");
    synth->add_option("--min-studies", synth_args.min_studies, "min studies per patient");
    synth->add_option("--max-studies", synth_args.max_studies, "max studies per patient");
    synth->add_option("--min-annotations", synth_args.min_annotations,
                      "min annotations per study");
    synth->add_option("--max-annotations", synth_args.max_annotations,
                      "max annotations per study");
    synth->add_option("--label-dist", synth_args.label_dist,
                      "worsened:improved:stable weights");
    synth->add_option("--image-size", synth_args.image_size, "image edge in pixels");
    synth->add_option("--out", synth_args.out, "output JSONL ('-' = stdout)");
    synth->add_option("--splits-out", synth_args.splits_out,
                      "also write a patient split CSV here");
    synth->add_option("--split-ratios", synth_args.split_ratios,
                      "train:val:test ratios for --splits-out");

    BuildArgs build_args;
    CLI::App* build = app.add_subcommand(
        "build", "pair studies and emit per-split sample corpora");
    build->add_option("--studies", build_args.studies,
                      "study JSONL, sorted by patient_id ('-' = stdin)");
    build->add_option("--splits", build_args.splits, "patient split CSV")
        ->required();
    build->add_option("--out-dir", build_args.out_dir, "output directory");
    build->add_option("--prefix", build_args.prefix, "output file prefix");

    StatsArgs stats_args;
    CLI::App* stats = app.add_subcommand("stats", "label/anatomy distribution of a sample corpus");
    stats->add_option("--refs", stats_args.refs, "sample JSONL ('-' = stdin)");

    BaselineArgs baseline_args;
    CLI::App* baseline = app.add_subcommand("baseline", "run a reference predictor");
    baseline->add_option("--refs", baseline_args.refs, "sample JSONL ('-' = stdin)");
    baseline->add_option("--strategy", baseline_args.strategy,
                         "stable_only | echo | jitter");
    baseline->add_option("--noise", baseline_args.noise, "jitter noise amplitude");
    baseline->add_option("--seed", baseline_args.seed, "jitter seed");
    baseline->add_flag("--no-box", baseline_args.no_box,
                       "omit box tokens (stable_only)");
    baseline->add_option("--out", baseline_args.out, "prediction JSONL ('-' = stdout)");

    EvalArgs eval_args;
    CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "score predictions against references");
    evaluate_cmd->add_option("--refs", eval_args.refs, "sample JSONL")->required();
    evaluate_cmd->add_option("--preds", eval_args.preds, "prediction JSONL")->required();
    evaluate_cmd->add_option("--out", eval_args.out, "report JSON ('-' = stdout)");
    evaluate_cmd->add_option("--per-sample", eval_args.per_sample,
                             "also write a per-sample CSV here");
    evaluate_cmd->add_option("--iou-threshold", eval_args.iou_threshold,
                             "strict IoU hit threshold");
    evaluate_cmd->add_option("--min-anatomy-support", eval_args.min_anatomy_support,
                             "merge rarer anatomies into 'other'");
    evaluate_cmd->add_option("--workers", eval_args.workers, "scoring threads")
        ->check(CLI::Range(1, 256));

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);  // --help / --version
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (synth->parsed()) return run_synth(synth_args);
        if (build->parsed()) return run_build(build_args);
        if (stats->parsed()) return run_stats(stats_args);
        if (baseline->parsed()) return run_baseline(baseline_args);
        if (evaluate_cmd->parsed()) return run_evaluate(eval_args);
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
