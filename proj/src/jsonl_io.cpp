#include "tracebench/jsonl_io.hpp"

#include <cmath>
#include <istream>

#include <json.hpp>

namespace tracebench {

namespace {

using nlohmann::json;

// integral values print as integers ("1024", not "1024.0")
json number_json(double v) {
    if (std::floor(v) == v && std::abs(v) < 9.0e15) {
        return json(static_cast<std::int64_t>(v));
    }
    return json(v);
}

json box_json(const PixelRect& r) {
    return json::array({number_json(r.x1), number_json(r.y1), number_json(r.x2),
                        number_json(r.y2)});
}

json box_json(const BoundingBox& b) {
    return json::array({b.x1, b.y1, b.x2, b.y2});
}

bool four_numbers(const json& j, double* out) {
    if (!j.is_array() || j.size() != 4) return false;
    for (std::size_t i = 0; i < 4; ++i) {
        if (!j[i].is_number()) return false;
        out[i] = j[i].get<double>();
    }
    return true;
}

std::optional<json> parse_object(const std::string& line, std::string* error) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        if (error) *error = "not a JSON object";
        return std::nullopt;
    }
    return j;
}

}  // namespace

std::optional<StudyRecord> parse_study_record(const std::string& line,
                                              std::string* error) {
    auto obj = parse_object(line, error);
    if (!obj) return std::nullopt;
    StudyRecord r;
    try {
        const json& j = *obj;
        r.patient_id = j.at("patient_id").get<std::string>();
        r.study_id = j.at("study_id").get<std::string>();
        r.study_order = j.at("study_order").get<std::int64_t>();
        r.image_id = j.at("image_id").get<std::string>();
        r.image_width = j.at("image_width").get<double>();
        r.image_height = j.at("image_height").get<double>();
        for (const json& a : j.at("annotations")) {
            Annotation ann;
            ann.finding = a.at("finding").get<std::string>();
            ann.anatomy = a.at("anatomy").get<std::string>();
            auto change = change_label_from_string(a.at("change").get<std::string>());
            if (!change) {
                if (error) {
                    *error = "bad change label '" +
                             a.at("change").get<std::string>() + "'";
                }
                return std::nullopt;
            }
            ann.change = *change;
            double box[4];
            if (!four_numbers(a.at("box_px"), box)) {
                if (error) *error = "box_px must be an array of 4 numbers";
                return std::nullopt;
            }
            ann.box_px = PixelRect{box[0], box[1], box[2], box[3]};
            r.annotations.push_back(std::move(ann));
        }
    } catch (const json::exception& e) {
        if (error) *error = e.what();
        return std::nullopt;
    }
    return r;
}

std::string study_record_line(const StudyRecord& r) {
    json anns = json::array();
    for (const Annotation& a : r.annotations) {
        anns.push_back({{"finding", a.finding},
                        {"anatomy", a.anatomy},
                        {"change", to_string(a.change)},
                        {"box_px", box_json(a.box_px)}});
    }
    json j = {{"patient_id", r.patient_id},
              {"study_id", r.study_id},
              {"study_order", r.study_order},
              {"image_id", r.image_id},
              {"image_width", number_json(r.image_width)},
              {"image_height", number_json(r.image_height)},
              {"annotations", std::move(anns)}};
    return j.dump();
}

std::optional<Sample> parse_sample(const std::string& line, std::string* error) {
    auto obj = parse_object(line, error);
    if (!obj) return std::nullopt;
    Sample s;
    try {
        const json& j = *obj;
        s.sample_id = j.at("sample_id").get<std::string>();
        s.patient_id = j.at("patient_id").get<std::string>();
        s.prior_image_id = j.at("prior_image_id").get<std::string>();
        s.current_image_id = j.at("current_image_id").get<std::string>();
        s.split = j.value("split", std::string());
        const json& ref = j.at("reference");
        s.reference.finding = ref.at("finding").get<std::string>();
        s.reference.anatomy = ref.at("anatomy").get<std::string>();
        auto change = change_label_from_string(ref.at("change").get<std::string>());
        if (!change) {
            if (error) {
                *error = "bad change label '" +
                         ref.at("change").get<std::string>() + "'";
            }
            return std::nullopt;
        }
        s.reference.change = *change;
        double box[4];
        if (!four_numbers(ref.at("box"), box)) {
            if (error) *error = "reference.box must be an array of 4 numbers";
            return std::nullopt;
        }
        s.reference.box = BoundingBox{box[0], box[1], box[2], box[3]};
        if (!s.reference.box.valid()) {
            if (error) *error = "reference.box violates 0<=x1<x2<=1, 0<=y1<y2<=1";
            return std::nullopt;
        }
    } catch (const json::exception& e) {
        if (error) *error = e.what();
        return std::nullopt;
    }
    return s;
}

std::string sample_line(const Sample& s) {
    json j = {{"sample_id", s.sample_id},
              {"patient_id", s.patient_id},
              {"prior_image_id", s.prior_image_id},
              {"current_image_id", s.current_image_id},
              {"split", s.split},
              {"reference_text", reference_text(s)},
              {"reference",
               {{"finding", s.reference.finding},
                {"anatomy", s.reference.anatomy},
                {"change", to_string(s.reference.change)},
                {"box", box_json(s.reference.box)}}}};
    return j.dump();
}

std::optional<Prediction> parse_prediction(const std::string& line,
                                           std::string* error) {
    auto obj = parse_object(line, error);
    if (!obj) return std::nullopt;
    Prediction p;
    try {
        p.sample_id = obj->at("sample_id").get<std::string>();
        p.text = obj->at("prediction_text").get<std::string>();
    } catch (const json::exception& e) {
        if (error) *error = e.what();
        return std::nullopt;
    }
    return p;
}

std::string prediction_line(const Prediction& p) {
    json j = {{"sample_id", p.sample_id}, {"prediction_text", p.text}};
    return j.dump();
}

bool for_each_line(std::istream& in, const std::string& name,
                   const std::function<bool(const std::string& line,
                                            std::size_t line_no)>& fn,
                   std::string* error) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!fn(line, line_no)) return true;  // caller stopped; not a stream error
    }
    if (in.bad()) {
        if (error) *error = name + ": read failure";
        return false;
    }
    return true;
}

namespace {

template <typename T>
bool read_jsonl(std::istream& in, const std::string& name,
                std::optional<T> (*parse)(const std::string&, std::string*),
                std::vector<T>* out, std::string* error) {
    bool ok = true;
    for_each_line(
        in, name,
        [&](const std::string& line, std::size_t line_no) {
            std::string why;
            auto item = parse(line, &why);
            if (!item) {
                if (error) {
                    *error = name + ":" + std::to_string(line_no) + ": " + why;
                }
                ok = false;
                return false;
            }
            out->push_back(std::move(*item));
            return true;
        },
        nullptr);
    if (ok && in.bad()) {
        if (error) *error = name + ": read failure";
        return false;
    }
    return ok;
}

}  // namespace

bool read_study_records(std::istream& in, const std::string& name,
                        std::vector<StudyRecord>* out, std::string* error) {
    return read_jsonl(in, name, parse_study_record, out, error);
}

bool read_samples(std::istream& in, const std::string& name,
                  std::vector<Sample>* out, std::string* error) {
    return read_jsonl(in, name, parse_sample, out, error);
}

bool read_predictions(std::istream& in, const std::string& name,
                      std::vector<Prediction>* out, std::string* error) {
    return read_jsonl(in, name, parse_prediction, out, error);
}

std::optional<std::map<std::string, std::string>> read_split_csv(
    std::istream& in, const std::string& name, std::string* error) {
    std::map<std::string, std::string> out;
    bool ok = true;
    for_each_line(
        in, name,
        [&](const std::string& line, std::size_t line_no) {
            if (line_no == 1 && line == "patient_id,split") return true;
            auto comma = line.find(',');
            std::string pid =
                comma == std::string::npos ? line : line.substr(0, comma);
            std::string split =
                comma == std::string::npos ? "" : line.substr(comma + 1);
            if (pid.empty() ||
                (split != "train" && split != "val" && split != "test")) {
                if (error) {
                    *error = name + ":" + std::to_string(line_no) +
                             ": expected 'patient_id,split' with split in "
                             "{train, val, test}";
                }
                ok = false;
                return false;
            }
            out[pid] = split;
            return true;
        },
        nullptr);
    if (!ok) return std::nullopt;
    if (in.bad()) {
        if (error) *error = name + ": read failure";
        return std::nullopt;
    }
    return out;
}

std::string split_csv(const std::vector<std::pair<std::string, std::string>>& rows) {
    std::string out = "patient_id,split\n";
    for (const auto& [pid, split] : rows) {
        out += pid;
        out += ',';
        out += split;
        out += '\n';
    }
    return out;
}

}  // namespace tracebench
