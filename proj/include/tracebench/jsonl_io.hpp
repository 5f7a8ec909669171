#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tracebench/baselines.hpp"
#include "tracebench/corpus.hpp"

namespace tracebench {

// Line-oriented readers/writers for the on-disk formats.  Errors name the
// stream and the 1-based line: "<name>:<line>: <what>".  Blank lines are
// skipped.  Writers emit one compact JSON object per line with sorted keys,
// so identical values give identical bytes.

std::optional<StudyRecord> parse_study_record(const std::string& line,
                                              std::string* error);
std::string study_record_line(const StudyRecord& r);

std::optional<Sample> parse_sample(const std::string& line, std::string* error);
std::string sample_line(const Sample& s);

std::optional<Prediction> parse_prediction(const std::string& line,
                                           std::string* error);
std::string prediction_line(const Prediction& p);

// fn returns false to stop early.  Returns false on error.
bool for_each_line(std::istream& in, const std::string& name,
                   const std::function<bool(const std::string& line,
                                            std::size_t line_no)>& fn,
                   std::string* error);

bool read_study_records(std::istream& in, const std::string& name,
                        std::vector<StudyRecord>* out, std::string* error);
bool read_samples(std::istream& in, const std::string& name,
                  std::vector<Sample>* out, std::string* error);
bool read_predictions(std::istream& in, const std::string& name,
                      std::vector<Prediction>* out, std::string* error);

// "patient_id,split" CSV; a header row equal to that is skipped.
std::optional<std::map<std::string, std::string>> read_split_csv(
    std::istream& in, const std::string& name, std::string* error);
std::string split_csv(const std::vector<std::pair<std::string, std::string>>& rows);

}  // namespace tracebench
