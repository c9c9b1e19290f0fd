#pragma once

// Flat CSV dataset schema shared by evaluation inputs and world export:
//
//   image_id,cx,cy,w,h,label,score,split,task_id
//
// `score` is a detection confidence or a proposal objectness (1 for
// ground-truth objects). Decimal numbers use '.' regardless of locale.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "owl/eval.hpp"
#include "owl/world.hpp"

namespace owl::io {

class SchemaError : public Error {
 public:
  using Error::Error;
};

struct DatasetRecord {
  ImageId image_id = 0;
  boxes::Box box;
  ClassId label = kUnknownClass;
  double score = 1.0;
  std::string split;
  int task_id = 0;
};

inline constexpr const char* kDatasetHeader = "image_id,cx,cy,w,h,label,score,split,task_id";

/// Throws SchemaError naming the 1-based record index on malformed input.
std::vector<DatasetRecord> read_dataset(std::istream& in);
std::vector<DatasetRecord> read_dataset_file(const std::filesystem::path& path);
void write_dataset(std::ostream& out, const std::vector<DatasetRecord>& records);

/// Newline-delimited numbers; blank lines are skipped. Throws SchemaError
/// naming the 1-based line number of the first non-numeric line.
std::vector<double> read_samples(std::istream& in);

std::vector<eval::DetectionRecord> to_detections(const std::vector<DatasetRecord>& records);

/// Builds an EvalSet. All ground-truth records must share one task_id; its
/// known set comes from `schedule`, and every label must be 0 or known.
eval::EvalSet to_eval_set(const std::vector<DatasetRecord>& detections,
                          const std::vector<DatasetRecord>& ground_truth,
                          const protocol::TaskSchedule& schedule, int& task_id);

/// Writes objects.csv, proposals.csv and features.csv for a world. Train
/// objects keep their true class when annotated at their task and are
/// written as label -1 otherwise; validation/test objects carry true classes.
void export_world(const protocol::World& world, const std::filesystem::path& dir);

}  // namespace owl::io
