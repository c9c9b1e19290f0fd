#include "owl/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "owl/config.hpp"

namespace owl::io {

using config::format_double;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

std::vector<DatasetRecord> read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty dataset: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kDatasetHeader) {
    throw SchemaError(std::string("unexpected header; expected '") + kDatasetHeader + "'");
  }
  std::vector<DatasetRecord> records;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++index;
    const auto fields = split_csv(line);
    auto fail = [&](const std::string& why) {
      return SchemaError("record " + std::to_string(index) + ": " + why);
    };
    if (fields.size() != 9) throw fail("expected 9 fields, got " + std::to_string(fields.size()));
    DatasetRecord r;
    if (!parse_number(fields[0], r.image_id)) throw fail("bad image_id '" + fields[0] + "'");
    double* geom[] = {&r.box.cx, &r.box.cy, &r.box.w, &r.box.h};
    for (int i = 0; i < 4; ++i) {
      const auto& f = fields[static_cast<std::size_t>(i + 1)];
      if (!parse_number(f, *geom[i]) || !std::isfinite(*geom[i])) throw fail("bad box field '" + f + "'");
    }
    if (!(r.box.w > 0.0) || !(r.box.h > 0.0)) throw fail("box extents must be positive");
    if (!parse_number(fields[5], r.label)) throw fail("bad label '" + fields[5] + "'");
    if (!parse_number(fields[6], r.score) || !std::isfinite(r.score)) {
      throw fail("bad score '" + fields[6] + "'");
    }
    r.split = fields[7];
    if (!parse_number(fields[8], r.task_id)) throw fail("bad task_id '" + fields[8] + "'");
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<DatasetRecord> read_dataset_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot read '" + path.string() + "'");
  return read_dataset(in);
}

void write_dataset(std::ostream& out, const std::vector<DatasetRecord>& records) {
  out << kDatasetHeader << '\n';
  for (const auto& r : records) {
    out << r.image_id << ',' << format_double(r.box.cx) << ',' << format_double(r.box.cy) << ','
        << format_double(r.box.w) << ',' << format_double(r.box.h) << ',' << r.label << ','
        << format_double(r.score) << ',' << r.split << ',' << r.task_id << '\n';
  }
}

std::vector<double> read_samples(std::istream& in) {
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    const std::string token = line.substr(b, e - b + 1);
    double v = 0.0;
    if (!parse_number(token, v) || !std::isfinite(v)) {
      throw SchemaError("line " + std::to_string(line_no) + ": not a number: '" + token + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<eval::DetectionRecord> to_detections(const std::vector<DatasetRecord>& records) {
  std::vector<eval::DetectionRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(eval::DetectionRecord{r.image_id, r.box, r.label, r.score});
  return out;
}

eval::EvalSet to_eval_set(const std::vector<DatasetRecord>& detections,
                          const std::vector<DatasetRecord>& ground_truth,
                          const protocol::TaskSchedule& schedule, int& task_id) {
  if (ground_truth.empty()) throw SchemaError("ground-truth file has no records");
  task_id = ground_truth.front().task_id;
  if (task_id < 1 || static_cast<std::size_t>(task_id) > schedule.num_tasks()) {
    throw SchemaError("record 1: task_id " + std::to_string(task_id) + " outside the schedule");
  }
  eval::EvalSet set;
  set.known_set = schedule.known_after(static_cast<std::size_t>(task_id));
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    const auto& r = ground_truth[i];
    if (r.task_id != task_id) {
      throw SchemaError("record " + std::to_string(i + 1) + ": mixed task_id values in ground truth");
    }
    if (r.label != kUnknownClass &&
        std::find(set.known_set.begin(), set.known_set.end(), r.label) == set.known_set.end()) {
      throw SchemaError("record " + std::to_string(i + 1) + ": label " + std::to_string(r.label) +
                        " is not known at task " + std::to_string(task_id));
    }
    set.ground_truths[r.image_id].push_back(boxes::AnnotatedBox{r.box, r.label});
  }
  const auto c_max = schedule.max_class();
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const auto& r = detections[i];
    if (r.label < 0 || r.label > c_max) {
      throw SchemaError("detection record " + std::to_string(i + 1) + ": label " + std::to_string(r.label) +
                        " outside the schedule");
    }
  }
  set.detections = to_detections(detections);
  return set;
}

void export_world(const protocol::World& world, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<DatasetRecord> objects;
  std::vector<DatasetRecord> proposals;
  std::ofstream features(dir / "features.csv", std::ios::binary);
  features << "image_id,object_index,split,true_label";
  for (std::size_t j = 0; j < world.config.dim; ++j) features << ",f" << j;
  features << '\n';

  auto emit = [&](const protocol::SceneImage& img, const std::string& split, int task,
                  const std::vector<ClassId>* annotated) {
    for (std::size_t i = 0; i < img.objects.size(); ++i) {
      const auto& o = img.objects[i];
      ClassId label = o.object.label;
      if (annotated && std::find(annotated->begin(), annotated->end(), label) == annotated->end()) label = -1;
      objects.push_back(DatasetRecord{img.id, o.object.box, label, 1.0, split, task});
      features << img.id << ',' << i << ',' << split << ',' << o.object.label;
      for (double v : o.feature) features << ',' << format_double(v);
      features << '\n';
    }
    for (const auto& p : img.proposals) {
      const ClassId label =
          p.source_object < 0 ? -1 : img.objects[static_cast<std::size_t>(p.source_object)].object.label;
      proposals.push_back(DatasetRecord{img.id, p.proposal.box, label, p.proposal.objectness, split, task});
    }
  };

  for (std::size_t t = 1; t <= world.train.size(); ++t) {
    const auto& classes = world.schedule.task_classes(t);
    for (const auto& img : world.train[t - 1]) emit(img, "train", static_cast<int>(t), &classes);
  }
  for (const auto& img : world.validation) emit(img, "val", 0, nullptr);
  for (const auto& img : world.test) emit(img, "test", 0, nullptr);

  std::ofstream obj(dir / "objects.csv", std::ios::binary);
  write_dataset(obj, objects);
  std::ofstream prop(dir / "proposals.csv", std::ios::binary);
  write_dataset(prop, proposals);
}

}  // namespace owl::io
