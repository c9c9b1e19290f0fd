#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "oracles.hpp"
#include "owl/config.hpp"
#include "owl/dataset_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace owl;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "owl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("owl_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<json> json_lines(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

void expect_same_tree(const fs::path& a, const fs::path& b) {
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto other = b / entry.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(slurp(entry.path()), slurp(other)) << entry.path().filename();
    ++files;
  }
  EXPECT_GT(files, 0u);
}

void write_records(const fs::path& p, const std::vector<io::DatasetRecord>& recs) {
  std::ofstream f(p, std::ios::binary);
  io::write_dataset(f, recs);
}

}  // namespace

TEST(Cli, RunWritesOneRecordPerTaskAndIsDeterministic) {
  const auto a = scratch("run_a"), b = scratch("run_b");
  const auto ra = invoke({"--out", a.string(), "--seed", "42", "run"});
  ASSERT_EQ(ra.code, cli::kExitOk) << ra.err;
  const auto tasks = json_lines(ra.out);
  ASSERT_EQ(tasks.size(), 2u);
  EXPECT_EQ(tasks[0]["task_id"], 1);
  EXPECT_EQ(tasks[1]["task_id"], 2);

  const auto records = json_lines(slurp(a / "reports.jsonl"));
  ASSERT_FALSE(records.empty());
  EXPECT_EQ(records[0]["record"], "run");
  EXPECT_EQ(records[0]["seed"], 42);
  EXPECT_EQ(records[0]["config"].size(), config::known_keys().size());
  std::size_t task_records = 0, fits = 0;
  for (const auto& r : records) {
    task_records += r["record"] == "task" ? 1 : 0;
    fits += r["record"] == "weibull_fit" ? 1 : 0;
  }
  EXPECT_EQ(task_records, 2u);
  EXPECT_EQ(fits, 2u);  // the last task has no validation unknowns
  EXPECT_TRUE(fs::exists(a / "loss_trace.csv"));

  ASSERT_EQ(invoke({"--out", b.string(), "--seed", "42", "run"}).code, cli::kExitOk);
  expect_same_tree(a, b);
}

TEST(Cli, ConfigFileAndOverrides) {
  const auto dir = scratch("cfg");
  {
    std::ofstream f(dir / "run.ini");
    f << "seed = 5\n[replay]\nn_ex = 10\n";
  }
  const auto r = invoke({"--config", (dir / "run.ini").string(), "--set", "world.num_tasks=1", "--seed", "9",
                         "--out", (dir / "o").string(), "run"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto meta = json_lines(slurp(dir / "o" / "reports.jsonl"))[0];
  EXPECT_EQ(meta["seed"], 9);
  EXPECT_EQ(meta["config"]["replay.n_ex"], "10");
  EXPECT_EQ(meta["config"]["world.num_tasks"], "1");
  EXPECT_EQ(json_lines(r.out).size(), 1u);
}

TEST(Cli, ConfigErrorsNameTheKey) {
  const auto dir = scratch("badkey");
  {
    std::ofstream f(dir / "bad.ini");
    f << "[cluster]\ndeta = 3\n";
  }
  const auto r = invoke({"--config", (dir / "bad.ini").string(), "--out", dir.string(), "run"});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find("cluster.deta"), std::string::npos) << r.err;

  const auto s = invoke({"--set", "cluster.deta=3", "--out", dir.string(), "run"});
  EXPECT_EQ(s.code, cli::kExitConfig);
  EXPECT_NE(s.err.find("cluster.deta"), std::string::npos);

  EXPECT_EQ(invoke({"--set", "cluster.eta=2", "--out", dir.string(), "run"}).code, cli::kExitConfig);
  EXPECT_EQ(invoke({"--config", (dir / "missing.ini").string(), "run"}).code, cli::kExitConfig);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(invoke({}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"fit-weibull"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"--help"}).code, cli::kExitOk);
  // Distinct codes for the four failure kinds.
  EXPECT_EQ(std::set<int>({cli::kExitUsage, cli::kExitConfig, cli::kExitRuntime, cli::kExitSchema}).size(), 4u);
}

TEST(Cli, SweepReplayShowsForgettingGap) {
  const auto dir = scratch("sweep_nex");
  const auto r = invoke({"--out", dir.string(), "sweep", "--sweep", "replay.n_ex=0,50"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  std::map<std::string, double> map_prev;
  std::string current;
  for (const auto& rec : json_lines(slurp(dir / "sweep.jsonl"))) {
    if (rec["record"] == "sweep_point") {
      EXPECT_EQ(rec["status"], "ok");
      current = rec["axes"]["replay.n_ex"];
    } else if (rec["record"] == "task" && rec["task_id"] == 2) {
      map_prev[current] = rec["map_prev"];
    }
  }
  ASSERT_EQ(map_prev.size(), 2u);
  EXPECT_GT(map_prev["50"], map_prev["0"]);

  const std::string table = slurp(dir / "sweep.csv");
  EXPECT_EQ(table.substr(0, table.find('\n')), "replay.n_ex,task_id,wi,a_ose,map_prev,map_curr,map_both,flags,error");
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 5);
}

TEST(Cli, SweepEtaHasBothRows) {
  const auto dir = scratch("sweep_eta");
  const auto r = invoke({"--out", dir.string(), "--set", "world.num_tasks=1", "sweep", "--sweep",
                         "cluster.eta=0.4,0.9", "--jobs", "2"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  std::istringstream in(slurp(dir / "sweep.csv"));
  std::string line;
  std::getline(in, line);
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].rfind("0.4,1,", 0), 0u) << rows[0];
  EXPECT_EQ(rows[1].rfind("0.9,1,", 0), 0u) << rows[1];
  for (const auto& row : rows) {
    // wi column is filled
    std::istringstream cells(row);
    std::string cell;
    std::getline(cells, cell, ',');
    std::getline(cells, cell, ',');
    std::getline(cells, cell, ',');
    EXPECT_FALSE(cell.empty());
  }
}

TEST(Cli, SweepAxisErrors) {
  const auto dir = scratch("sweep_err");
  EXPECT_EQ(invoke({"--out", dir.string(), "sweep", "--sweep", "replay.n_ex="}).code, cli::kExitConfig);
  EXPECT_EQ(invoke({"--out", dir.string(), "sweep", "--sweep", "replay.n_ex"}).code, cli::kExitConfig);
  EXPECT_EQ(invoke({"--out", dir.string(), "sweep", "--sweep", "cluster.deta=1,2"}).code, cli::kExitConfig);
  EXPECT_EQ(invoke({"--out", dir.string(), "sweep", "--sweep", "a=1", "--sweep", "b=1", "--sweep", "c=1"}).code,
            cli::kExitConfig);
  EXPECT_EQ(invoke({"--out", dir.string(), "sweep"}).code, cli::kExitUsage);
}

TEST(Cli, SweepRecordsFailedPointsAndContinues) {
  const auto dir = scratch("sweep_fail");
  // Softmax threshold 1 fails validation inside the run; 0.5 succeeds.
  const auto r = invoke({"--out", dir.string(), "--set", "world.num_tasks=1", "sweep", "--sweep",
                         "energy.softmax_threshold=0.5,1"});
  EXPECT_EQ(r.code, cli::kExitRuntime);
  const auto recs = json_lines(slurp(dir / "sweep.jsonl"));
  std::vector<std::string> status;
  for (const auto& rec : recs) {
    if (rec["record"] == "sweep_point") status.push_back(rec["status"]);
  }
  EXPECT_EQ(status, (std::vector<std::string>{"ok", "failed"}));
}

TEST(Cli, FitWeibullRecoversExponential) {
  const auto dir = scratch("fit");
  {
    std::ofstream f(dir / "exp.txt");
    for (double x : oracle::weibull_samples(1.0, 2.0, 0.0, 10000, 99)) f << config::format_double(x) << '\n';
  }
  const auto r = invoke({"--out", (dir / "o").string(), "fit-weibull", (dir / "exp.txt").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto rec = json_lines(r.out).at(0);
  EXPECT_EQ(rec["record"], "weibull_fit");
  EXPECT_NEAR(rec["shape"].get<double>(), 1.0, 0.05);
  EXPECT_TRUE(rec.contains("scale"));
  EXPECT_TRUE(rec.contains("location"));
  EXPECT_TRUE(rec.contains("log_likelihood"));
  EXPECT_EQ(slurp(dir / "o" / "weibull.jsonl"), r.out);
}

TEST(Cli, FitWeibullErrors) {
  const auto dir = scratch("fit_err");
  {
    std::ofstream f(dir / "three.txt");
    f << "1\n2\n3\n";
    std::ofstream g(dir / "text.txt");
    g << "1.0\n2.0\n\nabc\n";
  }
  EXPECT_EQ(invoke({"--out", dir.string(), "fit-weibull", (dir / "three.txt").string()}).code, cli::kExitRuntime);
  const auto r = invoke({"--out", dir.string(), "fit-weibull", (dir / "text.txt").string()});
  EXPECT_EQ(r.code, cli::kExitSchema);
  EXPECT_NE(r.err.find("line 4"), std::string::npos) << r.err;
  EXPECT_EQ(invoke({"--out", dir.string(), "fit-weibull", (dir / "nope.txt").string()}).code, cli::kExitSchema);
}

TEST(Cli, EvalPerfectDetections) {
  const auto dir = scratch("eval_perfect");
  std::vector<io::DatasetRecord> gts;
  for (int i = 0; i < 12; ++i) {
    gts.push_back({static_cast<ImageId>(i / 3), boxes::Box{10.0 + 20 * (i % 3), 10, 6, 6}, 1 + i % 5, 1.0, "test", 1});
  }
  write_records(dir / "gts.csv", gts);
  write_records(dir / "dets.csv", gts);
  const auto r = invoke({"--out", (dir / "o").string(), "eval", (dir / "dets.csv").string(),
                         (dir / "gts.csv").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto rec = json_lines(r.out).at(0);
  EXPECT_EQ(rec["map_curr"], 1.0);
  EXPECT_EQ(rec["map_both"], 1.0);
  EXPECT_EQ(rec["a_ose"], 0);
  EXPECT_TRUE(rec["map_prev"].is_null());
  EXPECT_TRUE(fs::exists(dir / "o" / "metrics.csv"));
}

TEST(Cli, EvalSixDetectionFixtureMatchesOracle) {
  const auto dir = scratch("eval_fixture");
  const std::vector<io::DatasetRecord> gts = {
      {1, boxes::Box{10, 10, 4, 4}, 1, 1, "test", 1}, {1, boxes::Box{30, 30, 4, 4}, 2, 1, "test", 1},
      {1, boxes::Box{50, 50, 4, 4}, 0, 1, "test", 1}, {2, boxes::Box{10, 10, 4, 4}, 1, 1, "test", 1},
      {2, boxes::Box{20, 20, 4, 4}, 0, 1, "test", 1},
  };
  const std::vector<io::DatasetRecord> dets = {
      {1, boxes::Box{10, 10, 4, 4}, 1, 0.9, "test", 1},   {1, boxes::Box{30.5, 30, 4, 4}, 2, 0.8, "test", 1},
      {1, boxes::Box{50, 50, 4, 4}, 1, 0.7, "test", 1},   {2, boxes::Box{10.4, 10, 4, 4}, 1, 0.6, "test", 1},
      {2, boxes::Box{20, 20.5, 4, 4}, 1, 0.6, "test", 1}, {2, boxes::Box{70, 70, 4, 4}, 2, 0.3, "test", 1},
  };
  write_records(dir / "gts.csv", gts);
  write_records(dir / "dets.csv", dets);
  const auto r = invoke({"--out", (dir / "o").string(), "eval", (dir / "dets.csv").string(),
                         (dir / "gts.csv").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto rec = json_lines(r.out).at(0);

  // Same fixture assembled by hand for the oracles.
  eval::EvalSet set;
  set.known_set = {1, 2, 3, 4, 5};
  for (const auto& g : gts) set.ground_truths[g.image_id].push_back({g.box, g.label});
  for (const auto& d : dets) set.detections.push_back({d.image_id, d.box, d.label, d.score});

  const double ap1 = *oracle::brute_ap(set, 1, 0.5);
  const double ap2 = *oracle::brute_ap(set, 2, 0.5);
  EXPECT_EQ(rec["map_curr"].get<double>(), (ap1 + ap2) / 2);
  EXPECT_EQ(rec["map_both"].get<double>(), (ap1 + ap2) / 2);
  EXPECT_EQ(rec["a_ose"], oracle::brute_aose(set, 0.5, 0.05));
  EXPECT_EQ(rec["a_ose"], 2);
  const auto wi = oracle::brute_wi(set, 0.8, 0.5);
  ASSERT_TRUE(wi.defined);
  EXPECT_EQ(rec["wi"].get<double>(), wi.precision_known / wi.precision_mixed - 1.0);
  EXPECT_GT(rec["wi"].get<double>(), 0.0);
}

TEST(Cli, EvalSchemaErrors) {
  const auto dir = scratch("eval_schema");
  write_records(dir / "gts.csv", {{1, boxes::Box{10, 10, 4, 4}, 12, 1, "test", 1}});
  write_records(dir / "dets.csv", {{1, boxes::Box{10, 10, 4, 4}, 1, 0.5, "test", 1}});
  const auto r = invoke({"--out", dir.string(), "eval", (dir / "dets.csv").string(), (dir / "gts.csv").string()});
  EXPECT_EQ(r.code, cli::kExitSchema);
  EXPECT_NE(r.err.find("record 1"), std::string::npos) << r.err;

  {
    std::ofstream f(dir / "broken.csv");
    f << io::kDatasetHeader << "\n1,10,10,4,4,1,0.5,test,1\n1,10,10,4\n";
  }
  const auto b = invoke({"--out", dir.string(), "eval", (dir / "broken.csv").string(), (dir / "gts.csv").string()});
  EXPECT_EQ(b.code, cli::kExitSchema);
  EXPECT_NE(b.err.find("record 2"), std::string::npos) << b.err;
}

TEST(Cli, GenWorldIsDeterministic) {
  const auto a = scratch("world_a"), b = scratch("world_b"), c = scratch("world_c");
  ASSERT_EQ(invoke({"--out", a.string(), "--set", "world.train_instances_per_class=30", "gen-world"}).code, 0);
  ASSERT_EQ(invoke({"--out", b.string(), "--set", "world.train_instances_per_class=30", "gen-world"}).code, 0);
  expect_same_tree(a, b);
  for (const char* f : {"objects.csv", "proposals.csv", "features.csv", "world.jsonl"}) {
    EXPECT_TRUE(fs::exists(a / f)) << f;
  }
  ASSERT_EQ(invoke({"--out", c.string(), "--seed", "43", "--set", "world.train_instances_per_class=30",
                    "gen-world"}).code,
            0);
  EXPECT_NE(slurp(a / "objects.csv"), slurp(c / "objects.csv"));
  // Exported objects parse back under the shared schema.
  EXPECT_NO_THROW(io::read_dataset_file(a / "objects.csv"));
  EXPECT_NO_THROW(io::read_dataset_file(a / "proposals.csv"));
}
