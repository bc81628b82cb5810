// End-to-end exercise of the epf binary: synth -> describe -> ingest -> run
// (three strategies) -> dm -> ensemble, plus failure modes. The binary path
// arrives as argv[1] from CTest.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace fs = std::filesystem;

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
  if (ok) {
    std::printf("ok: %s\n", what.c_str());
  } else {
    std::printf("FAILED: %s\n", what.c_str());
    ++failures;
  }
}

int run(const std::string& cmd) {
  std::fflush(stdout);
  return std::system(cmd.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: cli_test <path-to-epf-binary>\n";
    return 2;
  }
  std::string epf = argv[1];
  fs::path work = fs::temp_directory_path() / "epf_cli_work";
  fs::remove_all(work);
  fs::create_directories(work);
  std::string w = work.string();

  check(run(epf + " synth --out-dir " + w + "/data --markets 3 --days 40 --synth-seed 9") == 0,
        "synth exits 0");
  check(fs::exists(work / "data" / "M1.csv") && fs::exists(work / "data" / "M3.csv"),
        "synth writes one CSV per market");

  check(run(epf + " describe --csv M1=" + w + "/data/M1.csv --out-dir " + w) == 0,
        "describe exits 0");
  check(fs::exists(work / "describe.csv"), "describe writes the stats CSV");

  check(run(epf + " ingest --csv " + w + "/data/M2.csv --market M2 --out " + w +
            "/repaired.csv") == 0,
        "ingest exits 0");
  check(fs::exists(work / "repaired.csv"), "ingest writes the repaired CSV");

  // one config reused for three strategies
  auto write_config = [&](const std::string& strategy, const std::string& path) {
    std::ofstream f(path);
    f << R"({
  "strategy": ")" << strategy << R"(",
  "target_market": "M1",
  "source_markets": [],
  "hidden_dims": [16, 8],
  "train_config": {"max_epochs": 10, "patience": 3, "batch_size": 32,
                   "learning_rate": 0.003, "seed": 1},
  "split": {"train": ["2013-01-01", "2013-01-23"],
            "validation": ["2013-01-23", "2013-02-01"],
            "test": ["2013-02-01", "2013-02-10"]},
  "seed": 5,
  "data": {"csv": {"M1": ")" << w << R"(/data/M1.csv",
                   "M2": ")" << w << R"(/data/M2.csv",
                   "M3": ")" << w << R"(/data/M3.csv"}}
})";
  };
  for (std::string strategy : {"basic", "naive", "lear"}) {
    std::string cfg = w + "/run_" + strategy + ".json";
    write_config(strategy, cfg);
    check(run(epf + " run --config " + cfg + " --out-dir " + w + "/out") == 0,
          "run " + strategy + " exits 0");
    check(fs::exists(work / "out" / "M1" / strategy / "report.json") &&
              fs::exists(work / "out" / "M1" / strategy / "metrics.csv") &&
              fs::exists(work / "out" / "M1" / strategy / "panel.csv"),
          "run " + strategy + " writes the report bundle");
  }

  check(run(epf + " dm --dir " + w + "/out --out-dir " + w + "/dm") == 0, "dm exits 0");
  check(fs::exists(work / "dm" / "dm_M1.csv"), "dm writes a p-value grid");

  // two seeds of the basic strategy, then ensemble their reports
  std::string cfg = w + "/run_basic.json";
  check(run(epf + " run --config " + cfg + " --seed 21 --out-dir " + w + "/out2 --seeds 2") == 0,
        "run --seeds 2 exits 0");
  std::string r1 = w + "/out2/M1/basic/seed21/report.json";
  std::string r2 = w + "/out2/M1/basic/seed22/report.json";
  check(fs::exists(r1) && fs::exists(r2), "per-seed reports exist");
  check(run(epf + " ensemble --reports " + r1 + " " + r2 + " --out-dir " + w + "/ens") == 0,
        "ensemble exits 0");
  check(fs::exists(work / "ens" / "M1" / "basic_ensemble" / "report.json"),
        "ensemble writes its report");

  check(run(epf + " bogus 2>/dev/null") != 0, "unknown subcommand exits nonzero");
  check(run(epf + " run 2>/dev/null") != 0, "run without --config exits nonzero");
  check(run(epf + " ingest --csv " + w + "/missing.csv 2>/dev/null") != 0,
        "missing input file exits nonzero");

  fs::remove_all(work);
  if (failures > 0) {
    std::printf("%d CLI check(s) failed\n", failures);
    return 1;
  }
  std::printf("all CLI checks passed\n");
  return 0;
}
