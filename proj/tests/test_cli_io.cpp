#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "doctest.h"
#include "plasticnn/checkpoint.hpp"
#include "plasticnn/cli.hpp"
#include "plasticnn/config.hpp"
#include "plasticnn/dataset_io.hpp"
#include "plasticnn/harness.hpp"

using namespace plasticnn;

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

// Runs cli_dispatch with stdout captured.
int run_cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::vector<const char*> argv = {"plasticnn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream captured;
  auto* old = std::cout.rdbuf(captured.rdbuf());
  const int code =
      cli_dispatch(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old);
  if (out != nullptr) *out = captured.str();
  return code;
}

std::string minimal_config =
    "widths=2,4,1\n"
    "activations=tanh,sigmoid\n"
    "loss=mean_squared_error\n"
    "learning_rate=0.5\n"
    "epochs_per_round=10\n"
    "max_rounds=4\n"
    "delta=0.001\n"
    "task.0.kind=gaussian_blobs\n"
    "task.0.samples=120\n"
    "task.0.noise=0.4\n"
    "task.0.classes=2\n";

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

TEST_CASE("parse_config reads values and applies defaults") {
  auto config = parse_config_text(minimal_config + "seeds=3\n", "test.cfg");
  CHECK(config.policy.delta == 0.001);
  CHECK(config.widths == std::vector<int>{2, 4, 1});
  CHECK(config.activations[1] == Activation::Sigmoid);
  CHECK(config.seeds == std::vector<std::uint64_t>{3});
  CHECK(config.policy.patience == 2);           // default
  CHECK(config.policy.max_total_neurons == 20);  // 4x initial
  CHECK(config.tasks.size() == 1);
  CHECK(config.tasks[0].kind == TaskKind::GaussianBlobs);
}

TEST_CASE("parse_config rejects bad input with key and line names") {
  SUBCASE("range error names the key") {
    try {
      parse_config_text(minimal_config + "dropout_p=1.5\n", "test.cfg");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("dropout_p") != std::string::npos);
    }
  }
  SUBCASE("unknown keys are rejected (strict mode)") {
    try {
      parse_config_text(minimal_config + "learning_rat=0.5\n", "test.cfg");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      const std::string what = e.what();
      CHECK(what.find("unknown key") != std::string::npos);
      CHECK(what.find("learning_rat") != std::string::npos);
    }
  }
  SUBCASE("missing required key is named") {
    try {
      parse_config_text("activations=relu\n", "test.cfg");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("widths") != std::string::npos);
    }
  }
  SUBCASE("duplicate keys are rejected") {
    CHECK_THROWS_AS(
        parse_config_text(minimal_config + "delta=0.1\n", "test.cfg"),
        ConfigError);
  }
  SUBCASE("referenced files must exist") {
    CHECK_THROWS_AS(
        parse_config_text(minimal_config +
                              "train_csv=/nonexistent/a.csv\n"
                              "val_csv=/nonexistent/b.csv\n",
                          "test.cfg"),
        ConfigError);
  }
  SUBCASE("cross_entropy needs a softmax output") {
    CHECK_THROWS_AS(
        parse_config_text("widths=2,3,1\nactivations=tanh,sigmoid\n"
                          "loss=cross_entropy\n",
                          "test.cfg"),
        ConfigError);
  }
}

TEST_CASE("the sample configs round-trip through parse and serialize") {
  for (const char* name : {"/docs/bench.cfg", "/docs/xor.cfg"}) {
    const std::string path = std::string(PLASTICNN_SOURCE_DIR) + name;
    auto first = parse_config(path);
    auto second = parse_config_text(serialize_config(first), "serialized");
    CHECK(first == second);
  }
}

TEST_CASE("load_dataset_csv basics") {
  const auto dir = fresh_dir("plasticnn_csv_test");
  SUBCASE("3-row file with 2 features") {
    write_file(dir / "ok.csv",
               "f0,f1,label\n0.5,1.5,0\n-0.25,0.75,1\n2.0,-1.0,0\n");
    auto data = load_dataset_csv(dir / "ok.csv");
    CHECK(data.feature_width() == 2);
    CHECK(data.size() == 3);
    CHECK(data.classification);
    CHECK(data.labels[1] == 1);
    CHECK(data.features(0, 1) == -0.25);
  }
  SUBCASE("header-only file is an empty-dataset error") {
    write_file(dir / "empty.csv", "f0,f1,label\n");
    CHECK_THROWS_AS(load_dataset_csv(dir / "empty.csv"), ParseError);
  }
  SUBCASE("ragged row reports the row number") {
    write_file(dir / "ragged.csv", "f0,f1,label\n1,2,0\n1,2\n");
    try {
      load_dataset_csv(dir / "ragged.csv");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
  }
  SUBCASE("non-numeric and NaN cells are rejected") {
    write_file(dir / "bad.csv", "f0,label\nx,0\n");
    CHECK_THROWS_AS(load_dataset_csv(dir / "bad.csv"), ParseError);
    write_file(dir / "nan.csv", "f0,label\nnan,0\n");
    CHECK_THROWS_AS(load_dataset_csv(dir / "nan.csv"), ParseError);
  }
  SUBCASE("real-valued labels load as regression targets") {
    write_file(dir / "reg.csv", "f0,label\n1.0,0.5\n2.0,-0.25\n");
    auto data = load_dataset_csv(dir / "reg.csv");
    CHECK(!data.classification);
    CHECK(data.targets(0, 1) == -0.25);
  }
  fs::remove_all(dir);
}

TEST_CASE("a generated task written and reloaded is unchanged") {
  auto stream = make_task_stream(
      {{TaskKind::GaussianBlobs, 50, 0.3, 2, 0, 0.0, 0.0}}, 9);
  const auto dir = fresh_dir("plasticnn_csv_roundtrip");
  write_dataset_csv(stream.tasks[0].train, dir / "train.csv");
  auto loaded = load_dataset_csv(dir / "train.csv");
  REQUIRE(loaded.size() == stream.tasks[0].train.size());
  CHECK((loaded.features - stream.tasks[0].train.features)
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK(loaded.labels == stream.tasks[0].train.labels);
  fs::remove_all(dir);
}

TEST_CASE("cli: unknown subcommand exits 1 with usage text") {
  std::vector<const char*> argv = {"plasticnn", "frobnicate"};
  std::ostringstream err;
  auto* old = std::cerr.rdbuf(err.rdbuf());
  const int code = cli_dispatch(2, argv.data());
  std::cerr.rdbuf(old);
  CHECK(code == 1);
  CHECK(err.str().find("Usage") != std::string::npos);
}

TEST_CASE("cli: bench writes log.jsonl, matrix.csv, metrics.csv") {
  const auto dir = fresh_dir("plasticnn_cli_bench");
  write_file(dir / "bench.cfg",
             minimal_config + "arms=static,dropin\nseeds=1,2\n");
  std::string out;
  const int code = run_cli({"bench", "--config", (dir / "bench.cfg").string(),
                            "--out", (dir / "results").string()},
                           &out);
  CHECK(code == 0);
  CHECK(fs::exists(dir / "results" / "log.jsonl"));
  CHECK(fs::exists(dir / "results" / "matrix.csv"));
  CHECK(fs::exists(dir / "results" / "metrics.csv"));
  CHECK(fs::exists(dir / "results" / "mutations.jsonl"));
  CHECK(out.find("rank") != std::string::npos);

  SUBCASE("a second run is byte-identical") {
    const int again = run_cli({"bench", "--config",
                               (dir / "bench.cfg").string(), "--out",
                               (dir / "results2").string()});
    CHECK(again == 0);
    CHECK(read_file(dir / "results" / "log.jsonl") ==
          read_file(dir / "results2" / "log.jsonl"));
    CHECK(read_file(dir / "results" / "matrix.csv") ==
          read_file(dir / "results2" / "matrix.csv"));
  }
  fs::remove_all(dir);
}

TEST_CASE("cli: eval reproduces dropin's recorded validation accuracy") {
  const auto dir = fresh_dir("plasticnn_cli_eval");
  write_file(dir / "run.cfg", minimal_config);
  std::string out;
  const int code = run_cli({"dropin", "--config", (dir / "run.cfg").string(),
                            "--out", (dir / "out").string()},
                           &out);
  REQUIRE(code == 0);

  // The recorded final validation criterion.
  const auto pos = out.find("final_val_criterion=");
  REQUIRE(pos != std::string::npos);
  const double recorded = std::stod(out.substr(pos + 20));

  std::string eval_out;
  const int eval_code =
      run_cli({"eval", "--checkpoint", (dir / "out" / "checkpoint.json").string(),
               "--data", (dir / "out" / "val.csv").string()},
              &eval_out);
  REQUIRE(eval_code == 0);
  const auto apos = eval_out.find("accuracy=");
  REQUIRE(apos != std::string::npos);
  const double evaluated = std::stod(eval_out.substr(apos + 9));
  CHECK(std::abs(evaluated - recorded) <= 1e-12);
  fs::remove_all(dir);
}

TEST_CASE("cli: plasticity and prune write re-ingestible artifacts") {
  const auto dir = fresh_dir("plasticnn_cli_artifacts");
  write_file(dir / "run.cfg", minimal_config);
  for (const std::string cmd : {"plasticity", "prune"}) {
    const auto out_dir = dir / cmd;
    const int code =
        run_cli({cmd, "--config", (dir / "run.cfg").string(), "--out",
                 out_dir.string(), "--dump-relevance",
                 (out_dir / "relevance.csv").string()});
    REQUIRE(code == 0);
    // Every artifact reloads through the library.
    auto [net, log] = load_checkpoint(out_dir / "checkpoint.json");
    validate(net);
    auto records = read_jsonl(out_dir / "log.jsonl");
    CHECK(!records.empty());
    auto reloaded_log = load_mutation_log_jsonl(out_dir / "mutations.jsonl");
    CHECK(reloaded_log.events() == log.events());
    CHECK(fs::exists(out_dir / "relevance.csv"));
    auto train = load_dataset_csv(out_dir / "train.csv");
    CHECK(train.size() > 0);
  }
  fs::remove_all(dir);
}

TEST_CASE("cli: config errors exit 1, numeric failures exit 2") {
  const auto dir = fresh_dir("plasticnn_cli_exits");
  SUBCASE("bad config") {
    write_file(dir / "bad.cfg", "widths=2\n");
    std::ostringstream err;
    auto* old = std::cerr.rdbuf(err.rdbuf());
    const int code =
        run_cli({"train", "--config", (dir / "bad.cfg").string()});
    std::cerr.rdbuf(old);
    CHECK(code == 1);
  }
  SUBCASE("diverging run") {
    write_file(dir / "diverge.cfg",
               "widths=2,4,1\n"
               "activations=identity,identity\n"
               "loss=mean_squared_error\n"
               "learning_rate=1000000000000\n"
               "epochs_per_round=5\nmax_rounds=2\n"
               "task.0.kind=gaussian_blobs\ntask.0.samples=50\n"
               "task.0.noise=0.4\ntask.0.classes=2\n");
    std::ostringstream err;
    auto* old = std::cerr.rdbuf(err.rdbuf());
    const int code = run_cli({"train", "--config",
                              (dir / "diverge.cfg").string(), "--out",
                              (dir / "out").string()});
    std::cerr.rdbuf(old);
    CHECK(code == 2);
  }
  fs::remove_all(dir);
}
