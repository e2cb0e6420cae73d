#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "icftab_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path(const std::string& name) { return (work_dir() / name).string(); }

int run(const std::string& args) {
  const std::string cmd = std::string(ICF_TAB_EXE) + " --log-level off " + args + " > " + path("stdout.txt") + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json read_json(const std::string& name) {
  std::ifstream in(path(name));
  return nlohmann::json::parse(in);
}

std::size_t count_lines(const std::string& name) {
  std::ifstream in(path(name));
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

}  // namespace

TEST_CASE("gen, detect and encode") {
  REQUIRE(run("--seed 3 gen --kind planted-icf --n 2000 --k 10 --noise-cols 2 --flip 0.1 --out " + path("p.csv")) == 0);
  CHECK(fs::exists(path("p.csv.schema.json")));
  CHECK(run("detect --data " + path("p.csv") + " --schema " + path("p.csv.schema.json") + " --out " +
            path("report.json")) == 0);
  const auto rep = read_json("report.json");
  CHECK(rep.at("categorical_set") == nlohmann::json::array({0}));

  CHECK(run("encode --data " + path("p.csv") + " --schema " + path("p.csv.schema.json") + " --report " +
            path("report.json") + " --out " + path("p.icft")) == 0);
  std::ifstream t(path("p.icft"), std::ios::binary);
  char magic[4];
  t.read(magic, 4);
  CHECK(std::string(magic, 4) == "ICFT");

  REQUIRE(run("gen --kind planted-regression --n 1000 --k 10 --spacing 3 --mode permuted --out " + path("r.csv")) == 0);
  CHECK(run("detect --data " + path("r.csv") + " --schema " + path("r.csv.schema.json") + " --test anova --out " +
            path("r_report.json")) == 0);
  CHECK(read_json("r_report.json").at("categorical_set") == nlohmann::json::array({0}));
}

TEST_CASE("train, search and report") {
  REQUIRE(run("gen --kind planted-icf --n 600 --k 6 --out " + path("s.csv")) == 0);
  const std::string data = " --data " + path("s.csv") + " --schema " + path("s.csv.schema.json");
  CHECK(run("--seed 5 train" + data + " --model mlp-fc --arm cfd --max-epochs 5 --patience 3 --out " +
            path("one.json") + " --snapshot " + path("one.icfs")) == 0);
  const auto one = read_json("one.json");
  CHECK(one.at("status") == "completed");
  CHECK(one.at("arm") == "CFD");
  CHECK(fs::exists(path("one.icfs")));

  CHECK(run("--seed 1 search" + data + " --model mlp --runs 2 --max-epochs 3 --out " + path("rec.jsonl")) == 0);
  CHECK(run("--seed 1 --workers 2 search" + data + " --model mlp-fc --runs 3 --max-epochs 3 --out " +
            path("rec.jsonl")) == 0);
  CHECK(count_lines("rec.jsonl") == 5);

  CHECK(run("report --records " + path("rec.jsonl") + " --task classification --out-dir " + path("rep") +
            " --sims 3 --svg") == 0);
  CHECK(fs::exists(path("rep/budget.csv")));
  CHECK(fs::exists(path("rep/summary.json")));
}

TEST_CASE("exit codes") {
  REQUIRE(run("gen --kind planted-icf --n 600 --k 6 --out " + path("e.csv")) == 0);
  const std::string data = " --data " + path("e.csv") + " --schema " + path("e.csv.schema.json");
  CHECK(run("--no-such-flag") == 2);
  CHECK(run("gen --kind nope --out " + path("x.csv")) == 2);
  CHECK(run("detect" + data + " --test anova") == 2);
  CHECK(run("detect" + data + " --chi-thresh 0.5") == 2);
  CHECK(run("detect" + data + " --split 0.5,0.5,0.5") == 2);
  CHECK(run("detect --data " + path("missing.csv") + " --schema " + path("e.csv.schema.json")) == 3);

  std::ofstream(path("bad.csv")) << "code,noise1,y\n1,2,0\n1,,1\n";
  std::ofstream(path("bad.json")) << R"({"target":"y","task":"classification"})";
  CHECK(run("detect --data " + path("bad.csv") + " --schema " + path("bad.json")) == 3);
  std::ofstream(path("badrec.jsonl")) << "{not json\n";
  CHECK(run("report --records " + path("badrec.jsonl") + " --task classification --out-dir " + path("r2")) == 3);
}
