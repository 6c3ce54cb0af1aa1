#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "topotext/corpus_io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "topotext_cli_test";

int run(const std::string& args, const std::string& stdout_file = "/dev/null") {
  const std::string cmd =
      std::string(TOPOTEXT_CLI_PATH) + " " + args + " > " + stdout_file + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string p(const std::string& name) { return (kWork / name).string(); }

struct Workspace {
  Workspace() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
  ~Workspace() { fs::remove_all(kWork); }
};

}  // namespace

TEST_CASE("command line") {
  Workspace ws;
  REQUIRE(run("gen --kind mean_shift --labels 3 --train-per-class 20 --val-per-class 5 "
              "--test-per-class 5 --dim 64 --out " + p("data")) == 0);
  REQUIRE(fs::exists(p("data/train.emb1")));

  SUBCASE("help and usage errors") {
    CHECK(run("--help") == 0);
    CHECK(run("extract --bogus") == 64);
    CHECK(run("") == 64);
  }
  SUBCASE("extract") {
    topotext::MeanShiftParams params;
    params.per_class = {3, 3};
    topotext::write_emb1(p("e.emb1"), topotext::generate_mean_shift(params));
    CHECK(run("extract --in " + p("e.emb1") + " --out " + p("f.emb1") + " --rows 24 --cols 32") ==
          0);
    const auto f = topotext::read_emb1(p("f.emb1"));
    CHECK(f.manifest.dim == 69);
    CHECK(f.records.size() == 6);
    CHECK(run("extract --in " + p("e.emb1") + " --out " + p("g.emb1") + " --rows 32 --cols 24") ==
          3);
    CHECK(run("extract --in " + p("e.emb1") + " --out " + p("g.emb1") +
              " --rows 32 --cols 24 --allow-unstable") == 0);
  }
  SUBCASE("file errors") {
    std::ofstream(p("empty.emb1")).close();
    CHECK(run("extract --in " + p("empty.emb1") + " --out " + p("x.emb1")) == 2);
    CHECK(run("eval --model " + p("missing.thd") + " --data " + p("data/test.emb1")) == 2);
  }
  SUBCASE("diagram of the unit square") {
    std::ofstream(p("sq.csv")) << "0,0\n1,0\n1,1\n0,1\n";
    CHECK(run("diagram --points " + p("sq.csv") + " --max-dim 1", p("sq.out")) == 0);
    CHECK(slurp(p("sq.out")) ==
          "dim,birth,death\n0,0,1\n0,0,1\n0,0,1\n0,0,inf\n1,1,1.4142135623730951\n");
  }
  SUBCASE("train and eval are byte-for-byte repeatable") {
    for (const char* name : {"a", "b"}) {
      const std::string m = p(std::string(name) + ".thd");
      REQUIRE(run("train --train " + p("data/train.emb1") + " --variant tda --rows 8 --cols 8 "
                  "--lr 1e-3 --out " + m) == 0);
      REQUIRE(run("eval --model " + m + " --data " + p("data/test.emb1") + " --out " +
                  p(std::string(name) + ".json"), p(std::string(name) + ".md")) == 0);
    }
    CHECK(slurp(p("a.thd")) == slurp(p("b.thd")));
    CHECK(slurp(p("a.thd.json")) == slurp(p("b.thd.json")));
    CHECK(slurp(p("a.json")) == slurp(p("b.json")));
    CHECK(slurp(p("a.md")) == slurp(p("b.md")));
    CHECK(run("pca --data " + p("data/test.emb1") + " --model " + p("a.thd") + " --out " +
              p("pca.csv")) == 0);
    CHECK(slurp(p("pca.csv")).rfind("label,pc1,pc2\n", 0) == 0);
  }
}
