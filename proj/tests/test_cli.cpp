#include <doctest.h>

#include "rca/field_model.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

fs::path work_dir()
{
  static fs::path const dir = [] {
    auto d = fs::temp_directory_path() / "rca_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(std::string const &args)
{
  std::string const cmd = std::string(RCA_CLI) + " " + args + " > " + (work_dir() / "last.log").string() + " 2>&1";
  int const status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(fs::path const &p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Data lines of a CSV: skips '#' comment lines and the column header.
std::vector<std::string> csv_rows(fs::path const &p, std::string *header = nullptr)
{
  std::ifstream in(p);
  std::string line;
  std::vector<std::string> rows;
  bool seen_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') { continue; }
    if (!seen_header) {
      seen_header = true;
      if (header) { *header = line; }
      continue;
    }
    rows.push_back(line);
  }
  return rows;
}

std::string const kTiny = "--p 12 --rows 8 --cols 8 --sigma0 1.5";

} // namespace

TEST_CASE("simulate writes loadable, reproducible files")
{
  auto const a = work_dir() / "sim_a";
  auto const b = work_dir() / "sim_b";
  CHECK(run("simulate " + kTiny + " --snr 40 --md 2 --seed 7 --out " + a.string()) == 0);
  CHECK(run("simulate " + kTiny + " --snr 40 --md 2 --seed 7 --out " + b.string()) == 0);
  auto const truth = rca::load_dataset(a / "truth.rca");
  auto const obs = rca::load_dataset(a / "observed.rca");
  CHECK(truth.count() == 12);
  CHECK(obs.count() == 12);
  CHECK(obs.patch_shape == rca::Shape{4, 4});
  CHECK(obs.noise_sigma > 0.0);
  CHECK(slurp(a / "truth.rca") == slurp(b / "truth.rca"));
  CHECK(slurp(a / "observed.rca") == slurp(b / "observed.rca"));
  CHECK(slurp(a / "simulate.json").find("--seed 7") != std::string::npos);
}

TEST_CASE("usage errors")
{
  CHECK(run("simulate --p 5") == 2);
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  auto const dir = work_dir() / "usage";
  REQUIRE(run("simulate " + kTiny + " --md 2 --seed 1 --out " + dir.string()) == 0);
  CHECK(run("restore --input " + (dir / "observed.rca").string() + " --out " + dir.string() + " --method magic") == 2);
  CHECK(run("restore --input " + (dir / "observed.rca").string() + " --out " + dir.string() +
            " --method pca --md 2") == 2);
}

TEST_CASE("restore, evaluate and data errors")
{
  auto const dir = work_dir() / "pipeline";
  REQUIRE(run("simulate " + kTiny + " --md 1 --seed 3 --out " + dir.string()) == 0);
  CHECK(run("restore --input " + (dir / "observed.rca").string() + " --out " + (dir / "rca").string() +
            " --rank 2 --k-max 1 --s-iters 100 --alpha-iters 50") == 0);
  CHECK(fs::exists(dir / "rca" / "estimate.rca"));
  CHECK(fs::exists(dir / "rca" / "model.json"));
  std::string header;
  CHECK(!csv_rows(dir / "rca" / "trace.csv", &header).empty());
  CHECK(header.rfind("outer_k,inner_j,cost_H", 0) == 0);
  auto const est = rca::load_dataset(dir / "rca" / "estimate.rca");
  CHECK(est.patch_shape == rca::Shape{8, 8});
  CHECK((est.Y.array() >= 0.0).all());

  CHECK(run("evaluate --truth " + (dir / "truth.rca").string() + " --estimate " + (dir / "truth.rca").string() +
            " --out " + (dir / "self.csv").string()) == 0);
  auto const rows = csv_rows(dir / "self.csv");
  CHECK(rows.size() == 13u);
  CHECK(rows.back() == "all,,,,,,,,,,0,0,0,0,0,0");

  CHECK(run("evaluate --truth " + (dir / "truth.rca").string() + " --estimate " +
            (dir / "rca" / "estimate.rca").string() + " --out " + (dir / "rca.csv").string()) == 0);
  CHECK(csv_rows(dir / "rca.csv").size() == 13u);

  auto const other = work_dir() / "other";
  REQUIRE(run("simulate --p 10 --rows 8 --cols 8 --sigma0 1.5 --seed 3 --out " + other.string()) == 0);
  CHECK(run("evaluate --truth " + (dir / "truth.rca").string() + " --estimate " + (other / "truth.rca").string() +
            " --out " + (dir / "bad.csv").string()) == 3);

  std::ofstream(dir / "junk.rca") << "not a dataset\n";
  CHECK(run("restore --input " + (dir / "junk.rca").string() + " --out " + dir.string()) == 3);

  CHECK(run("restore --input " + (dir / "observed.rca").string() + " --out " + (dir / "poly").string() +
            " --method poly") == 0);
  CHECK(run("restore --input " + (dir / "observed.rca").string() + " --out " + (dir / "pca").string() +
            " --method pca --rank 3") == 0);
}

TEST_CASE("config file values apply unless overridden on the command line")
{
  auto const cfg = work_dir() / "sim.ini";
  std::ofstream(cfg) << "[simulate]\np=9\nseed=5\n";
  auto const a = work_dir() / "cfg_a";
  auto const b = work_dir() / "cfg_b";
  CHECK(run("--config " + cfg.string() + " simulate --rows 8 --cols 8 --sigma0 1.5 --out " + a.string()) == 0);
  CHECK(rca::load_dataset(a / "truth.rca").count() == 9);
  CHECK(run("--config " + cfg.string() + " simulate --rows 8 --cols 8 --sigma0 1.5 --p 11 --out " + b.string()) ==
        0);
  CHECK(rca::load_dataset(b / "truth.rca").count() == 11);
}

TEST_CASE("compare emits one row per SNR and method, deterministically")
{
  auto const a = work_dir() / "cmp_a.csv";
  auto const b = work_dir() / "cmp_b.csv";
  std::string const args = "compare " + kTiny +
                           " --seed 2 --snr 20,40 --methods rca,pca --rank 2 --k-max 1 --s-iters 100 --alpha-iters 50";
  REQUIRE(run(args + " --out " + a.string()) == 0);
  REQUIRE(run(args + " --out " + b.string()) == 0);
  std::string header;
  auto const rows = csv_rows(a, &header);
  CHECK(rows.size() == 4u);
  CHECK(header == "snr,method,E_gamma,B_gamma,E_S,sigma_S,MSE,NMSE,r_effective");
  CHECK(slurp(a) != "");
  CHECK(csv_rows(a) == csv_rows(b));
  CHECK(rows[0].rfind("20,rca,", 0) == 0);
  CHECK(rows[3].rfind("40,pca,", 0) == 0);
  CHECK(run("compare " + kTiny + " --methods pca --md 2 --out " + a.string()) == 2);
}
