#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "scratch.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Run cli(const std::string& args, const fs::path& dir, const std::string& env = "") {
  const auto o = dir / "stdout.txt", e = dir / "stderr.txt";
  const std::string cmd = env + " '" STOCHPARAM_CLI "' " + args + " >'" + o.string() + "' 2>'" + e.string() + "'";
  Run r;
  const int status = std::system(cmd.c_str());
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(o);
  r.err = slurp(e);
  return r;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

int lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

const char* kL63 = R"({
  "system": {"name": "l63"},
  "simulation": {"n_steps": 2000, "save_stride": 10}
})";

const char* kL96 = R"({
  "seed": 4,
  "data": {"length": 3.0, "spinup": 0.5, "n_slices": 4, "slice_len": 600},
  "training": {"hidden": [8], "components": 2, "max_epochs": 2, "batch_size": 256},
  "simulation": {"n_steps": 500},
  "tp_grid": [1, 5],
  "evaluation": {"climate_steps": 20000, "max_lag": 1.0, "kde_stride": 0.01, "spinup": 1.0, "n_ens": 4, "max_lead": 0.5}
})";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("lyapunov") {
  auto dir = scratch_dir("cli-lyap");
  auto r = cli("lyapunov --system l63 -o '" + dir.string() + "'", dir);
  REQUIRE(r.code == 0);
  auto pos = r.out.find("lyapunov_time ");
  REQUIRE(pos != std::string::npos);
  const double t = std::stod(r.out.substr(pos + 14));
  CHECK(std::abs(t - 1.0 / 0.9056) / (1.0 / 0.9056) < 0.05);
  fs::remove_all(dir);
}

TEST_CASE("simulate: none and zero-variance forcing agree") {
  auto dir = scratch_dir("cli-sim");
  write(dir / "c.json", kL63);
  auto a = cli("simulate -c '" + (dir / "c.json").string() + "' -o '" + (dir / "a").string() + "'", dir);
  REQUIRE(a.code == 0);
  auto b = cli("simulate -c '" + (dir / "c.json").string() + "' -o '" + (dir / "b").string() +
                   "' --tp 4 --seed 3",
               dir);
  REQUIRE(b.code == 0);
  write(dir / "z.json", R"({"system": {"name": "l63"}, "simulation": {"n_steps": 2000, "save_stride": 10},
    "parameterisation": {"kind": "ar1", "ar1": {"phi": 0.5, "innovation_var": 0.0}}})");
  auto z = cli("simulate -c '" + (dir / "z.json").string() + "' -o '" + (dir / "z").string() + "'", dir);
  REQUIRE(z.code == 0);
  const auto ta = slurp(dir / "a" / "trajectory.bin");
  CHECK(ta.size() > 201 * 24);
  CHECK(ta == slurp(dir / "z" / "trajectory.bin"));
  CHECK(ta == slurp(dir / "b" / "trajectory.bin"));
  CHECK(a.out.find("trajectory.bin") != std::string::npos);
  CHECK(fs::exists(dir / "a" / "simulate.config.json"));
  CHECK(fs::exists(dir / "a" / "simulate.log"));

  // idempotent apart from the log
  auto again = cli("simulate -c '" + (dir / "c.json").string() + "' -o '" + (dir / "a").string() + "'", dir);
  REQUIRE(again.code == 0);
  CHECK(slurp(dir / "a" / "trajectory.bin") == ta);
  fs::remove_all(dir);
}

TEST_CASE("errors are one machine-readable line") {
  auto dir = scratch_dir("cli-err");
  write(dir / "bad.json", R"({"system": {"name": "l63"}, "simulaton": {}})");
  auto r = cli("simulate -c '" + (dir / "bad.json").string() + "' -o '" + dir.string() + "'", dir);
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error: config: ", 0) == 0);
  CHECK(r.err.find("simulaton") != std::string::npos);
  CHECK(lines(r.err) == 1);

  auto m = cli("simulate -c '" + (dir / "nope.json").string() + "'", dir);
  CHECK(m.code == 1);
  CHECK(m.err.rfind("error: ", 0) == 0);

  auto u = cli("fit --mode sideways", dir);
  CHECK(u.code == 1);
  CHECK(u.err.rfind("error: usage: ", 0) == 0);
  CHECK(lines(u.err) == 1);

  auto d = cli("score-climate -o '" + (dir / "empty").string() + "'", dir);
  CHECK(d.code == 1);
  CHECK(lines(d.err) == 1);

  write(dir / "junk.bin", "stochparam-dataset\nversion 1\n");
  write(dir / "j.json", R"({"data": {"path": ")" + (dir / "junk.bin").string() + R"("}})");
  auto f = cli("fit --mode poly -c '" + (dir / "j.json").string() + "' -o '" + dir.string() + "'", dir);
  CHECK(f.code == 1);
  CHECK(f.err.rfind("error: format: ", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("dry run computes nothing") {
  auto dir = scratch_dir("cli-dry");
  write(dir / "c.json", kL63);
  auto r = cli("simulate --dry-run -c '" + (dir / "c.json").string() + "' -o '" + (dir / "o").string() + "'", dir);
  CHECK(r.code == 0);
  CHECK_FALSE(fs::exists(dir / "o" / "trajectory.bin"));
  CHECK(r.out.find("\"system\"") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("pipeline on a small L96 setup") {
  auto dir = scratch_dir("cli-l96");
  write(dir / "c.json", kL96);
  const std::string c = " -c '" + (dir / "c.json").string() + "'";
  const std::string env = "STOCHPARAM_OUTPUT_DIR='" + (dir / "out").string() + "'";
  auto out = dir / "out";

  auto g = cli("gen-data" + c, dir, env);
  REQUIRE(g.code == 0);
  CHECK(fs::exists(out / "climate.bin"));
  CHECK(fs::exists(out / "weather.json"));

  auto f = cli("fit --mode poly" + c, dir, env);
  REQUIRE(f.code == 0);
  CHECK(fs::exists(out / "poly.ckpt"));
  auto n = cli("fit --mode nonlocal" + c, dir, env);
  REQUIRE(n.code == 0);
  CHECK(fs::exists(out / "nonlocal.ckpt"));

  write(dir / "p.json", std::string(kL96).substr(0, std::string(kL96).rfind('}')) +
                            R"(, "parameterisation": {"kind": "mdn", "checkpoint": "nonlocal.ckpt"}})");
  const std::string p = " -c '" + (dir / "p.json").string() + "'";
  auto s = cli("simulate --tp 5" + p, dir, env);
  REQUIRE(s.code == 0);
  CHECK(fs::exists(out / "trajectory.bin"));

  auto sc = cli("score-climate" + p, dir, env);
  REQUIRE(sc.code == 0);
  auto report = nlohmann::json::parse(slurp(out / "score-climate.json"));
  CHECK(report.at("kind") == "score");
  CHECK(report.at("body").at("kl").get<double>() >= 0.0);
  CHECK(report.at("provenance").at("seed") == 4);
  CHECK(report.at("provenance").contains("inputs"));

  auto w1 = cli("score-weather --threads 1" + p, dir, env);
  REQUIRE(w1.code == 0);
  const auto first = slurp(out / "score-weather.json");
  auto w2 = cli("score-weather --threads 3" + p, dir, env);
  REQUIRE(w2.code == 0);
  auto j1 = nlohmann::json::parse(first), j2 = nlohmann::json::parse(slurp(out / "score-weather.json"));
  CHECK(j1.at("body") == j2.at("body"));
  CHECK(j1.at("body").at("energy").at("mean").at(0) == 0.0);

  auto sw = cli("sweep-tp" + p, dir, env);
  REQUIRE(sw.code == 0);
  CHECK(fs::exists(out / "sweep.json"));
  auto ex = cli("export-plots --input '" + (out / "sweep.json").string() + "' --out-dir '" + (dir / "csv").string() + "'",
                dir, env);
  REQUIRE(ex.code == 0);
  CHECK_FALSE(fs::is_empty(dir / "csv"));
  fs::remove_all(dir);
}

}
