#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "scratch.hpp"
#include "stochparam/io.hpp"

using namespace stochparam;
namespace fs = std::filesystem;

namespace {

PairDataset sample_dataset(std::size_t n, std::size_t d) {
  PairDataset data;
  data.dim = d;
  data.dt = 1e-3;
  data.meta = {"l96", 42, 10.0};
  RngStream rng(1);
  for (std::size_t k = 0; k < n * d; ++k) {
    data.x.push_back(rng.normal() * 10.0);
    data.m.push_back(rng.normal() * 1e-3);
  }
  data.x[0] = std::numeric_limits<double>::denorm_min();
  data.m[1] = -0.0;
  return data;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

std::string error_of(auto&& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("hashes and numbers") {
  CHECK(git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 1e-5}) CHECK(parse_double(format_double(v)) == v);
  CHECK(format_double(0.5) == "0.5");
  CHECK(std::isnan(parse_double("nan")));
  CHECK(parse_double("-inf") == -INFINITY);
  CHECK_THROWS_AS(parse_double("1.5x"), FormatError);
}

TEST_CASE("dataset round trip and corruption") {
  auto dir = scratch_dir("io");
  auto data = sample_dataset(300, 8);
  const auto path = dir / "d.bin";
  save_dataset(path, data);
  auto back = load_dataset(path);
  CHECK(back.dim == 8);
  CHECK(back.dt == data.dt);
  CHECK(back.meta.system == "l96");
  CHECK(back.meta.seed == 42);
  CHECK(back.meta.spinup == 10.0);
  CHECK(std::memcmp(back.x.data(), data.x.data(), data.x.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(back.m.data(), data.m.data(), data.m.size() * sizeof(double)) == 0);
  CHECK(file_hash(path) == git_blob_hash(slurp(path)));

  const std::string bytes = slurp(path);
  spit(dir / "cut.bin", bytes.substr(0, bytes.size() - 100));
  auto cut = error_of([&] { load_dataset(dir / "cut.bin"); });
  CHECK(cut.find("truncated") != std::string::npos);
  CHECK(cut.find("38400") != std::string::npos);
  CHECK(cut.find("38300") != std::string::npos);

  spit(dir / "long.bin", bytes + std::string(16, '\0'));
  auto longer = error_of([&] { load_dataset(dir / "long.bin"); });
  CHECK(longer.find("length mismatch") != std::string::npos);
  CHECK(longer.find("38400") != std::string::npos);
  CHECK(longer.find("38416") != std::string::npos);

  spit(dir / "head.bin", bytes.substr(0, 40));
  CHECK(error_of([&] { load_dataset(dir / "head.bin"); }).find("truncated header") != std::string::npos);

  std::string lying = bytes;
  lying.replace(lying.find("length 300"), 10, "length 299");
  spit(dir / "lying.bin", lying);
  auto lie = error_of([&] { load_dataset(dir / "lying.bin"); });
  CHECK(lie.find("length mismatch") != std::string::npos);
  CHECK(lie.find("4784") != std::string::npos);
  CHECK(lie.find("4800") != std::string::npos);

  std::string flipped = bytes;
  flipped[flipped.size() - 3] ^= 0x10;
  spit(dir / "flip.bin", flipped);
  CHECK(error_of([&] { load_dataset(dir / "flip.bin"); }).find("checksum") != std::string::npos);

  std::string future = bytes;
  future.replace(future.find("version 1"), 9, "version 7");
  spit(dir / "v7.bin", future);
  CHECK(error_of([&] { load_dataset(dir / "v7.bin"); }).find("unsupported format version") != std::string::npos);

  CHECK_THROWS_AS(load_trajectory(path), FormatError);
  fs::remove_all(dir);
}

TEST_CASE("trajectory round trip") {
  auto dir = scratch_dir("traj");
  Trajectory t(3, 0.01, 2.0);
  for (int k = 0; k < 50; ++k) t.push_back(std::vector<double>{k * 0.1, -k * 1e-7, std::sqrt(k)});
  save_trajectory(dir / "t.bin", t);
  auto b = load_trajectory(dir / "t.bin");
  CHECK(b.dim() == 3);
  CHECK(b.dt() == 0.01);
  CHECK(b.t0() == 2.0);
  CHECK(b.data() == t.data());
  fs::remove_all(dir);
}

TEST_CASE("checkpoints") {
  auto dir = scratch_dir("ckpt");
  MdnArchitecture a;
  a.input_dim = 3;
  a.target_dim = 3;
  a.hidden = {5, 4};
  a.components = 2;
  a.mode = Locality::WeaklyLocal;
  RngStream rng(2);
  MdnModel m(a, rng);
  m.input_standardiser = {{1, 2, 3}, {0.5, 0.25, 2}};
  m.target_standardiser = {{-1, 0, 1}, {1e-3, 2e-3, 3e-3}};
  m.history.initial_validation = 1.25;
  m.history.best_validation = -0.5;
  m.history.best_epoch = 3;
  m.training_seed = 77;
  save_checkpoint(dir / "m.ckpt", m);
  CHECK(checkpoint_kind(dir / "m.ckpt") == "mdn");
  auto back = load_mdn(dir / "m.ckpt");
  CHECK(back.arch().mode == Locality::WeaklyLocal);
  CHECK(back.arch().hidden == a.hidden);
  CHECK(back.arch().components == 2);
  CHECK(std::equal(back.net().params().begin(), back.net().params().end(), m.net().params().begin()));
  CHECK(back.target_standardiser.scale == m.target_standardiser.scale);
  CHECK(back.training_seed == 77);
  CHECK(back.history.best_validation == -0.5);
  std::vector<double> x{0.1, 0.2, 0.3};
  CHECK(back.forward(x).means == m.forward(x).means);
  CHECK_THROWS_AS(load_deterministic(dir / "m.ckpt"), FormatError);

  DeterministicModel det(2, 2, {4}, rng);
  det.input_standardiser = {{1, 1}, {2, 2}};
  save_checkpoint(dir / "d.ckpt", det);
  CHECK(checkpoint_kind(dir / "d.ckpt") == "deterministic");
  auto d2 = load_deterministic(dir / "d.ckpt");
  CHECK(d2.predict(std::vector<double>{0.3, 0.4}) == det.predict(std::vector<double>{0.3, 0.4}));

  PolyAr1Model poly{{0.1, -0.2, 0.03, 1e-4}, 0.95, 1e-3, 2e-2};
  save_checkpoint(dir / "p.ckpt", poly);
  CHECK(checkpoint_kind(dir / "p.ckpt") == "poly-ar1");
  auto p2 = load_poly_ar1(dir / "p.ckpt");
  CHECK(p2.coefficients == poly.coefficients);
  CHECK(p2.phi == poly.phi);
  CHECK(p2.innovation_var == poly.innovation_var);
  CHECK(p2.residual_var == poly.residual_var);

  const std::string text = slurp(dir / "m.ckpt");
  CHECK(text.find("version 1\n") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("reports") {
  auto dir = scratch_dir("report");
  ScoreReport r;
  r.kl = 1.0 / 3.0;
  r.hellinger = 0.1;
  r.d_r = 2e-17;
  r.energy = {{0.0, 0.1}, {0.0, 0.7}, {0.0, 0.01}};
  r.metadata = {{"kind", "ar1"}, {"tp", "1"}};
  save_report(dir / "r.json", r, {{"seed", 3}});
  auto b = load_report(dir / "r.json");
  CHECK(b.kl == r.kl);
  CHECK(b.d_r == r.d_r);
  CHECK(b.energy.mean == r.energy.mean);
  CHECK(b.energy.std_error == r.energy.std_error);
  CHECK(b.metadata == r.metadata);
  auto f = read_json_file(dir / "r.json");
  CHECK(f.kind == "score");
  CHECK(f.provenance.at("seed") == 3);

  SweepTable t;
  t.rows = {{1, r, 0.7}, {10, r, 0.5}};
  t.rows[1].report.kl = 0.25;
  t.argmin_kl = 1;
  t.argmin_energy = 1;
  auto st = sweep_from_json(sweep_to_json(t));
  CHECK(st.rows.size() == 2);
  CHECK(st.rows[1].tp == 10);
  CHECK(st.rows[1].report.kl == 0.25);
  CHECK(st.rows[0].energy_at_horizon == 0.7);
  CHECK(st.argmin_kl == 1);
  CHECK(st.argmin_energy == 1);

  spit(dir / "bad.json", R"({"format": "stochparam-report", "version": 2, "kind": "score", "body": {}})");
  CHECK_THROWS_AS(read_json_file(dir / "bad.json"), FormatError);
  spit(dir / "junk.json", "{");
  CHECK_THROWS_AS(read_json_file(dir / "junk.json"), FormatError);
  fs::remove_all(dir);
}

TEST_CASE("ensemble envelope") {
  EnsembleForecast f;
  f.dim = 1;
  f.n_states = 2;
  f.truth = {1.0, 1.5};
  f.members = {{0.0, 4.0}, {2.0, 4.0}};
  f.finite = {true, true};
  auto t = ensemble_envelope(f, 0, 0.1);
  CHECK(t.columns == std::vector<std::string>{"time", "truth", "mean", "lower", "upper"});
  CHECK(t.rows[0][2] == 1.0);
  CHECK(t.rows[0][3] == doctest::Approx(1.0 - 3.0 * std::sqrt(2.0)).epsilon(1e-15));
  CHECK(t.rows[0][4] == doctest::Approx(1.0 + 3.0 * std::sqrt(2.0)).epsilon(1e-15));
  CHECK(t.rows[1][0] == doctest::Approx(0.1));
  CHECK(t.rows[1][2] == 4.0);
  CHECK(t.rows[1][3] == 4.0);
  CHECK(t.rows[1][4] == 4.0);

  f.members.push_back({NAN, NAN});
  f.finite.push_back(false);
  auto g = ensemble_envelope(f, 0, 0.1);
  CHECK(g.rows[0][3] == t.rows[0][3]);
}

TEST_CASE("csv round trip") {
  auto dir = scratch_dir("csv");
  CsvTable t{{"a", "b"}, {{0.1, 1.0 / 3.0}, {-1e-300, 6.02214076e23}, {NAN, 2.0}}};
  write_csv(dir / "t.csv", t);
  const auto text = slurp(dir / "t.csv");
  CHECK(text.find('\r') == std::string::npos);
  CHECK(text.substr(0, 4) == "a,b\n");
  auto b = read_csv(dir / "t.csv");
  CHECK(b.columns == t.columns);
  CHECK(b.rows[0] == t.rows[0]);
  CHECK(b.rows[1] == t.rows[1]);
  CHECK(std::isnan(b.rows[2][0]));

  ScoreCurve c{{0.0, 0.5}, {0.0, 0.3}, {0.0, 0.01}};
  auto ct = curve_table(c);
  CHECK(ct.columns == std::vector<std::string>{"lead_time", "score", "std_error"});
  CHECK(ct.rows[1] == std::vector<double>{0.5, 0.3, 0.01});

  spit(dir / "ragged.csv", "a,b\n1,2\n3\n");
  CHECK_THROWS_AS(read_csv(dir / "ragged.csv"), FormatError);
  fs::remove_all(dir);
}

}
