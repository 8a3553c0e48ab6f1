#include "stochparam/io.hpp"

#include <openssl/sha.h>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace stochparam {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha1_hex(std::span<const unsigned char> bytes) {
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(bytes.data(), bytes.size(), digest);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned char c : digest) {
    out += hex[c >> 4];
    out += hex[c & 15];
  }
  return out;
}

std::string git_blob_hash(std::string_view content) {
  std::string buf = "blob " + std::to_string(content.size());
  buf.push_back('\0');
  buf.append(content);
  return sha1_hex({reinterpret_cast<const unsigned char*>(buf.data()), buf.size()});
}

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return git_blob_hash(ss.str());
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return {buf, res.ptr};
}

double parse_double(std::string_view text) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    // from_chars rejects "inf"/"nan" spellings produced by some writers
    if (text == "nan" || text == "-nan") return std::nan("");
    if (text == "inf") return INFINITY;
    if (text == "-inf") return -INFINITY;
    throw FormatError("invalid number '" + std::string(text) + "'");
  }
  return v;
}

namespace {

// Binary container: magic line, "key value" lines, "end", blob of doubles.

struct Header {
  std::string magic;
  std::map<std::string, std::string> fields;

  const std::string& get(const std::string& key) const {
    auto it = fields.find(key);
    if (it == fields.end()) throw FormatError(magic + ": missing header field '" + key + "'");
    return it->second;
  }
  double number(const std::string& key) const { return parse_double(get(key)); }
  std::uint64_t count(const std::string& key) const {
    const auto& s = get(key);
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw FormatError(magic + ": field '" + key + "' is not a count: " + s);
    }
    return v;
  }
};

std::span<const unsigned char> as_bytes(const std::vector<double>& v) {
  return {reinterpret_cast<const unsigned char*>(v.data()), v.size() * sizeof(double)};
}

void write_container(const fs::path& path, const std::string& magic,
                     const std::vector<std::pair<std::string, std::string>>& fields, const std::vector<double>& blob) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << magic << '\n' << "version " << kFormatVersion << '\n';
  for (const auto& [k, v] : fields) out << k << ' ' << v << '\n';
  out << "values " << blob.size() << '\n';
  out << "checksum " << sha1_hex(as_bytes(blob)) << '\n';
  out << "end\n";
  out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::pair<Header, std::vector<double>> read_container(const fs::path& path, const std::string& expected_magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Header h;
  if (!std::getline(in, h.magic)) throw FormatError(path.string() + ": empty file");
  if (!expected_magic.empty() && h.magic != expected_magic) {
    throw FormatError(path.string() + ": expected " + expected_magic + ", found '" + h.magic.substr(0, 40) + "'");
  }
  std::string line;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    const auto sp = line.find(' ');
    if (sp == std::string::npos) throw FormatError(path.string() + ": malformed header line '" + line + "'");
    h.fields[line.substr(0, sp)] = line.substr(sp + 1);
  }
  if (!ended) throw FormatError(path.string() + ": truncated header");
  const auto version = h.count("version");
  if (version != static_cast<std::uint64_t>(kFormatVersion)) {
    throw FormatError(path.string() + ": unsupported format version " + std::to_string(version) + " (expected " +
                      std::to_string(kFormatVersion) + ")");
  }
  const auto declared = h.count("values");
  const auto start = in.tellg();
  in.seekg(0, std::ios::end);
  const auto blob_bytes = static_cast<std::uint64_t>(in.tellg() - start);
  in.seekg(start);
  const std::uint64_t want = declared * sizeof(double);
  if (blob_bytes < want) {
    throw FormatError(path.string() + ": truncated blob: header declares " + std::to_string(want) +
                      " bytes, file holds " + std::to_string(blob_bytes));
  }
  if (blob_bytes != want) {
    throw FormatError(path.string() + ": length mismatch: header declares " + std::to_string(want) +
                      " bytes, file holds " + std::to_string(blob_bytes));
  }
  std::vector<double> blob(declared);
  in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(want));
  if (!in) throw FormatError(path.string() + ": truncated blob");
  if (sha1_hex(as_bytes(blob)) != h.get("checksum")) throw FormatError(path.string() + ": checksum failure");
  return {std::move(h), std::move(blob)};
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s.empty() ? "-" : s;
}

std::vector<std::size_t> split_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  if (s == "-") return out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoul(tok));
  return out;
}

void check_size(const Header& h, std::size_t got, std::size_t want) {
  if (got != want) {
    throw FormatError(h.magic + ": blob holds " + std::to_string(got) + " values, layout needs " +
                      std::to_string(want));
  }
}

void append(std::vector<double>& blob, std::span<const double> v) { blob.insert(blob.end(), v.begin(), v.end()); }

void take(const std::vector<double>& blob, std::size_t& pos, std::vector<double>& out, std::size_t n) {
  out.assign(blob.begin() + static_cast<std::ptrdiff_t>(pos), blob.begin() + static_cast<std::ptrdiff_t>(pos + n));
  pos += n;
}

std::vector<std::pair<std::string, std::string>> history_fields(const TrainingHistory& h, std::uint64_t seed) {
  return {{"training_seed", std::to_string(seed)},
          {"initial_validation", format_double(h.initial_validation)},
          {"best_epoch", std::to_string(h.best_epoch)},
          {"best_validation", format_double(h.best_validation)},
          {"epochs", std::to_string(h.train_loss.size())}};
}

void read_history(const Header& h, TrainingHistory& hist, std::uint64_t& seed) {
  seed = h.count("training_seed");
  hist.initial_validation = h.number("initial_validation");
  hist.best_epoch = h.count("best_epoch");
  hist.best_validation = h.number("best_validation");
}

}  // namespace

// ---------------------------------------------------------------------------

void save_dataset(const fs::path& path, const PairDataset& data) {
  const std::size_t n = data.size(), d = data.dim;
  std::vector<double> blob;
  blob.reserve(2 * n * d);
  for (std::size_t k = 0; k < n; ++k) {
    append(blob, data.state(k));
    append(blob, data.error(k));
  }
  write_container(path, "stochparam-dataset",
                  {{"system", data.meta.system.empty() ? "-" : data.meta.system},
                   {"dim", std::to_string(d)},
                   {"dt", format_double(data.dt)},
                   {"length", std::to_string(n)},
                   {"seed", std::to_string(data.meta.seed)},
                   {"spinup", format_double(data.meta.spinup)}},
                  blob);
}

PairDataset load_dataset(const fs::path& path) {
  auto [h, blob] = read_container(path, "stochparam-dataset");
  PairDataset data;
  data.dim = h.count("dim");
  data.dt = h.number("dt");
  data.meta.system = h.get("system");
  data.meta.seed = h.count("seed");
  data.meta.spinup = h.number("spinup");
  const std::size_t n = h.count("length"), d = data.dim;
  if (blob.size() != 2 * n * d) {
    throw FormatError(path.string() + ": length mismatch: header length " + std::to_string(n) + " x " +
                      std::to_string(2 * d) + " needs " + std::to_string(2 * n * d) + " values, blob holds " +
                      std::to_string(blob.size()));
  }
  data.x.resize(n * d);
  data.m.resize(n * d);
  for (std::size_t k = 0; k < n; ++k) {
    std::copy_n(blob.begin() + static_cast<std::ptrdiff_t>(2 * k * d), d, data.x.begin() + static_cast<std::ptrdiff_t>(k * d));
    std::copy_n(blob.begin() + static_cast<std::ptrdiff_t>((2 * k + 1) * d), d,
                data.m.begin() + static_cast<std::ptrdiff_t>(k * d));
  }
  return data;
}

void save_trajectory(const fs::path& path, const Trajectory& traj) {
  write_container(path, "stochparam-trajectory",
                  {{"dim", std::to_string(traj.dim())},
                   {"dt", format_double(traj.dt())},
                   {"t0", format_double(traj.t0())},
                   {"length", std::to_string(traj.size())}},
                  traj.data());
}

Trajectory load_trajectory(const fs::path& path) {
  auto [h, blob] = read_container(path, "stochparam-trajectory");
  const std::size_t d = h.count("dim"), n = h.count("length");
  check_size(h, blob.size(), n * d);
  Trajectory traj(d, h.number("dt"), h.number("t0"));
  traj.reserve(n);
  for (std::size_t k = 0; k < n; ++k) traj.push_back(std::span<const double>(blob.data() + k * d, d));
  return traj;
}

// ---------------------------------------------------------------------------

void save_checkpoint(const fs::path& path, const MdnModel& model) {
  const auto& a = model.arch();
  std::vector<double> blob;
  append(blob, model.input_standardiser.mean);
  append(blob, model.input_standardiser.scale);
  append(blob, model.target_standardiser.mean);
  append(blob, model.target_standardiser.scale);
  append(blob, model.net().params());
  auto fields = history_fields(model.history, model.training_seed);
  fields.insert(fields.begin(), {{"kind", "mdn"},
                                 {"mode", to_string(a.mode)},
                                 {"input_dim", std::to_string(a.input_dim)},
                                 {"target_dim", std::to_string(a.target_dim)},
                                 {"hidden", join(a.hidden)},
                                 {"components", std::to_string(a.components)},
                                 {"min_scale", format_double(a.min_scale)}});
  write_container(path, "stochparam-checkpoint", fields, blob);
}

void save_checkpoint(const fs::path& path, const DeterministicModel& model) {
  const auto& sizes = model.net().layer_sizes();
  std::vector<double> blob;
  append(blob, model.input_standardiser.mean);
  append(blob, model.input_standardiser.scale);
  append(blob, model.target_standardiser.mean);
  append(blob, model.target_standardiser.scale);
  append(blob, model.net().params());
  auto fields = history_fields(model.history, model.training_seed);
  fields.insert(fields.begin(),
                {{"kind", "deterministic"},
                 {"input_dim", std::to_string(sizes.front())},
                 {"target_dim", std::to_string(sizes.back())},
                 {"hidden", join(std::vector<std::size_t>(sizes.begin() + 1, sizes.end() - 1))}});
  write_container(path, "stochparam-checkpoint", fields, blob);
}

void save_checkpoint(const fs::path& path, const PolyAr1Model& model) {
  write_container(path, "stochparam-checkpoint",
                  {{"kind", "poly-ar1"},
                   {"degree", std::to_string(model.degree())},
                   {"phi", format_double(model.phi)},
                   {"innovation_var", format_double(model.innovation_var)},
                   {"residual_var", format_double(model.residual_var)}},
                  model.coefficients);
}

std::string checkpoint_kind(const fs::path& path) {
  return read_container(path, "stochparam-checkpoint").first.get("kind");
}

MdnModel load_mdn(const fs::path& path) {
  auto [h, blob] = read_container(path, "stochparam-checkpoint");
  if (h.get("kind") != "mdn") throw FormatError(path.string() + ": not an MDN checkpoint (" + h.get("kind") + ")");
  MdnArchitecture a;
  a.mode = parse_locality(h.get("mode"));
  a.input_dim = h.count("input_dim");
  a.target_dim = h.count("target_dim");
  a.hidden = split_sizes(h.get("hidden"));
  a.components = h.count("components");
  a.min_scale = h.number("min_scale");
  RngStream rng(0, StreamComponent::Initialisation);
  MdnModel model(a, rng);
  const std::size_t np = model.net().n_params();
  check_size(h, blob.size(), 2 * a.input_dim + 2 * a.target_dim + np);
  std::size_t pos = 0;
  take(blob, pos, model.input_standardiser.mean, a.input_dim);
  take(blob, pos, model.input_standardiser.scale, a.input_dim);
  take(blob, pos, model.target_standardiser.mean, a.target_dim);
  take(blob, pos, model.target_standardiser.scale, a.target_dim);
  std::copy(blob.begin() + static_cast<std::ptrdiff_t>(pos), blob.end(), model.net().params().begin());
  read_history(h, model.history, model.training_seed);
  return model;
}

DeterministicModel load_deterministic(const fs::path& path) {
  auto [h, blob] = read_container(path, "stochparam-checkpoint");
  if (h.get("kind") != "deterministic") {
    throw FormatError(path.string() + ": not a deterministic checkpoint (" + h.get("kind") + ")");
  }
  const std::size_t din = h.count("input_dim"), dout = h.count("target_dim");
  RngStream rng(0, StreamComponent::Initialisation);
  DeterministicModel model(din, dout, split_sizes(h.get("hidden")), rng);
  check_size(h, blob.size(), 2 * din + 2 * dout + model.net().n_params());
  std::size_t pos = 0;
  take(blob, pos, model.input_standardiser.mean, din);
  take(blob, pos, model.input_standardiser.scale, din);
  take(blob, pos, model.target_standardiser.mean, dout);
  take(blob, pos, model.target_standardiser.scale, dout);
  std::copy(blob.begin() + static_cast<std::ptrdiff_t>(pos), blob.end(), model.net().params().begin());
  read_history(h, model.history, model.training_seed);
  return model;
}

PolyAr1Model load_poly_ar1(const fs::path& path) {
  auto [h, blob] = read_container(path, "stochparam-checkpoint");
  if (h.get("kind") != "poly-ar1") throw FormatError(path.string() + ": not a Poly-AR(1) checkpoint (" + h.get("kind") + ")");
  check_size(h, blob.size(), h.count("degree") + 1);
  PolyAr1Model m;
  m.coefficients = std::move(blob);
  m.phi = h.number("phi");
  m.innovation_var = h.number("innovation_var");
  m.residual_var = h.number("residual_var");
  return m;
}

// ---------------------------------------------------------------------------

json report_to_json(const ScoreReport& r) {
  return {{"kl", r.kl},
          {"hellinger", r.hellinger},
          {"d_r", r.d_r},
          {"energy", {{"lead_times", r.energy.lead_times}, {"mean", r.energy.mean}, {"std_error", r.energy.std_error}}},
          {"metadata", r.metadata}};
}

ScoreReport report_from_json(const json& j) {
  ScoreReport r;
  r.kl = j.at("kl").get<double>();
  r.hellinger = j.at("hellinger").get<double>();
  r.d_r = j.at("d_r").get<double>();
  const auto& e = j.at("energy");
  r.energy.lead_times = e.at("lead_times").get<std::vector<double>>();
  r.energy.mean = e.at("mean").get<std::vector<double>>();
  r.energy.std_error = e.at("std_error").get<std::vector<double>>();
  r.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
  return r;
}

json sweep_to_json(const SweepTable& t) {
  json rows = json::array();
  for (const auto& row : t.rows) {
    rows.push_back({{"tp", row.tp}, {"energy_at_horizon", row.energy_at_horizon}, {"report", report_to_json(row.report)}});
  }
  return {{"rows", rows},
          {"argmin",
           {{"kl", t.argmin_kl}, {"hellinger", t.argmin_hellinger}, {"d_r", t.argmin_d_r}, {"energy", t.argmin_energy}}}};
}

SweepTable sweep_from_json(const json& j) {
  SweepTable t;
  for (const auto& row : j.at("rows")) {
    SweepRow r;
    r.tp = row.at("tp").get<std::size_t>();
    r.energy_at_horizon = row.at("energy_at_horizon").get<double>();
    r.report = report_from_json(row.at("report"));
    t.rows.push_back(std::move(r));
  }
  const auto& a = j.at("argmin");
  t.argmin_kl = a.at("kl").get<std::size_t>();
  t.argmin_hellinger = a.at("hellinger").get<std::size_t>();
  t.argmin_d_r = a.at("d_r").get<std::size_t>();
  t.argmin_energy = a.at("energy").get<std::size_t>();
  return t;
}

void write_json_file(const fs::path& path, std::string_view kind, const json& body, const json& provenance) {
  json doc = {{"format", "stochparam-report"},
              {"version", kFormatVersion},
              {"kind", std::string(kind)},
              {"body", body},
              {"provenance", provenance}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

JsonFile read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "stochparam-report") throw FormatError(path.string() + ": not a report file");
  if (doc.value("version", -1) != kFormatVersion) {
    throw FormatError(path.string() + ": unsupported format version " + doc.at("version").dump());
  }
  return {doc.at("kind").get<std::string>(), doc.at("body"), doc.value("provenance", json::object())};
}

void save_report(const fs::path& path, const ScoreReport& report, const json& provenance) {
  write_json_file(path, "score", report_to_json(report), provenance);
}

ScoreReport load_report(const fs::path& path) {
  auto f = read_json_file(path);
  if (f.kind != "score") throw FormatError(path.string() + ": expected a score report, found '" + f.kind + "'");
  return report_from_json(f.body);
}

// ---------------------------------------------------------------------------

void write_csv(const fs::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
  out << '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size()) throw std::invalid_argument("write_csv: ragged row");
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::size_t a = 0;
    while (true) {
      const auto b = s.find(',', a);
      out.push_back(s.substr(a, b - a));
      if (b == std::string::npos) break;
      a = b + 1;
    }
    return out;
  };
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty CSV");
  t.columns = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& f : split(line)) row.push_back(parse_double(f));
    if (row.size() != t.columns.size()) throw FormatError(path.string() + ": ragged CSV row");
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable ensemble_envelope(const EnsembleForecast& f, std::size_t component, double dt) {
  if (component >= f.dim) throw std::invalid_argument("ensemble_envelope: component out of range");
  CsvTable t{{"time", "truth", "mean", "lower", "upper"}, {}};
  for (std::size_t k = 0; k < f.n_states; ++k) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t j = 0; j < f.n_members(); ++j) {
      if (!f.finite[j]) continue;
      sum += f.member_state(j, k)[component];
      ++n;
    }
    if (n == 0) throw std::invalid_argument("ensemble_envelope: no finite members");
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t j = 0; j < f.n_members(); ++j) {
      if (!f.finite[j]) continue;
      const double e = f.member_state(j, k)[component] - mean;
      ss += e * e;
    }
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    t.rows.push_back({static_cast<double>(k) * dt, f.truth_state(k)[component], mean, mean - 3.0 * sd, mean + 3.0 * sd});
  }
  return t;
}

CsvTable sweep_table(const SweepTable& table, const std::string& score) {
  CsvTable t{{"tp", score}, {}};
  for (const auto& row : table.rows) {
    double v;
    if (score == "kl") {
      v = row.report.kl;
    } else if (score == "hellinger") {
      v = row.report.hellinger;
    } else if (score == "d_r") {
      v = row.report.d_r;
    } else if (score == "energy") {
      v = row.energy_at_horizon;
    } else {
      throw std::invalid_argument("sweep_table: unknown score '" + score + "'");
    }
    t.rows.push_back({static_cast<double>(row.tp), v});
  }
  return t;
}

CsvTable curve_table(const ScoreCurve& curve) {
  CsvTable t{{"lead_time", "score", "std_error"}, {}};
  for (std::size_t i = 0; i < curve.lead_times.size(); ++i) {
    t.rows.push_back({curve.lead_times[i], curve.mean[i], i < curve.std_error.size() ? curve.std_error[i] : 0.0});
  }
  return t;
}

}  // namespace stochparam
