#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stochparam/dataset.hpp"
#include "stochparam/dynamics.hpp"
#include "stochparam/harness.hpp"
#include "stochparam/mdn.hpp"
#include "stochparam/poly_ar1.hpp"

namespace stochparam {

inline constexpr int kFormatVersion = 1;

/// Malformed, truncated, or incompatible file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Hashing

std::string sha1_hex(std::span<const unsigned char> bytes);
/// Git blob id: SHA-1 of "blob <size>\0" followed by the content.
std::string git_blob_hash(std::string_view content);
std::string file_hash(const std::filesystem::path& path);

// Number formatting: 17 significant digits, locale-independent.

std::string format_double(double v);
double parse_double(std::string_view text);

// Datasets and trajectories: text header, "end" line, then little-endian f64 rows.

void save_dataset(const std::filesystem::path& path, const PairDataset& data);
PairDataset load_dataset(const std::filesystem::path& path);

void save_trajectory(const std::filesystem::path& path, const Trajectory& traj);
Trajectory load_trajectory(const std::filesystem::path& path);

// Checkpoints

void save_checkpoint(const std::filesystem::path& path, const MdnModel& model);
void save_checkpoint(const std::filesystem::path& path, const DeterministicModel& model);
void save_checkpoint(const std::filesystem::path& path, const PolyAr1Model& model);

/// "mdn", "deterministic" or "poly-ar1".
std::string checkpoint_kind(const std::filesystem::path& path);
MdnModel load_mdn(const std::filesystem::path& path);
DeterministicModel load_deterministic(const std::filesystem::path& path);
PolyAr1Model load_poly_ar1(const std::filesystem::path& path);

// Reports

nlohmann::json report_to_json(const ScoreReport& report);
ScoreReport report_from_json(const nlohmann::json& j);
nlohmann::json sweep_to_json(const SweepTable& table);
SweepTable sweep_from_json(const nlohmann::json& j);

/// Writes {format, version, kind, body, provenance} as JSON.
void write_json_file(const std::filesystem::path& path, std::string_view kind, const nlohmann::json& body,
                     const nlohmann::json& provenance);
struct JsonFile {
  std::string kind;
  nlohmann::json body;
  nlohmann::json provenance;
};
JsonFile read_json_file(const std::filesystem::path& path);

void save_report(const std::filesystem::path& path, const ScoreReport& report, const nlohmann::json& provenance);
ScoreReport load_report(const std::filesystem::path& path);

// CSV exports

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

/// Columns time, truth, mean, lower, upper for one component; the band is
/// mean -/+ 3 sample standard deviations (n - 1 divisor) over finite members.
CsvTable ensemble_envelope(const EnsembleForecast& forecast, std::size_t component, double dt);
/// Columns t_p and the named score ("kl", "hellinger", "d_r" or "energy").
CsvTable sweep_table(const SweepTable& table, const std::string& score);
/// Columns lead_time, score, std_error.
CsvTable curve_table(const ScoreCurve& curve);

}  // namespace stochparam
