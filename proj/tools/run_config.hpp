#pragma once

// Declarative run file shared by the fit, decluster and diagnose commands.

#include <array>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "etas/catalog.hpp"
#include "etas/decluster.hpp"
#include "etas/timescale.hpp"

namespace etas::cli {

inline constexpr const char* kRunSchema = "etas-run/1";

struct RunConfig {
  std::filesystem::path base_dir{"."};  // relative paths resolve against this
  std::filesystem::path catalog;
  std::optional<Region> region;
  std::optional<double> m0;
  std::optional<double> t_start;
  std::optional<double> T;
  std::string scale{"ideal"};
  std::optional<std::filesystem::path> minor_catalog;
  double major_threshold{5.0};
  std::string variant{"isdm"};
  std::string boundary{"infinite"};
  std::string magnitude{"exp"};
  std::string optimizer{"dfp"};
  std::array<bool, kParamCount> fixed{};
  nlohmann::json initial = nlohmann::json::object();
  BandwidthConfig bandwidth{};
  double grid_cell{0.1};
  std::size_t bins{50};
  double threshold{0.95};
  std::uint64_t seed{1};
  std::filesystem::path out_dir{"run"};

  [[nodiscard]] std::filesystem::path resolve(const std::filesystem::path& p) const;
  // Throws DomainError on bad values or missing referenced files.
  void validate() const;
};

[[nodiscard]] RunConfig load_run_config(const std::filesystem::path& path);
[[nodiscard]] RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
void to_json(nlohmann::json& j, const RunConfig& c);

void set_fixed(RunConfig& c, const std::vector<std::string>& names);
[[nodiscard]] Region parse_region(const std::string& text);

// Reads, filters and rescales the catalog named by the config.
[[nodiscard]] Catalog prepare_catalog(const RunConfig& c);
[[nodiscard]] EtasParams initial_params(const RunConfig& c, const Catalog& catalog);
[[nodiscard]] IsdmOptions isdm_options(const RunConfig& c);

}  // namespace etas::cli
