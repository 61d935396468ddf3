#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hpcadvisor {

// One assignment of application input parameters, e.g. {mesh: "80 24 24"}.
using AppInputs = std::map<std::string, std::string>;
using Tags = std::map<std::string, std::string>;

// Main sweep configuration. Order of skus, nnodes and appinputs is significant:
// it fixes the order in which scenarios are generated.
struct SweepConfig {
  std::string subscription;
  std::vector<std::string> skus;
  std::string rgprefix;
  std::string appsetupurl;
  std::vector<int> nnodes;
  std::string appname;
  Tags tags;
  std::string region;
  bool createjumpbox = false;
  bool peervpn = false;
  std::optional<std::string> vpnrg;
  std::optional<std::string> vpnvnet;
  int ppr = 100;
  std::vector<std::pair<std::string, std::vector<std::string>>> appinputs;

  bool operator==(const SweepConfig&) const = default;
};

// Parses the YAML main configuration. Unknown keys are appended to `warnings` when given.
SweepConfig parse_sweep_config(std::string_view text, std::vector<std::string>* warnings = nullptr);
SweepConfig load_sweep_config_file(const std::filesystem::path& path,
                                   std::vector<std::string>* warnings = nullptr);
std::string serialize_sweep_config(const SweepConfig& config);

// Cartesian product of appinput values, first parameter outermost. A config without
// appinputs yields a single empty assignment.
std::vector<AppInputs> appinput_combinations(const SweepConfig& config);
std::size_t sweep_cardinality(const SweepConfig& config);

struct SkuInfo {
  int cores = 0;
  double price_per_node_hour = 0.0;
};

// "Standard_HB120rs_v3" and "hb120rs_v3" name the same VM type.
std::string canonical_sku(std::string_view sku);

class PricingCatalog {
 public:
  void add(std::string_view sku, SkuInfo info);
  const SkuInfo* find(std::string_view sku) const;
  const SkuInfo& at(std::string_view sku) const;
  bool contains(std::string_view sku) const { return find(sku) != nullptr; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::string, SkuInfo>& entries() const noexcept { return entries_; }

 private:
  std::map<std::string, SkuInfo> entries_;
};

// Catalog rows are `sku,cores,price_per_node_hour`; '#' starts a comment and a
// header row whose first field is "sku" is skipped.
PricingCatalog load_pricing(std::string_view text);
PricingCatalog load_pricing_file(const std::filesystem::path& path);

// floor(cores * ppr / 100)
int processes_per_node(int cores, int ppr) noexcept;

// VM-only cost with per-second proration of the hourly node price.
double task_cost(double exectime_seconds, int nnodes, double price_per_node_hour) noexcept;

// Rejects configs whose skus are missing from the catalog or would get zero processes per node.
void check_config_against_pricing(const SweepConfig& config, const PricingCatalog& pricing);

struct AppScriptInfo {
  std::filesystem::path source_path;
  bool has_setup = false;
  bool has_run = false;
};

inline constexpr std::string_view kSetupFunction = "hpcadvisor_setup";
inline constexpr std::string_view kRunFunction = "hpcadvisor_run";

AppScriptInfo validate_app_script(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace hpcadvisor
