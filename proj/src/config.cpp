#include "hpcadvisor/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "hpcadvisor/errors.hpp"

namespace hpcadvisor {

namespace {

const std::set<std::string> kKnownKeys = {
    "subscription", "skus",    "rgprefix", "appsetupurl", "nnodes", "appname", "tags",
    "region",       "createjumpbox", "peervpn", "vpnrg", "vpnvnet", "ppr",  "appinputs"};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string scalar(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) throw ConfigError(key, "expected a scalar value");
  return node.as<std::string>();
}

std::string required_string(const YAML::Node& root, const std::string& key) {
  auto node = root[key];
  if (!node) throw ConfigError(key, "missing required key");
  auto value = scalar(node, key);
  if (value.empty()) throw ConfigError(key, "must not be empty");
  return value;
}

bool optional_bool(const YAML::Node& root, const std::string& key, bool fallback) {
  auto node = root[key];
  if (!node || node.IsNull()) return fallback;
  try {
    return node.as<bool>();
  } catch (const YAML::Exception&) {
    throw ConfigError(key, "expected a boolean");
  }
}

int parse_int(const YAML::Node& node, const std::string& key) {
  auto text = scalar(node, key);
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ConfigError(key, fmt::format("expected an integer, got '{}'", text));
  return value;
}

std::vector<std::string> string_list(const YAML::Node& node, const std::string& key) {
  std::vector<std::string> out;
  if (node.IsScalar()) {
    out.push_back(node.as<std::string>());
  } else if (node.IsSequence()) {
    for (std::size_t i = 0; i < node.size(); ++i)
      out.push_back(scalar(node[i], fmt::format("{}[{}]", key, i)));
  } else {
    throw ConfigError(key, "expected a value or a list of values");
  }
  return out;
}

void check_unique_keys(const YAML::Node& map, const std::string& key) {
  std::set<std::string> seen;
  for (const auto& kv : map) {
    auto name = kv.first.as<std::string>();
    if (!seen.insert(name).second)
      throw ConfigError(key.empty() ? name : key + "." + name,
                        "duplicate key; list multiple values under a single key instead");
  }
}

}  // namespace

SweepConfig parse_sweep_config(std::string_view text, std::vector<std::string>* warnings) {
  YAML::Node loaded;
  try {
    loaded = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError("", fmt::format("malformed config document: {}", e.what()));
  }
  const YAML::Node& root = loaded;
  if (!root.IsMap()) throw ConfigError("", "config document must be a key/value map");
  check_unique_keys(root, "");

  SweepConfig cfg;
  cfg.subscription = required_string(root, "subscription");
  cfg.rgprefix = required_string(root, "rgprefix");
  cfg.appsetupurl = required_string(root, "appsetupurl");
  cfg.appname = required_string(root, "appname");
  cfg.region = required_string(root, "region");

  auto skus = root["skus"];
  if (!skus) throw ConfigError("skus", "missing required key");
  cfg.skus = string_list(skus, "skus");
  if (cfg.skus.empty()) throw ConfigError("skus", "must list at least one sku");
  {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < cfg.skus.size(); ++i) {
      if (cfg.skus[i].empty()) throw ConfigError(fmt::format("skus[{}]", i), "empty sku name");
      if (!seen.insert(canonical_sku(cfg.skus[i])).second)
        throw ConfigError(fmt::format("skus[{}]", i), fmt::format("duplicate sku '{}'", cfg.skus[i]));
    }
  }

  auto nnodes = root["nnodes"];
  if (!nnodes) throw ConfigError("nnodes", "missing required key");
  if (nnodes.IsScalar()) {
    cfg.nnodes.push_back(parse_int(nnodes, "nnodes"));
  } else if (nnodes.IsSequence()) {
    for (std::size_t i = 0; i < nnodes.size(); ++i)
      cfg.nnodes.push_back(parse_int(nnodes[i], fmt::format("nnodes[{}]", i)));
  } else {
    throw ConfigError("nnodes", "expected a list of node counts");
  }
  if (cfg.nnodes.empty()) throw ConfigError("nnodes", "must list at least one node count");
  for (std::size_t i = 0; i < cfg.nnodes.size(); ++i) {
    if (cfg.nnodes[i] < 1)
      throw ConfigError(fmt::format("nnodes[{}]", i),
                        fmt::format("node count must be positive, got {}", cfg.nnodes[i]));
  }

  if (auto ppr = root["ppr"]; ppr && !ppr.IsNull()) {
    cfg.ppr = parse_int(ppr, "ppr");
    if (cfg.ppr <= 0 || cfg.ppr > 100)
      throw ConfigError("ppr", fmt::format("ppr out of range (0,100]: {}", cfg.ppr));
  }

  if (auto tags = root["tags"]; tags && !tags.IsNull()) {
    if (!tags.IsMap()) throw ConfigError("tags", "expected a key/value map");
    check_unique_keys(tags, "tags");
    for (const auto& kv : tags) {
      auto name = kv.first.as<std::string>();
      cfg.tags[name] = scalar(kv.second, "tags." + name);
    }
  }

  cfg.createjumpbox = optional_bool(root, "createjumpbox", false);
  cfg.peervpn = optional_bool(root, "peervpn", false);
  if (auto n = root["vpnrg"]; n && !n.IsNull()) cfg.vpnrg = scalar(n, "vpnrg");
  if (auto n = root["vpnvnet"]; n && !n.IsNull()) cfg.vpnvnet = scalar(n, "vpnvnet");

  if (auto inputs = root["appinputs"]; inputs && !inputs.IsNull()) {
    if (!inputs.IsMap()) throw ConfigError("appinputs", "expected a map of parameter -> values");
    // A repeated parameter key appends its values to the first occurrence.
    for (const auto& kv : inputs) {
      auto name = kv.first.as<std::string>();
      auto values = string_list(kv.second, "appinputs." + name);
      if (values.empty()) throw ConfigError("appinputs." + name, "must list at least one value");
      auto it = std::find_if(cfg.appinputs.begin(), cfg.appinputs.end(),
                             [&](const auto& p) { return p.first == name; });
      if (it == cfg.appinputs.end()) {
        cfg.appinputs.emplace_back(name, std::move(values));
        continue;
      }
      for (auto& v : values) {
        if (std::find(it->second.begin(), it->second.end(), v) != it->second.end())
          throw ConfigError("appinputs." + name, fmt::format("duplicate value '{}'", v));
        it->second.push_back(std::move(v));
      }
    }
  }

  if (warnings) {
    for (const auto& kv : root) {
      auto name = kv.first.as<std::string>();
      if (!kKnownKeys.contains(name)) warnings->push_back(fmt::format("unknown config key '{}'", name));
    }
    if (cfg.peervpn && (!cfg.vpnrg || !cfg.vpnvnet))
      warnings->push_back("peervpn is set but vpnrg/vpnvnet are incomplete; no peering will be created");
  }
  return cfg;
}

SweepConfig load_sweep_config_file(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  return parse_sweep_config(read_text_file(path), warnings);
}

std::string serialize_sweep_config(const SweepConfig& cfg) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "subscription" << YAML::Value << cfg.subscription;
  out << YAML::Key << "skus" << YAML::Value << YAML::BeginSeq;
  for (const auto& s : cfg.skus) out << s;
  out << YAML::EndSeq;
  out << YAML::Key << "rgprefix" << YAML::Value << cfg.rgprefix;
  out << YAML::Key << "appsetupurl" << YAML::Value << cfg.appsetupurl;
  out << YAML::Key << "nnodes" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (int n : cfg.nnodes) out << n;
  out << YAML::EndSeq;
  out << YAML::Key << "appname" << YAML::Value << cfg.appname;
  if (!cfg.tags.empty()) {
    out << YAML::Key << "tags" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : cfg.tags) out << YAML::Key << k << YAML::Value << YAML::DoubleQuoted << v;
    out << YAML::EndMap;
  }
  out << YAML::Key << "region" << YAML::Value << cfg.region;
  out << YAML::Key << "createjumpbox" << YAML::Value << cfg.createjumpbox;
  out << YAML::Key << "peervpn" << YAML::Value << cfg.peervpn;
  if (cfg.vpnrg) out << YAML::Key << "vpnrg" << YAML::Value << *cfg.vpnrg;
  if (cfg.vpnvnet) out << YAML::Key << "vpnvnet" << YAML::Value << *cfg.vpnvnet;
  out << YAML::Key << "ppr" << YAML::Value << cfg.ppr;
  if (!cfg.appinputs.empty()) {
    out << YAML::Key << "appinputs" << YAML::Value << YAML::BeginMap;
    for (const auto& [name, values] : cfg.appinputs) {
      out << YAML::Key << name << YAML::Value << YAML::BeginSeq;
      for (const auto& v : values) out << YAML::DoubleQuoted << v;
      out << YAML::EndSeq;
    }
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::vector<AppInputs> appinput_combinations(const SweepConfig& config) {
  std::vector<AppInputs> combos{AppInputs{}};
  for (const auto& [name, values] : config.appinputs) {
    std::vector<AppInputs> next;
    next.reserve(combos.size() * values.size());
    for (const auto& partial : combos) {
      for (const auto& v : values) {
        auto c = partial;
        c[name] = v;
        next.push_back(std::move(c));
      }
    }
    combos = std::move(next);
  }
  return combos;
}

std::size_t sweep_cardinality(const SweepConfig& config) {
  std::size_t n = config.skus.size() * config.nnodes.size();
  for (const auto& [name, values] : config.appinputs) n *= values.size();
  return n;
}

std::string canonical_sku(std::string_view sku) {
  std::string s;
  s.reserve(sku.size());
  for (char c : trim(sku)) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  constexpr std::string_view prefix = "standard_";
  if (s.starts_with(prefix)) s.erase(0, prefix.size());
  return s;
}

void PricingCatalog::add(std::string_view sku, SkuInfo info) {
  auto key = canonical_sku(sku);
  if (key.empty()) throw ConfigError("sku", "empty sku name");
  if (info.cores < 1) throw ConfigError(key, fmt::format("cores must be >= 1, got {}", info.cores));
  if (!(info.price_per_node_hour >= 0.0) || !std::isfinite(info.price_per_node_hour))
    throw ConfigError(key, fmt::format("price must be a nonnegative number, got {}", info.price_per_node_hour));
  if (!entries_.emplace(key, info).second) throw ConfigError(key, fmt::format("duplicate sku row '{}'", sku));
}

const SkuInfo* PricingCatalog::find(std::string_view sku) const {
  auto it = entries_.find(canonical_sku(sku));
  return it == entries_.end() ? nullptr : &it->second;
}

const SkuInfo& PricingCatalog::at(std::string_view sku) const {
  if (const auto* info = find(sku)) return *info;
  throw NotFoundError(fmt::format("sku '{}' not found in pricing catalog", sku));
}

PricingCatalog load_pricing(std::string_view text) {
  PricingCatalog catalog;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::istringstream row(line);
    std::string field;
    while (std::getline(row, field, ',')) fields.push_back(trim(field));
    auto where = fmt::format("line {}", lineno);
    if (fields.size() != 3) throw ConfigError(where, "expected 'sku,cores,price_per_node_hour'");
    if (canonical_sku(fields[0]) == "sku") continue;
    SkuInfo info;
    auto [p1, e1] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), info.cores);
    if (e1 != std::errc{} || p1 != fields[1].data() + fields[1].size())
      throw ConfigError(where, fmt::format("invalid core count '{}'", fields[1]));
    std::size_t used = 0;
    try {
      info.price_per_node_hour = std::stod(fields[2], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != fields[2].size()) throw ConfigError(where, fmt::format("invalid price '{}'", fields[2]));
    try {
      catalog.add(fields[0], info);
    } catch (const ConfigError& e) {
      throw ConfigError(where, e.what());
    }
  }
  return catalog;
}

PricingCatalog load_pricing_file(const std::filesystem::path& path) { return load_pricing(read_text_file(path)); }

int processes_per_node(int cores, int ppr) noexcept {
  return static_cast<int>((static_cast<long long>(cores) * ppr) / 100);
}

double task_cost(double exectime_seconds, int nnodes, double price_per_node_hour) noexcept {
  return exectime_seconds / 3600.0 * nnodes * price_per_node_hour;
}

void check_config_against_pricing(const SweepConfig& config, const PricingCatalog& pricing) {
  for (std::size_t i = 0; i < config.skus.size(); ++i) {
    const auto* info = pricing.find(config.skus[i]);
    auto key = fmt::format("skus[{}]", i);
    if (!info) throw ConfigError(key, fmt::format("sku '{}' not found in pricing catalog", config.skus[i]));
    if (processes_per_node(info->cores, config.ppr) < 1)
      throw ConfigError(key, fmt::format("ppr {} leaves zero processes per node on '{}' ({} cores)",
                                         config.ppr, config.skus[i], info->cores));
  }
}

namespace {

// Matches `name()`, `name ()` or `function name` at the start of a line.
bool declares_function(std::string_view line, std::string_view name) {
  auto s = trim(line);
  std::string_view v = s;
  if (v.starts_with("function ")) {
    v.remove_prefix(9);
    while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
    if (!v.starts_with(name)) return false;
    v.remove_prefix(name.size());
    return v.empty() || v.front() == ' ' || v.front() == '\t' || v.front() == '(' || v.front() == '{';
  }
  if (!v.starts_with(name)) return false;
  v.remove_prefix(name.size());
  while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
  return v.starts_with("(");
}

}  // namespace

AppScriptInfo validate_app_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError(fmt::format("app script '{}' not found or unreadable", path.string()));
  AppScriptInfo info{path, false, false};
  std::string line;
  while (std::getline(in, line)) {
    info.has_setup = info.has_setup || declares_function(line, kSetupFunction);
    info.has_run = info.has_run || declares_function(line, kRunFunction);
  }
  if (!info.has_setup) throw ConfigError(path.string(), fmt::format("{} not found", kSetupFunction));
  if (!info.has_run) throw ConfigError(path.string(), fmt::format("{} not found", kRunFunction));
  return info;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace hpcadvisor
