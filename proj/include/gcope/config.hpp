#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gcope/amalgam.hpp"
#include "gcope/evalkit.hpp"
#include "gcope/nn.hpp"
#include "gcope/pretrain.hpp"
#include "gcope/projection.hpp"
#include "gcope/transfer.hpp"

namespace gcope {

struct ConfigKey {
  std::string key;  // snake_case; the CLI flag is the kebab-case spelling
  std::string default_value;
  std::string help;
};

/// Every recognized key, in documentation order.
const std::vector<ConfigKey>& config_keys();
bool is_config_key(std::string_view key);
std::string flag_name(std::string_view key);

using ConfigMap = std::map<std::string, std::string>;

ConfigMap default_config();
/// `key = value` lines; blank lines and lines starting with '#' are
/// skipped. Unknown keys throw UnknownKey, malformed lines ParseError.
ConfigMap parse_config_text(std::string_view text);
ConfigMap load_config_file(const std::filesystem::path& path);
/// Sorted key=value lines.
std::string dump_config(const ConfigMap& cfg);

struct ExperimentConfig {
  std::vector<std::string> sources;
  std::string target;
  std::string ckpt;
  std::string dataset;
  std::string out;

  ProjectionConfig proj;
  CoordinatorConfig coords;
  EncoderConfig encoder;
  PretrainConfig pretrain;
  TransferConfig transfer;
  int shots = 1;
  int hops = 2;
  int repeats = 5;
  std::uint64_t seed = 0;

  Index synth_nodes = 500;
  int synth_classes = 3;
  Index synth_dim = 16;
  double synth_homophily = 0.5;
  std::string synth_name = "synth";

  AblationKind ablation = AblationKind::LambdaSweep;
  std::vector<std::string> grid;
  std::vector<Scheme> schemes;
};

/// Typed view of a full config map. Throws InvalidArgument on bad values.
ExperimentConfig resolve_config(const ConfigMap& cfg);

std::vector<std::string> split_list(std::string_view s, char sep = ',');

}  // namespace gcope
