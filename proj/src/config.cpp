#include "gcope/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "gcope/error.hpp"

namespace gcope {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"sources", "", "comma-separated source dataset directories"},
      {"target", "", "target dataset directory"},
      {"ckpt", "", "checkpoint path"},
      {"dataset", "", "dataset directory to describe"},
      {"out", "", "output path (file or directory, per command)"},

      {"proj_dim", "100", "projected feature dimension"},
      {"l2_normalize", "false", "row-normalize projected features"},
      {"svd_max_iterations", "300", "orthogonal iteration cap for the truncated SVD"},
      {"svd_tolerance", "1e-9", "subspace convergence tolerance for the truncated SVD"},

      {"coordinators", "1", "coordinators per source dataset"},
      {"coordinator_init", "gaussian", "coordinator feature init: zeros|gaussian"},
      {"coordinator_sigma", "0", "gaussian init std, 0 = 1/sqrt(proj_dim)"},
      {"inter_mode", "full", "coordinator-coordinator edges: full|none|dynamic:T"},
      {"self_loops", "true", "coordinator self-loops"},

      {"encoder", "gcn", "encoder: gcn|fagcn"},
      {"num_layers", "2", "encoder layers"},
      {"hidden_dim", "100", "encoder width"},
      {"activation", "relu", "activation: relu|tanh"},
      {"fagcn_eps", "0.3", "fagcn residual weight"},
      {"readout", "mean", "graph readout: mean|sum|max"},

      {"objective", "graphcl", "pretraining objective: graphcl|simgrace"},
      {"tau", "0.5", "contrastive temperature"},
      {"lambda", "0.2", "reconstruction loss weight"},
      {"epochs", "100", "pretraining epochs"},
      {"batch_size", "128", "sampled subgraphs per pretraining step"},
      {"hops", "2", "subgraph radius for pretraining samples and downstream tasks"},
      {"max_sample_nodes", "64", "node cap per pretraining sample, 0 = none"},
      {"perturb_scale", "0.1", "simgrace weight perturbation scale"},
      {"lr", "1e-4", "pretraining learning rate"},
      {"decoder_hidden", "100", "reconstruction decoder width"},
      {"view_a", "node_drop:0.2", "first graphcl augmentation kind:ratio"},
      {"view_b", "attr_mask:0.2", "second graphcl augmentation kind:ratio"},
      {"early_stop_tol", "0", "relative loss change over 10 epochs that stops pretraining, 0 = off"},
      {"seed", "0", "root seed"},

      {"mode", "finetune", "transfer mode: finetune|prompt"},
      {"transfer_epochs", "100", "transfer epochs"},
      {"transfer_lr", "1e-4", "transfer learning rate"},
      {"patience", "20", "epochs without validation improvement before stopping"},
      {"prompt_tokens", "10", "prompt tokens"},
      {"shots", "1", "labeled nodes per class"},
      {"repeats", "5", "evaluation repeats"},

      {"nodes", "500", "synthetic node count"},
      {"classes", "3", "synthetic class count"},
      {"dim", "16", "synthetic feature dimension"},
      {"homophily", "0.5", "synthetic target edge homophily in [0,1]"},
      {"name", "synth", "synthetic dataset name"},

      {"ablation", "lambda_sweep", "ablation: inter_edges|lambda_sweep|coordinator_count"},
      {"grid", "0,0.2,1.0", "comma-separated ablation grid"},
      {"schemes", "supervised,isolated_pretrain,gcope", "schemes to evaluate"},
  };
  return keys;
}

bool is_config_key(std::string_view key) {
  const auto& keys = config_keys();
  return std::any_of(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.key == key; });
}

std::string flag_name(std::string_view key) {
  std::string out(key);
  std::replace(out.begin(), out.end(), '_', '-');
  return out;
}

ConfigMap default_config() {
  ConfigMap m;
  for (const auto& k : config_keys()) m[k.key] = k.default_value;
  return m;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_int(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    fail(ErrorCode::InvalidArgument, key + ": '" + v + "' is not an integer");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    fail(ErrorCode::InvalidArgument, key + ": '" + v + "' is not a number");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorCode::InvalidArgument, key + ": '" + v + "' is not a boolean");
}

AugmentationSpec parse_view(const std::string& key, const std::string& v) {
  const auto colon = v.find(':');
  AugmentationSpec spec;
  spec.kind = parse_aug_kind(v.substr(0, colon));
  if (colon != std::string::npos) spec.ratio = parse_real(key, v.substr(colon + 1));
  spec.validate();
  return spec;
}

Scheme parse_scheme(const std::string& s) {
  if (s == "supervised") return Scheme::Supervised;
  if (s == "isolated_pretrain") return Scheme::IsolatedPretrain;
  if (s == "gcope") return Scheme::Gcope;
  fail(ErrorCode::InvalidArgument, "unknown scheme '" + s + "' (expected supervised|isolated_pretrain|gcope)");
}

}  // namespace

std::vector<std::string> split_list(std::string_view s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t i = 0;
  while (true) {
    const std::size_t j = s.find(sep, i);
    std::string item = trim(s.substr(i, j == std::string_view::npos ? std::string_view::npos : j - i));
    if (!item.empty()) out.push_back(std::move(item));
    if (j == std::string_view::npos) break;
    i = j + 1;
  }
  return out;
}

ConfigMap parse_config_text(std::string_view text) {
  ConfigMap m;
  std::size_t line_no = 0;
  for (const auto& raw : split_list(text, '\n')) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::ParseError, "config line '" + line + "' has no '='");
    const std::string key = trim(line.substr(0, eq));
    if (!is_config_key(key)) fail(ErrorCode::UnknownKey, "unknown config key '" + key + "'");
    m[key] = trim(line.substr(eq + 1));
  }
  return m;
}

ConfigMap load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::MissingFile, "cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string dump_config(const ConfigMap& cfg) {
  std::string out;
  for (const auto& [k, v] : cfg) out += k + "=" + v + "\n";
  return out;
}

ExperimentConfig resolve_config(const ConfigMap& input) {
  ConfigMap m = default_config();
  for (const auto& [k, v] : input) {
    if (!is_config_key(k)) fail(ErrorCode::UnknownKey, "unknown config key '" + k + "'");
    m[k] = v;
  }
  auto get = [&](const char* k) -> const std::string& { return m.at(k); };

  ExperimentConfig c;
  c.sources = split_list(get("sources"));
  c.target = get("target");
  c.ckpt = get("ckpt");
  c.dataset = get("dataset");
  c.out = get("out");

  c.proj.proj_dim = parse_int<Index>("proj_dim", get("proj_dim"));
  c.proj.l2_normalize = parse_bool("l2_normalize", get("l2_normalize"));
  c.proj.max_power_iterations = parse_int<int>("svd_max_iterations", get("svd_max_iterations"));
  c.proj.tolerance = parse_real("svd_tolerance", get("svd_tolerance"));
  c.proj.validate();

  c.coords.per_dataset = parse_int<int>("coordinators", get("coordinators"));
  if (c.coords.per_dataset < 0) fail(ErrorCode::InvalidArgument, "coordinators must be >= 0");
  c.coords.init = parse_coordinator_init(get("coordinator_init"));
  c.coords.init_sigma = parse_real("coordinator_sigma", get("coordinator_sigma"));
  if (!(c.coords.init_sigma >= 0.0)) fail(ErrorCode::InvalidArgument, "coordinator_sigma must be >= 0");
  c.coords.inter_mode = parse_inter_mode(get("inter_mode"));
  c.coords.self_loops = parse_bool("self_loops", get("self_loops"));

  c.encoder.kind = parse_encoder_kind(get("encoder"));
  c.encoder.num_layers = parse_int<int>("num_layers", get("num_layers"));
  c.encoder.hidden_dim = parse_int<Index>("hidden_dim", get("hidden_dim"));
  c.encoder.activation = parse_activation(get("activation"));
  c.encoder.fagcn_eps = parse_real("fagcn_eps", get("fagcn_eps"));
  c.encoder.input_dim = c.proj.proj_dim;
  if (c.encoder.num_layers < 1 || c.encoder.hidden_dim < 1) {
    fail(ErrorCode::InvalidArgument, "num_layers and hidden_dim must be >= 1");
  }
  if (!(c.encoder.fagcn_eps >= 0.0 && c.encoder.fagcn_eps <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "fagcn_eps must lie in [0,1]");
  }
  const Readout readout = parse_readout(get("readout"));

  c.seed = parse_int<std::uint64_t>("seed", get("seed"));
  c.hops = parse_int<int>("hops", get("hops"));
  if (c.hops < 1) fail(ErrorCode::InvalidArgument, "hops must be >= 1");

  auto& p = c.pretrain;
  p.objective = parse_objective(get("objective"));
  p.temperature = parse_real("tau", get("tau"));
  p.lambda = parse_real("lambda", get("lambda"));
  p.epochs = parse_int<int>("epochs", get("epochs"));
  p.batch_size = parse_int<Index>("batch_size", get("batch_size"));
  p.hops = c.hops;
  p.max_sample_nodes = parse_int<Index>("max_sample_nodes", get("max_sample_nodes"));
  p.perturb_scale = parse_real("perturb_scale", get("perturb_scale"));
  p.lr = parse_real("lr", get("lr"));
  p.decoder_hidden = parse_int<Index>("decoder_hidden", get("decoder_hidden"));
  p.readout = readout;
  p.view_a = parse_view("view_a", get("view_a"));
  p.view_b = parse_view("view_b", get("view_b"));
  p.early_stop_tol = parse_real("early_stop_tol", get("early_stop_tol"));
  p.seed = c.seed;
  p.validate();

  auto& t = c.transfer;
  t.mode = parse_transfer_mode(get("mode"));
  t.epochs = parse_int<int>("transfer_epochs", get("transfer_epochs"));
  t.lr = parse_real("transfer_lr", get("transfer_lr"));
  t.patience = parse_int<int>("patience", get("patience"));
  t.prompt_tokens = parse_int<int>("prompt_tokens", get("prompt_tokens"));
  t.readout = readout;
  t.seed = c.seed;
  t.validate();

  c.shots = parse_int<int>("shots", get("shots"));
  c.repeats = parse_int<int>("repeats", get("repeats"));
  if (c.shots < 1) fail(ErrorCode::InvalidArgument, "shots must be >= 1");
  if (c.repeats < 1) fail(ErrorCode::InvalidArgument, "repeats must be >= 1");

  c.synth_nodes = parse_int<Index>("nodes", get("nodes"));
  c.synth_classes = parse_int<int>("classes", get("classes"));
  c.synth_dim = parse_int<Index>("dim", get("dim"));
  c.synth_homophily = parse_real("homophily", get("homophily"));
  c.synth_name = get("name");
  if (c.synth_nodes < 1 || c.synth_classes < 1 || c.synth_dim < 1) {
    fail(ErrorCode::InvalidArgument, "nodes, classes and dim must be >= 1");
  }
  if (!(c.synth_homophily >= 0.0 && c.synth_homophily <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "homophily must lie in [0,1], got " + get("homophily"));
  }

  c.ablation = parse_ablation_kind(get("ablation"));
  c.grid = split_list(get("grid"));
  for (const auto& s : split_list(get("schemes"))) c.schemes.push_back(parse_scheme(s));
  return c;
}

}  // namespace gcope
