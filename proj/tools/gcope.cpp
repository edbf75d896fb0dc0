// gcope command-line front end: synth, pretrain, transfer, eval, ablate, inspect.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gcope/checkpoint.hpp"
#include "gcope/config.hpp"
#include "gcope/error.hpp"
#include "gcope/evalkit.hpp"
#include "gcope/graph_store.hpp"
#include "gcope/pretrain.hpp"
#include "gcope/transfer.hpp"

namespace fs = std::filesystem;
using namespace gcope;

namespace {

const std::vector<std::string> kProjectionKeys = {"proj_dim", "l2_normalize", "svd_max_iterations", "svd_tolerance"};
const std::vector<std::string> kCoordinatorKeys = {"coordinators", "coordinator_init", "coordinator_sigma",
                                                   "inter_mode", "self_loops"};
const std::vector<std::string> kEncoderKeys = {"encoder", "num_layers", "hidden_dim", "activation", "fagcn_eps",
                                               "readout"};
const std::vector<std::string> kPretrainKeys = {"objective",   "tau",           "lambda",  "epochs",
                                                "batch_size",  "hops",          "max_sample_nodes",
                                                "perturb_scale", "lr",          "decoder_hidden",
                                                "view_a",      "view_b",        "early_stop_tol", "seed"};
const std::vector<std::string> kTransferKeys = {"mode",          "transfer_epochs", "transfer_lr", "patience",
                                                "prompt_tokens", "shots",           "repeats",     "hops",
                                                "seed"};

std::vector<std::string> concat(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& p : parts)
    for (const auto& k : p)
      if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  return out;
}

const ConfigKey& key_info(const std::string& key) {
  for (const auto& k : config_keys())
    if (k.key == key) return k;
  fail(ErrorCode::UnknownKey, "unregistered key " + key);
}

void require(const ExperimentConfig& c, const std::string& key) {
  const std::map<std::string, bool> empty = {
      {"sources", c.sources.empty()}, {"target", c.target.empty()}, {"ckpt", c.ckpt.empty()}, {"out", c.out.empty()}};
  if (empty.at(key)) fail(ErrorCode::InvalidArgument, "--" + flag_name(key) + " is required");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::IoError, "short write to " + path.string());
}

template <typename Fn>
void write_stream(const fs::path& path, Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  write_text(path, ss.str());
}

std::vector<GraphDataset> load_sources(const ExperimentConfig& c) {
  std::vector<GraphDataset> out;
  for (const auto& dir : c.sources) out.push_back(load_dataset(dir));
  return out;
}

ExperimentSpec make_spec(const ExperimentConfig& c) {
  ExperimentSpec spec;
  spec.sources = load_sources(c);
  spec.target = std::make_shared<const GraphDataset>(load_dataset(c.target));
  spec.proj = c.proj;
  spec.coords = c.coords;
  spec.encoder = c.encoder;
  spec.pretrain = c.pretrain;
  spec.transfer = c.transfer;
  spec.shots = c.shots;
  spec.hops = c.hops;
  spec.repeats = c.repeats;
  spec.seed = c.seed;
  return spec;
}

void cmd_synth(const ExperimentConfig& c, const ConfigMap& resolved) {
  require(c, "out");
  const GraphDataset g = synth_dataset(c.synth_nodes, c.synth_classes, c.synth_dim, c.synth_homophily, c.seed,
                                       c.synth_name);
  write_dataset(g, c.out);
  write_text(fs::path(c.out) / "config.txt", dump_config(resolved));
  const DatasetMeta m = describe(g);
  std::cout << "wrote " << c.out << ": nodes=" << m.node_count << " edges=" << m.edge_count
            << " features=" << m.feature_dim << " labels=" << m.label_count
            << " homophily=" << format_number(m.homophily) << "\n";
}

void cmd_pretrain(const ExperimentConfig& c, const ConfigMap& resolved) {
  require(c, "sources");
  require(c, "out");
  const auto sources = load_sources(c);
  const PretrainResult r = pretrain(sources, c.proj, c.coords, c.encoder, c.pretrain);
  const fs::path out(c.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_checkpoint(r.checkpoint, out);
  write_stream(out.string() + ".loss.csv", [&](std::ostream& s) { write_loss_csv(s, r.history); });
  write_text(out.string() + ".config", dump_config(resolved));
  std::cout << "pretrained " << r.history.size() << " epochs on " << sources.size() << " sources ("
            << r.joint.num_nodes() << " joint nodes)";
  if (!r.history.empty()) std::cout << ", final total loss " << format_number(r.history.back().total);
  std::cout << "\nwrote " << out.string() << "\n";
}

void cmd_transfer(const ExperimentConfig& c, const ConfigMap& resolved) {
  require(c, "ckpt");
  require(c, "target");
  require(c, "out");
  const Checkpoint ckpt = load_checkpoint(c.ckpt);
  const std::string ckpt_dim = ckpt.hyper_value("proj_dim");
  if (ckpt_dim != std::to_string(c.proj.proj_dim)) {
    fail(ErrorCode::DimensionMismatch, "checkpoint proj_dim is " + ckpt_dim + " but the configuration uses " +
                                           std::to_string(c.proj.proj_dim));
  }
  if (architecture_fingerprint(ckpt) !=
      record_fingerprint(architecture_record(c.proj, c.encoder, c.transfer.readout))) {
    warn("checkpoint fingerprint differs from the configured architecture; using the checkpoint's encoder");
  }
  auto target = std::make_shared<const GraphDataset>(load_dataset(c.target));
  const auto seeds = repeat_seeds(c.seed, c.repeats);
  std::vector<MetricReport> val(seeds.size()), test(seeds.size());
  parallel_for(c.repeats, resolve_threads(0), [&](int r) {
    const FewShotTask task = build_fewshot_task(target, c.shots, c.hops, seeds[r]);
    TrainedModel m = transfer(ckpt, task, c.proj, c.transfer);
    val[r] = evaluate_model(m, task, Split::Val);
    test[r] = evaluate_model(m, task, Split::Test);
  });
  write_stream(c.out, [&](std::ostream& s) {
    s << "repeat,split,acc,auc,f1\n";
    for (std::size_t r = 0; r < seeds.size(); ++r) {
      for (const auto& [name, m] : {std::pair<const char*, const MetricReport&>{"val", val[r]}, {"test", test[r]}}) {
        s << r << ',' << name << ',' << format_number(m.acc) << ',' << format_number(m.auc) << ','
          << format_number(m.f1) << '\n';
      }
    }
  });
  write_text(c.out + ".config", dump_config(resolved));
  const RunSummary sum = summarize(Scheme::Gcope, c.transfer.mode, "transfer", seeds, test);
  std::cout << to_string(c.transfer.mode) << " over " << c.repeats << " repeats: test acc "
            << format_number(sum.acc.mean) << " auc " << format_number(sum.auc.mean) << " f1 "
            << format_number(sum.f1.mean) << "\nwrote " << c.out << "\n";
}

void cmd_eval(const ExperimentConfig& c, const ConfigMap& resolved) {
  require(c, "target");
  require(c, "out");
  if (c.schemes.empty()) fail(ErrorCode::InvalidArgument, "--schemes is empty");
  const ExperimentSpec spec = make_spec(c);
  std::vector<RunSummary> runs;
  for (Scheme s : c.schemes) {
    if (s != Scheme::Supervised && spec.sources.empty()) {
      fail(ErrorCode::InvalidArgument, "scheme " + to_string(s) + " needs --sources");
    }
    switch (s) {
      case Scheme::Supervised: runs.push_back(run_supervised(spec)); break;
      case Scheme::IsolatedPretrain: runs.push_back(run_isolated_pretrain(spec)); break;
      case Scheme::Gcope: runs.push_back(run_gcope(spec)); break;
    }
  }
  const fs::path out(c.out);
  fs::create_directories(out);
  write_stream(out / "summary.csv", [&](std::ostream& s) { write_summary_csv(s, runs); });
  write_stream(out / "repeats.csv", [&](std::ostream& s) { write_repeats_csv(s, runs); });
  for (const auto& r : runs) {
    if (r.pretrain_history.empty()) continue;
    write_stream(out / ("loss_" + r.label + ".csv"), [&](std::ostream& s) { write_loss_csv(s, r.pretrain_history); });
  }
  const std::string report = markdown_report(runs);
  write_text(out / "report.md", report);
  write_text(out / "config.txt", dump_config(resolved));
  std::cout << report;
}

void cmd_ablate(const ExperimentConfig& c, const ConfigMap& resolved) {
  require(c, "sources");
  require(c, "target");
  require(c, "out");
  const ExperimentSpec spec = make_spec(c);
  const auto rows = run_ablation(c.ablation, c.grid, spec);
  const fs::path out(c.out);
  fs::create_directories(out);
  write_stream(out / "ablation.csv", [&](std::ostream& s) { write_ablation_csv(s, rows); });
  std::vector<RunSummary> runs;
  for (const auto& r : rows) runs.push_back(r.summary);
  write_stream(out / "repeats.csv", [&](std::ostream& s) { write_repeats_csv(s, runs); });
  write_text(out / "config.txt", dump_config(resolved));
  std::ostringstream ss;
  write_ablation_csv(ss, rows);
  std::cout << ss.str();
}

void cmd_inspect(const ExperimentConfig& c, const ConfigMap&) {
  if (c.ckpt.empty() && c.dataset.empty()) fail(ErrorCode::InvalidArgument, "inspect needs --ckpt and/or --dataset");
  if (!c.ckpt.empty()) {
    const Checkpoint ckpt = load_checkpoint(c.ckpt);
    std::cout << "checkpoint " << c.ckpt << "\nformat " << kCheckpointMagic << "\nfingerprint "
              << to_hex(ckpt.fingerprint()) << "\n";
    for (const auto& [k, v] : ckpt.hyper) std::cout << "hyper " << k << " " << v << "\n";
    Index offset = 0;
    for (const auto& t : ckpt.tensors) {
      std::cout << "tensor " << t.name << " " << t.rows << "x" << t.cols << " offset " << offset << "\n";
      offset += t.rows * t.cols;
    }
  }
  if (!c.dataset.empty()) {
    const GraphDataset g = load_dataset(c.dataset);
    const DatasetMeta m = describe(g);
    std::cout << "dataset " << g.name << "\nnodes " << m.node_count << "\nedges " << m.edge_count << "\nfeatures "
              << m.feature_dim << "\nlabels " << m.label_count << "\nhomophily " << format_number(m.homophily)
              << "\n";
  }
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Diverged:
    case ErrorCode::NonFiniteActivation:
    case ErrorCode::NonFiniteUpdate:
    case ErrorCode::IoError:
    case ErrorCode::ConvergenceFailure:
      return 1;
    default:
      return 2;
  }
}

struct Command {
  std::string name;
  std::string help;
  std::vector<std::string> keys;
  std::function<void(const ExperimentConfig&, const ConfigMap&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Command> commands = {
      {"synth", "Generate a synthetic labeled graph dataset", {"nodes", "classes", "dim", "homophily", "seed", "name", "out"},
       cmd_synth},
      {"pretrain", "Pretrain an encoder on the amalgamated source graphs",
       concat({{"sources", "out"}, kProjectionKeys, kCoordinatorKeys, kEncoderKeys, kPretrainKeys}), cmd_pretrain},
      {"transfer", "Few-shot transfer of a checkpoint to a target graph",
       concat({{"ckpt", "target", "out"}, kProjectionKeys, kEncoderKeys, kTransferKeys}), cmd_transfer},
      {"eval", "Compare supervised, isolated pretraining and coordinator pretraining",
       concat({{"sources", "target", "out", "schemes"}, kProjectionKeys, kCoordinatorKeys, kEncoderKeys, kPretrainKeys,
               kTransferKeys}),
       cmd_eval},
      {"ablate", "Sweep one factor of coordinator pretraining",
       concat({{"sources", "target", "out", "ablation", "grid"}, kProjectionKeys, kCoordinatorKeys, kEncoderKeys,
               kPretrainKeys, kTransferKeys}),
       cmd_ablate},
      {"inspect", "Print a checkpoint manifest and/or a dataset summary", {"ckpt", "dataset"}, cmd_inspect},
  };

  CLI::App app{"Cross-domain graph pretraining with coordinator nodes"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  struct Bound {
    CLI::App* app;
    std::string config_path;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
  };
  std::vector<std::unique_ptr<Bound>> bound;
  for (const auto& cmd : commands) {
    auto b = std::make_unique<Bound>();
    b->app = app.add_subcommand(cmd.name, cmd.help);
    b->app->add_option("--config", b->config_path, "flat key=value config file; flags override it");
    for (const auto& key : cmd.keys) {
      const ConfigKey& info = key_info(key);
      b->values[key] = info.default_value;
      b->options[key] = b->app->add_option("--" + flag_name(key), b->values[key], info.help)
                            ->default_str(info.default_value.empty() ? "\"\"" : info.default_value);
    }
    bound.push_back(std::move(b));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: InvalidArgument: " << e.what() << "\n";
    return 2;
  }

  for (std::size_t i = 0; i < commands.size(); ++i) {
    Bound& b = *bound[i];
    if (!b.app->parsed()) continue;
    try {
      ConfigMap cfg = default_config();
      if (!b.config_path.empty()) {
        for (auto& [k, v] : load_config_file(b.config_path)) cfg[k] = v;
      }
      for (const auto& [key, opt] : b.options)
        if (opt->count() > 0) cfg[key] = b.values[key];
      const ExperimentConfig resolved = resolve_config(cfg);
      commands[i].run(resolved, cfg);
      return 0;
    } catch (const Error& e) {
      std::cerr << "error: " << error_code_name(e.code()) << ": " << e.what() << "\n";
      return exit_code_for(e.code());
    } catch (const fs::filesystem_error& e) {
      std::cerr << "error: IoError: " << e.what() << "\n";
      return 1;
    } catch (const std::exception& e) {
      std::cerr << "error: Internal: " << e.what() << "\n";
      return 1;
    }
  }
  return 2;
}
