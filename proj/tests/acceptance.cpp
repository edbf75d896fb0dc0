// End-to-end acceptance checks. Prints one PASS/FAIL (or SKIP) line per
// criterion and exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "gcope/checkpoint.hpp"
#include "gcope/evalkit.hpp"
#include "gcope/pretrain.hpp"
#include "gcope/transfer.hpp"
#include "gradcheck.hpp"
#include "helpers.hpp"

using namespace gcope;
using namespace fixtures;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  bool skipped = false;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

// ---------------------------------------------------------------------------

void joint_adjacency(Outcome& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  long cases = 0, mismatches = 0;
  for (int m = 1; m <= 4; ++m) {
    std::vector<Index> sizes(static_cast<std::size_t>(m), 1);
    // Every size vector in {1..5}^m.
    while (true) {
      const Built b = make_sources(sizes, 2, rng);
      for (int c = 1; c <= 3; ++c)
        for (bool f : {true, false})
          for (bool loops : {true, false}) {
            const auto coords = coords_for(m, 2, c, f ? full() : none(), loops);
            const auto jg = build_joint_graph(b.graphs, b.projected, coords);
            if (testutil::csr_to_dense(jg.adjacency) != oracle::dense_joint_adjacency(spec_of(b, c, f, loops)))
              ++mismatches;
            ++cases;
          }
      std::size_t i = 0;
      while (i < sizes.size() && sizes[i] == 5) sizes[i++] = 1;
      if (i == sizes.size()) break;
      ++sizes[i];
    }
  }
  const double secs = seconds_since(t0);
  o.detail << cases << " graphs, " << mismatches << " mismatches, " << secs << " s";
  o.require(mismatches == 0, "mismatches");
  o.require(secs < 10.0, "time");
}

void svd_optimality(Outcome& o) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> dim(1, 12);
  double worst = 0.0;
  bool bit_exact = true;
  const int cases = 250;
  for (int k = 0; k < cases; ++k) {
    const Index n = dim(rng), d = dim(rng);
    const Matrix x = testutil::random_matrix(n, d, rng);
    ProjectionConfig cfg;
    cfg.proj_dim = dim(rng);
    const auto a = svd_project(x, cfg);
    const auto b = svd_project(x, cfg);
    bit_exact = bit_exact && a.matrix.size() == b.matrix.size() &&
                std::memcmp(a.matrix.data(), b.matrix.data(), sizeof(double) * a.matrix.size()) == 0;
    const std::size_t r = static_cast<std::size_t>(std::min<Index>({cfg.proj_dim, n, d}));
    worst = std::max(worst, std::abs(truncation_error(x, a) - oracle::eckart_young_error(testutil::to_dense(x), r)));
  }
  o.detail << cases << " matrices, max |err - oracle| " << worst << ", bit-exact " << (bit_exact ? "yes" : "no");
  o.require(worst < 1e-6, "tolerance");
  o.require(bit_exact, "determinism");
}

void gradient_suite(Outcome& o) {
  const auto t0 = Clock::now();
  const double h = 1e-5, floor = 1e-6, kink_limit = 1e-3;
  const int want = 50;
  auto sweep = [&](const std::string& name, const std::function<gradcheck::Outcome(std::uint64_t)>& check) {
    int checked = 0, skipped = 0;
    long coords = 0;
    double worst = 0.0;
    std::string worst_param;
    for (std::uint64_t seed = 1; checked < want && seed < 1000; ++seed) {
      const auto r = check(seed);
      if (r.kink < kink_limit) {
        ++skipped;
        continue;
      }
      ++checked;
      coords += r.coords;
      if (r.max_rel > worst) {
        worst = r.max_rel;
        worst_param = r.worst_param;
      }
    }
    o.detail << " " << name << ": " << checked << " seeds (" << skipped << " near kinks), " << coords
             << " coords, max rel " << worst << ";";
    o.require(checked >= want, name + " seed count");
    o.require(worst < 1e-4, name + " " + worst_param);
  };
  for (auto kind : {EncoderKind::Gcn, EncoderKind::Fagcn})
    for (auto obj : {Objective::GraphCl, Objective::SimGrace})
      sweep(to_string(obj) + "/" + to_string(kind),
            [&](std::uint64_t s) { return gradcheck::pretrain_loss_check(kind, obj, s, h, floor); });
  sweep("prompt", [&](std::uint64_t s) { return gradcheck::prompt_loss_check(s, h, floor); });
  const double secs = seconds_since(t0);
  o.detail << " " << secs << " s";
  o.require(secs < 120.0, "time");
}

double nt_xent_value(const Matrix& a, const Matrix& p, double tau) {
  Tape t;
  return nt_xent(t.constant(a), t.constant(p), tau).scalar();
}

void loss_oracles(Outcome& o) {
  Matrix e(2, 2);
  e << 1, 0, 0, 1;
  const double b2 = nt_xent_value(e, e, 1.0);
  o.require(std::abs(b2 - 0.31326) < 1e-5, "B=2 value");

  std::mt19937_64 rng(7);
  double worst_xent = 0.0;
  for (int k = 0; k < 200; ++k) {
    const Index b = 2 + k % 9, d = 1 + k % 6;
    const Matrix a = testutil::random_matrix(b, d, rng), p = testutil::random_matrix(b, d, rng);
    const double tau = 0.1 + 0.1 * (k % 7);
    worst_xent = std::max(worst_xent, std::abs(nt_xent_value(a, p, tau) -
                                               oracle::nt_xent(testutil::to_dense(a), testutil::to_dense(p), tau)));
  }
  o.require(worst_xent < 1e-6, "nt_xent brute force");

  bool log_b = true;
  for (Index b : {2, 4, 8, 16, 32}) {
    const Matrix z = Matrix::Constant(b, 5, 0.3);
    log_b = log_b && nt_xent_value(z, z, 0.5) == std::log(static_cast<double>(b));
  }
  o.require(log_b, "all-equal gives log B");

  double worst_mse = 0.0;
  for (int k = 0; k < 50; ++k) {
    Rng init(static_cast<std::uint64_t>(k));
    const Index in = 1 + k % 5, hid = 2 + k % 4, out = 1 + k % 6, rows = 1 + k % 9;
    MlpDecoder dec(in, hid, out, init);
    const Matrix emb = testutil::random_matrix(rows, in, rng), target = testutil::random_matrix(rows, out, rng);
    Tape t;
    const double got = reconstruction_loss(t, dec, t.constant(emb), target).scalar();
    // Two-layer MLP by loops.
    auto ps = dec.params();
    double sum = 0.0;
    for (Index r = 0; r < rows; ++r) {
      std::vector<double> hidden(static_cast<std::size_t>(hid));
      for (Index j = 0; j < hid; ++j) {
        double acc = ps[1]->value(0, j);
        for (Index i = 0; i < in; ++i) acc += emb(r, i) * ps[0]->value(i, j);
        hidden[j] = std::max(0.0, acc);
      }
      for (Index j = 0; j < out; ++j) {
        double acc = ps[3]->value(0, j);
        for (Index i = 0; i < hid; ++i) acc += hidden[i] * ps[2]->value(i, j);
        sum += (acc - target(r, j)) * (acc - target(r, j));
      }
    }
    worst_mse = std::max(worst_mse, std::abs(got - sum / static_cast<double>(rows * out)));
  }
  o.require(worst_mse < 1e-7, "reconstruction loops");
  o.detail << "B=2 " << b2 << ", nt_xent max err " << worst_xent << ", mse max err " << worst_mse;
}

void connectivity(Outcome& o) {
  std::mt19937_64 rng(31);
  long samples = 0, foreign_none = 0, reach_full = 0, full_total = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Built b = make_sources({8, 7, 6}, 3, rng, 0.25);
    for (bool f : {false, true}) {
      const auto jg = build_joint_graph(b.graphs, b.projected, coords_for(3, 3, 1, f ? full() : none(), true));
      BatchOptions opts;
      opts.batch_size = 30;
      opts.hops = 2;
      opts.max_nodes = 0;
      for (const auto& s : sample_joint_batch(jg, opts, static_cast<std::uint64_t>(trial))) {
        const Index home = jg.origin[s.nodes[s.center]];
        bool foreign_coord = false;
        for (Index v : s.nodes) {
          if (jg.is_coordinator(v)) {
            if (jg.origin[v] != home) foreign_coord = true;
          } else if (jg.origin[v] != home && !f) {
            ++foreign_none;
          }
        }
        ++samples;
        if (f) {
          ++full_total;
          // Hop 1 is the own coordinator, hop 2 every other coordinator.
          if (foreign_coord) ++reach_full;
        } else if (foreign_coord) {
          ++foreign_none;
        }
      }
      if (f) {
        // Ordinary nodes of other datasets are one hop further out.
        BallOptions ball;
        ball.hops = 3;
        const Index center = 0;
        bool saw = false;
        for (Index v : bfs_ball(jg.adjacency, center, ball))
          if (!jg.is_coordinator(v) && jg.origin[v] != jg.origin[center]) saw = true;
        o.require(saw, "full mode reaches foreign ordinary nodes at hop 3");
      }
    }
  }
  o.detail << samples << " samples; foreign nodes under none: " << foreign_none << "; full-mode samples reaching a "
           << "foreign coordinator at hop 2: " << reach_full << "/" << full_total;
  o.require(foreign_none == 0, "none mode isolation");
  o.require(reach_full == full_total, "full mode bridge");
}

struct SmallPretrain {
  std::vector<GraphDataset> sources;
  ProjectionConfig proj;
  CoordinatorConfig coords;
  EncoderConfig enc;
  PretrainConfig cfg;
};

SmallPretrain small_pretrain() {
  SmallPretrain s;
  s.sources = {synth_dataset(120, 3, 16, 0.9, 1, "homo"), synth_dataset(120, 3, 16, 0.1, 2, "hetero")};
  s.proj.proj_dim = 16;
  s.enc.input_dim = 16;
  s.enc.hidden_dim = 32;
  s.cfg.decoder_hidden = 32;
  s.cfg.batch_size = 64;
  s.cfg.seed = 4;
  return s;
}

void lambda_bookkeeping(Outcome& o) {
  auto s = small_pretrain();
  s.cfg.epochs = 3;
  s.cfg.lambda = 0.0;
  const auto zero = pretrain(s.sources, s.proj, s.coords, s.enc, s.cfg);
  bool exact = true;
  for (const auto& e : zero.history) exact = exact && e.total == e.contrastive;
  o.require(exact, "lambda=0 total == contrastive");

  s.cfg.epochs = 1;
  std::vector<double> contrib;
  for (double lambda : {0.0, 0.2, 1.0}) {
    s.cfg.lambda = lambda;
    const auto r = pretrain(s.sources, s.proj, s.coords, s.enc, s.cfg);
    contrib.push_back(r.history.front().total - r.history.front().contrastive);
  }
  o.detail << "epoch-1 reconstruction contributions " << contrib[0] << " < " << contrib[1] << " < " << contrib[2];
  o.require(contrib[0] == 0.0 && contrib[0] < contrib[1] && contrib[1] < contrib[2], "monotone sweep");
}

ExperimentSpec smoke_spec() {
  ExperimentSpec spec;
  spec.sources = {synth_dataset(300, 3, 32, 0.9, 11, "homo"), synth_dataset(300, 3, 32, 0.1, 12, "hetero")};
  spec.target = std::make_shared<const GraphDataset>(synth_dataset(300, 3, 32, 0.85, 13, "target"));
  spec.pretrain.epochs = 50;
  spec.pretrain.seed = 1;
  spec.shots = 1;
  spec.repeats = 5;
  spec.seed = 5;
  return spec;
}

void end_to_end(Outcome& o) {
  const auto t0 = Clock::now();
  const ExperimentSpec spec = smoke_spec();
  const RunSummary gcope = run_gcope(spec);
  const RunSummary sup = run_supervised(spec);
  const double secs = seconds_since(t0);
  const auto& h = gcope.pretrain_history;
  double early_min = 1e300, late_max = -1e300;
  for (int e = 0; e < 5 && e < static_cast<int>(h.size()); ++e) early_min = std::min(early_min, h[e].total);
  for (std::size_t e = 45; e < h.size() && e < 50; ++e) late_max = std::max(late_max, h[e].total);
  o.detail << "gcope acc " << gcope.acc.mean << "±" << gcope.acc.std << " vs supervised " << sup.acc.mean << "±"
           << sup.acc.std << "; loss epochs 1-5 min " << early_min << ", 46-50 max " << late_max << "; " << secs
           << " s";
  o.require(h.size() == 50, "50 epochs recorded");
  o.require(late_max < early_min, "loss decrease");
  o.require(gcope.acc.mean >= sup.acc.mean - 0.05, "non-inferiority");
  o.require(secs < 300.0, "time");
}

std::vector<std::byte> param_bytes(const std::vector<Param*>& ps) {
  std::vector<std::byte> out;
  for (const Param* p : ps) {
    const auto* b = reinterpret_cast<const std::byte*>(p->value.data());
    out.insert(out.end(), b, b + p->value.size() * sizeof(double));
  }
  return out;
}

void prompt_contract(Outcome& o) {
  auto s = small_pretrain();
  s.cfg.epochs = 2;
  const Checkpoint ckpt = pretrain(s.sources, s.proj, s.coords, s.enc, s.cfg).checkpoint;
  auto target = std::make_shared<const GraphDataset>(synth_dataset(100, 3, 12, 0.8, 9, "target"));
  const FewShotTask task = build_fewshot_task(target, 1, 2, 3);

  TransferConfig cfg;
  cfg.mode = TransferMode::Prompt;
  cfg.lr = 1e-2;
  cfg.epochs = 30;
  TrainedModel trained = prompt_transfer(ckpt, task, s.proj, cfg);
  o.require(param_bytes(trained.encoder->params()) == param_bytes(load_encoder(ckpt)->params()), "encoder bytes");
  o.require(!trained.prompt->tokens().value.isZero(0.0), "tokens trained");

  // Zero tokens: the prompted forward equals the plain frozen forward.
  TrainedModel prompted = make_trained_model(load_encoder(ckpt), task, trained.features, cfg);
  TransferConfig plain_cfg = cfg;
  plain_cfg.mode = TransferMode::Finetune;
  TrainedModel plain = make_trained_model(load_encoder(ckpt), task, trained.features, plain_cfg);
  std::mt19937_64 rng(1);
  auto hp = prompted.head.params(), hb = plain.head.params();
  for (std::size_t i = 0; i < hp.size(); ++i) {
    hp[i]->value = testutil::random_matrix(hp[i]->value.rows(), hp[i]->value.cols(), rng);
    hb[i]->value = hp[i]->value;
  }
  Tape t1, t2;
  const Matrix a = forward_logits(t1, prompted, task, task.test_ids).value();
  const Matrix b = forward_logits(t2, plain, task, task.test_ids).value();
  o.require(a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0,
            "zero-token forward");

  auto five = std::make_shared<const GraphDataset>(synth_dataset(60, 5, 8, 0.8, 1));
  const FewShotTask t5 = build_fewshot_task(five, 1, 2, 1);
  EncoderConfig ec;
  ec.input_dim = 100;
  ec.hidden_dim = 100;
  Rng init(1);
  TransferConfig pc;
  pc.mode = TransferMode::Prompt;
  pc.prompt_tokens = 10;
  TrainedModel counted = make_trained_model(make_encoder(ec, init), t5, Matrix::Zero(60, 100), pc);
  o.detail << "trainable parameters " << counted.trainable_count();
  o.require(counted.trainable_count() == 1505, "parameter count");
}

void determinism(Outcome& o) {
  auto s = small_pretrain();
  s.cfg.epochs = 3;
  std::string bytes[2], csvs[2];
  for (int run = 0; run < 2; ++run) {
    const auto r = pretrain(s.sources, s.proj, s.coords, s.enc, s.cfg);
    bytes[run] = serialize(r.checkpoint);
    ExperimentSpec spec;
    spec.target = std::make_shared<const GraphDataset>(synth_dataset(100, 3, 12, 0.8, 9, "target"));
    spec.proj = s.proj;
    spec.transfer.epochs = 20;
    spec.repeats = 3;
    spec.seed = 2;
    std::ostringstream out;
    write_repeats_csv(out, {run_transfer_repeats(spec, r.checkpoint, Scheme::Gcope, "gcope")});
    csvs[run] = out.str();
  }
  o.detail << "checkpoint " << bytes[0].size() << " bytes, metrics csv " << csvs[0].size() << " bytes";
  o.require(bytes[0] == bytes[1], "checkpoint bytes");
  o.require(csvs[0] == csvs[1], "metric csv");
}

void scaling(Outcome& o) {
  ScalingProbeConfig cfg;
  cfg.datasets = 2;
  const auto rows = runtime_scaling_probe({1000, 2000}, cfg);
  const double size_ratio = rows[1].seconds_per_epoch / rows[0].seconds_per_epoch;
  ScalingProbeConfig one = cfg, four = cfg;
  one.datasets = 1;
  four.datasets = 4;
  const double t1 = runtime_scaling_probe({1000}, one)[0].seconds_per_epoch;
  const double t4 = runtime_scaling_probe({1000}, four)[0].seconds_per_epoch;
  const double m_ratio = std::max(t1, t4) / std::min(t1, t4);
  o.detail << "N=1000 " << rows[0].seconds_per_epoch << " s, N=2000 " << rows[1].seconds_per_epoch << " s (x"
           << size_ratio << "); M=1 " << t1 << " s, M=4 " << t4 << " s (x" << m_ratio << ")";
  o.require(size_ratio < 3.0, "size ratio");
  o.require(m_ratio <= 1.5, "dataset-count ratio");
}

void real_datasets(Outcome& o) {
  struct Expect {
    const char* env;
    Index nodes, edges, features;
    int labels;
    double h;
  };
  const Expect expects[] = {{"GCOPE_CORA_DIR", 2708, 10556, 1433, 7, 0.810},
                            {"GCOPE_CITESEER_DIR", 3327, 9104, 3703, 6, 0.736}};
  int found = 0;
  for (const auto& e : expects) {
    const char* dir = std::getenv(e.env);
    if (dir == nullptr || *dir == '\0') continue;
    ++found;
    const DatasetMeta m = describe(load_dataset(dir));
    o.detail << e.env << ": " << m.node_count << " nodes, " << m.edge_count << " edges, " << m.feature_dim
             << " features, " << m.label_count << " labels, h " << m.homophily << "; ";
    o.require(m.node_count == e.nodes && m.edge_count == e.edges && m.feature_dim == e.features &&
                  m.label_count == e.labels,
              std::string(e.env) + " counts");
    o.require(std::abs(m.homophily - e.h) <= 0.05, std::string(e.env) + " homophily");
  }
  if (found == 0) {
    o.skipped = true;
    o.detail << "GCOPE_CORA_DIR / GCOPE_CITESEER_DIR not set";
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"joint adjacency matches dense oracle", joint_adjacency},
      {"truncated SVD optimality and determinism", svd_optimality},
      {"gradient suite vs finite differences", gradient_suite},
      {"loss oracles", loss_oracles},
      {"connectivity semantics", connectivity},
      {"lambda bookkeeping", lambda_bookkeeping},
      {"end-to-end smoke with transfer signal", end_to_end},
      {"prompt contract", prompt_contract},
      {"determinism", determinism},
      {"runtime scaling", scaling},
      {"real dataset statistics", real_datasets},
  };
  // Optional list of criterion numbers to run.
  std::vector<bool> selected(criteria.size(), argc <= 1);
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k >= 1 && k <= static_cast<int>(criteria.size())) selected[k - 1] = true;
  }
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const char* verdict = o.skipped ? "SKIP" : (o.pass ? "PASS" : "FAIL");
    if (!o.pass) ++failed;
    std::cout << verdict << " " << (i + 1) << " " << criteria[i].first << " (" << seconds_since(t0)
              << " s): " << o.detail.str() << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
