#include "gcope/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <sstream>
#include <thread>

#include "gcope/error.hpp"

namespace gcope {

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::Supervised: return "supervised";
    case Scheme::IsolatedPretrain: return "isolated_pretrain";
    case Scheme::Gcope: return "gcope";
  }
  return "gcope";
}

std::string to_string(AblationKind k) {
  switch (k) {
    case AblationKind::InterEdges: return "inter_edges";
    case AblationKind::LambdaSweep: return "lambda_sweep";
    case AblationKind::CoordinatorCount: return "coordinator_count";
  }
  return "inter_edges";
}

AblationKind parse_ablation_kind(const std::string& s) {
  if (s == "inter_edges") return AblationKind::InterEdges;
  if (s == "lambda_sweep") return AblationKind::LambdaSweep;
  if (s == "coordinator_count") return AblationKind::CoordinatorCount;
  fail(ErrorCode::InvalidArgument, "unknown ablation '" + s + "' (expected inter_edges|lambda_sweep|coordinator_count)");
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

namespace {

MetricStats stats_of(const std::vector<MetricReport>& reps, double MetricReport::*field) {
  MetricStats s;
  const double n = static_cast<double>(reps.size());
  for (const auto& r : reps) s.mean += r.*field;
  s.mean /= n;
  if (reps.size() > 1) {
    double ss = 0.0;
    for (const auto& r : reps) ss += (r.*field - s.mean) * (r.*field - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

}  // namespace

RunSummary summarize(Scheme scheme, TransferMode mode, std::string label, std::vector<std::uint64_t> seeds,
                     std::vector<MetricReport> repeats) {
  if (repeats.empty()) fail(ErrorCode::InvalidArgument, "a summary needs at least one repeat");
  RunSummary s;
  s.scheme = scheme;
  s.mode = mode;
  s.label = std::move(label);
  s.seeds = std::move(seeds);
  s.repeats = std::move(repeats);
  s.acc = stats_of(s.repeats, &MetricReport::acc);
  s.auc = stats_of(s.repeats, &MetricReport::auc);
  s.f1 = stats_of(s.repeats, &MetricReport::f1);
  return s;
}

std::vector<std::uint64_t> repeat_seeds(std::uint64_t seed, int repeats) {
  std::vector<std::uint64_t> out;
  for (int r = 0; r < repeats; ++r) out.push_back(derive_seed(seed, {100, static_cast<std::uint64_t>(r)}));
  return out;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("GCOPE_THREADS")) {
    int v = 0;
    const std::string_view s(env);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) {
      fail(ErrorCode::InvalidArgument, "GCOPE_THREADS must be a non-negative integer, got '" + std::string(s) + "'");
    }
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  const int workers = std::clamp(threads, 1, count);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace {

void check_spec(const ExperimentSpec& spec) {
  if (!spec.target) fail(ErrorCode::InvalidArgument, "experiment has no target graph");
  if (spec.repeats < 1) fail(ErrorCode::InvalidArgument, "repeats must be >= 1");
  spec.proj.validate();
  spec.transfer.validate();
}

EncoderConfig encoder_for(const ExperimentSpec& spec) {
  EncoderConfig enc = spec.encoder;
  enc.input_dim = spec.proj.proj_dim;
  return enc;
}

}  // namespace

RunSummary run_supervised(const ExperimentSpec& spec) {
  check_spec(spec);
  const Matrix features = svd_project(to_matrix(spec.target->features), spec.proj).matrix;
  const auto seeds = repeat_seeds(spec.seed, spec.repeats);
  std::vector<MetricReport> reports(seeds.size());
  parallel_for(spec.repeats, resolve_threads(spec.threads), [&](int r) {
    const FewShotTask task = build_fewshot_task(spec.target, spec.shots, spec.hops, seeds[r]);
    Rng init(derive_seed(seeds[r], {1}));
    TransferConfig tc = spec.transfer;
    tc.mode = TransferMode::Finetune;
    TrainedModel m = make_trained_model(make_encoder(encoder_for(spec), init), task, features, tc);
    train_model(m, task, tc);
    reports[r] = evaluate_model(m, task, Split::Test);
  });
  return summarize(Scheme::Supervised, TransferMode::Finetune, "supervised", seeds, std::move(reports));
}

RunSummary run_transfer_repeats(const ExperimentSpec& spec, const Checkpoint& ckpt, Scheme scheme,
                                std::string label) {
  check_spec(spec);
  const auto seeds = repeat_seeds(spec.seed, spec.repeats);
  std::vector<MetricReport> reports(seeds.size());
  parallel_for(spec.repeats, resolve_threads(spec.threads), [&](int r) {
    const FewShotTask task = build_fewshot_task(spec.target, spec.shots, spec.hops, seeds[r]);
    TrainedModel m = transfer(ckpt, task, spec.proj, spec.transfer);
    reports[r] = evaluate_model(m, task, Split::Test);
  });
  return summarize(scheme, spec.transfer.mode, std::move(label), seeds, std::move(reports));
}

namespace {

RunSummary pretrain_then_transfer(const ExperimentSpec& spec, const CoordinatorConfig& coords, Scheme scheme,
                                  const std::string& label) {
  check_spec(spec);
  const PretrainResult pre = pretrain(spec.sources, spec.proj, coords, encoder_for(spec), spec.pretrain);
  RunSummary s = run_transfer_repeats(spec, pre.checkpoint, scheme, label);
  s.pretrain_history = pre.history;
  s.joint_nodes = pre.joint.num_nodes();
  s.joint_entries = pre.joint.adjacency.nnz();
  return s;
}

}  // namespace

RunSummary run_isolated_pretrain(const ExperimentSpec& spec) {
  CoordinatorConfig coords = spec.coords;
  coords.per_dataset = 0;
  return pretrain_then_transfer(spec, coords, Scheme::IsolatedPretrain, "isolated_pretrain");
}

RunSummary run_gcope(const ExperimentSpec& spec) {
  return pretrain_then_transfer(spec, spec.coords, Scheme::Gcope, "gcope");
}

std::vector<AblationRow> run_ablation(AblationKind kind, const std::vector<std::string>& grid,
                                      const ExperimentSpec& spec) {
  if (grid.empty()) fail(ErrorCode::InvalidArgument, "ablation grid is empty");
  std::vector<ExperimentSpec> points;
  for (const auto& value : grid) {
    ExperimentSpec p = spec;
    switch (kind) {
      case AblationKind::InterEdges:
        p.coords.inter_mode = parse_inter_mode(value);
        break;
      case AblationKind::LambdaSweep: {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
        if (ec != std::errc() || ptr != value.data() + value.size() || !(v >= 0.0)) {
          fail(ErrorCode::InvalidArgument, "lambda grid value '" + value + "' is not a non-negative number");
        }
        p.pretrain.lambda = v;
        break;
      }
      case AblationKind::CoordinatorCount: {
        int v = 0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
        if (ec != std::errc() || ptr != value.data() + value.size() || v < 1) {
          fail(ErrorCode::InvalidArgument, "coordinator count '" + value + "' is not a positive integer");
        }
        p.coords.per_dataset = v;
        break;
      }
    }
    points.push_back(std::move(p));
  }
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    AblationRow row;
    row.factor = to_string(kind);
    row.value = grid[i];
    row.summary = run_gcope(points[i]);
    row.summary.label = row.factor + "=" + row.value;
    rows.push_back(std::move(row));
  }
  return rows;
}

Improvement improvement_pct(const RunSummary& gcope, const std::vector<RunSummary>& baselines) {
  if (baselines.empty()) fail(ErrorCode::ShapeMismatch, "improvement needs at least one baseline");
  Improvement base;
  for (const auto& b : baselines) {
    base.acc += b.acc.mean;
    base.auc += b.auc.mean;
    base.f1 += b.f1.mean;
  }
  const double n = static_cast<double>(baselines.size());
  return {(gcope.acc.mean / (base.acc / n) - 1.0) * 100.0, (gcope.auc.mean / (base.auc / n) - 1.0) * 100.0,
          (gcope.f1.mean / (base.f1 / n) - 1.0) * 100.0};
}

std::vector<ScalingRow> runtime_scaling_probe(const std::vector<Index>& sizes, const ScalingProbeConfig& cfg) {
  if (sizes.empty()) fail(ErrorCode::InvalidArgument, "scaling probe needs at least one size");
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    if (sizes[i] <= sizes[i - 1]) fail(ErrorCode::InvalidArgument, "scaling probe sizes must be increasing");
  }
  if (cfg.datasets < 1 || cfg.timed_epochs < 1) fail(ErrorCode::InvalidArgument, "bad scaling probe config");
  std::vector<ScalingRow> rows;
  for (Index n : sizes) {
    if (n < 2 * cfg.datasets * 3) fail(ErrorCode::InvalidArgument, "scaling probe size too small for its datasets");
    std::vector<GraphDataset> graphs;
    for (Index m = 0; m < cfg.datasets; ++m) {
      const Index share = n / cfg.datasets + (m < n % cfg.datasets ? 1 : 0);
      const double h = cfg.datasets == 1 ? 0.5 : 0.9 - 0.8 * static_cast<double>(m) / static_cast<double>(cfg.datasets - 1);
      graphs.push_back(synth_dataset(share, 3, cfg.feature_dim, h, derive_seed(cfg.seed, {static_cast<std::uint64_t>(n),
                                                                                   static_cast<std::uint64_t>(m)}),
                                     "probe" + std::to_string(m)));
    }
    ProjectionConfig proj;
    proj.proj_dim = cfg.proj_dim;
    CoordinatorConfig coords;
    coords.per_dataset = cfg.coordinators;
    EncoderConfig enc;
    enc.kind = cfg.encoder;
    enc.input_dim = cfg.proj_dim;
    PretrainConfig pc;
    pc.seed = cfg.seed;
    PretrainSession session(graphs, proj, coords, enc, pc);
    session.run_epoch();
    std::vector<double> times;
    for (int e = 0; e < cfg.timed_epochs; ++e) {
      const auto t0 = std::chrono::steady_clock::now();
      session.run_epoch();
      times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(times.begin(), times.end());
    rows.push_back({n, cfg.datasets, times[times.size() / 2]});
  }
  return rows;
}

void write_repeats_csv(std::ostream& out, const std::vector<RunSummary>& runs) {
  out << "scheme,mode,label,repeat,seed,acc,auc,f1\n";
  for (const auto& s : runs) {
    for (std::size_t r = 0; r < s.repeats.size(); ++r) {
      out << to_string(s.scheme) << ',' << to_string(s.mode) << ',' << s.label << ',' << r << ',' << s.seeds[r] << ','
          << format_number(s.repeats[r].acc) << ',' << format_number(s.repeats[r].auc) << ','
          << format_number(s.repeats[r].f1) << '\n';
    }
  }
}

void write_summary_csv(std::ostream& out, const std::vector<RunSummary>& runs) {
  out << "scheme,mode,label,repeats,acc_mean,acc_std,auc_mean,auc_std,f1_mean,f1_std\n";
  for (const auto& s : runs) {
    out << to_string(s.scheme) << ',' << to_string(s.mode) << ',' << s.label << ',' << s.repeats.size() << ','
        << format_number(s.acc.mean) << ',' << format_number(s.acc.std) << ',' << format_number(s.auc.mean) << ','
        << format_number(s.auc.std) << ',' << format_number(s.f1.mean) << ',' << format_number(s.f1.std) << '\n';
  }
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "factor,value,joint_nodes,joint_entries,acc_mean,acc_std,auc_mean,auc_std,f1_mean,f1_std\n";
  for (const auto& r : rows) {
    const auto& s = r.summary;
    out << r.factor << ',' << r.value << ',' << s.joint_nodes << ',' << s.joint_entries << ','
        << format_number(s.acc.mean) << ',' << format_number(s.acc.std) << ',' << format_number(s.auc.mean) << ','
        << format_number(s.auc.std) << ',' << format_number(s.f1.mean) << ',' << format_number(s.f1.std) << '\n';
  }
}

void write_loss_csv(std::ostream& out, const std::vector<LossReport>& history) {
  out << "epoch,contrastive,reconstruction,total\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << format_number(r.contrastive) << ',' << format_number(r.reconstruction) << ','
        << format_number(r.total) << '\n';
  }
}

std::string markdown_report(const std::vector<RunSummary>& runs) {
  auto cell = [](const MetricStats& m) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f±%.4f", m.mean, m.std);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "std: sample standard deviation (n-1) over repeats\n\n";
  out << "| Scheme | Mode | Acc | AUC | F1 |\n|---|---|---|---|---|\n";
  for (const auto& s : runs) {
    out << "| " << s.label << " | " << to_string(s.mode) << " | " << cell(s.acc) << " | " << cell(s.auc) << " | "
        << cell(s.f1) << " |\n";
  }
  const RunSummary* gcope = nullptr;
  std::vector<RunSummary> rest;
  for (const auto& s : runs)
    if (s.scheme == Scheme::Gcope) gcope = &s;
  for (const auto& s : runs)
    if (&s != gcope) rest.push_back(s);
  if (gcope != nullptr && !rest.empty()) {
    const Improvement imp = improvement_pct(*gcope, rest);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "| IMP (%%) | ratio of means | %+.2f | %+.2f | %+.2f |\n", imp.acc, imp.auc, imp.f1);
    out << buf;
    out << "\nIMP: (gcope mean / mean of the other rows' means - 1) * 100.\n";
  }
  return out.str();
}

}  // namespace gcope
