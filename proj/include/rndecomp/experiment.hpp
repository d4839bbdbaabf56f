#pragma once

// Experiment orchestration: config -> operator, corpus, datasets -> trained
// estimators -> metrics.csv, reconstructions and run metadata.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rndecomp/config.hpp"
#include "rndecomp/metrics.hpp"

namespace rndecomp {

inline const char* kVersion = "0.1.0";

/// Mechanisms of the projector ablation, in CSV order:
/// no projectors, P_n only, P_r only, both.
inline const std::vector<Mechanism>& ablation_mechanisms() {
  static const std::vector<Mechanism> m{Mechanism::residual, Mechanism::nullspace,
                                        Mechanism::ddn_range, Mechanism::ddn_cascade};
  return m;
}

/// Independent sub-seed for one purpose of a run.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + stream + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline LinearOperator operator_from_config(const ExperimentConfig& c) {
  OperatorSpec spec;
  spec.kind = c.op;
  spec.domain = {c.rows, c.cols};
  spec.factor = c.factor;
  const std::size_t domain = c.rows * c.cols;
  std::mt19937_64 rng(derive_seed(c.seed, 1));
  auto choose = [&](std::vector<std::size_t> pool, double fraction) {
    const auto keep = static_cast<std::size_t>(
        std::max(1.0, std::round(fraction * static_cast<double>(pool.size()))));
    for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng() % i]);
    pool.resize(std::min(keep, pool.size()));
    std::sort(pool.begin(), pool.end());
    return pool;
  };
  switch (c.op) {
    case OperatorKind::inpainting: {
      std::vector<std::size_t> all(domain);
      for (std::size_t i = 0; i < domain; ++i) all[i] = i;
      spec.mask = choose(std::move(all), c.mask_keep);
      break;
    }
    case OperatorKind::subsampled_dft: {
      // One representative per conjugate pair; self-conjugate bins excluded.
      std::vector<std::size_t> admissible;
      for (std::size_t f = 0; f < domain; ++f) {
        if (f < detail::conjugate_frequency(f, c.rows, c.cols)) admissible.push_back(f);
      }
      spec.frequencies = choose(std::move(admissible), c.freq_keep);
      break;
    }
    case OperatorKind::gaussian:
      spec.gauss_rows = c.gauss_d ? c.gauss_d : domain / 2;
      spec.seed = derive_seed(c.seed, 2);
      break;
    case OperatorKind::block_downsample:
      break;
  }
  return build_operator(spec);
}

struct ExperimentData {
  LinearOperator op;
  Dataset train_pool;  // largest n_train; smaller sizes use a prefix
  Dataset test;
};

inline ExperimentData prepare_data(const ExperimentConfig& c) {
  if (c.n_test == 0) throw Error("experiment: empty test set (n_test = 0)");
  LinearOperator op = operator_from_config(c);
  const std::size_t n_train = *std::max_element(c.n_train.begin(), c.n_train.end());
  const std::size_t total = n_train + c.n_test;
  std::vector<Tensor> images =
      c.image == "piecewise"
          ? generate_piecewise_corpus(total, c.rows, c.cols, derive_seed(c.seed, 3))
          : load_pgm_corpus(c.image, total, c.rows, c.cols);
  std::vector<Tensor> train(images.begin(), images.begin() + static_cast<long>(n_train));
  std::vector<Tensor> test(images.begin() + static_cast<long>(n_train), images.end());
  ExperimentData d{op, simulate_measurements(op, train, c.sigma, derive_seed(c.seed, 4)),
                   simulate_measurements(op, test, c.sigma, derive_seed(c.seed, 5), Split::test)};
  d.train_pool.provenance = d.test.provenance = c.image;
  return d;
}

inline Dataset prefix(const Dataset& ds, std::size_t n) {
  Dataset out = ds;
  out.samples.resize(std::min(n, ds.size()));
  return out;
}

struct ResultRow {
  Mechanism mechanism;
  std::size_t n_train;
  double sigma;
  MetricsRecord metrics;
  std::vector<Tensor> previews;  // reconstructions of the first test samples
};

/// Trains and evaluates every (mechanism, n_train) pair in a fixed order.
inline std::vector<ResultRow> run_rows(const ExperimentConfig& c,
                                       const std::vector<Mechanism>& mechanisms,
                                       const ExperimentData& data) {
  std::vector<ResultRow> rows;
  for (Mechanism m : mechanisms) {
    for (std::size_t n : c.n_train) {
      const Dataset train_set = prefix(data.train_pool, n);
      Estimator est = make_estimator(m, data.op, c.seed);
      MetricsRecord metrics;
      if (m != Mechanism::pinv) {
        TrainOptions opt;
        opt.epochs = c.epochs;
        opt.batch = c.batch;
        opt.lr = c.lr;
        opt.weights = {c.lambda1, c.lambda2};
        opt.mode = c.mode;
        opt.seed = derive_seed(c.seed, 6);
        metrics.epoch_loss = train(est, train_set, opt).epoch_loss;
      }
      const auto history = std::move(metrics.epoch_loss);
      metrics = evaluate(est, data.test, train_set);
      metrics.epoch_loss = history;

      ResultRow row{m, n, c.sigma, metrics, {}};
      const Reconstructions rec = reconstruct_dataset(est, prefix(data.test, 4));
      row.previews = rec.outputs;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

/// Six significant digits, '.' separator; non-finite values as inf/nan.
inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string metrics_csv(const std::vector<ResultRow>& rows, bool with_timing) {
  std::string out = "mechanism,N_train,sigma,nmse,psnr_mean,psnr_std,ge,dc_gap,infer_ms\n";
  for (const ResultRow& r : rows) {
    const MetricsRecord& m = r.metrics;
    out += std::string(mechanism_name(r.mechanism)) + "," + std::to_string(r.n_train) + "," +
           csv_number(r.sigma) + "," + csv_number(m.nmse) + "," + csv_number(m.psnr_mean) + "," +
           csv_number(m.psnr_std) + "," + csv_number(m.ge) + "," + csv_number(m.dc_gap) + "," +
           (with_timing ? csv_number(m.infer_ms) : std::string("na")) + "\n";
  }
  return out;
}

enum class RunKind { run, ablate };

struct RunOptions {
  RunKind kind = RunKind::run;
  bool timing = false;  // write wall-clock inference time into metrics.csv
};

/// Runs a full experiment and writes its artifacts under config.out_dir.
inline std::vector<ResultRow> run_experiment(const ExperimentConfig& c, const RunOptions& ro = {}) {
  namespace fs = std::filesystem;
  const std::vector<Mechanism> mechanisms =
      ro.kind == RunKind::ablate ? ablation_mechanisms() : c.mechanisms;
  if (c.mode == TrainingMode::decoupled) {
    for (Mechanism m : mechanisms) {
      if (!is_ddn(m)) {
        throw Error(std::string("experiment: decoupled mode requires ddn mechanisms, got ") +
                    mechanism_name(m));
      }
    }
  }
  std::error_code ec;
  fs::create_directories(c.out_dir, ec);
  if (ec || !fs::is_directory(c.out_dir)) {
    throw Error("experiment: cannot create output directory " + c.out_dir);
  }
  const ExperimentData data = prepare_data(c);
  const std::vector<ResultRow> rows = run_rows(c, mechanisms, data);

  const fs::path dir(c.out_dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    out << text;
    if (!out) throw Error("experiment: cannot write " + (dir / name).string());
  };
  write("metrics.csv", metrics_csv(rows, ro.timing));

  std::string timing = "mechanism,N_train,infer_ms\n";
  std::string losses = "mechanism,N_train,epoch,loss\n";
  for (const ResultRow& r : rows) {
    const std::string key = std::string(mechanism_name(r.mechanism)) + "," + std::to_string(r.n_train);
    timing += key + "," + csv_number(r.metrics.infer_ms) + "\n";
    for (std::size_t e = 0; e < r.metrics.epoch_loss.size(); ++e) {
      losses += key + "," + std::to_string(e + 1) + "," + csv_number(r.metrics.epoch_loss[e]) + "\n";
    }
    for (std::size_t i = 0; i < r.previews.size(); ++i) {
      write_pgm((dir / (std::string(mechanism_name(r.mechanism)) + "_n" + std::to_string(r.n_train) +
                        "_test" + std::to_string(i) + ".pgm"))
                    .string(),
                to_gray(r.previews[i]));
    }
  }
  for (std::size_t i = 0; i < std::min<std::size_t>(4, data.test.size()); ++i) {
    write_pgm((dir / ("oracle_test" + std::to_string(i) + ".pgm")).string(),
              to_gray(data.test.samples[i].x));
  }
  write("timing.csv", timing);
  write("train_loss.csv", losses);

  std::ostringstream meta;
  meta << "rn-decomp " << kVersion << "\n";
  meta << "command = " << (ro.kind == RunKind::ablate ? "ablate" : "run") << "\n";
  for (const auto& [k, v] : c.entries()) meta << k << " = " << v << "\n";
  meta << "operator_detail = " << data.op.describe() << "\n";
  meta << "D = " << data.op.domain_size() << "\nd = " << data.op.codomain_size() << "\n";
  if (c.op == OperatorKind::block_downsample) {
    meta << "substitution = block-average downsampling with exact right inverse "
            "(replaces bicubic anti-aliased downsampling)\n";
  }
  meta << "substitution = F: 4-layer 3x3 CNN without batch normalization; "
          "G: 5-conv CNN with one identity skip (replaces UNet)\n";
  if (ro.kind == RunKind::ablate) {
    meta << "ablation = DDN1 residual (no projectors); DDN2 nullspace (P_n only); "
            "DDN3 ddn-range (P_r only); DDN4 ddn-cascade (P_r and P_n)\n";
  }
  write("run.meta", meta.str());
  return rows;
}

}  // namespace rndecomp
