#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

#include "rndecomp/experiment.hpp"
#include "rndecomp/invariants.hpp"

namespace {

using namespace rndecomp;
namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rndecomp_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

LinearOperator inpaint4() {
  return build_operator({.kind = OperatorKind::inpainting, .domain = {4}, .mask = {0, 2}});
}

TEST(Pgm, RoundTripIsBitExact) {
  const fs::path dir = scratch_dir("pgm");
  GrayImage img{5, 3, {}};
  for (std::size_t i = 0; i < 15; ++i) img.pixels.push_back(static_cast<std::uint8_t>(i * 17));
  write_pgm((dir / "a.pgm").string(), img);
  const GrayImage back = read_pgm((dir / "a.pgm").string());
  EXPECT_EQ(back.width, 5u);
  EXPECT_EQ(back.height, 3u);
  EXPECT_EQ(back.pixels, img.pixels);
  EXPECT_EQ(to_gray(from_gray(img)).pixels, img.pixels);
}

TEST(Pgm, AcceptsCommentsAndRejectsOtherFormats) {
  const fs::path dir = scratch_dir("pgm2");
  {
    std::ofstream out(dir / "c.pgm", std::ios::binary);
    out << "P5\n# a comment\n2 1\n255\n";
    out.put(static_cast<char>(10));
    out.put(static_cast<char>(250));
  }
  EXPECT_EQ(read_pgm((dir / "c.pgm").string()).pixels, (std::vector<std::uint8_t>{10, 250}));
  {
    std::ofstream out(dir / "p2.pgm");
    out << "P2\n2 1\n255\n1 2\n";
  }
  EXPECT_THROW(read_pgm((dir / "p2.pgm").string()), Error);
  {
    std::ofstream out(dir / "deep.pgm", std::ios::binary);
    out << "P5\n1 1\n65535\n";
    out.put(0);
    out.put(0);
  }
  EXPECT_THROW(read_pgm((dir / "deep.pgm").string()), Error);
  {
    std::ofstream out(dir / "short.pgm", std::ios::binary);
    out << "P5\n4 4\n255\n";
    out.put(0);
  }
  EXPECT_THROW(read_pgm((dir / "short.pgm").string()), Error);
  EXPECT_THROW(read_pgm((dir / "missing.pgm").string()), Error);
}

TEST(Pgm, ToGrayClampsAndRounds) {
  const GrayImage g = to_gray(Tensor(Shape{1, 4}, std::vector<double>{-0.5, 0.5, 1.5, 100.0 / 255.0}));
  EXPECT_EQ(g.pixels, (std::vector<std::uint8_t>{0, 128, 255, 100}));
}

TEST(Dataset, NoiselessMeasurements) {
  const Dataset ds = simulate_measurements(inpaint4(), {Tensor::vector({1, 2, 3, 4})}, 0.0, 1);
  EXPECT_EQ(ds.samples[0].y, Tensor::vector({1, 3}));
  EXPECT_EQ(max_abs(ds.samples[0].eps.values()), 0.0);
}

TEST(Dataset, MeasurementIsSignalPlusStoredNoise) {
  const LinearOperator op = inpaint4();
  const Tensor x = Tensor::vector({1, 2, 3, 4});
  const Tensor eps = Tensor::vector({0.1, -0.1});
  const Tensor y = op.apply(x) + eps;
  EXPECT_DOUBLE_EQ(y[0], 1.1);
  EXPECT_DOUBLE_EQ(y[1], 2.9);
  const Dataset ds = simulate_measurements(op, {x, x}, 0.3, 5);
  EXPECT_LT(ds.regeneration_error(op), 1e-12);
}

TEST(Dataset, SeededAndDeterministic) {
  const LinearOperator op = reference_operators(8, 8, 1)[1];
  const auto xs = generate_piecewise_corpus(3, 8, 8, 2);
  const Dataset a = simulate_measurements(op, xs, 0.1, 9), b = simulate_measurements(op, xs, 0.1, 9);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.samples[i].y, b.samples[i].y);
    EXPECT_EQ(a.samples[i].eps, b.samples[i].eps);
  }
  EXPECT_FALSE(a.samples[0].eps == simulate_measurements(op, xs, 0.1, 10).samples[0].eps);
  EXPECT_THROW(simulate_measurements(op, xs, -1.0, 1), Error);
}

TEST(Corpus, PiecewiseImagesInUnitRange) {
  const auto a = generate_piecewise_corpus(1, 16, 12, 4);
  const auto b = generate_piecewise_corpus(1, 16, 12, 4);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0], b[0]);
  EXPECT_EQ(a[0].shape(), (Shape{16, 12}));
  for (double v : a[0].values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_TRUE(generate_piecewise_corpus(0, 8, 8, 1).empty());
  EXPECT_THROW(generate_piecewise_corpus(1, 7, 8, 1), Error);
}

TEST(Corpus, PgmDirectoryIsRescaledAndCropped) {
  const fs::path dir = scratch_dir("corpus");
  write_pgm((dir / "flat.pgm").string(), GrayImage{10, 9, std::vector<std::uint8_t>(90, 128)});
  const auto xs = load_pgm_corpus(dir.string(), 1, 8, 8);
  ASSERT_EQ(xs.size(), 1u);
  EXPECT_EQ(xs[0].shape(), (Shape{8, 8}));
  for (double v : xs[0].values()) EXPECT_DOUBLE_EQ(v, 128.0 / 255.0);
}

TEST(Corpus, BadFilesAreListed) {
  const fs::path dir = scratch_dir("corpus_bad");
  write_pgm((dir / "small.pgm").string(), GrayImage{4, 4, std::vector<std::uint8_t>(16, 1)});
  {
    std::ofstream out(dir / "broken.pgm");
    out << "nope";
  }
  try {
    load_pgm_corpus(dir.string(), 2, 8, 8);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("small.pgm"), std::string::npos);
    EXPECT_NE(msg.find("broken.pgm"), std::string::npos);
  }
  EXPECT_THROW(load_pgm_corpus((dir / "nowhere").string(), 1, 8, 8), Error);
}

TEST(Metrics, PerfectReconstruction) {
  const Tensor x = Tensor::vector({0.1, 0.9, 0.4});
  EXPECT_EQ(nmse(x.values(), x.values()), 0.0);
  EXPECT_TRUE(std::isinf(psnr(x.values(), x.values())));
  EXPECT_EQ(csv_number(psnr(x.values(), x.values())), "inf");
}

TEST(Metrics, ConstantImagesPsnr) {
  const Tensor x(Shape{4, 4}, 0.5), a(Shape{4, 4}, 0.75);
  EXPECT_NEAR(psnr(a.values(), x.values()), 10.0 * std::log10(255.0 * 255.0 / (63.75 * 63.75)), 1e-12);
  EXPECT_NEAR(psnr(a.values(), x.values()), 12.04, 0.005);
}

TEST(Metrics, PropertyChecks) {
  EXPECT_TRUE(check_metrics().passed);
  EXPECT_EQ(generalization_error(0.2, 0.2), 0.0);
}

TEST(Metrics, IdenticalSetsHaveZeroGap) {
  const LinearOperator op = reference_operators(8, 8, 1)[1];
  const Dataset ds = simulate_measurements(op, generate_piecewise_corpus(4, 8, 8, 1), 0.05, 2);
  const Estimator est = make_estimator(Mechanism::ddn_cascade, op, 0);
  const MetricsRecord m = evaluate(est, ds, ds);
  EXPECT_EQ(m.ge, 0.0);
  EXPECT_GT(m.psnr_mean, 0.0);
  EXPECT_THROW(evaluate(est, Dataset{}, ds), Error);
}

TEST(Train, ZeroEpochsKeepsWeights) {
  const LinearOperator op = reference_operators(8, 8, 1)[1];
  const Dataset ds = simulate_measurements(op, generate_piecewise_corpus(4, 8, 8, 1), 0.05, 2);
  Estimator est = make_estimator(Mechanism::ddn_cascade, op, 0);
  const Tensor f0 = est.f->params(), g0 = est.g->params();
  TrainOptions opt;
  opt.epochs = 0;
  EXPECT_TRUE(train(est, ds, opt).epoch_loss.empty());
  EXPECT_EQ(est.f->params(), f0);
  EXPECT_EQ(est.g->params(), g0);
}

TEST(Train, RejectsInvalidRequests) {
  const LinearOperator op = reference_operators(8, 8, 1)[1];
  const Dataset ds = simulate_measurements(op, generate_piecewise_corpus(2, 8, 8, 1), 0.05, 2);
  TrainOptions opt;
  opt.epochs = 1;
  Estimator pinv = make_estimator(Mechanism::pinv, op, 0);
  EXPECT_THROW(train(pinv, ds, opt), Error);
  Estimator res = make_estimator(Mechanism::residual, op, 0);
  opt.mode = TrainingMode::decoupled;
  EXPECT_THROW(train(res, ds, opt), Error);
  opt.mode = TrainingMode::joint;
  try {
    train(res, simulate_measurements(op, {}, 0.0, 1), opt);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("empty dataset"), std::string::npos);
  }
}

TEST(Train, DivergenceNamesEpoch) {
  const LinearOperator op = reference_operators(8, 8, 1)[1];
  const Dataset ds = simulate_measurements(op, generate_piecewise_corpus(4, 8, 8, 1), 0.05, 2);
  Estimator est = make_estimator(Mechanism::residual, op, 0);
  TrainOptions opt;
  opt.epochs = 50;
  opt.lr = 1e12;
  try {
    train(est, ds, opt);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(Train, LossDecreasesAndIsDeterministic) {
  const LinearOperator op = reference_operators(8, 8, 1)[1];
  const Dataset ds = simulate_measurements(op, generate_piecewise_corpus(8, 8, 8, 3), 0.05, 4);
  TrainOptions opt;
  opt.epochs = 15;
  opt.batch = 4;
  Estimator a = make_estimator(Mechanism::ddn_cascade, op, 1);
  Estimator b = make_estimator(Mechanism::ddn_cascade, op, 1);
  const TrainReport ra = train(a, ds, opt), rb = train(b, ds, opt);
  EXPECT_EQ(ra.epoch_loss, rb.epoch_loss);
  EXPECT_EQ(a.g->params(), b.g->params());
  EXPECT_LT(ra.epoch_loss.back(), ra.epoch_loss.front());
}

TEST(Train, JointAndDecoupledReachComparableLoss) {
  const LinearOperator op = reference_operators(8, 8, 1)[1];
  const Dataset ds = simulate_measurements(op, generate_piecewise_corpus(16, 8, 8, 5), 0.05, 6);
  TrainOptions opt;
  opt.epochs = 40;
  Estimator joint = make_estimator(Mechanism::ddn_independent, op, 2);
  Estimator split = make_estimator(Mechanism::ddn_independent, op, 2);
  train(joint, ds, opt);
  opt.mode = TrainingMode::decoupled;
  train(split, ds, opt);
  const LossWeights w{opt.weights.range, 0.0};
  const double lj = ddn_loss(joint, ds.view(), w).loss;
  const double ld = ddn_loss(split, ds.view(), w).loss;
  EXPECT_LT(std::max(lj, ld), 2.0 * std::min(lj, ld)) << lj << " vs " << ld;
}

TEST(Config, ParsesAllKeys) {
  const ExperimentConfig c = parse_config_string(
      "# toy\noperator = block_downsample\nmask_keep = 0.3\nfactor = 4\nfreq_keep = 0.25\n"
      "gauss_d = 40\nimage = piecewise\nsize = 16x24\nn_train = 16, 64\nn_test = 8\nsigma = 0.1\n"
      "lambda1 = 0.5\nlambda2 = 0\nepochs = 3\nbatch = 2\nlr = 3e-3\nseed = 7\nmode = decoupled\n"
      "mechanism = ddn-cascade, ddn-independent\nout_dir = /tmp/x  # trailing comment\n");
  EXPECT_EQ(c.op, OperatorKind::block_downsample);
  EXPECT_EQ(c.factor, 4u);
  EXPECT_EQ(c.rows, 16u);
  EXPECT_EQ(c.cols, 24u);
  EXPECT_EQ(c.n_train, (std::vector<std::size_t>{16, 64}));
  EXPECT_EQ(c.mode, TrainingMode::decoupled);
  EXPECT_EQ(c.mechanisms, (std::vector<Mechanism>{Mechanism::ddn_cascade, Mechanism::ddn_independent}));
  EXPECT_EQ(c.out_dir, "/tmp/x");
  EXPECT_DOUBLE_EQ(c.lr, 3e-3);
  const ExperimentConfig d = parse_config_string("size = 12");
  EXPECT_EQ(d.rows, 12u);
  EXPECT_EQ(d.cols, 12u);
}

TEST(Config, EntriesRoundTrip) {
  const ExperimentConfig c = parse_config_string("sigma = 0.1\nn_train = 4,8\nmechanism = residual,npgd\n");
  std::string text;
  for (const auto& [k, v] : c.entries()) text += k + " = " + v + "\n";
  EXPECT_EQ(parse_config_string(text).entries(), c.entries());
}

TEST(Config, RejectsBadInput) {
  for (const char* bad : {"colour = red", "size = 4", "sigma = -1", "lr = 0", "epochs = -3", "epochs = 2.5",
                          "mode = greedy", "mechanism = unet", "operator = blur", "seed = 1\nseed = 2",
                          "no equals sign", "mask_keep = 1.5", "n_train = 0", "sigma = abc"}) {
    EXPECT_THROW(parse_config_string(bad), Error) << bad;
  }
  EXPECT_THROW(load_config("/nonexistent/file.conf"), Error);
}

TEST(Experiment, OperatorFromConfigHonoursKeys) {
  ExperimentConfig c;
  c.rows = c.cols = 8;
  c.mask_keep = 0.25;
  EXPECT_EQ(operator_from_config(c).codomain_size(), 16u);
  c.op = OperatorKind::gaussian;
  c.gauss_d = 10;
  EXPECT_EQ(operator_from_config(c).codomain_size(), 10u);
  c.op = OperatorKind::block_downsample;
  EXPECT_EQ(operator_from_config(c).codomain_size(), 16u);
  c.op = OperatorKind::subsampled_dft;
  c.freq_keep = 1.0;
  // All 30 admissible frequencies of an 8x8 grid, two reals each.
  EXPECT_EQ(operator_from_config(c).codomain_size(), 60u);
}

ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig c = parse_config_string(
      "operator = block_downsample\nsize = 8\nn_train = 4\nn_test = 3\nsigma = 0.1\nepochs = 2\n"
      "batch = 2\nmechanism = pinv, ddn-cascade\n");
  c.out_dir = out.string();
  return c;
}

TEST(Experiment, WritesArtifacts) {
  const fs::path out = scratch_dir("exp");
  const auto rows = run_experiment(tiny_config(out));
  ASSERT_EQ(rows.size(), 2u);
  const std::string csv = slurp(out / "metrics.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "mechanism,N_train,sigma,nmse,psnr_mean,psnr_std,ge,dc_gap,infer_ms");
  EXPECT_NE(csv.find("\npinv,4,0.1,"), std::string::npos);
  EXPECT_NE(csv.find("\nddn-cascade,4,0.1,"), std::string::npos);
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "run.meta"));
  EXPECT_TRUE(fs::exists(out / "timing.csv"));
  EXPECT_TRUE(fs::exists(out / "train_loss.csv"));
  for (int i = 0; i < 3; ++i) {
    EXPECT_TRUE(fs::exists(out / ("ddn-cascade_n4_test" + std::to_string(i) + ".pgm")));
    EXPECT_TRUE(fs::exists(out / ("oracle_test" + std::to_string(i) + ".pgm")));
  }
  EXPECT_NE(slurp(out / "run.meta").find("operator = block_downsample"), std::string::npos);
}

TEST(Experiment, RerunGivesIdenticalCsv) {
  const fs::path a = scratch_dir("rerun_a"), b = scratch_dir("rerun_b");
  run_experiment(tiny_config(a));
  run_experiment(tiny_config(b));
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
}

TEST(Experiment, AblationHasFourRowsInOrder) {
  const fs::path out = scratch_dir("abl");
  ExperimentConfig c = tiny_config(out);
  c.epochs = 1;
  const auto rows = run_experiment(c, {RunKind::ablate, false});
  ASSERT_EQ(rows.size(), 4u);
  const std::vector<Mechanism> expect{Mechanism::residual, Mechanism::nullspace, Mechanism::ddn_range,
                                      Mechanism::ddn_cascade};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(rows[i].mechanism, expect[i]);
}

TEST(Experiment, EmptyTestSetFailsBeforeTraining) {
  const fs::path out = scratch_dir("empty");
  ExperimentConfig c = tiny_config(out);
  c.n_test = 0;
  c.epochs = 100000;
  EXPECT_THROW(run_experiment(c), Error);
  EXPECT_FALSE(fs::exists(out / "metrics.csv"));
}

TEST(Experiment, UnwritableOutputDirFails) {
  const fs::path out = scratch_dir("ro");
  std::ofstream(out / "file") << "x";
  ExperimentConfig c = tiny_config(out / "file" / "sub");
  EXPECT_THROW(run_experiment(c), Error);
}

}  // namespace
