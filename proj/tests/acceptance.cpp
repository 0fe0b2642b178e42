// Acceptance checks. One PASS/FAIL line per criterion; exit status is nonzero
// when any required criterion fails. Criterion 7 needs the Gas Pipeline data
// file in ICSAD_GAS_PIPELINE (csv or arff by extension) and never fails the run.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>

#include "icsad/autoencoder.hpp"
#include "icsad/explain.hpp"
#include "icsad/model_io.hpp"
#include "icsad/ocsvm.hpp"
#include "icsad/pipeline.hpp"
#include "icsad/random.hpp"
#include "icsad/synthetic.hpp"
#include "oracles/dense_qp.hpp"
#include "oracles/finite_difference.hpp"
#include "oracles/permutation_shapley.hpp"

using namespace icsad;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

bool report(int id, const std::string& title, const Outcome& o, const char* status = nullptr) {
  std::cout << "[" << (status ? status : (o.pass ? "PASS" : "FAIL")) << "] criterion " << id << ": "
            << title << " -- " << o.detail << std::endl;
  return o.pass;
}

// 1 ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst_param = 0, worst_input = 0;
  const int models = 24;
  for (int trial = 0; trial < models; ++trial) {
    const std::size_t h = 1 + rng.below(4), l = 1 + rng.below(5), m = 1 + rng.below(3);
    const std::size_t z = 1 + rng.below(3);
    auto model = autoencoder::init_model(m, l, h, z, rng.next_u64());
    model.params.for_each([&](std::string_view, auto& t) {
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] += rng.uniform(-0.3, 0.3);
    });
    Eigen::MatrixXd x(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(m));
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();

    const auto grads = autoencoder::parameter_gradients(model, x);
    std::vector<Eigen::MatrixXd> analytic;
    grads.for_each([&](std::string_view, const auto& t) { analytic.emplace_back(t); });
    std::size_t idx = 0;
    model.params.for_each([&](std::string_view, auto& t) {
      Eigen::MatrixXd p = t;
      const auto numeric = oracle::five_point_difference(
          [&] {
            t = p;
            return autoencoder::mse_loss(x, autoencoder::reconstruct(model, x));
          },
          p);
      t = p;
      worst_param = std::max(worst_param, oracle::max_relative_error(analytic[idx++], numeric));
    });

    const auto g = autoencoder::input_gradient(model, x);
    const auto numeric = oracle::five_point_difference([&] { return autoencoder::surrogate_score(model, x); }, x);
    worst_input = std::max(worst_input, oracle::max_relative_error(g, numeric));
  }
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = worst_param <= 1e-4 && worst_input <= 1e-4 && elapsed < 30;
  o.detail = std::to_string(models) + " models, max rel err params " + fmt(worst_param) + ", inputs " +
             fmt(worst_input) + " (<= 1e-4), " + fmt(elapsed) + " s (< 30 s)";
  return o;
}

// 2 ---------------------------------------------------------------------------

explain::ShapleyGame table_game(std::vector<double> table, int players) {
  return {players, [t = std::move(table)](const explain::CoalitionVector& z) { return t[z.bits()]; }};
}

Outcome shapley_axioms() {
  const auto t0 = Clock::now();
  Rng rng(202);
  double eff = 0, sym = 0, dummy = 0, lin = 0, perm = 0;
  const int games = 100;
  for (int g = 0; g < games; ++g) {
    const int M = 1 + static_cast<int>(rng.below(10));
    const std::size_t size = std::size_t{1} << M;
    std::vector<double> t1(size), t2(size);
    for (auto& v : t1) v = rng.uniform(-1, 1);
    for (auto& v : t2) v = rng.uniform(-1, 1);
    const auto phi1 = explain::exact_shapley(table_game(t1, M));
    const auto phi2 = explain::exact_shapley(table_game(t2, M));

    eff = std::max(eff, std::abs(std::accumulate(phi1.begin(), phi1.end(), 0.0) - (t1.back() - t1.front())));

    std::vector<double> t12(size);
    for (std::size_t s = 0; s < size; ++s) t12[s] = t1[s] + t2[s];
    const auto phi12 = explain::exact_shapley(table_game(t12, M));
    for (int k = 0; k < M; ++k) lin = std::max(lin, std::abs(phi12[k] - phi1[k] - phi2[k]));

    if (M >= 2) {
      // Players 0 and 1 made interchangeable.
      std::vector<double> ts(size);
      for (std::uint32_t s = 0; s < size; ++s) {
        const std::uint32_t swapped = (s & ~3U) | ((s & 1U) << 1) | ((s >> 1) & 1U);
        ts[s] = t1[s] + t1[swapped];
      }
      const auto phis = explain::exact_shapley(table_game(ts, M));
      sym = std::max(sym, std::abs(phis[0] - phis[1]));
    }

    const int d = static_cast<int>(rng.below(static_cast<std::uint64_t>(M)));
    std::vector<double> td(size);
    for (std::uint32_t s = 0; s < size; ++s) td[s] = t1[s & ~(1U << d)];
    dummy = std::max(dummy, std::abs(explain::exact_shapley(table_game(td, M))[static_cast<std::size_t>(d)]));

    const auto ref = oracle::permutation_shapley(table_game(t1, M));
    for (int k = 0; k < M; ++k) perm = std::max(perm, std::abs(phi1[k] - ref[k]));
  }
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = eff <= 1e-12 && sym <= 1e-12 && dummy <= 1e-12 && lin <= 1e-12 && perm <= 1e-12 && elapsed < 60;
  o.detail = std::to_string(games) + " games (M <= 10); max |efficiency| " + fmt(eff) + ", symmetry " +
             fmt(sym) + ", dummy " + fmt(dummy) + ", linearity " + fmt(lin) + ", permutation oracle " +
             fmt(perm) + " (<= 1e-12), " + fmt(elapsed) + " s (< 60 s)";
  return o;
}

// 3 ---------------------------------------------------------------------------

Outcome gradient_shap_vs_exact() {
  Eigen::MatrixXd x(2, 2), b(2, 2);
  x << 1.0, 2.0, 0.5, 1.5;
  b << 0.1, 0.2, 0.0, 0.3;
  const explain::LambdaScore quad(
      [](const Eigen::MatrixXd& v) { return v.sum() * v.sum(); },
      [](const Eigen::MatrixXd& v) { return Eigen::MatrixXd(Eigen::MatrixXd::Constant(v.rows(), v.cols(), 2 * v.sum())); });
  const explain::BaselineSet baselines{{b}};
  const auto exact = explain::exact_shapley(explain::make_game_from_model(quad, x, baselines));
  const auto approx = explain::gradient_shap(quad, x, baselines, 50'000, 303);
  double worst_cell = 0;
  for (Eigen::Index k = 0; k < 4; ++k) {
    const double e = exact[static_cast<std::size_t>(k)];
    worst_cell = std::max(worst_cell, std::abs(approx.values(k / 2, k % 2) - e) / std::abs(e));
  }
  const double gap = quad.value(x) - quad.value(b);
  const double completeness = std::abs(approx.values.sum() - gap) / std::abs(gap);

  Rng rng(304);
  double linear = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd w(3, 4), xx(3, 4), bb(3, 4);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = rng.normal();
      xx.data()[i] = rng.normal();
      bb.data()[i] = rng.normal();
    }
    const double c = rng.normal();
    const explain::LambdaScore affine([&](const Eigen::MatrixXd& v) { return w.cwiseProduct(v).sum() + c; },
                                      [&](const Eigen::MatrixXd&) { return w; });
    for (std::size_t n : {1UL, 3UL, 64UL, 1000UL}) {
      const auto a = explain::gradient_shap(affine, xx, explain::BaselineSet{{bb}}, n, rng.next_u64());
      linear = std::max(linear, (a.values - w.cwiseProduct(xx - bb)).cwiseAbs().maxCoeff());
    }
  }
  Outcome o;
  o.pass = worst_cell <= 0.02 && completeness <= 0.01 && linear <= 1e-10;
  o.detail = "50000 samples: max per-cell rel err " + fmt(worst_cell) + " (<= 0.02), completeness gap " +
             fmt(completeness) + " (<= 0.01); affine max abs err " + fmt(linear) + " (<= 1e-10)";
  return o;
}

// 4 ---------------------------------------------------------------------------

Outcome ocsvm_correctness() {
  Rng rng(404);
  double obj = 0, dec = 0;
  int fixtures = 0;
  auto compare = [&](const Eigen::MatrixXd& x, double nu, double gamma) {
    ocsvm::OcsvmConfig c;
    c.nu = nu;
    c.gamma = gamma;
    c.tolerance = 1e-10;
    const auto fitted = ocsvm::fit(x, c);
    const auto qp = oracle::solve_ocsvm_dual(x, nu, gamma);
    obj = std::max(obj, std::abs(fitted.objective - qp.objective));
    for (Eigen::Index i = 0; i < x.rows() + 5; ++i) {
      Eigen::VectorXd p = i < x.rows() ? Eigen::VectorXd(x.row(i).transpose())
                                       : Eigen::VectorXd(Eigen::VectorXd::NullaryExpr(x.cols(), [&] { return 1.5 * rng.normal(); }));
      dec = std::max(dec, std::abs(ocsvm::decision(fitted.model, p) - oracle::qp_decision(x, qp, gamma, p)));
    }
    ++fixtures;
  };
  Eigen::MatrixXd six(6, 2);
  six << 0.0, 0.0, 0.1, 0.0, 0.0, 0.1, 0.1, 0.1, 0.05, 0.05, 3.0, 3.0;
  compare(six, 0.2, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const auto n = 2 + static_cast<Eigen::Index>(rng.below(11));
    const auto d = 1 + static_cast<Eigen::Index>(rng.below(3));
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    compare(x, std::array{0.05, 0.1, 0.2, 0.5, 0.8}[rng.below(5)], rng.uniform(0.2, 2.0));
  }

  int violations = 0, checks = 0;
  for (int dataset = 0; dataset < 50; ++dataset) {
    const auto n = 40 + static_cast<Eigen::Index>(rng.below(160));
    const auto d = 1 + static_cast<Eigen::Index>(rng.below(5));
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    for (double nu : {0.05, 0.1, 0.2, 0.5}) {
      ocsvm::OcsvmConfig c;
      c.nu = nu;
      const auto f = ocsvm::fit(x, c);
      std::size_t outside = 0, support = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        // Decisions within the solver tolerance of 0 are on the boundary.
        outside += ocsvm::decision(f.model, Eigen::VectorXd(x.row(i).transpose())) < -c.tolerance;
        support += f.training_alpha[i] > 0;
      }
      const double slack = 1.0 / static_cast<double>(n);
      ++checks;
      if (!f.converged || double(outside) / double(n) > nu + slack || double(support) / double(n) < nu - slack) {
        ++violations;
      }
    }
  }
  Outcome o;
  o.pass = obj <= 1e-6 && dec <= 1e-6 && violations == 0;
  o.detail = std::to_string(fixtures) + " QP fixtures (n <= 12): max objective diff " + fmt(obj) +
             ", decision diff " + fmt(dec) + " (<= 1e-6); nu-property violations " +
             std::to_string(violations) + "/" + std::to_string(checks);
  return o;
}

// 5 ---------------------------------------------------------------------------

Outcome metric_identity() {
  const double f1 = pipeline::f1_score(0.8470, 0.9628);
  Outcome o;
  o.pass = std::round(f1 * 1e4) / 1e4 == 0.9012;
  o.detail = "F1(0.8470, 0.9628) = " + std::to_string(f1) + " -> 0.9012 expected";
  return o;
}

// 6 and 8 ---------------------------------------------------------------------

struct BenchmarkRun {
  pipeline::Metrics metrics;
  std::size_t explained = 0, explained_with_event = 0, top1_hits = 0;
  std::string detections_csv, attributions_csv;
  double seconds = 0;
};

BenchmarkRun run_benchmark() {
  const auto t0 = Clock::now();
  const auto bench = synthetic::make_benchmark(synthetic::BenchmarkOptions{});
  auto [train, test] = ingest::split_train_test(bench.table, 0.8);
  pipeline::PipelineParams params;
  params.window_length = 8;
  const auto fitted = pipeline::fit_pipeline(train, params);
  const auto windows = pipeline::prepare_windows(fitted, test);
  const auto explain = pipeline::explain_params_for(fitted, params);
  const auto detections = pipeline::detect(fitted.autoencoder, fitted.ocsvm, windows, fitted.residual_mode, &explain);

  BenchmarkRun run;
  run.metrics = pipeline::evaluate(detections, pipeline::window_labels(windows));
  const std::size_t offset = train.num_rows();
  for (const auto& d : detections) {
    if (!d.attribution) continue;
    ++run.explained;
    const auto injected = synthetic::injected_features(bench.events, offset + d.start_index,
                                                       offset + d.start_index + params.window_length);
    if (injected.empty()) continue;
    ++run.explained_with_event;
    const auto top = explain::aggregate_per_feature(*d.attribution).ranking.front();
    if (std::find(injected.begin(), injected.end(), top) != injected.end()) ++run.top1_hits;
  }
  std::ostringstream det, attr;
  io::write_detections_csv(det, detections);
  io::write_attributions_csv(attr, detections, windows, fitted);
  run.detections_csv = det.str();
  run.attributions_csv = attr.str();
  run.seconds = seconds_since(t0);
  return run;
}

Outcome synthetic_benchmark(const BenchmarkRun& r) {
  const double top1 = r.explained_with_event ? double(r.top1_hits) / double(r.explained_with_event) : 0.0;
  Outcome o;
  o.pass = r.metrics.f1 >= 0.9 && r.metrics.recall >= 0.9 && top1 >= 0.8 && r.seconds < 180;
  o.detail = "precision " + fmt(r.metrics.precision) + ", recall " + fmt(r.metrics.recall) + " (>= 0.9), F1 " +
             fmt(r.metrics.f1) + " (>= 0.9); injected feature top-1 in " + std::to_string(r.top1_hits) + "/" +
             std::to_string(r.explained_with_event) + " explained detections covering an injection = " +
             fmt(top1) + " (>= 0.8; " + std::to_string(r.explained) + " explained in total); " +
             fmt(r.seconds) + " s (< 180 s)";
  return o;
}

Outcome determinism(const BenchmarkRun& first) {
  const auto second = run_benchmark();
  Outcome o;
  const bool det = first.detections_csv == second.detections_csv;
  const bool attr = first.attributions_csv == second.attributions_csv;
  o.pass = det && attr;
  o.detail = std::string("detections CSV ") + (det ? "identical" : "DIFFERS") + " (" +
             std::to_string(first.detections_csv.size()) + " bytes), attributions CSV " +
             (attr ? "identical" : "DIFFERS") + " (" + std::to_string(first.attributions_csv.size()) + " bytes)";
  return o;
}

// 7 ---------------------------------------------------------------------------

std::optional<Outcome> gas_pipeline_stretch() {
  const char* path = std::getenv("ICSAD_GAS_PIPELINE");
  if (!path || !*path) return std::nullopt;
  Outcome o;
  try {
    const std::string p(path);
    const auto format = p.size() >= 5 && p.substr(p.size() - 5) == ".arff" ? ingest::Format::kArff
                                                                             : ingest::Format::kCsv;
    const auto table = ingest::load_dataset(p, format);
    auto [train, test] = ingest::split_train_test(table, 0.8);
    pipeline::PipelineParams params;
    const auto grid = pipeline::grid_search(train, pipeline::kDefaultWindowCandidates, params, params.seed);
    params.window_length = grid.selected;
    const auto fitted = pipeline::fit_pipeline(train, params);
    const auto windows = pipeline::prepare_windows(fitted, test);
    const auto d = pipeline::detect(fitted.autoencoder, fitted.ocsvm, windows, fitted.residual_mode);
    const auto m = pipeline::evaluate(d, pipeline::window_labels(windows));
    o.pass = m.recall >= 0.85 && m.f1 >= 0.80;
    o.detail = "l = " + std::to_string(grid.selected) + ": precision " + fmt(m.precision) + ", recall " +
               fmt(m.recall) + " (>= 0.85), F1 " + fmt(m.f1) + " (>= 0.80); informational only";
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("could not run: ") + e.what();
  }
  return o;
}

}  // namespace

int main() {
  bool ok = true;
  ok &= report(1, "gradient correctness", gradient_correctness());
  ok &= report(2, "exact Shapley axioms", shapley_axioms());
  ok &= report(3, "Gradient SHAP vs exact oracle", gradient_shap_vs_exact());
  ok &= report(4, "OCSVM correctness", ocsvm_correctness());
  ok &= report(5, "published metric identity", metric_identity());
  const auto bench = run_benchmark();
  ok &= report(6, "end-to-end synthetic benchmark", synthetic_benchmark(bench));
  if (const auto stretch = gas_pipeline_stretch()) {
    report(7, "Gas Pipeline stretch check", *stretch, stretch->pass ? "PASS" : "FAIL (non-blocking)");
  } else {
    report(7, "Gas Pipeline stretch check", Outcome{true, "set ICSAD_GAS_PIPELINE to the dataset file to run"}, "SKIP");
  }
  ok &= report(8, "determinism", determinism(bench));
  std::cout << (ok ? "acceptance: all required criteria passed" : "acceptance: FAILED") << std::endl;
  return ok ? 0 : 1;
}
