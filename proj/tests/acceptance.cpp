#include "dmldeep/dgp.hpp"
#include "dmldeep/dml.hpp"
#include "dmldeep/eval.hpp"
#include "dmldeep/fusion.hpp"
#include "dmldeep/metrics.hpp"
#include "dmldeep/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace dmldeep;

namespace {

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
  std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool within(double v, double center, double tol) { return std::abs(v - center) <= tol; }

NuisancePredictions fixture_preds(const Vector& l, const Vector& m) {
  NuisancePredictions p;
  p.l_hat = l;
  p.m_hat = m;
  p.fold_id.assign(static_cast<std::size_t>(l.size()), 0);
  return p;
}

void dgp_and_bounds() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = generate(default_dgp_config(50000, 2024, 1.0, 8));
  const double elapsed = seconds_since(t0);
  const double vy = variance(data.y), vd = variance(data.d);
  const double my = mean(data.y), md = mean(data.d);
  char buf[256];
  std::snprintf(buf, sizeof buf, "Var(Y)=%.4f Var(D)=%.4f mean(Y)=%.4f mean(D)=%.4f in %.2fs", vy, vd, my, md,
                elapsed);
  report(within(vy, 3, 0.1) && within(vd, 3, 0.1) && std::abs(my) <= 0.03 && std::abs(md) <= 0.03 && elapsed < 10,
         "dgp-moments", buf);

  const auto b = oracle_bounds(data);
  std::snprintf(buf, sizeof buf, "RMSE(D,m0)=%.4f RMSE(Y,l0)=%.4f R2(D,m0)=%.4f R2(Y,l0)=%.4f", b.rmse_d, b.rmse_y,
                b.r2_d, b.r2_y);
  report(within(b.rmse_d, 1.0, 0.02) && within(b.rmse_y, 1.118, 0.02) && within(b.r2_d, 0.667, 0.02) &&
             within(b.r2_y, 0.583, 0.02),
         "oracle-bounds", buf);

  report(within(b.ols_theta, -0.5, 0.03), "ols-lower-bound",
         fmt("OLS slope=%.4f, target -0.50 +- 0.03", b.ols_theta));

  const auto t1 = std::chrono::steady_clock::now();
  const auto orth = orthogonality_check(data, 0.01, 7);
  const auto naive = orthogonality_check(data, 0.01, 7, ScoreKind::naive);
  const double worst = std::max(std::abs(orth.deriv_l), std::abs(orth.deriv_m));
  const double control = std::max(std::abs(naive.deriv_l), std::abs(naive.deriv_m));
  std::snprintf(buf, sizeof buf, "orthogonal |dl|=%.4f |dm|=%.4f, naive |dl|=%.4f |dm|=%.4f in %.2fs",
                std::abs(orth.deriv_l), std::abs(orth.deriv_m), std::abs(naive.deriv_l), std::abs(naive.deriv_m),
                seconds_since(t1));
  report(worst <= 0.05 && control > 0.2, "orthogonality", buf);
}

void coverage() {
  const auto t0 = std::chrono::steady_clock::now();
  int covered = 0;
  for (std::uint64_t r = 0; r < 500; ++r) {
    const auto data = generate(default_dgp_config(1000, derive_seed(99, "coverage", r), 1.0, 8));
    const auto e = solve_theta(fixture_preds(data.oracle->l0, data.oracle->m0), data.y, data.d, 0.05);
    covered += e.ci_low <= 0.5 && 0.5 <= e.ci_high;
  }
  const double elapsed = seconds_since(t0);
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d of 500 intervals cover theta0 in %.2fs", covered, elapsed);
  report(covered >= 465 && covered <= 485 && elapsed < 60, "coverage", buf);
}

void bias_ordering_and_trace() {
  const std::uint64_t dgp_seed = 11, split_seed = 3, learner_seed = 5;
  auto cfg = default_dgp_config(20000, dgp_seed, 0.9, 8);
  const auto data = generate(cfg);
  const double plim = attenuated_theta_plim(cfg);

  GbtParams stumps;
  stumps.depth = 1;
  stumps.trees = 300;
  stumps.learning_rate = 0.1;
  stumps.min_leaf = 20;
  const FusionParams deep{};
  const std::vector<ModelEntry> roster{
      {"Baseline", {stumps, derive_seed(learner_seed, "Baseline")}, {"tab"}},
      {"Deep", {deep, derive_seed(learner_seed, "Deep")}, data.modality_names()}};
  SplitScheme scheme;
  scheme.train_fraction = 0.5;
  scheme.repeats = 5;
  scheme.seed = split_seed;

  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = run_benchmark(data, roster, scheme, 1);
  const double elapsed = seconds_since(t0);
  const auto& base = rep.rows[0];
  const auto& dnn = rep.rows[1];
  const double ols = rep.bounds.ols_theta;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "theta OLS=%.4f Baseline=%.4f Deep=%.4f (plim %.4f); rel r2 Baseline Y=%.3f D=%.3f, Deep Y=%.3f "
                "D=%.3f; %.1fs",
                ols, base.theta.mean, dnn.theta.mean, plim, base.r2_y_rel->mean, base.r2_d_rel->mean,
                dnn.r2_y_rel->mean, dnn.r2_d_rel->mean, elapsed);
  const bool ok = base.theta.mean <= -0.1 && within(dnn.theta.mean, plim, 0.07) && ols < base.theta.mean &&
                  base.theta.mean < dnn.theta.mean && dnn.theta.mean <= 0.5 && dnn.r2_y_rel->mean >= 0.8 &&
                  dnn.r2_d_rel->mean >= 0.8 && within(base.r2_y_rel->mean, 1.0 / 3.0, 0.1) &&
                  within(base.r2_d_rel->mean, 1.0 / 3.0, 0.1) && elapsed < 900;
  report(ok, "bias-ordering", buf);

  const auto run = run_trace(data, deep, derive_seed(learner_seed, "Deep"), 0.5, split_seed, data.modality_names());
  const double first = run.trace.points.front().theta_hat;
  const double last = run.trace.points.back().theta_hat;
  std::snprintf(buf, sizeof buf, "epoch 1 theta=%.4f, epoch %zu theta=%.4f, reference 0.25", first,
                run.trace.points.back().epoch, last);
  report(std::abs(last - 0.25) < std::abs(first - 0.25), "epoch-trace", buf);
}

void gradient_check() {
  const auto data = generate(default_dgp_config(50, 3, 0.8, 3));
  FusionArch arch;
  arch.encoder_widths = {5, 4};
  arch.embedding_dim = 3;
  arch.activation = Activation::tanh;
  std::vector<FusionNet::Input> inputs;
  for (const auto& b : data.blocks) inputs.push_back({b.name, static_cast<std::size_t>(b.values.cols())});
  FusionNet net(arch, inputs, 7);
  net.set_normalization(data);
  std::vector<double> grad;
  net.loss_and_gradient(data, grad);
  const auto theta = net.parameters();
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    auto p = theta;
    p[i] = theta[i] + h;
    net.set_parameters(p);
    const double up = net.loss(data);
    p[i] = theta[i] - h;
    net.set_parameters(p);
    const double down = net.loss(data);
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - grad[i]) / std::max(1e-6, std::abs(fd) + std::abs(grad[i])));
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "max relative error %.2e over %zu parameters", worst, theta.size());
  report(worst < 1e-4, "gradient-check", buf);
}

void root_equivalence() {
  std::mt19937_64 gen(31);
  std::normal_distribution<double> z;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Index n = 30 + 3 * t;
    Vector y(n), d(n), l(n), m(n);
    for (Index i = 0; i < n; ++i) {
      d[i] = 2 * z(gen);
      y[i] = 0.5 * d[i] + z(gen);
      l[i] = z(gen);
      m[i] = 0.5 * z(gen);
    }
    const double closed = solve_theta(fixture_preds(l, m), y, d).theta_hat;
    double lo = -1e3, hi = 1e3;
    for (int k = 0; k < 200; ++k) {
      const double mid = 0.5 * (lo + hi);
      (score_psi(y, d, l, m, mid).mean() > 0 ? lo : hi) = mid;
    }
    worst = std::max(worst, std::abs(closed - 0.5 * (lo + hi)));
  }
  report(worst < 1e-8, "closed-form-root", fmt("max |closed form - bisection| = %.2e over 100 fixtures", worst));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> steps{dgp_and_bounds, coverage, gradient_check, root_equivalence,
                                                  bias_ordering_and_trace};
  for (const auto& step : steps) {
    try {
      step();
    } catch (const std::exception& e) {
      report(false, "error", e.what());
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
