#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "omfb/metrics.hpp"
#include "omfb/omfb.hpp"
#include "test_support.hpp"

using namespace omfb;
using testsupport::fd_gradient;
using testsupport::gradients_match;
using testsupport::random_matrix;
using testsupport::random_vector;

namespace {

OmfbConfig small_config() {
  OmfbConfig cfg;
  cfg.rank = 2;
  cfg.lambda = 1.0;
  cfg.inner_iters = 2;
  cfg.epochs = 1;
  cfg.seed = 42;
  return cfg;
}

// Analytic gradient of the per-observation cost in C; written out here so the
// stationarity checks do not depend on library code.
Matrix cost_gradient(const Vector& y, const Vector& x, const Matrix& C,
                     const Matrix& C_prev, double lambda) {
  return -2.0 * y * x.transpose() + 2.0 * C * (x * x.transpose()) +
         2.0 * lambda * (C - C_prev);
}

}  // namespace

TEST_CASE("solve_coefficients: identity dictionary returns the observation") {
  Vector y(3);
  y << 1, 2, 3;
  const Vector x = solve_coefficients(Matrix::Identity(3, 3), y, 1e-10);
  CHECK((x - y).norm() <= 1e-12);
}

TEST_CASE("solve_coefficients: zero observation gives zero coefficients") {
  Xoshiro256pp rng(3);
  const Matrix C = random_matrix(rng, 5, 3);
  const Vector x = solve_coefficients(C, Vector::Zero(5), 1e-10);
  CHECK(x.norm() <= 1e-14);
}

TEST_CASE("solve_coefficients: explicit normal equations instance") {
  Matrix C(3, 2);
  C << 1, 0, 0, 1, 1, 1;
  Vector y(3);
  y << 1, 2, 3;
  // C^T C = [[2,1],[1,2]], C^T y = [4,5], solution [1,2], residual exactly 0
  const Vector x = solve_coefficients(C, y, 1e-10);
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(x[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK((y - C * x).norm() <= 1e-12);
}

TEST_CASE("solve_coefficients: residual orthogonal to the dictionary range") {
  Xoshiro256pp rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    const Matrix C = random_matrix(rng, 12, 4);
    const Vector y = random_vector(rng, 12);
    const Vector x = solve_coefficients(C, y, 1e-10);
    const Vector normal_residual = C.transpose() * (y - C * x);
    CHECK(normal_residual.norm() <= 1e-8 * (C.transpose() * y).norm());
  }
}

TEST_CASE("dictionary_update_direct: x = 0 returns the previous dictionary") {
  Xoshiro256pp rng(5);
  const Matrix C_prev = random_matrix(rng, 4, 3);
  const Vector y = random_vector(rng, 4);
  const Matrix C = dictionary_update_direct(C_prev, Vector::Zero(3), y, 2.0);
  CHECK((C - C_prev).norm() <= 1e-12);
}

TEST_CASE("dictionary_update_direct: zero residual is a fixed point") {
  Xoshiro256pp rng(8);
  const Matrix C_prev = random_matrix(rng, 5, 3);
  const Vector x = random_vector(rng, 3);
  const Vector y = C_prev * x;
  const Matrix C = dictionary_update_direct(C_prev, x, y, 0.7);
  CHECK((C - C_prev).norm() <= 1e-10 * (1.0 + C_prev.norm()));
}

TEST_CASE("dictionary_update_direct: hand-solved 2x2 instance") {
  const Matrix C_prev = Matrix::Identity(2, 2);
  Vector x(2);
  x << 1, 1;
  Vector y(2);
  y << 2, 0;
  const Matrix C = dictionary_update_direct(C_prev, x, y, 1.0);
  CHECK(C(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(C(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(C(1, 0) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  CHECK(C(1, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("dictionary_update_rank1: matches the hand-solved instance") {
  const Matrix C_prev = Matrix::Identity(2, 2);
  Vector x(2);
  x << 1, 1;
  Vector y(2);
  y << 2, 0;
  const Matrix C = dictionary_update_rank1(C_prev, x, y, 1.0);
  CHECK(C(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(C(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(C(1, 0) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  CHECK(C(1, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("dictionary_update_rank1: zero residual leaves the dictionary unchanged") {
  Xoshiro256pp rng(9);
  const Matrix C_prev = random_matrix(rng, 6, 2);
  const Vector x = random_vector(rng, 2);
  const Matrix C = dictionary_update_rank1(C_prev, x, C_prev * x, 1.0);
  CHECK((C - C_prev).norm() <= 1e-14);
}

TEST_CASE("dictionary_update_rank1: degenerate step when lambda and x both vanish") {
  CHECK_THROWS_AS(dictionary_update_rank1(Matrix::Identity(2, 2), Vector::Zero(2),
                                          Vector::Ones(2), 0.0),
                  NumericalError);
}

TEST_CASE("rank-one and direct forms agree over random instances") {
  Xoshiro256pp rng(101);
  const double lambdas[] = {0.1, 1.0, 10.0};
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix C_prev = random_matrix(rng, 20, 5);
    const Vector x = random_vector(rng, 5);
    const Vector y = random_vector(rng, 20);
    const double lambda = lambdas[trial % 3];
    const Matrix direct = dictionary_update_direct(C_prev, x, y, lambda);
    const Matrix rank1 = dictionary_update_rank1(C_prev, x, y, lambda);
    const double dev = (direct - rank1).cwiseAbs().maxCoeff();
    CHECK(dev <= 1e-10 * (1.0 + direct.norm()));
  }
}

TEST_CASE("secant limit: tiny lambda maps coefficients onto the observation") {
  Xoshiro256pp rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix C_prev = random_matrix(rng, 10, 4);
    const Vector x = random_vector(rng, 4);
    const Vector y = random_vector(rng, 10);
    const Matrix C = dictionary_update_rank1(C_prev, x, y, 1e-12);
    CHECK((C * x - y).norm() <= 1e-6 * y.norm());
  }
}

TEST_CASE("scale equivariance: scaling the secant pair leaves the update unchanged") {
  // (x, y, lambda) -> (alpha x, alpha y, alpha^2 lambda) rescales numerator and
  // denominator of the rank-one correction by alpha^2
  Xoshiro256pp rng(77);
  const double alphas[] = {2.0, -3.0, 0.25};
  for (int trial = 0; trial < 15; ++trial) {
    const Matrix C_prev = random_matrix(rng, 8, 3);
    const Vector x = random_vector(rng, 3);
    const Vector y = random_vector(rng, 8);
    const double lambda = 0.8;
    const double alpha = alphas[trial % 3];
    const Matrix base = dictionary_update_rank1(C_prev, x, y, lambda);
    const Matrix scaled = dictionary_update_rank1(C_prev, alpha * x, alpha * y,
                                                  alpha * alpha * lambda);
    CHECK((base - scaled).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + base.norm()));
  }
}

TEST_CASE("stationarity: analytic gradient vanishes at the direct update") {
  Xoshiro256pp rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix C_prev = random_matrix(rng, 20, 5);
    const Vector x = random_vector(rng, 5);
    const Vector y = random_vector(rng, 20);
    const double lambda = trial % 2 ? 1.0 : 10.0;
    const Matrix C = dictionary_update_direct(C_prev, x, y, lambda);
    const Matrix grad = cost_gradient(y, x, C, C_prev, lambda);
    CHECK(grad.cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("stationarity: analytic gradient matches central differences") {
  Xoshiro256pp rng(37);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix C_prev = random_matrix(rng, 6, 3);
    const Vector x = random_vector(rng, 3);
    const Vector y = random_vector(rng, 6);
    const double lambda = 1.3;

    // away from the minimizer the relative match is meaningful
    const Matrix C = random_matrix(rng, 6, 3);
    const Matrix analytic = cost_gradient(y, x, C, C_prev, lambda);
    const Matrix fd = fd_gradient(
        [&](const Matrix& probe) { return objective(y, x, probe, C_prev, lambda); },
        C, 1e-6);
    CHECK(gradients_match(analytic, fd, 1e-5));

    // and at the minimizer both collapse to zero
    const Matrix C_star = dictionary_update_direct(C_prev, x, y, lambda);
    const Matrix fd_star = fd_gradient(
        [&](const Matrix& probe) { return objective(y, x, probe, C_prev, lambda); },
        C_star, 1e-6);
    CHECK(gradients_match(cost_gradient(y, x, C_star, C_prev, lambda), fd_star, 1e-5));
  }
}

TEST_CASE("omfb_step: observation in the dictionary span is reproduced") {
  FactorState state;
  state.dictionary = Matrix::Identity(2, 2);
  state.coefficients = Matrix::Zero(2, 3);
  Vector y(2);
  y << 1, 0;
  const StepReport report = omfb_step(state, y, 0, small_config());
  CHECK(report.residual_norm <= 1e-10);
  CHECK(report.objective_after <= 1e-18);  // residual and drift both vanish
  CHECK(state.step_counter == 1);
}

TEST_CASE("omfb_step: two inner iterations do at least as well as one") {
  Xoshiro256pp rng(301);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix Y = random_matrix(rng, 4, 2);
    FactorState one;
    one.dictionary = random_matrix(rng, 4, 2);
    one.coefficients = Matrix::Zero(2, 2);
    FactorState two = one;

    OmfbConfig cfg = small_config();
    cfg.inner_iters = 1;
    const StepReport r1 = omfb_step(one, Y.col(0), 0, cfg);
    cfg.inner_iters = 2;
    const StepReport r2 = omfb_step(two, Y.col(0), 0, cfg);
    CHECK(r2.objective_after <= r1.objective_after + 1e-12);
  }
}

TEST_CASE("omfb_step: deterministic given identical state and input") {
  Xoshiro256pp rng(401);
  const Matrix C0 = random_matrix(rng, 5, 2);
  const Vector y = random_vector(rng, 5);
  FactorState a;
  a.dictionary = C0;
  a.coefficients = Matrix::Zero(2, 4);
  FactorState b = a;
  const StepReport ra = omfb_step(a, y, 1, small_config());
  const StepReport rb = omfb_step(b, y, 1, small_config());
  CHECK(ra.objective_before == rb.objective_before);
  CHECK(ra.objective_after == rb.objective_after);
  CHECK(ra.residual_norm == rb.residual_norm);
  CHECK(a.dictionary == b.dictionary);
  CHECK(a.coefficients == b.coefficients);
}

TEST_CASE("omfb_step: descent holds at every half-update") {
  Xoshiro256pp rng(501);
  for (int trial = 0; trial < 30; ++trial) {
    const Index m = 4 + Index(rng.uniform_below(12));
    const Index r = 2 + Index(rng.uniform_below(3));
    FactorState state;
    state.dictionary = random_matrix(rng, m, r);
    state.coefficients = random_matrix(rng, r, 3);
    OmfbConfig cfg = small_config();
    cfg.rank = int(r);
    cfg.lambda = trial % 2 ? 0.5 : 5.0;
    cfg.inner_iters = 1 + int(rng.uniform_below(3));
    const Vector y = random_vector(rng, m);
    const StepReport report = omfb_step(state, y, 2, cfg);
    for (std::size_t i = 1; i < report.half_objectives.size(); ++i)
      CHECK(report.half_objectives[i] <= report.half_objectives[i - 1] + 1e-12);
  }
}

TEST_CASE("omfb_run: recovers an exactly low-rank matrix") {
  const Index m = 20, n = 40, r = 3;
  const Matrix C_star = normal_matrix(m, r, 12345);
  const Matrix X_star = normal_matrix(r, n, 54321);
  const Matrix Y = C_star * X_star;

  OmfbConfig cfg;
  cfg.rank = int(r);
  cfg.lambda = 1.0;
  cfg.inner_iters = 2;
  cfg.epochs = 30;
  cfg.seed = 7;
  Trace trace;
  const FactorState state = omfb_run(Y, cfg, trace);
  const double rel =
      reconstruction_error(Y, state.dictionary, state.coefficients) / Y.norm();
  CHECK(rel <= 1e-3);
  CHECK(trace.size() == 30);
}

TEST_CASE("omfb_run: zero epochs returns the initialized state and no records") {
  const Matrix Y = normal_matrix(4, 6, 99);
  OmfbConfig cfg = small_config();
  cfg.epochs = 0;
  Trace trace;
  const FactorState state = omfb_run(Y, cfg, trace);
  CHECK(trace.empty());
  CHECK(state.step_counter == 0);
  CHECK(state.coefficients.norm() == 0.0);
  CHECK(state.dictionary.rows() == 4);
}

TEST_CASE("sequential sampling cycles through the columns in order") {
  ColumnSampler sampler(3, Sampling::sequential, 0);
  for (int round = 0; round < 2; ++round) {
    CHECK(sampler.next() == 0);
    CHECK(sampler.next() == 1);
    CHECK(sampler.next() == 2);
  }
}

TEST_CASE("omfb_run: identical seeds give identical traces") {
  const Matrix Y = normal_matrix(6, 9, 1000);
  OmfbConfig cfg = small_config();
  cfg.epochs = 4;
  cfg.seed = 321;
  Trace a, b;
  omfb_run(Y, cfg, a);
  omfb_run(Y, cfg, b);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.records()[i].samples == b.records()[i].samples);
    CHECK(a.records()[i].error == b.records()[i].error);
  }
}

TEST_CASE("omfb_run: early stop cuts the epoch budget once converged") {
  const Matrix C_star = normal_matrix(8, 2, 1);
  const Matrix X_star = normal_matrix(2, 12, 2);
  const Matrix Y = C_star * X_star;
  OmfbConfig cfg = small_config();
  cfg.epochs = 200;
  cfg.early_stop = true;
  Trace trace;
  omfb_run(Y, cfg, trace);
  CHECK(trace.size() < 200);
}

TEST_CASE("omfb_run: empty input is rejected") {
  Trace trace;
  CHECK_THROWS_AS(omfb_run(Matrix(), small_config(), trace), ArgumentError);
}
