// Tests for the small-signal model: state-matrix assembly, modal analysis,
// and damping-ratio gradients. Oracles: a hand-derived swing linearization
// for the one-machine case, an independent polynomial root finder for
// eigenvalues, and the analytic eigenvalue-sensitivity formula evaluated with
// matrix finite differences.

#include "secdb/dynamics.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "secdb/powerflow.hpp"
#include "secdb/util.hpp"

using namespace secdb;

namespace {

NetworkCase load_named(const char* file) {
  return load_case_file(std::string(SECDB_CASE_DIR) + "/" + file);
}

constexpr double kPi = 3.14159265358979323846;

// Characteristic polynomial value det(zI - A) through a complex LU
// factorization; independent of the eigensolver under test.
std::complex<double> char_poly(const Eigen::MatrixXd& a, std::complex<double> z) {
  const int n = int(a.rows());
  Eigen::MatrixXcd m = -a.cast<std::complex<double>>();
  m.diagonal().array() += z;
  return Eigen::PartialPivLU<Eigen::MatrixXcd>(m).determinant();
}

// Simultaneous-iteration root finder for the (monic) characteristic
// polynomial. Each update divides the polynomial value by the product of
// distances to the other iterates.
std::vector<std::complex<double>> poly_roots(const Eigen::MatrixXd& a) {
  const int n = int(a.rows());
  std::vector<std::complex<double>> z(static_cast<std::size_t>(n));
  const std::complex<double> seed(0.4, 0.9);
  std::complex<double> acc(1.0, 0.0);
  for (int i = 0; i < n; ++i) {
    acc *= seed;
    z[std::size_t(i)] = acc;
  }
  for (int sweep = 0; sweep < 500; ++sweep) {
    double moved = 0.0;
    for (int i = 0; i < n; ++i) {
      std::complex<double> denom(1.0, 0.0);
      for (int j = 0; j < n; ++j) {
        if (j != i) denom *= z[std::size_t(i)] - z[std::size_t(j)];
      }
      const std::complex<double> step = char_poly(a, z[std::size_t(i)]) / denom;
      z[std::size_t(i)] -= step;
      moved = std::max(moved, std::abs(step));
    }
    if (moved < 1e-13) break;
  }
  return z;
}

}  // namespace

TEST_CASE("one machine against a stiff source matches the hand swing linearization") {
  const NetworkCase net = load_named("smib.json");
  DispatchPoint d(1);
  d << 80.0;
  const PowerFlowResult pf = solve_power_flow(net, Outage{}, d);
  REQUIRE(pf.converged);

  const Eigen::MatrixXd a = linearize(net, Outage{}, pf);
  REQUIRE(a.rows() == 2);

  // Hand linearization: constant EMF behind the transient reactance feeding a
  // fixed voltage through the line; electrical power E'·V∞·sin(δ−θ∞)/X_total.
  const double h = 3.5, damping = 1.5, x_machine = 0.25, x_line = 0.4;
  const std::complex<double> v1 = std::polar(pf.v_mag[0], pf.v_ang[0]);
  const std::complex<double> s(pf.gen_p[0], pf.gen_q[0]);
  const std::complex<double> current = std::conj(s / v1);
  const std::complex<double> emf = v1 + std::complex<double>(0.0, x_machine) * current;
  const double sync_coeff = std::abs(emf) * pf.v_mag[1] *
                            std::cos(std::arg(emf) - pf.v_ang[1]) /
                            (x_machine + x_line);
  const double omega_s = 2.0 * kPi * net.freq_hz;

  CHECK(a(0, 0) == 0.0);
  CHECK(a(0, 1) == doctest::Approx(omega_s).epsilon(1e-9));
  CHECK(a(1, 0) == doctest::Approx(-sync_coeff / (2.0 * h)).epsilon(1e-6));
  CHECK(a(1, 1) == doctest::Approx(-damping / (2.0 * h)).epsilon(1e-6));

  // Modal content of the 2x2: one conjugate pair with the textbook damping.
  const EigenResult modes = modal_analysis(a);
  REQUIRE(modes.retained.size() == 2);
  const double sigma = -damping / (4.0 * h);
  const double omega =
      std::sqrt(omega_s * sync_coeff / (2.0 * h) - sigma * sigma);
  const double zeta = -sigma / std::hypot(sigma, omega);
  CHECK(modes.zeta_min == doctest::Approx(zeta).epsilon(1e-6));
}

TEST_CASE("every machine contributes ten states and a stabilizer adds one") {
  const NetworkCase c14 = load_named("case14.json");
  const Eigen::VectorXd mid = 0.5 * (c14.free_p_min_mw() + c14.free_p_max_mw());
  const PowerFlowResult pf14 = solve_power_flow(c14, Outage{}, mid);
  REQUIRE(pf14.converged);
  const Eigen::MatrixXd a14 = linearize(c14, Outage{}, pf14);
  CHECK(a14.rows() == 50);  // five machines, ten states each
  CHECK(a14.cols() == 50);

  NetworkCase c9 = load_named("case9.json");
  DispatchPoint d9(2);
  d9 << 120.0, 80.0;
  const PowerFlowResult pf9 = solve_power_flow(c9, Outage{}, d9);
  REQUIRE(pf9.converged);
  CHECK(linearize(c9, Outage{}, pf9).rows() == 30);

  c9.generators[1].machine.has_pss = true;
  c9.generators[1].machine.ks = 2.0;
  c9.generators[1].machine.tw = 10.0;
  const Eigen::MatrixXd a_pss = linearize(c9, Outage{}, pf9);
  CHECK(a_pss.rows() == 31);
}

TEST_CASE("linearization is deterministic") {
  const NetworkCase net = load_named("case9.json");
  DispatchPoint d(2);
  d << 100.0, 60.0;
  const PowerFlowResult pf = solve_power_flow(net, Outage{}, d);
  REQUIRE(pf.converged);
  const Eigen::MatrixXd a1 = linearize(net, Outage{}, pf);
  const Eigen::MatrixXd a2 = linearize(net, Outage{}, pf);
  REQUIRE(a1.size() == a2.size());
  CHECK(std::memcmp(a1.data(), a2.data(), sizeof(double) * std::size_t(a1.size())) == 0);
}

TEST_CASE("eigenvalues match an independent polynomial root finder") {
  Rng rng(907);
  for (int rep = 0; rep < 4; ++rep) {
    Eigen::MatrixXd a(8, 8);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
    CAPTURE(rep);

    const EigenResult modes = modal_analysis(a);
    auto roots = poly_roots(a);
    REQUIRE(roots.size() == 8);

    // Greedy nearest matching between the two spectra.
    std::vector<bool> used(8, false);
    for (int i = 0; i < 8; ++i) {
      double best = 1e300;
      int at = -1;
      for (int j = 0; j < 8; ++j) {
        if (used[std::size_t(j)]) continue;
        const double dist = std::abs(modes.eigenvalues[i] - roots[std::size_t(j)]);
        if (dist < best) {
          best = dist;
          at = j;
        }
      }
      used[std::size_t(at)] = true;
      CHECK(best <= 1e-8);
    }
  }
}

TEST_CASE("spectra close under conjugation with equal damping in each pair") {
  const NetworkCase net = load_named("case9.json");
  DispatchPoint d(2);
  d << 140.0, 70.0;
  const PowerFlowResult pf = solve_power_flow(net, Outage{}, d);
  REQUIRE(pf.converged);
  const Eigen::MatrixXd a = linearize(net, Outage{}, pf);
  const EigenResult modes = modal_analysis(a);

  const int n = int(modes.eigenvalues.size());
  for (int i = 0; i < n; ++i) {
    const std::complex<double> l = modes.eigenvalues[i];
    if (std::abs(l.imag()) < 1e-9) continue;
    double best = 1e300;
    int partner = -1;
    for (int j = 0; j < n; ++j) {
      const double dist = std::abs(modes.eigenvalues[j] - std::conj(l));
      if (dist < best) {
        best = dist;
        partner = j;
      }
    }
    CAPTURE(i);
    CHECK(best <= 1e-9 * std::max(1.0, std::abs(l)));
    CHECK(modes.damping[i] == doctest::Approx(modes.damping[partner]).epsilon(1e-9));
  }

  // Left eigenvectors: psi^T A = lambda psi^T for the lowest-damped mode.
  REQUIRE(modes.min_index >= 0);
  const Eigen::VectorXcd psi = modes.left_vectors.col(modes.min_index);
  const Eigen::RowVectorXcd lhs = psi.transpose() * a.cast<std::complex<double>>();
  const Eigen::RowVectorXcd rhs =
      modes.eigenvalues[modes.min_index] * psi.transpose();
  CHECK((lhs - rhs).norm() <= 1e-8 * rhs.norm());
}

TEST_CASE("damping formula, retention rules, and zero-mode exclusion") {
  SUBCASE("real stable modes are fully damped") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
    a(0, 0) = -1.0;
    a(1, 1) = -2.0;
    const EigenResult modes = modal_analysis(a);
    CHECK(modes.retained.size() == 2);
    CHECK(modes.zeta_min == doctest::Approx(1.0).epsilon(1e-12));

    DynamicsOptions osc;
    osc.oscillatory_only = true;
    const EigenResult none = modal_analysis(a, osc);
    CHECK(none.retained.empty());
    CHECK(none.zeta_min == 1.0);
    CHECK(none.min_index == -1);
  }
  SUBCASE("an oscillatory pair evaluates the damping formula") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
    a(0, 0) = -0.03;
    a(0, 1) = 1.0;
    a(1, 0) = -1.0;
    a(1, 1) = -0.03;
    a(2, 2) = -5.0;
    const EigenResult modes = modal_analysis(a);
    CHECK(modes.zeta_min == doctest::Approx(0.03 / std::sqrt(1.0009)).epsilon(1e-9));
    CHECK(std::abs(modes.eigenvalues[modes.min_index].imag()) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("a multi-machine system without a stiff source carries one zero mode") {
    const NetworkCase net = load_named("case9.json");
    DispatchPoint d(2);
    d << 100.0, 60.0;
    const PowerFlowResult pf = solve_power_flow(net, Outage{}, d);
    REQUIRE(pf.converged);
    const EigenResult modes = modal_analysis(linearize(net, Outage{}, pf));
    int zero_modes = 0;
    for (int i = 0; i < modes.eigenvalues.size(); ++i) {
      if (std::abs(modes.eigenvalues[i]) <= 1e-6) {
        ++zero_modes;
        CHECK(std::isnan(modes.damping[i]));
        CHECK(std::find(modes.retained.begin(), modes.retained.end(), i) ==
              modes.retained.end());
      }
    }
    CHECK(zero_modes == 1);
    CHECK(modes.zeta_min > 0.0);
  }
  SUBCASE("a stiff source anchors the angle and removes the zero mode") {
    const NetworkCase net = load_named("twin.json");
    DispatchPoint d(2);
    d << 60.0, 60.0;
    const PowerFlowResult pf = solve_power_flow(net, Outage{}, d);
    REQUIRE(pf.converged);
    const EigenResult modes = modal_analysis(linearize(net, Outage{}, pf));
    CHECK(modes.eigenvalues.size() == 20);
    for (int i = 0; i < modes.eigenvalues.size(); ++i)
      CHECK(std::abs(modes.eigenvalues[i]) > 1e-6);
  }
}

TEST_CASE("gradient components are equal for a symmetric twin-machine system") {
  const NetworkCase net = load_named("twin.json");
  DispatchPoint d(2);
  d << 55.0, 55.0;
  const StabilityGradient grad = damping_gradient(net, Outage{}, d, 0.5, true);
  REQUIRE(grad.defined.size() == 2);
  REQUIRE(grad.defined[0]);
  REQUIRE(grad.defined[1]);
  CHECK(grad.d_zeta[0] == doctest::Approx(grad.d_zeta[1]).epsilon(1e-6));
  CHECK(std::isfinite(grad.base_zeta));
}

TEST_CASE("finite-difference gradients converge as the step shrinks") {
  const NetworkCase net = load_named("case9.json");
  Rng rng(411);
  int smooth_points = 0;
  while (smooth_points < 5) {
    DispatchPoint d(2);
    d << rng.uniform(40.0, 170.0), rng.uniform(30.0, 130.0);
    const StabilityGradient coarse = damping_gradient(net, Outage{}, d, 0.5, true);
    const StabilityGradient fine = damping_gradient(net, Outage{}, d, 0.25, true);
    if (!coarse.defined[0] || !coarse.defined[1] || !fine.defined[0] || !fine.defined[1])
      continue;
    ++smooth_points;
    CAPTURE(d[0]);
    CAPTURE(d[1]);
    for (int i = 0; i < 2; ++i) {
      const double rel = std::abs(coarse.d_zeta[i] - fine.d_zeta[i]) /
                         std::max(std::abs(fine.d_zeta[i]), 1e-12);
      CHECK(rel <= 1e-3);
    }
  }

  // Forward differences approach the central value at first order.
  DispatchPoint d(2);
  d << 150.0, 90.0;
  const StabilityGradient central = damping_gradient(net, Outage{}, d, 0.125, true);
  const StabilityGradient f1 = damping_gradient(net, Outage{}, d, 1.0, false);
  const StabilityGradient f2 = damping_gradient(net, Outage{}, d, 0.5, false);
  for (int i = 0; i < 2; ++i) {
    REQUIRE(central.defined[std::size_t(i)]);
    const double e1 = std::abs(f1.d_zeta[i] - central.d_zeta[i]);
    const double e2 = std::abs(f2.d_zeta[i] - central.d_zeta[i]);
    CHECK(e2 <= 0.75 * e1);  // halving the step at least nearly halves the error
  }
}

TEST_CASE("analytic eigenvalue sensitivity matches the perturbation gradient") {
  const NetworkCase net = load_named("case9.json");
  DispatchPoint d(2);
  d << 163.0, 85.0;
  const double h = 0.5;

  const auto a_of = [&](const DispatchPoint& point) {
    const PowerFlowResult pf = solve_power_flow(net, Outage{}, point);
    REQUIRE(pf.converged);
    return linearize(net, Outage{}, pf);
  };

  const Eigen::MatrixXd a0 = a_of(d);
  const EigenResult modes = modal_analysis(a0);
  REQUIRE(modes.min_index >= 0);
  const int n_mode = modes.min_index;
  const std::complex<double> lambda = modes.eigenvalues[n_mode];
  const Eigen::VectorXcd phi = modes.right_vectors.col(n_mode);
  const Eigen::VectorXcd psi = modes.left_vectors.col(n_mode);
  const std::complex<double> denom = (psi.transpose() * phi)(0, 0);
  REQUIRE(std::abs(denom) > 1e-12);

  const StabilityGradient numeric = damping_gradient(net, Outage{}, d, h, true);

  for (int i = 0; i < 2; ++i) {
    REQUIRE(numeric.defined[std::size_t(i)]);
    DispatchPoint up = d, down = d;
    up[i] += h;
    down[i] -= h;
    const Eigen::MatrixXd da = (a_of(up) - a_of(down)) / (2.0 * h);
    const std::complex<double> dlambda =
        (psi.transpose() * da.cast<std::complex<double>>() * phi)(0, 0) / denom;

    // Chain rule from eigenvalue drift to damping-ratio drift.
    const double sigma = lambda.real(), omega = lambda.imag();
    const double mag3 = std::pow(sigma * sigma + omega * omega, 1.5);
    const double analytic =
        omega * (sigma * dlambda.imag() - omega * dlambda.real()) / mag3;

    CAPTURE(i);
    const double rel = std::abs(analytic - numeric.d_zeta[i]) /
                       std::max(std::abs(numeric.d_zeta[i]), 1e-12);
    CHECK(rel <= 1e-3);
  }
}

TEST_CASE("unusable operating points are reported, not silently scored") {
  const NetworkCase net = load_named("case9.json");

  SUBCASE("a diverged power flow is rejected by the linearization") {
    PowerFlowResult bad;
    bad.converged = false;
    CHECK_THROWS_AS((void)linearize(net, Outage{}, bad), Error);
  }
  SUBCASE("an absurd dispatch reports power-flow divergence") {
    DispatchPoint d(2);
    d << 5000.0, 5000.0;
    const DampingEval ev = minimum_damping(net, Outage{}, d);
    CHECK_FALSE(ev.valid);
    CHECK(ev.failure == "power flow diverged");
  }
  SUBCASE("malformed state matrices are rejected") {
    CHECK_THROWS_AS((void)modal_analysis(Eigen::MatrixXd::Zero(2, 3)), Error);
    Eigen::MatrixXd nan_matrix = Eigen::MatrixXd::Zero(2, 2);
    nan_matrix(0, 0) = std::nan("");
    CHECK_THROWS_AS((void)modal_analysis(nan_matrix), Error);
  }
  SUBCASE("gradient input validation") {
    DispatchPoint d(2);
    d << 100.0, 60.0;
    CHECK_THROWS_AS((void)damping_gradient(net, Outage{}, d, 0.0), Error);
    DispatchPoint wrong(3);
    wrong << 1.0, 2.0, 3.0;
    CHECK_THROWS_AS((void)damping_gradient(net, Outage{}, wrong, 0.5), Error);
  }
}
