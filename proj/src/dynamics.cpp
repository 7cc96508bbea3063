#include "secdb/dynamics.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace secdb {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// One connected machine with its derived constants and state offset.
struct MachineWork {
  const MachineParams* p = nullptr;
  int bus = -1;     // bus index into NetworkCase::buses
  int offset = -1;  // first state index; -1 for an infinite source
  double gamma_d1 = 0.0, gamma_d2 = 0.0;
  double gamma_q1 = 0.0, gamma_q2 = 0.0;
  double vref = 0.0;     // AVR setpoint
  double pm = 0.0;       // mechanical power input, held constant
  double e_const = 0.0;  // classical-model EMF magnitude
};

// Differential-algebraic model around one operating point. States are the
// machine/controller variables; algebraic unknowns are the angle and voltage
// magnitude of every bus not held by an infinite source.
struct DaeModel {
  const NetworkCase* net = nullptr;
  double omega_s = 2.0 * kPi * 60.0;
  Eigen::MatrixXcd ybus;
  std::vector<MachineWork> machines;
  std::vector<int> theta_idx;  // per bus; -1 when the bus voltage is frozen
  std::vector<int> vmag_idx;
  Eigen::VectorXcd frozen_v;   // solved voltage, used for frozen buses
  int n_states = 0;
  int n_alg = 0;
  Eigen::VectorXd x0, y0;

  void residuals(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                 Eigen::VectorXd& f, Eigen::VectorXd& g) const;
};

// State layout per detailed machine:
//   [delta, dw, eq_p, ed_p, psi1d, psi2q, efd, rf, vr, vm, (xw)]
// classical machines carry [delta, dw] only.
void DaeModel::residuals(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                         Eigen::VectorXd& f, Eigen::VectorXd& g) const {
  const int nb = net->bus_count();
  Eigen::VectorXcd v(nb);
  for (int i = 0; i < nb; ++i) {
    if (theta_idx[i] >= 0) {
      v[i] = std::polar(y[vmag_idx[i]], y[theta_idx[i]]);
    } else {
      v[i] = frozen_v[i];
    }
  }

  f.setZero(n_states);
  g.setZero(n_alg);
  Eigen::VectorXd pg = Eigen::VectorXd::Zero(nb);
  Eigen::VectorXd qg = Eigen::VectorXd::Zero(nb);

  for (const MachineWork& m : machines) {
    if (m.offset < 0) continue;  // infinite source: no states, bus frozen
    const MachineParams& mp = *m.p;
    const int off = m.offset;
    const double vmag = std::abs(v[m.bus]);
    const double vang = std::arg(v[m.bus]);
    const double delta = x[off + 0];
    const double dw = x[off + 1];
    const double vd = vmag * std::sin(delta - vang);
    const double vq = vmag * std::cos(delta - vang);

    double id = 0.0, iq = 0.0;
    if (mp.model == MachineModel::Classical) {
      // Constant EMF e_const on the q-axis behind ra + j xd_p.
      const double det = mp.ra * mp.ra + mp.xd_p * mp.xd_p;
      const double r1 = vd;
      const double r2 = vq - m.e_const;
      id = (-mp.ra * r1 - mp.xd_p * r2) / det;
      iq = (mp.xd_p * r1 - mp.ra * r2) / det;
      const double psid = vq + mp.ra * iq;
      const double psiq = -(vd + mp.ra * id);
      const double te = psid * iq - psiq * id;
      f[off + 0] = omega_s * dw;
      f[off + 1] = (m.pm - te - mp.damping * dw) / (2.0 * mp.h);
    } else {
      const double eq_p = x[off + 2];
      const double ed_p = x[off + 3];
      const double psi1d = x[off + 4];
      const double psi2q = x[off + 5];
      const double efd = x[off + 6];
      const double rf = x[off + 7];
      const double vr = x[off + 8];
      const double vm = x[off + 9];
      const double xw = mp.has_pss ? x[off + 10] : 0.0;

      const double psi_d2 = m.gamma_d1 * eq_p + (1.0 - m.gamma_d1) * psi1d;
      const double psi_q2 = -m.gamma_q1 * ed_p + (1.0 - m.gamma_q1) * psi2q;
      const double det = mp.ra * mp.ra + mp.xd_pp * mp.xq_pp;
      const double r1 = vd + psi_q2;
      const double r2 = vq - psi_d2;
      id = (-mp.ra * r1 - mp.xq_pp * r2) / det;
      iq = (mp.xd_pp * r1 - mp.ra * r2) / det;
      const double psid = vq + mp.ra * iq;
      const double psiq = -(vd + mp.ra * id);
      const double te = psid * iq - psiq * id;

      const double vpss = mp.has_pss ? (mp.ks * dw - xw) : 0.0;
      const double vf = (mp.kf / mp.tf) * efd - rf;

      f[off + 0] = omega_s * dw;
      f[off + 1] = (m.pm - te - mp.damping * dw) / (2.0 * mp.h);
      f[off + 2] = (-eq_p -
                    (mp.xd - mp.xd_p) *
                        (id - m.gamma_d2 * (psi1d + (mp.xd_p - mp.xl) * id - eq_p)) +
                    efd) /
                   mp.td0_p;
      f[off + 3] = (-ed_p +
                    (mp.xq - mp.xq_p) *
                        (iq - m.gamma_q2 * (psi2q + (mp.xq_p - mp.xl) * iq + ed_p))) /
                   mp.tq0_p;
      f[off + 4] = (-psi1d + eq_p - (mp.xd_p - mp.xl) * id) / mp.td0_pp;
      f[off + 5] = (-psi2q - ed_p - (mp.xq_p - mp.xl) * iq) / mp.tq0_pp;
      f[off + 6] = (vr - mp.ke * efd) / mp.te;
      f[off + 7] = ((mp.kf / mp.tf) * efd - rf) / mp.tf;
      f[off + 8] = (-vr + mp.ka * (m.vref - vm - vf + vpss)) / mp.ta;
      f[off + 9] = (vmag - vm) / mp.tr;
      if (mp.has_pss) f[off + 10] = (mp.ks * dw - xw) / mp.tw;
    }
    pg[m.bus] += vd * id + vq * iq;
    qg[m.bus] += vq * id - vd * iq;
  }

  // Power balance at every non-frozen bus; loads are constant power, matching
  // the steady-state feasibility model.
  const Eigen::VectorXcd iy = ybus * v;
  for (int i = 0; i < nb; ++i) {
    if (theta_idx[i] < 0) continue;
    const std::complex<double> s_net = v[i] * std::conj(iy[i]);
    g[theta_idx[i]] = pg[i] - net->buses[std::size_t(i)].p_load - s_net.real();
    g[vmag_idx[i]] = qg[i] - net->buses[std::size_t(i)].q_load - s_net.imag();
  }
}

DaeModel build_model(const NetworkCase& net, const Outage& outage,
                     const PowerFlowResult& pf) {
  if (!pf.converged) throw Error("dynamics: power flow did not converge");
  const int nb = net.bus_count();
  if (pf.v_mag.size() != nb || pf.gen_p.size() != net.gen_count())
    throw Error("dynamics: power flow result does not match the case");

  DaeModel model;
  model.net = &net;
  model.omega_s = 2.0 * kPi * net.freq_hz;
  model.ybus = AdmittanceView(net, outage).ybus();
  model.frozen_v = pf.v_complex();

  std::vector<bool> frozen(std::size_t(nb), false);
  for (const auto& gen : net.generators) {
    if (gen.machine.model == MachineModel::InfiniteBus)
      frozen[std::size_t(net.bus_index(gen.bus))] = true;
  }

  model.theta_idx.assign(std::size_t(nb), -1);
  model.vmag_idx.assign(std::size_t(nb), -1);
  int n_free_buses = 0;
  for (int i = 0; i < nb; ++i)
    if (!frozen[std::size_t(i)]) ++n_free_buses;
  model.n_alg = 2 * n_free_buses;
  model.y0.resize(model.n_alg);
  int ord = 0;
  for (int i = 0; i < nb; ++i) {
    if (frozen[std::size_t(i)]) continue;
    model.theta_idx[std::size_t(i)] = ord;
    model.vmag_idx[std::size_t(i)] = n_free_buses + ord;
    model.y0[ord] = pf.v_ang[i];
    model.y0[n_free_buses + ord] = pf.v_mag[i];
    ++ord;
  }

  model.n_states = 0;
  for (const auto& gen : net.generators) model.n_states += gen.machine.state_count();
  if (model.n_states == 0)
    throw Error("dynamics: the case has no machine states (all sources are infinite)");
  model.x0.resize(model.n_states);

  const Eigen::VectorXcd vc = pf.v_complex();
  int off = 0;
  for (int k = 0; k < net.gen_count(); ++k) {
    const auto& gen = net.generators[std::size_t(k)];
    const MachineParams& mp = gen.machine;
    MachineWork w;
    w.p = &mp;
    w.bus = net.bus_index(gen.bus);
    if (mp.model == MachineModel::InfiniteBus) {
      model.machines.push_back(w);
      continue;
    }
    w.offset = off;
    off += mp.state_count();

    const std::complex<double> vt = vc[w.bus];
    const std::complex<double> s(pf.gen_p[k], pf.gen_q[k]);
    const std::complex<double> it = std::conj(s / vt);

    if (mp.model == MachineModel::Classical) {
      const std::complex<double> e = vt + std::complex<double>(mp.ra, mp.xd_p) * it;
      w.e_const = std::abs(e);
      w.pm = pf.gen_p[k] + mp.ra * std::norm(it);
      model.x0[w.offset + 0] = std::arg(e);
      model.x0[w.offset + 1] = 0.0;
    } else {
      const std::complex<double> e = vt + std::complex<double>(mp.ra, mp.xq) * it;
      const double delta = std::arg(e);
      // Rotate network phasors into the machine frame: F_d + jF_q =
      // F * exp(-j(delta - pi/2)).
      const std::complex<double> rot = std::polar(1.0, -(delta - kPi / 2.0));
      const std::complex<double> vdq = vt * rot;
      const std::complex<double> idq = it * rot;
      const double vq = vdq.imag();
      const double id = idq.real();
      const double iq = idq.imag();

      const double ed_p = (mp.xq - mp.xq_p) * iq;
      const double eq_p = vq + mp.ra * iq + mp.xd_p * id;
      const double psi1d = eq_p - (mp.xd_p - mp.xl) * id;
      const double psi2q = -ed_p - (mp.xq_p - mp.xl) * iq;
      const double efd = eq_p + (mp.xd - mp.xd_p) * id;
      const double vmag = std::abs(vt);

      w.gamma_d1 = (mp.xd_pp - mp.xl) / (mp.xd_p - mp.xl);
      w.gamma_d2 = (mp.xd_p - mp.xd_pp) / ((mp.xd_p - mp.xl) * (mp.xd_p - mp.xl));
      w.gamma_q1 = (mp.xq_pp - mp.xl) / (mp.xq_p - mp.xl);
      w.gamma_q2 = (mp.xq_p - mp.xq_pp) / ((mp.xq_p - mp.xl) * (mp.xq_p - mp.xl));
      w.pm = pf.gen_p[k] + mp.ra * std::norm(it);
      w.vref = vmag + mp.ke * efd / mp.ka;

      double* x = model.x0.data() + w.offset;
      x[0] = delta;
      x[1] = 0.0;
      x[2] = eq_p;
      x[3] = ed_p;
      x[4] = psi1d;
      x[5] = psi2q;
      x[6] = efd;
      x[7] = (mp.kf / mp.tf) * efd;
      x[8] = mp.ke * efd;
      x[9] = vmag;
      if (mp.has_pss) x[10] = 0.0;
    }
    model.machines.push_back(w);
  }

  // The initialized state must be an exact equilibrium of the model; a large
  // residual means the machine data and the power flow disagree.
  Eigen::VectorXd f, g;
  model.residuals(model.x0, model.y0, f, g);
  const double worst =
      std::max(f.size() ? f.cwiseAbs().maxCoeff() : 0.0,
               g.size() ? g.cwiseAbs().maxCoeff() : 0.0);
  if (!(worst < 1e-6))
    throw Error("dynamics: initialization residual " + std::to_string(worst) +
                " exceeds tolerance; machine data inconsistent with the power flow");
  return model;
}

}  // namespace

double damping_ratio(std::complex<double> lambda) {
  const double mag = std::abs(lambda);
  if (mag == 0.0) return 0.0;
  return -lambda.real() / mag;
}

Eigen::MatrixXd linearize(const NetworkCase& net, const Outage& outage,
                          const PowerFlowResult& pf) {
  const DaeModel model = build_model(net, outage, pf);
  const int nx = model.n_states;
  const int ny = model.n_alg;

  Eigen::MatrixXd fx(nx, nx), fy(nx, ny), gx(ny, nx), gy(ny, ny);
  Eigen::VectorXd fp, gp, fm, gm;
  Eigen::VectorXd x = model.x0, y = model.y0;

  for (int j = 0; j < nx; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(model.x0[j]));
    x[j] = model.x0[j] + h;
    model.residuals(x, y, fp, gp);
    x[j] = model.x0[j] - h;
    model.residuals(x, y, fm, gm);
    x[j] = model.x0[j];
    fx.col(j) = (fp - fm) / (2.0 * h);
    gx.col(j) = (gp - gm) / (2.0 * h);
  }
  for (int k = 0; k < ny; ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(model.y0[k]));
    y[k] = model.y0[k] + h;
    model.residuals(x, y, fp, gp);
    y[k] = model.y0[k] - h;
    model.residuals(x, y, fm, gm);
    y[k] = model.y0[k];
    fy.col(k) = (fp - fm) / (2.0 * h);
    gy.col(k) = (gp - gm) / (2.0 * h);
  }

  if (ny == 0) return fx;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(gy);
  if (!lu.isInvertible())
    throw Error("dynamics: singular algebraic Jacobian (voltage-collapse vicinity)");
  return fx - fy * lu.solve(gx);
}

EigenResult modal_analysis(const Eigen::MatrixXd& a_matrix, const DynamicsOptions& opt) {
  if (a_matrix.rows() != a_matrix.cols() || a_matrix.rows() == 0)
    throw Error("modal_analysis: state matrix must be square and non-empty");
  if (!a_matrix.allFinite())
    throw Error("modal_analysis: state matrix has non-finite entries");
  if (!(opt.zero_mode_tol >= 0))
    throw Error("modal_analysis: zero-mode tolerance must be non-negative");

  Eigen::EigenSolver<Eigen::MatrixXd> es(a_matrix);
  if (es.info() != Eigen::Success)
    throw Error("modal_analysis: eigensolver did not converge");

  EigenResult r;
  r.eigenvalues = es.eigenvalues();
  r.right_vectors = es.eigenvectors();
  // Left eigenvectors: psi_n^T A = lambda_n psi_n^T, i.e. the rows of the
  // inverse right-eigenvector matrix (stored as columns, unconjugated).
  r.left_vectors =
      r.right_vectors.fullPivLu()
          .solve(Eigen::MatrixXcd::Identity(a_matrix.rows(), a_matrix.cols()))
          .transpose();

  const int n = int(r.eigenvalues.size());
  r.damping.resize(n);
  r.zeta_min = 1.0;
  r.min_index = -1;
  for (int i = 0; i < n; ++i) {
    const std::complex<double> l = r.eigenvalues[i];
    if (std::abs(l) <= opt.zero_mode_tol) {
      r.damping[i] = kNan;
      continue;
    }
    r.damping[i] = damping_ratio(l);
    if (opt.oscillatory_only && std::abs(l.imag()) <= opt.zero_mode_tol) continue;
    r.retained.push_back(i);
    if (r.damping[i] < r.zeta_min) {
      r.zeta_min = r.damping[i];
      r.min_index = i;
    }
  }
  return r;
}

DampingEval minimum_damping(const NetworkCase& net, const Outage& outage,
                            const DispatchPoint& dispatch_mw,
                            const DynamicsOptions& dopt, const PowerFlowOptions& popt) {
  DampingEval out;
  const PowerFlowResult pf = solve_power_flow(net, outage, dispatch_mw, popt);
  if (!pf.converged) {
    out.failure = "power flow diverged";
    return out;
  }
  try {
    const Eigen::MatrixXd a = linearize(net, outage, pf);
    const EigenResult modes = modal_analysis(a, dopt);
    out.valid = true;
    out.zeta_min = modes.zeta_min;
  } catch (const Error& e) {
    out.failure = e.what();
  }
  return out;
}

StabilityGradient damping_gradient(const NetworkCase& net, const Outage& outage,
                                   const DispatchPoint& dispatch_mw, double step_mw,
                                   bool central, const DynamicsOptions& dopt,
                                   const PowerFlowOptions& popt,
                                   std::optional<double> base_zeta) {
  if (!(step_mw > 0)) throw Error("damping_gradient: step must be positive");
  const int n = int(dispatch_mw.size());
  if (n != int(net.free_generators().size()))
    throw Error("damping_gradient: dispatch dimension mismatch");

  const auto eval = [&](const DispatchPoint& d) {
    return minimum_damping(net, outage, d, dopt, popt);
  };
  DampingEval base;
  if (base_zeta.has_value() && std::isfinite(*base_zeta)) {
    base.valid = true;
    base.zeta_min = *base_zeta;
  } else {
    base = eval(dispatch_mw);
  }

  StabilityGradient grad;
  grad.step_mw = step_mw;
  grad.base_zeta = base.valid ? base.zeta_min : kNan;
  grad.d_zeta = Eigen::VectorXd::Constant(n, kNan);
  grad.defined.assign(std::size_t(n), false);

  for (int i = 0; i < n; ++i) {
    DispatchPoint up = dispatch_mw;
    up[i] += step_mw;
    DispatchPoint down = dispatch_mw;
    down[i] -= step_mw;

    double value = kNan;
    if (central) {
      const DampingEval zp = eval(up);
      const DampingEval zm = eval(down);
      if (zp.valid && zm.valid) {
        value = (zp.zeta_min - zm.zeta_min) / (2.0 * step_mw);
      } else if (zp.valid && base.valid) {
        value = (zp.zeta_min - base.zeta_min) / step_mw;
      } else if (zm.valid && base.valid) {
        value = (base.zeta_min - zm.zeta_min) / step_mw;
      }
    } else {
      const DampingEval zp = eval(up);
      if (zp.valid && base.valid) {
        value = (zp.zeta_min - base.zeta_min) / step_mw;
      } else if (base.valid) {
        const DampingEval zm = eval(down);
        if (zm.valid) value = (base.zeta_min - zm.zeta_min) / step_mw;
      }
    }
    if (std::isfinite(value)) {
      grad.d_zeta[i] = value;
      grad.defined[std::size_t(i)] = true;
    }
  }
  return grad;
}

}  // namespace secdb
