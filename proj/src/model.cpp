#include "rkf/model.hpp"

#include "rkf/contamination.hpp"
#include "rkf/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rkf {

MatrixFn constant(Mat m) {
  return [m = std::move(m)](int) { return m; };
}

namespace {

template <class F>
decltype(auto) visit_model(const Model& m, F&& fn) {
  return std::visit(std::forward<F>(fn), m);
}

Mat diag(std::initializer_list<double> d) {
  Vec v(static_cast<Eigen::Index>(d.size()));
  Eigen::Index i = 0;
  for (double x : d) v(i++) = x;
  return v.asDiagonal();
}

Vec vec(std::initializer_list<double> d) {
  Vec v(static_cast<Eigen::Index>(d.size()));
  Eigen::Index i = 0;
  for (double x : d) v(i++) = x;
  return v;
}

void check_shape(const Mat& m, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols)
    throw DimensionMismatch(what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                            ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

}  // namespace

int state_dim(const Model& m) {
  return visit_model(m, [](const auto& x) { return x.p; });
}
int obs_dim(const Model& m) {
  return visit_model(m, [](const auto& x) { return x.q; });
}
const std::string& model_name(const Model& m) {
  return visit_model(m, [](const auto& x) -> const std::string& { return x.name; });
}
const Vec& initial_mean(const Model& m) {
  return visit_model(m, [](const auto& x) -> const Vec& { return x.a0; });
}
const Mat& initial_cov(const Model& m) {
  return visit_model(m, [](const auto& x) -> const Mat& { return x.Q0; });
}

void validate(const Model& model, int horizon) {
  const int p = state_dim(model);
  const int q = obs_dim(model);
  if (p <= 0 || q <= 0) throw InvalidModel("model dimensions must be positive");
  check_shape(initial_mean(model), p, 1, "a0");
  require_psd(initial_cov(model), "Q0");
  check_shape(initial_cov(model), p, p, "Q0");
  if (const auto* lin = std::get_if<LinearSSM>(&model)) {
    if (!lin->F || !lin->Z || !lin->Q || !lin->V) throw InvalidModel("linear model is missing F, Z, Q or V");
    for (int t = 1; t <= horizon; ++t) {
      const std::string at = " at t=" + std::to_string(t);
      check_shape(lin->F(t), p, p, "F" + at);
      check_shape(lin->Z(t), q, p, "Z" + at);
      check_shape(lin->Q(t), p, p, "Q" + at);
      check_shape(lin->V(t), q, q, "V" + at);
      require_psd(lin->Q(t), "Q" + at);
      require_psd(lin->V(t), "V" + at);
    }
  } else {
    const auto& nl = std::get<NonlinearSSM>(model);
    if (!nl.f || !nl.z || !nl.Q || !nl.V) throw InvalidModel("nonlinear model is missing f, z, Q or V");
    check_shape(nl.v_bar, nl.dim_v, 1, "v_bar");
    check_shape(nl.eps_bar, nl.dim_eps, 1, "eps_bar");
    for (int t = 1; t <= horizon; ++t) {
      const std::string at = " at t=" + std::to_string(t);
      check_shape(nl.Q(t), nl.dim_v, nl.dim_v, "Q" + at);
      check_shape(nl.V(t), nl.dim_eps, nl.dim_eps, "V" + at);
      require_psd(nl.Q(t), "Q" + at);
      require_psd(nl.V(t), "V" + at);
    }
  }
}

NonlinearSSM wrap_linear(const LinearSSM& m) {
  NonlinearSSM out;
  out.name = m.name;
  out.p = m.p;
  out.q = m.q;
  out.dim_v = m.p;
  out.dim_eps = m.q;
  auto F = m.F;
  auto Z = m.Z;
  out.f = [F](int t, const Vec& x, const Vec&, const Vec& v) -> Vec { return F(t) * x + v; };
  out.z = [Z](int t, const Vec& x, const Vec&, const Vec& e) -> Vec { return Z(t) * x + e; };
  out.jac_f_x = [F](int t, const Vec&, const Vec&, const Vec&) { return F(t); };
  const int p = m.p;
  const int q = m.q;
  out.jac_f_v = [p](int, const Vec&, const Vec&, const Vec&) -> Mat { return Mat::Identity(p, p); };
  out.jac_z_x = [Z](int t, const Vec&, const Vec&, const Vec&) { return Z(t); };
  out.jac_z_eps = [q](int, const Vec&, const Vec&, const Vec&) -> Mat { return Mat::Identity(q, q); };
  out.v_bar = Vec::Zero(p);
  out.eps_bar = Vec::Zero(q);
  out.Q = m.Q;
  out.V = m.V;
  out.a0 = m.a0;
  out.Q0 = m.Q0;
  return out;
}

Vec kronecker_quadratic(const Mat& A, const Vec& x) {
  const Eigen::Index p = x.size();
  Vec kron(p * p);
  for (Eigen::Index l = 0; l < p; ++l) kron.segment(l * p, p) = x(l) * x;
  return A * kron;
}

NonlinearSSM make_quadratic_model(std::string name, QuadraticForm form, Mat Q, Mat V, Vec a0, Mat Q0) {
  const auto p = static_cast<int>(form.B.rows());
  const auto q = static_cast<int>(form.Z.rows());
  check_shape(form.A, p, static_cast<Eigen::Index>(p) * p, "quadratic A");
  check_shape(form.B, p, p, "quadratic B");
  check_shape(form.Z, q, p, "quadratic Z");

  NonlinearSSM m;
  m.name = std::move(name);
  m.p = p;
  m.q = q;
  m.dim_v = p;
  m.dim_eps = q;
  const Mat A = form.A;
  const Mat B = form.B;
  const Mat Z = form.Z;
  // A (x kron x) = sum_l A^l x_l x
  m.f = [A, B, p](int, const Vec& x, const Vec&, const Vec& v) -> Vec {
    Vec out = B * x + v;
    for (int l = 0; l < p; ++l) {
      if (x(l) != 0.0) out.noalias() += x(l) * (A.middleCols(static_cast<Eigen::Index>(l) * p, p) * x);
    }
    return out;
  };
  // d/dx sum_l A^l x_l x = sum_l (A^l x_l + A^l x e_l')
  m.jac_f_x = [A, B, p](int, const Vec& x, const Vec&, const Vec&) -> Mat {
    Mat J = B;
    for (int l = 0; l < p; ++l) {
      const auto Al = A.middleCols(static_cast<Eigen::Index>(l) * p, p);
      J += x(l) * Al;
      J.col(l) += Al * x;
    }
    return J;
  };
  m.jac_f_v = [p](int, const Vec&, const Vec&, const Vec&) -> Mat { return Mat::Identity(p, p); };
  m.z = [Z](int, const Vec& x, const Vec&, const Vec& e) -> Vec { return Z * x + e; };
  m.jac_z_x = [Z](int, const Vec&, const Vec&, const Vec&) { return Z; };
  m.jac_z_eps = [q](int, const Vec&, const Vec&, const Vec&) -> Mat { return Mat::Identity(q, q); };
  m.v_bar = Vec::Zero(p);
  m.eps_bar = Vec::Zero(q);
  m.Q = constant(std::move(Q));
  m.V = constant(std::move(V));
  m.a0 = std::move(a0);
  m.Q0 = std::move(Q0);
  m.quadratic = std::move(form);
  return m;
}

Mat finite_difference_jacobian(const std::function<Vec(const Vec&)>& g, const Vec& x) {
  const double h = 1e-6 * (1.0 + x.norm());
  const Vec g0 = g(x);
  Mat J(g0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vec xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    J.col(j) = (g(xp) - g(xm)) / (2.0 * h);
  }
  return J;
}

Mat transition_jacobian_x(const NonlinearSSM& m, int t, const Vec& x, const Vec& u, const Vec& v) {
  if (m.jac_f_x) return m.jac_f_x(t, x, u, v);
  return finite_difference_jacobian([&](const Vec& xx) { return m.f(t, xx, u, v); }, x);
}

Mat transition_jacobian_v(const NonlinearSSM& m, int t, const Vec& x, const Vec& u, const Vec& v) {
  if (m.jac_f_v) return m.jac_f_v(t, x, u, v);
  return finite_difference_jacobian([&](const Vec& vv) { return m.f(t, x, u, vv); }, v);
}

Mat observation_jacobian_x(const NonlinearSSM& m, int t, const Vec& x, const Vec& w, const Vec& e) {
  if (m.jac_z_x) return m.jac_z_x(t, x, w, e);
  return finite_difference_jacobian([&](const Vec& xx) { return m.z(t, xx, w, e); }, x);
}

Mat observation_jacobian_eps(const NonlinearSSM& m, int t, const Vec& x, const Vec& w, const Vec& e) {
  if (m.jac_z_eps) return m.jac_z_eps(t, x, w, e);
  return finite_difference_jacobian([&](const Vec& ee) { return m.z(t, x, w, ee); }, e);
}

// ---------------------------------------------------------------------------
// Presets

Preset parse_preset(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "sima") return Preset::SimA;
  if (s == "simb") return Preset::SimB;
  if (s == "rw2d" || s == "randomwalk2d") return Preset::RandomWalk2D;
  if (s == "ar2") return Preset::AR2;
  if (s == "m1") return Preset::M1;
  if (s == "m2") return Preset::M2;
  if (s == "m3") return Preset::M3;
  throw InvalidParameter("unknown preset '" + std::string(name) + "'");
}

std::string_view preset_name(Preset p) {
  switch (p) {
    case Preset::SimA: return "sima";
    case Preset::SimB: return "simb";
    case Preset::RandomWalk2D: return "rw2d";
    case Preset::AR2: return "ar2";
    case Preset::M1: return "m1";
    case Preset::M2: return "m2";
    case Preset::M3: return "m3";
  }
  return "?";
}

const std::vector<Preset>& all_presets() {
  static const std::vector<Preset> all{Preset::SimA, Preset::SimB, Preset::RandomWalk2D, Preset::AR2,
                                       Preset::M1,   Preset::M2,   Preset::M3};
  return all;
}

int preset_horizon(Preset p) {
  switch (p) {
    case Preset::SimA:
    case Preset::SimB: return 50;
    case Preset::RandomWalk2D:
    case Preset::AR2: return 100;
    case Preset::M1:
    case Preset::M2:
    case Preset::M3: return 500;
  }
  return 50;
}

double VehicleDriver::speed(int t) const {
  return mean_speed + speed_amplitude * std::sin(2.0 * std::numbers::pi * t / speed_period);
}

namespace {

LinearSSM linear(std::string name, Mat F, Mat Z, Mat Q, Mat V, Vec a0, Mat Q0) {
  LinearSSM m;
  m.name = std::move(name);
  m.p = static_cast<int>(F.rows());
  m.q = static_cast<int>(Z.rows());
  m.F = constant(std::move(F));
  m.Z = constant(std::move(Z));
  m.Q = constant(std::move(Q));
  m.V = constant(std::move(V));
  m.a0 = std::move(a0);
  m.Q0 = std::move(Q0);
  return m;
}

LinearSSM build_sima() {
  const Mat one = Mat::Constant(1, 1, 1.0);
  return linear("sima", one, one, one, one, vec({1.0}), one);
}

LinearSSM build_simb() {
  Mat F(3, 3);
  F << 1, 1, 0,
       0, 1, 1,
       0, 0, 0;
  Mat Z(2, 3);
  Z << 1, 0, 0,
       0, 0, 1;
  return linear("simb", F, Z, diag({0, 0, 0.001}), diag({0.1, 0.001}), Vec::Zero(3), diag({1, 0.1, 0.001}));
}

LinearSSM build_rw2d() {
  Mat F(2, 2);
  F << 1, 1,
       0, 0;
  Mat Z(2, 2);
  Z << 0.3, 1,
       -0.3, 1;
  return linear("rw2d", F, Z, diag({0, 9}), diag({9, 9}), vec({20, 0}), Mat::Zero(2, 2));
}

LinearSSM build_ar2() {
  Mat F(2, 2);
  F << 1, -0.9,
       1, 0;
  Mat Z(1, 2);
  Z << 1, 0;
  return linear("ar2", F, Z, diag({1, 0}), diag({1}), Vec::Zero(2), Mat::Zero(2, 2));
}

}  // namespace

LinearSSM build_m1(const VehicleDriver& d) {
  Mat F(3, 3);
  F << 1, 1, 0,
       0, 1, 1,
       0, 0, 0;
  Mat Z(2, 3);
  Z << 1, 0, 0,
       0, 0, 1;
  return linear("m1", F, Z, diag({0, 0, 0.01}), diag({5, 0.01}), vec({d.initial_altitude, 0, 0}),
                diag({5, 1, 0.01}));
}

LinearSSM build_m2(const VehicleDriver& d) {
  Mat Z(2, 3);
  Z << 1, 0, 0,
       0, 0, 1;
  LinearSSM m = linear("m2", Mat::Identity(3, 3), Z, diag({0, 0, 0.05}), diag({5, 0.005}),
                       vec({d.initial_altitude, 0, 0}), diag({5, 0.005, 0.005}));
  // The transition into t uses the speed recorded at t-1; sp_0 is taken as sp_1.
  m.F = [d](int t) -> Mat {
    const double sp = d.speed(std::max(1, t - 1));
    Mat F(3, 3);
    F << 1, sp * d.dt, 0,
         0, 1, d.dt,
         0, 0, 0;
    return F;
  };
  return m;
}

NonlinearSSM build_m3(const VehicleDriver& d) {
  const int p = 5;
  QuadraticForm form;
  form.A = Mat::Zero(p, p * p);
  // Block A^2 (multiplies [x]_2 = speed) carries dt in row 1, column 4: h += dt sp alpha.
  form.A(0, 1 * p + 3) = d.dt;
  form.B = Mat::Zero(p, p);
  form.B(0, 0) = 1;
  form.B(1, 1) = 1;
  form.B(1, 2) = d.dt;
  form.B(3, 3) = 1;
  form.B(3, 4) = d.dt;
  form.Z = Mat::Zero(4, p);
  form.Z(0, 0) = 1;
  form.Z(1, 1) = 1;
  form.Z(2, 2) = 1;
  form.Z(3, 4) = 1;
  return make_quadratic_model("m3", std::move(form), diag({0, 0, 2, 0, 0.005}), diag({5, 2, 2, 0.005}),
                              vec({d.initial_altitude, d.speed(1), 0, 0, 0}), diag({5, 2, 2, 0.005, 0.005}));
}

Model build_preset(Preset p) {
  switch (p) {
    case Preset::SimA: return build_sima();
    case Preset::SimB: return build_simb();
    case Preset::RandomWalk2D: return build_rw2d();
    case Preset::AR2: return build_ar2();
    case Preset::M1: return build_m1();
    case Preset::M2: return build_m2();
    case Preset::M3: return build_m3();
  }
  throw InvalidParameter("unknown preset");
}

Trajectory simulate_ideal(const Model& model, int T, std::uint64_t seed) {
  return Simulator(model, T).ideal(seed);
}

// ---------------------------------------------------------------------------

double JacobianReport::max_deviation() const { return std::max({f_x, f_v, z_x, z_eps}); }

namespace {

double relative_deviation(const Mat& user, const Mat& fd) {
  if (user.rows() != fd.rows() || user.cols() != fd.cols()) return kInf;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < fd.rows(); ++i)
    for (Eigen::Index j = 0; j < fd.cols(); ++j)
      worst = std::max(worst, std::abs(user(i, j) - fd(i, j)) / std::max(1.0, std::abs(fd(i, j))));
  return worst;
}

}  // namespace

JacobianReport jacobian_check(const NonlinearSSM& m, const Vec& x, int t, double tol) {
  JacobianReport r;
  r.tol = tol;
  const Vec u = m.control_u(t);
  const Vec w = m.control_w(t);
  const auto fx = [&](const Vec& xx) { return m.f(t, xx, u, m.v_bar); };
  const auto fv = [&](const Vec& vv) { return m.f(t, x, u, vv); };
  const auto zx = [&](const Vec& xx) { return m.z(t, xx, w, m.eps_bar); };
  const auto ze = [&](const Vec& ee) { return m.z(t, x, w, ee); };
  if (m.jac_f_x) {
    r.analytic_f_x = true;
    r.f_x = relative_deviation(m.jac_f_x(t, x, u, m.v_bar), finite_difference_jacobian(fx, x));
  }
  if (m.jac_f_v) {
    r.analytic_f_v = true;
    r.f_v = relative_deviation(m.jac_f_v(t, x, u, m.v_bar), finite_difference_jacobian(fv, m.v_bar));
  }
  if (m.jac_z_x) {
    r.analytic_z_x = true;
    r.z_x = relative_deviation(m.jac_z_x(t, x, w, m.eps_bar), finite_difference_jacobian(zx, x));
  }
  if (m.jac_z_eps) {
    r.analytic_z_eps = true;
    r.z_eps = relative_deviation(m.jac_z_eps(t, x, w, m.eps_bar), finite_difference_jacobian(ze, m.eps_bar));
  }
  return r;
}

}  // namespace rkf
