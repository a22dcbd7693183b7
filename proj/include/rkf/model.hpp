#pragma once

#include "rkf/linalg.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace rkf {

/// Time-indexed hyper-parameter; t is 1-based (t = 1 is the first transition).
using MatrixFn = std::function<Mat(int t)>;
using VectorFn = std::function<Vec(int t)>;

MatrixFn constant(Mat m);

/// X_t = F_t X_{t-1} + v_t, Y_t = Z_t X_t + eps_t, X_0 ~ N(a0, Q0).
struct LinearSSM {
  std::string name;
  int p = 0;
  int q = 0;
  MatrixFn F, Z, Q, V;
  Vec a0;
  Mat Q0;
};

using TransitionFn = std::function<Vec(int t, const Vec& x, const Vec& u, const Vec& v)>;
using ObservationFn = std::function<Vec(int t, const Vec& x, const Vec& w, const Vec& eps)>;
using TransitionJac = std::function<Mat(int t, const Vec& x, const Vec& u, const Vec& v)>;
using ObservationJac = std::function<Mat(int t, const Vec& x, const Vec& w, const Vec& eps)>;

/// f(x) = A (x kron x) + B x + v with A = (A^1 | ... | A^p), observed as Z x + eps.
/// Kept alongside the closures so the model can be written back to a config.
struct QuadraticForm {
  Mat A;  // p x p^2
  Mat B;  // p x p
  Mat Z;  // q x p
};

/// X_t = f_t(X_{t-1}, u_t, v_t), Y_t = z_t(X_t, w_t, eps_t).
/// Empty Jacobian callables fall back to central finite differences.
struct NonlinearSSM {
  std::string name;
  int p = 0;
  int q = 0;
  int dim_v = 0;
  int dim_eps = 0;
  TransitionFn f;
  ObservationFn z;
  TransitionJac jac_f_x, jac_f_v;
  ObservationJac jac_z_x, jac_z_eps;
  Vec v_bar;
  Vec eps_bar;
  MatrixFn Q;  // dim_v x dim_v
  MatrixFn V;  // dim_eps x dim_eps
  Vec a0;
  Mat Q0;
  VectorFn u;  // controls; empty means no control input
  VectorFn w;
  std::optional<QuadraticForm> quadratic;

  Vec control_u(int t) const { return u ? u(t) : Vec(); }
  Vec control_w(int t) const { return w ? w(t) : Vec(); }
};

using Model = std::variant<LinearSSM, NonlinearSSM>;

int state_dim(const Model& m);
int obs_dim(const Model& m);
const std::string& model_name(const Model& m);
const Vec& initial_mean(const Model& m);
const Mat& initial_cov(const Model& m);

/// Checks dimensions and PSD-ness of the covariances at t = 1..horizon.
void validate(const Model& m, int horizon);

/// The linear model written as f(x) = F x + v, z(x) = Z x + eps with exact Jacobians.
NonlinearSSM wrap_linear(const LinearSSM& m);

NonlinearSSM make_quadratic_model(std::string name, QuadraticForm form, Mat Q, Mat V, Vec a0, Mat Q0);

/// Evaluates A (x kron x) explicitly through the Kronecker product.
Vec kronecker_quadratic(const Mat& A, const Vec& x);

/// Jacobians evaluated analytically or by central finite differences.
Mat transition_jacobian_x(const NonlinearSSM& m, int t, const Vec& x, const Vec& u, const Vec& v);
Mat transition_jacobian_v(const NonlinearSSM& m, int t, const Vec& x, const Vec& u, const Vec& v);
Mat observation_jacobian_x(const NonlinearSSM& m, int t, const Vec& x, const Vec& w, const Vec& e);
Mat observation_jacobian_eps(const NonlinearSSM& m, int t, const Vec& x, const Vec& w, const Vec& e);

/// Central finite-difference Jacobian of g at x with step h = 1e-6 (1 + |x|).
Mat finite_difference_jacobian(const std::function<Vec(const Vec&)>& g, const Vec& x);

enum class Preset { SimA, SimB, RandomWalk2D, AR2, M1, M2, M3 };

Preset parse_preset(std::string_view name);
std::string_view preset_name(Preset p);
const std::vector<Preset>& all_presets();

Model build_preset(Preset p);
int preset_horizon(Preset p);

/// Synthetic stand-ins for the vehicle channels the application models consume.
struct VehicleDriver {
  double dt = 0.1;
  double initial_altitude = 250.0;
  double mean_speed = 15.0;
  double speed_amplitude = 3.0;
  double speed_period = 300.0;  // steps
  double speed(int t) const;    // sp_t, t >= 1
};

LinearSSM build_m1(const VehicleDriver& d = {});
LinearSSM build_m2(const VehicleDriver& d = {});
NonlinearSSM build_m3(const VehicleDriver& d = {});

/// Paired realized and ideal sequences; index k holds time t = k + 1.
struct Trajectory {
  int T = 0;
  Vec x0_ideal;
  Vec x0_real;
  std::vector<Vec> x_ideal, y_ideal;
  std::vector<Vec> x_real, y_real;
  std::vector<bool> io_hits, ao_hits;
};

Trajectory simulate_ideal(const Model& model, int T, std::uint64_t seed);

struct JacobianReport {
  double f_x = 0, f_v = 0, z_x = 0, z_eps = 0;  // max relative deviation
  bool analytic_f_x = false, analytic_f_v = false, analytic_z_x = false, analytic_z_eps = false;
  double tol = 1e-4;
  double max_deviation() const;
  bool passed() const { return max_deviation() < tol; }
};

/// Compares user-supplied Jacobians with central finite differences at x.
JacobianReport jacobian_check(const NonlinearSSM& model, const Vec& x, int t = 1, double tol = 1e-4);

}  // namespace rkf
