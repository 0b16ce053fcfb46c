#pragma once

// Junction management policies. Every policy produces, per step, the
// approach holding the green at each junction (or nothing, meaning the
// priority rule). Controllers see the current occupancies only.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "netphase/analytic.hpp"
#include "netphase/dynamics.hpp"

namespace netphase {

class ControlError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when the Riccati iteration does not reach its tolerance.
class RiccatiError : public std::runtime_error {
 public:
  RiccatiError(const std::string& what, double residual, int iterations)
      : std::runtime_error(what), residual(residual), iterations(iterations) {}
  double residual;
  int iterations;
};

enum class PolicyKind : std::uint8_t { Priority, OpenLoop, LocalFeedback, GlobalFeedback };

inline const char* to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::Priority: return "priority";
    case PolicyKind::OpenLoop: return "open_loop";
    case PolicyKind::LocalFeedback: return "local_feedback";
    case PolicyKind::GlobalFeedback: return "global_feedback";
  }
  return "?";
}

inline std::optional<PolicyKind> parse_policy(std::string_view s) {
  for (auto p : {PolicyKind::Priority, PolicyKind::OpenLoop, PolicyKind::LocalFeedback,
                 PolicyKind::GlobalFeedback})
    if (s == to_string(p)) return p;
  return std::nullopt;
}

struct OpenLoopPlan {
  int cycle = 4;
  int green_first = 2;       // steps of green for the Major approach, first in the cycle
  std::vector<int> offsets;  // per junction; missing entries are 0

  void validate() const {
    if (cycle < 2) throw ControlError("cycle must be >= 2");
    if (green_first < 1 || green_first > cycle - 1)
      throw ControlError("green_first must lie in [1, cycle-1]");
  }
  int offset(std::size_t j) const { return j < offsets.size() ? offsets[j] : 0; }
  bool operator==(const OpenLoopPlan&) const = default;
};

/// Everything needed to instantiate any of the four policies.
struct PolicySpec {
  PolicyKind kind = PolicyKind::Priority;
  OpenLoopPlan plan;
  double q_scale = 1.0;
  double r_scale = 10.0;
  int lq_cycle = 4;
  double riccati_tol = 1e-10;
  int riccati_max_iter = 200000;

  bool operator==(const PolicySpec&) const = default;
};

inline Approach open_loop_green(const OpenLoopPlan& plan, std::size_t junction, std::int64_t k) {
  if (k < 0) throw ControlError("time must be >= 0");
  const std::int64_t phase = ((k + plan.offset(junction)) % plan.cycle + plan.cycle) % plan.cycle;
  return phase < plan.green_first ? Approach::Major : Approach::Minor;
}

struct LocalFeedbackInputs {
  int n1 = 0, n2 = 0;  // road sizes
  int z1 = 0, z2 = 0;  // cars on each incoming road
  bool b1 = false, b2 = false;  // car waiting right before the junction
};

/// R1 is the Major approach.
inline Approach local_feedback_green(const LocalFeedbackInputs& in) {
  if (in.z1 < 0 || in.z1 > in.n1 || in.z2 < 0 || in.z2 > in.n2)
    throw ControlError("vehicle counts outside [0, road size]");
  return in.n2 * int(in.b1) + in.z1 >= in.n1 * int(in.b2) + in.z2 ? Approach::Major
                                                                  : Approach::Minor;
}

// ---------------------------------------------------------------------------
// Linear-quadratic model over road inventories.

struct LQModel {
  Eigen::MatrixXd B, Q, R;
  Eigen::VectorXd x_bar, u_bar;
  Eigen::MatrixXd gain;  // u - u_bar = -gain (x - x_bar); empty until solved
  int cycle = 4;
  double riccati_residual = 0;
  int riccati_iterations = 0;
};

/// Cars attributed to each road: its cells, plus the junction contents when
/// the road is the non-priority entrant of its junction.
inline Eigen::VectorXd road_inventories(const NetworkTopology& t, std::span<const double> y) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t.roads().size()));
  for (const auto& r : t.roads()) {
    double s = 0;
    for (std::size_t i = r.first_slot; i < r.entry_slot; ++i) s += y[i];
    x[r.id] = s;
  }
  for (const auto& j : t.junctions())
    x[j.in_nonpriority] += y[t.junction_slot(j.id, 0)] + y[t.junction_slot(j.id, 1)];
  return x;
}

inline LQModel build_lq_model(const NetworkTopology& t, double d, double q_scale = 1.0,
                              double r_scale = 10.0, int cycle = 4) {
  if (!(d >= 0.0 && d <= 1.0)) throw ControlError("density outside [0,1]");
  if (q_scale < 0) throw ControlError("Q scale must be >= 0");
  if (!(r_scale > 0)) throw ControlError("R scale must be > 0");
  if (cycle < 2) throw ControlError("cycle must be >= 2");
  const auto n = static_cast<Eigen::Index>(t.roads().size());
  LQModel m;
  m.cycle = cycle;
  m.B = -Eigen::MatrixXd::Identity(n, n);
  for (const auto& r : t.roads()) {
    const auto& j = t.junctions()[r.to_junction];
    for (int out : j.out_roads) m.B(out, r.id) += 0.5;
  }
  m.Q = q_scale * Eigen::MatrixXd::Identity(n, n);
  m.R = r_scale * Eigen::MatrixXd::Identity(n, n);
  m.x_bar.resize(n);
  for (const auto& r : t.roads()) m.x_bar[r.id] = d * r.counting_positions();
  const double r = boost::rational_cast<double>(t.ratio_r());
  m.u_bar = Eigen::VectorXd::Constant(n, flow_approx(d, r, t.capacity()));
  return m;
}

struct RiccatiSolution {
  Eigen::MatrixXd P;
  Eigen::MatrixXd gain;  // (R + B'PB)^-1 B'P
  double residual = 0;
  int iterations = 0;
};

inline double riccati_residual(const Eigen::MatrixXd& P, const Eigen::MatrixXd& B,
                               const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
  const Eigen::MatrixXd S = R + B.transpose() * P * B;
  const Eigen::MatrixXd next = Q + P - P * B * S.ldlt().solve(B.transpose() * P);
  return (P - next).cwiseAbs().rowwise().sum().maxCoeff();
}

/// Fixed point of P = Q + P - PB(R + B'PB)^-1 B'P (state matrix = identity),
/// iterated from P = Q.
inline RiccatiSolution solve_dare(const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                                  const Eigen::MatrixXd& R, double tol = 1e-10,
                                  int max_iter = 200000) {
  if (Q.rows() != Q.cols() || Q.rows() != B.rows() || R.rows() != R.cols() || R.rows() != B.cols())
    throw ControlError("Riccati matrices have inconsistent shapes");
  Eigen::LLT<Eigen::MatrixXd> r_chol(R);
  if (r_chol.info() != Eigen::Success) throw ControlError("R must be positive definite");
  if (Q.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff() < -1e-12)
    throw ControlError("Q must be positive semidefinite");

  RiccatiSolution s;
  s.P = Q;
  double step = 0;
  for (s.iterations = 1; s.iterations <= max_iter; ++s.iterations) {
    const Eigen::MatrixXd S = R + B.transpose() * s.P * B;
    Eigen::MatrixXd next = Q + s.P - s.P * B * S.ldlt().solve(B.transpose() * s.P);
    next = 0.5 * (next + next.transpose());
    step = (next - s.P).cwiseAbs().rowwise().sum().maxCoeff();
    s.P = std::move(next);
    if (step <= tol) break;
  }
  s.residual = riccati_residual(s.P, B, Q, R);
  if (s.residual > tol || step > tol) {
    std::ostringstream msg;
    msg << "Riccati iteration did not converge after " << max_iter
        << " iterations (residual " << s.residual << ")";
    throw RiccatiError(msg.str(), s.residual, max_iter);
  }
  s.gain = (R + B.transpose() * s.P * B).ldlt().solve(B.transpose() * s.P);
  return s;
}

/// Orthonormal basis of the complement of the all-ones vector.
inline Eigen::MatrixXd ones_complement_basis(Eigen::Index n) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
  M.col(0).setOnes();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
  Eigen::MatrixXd full = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  return full.rightCols(n - 1);
}

/// Solves the LQ problem on the subspace orthogonal to the conserved total
/// and stores gain = K V' so that u - u_bar = -gain (x - x_bar).
inline Eigen::MatrixXd solve_lqr(LQModel& model, double tol = 1e-10, int max_iter = 200000) {
  const Eigen::Index n = model.B.rows();
  if (n < 2) throw ControlError("LQ model needs at least two roads");
  const Eigen::MatrixXd V = ones_complement_basis(n);
  const Eigen::MatrixXd Br = V.transpose() * model.B;
  const Eigen::MatrixXd Qr = V.transpose() * model.Q * V;
  auto sol = solve_dare(Br, Qr, model.R, tol, max_iter);
  model.gain = sol.gain * V.transpose();
  model.riccati_residual = sol.residual;
  model.riccati_iterations = sol.iterations;
  return model.gain;
}

/// Spectral radius of I - B gain restricted to the complement of the ones vector.
inline double projected_closed_loop_radius(const LQModel& model) {
  const Eigen::Index n = model.B.rows();
  const Eigen::MatrixXd V = ones_complement_basis(n);
  const Eigen::MatrixXd A = V.transpose() * (Eigen::MatrixXd::Identity(n, n) - model.B * model.gain) * V;
  return A.eigenvalues().cwiseAbs().maxCoeff();
}

struct GreenSplit {
  int major = 0;
  int minor = 0;
};

/// Clipped control and green slots per junction for the cycle starting now.
inline std::vector<GreenSplit> global_feedback_timing(const LQModel& model, const NetworkTopology& t,
                                                      const Eigen::VectorXd& x) {
  if (model.gain.size() == 0) throw ControlError("LQ gain not solved");
  Eigen::VectorXd u = model.u_bar - model.gain * (x - model.x_bar);
  u = u.cwiseMax(0.0).cwiseMin(0.25);
  std::vector<GreenSplit> out;
  out.reserve(t.junctions().size());
  const int c = model.cycle;
  for (const auto& j : t.junctions()) {
    const double up = u[j.in_priority], un = u[j.in_nonpriority];
    int major = up + un > 0 ? static_cast<int>(std::lround(c * up / (up + un))) : c / 2;
    major = std::clamp(major, 1, c - 1);
    out.push_back({major, c - major});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Controllers driving a simulation step by step.

class Controller {
 public:
  virtual ~Controller() = default;
  /// Gates for step k -> k+1 given occupancies at time k; empty = priority rule.
  virtual std::span<const Approach> decide(std::int64_t k, std::span<const double> y) = 0;
  /// Appends the internal state that influences future decisions.
  virtual void append_state_key(std::int64_t k, std::string& key) const = 0;
  virtual PolicyKind kind() const = 0;
};

class PriorityController final : public Controller {
 public:
  std::span<const Approach> decide(std::int64_t, std::span<const double>) override { return {}; }
  void append_state_key(std::int64_t, std::string&) const override {}
  PolicyKind kind() const override { return PolicyKind::Priority; }
};

class OpenLoopController final : public Controller {
 public:
  OpenLoopController(const NetworkTopology& t, OpenLoopPlan plan)
      : plan_(std::move(plan)), gate_(t.junctions().size()) {
    plan_.validate();
  }
  std::span<const Approach> decide(std::int64_t k, std::span<const double>) override {
    for (std::size_t j = 0; j < gate_.size(); ++j) gate_[j] = open_loop_green(plan_, j, k);
    return gate_;
  }
  void append_state_key(std::int64_t k, std::string& key) const override {
    key += static_cast<char>(k % plan_.cycle);
  }
  PolicyKind kind() const override { return PolicyKind::OpenLoop; }

 private:
  OpenLoopPlan plan_;
  std::vector<Approach> gate_;
};

class LocalFeedbackController final : public Controller {
 public:
  explicit LocalFeedbackController(const NetworkTopology& t) : t_(&t), gate_(t.junctions().size()) {}
  std::span<const Approach> decide(std::int64_t, std::span<const double> y) override {
    const auto& roads = t_->roads();
    for (const auto& j : t_->junctions()) {
      const auto& r1 = roads[j.in_priority];
      const auto& r2 = roads[j.in_nonpriority];
      LocalFeedbackInputs in;
      in.n1 = r1.length_cells + 1;
      in.n2 = r2.length_cells + 1;
      in.z1 = cars_on(r1, y);
      in.z2 = cars_on(r2, y);
      in.b1 = y[r1.entry_slot - 1] >= 0.5;
      in.b2 = y[r2.entry_slot - 1] >= 0.5;
      gate_[j.id] = local_feedback_green(in);
    }
    return gate_;
  }
  void append_state_key(std::int64_t, std::string&) const override {}
  PolicyKind kind() const override { return PolicyKind::LocalFeedback; }

 private:
  static int cars_on(const RoadSegment& r, std::span<const double> y) {
    double s = 0;
    for (std::size_t i = r.first_slot; i < r.entry_slot; ++i) s += y[i];
    return static_cast<int>(std::lround(s));
  }
  const NetworkTopology* t_;
  std::vector<Approach> gate_;
};

class GlobalFeedbackController final : public Controller {
 public:
  GlobalFeedbackController(const NetworkTopology& t, LQModel model)
      : t_(&t), model_(std::move(model)), split_(t.junctions().size()), gate_(t.junctions().size()) {
    if (model_.gain.size() == 0) throw ControlError("LQ gain not solved");
  }
  std::span<const Approach> decide(std::int64_t k, std::span<const double> y) override {
    const int phase = static_cast<int>(k % model_.cycle);
    if (phase == 0) split_ = global_feedback_timing(model_, *t_, road_inventories(*t_, y));
    for (std::size_t j = 0; j < gate_.size(); ++j)
      gate_[j] = phase < split_[j].major ? Approach::Major : Approach::Minor;
    return gate_;
  }
  void append_state_key(std::int64_t k, std::string& key) const override {
    const int phase = static_cast<int>(k % model_.cycle);
    key += static_cast<char>(phase);
    // The split only matters until the next cycle start recomputes it.
    if (phase != 0)
      for (const auto& s : split_) key += static_cast<char>(s.major);
  }
  PolicyKind kind() const override { return PolicyKind::GlobalFeedback; }
  const LQModel& model() const { return model_; }

 private:
  const NetworkTopology* t_;
  LQModel model_;
  std::vector<GreenSplit> split_;
  std::vector<Approach> gate_;
};

/// Builds the controller for `spec` on topology `t` at global density `d`
/// (used by the LQ nominal point). Throws RiccatiError if the gain fails.
inline std::unique_ptr<Controller> make_controller(const PolicySpec& spec, const NetworkTopology& t,
                                                   double d) {
  switch (spec.kind) {
    case PolicyKind::Priority: return std::make_unique<PriorityController>();
    case PolicyKind::OpenLoop: return std::make_unique<OpenLoopController>(t, spec.plan);
    case PolicyKind::LocalFeedback: return std::make_unique<LocalFeedbackController>(t);
    case PolicyKind::GlobalFeedback: {
      LQModel m = build_lq_model(t, d, spec.q_scale, spec.r_scale, spec.lq_cycle);
      solve_lqr(m, spec.riccati_tol, spec.riccati_max_iter);
      return std::make_unique<GlobalFeedbackController>(t, std::move(m));
    }
  }
  throw ControlError("unknown policy");
}

/// Gate source adapter for simulate(): reads occupancies and asks the controller.
template <class Sim>
struct ControllerGate {
  Controller* ctrl;
  std::vector<double> y;
  std::span<const Approach> operator()(std::int64_t k, const Sim& sim) {
    sim.occupancy_into(y);
    return ctrl->decide(k, y);
  }
};

}  // namespace netphase
