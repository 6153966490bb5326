#pragma once

#include "abstrakt/aggregation.hpp"
#include "abstrakt/composition.hpp"
#include "abstrakt/types.hpp"

#include <cstdint>
#include <vector>

namespace abstrakt {

/// Room and scenario parameters (rates in 1/min, temperatures in degrees C).
struct ThermalParams {
  double a_mean = 0.005, a_std = 0.0015;   // conduction to the exterior
  double b_mean = 0.035, b_std = 0.0075;   // heater gain
  double x0_mean = 18.0, x0_std = 0.15;    // initial room temperatures
  double Te = 10.0;                        // exterior temperature
  double Th = 50.0;                        // heater temperature
  double gamma = 0.0625;                   // inter-room conduction
  double k_gain = 2.5;                     // interface feedback gain k_l
  double guard = 5.0;                      // minimum |Th - x| for the interface
};

/// L rooms on a circle, coupled through the cycle Laplacian.
struct ThermalNetwork {
  int L = 0;
  Vector a, b, x0;
  Matrix Mtilde;
  ThermalParams params;
};

/// Deterministic sampling given the seed; nonpositive a or b draws are
/// rejection-resampled.
ThermalNetwork build_network(int L, uint64_t seed, const ThermalParams& params = {});

/// Circle Laplacian with -2 diagonal and cyclic neighbors 1.
Matrix cycle_laplacian(int L);

/// Input refinement u = [b (Th - xhat) uhat - k (x - xhat)] / (b_room (Th - x)).
/// Throws Error(InterfaceGuard) when |Th - x| < guard.
double thermal_interface(double x, double xhat, double uhat, double b_room, double k_room,
                         double b_nominal, double Th, double guard);

/// Per-room storage profiles against the averaged nominal model
/// (a = mean a_l, b = mean b_l); verifies the storage conditions.
std::vector<StorageProfile> thermal_profiles(const ThermalNetwork& net, int sample_count = 1000);

/// Saturated proportional tracking of per-group reference temperatures,
/// zero-order held, with the reference switching at the trigger time.
struct ControllerConfig {
  Vector T_ref_pre;    // per group, before the trigger
  Vector T_ref_post;   // per group, after the trigger
  Vector band_lo, band_hi;
  double kappa = 0.25;
  double u_max = 1.0;
  double zoh_minutes = 1.0;
  double trigger_min = 20.0;

  static ControllerConfig defaults(int num_groups);
};

struct SimConfig {
  double horizon_min = 60.0;
  double dt_min = 0.01;
};

struct Trajectories {
  Vector t;
  Matrix x;     // L x steps
  Matrix xhat;  // N x steps
  Matrix u;     // L x steps
  Matrix uhat;  // N x steps
  Matrix Vi;    // N x steps, group storage (1/(2 gamma)) sum (x_l - xhat_i)^2
  Vector envelope;    // filled by monitor
  Vector temp_bound;  // sqrt(2 gamma envelope), filled by monitor
};

/// Fixed-step RK4 of the coupled concrete (L rooms) and aggregate
/// (N areas) dynamics; the aggregate initial state is the group mean.
Trajectories simulate(const ThermalNetwork& net, const Partition& part,
                      const ControllerConfig& ctrl, const SimConfig& sim);

struct MonitorReport {
  double eta_slope = 0.0;
  double max_violation = 0.0;
  double violation_tol = 0.0;
  bool dissipation_ok = false;
  bool envelope_respected = false;
  bool temp_within_bound = false;
  double max_temp_error = 0.0;      // max over time and rooms of |x_l - xhat_i|
  double max_input_deviation = 0.0; // max over time and rooms of |u_l - uhat_i|
  double final_envelope = 0.0;
};

/// Verify the dissipation inequality of the composed certificate along the
/// trajectory and integrate the comparison envelope; also fills
/// traj.envelope and traj.temp_bound.
MonitorReport monitor(Trajectorics_dummy_t = 0);

MonitorReport monitor(Trajectories& traj, const ComposedCert& cert,
                      const std::vector<StorageProfile>& profiles, const ThermalNetwork& net,
                      const Partition& part);

}  // namespace abstrakt
