#pragma once

// Idle/Alert duty-cycle power models, the whole-deployment energy budget and
// the (t_p, l) parameter search.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace wsense {
class KvConfig;
}

namespace wsense::energy {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kBeaconInterval = 0.1024;  // s
inline constexpr int kMaxListenCoefficient = 10;

// SI units throughout: W, s, J. E_smp is the Sampling-Phase average power.
struct EnergyProfile {
  double P_asc = 0.6;
  double D_asc = 2.0;
  double P_off = 0.01565 / 591.0;
  double P_bcn = 0.3;
  double P_slp = 0.0;  // filled by default_profile()
  double D_bcn = 0.005;
  double E_smp = 0.0155 * 0.8 * 33300.0 / 1200.0;
  double E_bat = 2.5 * 3.7 * 3600.0;
  double usable_fraction = 0.8;
  int N = 100;
  double listen_base = kBeaconInterval;
};

/// Defaults fitted so that the beacon-reception power at l = 10 and the
/// periodic-association power at t_p = 593 s both equal 0.00205 W.
EnergyProfile default_profile();

/// Throws DomainError naming the offending field.
void validate(const EnergyProfile& p);

/// Reads P_asc, D_asc, ... (SI units) under `prefix`, defaulting every key.
/// E_bat may instead be given as battery_mah and battery_volts.
EnergyProfile load_profile(const KvConfig& kv, const std::string& prefix = "");

/// Average power of periodic association with period t_p.
double periodic_association_power(const EnergyProfile& p, double t_p);

/// Average power of beacon reception with listen interval l x listen_base.
double beacon_reception_power(const EnergyProfile& p, int l);

/// Battery energy in joules from capacity (mAh) and nominal voltage.
double battery_energy(double capacity_mah, double volts);

/// Seconds of operation at avg_power from the usable part of E_bat.
double lifetime(double avg_power, double E_bat, double usable_fraction);

struct BudgetBreakdown {
  double idle = 0;            // (a)
  double listen_enforce = 0;  // (b)
  double alert_transition = 0;// (c)
  double last_node_align = 0; // (d)
  double sampling = 0;        // (e)
  double total = 0;
  double limit = 0;
  bool pass = false;
  std::vector<std::string> warnings;
};

/// Whole-lifecycle energy of one node; pass iff total < usable_fraction * E_bat.
BudgetBreakdown budget_check(const EnergyProfile& p, double t_idl, double t_smp, double t_p, int l);

struct Candidate {
  double t_p;
  int l;
  double total;
};

struct Solution {
  std::vector<Candidate> feasible;
  std::optional<Candidate> best;  // minimum total energy
  bool infeasible() const { return feasible.empty(); }
};

/// Log-spaced t_p grid over (D_asc, t_max], `points` values.
std::vector<double> tp_grid(const EnergyProfile& p, std::size_t points = 200, double t_max = 1e4);

Solution solve_parameters(const EnergyProfile& p, double t_idl, double t_smp, std::size_t points = 200);

/// Smallest t_p whose periodic-association power equals `target_w`.
double solve_tp_for_power(const EnergyProfile& p, double target_w);
/// P_off that makes periodic_association_power(t_p) == target_w.
double solve_p_off(EnergyProfile p, double t_p, double target_w);
/// P_slp that makes beacon_reception_power(l) == target_w.
double solve_p_slp(EnergyProfile p, int l, double target_w);

}  // namespace wsense::energy
