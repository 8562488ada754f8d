#include "wsense/energy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <boost/math/tools/roots.hpp>

#include "wsense/kvconfig.hpp"

namespace wsense::energy {

namespace {

constexpr double kFitPower = 0.00205;

// Brent/TOMS748 on a bracket; f must change sign over [lo, hi].
template <class F>
double find_root(F f, double lo, double hi, const char* what) {
  const double flo = f(lo), fhi = f(hi);
  if (flo == 0) return lo;
  if (fhi == 0) return hi;
  if ((flo < 0) == (fhi < 0)) throw DomainError(std::string(what) + ": no root in bracket");
  std::uintmax_t iters = 200;
  auto tol = boost::math::tools::eps_tolerance<double>(50);
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
  return 0.5 * (a + b);
}

}  // namespace

EnergyProfile default_profile() {
  EnergyProfile p;
  p.P_slp = solve_p_slp(p, kMaxListenCoefficient, kFitPower);
  return p;
}

void validate(const EnergyProfile& p) {
  auto positive = [](double v, const char* key) {
    if (!(v > 0)) throw DomainError(std::string(key) + " must be > 0");
  };
  positive(p.P_asc, "P_asc");
  positive(p.D_asc, "D_asc");
  positive(p.P_off, "P_off");
  positive(p.P_bcn, "P_bcn");
  positive(p.P_slp, "P_slp");
  positive(p.D_bcn, "D_bcn");
  positive(p.E_smp, "E_smp");
  if (!(p.E_bat >= 0)) throw DomainError("E_bat must be >= 0");
  positive(p.listen_base, "listen_base");
  if (!(p.usable_fraction > 0 && p.usable_fraction <= 1)) throw DomainError("usable_fraction must be in (0, 1]");
  if (p.N < 1) throw DomainError("N must be >= 1");
  if (!(p.D_bcn < p.listen_base)) throw DomainError("D_bcn must be smaller than listen_base");
}

EnergyProfile load_profile(const KvConfig& kv, const std::string& prefix) {
  auto p = default_profile();
  auto key = [&](const char* k) { return prefix + k; };
  p.P_asc = kv.get_double(key("P_asc"), p.P_asc);
  p.D_asc = kv.get_double(key("D_asc"), p.D_asc);
  p.P_off = kv.get_double(key("P_off"), p.P_off);
  p.P_bcn = kv.get_double(key("P_bcn"), p.P_bcn);
  p.P_slp = kv.get_double(key("P_slp"), p.P_slp);
  p.D_bcn = kv.get_double(key("D_bcn"), p.D_bcn);
  p.E_smp = kv.get_double(key("E_smp"), p.E_smp);
  const bool has_mah = kv.has(key("battery_mah"));
  if (has_mah && kv.has(key("E_bat"))) throw ConfigError(key("battery_mah"), "give either E_bat or battery_mah");
  if (has_mah)
    p.E_bat = battery_energy(kv.get_double(key("battery_mah")), kv.get_double(key("battery_volts"), 3.7));
  else
    p.E_bat = kv.get_double(key("E_bat"), p.E_bat);
  p.usable_fraction = kv.get_double(key("usable_fraction"), p.usable_fraction);
  p.N = static_cast<int>(kv.get_int(key("N"), p.N));
  p.listen_base = kv.get_double(key("listen_base"), p.listen_base);
  try {
    validate(p);
  } catch (const DomainError& e) {
    const std::string msg = e.what();
    throw ConfigError(prefix + msg.substr(0, msg.find(' ')), msg);
  }
  return p;
}

double periodic_association_power(const EnergyProfile& p, double t_p) {
  if (!(t_p > p.D_asc)) throw DomainError("t_p must exceed D_asc (" + std::to_string(p.D_asc) + " s)");
  return (p.P_asc * p.D_asc + p.P_off * (t_p - p.D_asc)) / t_p;
}

double beacon_reception_power(const EnergyProfile& p, int l) {
  if (l < 1) throw DomainError("listen interval coefficient l must be >= 1");
  const double awake = p.D_bcn / (l * p.listen_base);
  return p.P_bcn * awake + p.P_slp * (1 - awake);
}

double battery_energy(double capacity_mah, double volts) { return capacity_mah * 1e-3 * 3600.0 * volts; }

double lifetime(double avg_power, double E_bat, double usable_fraction) {
  if (!(avg_power > 0)) throw DomainError("average power must be > 0");
  return usable_fraction * E_bat / avg_power;
}

BudgetBreakdown budget_check(const EnergyProfile& p, double t_idl, double t_smp, double t_p, int l) {
  if (l < 1 || l > kMaxListenCoefficient) throw DomainError("constraint violated: 1 <= l <= 10");
  if (!(t_p > p.D_asc)) throw DomainError("constraint violated: D_asc < t_p");
  if (t_idl < 0 || t_smp < 0) throw DomainError("phase durations must be >= 0");

  BudgetBreakdown b;
  const double window = l * p.listen_base;
  b.idle = t_idl * periodic_association_power(p, t_p);
  b.listen_enforce = window * beacon_reception_power(p, 1);
  double transition = (p.N - 1) * p.D_asc - window;
  if (transition < 0) {
    b.warnings.push_back("alert transition window (N-1)*D_asc - l*0.1024 is negative; clamped to 0");
    transition = 0;
  }
  b.alert_transition = transition * beacon_reception_power(p, l);
  b.last_node_align = window * beacon_reception_power(p, l);
  b.sampling = t_smp * p.E_smp;
  b.total = b.idle + b.listen_enforce + b.alert_transition + b.last_node_align + b.sampling;
  b.limit = p.usable_fraction * p.E_bat;
  b.pass = b.total < b.limit;
  return b;
}

std::vector<double> tp_grid(const EnergyProfile& p, std::size_t points, double t_max) {
  std::vector<double> grid;
  if (points == 0 || !(t_max > p.D_asc)) return grid;
  const double ratio = t_max / p.D_asc;
  for (std::size_t i = 1; i <= points; ++i)
    grid.push_back(p.D_asc * std::pow(ratio, static_cast<double>(i) / static_cast<double>(points)));
  grid.back() = t_max;
  return grid;
}

Solution solve_parameters(const EnergyProfile& p, double t_idl, double t_smp, std::size_t points) {
  validate(p);
  Solution sol;
  for (int l = 1; l <= kMaxListenCoefficient; ++l) {
    for (double t_p : tp_grid(p, points)) {
      const auto b = budget_check(p, t_idl, t_smp, t_p, l);
      if (!b.pass) continue;
      sol.feasible.push_back({t_p, l, b.total});
      if (!sol.best || b.total < sol.best->total) sol.best = sol.feasible.back();
    }
  }
  return sol;
}

double solve_tp_for_power(const EnergyProfile& p, double target_w) {
  const double lo = std::min(p.P_asc, p.P_off), hi = std::max(p.P_asc, p.P_off);
  if (!(target_w > lo && target_w < hi)) throw DomainError("target power outside (P_off, P_asc)");
  return find_root([&](double t) { return periodic_association_power(p, t) - target_w; },
                   p.D_asc * (1 + 1e-12), 1e12, "t_p");
}

double solve_p_off(EnergyProfile p, double t_p, double target_w) {
  return find_root(
      [&](double x) {
        p.P_off = x;
        return periodic_association_power(p, t_p) - target_w;
      },
      0.0, p.P_asc, "P_off");
}

double solve_p_slp(EnergyProfile p, int l, double target_w) {
  return find_root(
      [&](double x) {
        p.P_slp = x;
        return beacon_reception_power(p, l) - target_w;
      },
      0.0, p.P_bcn, "P_slp");
}

}  // namespace wsense::energy
