#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "fxcor/design.hpp"

namespace fxcor {

namespace detail {

inline std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

inline std::string vec_str(const Vector& v, const char* f = "%.4f") {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(f, v[i]);
  return s + ")";
}

}  // namespace detail

/// Observer certificate, per-channel controller table and aggregate bounds.
inline void print_design_report(std::ostream& os, const ScenarioDesign& d) {
  using detail::fmt;
  const ObserverCertificate& c = d.certificate;
  os << "== graph ==\n";
  os << "agents " << d.agent_count() << ", K diagonal " << detail::vec_str(d.k.k)
     << ", lambda_min(H'K + KH - 2I) = " << fmt("%.6g", d.k.lambda_min_slack) << "\n";
  os << "== observer certificate ==\n";
  os << "||K (x) S|| = " << fmt("%.6f", c.ks_norm) << "  mu1 = " << fmt("%.6g", d.observer.mu1)
     << (d.observer.mu1 > c.ks_norm ? "  (gate ok)" : "  (gate FAILS)") << "\n";
  const std::pair<const char*, double> consts[] = {
      {"c1", c.c1},         {"c2", c.c2},         {"c3", c.c3},           {"c4", c.c4},
      {"c5", c.c5},         {"hat_c1", c.hat_c1}, {"hat_c2", c.hat_c2},   {"tilde_c1", c.tilde_c1},
      {"tilde_c2", c.tilde_c2}};
  for (const auto& [name, v] : consts) os << "  " << name << " = " << fmt("%.4f", v) << "\n";
  const char* labels[] = {"(i)", "(ii)", "(iii)"};
  for (int k = 0; k < 3; ++k) {
    const auto& cond = c.conditions[static_cast<std::size_t>(k)];
    os << "  condition " << labels[k] << ": "
       << (std::isnan(cond.slack) ? std::string("not evaluated")
                                  : std::string(cond.holds ? "holds" : "FAILS") +
                                        ", slack " + fmt("%.6g", cond.slack))
       << "\n";
  }
  os << "  bar_t_o = " << fmt("%.4f", c.bar_t_o) << " s  (bisection " << fmt("%.4f", c.bar_t_o_bisect)
     << ")\n";
  os << "  t_o     = " << fmt("%.4f", c.t_o) << " s  (bisection " << fmt("%.4f", c.t_o_bisect)
     << ")\n";
  if (!d.certificate_error.empty()) os << "  certificate: " << d.certificate_error << "\n";

  os << "== controller channels ==\n";
  for (std::size_t i = 0; i < d.agents.size(); ++i) {
    const AgentDesign& a = d.agents[i];
    for (std::size_t r = 0; r < a.channels.size(); ++r) {
      const ChannelGains& g = a.channels[r];
      os << "agent " << i + 1 << " channel " << r + 1 << ": order " << g.order
         << ", R = " << detail::vec_str(Vector(a.normal_form.r_mat.row(r).begin(),
                                                a.normal_form.r_mat.row(r).end()))
         << "\n";
      os << "  gamma     " << detail::vec_str(g.gamma) << "\n";
      os << "  gamma_bar " << detail::vec_str(g.gamma_bar) << "\n";
      os << "  hurwitz psi " << (g.hurwitz.psi ? "yes" : "NO") << ", psi_bar "
         << (g.hurwitz.psi_bar ? "yes" : "NO") << "\n";
      if (!std::isnan(g.t_c_channel)) {
        os << "  lambda(P) in [" << fmt("%.6g", g.p_range.min) << ", " << fmt("%.6g", g.p_range.max)
           << "], lambda(P_bar) in [" << fmt("%.6g", g.p_bar_range.min) << ", "
           << fmt("%.6g", g.p_bar_range.max) << "]\n";
        os << "  t_c = " << fmt("%.4f", g.t_c_channel) << " s\n";
      }
    }
  }
  os << "== bounds ==\n";
  os << "t_c = " << fmt("%.4f", d.bounds.t_c) << " s\n";
  os << "t_a = " << fmt("%.4f", d.bounds.t_a) << " s\n";
  if (!d.hurwitz_ok) os << "controller: " << d.hurwitz_error << "\n";
}

struct ReferenceRow {
  std::string name;
  double computed = 0.0;
  double reference = 0.0;
  double rel_error() const { return std::abs(computed - reference) / std::abs(reference); }
};

/// Computed values against the benchmark's printed figures.
inline std::vector<ReferenceRow> benchmark_reference_rows(const ScenarioDesign& d) {
  const ObserverCertificate& c = d.certificate;
  return {{"c1", c.c1, 21.4662},         {"c2", c.c2, 10.3531},
          {"c3", c.c3, 21.8649},         {"c4", c.c4, 10.2899},
          {"c5", c.c5, 0.5727},          {"hat_c1", c.hat_c1, 0.0736},
          {"hat_c2", c.hat_c2, 0.1011},  {"tilde_c1", c.tilde_c1, 0.0762},
          {"tilde_c2", c.tilde_c2, 0.1052}, {"t_o", c.t_o, 79.5692},
          {"t_c", d.bounds.t_c, 69.6789}, {"t_a", d.bounds.t_a, 149.2480}};
}

inline void print_reference_table(std::ostream& os, const std::vector<ReferenceRow>& rows) {
  os << "quantity      computed       reference      rel. error\n";
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-12s  %-13.6f  %-13.4f  %.3e\n", r.name.c_str(), r.computed,
                  r.reference, r.rel_error());
    os << buf;
  }
}

}  // namespace fxcor
