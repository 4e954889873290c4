#ifndef CELLFREE_REPORT_HPP
#define CELLFREE_REPORT_HPP

#include <locale>
#include <sstream>
#include <string>

#include "cellfree/scenario_io.hpp"
#include "cellfree/simulate.hpp"

namespace cellfree::io {

/// `# scenario=<hash> seed=<seed> version=<v>` line heading every CSV.
inline std::string csv_header_comment(const sim::Scenario& sc, const std::string& version) {
  return "# scenario=" + scenario_hash(sc) + " seed=" + std::to_string(sc.seed) + " version=" + version + "\n";
}

namespace detail {

inline std::ostringstream csv_stream() {
  std::ostringstream o;
  o.imbue(std::locale::classic());
  return o;
}

inline std::string series_cols(const sim::Series& s) {
  return std::string(precoding::to_string(s.precoder)) + "," + power::to_string(s.pa);
}

}  // namespace detail

inline std::string ber_csv(const sim::Scenario& sc, const sim::ExperimentResult& res, const std::string& version) {
  auto o = detail::csv_stream();
  o << csv_header_comment(sc, version) << "snr_db,precoder,pa,ber,stderr,bits,n_csi\n";
  for (const auto& p : res.ber_points) {
    o << detail::format_double(p.snr_db) << ',' << detail::series_cols(p.series) << ',' << detail::format_double(p.ber)
      << ',' << detail::format_double(p.stderr_) << ',' << p.bits << ',' << detail::format_double(p.n) << '\n';
  }
  return o.str();
}

inline std::string rates_csv(const sim::Scenario& sc, const sim::ExperimentResult& res, const std::string& version) {
  auto o = detail::csv_stream();
  o << csv_header_comment(sc, version) << "snr_db,precoder,pa,sum_rate";
  for (std::size_t u = 0; u < sc.u_users; ++u) o << ",user_" << (u + 1);
  o << '\n';
  for (const auto& p : res.rate_points) {
    o << detail::format_double(p.snr_db) << ',' << detail::series_cols(p.series) << ','
      << detail::format_double(p.sum_rate);
    for (double r : p.per_user_rates) o << ',' << detail::format_double(r);
    o << '\n';
  }
  return o.str();
}

inline std::string cdf_csv(const sim::Scenario& sc, const sim::ExperimentResult& res, const std::string& version) {
  auto o = detail::csv_stream();
  o << csv_header_comment(sc, version) << "precoder,pa,rate_sample\n";
  for (const auto& c : res.cdf_samples) {
    const auto cols = detail::series_cols(c.series);
    for (double r : c.samples) o << cols << ',' << detail::format_double(r) << '\n';
  }
  return o.str();
}

inline std::string traces_csv(const sim::Scenario& sc, const sim::ExperimentResult& res, const std::string& version) {
  auto o = detail::csv_stream();
  o << csv_header_comment(sc, version) << "trial,n_csi,snr_db,precoder,pa,call,step,t_b,t_e,t,feasible\n";
  for (const auto& t : res.traces) {
    o << t.trial << ',' << detail::format_double(t.n) << ',' << detail::format_double(t.snr_db) << ','
      << detail::series_cols(t.series) << ',' << t.call << ',' << t.step << ','
      << detail::format_double(t.bisection.t_b) << ',' << detail::format_double(t.bisection.t_e) << ','
      << detail::format_double(t.bisection.t) << ',' << (t.bisection.feasible ? 1 : 0) << '\n';
  }
  return o.str();
}

/// AP and user coordinates of the first trial, plus its large-scale gains.
inline std::string geometry_csv(const sim::Scenario& sc, const sim::GeometryDump& g, const std::string& version) {
  auto o = detail::csv_stream();
  o << csv_header_comment(sc, version) << "kind,index,x,y\n";
  for (std::size_t i = 0; i < g.geometry.ap_positions.size(); ++i) {
    const auto& p = g.geometry.ap_positions[i];
    o << "ap," << i << ',' << detail::format_double(p.x) << ',' << detail::format_double(p.y) << '\n';
  }
  for (std::size_t i = 0; i < g.geometry.user_positions.size(); ++i) {
    const auto& p = g.geometry.user_positions[i];
    o << "user," << i << ',' << detail::format_double(p.x) << ',' << detail::format_double(p.y) << '\n';
  }
  return o.str();
}

inline std::string beta_csv(const sim::Scenario& sc, const sim::GeometryDump& g, const std::string& version) {
  auto o = detail::csv_stream();
  o << csv_header_comment(sc, version) << "ap,user,beta\n";
  for (Eigen::Index m = 0; m < g.beta.rows(); ++m)
    for (Eigen::Index u = 0; u < g.beta.cols(); ++u)
      o << m << ',' << u << ',' << detail::format_double(g.beta(m, u)) << '\n';
  return o.str();
}

}  // namespace cellfree::io

#endif  // CELLFREE_REPORT_HPP
