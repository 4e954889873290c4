#ifndef CELLFREE_SCENARIO_IO_HPP
#define CELLFREE_SCENARIO_IO_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <locale>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "cellfree/errors.hpp"
#include "cellfree/simulate.hpp"

namespace cellfree::io {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  return out;
}

/// Shortest text that parses back to exactly `v`; never locale dependent.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct FieldReader {
  std::size_t line;
  std::string key;

  [[noreturn]] void fail(const std::string& why) const { throw ParseError(line, key, why); }

  double number(std::string_view text) const {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, v);
    if (text.empty() || res.ec != std::errc() || res.ptr != end) fail("expected a number, got '" + std::string(text) + "'");
    return v;
  }

  template <class Int>
  Int integer(std::string_view text) const {
    Int v = 0;
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, v);
    if (text.empty() || res.ec != std::errc() || res.ptr != end)
      fail("expected a non-negative integer, got '" + std::string(text) + "'");
    return v;
  }

  bool boolean(std::string_view text) const {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    fail("expected true or false, got '" + std::string(text) + "'");
  }

  /// Comma list; an item `a:step:b` expands to a, a+step, ... up to b.
  std::vector<double> numbers(std::string_view text) const {
    std::vector<double> out;
    if (trim(text).empty()) return out;
    for (auto item : split(text, ',')) {
      const auto parts = split(item, ':');
      if (parts.size() == 1) {
        out.push_back(number(item));
      } else if (parts.size() == 3) {
        const double a = number(parts[0]);
        const double step = number(parts[1]);
        const double b = number(parts[2]);
        if (!(step > 0.0) || b < a) fail("range needs step > 0 and start <= stop");
        const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
        for (std::size_t k = 0; k < count; ++k) out.push_back(a + static_cast<double>(k) * step);
      } else {
        fail("malformed list item '" + std::string(item) + "'");
      }
    }
    return out;
  }

  std::vector<sim::Series> series(std::string_view text) const {
    std::vector<sim::Series> out;
    if (trim(text).empty()) return out;
    for (auto item : split(text, ',')) {
      const auto parts = split(item, ':');
      if (parts.size() != 2) fail("series items look like PRECODER:PA, got '" + std::string(item) + "'");
      sim::Series s;
      const auto pre = upper(parts[0]);
      if (pre == "CB") s.precoder = precoding::PrecoderKind::CB;
      else if (pre == "ZF") s.precoder = precoding::PrecoderKind::ZF;
      else if (pre == "MMSE") s.precoder = precoding::PrecoderKind::MMSE;
      else if (pre == "RMMSE") s.precoder = precoding::PrecoderKind::RMMSE;
      else fail("unknown precoder '" + std::string(parts[0]) + "'");
      const auto pa = upper(parts[1]);
      if (pa == "UPA") s.pa = power::Scheme::UPA;
      else if (pa == "OPA") s.pa = power::Scheme::OPA;
      else fail("unknown power allocation '" + std::string(parts[1]) + "'");
      out.push_back(s);
    }
    return out;
  }
};

template <class T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& fmt) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt(v[i]);
  }
  return out;
}

}  // namespace detail

/// Parses flat `key = value` text. Blank lines and text after `#` are ignored;
/// every key may appear at most once. Unset keys keep their defaults. The
/// result is validated, so m_aps and u_users must be present.
inline sim::Scenario parse_scenario_text(std::string_view text) {
  sim::Scenario s;
  std::map<std::string, std::size_t> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "", "expected key = value");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "", "missing key before '='");
    if (const auto it = seen.find(key); it != seen.end()) {
      throw ParseError(line_no, key, "duplicate key (first set on line " + std::to_string(it->second) + ")");
    }
    seen.emplace(key, line_no);
    const detail::FieldReader r{line_no, key};

    if (key == "m_aps") s.m_aps = r.integer<std::size_t>(value);
    else if (key == "u_users") s.u_users = r.integer<std::size_t>(value);
    else if (key == "area_side") s.area_side = r.number(value);
    else if (key == "n_csi") s.n_csi = r.numbers(value);
    else if (key == "snr_grid_db") s.snr_grid_db = r.numbers(value);
    else if (key == "trials") s.trials = r.integer<std::size_t>(value);
    else if (key == "seed") s.seed = r.integer<std::uint64_t>(value);
    else if (key == "packet_symbols") s.packet_symbols = r.integer<std::size_t>(value);
    else if (key == "modulation") {
      if (detail::upper(value) != "QPSK") r.fail("only qpsk is supported");
      s.modulation = sim::Modulation::QPSK;
    }
    else if (key == "series") s.series = r.series(value);
    else if (key == "iters_prec") s.iters_prec = r.integer<std::size_t>(value);
    else if (key == "iters_pa") s.iters_pa = r.integer<std::size_t>(value);
    else if (key == "gamma_grid") s.gamma_grid = r.numbers(value);
    else if (key == "theta") s.theta = r.number(value);
    else if (key == "eps_bisect") s.eps_bisect = r.number(value);
    else if (key == "noise_t0") s.noise.t0_kelvin = r.number(value);
    else if (key == "noise_kb") s.noise.k_boltzmann = r.number(value);
    else if (key == "bandwidth_hz") s.noise.bandwidth_hz = r.number(value);
    else if (key == "noise_figure_db") s.noise.noise_figure_db = r.number(value);
    else if (key == "carrier_mhz") s.propagation.carrier_mhz = r.number(value);
    else if (key == "h_ap") s.propagation.h_ap = r.number(value);
    else if (key == "h_user") s.propagation.h_user = r.number(value);
    else if (key == "d0") s.propagation.d0 = r.number(value);
    else if (key == "d1") s.propagation.d1 = r.number(value);
    else if (key == "sigma_sh_db") s.propagation.sigma_sh_db = r.number(value);
    else if (key == "cdf_snr_db") s.cdf_snr_db = r.number(value);
    else if (key == "write_ber") s.write_ber = r.boolean(value);
    else if (key == "write_rates") s.write_rates = r.boolean(value);
    else if (key == "write_cdf") s.write_cdf = r.boolean(value);
    else r.fail("unknown key");
  }
  sim::validate(s);
  return s;
}

inline sim::Scenario parse_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "", "cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str());
}

/// Canonical text of every field; parse_scenario_text() reads it back exactly.
inline std::string print_scenario(const sim::Scenario& s) {
  using detail::format_double;
  const std::function<std::string(const double&)> num = [](const double& v) { return format_double(v); };
  const std::function<std::string(const sim::Series&)> ser = [](const sim::Series& v) {
    return std::string(precoding::to_string(v.precoder)) + ":" + power::to_string(v.pa);
  };
  std::ostringstream o;
  o.imbue(std::locale::classic());
  o << "m_aps = " << s.m_aps << '\n'
    << "u_users = " << s.u_users << '\n'
    << "area_side = " << format_double(s.area_side) << '\n'
    << "n_csi = " << detail::join(s.n_csi, num) << '\n'
    << "snr_grid_db = " << detail::join(s.snr_grid_db, num) << '\n'
    << "trials = " << s.trials << '\n'
    << "seed = " << s.seed << '\n'
    << "packet_symbols = " << s.packet_symbols << '\n'
    << "modulation = qpsk\n"
    << "series = " << detail::join(s.series, ser) << '\n'
    << "iters_prec = " << s.iters_prec << '\n'
    << "iters_pa = " << s.iters_pa << '\n'
    << "gamma_grid = " << detail::join(s.gamma_grid, num) << '\n'
    << "theta = " << format_double(s.theta) << '\n'
    << "eps_bisect = " << format_double(s.eps_bisect) << '\n'
    << "noise_t0 = " << format_double(s.noise.t0_kelvin) << '\n'
    << "noise_kb = " << format_double(s.noise.k_boltzmann) << '\n'
    << "bandwidth_hz = " << format_double(s.noise.bandwidth_hz) << '\n'
    << "noise_figure_db = " << format_double(s.noise.noise_figure_db) << '\n'
    << "carrier_mhz = " << format_double(s.propagation.carrier_mhz) << '\n'
    << "h_ap = " << format_double(s.propagation.h_ap) << '\n'
    << "h_user = " << format_double(s.propagation.h_user) << '\n'
    << "d0 = " << format_double(s.propagation.d0) << '\n'
    << "d1 = " << format_double(s.propagation.d1) << '\n'
    << "sigma_sh_db = " << format_double(s.propagation.sigma_sh_db) << '\n'
    << "cdf_snr_db = " << format_double(s.cdf_snr_db) << '\n'
    << "write_ber = " << (s.write_ber ? "true" : "false") << '\n'
    << "write_rates = " << (s.write_rates ? "true" : "false") << '\n'
    << "write_cdf = " << (s.write_cdf ? "true" : "false") << '\n';
  return o.str();
}

/// 64-bit FNV-1a of the canonical text, as 16 hex digits.
inline std::string scenario_hash(const sim::Scenario& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char c : print_scenario(s)) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
  return out;
}

}  // namespace cellfree::io

#endif  // CELLFREE_SCENARIO_IO_HPP
