#include "cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace weakcv_cli {

namespace {

[[noreturn]] void fail(const std::string& msg, int line) {
  if (line > 0)
    throw ConfigError("line " + std::to_string(line) + ": " + msg);
  throw ConfigError(msg);
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_double(const std::string& key, const std::string& value,
                    int line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing text");
    return v;
  } catch (const std::exception&) {
    fail("key '" + key + "': '" + value + "' is not a number", line);
  }
}

std::int64_t parse_int(const std::string& key, const std::string& value,
                       int line) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing text");
    return v;
  } catch (const std::exception&) {
    fail("key '" + key + "': '" + value + "' is not an integer", line);
  }
}

std::uint64_t parse_uint(const std::string& key, const std::string& value,
                         int line) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size() || value.find('-') != std::string::npos)
      throw std::invalid_argument("trailing text");
    return v;
  } catch (const std::exception&) {
    fail("key '" + key + "': '" + value + "' is not a non-negative integer",
         line);
  }
}

bool parse_bool(const std::string& key, const std::string& value, int line) {
  if (value == "true" || value == "1" || value == "on" || value == "yes")
    return true;
  if (value == "false" || value == "0" || value == "off" || value == "no")
    return false;
  fail("key '" + key + "': '" + value + "' is not a boolean", line);
}

/// "2^-k" -> k, or -1 when the token is not of that shape.
int dyadic_exponent(const std::string& tok) {
  if (tok.size() < 4 || tok[0] != '2' || tok[1] != '^' || tok[2] != '-')
    return -1;
  int k = 0;
  for (std::size_t i = 3; i < tok.size(); ++i) {
    if (tok[i] < '0' || tok[i] > '9') return -1;
    k = k * 10 + (tok[i] - '0');
    if (k > 60) return -1;
  }
  return k;
}

void push_epsilon(std::vector<double>& out, double eps,
                  const std::string& tok) {
  if (!(eps > 0.0 && eps < 1.0))
    throw ConfigError("epsilon entry '" + tok +
                      "' is outside the open interval (0,1)");
  out.push_back(eps);
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Dyadic powers print exactly; everything else keeps full precision.
std::string format_epsilon(double eps) {
  int e = 0;
  const double frac = std::frexp(eps, &e);
  if (frac == 0.5 && e <= 0 && e >= -59)
    return "2^-" + std::to_string(1 - e);
  return format_double(eps);
}

}  // namespace

std::vector<double> parse_epsilon_list(const std::string& text) {
  std::vector<double> out;
  for (const std::string& tok : split(text, ',')) {
    if (tok.empty())
      throw ConfigError("empty epsilon entry in '" + text + "'");
    const auto dots = tok.find("..");
    if (dots != std::string::npos) {
      const int a = dyadic_exponent(tok.substr(0, dots));
      const int b = dyadic_exponent(tok.substr(dots + 2));
      if (a < 0 || b < 0)
        throw ConfigError("epsilon range '" + tok +
                          "' must look like 2^-2..2^-6");
      const int step = a <= b ? 1 : -1;
      for (int k = a;; k += step) {
        push_epsilon(out, std::ldexp(1.0, -k), tok);
        if (k == b) break;
      }
      continue;
    }
    const int k = dyadic_exponent(tok);
    if (k >= 0) {
      push_epsilon(out, std::ldexp(1.0, -k), tok);
      continue;
    }
    try {
      std::size_t pos = 0;
      const double v = std::stod(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument("trailing text");
      push_epsilon(out, v, tok);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("epsilon entry '" + tok + "' is not a number");
    }
  }
  return out;
}

std::vector<double> RunConfig::resolved_epsilons() const {
  if (!epsilons.empty()) return epsilons;
  return parse_epsilon_list(tier == "full" ? "2^-2..2^-6" : "2^-2..2^-4");
}

std::int64_t RunConfig::resolved_reps() const {
  if (reps) return *reps;
  return tier == "full" ? 100 : 20;
}

std::vector<std::int64_t> RunConfig::resolved_steps() const {
  if (!steps_list.empty()) return steps_list;
  return {2, 4, 8, 16};
}

void RunConfig::validate() const {
  if (model.empty()) throw ConfigError("key 'model': must not be empty");
  if (methods.empty()) throw ConfigError("key 'method': must not be empty");
  for (const std::string& m : methods)
    if (m != "smc" && m != "mlmc" && m != "rcv" && m != "rrcv")
      throw ConfigError("key 'method': unknown method '" + m +
                        "' (expected smc, mlmc, rcv or rrcv)");
  if (order != 1 && order != 2)
    throw ConfigError("key 'order': scheme order must be 1 or 2");
  if (p < 0) throw ConfigError("key 'p': degree must be non-negative");
  if (basis != "global" && basis != "piecewise")
    throw ConfigError("key 'basis': expected global or piecewise");
  if (truncate != "auto" && truncate != "on" && truncate != "off")
    throw ConfigError("key 'truncate': expected auto, on or off");
  if (q_cubes && *q_cubes < 1)
    throw ConfigError("key 'q': cubes per axis must be at least 1");
  if (r_halfwidth && !(*r_halfwidth > 0.0))
    throw ConfigError("key 'r': half-width must be positive");
  if (reps && *reps < 1)
    throw ConfigError("key 'reps': repetition count must be at least 1");
  if (threads < 0)
    throw ConfigError("key 'threads': thread budget must be non-negative");
  if (tier != "quick" && tier != "full")
    throw ConfigError("key 'tier': expected quick or full");
  for (std::int64_t s : steps_list)
    if (s < 1) throw ConfigError("key 'steps': step counts must be positive");
  if (!(nu == 0.0 || nu > 0.0))
    throw ConfigError("key 'nu': tail exponent must be positive or inf");
  for (double c : {c_j, c_n, c_n0, c_q, c_r})
    if (c < 0.0)
      throw ConfigError("prefactors must be non-negative (0 = default)");
  if (exact_cv && model != "motivating")
    throw ConfigError(
        "key 'exact_cv': closed-form coefficients exist only for the "
        "motivating model");
}

void apply_key(RunConfig& cfg, const std::string& key,
               const std::string& value, int line) {
  if (key == "model") {
    cfg.model = value;
  } else if (key == "method") {
    cfg.methods = split(value, ',');
    for (const std::string& m : cfg.methods)
      if (m.empty()) fail("key 'method': empty entry", line);
  } else if (key == "order") {
    cfg.order = static_cast<int>(parse_int(key, value, line));
  } else if (key == "epsilon") {
    try {
      cfg.epsilons = parse_epsilon_list(value);
    } catch (const ConfigError& e) {
      fail(e.what(), line);
    }
  } else if (key == "p") {
    cfg.p = static_cast<int>(parse_int(key, value, line));
  } else if (key == "basis") {
    cfg.basis = value;
  } else if (key == "q") {
    cfg.q_cubes = parse_int(key, value, line);
  } else if (key == "r") {
    cfg.r_halfwidth = parse_double(key, value, line);
  } else if (key == "truncate") {
    cfg.truncate = value;
  } else if (key == "nu") {
    if (value == "inf" || value == "infinity")
      cfg.nu = 0.0;
    else
      cfg.nu = parse_double(key, value, line);
  } else if (key == "c_j") {
    cfg.c_j = parse_double(key, value, line);
  } else if (key == "c_n") {
    cfg.c_n = parse_double(key, value, line);
  } else if (key == "c_n0") {
    cfg.c_n0 = parse_double(key, value, line);
  } else if (key == "c_q") {
    cfg.c_q = parse_double(key, value, line);
  } else if (key == "c_r") {
    cfg.c_r = parse_double(key, value, line);
  } else if (key == "reps") {
    const std::int64_t r = parse_int(key, value, line);
    if (r < 1)
      fail("key 'reps': repetition count must be at least 1", line);
    cfg.reps = r;
  } else if (key == "seed") {
    cfg.seed = parse_uint(key, value, line);
  } else if (key == "threads") {
    cfg.threads = static_cast<int>(parse_int(key, value, line));
  } else if (key == "output") {
    cfg.output = value;
  } else if (key == "tier") {
    cfg.tier = value;
  } else if (key == "steps") {
    cfg.steps_list.clear();
    for (const std::string& tok : split(value, ','))
      cfg.steps_list.push_back(parse_int(key, tok, line));
  } else if (key == "exact_cv") {
    cfg.exact_cv = parse_bool(key, value, line);
  } else if (key == "emit_gnuplot") {
    cfg.emit_gnuplot = parse_bool(key, value, line);
  } else if (key == "command" || key == "version") {
    // manifest bookkeeping; carried for humans, not configuration
  } else {
    fail("unknown key '" + key + "'", line);
  }
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string s = trim(raw);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      fail("expected 'key = value', got '" + s + "'", line);
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) fail("missing key before '='", line);
    apply_key(cfg, key, value, line);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good())
    throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string canonical_text(const RunConfig& cfg) {
  std::ostringstream out;
  out << "model = " << cfg.model << "\n";
  out << "method = ";
  for (std::size_t i = 0; i < cfg.methods.size(); ++i)
    out << (i ? "," : "") << cfg.methods[i];
  out << "\n";
  out << "order = " << cfg.order << "\n";
  if (!cfg.epsilons.empty()) {
    out << "epsilon = ";
    for (std::size_t i = 0; i < cfg.epsilons.size(); ++i)
      out << (i ? "," : "") << format_epsilon(cfg.epsilons[i]);
    out << "\n";
  }
  out << "p = " << cfg.p << "\n";
  out << "basis = " << cfg.basis << "\n";
  if (cfg.q_cubes) out << "q = " << *cfg.q_cubes << "\n";
  if (cfg.r_halfwidth) out << "r = " << format_double(*cfg.r_halfwidth) << "\n";
  out << "truncate = " << cfg.truncate << "\n";
  out << "nu = " << (cfg.nu == 0.0 ? "inf" : format_double(cfg.nu)) << "\n";
  out << "c_j = " << format_double(cfg.c_j) << "\n";
  out << "c_n = " << format_double(cfg.c_n) << "\n";
  out << "c_n0 = " << format_double(cfg.c_n0) << "\n";
  out << "c_q = " << format_double(cfg.c_q) << "\n";
  out << "c_r = " << format_double(cfg.c_r) << "\n";
  if (cfg.reps) out << "reps = " << *cfg.reps << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "threads = " << cfg.threads << "\n";
  out << "output = " << cfg.output << "\n";
  out << "tier = " << cfg.tier << "\n";
  if (!cfg.steps_list.empty()) {
    out << "steps = ";
    for (std::size_t i = 0; i < cfg.steps_list.size(); ++i)
      out << (i ? "," : "") << cfg.steps_list[i];
    out << "\n";
  }
  out << "exact_cv = " << (cfg.exact_cv ? "true" : "false") << "\n";
  out << "emit_gnuplot = " << (cfg.emit_gnuplot ? "true" : "false") << "\n";
  return out.str();
}

}  // namespace weakcv_cli
