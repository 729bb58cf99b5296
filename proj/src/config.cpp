#include "btltrack/config.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace btltrack {

namespace pt = boost::property_tree;

RuleKind parse_rule_kind(const std::string& s) {
  const std::string v = boost::algorithm::to_lower_copy(s);
  if (v == "ut" || v == "ukf") return RuleKind::UT;
  if (v == "ckf3") return RuleKind::CKF3;
  if (v == "ckf5") return RuleKind::CKF5;
  throw Error(ErrorCode::InvalidConfig, "unknown rule '" + s + "' (ut|ckf3|ckf5)");
}

FilterMode parse_mode(const std::string& s) {
  const std::string v = boost::algorithm::to_lower_copy(s);
  if (v == "isolated") return FilterMode::Isolated;
  if (v == "btlf") return FilterMode::Btlf;
  if (v == "mvf") return FilterMode::Mvf;
  throw Error(ErrorCode::InvalidConfig, "unknown mode '" + s + "' (isolated|btlf|mvf)");
}

InitMode parse_init_mode(const std::string& s) {
  const std::string v = boost::algorithm::to_lower_copy(s);
  if (v == "exact") return InitMode::Exact;
  if (v == "sampled") return InitMode::Sampled;
  throw Error(ErrorCode::InvalidConfig, "unknown init mode '" + s + "' (exact|sampled)");
}

namespace {

// Line numbers of "section.key" entries, for diagnostics.
std::map<std::string, int> index_lines(const std::string& text) {
  std::map<std::string, int> lines;
  std::istringstream in(text);
  std::string line;
  std::string section;
  for (int n = 1; std::getline(in, line); ++n) {
    boost::algorithm::trim(line);
    if (line.empty() || line[0] == ';' || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      boost::algorithm::trim(section);
      lines.emplace(section, n);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    boost::algorithm::trim(key);
    lines.emplace(section + "." + key, n);
  }
  return lines;
}

class Reader {
 public:
  Reader(const std::string& origin, std::map<std::string, int> lines)
      : origin_(origin), lines_(std::move(lines)) {}

  [[noreturn]] void fail(const std::string& where, const std::string& msg) const {
    std::ostringstream os;
    os << origin_;
    if (auto it = lines_.find(where); it != lines_.end()) os << ":" << it->second;
    os << ": " << where << ": " << msg;
    throw Error(ErrorCode::InvalidConfig, os.str());
  }

  void check_keys(const std::string& section, const pt::ptree& node,
                  const std::set<std::string>& allowed) const {
    for (const auto& [key, child] : node) {
      if (!allowed.count(key)) fail(section + "." + key, "unknown key");
    }
  }

  std::string text(const std::string& section, const pt::ptree& node, const std::string& key,
                   const std::string& fallback) const {
    auto v = node.get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!v) return fallback;
    std::string s = *v;
    boost::algorithm::trim(s);
    (void)section;
    return s;
  }

  double real(const std::string& section, const pt::ptree& node, const std::string& key,
              double fallback) const {
    const std::string s = text(section, node, key, "");
    if (s.empty()) return fallback;
    return to_real(section + "." + key, s);
  }

  long long integer(const std::string& section, const pt::ptree& node, const std::string& key,
                    long long fallback) const {
    const std::string s = text(section, node, key, "");
    if (s.empty()) return fallback;
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
      fail(section + "." + key, "expected an integer, got '" + s + "'");
    }
    if (used != s.size()) fail(section + "." + key, "expected an integer, got '" + s + "'");
    return v;
  }

  std::uint64_t unsigned64(const std::string& section, const pt::ptree& node,
                           const std::string& key, std::uint64_t fallback) const {
    const std::string s = text(section, node, key, "");
    if (s.empty()) return fallback;
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      v = std::stoull(s, &used, 0);
    } catch (const std::exception&) {
      fail(section + "." + key, "expected an unsigned 64-bit integer, got '" + s + "'");
    }
    if (used != s.size() || s[0] == '-') {
      fail(section + "." + key, "expected an unsigned 64-bit integer, got '" + s + "'");
    }
    return v;
  }

  bool boolean(const std::string& section, const pt::ptree& node, const std::string& key,
               bool fallback) const {
    const std::string s = boost::algorithm::to_lower_copy(text(section, node, key, ""));
    if (s.empty()) return fallback;
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    fail(section + "." + key, "expected true/false, got '" + s + "'");
  }

  Vector reals(const std::string& section, const pt::ptree& node, const std::string& key,
               const Vector& fallback) const {
    const std::string s = text(section, node, key, "");
    if (s.empty()) return fallback;
    std::vector<std::string> parts;
    boost::algorithm::split(parts, s, boost::algorithm::is_any_of(", \t"),
                            boost::algorithm::token_compress_on);
    Vector v(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) {
      v[static_cast<Eigen::Index>(i)] = to_real(section + "." + key, parts[i]);
    }
    return v;
  }

  std::vector<std::string> words(const std::string& section, const pt::ptree& node,
                                 const std::string& key, const std::string& fallback) const {
    std::string s = text(section, node, key, fallback);
    std::vector<std::string> parts;
    boost::algorithm::split(parts, s, boost::algorithm::is_any_of(", \t"),
                            boost::algorithm::token_compress_on);
    return parts;
  }

 private:
  double to_real(const std::string& where, const std::string& s) const {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      fail(where, "expected a number, got '" + s + "'");
    }
    if (used != s.size()) fail(where, "expected a number, got '" + s + "'");
    return v;
  }

  std::string origin_;
  std::map<std::string, int> lines_;
};

const pt::ptree* section(const pt::ptree& root, const std::string& name) {
  auto it = root.find(name);
  return it == root.not_found() ? nullptr : &it->second;
}

}  // namespace

LoadedConfig parse_config(const std::string& text, const std::string& origin) {
  pt::ptree root;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    std::ostringstream os;
    os << origin << ":" << e.line() << ": " << e.message();
    throw Error(ErrorCode::InvalidConfig, os.str());
  }
  const Reader r(origin, index_lines(text));

  LoadedConfig out;
  ExperimentConfig& cfg = out.experiment;
  cfg = reference_scenario(1.0);
  const pt::ptree empty;

  std::vector<std::pair<int, std::string>> filter_sections;
  for (const auto& [name, node] : root) {
    if (name == "model" || name == "sensors.source" || name == "sensors.primary" ||
        name == "mc") {
      continue;
    }
    if (boost::algorithm::starts_with(name, "filters.")) {
      const std::string id = name.substr(8);
      try {
        std::size_t used = 0;
        const int n = std::stoi(id, &used);
        if (used != id.size()) throw std::invalid_argument(id);
        filter_sections.emplace_back(n, name);
      } catch (const std::exception&) {
        r.fail(name, "filter sections are named [filters.N] with an integer N");
      }
      continue;
    }
    if (node.empty() && !node.data().empty()) r.fail("." + name, "key outside of a section");
    r.fail(name, "unknown section");
  }

  {
    const pt::ptree& m = section(root, "model") ? *section(root, "model") : empty;
    r.check_keys("model", m,
                 {"ts", "q1", "q2", "omega_epsilon", "x0", "p0_diag", "process_noise"});
    cfg.model.ts = r.real("model", m, "ts", cfg.model.ts);
    cfg.model.q1 = r.real("model", m, "q1", cfg.model.q1);
    cfg.model.q2 = r.real("model", m, "q2", cfg.model.q2);
    cfg.model.omega_epsilon = r.real("model", m, "omega_epsilon", cfg.model.omega_epsilon);
    cfg.x0 = r.reals("model", m, "x0", cfg.x0);
    if (cfg.x0.size() != kCtStateDim) r.fail("model.x0", "needs 5 entries");
    const Vector diag = r.reals("model", m, "p0_diag", cfg.p0.diagonal());
    if (diag.size() != kCtStateDim) r.fail("model.p0_diag", "needs 5 entries");
    if ((diag.array() < 0.0).any()) r.fail("model.p0_diag", "entries must be >= 0");
    cfg.p0 = diag.asDiagonal();
    cfg.process_noise = r.boolean("model", m, "process_noise", cfg.process_noise);
    try {
      cfg.model.validate();
    } catch (const Error& e) {
      r.fail("model", e.what());
    }
  }

  const auto read_sensor = [&](const std::string& name, const std::string& iw_key,
                               SensorModel& s) {
    const pt::ptree& node = section(root, name) ? *section(root, name) : empty;
    r.check_keys(name, node, {"sigma_r", "sigma_zeta", iw_key});
    s.sigma_r = r.real(name, node, "sigma_r", s.sigma_r);
    s.sigma_zeta = r.real(name, node, "sigma_zeta", s.sigma_zeta);
    s.intensity = r.real(name, node, iw_key, s.intensity);
    if (!(s.sigma_r > 0.0)) r.fail(name + ".sigma_r", "must be > 0");
    if (!(s.sigma_zeta > 0.0)) r.fail(name + ".sigma_zeta", "must be > 0");
    if (!(s.intensity > 0.0)) r.fail(name + "." + iw_key, "must be > 0");
  };
  read_sensor("sensors.source", "iw_star", cfg.source_sensor);
  read_sensor("sensors.primary", "iw", cfg.primary_sensor);

  {
    const pt::ptree& m = section(root, "mc") ? *section(root, "mc") : empty;
    r.check_keys("mc", m,
                 {"mc", "k_steps", "seed", "init", "measurement_noise", "divergence_m",
                    "max_divergence_fraction", "predicted_points", "mvf_covariance"});
    const long long mc = r.integer("mc", m, "mc", cfg.mc_runs);
    if (mc < 1 || mc > 100'000'000) r.fail("mc.mc", "must be in [1, 1e8]");
    cfg.mc_runs = static_cast<int>(mc);
    const long long k = r.integer("mc", m, "k_steps", cfg.k_steps);
    if (k < 1 || k > 1'000'000) r.fail("mc.k_steps", "must be in [1, 1e6]");
    cfg.k_steps = static_cast<int>(k);
    cfg.seed = r.unsigned64("mc", m, "seed", cfg.seed);
    try {
      cfg.init_mode = parse_init_mode(r.text("mc", m, "init", "sampled"));
    } catch (const Error& e) {
      r.fail("mc.init", e.what());
    }
    cfg.measurement_noise = r.boolean("mc", m, "measurement_noise", cfg.measurement_noise);
    try {
      cfg.predicted_points = parse_predicted_points(
          r.text("mc", m, "predicted_points", to_string(cfg.predicted_points)));
    } catch (const Error& e) {
      r.fail("mc.predicted_points", e.what());
    }
    try {
      cfg.mvf_covariance =
          parse_mvf_covariance(r.text("mc", m, "mvf_covariance", to_string(cfg.mvf_covariance)));
    } catch (const Error& e) {
      r.fail("mc.mvf_covariance", e.what());
    }
    cfg.divergence_m = r.real("mc", m, "divergence_m", cfg.divergence_m);
    if (!(cfg.divergence_m > 0.0)) r.fail("mc.divergence_m", "must be > 0");
    out.settings.max_divergence_fraction =
        r.real("mc", m, "max_divergence_fraction", out.settings.max_divergence_fraction);
    if (!(out.settings.max_divergence_fraction >= 0.0 &&
          out.settings.max_divergence_fraction <= 1.0)) {
      r.fail("mc.max_divergence_fraction", "must be in [0, 1]");
    }
  }

  std::sort(filter_sections.begin(), filter_sections.end());
  for (const auto& [id, name] : filter_sections) {
    const pt::ptree& f = *section(root, name);
    r.check_keys(name, f, {"rule", "alpha", "kappa", "modes"});
    RuleSpec rule;
    try {
      rule.kind = parse_rule_kind(r.text(name, f, "rule", ""));
    } catch (const Error& e) {
      r.fail(name + ".rule", e.what());
    }
    rule.n_x = kCtStateDim;
    if (rule.kind == RuleKind::UT) {
      rule.alpha = r.real(name, f, "alpha", 1.0);
      rule.kappa = r.real(name, f, "kappa", 0.0);
      if (!(rule.alpha >= 1e-4 && rule.alpha <= 1.0)) r.fail(name + ".alpha", "must be in [1e-4, 1]");
      try {
        rule.validate();
      } catch (const Error& e) {
        r.fail(name + ".kappa", e.what());
      }
    } else if (f.find("kappa") != f.not_found() || f.find("alpha") != f.not_found()) {
      r.fail(name, "alpha/kappa only apply to rule = ut");
    }
    for (const std::string& word : r.words(name, f, "modes", "isolated")) {
      try {
        cfg.variants.push_back({rule, parse_mode(word)});
      } catch (const Error& e) {
        r.fail(name + ".modes", e.what());
      }
    }
  }
  return out;
}

LoadedConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

}  // namespace btltrack
