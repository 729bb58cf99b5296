#include "btltrack/cli.hpp"

#include "btltrack/config.hpp"
#include "btltrack/report_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace btltrack {

namespace fs = std::filesystem;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> mc;
  std::optional<double> kappa;
  std::optional<double> iw;
  std::string out = ".";
  unsigned threads = 0;
  std::optional<std::string> init;
};

void add_common(CLI::App& app, CommonFlags& f, bool config_required) {
  auto* c = app.add_option("--config", f.config, "Experiment config file");
  if (config_required) c->required();
  app.add_option("--seed", f.seed, "Root seed (overrides BTLTRACK_SEED and the config)");
  app.add_option("--mc", f.mc, "Monte Carlo replicas")->check(CLI::PositiveNumber);
  app.add_option("--kappa", f.kappa, "Replace kappa of every UT filter");
  app.add_option("--iw", f.iw, "Primary sensor noise intensity")->check(CLI::PositiveNumber);
  app.add_option("--out", f.out, "Output directory")->capture_default_str();
  app.add_option("--threads", f.threads, "Replica threads (0: all cores)")->capture_default_str();
  app.add_option("--init", f.init, "Initial estimate: exact|sampled");
}

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("BTLTRACK_SEED");
  if (s == nullptr || *s == '\0') return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s, &end, 0);
  if (errno != 0 || *end != '\0' || *s == '-') {
    throw ConfigError(std::string("BTLTRACK_SEED: expected an unsigned 64-bit integer, got '") +
                      s + "'");
  }
  return static_cast<std::uint64_t>(v);
}

void set_kappa(ExperimentConfig& cfg, double kappa) {
  for (Variant& v : cfg.variants) {
    if (v.rule.kind == RuleKind::UT) v.rule.kappa = kappa;
  }
}

/// Applies command-line and environment overrides, then validates.
void apply_overrides(ExperimentConfig& cfg, const CommonFlags& f) {
  if (auto s = env_seed()) cfg.seed = *s;
  if (f.seed) cfg.seed = *f.seed;
  if (f.mc) cfg.mc_runs = *f.mc;
  if (f.kappa) set_kappa(cfg, *f.kappa);
  if (f.iw) cfg.primary_sensor.intensity = *f.iw;
  if (f.init) cfg.init_mode = parse_init_mode(*f.init);
}

void validate_or_throw(const ExperimentConfig& cfg) {
  try {
    cfg.validate();
    for (const Variant& v : cfg.variants) v.rule.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

std::map<std::string, std::string> provenance(const ExperimentConfig& cfg,
                                              const std::string& command) {
  return {{"version", kVersion},
          {"command", command},
          {"config_hash", hex64(config_hash(cfg))},
          {"seed", std::to_string(cfg.seed)},
          {"mc", std::to_string(cfg.mc_runs)},
          {"k_steps", std::to_string(cfg.k_steps)},
          {"init", to_string(cfg.init_mode)}};
}

struct Manifest {
  std::string command;
  std::string config_path;
  std::vector<std::string> config_echo;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  double runtime_s = 0.0;

  std::string text() const {
    std::ostringstream os;
    os << "version=" << kVersion << "\n"
       << "command=" << command << "\n"
       << "config_path=" << (config_path.empty() ? "<builtin>" : config_path) << "\n"
       << "seed=" << seed << "\n"
       << "runtime_s=" << format_real(runtime_s) << "\n";
    for (const auto& o : outputs) os << "output=" << o << "\n";
    for (const auto& c : config_echo) os << "config=" << c << "\n";
    return os.str();
  }
};

/// Exit 3 when any variant diverged on more than the allowed fraction.
int divergence_status(const McReport& report, double max_fraction, std::ostream& err) {
  int status = kExitOk;
  for (const VariantReport& v : report.variants) {
    const double frac = static_cast<double>(v.diverged_runs) / report.mc_runs;
    if (frac > max_fraction) {
      err << "divergence: " << v.variant.name() << " diverged on " << v.diverged_runs << "/"
          << report.mc_runs << " runs (limit " << max_fraction << ")\n";
      status = kExitDivergence;
    }
  }
  return status;
}

std::string fixed(double v, int digits = 4) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

/// One line per rule with the isolated / mvf / btlf time-averaged RMSE.
std::string wide_summary(const McReport& report) {
  std::vector<std::string> rules;
  for (const VariantReport& v : report.variants) {
    const std::string label = v.variant.rule.label();
    if (std::find(rules.begin(), rules.end(), label) == rules.end()) rules.push_back(label);
  }
  std::ostringstream os;
  os << std::left << std::setw(18) << "filter" << std::right << std::setw(12) << "isolated"
     << std::setw(12) << "mvf" << std::setw(12) << "btlf" << "\n";
  for (const std::string& label : rules) {
    os << std::left << std::setw(18) << label << std::right;
    for (FilterMode mode : {FilterMode::Isolated, FilterMode::Mvf, FilterMode::Btlf}) {
      std::string cell = "-";
      for (const VariantReport& v : report.variants) {
        if (v.variant.rule.label() == label && v.variant.mode == mode) {
          cell = fixed(v.time_avg_rmse);
        }
      }
      os << std::setw(12) << cell;
    }
    os << "\n";
  }
  return os.str();
}

ExperimentConfig base_config(const CommonFlags& f, RunSettings& settings, Manifest& manifest) {
  if (f.config.empty()) return reference_scenario(1.0);
  LoadedConfig loaded = load_config(f.config);
  settings = loaded.settings;
  manifest.config_path = f.config;
  return loaded.experiment;
}

void echo_config(const ExperimentConfig& cfg, Manifest& manifest) {
  std::istringstream in(canonical_string(cfg));
  for (std::string line; std::getline(in, line);) manifest.config_echo.push_back(line);
}

double elapsed(const McReport& r) {
  double t = 0.0;
  for (const auto& v : r.variants) t += v.runtime_s;
  return t;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const CommonFlags& f, std::ostream& out, std::ostream& err) {
  RunSettings settings;
  Manifest manifest;
  manifest.command = "simulate";
  ExperimentConfig cfg = base_config(f, settings, manifest);
  apply_overrides(cfg, f);
  validate_or_throw(cfg);
  if (cfg.variants.empty()) throw ConfigError("config defines no [filters.N] sections");

  const McReport report = run_mc(cfg, {f.threads});
  const double iw = cfg.primary_sensor.intensity;

  const fs::path dir(f.out);
  ResultTable curves{provenance(cfg, "simulate"), curve_rows(report, iw)};
  ResultTable summary{provenance(cfg, "simulate"), summary_rows(report, iw)};
  write_atomic(dir / "rmse_curve.tsv", format_table(curves));
  write_atomic(dir / "summary.tsv", format_table(summary));

  manifest.seed = cfg.seed;
  manifest.runtime_s = elapsed(report);
  manifest.outputs = {(dir / "rmse_curve.tsv").string(), (dir / "summary.tsv").string()};
  echo_config(cfg, manifest);
  write_atomic(dir / "manifest.txt", manifest.text());

  out << "# iw=" << format_real(iw) << " mc=" << cfg.mc_runs << " seed=" << cfg.seed << "\n"
      << wide_summary(report);
  return divergence_status(report, settings.max_divergence_fraction, err);
}

// ------------------------------------------------------------------- sweep

int cmd_sweep(const CommonFlags& f, const std::string& kind,
              const std::vector<std::string>& value_text, std::ostream& out, std::ostream& err) {
  std::vector<double> values;
  for (const std::string& t : value_text) {
    if (t.empty()) continue;
    std::size_t used = 0;
    try {
      values.push_back(std::stod(t, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != t.size()) throw ConfigError("--values: not a number: '" + t + "'");
  }
  if (values.empty()) throw ConfigError("--values: empty sweep list");
  RunSettings settings;
  Manifest manifest;
  manifest.command = "sweep";
  ExperimentConfig base = base_config(f, settings, manifest);
  apply_overrides(base, f);
  validate_or_throw(base);
  if (base.variants.empty()) throw ConfigError("config defines no [filters.N] sections");

  ResultTable table{provenance(base, "sweep"), {}};
  table.meta["sweep"] = kind;
  std::string list;
  for (double v : values) list += (list.empty() ? "" : ",") + format_real(v);
  table.meta["values"] = list;

  int status = kExitOk;
  double runtime = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    ExperimentConfig cfg = base;
    if (kind == "kappa") {
      set_kappa(cfg, values[i]);
      // Rules without kappa are evaluated once, on the first sweep point.
      if (i > 0) {
        std::erase_if(cfg.variants, [](const Variant& v) { return v.rule.kind != RuleKind::UT; });
      }
      if (cfg.variants.empty()) continue;
    } else {
      cfg.primary_sensor.intensity = values[i];
    }
    validate_or_throw(cfg);
    const McReport report = run_mc(cfg, {f.threads});
    runtime += elapsed(report);
    auto rows = summary_rows(report, cfg.primary_sensor.intensity);
    table.rows.insert(table.rows.end(), rows.begin(), rows.end());
    out << "# " << kind << "=" << format_real(values[i]) << "\n" << wide_summary(report);
    status = std::max(status, divergence_status(report, settings.max_divergence_fraction, err));
  }

  const fs::path dir(f.out);
  const fs::path path = dir / ("sweep_" + kind + ".tsv");
  write_atomic(path, format_table(table));
  manifest.seed = base.seed;
  manifest.runtime_s = runtime;
  manifest.outputs = {path.string()};
  echo_config(base, manifest);
  write_atomic(dir / "manifest.txt", manifest.text());
  return status;
}

// --------------------------------------------------------------- stability

struct Range {
  double lo = 0.0, hi = 0.0, step = 1.0;
};

Range parse_range(const std::string& opt, const std::string& s) {
  std::vector<double> parts;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ':');) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      throw ConfigError(opt + ": expected lo:hi[:step], got '" + s + "'");
    }
    parts.push_back(v);
  }
  if (parts.size() == 1) parts.push_back(parts[0]);
  if (parts.size() < 2 || parts.size() > 3) {
    throw ConfigError(opt + ": expected lo:hi[:step], got '" + s + "'");
  }
  Range r{parts[0], parts[1], parts.size() == 3 ? parts[2] : 1.0};
  if (!(r.step > 0.0) || r.hi < r.lo) throw ConfigError(opt + ": empty or invalid range");
  return r;
}

std::vector<double> expand(const Range& r) {
  std::vector<double> v;
  const auto n = static_cast<long>(std::floor((r.hi - r.lo) / r.step + 1e-9));
  for (long i = 0; i <= n; ++i) v.push_back(r.lo + static_cast<double>(i) * r.step);
  return v;
}

int cmd_stability(const std::string& rule_name, const std::string& nx_range,
                  const std::string& kappa_range, double alpha, const std::string& out_dir,
                  std::ostream& out) {
  RuleKind kind{};
  try {
    kind = parse_rule_kind(rule_name);
  } catch (const Error& e) {
    throw ConfigError(std::string("--rule: ") + e.what());
  }
  const std::vector<double> nxs = expand(parse_range("--nx-range", nx_range));
  const std::vector<double> kappas = kind == RuleKind::UT
                                         ? expand(parse_range("--kappa-range", kappa_range))
                                         : std::vector<double>{0.0};
  std::ostringstream os;
  os << "# schema=" << kResultSchemaVersion << "\n# version=" << kVersion
     << "\n# command=stability\nrule\tn_x\tkappa\talpha\tstability\n";
  for (double nxd : nxs) {
    const int nx = static_cast<int>(nxd);
    if (nx != nxd || nx < 1) throw ConfigError("--nx-range: dimensions must be integers >= 1");
    for (double kappa : kappas) {
      RuleSpec spec{kind, kind == RuleKind::UT ? alpha : 1.0, kind == RuleKind::UT ? kappa : 0.0,
                    nx};
      double s = 0.0;
      try {
        spec.validate();
        s = stability_measure(spec);
      } catch (const Error& e) {
        throw ConfigError(spec.label() + " at n_x=" + std::to_string(nx) + ": " + e.what());
      }
      os << (kind == RuleKind::UT ? "ut" : kind == RuleKind::CKF3 ? "ckf3" : "ckf5") << "\t"
         << nx << "\t" << (kind == RuleKind::UT ? format_real(kappa) : "-") << "\t"
         << (kind == RuleKind::UT ? format_real(alpha) : "-") << "\t" << format_real(s) << "\n";
    }
  }
  out << os.str();
  if (!out_dir.empty()) write_atomic(fs::path(out_dir) / "stability.tsv", os.str());
  return kExitOk;
}

// ------------------------------------------------------------------ table2

std::vector<Variant> table2_variants() {
  std::vector<RuleSpec> rules;
  for (double kappa : {-2.0, -1.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0}) {
    rules.push_back(RuleSpec::ut(kCtStateDim, kappa));
  }
  rules.push_back(RuleSpec::ckf3(kCtStateDim));
  rules.push_back(RuleSpec::ckf5(kCtStateDim));
  std::vector<Variant> variants;
  for (const RuleSpec& r : rules) {
    for (FilterMode m : {FilterMode::Isolated, FilterMode::Mvf, FilterMode::Btlf}) {
      variants.push_back({r, m});
    }
  }
  return variants;
}

int cmd_table2(const CommonFlags& f, std::ostream& out, std::ostream& err) {
  RunSettings settings;
  Manifest manifest;
  manifest.command = "table2";
  ExperimentConfig base = base_config(f, settings, manifest);
  base.variants = table2_variants();
  CommonFlags flags = f;
  std::vector<double> intensities{1.0, 4.0, 8.0};
  if (f.iw) intensities = {*f.iw};
  flags.iw.reset();
  apply_overrides(base, flags);
  if (f.kappa) throw ConfigError("--kappa: table2 always runs the full kappa grid");
  validate_or_throw(base);

  ResultTable table{provenance(base, "table2"), {}};
  ResultTable curves{provenance(base, "table2"), {}};
  std::ostringstream wide;
  int status = kExitOk;
  double runtime = 0.0;
  for (double iw : intensities) {
    ExperimentConfig cfg = base;
    cfg.primary_sensor.intensity = iw;
    validate_or_throw(cfg);
    const McReport report = run_mc(cfg, {f.threads});
    runtime += elapsed(report);
    const std::string key = "config_hash.iw" + format_real(iw);
    table.meta[key] = curves.meta[key] = hex64(report.config_hash);
    auto rows = summary_rows(report, iw);
    table.rows.insert(table.rows.end(), rows.begin(), rows.end());
    auto crows = curve_rows(report, iw);
    curves.rows.insert(curves.rows.end(), crows.begin(), crows.end());
    wide << "# iw=" << format_real(iw) << "\n" << wide_summary(report);
    status = std::max(status, divergence_status(report, settings.max_divergence_fraction, err));
  }

  const fs::path dir(f.out);
  write_atomic(dir / "table2.tsv", format_table(table));
  write_atomic(dir / "table2_curves.tsv", format_table(curves));
  write_atomic(dir / "table2_wide.txt", wide.str());
  manifest.seed = base.seed;
  manifest.runtime_s = runtime;
  manifest.outputs = {(dir / "table2.tsv").string(), (dir / "table2_curves.tsv").string(),
                      (dir / "table2_wide.txt").string()};
  echo_config(base, manifest);
  write_atomic(dir / "manifest.txt", manifest.text());
  out << wide.str();
  return status;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian transfer learning sigma-point filters: Monte Carlo benchmark", "btltrack"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonFlags sim_flags, sweep_flags, t2_flags;
  auto* sim = app.add_subcommand("simulate", "Run one Monte Carlo experiment from a config");
  add_common(*sim, sim_flags, true);

  auto* sweep = app.add_subcommand("sweep", "Run an experiment per kappa or intensity value");
  add_common(*sweep, sweep_flags, true);
  std::string sweep_kind;
  std::vector<std::string> sweep_values;
  sweep->add_option("--sweep", sweep_kind, "Swept parameter")
      ->required()
      ->check(CLI::IsMember({"kappa", "intensity"}));
  sweep->add_option("--values", sweep_values, "Comma-separated sweep values")
      ->delimiter(',')
      ->expected(0, -1);

  auto* stab = app.add_subcommand("stability", "Tabulate the stability measure sum |W_j|");
  std::string rule = "ut", nx_range = "5", kappa_range = "-2:10";
  double alpha = 1.0;
  std::string stab_out;
  stab->add_option("--rule", rule, "ut|ckf3|ckf5")->capture_default_str();
  stab->add_option("--nx-range", nx_range, "State dimensions lo:hi[:step]")->capture_default_str();
  stab->add_option("--kappa-range", kappa_range, "UT kappa lo:hi[:step]")->capture_default_str();
  stab->add_option("--alpha", alpha, "UT alpha")->capture_default_str();
  stab->add_option("--out", stab_out, "Also write stability.tsv into this directory");

  auto* t2 = app.add_subcommand("table2", "Full filter x intensity grid (isolated, MVF, BTLF)");
  add_common(*t2, t2_flags, false);

  std::vector<std::string> argv(args.rbegin(), args.rend());  // CLI11 wants reversed order
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*sim) return cmd_simulate(sim_flags, out, err);
    if (*sweep) return cmd_sweep(sweep_flags, sweep_kind, sweep_values, out, err);
    if (*stab) return cmd_stability(rule, nx_range, kappa_range, alpha, stab_out, out);
    if (*t2) return cmd_table2(t2_flags, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig || e.code() == ErrorCode::DegenerateRule) {
      err << "config error: " << e.what() << "\n";
      return kExitConfig;
    }
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitConfig;
}

}  // namespace btltrack
