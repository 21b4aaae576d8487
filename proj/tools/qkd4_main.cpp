// Command-line front end: run two-party key-distribution sessions, produce
// interference scans and spatial correlation tables, and print the exact
// enumeration oracle. Exit codes: 0 success, 1 --check deviation,
// 2 config/schema/usage error, 3 channel failure.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qkd4/channel.hpp"
#include "qkd4/config.hpp"
#include "qkd4/model.hpp"
#include "qkd4/protocols.hpp"
#include "qkd4/rng.hpp"
#include "qkd4/sampler.hpp"
#include "qkd4/session.hpp"
#include "qkd4/wire.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitChannelError = 3;

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> pairs;
  std::optional<std::string> protocol;
  std::optional<double> eve_fraction;
  std::optional<std::string> format;
  bool check = false;
};

std::string fmt(double value) {
  std::ostringstream os;
  os << std::setprecision(6) << value;
  return os.str();
}

qkd4::RunConfig make_config(const Flags& flags) {
  qkd4::RunConfig config = flags.config_path.empty()
                               ? qkd4::RunConfig{}
                               : qkd4::load_config_file(flags.config_path);
  if (flags.pairs) {
    if (*flags.pairs < 1) throw qkd4::ConfigError("--pairs must be at least 1");
    config.n_pairs = *flags.pairs;
  }
  if (flags.protocol) {
    try {
      config.protocol = qkd4::protocol_from_name(*flags.protocol);
    } catch (const std::invalid_argument& err) {
      throw qkd4::ConfigError(err.what());
    }
  }
  if (flags.eve_fraction) {
    if (!(*flags.eve_fraction >= 0.0 && *flags.eve_fraction <= 1.0)) {
      throw qkd4::ConfigError("--eve-fraction must lie in [0, 1]");
    }
    config.eve.intercept_fraction = *flags.eve_fraction;
  }
  if (flags.format) {
    if (*flags.format != "csv" && *flags.format != "json") {
      throw qkd4::ConfigError("--format must be csv or json");
    }
    config.output.format = *flags.format;
  }
  config.seed = qkd4::resolve_seed(flags.seed, config.seed, std::getenv("QKD4_SEED"));
  return config;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
}

std::string key_line(const std::vector<std::uint8_t>& bits) {
  std::string line;
  line.reserve(bits.size() + 1);
  for (const std::uint8_t b : bits) line.push_back(b ? '1' : '0');
  line.push_back('\n');
  return line;
}

/// One empirical-vs-oracle comparison: |emp - expected| <= 3 sigma, with
/// sigma = 0 demanding exact agreement.
struct CheckLine {
  double z = 0.0;
  bool ok = true;
};

CheckLine z_check(double empirical, double expected, double sigma) {
  if (sigma == 0.0) {
    const bool ok = empirical == expected;
    return {ok ? 0.0 : std::numeric_limits<double>::infinity(), ok};
  }
  const double z = std::abs(empirical - expected) / sigma;
  return {z, z <= 3.0};
}

std::string check_suffix(bool check_mode, const CheckLine& line, int& failures) {
  if (!check_mode) return "";
  if (!line.ok) ++failures;
  std::ostringstream os;
  os << "  z=" << std::setprecision(3) << line.z << (line.ok ? "  ok" : "  FAIL");
  return os.str();
}

double binomial_sigma(double p, std::uint64_t n) {
  if (n == 0) return 0.0;
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// run

int cmd_run(const Flags& flags) {
  const qkd4::RunConfig config = make_config(flags);
  const qkd4::SessionConfig session = config.session_config();

  qkd4::RunReport report_a, report_b;
  if (config.transport.kind == "tcp") {
    qkd4::TcpListener listener(config.transport.host, config.transport.port);
    std::unique_ptr<qkd4::DuplexChannel> bob_channel;
    std::exception_ptr accept_error;
    std::thread acceptor([&] {
      try {
        bob_channel = listener.accept();
      } catch (...) {
        accept_error = std::current_exception();
      }
    });
    std::unique_ptr<qkd4::DuplexChannel> alice_channel;
    try {
      alice_channel = qkd4::tcp_connect(config.transport.host, listener.port());
    } catch (...) {
      acceptor.join();
      throw;
    }
    acceptor.join();
    if (accept_error) std::rethrow_exception(accept_error);
    std::tie(report_a, report_b) = qkd4::run_session(session, *alice_channel, *bob_channel);
  } else {
    std::tie(report_a, report_b) = qkd4::run_session(session);
  }

  const fs::path dir(config.output.directory);
  fs::create_directories(dir);
  write_file(dir / "report_alice.json", report_a.to_json_string() + "\n");
  write_file(dir / "report_bob.json", report_b.to_json_string() + "\n");
  write_file(dir / "key_alice.txt", key_line(report_a.final_key));
  write_file(dir / "key_bob.txt", key_line(report_b.final_key));

  const qkd4::ProtocolSpec spec = qkd4::ProtocolSpec::make(session.protocol);
  const qkd4::Rational rate = qkd4::analytic_rate(spec);
  const qkd4::ExpectedErrorRates oracle =
      qkd4::expected_error_rates(spec, session.source, session.eve);

  int failures = 0;
  std::ostream& out = std::cout;
  out << "protocol              " << qkd4::name(session.protocol) << "\n";
  out << "pairs                 " << session.n_pairs << "\n";
  out << "transport             " << config.transport.kind << "\n";
  out << "kept_rounds           " << report_a.kept_rounds << "\n";

  {
    const double sigma =
        std::sqrt(qkd4::rate_variance(spec) / static_cast<double>(session.n_pairs));
    const CheckLine line =
        z_check(report_a.sifted_bits_per_pair, rate.to_double(), sigma);
    out << "sifted_bits_per_pair  " << fmt(report_a.sifted_bits_per_pair) << "  oracle "
        << rate.str() << check_suffix(flags.check, line, failures) << "\n";
  }
  if (report_a.true_pol_qber) {
    const CheckLine line =
        z_check(*report_a.true_pol_qber, oracle.qber_pol,
                binomial_sigma(oracle.qber_pol, report_a.kept_pol_bits));
    out << "pol_qber              " << fmt(*report_a.true_pol_qber) << "  oracle "
        << fmt(oracle.qber_pol) << check_suffix(flags.check, line, failures) << "\n";
  }
  if (report_a.true_spa_qber) {
    const CheckLine line =
        z_check(*report_a.true_spa_qber, oracle.qber_spa,
                binomial_sigma(oracle.qber_spa, report_a.kept_spa_bits));
    out << "spa_qber              " << fmt(*report_a.true_spa_qber) << "  oracle "
        << fmt(oracle.qber_spa) << check_suffix(flags.check, line, failures) << "\n";
  }
  if (report_a.true_symbol_error && oracle.symbol_error) {
    const CheckLine line =
        z_check(*report_a.true_symbol_error, *oracle.symbol_error,
                binomial_sigma(*oracle.symbol_error, report_a.kept_both_rounds));
    out << "symbol_error          " << fmt(*report_a.true_symbol_error) << "  oracle "
        << fmt(*oracle.symbol_error) << check_suffix(flags.check, line, failures) << "\n";
  }
  if (report_a.est_pol_qber) {
    out << "est_pol_qber          " << fmt(*report_a.est_pol_qber) << "  (disclosed sample)\n";
  }
  if (report_a.est_spa_qber) {
    out << "est_spa_qber          " << fmt(*report_a.est_spa_qber) << "  (disclosed sample)\n";
  }
  if (report_a.est_symbol_error) {
    out << "est_symbol_error      " << fmt(*report_a.est_symbol_error)
        << "  (disclosed sample)\n";
  }
  out << "final_key_bits        " << report_a.final_key_bits << "\n";
  out << "eve_known_fraction    " << fmt(report_a.eve_known_fraction) << "\n";
  out << "aborted               " << (report_a.aborted ? "yes" : "no") << "\n";
  out << "reports written to    " << dir.string() << "\n";

  return flags.check && failures > 0 ? kExitCheckFailed : kExitOk;
}

// ---------------------------------------------------------------------------
// scan

int cmd_scan(const Flags& flags) {
  const qkd4::RunConfig config = make_config(flags);
  const std::vector<double> angles =
      config.scan.angles_deg.empty() ? qkd4::default_scan_angles() : config.scan.angles_deg;
  const qkd4::AnalyzerAngle fixed(config.scan.fixed_theta_deg);

  qkd4::ScanCurve curve;
  if (config.scan.analytic) {
    curve = qkd4::expected_scan_curve(config.source, fixed, angles, config.scan.n_per_point);
  } else {
    if (!config.seed) {
      throw qkd4::ConfigError(
          "sampled scans need a seed (--seed, config key 'seed', or QKD4_SEED); "
          "use scan.analytic for a noise-free curve");
    }
    qkd4::RngStream rng = qkd4::derive_stream(*config.seed, "scan");
    curve = qkd4::interference_scan(config.source, fixed, angles, config.scan.n_per_point, rng);
  }

  qkd4::VisibilityFit fit;
  try {
    fit = qkd4::fit_visibility(curve);
  } catch (const std::invalid_argument& err) {
    throw qkd4::ConfigError(std::string("fit failure: ") + err.what());
  } catch (const qkd4::FitError& err) {
    throw qkd4::ConfigError(std::string("fit failure: ") + err.what());
  }

  // Reference: fit of the exact curve at a total large enough that count
  // rounding is negligible.
  const qkd4::ScanCurve reference =
      qkd4::expected_scan_curve(config.source, fixed, angles, 1000000000000ull);
  const qkd4::VisibilityFit reference_fit = qkd4::fit_visibility(reference);

  const fs::path dir(config.output.directory);
  fs::create_directories(dir);
  fs::path outfile;
  if (config.output.format == "json") {
    json j;
    j["fixed_theta_deg"] = config.scan.fixed_theta_deg;
    j["n_per_point"] = config.scan.n_per_point;
    j["analytic"] = config.scan.analytic;
    j["fitted_visibility"] = fit.visibility;
    j["fitted_phase_deg"] = fit.phase_deg;
    j["model_visibility"] = reference_fit.visibility;
    json points = json::array();
    for (const auto& pt : curve.points) {
      points.push_back({{"theta_deg", pt.theta_deg},
                        {"coincidences", pt.coincidences},
                        {"total", pt.total}});
    }
    j["points"] = std::move(points);
    outfile = dir / "scan.json";
    write_file(outfile, j.dump(2) + "\n");
  } else {
    outfile = dir / "scan.csv";
    write_file(outfile, qkd4::scan_curve_csv(curve));
  }

  int failures = 0;
  std::cout << "points                " << curve.points.size() << "\n";
  std::cout << "n_per_point           " << config.scan.n_per_point << "\n";
  std::cout << "fixed_theta_deg       " << config.scan.fixed_theta_deg << "\n";
  std::cout << "mode                  " << (config.scan.analytic ? "analytic" : "sampled")
            << "\n";
  {
    CheckLine line;
    if (config.scan.analytic) {
      // Count rounding is the only difference; demand near-exact agreement.
      const bool ok = std::abs(fit.visibility - reference_fit.visibility) <= 1e-6;
      line = {ok ? 0.0 : std::numeric_limits<double>::infinity(), ok};
    } else {
      // Delta-method standard error of the fitted visibility through the
      // linear least squares: cov(coef) = (X^T X)^-1 X^T diag(var_i) X (X^T X)^-1.
      Eigen::MatrixXd design(static_cast<Eigen::Index>(curve.points.size()), 3);
      Eigen::VectorXd var(static_cast<Eigen::Index>(curve.points.size()));
      for (Eigen::Index i = 0; i < var.size(); ++i) {
        const auto& pt = curve.points[static_cast<std::size_t>(i)];
        const double two_theta = 2.0 * pt.theta_deg * std::numbers::pi / 180.0;
        design(i, 0) = 1.0;
        design(i, 1) = std::cos(two_theta);
        design(i, 2) = std::sin(two_theta);
        const double p = static_cast<double>(pt.coincidences) / static_cast<double>(pt.total);
        var(i) = p * (1.0 - p) / static_cast<double>(pt.total);
      }
      const Eigen::Matrix3d normal_inv =
          (design.transpose() * design).inverse();
      const Eigen::Matrix3d cov =
          normal_inv * design.transpose() * var.asDiagonal() * design * normal_inv;
      const Eigen::Vector3d coef =
          design.colPivHouseholderQr().solve([&] {
            Eigen::VectorXd rate(var.size());
            for (Eigen::Index i = 0; i < var.size(); ++i) {
              const auto& pt = curve.points[static_cast<std::size_t>(i)];
              rate(i) =
                  static_cast<double>(pt.coincidences) / static_cast<double>(pt.total);
            }
            return rate;
          }());
      const double offset = coef(0);
      const double amp = std::hypot(coef(1), coef(2));
      double sigma = 0.0;
      if (amp > 1e-12 && offset > 0.0) {
        Eigen::Vector3d grad;
        grad << -amp / (offset * offset), coef(1) / (offset * amp), coef(2) / (offset * amp);
        sigma = std::sqrt(grad.dot(cov * grad));
      } else if (offset > 0.0) {
        sigma = std::sqrt((cov(1, 1) + cov(2, 2))) / offset;
      }
      line = z_check(fit.visibility, reference_fit.visibility, sigma);
    }
    std::cout << "fitted_visibility     " << fmt(fit.visibility) << "  model "
              << fmt(reference_fit.visibility) << check_suffix(flags.check, line, failures)
              << "\n";
  }
  std::cout << "fitted_phase_deg      " << fmt(fit.phase_deg) << "\n";
  std::cout << "curve written to      " << outfile.string() << "\n";
  return flags.check && failures > 0 ? kExitCheckFailed : kExitOk;
}

// ---------------------------------------------------------------------------
// table

int cmd_table(const Flags& flags) {
  const qkd4::RunConfig config = make_config(flags);
  if (!config.seed) {
    throw qkd4::ConfigError(
        "correlation tables need a seed (--seed, config key 'seed', or QKD4_SEED)");
  }
  qkd4::RngStream rng = qkd4::derive_stream(*config.seed, "table");

  struct Combo {
    qkd4::SpatialBasis a;
    qkd4::SpatialBasis b;
    const char* name;
  };
  const Combo combos[] = {
      {qkd4::SpatialBasis::X, qkd4::SpatialBasis::X, "X/X"},
      {qkd4::SpatialBasis::X, qkd4::SpatialBasis::P, "X/P"},
      {qkd4::SpatialBasis::P, qkd4::SpatialBasis::X, "P/X"},
      {qkd4::SpatialBasis::P, qkd4::SpatialBasis::P, "P/P"},
  };

  int failures = 0;
  std::ostringstream csv;
  csv << "basis_a,basis_b,slit_a,slit_b,count\n";
  json tables_json = json::array();
  for (const Combo& combo : combos) {
    const auto counts = qkd4::correlation_table(config.source, combo.a, combo.b,
                                                config.table.n, rng);
    const Eigen::Matrix2d probs =
        qkd4::spatial_probability_table(config.source, combo.a, combo.b);
    const char a_name = combo.a == qkd4::SpatialBasis::X ? 'X' : 'P';
    const char b_name = combo.b == qkd4::SpatialBasis::X ? 'X' : 'P';

    std::uint64_t diagonal = 0;
    for (int i = 0; i < 2; ++i) {
      for (int k = 0; k < 2; ++k) {
        csv << a_name << ',' << b_name << ',' << (i + 1) << ',' << (k + 1) << ','
            << counts(i, k) << '\n';
        if (i == k) diagonal += counts(i, k);
        if (flags.check) {
          const double expected = probs(i, k) * static_cast<double>(config.table.n);
          const double sigma = std::sqrt(
              probs(i, k) * (1.0 - probs(i, k)) * static_cast<double>(config.table.n));
          const CheckLine line =
              z_check(static_cast<double>(counts(i, k)), expected, sigma);
          if (!line.ok) {
            ++failures;
            std::cout << "cell " << combo.name << " (" << (i + 1) << "," << (k + 1)
                      << ") count " << counts(i, k) << " expected " << fmt(expected)
                      << "  z=" << fmt(line.z) << "  FAIL\n";
          }
        }
      }
    }
    json entry;
    entry["basis_a"] = std::string(1, a_name);
    entry["basis_b"] = std::string(1, b_name);
    entry["counts"] = {{counts(0, 0), counts(0, 1)}, {counts(1, 0), counts(1, 1)}};
    tables_json.push_back(std::move(entry));
    std::cout << "table " << combo.name << "  diagonal_fraction "
              << fmt(static_cast<double>(diagonal) / static_cast<double>(config.table.n))
              << "\n";
  }

  const fs::path dir(config.output.directory);
  fs::create_directories(dir);
  fs::path outfile;
  if (config.output.format == "json") {
    outfile = dir / "tables.json";
    write_file(outfile, tables_json.dump(2) + "\n");
  } else {
    outfile = dir / "tables.csv";
    write_file(outfile, csv.str());
  }
  std::cout << "tables written to     " << outfile.string() << "\n";
  return flags.check && failures > 0 ? kExitCheckFailed : kExitOk;
}

// ---------------------------------------------------------------------------
// oracle

std::string scaled_rational(const qkd4::Rational& value, double fraction) {
  if (fraction == 1.0) return value.str();
  try {
    return (qkd4::Rational::from_double_exact(fraction) * value).str();
  } catch (const std::exception&) {
    return fmt(fraction * value.to_double());
  }
}

int cmd_oracle(const Flags& flags) {
  const qkd4::RunConfig config = make_config(flags);
  if (!config.protocol) {
    throw qkd4::ConfigError("no protocol selected (config key 'protocol' or --protocol)");
  }
  const double fraction = flags.eve_fraction.value_or(1.0);
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw qkd4::ConfigError("--eve-fraction must lie in [0, 1]");
  }

  const qkd4::ProtocolSpec spec = qkd4::ProtocolSpec::make(*config.protocol);
  const qkd4::Rational rate = qkd4::analytic_rate(spec);
  const qkd4::OracleErrorRates full =
      qkd4::analytic_error_rates(spec, qkd4::EveStrategy::uniform_for(spec, 1.0));

  // Untouched rounds are error-free for the ideal source, so every rate is
  // linear in the intercepted fraction.
  std::cout << "protocol: " << qkd4::name(*config.protocol) << "\n";
  std::cout << "transmission_rate: " << rate.str() << "\n";
  std::cout << "intercept_fraction: " << fmt(fraction) << "\n";
  std::cout << "per_bit_qber: " << scaled_rational(full.per_bit_qber, fraction) << "\n";
  std::cout << "qber_pol: " << scaled_rational(full.qber_pol, fraction) << "\n";
  std::cout << "qber_spa: " << scaled_rational(full.qber_spa, fraction) << "\n";
  if (full.symbol_error) {
    std::cout << "symbol_error: " << scaled_rational(*full.symbol_error, fraction) << "\n";
  } else {
    std::cout << "symbol_error: n/a\n";
  }
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Simulator and analysis toolkit for entanglement-based key distribution\n"
      "carrying one polarization bit and one spatial bit per photon pair."};
  app.require_subcommand(1);

  Flags flags;
  const auto add_common = [&flags](CLI::App* cmd) {
    cmd->add_option("--config", flags.config_path, "JSON config file");
    cmd->add_option("--seed", flags.seed, "Master seed (overrides config and QKD4_SEED)");
    cmd->add_option("--pairs", flags.pairs, "Number of photon pairs");
    cmd->add_option("--protocol", flags.protocol,
                    "parallel_bbm | ququart | skewed_ququart");
    cmd->add_option("--eve-fraction", flags.eve_fraction,
                    "Intercept-resend fraction in [0, 1]");
    cmd->add_option("--format", flags.format, "Output format: csv | json");
    cmd->add_flag("--check", flags.check,
                  "Fail (exit 1) when any empirical value strays >3 sigma from its oracle");
  };

  add_common(app.add_subcommand(
      "run", "Run a two-party session, write reports and keys, print a summary"));
  add_common(app.add_subcommand(
      "scan", "Polarization interference scan with a visibility fit"));
  add_common(app.add_subcommand(
      "table", "Spatial correlation tables for all four basis pairs"));
  add_common(app.add_subcommand(
      "oracle", "Print the exact enumeration oracle for a protocol"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (app.got_subcommand("run")) return cmd_run(flags);
    if (app.got_subcommand("scan")) return cmd_scan(flags);
    if (app.got_subcommand("table")) return cmd_table(flags);
    return cmd_oracle(flags);
  } catch (const qkd4::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kExitConfigError;
  } catch (const qkd4::FitError& err) {
    std::cerr << "fit failure: " << err.what() << "\n";
    return kExitConfigError;
  } catch (const std::invalid_argument& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kExitConfigError;
  } catch (const std::domain_error& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kExitConfigError;
  } catch (const qkd4::ChannelClosedError& err) {
    std::cerr << "channel failure: " << err.what() << "\n";
    return kExitChannelError;
  } catch (const qkd4::MalformedFrameError& err) {
    std::cerr << "channel failure: " << err.what() << "\n";
    return kExitChannelError;
  } catch (const qkd4::ProtocolViolationError& err) {
    std::cerr << "channel failure: " << err.what() << "\n";
    return kExitChannelError;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitChannelError;
  }
}
