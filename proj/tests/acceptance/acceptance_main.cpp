// Acceptance gate for the simulator: every release-blocking claim checked in
// one binary, one verdict line per criterion. Run with no arguments for the
// full gate or with "--criterion N" to run a single one. Exit code 0 means
// every executed criterion passed.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "density_oracle.hpp"
#include "qkd4/session.hpp"
#include "qkd4/wire.hpp"
#include "stats.hpp"

using namespace qkd4;

namespace {

/// Collects sub-checks for one criterion; failures print their context
/// immediately so a red line is diagnosable from the log alone.
class Gate {
 public:
  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok_ = false;
      std::cout << "    fail: " << what << "\n";
    }
  }

  void expect_near(double actual, double want, double tol, const std::string& what) {
    if (!(std::abs(actual - want) <= tol)) {
      ok_ = false;
      std::cout << "    fail: " << what << " = " << actual << ", wanted " << want << " +- "
                << tol << "\n";
    }
  }

  bool ok() const { return ok_; }

 private:
  bool ok_ = true;
};

SessionConfig session_base(ProtocolKind kind, std::uint64_t n, std::uint64_t seed) {
  SessionConfig config;
  config.protocol = kind;
  config.n_pairs = n;
  config.master_seed = seed;
  return config;
}

double binomial_sigma(double q, std::uint64_t n) {
  return std::sqrt(q * (1.0 - q) / static_cast<double>(n));
}

// 1. Sifted transmission rate: 1.00 +- 0.02 bits/pair for the two
//    statistical protocols, exactly 1 for the alternating-basis one.
bool criterion_rates() {
  Gate gate;
  const std::uint64_t n = 100000;
  for (const auto kind : {ProtocolKind::ParallelBBM, ProtocolKind::QuQuart}) {
    auto [alice, bob] = run_session(session_base(kind, n, 101));
    gate.expect_near(alice.sifted_bits_per_pair, 1.0, 0.02,
                     std::string(name(kind)) + " sifted bits/pair");
    gate.expect(alice.kept_bits == bob.kept_bits,
                std::string(name(kind)) + " parties disagree on kept bits");
  }
  const RunReport alice = run_session(session_base(ProtocolKind::SkewedQuQuart, n, 102)).first;
  gate.expect(alice.kept_rounds == n, "skewed_ququart must keep every round");
  gate.expect(alice.kept_bits == n, "skewed_ququart must keep exactly one bit per round");
  gate.expect(alice.sifted_bits_per_pair == 1.0, "skewed_ququart rate must be exactly 1");
  return gate.ok();
}

// 2. Intercept-resend against the parallel protocol: per-DOF QBER 1/4.
bool criterion_parallel_qber() {
  Gate gate;
  const ProtocolSpec spec = ProtocolSpec::make(ProtocolKind::ParallelBBM);
  const OracleErrorRates oracle = analytic_error_rates(spec, EveStrategy::uniform_for(spec, 1.0));
  gate.expect(oracle.per_bit_qber == Rational(1, 4),
              "enumeration oracle per-bit QBER must be exactly 1/4, got " +
                  oracle.per_bit_qber.str());

  SessionConfig config = session_base(ProtocolKind::ParallelBBM, 100000, 201);
  config.eve.intercept_fraction = 1.0;
  const RunReport alice = run_session(config).first;
  gate.expect_near(*alice.true_pol_qber, 0.250, 0.01, "polarization QBER under full intercept");
  gate.expect_near(*alice.true_spa_qber, 0.250, 0.01, "spatial QBER under full intercept");
  return gate.ok();
}

// 3. Intercept-resend against the four-letter protocol: symbol error 3/8,
//    per-bit QBER still 1/4.
bool criterion_ququart_symbol_error() {
  Gate gate;
  const ProtocolSpec spec = ProtocolSpec::make(ProtocolKind::QuQuart);
  const OracleErrorRates oracle = analytic_error_rates(spec, EveStrategy::uniform_for(spec, 1.0));
  gate.expect(oracle.symbol_error.has_value(), "oracle must report a symbol error rate");
  gate.expect(*oracle.symbol_error == Rational(3, 8),
              "oracle symbol error must be exactly 3/8, got " + oracle.symbol_error->str());
  gate.expect(oracle.per_bit_qber == Rational(1, 4),
              "oracle per-bit QBER must be exactly 1/4, got " + oracle.per_bit_qber.str());

  SessionConfig config = session_base(ProtocolKind::QuQuart, 100000, 301);
  config.eve.intercept_fraction = 1.0;
  const RunReport alice = run_session(config).first;
  gate.expect(alice.true_symbol_error.has_value(), "run must report a symbol error rate");
  gate.expect_near(*alice.true_symbol_error, 0.375, 0.01, "symbol error under full intercept");
  return gate.ok();
}

// 4. Intercept-resend against the alternating-basis protocol: QBER 1/4.
bool criterion_skewed_qber() {
  Gate gate;
  const ProtocolSpec spec = ProtocolSpec::make(ProtocolKind::SkewedQuQuart);
  const OracleErrorRates oracle = analytic_error_rates(spec, EveStrategy::uniform_for(spec, 1.0));
  gate.expect(oracle.per_bit_qber == Rational(1, 4),
              "enumeration oracle QBER must be exactly 1/4, got " + oracle.per_bit_qber.str());

  SessionConfig config = session_base(ProtocolKind::SkewedQuQuart, 100000, 401);
  config.eve.intercept_fraction = 1.0;
  const RunReport alice = run_session(config).first;
  const double pooled =
      (static_cast<double>(alice.kept_pol_bits) * *alice.true_pol_qber +
       static_cast<double>(alice.kept_spa_bits) * *alice.true_spa_qber) /
      static_cast<double>(alice.kept_bits);
  gate.expect_near(pooled, 0.250, 0.01, "per-bit QBER under full intercept");
  return gate.ok();
}

// 5. Spatial correlation structure: same-basis tables diagonal at unit
//    visibility, cross-basis tables flat within 4 sigma.
bool criterion_correlation_structure() {
  Gate gate;
  const std::uint64_t n = 10000;
  RngStream rng(501);
  for (const auto basis : {SpatialBasis::X, SpatialBasis::P}) {
    const auto table = correlation_table(PairSource::ideal(), basis, basis, n, rng);
    gate.expect(table(0, 1) == 0 && table(1, 0) == 0,
                std::string("same-basis ") + name(basis) + "/" + name(basis) +
                    " table has mismatched-label counts");
  }
  const double sigma = binomial_sigma(0.25, n) * static_cast<double>(n);
  for (const auto& [ba, bb] : {std::pair{SpatialBasis::X, SpatialBasis::P},
                               std::pair{SpatialBasis::P, SpatialBasis::X}}) {
    const auto table = correlation_table(PairSource::ideal(), ba, bb, n, rng);
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        gate.expect_near(static_cast<double>(table(a, b)), static_cast<double>(n) / 4.0,
                         4.0 * sigma,
                         std::string("cross-basis ") + name(ba) + "/" + name(bb) + " cell");
      }
    }
  }
  return gate.ok();
}

// 6. Visibility round-trip: scan + fit recovers v, and the diagonal-basis
//    QBER sits at (1-v)/2.
bool criterion_visibility_roundtrip() {
  Gate gate;
  std::uint64_t seed = 601;
  for (const double v : {0.82, 0.87, 0.92}) {
    const PairSource source(PolarizationModel(v), SpatialModel(1.0, 1.0), 0.0);
    RngStream rng(seed);
    const ScanCurve curve =
        interference_scan(source, AnalyzerAngle(-45.0), default_scan_angles(), 10000, rng);
    const VisibilityFit fit = fit_visibility(curve);
    gate.expect_near(fit.visibility, v, 0.02, "fitted visibility at v=" + std::to_string(v));

    SessionConfig config = session_base(ProtocolKind::ParallelBBM, 40000, seed);
    config.source = source;
    const RunReport alice = run_session(config).first;
    gate.expect_near(*alice.true_qber_da, (1.0 - v) / 2.0, 0.01,
                     "diagonal-basis QBER at v=" + std::to_string(v));
    gate.expect(*alice.true_qber_hv == 0.0, "rectilinear-basis QBER must stay exactly 0");
    seed += 1;
  }
  return gate.ok();
}

// 7. Oracle equivalence: the sampler against its exact distribution
//    (chi-square), and the closed-form polarization probability against an
//    independent density-matrix computation.
bool criterion_oracle_equivalence() {
  Gate gate;

  RngStream meta(701);
  for (int trial = 0; trial < 20; ++trial) {
    const PairSource source(PolarizationModel(meta.uniform()),
                            SpatialModel(meta.uniform(), meta.uniform()),
                            0.01 + 0.49 * meta.uniform());
    const auto set_a = MeasurementSetting::from_id(static_cast<int>(meta.index(4)));
    const auto set_b = MeasurementSetting::from_id(static_cast<int>(meta.index(4)));
    const OutcomeDistribution dist = joint_outcome_distribution(source, set_a, set_b);

    RngStream rng(7100 + static_cast<std::uint64_t>(trial));
    std::array<std::uint64_t, 16> counts{};
    const std::uint64_t n = 100000;
    for (std::uint64_t i = 0; i < n; ++i) {
      const RoundRecord rec = sample_round(source, set_a, set_b, rng);
      counts[static_cast<std::size_t>(rec.outcome_a.index4() * 4 + rec.outcome_b.index4())] +=
          1;
    }
    double chi2 = 0.0;
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        const double expect = static_cast<double>(n) * dist.table()(a, b);
        const double diff =
            static_cast<double>(counts[static_cast<std::size_t>(a * 4 + b)]) - expect;
        chi2 += diff * diff / expect;
      }
    }
    const double p = testing::chi_square_p_value(chi2, 15);
    gate.expect(p > 0.001, "sampler chi-square p-value " + std::to_string(p) +
                               " at trial " + std::to_string(trial));
  }

  RngStream rng(702);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double v = rng.uniform();
    const AnalyzerAngle ta(rng.uniform() * 360.0 - 180.0);
    const AnalyzerAngle tb(rng.uniform() * 360.0 - 180.0);
    const int a = static_cast<int>(rng.index(2));
    const int b = static_cast<int>(rng.index(2));
    const double closed = pol_coincidence_prob(PolarizationModel(v), ta, tb, a, b);
    const double reference =
        testing::coincidence_expectation(testing::polarization_density(v), ta, tb, a, b);
    worst = std::max(worst, std::abs(closed - reference));
  }
  gate.expect(worst <= 1e-12, "density-matrix oracle deviation " + std::to_string(worst));
  return gate.ok();
}

// 8. Transport exactness: identical transcripts over memory and loopback
//    TCP, and message round-trip identity over a generated corpus.
bool criterion_transport_exactness() {
  Gate gate;

  SessionConfig config = session_base(ProtocolKind::QuQuart, 500, 801);
  config.source = PairSource(PolarizationModel(0.95), SpatialModel(0.97, 0.93), 0.01);
  config.eve.intercept_fraction = 0.3;

  MemoryChannelPair pair;
  TranscriptChannel mem_alice(pair.end_a());
  TranscriptChannel mem_bob(pair.end_b());
  auto [mem_ra, mem_rb] = run_session(config, mem_alice, mem_bob);

  TcpListener listener;
  std::unique_ptr<DuplexChannel> bob_raw;
  std::thread accepter([&] { bob_raw = listener.accept(); });
  std::unique_ptr<DuplexChannel> alice_raw = tcp_connect("127.0.0.1", listener.port());
  accepter.join();
  TranscriptChannel tcp_alice(*alice_raw);
  TranscriptChannel tcp_bob(*bob_raw);
  auto [tcp_ra, tcp_rb] = run_session(config, tcp_alice, tcp_bob);

  gate.expect(mem_alice.sent_bytes() == tcp_alice.sent_bytes(),
              "Alice's sent transcript differs between transports");
  gate.expect(mem_bob.sent_bytes() == tcp_bob.sent_bytes(),
              "Bob's sent transcript differs between transports");
  gate.expect(mem_alice.received_bytes() == tcp_alice.received_bytes(),
              "Alice's received transcript differs between transports");
  gate.expect(mem_ra.to_json_string() == tcp_ra.to_json_string(),
              "Alice's reports differ between transports");
  gate.expect(mem_rb.to_json_string() == tcp_rb.to_json_string(),
              "Bob's reports differ between transports");

  RngStream rng(802);
  for (int trial = 0; trial < 10000; ++trial) {
    ClassicalMessage msg;
    switch (rng.index(5)) {
      case 0: {
        BasisAnnounce m;
        m.first_round = rng.index(1u << 20);
        const std::size_t n = rng.index(40);
        for (std::size_t i = 0; i < n; ++i) {
          m.setting_ids.push_back(static_cast<std::uint8_t>(rng.index(4)));
        }
        msg = m;
        break;
      }
      case 1: {
        SiftIndices m;
        std::uint64_t index = 0;
        const std::size_t n = rng.index(40);
        for (std::size_t i = 0; i < n; ++i) {
          index += 1 + rng.index(8);
          m.indices.push_back(index);
        }
        msg = m;
        break;
      }
      case 2: {
        SampleDisclosure m;
        std::uint64_t index = 0;
        const std::size_t n = rng.index(20);
        for (std::size_t i = 0; i < n; ++i) {
          index += 1 + rng.index(8);
          DisclosedRound r;
          r.index = index;
          const std::uint64_t shape = rng.index(3);
          if (shape != 1) r.pol_bit = static_cast<int>(rng.index(2));
          if (shape != 0) r.spa_bit = static_cast<int>(rng.index(2));
          m.rounds.push_back(r);
        }
        msg = m;
        break;
      }
      case 3: {
        QberReport m;
        m.disclosed_rounds = rng.index(100000);
        if (rng.bernoulli(0.7)) m.pol_qber = rng.uniform();
        if (rng.bernoulli(0.7)) m.spa_qber = rng.uniform();
        if (rng.bernoulli(0.3)) m.symbol_error = rng.uniform();
        msg = m;
        break;
      }
      default: {
        std::string reason;
        const std::size_t n = rng.index(40);
        for (std::size_t i = 0; i < n; ++i) {
          reason.push_back(static_cast<char>(' ' + rng.index(95)));
        }
        msg = AbortMessage{reason};
        break;
      }
    }
    const ClassicalMessage back = decode_message(encode_message(msg));
    if (!(back == msg)) {
      gate.expect(false, "round-trip mismatch at fuzz trial " + std::to_string(trial));
      break;
    }
  }
  return gate.ok();
}

struct Criterion {
  int id;
  const char* label;
  bool (*run)();
};

const std::array<Criterion, 8> kCriteria = {{
    {1, "sifted transmission rate is 1 bit/pair for all three protocols", criterion_rates},
    {2, "parallel protocol intercept-resend QBER is 1/4", criterion_parallel_qber},
    {3, "four-letter protocol symbol error is 3/8 (per-bit 1/4)",
     criterion_ququart_symbol_error},
    {4, "alternating-basis protocol intercept-resend QBER is 1/4", criterion_skewed_qber},
    {5, "spatial tables: diagonal same-basis, flat cross-basis",
     criterion_correlation_structure},
    {6, "visibility fits recover 0.82/0.87/0.92; DA QBER = (1-v)/2",
     criterion_visibility_roundtrip},
    {7, "sampler and closed form agree with independent oracles",
     criterion_oracle_equivalence},
    {8, "byte-identical transports and message round-trip fuzz",
     criterion_transport_exactness},
}};

} // namespace

int main(int argc, char** argv) {
  std::optional<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: " << argv[0] << " [--criterion N]\n";
      return 2;
    }
  }

  bool all_ok = true;
  bool any_run = false;
  for (const Criterion& criterion : kCriteria) {
    if (only && *only != criterion.id) continue;
    any_run = true;
    const bool ok = criterion.run();
    all_ok = all_ok && ok;
    std::cout << "criterion " << criterion.id << " [" << (ok ? "PASS" : "FAIL")
              << "] " << criterion.label << "\n";
  }
  if (!any_run) {
    std::cerr << "no such criterion\n";
    return 2;
  }
  std::cout << (all_ok ? "acceptance: all criteria passed\n"
                       : "acceptance: FAILURES above\n");
  return all_ok ? 0 : 1;
}
