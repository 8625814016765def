#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "apvar/io.hpp"
#include "apvar/shifted.hpp"
#include "apvar/specfun/bessel_mellin.hpp"
#include "apvar/specfun/omega.hpp"
#include "apvar/variance.hpp"
#include "apvar/voronoi.hpp"

namespace {

using json = nlohmann::ordered_json;
using apvar::io::CsvTable;
using apvar::io::fmt;

constexpr int kSummarySchema = 1;

struct Outcome {
  explicit Outcome(std::vector<std::string> header) : table(std::move(header)) {}
  CsvTable table;
  json params = json::object();
  json results = json::object();
  json tolerances = json::object();
  std::vector<std::string> failures;  // failing rows, identified for stderr
};

struct Common {
  std::string out;   // CSV path, stdout when empty
  std::string json;  // summary path, stderr when empty
};

std::vector<std::uint64_t> q_grid(std::uint64_t lo, std::uint64_t hi, int points, bool geometric) {
  if (points < 1 || lo < 1 || hi < lo) throw CLI::ValidationError("q-range", "need 1 <= q-min <= q-max and points >= 1");
  std::vector<std::uint64_t> g;
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    const double v = geometric ? std::exp(std::log(static_cast<double>(lo)) * (1 - t) + std::log(static_cast<double>(hi)) * t)
                               : static_cast<double>(lo) + t * static_cast<double>(hi - lo);
    const auto q = static_cast<std::uint64_t>(std::llround(v));
    if (g.empty() || g.back() != q) g.push_back(q);
  }
  return g;
}

double rankin_c_hat(double X, const apvar::HeckeTable& table) {
  std::vector<double> grid;
  const double lo = X / 10.0;
  for (int i = 0; i < 10; ++i) grid.push_back(lo * std::pow(10.0, i / 9.0));
  return apvar::estimate_rankin_residue(grid, table).c_hat;
}

// Dual sums need arithmetic tables well past X; grow until the cutoffs fit.
template <class F>
auto with_growing_tables(std::uint64_t n0, F&& f) {
  for (std::uint64_t n = n0;; n *= 4) {
    const auto tables = apvar::build_arith_tables(n);
    try {
      return f(tables);
    } catch (const apvar::RangeError&) {
      if (n * 4 > apvar::kArithTableCap) throw;
    }
  }
}

// ------------------------------------------------------------------ sieve

Outcome run_sieve(std::uint64_t n_max) {
  Outcome o({"n_max", "path", "bytes", "checksum", "reload_identical"});
  const auto dir = apvar::io::cache_dir();
  const auto path = apvar::io::cache_path(dir, n_max);
  const auto bytes = apvar::io::encode_cache(apvar::io::build_cached_tables(n_max));
  apvar::io::write_file(path, bytes);
  const auto back = apvar::io::read_file(path);
  const auto again = apvar::io::encode_cache(apvar::io::decode_cache(back));
  const bool same = back == bytes && again == bytes;
  std::uint64_t checksum = 0;
  for (int i = 0; i < 8; ++i) checksum |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + i]) << (8 * i);
  o.table.row(n_max, path.string(), static_cast<std::uint64_t>(bytes.size()), checksum, same ? "true" : "false");
  o.params = {{"n_max", n_max}, {"cache_dir", dir.string()}};
  o.results = {{"bytes", bytes.size()}, {"reload_identical", same}};
  if (!same) o.failures.push_back("n_max=" + std::to_string(n_max) + ": reload differs");
  return o;
}

// ------------------------------------------------------------------ voronoi

Outcome run_voronoi(const std::string& seq, std::uint64_t q, const std::vector<std::int64_t>& hs, double X, double H,
                    double tol) {
  Outcome o({"sequence", "q", "h", "X", "H", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "abs_diff", "rel_diff",
                      "n_cut_dual", "n_cut_design", "tail_bound", "quad_tol"});
  const apvar::SmoothWeight w(H, X);
  const bool cusp = seq == "cusp";
  std::optional<apvar::HeckeTable> hecke;
  std::optional<apvar::ArithTables> arith;
  double worst = 0.0;
  for (const auto h : hs) {
    apvar::VoronoiReport r;
    if (cusp) {
      // the dual sum runs to roughly q^2 X / H^2 (log X)^2 terms; grow the table on demand
      for (std::uint64_t n = std::max<std::uint64_t>(static_cast<std::uint64_t>(X), 4 * apvar::voronoi_design_cut(q, w));;
           n *= 2) {
        if (!hecke || hecke->n_max() < n) hecke = apvar::io::load_or_build(std::min(n, apvar::kDeltaCap)).hecke;
        try {
          r = apvar::voronoi_check_cusp(q, h, w, *hecke);
          break;
        } catch (const apvar::RangeError&) {
          if (n >= apvar::kDeltaCap) throw;
        }
      }
    } else {
      for (std::uint64_t n = std::max<std::uint64_t>(static_cast<std::uint64_t>(X), 4 * apvar::voronoi_design_cut(q, w));;
           n *= 2) {
        if (!arith || arith->n_max() < n) arith = apvar::build_arith_tables(n);
        try {
          r = apvar::voronoi_check_divisor(q, h, w, *arith);
          break;
        } catch (const apvar::RangeError&) {
          if (n >= apvar::kArithTableCap) throw;
        }
      }
    }
    o.table.row(seq, q, h, X, H, r.lhs.real(), r.lhs.imag(), r.rhs.real(), r.rhs.imag(), r.abs_diff, r.rel_diff,
                r.n_cut_dual, r.n_cut_design, r.tail_bound, r.quad_tol);
    worst = std::max(worst, r.rel_diff);
    if (!(r.rel_diff <= tol)) o.failures.push_back("h=" + std::to_string(h) + ": rel_diff " + fmt(r.rel_diff));
  }
  o.params = {{"seq", seq}, {"q", q}, {"h", hs}, {"x", X}, {"big_h", H}};
  o.results = {{"rows", hs.size()}, {"max_rel_diff", worst}};
  o.tolerances = {{"rel_diff", tol}};
  return o;
}

// ------------------------------------------------------------------ mellin-check

Outcome run_mellin_check(double tol_kernel, double tol_omega, double tol_shift, double tol_parseval, double tol_mb) {
  Outcome o({"check", "case", "value", "reference", "diff", "tol", "pass"});
  auto add = [&](const std::string& check, const std::string& c, double v, double ref, double diff, double tol) {
    const bool ok = diff <= tol;
    o.table.row(check, c, v, ref, diff, tol, ok ? "true" : "false");
    if (!ok) o.failures.push_back(check + " " + c + ": diff " + fmt(diff));
  };
  for (double s : {0.3, 0.45, 1.0}) {
    for (auto kind : {apvar::BesselKind::K0, apvar::BesselKind::Y0}) {
      if (kind == apvar::BesselKind::Y0 && s >= 0.75) continue;
      const double v = apvar::bessel_mellin_numeric(kind, s), ref = apvar::bessel_mellin_closed(kind, s);
      add("bessel_mellin", std::string(kind == apvar::BesselKind::K0 ? "K0" : "Y0") + " s=" + fmt(s), v, ref,
          std::abs(v / ref - 1.0), tol_kernel);
    }
  }
  {
    const apvar::SmoothWeight w(500.0, 2000.0);
    const auto grid = apvar::PsiGrid::build(w, apvar::MellinLine::for_weight(w, 0.5), 1e-15);
    const auto shifted = apvar::PsiGrid::build(w, apvar::MellinLine::for_weight(w, 0.75), 1e-15);
    const std::vector<std::pair<apvar::OmegaKind, std::vector<double>>> cases = {
        {apvar::OmegaKind::J(), {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0}},
        {apvar::OmegaKind::Y(), {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0}},
        {apvar::OmegaKind::K(), {0.001, 0.002, 0.003, 0.005, 0.01, 0.02}}};
    for (const auto& [kind, alphas] : cases) {
      for (double a : alphas) {
        const double d = apvar::omega_direct(kind, a, w).real();
        const double m = apvar::omega_mellin(kind, a * a, grid).real();
        const double m2 = apvar::omega_mellin(kind, a * a, shifted).real();
        const std::string c = kind.name() + " alpha=" + fmt(a);
        add("omega_mellin", c, m, d, std::abs(m - d) / std::abs(d), tol_omega);
        add("contour_shift", c + " sigma=0.75", m2, m, std::abs(m2 - m) / std::abs(m), tol_shift);
      }
    }
  }
  for (auto [H, X] : {std::pair{100.0, 1000.0}, std::pair{1000.0, 4000.0}}) {
    const apvar::SmoothWeight w(H, X);
    const double pc = apvar::parseval_contour(w, apvar::MellinLine::for_weight(w, 0.5));
    const double ws = apvar::weight_square_integral(w);
    const std::string c = "X=" + fmt(X) + " H=" + fmt(H);
    add("parseval", c, pc, ws, std::abs(pc - ws), tol_parseval * X);
    add("parseval_vs_X", c, pc, X, std::abs(pc - X), 2.0 * H);
  }
  for (double A : {0.1, 1.0, 10.0}) {
    for (double B : {0.1, 1.0, 10.0}) {
      for (double l : {0.5, 1.0, 3.0}) {
        const double c = -std::min(l, 1.0) / 2.0;
        const auto r = apvar::mellin_barnes_check(A, B, l, c);
        const auto g = apvar::mellin_barnes_log_check(A, B, l, c);
        const std::string cs = "A=" + fmt(A) + " B=" + fmt(B) + " lambda=" + fmt(l);
        add("mellin_barnes", cs, r.rhs.real(), r.lhs.real(), r.diff, tol_mb);
        add("mellin_barnes_log", cs, g.rhs.real(), g.lhs.real(), g.diff, tol_mb);
      }
    }
  }
  o.results = {{"rows", o.table.rows().size()}, {"failures", o.failures.size()}};
  o.tolerances = {{"bessel_mellin_rel", tol_kernel},
                  {"omega_rel", tol_omega},
                  {"contour_shift_rel", tol_shift},
                  {"parseval_over_X", tol_parseval},
                  {"mellin_barnes_abs", tol_mb}};
  return o;
}

// ------------------------------------------------------------------ variance / sweep

std::vector<std::string> variance_header(std::size_t n_budget) {
  std::vector<std::string> h = {"X", "q", "H", "sequence", "exact", "prediction"};
  for (std::size_t i = 1; i <= n_budget; ++i) h.push_back("budget_term_" + std::to_string(i));
  h.push_back("ratio");
  h.push_back("regime");
  return h;
}

std::vector<std::string> variance_row(const apvar::VarianceReport& r) {
  std::vector<std::string> row = {fmt(r.X), fmt(r.q), fmt(r.H), apvar::to_string(r.sequence), fmt(r.exact),
                                  fmt(r.prediction)};
  for (const auto& b : r.budget) row.push_back(fmt(b.value));
  row.push_back(fmt(r.ratio));
  row.push_back(r.regime);
  return row;
}

struct VarianceJob {
  std::string seq;
  double X = 0.0;
  std::optional<double> H, c_hat;
  int threads = 1;
  double max_ratio = 0.0;  // 0: only require a finite ratio
};

Outcome run_variance(const VarianceJob& job, const std::vector<std::uint64_t>& qs, const std::string& command) {
  const bool cusp = job.seq == "cusp";
  std::vector<apvar::VarianceReport> reports(qs.size());
  apvar::RegimeOptions ropt;
  ropt.H = job.H;
  json params = {{"seq", job.seq}, {"x", job.X}, {"q", qs}, {"threads", job.threads}};
  if (job.H) params["big_h"] = *job.H;
  if (cusp) {
    const auto n = std::min<std::uint64_t>(static_cast<std::uint64_t>(std::ceil(job.X)) + 1, apvar::kDeltaCap);
    const auto tables = apvar::io::load_or_build(n);
    ropt.c_hat = job.c_hat ? *job.c_hat : rankin_c_hat(job.X, tables.hecke);
    params["c_hat"] = *ropt.c_hat;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i; (i = next++) < qs.size();) reports[i] = apvar::regime_report_cusp(job.X, qs[i], tables.hecke, ropt);
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < job.threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  } else {
    ropt.dual = apvar::main_term_options();
    for (std::size_t i = 0; i < qs.size(); ++i) {
      reports[i] = with_growing_tables(std::max<std::uint64_t>(static_cast<std::uint64_t>(job.X) + 1, 1u << 20),
                                       [&](const apvar::ArithTables& t) {
                                         return apvar::regime_report_divisor(job.X, qs[i], t, ropt);
                                       });
    }
  }
  Outcome o(variance_header(reports.empty() ? 0 : reports.front().budget.size()));
  json rows = json::array();
  for (const auto& r : reports) {
    o.table.add(variance_row(r));
    const bool finite = std::isfinite(r.ratio);
    const bool within = job.max_ratio <= 0.0 || r.ratio <= job.max_ratio;
    if (!finite || !within) o.failures.push_back("q=" + std::to_string(r.q) + ": ratio " + fmt(r.ratio));
    rows.push_back({{"q", r.q}, {"ratio", r.ratio}, {"dominant", r.dominant}});
  }
  o.params = params;
  o.results = {{"rows", rows}};
  if (cusp) o.results["budget_crossover_q"] = apvar::cusp_budget_crossover(job.X);
  o.tolerances = {{"max_ratio", job.max_ratio > 0.0 ? json(job.max_ratio) : json("finite")}};
  (void)command;
  return o;
}

// ------------------------------------------------------------------ shifted-check

Outcome run_shifted(const std::string& kind, double X, std::uint64_t q, std::optional<double> big_h, double max_ratio) {
  Outcome o({"kind", "X", "q", "H", "value", "budget", "ratio", "truncation"});
  const bool cusp = kind == "cusp";
  const double H = big_h ? *big_h : (cusp ? apvar::h_default_cusp(X, q) : apvar::h_default_divisor(X, q));
  const apvar::SmoothWeight w(H, X);
  double value = 0.0, budget = 0.0, ratio = 0.0;
  std::string trunc;
  if (cusp) {
    for (std::uint64_t n = std::max<std::uint64_t>(static_cast<std::uint64_t>(X) + 1, 1u << 16);; n *= 2) {
      try {
        const auto r = apvar::offdiag_exact(q, w, apvar::io::load_or_build(std::min(n, apvar::kDeltaCap)).hecke);
        value = r.value, budget = r.budget, ratio = r.ratio, trunc = "n_cut=" + std::to_string(r.n_cut);
        break;
      } catch (const apvar::RangeError&) {
        if (n >= apvar::kDeltaCap) throw;
      }
    }
  } else if (kind == "yy" || kind == "kk" || kind == "yk") {
    const auto k = kind == "yy" ? apvar::OffdiagKind::DivYY : kind == "kk" ? apvar::OffdiagKind::DivKK : apvar::OffdiagKind::DivYK;
    const auto r = with_growing_tables(std::max<std::uint64_t>(static_cast<std::uint64_t>(X) + 1, 1u << 16),
                                       [&](const apvar::ArithTables& t) { return apvar::offdiag_exact(q, k, w, t); });
    value = r.value, budget = r.budget, ratio = r.ratio, trunc = "n_cut=" + std::to_string(r.n_cut);
  } else {
    const auto p = kind == "fake-yy" ? apvar::FakePair::YY : kind == "fake-kk" ? apvar::FakePair::KK : apvar::FakePair::YK;
    const auto r = apvar::fake_main_term(p, q, w);
    value = r.value, budget = r.budget, ratio = r.ratio;
    trunc = "alpha_max=" + fmt(r.alpha_max) + " l_max=" + std::to_string(r.l_max);
  }
  o.table.row(kind, X, q, H, value, budget, ratio, trunc);
  if (!std::isfinite(ratio) || ratio > max_ratio) o.failures.push_back(kind + ": ratio " + fmt(ratio));
  o.params = {{"kind", kind}, {"x", X}, {"q", q}, {"big_h", H}};
  o.results = {{"value", value}, {"budget", budget}, {"ratio", ratio}};
  o.tolerances = {{"max_ratio", max_ratio}};
  return o;
}

// ------------------------------------------------------------------ output

void emit(const std::string& command, const Outcome& o, const Common& c, double wall) {
  const auto csv = o.table.str();
  if (c.out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream f(c.out, std::ios::binary | std::ios::trunc);
    f << csv;
  }
  json summary = {{"schema", kSummarySchema},
                  {"command", command},
                  {"params", o.params},
                  {"results", o.results},
                  {"tolerances", o.tolerances},
                  {"wall_time", wall}};
  if (!o.failures.empty()) summary["failures"] = o.failures;
  const auto text = summary.dump(2) + "\n";
  const auto path = !c.json.empty() ? c.json : (!c.out.empty() ? c.out + ".json" : std::string());
  if (path.empty()) {
    std::cerr << text;
  } else {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << text;
  }
  for (const auto& f : o.failures) std::cerr << "FAIL " << command << ": " << f << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Arithmetic-progression variance experiments"};
  app.require_subcommand(1);
  Common common;

  std::uint64_t n_max = 100000;
  auto* sieve = app.add_subcommand("sieve", "build the table cache and verify a byte-identical reload");
  sieve->add_option("--n-max", n_max)->check(CLI::Range(std::uint64_t{2}, apvar::kDeltaCap));

  std::string seq = "cusp";
  std::uint64_t q = 1;
  std::vector<std::int64_t> hs = {1};
  double X = 2000.0, tol = 1e-5;
  std::optional<double> big_h, c_hat;
  auto* vor = app.add_subcommand("voronoi", "twisted sum against its Voronoi dual");
  vor->set_help_flag("--help", "Print this help message and exit");  // -h would clash with --h
  vor->add_option("--seq", seq)->check(CLI::IsMember({"cusp", "divisor"}));
  vor->add_option("--q", q)->check(CLI::PositiveNumber);
  vor->add_option("--h", hs)->expected(1, -1);
  vor->add_option("--x", X)->check(CLI::PositiveNumber);
  vor->add_option("--big-h", big_h)->check(CLI::PositiveNumber);
  vor->add_option("--tol", tol)->check(CLI::PositiveNumber);

  double tol_kernel = 1e-7, tol_omega = 1e-6, tol_shift = 1e-8, tol_parseval = 1e-6, tol_mb = 1e-8;
  auto* mel = app.add_subcommand("mellin-check", "Mellin, Parseval and Mellin-Barnes identities");
  mel->add_option("--tol-kernel", tol_kernel);
  mel->add_option("--tol-omega", tol_omega);
  mel->add_option("--tol-shift", tol_shift);
  mel->add_option("--tol-parseval", tol_parseval);
  mel->add_option("--tol-mb", tol_mb);

  std::uint64_t q_min = 0, q_max = 0;
  int points = 10, threads = 1;
  bool linear = false;
  double max_ratio = 0.0;
  auto* var = app.add_subcommand("variance", "exact variance against the predicted main term and error budget");
  var->add_option("--seq", seq)->check(CLI::IsMember({"cusp", "divisor"}));
  var->add_option("--x", X)->required()->check(CLI::PositiveNumber);
  auto* var_q = var->add_option("--q", q)->check(CLI::PositiveNumber);
  auto* var_qmin = var->add_option("--q-min", q_min)->check(CLI::PositiveNumber);
  var->add_option("--q-max", q_max)->check(CLI::PositiveNumber)->needs(var_qmin);
  var_qmin->excludes(var_q);
  var->add_option("--points", points)->check(CLI::PositiveNumber);
  var->add_flag("--linear", linear, "arithmetic instead of geometric q-grid");
  var->add_option("--big-h", big_h)->check(CLI::PositiveNumber);
  var->add_option("--c-hat", c_hat)->check(CLI::PositiveNumber);
  var->add_option("--max-ratio", max_ratio);
  var->add_option("--threads", threads)->check(CLI::PositiveNumber);

  std::string kind = "cusp";
  double max_ratio_shift = 10.0;
  auto* sh = app.add_subcommand("shifted-check", "off-diagonal and fake main terms against their budgets");
  sh->add_option("--kind", kind)->check(CLI::IsMember({"cusp", "yy", "kk", "yk", "fake-yy", "fake-kk", "fake-yk"}));
  sh->add_option("--x", X)->required()->check(CLI::PositiveNumber);
  sh->add_option("--q", q)->check(CLI::PositiveNumber);
  sh->add_option("--big-h", big_h)->check(CLI::PositiveNumber);
  sh->add_option("--max-ratio", max_ratio_shift);

  auto* sw = app.add_subcommand("sweep", "geometric q-sweep of variance reports");
  sw->add_option("--seq", seq)->check(CLI::IsMember({"cusp", "divisor"}));
  sw->add_option("--x", X)->required()->check(CLI::PositiveNumber);
  sw->add_option("--q-min", q_min)->required()->check(CLI::PositiveNumber);
  sw->add_option("--q-max", q_max)->required()->check(CLI::PositiveNumber);
  sw->add_option("--points", points)->check(CLI::PositiveNumber);
  sw->add_option("--threads", threads)->check(CLI::PositiveNumber);
  sw->add_option("--c-hat", c_hat)->check(CLI::PositiveNumber);
  sw->add_option("--max-ratio", max_ratio);
  sw->add_flag("--linear", linear);
  for (auto* sub : {sieve, vor, mel, var, sh, sw}) {
    sub->add_option("--out", common.out, "CSV output path (default stdout)");
    sub->add_option("--json", common.json, "JSON summary path (default <out>.json, or stderr)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    Outcome o({});
    if (command == "sieve") {
      o = run_sieve(n_max);
    } else if (command == "voronoi") {
      const double H = big_h ? *big_h : X / 4.0;
      o = run_voronoi(seq, q, hs, X, H, tol);
    } else if (command == "mellin-check") {
      o = run_mellin_check(tol_kernel, tol_omega, tol_shift, tol_parseval, tol_mb);
    } else if (command == "variance" || command == "sweep") {
      VarianceJob job{seq, X, big_h, c_hat, threads, max_ratio};
      std::vector<std::uint64_t> qs;
      if (command == "variance" && q_min == 0) {
        qs = {q};
      } else {
        if (q_max == 0) q_max = q_min;
        qs = q_grid(q_min, q_max, points, !linear);
      }
      o = run_variance(job, qs, command);
    } else {
      o = run_shifted(kind, X, q, big_h, max_ratio_shift);
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    emit(command, o, common, wall);
    return o.failures.empty() ? 0 : 1;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
