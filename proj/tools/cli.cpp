#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "fpca/aglm.hpp"
#include "fpca/csv.hpp"
#include "fpca/dataset.hpp"
#include "fpca/decomposition.hpp"
#include "fpca/error.hpp"
#include "fpca/parallel.hpp"
#include "fpca/selection.hpp"
#include "fpca/simulate.hpp"
#include "manifest.hpp"
#include "report.hpp"

namespace fpca::cli {

namespace {

namespace fs = std::filesystem;
using report::Json;

// Errors in flag values; mapped to the usage exit code.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
  const char* env = std::getenv("FPCA_SEED");
  if (!env || !*env) return 0;
  std::uint64_t v = 0;
  const std::string_view text(env);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) throw UsageError("FPCA_SEED must be an unsigned integer");
  return v;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

struct InputOptions {
  std::string input;
  std::string format = "auto";
  std::string na = "NA";
  std::string dims;
  std::string window;
  std::string hole;
};

struct ModelOptions {
  std::string family = "gaussian";
  std::string variant = "simple";
  int starts = 5;
  double tol = 1e-7;
  int max_iter = 500;
  std::uint64_t seed = 0;
};

struct Loaded {
  ObservationSet set;
  Index row0 = 0;
  Index col0 = 0;
};

void add_input_options(CLI::App* sub, InputOptions& o, bool required) {
  auto* in = sub->add_option("--input", o.input, "Data file (coordinate CSV with row,col,value header, or dense CSV)");
  if (required) in->required();
  sub->add_option("--format", o.format, "auto, coord or dense")->check(CLI::IsMember({"auto", "coord", "dense"}));
  sub->add_option("--na", o.na, "Missing-value token for dense input");
  sub->add_option("--dims", o.dims, "Grid size n,p for coordinate input");
  sub->add_option("--window", o.window, "Outer window r0,c0,r1,c1 (half-open)");
  sub->add_option("--hole", o.hole, "Inner window removed from the outer one");
}

void add_model_options(CLI::App* sub, ModelOptions& o) {
  sub->add_option("--family", o.family, "gaussian, poisson, bernoulli or quasipoisson")
      ->check(CLI::IsMember({"gaussian", "poisson", "bernoulli", "quasipoisson"}));
  sub->add_option("--variant", o.variant, "simple, covariance or correlation")
      ->check(CLI::IsMember({"simple", "covariance", "correlation"}));
  sub->add_option("--starts", o.starts, "Random starts")->check(CLI::PositiveNumber);
  sub->add_option("--tol", o.tol, "Relative log-likelihood tolerance")->check(CLI::PositiveNumber);
  sub->add_option("--max-iter", o.max_iter, "Maximum outer iterations")->check(CLI::PositiveNumber);
  sub->add_option("--seed", o.seed, "Random seed (default $FPCA_SEED or 0)");
}

std::pair<Index, Index> parse_pair(const std::string& text, const char* what) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw UsageError(std::string(what) + " must be two comma-separated integers");
  try {
    return {std::stol(text.substr(0, comma)), std::stol(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw UsageError(std::string(what) + " must be two comma-separated integers");
  }
}

bool looks_like_coordinate(const std::string& text) {
  const auto start = text.find_first_not_of(" \t\r\n");
  if (start == std::string::npos) return false;
  return text.compare(start, 3, "row") == 0;
}

Loaded load_input(const InputOptions& o) {
  const std::string text = read_text_file(o.input);
  std::string format = o.format;
  if (format == "auto") format = looks_like_coordinate(text) ? "coord" : "dense";
  std::optional<std::pair<Index, Index>> dims;
  if (!o.dims.empty()) dims = parse_pair(o.dims, "--dims");
  if (dims && format != "coord") throw UsageError("--dims applies to coordinate input only");

  ObservationSet s = format == "coord" ? parse_coordinate_csv(text, dims) : parse_dense_csv(text, o.na);
  if (o.window.empty()) {
    if (!o.hole.empty()) throw UsageError("--hole requires --window");
    return {std::move(s), 0, 0};
  }
  const Rect outer = parse_rect(o.window);
  const Rect inner = o.hole.empty() ? Rect{} : parse_rect(o.hole);
  auto region = window_minus_window(s, outer, inner);
  std::vector<Cell> cells;
  for (const auto& c : region->cells()) cells.push_back({c.row - outer.r0, c.col - outer.c0, c.value});
  return {ObservationSet(outer.r1 - outer.r0, outer.c1 - outer.c0, std::move(cells)), outer.r0, outer.c0};
}

FpcaConfig make_config(const ModelOptions& m, int k) {
  FpcaConfig c;
  c.k = k;
  c.n_starts = m.starts;
  c.tol = m.tol;
  c.max_outer_iter = m.max_iter;
  c.seed = m.seed;
  return c;
}

Json option_value(const CLI::Option* opt) {
  if (opt->count() == 0) return opt->get_default_str();
  const auto& r = opt->results();
  if (r.size() == 1) return r.front();
  return r;
}

Json flag_set(const CLI::App* sub) {
  Json flags = Json::object();
  for (const auto* opt : sub->get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
    flags[opt->get_lnames().front()] = option_value(opt);
  }
  return flags;
}

void write_json(const fs::path& path, const Json& j) { write_text_file(path, report::dump(j)); }

// Writes the observed set of a fit in the fit's local coordinates.
struct FitDir {
  FpcaFit fit;
  ObservationSet observed;
  Index row0 = 0;
  Index col0 = 0;
  double center = 0.0;
};

FitDir read_fit_dir(const fs::path& dir) {
  Json j;
  try {
    j = Json::parse(read_text_file(dir / "fit.json"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("fit.json: ") + e.what(), 0);
  }
  FitDir out{FpcaFit{}, load_coordinate_csv(dir / "observed.csv", std::pair<Index, Index>{j.at("n_rows").get<Index>(),
                                                                                          j.at("n_cols").get<Index>()}),
             j.at("origin").at(0).get<Index>(), j.at("origin").at(1).get<Index>(), j.at("center").get<double>()};
  auto& fit = out.fit;
  fit.k = j.at("k").get<int>();
  fit.variant = parse_variant(j.at("variant").get<std::string>());
  fit.family = FamilySpec::make(parse_family(j.at("family").get<std::string>()));
  fit.phi = report::dispersion_from_json(j.at("phi"));
  fit.loglik = j.at("loglik").is_null() ? 0.0 : j.at("loglik").get<double>();
  fit.deviance = j.at("deviance").is_null() ? 0.0 : j.at("deviance").get<double>();
  fit.alpha = read_matrix_csv(dir / "alpha.csv");
  fit.beta = read_matrix_csv(dir / "beta.csv");
  const Eigen::MatrixXd gamma = read_matrix_csv(dir / "gamma.csv");
  if (gamma.cols() != 1) throw ParseError("gamma.csv must have one column", 0);
  fit.gamma = gamma.col(0);
  if (fit.alpha.rows() != out.observed.n_rows() || fit.beta.rows() != out.observed.n_cols() ||
      fit.gamma.size() != fit.beta.rows() || fit.alpha.cols() != fit.k || fit.beta.cols() != fit.k) {
    throw ParseError("fit matrices do not match fit.json", 0);
  }
  return out;
}

CellList read_cell_list(const fs::path& path) {
  const std::string text = read_text_file(path);
  CellList out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (line_no == 1 && line.rfind("row", 0) == 0)) continue;
    std::istringstream fields(line);
    std::string r, c;
    if (!std::getline(fields, r, ',') || !std::getline(fields, c, ',')) {
      throw ParseError("expected row,col", line_no);
    }
    try {
      out.emplace_back(std::stol(r), std::stol(c));
    } catch (const std::exception&) {
      throw ParseError("expected integer row,col", line_no);
    }
  }
  return out;
}

std::string format_coordinate_rows(const std::vector<Cell>& cells) {
  std::string out = "row,col,value\n";
  for (const auto& c : cells) {
    out += std::to_string(c.row) + ',' + std::to_string(c.col) + ',' + format_double(c.value) + '\n';
  }
  return out;
}

struct Context {
  std::ostream& out;
  std::ostream& err;
  fs::path out_dir = ".";
  int threads = 0;
  RunManifest manifest;
};

// fit -----------------------------------------------------------------------

struct FitArgs {
  InputOptions input;
  ModelOptions model;
  int k = 1;
  bool center = false;
};

void run_fit(const FitArgs& a, Context& ctx) {
  Loaded data = load_input(a.input);
  const auto family = FamilySpec::make(parse_family(a.model.family));
  const auto variant = parse_variant(a.model.variant);
  double center = 0.0;
  if (a.center) {
    if (family.family != Family::Gaussian) throw UsageError("--center requires the gaussian family");
    for (const auto& c : data.set.cells()) center += c.value;
    center /= static_cast<double>(data.set.size());
    std::vector<Cell> cells(data.set.cells().begin(), data.set.cells().end());
    for (auto& c : cells) c.value -= center;
    data.set = ObservationSet(data.set.n_rows(), data.set.n_cols(), std::move(cells));
  }
  const auto fit = fit_fpca(data.set, variant, family, make_config(a.model, a.k));

  Json j = report::fit_json(fit);
  j["origin"] = {data.row0, data.col0};
  j["center"] = center;
  j["n_observed"] = data.set.size();
  j["seed"] = a.model.seed;
  write_json(ctx.out_dir / "fit.json", j);
  write_matrix_csv(ctx.out_dir / "alpha.csv", fit.alpha);
  write_matrix_csv(ctx.out_dir / "beta.csv", fit.beta);
  write_matrix_csv(ctx.out_dir / "gamma.csv", fit.gamma);
  write_coordinate_csv(ctx.out_dir / "observed.csv", data.set);
  if (!fit.converged) ctx.err << "warning: fit did not converge within " << a.model.max_iter << " iterations\n";
  ctx.out << "k=" << fit.k << " loglik=" << format_double(fit.loglik) << " deviance=" << format_double(fit.deviance)
          << '\n';
}

// select --------------------------------------------------------------------

struct SelectArgs {
  InputOptions input;
  ModelOptions model;
  std::string rule = "bic";
  int k_min = 1;
  int k_max = 0;
  int k_ref = 0;
  double cv_q = 0.2;
  int cv_reps = 10;
};

void run_select(const SelectArgs& a, Context& ctx) {
  const Loaded data = load_input(a.input);
  const auto family = FamilySpec::make(parse_family(a.model.family));
  const auto variant = parse_variant(a.model.variant);
  const int k_max = a.k_max > 0 ? a.k_max : default_candidates(data.set, variant).back();
  if (a.k_min < 1 || a.k_min > k_max) throw UsageError("need 1 <= --k-min <= --k-max");
  std::vector<int> candidates;
  for (int k = a.k_min; k <= k_max; ++k) candidates.push_back(k);
  const auto config = make_config(a.model, a.k_min);

  Json j;
  std::string csv;
  int chosen = 0;
  if (a.rule == "cv") {
    const auto cv = select_k_cv(data.set, variant, family, candidates, a.cv_q, a.cv_reps, config);
    j = report::selection_json(cv);
    csv = report::selection_csv(cv);
    chosen = cv.chosen_k;
  } else {
    Criterion criterion;
    if (a.rule == "bic") {
      criterion = Criterion::bic();
    } else if (a.rule == "aic") {
      criterion = Criterion::aic();
      ctx.err << "warning: AIC is inconsistent for rank selection; BIC is the recommended rule\n";
    } else if (a.rule.rfind("gic:", 0) == 0) {
      double kappa = 0.0;
      try {
        kappa = parse_double(a.rule.substr(4));
      } catch (const Error&) {
        throw UsageError("--rule gic:<kappa> needs a numeric kappa");
      }
      if (!(kappa > 0.0)) throw UsageError("kappa must be positive");
      criterion = Criterion::custom(kappa);
    } else {
      throw UsageError("unknown --rule '" + a.rule + "' (expected bic, aic, gic:<kappa> or cv)");
    }
    const std::optional<int> k_ref = a.k_ref > 0 ? std::optional<int>(a.k_ref) : std::nullopt;
    const auto gic = select_k_gic(data.set, variant, family, candidates, criterion, k_ref, config);
    for (const auto& w : gic.warnings) ctx.err << "warning: " << w << '\n';
    j = report::selection_json(gic);
    csv = report::selection_csv(gic);
    chosen = gic.chosen_k;
  }
  j["variant"] = to_string(variant);
  j["family"] = to_string(family.family);
  j["n_observed"] = data.set.size();
  write_json(ctx.out_dir / "selection.json", j);
  write_text_file(ctx.out_dir / "selection.csv", csv);
  ctx.out << "chosen_k=" << chosen << '\n';
}

// decompose -----------------------------------------------------------------

struct DecomposeArgs {
  std::string fit_dir;
};

void run_decompose(const DecomposeArgs& a, Context& ctx) {
  const FitDir fd = read_fit_dir(a.fit_dir);
  ExplainedG2 ex;
  const Decomposition d = decompose(fd.observed, fd.fit, &ex);
  write_matrix_csv(ctx.out_dir / "pcs.csv", d.scores());
  write_matrix_csv(ctx.out_dir / "loadings.csv", d.v);
  write_text_file(ctx.out_dir / "explained.csv", report::explained_csv(d, ex));
  for (const auto& msg : ex.diagnostics) ctx.err << "note: " << msg << '\n';
  ctx.out << "explained=" << format_double(ex.cumulative.back()) << '\n';
}

// predict -------------------------------------------------------------------

struct PredictArgs {
  std::string fit_dir;
  std::string cells = "all";
  bool difference = false;
};

void run_predict(const PredictArgs& a, Context& ctx) {
  const FitDir fd = read_fit_dir(a.fit_dir);
  CellList cells;
  if (a.cells == "all") {
    cells = all_cells(fd.fit.n_rows(), fd.fit.n_cols());
  } else if (a.cells == "observed") {
    cells = observed_cells(fd.observed);
  } else {
    ctx.manifest.inputs.emplace_back(a.cells);
    for (auto [r, c] : read_cell_list(a.cells)) cells.emplace_back(r - fd.row0, c - fd.col0);
  }
  const auto pred = predict_cells(fd.fit, cells, fd.fit.family);
  std::vector<Cell> rows;
  rows.reserve(pred.cells.size());
  for (const auto& p : pred.cells) rows.push_back({p.row + fd.row0, p.col + fd.col0, p.mu_hat + fd.center});
  write_text_file(ctx.out_dir / "predictions.csv", format_coordinate_rows(rows));

  if (a.difference) {
    std::vector<Cell> diff;
    for (const auto& c : fd.observed.cells()) {
      const double mu = inv_link(fd.fit.family, fd.fit.eta(c.row, c.col));
      diff.push_back({c.row + fd.row0, c.col + fd.col0, std::abs(c.value - mu)});
    }
    write_text_file(ctx.out_dir / "difference.csv", format_coordinate_rows(diff));
  }
  ctx.out << "predicted " << rows.size() << " cells\n";
}

// simulate ------------------------------------------------------------------

struct SimulateArgs {
  SimDesign design;
  std::string rules = "bic";
  int k_min = 1;
  int k_max = 0;
  int k_ref = 0;
  double cv_q = 0.2;
  int cv_reps = 10;
  int starts = 5;
  bool dump_dataset = false;
};

void run_simulate(SimulateArgs a, Context& ctx) {
  a.design.validate();
  if (a.dump_dataset) {
    const auto data = generate_dataset(a.design, 0);
    write_coordinate_csv(ctx.out_dir / "masked.csv", data.masked);
    write_coordinate_csv(ctx.out_dir / "full.csv", data.full);
    write_text_file(ctx.out_dir / "hidden.csv", format_coordinate_rows(data.hidden));
    ctx.out << "wrote replication 0 (" << data.masked.size() << " observed, " << data.hidden.size() << " hidden)\n";
    return;
  }
  std::vector<SimRule> rules;
  std::stringstream ss(a.rules);
  std::string name;
  while (std::getline(ss, name, ',')) {
    try {
      rules.push_back(parse_sim_rule(name));
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
  }
  if (std::find(rules.begin(), rules.end(), SimRule::AIC) != rules.end()) {
    ctx.err << "warning: AIC is inconsistent for rank selection; BIC is the recommended rule\n";
  }
  SimOptions opt;
  if (a.k_min != 1 || a.k_max > 0) {
    const int k_max = a.k_max > 0 ? a.k_max : a.design.k_true + 4;
    for (int k = a.k_min; k <= k_max; ++k) opt.candidates.push_back(k);
  }
  if (a.k_ref > 0) opt.k_ref = a.k_ref;
  opt.cv_q = a.cv_q;
  opt.cv_reps = a.cv_reps;
  opt.n_starts = a.starts;
  const auto rep = run_simulation(a.design, rules, opt);
  write_json(ctx.out_dir / "simreport.json", report::simreport_json(rep));
  write_text_file(ctx.out_dir / "simreport.csv", report::simreport_csv(rep));
  for (const auto& s : rep.summaries) {
    ctx.out << to_string(s.rule) << ": percent_correct=" << format_double(s.percent_correct)
            << " mean_rmsep=" << format_double(s.mean_rmsep) << '\n';
  }
  if (rep.n_failed > 0) ctx.err << "warning: " << rep.n_failed << " replications failed\n";
}

int usage_error(const CLI::App& app, const std::vector<std::string>& args, const CLI::ParseError& e,
                std::ostream& err) {
  err << "error: " << e.what() << '\n';
  // Suggest the closest known flag for every unknown one.
  const CLI::App* sub = nullptr;
  for (const auto* s : app.get_subcommands()) sub = s;
  if (sub) {
    for (const auto& a : args) {
      if (a.rfind("--", 0) != 0) continue;
      const std::string flag = a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2);
      if (sub->get_option_no_throw("--" + flag)) continue;
      std::string best;
      std::size_t best_d = std::string::npos;
      for (const auto* opt : sub->get_options()) {
        for (const auto& name : opt->get_lnames()) {
          const auto d = edit_distance(flag, name);
          if (d < best_d) {
            best_d = d;
            best = name;
          }
        }
      }
      if (!best.empty() && best_d <= std::max<std::size_t>(2, flag.size() / 3)) {
        err << "  unknown flag --" << flag << "; did you mean --" << best << "?\n";
      }
    }
  }
  err << "run with --help for usage\n";
  return 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto started = std::chrono::steady_clock::now();
  CLI::App app{"Flexible PCA: low-rank exponential-family decomposition of partially observed matrices", "fpca"};
  app.require_subcommand(1, 1);
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", kVersion);

  Context ctx{out, err, ".", 0, RunManifest{}};
  std::string out_dir = ".";
  int threads = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out,--manifest", out_dir, "Output directory");
    sub->add_option("--threads", threads, "Worker thread cap (0 = all cores)")->check(CLI::NonNegativeNumber);
  };

  std::uint64_t seed0 = 0;
  try {
    seed0 = default_seed();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  FitArgs fit_args;
  fit_args.model.seed = seed0;
  auto* fit_cmd = app.add_subcommand("fit", "Fit an FPCA model at a fixed k");
  add_input_options(fit_cmd, fit_args.input, true);
  add_model_options(fit_cmd, fit_args.model);
  fit_cmd->add_option("--k", fit_args.k, "Rank")->required()->check(CLI::PositiveNumber);
  fit_cmd->add_flag("--center", fit_args.center, "Subtract the grand mean before fitting (gaussian only)");
  add_common(fit_cmd);

  SelectArgs sel_args;
  sel_args.model.seed = seed0;
  auto* sel_cmd = app.add_subcommand("select", "Select k by information criterion or cross-validation");
  add_input_options(sel_cmd, sel_args.input, true);
  add_model_options(sel_cmd, sel_args.model);
  sel_cmd->add_option("--rule", sel_args.rule, "bic, aic, gic:<kappa> or cv");
  sel_cmd->add_option("--k-min", sel_args.k_min, "Smallest candidate k");
  sel_cmd->add_option("--k-max", sel_args.k_max, "Largest candidate k (default min(10, coverage bound))");
  sel_cmd->add_option("--k-ref", sel_args.k_ref, "Rank of the dispersion reference fit (default k-max + 2, reduced to keep residual df)");
  sel_cmd->add_option("--cv-q", sel_args.cv_q, "Test fraction for cv");
  sel_cmd->add_option("--cv-reps", sel_args.cv_reps, "Repetitions for cv")->check(CLI::PositiveNumber);
  add_common(sel_cmd);

  DecomposeArgs dec_args;
  auto* dec_cmd = app.add_subcommand("decompose", "Orthonormal components and explained G^2 of a fit");
  dec_cmd->add_option("--fit", dec_args.fit_dir, "Directory written by fit")->required();
  add_common(dec_cmd);

  PredictArgs pred_args;
  auto* pred_cmd = app.add_subcommand("predict", "Predict cells from a fit");
  pred_cmd->add_option("--fit", pred_args.fit_dir, "Directory written by fit")->required();
  pred_cmd->add_option("--cells", pred_args.cells, "all, observed, or a CSV of row,col pairs");
  pred_cmd->add_flag("--difference", pred_args.difference, "Also write |x - mu| for observed cells");
  add_common(pred_cmd);

  SimulateArgs sim_args;
  sim_args.design.seed = seed0;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo rank-recovery and prediction study");
  sim_cmd->add_option("--n", sim_args.design.n, "Rows");
  sim_cmd->add_option("--p", sim_args.design.p, "Columns");
  sim_cmd->add_option("--k-true", sim_args.design.k_true, "Generating rank");
  sim_cmd->add_option("--tau", sim_args.design.tau, "Missing probability");
  sim_cmd->add_option("--noise-sd", sim_args.design.noise_sd, "Noise standard deviation");
  sim_cmd->add_option("--replications", sim_args.design.n_replications, "Replications");
  sim_cmd->add_option("--seed", sim_args.design.seed, "Random seed (default $FPCA_SEED or 0)");
  sim_cmd->add_option("--rules", sim_args.rules, "Comma-separated subset of bic,aic,cv");
  sim_cmd->add_option("--k-min", sim_args.k_min, "Smallest candidate k")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--k-max", sim_args.k_max, "Largest candidate k (default k-true + 4, capped so CV training fits keep residual df)");
  sim_cmd->add_option("--k-ref", sim_args.k_ref, "Rank of the dispersion reference fit");
  sim_cmd->add_option("--cv-q", sim_args.cv_q, "Test fraction for cv");
  sim_cmd->add_option("--cv-reps", sim_args.cv_reps, "Repetitions for cv")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--starts", sim_args.starts, "Random starts")->check(CLI::PositiveNumber);
  sim_cmd->add_flag("--dump-dataset", sim_args.dump_dataset, "Write replication 0's data instead of simulating");
  add_common(sim_cmd);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    return usage_error(app, args, e, err);
  }

  CLI::App* sub = app.get_subcommands().front();
  ctx.out_dir = out_dir;
  ctx.threads = threads;
  ctx.manifest.subcommand = sub->get_name();
  ctx.manifest.argv = args;
  ctx.manifest.flags = flag_set(sub);
  ctx.manifest.version = kVersion;

  try {
    ThreadLimit limit(threads);
    fs::create_directories(ctx.out_dir);
    const std::string name = sub->get_name();
    if (name == "fit") {
      ctx.manifest.inputs.emplace_back(fit_args.input.input);
      ctx.manifest.seed = fit_args.model.seed;
      run_fit(fit_args, ctx);
    } else if (name == "select") {
      ctx.manifest.inputs.emplace_back(sel_args.input.input);
      ctx.manifest.seed = sel_args.model.seed;
      run_select(sel_args, ctx);
    } else if (name == "decompose") {
      for (const char* f : {"fit.json", "alpha.csv", "beta.csv", "gamma.csv", "observed.csv"}) {
        ctx.manifest.inputs.push_back(fs::path(dec_args.fit_dir) / f);
      }
      run_decompose(dec_args, ctx);
    } else if (name == "predict") {
      for (const char* f : {"fit.json", "alpha.csv", "beta.csv", "gamma.csv", "observed.csv"}) {
        ctx.manifest.inputs.push_back(fs::path(pred_args.fit_dir) / f);
      }
      run_predict(pred_args, ctx);
    } else {
      ctx.manifest.seed = sim_args.design.seed;
      run_simulate(sim_args, ctx);
    }
    ctx.manifest.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_manifest(ctx.out_dir, ctx.manifest);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

int run(const std::vector<std::string>& args) { return run(args, std::cout, std::cerr); }

}  // namespace fpca::cli
