#include "report.hpp"

#include <cmath>
#include <sstream>

#include "fpca/error.hpp"

namespace fpca::report {

namespace {

std::string structure_name(DispersionStructure s) {
  switch (s) {
    case DispersionStructure::None:
      return "none";
    case DispersionStructure::Scalar:
      return "scalar";
    case DispersionStructure::PerColumn:
      return "per_column";
  }
  return "none";
}

DispersionStructure parse_structure(const std::string& s) {
  if (s == "none") return DispersionStructure::None;
  if (s == "scalar") return DispersionStructure::Scalar;
  if (s == "per_column") return DispersionStructure::PerColumn;
  throw ParseError("unknown dispersion structure '" + s + "'", 0);
}

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json vector_json(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

}  // namespace

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json dispersion_json(const Dispersion& phi) {
  Json j;
  j["structure"] = structure_name(phi.structure);
  j["values"] = vector_json(phi.values);
  return j;
}

Dispersion dispersion_from_json(const Json& j) {
  Dispersion phi;
  phi.structure = parse_structure(j.at("structure").get<std::string>());
  const auto& values = j.at("values");
  phi.values.resize(static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) phi.values[static_cast<Index>(i)] = values[i].get<double>();
  return phi;
}

Json fit_json(const FpcaFit& fit) {
  Json j;
  j["k"] = fit.k;
  j["variant"] = to_string(fit.variant);
  j["family"] = to_string(fit.family.family);
  j["n_rows"] = fit.n_rows();
  j["n_cols"] = fit.n_cols();
  j["loglik"] = number(fit.loglik);
  j["deviance"] = number(fit.deviance);
  j["objective"] = number(fit.objective);
  j["phi"] = dispersion_json(fit.phi);
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["start_index"] = fit.start_index;
  j["start_objectives"] = vector_json(fit.start_objectives);
  return j;
}

Json selection_json(const GicResult& result) {
  Json j;
  j["rule"] = result.criterion.name();
  j["kappa"] = result.kappa;
  j["chosen_k"] = result.chosen_k;
  j["k_ref"] = result.k_ref;
  j["phi_reference"] = dispersion_json(result.phi_reference);
  Json table = Json::array();
  for (const auto& row : result.table) {
    table.push_back({{"k", row.k}, {"loglik", number(row.loglik)}, {"df", row.df}, {"gic", number(row.gic)}});
  }
  j["table"] = table;
  j["warnings"] = result.warnings;
  return j;
}

Json selection_json(const CvResult& result) {
  Json j;
  j["rule"] = "cv";
  j["q"] = result.q;
  j["n_repetitions"] = result.n_repetitions;
  j["chosen_k"] = result.chosen_k;
  j["split_seeds"] = result.split_seeds;
  Json table = Json::array();
  for (const auto& row : result.table) {
    table.push_back({{"k", row.k},
                     {"mean_g2", number(row.mean_g2)},
                     {"per_repetition", vector_json(row.per_repetition)},
                     {"test_sizes", row.test_sizes}});
  }
  j["table"] = table;
  return j;
}

std::string selection_csv(const GicResult& result) {
  std::ostringstream os;
  os << "k,loglik,df,gic,chosen\n";
  for (const auto& row : result.table) {
    os << row.k << ',' << format_double(row.loglik) << ',' << row.df << ',' << format_double(row.gic) << ','
       << (row.k == result.chosen_k ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string selection_csv(const CvResult& result) {
  std::ostringstream os;
  os << "k,mean_g2,chosen\n";
  for (const auto& row : result.table) {
    os << row.k << ',' << format_double(row.mean_g2) << ',' << (row.k == result.chosen_k ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string explained_csv(const Decomposition& decomp, const ExplainedG2& report) {
  std::ostringstream os;
  os << "component,d,deviance,cumulative,increment\n";
  os << "0,," << format_double(report.deviance[0]) << ",0,\n";
  for (int m = 1; m <= decomp.k(); ++m) {
    const auto i = static_cast<std::size_t>(m);
    os << m << ',' << format_double(decomp.d[m - 1]) << ',' << format_double(report.deviance[i]) << ','
       << format_double(report.cumulative[i]) << ',' << format_double(report.increments[i - 1]) << '\n';
  }
  return os.str();
}

Json simreport_json(const SimReport& report) {
  const auto& d = report.design;
  Json j;
  j["design"] = {{"n", d.n},
                 {"p", d.p},
                 {"k_true", d.k_true},
                 {"tau", d.tau},
                 {"noise_sd", d.noise_sd},
                 {"mu_mean", d.mu_mean},
                 {"mu_sd", d.mu_sd},
                 {"n_replications", d.n_replications},
                 {"seed", d.seed}};
  j["options"] = {{"candidates", report.options.candidates},
                  {"k_ref", report.options.k_ref ? Json(*report.options.k_ref) : Json(nullptr)},
                  {"cv_q", report.options.cv_q},
                  {"cv_reps", report.options.cv_reps},
                  {"n_starts", report.options.n_starts},
                  {"tol", report.options.tol}};
  Json rules = Json::array();
  for (auto r : report.rules) rules.push_back(to_string(r));
  j["rules"] = rules;
  Json summaries = Json::array();
  for (const auto& s : report.summaries) {
    summaries.push_back({{"rule", to_string(s.rule)},
                         {"percent_correct", s.percent_correct},
                         {"mean_rmsep", number(s.mean_rmsep)},
                         {"mean_cv_test_rmsep", number(s.mean_cv_test_rmsep)},
                         {"k_histogram", s.k_histogram}});
  }
  j["summaries"] = summaries;
  j["n_failed"] = report.n_failed;
  Json records = Json::array();
  for (const auto& rec : report.records) {
    Json r;
    r["replication"] = rec.replication;
    r["seed"] = rec.seed;
    r["n_hidden"] = rec.n_hidden;
    r["failed"] = rec.failed;
    if (rec.failed) r["error"] = rec.error;
    Json outcomes = Json::array();
    for (const auto& o : rec.outcomes) {
      Json oj{{"rule", to_string(o.rule)}, {"chosen_k", o.chosen_k}, {"rmsep", number(o.rmsep)}};
      if (o.rule == SimRule::CV) oj["cv_test_rmsep"] = number(o.cv_test_rmsep);
      outcomes.push_back(oj);
    }
    r["outcomes"] = outcomes;
    records.push_back(r);
  }
  j["records"] = records;
  return j;
}

std::string simreport_csv(const SimReport& report) {
  const auto& d = report.design;
  std::ostringstream os;
  os << "n,p,k_true,tau,rule,replications,failed,percent_correct,mean_rmsep,mean_cv_test_rmsep\n";
  for (const auto& s : report.summaries) {
    os << d.n << ',' << d.p << ',' << d.k_true << ',' << format_double(d.tau) << ',' << to_string(s.rule) << ','
       << d.n_replications << ',' << report.n_failed << ',' << format_double(s.percent_correct) << ','
       << format_double(s.mean_rmsep) << ',' << format_double(s.mean_cv_test_rmsep) << '\n';
  }
  return os.str();
}

}  // namespace fpca::report
