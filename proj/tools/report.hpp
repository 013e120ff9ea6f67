#pragma once

#include <string>

#include <json.hpp>

#include "fpca/aglm.hpp"
#include "fpca/decomposition.hpp"
#include "fpca/selection.hpp"
#include "fpca/simulate.hpp"

namespace fpca::report {

using Json = nlohmann::ordered_json;

Json dispersion_json(const Dispersion& phi);
Dispersion dispersion_from_json(const Json& j);

/// Scalar summary of a fit; the matrices go to CSV files.
Json fit_json(const FpcaFit& fit);

Json selection_json(const GicResult& result);
Json selection_json(const CvResult& result);
std::string selection_csv(const GicResult& result);
std::string selection_csv(const CvResult& result);

std::string explained_csv(const Decomposition& decomp, const ExplainedG2& report);

Json simreport_json(const SimReport& report);
std::string simreport_csv(const SimReport& report);

/// Two-space indented JSON with a trailing newline.
std::string dump(const Json& j);

}  // namespace fpca::report
