#pragma once

#include <string>

#include <json.hpp>

#include "wfdiff/core.hpp"
#include "wfdiff/predictor.hpp"
#include "wfdiff/predictors.hpp"
#include "wfdiff/wf_diffusion.hpp"

namespace wfdiff {

using Json = nlohmann::ordered_json;

/// Shortest text that reads back to the same double ("%.17g").
std::string format_double(double x);

Json to_json(const Vector& v);
Json to_json(const Matrix& m);
Vector vector_from_json(const Json& j);
Matrix matrix_from_json(const Json& j);

/// {"rates": [[...]]} or {"parent_independent": {"psi": ψ, "pi": [...]}}.
Json to_json(const Generator& g);
Generator generator_from_json(const Json& j);

/// {"vectors": [[...]]}.
Json to_json(const Embedding& e);
Embedding embedding_from_json(const Json& j);

/// {"psi": ψ, "pi": [...]}.
Json to_json(const WFParams& p);
WFParams wf_params_from_json(const Json& j);

/// {"alphabet": B, "length": D, "probs": [...]} or
/// {"independent": [[...], ...]} or {"uniform": {"alphabet": B, "length": D}}.
Json to_json(const JointTable& t);
JointTable joint_table_from_json(const Json& j);

/// {"preset": "classical", "epsilon": ε} or {"preset": "linear", "c": c}.
TimeDilation dilation_from_json(const Json& j);

/// {"length": D, "alphabet": B, "weights": [[...]], "bias": [...]}.
Json to_json(const LinearPredictor& p);
LinearPredictor linear_predictor_from_json(const Json& j);

/// Throws Errc::Config naming the first key of `j` not in `allowed`.
void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where);

}  // namespace wfdiff
