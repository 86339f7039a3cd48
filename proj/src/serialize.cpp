#include "wfdiff/serialize.hpp"

#include <algorithm>
#include <cstdio>

namespace wfdiff {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

double number(const Json& j, const std::string& what) {
  if (!j.is_number()) throw Error(Errc::Config, what + " must be a number");
  return j.get<double>();
}

const Json& member(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw Error(Errc::Config, where + " needs key '" + key + "'");
  return j.at(key);
}

}  // namespace

Json to_json(const Vector& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Json to_json(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vector(m.row(i).transpose())));
  return a;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw Error(Errc::Config, "expected an array of numbers");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = number(j[i], "array entry");
  return v;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw Error(Errc::Config, "expected an array of rows");
  Matrix m(j.size(), j[0].size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != j[0].size()) throw Error(Errc::Config, "matrix rows differ in length");
    for (std::size_t k = 0; k < j[i].size(); ++k) m(i, k) = number(j[i][k], "matrix entry");
  }
  return m;
}

Json to_json(const Generator& g) { return Json{{"rates", to_json(g.rates())}}; }

Generator generator_from_json(const Json& j) {
  reject_unknown_keys(j, {"rates", "parent_independent"}, "generator");
  if (j.contains("rates")) return Generator::build(matrix_from_json(j.at("rates")));
  const Json& pi = member(j, "parent_independent", "generator");
  auto p = wf_params_from_json(pi);
  return parent_independent_generator(p.psi, p.pi);
}

Json to_json(const Embedding& e) { return Json{{"vectors", to_json(e.vectors())}}; }

Embedding embedding_from_json(const Json& j) {
  reject_unknown_keys(j, {"vectors"}, "embedding");
  return Embedding(matrix_from_json(member(j, "vectors", "embedding")));
}

Json to_json(const WFParams& p) { return Json{{"psi", p.psi}, {"pi", to_json(p.pi.weights())}}; }

WFParams wf_params_from_json(const Json& j) {
  reject_unknown_keys(j, {"psi", "pi"}, "wf");
  double psi = number(member(j, "psi", "wf"), "psi");
  return WFParams(psi, SimplexPoint(vector_from_json(member(j, "pi", "wf"))));
}

Json to_json(const JointTable& t) {
  return Json{{"alphabet", t.alphabet()}, {"length", t.length()}, {"probs", to_json(t.probs())}};
}

JointTable joint_table_from_json(const Json& j) {
  reject_unknown_keys(j, {"alphabet", "length", "probs", "independent", "uniform"}, "p0");
  if (j.contains("uniform")) {
    const Json& u = j.at("uniform");
    reject_unknown_keys(u, {"alphabet", "length"}, "p0.uniform");
    return JointTable::uniform(member(u, "alphabet", "p0.uniform").get<int>(), member(u, "length", "p0.uniform").get<int>());
  }
  if (j.contains("independent")) {
    std::vector<Vector> m;
    for (const auto& row : j.at("independent")) m.push_back(vector_from_json(row));
    return JointTable::independent(m);
  }
  return JointTable(member(j, "alphabet", "p0").get<int>(), member(j, "length", "p0").get<int>(),
                    vector_from_json(member(j, "probs", "p0")));
}

TimeDilation dilation_from_json(const Json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "classical") return TimeDilation::classical();
    throw Error(Errc::Config, "unknown dilation preset '" + j.get<std::string>() + "'");
  }
  reject_unknown_keys(j, {"preset", "epsilon", "c"}, "dilation");
  std::string preset = j.value("preset", std::string("classical"));
  if (preset == "classical") return TimeDilation::classical(j.contains("epsilon") ? number(j.at("epsilon"), "epsilon") : 1e-5);
  if (preset == "linear") return TimeDilation::linear(number(member(j, "c", "dilation"), "c"));
  throw Error(Errc::Config, "unknown dilation preset '" + preset + "'");
}

Json to_json(const LinearPredictor& p) {
  return Json{{"length", p.length()},
              {"alphabet", p.alphabet()},
              {"weights", to_json(p.weights())},
              {"bias", to_json(p.bias())}};
}

LinearPredictor linear_predictor_from_json(const Json& j) {
  reject_unknown_keys(j, {"length", "alphabet", "weights", "bias"}, "predictor");
  return LinearPredictor(member(j, "length", "predictor").get<int>(), member(j, "alphabet", "predictor").get<int>(),
                         matrix_from_json(member(j, "weights", "predictor")),
                         vector_from_json(member(j, "bias", "predictor")));
}

void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(Errc::Config, where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!ok) throw Error(Errc::Config, "unknown key '" + key + "' in " + where);
  }
}

}  // namespace wfdiff
