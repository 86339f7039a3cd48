#include "wfdiff/cli.hpp"

#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "wfdiff/discrete.hpp"
#include "wfdiff/gaussian.hpp"
#include "wfdiff/limits_lab.hpp"
#include "wfdiff/predictors.hpp"
#include "wfdiff/reverse.hpp"
#include "wfdiff/serialize.hpp"
#include "wfdiff/stats.hpp"
#include "wfdiff/wf_series.hpp"

namespace wfdiff {

namespace {

struct Key {
  std::string name;
  Json fallback;
  std::string help;
};

struct Output {
  std::string header;
  std::ostringstream body;
  std::vector<std::string> comments;
};

using Runner = std::function<void(const Json&, Output&, std::ostream&)>;

struct Command {
  std::string name;
  std::string help;
  std::vector<Key> keys;
  Runner run;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double x) { return format_double(x); }

std::string flag_name(const std::string& key) {
  std::string s = "--" + key;
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

Json parse_flag(const std::string& text, const Json& fallback) {
  if (fallback.is_string()) return Json(text);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error&) {
  }
  if (text.find(',') != std::string::npos) {
    try {
      return Json::parse("[" + text + "]");
    } catch (const Json::parse_error&) {
    }
  }
  return Json(text);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// ---------------------------------------------------------------- config accessors

double get_double(const Json& c, const char* key) {
  const Json& v = c.at(key);
  if (!v.is_number()) throw Error(Errc::Config, std::string(key) + " must be a number");
  return v.get<double>();
}

long long get_int(const Json& c, const char* key) {
  const Json& v = c.at(key);
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float() && v.get<double>() == std::floor(v.get<double>())) return static_cast<long long>(v.get<double>());
  throw Error(Errc::Config, std::string(key) + " must be an integer");
}

bool get_bool(const Json& c, const char* key) {
  const Json& v = c.at(key);
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    if (v == "true") return true;
    if (v == "false") return false;
  }
  throw Error(Errc::Config, std::string(key) + " must be true or false");
}

std::string get_string(const Json& c, const char* key) {
  const Json& v = c.at(key);
  if (!v.is_string()) throw Error(Errc::Config, std::string(key) + " must be a string");
  return v.get<std::string>();
}

std::vector<double> get_doubles(const Json& c, const char* key) {
  const Json& v = c.at(key);
  if (v.is_number()) return {v.get<double>()};
  Vector x = vector_from_json(v);
  return {x.begin(), x.end()};
}

std::vector<int> get_ints(const Json& c, const char* key) {
  std::vector<int> out;
  for (double x : get_doubles(c, key)) {
    if (x != std::floor(x)) throw Error(Errc::Config, std::string(key) + " must hold integers");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

std::uint64_t seed_of(const Json& c) { return static_cast<std::uint64_t>(get_int(c, "seed")); }

int checked_positive(long long v, const char* what) {
  if (v < 1 || v > 100000000) throw Error(Errc::Config, std::string(what) + " must be a positive integer");
  return static_cast<int>(v);
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Config, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const Json::parse_error& e) {
    throw Error(Errc::Config, path + ": " + e.what());
  }
}

int infer_alphabet(const Json& c) {
  if (c.contains("p0") && !c.at("p0").is_null()) return joint_table_from_json(c.at("p0")).alphabet();
  if (c.contains("generator") && !c.at("generator").is_null()) return generator_from_json(c.at("generator")).alphabet_size();
  if (c.contains("embedding") && !c.at("embedding").is_null()) return embedding_from_json(c.at("embedding")).alphabet_size();
  if (c.contains("wf") && !c.at("wf").is_null()) return wf_params_from_json(c.at("wf")).size();
  return 4;
}

Generator cfg_generator(const Json& c, int B) {
  if (c.contains("generator") && !c.at("generator").is_null()) return generator_from_json(c.at("generator"));
  return parent_independent_generator(1.0, SimplexPoint::uniform(B));
}

Embedding cfg_embedding(const Json& c, int B) {
  if (c.contains("embedding") && !c.at("embedding").is_null()) return embedding_from_json(c.at("embedding"));
  return embedding_from_generator(cfg_generator(c, B)).embedding;
}

WFParams cfg_wf(const Json& c, int B) {
  if (c.contains("wf") && !c.at("wf").is_null()) return wf_params_from_json(c.at("wf"));
  return WFParams(static_cast<double>(B), SimplexPoint::uniform(B));
}

Modality cfg_modality(const Json& c, const std::string& name, int B) {
  if (name == "discrete") {
    int zeta = c.contains("zeta") ? checked_positive(get_int(c, "zeta"), "zeta") : 1;
    return DiscreteModality{cfg_generator(c, B), zeta};
  }
  if (name == "gaussian") return GaussianModality{cfg_embedding(c, B)};
  if (name == "wf") return WFModality{cfg_wf(c, B)};
  throw Error(Errc::Config, "unknown modality '" + name + "' (discrete, gaussian or wf)");
}

JointTable cfg_p0(const Json& c, int B) {
  if (c.contains("p0") && !c.at("p0").is_null()) return joint_table_from_json(c.at("p0"));
  return JointTable::uniform(B, 1);
}

TimeDilation cfg_dilation(const Json& c) {
  if (!c.contains("dilation") || c.at("dilation").is_null()) return TimeDilation::classical();
  return dilation_from_json(c.at("dilation"));
}

void check_alphabet(const Modality& m, const JointTable& p0) {
  if (modality_alphabet(m) != p0.alphabet()) throw Error(Errc::Config, "modality alphabet does not match p0");
}

PredictorPtr cfg_predictor(const Json& c, const JointTable& p0, bool hollow) {
  std::string kind = get_string(c, "predictor");
  if (kind == "exact") {
    if (hollow) return hollow_wrap(std::make_shared<ExactBayesPredictor>(p0, true));
    return std::make_shared<ExactBayesPredictor>(p0, false);
  }
  if (kind == "uniform") {
    auto u = std::make_shared<UniformPredictor>();
    return hollow ? hollow_wrap(u) : PredictorPtr(u);
  }
  if (kind == "linear") {
    std::string path = get_string(c, "params");
    if (path.empty()) throw Error(Errc::Config, "predictor 'linear' needs --params");
    LinearPredictor lp = linear_predictor_from_json(read_json_file(path));
    if (lp.length() != p0.length() || lp.alphabet() != p0.alphabet())
      throw Error(Errc::Config, "linear predictor shape does not match p0");
    if (hollow) return std::make_shared<HollowLinear>(lp);
    return std::make_shared<LinearPredictor>(lp);
  }
  throw Error(Errc::Config, "unknown predictor '" + kind + "' (exact, uniform or linear)");
}

// ---------------------------------------------------------------- commands

const Json kNull = Json();

std::vector<Key> modality_keys() {
  return {{"modality", "wf", "discrete, gaussian or wf"},
          {"generator", kNull, "{\"rates\": [[...]]} or {\"parent_independent\": {\"psi\", \"pi\"}}"},
          {"embedding", kNull, "{\"vectors\": [[...]]}; default: from the generator"},
          {"wf", kNull, "{\"psi\": ψ, \"pi\": [...]}; default ψ = B, π uniform"},
          {"zeta", 1, "population size for the discrete modality"},
          {"dilation", kNull, "{\"preset\": \"classical\"|\"linear\", \"epsilon\"|\"c\"}"}};
}

void cmd_elbo(const Json& c, Output& out, std::ostream& err) {
  const int B = infer_alphabet(c);
  JointTable p0 = cfg_p0(c, B);
  Modality m = cfg_modality(c, get_string(c, "modality"), p0.alphabet());
  check_alphabet(m, p0);
  const bool hollow = get_bool(c, "hollow");
  double t_min = 0.0;
  if (!hollow) {
    if (c.at("t_min").is_null()) throw Error(Errc::Config, "raw (non-hollow) predictors need an explicit --t-min");
    t_min = get_double(c, "t_min");
    out.comments.push_back("truncated t_min=" + fmt(t_min));
  }
  PredictorPtr predictor = cfg_predictor(c, p0, hollow);
  ElboOptions opts;
  opts.stratified_t = get_bool(c, "stratified");
  if (get_bool(c, "rao_blackwell")) opts.posterior = std::make_shared<ExactBayesPredictor>(p0, false);
  auto samples = sample_elbo(m, *predictor, p0, cfg_dilation(c), checked_positive(get_int(c, "n"), "n"), seed_of(c),
                             opts, t_min);
  out.header = "t,tau,position,loss";
  double sum = 0.0;
  for (const auto& s : samples) {
    for (std::size_t d = 0; d < s.losses.size(); ++d) {
      out.body << fmt(s.t) << ',' << fmt(s.tau) << ',' << d << ',' << fmt(s.losses[d]) << '\n';
      sum += s.losses[d];
    }
  }
  err << "elbo per sequence: " << fmt(sum / samples.size()) << " nats\n";
}

void cmd_forward(const Json& c, Output& out, std::ostream&) {
  const int B = infer_alphabet(c);
  const std::string name = get_string(c, "modality");
  Modality m = cfg_modality(c, name, B);
  const int x0 = static_cast<int>(get_int(c, "x0"));
  if (x0 < 0 || x0 >= modality_alphabet(m)) throw Error(Errc::Config, "x0 out of range");
  double tau;
  if (!c.at("t").is_null()) {
    tau = cfg_dilation(c).tau(get_double(c, "t"));
  } else {
    if (c.at("tau").is_null()) throw Error(Errc::Config, "forward needs --tau or --t");
    tau = get_double(c, "tau");
  }
  const int n = checked_positive(get_int(c, "n"), "n");
  const std::uint64_t seed = seed_of(c);
  int width = 0;
  std::string prefix;
  if (auto* d = std::get_if<DiscreteModality>(&m)) {
    width = d->zeta == 1 ? 0 : modality_alphabet(m);
    prefix = "c";
  } else if (auto* g = std::get_if<GaussianModality>(&m)) {
    width = g->embedding.dimension();
    prefix = "y";
  } else {
    width = modality_alphabet(m);
    prefix = "v";
  }
  out.header = "sample,tau";
  if (width == 0) out.header += ",token";
  for (int k = 0; k < width; ++k) out.header += "," + prefix + std::to_string(k);
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, i);
    NoisedState s = forward_sample(m, tau, x0, rng);
    out.body << i << ',' << fmt(tau);
    if (width == 0) out.body << ',' << s.token;
    for (int k = 0; k < width; ++k) out.body << ',' << fmt(s.value[k]);
    out.body << '\n';
  }
}

Classifier token_classifier(int position, int token, double epsilon) {
  Classifier c;
  c.log_prob = [=](const Matrix& x) { return std::log(epsilon + (1.0 - epsilon) * x(position, token)); };
  c.gradient = [=](const Matrix& x) {
    Matrix g = Matrix::Zero(x.rows(), x.cols());
    g(position, token) = (1.0 - epsilon) / (epsilon + (1.0 - epsilon) * x(position, token));
    return g;
  };
  return c;
}

std::optional<Guidance> cfg_guidance(const Json& c, const JointTable& p0) {
  Json g = c.at("guidance");
  std::string path = get_string(c, "guidance_config");
  if (!path.empty()) g = read_json_file(path);
  if (g.is_null()) return std::nullopt;
  reject_unknown_keys(g, {"position", "token", "scale", "epsilon"}, "guidance");
  int position = g.value("position", 0), token = g.value("token", 0);
  if (position < 0 || position >= p0.length() || token < 0 || token >= p0.alphabet())
    throw Error(Errc::Config, "guidance position/token out of range");
  return Guidance{token_classifier(position, token, g.value("epsilon", 0.05)), g.value("scale", 1.0)};
}

void cmd_reverse(const Json& c, Output& out, std::ostream&) {
  const int B = infer_alphabet(c);
  JointTable p0 = cfg_p0(c, B);
  const std::string name = get_string(c, "modality");
  Modality m = cfg_modality(c, name, p0.alphabet());
  check_alphabet(m, p0);
  PredictorPtr predictor = cfg_predictor(c, p0, true);
  ReverseOptions o;
  o.n_steps = checked_positive(get_int(c, "steps"), "steps");
  o.max_dtau = get_double(c, "max_dtau");
  o.strict_paper_drift = get_bool(c, "strict_paper_drift");
  o.corrector = static_cast<int>(get_int(c, "corrector"));
  auto guidance = cfg_guidance(c, p0);
  if (guidance && name != "wf") throw Error(Errc::Config, "guidance is implemented for the wf modality");
  const TimeDilation dil = cfg_dilation(c);
  const int n = checked_positive(get_int(c, "n"), "n");
  const std::uint64_t seed = seed_of(c);
  out.header = "sample,position,token";
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, i);
    std::vector<int> tokens;
    if (auto* d = std::get_if<DiscreteModality>(&m)) {
      if (d->zeta != 1) throw Error(Errc::Config, "reverse sampling supports zeta = 1");
      tokens = reverse_discrete_sample(d->generator, *predictor, p0.length(), dil, o, rng);
    } else if (auto* g = std::get_if<GaussianModality>(&m)) {
      tokens = reverse_gaussian_sample(g->embedding, *predictor, p0.length(), dil, o, rng);
    } else {
      tokens = reverse_wf_sample(std::get<WFModality>(m).params, *predictor, p0.length(), dil, o, guidance, rng);
    }
    for (std::size_t d = 0; d < tokens.size(); ++d) out.body << i << ',' << d << ',' << tokens[d] << '\n';
  }
}

void cmd_ancestral(const Json& c, Output& out, std::ostream& err) {
  const double psi = get_double(c, "psi"), tau = get_double(c, "tau");
  if (!(psi > 0.0)) throw Error(Errc::Config, "psi must be positive");
  if (!(tau > 0.0)) throw Error(Errc::Config, "tau must be positive");
  const int n = checked_positive(get_int(c, "n"), "n");
  const std::string method = get_string(c, "method");
  const std::uint64_t seed = seed_of(c);
  out.header = "sample,m";
  double sum = 0.0;
  std::optional<AncestralSampler> sampler;
  if (method == "exact") sampler.emplace(psi, tau);
  else if (method != "griffiths") throw Error(Errc::Config, "method must be exact or griffiths");
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, i);
    int m = sampler ? (*sampler)(rng) : sample_ancestral_griffiths(psi, tau, rng);
    sum += m;
    out.body << i << ',' << m << '\n';
  }
  err << "mean m: " << fmt(sum / n) << '\n';
}

void cmd_score(const Json& c, Output& out, std::ostream&) {
  const int B = c.at("wf").is_null() && c.at("v").is_array() ? static_cast<int>(c.at("v").size()) : infer_alphabet(c);
  const WFParams p = cfg_wf(c, B);
  const double tau = get_double(c, "tau");
  if (c.at("v").is_null()) throw Error(Errc::Config, "score needs --v");
  const SimplexPoint v(vector_from_json(c.at("v")));
  if (v.size() != p.size()) throw Error(Errc::Config, "v has the wrong length");
  ScoreVector s;
  if (!c.at("x0").is_null()) {
    int x0 = static_cast<int>(get_int(c, "x0"));
    if (x0 < 0 || x0 >= p.size()) throw Error(Errc::Config, "x0 out of range");
    s = score_given_x0(p, tau, x0, v, get_double(c, "threshold"));
  } else if (!c.at("x_tilde").is_null()) {
    s = score_given_prediction(p, tau, SimplexPoint(vector_from_json(c.at("x_tilde"))), v, get_bool(c, "hollow"),
                               get_double(c, "threshold"));
  } else {
    throw Error(Errc::Config, "score needs --x0 or --x-tilde");
  }
  out.header = "b,v,score";
  for (int b = 0; b < p.size(); ++b) out.body << b << ',' << fmt(v[b]) << ',' << fmt(s[b]) << '\n';
}

void cmd_converge_gaussian(const Json& c, Output& out, std::ostream& err) {
  const Generator g = c.at("generator").is_null() ? parent_independent_generator(1.0, SimplexPoint::uniform(3))
                                                  : generator_from_json(c.at("generator"));
  const TimeDilation dil = cfg_dilation(c);
  const int x0 = static_cast<int>(get_int(c, "x0"));
  GaussianLimitOptions o;
  o.n_samples = checked_positive(get_int(c, "n"), "n");
  o.seed = seed_of(c);
  auto report = gaussian_limit_experiment(g, dil, x0, get_doubles(c, "t_grid"), get_ints(c, "zeta_grid"), o);
  out.header = "kind,zeta,t,metric,mc_error";
  for (const auto& cell : report.cells)
    out.body << "energy_distance," << cell.zeta << ',' << fmt(cell.t) << ',' << fmt(cell.metric) << ','
             << fmt(cell.mc_error) << '\n';
  const double t = get_double(c, "elbo_t");
  for (const auto& e : gaussian_elbo_limit(g, dil, t, x0, SimplexPoint(vector_from_json(c.at("x_tilde"))),
                                           get_ints(c, "zeta_grid")))
    out.body << "elbo_relative_gap," << e.zeta << ',' << fmt(t) << ',' << fmt(e.relative_gap) << ",0\n";
  err << "fitted log-log slope: " << fmt(report.decay_slope) << '\n';
}

void cmd_converge_wf(const Json& c, Output& out, std::ostream&) {
  const WFParams p = c.at("wf").is_null() ? WFParams(2.0, SimplexPoint::uniform(2)) : wf_params_from_json(c.at("wf"));
  const TimeDilation dil = cfg_dilation(c);
  const double tau = get_double(c, "tau");
  const double t = dilation_inverse(dil, tau);
  const double rate = dil.rate(t);
  auto rows = wf_limit_experiment(p, tau, rate, SimplexPoint(vector_from_json(c.at("v"))),
                                  static_cast<int>(get_int(c, "x0")), SimplexPoint(vector_from_json(c.at("x_tilde"))),
                                  get_ints(c, "zeta_grid"));
  out.header = "zeta,t,metric,mc_error,discrete,continuum,lattice_v0";
  for (const auto& r : rows)
    out.body << r.zeta << ',' << fmt(t) << ',' << fmt(r.gap) << ",0," << fmt(r.discrete) << ',' << fmt(r.continuum)
             << ',' << fmt(r.lattice_point[0]) << '\n';
}

void cmd_singularity(const Json& c, Output& out, std::ostream&) {
  Matrix pm(2, 1);
  pm << 1.0, -1.0;
  const Embedding emb = c.at("embedding").is_null() ? Embedding(pm) : embedding_from_json(c.at("embedding"));
  const JointTable p0 = cfg_p0(c, emb.alphabet_size());
  const std::string base = get_string(c, "hollow_base");
  PredictorPtr hollow;
  if (base == "exact") hollow = hollow_wrap(std::make_shared<ExactBayesPredictor>(p0, true));
  else if (base == "uniform") hollow = hollow_wrap(std::make_shared<UniformPredictor>());
  else throw Error(Errc::Config, "hollow_base must be exact or uniform");
  UniformPredictor raw;
  auto rows = gaussian_singularity_profile(emb, cfg_dilation(c), p0, raw, *hollow, get_doubles(c, "t_grid"),
                                           checked_positive(get_int(c, "n"), "n"), seed_of(c));
  out.header = "t,elbo_raw,elbo_hollow,stderr_raw,stderr_hollow";
  for (const auto& r : rows)
    out.body << fmt(r.t) << ',' << fmt(r.elbo_raw) << ',' << fmt(r.elbo_hollow) << ',' << fmt(r.stderr_raw) << ','
             << fmt(r.stderr_hollow) << '\n';
}

void cmd_counterexample(const Json& c, Output& out, std::ostream& err) {
  auto r = argmax_counterexample(get_double(c, "dt"), checked_positive(get_int(c, "n"), "n"), seed_of(c),
                                 get_double(c, "tau_max"), get_double(c, "marginal_tau"));
  out.header = "path,gaussian_transitions,discrete_transitions";
  for (std::size_t i = 0; i < r.gaussian_transitions.size(); ++i)
    out.body << i << ',' << fmt(r.gaussian_transitions[i]) << ',' << fmt(r.discrete_transitions[i]) << '\n';
  auto mw = mann_whitney(r.gaussian_transitions, r.discrete_transitions);
  err << "rank-sum z=" << fmt(mw.z) << " p=" << fmt(mw.p_value) << "; P(x0 sign) gaussian="
      << fmt(r.gaussian_same_fraction) << " discrete=" << fmt(r.discrete_same_fraction) << '\n';
}

void cmd_train(const Json& c, Output& out, std::ostream& err) {
  const int B = infer_alphabet(c);
  const JointTable p0 = cfg_p0(c, B);
  std::vector<Modality> mods;
  const Json& names = c.at("modalities");
  if (!names.is_array() || names.empty()) throw Error(Errc::Config, "modalities must be a nonempty list");
  for (const auto& n : names) {
    if (!n.is_string()) throw Error(Errc::Config, "modalities must be names");
    mods.push_back(cfg_modality(c, n.get<std::string>(), p0.alphabet()));
    check_alphabet(mods.back(), p0);
  }
  TrainConfig tc;
  tc.steps = checked_positive(get_int(c, "steps"), "steps");
  tc.batch = checked_positive(get_int(c, "batch"), "batch");
  tc.learning_rate = get_double(c, "lr");
  tc.seed = seed_of(c);
  auto result = train_unified(LinearPredictor(p0.length(), p0.alphabet()), p0, mods, cfg_dilation(c), tc);
  out.header = "step,modality,loss";
  for (const auto& r : result.trace) out.body << r.step << ',' << r.modality << ',' << fmt(r.loss) << '\n';
  const std::string path = get_string(c, "params_out");
  if (!path.empty()) {
    std::ofstream f(path);
    if (!f) throw Error(Errc::Config, "cannot write " + path);
    f << to_json(result.predictor).dump(2) << '\n';
    err << "parameters written to " << path << '\n';
  }
}

void cmd_series_sweep(const Json& c, Output& out, std::ostream&) {
  const double psi = get_double(c, "psi"), pi_x0 = get_double(c, "pi_x0");
  const double lo = get_double(c, "tau_min"), hi = get_double(c, "tau_max");
  const int n_tau = checked_positive(get_int(c, "n_tau"), "n_tau");
  const int kmax = checked_positive(get_int(c, "kmax"), "kmax");
  const int ref_kmax = checked_positive(get_int(c, "ref_kmax"), "ref_kmax");
  if (!(lo >= 0.0 && hi >= lo)) throw Error(Errc::Config, "need 0 <= tau_min <= tau_max");
  out.header = "tau,x,psi,value,eta,precision_used,terms_used,relative_error,reference_converged";
  for (int i = 0; i < n_tau; ++i) {
    const double tau = n_tau == 1 ? lo : lo + (hi - lo) * i / (n_tau - 1);
    for (double x : get_doubles(c, "x")) {
      SeriesResult r = series_G_truncated(psi, pi_x0, x, tau, kmax, Precision::Standard);
      if (r.condition_number > kEscalationThreshold || !r.converged)
        r = series_G_truncated(psi, pi_x0, x, tau, kmax, Precision::Extended);
      SeriesResult ref = series_G_truncated(psi, pi_x0, x, tau, ref_kmax, Precision::Extended);
      double rel = std::abs(r.value - ref.value) / std::max(std::abs(ref.value), std::numeric_limits<double>::min());
      out.body << fmt(tau) << ',' << fmt(x) << ',' << fmt(psi) << ',' << fmt(r.value) << ','
               << fmt(r.condition_number) << ',' << precision_name(r.precision_used) << ',' << r.terms_used << ','
               << fmt(rel) << ',' << (ref.converged ? 1 : 0) << '\n';
    }
  }
}

std::vector<Command> commands() {
  auto with = [](std::vector<Key> a, const std::vector<Key>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  const std::vector<Key> mk = modality_keys();
  const Json p0_key = kNull;
  return {
      {"elbo", "Monte-Carlo ELBO per sample and position",
       with(mk, {{"p0", p0_key, "data distribution table"},
                 {"n", 1000, "number of (t, x_t) draws"},
                 {"predictor", "exact", "exact, uniform or linear"},
                 {"params", "", "linear predictor parameters (JSON)"},
                 {"hollow", true, "hollow-wrap the predictor"},
                 {"t_min", kNull, "lower t limit, required for raw predictors"},
                 {"stratified", false, "stratify t over the samples"},
                 {"rao_blackwell", false, "average each loss over the exact posterior of x0"}}),
       cmd_elbo},
      {"forward", "forward-process samples",
       with(mk, {{"x0", 0, "starting token"},
                 {"tau", kNull, "diffusion time τ"},
                 {"t", kNull, "model time (mapped through the dilation)"},
                 {"n", 10, "number of samples"}}),
       cmd_forward},
      {"reverse", "reverse-time generation with the exact Bayes predictor",
       with(mk, {{"p0", p0_key, "data distribution table"},
                 {"predictor", "exact", "exact, uniform or linear"},
                 {"params", "", "linear predictor parameters (JSON)"},
                 {"n", 100, "number of sequences"},
                 {"steps", 1000, "uniform t steps"},
                 {"max_dtau", 0.05, "largest τ increment per substep"},
                 {"strict_paper_drift", true, "keep the B(1/B − z) drift term"},
                 {"corrector", 0, "Langevin corrector steps (wf)"},
                 {"guidance", kNull, "{\"position\", \"token\", \"scale\", \"epsilon\"}"},
                 {"guidance_config", "", "file holding the guidance object"}}),
       cmd_reverse},
      {"ancestral", "draws from the ancestral process A(ψ, τ)",
       {{"psi", 1.0, "mutation intensity ψ"},
        {"tau", 1.0, "diffusion time τ"},
        {"n", 1000, "number of draws"},
        {"method", "exact", "exact or griffiths"}},
       cmd_ancestral},
      {"score", "simplicial score at a point",
       {{"wf", kNull, "{\"psi\": ψ, \"pi\": [...]}"},
        {"tau", 0.5, "diffusion time τ"},
        {"v", kNull, "point on the simplex"},
        {"x0", kNull, "condition on this token"},
        {"x_tilde", kNull, "or on this prediction"},
        {"hollow", false, "treat x_tilde as the hollow base prediction"},
        {"threshold", kSeriesRegimeTau, "τ below which the low-t approximation replaces the series"}},
       cmd_score},
      {"converge-gaussian", "population → Gaussian limit (energy distance, ELBO gap)",
       {{"generator", kNull, "default: parent-independent, B = 3"},
        {"dilation", kNull, "time dilation"},
        {"x0", 0, "starting token"},
        {"t_grid", Json::array({0.25, 0.5, 0.75}), "model times"},
        {"zeta_grid", Json::array({10, 100, 1000, 10000}), "population sizes"},
        {"n", 10000, "samples per cell"},
        {"x_tilde", Json::array({0.6, 0.3, 0.1}), "prediction for the ELBO gap"},
        {"elbo_t", 0.5, "model time for the ELBO gap"}},
       cmd_converge_gaussian},
      {"converge-wf", "finite-population loss → simplicial loss",
       {{"wf", kNull, "default ψ = 2, π = [0.5, 0.5]"},
        {"dilation", kNull, "time dilation (for τ̇)"},
        {"tau", 0.5, "diffusion time τ"},
        {"v", Json::array({0.4, 0.6}), "evaluation point"},
        {"x0", 0, "true token"},
        {"x_tilde", Json::array({0.3, 0.7}), "prediction"},
        {"zeta_grid", Json::array({2, 4, 6, 8}), "population sizes (≤ 8)"}},
       cmd_converge_wf},
      {"singularity", "Gaussian ELBO integrand near t = 0, raw versus hollow",
       {{"embedding", kNull, "default ±1"},
        {"p0", p0_key, "data distribution table"},
        {"dilation", kNull, "time dilation"},
        {"t_grid", Json::array({1e-1, 1e-2, 1e-3, 1e-4}), "model times"},
        {"n", 100000, "samples per point"},
        {"hollow_base", "exact", "base of the hollow predictor: exact or uniform"}},
       cmd_singularity},
      {"counterexample", "argmax of Gaussian diffusion versus matched two-state chain",
       {{"dt", 1e-3, "τ grid step"},
        {"n", 10000, "paths"},
        {"tau_max", 2.0, "path length in τ"},
        {"marginal_tau", 1.0, "τ of the marginal comparison"}},
       cmd_counterexample},
      {"train", "SGD on the hollow linear predictor, round-robin over modalities",
       with(mk, {{"p0", p0_key, "data distribution table"},
                 {"modalities", Json::array({"discrete", "gaussian", "wf"}), "modalities to alternate"},
                 {"steps", 2000, "gradient steps"},
                 {"batch", 16, "samples per step"},
                 {"lr", 0.05, "step size"},
                 {"params_out", "", "write trained parameters here (JSON)"}}),
       cmd_train},
      {"series-sweep", "truncated G series against the extended-precision reference",
       {{"psi", 4.0, "ψ"},
        {"pi_x0", 0.25, "π_{x0}"},
        {"x", Json::array({0.25, 0.75}), "evaluation points"},
        {"tau_min", 0.05, "first τ"},
        {"tau_max", 0.2, "last τ"},
        {"n_tau", 16, "number of τ values"},
        {"kmax", kDefaultKmax, "terms in the truncated sum"},
        {"ref_kmax", kReferenceKmax, "terms in the reference"}},
       cmd_series_sweep},
  };
}

void emit(const std::string& cmd, const Json& merged, const Output& o, std::ostream& out) {
  nlohmann::json canonical = nlohmann::json::parse(merged.dump());
  canonical.erase("out");
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(canonical.dump())));
  std::ostringstream text;
  text << "# wfdiff " << cmd << " config_hash=" << hash << " seed=" << seed_of(merged) << '\n';
  for (const auto& c : o.comments) text << "# " << c << '\n';
  text << o.header << '\n' << o.body.str();
  const std::string path = get_string(merged, "out");
  if (path == "-") {
    out << text.str();
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::Config, "cannot write " + path);
  f << text.str();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"wfdiff: discrete, Gaussian and Wright-Fisher diffusion toolkit"};
  app.require_subcommand(0, 1);
  const auto cmds = commands();
  struct Bound {
    const Command* cmd;
    CLI::App* sub;
    std::string config;
    std::map<std::string, std::string> flags;
  };
  std::vector<Bound> bound;
  bound.reserve(cmds.size());
  for (const auto& c : cmds) {
    bound.push_back({&c, app.add_subcommand(c.name, c.help), "", {}});
    Bound& b = bound.back();
    b.sub->add_option("--config", b.config, "JSON config file; flags override its keys");
    std::vector<Key> keys = c.keys;
    keys.push_back({"seed", 0, "random seed"});
    keys.push_back({"out", "-", "output CSV path (- for stdout)"});
    for (const auto& k : keys) b.flags[k.name];
    for (const auto& k : keys) b.sub->add_option(flag_name(k.name), b.flags[k.name], k.help);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }
  const Bound* chosen = nullptr;
  for (const auto& b : bound)
    if (b.sub->parsed()) chosen = &b;
  if (!chosen) {
    err << app.help();
    return 1;
  }
  try {
    std::vector<Key> keys = chosen->cmd->keys;
    keys.push_back({"seed", 0, ""});
    keys.push_back({"out", "-", ""});
    Json merged = Json::object();
    for (const auto& k : keys) merged[k.name] = k.fallback;
    if (!chosen->config.empty()) {
      std::ifstream in(chosen->config);
      if (!in) throw Error(Errc::Config, "cannot open " + chosen->config);
      std::stringstream ss;
      ss << in.rdbuf();
      if (ss.str().find_first_not_of(" \t\r\n") == std::string::npos) throw UsageError("empty config file");
      Json cfg;
      try {
        cfg = Json::parse(ss.str());
      } catch (const Json::parse_error& e) {
        throw Error(Errc::Config, chosen->config + ": " + e.what());
      }
      if (!cfg.is_object() || cfg.empty()) throw UsageError("config must be a nonempty JSON object");
      for (const auto& [key, value] : cfg.items()) {
        if (!merged.contains(key)) throw Error(Errc::Config, "unknown key '" + key + "' for " + chosen->cmd->name);
        merged[key] = value;
      }
    }
    for (const auto& k : keys) {
      CLI::Option* opt = chosen->sub->get_option(flag_name(k.name));
      if (opt->count() > 0) merged[k.name] = parse_flag(chosen->flags.at(k.name), k.fallback);
    }
    Output o;
    chosen->cmd->run(merged, o, err);
    emit(chosen->cmd->name, merged, o, out);
    return 0;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << chosen->sub->help();
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.is_numerical() ? 2 : 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error: Config: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace wfdiff
