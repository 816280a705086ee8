#include "cmc/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "cmc/errors.hpp"
#include "json.hpp"

namespace cmc {

using json = nlohmann::json;

namespace {

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> keys,
                    std::string_view what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    bool known = false;
    for (auto key : keys) known = known || k == key;
    if (!known) throw ConfigError("unknown key '" + k + "' in " + std::string(what));
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

// NaN does not survive JSON, so it travels as null.
json number_or_null(double x) { return std::isnan(x) ? json(nullptr) : json(x); }
double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json family_json(const ExpFamilyModel& m) {
  json j{{"family", family_token(m.family)},
         {"nuisance", m.nuisance},
         {"gamma", m.gamma},
         {"kappa", m.kappa}};
  if (m.support) j["support"] = {m.support->lo, m.support->hi};
  return j;
}

ExpFamilyModel family_from(const json& j) {
  reject_unknown(j, {"family", "nuisance", "gamma", "kappa", "support"}, "family");
  ExpFamilyModel m;
  if (!j.contains("family")) throw ConfigError("family entry needs a 'family' token");
  m.family = parse_family(j.at("family").get<std::string>());
  read_opt(j, "nuisance", m.nuisance);
  read_opt(j, "gamma", m.gamma);
  read_opt(j, "kappa", m.kappa);
  if (j.contains("support") && !j.at("support").is_null()) {
    const auto s = j.at("support").get<std::vector<double>>();
    if (s.size() != 2) throw ConfigError("support must be [lo, hi]");
    m.support = Interval{s[0], s[1]};
  }
  m.validate();
  return m;
}

json loss_json(const LipschitzLoss& l) {
  const char* kind = l.kind == LipschitzLoss::Kind::Hinge      ? "hinge"
                     : l.kind == LipschitzLoss::Kind::Logistic ? "logistic"
                                                               : "quantile";
  return {{"kind", kind}, {"tau", l.tau}, {"rho", l.rho}};
}

LipschitzLoss loss_from(const json& j) {
  reject_unknown(j, {"kind", "tau", "rho"}, "loss");
  LipschitzLoss l;
  const std::string kind = j.value("kind", std::string("logistic"));
  if (kind == "hinge") l.kind = LipschitzLoss::Kind::Hinge;
  else if (kind == "logistic") l.kind = LipschitzLoss::Kind::Logistic;
  else if (kind == "quantile") l.kind = LipschitzLoss::Kind::Quantile;
  else throw ConfigError("unknown loss kind '" + kind + "'");
  read_opt(j, "tau", l.tau);
  read_opt(j, "rho", l.rho);
  l.validate();
  return l;
}

json solver_json(const SolverConfig& c) {
  json losses = json::array();
  for (const auto& l : c.losses) losses.push_back(loss_json(l));
  return {{"lambda", c.lambda},
          {"lambda_auto", c.lambda_auto},
          {"lambda_constant", c.lambda_constant},
          {"lambda_fraction", c.lambda_fraction},
          {"nu", c.nu},
          {"epsilon", c.epsilon},
          {"max_iters", c.max_iters},
          {"lipschitz", c.lipschitz},
          {"lipschitz_auto", c.lipschitz_auto},
          {"clip_gamma", c.clip_gamma ? json(*c.clip_gamma) : json(nullptr)},
          {"mode", c.mode == SolverConfig::Mode::Likelihood ? "likelihood" : "general_loss"},
          {"losses", losses},
          {"quantile_smoothing", c.quantile_smoothing},
          {"init_rank", c.init_rank},
          {"slack", c.slack},
          {"power_max_iters", c.power_max_iters},
          {"warm_start_drop_tol", c.warm_start_drop_tol},
          {"exact_svt", c.exact_svt},
          {"momentum", c.momentum},
          {"seed", c.seed},
          {"record_timing", c.record_timing}};
}

SolverConfig solver_from(const json& j) {
  reject_unknown(j,
                 {"lambda", "lambda_auto", "lambda_constant", "lambda_fraction", "nu", "epsilon",
                  "max_iters", "lipschitz", "lipschitz_auto", "clip_gamma", "mode", "losses",
                  "quantile_smoothing", "init_rank", "slack", "power_max_iters",
                  "warm_start_drop_tol", "exact_svt", "momentum", "seed", "record_timing"},
                 "solver config");
  SolverConfig c;
  if (j.contains("lambda") && j.at("lambda").is_string()) {
    if (j.at("lambda").get<std::string>() != "auto") {
      throw ConfigError("lambda must be a number or \"auto\"");
    }
    c.lambda_auto = true;
  } else {
    read_opt(j, "lambda", c.lambda);
  }
  read_opt(j, "lambda_auto", c.lambda_auto);
  read_opt(j, "lambda_constant", c.lambda_constant);
  read_opt(j, "lambda_fraction", c.lambda_fraction);
  read_opt(j, "nu", c.nu);
  read_opt(j, "epsilon", c.epsilon);
  read_opt(j, "max_iters", c.max_iters);
  read_opt(j, "lipschitz", c.lipschitz);
  read_opt(j, "lipschitz_auto", c.lipschitz_auto);
  if (j.contains("clip_gamma") && !j.at("clip_gamma").is_null()) {
    c.clip_gamma = j.at("clip_gamma").get<double>();
  }
  if (j.contains("mode")) {
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "likelihood") c.mode = SolverConfig::Mode::Likelihood;
    else if (mode == "general_loss") c.mode = SolverConfig::Mode::GeneralLoss;
    else throw ConfigError("unknown solver mode '" + mode + "'");
  }
  if (j.contains("losses")) {
    for (const auto& l : j.at("losses")) c.losses.push_back(loss_from(l));
  }
  read_opt(j, "quantile_smoothing", c.quantile_smoothing);
  read_opt(j, "init_rank", c.init_rank);
  read_opt(j, "slack", c.slack);
  read_opt(j, "power_max_iters", c.power_max_iters);
  read_opt(j, "warm_start_drop_tol", c.warm_start_drop_tol);
  read_opt(j, "exact_svt", c.exact_svt);
  read_opt(j, "momentum", c.momentum);
  read_opt(j, "seed", c.seed);
  read_opt(j, "record_timing", c.record_timing);
  c.validate();
  return c;
}

json law_json(const FactorLaw& l) {
  const char* kind = l.kind == FactorLaw::Kind::Normal    ? "normal"
                     : l.kind == FactorLaw::Kind::Poisson ? "poisson"
                                                          : "bernoulli";
  return {{"kind", kind}, {"a", l.a}, {"b", l.b}};
}

FactorLaw law_from(const json& j) {
  reject_unknown(j, {"kind", "a", "b"}, "factor law");
  FactorLaw l;
  const std::string kind = j.value("kind", std::string("normal"));
  if (kind == "normal") l.kind = FactorLaw::Kind::Normal;
  else if (kind == "poisson") l.kind = FactorLaw::Kind::Poisson;
  else if (kind == "bernoulli") l.kind = FactorLaw::Kind::Bernoulli;
  else throw ConfigError("unknown factor law '" + kind + "'");
  read_opt(j, "a", l.a);
  read_opt(j, "b", l.b);
  return l;
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17e", x);
  return buf;
}

void write_f64(const fs::path& path, const double* data, std::size_t count) {
  std::string bytes(count * sizeof(double), '\0');
  for (std::size_t k = 0; k < count; ++k) {
    auto bits = std::bit_cast<std::uint64_t>(data[k]);
    for (int b = 0; b < 8; ++b) bytes[k * 8 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  write_text_file(path, bytes);
}

std::vector<double> read_f64(const fs::path& path, std::size_t count) {
  const std::string bytes = read_text_file(path);
  if (bytes.size() != count * sizeof(double)) {
    throw DataError(path.string() + ": expected " + std::to_string(count * 8) + " bytes, found " +
                    std::to_string(bytes.size()));
  }
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[k * 8 + static_cast<std::size_t>(b)])) << (8 * b);
    }
    out[k] = std::bit_cast<double>(bits);
  }
  return out;
}

fs::path with_suffix(const fs::path& base, std::string_view suffix) {
  return fs::path(base.string() + std::string(suffix));
}

}  // namespace

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view contents) {
  const fs::path tmp = with_suffix(path, ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw ConfigError("write failed for " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw ConfigError("cannot write " + path.string());
  }
}

std::string observations_to_csv(const ObservationSet& obs) {
  std::string out = "v,i,j,y\n";
  out.reserve(out.size() + obs.size() * 40);
  for (const auto& o : obs.entries) {
    out += std::to_string(o.v);
    out += ',';
    out += std::to_string(o.i);
    out += ',';
    out += std::to_string(o.j);
    out += ',';
    out += format_double(o.y);
    out += '\n';
  }
  return out;
}

ObservationSet observations_from_csv(std::string_view text, const BlockLayout& layout,
                                     std::vector<ExpFamilyModel> families) {
  ObservationSet obs{layout, {}, std::move(families)};
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto fail = [&](const std::string& msg) -> DataError {
      return DataError("line " + std::to_string(line_no) + ": " + msg);
    };
    if (!header) {
      if (line != "v,i,j,y") throw fail("expected header 'v,i,j,y'");
      header = true;
      continue;
    }
    if (line.empty()) {
      if (pos >= text.size()) break;
      throw fail("empty row");
    }
    std::string_view fields[4];
    std::size_t start = 0;
    for (int f = 0; f < 3; ++f) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string_view::npos) throw fail("expected 4 fields");
      fields[f] = line.substr(start, comma - start);
      start = comma + 1;
    }
    fields[3] = line.substr(start);
    if (fields[3].find(',') != std::string_view::npos) throw fail("expected 4 fields");
    int idx[3];
    for (int f = 0; f < 3; ++f) {
      const auto r = std::from_chars(fields[f].data(), fields[f].data() + fields[f].size(), idx[f]);
      if (r.ec != std::errc() || r.ptr != fields[f].data() + fields[f].size() || fields[f].empty()) {
        throw fail("bad integer '" + std::string(fields[f]) + "'");
      }
    }
    double y = 0.0;
    const auto r = std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), y);
    if (r.ec != std::errc() || r.ptr != fields[3].data() + fields[3].size() || fields[3].empty()) {
      throw fail("bad value '" + std::string(fields[3]) + "'");
    }
    if (idx[0] < 0 || idx[0] >= layout.sources() || idx[1] < 0 || idx[1] >= layout.rows() ||
        idx[2] < 0 || idx[2] >= layout.cols(idx[0])) {
      throw fail("index out of range for the layout");
    }
    obs.entries.push_back({idx[0], idx[1], idx[2], y});
  }
  if (!header) throw DataError("observation file is empty");
  obs.validate();
  return obs;
}

std::string layout_to_json(const LayoutFile& l) {
  json fams = json::array();
  for (const auto& f : l.families) fams.push_back(family_json(f));
  return json{{"d_u", l.layout.rows()}, {"d_vs", l.layout.block_cols()}, {"families", fams}}
      .dump(2);
}

LayoutFile layout_from_json(std::string_view text) {
  const json j = parse_json(text, "layout");
  reject_unknown(j, {"d_u", "d_vs", "families"}, "layout");
  LayoutFile out;
  try {
    out.layout = BlockLayout(j.at("d_u").get<int>(), j.at("d_vs").get<std::vector<int>>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("layout: ") + e.what());
  }
  if (j.contains("families")) {
    for (const auto& f : j.at("families")) out.families.push_back(family_from(f));
  }
  if (!out.families.empty() && static_cast<int>(out.families.size()) != out.layout.sources()) {
    throw ConfigError("layout lists " + std::to_string(out.families.size()) + " families for " +
                      std::to_string(out.layout.sources()) + " sources");
  }
  return out;
}

std::string family_to_json(const ExpFamilyModel& model) { return family_json(model).dump(); }
ExpFamilyModel family_from_json(std::string_view text) {
  return family_from(parse_json(text, "family"));
}

std::string solver_config_to_json(const SolverConfig& cfg) { return solver_json(cfg).dump(2); }
SolverConfig solver_config_from_json(std::string_view text) {
  return solver_from(parse_json(text, "solver config"));
}

std::string experiment_spec_to_json(const ExperimentSpec& s) {
  json laws = json::array();
  for (const auto& l : s.synth.laws) laws.push_back(law_json(l));
  json fams = json::array();
  for (const auto& f : s.families) fams.push_back(family_json(f));
  json methods = json::array();
  for (auto m : s.methods) methods.push_back(method_token(m));
  return json{{"id", s.id},
              {"d_u", s.synth.d_u},
              {"d_vs", s.synth.d_vs},
              {"ranks", s.synth.ranks},
              {"laws", laws},
              {"gamma", s.synth.gamma},
              {"sharing", s.synth.sharing == FactorSharing::SharedRows ? "shared_rows" : "independent"},
              {"families", fams},
              {"observation", observation_token(s.observation)},
              {"p_grid", s.p_grid},
              {"trials", s.trials},
              {"seed", s.seed},
              {"solver", solver_json(s.solver)},
              {"methods", methods},
              {"train_fraction", s.train_fraction},
              {"jobs", s.jobs}}
      .dump(2);
}

ExperimentSpec experiment_spec_from_json(std::string_view text) {
  const json j = parse_json(text, "experiment");
  reject_unknown(j,
                 {"id", "d_u", "d_vs", "ranks", "laws", "gamma", "sharing", "families",
                  "observation", "p_grid", "trials", "seed", "solver", "methods",
                  "train_fraction", "jobs"},
                 "experiment");
  ExperimentSpec s;
  s.families.clear();
  read_opt(j, "id", s.id);
  read_opt(j, "d_u", s.synth.d_u);
  read_opt(j, "d_vs", s.synth.d_vs);
  read_opt(j, "ranks", s.synth.ranks);
  if (j.contains("laws")) {
    for (const auto& l : j.at("laws")) s.synth.laws.push_back(law_from(l));
  }
  read_opt(j, "gamma", s.synth.gamma);
  if (j.contains("sharing")) {
    const std::string sh = j.at("sharing").get<std::string>();
    if (sh == "shared_rows") s.synth.sharing = FactorSharing::SharedRows;
    else if (sh == "independent") s.synth.sharing = FactorSharing::Independent;
    else throw ConfigError("unknown sharing mode '" + sh + "'");
  }
  if (j.contains("families")) {
    for (const auto& f : j.at("families")) s.families.push_back(family_from(f));
  } else {
    s.families.assign(s.synth.d_vs.size(), ExpFamilyModel::gaussian(1.0));
  }
  if (j.contains("observation")) {
    s.observation = parse_observation_mode(j.at("observation").get<std::string>());
  }
  read_opt(j, "p_grid", s.p_grid);
  read_opt(j, "trials", s.trials);
  read_opt(j, "seed", s.seed);
  if (j.contains("solver")) s.solver = solver_from(j.at("solver"));
  if (j.contains("methods")) {
    s.methods.clear();
    for (const auto& m : j.at("methods")) s.methods.push_back(parse_method(m.get<std::string>()));
  }
  read_opt(j, "train_fraction", s.train_fraction);
  read_opt(j, "jobs", s.jobs);
  return s;
}

std::string fit_result_to_json(const FitResult& f) {
  return json{{"config", solver_json(f.config)},
              {"lambda", f.lambda},
              {"lipschitz", f.lipschitz},
              {"initial_objective", f.initial_objective},
              {"objective_history", f.objective_history},
              {"rank_history", f.rank_history},
              {"input_rank_history", f.input_rank_history},
              {"lambda_history", f.lambda_history},
              {"restarts", f.restarts},
              {"iterations", f.iterations()},
              {"terminated_by", termination_token(f.terminated_by)},
              {"rank", f.factors.rank()},
              {"zero_solution", f.zero_solution},
              {"power_cap_hits", f.power_cap_hits},
              {"clipped_entries", f.clipped_entries()},
              {"wall_time_ms", f.wall_time_ms}}
      .dump(2);
}

std::string metric_record_to_json(const MetricRecord& r) {
  json sre = json::array();
  for (double x : r.source_re) sre.push_back(number_or_null(x));
  json j{{"experiment", r.experiment},
         {"p", r.p},
         {"trial", r.trial},
         {"method", method_token(r.method)},
         {"target_source", r.target_source},
         {"relative_error", number_or_null(r.relative_error)},
         {"source_re", sre},
         {"mse", number_or_null(r.mse)},
         {"rank", r.rank},
         {"iterations", r.iterations},
         {"terminated_by", r.terminated_by},
         {"wall_time_ms", r.wall_time_ms},
         {"heldout_risk", number_or_null(r.heldout_risk)},
         {"objective_history", r.objective_history},
         {"rank_history", r.rank_history},
         {"error", r.error ? json(*r.error) : json(nullptr)}};
  return j.dump();
}

MetricRecord metric_record_from_json(std::string_view line) {
  const json j = parse_json(line, "metric record");
  MetricRecord r;
  try {
    r.experiment = j.at("experiment").get<std::string>();
    r.p = j.at("p").get<double>();
    r.trial = j.at("trial").get<int>();
    r.method = parse_method(j.at("method").get<std::string>());
    r.target_source = j.at("target_source").get<int>();
    r.relative_error = number_from(j.at("relative_error"));
    for (const auto& x : j.at("source_re")) r.source_re.push_back(number_from(x));
    r.mse = number_from(j.at("mse"));
    r.rank = j.at("rank").get<int>();
    r.iterations = j.at("iterations").get<int>();
    r.terminated_by = j.at("terminated_by").get<std::string>();
    r.wall_time_ms = j.at("wall_time_ms").get<double>();
    r.heldout_risk = number_from(j.at("heldout_risk"));
    r.objective_history = j.at("objective_history").get<std::vector<double>>();
    r.rank_history = j.at("rank_history").get<std::vector<int>>();
    if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
  } catch (const json::exception& e) {
    throw DataError(std::string("metric record: ") + e.what());
  }
  return r;
}

std::string metric_records_to_jsonl(const std::vector<MetricRecord>& recs) {
  std::string out;
  for (const auto& r : recs) {
    out += metric_record_to_json(r);
    out += '\n';
  }
  return out;
}

std::string curve_to_csv(const std::vector<RateRow>& rows) {
  std::string out = "p,mean_re,std_re,bound\n";
  for (const auto& r : rows) {
    out += format_double(r.p) + ',' + format_double(r.mean_re) + ',' + format_double(r.std_re) +
           ',' + format_double(r.bound) + '\n';
  }
  return out;
}

void write_matrix(const fs::path& base, const Eigen::MatrixXd& m) {
  write_f64(with_suffix(base, ".bin"), m.data(), static_cast<std::size_t>(m.size()));
  const json header{{"rows", m.rows()},
                    {"cols", m.cols()},
                    {"dtype", "float64"},
                    {"endian", "little"},
                    {"order", "column_major"},
                    {"file", with_suffix(base, ".bin").filename().string()}};
  write_text_file(with_suffix(base, ".json"), header.dump(2));
}

Eigen::MatrixXd read_matrix(const fs::path& base) {
  const json h = parse_json(read_text_file(with_suffix(base, ".json")), "matrix header");
  const auto rows = h.at("rows").get<Eigen::Index>();
  const auto cols = h.at("cols").get<Eigen::Index>();
  if (rows < 0 || cols < 0) throw DataError("negative matrix shape");
  const auto data = read_f64(with_suffix(base, ".bin"), static_cast<std::size_t>(rows * cols));
  return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

void write_factors(const fs::path& base, const ThinFactors& f) {
  write_f64(with_suffix(base, "_u.bin"), f.u.data(), static_cast<std::size_t>(f.u.size()));
  write_f64(with_suffix(base, "_sigma.bin"), f.sigma.data(),
            static_cast<std::size_t>(f.sigma.size()));
  write_f64(with_suffix(base, "_v.bin"), f.v.data(), static_cast<std::size_t>(f.v.size()));
  const std::string stem = base.filename().string();
  const json header{{"rank", f.rank()},
                    {"rows", f.u.rows()},
                    {"cols", f.v.rows()},
                    {"dtype", "float64"},
                    {"endian", "little"},
                    {"order", "column_major"},
                    {"u", stem + "_u.bin"},
                    {"sigma", stem + "_sigma.bin"},
                    {"v", stem + "_v.bin"}};
  write_text_file(with_suffix(base, ".json"), header.dump(2));
}

ThinFactors read_factors(const fs::path& base) {
  const json h = parse_json(read_text_file(with_suffix(base, ".json")), "factor header");
  const auto k = h.at("rank").get<Eigen::Index>();
  const auto rows = h.at("rows").get<Eigen::Index>();
  const auto cols = h.at("cols").get<Eigen::Index>();
  const auto u = read_f64(with_suffix(base, "_u.bin"), static_cast<std::size_t>(rows * k));
  const auto s = read_f64(with_suffix(base, "_sigma.bin"), static_cast<std::size_t>(k));
  const auto v = read_f64(with_suffix(base, "_v.bin"), static_cast<std::size_t>(cols * k));
  return {Eigen::Map<const Eigen::MatrixXd>(u.data(), rows, k),
          Eigen::Map<const Eigen::VectorXd>(s.data(), k),
          Eigen::Map<const Eigen::MatrixXd>(v.data(), cols, k)};
}

}  // namespace cmc
