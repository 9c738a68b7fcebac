#include "ust3d/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include "ust3d/estimator.hpp"
#include "ust3d/forest.hpp"
#include "ust3d/greens.hpp"
#include "ust3d/oracle.hpp"
#include "ust3d/sandpile.hpp"

#ifndef UST3D_VERSION
#define UST3D_VERSION "unknown"
#endif

namespace ust3d {

namespace {

const std::vector<std::pair<Experiment, std::string>>& experiment_table() {
  static const std::vector<std::pair<Experiment, std::string>> t = {
      {Experiment::kVerifyOracle, "verify-oracle"},
      {Experiment::kVerifyBijection, "verify-bijection"},
      {Experiment::kDharCheck, "dhar-check"},
      {Experiment::kAlpha, "alpha"},
      {Experiment::kBeta, "beta"},
      {Experiment::kPastTails, "past-tails"},
      {Experiment::kZeroTreeTails, "zero-tree-tails"},
      {Experiment::kAvalancheTails, "avalanche-tails"},
      {Experiment::kFirstWaveRatio, "first-wave-ratio"},
  };
  return t;
}

}  // namespace

std::string to_string(Experiment e) {
  for (const auto& [k, name] : experiment_table())
    if (k == e) return name;
  return "unknown";
}

std::optional<Experiment> experiment_from_string(const std::string& s) {
  for (const auto& [k, name] : experiment_table())
    if (name == s) return k;
  return std::nullopt;
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [k, name] : experiment_table()) v.push_back(name);
    return v;
  }();
  return names;
}

ConfigError::ConfigError(const std::string& msg, int line, int column)
    : std::runtime_error(line > 0 ? msg + " (line " + std::to_string(line) + ", column " +
                                        std::to_string(column) + ")"
                                  : msg),
      line_(line),
      column_(column) {}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
T yaml_value(const YAML::Node& n, const std::string& key) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("bad value for '" + key + "'", n.Mark().line + 1, n.Mark().column + 1);
  }
}

RunConfig parse_yaml(const std::string& text, bool require_experiment) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("parse error: " + e.msg, e.mark.line + 1, e.mark.column + 1);
  }
  RunConfig c;
  if (root.IsNull()) {
    if (require_experiment) throw ConfigError("missing required key 'experiment'");
    return c;
  }
  if (!root.IsMap()) throw ConfigError("config must be a key-value mapping", root.Mark().line + 1, root.Mark().column + 1);
  bool have_experiment = false;
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    const YAML::Node& v = kv.second;
    if (key == "experiment") {
      const auto name = yaml_value<std::string>(v, key);
      auto e = experiment_from_string(name);
      if (!e) throw ConfigError("unknown experiment '" + name + "'", v.Mark().line + 1, v.Mark().column + 1);
      c.experiment = *e;
      have_experiment = true;
    } else if (key == "dimension") {
      c.dimension = yaml_value<int>(v, key);
    } else if (key == "box_radius") {
      c.box_radius = yaml_value<std::int32_t>(v, key);
    } else if (key == "thresholds") {
      if (!v.IsSequence() && !v.IsNull())
        throw ConfigError("'thresholds' must be a list", v.Mark().line + 1, v.Mark().column + 1);
      c.thresholds.clear();
      if (v.IsSequence())
        for (const auto& t : v) c.thresholds.push_back(yaml_value<std::int64_t>(t, key));
    } else if (key == "reps") {
      c.reps = yaml_value<std::int64_t>(v, key);
    } else if (key == "seed") {
      c.seed = yaml_value<std::uint64_t>(v, key);
    } else if (key == "workers") {
      c.workers = yaml_value<int>(v, key);
    } else if (key == "output_dir") {
      c.output_dir = v.IsNull() ? std::string() : yaml_value<std::string>(v, key);
    } else if (key == "fit_min") {
      c.fit_min = yaml_value<double>(v, key);
    } else if (key == "fit_max") {
      c.fit_max = yaml_value<double>(v, key);
    } else if (key == "max_seconds") {
      c.max_seconds = yaml_value<double>(v, key);
    } else {
      throw ConfigError("unknown key '" + key + "'", kv.first.Mark().line + 1, kv.first.Mark().column + 1);
    }
  }
  if (require_experiment && !have_experiment) throw ConfigError("missing required key 'experiment'");
  return c;
}

}  // namespace

RunConfig config_from_yaml(const std::string& text) { return parse_yaml(text, true); }

RunConfig config_from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_yaml(ss.str());
}

std::string config_to_yaml(const RunConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "experiment" << YAML::Value << to_string(c.experiment);
  out << YAML::Key << "dimension" << YAML::Value << c.dimension;
  out << YAML::Key << "box_radius" << YAML::Value << c.box_radius;
  out << YAML::Key << "thresholds" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (auto t : c.thresholds) out << t;
  out << YAML::EndSeq;
  out << YAML::Key << "reps" << YAML::Value << c.reps;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "workers" << YAML::Value << c.workers;
  out << YAML::Key << "output_dir" << YAML::Value << YAML::DoubleQuoted << c.output_dir;
  out << YAML::Key << "fit_min" << YAML::Value << c.fit_min;
  out << YAML::Key << "fit_max" << YAML::Value << c.fit_max;
  out << YAML::Key << "max_seconds" << YAML::Value << c.max_seconds;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

nlohmann::json config_to_json(const RunConfig& c) {
  return {{"experiment", to_string(c.experiment)},
          {"dimension", c.dimension},
          {"box_radius", c.box_radius},
          {"thresholds", c.thresholds},
          {"reps", c.reps},
          {"seed", c.seed},
          {"workers", c.workers},
          {"output_dir", c.output_dir},
          {"fit_min", c.fit_min},
          {"fit_max", c.fit_max},
          {"max_seconds", c.max_seconds}};
}

RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "experiment") {
      auto e = experiment_from_string(v.get<std::string>());
      if (!e) throw ConfigError("unknown experiment '" + v.get<std::string>() + "'");
      c.experiment = *e;
    } else if (key == "dimension") {
      c.dimension = v.get<int>();
    } else if (key == "box_radius") {
      c.box_radius = v.get<std::int32_t>();
    } else if (key == "thresholds") {
      c.thresholds = v.get<std::vector<std::int64_t>>();
    } else if (key == "reps") {
      c.reps = v.get<std::int64_t>();
    } else if (key == "seed") {
      c.seed = v.get<std::uint64_t>();
    } else if (key == "workers") {
      c.workers = v.get<int>();
    } else if (key == "output_dir") {
      c.output_dir = v.get<std::string>();
    } else if (key == "fit_min") {
      c.fit_min = v.get<double>();
    } else if (key == "fit_max") {
      c.fit_max = v.get<double>();
    } else if (key == "max_seconds") {
      c.max_seconds = v.get<double>();
    } else {
      throw ConfigError("unknown key '" + key + "'");
    }
  }
  if (!j.contains("experiment")) throw ConfigError("missing required key 'experiment'");
  return c;
}

void validate(const RunConfig& c) {
  if (c.reps <= 0) throw ConfigError("reps must be positive");
  if (c.workers < 1) throw ConfigError("workers must be at least 1");
  if (c.box_radius < 0) throw ConfigError("box_radius must be non-negative");
  if (c.max_seconds < 0) throw ConfigError("max_seconds must be non-negative");
  for (std::size_t i = 0; i < c.thresholds.size(); ++i) {
    if (c.thresholds[i] < 1) throw ConfigError("thresholds must be positive");
    if (i > 0 && c.thresholds[i] <= c.thresholds[i - 1]) throw ConfigError("thresholds must be strictly ascending");
  }
  if (c.fit_min < 0 || c.fit_max < 0 || (c.fit_max > 0 && c.fit_min > c.fit_max))
    throw ConfigError("fit range must satisfy 0 <= fit_min <= fit_max");
  const bool two_d_ok = c.experiment == Experiment::kDharCheck || c.experiment == Experiment::kVerifyBijection;
  if (c.dimension != 3 && !(two_d_ok && c.dimension == 2))
    throw ConfigError("dimension " + std::to_string(c.dimension) + " not supported by " + to_string(c.experiment));
}

std::filesystem::path resolve_output_dir(const RunConfig& c) {
  if (!c.output_dir.empty()) return c.output_dir;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return std::filesystem::path("ust3d-runs") / (to_string(c.experiment) + "-" + std::to_string(c.seed));
}

// ---------------------------------------------------------------------------

namespace {

class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }
  void text(const std::string& name, const std::string& body) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    out << body;
    if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
    if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
  }
  void json(const std::string& name, const nlohmann::json& j) { text(name, j.dump(2) + "\n"); }
  const std::vector<std::string>& files() const { return files_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

std::string plot_script(const std::vector<std::string>& csvs, const std::string& title) {
  std::ostringstream os;
  os << "# ust3d plot v1: gnuplot script over the curve CSVs in this directory\n"
     << "set datafile separator ','\n"
     << "set logscale xy\n"
     << "set xlabel 'threshold'\n"
     << "set ylabel 'exceedance frequency'\n"
     << "set title '" << title << "'\n"
     << "plot ";
  for (std::size_t i = 0; i < csvs.size(); ++i) {
    if (i) os << ", \\\n     ";
    os << "'" << csvs[i] << "' skip 3 using 1:($2/($3-$4)) with linespoints title '" << csvs[i] << "'";
  }
  os << "\n";
  return os.str();
}

std::vector<std::int64_t> or_default(const std::vector<std::int64_t>& v, std::vector<std::int64_t> d) {
  return v.empty() ? d : v;
}

struct Outcome {
  nlohmann::json report = nlohmann::json::object();
  nlohmann::json resolved = nlohmann::json::object();
  bool valid = true;
  std::vector<std::string> failures;
  bool stopped_early = false;
  std::int64_t reps_completed = 0;
  nlohmann::json censoring = nullptr;

  void fail(const std::string& why) {
    valid = false;
    failures.push_back(why);
  }
};

nlohmann::json fit_or_error(const SurvivalCurve& c, FitRange range, Outcome& out) {
  try {
    return fit_json(fit_exponent(c, range));
  } catch (const InsufficientData& e) {
    out.fail(c.observable + ": " + e.what());
    return {{"error", e.what()}, {"range", {range.lo, range.hi}}};
  }
}

void check_censoring(const SurvivalCurve& c, FitRange range, Outcome& out, nlohmann::json& stats) {
  double worst = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (range.contains(static_cast<double>(c.thresholds[i]))) worst = std::max(worst, c.censored_fraction(i));
  stats[c.observable] = {{"max_censored_fraction_in_window", worst}};
  if (worst > 0.01) out.fail(c.observable + ": censoring above 1% inside the fit window");
}

FitRange window(const RunConfig& c, double lo, double hi) {
  return {c.fit_min > 0 ? c.fit_min : lo, c.fit_max > 0 ? c.fit_max : hi};
}

nlohmann::json range_json(FitRange r) { return {r.lo, r.hi}; }

const std::vector<std::int64_t> kRadii = {1, 2, 4, 8, 11, 16, 23, 32, 45, 64};
const std::vector<std::int64_t> kBetaRadii = {1, 2, 4, 8, 11, 16, 23, 32, 45, 64, 90, 128};

void run_verify_oracle(const RunConfig&, ArtifactWriter& w, Outcome& out) {
  nlohmann::json instances = nlohmann::json::array();
  for (const auto& [name, dom] : shipped_instances()) {
    const auto inst = make_tiny_instance(name, dom);
    nlohmann::json entry{{"instance", name}, {"sites", dom.size()}};
    const auto br = verify_bijection(inst);
    entry["bijection"] = bijection_json(br);
    if (!br.passed()) out.fail(name + ": bijection check failed");
    const Point o = Point::origin(dom.dim());
    if (dom.contains(o) && dom.wired_degree(o) == 0) {
      const auto fw = verify_first_wave_identity(inst);
      entry["first_wave"] = first_wave_json(fw);
      if (!fw.passed()) out.fail(name + ": first-wave identity failed");
    }
    instances.push_back(entry);
  }
  out.report["instances"] = instances;
  const auto g = green_finite(single_site(), Point::origin(), Point::origin());
  out.report["green_single_site"] = rational_string(*g.exact);
  if (*g.exact != mpq_class(1, 6)) out.fail("G_{0}(0,0) != 1/6");
  w.json("report.json", out.report);
}

void run_verify_bijection(const RunConfig& c, const RunControl& control, ArtifactWriter& w, Outcome& out) {
  nlohmann::json exhaustive = nlohmann::json::array();
  if (c.dimension == 3) {
    for (const auto& [name, dom] : shipped_instances()) {
      if (dom.size() > 7) continue;
      const auto br = verify_bijection(make_tiny_instance(name, dom));
      exhaustive.push_back(bijection_json(br));
      if (!br.passed()) out.fail(name + ": exhaustive bijection check failed");
    }
  }
  const std::int32_t radius = c.box_radius > 0 ? c.box_radius : 2;
  out.resolved["box_radius"] = radius;
  const Domain box = Domain::box(radius, c.dimension);
  struct Acc {
    std::int64_t n = 0, bad = 0;
    void merge(const Acc& o) {
      n += o.n;
      bad += o.bad;
    }
  } acc;
  const auto status = run_replicas(
      c.reps, c.workers, acc,
      [&](std::int64_t r, Acc& a) {
        const auto f = wilson_ust(box, RngSeed{c.seed, 0}.replica(static_cast<std::uint64_t>(r)));
        const auto h = md_bijection(f);
        ++a.n;
        if (!is_recurrent(h) || md_inverse(h).parent_dir != f.parent_dir) ++a.bad;
      },
      control);
  out.stopped_early = status.stopped_early;
  out.reps_completed = acc.n;
  out.report = {{"exhaustive", exhaustive},
                {"sampled", {{"box_radius", radius}, {"samples", acc.n}, {"failures", acc.bad}}}};
  if (acc.bad > 0) out.fail("sampled round trips failed");
  w.json("report.json", out.report);
}

void run_dhar(const RunConfig& c, const RunControl& control, ArtifactWriter& w, Outcome& out) {
  const std::int32_t radius = c.box_radius > 0 ? c.box_radius : 3;
  out.resolved["box_radius"] = radius;
  const Domain box = Domain::box(radius, c.dimension);
  const Point o = Point::origin(c.dimension);
  nlohmann::json checks = nlohmann::json::array();
  std::uint64_t stream = 0;
  for (const auto& x : {o, Point::axis(0, 1, c.dimension)}) {
    const auto rep = dhar_check(box, o, x, c.reps, RngSeed{c.seed, stream++}, c.workers, control);
    auto j = dhar_json(rep);
    j["v"] = o;
    j["x"] = x;
    checks.push_back(j);
    out.stopped_early |= rep.stopped_early;
    out.reps_completed = rep.reps;
    if (std::abs(rep.z) > 3.0) out.fail("Monte Carlo mean more than 3 standard errors from G_K at x=" + x.to_string());
  }
  out.report = {{"box_radius", radius}, {"checks", checks}};
  w.json("dhar.json", out.report);
}

void run_lerw(const RunConfig& c, const RunControl& control, ArtifactWriter& w, Outcome& out) {
  const bool beta = c.experiment == Experiment::kBeta;
  const auto radii = or_default(c.thresholds, beta ? kBetaRadii : kRadii);
  const std::int32_t factor = c.box_radius > 0 ? std::max<std::int32_t>(4, c.box_radius / static_cast<std::int32_t>(radii.back())) : 4;
  out.resolved["thresholds"] = radii;
  out.resolved["box_radius"] = factor * radii.back();
  const auto s = sample_lerw(radii, c.reps, RngSeed{c.seed, 0}, factor, {c.workers, control});
  out.stopped_early = s.stopped_early;
  out.reps_completed = s.reps;
  w.text("avoid.csv", s.avoid.csv());
  std::ostringstream lens;
  lens << "# ust3d-lengths v1\nradius,length_sum,length_sumsq,reps\n";
  for (std::size_t i = 0; i < radii.size(); ++i)
    lens << radii[i] << ',' << s.length_sum[i] << ',' << static_cast<long long>(s.length_sumsq[i]) << ',' << s.reps
         << '\n';
  w.text("lengths.csv", lens.str());
  const FitRange range = window(c, beta ? 16 : 8, static_cast<double>(radii.back()));
  out.resolved["fit_range"] = range_json(range);
  nlohmann::json fits;
  try {
    const auto a = alpha_fit(s, range);
    fits["alpha"] = fit_json(a);
    fits["alpha"]["alpha_hat"] = -a.slope;
  } catch (const InsufficientData& e) {
    out.fail(std::string("alpha: ") + e.what());
  }
  try {
    const auto b = beta_fit(s, range);
    fits["beta"] = fit_json(b);
    fits["beta"]["beta_hat"] = b.slope;
  } catch (const InsufficientData& e) {
    out.fail(std::string("beta: ") + e.what());
  }
  if (c.experiment == Experiment::kAlpha && fits.contains("alpha")) {
    const double a = fits["alpha"]["alpha_hat"];
    if (a < 0.30 || a > 0.45) out.fail("alpha_hat outside [0.30, 0.45]");
  }
  if (c.experiment == Experiment::kBeta && fits.contains("beta")) {
    const double b = fits["beta"]["beta_hat"];
    if (b < 1.55 || b > 1.70) out.fail("beta_hat outside [1.55, 1.70]");
  }
  out.report = fits;
  w.json("fits.json", fits);
  w.text("plot.gp", plot_script({"avoid.csv"}, to_string(c.experiment)));
}

void run_tree_tails(const RunConfig& c, const RunControl& control, ArtifactWriter& w, Outcome& out) {
  TailThresholds th = default_tree_thresholds();
  th.diam_ext = or_default(c.thresholds, th.diam_ext);
  const std::int32_t radius = c.box_radius > 0 ? c.box_radius : static_cast<std::int32_t>(4 * th.diam_ext.back());
  out.resolved["thresholds"] = th.diam_ext;
  out.resolved["box_radius"] = radius;
  const bool past = c.experiment == Experiment::kPastTails;
  const ExperimentOptions opts{c.workers, control};
  const auto t = past ? past_tails_in(th, radius, c.reps, RngSeed{c.seed, 0}, opts)
                      : zero_tree_tails_in(th, radius, c.reps, RngSeed{c.seed, 0}, opts);
  out.stopped_early = t.stopped_early;
  out.reps_completed = t.reps;
  w.text("diam_ext.csv", t.diam_ext.csv());
  w.text("diam_int.csv", t.diam_int.csv());
  w.text("volume.csv", t.volume.csv());
  const FitRange r_ext = window(c, 8, radius / 4.0);
  const FitRange r_int{32, 512};
  const FitRange r_vol{64, 16384};
  out.resolved["fit_ranges"] = {{"diam_ext", range_json(r_ext)}, {"diam_int", range_json(r_int)}, {"volume", range_json(r_vol)}};
  nlohmann::json fits{{"diam_ext", fit_or_error(t.diam_ext, r_ext, out)},
                      {"diam_int", fit_or_error(t.diam_int, r_int, out)},
                      {"volume", fit_or_error(t.volume, r_vol, out)}};
  nlohmann::json cens{{"censored_samples", t.censored}, {"reps", t.reps}};
  check_censoring(t.diam_ext, r_ext, out, cens);
  check_censoring(t.diam_int, r_int, out, cens);
  check_censoring(t.volume, r_vol, out, cens);
  out.censoring = cens;
  out.report = fits;
  w.json("fits.json", fits);
  w.text("plot.gp", plot_script({"diam_ext.csv", "diam_int.csv", "volume.csv"}, to_string(c.experiment)));
}

void run_avalanche(const RunConfig& c, const RunControl& control, ArtifactWriter& w, Outcome& out) {
  AvalancheThresholds th = default_avalanche_thresholds();
  th.diam_ext = or_default(c.thresholds, th.diam_ext);
  const std::int32_t radius = c.box_radius > 0 ? c.box_radius : static_cast<std::int32_t>(4 * th.diam_ext.back());
  out.resolved["thresholds"] = th.diam_ext;
  out.resolved["box_radius"] = radius;
  const auto t = avalanche_tails_in(th, radius, c.reps, RngSeed{c.seed, 0}, {c.workers, control});
  out.stopped_early = t.stopped_early;
  out.reps_completed = t.reps;
  w.text("diam_ext.csv", t.diam_ext.csv());
  w.text("cluster_size.csv", t.cluster_size.csv());
  w.text("topplings.csv", t.topplings.csv());
  const FitRange r_ext = window(c, 8, radius / 4.0);
  const FitRange r_n{64, 65536};
  out.resolved["fit_ranges"] = {{"diam_ext", range_json(r_ext)}, {"cluster_size", range_json(r_n)}, {"topplings", range_json(r_n)}};
  nlohmann::json fits{{"diam_ext", fit_or_error(t.diam_ext, r_ext, out)},
                      {"cluster_size", fit_or_error(t.cluster_size, r_n, out)},
                      {"topplings", fit_or_error(t.topplings, r_n, out)}};
  nlohmann::json cens{{"censored_samples", t.censored}, {"reps", t.reps}};
  check_censoring(t.diam_ext, r_ext, out, cens);
  check_censoring(t.cluster_size, r_n, out, cens);
  check_censoring(t.topplings, r_n, out, cens);
  out.censoring = cens;
  out.report = fits;
  w.json("fits.json", fits);
  w.text("plot.gp", plot_script({"diam_ext.csv", "cluster_size.csv", "topplings.csv"}, to_string(c.experiment)));
}

void run_first_wave(const RunConfig& c, const RunControl& control, ArtifactWriter& w, Outcome& out) {
  const auto radii = or_default(c.thresholds, {1, 2, 4, 8});
  const std::int32_t radius = c.box_radius > 0 ? c.box_radius : 32;
  out.resolved["thresholds"] = radii;
  out.resolved["box_radius"] = radius;
  const auto cmp = first_wave_vs_tree(radii, radius, c.reps, RngSeed{c.seed, 0}, {c.workers, control});
  out.stopped_early = cmp.stopped_early;
  out.reps_completed = cmp.wave.total;
  w.text("first_wave.csv", cmp.wave.csv());
  w.text("zero_tree.csv", cmp.tree.csv());
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const bool evaluated = cmp.wave.counts[i] >= 100 && cmp.tree.counts[i] >= 100;
    rows.push_back({{"threshold", radii[i]},
                    {"ratio", std::isnan(cmp.ratio[i]) ? nlohmann::json(nullptr) : nlohmann::json(cmp.ratio[i])},
                    {"sigma", std::isnan(cmp.sigma[i]) ? nlohmann::json(nullptr) : nlohmann::json(cmp.sigma[i])},
                    {"evaluated", evaluated},
                    {"within_3sigma", static_cast<bool>(cmp.within_3sigma[i])}});
    if (evaluated && !cmp.within_3sigma[i])
      out.fail("ratio at threshold " + std::to_string(radii[i]) + " more than 3 sigma from 1");
  }
  out.report = {{"green00", cmp.green00}, {"box_radius", radius}, {"ratios", rows}};
  w.json("ratio.json", out.report);
  w.text("plot.gp", plot_script({"first_wave.csv", "zero_tree.csv"}, to_string(c.experiment)));
}

nlohmann::json manifest(const RunConfig& c, const std::string& status, const Outcome* o, int exit_code,
                        const std::vector<std::string>& files) {
  nlohmann::json m{{"format", "ust3d-manifest"},
                   {"version", 1},
                   {"code_version", UST3D_VERSION},
                   {"status", status},
                   {"config", config_to_json(c)}};
  if (o) {
    m["resolved"] = o->resolved;
    m["reps_completed"] = o->reps_completed;
    m["censoring"] = o->censoring;
    m["failures"] = o->failures;
    m["exit_code"] = exit_code;
  }
  m["outputs"] = files;
  return m;
}

}  // namespace

RunResult run(const RunConfig& config, const RunControl& control) {
  RunResult res;
  try {
    validate(config);
  } catch (const ConfigError& e) {
    res.exit_code = kExitConfigError;
    res.message = e.what();
    res.report = {{"error", "config"}, {"message", e.what()}};
    return res;
  }
  res.output_dir = resolve_output_dir(config);
  ArtifactWriter w(res.output_dir);
  w.json("manifest.json", manifest(config, "running", nullptr, 0, {}));

  Outcome out;
  RunControl ctl = control;
  if (config.max_seconds > 0) {
    const auto budget = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(config.max_seconds));
    ctl.deadline = std::min(ctl.deadline, budget);
  }
  try {
    switch (config.experiment) {
      case Experiment::kVerifyOracle: run_verify_oracle(config, w, out); break;
      case Experiment::kVerifyBijection: run_verify_bijection(config, ctl, w, out); break;
      case Experiment::kDharCheck: run_dhar(config, ctl, w, out); break;
      case Experiment::kAlpha:
      case Experiment::kBeta: run_lerw(config, ctl, w, out); break;
      case Experiment::kPastTails:
      case Experiment::kZeroTreeTails: run_tree_tails(config, ctl, w, out); break;
      case Experiment::kAvalancheTails: run_avalanche(config, ctl, w, out); break;
      case Experiment::kFirstWaveRatio: run_first_wave(config, ctl, w, out); break;
    }
  } catch (const std::exception& e) {
    out.fail(std::string("error: ") + e.what());
  }

  std::string status = "complete";
  if (out.stopped_early) {
    status = "incomplete";
    res.exit_code = kExitResourceLimit;
    res.message = "stopped before all replicas finished";
  } else if (!out.valid) {
    res.exit_code = kExitValidationFailure;
    res.message = "validation failed";
  }
  if (res.exit_code != kExitOk) {
    w.json("failure.json", {{"exit_code", res.exit_code}, {"status", status}, {"message", res.message},
                            {"failures", out.failures}});
  }
  auto files = w.files();
  files.erase(std::remove(files.begin(), files.end(), "manifest.json"), files.end());
  w.json("manifest.json", manifest(config, status, &out, res.exit_code, files));
  res.report = out.report;
  if (res.message.empty()) res.message = status;
  return res;
}

// ---------------------------------------------------------------------------

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_interrupt(int) { g_interrupted.store(true); }

struct Overrides {
  std::string config_path;
  std::optional<int> dimension;
  std::optional<std::int32_t> box_radius;
  std::vector<std::int64_t> thresholds;
  std::optional<std::int64_t> reps;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> output_dir;
  std::optional<double> fit_min, fit_max, max_seconds;
};

void add_run_options(CLI::App* sub, Overrides& o) {
  sub->add_option("-c,--config", o.config_path, "YAML config file");
  sub->add_option("--dimension", o.dimension, "Lattice dimension");
  sub->add_option("--box-radius", o.box_radius, "Box radius (0 = experiment default)");
  sub->add_option("--thresholds", o.thresholds, "Ascending thresholds, comma separated")->delimiter(',');
  sub->add_option("--reps", o.reps, "Replica count");
  sub->add_option("--seed", o.seed, "Master seed");
  sub->add_option("--workers", o.workers, "Worker threads");
  sub->add_option("-o,--output-dir", o.output_dir, "Artifact directory");
  sub->add_option("--fit-min", o.fit_min, "Lower end of the fit window");
  sub->add_option("--fit-max", o.fit_max, "Upper end of the fit window");
  sub->add_option("--max-seconds", o.max_seconds, "Wall-clock budget");
}

RunConfig build_config(const Overrides& o, std::optional<Experiment> experiment) {
  RunConfig c;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw ConfigError("cannot read config file '" + o.config_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    c = parse_yaml(ss.str(), !experiment.has_value());
  } else if (!experiment) {
    throw ConfigError("missing required key 'experiment'");
  }
  if (experiment) c.experiment = *experiment;
  if (o.dimension) c.dimension = *o.dimension;
  if (o.box_radius) c.box_radius = *o.box_radius;
  if (!o.thresholds.empty()) c.thresholds = o.thresholds;
  if (o.reps) c.reps = *o.reps;
  if (o.seed) c.seed = *o.seed;
  if (o.workers) c.workers = *o.workers;
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (o.fit_min) c.fit_min = *o.fit_min;
  if (o.fit_max) c.fit_max = *o.fit_max;
  if (o.max_seconds) c.max_seconds = *o.max_seconds;
  return c;
}

int report_config_error(const ConfigError& e) {
  nlohmann::json j{{"error", "config"}, {"message", e.what()}};
  if (e.line() > 0) {
    j["line"] = e.line();
    j["column"] = e.column();
  }
  std::cerr << j.dump() << "\n";
  return kExitConfigError;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"ust3d: uniform spanning trees, loop-erased walks and sandpiles on wired boxes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", UST3D_VERSION);

  Overrides o;
  std::vector<std::pair<CLI::App*, Experiment>> subs;
  for (const auto& [e, name] : experiment_table()) {
    auto* sub = app.add_subcommand(name, "Run the " + name + " experiment");
    add_run_options(sub, o);
    subs.emplace_back(sub, e);
  }
  auto* run_cmd = app.add_subcommand("run", "Run the experiment named in a config file");
  add_run_options(run_cmd, o);
  std::string manifest_path;
  auto* rerun_cmd = app.add_subcommand("rerun", "Re-run an experiment from its manifest.json");
  rerun_cmd->add_option("manifest", manifest_path, "Path to manifest.json")->required();
  rerun_cmd->add_option("-o,--output-dir", o.output_dir, "Artifact directory");
  std::string print_name;
  auto* print_cmd = app.add_subcommand("print-config", "Print the default config for an experiment");
  print_cmd->add_option("experiment", print_name, "Experiment name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfigError;
  }

  RunConfig config;
  try {
    if (print_cmd->parsed()) {
      auto e = experiment_from_string(print_name);
      if (!e) throw ConfigError("unknown experiment '" + print_name + "'");
      config.experiment = *e;
      std::cout << config_to_yaml(config);
      return kExitOk;
    }
    if (rerun_cmd->parsed()) {
      std::ifstream in(manifest_path);
      if (!in) throw ConfigError("cannot read manifest '" + manifest_path + "'");
      nlohmann::json m;
      try {
        m = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
      }
      if (m.value("format", "") != "ust3d-manifest") throw ConfigError("not a ust3d manifest");
      config = config_from_json(m.at("config"));
      if (o.output_dir) config.output_dir = *o.output_dir;
    } else if (run_cmd->parsed()) {
      config = build_config(o, std::nullopt);
    } else {
      for (auto& [sub, e] : subs)
        if (sub->parsed()) config = build_config(o, e);
    }
  } catch (const ConfigError& e) {
    return report_config_error(e);
  }

  std::signal(SIGINT, on_interrupt);
  std::signal(SIGTERM, on_interrupt);
  RunControl control;
  control.cancel = &g_interrupted;
  const RunResult r = run(config, control);
  if (r.exit_code == kExitConfigError) {
    std::cerr << r.report.dump() << "\n";
    return r.exit_code;
  }
  nlohmann::json summary{{"exit_code", r.exit_code},
                         {"status", r.message},
                         {"output_dir", r.output_dir.string()},
                         {"report", r.report}};
  (r.exit_code == kExitOk ? std::cout : std::cerr) << summary.dump(2) << "\n";
  return r.exit_code;
}

}  // namespace ust3d
