#include "cli_commands.hpp"

#include "csv.hpp"
#include "snseg/dgp.hpp"
#include "snseg/functionals.hpp"
#include "snseg/metrics.hpp"
#include "snseg/refinement.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>

namespace snseg::cli {

namespace {

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct ResolvedThreshold {
  double value = 0.0;
  std::string source;
  std::string key;
};

std::filesystem::path cache_path(const std::string& cache) {
  return cache.empty() ? default_cache_path() : std::filesystem::path(cache);
}

class ThresholdResolver {
 public:
  ThresholdResolver(const ThresholdOptions& opt, int jobs)
      : opt_(opt), jobs_(jobs), path_(cache_path(opt.cache)), table_(load_with_cache(path_)) {}

  const CriticalValueTable& table() const { return table_; }
  const std::filesystem::path& path() const { return path_; }

  ResolvedThreshold resolve(Family family, double epsilon, int d, bool allow_explicit = true) {
    if (allow_explicit && opt_.threshold) return {*opt_.threshold, "explicit", ""};
    const CriticalValueKey key{family, epsilon, d, opt_.level};
    if (const auto* e = table_.find(key)) return {e->threshold, e->provenance.source, key.canonical()};
    if (!opt_.auto_simulate) {
      throw CommandError("no critical value for " + key.canonical() + "; run `snseg critval simulate --family " +
                         to_string(family) + " --epsilon " + shortest(epsilon) + " --d " + std::to_string(d) +
                         " --level " + shortest(opt_.level) + "` or pass --threshold");
    }
    const double value = simulate(epsilon, d, opt_.level, family, opt_.sim_n, opt_.sim_reps, opt_.sim_seed, jobs_);
    const CriticalValueEntry entry{key, value, Provenance{"simulated", opt_.sim_n, opt_.sim_reps, opt_.sim_seed}};
    append_to_cache(path_, entry);
    table_.insert(entry);
    return {value, "simulated", key.canonical()};
  }

 private:
  const ThresholdOptions& opt_;
  int jobs_;
  std::filesystem::path path_;
  CriticalValueTable table_;
};

Json window_json(const std::optional<Window>& w) {
  if (!w) return nullptr;
  return Json::array({w->t1, w->t2});
}

Json relative_json(const ChangePointSet& cps) {
  Json out = Json::array();
  for (double v : relative_changepoints(cps)) out.push_back(v);
  return out;
}

Json provenance_json(const Provenance& p) {
  Json out;
  out["source"] = p.source;
  if (p.source == "simulated") {
    out["n_sim"] = p.n_sim;
    out["reps"] = p.reps;
    out["seed"] = p.seed;
  }
  return out;
}

double decay_or_default(double decay) { return decay > 0.0 ? decay : std::pow(0.5, 0.25); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CommandError("cannot write " + path.string());
  out << text;
  if (!out) throw CommandError("failed writing " + path.string());
}

}  // namespace

Family family_for(Method m) {
  switch (m) {
    case Method::sncp:
      return Family::nested;
    case Method::snlocal:
      return Family::local;
    default:
      return Family::single_cp;
  }
}

Json cmd_detect(const DetectOptions& opt, int jobs) {
  const TimeSeries series = read_csv(opt.input, opt.header);
  const FunctionalSpec spec = parse_functional(opt.functional);
  spec.validate(series.p());
  const int d = spec.output_dim(series.p());

  DetectionConfig cfg;
  cfg.epsilon = opt.epsilon;
  cfg.functional = spec;
  cfg.method = parse_method(opt.method);
  cfg.wbs_intervals = opt.wbs_intervals;
  cfg.sbs_decay = decay_or_default(opt.sbs_decay);
  cfg.seed = opt.seed;
  cfg.record_trace = opt.trace;
  cfg.threads = jobs;

  ThresholdResolver resolver(opt.thresholds, jobs);
  const auto thr = resolver.resolve(family_for(cfg.method), opt.epsilon, d);
  cfg.threshold = thr.value;
  const int trim = opt.trim ? *opt.trim : default_trim(opt.epsilon, series.n());

  Json doc;
  doc["command"] = "detect";
  Json& c = doc["config"];
  c["input"] = opt.input;
  c["header"] = opt.header;
  c["functional"] = to_string(spec);
  c["method"] = to_string(cfg.method);
  c["epsilon"] = opt.epsilon;
  c["level"] = opt.thresholds.level;
  c["threshold"] = thr.value;
  c["threshold_source"] = thr.source;
  c["threshold_key"] = thr.key;
  c["refine"] = opt.refine;
  c["trim"] = trim;
  c["attribute"] = opt.attribute;
  c["wbs_intervals"] = cfg.wbs_intervals;
  c["sbs_decay"] = cfg.sbs_decay;
  c["seed"] = cfg.seed;
  c["cache"] = resolver.path().string();

  const DetectionResult res = detect(series, cfg);
  doc["n"] = series.n();
  doc["p"] = series.p();
  doc["d"] = d;
  doc["h"] = res.h;
  doc["changepoints"] = res.changepoints.points();
  doc["relative"] = relative_json(res.changepoints);
  Json stats = Json::array();
  for (const auto& s : res.statistics) {
    Json e;
    e["k"] = s.k;
    e["statistic"] = s.statistic;
    e["window"] = window_json(s.window);
    e["segment"] = Json::array({s.s, s.e});
    stats.push_back(std::move(e));
  }
  doc["statistics"] = std::move(stats);
  doc["notes"] = res.notes;

  ChangePointSet final_points = res.changepoints;
  if (opt.refine) {
    Json r;
    if (!res.changepoints.empty()) {
      const auto ref = refine(series, res.changepoints, RefinementConfig{trim, spec});
      final_points = ref.points;
      Json intervals = Json::array();
      for (const auto& w : ref.intervals) intervals.push_back(Json::array({w.t1, w.t2}));
      r["changepoints"] = ref.points.points();
      r["relative"] = relative_json(ref.points);
      r["intervals"] = std::move(intervals);
      r["warnings"] = ref.warnings;
    } else {
      r["changepoints"] = Json::array();
      r["relative"] = Json::array();
      r["intervals"] = Json::array();
      r["warnings"] = Json::array();
    }
    doc["refined"] = std::move(r);
  }

  if (opt.attribute) {
    std::vector<FunctionalSpec> components =
        spec.kind == FunctionalKind::multi ? spec.parts : std::vector<FunctionalSpec>{spec};
    ThresholdOptions single = opt.thresholds;
    single.threshold.reset();
    ThresholdResolver attr_resolver(single, jobs);
    for (const auto& comp : components) attr_resolver.resolve(Family::single_cp, opt.epsilon, comp.output_dim(series.p()), false);
    const auto attrs = attribute_features(series, final_points, components, attr_resolver.table(), opt.epsilon,
                                          opt.thresholds.level, trim);
    Json a = Json::array();
    for (const auto& at : attrs) {
      Json e;
      e["changepoint"] = at.changepoint;
      e["interval"] = Json::array({at.interval.t1, at.interval.t2});
      Json comps = Json::array();
      for (const auto& item : at.items) {
        Json ci;
        ci["functional"] = to_string(item.component);
        ci["d"] = item.component.output_dim(series.p());
        ci["statistic"] = item.statistic;
        ci["threshold"] = item.threshold;
        ci["flagged"] = item.flagged;
        comps.push_back(std::move(ci));
      }
      e["components"] = std::move(comps);
      a.push_back(std::move(e));
    }
    doc["attribution"] = std::move(a);
    doc["attribution_note"] = "heuristic per-component test without multiplicity correction";
  }

  if (opt.trace) {
    Json t = Json::array();
    for (const auto& node : res.trace) {
      Json e;
      e["segment"] = Json::array({node.s, node.e});
      e["depth"] = node.depth;
      e["argmax"] = node.argmax;
      e["max"] = node.max;
      e["split"] = node.split;
      e["profile"] = node.profile;
      t.push_back(std::move(e));
    }
    doc["trace"] = std::move(t);
  }
  return doc;
}

Json cmd_critval_lookup(const CritvalOptions& opt) {
  const auto path = cache_path(opt.cache);
  const auto table = load_with_cache(path);
  const CriticalValueKey key{parse_family(opt.family), opt.epsilon, opt.d, opt.level};
  const auto* e = table.find(key);
  if (!e) {
    throw CommandError("no critical value for " + key.canonical() + "; run `snseg critval simulate` for this key");
  }
  Json doc;
  doc["command"] = "critval lookup";
  doc["key"] = key.canonical();
  doc["threshold"] = e->threshold;
  doc["provenance"] = provenance_json(e->provenance);
  doc["cache"] = path.string();
  return doc;
}

Json cmd_critval_simulate(const CritvalOptions& opt, int jobs) {
  const auto path = cache_path(opt.cache);
  const CriticalValueKey key{parse_family(opt.family), opt.epsilon, opt.d, opt.level};
  const double value = simulate(opt.epsilon, opt.d, opt.level, key.family, opt.n_sim, opt.reps, opt.seed, jobs);
  const CriticalValueEntry entry{key, value, Provenance{"simulated", opt.n_sim, opt.reps, opt.seed}};
  append_to_cache(path, entry);
  Json doc;
  doc["command"] = "critval simulate";
  Json& c = doc["config"];
  c["family"] = to_string(key.family);
  c["epsilon"] = opt.epsilon;
  c["d"] = opt.d;
  c["level"] = opt.level;
  c["n_sim"] = opt.n_sim;
  c["reps"] = opt.reps;
  c["seed"] = opt.seed;
  doc["key"] = key.canonical();
  doc["threshold"] = value;
  doc["cache"] = path.string();
  return doc;
}

Json cmd_critval_export(const CritvalOptions& opt, const std::string& output) {
  const auto path = cache_path(opt.cache);
  const auto table = load_with_cache(path);
  if (!output.empty()) save_table(table, output);
  return Json::parse(serialize_table(table));
}

Json cmd_simulate(const SimulateOptions& opt) {
  if (opt.output.empty()) throw CommandError("simulate needs --output");
  const DgpPreset preset = make_preset(opt.preset);
  const Sample sample = generate(preset, opt.seed);
  const std::filesystem::path csv = opt.output;
  auto sidecar = csv;
  sidecar.replace_extension(".json");
  if (sidecar == csv) sidecar += ".json";
  write_text(csv, format_csv(sample.series));

  Json doc;
  doc["command"] = "simulate";
  Json& c = doc["config"];
  c["preset"] = preset.name;
  c["seed"] = opt.seed;
  c["output"] = csv.string();
  doc["n"] = preset.n;
  doc["p"] = preset.p;
  doc["noise"] = preset.noise;
  doc["burn_in"] = preset.burn_in;
  doc["changepoints"] = sample.truth.points();
  doc["relative"] = relative_json(sample.truth);
  doc["rng"] = "mt19937_64, Box-Muller normals";
  write_text(sidecar, doc.dump(2) + "\n");
  return doc;
}

Json cmd_benchmark(const BenchmarkOptions& opt, int jobs) {
  if (opt.reps < 1) throw CommandError("--reps must be at least 1");
  if (opt.methods.empty()) throw CommandError("--methods needs at least one method");
  const DgpPreset preset = make_preset(opt.preset);
  const FunctionalSpec spec = parse_functional(opt.functional);
  spec.validate(preset.p);
  const int d = spec.output_dim(preset.p);

  ThresholdResolver resolver(opt.thresholds, jobs);
  std::vector<MethodConfig> methods;
  Json thresholds;
  for (const auto& name : opt.methods) {
    MethodConfig mc;
    mc.label = name;
    mc.detection.method = parse_method(name);
    mc.detection.epsilon = opt.epsilon;
    mc.detection.functional = spec;
    mc.detection.wbs_intervals = opt.wbs_intervals;
    mc.detection.sbs_decay = decay_or_default(opt.sbs_decay);
    mc.detection.seed = opt.seed;
    const auto thr = resolver.resolve(family_for(mc.detection.method), opt.epsilon, d);
    mc.detection.threshold = thr.value;
    mc.refine = opt.refine;
    thresholds[name] = {{"threshold", thr.value}, {"source", thr.source}, {"key", thr.key}};
    methods.push_back(std::move(mc));
  }

  const ExperimentResult res = run_experiment(preset, methods, opt.reps, opt.seed, jobs);

  Json doc;
  doc["command"] = "benchmark";
  Json& c = doc["config"];
  c["preset"] = preset.name;
  c["methods"] = opt.methods;
  c["functional"] = to_string(spec);
  c["epsilon"] = opt.epsilon;
  c["level"] = opt.thresholds.level;
  c["thresholds"] = std::move(thresholds);
  c["reps"] = opt.reps;
  c["seed"] = opt.seed;
  c["refine"] = opt.refine;
  c["wbs_intervals"] = opt.wbs_intervals;
  c["sbs_decay"] = decay_or_default(opt.sbs_decay);
  c["cache"] = resolver.path().string();
  doc["truth"] = res.truth;

  static const char* bins[7] = {"<=-3", "-2", "-1", "0", "1", "2", ">=3"};
  std::string csv = "method,refined,le_minus3,minus2,minus1,zero,plus1,plus2,ge_plus3,correct_rate,ari,d1_x100,d2_x100,dH_x100";
  if (opt.timing) csv += ",seconds";
  csv += "\n";
  Json summary = Json::array();
  auto add_row = [&](const MethodSummary& s, bool refined) {
    const double ari_v = refined ? s.refined_mean_ari : s.mean_ari;
    const double d1 = 100.0 * (refined ? s.refined_mean_d1 : s.mean_d1);
    const double d2 = 100.0 * (refined ? s.refined_mean_d2 : s.mean_d2);
    const double dH = 100.0 * (refined ? s.refined_mean_dH : s.mean_dH);
    Json e;
    e["method"] = s.label;
    e["refined"] = refined;
    Json hist;
    for (int b = 0; b < 7; ++b) hist[bins[b]] = s.histogram[b];
    e["histogram"] = std::move(hist);
    e["correct_rate"] = s.correct_rate;
    e["ari"] = ari_v;
    e["d1_x100"] = d1;
    e["d2_x100"] = d2;
    e["dH_x100"] = dH;
    if (opt.timing) e["seconds"] = s.seconds;
    summary.push_back(std::move(e));
    csv += s.label + "," + (refined ? "true" : "false");
    for (int b = 0; b < 7; ++b) csv += "," + std::to_string(s.histogram[b]);
    for (double v : {s.correct_rate, ari_v, d1, d2, dH}) csv += "," + format_g17(v);
    if (opt.timing) csv += "," + format_g17(s.seconds);
    csv += "\n";
  };
  for (const auto& s : res.summaries) {
    add_row(s, false);
    if (s.refined) add_row(s, true);
  }
  doc["summary"] = std::move(summary);

  if (opt.replications) {
    Json reps = Json::array();
    for (const auto& rec : res.records) {
      Json e;
      e["replication"] = rec.replication;
      e["seed"] = rec.seed;
      e["method"] = opt.methods[rec.method];
      e["changepoints"] = rec.estimate;
      if (rec.refined_metrics) e["refined"] = rec.refined;
      e["ari"] = rec.metrics.ari;
      e["dH"] = rec.metrics.distances.dH;
      reps.push_back(std::move(e));
    }
    doc["replications"] = std::move(reps);
  }

  if (!opt.output_prefix.empty()) {
    write_text(opt.output_prefix + ".csv", csv);
    write_text(opt.output_prefix + ".json", doc.dump(2) + "\n");
  }
  return doc;
}

namespace {

void add_threshold_options(CLI::App* app, ThresholdOptions& t) {
  app->add_option("--level", t.level, "Confidence level used to look up the threshold")->check(CLI::Range(0.0, 1.0));
  app->add_option("--threshold", t.threshold, "Explicit threshold; bypasses the critical-value table");
  app->add_option("--cache", t.cache, "Critical-value cache file (default: $SNSEG_CACHE_DIR/critical_values.json)");
  app->add_flag("--auto-simulate", t.auto_simulate, "Simulate and cache missing critical values");
  app->add_option("--sim-n", t.sim_n, "Series length for --auto-simulate")->check(CLI::Range(500, 1 << 30));
  app->add_option("--sim-reps", t.sim_reps, "Replications for --auto-simulate")->check(CLI::Range(1000, 1 << 30));
  app->add_option("--sim-seed", t.sim_seed, "Seed for --auto-simulate");
}

void emit(const Json& doc, const std::string& output) {
  const std::string text = doc.dump(2) + "\n";
  if (output.empty() || output == "-") {
    std::cout << text;
  } else {
    write_text(output, text);
  }
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Self-normalized multiple change-point estimation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read option defaults from a TOML/INI configuration file");
  int jobs = omp_get_num_procs();
  app.add_option("--jobs", jobs, "Worker threads (1 runs serially)")->check(CLI::PositiveNumber);

  DetectOptions det;
  std::string det_output;
  auto* detect_cmd = app.add_subcommand("detect", "Estimate change-points in a CSV series");
  detect_cmd->add_option("--input", det.input, "CSV file, one row per time point")->required();
  detect_cmd->add_flag("--header", det.header, "Skip the first CSV row");
  detect_cmd->add_option("--functional", det.functional, "Target functional, e.g. mean, variance:1, covmat");
  detect_cmd->add_option("--method", det.method, "sncp, snbs, snlocal, snwbs or snsbs");
  detect_cmd->add_option("--epsilon", det.epsilon, "Window fraction")->check(CLI::Range(0.0, 1.0));
  add_threshold_options(detect_cmd, det.thresholds);
  detect_cmd->add_flag("--refine", det.refine, "Apply local CUSUM refinement");
  detect_cmd->add_option("--trim", det.trim, "Refinement trim (default ceil(epsilon n / ln n))")->check(CLI::PositiveNumber);
  detect_cmd->add_flag("--attribute", det.attribute, "Per-component attribution of each point");
  detect_cmd->add_option("--wbs-intervals", det.wbs_intervals, "Random intervals for snwbs");
  detect_cmd->add_option("--sbs-decay", det.sbs_decay, "Decay rate for snsbs (default 2^-1/4)");
  detect_cmd->add_option("--seed", det.seed, "Seed for snwbs interval draws");
  detect_cmd->add_flag("--trace", det.trace, "Include the recursion trace");
  detect_cmd->add_option("--output", det_output, "Result file (default stdout)");

  auto* critval_cmd = app.add_subcommand("critval", "Look up, simulate or export critical values");
  critval_cmd->require_subcommand(1);
  CritvalOptions cv;
  std::string export_output;
  auto add_key = [&cv](CLI::App* sub) {
    sub->add_option("--family", cv.family, "nested, single_cp or local");
    sub->add_option("--epsilon", cv.epsilon, "Window fraction");
    sub->add_option("--d", cv.d, "Functional dimension")->check(CLI::PositiveNumber);
    sub->add_option("--level", cv.level, "Quantile level")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--cache", cv.cache, "Critical-value cache file");
  };
  auto* lookup_cmd = critval_cmd->add_subcommand("lookup", "Print a stored critical value");
  add_key(lookup_cmd);
  auto* sim_cmd = critval_cmd->add_subcommand("simulate", "Simulate a critical value and add it to the cache");
  add_key(sim_cmd);
  sim_cmd->add_option("--n-sim", cv.n_sim, "Length of each null series");
  sim_cmd->add_option("--reps", cv.reps, "Number of null series");
  sim_cmd->add_option("--seed", cv.seed, "Base seed");
  auto* export_cmd = critval_cmd->add_subcommand("export", "Write the merged builtin and cached table");
  export_cmd->add_option("--cache", cv.cache, "Critical-value cache file");
  export_cmd->add_option("--output", export_output, "Destination file (default stdout)");

  SimulateOptions sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Generate a preset series as CSV plus a JSON sidecar");
  simulate_cmd->add_option("--preset", sim.preset, "Preset name, e.g. M1:d=5 or NULL:n=1024,rho=0.5")->required();
  simulate_cmd->add_option("--seed", sim.seed, "Seed");
  simulate_cmd->add_option("--output", sim.output, "CSV destination")->required();

  BenchmarkOptions bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "Replicate a preset and tabulate detection accuracy");
  bench_cmd->add_option("--preset", bench.preset, "Preset name")->required();
  bench_cmd->add_option("--methods", bench.methods, "Comma-separated methods")->delimiter(',');
  bench_cmd->add_option("--functional", bench.functional, "Target functional");
  bench_cmd->add_option("--epsilon", bench.epsilon, "Window fraction")->check(CLI::Range(0.0, 1.0));
  add_threshold_options(bench_cmd, bench.thresholds);
  bench_cmd->add_option("--reps", bench.reps, "Replications");
  bench_cmd->add_option("--seed", bench.seed, "Base seed");
  bench_cmd->add_flag("--refine", bench.refine, "Also score refined estimates");
  bench_cmd->add_option("--wbs-intervals", bench.wbs_intervals, "Random intervals for snwbs");
  bench_cmd->add_option("--sbs-decay", bench.sbs_decay, "Decay rate for snsbs");
  bench_cmd->add_flag("--timing", bench.timing, "Include wall-clock seconds (not reproducible)");
  bench_cmd->add_flag("--replications", bench.replications, "Include per-replication rows in the JSON");
  bench_cmd->add_option("--output-prefix", bench.output_prefix, "Write <prefix>.csv and <prefix>.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  omp_set_num_threads(jobs);
  try {
    if (*detect_cmd) {
      emit(cmd_detect(det, jobs), det_output);
    } else if (*lookup_cmd) {
      emit(cmd_critval_lookup(cv), "");
    } else if (*sim_cmd) {
      emit(cmd_critval_simulate(cv, jobs), "");
    } else if (*export_cmd) {
      const Json doc = cmd_critval_export(cv, export_output);
      if (export_output.empty()) emit(doc, "");
    } else if (*simulate_cmd) {
      emit(cmd_simulate(sim), "");
    } else if (*bench_cmd) {
      const Json doc = cmd_benchmark(bench, jobs);
      if (bench.output_prefix.empty()) emit(doc, "");
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace snseg::cli
