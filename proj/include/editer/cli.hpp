#pragma once

// Command-line driver. Subcommands:
//
//   simulate  --scenario FILE | --preset NAME, --out FILE.eds
//   correct   --in FILE.eds --out FILE.eds [config flags] [--diagnostics FILE.json]
//   evaluate  --uncorrected FILE.eds --corrected FILE.eds --roi r0:r1,c0:c1 [--report FILE.csv]
//   sweep     --scenario FILE | --preset NAME | --in FILE.eds, list-valued config flags, --report FILE.csv
//   inspect   --in FILE.eds | --diagnostics FILE.json
//
// Config flags override a --config JSON file. The worker count for
// partition-parallel work comes from EDITER_WORKERS (default: hardware threads).
//
// Exit codes: 0 ok, 2 usage, 3 I/O or invalid input data, 4 numerical failure.
// Failures print exactly one line to stderr: "error: <kind>: <message>".

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include <CLI11.hpp>

#include "editer/core.hpp"
#include "editer/io.hpp"
#include "editer/metrics.hpp"
#include "editer/presets.hpp"
#include "editer/sim.hpp"

namespace editer {

enum ExitCode : int {
  exit_ok = 0,
  exit_usage = 2,
  exit_io = 3,
  exit_numerical = 4,
};

inline int exit_code_for(ErrorKind kind)
{
  switch (kind) {
  case ErrorKind::invalid_argument:
    return exit_usage;
  case ErrorKind::validation:
  case ErrorKind::io:
    return exit_io;
  case ErrorKind::numerical:
    return exit_numerical;
  }
  return exit_numerical;
}

/// Reads EDITER_WORKERS; unset or empty means one worker per hardware thread.
inline int worker_count()
{
  const char* env = std::getenv("EDITER_WORKERS");
  if (env == nullptr || *env == '\0')
    return std::max(1u, std::thread::hardware_concurrency());
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1 || v > 4096)
    fail(ErrorKind::invalid_argument, std::string("EDITER_WORKERS must be a positive integer (got '") + env + "')");
  return static_cast<int>(v);
}

// ---------------------------------------------------------------------------
// Metrics report

/// One CSV row per (partition, config). Column order is part of the interface.
struct MetricsRecord {
  std::string scenario;
  int partition = 0;
  std::optional<CorrectionConfig> config;
  std::optional<Index> n_groups;
  std::vector<Index> group_sizes;
  std::optional<double> nrmse_uncorrected;
  std::optional<double> nrmse_corrected;
  double sigma_uncorrected = 0.0;
  double sigma_corrected = 0.0;
  double emi_removed_percent = 0.0;
  bool overcorrected = false;
  std::vector<double> group_residuals; // ‖s − E·h‖ / ‖s‖ per group
  std::optional<double> wall_seconds;
};

inline const std::vector<std::string>& metrics_columns()
{
  static const std::vector<std::string> cols = {
      "scenario",          "partition",         "dkx",
      "dky",               "cluster_threshold", "first_pass_window",
      "rank_cutoff",       "n_groups",          "group_sizes",
      "nrmse_uncorrected", "nrmse_corrected",   "nrmse_improvement_percent",
      "sigma_uncorrected", "sigma_corrected",   "emi_removed_percent",
      "overcorrected",     "group_residuals",   "wall_seconds"};
  return cols;
}

inline std::vector<std::string> metrics_fields(const MetricsRecord& r)
{
  auto opt = [](const auto& v) { return v ? format_double(static_cast<double>(*v)) : std::string(); };
  auto join = [](const auto& xs) {
    std::string s;
    for (const auto& x : xs) {
      if constexpr (std::is_integral_v<std::decay_t<decltype(x)>>)
        s += (s.empty() ? "" : ";") + std::to_string(x);
      else
        s += (s.empty() ? "" : ";") + format_double(x);
    }
    return s;
  };
  std::vector<std::string> f;
  f.push_back(r.scenario);
  f.push_back(std::to_string(r.partition));
  if (r.config) {
    f.push_back(std::to_string(r.config->dkx));
    f.push_back(std::to_string(r.config->dky));
    f.push_back(format_double(r.config->cluster_threshold));
    f.push_back(std::to_string(r.config->first_pass_window));
    f.push_back(format_double(r.config->rank_cutoff));
  } else {
    f.insert(f.end(), 5, std::string());
  }
  f.push_back(r.n_groups ? std::to_string(*r.n_groups) : std::string());
  f.push_back(join(r.group_sizes));
  f.push_back(opt(r.nrmse_uncorrected));
  f.push_back(opt(r.nrmse_corrected));
  f.push_back(r.nrmse_uncorrected && r.nrmse_corrected && *r.nrmse_uncorrected > 0.0
                  ? format_double(nrmse_improvement(*r.nrmse_uncorrected, *r.nrmse_corrected))
                  : std::string());
  f.push_back(format_double(r.sigma_uncorrected));
  f.push_back(format_double(r.sigma_corrected));
  f.push_back(format_double(r.emi_removed_percent));
  f.push_back(r.overcorrected ? "1" : "0");
  f.push_back(join(r.group_residuals));
  f.push_back(opt(r.wall_seconds));
  return f;
}

inline std::string metrics_csv(const std::vector<MetricsRecord>& records)
{
  std::string out = csv_line(metrics_columns());
  for (const auto& r : records)
    out += csv_line(metrics_fields(r));
  return out;
}

inline MetricsRecord measure(const AcquisitionDataset& uncorrected, const CMatrix& corrected_primary,
                             const std::optional<CMatrix>& reference, const RoiSpec& roi)
{
  MetricsRecord rec;
  const auto un = reconstruct(uncorrected.primary);
  const auto co = reconstruct(corrected_primary);
  const auto m2 = emi_removal(un, co, roi);
  rec.sigma_uncorrected = m2.sigma_uncorrected;
  rec.sigma_corrected = m2.sigma_corrected;
  rec.emi_removed_percent = m2.percent;
  rec.overcorrected = m2.overcorrected;
  if (reference) {
    const auto ref = reconstruct(*reference);
    rec.nrmse_uncorrected = nrmse(un, ref);
    rec.nrmse_corrected = nrmse(co, ref);
  }
  return rec;
}

inline void fill_from_result(MetricsRecord& rec, const CorrectionResult& res, const CorrectionConfig& cfg)
{
  rec.config = cfg;
  rec.n_groups = res.plan.group_count();
  rec.group_sizes = res.plan.group_sizes();
  for (const auto& g : res.diagnostics.groups)
    rec.group_residuals.push_back(g.signal_norm > 0.0 ? g.residual_norm / g.signal_norm : 0.0);
  rec.wall_seconds = res.diagnostics.total_seconds;
}

// ---------------------------------------------------------------------------
// Diagnostics sidecar

namespace detail {

// Lines as inclusive [first, last] runs.
inline Json line_runs(const std::vector<Index>& lines)
{
  Json runs = Json::array();
  for (std::size_t i = 0; i < lines.size();) {
    std::size_t j = i;
    while (j + 1 < lines.size() && lines[j + 1] == lines[j] + 1)
      ++j;
    runs.push_back(Json::array({lines[i], lines[j]}));
    i = j + 1;
  }
  return runs;
}

} // namespace detail

inline Json diagnostics_json(const CorrectionResult& res, int partition)
{
  Json p;
  p["partition"] = partition;
  p["n_groups"] = res.plan.group_count();
  p["groups"] = Json::array();
  for (std::size_t g = 0; g < res.plan.groups.size(); ++g) {
    const auto& d = res.diagnostics.groups[g];
    p["groups"].push_back({{"lines", detail::line_runs(res.plan.groups[g].lines)},
                           {"line_count", res.plan.groups[g].lines.size()},
                           {"residual_norm", d.residual_norm},
                           {"signal_norm", d.signal_norm},
                           {"rank", d.rank}});
  }
  p["seconds"] = {{"first_pass", res.diagnostics.first_pass_seconds},
                  {"clustering", res.diagnostics.clustering_seconds},
                  {"correction", res.diagnostics.correction_seconds},
                  {"total", res.diagnostics.total_seconds}};
  return p;
}

// ---------------------------------------------------------------------------
// Driver

namespace detail {

struct ConfigFlags {
  std::string config_file;
  std::optional<int> dkx;
  std::optional<int> dky;
  std::optional<int> w1;
  std::optional<double> threshold;
  std::optional<double> rank_cutoff;
  std::optional<int> max_groups;
  std::optional<std::string> method;
  bool static_fit = false;

  CorrectionConfig resolve() const
  {
    CorrectionConfig cfg;
    if (!config_file.empty())
      cfg = read_config(config_file);
    if (dkx)
      cfg.dkx = *dkx;
    if (dky)
      cfg.dky = *dky;
    if (w1)
      cfg.first_pass_window = *w1;
    if (threshold)
      cfg.cluster_threshold = *threshold;
    if (rank_cutoff)
      cfg.rank_cutoff = *rank_cutoff;
    if (max_groups)
      cfg.max_groups = *max_groups;
    if (method) {
      try {
        cfg.method = enum_from(cluster_methods, *method, "--method");
      } catch (const Error& e) {
        fail(ErrorKind::invalid_argument, e.what());
      }
    }
    if (static_fit)
      cfg.max_groups = 1;
    const auto report = validate_config(cfg);
    if (!report.valid())
      fail(ErrorKind::invalid_argument, "invalid config: " + report.summary());
    return cfg;
  }
};

inline void add_base_config_flags(CLI::App* cmd, ConfigFlags& f)
{
  cmd->add_option("--config", f.config_file, "JSON correction config; flags override it");
  cmd->add_option("--rank-cutoff", f.rank_cutoff, "relative singular-value cutoff");
  cmd->add_option("--max-groups", f.max_groups, "cap on the number of temporal groups");
  cmd->add_option("--method", f.method, "clustering: threshold | kmeans");
  cmd->add_flag("--static", f.static_fit, "one response for the whole scan (max groups = 1)");
}

inline EmiScenario load_scenario(const std::string& file, const std::string& preset)
{
  if (!file.empty() && !preset.empty())
    fail(ErrorKind::invalid_argument, "give either --scenario or --preset, not both");
  if (file.empty() && preset.empty())
    fail(ErrorKind::invalid_argument, "one of --scenario or --preset is required");
  if (!file.empty())
    return read_scenario(file);
  auto sc = presets::by_name(preset);
  require_valid(sc);
  return sc;
}

inline std::optional<CMatrix> reference_for(const AcquisitionDataset& un, const AcquisitionDataset& co,
                                            const VolumeDataset* ref, std::size_t p)
{
  if (ref)
    return ref->partitions[p].ground_truth ? ref->partitions[p].ground_truth : std::optional(ref->partitions[p].primary);
  if (un.ground_truth)
    return un.ground_truth;
  return co.ground_truth;
}

inline std::string one_line(std::string s)
{
  for (auto& c : s)
    if (c == '\n' || c == '\r')
      c = ' ';
  return s;
}

inline void write_text(const std::string& path, const std::string& text, std::ostream& out)
{
  if (path.empty() || path == "-")
    out << text;
  else
    write_bytes(path, text);
}

inline std::string stem_of(const std::string& path) { return std::filesystem::path(path).stem().string(); }

inline void require_same_shape(const VolumeDataset& a, const VolumeDataset& b, const std::string& what)
{
  if (a.partitions.size() != b.partitions.size() || a.readout_samples() != b.readout_samples() ||
      a.pe_lines() != b.pe_lines())
    fail(ErrorKind::validation, what + ": partition count or matrix dims differ");
}

} // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
  CLI::App app{"EMI removal for multi-coil MR k-space data", "editer"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all");

  // simulate
  std::string sim_scenario, sim_preset, sim_out, sim_dump;
  std::optional<std::uint64_t> sim_seed;
  std::optional<int> sim_partitions;
  auto* sim = app.add_subcommand("simulate", "synthesize a dataset from a scenario");
  sim->add_option("--scenario", sim_scenario, "scenario JSON file");
  sim->add_option("--preset", sim_preset, "built-in scenario: " + [] {
    std::string s;
    for (const auto& n : presets::names())
      s += (s.empty() ? "" : ", ") + n;
    return s;
  }());
  sim->add_option("--out", sim_out, "output dataset (.eds)")->required();
  sim->add_option("--seed", sim_seed, "override the scenario seed");
  sim->add_option("--partitions", sim_partitions, "override the partition count");
  sim->add_option("--write-scenario", sim_dump, "also write the resolved scenario as JSON");

  // correct
  std::string cor_in, cor_out, cor_diag, cor_corr;
  detail::ConfigFlags cor_flags;
  auto* cor = app.add_subcommand("correct", "remove EMI from a dataset");
  cor->add_option("--in", cor_in, "input dataset")->required();
  cor->add_option("--out", cor_out, "corrected dataset")->required();
  cor->add_option("--dkx", cor_flags.dkx, "readout window (odd)");
  cor->add_option("--dky", cor_flags.dky, "phase-encode window (odd)");
  cor->add_option("--w1", cor_flags.w1, "PE lines per first-pass window");
  cor->add_option("--threshold", cor_flags.threshold, "clustering threshold r");
  detail::add_base_config_flags(cor, cor_flags);
  cor->add_option("--diagnostics", cor_diag, "sidecar JSON path (default: <out>.json)");
  cor->add_option("--correlation", cor_corr, "write each partition's correlation matrix to <prefix>_p<k>.csv");

  // evaluate
  std::string ev_un, ev_co, ev_ref, ev_roi, ev_report, ev_diag, ev_label, ev_images;
  auto* ev = app.add_subcommand("evaluate", "image metrics of a corrected dataset");
  ev->add_option("--uncorrected", ev_un, "dataset before correction")->required();
  ev->add_option("--corrected", ev_co, "dataset after correction")->required();
  ev->add_option("--reference", ev_ref, "reference dataset (default: stored ground truth)");
  ev->add_option("--roi", ev_roi, "object-free region r0:r1,c0:c1 (inclusive)")->required();
  ev->add_option("--report", ev_report, "CSV output (default: stdout)");
  ev->add_option("--diagnostics", ev_diag, "sidecar from correct, fills the config columns");
  ev->add_option("--label", ev_label, "scenario column (default: uncorrected file stem)");
  ev->add_option("--images", ev_images, "write 8-bit PGM magnitude images to <prefix>_{uncorrected,corrected}_p<k>.pgm");

  // sweep
  std::string sw_scenario, sw_preset, sw_in, sw_roi, sw_report;
  std::vector<int> sw_dkx{7}, sw_dky{1}, sw_w1{1};
  std::vector<double> sw_threshold{0.5};
  int sw_repeats = 1;
  detail::ConfigFlags sw_flags;
  auto* sw = app.add_subcommand("sweep", "metrics and timing over a grid of configs");
  sw->add_option("--scenario", sw_scenario, "scenario JSON file");
  sw->add_option("--preset", sw_preset, "built-in scenario");
  sw->add_option("--in", sw_in, "existing dataset instead of a scenario");
  sw->add_option("--dkx", sw_dkx, "comma-separated readout windows")->delimiter(',');
  sw->add_option("--dky", sw_dky, "comma-separated phase-encode windows")->delimiter(',');
  sw->add_option("--w1", sw_w1, "comma-separated first-pass window sizes")->delimiter(',');
  sw->add_option("--threshold", sw_threshold, "comma-separated thresholds")->delimiter(',');
  sw->add_option("--roi", sw_roi, "object-free region (default: the scenario's)");
  sw->add_option("--repeats", sw_repeats, "runs per config; wall time is the minimum")->check(CLI::PositiveNumber);
  sw->add_option("--report", sw_report, "CSV output (default: stdout)");
  detail::add_base_config_flags(sw, sw_flags);

  // inspect
  std::string in_file, in_diag;
  auto* ins = app.add_subcommand("inspect", "print a dataset header or a diagnostics sidecar");
  ins->add_option("--in", in_file, "dataset (.eds)");
  ins->add_option("--diagnostics", in_diag, "sidecar JSON from correct");

  std::vector<const char*> argv;
  argv.push_back("editer");
  for (const auto& a : args)
    argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << detail::one_line(e.what()) << "\n";
    return exit_usage;
  }

  try {
    if (sim->parsed()) {
      auto sc = detail::load_scenario(sim_scenario, sim_preset);
      if (sim_seed)
        sc.seed = *sim_seed;
      if (sim_partitions)
        sc.partitions = *sim_partitions;
      require_valid(sc);
      const auto vol = assemble_volume(sc);
      write_volume(vol, sim_out);
      if (!sim_dump.empty())
        write_scenario(sc, sim_dump);
      out << "wrote " << sim_out << ": " << dims_string(sc.readout_samples, sc.pe_lines) << ", " << sc.partitions
          << " partition(s), " << sc.detectors << " detector(s), ground truth\n";
      return exit_ok;
    }

    if (cor->parsed()) {
      const auto cfg = cor_flags.resolve();
      const auto vol = read_volume(cor_in);
      const auto report = validate_volume(vol);
      if (!report.valid())
        fail(ErrorKind::validation, "invalid dataset '" + cor_in + "': " + report.summary());
      const int workers = worker_count();
      const auto outcomes = run_editer_volume(vol, cfg, workers);
      for (std::size_t p = 0; p < outcomes.size(); ++p)
        if (!outcomes[p].ok())
          fail(outcomes[p].error_kind, "partition " + std::to_string(p) + ": " + outcomes[p].error);

      VolumeDataset corrected;
      Json diag;
      diag["input"] = cor_in;
      diag["output"] = cor_out;
      diag["config"] = config_to_json(cfg);
      diag["workers"] = workers;
      diag["partitions"] = Json::array();
      for (std::size_t p = 0; p < outcomes.size(); ++p) {
        const auto& res = *outcomes[p].result;
        corrected.partitions.push_back(res.corrected);
        diag["partitions"].push_back(diagnostics_json(res, static_cast<int>(p)));
        out << "partition " << p << ": N_G=" << res.plan.group_count() << " in "
            << format_double(res.diagnostics.total_seconds) << " s\n";
        if (!cor_corr.empty()) {
          const auto& c = res.diagnostics.correlation.values;
          std::string text;
          for (Index i = 0; i < c.rows(); ++i) {
            std::vector<std::string> row;
            for (Index j = 0; j < c.cols(); ++j)
              row.push_back(format_double(c(i, j)));
            text += csv_line(row);
          }
          write_bytes(cor_corr + "_p" + std::to_string(p) + ".csv", text);
        }
      }
      write_volume(corrected, cor_out);
      write_bytes(cor_diag.empty() ? cor_out + ".json" : cor_diag, diag.dump(2) + "\n");
      return exit_ok;
    }

    if (ev->parsed()) {
      const auto roi = parse_roi(ev_roi);
      const auto un = read_volume(ev_un);
      const auto co = read_volume(ev_co);
      detail::require_same_shape(un, co, "evaluate");
      std::optional<VolumeDataset> ref;
      if (!ev_ref.empty()) {
        ref = read_volume(ev_ref);
        detail::require_same_shape(un, *ref, "evaluate --reference");
      }
      std::optional<Json> diag;
      if (!ev_diag.empty())
        diag = parse_json_file(ev_diag);

      std::vector<MetricsRecord> records;
      std::vector<MagnitudeImage> un_imgs, co_imgs;
      for (std::size_t p = 0; p < un.partitions.size(); ++p) {
        const auto& u = un.partitions[p];
        const auto& c = co.partitions[p];
        auto rec = measure(u, c.primary, detail::reference_for(u, c, ref ? &*ref : nullptr, p), roi);
        rec.scenario = ev_label.empty() ? detail::stem_of(ev_un) : ev_label;
        rec.partition = static_cast<int>(p);
        if (diag) {
          try {
            rec.config = config_from_json(diag->at("config"));
            const auto& pd = diag->at("partitions").at(p);
            rec.n_groups = pd.at("n_groups").get<Index>();
            for (const auto& g : pd.at("groups")) {
              rec.group_sizes.push_back(g.at("line_count").get<Index>());
              const double s = g.at("signal_norm").get<double>();
              rec.group_residuals.push_back(s > 0.0 ? g.at("residual_norm").get<double>() / s : 0.0);
            }
            rec.wall_seconds = pd.at("seconds").at("total").get<double>();
          } catch (const Json::exception& e) {
            fail(ErrorKind::validation, "diagnostics '" + ev_diag + "' malformed: " + e.what());
          }
        }
        records.push_back(rec);
        un_imgs.push_back(reconstruct(u.primary));
        co_imgs.push_back(reconstruct(c.primary));
        if (!ev_images.empty()) {
          write_pgm(un_imgs.back(), ev_images + "_uncorrected_p" + std::to_string(p) + ".pgm");
          write_pgm(co_imgs.back(), ev_images + "_corrected_p" + std::to_string(p) + ".pgm");
        }
      }
      detail::write_text(ev_report, metrics_csv(records), out);
      if (!ev_report.empty() && ev_report != "-") {
        const auto vol_m2 = emi_removal_volume(un_imgs, co_imgs, roi);
        out << "EMI removed: " << format_double(vol_m2.percent) << " %" << (vol_m2.overcorrected ? " (overcorrected)" : "")
            << " over " << records.size() << " partition(s)\n";
      }
      return exit_ok;
    }

    if (sw->parsed()) {
      const int sources = int(!sw_scenario.empty()) + int(!sw_preset.empty()) + int(!sw_in.empty());
      if (sources != 1)
        fail(ErrorKind::invalid_argument, "sweep needs exactly one of --scenario, --preset, --in");
      VolumeDataset vol;
      std::optional<RoiSpec> roi;
      std::string label;
      if (!sw_in.empty()) {
        vol = read_volume(sw_in);
        label = detail::stem_of(sw_in);
      } else {
        const auto sc = detail::load_scenario(sw_scenario, sw_preset);
        vol = assemble_volume(sc);
        roi = sc.roi;
        label = sc.id.empty() ? detail::stem_of(sw_scenario) : sc.id;
      }
      if (!sw_roi.empty())
        roi = parse_roi(sw_roi);
      if (!roi)
        fail(ErrorKind::invalid_argument, "sweep needs --roi (the input carries no suggested region)");
      const auto report = validate_volume(vol);
      if (!report.valid())
        fail(ErrorKind::validation, "invalid dataset: " + report.summary());

      const auto base = sw_flags.resolve();
      const int workers = worker_count();
      std::vector<MetricsRecord> records;
      for (int dkx : sw_dkx)
        for (int dky : sw_dky)
          for (int w1 : sw_w1)
            for (double r : sw_threshold) {
              CorrectionConfig cfg = base;
              cfg.dkx = dkx;
              cfg.dky = dky;
              cfg.first_pass_window = w1;
              cfg.cluster_threshold = r;
              const auto cr = validate_config(cfg, vol.pe_lines());
              if (!cr.valid())
                fail(ErrorKind::invalid_argument, "invalid config: " + cr.summary());
              std::vector<PartitionOutcome> best;
              for (int rep = 0; rep < sw_repeats; ++rep) {
                auto outcomes = run_editer_volume(vol, cfg, workers);
                for (std::size_t p = 0; p < outcomes.size(); ++p)
                  if (!outcomes[p].ok())
                    fail(outcomes[p].error_kind, "partition " + std::to_string(p) + ": " + outcomes[p].error);
                if (best.empty()) {
                  best = std::move(outcomes);
                  continue;
                }
                for (std::size_t p = 0; p < outcomes.size(); ++p)
                  best[p].result->diagnostics.total_seconds = std::min(best[p].result->diagnostics.total_seconds,
                                                                        outcomes[p].result->diagnostics.total_seconds);
              }
              for (std::size_t p = 0; p < best.size(); ++p) {
                const auto& u = vol.partitions[p];
                const auto& res = *best[p].result;
                auto rec = measure(u, res.corrected.primary, u.ground_truth, *roi);
                rec.scenario = label;
                rec.partition = static_cast<int>(p);
                fill_from_result(rec, res, cfg);
                records.push_back(rec);
              }
            }
      detail::write_text(sw_report, metrics_csv(records), out);
      return exit_ok;
    }

    if (ins->parsed()) {
      if (in_file.empty() == in_diag.empty())
        fail(ErrorKind::invalid_argument, "inspect needs exactly one of --in, --diagnostics");
      if (!in_file.empty()) {
        const auto h = read_header(in_file);
        const auto vol = read_volume(in_file);
        out << "file: " << in_file << "\n"
            << "version: " << h.version << "\n"
            << "readout_samples: " << h.readout_samples << "\n"
            << "pe_lines: " << h.pe_lines << "\n"
            << "partitions: " << h.partitions << "\n"
            << "detectors: " << h.detectors << "\n"
            << "ground_truth: " << (h.has_ground_truth() ? "yes" : "no") << "\n";
        for (std::size_t p = 0; p < vol.partitions.size(); ++p) {
          const auto& ds = vol.partitions[p];
          out << "partition " << p << ": primary_norm=" << format_double(ds.primary.norm());
          for (std::size_t d = 0; d < ds.detectors.size(); ++d)
            out << " detector" << d + 1 << "_norm=" << format_double(ds.detectors[d].norm());
          const auto rep = validate_dataset(ds);
          out << " valid=" << (rep.valid() ? "yes" : "no: " + rep.summary()) << "\n";
        }
      } else {
        const auto d = parse_json_file(in_diag);
        try {
          out << "config: " << d.at("config").dump() << "\n";
          for (const auto& p : d.at("partitions")) {
            out << "partition " << p.at("partition").get<int>() << ": N_G=" << p.at("n_groups").get<int>()
                << " total_seconds=" << format_double(p.at("seconds").at("total").get<double>()) << "\n";
            for (const auto& g : p.at("groups"))
              out << "  lines " << g.at("lines").dump() << " rank=" << g.at("rank").get<Index>()
                  << " residual=" << format_double(g.at("residual_norm").get<double>()) << "\n";
          }
        } catch (const Json::exception& e) {
          fail(ErrorKind::validation, "diagnostics '" + in_diag + "' malformed: " + e.what());
        }
      }
      return exit_ok;
    }
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << detail::one_line(e.what()) << "\n";
    return exit_code_for(e.kind());
  } catch (const std::bad_alloc&) {
    err << "error: numerical: out of memory\n";
    return exit_numerical;
  } catch (const std::exception& e) {
    err << "error: io: " << detail::one_line(e.what()) << "\n";
    return exit_io;
  }
  return exit_usage;
}

inline int run_cli(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
  return run_cli(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

} // namespace editer
