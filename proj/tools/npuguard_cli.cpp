/*
 * Copyright 2026 The npuguard Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line front end: shield sizing, single trials, campaigns, the
// bit-position sweep and plan replay.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "npuguard/report.hpp"

namespace fs = std::filesystem;
using namespace npuguard;

namespace {

constexpr int kConfigError = 2;

std::string optional_text(const std::optional<double>& v) { return v ? std::to_string(*v) : "n/a"; }

struct Options {
  std::string config;
  std::string out;
  std::string plan;
  std::uint64_t groups = 32;
  std::optional<double> rate;
  std::uint64_t trial = 0;
  std::optional<unsigned> tiles;
  std::optional<unsigned> pes;
  std::optional<std::string> mode;
  bool unprotected = false;
};

Json read_config(const Options& o) { return o.config.empty() ? Json::object() : load_json(o.config); }

void ensure_dir(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigurationError("cannot create " + dir + ": " + ec.message());
}

std::ofstream open_out(const std::string& dir, const char* name) {
  std::ofstream os(fs::path(dir) / name);
  if (!os) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
  return os;
}

void emit_json(const Options& o, const Json& j) {
  if (o.out.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  ensure_dir(o.out);
  open_out(o.out, "report.json") << j.dump(2) << '\n';
}

int cmd_configure(const Options& o) {
  ArrayGeometry g;
  if (!o.config.empty()) g = campaign_config_from_json(read_config(o)).geometry;
  if (o.tiles) g.tiles_per_row = *o.tiles;
  if (o.pes) g.pes_per_tile = *o.pes;
  if (o.mode) g.mode = parse_dataflow(*o.mode);
  const ShieldConfig s = configure_shields(g);
  emit_json(o, {{"shield", to_json(s)}, {"timing", to_json(pipeline_schedule(o.groups, s))}});
  return 0;
}

void print_trial(const TrialResult& t, const char* label) {
  std::cout << label << ": trial " << t.trial << " batch " << t.batch << " cycles " << t.cycles;
  if (t.samples) std::cout << " correct " << t.correct << "/" << t.samples;
  std::cout << '\n';
  for (const auto& e : t.events)
    std::cout << "  cycle " << e.cycle << "  " << to_string(e.component) << "  " << e.unit << "  " << e.status
              << "  latency " << e.latency_cycles << '\n';
}

int run_single(const Options& o, const PreparedWorkload& wl, const FaultPlan& plan) {
  const TrialResult guarded = run_trial(wl, plan, !o.unprotected, plan.trial);
  const TrialResult plain = run_trial(wl, plan, false, plan.trial);
  const TrialResult golden = run_trial(wl, FaultPlan{}, false, plan.trial);
  std::cout << "faults: " << plan.transients.size() << " transient, " << plan.permanents.size() << " permanent\n";
  for (std::size_t i = 0; i < guarded.faults.size(); ++i) {
    const auto& f = guarded.faults[i];
    const auto& e = plan.transients[i];
    std::cout << "  " << to_string(f.kind) << "  " << f.target << "  word " << e.word << " bit " << e.bit
              << (f.consequential ? "  consequential" : "") << (f.detected ? "  detected" : "")
              << (f.corrected ? "  corrected" : "") << '\n';
  }
  print_trial(guarded, o.unprotected ? "unprotected" : "protected");
  print_trial(plain, "unprotected replay");
  std::cout << "output matches golden: protected " << (guarded.output == golden.output) << ", unprotected "
            << (plain.output == golden.output) << '\n';

  if (!o.out.empty()) {
    ensure_dir(o.out);
    open_out(o.out, "report.json") << Json{{"config", to_json(wl.config)},
                                           {"plan", to_json(plan)},
                                           {"protected", to_json(guarded)},
                                           {"unprotected", to_json(plain)},
                                           {"output_matches_golden",
                                            {{"protected", guarded.output == golden.output},
                                             {"unprotected", plain.output == golden.output}}}}
                                          .dump(2)
                                   << '\n';
    open_out(o.out, "plan.json") << to_json(plan).dump(2) << '\n';
    std::vector<EventRow> rows;
    for (const auto& e : guarded.events) rows.push_back({plan.rate, plan.trial, e});
    auto ev = open_out(o.out, "events.csv");
    write_events_csv(ev, rows);
    auto el = open_out(o.out, "error_log.csv");
    write_error_log_csv(el, guarded.error_log);
  }
  return 0;
}

int cmd_simulate(const Options& o) {
  const CampaignConfig cfg = campaign_config_from_json(read_config(o));
  const PreparedWorkload wl = prepare_workload(cfg);
  const double rate = o.rate ? *o.rate : (cfg.faults.rates.empty() ? 0.0 : cfg.faults.rates.front());
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigurationError("rate must lie in [0, 1]");
  std::size_t ri = 0;
  const auto it = std::find(cfg.faults.rates.begin(), cfg.faults.rates.end(), rate);
  if (it != cfg.faults.rates.end()) ri = static_cast<std::size_t>(it - cfg.faults.rates.begin());
  return run_single(o, wl, plan_for_trial(wl, rate, ri, o.trial));
}

int cmd_replay(const Options& o) {
  if (o.plan.empty()) throw ConfigurationError("replay needs --plan");
  const CampaignConfig cfg = campaign_config_from_json(read_config(o));
  const PreparedWorkload wl = prepare_workload(cfg);
  const FaultPlan plan = fault_plan_from_json(load_json(o.plan));
  for (const auto& e : plan.transients) {
    const auto s = std::find_if(wl.sites.begin(), wl.sites.end(),
                                [&](const ExposureSite& x) { return x.kind == e.kind && x.target == e.target; });
    if (s == wl.sites.end() || e.word >= s->words || e.bit >= s->word_bits)
      throw ConfigurationError("plan event outside the workload: " + e.target);
  }
  for (const auto& p : plan.permanents) {
    const auto s = std::find_if(wl.sites.begin(), wl.sites.end(),
                                [&](const ExposureSite& x) { return x.kind == p.kind && x.target == p.target; });
    if (s == wl.sites.end()) throw ConfigurationError("plan fault outside the workload: " + p.target);
    plan_permanent(*s, p.word, p.bit, p.value);
  }
  return run_single(o, wl, plan);
}

int cmd_campaign(const Options& o) {
  const CampaignConfig cfg = campaign_config_from_json(read_config(o));
  const CampaignRun run = run_campaign(cfg);
  const Json report = to_json(run.report);
  for (const auto& r : run.report.rates) {
    std::cout << "rate " << Json(r.rate).dump() << ": injected " << r.totals.injected << ", consequential "
              << r.totals.consequential << ", detection " << optional_text(r.detection_coverage)
              << ", correction " << optional_text(r.correction_coverage) << '\n';
  }
  emit_json(o, report);
  if (!o.out.empty()) {
    auto tr = open_out(o.out, "trials.csv");
    write_trials_csv(tr, run.trials);
    auto ev = open_out(o.out, "events.csv");
    write_events_csv(ev, run.events);
    auto el = open_out(o.out, "error_log.csv");
    write_error_log_csv(el, run.error_log);
  }
  return 0;
}

int cmd_sensitivity(const Options& o) {
  const SensitivityConfig cfg = sensitivity_config_from_json(read_config(o));
  const SensitivityReport rep = sensitivity_sweep(cfg);
  std::cout << "baseline accuracy " << rep.baseline_accuracy << '\n';
  for (const auto& c : rep.cells)
    std::cout << "  " << to_string(c.bit_class) << "  rate " << Json(c.rate).dump() << "  accuracy " << c.accuracy
              << "  drop " << c.drop_points << " points\n";
  emit_json(o, to_json(rep));
  if (!o.out.empty()) {
    auto os = open_out(o.out, "sensitivity.csv");
    write_sensitivity_csv(os, rep);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fault-tolerance model of an NPU: shield sizing, fault campaigns and sensitivity sweeps"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON configuration file");
    sub->add_option("--out", o.out, "Output directory");
  };
  auto* configure = app.add_subcommand("configure", "Print the shield configuration for a geometry");
  common(configure);
  configure->add_option("--tiles", o.tiles, "Tiles per array row (I)");
  configure->add_option("--pes", o.pes, "PEs per tile row (J)");
  configure->add_option("--mode", o.mode, "Dataflow, WS or OS");
  configure->add_option("--groups", o.groups, "Tile-groups for the timing schedule");

  auto* simulate = app.add_subcommand("simulate", "Run one trial and print its event log");
  common(simulate);
  simulate->add_option("--rate", o.rate, "Fault rate (defaults to the first configured rate)");
  simulate->add_option("--trial", o.trial, "Trial index");
  simulate->add_flag("--unprotected", o.unprotected, "Bypass every checker in the primary run");

  auto* campaign = app.add_subcommand("campaign", "Run the full fault campaign");
  common(campaign);

  auto* sensitivity = app.add_subcommand("sensitivity", "Bit-position sensitivity sweep");
  common(sensitivity);

  auto* replay = app.add_subcommand("replay", "Re-run a serialised fault plan");
  common(replay);
  replay->add_option("--plan", o.plan, "Fault plan JSON")->required();
  replay->add_flag("--unprotected", o.unprotected, "Bypass every checker in the primary run");

  CLI11_PARSE(app, argc, argv);
  try {
    if (configure->parsed()) return cmd_configure(o);
    if (simulate->parsed()) return cmd_simulate(o);
    if (campaign->parsed()) return cmd_campaign(o);
    if (sensitivity->parsed()) return cmd_sensitivity(o);
    if (replay->parsed()) return cmd_replay(o);
  } catch (const ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
