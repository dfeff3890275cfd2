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

#include "npuguard/report.hpp"

#include <fstream>
#include <ostream>
#include <set>

namespace npuguard {

namespace {

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json counts_json(const SiteCounts& c) {
  return {{"injected", c.injected}, {"consequential", c.consequential}, {"detected", c.detected},
          {"corrected", c.corrected}};
}

Json mask_json(const MaskPolicy& m) {
  switch (m.kind) {
    case MaskPolicyKind::Full: return "full";
    case MaskPolicyKind::TopSensitive: return "top_sensitive";
    case MaskPolicyKind::Custom: return Json{{"custom", m.custom}};
  }
  return nullptr;
}

/// Object view that remembers which keys were read and rejects the rest.
class Fields {
 public:
  Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigurationError(where_ + ": expected an object");
  }
  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigurationError(where_ + "." + key + ": " + e.what());
    }
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigurationError(where_ + ": unknown key '" + k + "'");
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <typename E, typename Parse>
void get_enum(Fields& f, const char* key, E& out, Parse parse) {
  const Json* c = f.child(key);
  if (!c) return;
  if (!c->is_string()) throw ConfigurationError(f.path(key) + ": expected a string");
  try {
    out = parse(c->get<std::string>());
  } catch (const ConfigurationError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigurationError(f.path(key) + ": " + e.what());
  }
}

MaskPolicy mask_from_json(const Json& j, const std::string& where) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "full") return MaskPolicy::full();
    if (s == "top_sensitive") return MaskPolicy::top_sensitive();
    throw ConfigurationError(where + ": unknown mask policy '" + s + "'");
  }
  Fields f(j, where);
  std::uint32_t m = 0;
  f.get("custom", m);
  f.finish();
  return MaskPolicy::custom_mask(m);
}

ArrayGeometry geometry_from_json(const Json& j, const std::string& where) {
  ArrayGeometry g;
  Fields f(j, where);
  f.get("tiles_per_row", g.tiles_per_row);
  f.get("pes_per_tile", g.pes_per_tile);
  get_enum(f, "mode", g.mode, parse_dataflow);
  f.finish();
  return g;
}

Json geometry_json(const ArrayGeometry& g) {
  return {{"tiles_per_row", g.tiles_per_row}, {"pes_per_tile", g.pes_per_tile}, {"mode", to_string(g.mode)}};
}

BlobSpec blobs_from_json(const Json& j, const std::string& where, BlobSpec b) {
  Fields f(j, where);
  f.get("features", b.features);
  f.get("classes", b.classes);
  f.get("separation", b.separation);
  f.get("noise", b.noise);
  f.get("seed", b.seed);
  f.finish();
  return b;
}

Json blobs_json(const BlobSpec& b) {
  return {{"features", b.features}, {"classes", b.classes}, {"separation", b.separation}, {"noise", b.noise},
          {"seed", b.seed}};
}

TrainConfig train_from_json(const Json& j, const std::string& where, TrainConfig t) {
  Fields f(j, where);
  f.get("epochs", t.epochs);
  f.get("batch", t.batch);
  f.get("learning_rate", t.learning_rate);
  f.get("seed", t.seed);
  f.finish();
  return t;
}

Json train_json(const TrainConfig& t) {
  return {{"epochs", t.epochs}, {"batch", t.batch}, {"learning_rate", t.learning_rate}, {"seed", t.seed}};
}

PermanentFault permanent_from_json(const Json& j, const std::string& where) {
  PermanentFault p;
  Fields f(j, where);
  get_enum(f, "kind", p.kind, parse_site_kind);
  f.get("target", p.target);
  f.get("word", p.word);
  f.get("bit", p.bit);
  f.get("value", p.value);
  f.finish();
  return p;
}

Json permanent_json(const PermanentFault& p) {
  return {{"kind", to_string(p.kind)}, {"target", p.target}, {"word", p.word}, {"bit", p.bit}, {"value", p.value}};
}

}  // namespace

Json to_json(const ShieldConfig& s) {
  return {{"geometry", geometry_json(s.geometry)},
          {"shields", s.shields},
          {"sigma", s.sigma},
          {"array_window", s.array_window},
          {"tree_depth", s.tree_depth},
          {"adder_levels", s.adder_levels},
          {"levels_per_stage", s.levels_per_stage}};
}

Json to_json(const TimingReport& t) {
  return {{"groups", t.groups},
          {"s1_cycles", t.s1_cycles},
          {"s2_cycles", t.s2_cycles},
          {"s3_cycles", t.s3_cycles},
          {"s4_cycles", t.s4_cycles},
          {"baseline_cycles", t.baseline_cycles},
          {"protected_cycles", t.protected_cycles},
          {"slowdown", t.slowdown},
          {"worst_detection_latency_cycles", t.worst_detection_latency_cycles}};
}

Json to_json(const CampaignConfig& c) {
  const auto& w = c.workload;
  const auto& p = c.protection;
  Json weights = Json::object();
  for (const SiteKind k : kAllSiteKinds) weights[std::string(to_string(k))] = c.faults.weight(k);
  Json perms = Json::array();
  for (const auto& f : c.faults.permanents) perms.push_back(permanent_json(f));
  return {
      {"geometry", geometry_json(c.geometry)},
      {"workload",
       {{"kind", to_string(w.kind)},
        {"dtype", to_string(w.dtype)},
        {"gemm_groups", w.gemm_groups},
        {"gemm_seed", w.gemm_seed},
        {"layers", w.layers},
        {"batch", w.batch},
        {"test_samples", w.test_samples},
        {"train_samples", w.train_samples},
        {"blobs", blobs_json(w.blobs)},
        {"train", train_json(w.train)}}},
      {"protection",
       {{"memory", p.memory},
        {"array", p.array},
        {"registers", p.registers},
        {"nonlinear", p.nonlinear},
        {"mask", mask_json(p.mask)},
        {"redundant_copies", p.redundant_copies},
        {"shield_tolerance", {{"rel_fp32", p.shield_tolerance.rel_fp32}, {"rel_bf16", p.shield_tolerance.rel_bf16}}},
        {"nonlinear_tolerance",
         {{"layernorm_scale", p.nonlinear_tolerance.layernorm_scale},
          {"softmax_fp32", p.nonlinear_tolerance.softmax_fp32},
          {"softmax_bf16", p.nonlinear_tolerance.softmax_bf16}}}}},
      {"faults", {{"rates", c.faults.rates}, {"site_weights", weights}, {"permanents", perms}}},
      {"trials", c.trials},
      {"seed", c.seed},
      {"threads", c.threads},
      {"frequency_mhz", c.frequency_mhz},
  };
}

CampaignConfig campaign_config_from_json(const Json& j) {
  CampaignConfig c;
  Fields f(j, "config");
  if (const Json* g = f.child("geometry")) c.geometry = geometry_from_json(*g, "config.geometry");
  if (const Json* wj = f.child("workload")) {
    auto& w = c.workload;
    Fields wf(*wj, "config.workload");
    get_enum(wf, "kind", w.kind, parse_workload_kind);
    get_enum(wf, "dtype", w.dtype, parse_dtype);
    wf.get("gemm_groups", w.gemm_groups);
    wf.get("gemm_seed", w.gemm_seed);
    wf.get("layers", w.layers);
    wf.get("batch", w.batch);
    wf.get("test_samples", w.test_samples);
    wf.get("train_samples", w.train_samples);
    if (const Json* b = wf.child("blobs")) w.blobs = blobs_from_json(*b, "config.workload.blobs", w.blobs);
    if (const Json* t = wf.child("train")) w.train = train_from_json(*t, "config.workload.train", w.train);
    wf.finish();
  }
  if (const Json* pj = f.child("protection")) {
    auto& p = c.protection;
    Fields pf(*pj, "config.protection");
    pf.get("memory", p.memory);
    pf.get("array", p.array);
    pf.get("registers", p.registers);
    pf.get("nonlinear", p.nonlinear);
    if (const Json* m = pf.child("mask")) p.mask = mask_from_json(*m, "config.protection.mask");
    pf.get("redundant_copies", p.redundant_copies);
    if (const Json* s = pf.child("shield_tolerance")) {
      Fields sf(*s, "config.protection.shield_tolerance");
      sf.get("rel_fp32", p.shield_tolerance.rel_fp32);
      sf.get("rel_bf16", p.shield_tolerance.rel_bf16);
      sf.finish();
    }
    if (const Json* s = pf.child("nonlinear_tolerance")) {
      Fields sf(*s, "config.protection.nonlinear_tolerance");
      sf.get("layernorm_scale", p.nonlinear_tolerance.layernorm_scale);
      sf.get("softmax_fp32", p.nonlinear_tolerance.softmax_fp32);
      sf.get("softmax_bf16", p.nonlinear_tolerance.softmax_bf16);
      sf.finish();
    }
    pf.finish();
  }
  if (const Json* fj = f.child("faults")) {
    Fields ff(*fj, "config.faults");
    ff.get("rates", c.faults.rates);
    if (const Json* sw = ff.child("site_weights")) {
      if (!sw->is_object()) throw ConfigurationError("config.faults.site_weights: expected an object");
      for (const auto& [k, v] : sw->items()) {
        if (!v.is_number()) throw ConfigurationError("config.faults.site_weights." + k + ": expected a number");
        c.faults.site_weights[parse_site_kind(k)] = v.get<double>();
      }
    }
    if (const Json* pj = ff.child("permanents")) {
      if (!pj->is_array()) throw ConfigurationError("config.faults.permanents: expected an array");
      for (std::size_t i = 0; i < pj->size(); ++i)
        c.faults.permanents.push_back(
            permanent_from_json((*pj)[i], "config.faults.permanents[" + std::to_string(i) + "]"));
    }
    ff.finish();
  }
  f.get("trials", c.trials);
  f.get("seed", c.seed);
  f.get("threads", c.threads);
  f.get("frequency_mhz", c.frequency_mhz);
  f.finish();
  c.validate();
  return c;
}

Json to_json(const CampaignReport& r) {
  Json rates = Json::array();
  const double ns_per_cycle = 1000.0 / r.config.frequency_mhz;
  for (const auto& rr : r.rates) {
    Json lat = Json::object();
    for (const auto& [c, s] : rr.latency)
      lat[to_string(c)] = {{"events", s.events},
                           {"worst_cycles", s.worst_cycles},
                           {"mean_cycles", s.mean_cycles},
                           {"worst_ns", static_cast<double>(s.worst_cycles) * ns_per_cycle}};
    Json sites = Json::object();
    for (const auto& [k, c] : rr.per_site) sites[std::string(to_string(k))] = counts_json(c);
    rates.push_back({{"rate", rr.rate},
                     {"trials", rr.trials},
                     {"totals", counts_json(rr.totals)},
                     {"detection_coverage", optional_json(rr.detection_coverage)},
                     {"correction_coverage", optional_json(rr.correction_coverage)},
                     {"raw_detection_coverage", optional_json(rr.raw_detection_coverage)},
                     {"accuracy_protected", optional_json(rr.accuracy_protected)},
                     {"accuracy_unprotected", optional_json(rr.accuracy_unprotected)},
                     {"corrupted_outputs_protected", rr.corrupted_outputs_protected},
                     {"corrupted_outputs_unprotected", rr.corrupted_outputs_unprotected},
                     {"latency", lat},
                     {"per_site", sites}});
  }
  Json modeled = Json::object();
  for (const auto& [c, v] : r.modeled_worst_latency_cycles)
    modeled[to_string(c)] = {{"cycles", v}, {"ns", static_cast<double>(v) * ns_per_cycle}};
  return {{"config", to_json(r.config)},
          {"shield", to_json(r.shield)},
          {"timing", to_json(r.timing)},
          {"input_bits", r.input_bits},
          {"golden_accuracy", optional_json(r.golden_accuracy)},
          {"float_accuracy", optional_json(r.float_accuracy)},
          {"reference_accuracy", optional_json(r.reference_accuracy)},
          {"decoupled", r.decoupled},
          {"modeled_worst_latency", modeled},
          {"latency_anchor", "array events from compute issue, memory events from read issue"},
          {"rates", rates}};
}

Json to_json(const SensitivityConfig& c) {
  std::vector<std::string> classes;
  for (const BitClass b : c.classes) classes.emplace_back(to_string(b));
  return {{"blobs", blobs_json(c.blobs)},
          {"layers", c.layers},
          {"train", train_json(c.train)},
          {"train_samples", c.train_samples},
          {"eval_samples", c.eval_samples},
          {"classes", classes},
          {"rates", c.rates},
          {"trials", c.trials},
          {"seed", c.seed},
          {"threads", c.threads}};
}

SensitivityConfig sensitivity_config_from_json(const Json& j) {
  SensitivityConfig c;
  Fields f(j, "config");
  if (const Json* b = f.child("blobs")) c.blobs = blobs_from_json(*b, "config.blobs", c.blobs);
  f.get("layers", c.layers);
  if (const Json* t = f.child("train")) c.train = train_from_json(*t, "config.train", c.train);
  f.get("train_samples", c.train_samples);
  f.get("eval_samples", c.eval_samples);
  std::vector<std::string> classes;
  f.get("classes", classes);
  if (!classes.empty()) {
    c.classes.clear();
    for (const auto& s : classes) {
      try {
        c.classes.push_back(parse_bit_class(s));
      } catch (const std::exception& e) {
        throw ConfigurationError(std::string("config.classes: ") + e.what());
      }
    }
  }
  f.get("rates", c.rates);
  f.get("trials", c.trials);
  f.get("seed", c.seed);
  f.get("threads", c.threads);
  f.finish();
  return c;
}

Json to_json(const SensitivityReport& r) {
  Json cells = Json::array();
  for (const auto& c : r.cells)
    cells.push_back({{"bit_class", to_string(c.bit_class)},
                     {"rate", c.rate},
                     {"accuracy", c.accuracy},
                     {"drop_points", c.drop_points},
                     {"mean_flips", c.mean_flips}});
  return {{"config", to_json(r.config)},
          {"baseline_accuracy", r.baseline_accuracy},
          {"resident_bits", r.resident_bits},
          {"cells", cells}};
}

Json to_json(const FaultPlan& p) {
  Json tr = Json::array();
  for (const auto& e : p.transients)
    tr.push_back({{"kind", to_string(e.kind)}, {"target", e.target}, {"word", e.word}, {"bit", e.bit}, {"time", e.time}});
  Json perms = Json::array();
  for (const auto& f : p.permanents) perms.push_back(permanent_json(f));
  return {{"seed", p.seed},         {"trial", p.trial},   {"rate", p.rate},          {"input_bits", p.input_bits},
          {"passes", p.passes},     {"transients", tr},   {"permanents", perms}};
}

FaultPlan fault_plan_from_json(const Json& j) {
  FaultPlan p;
  Fields f(j, "plan");
  f.get("seed", p.seed);
  f.get("trial", p.trial);
  f.get("rate", p.rate);
  f.get("input_bits", p.input_bits);
  f.get("passes", p.passes);
  if (const Json* tj = f.child("transients")) {
    if (!tj->is_array()) throw ConfigurationError("plan.transients: expected an array");
    for (std::size_t i = 0; i < tj->size(); ++i) {
      TransientEvent e;
      Fields ef((*tj)[i], "plan.transients[" + std::to_string(i) + "]");
      get_enum(ef, "kind", e.kind, parse_site_kind);
      ef.get("target", e.target);
      ef.get("word", e.word);
      ef.get("bit", e.bit);
      ef.get("time", e.time);
      ef.finish();
      p.transients.push_back(std::move(e));
    }
  }
  if (const Json* pj = f.child("permanents")) {
    if (!pj->is_array()) throw ConfigurationError("plan.permanents: expected an array");
    for (std::size_t i = 0; i < pj->size(); ++i)
      p.permanents.push_back(permanent_from_json((*pj)[i], "plan.permanents[" + std::to_string(i) + "]"));
  }
  f.finish();
  return p;
}

Json to_json(const TrialResult& t) {
  Json faults = Json::array();
  for (const auto& f : t.faults)
    faults.push_back({{"kind", to_string(f.kind)},
                      {"target", f.target},
                      {"component", to_string(f.component)},
                      {"consequential", f.consequential},
                      {"detected", f.detected},
                      {"corrected", f.corrected}});
  Json events = Json::array();
  for (const auto& e : t.events)
    events.push_back({{"unit", e.unit},
                      {"component", to_string(e.component)},
                      {"status", e.status},
                      {"cycle", e.cycle},
                      {"latency_cycles", e.latency_cycles}});
  Json log = Json::array();
  for (const auto& e : t.error_log)
    log.push_back({{"address", e.address},
                   {"row", e.row},
                   {"col_or_tile", e.col_or_tile},
                   {"kind", to_string(e.kind)},
                   {"count", e.count}});
  Json out = Json::array();
  for (const auto& w : t.output) out.push_back(decode_word(w));
  return {{"trial", t.trial},   {"batch", t.batch},   {"faults", faults}, {"events", events},
          {"samples", t.samples}, {"correct", t.correct}, {"cycles", t.cycles}, {"error_log", log},
          {"output", out}};
}

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError(path + ": " + e.what());
  }
}

void write_trials_csv(std::ostream& os, const std::vector<TrialRow>& rows) {
  os << "rate,trial,injected,consequential,detected,corrected,samples,correct_protected,correct_unprotected,"
        "output_ok_protected,output_ok_unprotected\n";
  for (const auto& r : rows)
    os << Json(r.rate).dump() << ',' << r.trial << ',' << r.counts.injected << ',' << r.counts.consequential << ','
       << r.counts.detected << ',' << r.counts.corrected << ',' << r.samples << ',' << r.correct_protected << ','
       << r.correct_unprotected << ',' << r.output_ok_protected << ',' << r.output_ok_unprotected << '\n';
}

void write_events_csv(std::ostream& os, const std::vector<EventRow>& rows) {
  os << "rate,trial,site,component,status,cycle,latency_cycles\n";
  for (const auto& r : rows)
    os << Json(r.rate).dump() << ',' << r.trial << ',' << r.event.unit << ',' << to_string(r.event.component) << ','
       << r.event.status << ',' << r.event.cycle << ',' << r.event.latency_cycles << '\n';
}

void write_sensitivity_csv(std::ostream& os, const SensitivityReport& r) {
  os << "bit_class,rate,accuracy,drop_points,mean_flips\n";
  for (const auto& c : r.cells)
    os << to_string(c.bit_class) << ',' << Json(c.rate).dump() << ',' << Json(c.accuracy).dump() << ','
       << Json(c.drop_points).dump() << ',' << Json(c.mean_flips).dump() << '\n';
}

}  // namespace npuguard
