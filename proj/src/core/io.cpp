#include "core/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace penmeta {

using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(const std::string& path, const std::string& what) {
  throw std::invalid_argument(path + ": " + what);
}

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) parse_fail(path, "unknown field '" + key + "'");
  }
}

double get_number(const json& obj, const std::string& path, const std::string& key) {
  if (!obj.contains(key)) parse_fail(path, "missing field '" + key + "'");
  if (!obj[key].is_number()) parse_fail(path + "." + key, "expected a number");
  return obj[key].get<double>();
}

std::vector<double> get_number_array(const json& obj, const std::string& path,
                                     const std::string& key) {
  if (!obj.contains(key)) parse_fail(path, "missing field '" + key + "'");
  if (!obj[key].is_array()) parse_fail(path + "." + key, "expected an array");
  std::vector<double> out;
  for (const auto& v : obj[key]) {
    if (!v.is_number()) parse_fail(path + "." + key, "expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

AgeSummary parse_age_summary(const json& obj, const std::string& path) {
  if (!obj.is_object()) parse_fail(path, "expected an object with mean/sd");
  check_keys(obj, path, {"mean", "sd"});
  return {get_number(obj, path, "mean"), get_number(obj, path, "sd")};
}

AgeDistributions parse_age_distributions(const json& obj, const std::string& path,
                                         const AgeSummary& fallback) {
  check_keys(obj, path,
             {"cases", "controls", "cases_carrier", "cases_noncarrier", "controls_carrier",
              "controls_noncarrier"});
  AgeDistributions out{fallback, fallback, fallback, fallback};
  if (obj.contains("cases")) {
    if (obj.contains("cases_carrier") || obj.contains("cases_noncarrier"))
      parse_fail(path, "'cases' conflicts with per-carrier case fields");
    out.cases_carrier = out.cases_noncarrier = parse_age_summary(obj["cases"], path + ".cases");
  }
  if (obj.contains("controls")) {
    if (obj.contains("controls_carrier") || obj.contains("controls_noncarrier"))
      parse_fail(path, "'controls' conflicts with per-carrier control fields");
    out.controls_carrier = out.controls_noncarrier =
        parse_age_summary(obj["controls"], path + ".controls");
  }
  if (obj.contains("cases_carrier"))
    out.cases_carrier = parse_age_summary(obj["cases_carrier"], path + ".cases_carrier");
  if (obj.contains("cases_noncarrier"))
    out.cases_noncarrier = parse_age_summary(obj["cases_noncarrier"], path + ".cases_noncarrier");
  if (obj.contains("controls_carrier"))
    out.controls_carrier = parse_age_summary(obj["controls_carrier"], path + ".controls_carrier");
  if (obj.contains("controls_noncarrier"))
    out.controls_noncarrier =
        parse_age_summary(obj["controls_noncarrier"], path + ".controls_noncarrier");
  return out;
}

StudyRecord parse_study(const json& obj, const std::string& path, const AgeSummary& fallback) {
  if (!obj.is_object()) parse_fail(path, "expected a study object");
  check_keys(obj, path,
             {"id", "modality", "biased", "sample_size", "age_reported", "penetrance", "ratio",
              "ages"});
  StudyRecord rec;
  if (!obj.contains("id") || !obj["id"].is_string()) parse_fail(path, "missing string field 'id'");
  rec.id = obj["id"].get<std::string>();
  if (!obj.contains("modality") || !obj["modality"].is_string())
    parse_fail(path, "missing string field 'modality'");
  rec.modality = modality_from_name(obj["modality"].get<std::string>());
  if (obj.contains("biased")) {
    if (!obj["biased"].is_boolean()) parse_fail(path + ".biased", "expected a boolean");
    rec.biased = obj["biased"].get<bool>();
  }
  if (obj.contains("age_reported")) {
    if (!obj["age_reported"].is_boolean()) parse_fail(path + ".age_reported", "expected a boolean");
    rec.age_reported = obj["age_reported"].get<bool>();
  }
  if (obj.contains("sample_size")) {
    if (!obj["sample_size"].is_number_integer())
      parse_fail(path + ".sample_size", "expected an integer");
    rec.sample_size = obj["sample_size"].get<std::int64_t>();
  }
  if (obj.contains("penetrance")) {
    const json& p = obj["penetrance"];
    const std::string ppath = path + ".penetrance";
    if (!p.is_object()) parse_fail(ppath, "expected an object");
    check_keys(p, ppath, {"ages", "values", "ci_low", "ci_high"});
    PenetranceReport rep;
    rep.ages = get_number_array(p, ppath, "ages");
    rep.values = get_number_array(p, ppath, "values");
    rep.ci_low = get_number_array(p, ppath, "ci_low");
    rep.ci_high = get_number_array(p, ppath, "ci_high");
    rec.penetrance = std::move(rep);
  }
  if (obj.contains("ratio")) {
    const json& r = obj["ratio"];
    const std::string rpath = path + ".ratio";
    if (!r.is_object()) parse_fail(rpath, "expected an object");
    check_keys(r, rpath, {"estimate", "ci_low", "ci_high", "counts"});
    RatioReport rep;
    rep.estimate = get_number(r, rpath, "estimate");
    if (r.contains("ci_low")) rep.ci_low = get_number(r, rpath, "ci_low");
    if (r.contains("ci_high")) rep.ci_high = get_number(r, rpath, "ci_high");
    if (r.contains("counts")) {
      const json& t = r["counts"];
      const std::string tpath = rpath + ".counts";
      if (!t.is_object()) parse_fail(tpath, "expected an object");
      check_keys(t, tpath,
                 {"carrier_cases", "carrier_controls", "noncarrier_cases", "noncarrier_controls"});
      CountTable table;
      table.carrier_cases = static_cast<std::int64_t>(get_number(t, tpath, "carrier_cases"));
      table.carrier_controls = static_cast<std::int64_t>(get_number(t, tpath, "carrier_controls"));
      table.noncarrier_cases = static_cast<std::int64_t>(get_number(t, tpath, "noncarrier_cases"));
      table.noncarrier_controls =
          static_cast<std::int64_t>(get_number(t, tpath, "noncarrier_controls"));
      rep.counts = table;
    }
    rec.ratio = std::move(rep);
  }
  rec.ages = obj.contains("ages")
                 ? parse_age_distributions(obj["ages"], path + ".ages", fallback)
                 : AgeDistributions{fallback, fallback, fallback, fallback};
  return rec;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json age_summary_json(const AgeSummary& s) { return json{{"mean", s.mean}, {"sd", s.sd}}; }

}  // namespace

StudyFile parse_study_file(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("study file is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) parse_fail("$", "expected a top-level object");
  check_keys(root, "$", {"studies", "baseline", "defaults"});
  StudyFile file;
  AgeSummary fallback = kDefaultAgeSummary;
  if (root.contains("defaults")) {
    fallback = parse_age_summary(root["defaults"], "$.defaults");
    file.defaults = fallback;
  }
  if (root.contains("baseline")) {
    const json& b = root["baseline"];
    check_keys(b, "$.baseline", {"kappa", "lambda", "truncation_age"});
    BaselinePenetrance base;
    base.curve.kappa = get_number(b, "$.baseline", "kappa");
    base.curve.lambda = get_number(b, "$.baseline", "lambda");
    if (b.contains("truncation_age")) base.truncation_age = get_number(b, "$.baseline", "truncation_age");
    file.baseline = base;
  }
  if (!root.contains("studies") || !root["studies"].is_array())
    parse_fail("$", "missing array field 'studies'");
  std::size_t index = 0;
  for (const auto& s : root["studies"]) {
    file.studies.push_back(
        parse_study(s, "$.studies[" + std::to_string(index) + "]", fallback));
    ++index;
  }
  validate_studies(file.studies);
  return file;
}

std::string serialize_study_file(const StudyFile& file) {
  json root = json::object();
  if (file.defaults) root["defaults"] = age_summary_json(*file.defaults);
  if (file.baseline) {
    json b{{"kappa", file.baseline->curve.kappa}, {"lambda", file.baseline->curve.lambda}};
    if (file.baseline->truncation_age) b["truncation_age"] = *file.baseline->truncation_age;
    root["baseline"] = b;
  }
  root["studies"] = json::array();
  for (const StudyRecord& rec : file.studies) {
    json s = json::object();
    s["id"] = rec.id;
    s["modality"] = modality_name(rec.modality);
    s["biased"] = rec.biased;
    s["age_reported"] = rec.age_reported;
    if (rec.sample_size) s["sample_size"] = *rec.sample_size;
    if (rec.penetrance) {
      s["penetrance"] = json{{"ages", rec.penetrance->ages},
                             {"values", rec.penetrance->values},
                             {"ci_low", rec.penetrance->ci_low},
                             {"ci_high", rec.penetrance->ci_high}};
    }
    if (rec.ratio) {
      json r{{"estimate", rec.ratio->estimate}};
      if (rec.ratio->ci_low) r["ci_low"] = *rec.ratio->ci_low;
      if (rec.ratio->ci_high) r["ci_high"] = *rec.ratio->ci_high;
      if (rec.ratio->counts) {
        r["counts"] = json{{"carrier_cases", rec.ratio->counts->carrier_cases},
                           {"carrier_controls", rec.ratio->counts->carrier_controls},
                           {"noncarrier_cases", rec.ratio->counts->noncarrier_cases},
                           {"noncarrier_controls", rec.ratio->counts->noncarrier_controls}};
      }
      s["ratio"] = r;
    }
    s["ages"] = json{{"cases_carrier", age_summary_json(rec.ages.cases_carrier)},
                     {"cases_noncarrier", age_summary_json(rec.ages.cases_noncarrier)},
                     {"controls_carrier", age_summary_json(rec.ages.controls_carrier)},
                     {"controls_noncarrier", age_summary_json(rec.ages.controls_noncarrier)}};
    root["studies"].push_back(s);
  }
  return root.dump(2);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + tmp.string());
    out << content;
    if (!out.good()) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string trace_csv(const ChainTrace& trace) {
  std::ostringstream out;
  out << "iteration,a,b,c,d";
  for (const auto& id : trace.study_ids) out << ",kappa_" << id;
  for (const auto& id : trace.study_ids) out << ",lambda_" << id;
  for (std::size_t s = 0; s < trace.study_ids.size(); ++s)
    if (trace.bias_tracked[s]) out << ",bias_" << trace.study_ids[s];
  out << "\n";
  for (std::size_t t = 0; t < trace.iterations.size(); ++t) {
    out << trace.iterations[t] << ',' << format_double(trace.hyper[t].a) << ','
        << format_double(trace.hyper[t].b) << ',' << format_double(trace.hyper[t].c) << ','
        << format_double(trace.hyper[t].d);
    for (double v : trace.kappa[t]) out << ',' << format_double(v);
    for (double v : trace.lambda_[t]) out << ',' << format_double(v);
    for (std::size_t s = 0; s < trace.study_ids.size(); ++s)
      if (trace.bias_tracked[s]) out << ',' << format_double(trace.bias[t][s]);
    out << "\n";
  }
  return out.str();
}

std::string curve_csv(const PosteriorCurve& curve) {
  std::ostringstream out;
  out << "age,mean,cri_low,cri_high\n";
  char buf[128];
  for (std::size_t i = 0; i < curve.ages.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%g,%.10g,%.10g,%.10g\n", curve.ages[i], curve.mean[i],
                  curve.cri_low[i], curve.cri_high[i]);
    out << buf;
  }
  return out.str();
}

std::string sim_report_csv(const SimReport& report) {
  std::ostringstream out;
  out << "setting,scenario,approach,age,true,mean_estimate,rmse_over_true,coverage,n_replicates\n";
  char buf[192];
  for (const SimCell& c : report.cells) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%d,%g,%.6f,%.6f,%.6f,%.6f,%d\n", c.setting, c.scenario,
                  c.approach, c.age, c.true_value, c.mean_estimate, c.rmse_over_true, c.coverage,
                  c.n_replicates);
    out << buf;
  }
  return out.str();
}

TraceTable parse_trace_csv(const std::string& csv_text) {
  TraceTable table;
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("trace CSV is empty");
  std::istringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) table.columns.push_back(cell);
  if (table.columns.empty()) throw std::invalid_argument("trace CSV has no columns");
  table.values.resize(table.columns.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::size_t col = 0;
    while (std::getline(fields, cell, ',')) {
      if (col >= table.columns.size())
        throw std::invalid_argument("trace CSV row " + std::to_string(row + 2) +
                                    " has too many fields");
      table.values[col].push_back(std::strtod(cell.c_str(), nullptr));
      ++col;
    }
    if (col != table.columns.size())
      throw std::invalid_argument("trace CSV row " + std::to_string(row + 2) +
                                  " has too few fields");
    ++row;
  }
  return table;
}

}  // namespace penmeta
