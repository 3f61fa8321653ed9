#include "tvhazard/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tvhazard {

using nlohmann::json;

namespace {

double finite_number(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ValidationError(std::string("missing numeric field '") + key + "'");
  }
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v)) throw ValidationError(std::string("field '") + key + "' must be finite");
  return v;
}

int integer(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer()) {
    throw ValidationError(std::string("missing integer field '") + key + "'");
  }
  return j.at(key).get<int>();
}

const json& array_field(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw ValidationError(std::string("missing array field '") + key + "'");
  }
  return j.at(key);
}

}  // namespace

json observation_to_json(const Observation& o) {
  json rec;
  rec["id"] = o.id;
  if (const auto* iv = std::get_if<IntervalCensored>(&o.censoring)) {
    rec["censoring"] = {{"kind", "interval"}, {"l", iv->left}, {"r", iv->right}};
  } else {
    rec["censoring"] = {{"kind", "right"}, {"t", std::get<RightCensored>(o.censoring).at}};
  }
  json features = json::array();
  for (const auto& track : o.path.tracks()) {
    json changes = json::array();
    for (const auto& c : track.changes) changes.push_back({{"t", c.t}, {"v", c.value}});
    features.push_back({{"j", track.index}, {"changes", std::move(changes)}});
  }
  rec["features"] = std::move(features);
  return rec;
}

Observation observation_from_json(const json& j, const DatasetHeader& header) {
  if (!j.is_object()) throw ValidationError("record must be a JSON object");
  Observation o;
  if (!j.contains("id") || !j.at("id").is_string()) throw ValidationError("missing string field 'id'");
  o.id = j.at("id").get<std::string>();
  if (!j.contains("censoring") || !j.at("censoring").is_object()) {
    throw ValidationError("missing object field 'censoring'");
  }
  const json& c = j.at("censoring");
  const std::string kind = c.value("kind", "");
  if (kind == "interval") {
    o.censoring = IntervalCensored{finite_number(c, "l"), finite_number(c, "r")};
  } else if (kind == "right") {
    o.censoring = RightCensored{finite_number(c, "t")};
  } else {
    throw ValidationError("censoring kind must be \"interval\" or \"right\"");
  }
  validate_censoring(o.censoring);
  if (o.end_time() > header.horizon) throw ValidationError("censoring time beyond the header horizon");

  std::vector<FeatureTrack> tracks;
  if (j.contains("features")) {
    for (const json& f : array_field(j, "features")) {
      FeatureTrack track{integer(f, "j"), {}};
      for (const json& ch : array_field(f, "changes")) {
        track.changes.push_back({finite_number(ch, "t"), finite_number(ch, "v")});
      }
      tracks.push_back(std::move(track));
    }
  }
  o.path = FeaturePath(header.d, std::move(tracks));
  return o;
}

void write_dataset(std::ostream& out, const Dataset& data) {
  out << json{{"d", data.header.d}, {"horizon", data.header.horizon}, {"time_unit", data.header.time_unit}}.dump()
      << '\n';
  for (const auto& o : data.observations) out << observation_to_json(o).dump() << '\n';
}

Dataset read_dataset(std::istream& in) {
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char ch) { return std::isspace(ch); })) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        if (!j.is_object()) throw ValidationError("header must be a JSON object");
        data.header.d = integer(j, "d");
        data.header.horizon = finite_number(j, "horizon");
        data.header.time_unit = j.value("time_unit", std::string("unit"));
        if (data.header.d < 0) throw ValidationError("header d must be nonnegative");
        if (!(data.header.horizon > 0.0)) throw ValidationError("header horizon must be positive");
        have_header = true;
      } else {
        data.observations.push_back(observation_from_json(j, data.header));
      }
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (!have_header) throw ParseError("missing header record", line_no + 1);
  return data;
}

Dataset make_dataset(std::vector<Observation> observations, std::string time_unit) {
  Dataset data;
  data.header.d = dataset_dimension(observations);
  for (const auto& o : observations) data.header.horizon = std::max(data.header.horizon, o.end_time());
  data.header.time_unit = std::move(time_unit);
  data.observations = std::move(observations);
  return data;
}

json model_to_json(const HazardModel& model) {
  const auto& times = model.knots().times();
  json rows = json::array();
  for (Eigen::Index r = 0; r < model.values().rows(); ++r) {
    const Eigen::VectorXd levels = model.values().row(r).transpose();
    if ((levels.array() == 0.0).all()) continue;
    const std::vector<double> jumps = jumps_from_levels(levels);
    json list = json::array();
    for (std::size_t k = 0; k < jumps.size(); ++k) {
      if (jumps[k] != 0.0) list.push_back({{"t", times[k]}, {"delta", jumps[k]}});
    }
    rows.push_back({{"j", r}, {"base", levels[0]}, {"jumps", std::move(list)}});
  }
  return {{"d", model.dimension()},
          {"horizon", model.knots().horizon()},
          {"knots", times},
          {"rows", std::move(rows)}};
}

HazardModel model_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("model file must hold a JSON object");
  const int d = integer(j, "d");
  if (d < 0) throw ValidationError("model dimension must be nonnegative");
  std::vector<double> times;
  for (const json& t : array_field(j, "knots")) {
    if (!t.is_number()) throw ValidationError("knots must be numbers");
    times.push_back(t.get<double>());
  }
  auto knots = make_knot_set(times, finite_number(j, "horizon"));
  if (knots->times() != times) throw ValidationError("model knots must be sorted, distinct and inside the horizon");

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d + 1, static_cast<Eigen::Index>(knots->num_segments()));
  for (const json& row : array_field(j, "rows")) {
    const int r = integer(row, "j");
    if (r < 0 || r > d) throw ValidationError("model row index outside [0, d]");
    std::vector<double> jumps(knots->size(), 0.0);
    for (const json& jump : array_field(row, "jumps")) {
      const double t = finite_number(jump, "t");
      auto it = std::lower_bound(times.begin(), times.end(), t);
      if (it == times.end() || *it != t) throw ValidationError("jump time is not a knot");
      jumps[static_cast<std::size_t>(it - times.begin())] = finite_number(jump, "delta");
    }
    w.row(r) = levels_from_jumps(finite_number(row, "base"), jumps).transpose();
  }
  return HazardModel(std::move(knots), std::move(w));
}

CampaignSpec campaign_spec_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("campaign spec must be a JSON object");
  CampaignSpec spec = default_campaign_spec();
  try {
    spec.d = j.value("d", spec.d);
    spec.horizon = j.value("horizon", spec.horizon);
    spec.n = j.value("n", spec.n);
    spec.baseline_level = j.value("baseline_level", spec.baseline_level);
    spec.feature_density = j.value("feature_density", spec.feature_density);
    spec.scan_times = j.value("scan_times", spec.scan_times);
    spec.monotone_truth = j.value("monotone_truth", spec.monotone_truth);
    spec.seed = j.value("seed", spec.seed);
    spec.toggle_fraction = j.value("toggle_fraction", spec.toggle_fraction);
    if (j.contains("active")) {
      spec.active.clear();
      for (const json& a : j.at("active")) {
        ActiveFeature feature{a.at("j").get<int>(), {}};
        for (const json& l : a.at("levels")) feature.levels.push_back({l.at("t").get<double>(), l.at("level").get<double>()});
        spec.active.push_back(std::move(feature));
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("campaign spec: ") + e.what());
  }
  validate(spec);
  return spec;
}

json campaign_spec_to_json(const CampaignSpec& spec) {
  json active = json::array();
  for (const auto& a : spec.active) {
    json levels = json::array();
    for (const auto& l : a.levels) levels.push_back({{"t", l.t}, {"level", l.level}});
    active.push_back({{"j", a.index}, {"levels", std::move(levels)}});
  }
  return {{"d", spec.d},
          {"horizon", spec.horizon},
          {"n", spec.n},
          {"baseline_level", spec.baseline_level},
          {"feature_density", spec.feature_density},
          {"scan_times", spec.scan_times},
          {"monotone_truth", spec.monotone_truth},
          {"seed", spec.seed},
          {"toggle_fraction", spec.toggle_fraction},
          {"active", std::move(active)}};
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_dataset(in);
}

void save_text(const std::filesystem::path& path, const std::string& text, bool force) {
  if (!force && std::filesystem::exists(path)) {
    throw IoError("refusing to overwrite " + path.string() + " (pass --force)");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void save_dataset(const std::filesystem::path& path, const Dataset& data, bool force) {
  std::ostringstream buffer;
  write_dataset(buffer, data);
  save_text(path, buffer.str(), force);
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace tvhazard
