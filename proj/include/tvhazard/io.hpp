#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvhazard/datagen.hpp"
#include "tvhazard/likelihood.hpp"

namespace tvhazard {

/**
 * Observation files are JSON lines. Line 1 is the header
 *   {"d": 40, "horizon": 9.0, "time_unit": "week"}
 * and every further line is one site:
 *   {"id": "site7",
 *    "censoring": {"kind": "interval", "l": 2.0, "r": 3.0} | {"kind": "right", "t": 9.0},
 *    "features": [{"j": 3, "changes": [{"t": 0.0, "v": 1.0}]}]}
 * Doubles are written in shortest round-trip form, so parse(serialize(x)) == x.
 */
struct DatasetHeader {
  int d = 0;
  double horizon = 0.0;
  std::string time_unit = "unit";
};

struct Dataset {
  DatasetHeader header;
  std::vector<Observation> observations;
};

nlohmann::json observation_to_json(const Observation& o);
/// Throws ValidationError for structurally valid JSON that breaks the schema.
Observation observation_from_json(const nlohmann::json& j, const DatasetHeader& header);

void write_dataset(std::ostream& out, const Dataset& data);
/// Reads record by record; errors carry the 1-based line number (ParseError).
Dataset read_dataset(std::istream& in);

/// Builds the header (d from the paths, horizon = latest censoring time).
Dataset make_dataset(std::vector<Observation> observations, std::string time_unit = "unit");

/**
 * Model files hold the jump-list form of a HazardModel:
 *   {"d": 40, "horizon": 9.0, "knots": [...],
 *    "rows": [{"j": 0, "base": 0.05, "jumps": [{"t": 2.0, "delta": 1.1}]}]}
 * Row j = 0 is the baseline w_0 and row j = k + 1 belongs to feature k.
 * All-zero rows and zero jumps are omitted. Reading back reproduces every
 * coefficient bit for bit.
 */
nlohmann::json model_to_json(const HazardModel& model);
HazardModel model_from_json(const nlohmann::json& j);

/// Keys missing from the JSON keep their default_campaign_spec() values.
CampaignSpec campaign_spec_from_json(const nlohmann::json& j);
nlohmann::json campaign_spec_to_json(const CampaignSpec& spec);

/// File helpers. Writers refuse to replace an existing file unless `force`
/// (IoError); readers throw IoError when the file cannot be opened.
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const std::filesystem::path& path, const Dataset& data, bool force);
nlohmann::json load_json(const std::filesystem::path& path);
void save_text(const std::filesystem::path& path, const std::string& text, bool force);

}  // namespace tvhazard
