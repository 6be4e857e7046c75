#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/domain.hpp"
#include "core/inference.hpp"
#include "core/posterior.hpp"
#include "core/simgen.hpp"

namespace penmeta {

struct StudyFile {
  std::vector<StudyRecord> studies;
  std::optional<BaselinePenetrance> baseline;
  std::optional<AgeSummary> defaults;
};

/// Strict parse: unknown fields are errors, every record is validated.
/// Throws std::invalid_argument carrying the field path.
StudyFile parse_study_file(const std::string& json_text);

/// Canonical serialization (sorted keys, stable float format); parsing it
/// back reproduces identical records. Also the checksum input.
std::string serialize_study_file(const StudyFile& file);

std::string read_text_file(const std::string& path);

/// Write-temp-then-rename so partially written outputs never appear.
void write_text_atomic(const std::string& path, const std::string& content);

std::string trace_csv(const ChainTrace& trace);
std::string curve_csv(const PosteriorCurve& curve);
std::string sim_report_csv(const SimReport& report);

struct TraceTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> values;  // [column][row]
};

TraceTable parse_trace_csv(const std::string& csv_text);

}  // namespace penmeta
