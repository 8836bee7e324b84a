#pragma once

// Scenario files (JSON), DAQ frame replay (CSV), and run persistence.

#include "linesense/pipeline.hpp"
#include "linesense/scenario.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

namespace linesense::dataio {

// Parses and validates a scenario. Unknown keys are rejected. Throws
// ParseError (with line) for malformed JSON, ValidationError with the full
// problem list otherwise. Missing optional sections take defaults.
Scenario load_scenario(std::string_view text);
Scenario load_scenario_file(const std::filesystem::path& path);

// Same as load_scenario, from an already parsed document.
Scenario scenario_from_json(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const Scenario& scenario);

// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string scenario_hash(const Scenario& scenario);

// Streaming reader for `t,ot1,ot2,ot3,ot4[,hall_a,hall_b,hall_c,hall_n]`.
// Holds one row at a time. Timestamps must be strictly increasing. An empty
// stream yields no frames.
class FrameReader {
public:
    explicit FrameReader(std::istream& in);

    std::optional<pipeline::Frame> next();
    bool has_hall() const noexcept { return has_hall_; }
    std::size_t row() const noexcept { return row_; }

private:
    std::istream& in_;
    std::size_t line_ = 0;
    std::size_t row_ = 0;
    bool has_hall_ = false;
    std::optional<double> last_t_;
    std::string buffer_;
};

std::vector<pipeline::Frame> read_all_frames(std::istream& in);

void write_frames_csv(std::ostream& out, const std::vector<pipeline::Frame>& frames);

nlohmann::json table_to_json(const metrics::ComparisonTable& table);
metrics::ComparisonTable table_from_json(const nlohmann::json& doc);

nlohmann::json run_to_json(const pipeline::RunRecord& run);

// Writes <dir>/run.json (scenario, matrices, metrics, timing, diagnostics),
// <dir>/frames.csv (recovered series) and <dir>/voltages.csv (raw frames in
// replay format). Returns the run.json path. Throws IoError on failure.
std::filesystem::path write_run(const pipeline::RunRecord& run, const std::filesystem::path& dir);

// Reads a directory written by write_run.
pipeline::RunRecord read_run(const std::filesystem::path& dir);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace linesense::dataio
