#include "linesense/dataio.hpp"

#include "linesense/csv.hpp"
#include "linesense/errors.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace linesense::dataio {

using nlohmann::json;

namespace {

// Reads one JSON object, recording type errors and unknown keys as problems
// prefixed with the object's path.
class ObjectReader {
public:
    ObjectReader(const json& node, std::string path, std::vector<std::string>& problems)
        : node_(node), path_(std::move(path)), problems_(problems) {
        if (!node_.is_object()) {
            problems_.push_back(fmt::format("{}: expected an object", label()));
            ok_ = false;
        }
    }

    ObjectReader(const ObjectReader&) = delete;
    ObjectReader& operator=(const ObjectReader&) = delete;

    ~ObjectReader() {
        if (!ok_) return;
        for (const auto& [key, value] : node_.items())
            if (!seen_.contains(key)) problems_.push_back(fmt::format("{}: unknown key '{}'", label(), key));
    }

    bool ok() const noexcept { return ok_; }

    const json* child(const std::string& key) {
        if (!ok_) return nullptr;
        seen_.insert(key);
        const auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void number(const std::string& key, double& out, bool required = false) {
        const json* v = child(key);
        if (v == nullptr) {
            if (required && ok_) problems_.push_back(fmt::format("{}: missing required number", path(key)));
            return;
        }
        if (!v->is_number()) {
            problems_.push_back(fmt::format("{}: expected a number", path(key)));
            return;
        }
        out = v->get<double>();
    }

    void angle_deg(const std::string& key, double& out_rad) {
        double deg = rad_to_deg(out_rad);
        const json* v = child(key);
        if (v == nullptr) return;
        if (!v->is_number()) {
            problems_.push_back(fmt::format("{}: expected a number", path(key)));
            return;
        }
        deg = v->get<double>();
        out_rad = deg_to_rad(deg);
    }

    void text(const std::string& key, std::string& out, bool required = false) {
        const json* v = child(key);
        if (v == nullptr) {
            if (required && ok_) problems_.push_back(fmt::format("{}: missing required string", path(key)));
            return;
        }
        if (!v->is_string()) {
            problems_.push_back(fmt::format("{}: expected a string", path(key)));
            return;
        }
        out = v->get<std::string>();
    }

    template <typename Int>
    void integer(const std::string& key, Int& out) {
        const json* v = child(key);
        if (v == nullptr) return;
        if (!v->is_number_unsigned()) {
            problems_.push_back(fmt::format("{}: expected a non-negative integer", path(key)));
            return;
        }
        out = v->get<Int>();
    }

private:
    std::string label() const { return path_.empty() ? "scenario" : path_; }

    const json& node_;
    std::string path_;
    std::vector<std::string>& problems_;
    std::set<std::string> seen_;
    bool ok_ = true;
};

std::optional<Phase> parse_phase(const std::string& s) {
    for (Phase p : kPhases)
        if (phase_name(p) == s) return p;
    return std::nullopt;
}

// Degrees for files, trimmed so that e.g. -120 does not print as -119.99999999999999.
double emit_degrees(double rad) {
    const double deg = rad_to_deg(rad);
    const double trimmed = std::round(deg * 1e9) / 1e9;
    return trimmed == 0.0 ? 0.0 : trimmed;
}

void read_phase_load(const json& node, const std::string& path, waveform::PhaseLoad& load,
                     std::vector<std::string>& problems) {
    ObjectReader r(node, path, problems);
    if (!r.ok()) return;
    r.number("amplitude", load.amplitude);
    r.angle_deg("phase_deg", load.phase_angle);
    if (const json* h = r.child("harmonics")) {
        if (!h->is_array()) {
            problems.push_back(fmt::format("{}: expected an array", r.path("harmonics")));
            return;
        }
        load.harmonics.clear();
        for (std::size_t i = 0; i < h->size(); ++i) {
            ObjectReader hr((*h)[i], fmt::format("{}[{}]", r.path("harmonics"), i), problems);
            if (!hr.ok()) continue;
            waveform::Harmonic harmonic;
            double order = 0.0;
            hr.number("order", order, true);
            if (order != std::floor(order)) problems.push_back(fmt::format("{}[{}].order: expected an integer", r.path("harmonics"), i));
            harmonic.order = static_cast<int>(order);
            hr.number("relative_amplitude", harmonic.relative_amplitude, true);
            hr.angle_deg("phase_deg", harmonic.phase);
            load.harmonics.push_back(harmonic);
        }
    }
}

json phase_load_to_json(const waveform::PhaseLoad& load) {
    json harmonics = json::array();
    for (const auto& h : load.harmonics)
        harmonics.push_back(
            {{"order", h.order}, {"relative_amplitude", h.relative_amplitude}, {"phase_deg", emit_degrees(h.phase)}});
    return {{"amplitude", load.amplitude}, {"phase_deg", emit_degrees(load.phase_angle)}, {"harmonics", harmonics}};
}

void read_layout(const json& node, geometry::FacilityLayout& layout, std::vector<std::string>& problems) {
    ObjectReader r(node, "layout", problems);
    if (!r.ok()) return;
    r.number("step", layout.step);
    if (const json* cs = r.child("conductors")) {
        if (!cs->is_array()) {
            problems.emplace_back("layout.conductors: expected an array");
        } else {
            layout.conductors.clear();
            for (std::size_t i = 0; i < cs->size(); ++i) {
                ObjectReader cr((*cs)[i], fmt::format("layout.conductors[{}]", i), problems);
                if (!cr.ok()) continue;
                geometry::ConductorSpan c;
                std::string phase;
                cr.text("phase", phase, true);
                if (auto p = parse_phase(phase)) {
                    c.phase = *p;
                } else if (!phase.empty()) {
                    problems.push_back(fmt::format("layout.conductors[{}].phase: unknown phase '{}'", i, phase));
                }
                cr.number("x_offset", c.x_offset, true);
                cr.number("end_height", c.end_height, true);
                cr.number("sag", c.sag, true);
                cr.number("span_length", c.span_length);
                cr.number("total_length", c.total_length);
                layout.conductors.push_back(c);
            }
        }
    }
    if (const json* hs = r.child("heads")) {
        if (!hs->is_array()) {
            problems.emplace_back("layout.heads: expected an array");
        } else {
            layout.heads.clear();
            for (std::size_t i = 0; i < hs->size(); ++i) {
                ObjectReader hr((*hs)[i], fmt::format("layout.heads[{}]", i), problems);
                if (!hr.ok()) continue;
                geometry::SensorHead h;
                h.id = fmt::format("Head{}", i + 1);
                hr.text("id", h.id);
                hr.number("x", h.position.x, true);
                hr.number("y", h.position.y, true);
                hr.number("z", h.position.z, true);
                layout.heads.push_back(h);
            }
        }
    }
}

void read_load(const json& node, waveform::LoadScenario& load, std::vector<std::string>& problems) {
    ObjectReader r(node, "load", problems);
    if (!r.ok()) return;
    std::string preset;
    r.text("preset", preset);
    if (!preset.empty()) {
        try {
            load = waveform::preset(preset);
        } catch (const ValidationError& e) {
            problems.push_back(fmt::format("load.preset: {}", e.what()));
        }
    }
    r.text("label", load.label);
    r.number("fundamental_hz", load.fundamental_hz);
    std::string mode;
    r.text("neutral_mode", mode);
    if (mode == "kcl")
        load.neutral_mode = waveform::NeutralMode::Kcl;
    else if (mode == "explicit")
        load.neutral_mode = waveform::NeutralMode::Explicit;
    else if (!mode.empty())
        problems.push_back(fmt::format("load.neutral_mode: expected 'kcl' or 'explicit', got '{}'", mode));

    if (const json* phases = r.child("phases")) {
        ObjectReader pr(*phases, "load.phases", problems);
        if (pr.ok()) {
            for (std::size_t p = 0; p < 3; ++p) {
                const std::string name(phase_name(kPhases[p]));
                if (const json* v = pr.child(name)) read_phase_load(*v, pr.path(name), load.phases[p], problems);
            }
        }
    }
    if (const json* n = r.child("neutral")) read_phase_load(*n, "load.neutral", load.neutral, problems);
}

void read_grid(const json& node, waveform::SampleGrid& grid, std::vector<std::string>& problems) {
    ObjectReader r(node, "grid", problems);
    if (!r.ok()) return;
    r.number("rate_hz", grid.rate_hz);
    r.integer("n_samples", grid.n_samples);
    r.number("t0", grid.t0);
}

void read_sensors(const json& node, SensorSuite& sensors, std::vector<std::string>& problems) {
    ObjectReader r(node, "sensors", problems);
    if (!r.ok()) return;
    if (const json* g = r.child("gmr")) {
        if (!g->is_array() || g->size() != 4) {
            problems.emplace_back("sensors.gmr: expected an array of 4 GMR specs (OT1..OT4)");
        } else {
            for (std::size_t k = 0; k < 4; ++k) {
                ObjectReader gr((*g)[k], fmt::format("sensors.gmr[{}]", k), problems);
                if (!gr.ok()) continue;
                gr.number("sensitivity", sensors.gmr[k].sensitivity);
                gr.number("operating_voltage", sensors.gmr[k].operating_voltage);
            }
        }
    }
    r.number("hall_sensitivity", sensors.hall.sensitivity);
}

void read_errors(const json& node, ErrorInjection& errors, std::vector<std::string>& problems) {
    ObjectReader r(node, "errors", problems);
    if (!r.ok()) return;
    if (const json* m = r.child("misalignment_deg")) {
        if (!m->is_array() || m->size() != 2 || !(*m)[0].is_number() || !(*m)[1].is_number())
            problems.emplace_back("errors.misalignment_deg: expected [head1_deg, head2_deg]");
        else
            errors.misalignment = {deg_to_rad((*m)[0].get<double>()), deg_to_rad((*m)[1].get<double>())};
    }
    r.number("noise_rms_tesla", errors.noise_rms);
    r.number("offset_tesla", errors.offset);
}

std::size_t line_of(std::string_view text, std::size_t byte) {
    const auto end = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(end), '\n'));
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
    const auto n_rows = static_cast<Eigen::Index>(rows.size());
    const auto n_cols = n_rows > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
    Eigen::MatrixXd m(n_rows, n_cols);
    for (Eigen::Index r = 0; r < n_rows; ++r)
        for (Eigen::Index c = 0; c < n_cols; ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
    return m;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> number_or_null(const json& v) {
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing", path.string());
    return out;
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw IoError("write failed", path.string());
}

void write_recovered_csv(std::ostream& out, const std::vector<pipeline::RecoveredFrame>& frames) {
    const bool reference = !frames.empty() && std::all_of(frames.begin(), frames.end(), [](const auto& f) {
        return f.measured.has_value() && f.residual.has_value() && f.modeled_fields.has_value();
    });
    out << "t,bx1,bz1,bx2,bz2,calc_a,calc_b,calc_c,calc_n";
    if (reference)
        out << ",meas_a,meas_b,meas_c,meas_n,res_a,res_b,res_c,res_n,model_bx1,model_bz1,model_bx2,model_bz2";
    out << '\n';
    for (const auto& f : frames) {
        const auto b = f.fields.components();
        const auto c = f.calculated.values();
        fmt::print(out, "{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}", f.t, b[0], b[1],
                   b[2], b[3], c[0], c[1], c[2], c[3]);
        if (reference) {
            const auto m = f.measured->values();
            const auto& r = *f.residual;
            const auto mf = f.modeled_fields->components();
            fmt::print(out, ",{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}",
                       m[0], m[1], m[2], m[3], r[0], r[1], r[2], r[3], mf[0], mf[1], mf[2], mf[3]);
        }
        out << '\n';
    }
}

std::vector<pipeline::RecoveredFrame> read_recovered_csv(std::istream& in, const std::string& path) {
    csv::LineReader reader(in);
    const auto header = reader.next();
    if (!header) return {};
    const bool reference = header->size() == 21;
    if (header->size() != 9 && !reference) throw IoError("unexpected frames.csv header", path);
    std::vector<pipeline::RecoveredFrame> frames;
    while (auto row = reader.next()) {
        if (row->size() != header->size()) throw ParseError(fmt::format("expected {} columns", header->size()), reader.line());
        std::array<double, 21> v{};
        for (std::size_t i = 0; i < row->size(); ++i) v[i] = csv::parse_double((*row)[i], reader.line());
        pipeline::RecoveredFrame f;
        f.t = v[0];
        f.fields = field::FieldSample::from_components(v[0], {v[1], v[2], v[3], v[4]});
        f.calculated = field::PhaseCurrents::from_values(v[0], {v[5], v[6], v[7], v[8]});
        if (reference) {
            f.measured = field::PhaseCurrents::from_values(v[0], {v[9], v[10], v[11], v[12]});
            f.residual = std::array<double, 4>{v[13], v[14], v[15], v[16]};
            f.modeled_fields = field::FieldSample::from_components(v[0], {v[17], v[18], v[19], v[20]});
        }
        frames.push_back(f);
    }
    return frames;
}

}  // namespace

Scenario scenario_from_json(const json& doc) {
    std::vector<std::string> problems;
    Scenario s = default_scenario();
    {
        ObjectReader r(doc, "", problems);
        if (r.ok()) {
            r.text("name", s.name);
            r.integer("seed", s.seed);
            r.number("cond_limit", s.cond_limit);
            if (const json* v = r.child("layout")) read_layout(*v, s.layout, problems);
            if (const json* v = r.child("load")) read_load(*v, s.load, problems);
            if (const json* v = r.child("grid")) read_grid(*v, s.grid, problems);
            if (const json* v = r.child("sensors")) read_sensors(*v, s.sensors, problems);
            if (const json* v = r.child("errors")) read_errors(*v, s.errors, problems);
        }
    }
    try {
        validate_scenario(s);
    } catch (const ValidationError& e) {
        problems.insert(problems.end(), e.problems().begin(), e.problems().end());
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));
    return s;
}

Scenario load_scenario(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError(fmt::format("malformed scenario JSON: {}", e.what()), line_of(text, e.byte));
    }
    return scenario_from_json(doc);
}

Scenario load_scenario_file(const std::filesystem::path& path) { return load_scenario(read_text_file(path)); }

json scenario_to_json(const Scenario& s) {
    json conductors = json::array();
    for (const auto& c : s.layout.conductors)
        conductors.push_back({{"phase", std::string(phase_name(c.phase))},
                              {"x_offset", c.x_offset},
                              {"end_height", c.end_height},
                              {"sag", c.sag},
                              {"span_length", c.span_length},
                              {"total_length", c.total_length}});
    json heads = json::array();
    for (const auto& h : s.layout.heads)
        heads.push_back({{"id", h.id}, {"x", h.position.x}, {"y", h.position.y}, {"z", h.position.z}});

    json phases = json::object();
    for (std::size_t p = 0; p < 3; ++p) phases[std::string(phase_name(kPhases[p]))] = phase_load_to_json(s.load.phases[p]);
    json load = {{"label", s.load.label},
                 {"fundamental_hz", s.load.fundamental_hz},
                 {"neutral_mode", s.load.neutral_mode == waveform::NeutralMode::Kcl ? "kcl" : "explicit"},
                 {"phases", phases}};
    if (s.load.neutral_mode == waveform::NeutralMode::Explicit) load["neutral"] = phase_load_to_json(s.load.neutral);

    json gmr = json::array();
    for (const auto& g : s.sensors.gmr) gmr.push_back({{"sensitivity", g.sensitivity}, {"operating_voltage", g.operating_voltage}});

    return {{"name", s.name},
            {"seed", s.seed},
            {"cond_limit", s.cond_limit},
            {"layout", {{"step", s.layout.step}, {"conductors", conductors}, {"heads", heads}}},
            {"load", load},
            {"grid", {{"rate_hz", s.grid.rate_hz}, {"n_samples", s.grid.n_samples}, {"t0", s.grid.t0}}},
            {"sensors", {{"gmr", gmr}, {"hall_sensitivity", s.sensors.hall.sensitivity}}},
            {"errors",
             {{"misalignment_deg", {emit_degrees(s.errors.misalignment[0]), emit_degrees(s.errors.misalignment[1])}},
              {"noise_rms_tesla", s.errors.noise_rms},
              {"offset_tesla", s.errors.offset}}}};
}

std::string scenario_hash(const Scenario& scenario) {
    const std::string canonical = scenario_to_json(scenario).dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return fmt::format("{:016x}", h);
}

FrameReader::FrameReader(std::istream& in) : in_(in) {
    while (std::getline(in_, buffer_)) {
        ++line_;
        if (!buffer_.empty() && buffer_.back() == '\r') buffer_.pop_back();
        if (buffer_.find_first_not_of(" \t") == std::string::npos) continue;
        const auto header = csv::split(buffer_);
        const std::vector<std::string> base{"t", "ot1", "ot2", "ot3", "ot4"};
        std::vector<std::string> with_hall = base;
        with_hall.insert(with_hall.end(), {"hall_a", "hall_b", "hall_c", "hall_n"});
        if (header == base) return;
        if (header == with_hall) {
            has_hall_ = true;
            return;
        }
        throw ParseError("expected header 't,ot1,ot2,ot3,ot4[,hall_a,hall_b,hall_c,hall_n]'", line_);
    }
    // Empty input: no header, no frames.
}

std::optional<pipeline::Frame> FrameReader::next() {
    while (std::getline(in_, buffer_)) {
        ++line_;
        if (!buffer_.empty() && buffer_.back() == '\r') buffer_.pop_back();
        if (buffer_.find_first_not_of(" \t") == std::string::npos) continue;
        ++row_;
        const auto fields = csv::split(buffer_);
        const std::size_t expected = has_hall_ ? 9 : 5;
        if (fields.size() != expected)
            throw ParseError(fmt::format("row {}: expected {} columns, got {}", row_, expected, fields.size()), line_);
        pipeline::Frame frame;
        try {
            frame.t = csv::parse_double(fields[0], line_);
            for (std::size_t k = 0; k < 4; ++k) frame.gmr_volts[k] = csv::parse_double(fields[1 + k], line_);
            if (has_hall_) {
                std::array<double, 4> hall{};
                for (std::size_t k = 0; k < 4; ++k) hall[k] = csv::parse_double(fields[5 + k], line_);
                frame.hall_volts = hall;
            }
        } catch (const ParseError& e) {
            throw ParseError(fmt::format("row {}: {}", row_, e.what()), line_);
        }
        if (!std::isfinite(frame.t)) throw ParseError(fmt::format("row {}: non-finite timestamp", row_), line_);
        if (last_t_ && !(frame.t > *last_t_))
            throw ParseError(fmt::format("row {}: timestamp {} is not strictly increasing", row_, frame.t), line_);
        last_t_ = frame.t;
        return frame;
    }
    return std::nullopt;
}

std::vector<pipeline::Frame> read_all_frames(std::istream& in) {
    FrameReader reader(in);
    std::vector<pipeline::Frame> frames;
    while (auto f = reader.next()) frames.push_back(*f);
    return frames;
}

void write_frames_csv(std::ostream& out, const std::vector<pipeline::Frame>& frames) {
    const bool hall = !frames.empty() &&
                      std::all_of(frames.begin(), frames.end(), [](const auto& f) { return f.hall_volts.has_value(); });
    out << (hall ? "t,ot1,ot2,ot3,ot4,hall_a,hall_b,hall_c,hall_n\n" : "t,ot1,ot2,ot3,ot4\n");
    for (const auto& f : frames) {
        const auto& v = f.gmr_volts;
        fmt::print(out, "{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}", f.t, v[0], v[1], v[2], v[3]);
        if (hall) {
            const auto& h = *f.hall_volts;
            fmt::print(out, ",{:.17g},{:.17g},{:.17g},{:.17g}", h[0], h[1], h[2], h[3]);
        }
        out << '\n';
    }
}

json table_to_json(const metrics::ComparisonTable& table) {
    json rows = json::array();
    for (const auto& r : table.rows)
        rows.push_back({{"load_label", r.load_label},
                        {"phase", std::string(phase_name(r.phase))},
                        {"measured_rms", optional_number(r.measured_rms)},
                        {"calculated_rms", r.calculated_rms},
                        {"nmae_percent", optional_number(r.nmae_percent)},
                        {"relative_accuracy_percent", optional_number(r.relative_accuracy_percent)},
                        {"max_abs_residual", optional_number(r.max_abs_residual)}});
    return {{"rows", rows}, {"note", table.note}};
}

metrics::ComparisonTable table_from_json(const json& doc) {
    metrics::ComparisonTable table;
    table.note = doc.value("note", "");
    for (const auto& r : doc.at("rows")) {
        metrics::ComparisonRow row;
        row.load_label = r.at("load_label").get<std::string>();
        const auto phase = parse_phase(r.at("phase").get<std::string>());
        if (!phase) throw ValidationError("metrics table: unknown phase");
        row.phase = *phase;
        row.measured_rms = number_or_null(r.at("measured_rms"));
        row.calculated_rms = r.at("calculated_rms").get<double>();
        row.nmae_percent = number_or_null(r.at("nmae_percent"));
        row.relative_accuracy_percent = number_or_null(r.at("relative_accuracy_percent"));
        row.max_abs_residual = number_or_null(r.at("max_abs_residual"));
        table.rows.push_back(std::move(row));
    }
    return table;
}

json run_to_json(const pipeline::RunRecord& run) {
    const auto& t = run.timing;
    const auto& d = run.diagnostics;
    return {{"format", "linesense-run/1"},
            {"id", run.id},
            {"scenario", scenario_to_json(run.scenario)},
            {"scenario_hash", scenario_hash(run.scenario)},
            {"coupling",
             {{"row_order", coupling::CouplingMatrix::row_labels(run.matrix.head_count())},
              {"column_order", {"A", "B", "C", "N"}},
              {"matrix", matrix_to_json(run.matrix.entries)},
              {"inverse", matrix_to_json(run.inverse.entries)},
              {"condition_number", run.inverse.condition_number},
              {"least_squares", run.inverse.least_squares}}},
            {"metrics", table_to_json(run.table)},
            {"timing",
             {{"frames", t.frames},
              {"compute_seconds", t.compute_seconds},
              {"total_seconds", t.total_seconds},
              {"per_frame_seconds", t.per_frame_seconds},
              {"samples_per_second", t.samples_per_second},
              {"per_cycle_seconds", t.per_cycle_seconds}}},
            {"diagnostics",
             {{"processed", d.processed},
              {"rejected", d.rejected},
              {"dropped", d.dropped},
              {"saturated", d.saturated},
              {"messages", d.messages}}},
            {"frames", {{"count", run.frames.size()}, {"recovered", "frames.csv"}, {"voltages", "voltages.csv"}}}};
}

std::filesystem::path write_run(const pipeline::RunRecord& run, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(fmt::format("cannot create run directory: {}", ec.message()), dir.string());

    const auto manifest = dir / "run.json";
    {
        auto out = open_for_write(dir / "frames.csv");
        write_recovered_csv(out, run.frames);
        finish_write(out, dir / "frames.csv");
    }
    {
        auto out = open_for_write(dir / "voltages.csv");
        write_frames_csv(out, run.inputs);
        finish_write(out, dir / "voltages.csv");
    }
    {
        auto out = open_for_write(manifest);
        out << run_to_json(run).dump(2) << '\n';
        finish_write(out, manifest);
    }
    return manifest;
}

pipeline::RunRecord read_run(const std::filesystem::path& dir) {
    const auto manifest = dir / "run.json";
    json doc;
    try {
        doc = json::parse(read_text_file(manifest));
    } catch (const json::exception& e) {
        throw IoError(fmt::format("malformed run manifest: {}", e.what()), manifest.string());
    }

    pipeline::RunRecord run;
    try {
        run.id = doc.at("id").get<std::string>();
        run.scenario = scenario_from_json(doc.at("scenario"));
        const auto& c = doc.at("coupling");
        run.matrix.entries = matrix_from_json(c.at("matrix"));
        run.inverse.entries = matrix_from_json(c.at("inverse"));
        run.inverse.condition_number = c.at("condition_number").get<double>();
        run.inverse.least_squares = c.at("least_squares").get<bool>();
        run.table = table_from_json(doc.at("metrics"));
        const auto& t = doc.at("timing");
        run.timing.frames = t.at("frames").get<std::size_t>();
        run.timing.compute_seconds = t.at("compute_seconds").get<double>();
        run.timing.total_seconds = t.at("total_seconds").get<double>();
        run.timing.per_frame_seconds = t.at("per_frame_seconds").get<double>();
        run.timing.samples_per_second = t.at("samples_per_second").get<double>();
        run.timing.per_cycle_seconds = t.at("per_cycle_seconds").get<double>();
        const auto& d = doc.at("diagnostics");
        run.diagnostics.processed = d.at("processed").get<std::size_t>();
        run.diagnostics.rejected = d.at("rejected").get<std::size_t>();
        run.diagnostics.dropped = d.at("dropped").get<std::size_t>();
        run.diagnostics.saturated = d.at("saturated").get<std::size_t>();
        run.diagnostics.messages = d.at("messages").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw IoError(fmt::format("malformed run manifest: {}", e.what()), manifest.string());
    }

    {
        const auto path = dir / "frames.csv";
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open for reading", path.string());
        run.frames = read_recovered_csv(in, path.string());
    }
    {
        const auto path = dir / "voltages.csv";
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open for reading", path.string());
        run.inputs = read_all_frames(in);
    }
    return run;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading", path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace linesense::dataio
