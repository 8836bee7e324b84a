#pragma once

#include "linesense/metrics.hpp"
#include "linesense/pipeline.hpp"

namespace linesense::metrics {

// One row per phase. RMS over the largest whole-cycle prefix of the run;
// NMAE and max |residual| over the full waveforms. Without a Hall reference
// the measured columns are left empty and the table carries a note.
ComparisonTable build_table(const pipeline::RunRecord& run);

}  // namespace linesense::metrics
