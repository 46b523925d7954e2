#pragma once

#include <ostream>

#include "tdet/config.hpp"

namespace tdet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitGradcheck = 4;

// Each command validates every input before writing anything, returns an
// exit code and reports problems on `err`. Artifact directories get a
// provenance.txt with the seed and config hash.

// <out_dir>/train and <out_dir>/test toy splits.
int cmd_gen_toy(const RunConfig& config, std::ostream& out, std::ostream& err);
// Degrades the dataset at data_dir into out_dir; image i uses seed ^ i.
int cmd_synth(const RunConfig& config, std::ostream& out, std::ostream& err);
// <out_dir>/model.ckpt and <out_dir>/loss_log.csv.
int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err);
// <out_dir>/detections.csv for every image of data_dir; overlays go to
// <out_dir>/overlays when requested.
int cmd_detect(const RunConfig& config, bool overlay, std::ostream& out, std::ostream& err);
// Scores `detections` against data_dir into <out_dir>/report.csv and
// report.txt; the table is echoed on `out`.
int cmd_eval(const RunConfig& config, std::ostream& out, std::ostream& err);
// Prints one line per registered operator; exit 4 when any error >= 1e-4.
int cmd_gradcheck(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace tdet::cli
