#pragma once

#include <string>

namespace xdet {

// Renders loss and mAP curves from a metrics CSV (the trainer's format) to
// <out_prefix>_losses.png and <out_prefix>_map.png. Returns the number of
// images written (the mAP plot is skipped when the CSV has no eval rows).
int plot_metrics(const std::string& metrics_csv, const std::string& out_prefix);

}  // namespace xdet
