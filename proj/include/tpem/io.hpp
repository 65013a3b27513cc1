#pragma once
// Output writers: per-step slot-norm CSV, the raw little-endian float64
// state container with its JSON sidecar, and small text helpers.

#include "tpem/evosolve.hpp"

#include <string>

namespace tpem {

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// CSV with header "step,t,slot,norm"; one row per step and slot.
void write_series_csv(const std::string& path, const TimeSeries& series, const SystemLayout& layout);

// Raw container: states step-major, each coordinate stored as two
// little-endian float64 values (re, im). The sidecar documents the shape.
void write_series_raw(const std::string& rawPath, const std::string& sidecarPath, const TimeSeries& series,
                      const SystemLayout& layout);

std::string series_summary(const TimeSeries& series, const SystemLayout& layout);

}  // namespace tpem
