#include "tpem/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace tpem {

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_series_csv(const std::string& path, const TimeSeries& series, const SystemLayout& layout) {
  std::ostringstream out;
  out << "step,t,slot,norm\n";
  char buf[64];
  for (size_t j = 0; j < series.states.size(); ++j) {
    for (int s = 0; s < kSlotCount; ++s) {
      double n = layout.spaces[size_t(s)]->norm(
          series.states[j].segment(layout.offset(s), layout.dimOf(s)));
      std::snprintf(buf, sizeof(buf), "%.17g", n);
      out << j << ',' << double(j) * series.dt << ',' << slot_name(s) << ',' << buf << '\n';
    }
  }
  write_text_file(path, out.str());
}

void write_series_raw(const std::string& rawPath, const std::string& sidecarPath, const TimeSeries& series,
                      const SystemLayout& layout) {
  std::ofstream out(rawPath, std::ios::binary);
  if (!out) throw Error("cannot open '" + rawPath + "' for writing");
  for (const Vec& state : series.states) {
    for (Index i = 0; i < state.size(); ++i) {
      double re = state[i].real(), im = state[i].imag();
      out.write(reinterpret_cast<const char*>(&re), sizeof(double));
      out.write(reinterpret_cast<const char*>(&im), sizeof(double));
    }
  }
  out.close();

  nlohmann::ordered_json j;
  j["dt"] = series.dt;
  j["nu"] = series.nu;
  j["onset"] = series.onset;
  j["steps"] = series.states.size();
  j["state_dim"] = layout.dim();
  j["encoding"] = "float64-little-endian,re-im-interleaved,step-major";
  j["wraparound_warning"] = series.wraparoundWarning;
  j["layout"] = nlohmann::ordered_json::array();
  for (int s = 0; s < kSlotCount; ++s)
    j["layout"].push_back(
        {{"slot", slot_name(s)}, {"offset", layout.offset(s)}, {"dim", layout.dimOf(s)}});
  write_text_file(sidecarPath, j.dump(2));
}

std::string series_summary(const TimeSeries& series, const SystemLayout& layout) {
  double preOnset = 0.0, maxNorm = 0.0;
  for (size_t j = 0; j < series.states.size(); ++j) {
    double n = layout.stateNorm(series.states[j]);
    maxNorm = std::max(maxNorm, n);
    if (Index(j) < series.onset) preOnset = std::max(preOnset, n);
  }
  std::ostringstream out;
  out << "steps=" << series.states.size() - 1 << " dt=" << series.dt << " nu=" << series.nu
      << " max_state_norm=" << maxNorm << " max_pre_onset_norm=" << preOnset
      << " wraparound_warning=" << (series.wraparoundWarning ? "yes" : "no");
  return out.str();
}

}  // namespace tpem
